//! Trace replay through the cache network on the event loop.
//!
//! Four modes build on each other: `no_cache` sends every request to the
//! origin; `lru_only` adds read-through LRU at home DTNs; `virtual_groups`
//! adds k-means placement, the group/peer lookup tiers, and group copies of
//! demand-fetched data; `smart_cache` adds per-stream prediction, pre-fetch,
//! and real-time streaming subscriptions.
//!
//! A request completes when all its segments are present at the user's home
//! DTN; its latency is completion minus arrival. Concurrent fetches of the
//! same segment to the same DTN are collapsed in the cached modes, so a
//! request whose pre-fetch is still in flight waits for that transfer instead
//! of fetching again. The uncached baseline never de-duplicates.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::predict::{gap_spread, predict_next, schedule_prefetch};
use crate::cachenet::{
    build_placement, segment_size, segments_for, segments_for_window, CacheNetwork, ChainScope,
    PlacementConfig, SegmentKey, Tier,
};
use crate::netsim::{Engine, EventKind, FlowId, NodeId, Topology};
use crate::workload::{
    classify_user_pattern, Catalog, Channel, ClassifierConfig, ObjectId, PatternKind, Request,
    UserId,
};
use crate::{Error, Result};

/// Delivery mechanism under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    NoCache,
    LruOnly,
    VirtualGroups,
    SmartCache,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::NoCache => "no_cache",
            Mode::LruOnly => "lru_only",
            Mode::VirtualGroups => "virtual_groups",
            Mode::SmartCache => "smart_cache",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "no_cache" => Some(Mode::NoCache),
            "lru_only" => Some(Mode::LruOnly),
            "virtual_groups" => Some(Mode::VirtualGroups),
            "smart_cache" => Some(Mode::SmartCache),
            _ => None,
        }
    }

    pub fn all() -> [Mode; 4] {
        [
            Mode::NoCache,
            Mode::LruOnly,
            Mode::VirtualGroups,
            Mode::SmartCache,
        ]
    }
}

/// Scenario knobs; see field defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DeliveryConfig {
    pub mode: Mode,
    pub chunk_duration_s: u64,
    pub classifier: ClassifierConfig,
    /// Virtual-group count; defaults to the number of cache DTNs.
    pub k_groups: Option<usize>,
    /// Overrides every DTN's storage budget when set.
    pub cache_capacity_bytes: Option<u64>,
    pub feature_alpha: f64,
    pub feature_beta: f64,
    pub reference_size_bytes: u64,
    pub lead_factor: f64,
    /// Requests kept per stream for re-estimation.
    pub trailing_window: usize,
    pub kmeans_max_iter: usize,
    /// How long streamed chunks stay pinned at the target.
    pub realtime_pin_s: f64,
    /// A subscription goes inactive when its user has been silent this long.
    pub subscription_timeout_s: f64,
    pub seed: u64,
}

impl Default for DeliveryConfig {
    fn default() -> Self {
        DeliveryConfig {
            mode: Mode::SmartCache,
            chunk_duration_s: 3600,
            classifier: ClassifierConfig::default(),
            k_groups: None,
            cache_capacity_bytes: None,
            feature_alpha: 1.0,
            feature_beta: 1.0,
            reference_size_bytes: 1_000_000_000,
            lead_factor: 1.2,
            trailing_window: 10,
            kmeans_max_iter: 100,
            realtime_pin_s: 21_600.0,
            subscription_timeout_s: 1800.0,
            seed: 0,
        }
    }
}

/// Total bytes of the distinct segments a trace touches.
pub fn working_set_bytes(trace: &[Request], catalog: &Catalog, chunk_duration_s: u64) -> u64 {
    let mut seen: HashSet<SegmentKey> = HashSet::new();
    let mut total = 0u64;
    for r in trace {
        if let Ok(keys) = segments_for(r, catalog, chunk_duration_s) {
            for k in keys {
                if seen.insert(k) {
                    total += segment_size(catalog, k.object, chunk_duration_s);
                }
            }
        }
    }
    total
}

enum TimerPayload {
    Arrival(u32),
    PrefetchIssue(u32),
    PinExpire {
        node: NodeId,
        key: SegmentKey,
        deadline: f64,
    },
    ChunkProduced(ObjectId, u32),
}

struct FlowCtx {
    target: NodeId,
    keys: Vec<(SegmentKey, u64)>,
    pin_until: Option<f64>,
    /// Pin + waste accounting applies (pre-fetch or streamed push).
    pinned_push: bool,
    copy_to: Option<NodeId>,
    /// `no_cache` requests wait on their single flow directly.
    direct_waiter: Option<u32>,
}

struct ReqState {
    outstanding: usize,
    done: bool,
}

struct Inflight {
    waiters: Vec<u32>,
    tier: Tier,
}

#[derive(Default)]
struct Stream {
    hist: Vec<Request>,
    task_gen: u64,
}

struct Task {
    user: UserId,
    object: ObjectId,
    gen: u64,
    window: (i64, i64),
    pin_until: f64,
}

struct PrefetchMeta {
    bytes: u64,
    consumed: bool,
    pin_until: f64,
}

struct Runner<'a> {
    trace: &'a [Request],
    catalog: &'a Catalog,
    cfg: &'a DeliveryConfig,
    engine: Engine,
    net: CacheNetwork,
    home: Vec<NodeId>,
    group_of: Vec<Option<NodeId>>,
    scope: ChainScope,
    req_state: Vec<ReqState>,
    inflight: HashMap<(NodeId, SegmentKey), Inflight>,
    flow_ctx: HashMap<FlowId, FlowCtx>,
    tokens: Vec<TimerPayload>,
    streams: HashMap<(UserId, ObjectId), Stream>,
    user_hist: HashMap<UserId, Vec<Request>>,
    tasks: Vec<Task>,
    subscribed: HashSet<(UserId, ObjectId)>,
    sub_targets: HashMap<ObjectId, Vec<(UserId, NodeId)>>,
    production_started: HashSet<ObjectId>,
    prefetch_meta: HashMap<(NodeId, SegmentKey), PrefetchMeta>,
    horizon: f64,
    metrics: Metrics,
}

/// Replays a trace under one delivery mode and returns its metrics.
pub fn run_scenario(
    trace: &[Request],
    catalog: &Catalog,
    topology: &Topology,
    cfg: &DeliveryConfig,
) -> Result<Metrics> {
    validate(trace, catalog, topology, cfg)?;

    let mut topo = topology.clone();
    if let Some(cap) = cfg.cache_capacity_bytes {
        topo.set_dtn_storage(cap);
    }
    let engine = Engine::new(topo)?;
    let topo = engine.topology();

    let net = match cfg.mode {
        Mode::NoCache => CacheNetwork::new(topo, Some(0)),
        _ => CacheNetwork::new(topo, None),
    };

    let home: Vec<NodeId> = catalog
        .users
        .iter()
        .map(|u| topo.node_id(&u.home_dtn).expect("validated"))
        .collect();

    let group_of: Vec<Option<NodeId>> = match cfg.mode {
        Mode::VirtualGroups | Mode::SmartCache => {
            let k = cfg
                .k_groups
                .unwrap_or_else(|| net.nodes().count().max(1))
                .min(catalog.users.len().max(1));
            let placement = build_placement(
                catalog,
                trace,
                topo,
                engine.routes(),
                &PlacementConfig {
                    k,
                    seed: cfg.seed,
                    max_iter: cfg.kmeans_max_iter,
                    alpha: cfg.feature_alpha,
                    beta: cfg.feature_beta,
                    reference_size_bytes: cfg.reference_size_bytes,
                },
            )?;
            (0..catalog.users.len())
                .map(|u| placement.group_dtn_of(UserId(u as u32), topo))
                .collect()
        }
        _ => vec![None; catalog.users.len()],
    };

    let scope = match cfg.mode {
        Mode::LruOnly => ChainScope::HomeOnly,
        _ => ChainScope::Full,
    };

    let horizon = trace.iter().map(|r| r.t_arrive).max().unwrap_or(0) as f64;

    let runner = Runner {
        trace,
        catalog,
        cfg,
        engine,
        net,
        home,
        group_of,
        scope,
        req_state: trace
            .iter()
            .map(|_| ReqState {
                outstanding: 0,
                done: false,
            })
            .collect(),
        inflight: HashMap::new(),
        flow_ctx: HashMap::new(),
        tokens: Vec::new(),
        streams: HashMap::new(),
        user_hist: HashMap::new(),
        tasks: Vec::new(),
        subscribed: HashSet::new(),
        sub_targets: HashMap::new(),
        production_started: HashSet::new(),
        prefetch_meta: HashMap::new(),
        horizon,
        metrics: Metrics {
            mode: cfg.mode.as_str().to_string(),
            seed: cfg.seed,
            ..Metrics::default()
        },
    };
    runner.run()
}

fn validate(
    trace: &[Request],
    catalog: &Catalog,
    topology: &Topology,
    cfg: &DeliveryConfig,
) -> Result<()> {
    if cfg.chunk_duration_s == 0 {
        return Err(Error::config("chunk duration must be positive"));
    }
    for r in trace {
        if r.user.0 as usize >= catalog.users.len() {
            return Err(Error::UnknownUser(format!("{} in {}", r.user.0, r.req_id)));
        }
        if r.object.0 as usize >= catalog.objects.len() {
            return Err(Error::UnknownObject(format!("{} in {}", r.object.0, r.req_id)));
        }
        if r.window.0 < 0 || r.window.1 <= r.window.0 {
            return Err(Error::validation(format!(
                "request {} has invalid window [{}, {})",
                r.req_id, r.window.0, r.window.1
            )));
        }
    }
    for u in &catalog.users {
        match topology.node_id(&u.home_dtn) {
            None => {
                return Err(Error::validation(format!(
                    "user {} has unknown home_dtn {}",
                    u.user_id, u.home_dtn
                )))
            }
            Some(n) => {
                if topology.node(n).is_origin {
                    return Err(Error::validation(format!(
                        "user {} is homed at origin {}",
                        u.user_id, u.home_dtn
                    )));
                }
            }
        }
    }
    Ok(())
}

impl<'a> Runner<'a> {
    fn run(mut self) -> Result<Metrics> {
        for (i, r) in self.trace.iter().enumerate() {
            let token = self.push_token(TimerPayload::Arrival(i as u32));
            self.engine.schedule(r.t_arrive as f64, token);
        }

        while let Some(ev) = self.engine.next_event() {
            match ev.kind {
                EventKind::Timer(token) => self.on_timer(token, ev.time)?,
                EventKind::FlowDelivered(flow) => self.on_flow_done(flow, ev.time)?,
            }
        }

        debug_assert_eq!(
            self.metrics.latencies.len() as u64,
            self.metrics.requests,
            "every request must complete"
        );
        Ok(self.metrics)
    }

    fn push_token(&mut self, payload: TimerPayload) -> u64 {
        self.tokens.push(payload);
        (self.tokens.len() - 1) as u64
    }

    fn chunk(&self) -> u64 {
        self.cfg.chunk_duration_s
    }

    fn on_timer(&mut self, token: u64, now: f64) -> Result<()> {
        match self.tokens[token as usize] {
            TimerPayload::Arrival(idx) => self.on_arrival(idx, now),
            TimerPayload::PrefetchIssue(task) => self.on_prefetch_issue(task, now),
            TimerPayload::PinExpire {
                node,
                key,
                deadline,
            } => {
                self.on_pin_expire(node, key, deadline);
                Ok(())
            }
            TimerPayload::ChunkProduced(object, chunk) => self.on_chunk_produced(object, chunk, now),
        }
    }

    // ---- request servicing -------------------------------------------------

    fn on_arrival(&mut self, idx: u32, now: f64) -> Result<()> {
        let r = &self.trace[idx as usize];
        let keys = segments_for(r, self.catalog, self.chunk())?;
        let home = self.home[r.user.0 as usize];

        if self.cfg.mode == Mode::NoCache {
            let total: u64 = keys
                .iter()
                .map(|k| segment_size(self.catalog, k.object, self.chunk()))
                .sum();
            let origin = CacheNetwork::origin_of(self.engine.topology(), r.object);
            self.metrics.record_tier_request(Tier::Origin);
            self.metrics.record_tier_bytes(Tier::Origin, total);
            let flow = self.start_accounted_flow(origin, home, total)?;
            self.flow_ctx.insert(
                flow,
                FlowCtx {
                    target: home,
                    keys: Vec::new(),
                    pin_until: None,
                    pinned_push: false,
                    copy_to: None,
                    direct_waiter: Some(idx),
                },
            );
            self.req_state[idx as usize].outstanding = 1;
            return Ok(());
        }

        let group = self.group_of[r.user.0 as usize];
        let mut worst = Tier::Local;
        let mut outstanding = 0usize;
        let mut by_source: BTreeMap<(Tier, NodeId), Vec<(SegmentKey, u64)>> = BTreeMap::new();

        for key in keys {
            let size = segment_size(self.catalog, key.object, self.chunk());
            if self.net.contains(home, &key) {
                if let Some(c) = self.net.cache_mut(home) {
                    c.get(&key);
                }
                if let Some(meta) = self.prefetch_meta.get_mut(&(home, key)) {
                    meta.consumed = true;
                }
                self.metrics.record_tier_bytes(Tier::Local, size);
                continue;
            }
            if let Some(inf) = self.inflight.get_mut(&(home, key)) {
                inf.waiters.push(idx);
                worst = worst.max(inf.tier);
                outstanding += 1;
                let tier = inf.tier;
                self.metrics.record_tier_bytes(tier, size);
                continue;
            }
            let loc = self.net.lookup_chain(
                self.engine.topology(),
                self.engine.routes(),
                &key,
                size,
                home,
                group,
                self.scope,
            );
            worst = worst.max(loc.tier);
            outstanding += 1;
            self.metrics.record_tier_bytes(loc.tier, size);
            by_source.entry((loc.tier, loc.node)).or_default().push((key, size));
        }

        self.metrics.record_tier_request(worst);

        let copy_target = match self.cfg.mode {
            Mode::VirtualGroups | Mode::SmartCache => group.filter(|&g| g != home),
            _ => None,
        };
        for ((tier, source), items) in by_source {
            let total: u64 = items.iter().map(|(_, s)| s).sum();
            let flow = self.start_accounted_flow(source, home, total)?;
            for (key, _) in &items {
                self.inflight.insert(
                    (home, *key),
                    Inflight {
                        waiters: vec![idx],
                        tier,
                    },
                );
            }
            self.flow_ctx.insert(
                flow,
                FlowCtx {
                    target: home,
                    keys: items,
                    pin_until: None,
                    pinned_push: false,
                    // only data fetched from beyond the group is worth copying there
                    copy_to: copy_target.filter(|_| tier > Tier::Group),
                    direct_waiter: None,
                },
            );
        }

        if outstanding == 0 {
            self.complete_request(idx, now);
        } else {
            self.req_state[idx as usize].outstanding = outstanding;
        }
        Ok(())
    }

    fn start_accounted_flow(&mut self, src: NodeId, dst: NodeId, bytes: u64) -> Result<FlowId> {
        let flow = self.engine.start_flow(src, dst, bytes)?;
        let hops = self.engine.flow_info(flow).hops as u64;
        self.metrics.wan_link_bytes += bytes * hops;
        if self.engine.topology().node(src).is_origin {
            self.metrics.origin_requests += 1;
            self.metrics.origin_bytes += bytes;
        }
        Ok(flow)
    }

    fn on_flow_done(&mut self, flow: FlowId, now: f64) -> Result<()> {
        let Some(ctx) = self.flow_ctx.remove(&flow) else {
            return Ok(());
        };

        if let Some(idx) = ctx.direct_waiter {
            self.finish_waiter(idx, now);
            return Ok(());
        }

        let mut copy_keys: Vec<(SegmentKey, u64)> = Vec::new();
        for (key, size) in &ctx.keys {
            let waiters = self
                .inflight
                .remove(&(ctx.target, *key))
                .map(|i| i.waiters)
                .unwrap_or_default();

            if self.cfg.mode != Mode::NoCache {
                if let Some(cache) = self.net.cache_mut(ctx.target) {
                    // a blocked insert just means the bytes pass through uncached
                    let _ = cache.put(*key, *size, now, ctx.pin_until);
                }
                if ctx.pinned_push {
                    let deadline = ctx.pin_until.unwrap_or(now);
                    let consumed = !waiters.is_empty();
                    self.prefetch_meta.insert(
                        (ctx.target, *key),
                        PrefetchMeta {
                            bytes: *size,
                            consumed,
                            pin_until: deadline,
                        },
                    );
                    let token = self.push_token(TimerPayload::PinExpire {
                        node: ctx.target,
                        key: *key,
                        deadline,
                    });
                    self.engine.schedule(deadline, token);
                }
            }

            for w in waiters {
                self.finish_waiter(w, now);
            }

            if let Some(g) = ctx.copy_to {
                if !self.net.contains(g, key) && !self.inflight.contains_key(&(g, *key)) {
                    copy_keys.push((*key, *size));
                }
            }
        }

        if let Some(g) = ctx.copy_to {
            if !copy_keys.is_empty() {
                let total: u64 = copy_keys.iter().map(|(_, s)| s).sum();
                let copy_flow = self.start_accounted_flow(ctx.target, g, total)?;
                for (key, _) in &copy_keys {
                    self.inflight.insert(
                        (g, *key),
                        Inflight {
                            waiters: Vec::new(),
                            tier: Tier::Peer,
                        },
                    );
                }
                self.flow_ctx.insert(
                    copy_flow,
                    FlowCtx {
                        target: g,
                        keys: copy_keys,
                        pin_until: None,
                        pinned_push: false,
                        copy_to: None,
                        direct_waiter: None,
                    },
                );
            }
        }
        Ok(())
    }

    fn finish_waiter(&mut self, idx: u32, now: f64) {
        let st = &mut self.req_state[idx as usize];
        if st.done {
            return;
        }
        st.outstanding = st.outstanding.saturating_sub(1);
        if st.outstanding == 0 {
            self.complete_request(idx, now);
        }
    }

    fn complete_request(&mut self, idx: u32, now: f64) {
        let st = &mut self.req_state[idx as usize];
        debug_assert!(!st.done);
        st.done = true;
        let r = self.trace[idx as usize].clone();
        self.metrics.latencies.push(now - r.t_arrive as f64);

        if self.cfg.mode != Mode::SmartCache || r.channel == Channel::Portal {
            return;
        }

        // per-stream history drives prediction; per-user history drives
        // the streaming subscription decision
        let stream = self.streams.entry((r.user, r.object)).or_default();
        stream.hist.push(r.clone());
        let keep = self.cfg.trailing_window.max(1);
        if stream.hist.len() > keep {
            let drop = stream.hist.len() - keep;
            stream.hist.drain(..drop);
        }
        let uh = self.user_hist.entry(r.user).or_default();
        uh.push(r.clone());
        if uh.len() > keep {
            let drop = uh.len() - keep;
            uh.drain(..drop);
        }

        self.maybe_schedule_prefetch(r.user, r.object, now);
        self.maybe_subscribe(r.user, r.object, now);
    }

    // ---- smart cache: prediction and pre-fetch ------------------------------

    fn maybe_schedule_prefetch(&mut self, user: UserId, object: ObjectId, now: f64) {
        let stream = &self.streams[&(user, object)];
        let pattern = classify_user_pattern(&stream.hist, &self.cfg.classifier);
        if !matches!(
            pattern.kind,
            PatternKind::Regular | PatternKind::Overlapping
        ) {
            return;
        }
        let Some(pred) = predict_next(&pattern, &stream.hist) else {
            return;
        };
        if pred.predicted_t > self.horizon + pattern.period_s {
            return;
        }

        // lead estimate: the cheapest current holder of each missing segment,
        // priced for the total bytes it would ship
        let home = self.home[user.0 as usize];
        let keys = segments_for_window(object, pred.window, self.chunk());
        let mut source_bytes: BTreeMap<NodeId, u64> = BTreeMap::new();
        for key in &keys {
            if self.net.contains(home, key) || self.inflight.contains_key(&(home, *key)) {
                continue;
            }
            let size = segment_size(self.catalog, object, self.chunk());
            let loc = self.net.lookup_chain(
                self.engine.topology(),
                self.engine.routes(),
                key,
                size,
                home,
                self.group_of[user.0 as usize],
                ChainScope::Full,
            );
            *source_bytes.entry(loc.node).or_insert(0) += size;
        }
        let est = source_bytes
            .iter()
            .map(|(&src, &bytes)| self.engine.est_transfer(src, home, bytes))
            .fold(0.0f64, f64::max);
        let plan = schedule_prefetch(
            &pred,
            est,
            gap_spread(&stream.hist),
            self.cfg.lead_factor,
            pattern.period_s,
            now,
        );

        let stream = self.streams.get_mut(&(user, object)).expect("exists");
        stream.task_gen += 1;
        let gen = stream.task_gen;
        self.tasks.push(Task {
            user,
            object,
            gen,
            window: pred.window,
            pin_until: plan.pin_until,
        });
        let task_idx = (self.tasks.len() - 1) as u32;
        let token = self.push_token(TimerPayload::PrefetchIssue(task_idx));
        self.engine.schedule(plan.issue_t, token);
    }

    fn on_prefetch_issue(&mut self, task_idx: u32, now: f64) -> Result<()> {
        let task = &self.tasks[task_idx as usize];
        let (user, object, window, pin_until, gen) =
            (task.user, task.object, task.window, task.pin_until, task.gen);
        if self.streams[&(user, object)].task_gen != gen {
            return Ok(()); // superseded by a newer prediction
        }
        let home = self.home[user.0 as usize];
        let group = self.group_of[user.0 as usize];
        self.fetch_pinned(object, window, home, group, pin_until, now)
    }

    /// Fetches the missing segments of a window to `target`, pinned; extends
    /// pins on segments already present.
    fn fetch_pinned(
        &mut self,
        object: ObjectId,
        window: (i64, i64),
        target: NodeId,
        group: Option<NodeId>,
        pin_until: f64,
        _now: f64,
    ) -> Result<()> {
        let keys = segments_for_window(object, window, self.chunk());
        let mut by_source: BTreeMap<(Tier, NodeId), Vec<(SegmentKey, u64)>> = BTreeMap::new();
        for key in keys {
            let size = segment_size(self.catalog, object, self.chunk());
            if self.net.contains(target, &key) {
                if let Some(c) = self.net.cache_mut(target) {
                    let _ = c.pin(&key, pin_until);
                }
                if let Some(meta) = self.prefetch_meta.get_mut(&(target, key)) {
                    if pin_until > meta.pin_until {
                        meta.pin_until = pin_until;
                        let token = self.push_token(TimerPayload::PinExpire {
                            node: target,
                            key,
                            deadline: pin_until,
                        });
                        self.engine.schedule(pin_until, token);
                    }
                }
                continue;
            }
            if self.inflight.contains_key(&(target, key)) {
                continue;
            }
            let loc = self.net.lookup_chain(
                self.engine.topology(),
                self.engine.routes(),
                &key,
                size,
                target,
                group,
                ChainScope::Full,
            );
            by_source.entry((loc.tier, loc.node)).or_default().push((key, size));
        }

        for ((tier, source), items) in by_source {
            let total: u64 = items.iter().map(|(_, s)| s).sum();
            self.metrics.prefetch_bytes += total;
            let flow = self.start_accounted_flow(source, target, total)?;
            for (key, _) in &items {
                self.inflight.insert(
                    (target, *key),
                    Inflight {
                        waiters: Vec::new(),
                        tier,
                    },
                );
            }
            self.flow_ctx.insert(
                flow,
                FlowCtx {
                    target,
                    keys: items,
                    pin_until: Some(pin_until),
                    pinned_push: true,
                    copy_to: None,
                    direct_waiter: None,
                },
            );
        }
        Ok(())
    }

    fn on_pin_expire(&mut self, node: NodeId, key: SegmentKey, deadline: f64) {
        if let Some(meta) = self.prefetch_meta.get(&(node, key)) {
            // only the latest pin's expiry settles the bookkeeping
            if meta.pin_until == deadline {
                if !meta.consumed {
                    self.metrics.wasted_prefetch_bytes += meta.bytes;
                }
                self.prefetch_meta.remove(&(node, key));
            }
        }
    }

    // ---- smart cache: streaming ---------------------------------------------

    fn maybe_subscribe(&mut self, user: UserId, object: ObjectId, now: f64) {
        if self.subscribed.contains(&(user, object)) {
            return;
        }
        let pattern = classify_user_pattern(&self.user_hist[&user], &self.cfg.classifier);
        if pattern.kind != PatternKind::RealTime {
            return;
        }
        self.subscribed.insert((user, object));
        let home = self.home[user.0 as usize];
        let subs = self.sub_targets.entry(object).or_default();
        if !subs.contains(&(user, home)) {
            subs.push((user, home));
        }

        // catch up from the stream's current window position to the chunks
        // already produced, then ride the production events
        let produced_frontier = (now / self.chunk() as f64).floor() as i64 * self.chunk() as i64;
        let start = self.streams[&(user, object)]
            .hist
            .last()
            .map(|r| r.window.0)
            .unwrap_or(0);
        if produced_frontier > start {
            let pin = now + self.cfg.realtime_pin_s;
            let group = self.group_of[user.0 as usize];
            let _ = self.fetch_pinned(object, (start, produced_frontier), home, group, pin, now);
        }

        if self.production_started.insert(object) {
            let next_chunk = (now / self.chunk() as f64).floor() as u32;
            let ready_at = (next_chunk as u64 + 1) * self.chunk();
            if (ready_at as f64) <= self.horizon {
                let token = self.push_token(TimerPayload::ChunkProduced(object, next_chunk));
                self.engine.schedule(ready_at as f64, token);
            }
        }
    }

    fn on_chunk_produced(&mut self, object: ObjectId, chunk: u32, now: f64) -> Result<()> {
        // drop subscribers that have gone quiet; their pins will expire
        let timeout = self.cfg.subscription_timeout_s;
        let streams = &self.streams;
        let mut empty = false;
        if let Some(subs) = self.sub_targets.get_mut(&object) {
            subs.retain(|(user, _)| {
                let fresh = streams
                    .get(&(*user, object))
                    .and_then(|st| st.hist.last())
                    .map(|r| now - r.t_arrive as f64 <= timeout)
                    .unwrap_or(false);
                if !fresh {
                    self.subscribed.remove(&(*user, object));
                }
                fresh
            });
            empty = subs.is_empty();
        }
        if empty {
            self.sub_targets.remove(&object);
            self.production_started.remove(&object);
            return Ok(());
        }
        let mut targets: Vec<NodeId> = self
            .sub_targets
            .get(&object)
            .map(|t| t.iter().map(|(_, h)| *h).collect())
            .unwrap_or_default();
        targets.sort_unstable();
        targets.dedup();
        let key = SegmentKey { object, chunk };
        let size = segment_size(self.catalog, object, self.chunk());
        let pin = now + self.cfg.realtime_pin_s;
        for target in targets {
            if self.net.contains(target, &key) || self.inflight.contains_key(&(target, key)) {
                continue;
            }
            let origin = CacheNetwork::origin_of(self.engine.topology(), object);
            self.metrics.prefetch_bytes += size;
            let flow = self.start_accounted_flow(origin, target, size)?;
            self.inflight.insert(
                (target, key),
                Inflight {
                    waiters: Vec::new(),
                    tier: Tier::Origin,
                },
            );
            self.flow_ctx.insert(
                flow,
                FlowCtx {
                    target,
                    keys: vec![(key, size)],
                    pin_until: Some(pin),
                    pinned_push: true,
                    copy_to: None,
                    direct_waiter: None,
                },
            );
        }

        let ready_at = (chunk as u64 + 2) * self.chunk();
        if (ready_at as f64) <= self.horizon {
            let token = self.push_token(TimerPayload::ChunkProduced(object, chunk + 1));
            self.engine.schedule(ready_at as f64, token);
        }
        Ok(())
    }
}
