//! gen-trace, classify, and stats subcommands.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use lfsim_core::netsim::Topology;
use lfsim_core::workload::{
    self, catalog, classify_user_pattern, histories_by_user, Channel, Request,
};

use crate::config::ScenarioConfig;
use crate::manifest::{ensure_out_dir, write_args_manifest, write_file, write_manifest};

pub fn load_inputs(cfg: &ScenarioConfig) -> Result<(workload::Catalog, Vec<Request>, Topology)> {
    let catalog = workload::load_catalog(
        &cfg.catalog_path()?,
        &cfg.users_path()?,
        &cfg.recipes_path()?,
    )?;
    let trace = workload::load_trace(&cfg.requests_path()?, &catalog)?;
    let topology = match cfg.topology_path() {
        Some(p) => Topology::load(&p)?,
        None => Topology::default_evaluation(),
    };
    Ok((catalog, trace, topology))
}

pub fn gen_trace(cfg: &ScenarioConfig, seed: u64, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let wl = workload::generate(&cfg.generator, seed)?;

    let mut buf = Vec::new();
    catalog::write_catalog_csv(&mut buf, &wl.catalog)?;
    write_file(out, "catalog.csv", std::str::from_utf8(&buf).unwrap())?;
    buf.clear();
    catalog::write_users_csv(&mut buf, &wl.catalog)?;
    write_file(out, "users.csv", std::str::from_utf8(&buf).unwrap())?;
    buf.clear();
    catalog::write_recipes_csv(&mut buf, &wl.catalog)?;
    write_file(out, "recipes.csv", std::str::from_utf8(&buf).unwrap())?;
    buf.clear();
    catalog::write_trace(&mut buf, &wl.trace, &wl.catalog)?;
    write_file(out, "requests.csv", std::str::from_utf8(&buf).unwrap())?;

    write_file(
        out,
        "ground_truth.json",
        &serde_json::to_string_pretty(&wl.truth)?,
    )?;
    let topology = match cfg.topology_path() {
        Some(p) => Topology::load(&p)?,
        None => Topology::default_evaluation(),
    };
    write_file(out, "topology.json", &topology.to_json())?;

    let mut effective = cfg.clone();
    effective.seed = seed;
    write_manifest(out, "gen-trace", &[seed], &effective)?;
    println!(
        "generated {} requests, {} objects, {} users -> {}",
        wl.trace.len(),
        wl.catalog.objects.len(),
        wl.catalog.users.len(),
        out.display()
    );
    Ok(())
}

pub fn classify(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let (catalog, trace, _) = load_inputs(cfg)?;
    let mut csv = String::from("user_id,kind,period_s,window_s,overlap_s,requests\n");
    for (user, history) in histories_by_user(&trace) {
        // only program (API) traffic is predictable; portal rows pass through
        // the trace but are excluded from classification
        let api: Vec<Request> = history
            .iter()
            .filter(|r| r.channel == Channel::Api)
            .map(|&r| r.clone())
            .collect();
        let pattern = classify_user_pattern(&api, &cfg.delivery.classifier);
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            catalog.user(user).user_id,
            pattern.kind.as_str(),
            pattern.period_s,
            pattern.window_s,
            pattern.overlap_s,
            api.len()
        )
        .unwrap();
    }
    write_file(out, "patterns.csv", &csv)?;
    write_manifest(out, "classify", &[cfg.seed], cfg)?;
    println!("classified {} users -> {}", catalog.users.len(), out.display());
    Ok(())
}

pub fn stats(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let (catalog, trace, _) = load_inputs(cfg)?;
    let report = workload::affinity_stats(&trace, &catalog)?;
    let mut csv =
        String::from("user_id,requests,modal_region_share,modal_kind_share,intra_org_overlap\n");
    for u in &report.per_user {
        writeln!(
            csv,
            "{},{},{},{},{}",
            u.user_id, u.requests, u.modal_region_share, u.modal_kind_share, u.intra_org_overlap
        )
        .unwrap();
    }
    writeln!(
        csv,
        "_aggregate,{},{},{},{}",
        trace.len(),
        report.aggregate_modal_region_share,
        report.aggregate_modal_kind_share,
        report.aggregate_intra_org_overlap
    )
    .unwrap();
    write_file(out, "affinity.csv", &csv)?;
    write_manifest(out, "stats", &[cfg.seed], cfg)?;
    println!(
        "affinity over {} users -> {}",
        report.per_user.len(),
        out.display()
    );
    Ok(())
}

pub fn report(metrics_path: &Path, out: &Path) -> Result<()> {
    use lfsim_core::delivery::MetricsRow;
    ensure_out_dir(out)?;
    let raw = std::fs::read_to_string(metrics_path)
        .with_context(|| format!("reading {}", metrics_path.display()))?;
    let rows: Vec<MetricsRow> = raw
        .lines()
        .skip(1)
        .filter_map(MetricsRow::parse_csv_line)
        .collect();
    if rows.is_empty() {
        anyhow::bail!("no metric rows in {}", metrics_path.display());
    }

    // group by mode, mean over seeds
    let mut modes: Vec<String> = rows.iter().map(|r| r.mode.clone()).collect();
    modes.dedup();
    modes.sort();
    modes.dedup();
    let mut csv = String::from(
        "mode,runs,frac_local,frac_group,frac_peer,frac_origin,mean_latency_s,origin_requests,wan_bytes,wasted_prefetch_bytes\n",
    );
    let mut txt = format!(
        "{:<16} {:>5} {:>11} {:>11} {:>11} {:>12} {:>15} {:>16} {:>18} {:>12}\n",
        "mode",
        "runs",
        "frac_local",
        "frac_group",
        "frac_peer",
        "frac_origin",
        "mean_latency_s",
        "origin_requests",
        "wan_bytes",
        "wasted_pf"
    );
    for mode in &modes {
        let group: Vec<&MetricsRow> = rows.iter().filter(|r| &r.mode == mode).collect();
        let n = group.len() as f64;
        let mean = |f: &dyn Fn(&MetricsRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
        let frac_local = mean(&|r| r.frac_local);
        let frac_group = mean(&|r| r.frac_group);
        let frac_peer = mean(&|r| r.frac_peer);
        let frac_origin = mean(&|r| r.frac_origin);
        let latency = mean(&|r| r.mean_latency_s);
        let origin_req = mean(&|r| r.origin_requests as f64);
        let wan = mean(&|r| r.wan_bytes as f64);
        let wasted = mean(&|r| r.wasted_prefetch_bytes as f64);
        writeln!(
            csv,
            "{mode},{},{frac_local},{frac_group},{frac_peer},{frac_origin},{latency},{origin_req},{wan},{wasted}",
            group.len()
        )
        .unwrap();
        writeln!(
            txt,
            "{:<16} {:>5} {:>11.4} {:>11.4} {:>11.4} {:>12.4} {:>15.3} {:>16.1} {:>18.0} {:>12.0}",
            mode,
            group.len(),
            frac_local,
            frac_group,
            frac_peer,
            frac_origin,
            latency,
            origin_req,
            wan,
            wasted
        )
        .unwrap();
    }
    write_file(out, "report.csv", &csv)?;
    write_file(out, "report.txt", &txt)?;
    write_args_manifest(
        out,
        "report",
        &serde_json::json!({ "metrics": metrics_path.display().to_string() }),
    )?;
    print!("{txt}");
    Ok(())
}
