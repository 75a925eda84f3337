//! Domain types for catalogs, users, and request traces.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Dense index of a data object within a [`Catalog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectId(pub u32);

/// Dense index of a user within a [`Catalog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(pub u32);

/// One cataloged data object: a time series produced by one instrument.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataObject {
    pub object_id: String,
    pub instrument_id: String,
    pub region_id: String,
    pub data_kind: String,
    /// Bytes of recorded data per second of object time.
    pub rate_bytes_per_s: u64,
}

/// A registered user of the facility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub org_id: String,
    /// Abstract 2-D position; only relative distances matter.
    pub coord: (f64, f64),
    pub home_dtn: String,
}

/// A derivation recipe from the facility data model, e.g. salinity from
/// conductivity, temperature, and depth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivationRecipe {
    pub product_kind: String,
    pub input_kinds: Vec<String>,
}

/// Request channel: interactive portal or scripted API access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Portal,
    Api,
}

impl Channel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Portal => "portal",
            Channel::Api => "api",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        match s {
            "portal" => Some(Channel::Portal),
            "api" => Some(Channel::Api),
            _ => None,
        }
    }
}

/// One user query for a data object over a half-open time window `[start, end)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Request {
    pub req_id: String,
    /// Arrival time on the simulation clock, in seconds.
    pub t_arrive: u64,
    pub user: UserId,
    pub object: ObjectId,
    /// Half-open window into the object's timeline, in seconds.
    /// Starts may be negative for histories that predate the timeline origin.
    pub window: (i64, i64),
    pub channel: Channel,
}

impl Request {
    pub fn window_len(&self) -> i64 {
        self.window.1 - self.window.0
    }
}

/// Classified per-user access-pattern kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Regular,
    Overlapping,
    RealTime,
    Unknown,
}

impl PatternKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PatternKind::Regular => "regular",
            PatternKind::Overlapping => "overlapping",
            PatternKind::RealTime => "real_time",
            PatternKind::Unknown => "unknown",
        }
    }
}

/// Estimated access pattern of one request history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessPattern {
    pub kind: PatternKind,
    /// Median inter-arrival time, seconds.
    pub period_s: f64,
    /// Median window length, seconds.
    pub window_s: f64,
    /// Median overlap between consecutive windows of the same object, seconds.
    pub overlap_s: f64,
}

impl AccessPattern {
    pub fn unknown() -> Self {
        AccessPattern {
            kind: PatternKind::Unknown,
            period_s: 0.0,
            window_s: 0.0,
            overlap_s: 0.0,
        }
    }
}

/// Cross-referenced catalog of objects, users, and recipes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Catalog {
    pub objects: Vec<DataObject>,
    pub users: Vec<UserProfile>,
    pub recipes: Vec<DerivationRecipe>,
    #[serde(skip)]
    object_index: HashMap<String, ObjectId>,
    #[serde(skip)]
    user_index: HashMap<String, UserId>,
}

impl Catalog {
    pub fn new(
        objects: Vec<DataObject>,
        users: Vec<UserProfile>,
        recipes: Vec<DerivationRecipe>,
    ) -> crate::Result<Self> {
        let mut cat = Catalog {
            objects,
            users,
            recipes,
            object_index: HashMap::new(),
            user_index: HashMap::new(),
        };
        cat.rebuild_index()?;
        cat.validate()?;
        Ok(cat)
    }

    pub(crate) fn rebuild_index(&mut self) -> crate::Result<()> {
        self.object_index.clear();
        self.user_index.clear();
        for (i, o) in self.objects.iter().enumerate() {
            if self
                .object_index
                .insert(o.object_id.clone(), ObjectId(i as u32))
                .is_some()
            {
                return Err(crate::Error::validation(format!(
                    "duplicate object_id {}",
                    o.object_id
                )));
            }
        }
        for (i, u) in self.users.iter().enumerate() {
            if self
                .user_index
                .insert(u.user_id.clone(), UserId(i as u32))
                .is_some()
            {
                return Err(crate::Error::validation(format!(
                    "duplicate user_id {}",
                    u.user_id
                )));
            }
        }
        Ok(())
    }

    fn validate(&self) -> crate::Result<()> {
        for o in &self.objects {
            if o.rate_bytes_per_s == 0 {
                return Err(crate::Error::validation(format!(
                    "object {} has rate 0",
                    o.object_id
                )));
            }
        }
        for r in &self.recipes {
            if r.input_kinds.is_empty() {
                return Err(crate::Error::validation(format!(
                    "recipe {} has no inputs",
                    r.product_kind
                )));
            }
            if r.input_kinds.iter().any(|k| k == &r.product_kind) {
                return Err(crate::Error::validation(format!(
                    "recipe {} lists itself as an input",
                    r.product_kind
                )));
            }
        }
        Ok(())
    }

    /// Checks that every user's home DTN names a node in `dtn_ids`.
    pub fn validate_home_dtns<'a, I>(&self, dtn_ids: I) -> crate::Result<()>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let known: std::collections::HashSet<&str> = dtn_ids.into_iter().collect();
        for u in &self.users {
            if !known.contains(u.home_dtn.as_str()) {
                return Err(crate::Error::validation(format!(
                    "user {} has unknown home_dtn {}",
                    u.user_id, u.home_dtn
                )));
            }
        }
        Ok(())
    }

    pub fn object_id(&self, name: &str) -> Option<ObjectId> {
        self.object_index.get(name).copied()
    }

    pub fn user_id(&self, name: &str) -> Option<UserId> {
        self.user_index.get(name).copied()
    }

    pub fn object(&self, id: ObjectId) -> &DataObject {
        &self.objects[id.0 as usize]
    }

    pub fn user(&self, id: UserId) -> &UserProfile {
        &self.users[id.0 as usize]
    }
}
