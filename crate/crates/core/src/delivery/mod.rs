//! The end-to-end delivery service: per-user prediction, pre-fetch
//! scheduling, real-time streaming, and trace replay through the cache
//! network with metric recording.

mod metrics;
mod predict;
mod scenario;

pub use metrics::{Metrics, MetricsRow};
pub use predict::{predict_next, schedule_prefetch, PredictedRequest, PrefetchPlan};
pub use scenario::{run_scenario, working_set_bytes, DeliveryConfig, Mode};
