//! Segmentation and task-based metrics, and run comparison.

mod entity;
mod report;
mod segmentation;
mod stats;
mod task;

pub use entity::{Entity, EntityType};
pub use report::{evaluate_corpus, EvalReport, MetricRow};
pub use segmentation::{bio_to_bi, convert_labels, default_k, pk, pk_any_scheme, segment_masses};
pub use stats::{compare_runs, mean, sample_sd, TTest};
pub use task::{task_eval, CharSpan, Counts, TaskCounts};
