//! Event series ingestion, lag alignment, supervised-set construction and
//! synthetic storms.

mod lag;
mod series;
mod supervised;
mod synth;

pub use lag::{estimate_lag, LagEstimate};
pub use series::{load_event_csv, EventSeries, EVENT_HEADER};
pub use supervised::{
    build_supervised, scheme_seconds, Normalization, NormalizationRecord, SupervisedSet,
    SUPERVISED_COLUMNS, TARGET_COLUMN,
};
pub use synth::{reservoir_step, synth_storm, StormParams};
