//! Value types shared by every subsystem.

mod learner;
mod quality;
mod signal;
mod space;
mod trajectory;
mod weights;

pub use learner::{AlphaSchedule, LearnerConfig};
pub use quality::{MetricId, QualityScore, QualityTerm, RewardBreakdown};
pub use signal::{AnalogScene, Observation, LEVELS};
pub use space::{Axis, OptionSpace, SensorOption};
pub use trajectory::{StepRecord, Trajectory};
pub use weights::{weights_project, ModalityWeights};
