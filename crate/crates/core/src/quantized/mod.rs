//! Quantized recurrence control over a counted bit channel.

pub mod algorithm;
pub mod codec;
pub mod controller;
pub mod rate;
pub mod verify;

pub use algorithm::{run_episode, EpisodeConfig, EpisodeLog, EpisodeTrace, StepRecord};
pub use codec::{decode, encode, BitVec, CountedChannel};
pub use controller::{RecurrenceController, ValidationOptions};
pub use rate::{bit_rate, BitRateReport};
pub use verify::{verify_guarantees, Clause, GuaranteeReport};
