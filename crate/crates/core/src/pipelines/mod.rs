//! Synthetic data and the DP trainers the adaptive loop drives.

mod attempt;
pub mod source;
pub mod trainers;

pub use attempt::{is_test_record, run_attempt, Attempt, BlockData, KeyMoments, PipelineSpec, SplitData, TrainerKind, TEST_EVERY};
pub use source::{generate_stream, LabelModel, Record, RecordStream, SyntheticSource};
pub use trainers::{
    dp_group_by_mean, dp_linreg, dp_scalar_stat, ArtifactKind, Field, LinregClip, TrainedArtifact, DEFAULT_RIDGE,
};
