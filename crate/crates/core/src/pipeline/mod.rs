//! Per-class orchestration, experiment protocols, evaluation and ablations.

mod ablation;
mod config;
mod edges;
mod evaluate;
mod run;
mod segment;
mod synth;

pub use ablation::{run_ablation_matrix, AblationClass, AblationClassSpec, AblationRow, AblationSpec, AblationTable};
pub use config::{verify_defaults, PipelineConfig, FROZEN_DEFAULTS};
pub use edges::mask_edgemap;
pub use evaluate::{align_prediction, collect_predictions, evaluate, PredictionFile};
pub use run::{load_class_images, run_class, ClassJob, ClassRun, JobMode, MANIFEST_FILE};
pub use segment::{coarse_mask, segment_class, ClassOutcome, ExperimentMode, ImageFlag, ImageResult};
pub use synth::{pool_grid, synthesize_dataset, SynthClassPaths, SynthOptions, AFFINITY_TAG, RELEVANCE_TAG};
