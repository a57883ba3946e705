//! Reconstruction of 3D temporomandibular condyle trajectories from
//! per-frame 2D segmentation masks of one axial and two sagittal real-time
//! MRI slices, with the quality metrics of the accompanying report table
//! and a synthetic phantom for end-to-end verification.

pub mod assembly;
pub mod config;
pub mod error;
pub mod geometry;
pub mod manifest;
pub mod masks;
pub mod metrics;
pub mod phantom;
pub mod phases;
pub mod pipeline;
pub mod report;
pub mod series;
pub mod temporal;
pub mod types;

pub use assembly::{PlanarSeries, Rigid2D, Trajectory3D, TrajectorySample};
pub use config::{PipelineConfig, PointChoice};
pub use error::{Error, Result};
pub use geometry::{AnatomicalBasis, PatientPoint, SagittalAxes, SliceGeometry};
pub use manifest::{DatasetManifest, LoadedDataset};
pub use masks::FrameMask;
pub use metrics::{MsdMode, SubjectQuality};
pub use phantom::{Phantom, PhantomSpec};
pub use phases::{CyclePair, MotionCycle, PhaseInterval, PhaseLabel};
pub use pipeline::{run_pipeline, PipelineOutput};
pub use series::ScalarSeries;
pub use temporal::WarpPath;
pub use types::{ExclusionReason, PerSide, Side, SliceLabel};
