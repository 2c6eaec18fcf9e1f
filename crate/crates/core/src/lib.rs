//! Imbalanced ensemble classification over deep envelope samples.
//!
//! The pipeline widens every sample with its nearest neighbours, condenses
//! each class through stacked fuzzy C-means layers, aligns every layer's
//! prototypes with that layer's input through a kernel subspace that
//! preserves local manifold structure and matches global means, and votes
//! over decision trees trained on the aligned prototypes of feature-weighted
//! balanced subsets.
//!
//! All numerical code is generic over [`Real`]; the `*64` / `*32` aliases
//! below fix the scalar for the common cases.

pub mod dataset;
pub mod dsen;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod knn;
pub mod lgscm;
mod linalg;
pub mod partition;
pub mod scalar;
pub mod seed;
pub mod tree;

pub use dataset::{CvSplit, Class, Dataset, Standardizer};
pub use dsen::{ClusterSchedule, DsenConfig, EnvelopeSet, FcmResult, LayerState, MembershipMatrix};
pub use ensemble::{AblationMode, PipelineConfig, PipelineModel, Prediction, VoteScope};
pub use error::{Error, Result};
pub use eval::{Confusion, MetricSet};
pub use lgscm::{AlignmentModel, GraphPair, KernelModel, LgscmParams, Projector, SigmaRule, TransitionInit};
pub use partition::{BalancedSubset, Partition, RemainderRule};
pub use scalar::Real;
pub use tree::{DecisionTree, TreeParams};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type EnvelopeSet64 = EnvelopeSet<f64>;
pub type LayerState64 = LayerState<f64>;
pub type AlignmentModel64 = AlignmentModel<f64>;
pub type KernelModel64 = KernelModel<f64>;
pub type DecisionTree64 = DecisionTree<f64>;
pub type PipelineModel64 = PipelineModel<f64>;
pub type PipelineModel32 = PipelineModel<f32>;
