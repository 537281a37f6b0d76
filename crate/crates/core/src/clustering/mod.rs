//! Discretization of lightcones.
//!
//! [`kmeans`] groups lightcone vectors under the decay-weighted metric
//! (the γ-equivalence); [`agglomerate`] then merges past clusters whose
//! future-cluster distributions a chi-square test cannot tell apart (the
//! ψ-equivalence).

mod agglomerate;
mod contingency;
mod kmeans;

pub use agglomerate::{agglomerate, Merge, PsiMap};
pub use contingency::{build_contingency, ContingencyTable};
pub use kmeans::{kmeans, kmeans_prescaled, lloyd, ClusterModel, KMeansFit, KMeansOptions, LloydRun};
