//! Diagnostics for the structural decompositions: spike and bulk parts of the
//! gradient, structure and bulk parts of the inputs, conditional feature
//! moments, and the size scaling of the bulk quantities.

mod decompose;
mod equivalence;
mod moments;
mod scaling;

pub use decompose::{
    bulk_operator, spike_bulk_decompose, split_with_basis, structure_bulk_split,
    DecompositionNorms, GradientDecomposition, StructureBasis, StructureBulkSplit,
    COLLINEARITY_TOLERANCE, POWER_MAX_ITER, POWER_TOLERANCE,
};
pub use equivalence::{moment_equivalence, MomentComparison, MomentConfig};
pub use moments::{
    conditional_feature_sample, conditional_moments_mc, ConditionalMoments, BATCH, MAX_WIDTH,
    MIN_SAMPLES, PSD_FLAG_THRESHOLD,
};
pub use scaling::{
    scaling_diagnostic, scaling_trial, slope_within, ScalingConfig, ScalingReport, ScalingRow,
    SlopeRow, QUANTITIES,
};
