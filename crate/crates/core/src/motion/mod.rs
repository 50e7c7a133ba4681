//! Parameter families, motions of repelling periodic points, web measures,
//! tubes and the Lyapunov stability test.

pub mod family;
pub mod graph;
pub mod lyapunov;
pub mod tube;
pub mod web;

pub use family::{Family, ParamGrid, ParamGridSpec, ParamPoly};
pub use graph::{
    continue_point, disjointness_check, graph_distance, ContinuationOptions, DisjointnessReport, GraphDistance, GraphStatus, MotionGraph,
    COLLISION_TOL, REPELLING_MARGIN,
};
pub use lyapunov::{harmonicity_defect, log_spherical_derivative, lyapunov_estimate, lyapunov_map, HarmonicityReport, LyapunovMap};
pub use tube::{
    backward_branch, contraction_report, distortion_curve, distortion_sum, shadow_branch, tube_membership, BackwardBranch, BranchRecord,
    ContractionReport, DistortionPoint, Tube, BOUNDARY_SAMPLES,
};
pub use web::{
    build_web_measure, slice, slice_invariance_defect, weight_id, ExcludedPoint, PersistenceSummary, WebAtom, WebMeasure, SLICE_TOL,
};
