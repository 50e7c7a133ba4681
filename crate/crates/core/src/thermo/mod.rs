//! Transfer operators, conformal measures and equilibrium states.

mod equilibrium;
mod grid;
mod measure;
mod transfer;
mod tree;

pub use equilibrium::{
    choose_base_points, conformal_measure, equilibrium_state, invariance_defect, julia_sample, pressure_and_density, EquilibriumData,
    EquilibriumOptions,
};
pub use grid::{GridFunction, SphereGrid, Stencil};
pub use measure::{AtomTriple, DiscreteMeasure};
pub use transfer::{exceptional_points, grid_fibers, power_iteration, transfer_apply, PowerIteration, TransferOperator};
pub use tree::{preimage_levels, sample_backward, BackwardTree, SampledLeaf, TreeLeaf};
