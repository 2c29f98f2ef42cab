//! Inpainting and multi-focus fusion pipelines.

pub mod fusion;
pub mod inpaint;
pub mod metrics;

pub use fusion::{
    activity_map, base_edge_objective, decompose_base_edge, fuse, gradient_energy, solve_base,
    BaseEdge, BaseRule, FusedParts, FusionConfig, FusionOutcome, FusionState, SourceState,
};
pub use inpaint::{inpaint, InpaintConfig, InpaintOutcome};
pub use metrics::{mean_subtract, psnr};
