//! Convolutional sparse coding by local block coordinate descent.
//!
//! An image is modeled as `X = Σ_i P_iᵀ D_L α_i`: every patch position `i`
//! carries a sparse needle `α_i` whose slice `D_L α_i` is placed back into
//! the image. Pursuit updates one needle (or one layer of non-overlapping
//! needles) at a time by solving a small lasso problem; dictionary learning
//! interleaves projected gradient steps on `D_L`.

// `!(x >= 0.0)` rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apps;
pub mod dict;
pub mod error;
pub mod io;
pub mod layers;
pub mod learn;
pub mod needles;
pub mod plane;
pub mod pursuit;
pub mod solver;
pub mod work;

pub use dict::{Gram, LocalDictionary};
pub use error::{CscError, Result};
pub use layers::{build_layers, LayerSchedule, Position, PositionGrid};
pub use needles::{reconstruct, Needle, NeedleField};
pub use plane::{crop_plane, extract_patch, pad_plane, place_add_patch, Plane};
pub use pursuit::{
    pursue_layered, pursue_masked, pursue_sequential, DescentStats, PursuitConfig, PursuitOutcome,
};
pub use solver::{init_needles, solve_local, solve_local_masked, LassoConfig, LocalSolver};
pub use work::{objective, ObjectiveReport, WorkImage};
