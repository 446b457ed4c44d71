//! Heat-semigroup paracontrolled calculus on finite weighted graphs.
//!
//! The crate builds, on top of one dense eigendecomposition per graph:
//!
//! * the approximation operators `Q_t^(a) = (tL)^a e^{-tL}` and
//!   `P_t^(a) = phi_a(tL)` and the Calderon reproducing formula ([`spectral`]);
//! * semigroup-defined Hoelder, Besov and Sobolev norms ([`norms`]);
//! * the semigroup paraproduct, resonant term and their commutator, with an
//!   exact spectral-tensor oracle on small graphs ([`para`], [`oracle`]);
//! * weighted Gaussian noise, the renormalization function `g_s`, the
//!   constant `C^eps` and the enhanced noise ([`noise`], [`renorm`]);
//! * Schauder resolution and two solvers for the renormalized parabolic
//!   Anderson model, direct exponential stepping and a paracontrolled Picard
//!   iteration ([`solver`]).
//!
//! Graphs, distances and the geometric certifiers live in [`graph`] and
//! [`geometry`]; heat-kernel bound fits in [`kernel_fit`].

pub mod eigh;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod graph;
pub mod kernel_fit;
pub mod norms;
pub mod noise;
pub mod oracle;
pub mod para;
pub mod parallel;
pub mod quad;
pub mod renorm;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use fields::{manufactured_field, SpaceTimeField};
pub use graph::{ball_volume, build_graph, graph_distance, DistanceTable, GraphGen, GraphSpace};
pub use quad::{QuadSpec, TimeGrid, TimeQuad};
pub use spectral::{
    apply_fn, calderon_residual, carre_du_champ, diagonalize, heat, p_op, q_op, Field,
    SpectralDecomposition,
};
