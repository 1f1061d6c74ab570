//! Uniform-grid scalar and vector fields with discrete calculus.

mod ball;
mod calculus;
pub mod fft;
mod field;
mod grid;
pub mod io;
mod norm;
mod synth;

pub use ball::{
    ball_average, ball_average_node, brute_force_node_ball, node_ball, point_ball, within_ball,
};
pub use calculus::{divergence, gradient, partial, Scheme};
pub use field::{Sampled, ScalarField, VectorField};
pub use grid::Grid;
pub use norm::{inner, lp_norm};
pub use synth::{synth_field, synth_vector_field, SynthSpec};
