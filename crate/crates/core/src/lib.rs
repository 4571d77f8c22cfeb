//! Achievable regions of `(I_f(W; X), I_g(W; Y))` for a fixed channel
//! `X → Y`, traced through convex envelopes on a discretized simplex.

pub mod closed_forms;
pub mod envelope;
pub mod nnls;
pub mod oracle;
pub mod prob;
pub mod sweep;
pub mod verify;
