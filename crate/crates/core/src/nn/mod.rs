//! Small dense networks with hand-written reverse mode, Adam, and the target
//! network helpers the agents need. Everything is `f64`.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod mlp;

pub use adam::AdamState;
pub use mlp::{Mlp, OutputActivation, Tape};

/// `target ← κ·online + (1 − κ)·target`, elementwise.
pub fn soft_update(target: &mut [f64], online: &[f64], kappa: f64) {
    assert_eq!(target.len(), online.len(), "soft_update shape mismatch");
    for (t, &o) in target.iter_mut().zip(online) {
        *t = kappa * o + (1.0 - kappa) * *t;
    }
}

/// Rescale `grads` in place so its L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}
