//! Central finite-difference gradient checker.

use super::Mlp;

/// Relative error with an absolute floor so near-zero entries compare sanely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// `Σ seed ⊙ net(input)` for a batch.
fn seeded_loss(net: &Mlp, input: &[f64], batch: usize, seed: &[f64]) -> f64 {
    let tape = net.forward_batch(input, batch);
    tape.output().iter().zip(seed).map(|(y, s)| y * s).sum()
}

/// Largest relative error between backprop and central differences with
/// step `h`, over every parameter and every input coordinate.
pub fn max_relative_error(net: &Mlp, input: &[f64], batch: usize, seed: &[f64], h: f64) -> f64 {
    let tape = net.forward_batch(input, batch);
    let (grads, dx) = net.backward(&tape, seed);
    let mut worst = 0.0f64;

    let mut probe = net.clone();
    for i in 0..net.num_params() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let up = seeded_loss(&probe, input, batch, seed);
        probe.params_mut()[i] = orig - h;
        let down = seeded_loss(&probe, input, batch, seed);
        probe.params_mut()[i] = orig;
        worst = worst.max(relative_error(grads[i], (up - down) / (2.0 * h)));
    }

    let mut x = input.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = seeded_loss(net, &x, batch, seed);
        x[i] = orig - h;
        let down = seeded_loss(net, &x, batch, seed);
        x[i] = orig;
        worst = worst.max(relative_error(dx[i], (up - down) / (2.0 * h)));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::OutputActivation;
    use crate::rng::RngStream;

    #[test]
    fn random_nets_pass() {
        let mut rng = RngStream::new(99);
        for sizes in [vec![3, 5, 2], vec![8, 16, 8], vec![4, 6, 6, 1]] {
            for output in [OutputActivation::Identity, OutputActivation::Tanh] {
                let net = Mlp::new(&sizes, output, 1.0, &mut rng);
                let batch = 3;
                let x: Vec<f64> = (0..batch * sizes[0]).map(|_| rng.normal(0.0, 1.0)).collect();
                let seed: Vec<f64> = (0..batch * sizes.last().unwrap()).map(|_| rng.normal(0.0, 1.0)).collect();
                let err = max_relative_error(&net, &x, batch, &seed, 1e-5);
                assert!(err < 1e-4, "{sizes:?} {output:?}: {err}");
            }
        }
    }
}
