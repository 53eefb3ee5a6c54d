use ndarray::ArrayView2;

use super::{Mode, Sequential};
use crate::rng::GameRng;

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameter index (visit order) and both estimates at the worst point.
    pub worst: Option<(usize, f64, f64)>,
}

fn loss(seq: &Sequential<f64>, x: ArrayView2<f64>, targets: &[f64], dropout_seed: Option<u64>) -> f64 {
    let mut rng = dropout_seed.map(GameRng::new);
    let mut mode = match rng.as_mut() {
        Some(r) => Mode::Train(r),
        None => Mode::Infer,
    };
    seq.mse_backward(x, targets, &mut mode).expect("batch shape").0
}

/// Compares the analytic MSE gradient with central differences on every
/// parameter. With `dropout_seed`, every evaluation replays the same masks.
/// Relative error is `|a - n| / max(|a|, |n|)`; pairs where both sides are
/// below `1e-6` (round-off territory for central
/// differences) are counted as agreeing.
pub fn finite_difference_check(
    seq: &Sequential<f64>,
    x: ArrayView2<f64>,
    targets: &[f64],
    dropout_seed: Option<u64>,
    h: f64,
) -> GradCheck {
    let mut rng = dropout_seed.map(GameRng::new);
    let mut mode = match rng.as_mut() {
        Some(r) => Mode::Train(r),
        None => Mode::Infer,
    };
    let (_, grads) = seq.mse_backward(x, targets, &mut mode).expect("batch shape");
    let analytic = grads.flat_params();
    let base = seq.flat_params();
    let mut probe = seq.clone();
    let mut flat = base.clone();
    let mut max_rel_error = 0.0f64;
    let mut worst = None;
    for i in 0..flat.len() {
        flat[i] = base[i] + h;
        probe.set_flat_params(&flat);
        let up = loss(&probe, x, targets, dropout_seed);
        flat[i] = base[i] - h;
        probe.set_flat_params(&flat);
        let down = loss(&probe, x, targets, dropout_seed);
        flat[i] = base[i];
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let scale = a.abs().max(numeric.abs());
        if scale > 1e-6 {
            let rel = (a - numeric).abs() / scale;
            if rel > max_rel_error {
                max_rel_error = rel;
                worst = Some((i, a, numeric));
            }
        }
    }
    GradCheck {
        max_rel_error,
        checked: flat.len(),
        worst,
    }
}
