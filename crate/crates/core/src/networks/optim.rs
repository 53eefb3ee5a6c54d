use serde::{Deserialize, Serialize};

use super::{NetError, Scalar, Sequential};

/// RMSprop: `v ← αv + (1-α)g²`, `θ ← θ - lr·g / (√v + ε)`, after optional
/// global-norm gradient clipping.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RmsProp {
    pub lr: f64,
    pub alpha: f64,
    pub eps: f64,
    pub max_grad_norm: Option<f64>,
}

impl Default for RmsProp {
    fn default() -> Self {
        RmsProp {
            lr: 1e-4,
            alpha: 0.99,
            eps: 1e-5,
            max_grad_norm: Some(40.0),
        }
    }
}

/// Squared-gradient accumulators, one per parameter tensor in visit order.
#[derive(Clone, PartialEq, Debug)]
pub struct OptimizerState<F> {
    pub square_avg: Vec<Vec<F>>,
    pub steps: u64,
}

impl<F: Scalar> OptimizerState<F> {
    pub fn new(net: &Sequential<F>) -> OptimizerState<F> {
        let mut square_avg = Vec::new();
        net.visit(&mut |_, _, v| square_avg.push(vec![F::zero(); v.len()]));
        OptimizerState { square_avg, steps: 0 }
    }
}

impl RmsProp {
    /// Applies one update and returns the pre-clipping gradient norm.
    pub fn step<F: Scalar>(
        &self,
        net: &mut Sequential<F>,
        grads: &Sequential<F>,
        state: &mut OptimizerState<F>,
    ) -> Result<f64, NetError> {
        let mut flat: Vec<Vec<F>> = Vec::new();
        let mut bad = None;
        let mut sq = 0.0f64;
        grads.visit(&mut |name, _, g| {
            if bad.is_none() && g.iter().any(|x| !x.is_finite()) {
                bad = Some(name.to_string());
            }
            sq += g.iter().map(|x| x.to_f64().unwrap().powi(2)).sum::<f64>();
            flat.push(g.to_vec());
        });
        if let Some(name) = bad {
            return Err(NetError::NonFiniteGradient(name));
        }
        assert_eq!(flat.len(), state.square_avg.len(), "optimizer state matches network");
        let norm = sq.sqrt();
        let scale = match self.max_grad_norm {
            Some(max) if norm > max => max / (norm + 1e-6),
            _ => 1.0,
        };
        let c = |v: f64| F::from(v).expect("hyperparameter");
        let (lr, alpha, eps, scale) = (c(self.lr), c(self.alpha), c(self.eps), c(scale));
        let one = F::one();
        net.visit_mut(&mut |i, params| {
            for ((p, &g), v) in params.iter_mut().zip(&flat[i]).zip(state.square_avg[i].iter_mut()) {
                let g = g * scale;
                *v = alpha * *v + (one - alpha) * g * g;
                *p = *p - lr * g / (v.sqrt() + eps);
            }
        });
        state.steps += 1;
        Ok(norm)
    }
}
