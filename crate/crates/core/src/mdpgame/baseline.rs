use crate::error::{Error, Result};
use crate::rng::Rng;

use super::mlp::Mlp;
use super::rollout::Trajectory;

/// State-value network `v̂(φ(s); w)` with two `tanh` hidden layers. The
/// output layer starts at zero, so a fresh baseline predicts `0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueBaseline {
    pub net: Mlp,
    pub w: Vec<f64>,
}

impl ValueBaseline {
    pub fn new(n_in: usize, width: usize, rng: &mut Rng) -> Self {
        let net = Mlp::new(vec![n_in, width, width, 1]);
        let mut w = net.init(rng);
        let last = width + 1;
        let n = w.len();
        w[n - last..].iter_mut().for_each(|v| *v = 0.0);
        Self { net, w }
    }

    pub fn value(&self, phi: &[f64]) -> f64 {
        self.net.output(&self.w, phi)[0]
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|v| v.is_finite())
    }
}

/// One step `w ← w + lr·(G_t − v̂(s_t))·∇v̂(s_t)` per visited state, in order.
pub fn baseline_update(
    baseline: &ValueBaseline,
    traj: &Trajectory,
    lr: f64,
) -> Result<ValueBaseline> {
    let mut out = baseline.clone();
    if lr == 0.0 {
        return Ok(out);
    }
    let returns = traj.rewards_to_go();
    let mut grad = vec![0.0; out.w.len()];
    for (st, &g) in traj.steps.iter().zip(&returns) {
        let acts = out.net.forward(&out.w, &st.features);
        let delta = g - acts.last().expect("output")[0];
        if delta == 0.0 {
            continue;
        }
        grad.iter_mut().for_each(|v| *v = 0.0);
        out.net.backward(&out.w, &acts, &[delta], &mut grad);
        for (w, d) in out.w.iter_mut().zip(&grad) {
            *w += lr * d;
        }
    }
    if !out.is_finite() {
        return Err(Error::Divergence {
            phase: "baseline",
            iter: 0,
        });
    }
    Ok(out)
}
