use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::Rng;

use super::mlp::Mlp;
use super::{ActionSpace, MarkovGame};

/// Policy parameterization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Deterministic `a = clamp(Θ·[φ(s); 1])`.
    Bilinear,
    /// Softmax over discrete actions with one logit per (state, action).
    TabularSoftmax,
    /// Softmax over discrete actions with logits from an MLP on `φ(s)`.
    Mlp { layers: usize, width: usize },
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Bilinear => "bilinear",
            PolicyKind::TabularSoftmax => "tabular_softmax",
            PolicyKind::Mlp { .. } => "mlp",
        }
    }
}

/// Flat parameter vector plus its parameterization.
///
/// `n_in` is the feature count (states for tabular policies) and `n_out` the
/// action dimension (bilinear) or the number of discrete actions.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub kind: PolicyKind,
    pub theta: Vec<f64>,
    pub n_in: usize,
    pub n_out: usize,
}

fn softmax(logits: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    let allowed = |i: usize| mask.is_none_or(|m| m[i]);
    let max = logits
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed(*i))
        .map(|(_, &l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(i, &l)| if allowed(i) { (l - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = p.iter().sum();
    for v in &mut p {
        *v /= z;
    }
    p
}

impl PolicyParams {
    pub fn bilinear(n_in: usize, action_dim: usize) -> Self {
        Self {
            kind: PolicyKind::Bilinear,
            theta: vec![0.0; action_dim * (n_in + 1)],
            n_in,
            n_out: action_dim,
        }
    }

    pub fn tabular(states: usize, actions: usize) -> Self {
        Self {
            kind: PolicyKind::TabularSoftmax,
            theta: vec![0.0; states * actions],
            n_in: states,
            n_out: actions,
        }
    }

    pub fn mlp(n_in: usize, actions: usize, layers: usize, width: usize, rng: &mut Rng) -> Self {
        let kind = PolicyKind::Mlp { layers, width };
        let theta = Self::network(&kind, n_in, actions)
            .expect("mlp kind")
            .init(rng);
        Self {
            kind,
            theta,
            n_in,
            n_out: actions,
        }
    }

    /// Fresh policy of `kind` for one side of `game`.
    pub fn for_game<G: MarkovGame + ?Sized>(
        kind: &PolicyKind,
        game: &G,
        space: &ActionSpace,
        states: Option<usize>,
        rng: &mut Rng,
    ) -> Result<Self> {
        match (kind, space) {
            (PolicyKind::Bilinear, ActionSpace::Box { lo, .. }) => {
                Ok(Self::bilinear(game.feature_dim(), lo.len()))
            }
            (PolicyKind::TabularSoftmax, ActionSpace::Discrete(a)) => {
                let n = states.ok_or_else(|| {
                    Error::Config("tabular policies need a finite state space".into())
                })?;
                Ok(Self::tabular(n, a.len()))
            }
            (PolicyKind::Mlp { layers, width }, ActionSpace::Discrete(a)) => {
                Ok(Self::mlp(game.feature_dim(), a.len(), *layers, *width, rng))
            }
            (k, _) => Err(Error::Config(format!(
                "{} policy does not match the action space",
                k.name()
            ))),
        }
    }

    fn network(kind: &PolicyKind, n_in: usize, n_out: usize) -> Option<Mlp> {
        match *kind {
            PolicyKind::Mlp { layers, width } => {
                let mut sizes = vec![n_in];
                sizes.extend(std::iter::repeat_n(width, layers));
                sizes.push(n_out);
                Some(Mlp::new(sizes))
            }
            _ => None,
        }
    }

    pub fn net(&self) -> Option<Mlp> {
        Self::network(&self.kind, self.n_in, self.n_out)
    }

    pub fn expected_len(&self) -> usize {
        match self.kind {
            PolicyKind::Bilinear => self.n_out * (self.n_in + 1),
            PolicyKind::TabularSoftmax => self.n_in * self.n_out,
            PolicyKind::Mlp { .. } => self.net().expect("mlp").num_params(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_len("policy parameters", self.expected_len(), self.theta.len())
    }

    pub fn is_stochastic(&self) -> bool {
        !matches!(self.kind, PolicyKind::Bilinear)
    }

    pub fn with_theta(&self, theta: &[f64]) -> Self {
        Self {
            theta: theta.to_vec(),
            ..self.clone()
        }
    }

    /// Bilinear action and, per action coordinate, whether the clamp is
    /// inactive (so the action is differentiable in `Θ`).
    pub fn bilinear_action(
        &self,
        phi: &[f64],
        space: &ActionSpace,
    ) -> Result<(Vec<f64>, Vec<bool>)> {
        if self.kind != PolicyKind::Bilinear {
            return Err(Error::UnsupportedEstimator {
                estimator: "deterministic action",
                reason: format!("{} policies", self.kind.name()),
            });
        }
        check_len("policy features", self.n_in, phi.len())?;
        let ActionSpace::Box { lo, hi } = space else {
            return Err(Error::Config(
                "bilinear policies need a box action space".into(),
            ));
        };
        let w = self.n_in + 1;
        let mut a = Vec::with_capacity(self.n_out);
        let mut active = Vec::with_capacity(self.n_out);
        for o in 0..self.n_out {
            let row = &self.theta[o * w..(o + 1) * w];
            let z = row[self.n_in]
                + row[..self.n_in]
                    .iter()
                    .zip(phi)
                    .map(|(t, p)| t * p)
                    .sum::<f64>();
            active.push(z >= lo[o] && z <= hi[o]);
            a.push(z.max(lo[o]).min(hi[o]));
        }
        Ok((a, active))
    }

    /// Unnormalized log-probabilities over discrete actions. `phi` are the
    /// features; `key` the state index for tabular policies.
    pub fn logits(&self, phi: &[f64], key: Option<usize>) -> Result<Vec<f64>> {
        match self.kind {
            PolicyKind::TabularSoftmax => {
                let k =
                    key.ok_or_else(|| Error::Config("tabular policy needs a state index".into()))?;
                if k >= self.n_in {
                    return Err(Error::Dimension {
                        what: "state index",
                        expected: self.n_in,
                        got: k,
                    });
                }
                Ok(self.theta[k * self.n_out..(k + 1) * self.n_out].to_vec())
            }
            PolicyKind::Mlp { .. } => {
                check_len("policy features", self.n_in, phi.len())?;
                Ok(self.net().expect("mlp").output(&self.theta, phi))
            }
            PolicyKind::Bilinear => Err(Error::UnsupportedEstimator {
                estimator: "score function",
                reason: "deterministic bilinear policies".into(),
            }),
        }
    }

    /// Action probabilities, renormalized over `mask` when given.
    pub fn probabilities(
        &self,
        phi: &[f64],
        key: Option<usize>,
        mask: Option<&[bool]>,
    ) -> Result<Vec<f64>> {
        let logits = self.logits(phi, key)?;
        if let Some(m) = mask {
            check_len("action mask", logits.len(), m.len())?;
            if !m.iter().any(|&b| b) {
                return Err(Error::Numerical("empty action mask".into()));
            }
        }
        Ok(softmax(&logits, mask))
    }

    /// `∇_θ log π(action | s)` under the (optionally masked) softmax.
    pub fn grad_log_prob(
        &self,
        phi: &[f64],
        key: Option<usize>,
        action: usize,
        mask: Option<&[bool]>,
    ) -> Result<Vec<f64>> {
        let p = self.probabilities(phi, key, mask)?;
        let mut d: Vec<f64> = p.iter().map(|&q| -q).collect();
        d[action] += 1.0;
        let mut g = vec![0.0; self.theta.len()];
        match self.kind {
            PolicyKind::TabularSoftmax => {
                let k = key.expect("checked in logits");
                g[k * self.n_out..(k + 1) * self.n_out].copy_from_slice(&d);
            }
            PolicyKind::Mlp { .. } => {
                let net = self.net().expect("mlp");
                let acts = net.forward(&self.theta, phi);
                net.backward(&self.theta, &acts, &d, &mut g);
            }
            PolicyKind::Bilinear => unreachable!("rejected by logits"),
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn softmax_normalizes_under_masks() {
        let pol = PolicyParams::mlp(4, 3, 2, 8, &mut stream(3, 0));
        let phi = [0.1, -0.4, 2.0, 0.0];
        let p = pol.probabilities(&phi, None, None).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let m = pol
            .probabilities(&phi, None, Some(&[true, false, true]))
            .unwrap();
        assert_eq!(m[1], 0.0);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(pol.probabilities(&phi, None, Some(&[false; 3])).is_err());
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn masked_log_prob_gradient_matches_finite_differences() {
        let mut pol = PolicyParams::tabular(2, 3);
        pol.theta = vec![0.3, -0.2, 0.9, 0.0, 0.5, -1.0];
        let mask = [true, false, true];
        let g = pol.grad_log_prob(&[], Some(1), 2, Some(&mask)).unwrap();
        for i in 0..pol.theta.len() {
            let h = 1e-6;
            let mut up = pol.clone();
            up.theta[i] += h;
            let mut dn = pol.clone();
            dn.theta[i] -= h;
            let lp = |p: &PolicyParams| p.probabilities(&[], Some(1), Some(&mask)).unwrap()[2].ln();
            let fd = (lp(&up) - lp(&dn)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6);
        }
    }
}
