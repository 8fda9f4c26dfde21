use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::baseline::ValueBaseline;
use super::policy::{PolicyKind, PolicyParams};
use super::rollout::{discounted_return, rollout_batch, MaskMode, Trajectory};
use super::{game_seed, LocalJacobians, MarkovGame, Role};

/// Batch estimate of the payoff, its parameter gradients and the projected
/// constraint block, all from the same trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct PathwiseEstimate {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    pub constraint: ConstraintEstimate,
}

/// `ḡ = E[Π_{R−} g]` with Jacobians in leader and follower parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintEstimate {
    pub values: Vec<f64>,
    pub jac_x: Vec<Vec<f64>>,
    pub jac_y: Vec<Vec<f64>>,
}

/// How per-step constraint values enter the trajectory estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintForm {
    /// Negative part `min(g, 0)`: the estimate is zero when every visited
    /// step is feasible.
    #[default]
    Projected,
    /// `g` itself.
    Raw,
}

impl ConstraintForm {
    pub(crate) fn apply(self, g: f64) -> f64 {
        match self {
            ConstraintForm::Projected => g.min(0.0),
            ConstraintForm::Raw => g,
        }
    }

    fn slope(self, g: f64) -> f64 {
        match self {
            ConstraintForm::Projected if g >= 0.0 => 0.0,
            _ => 1.0,
        }
    }
}

fn unsupported(reason: impl Into<String>) -> Error {
    Error::UnsupportedEstimator {
        estimator: "pathwise",
        reason: reason.into(),
    }
}

/// Partial derivatives of one stage term with respect to `(s, a, b)`.
struct Stage {
    ds: Vec<f64>,
    da: Vec<f64>,
    db: Vec<f64>,
}

fn mat_t_vec(m: &[Vec<f64>], v: &[f64], out: &mut [f64]) {
    for (row, &vi) in m.iter().zip(v) {
        if vi == 0.0 {
            continue;
        }
        for (o, &r) in out.iter_mut().zip(row) {
            *o += r * vi;
        }
    }
}

/// Accumulates `∂(Σ_t c_t)/∂θ` for a bilinear policy from the action adjoint.
fn bilinear_param_grad(policy: &PolicyParams, phi: &[f64], g_action: &[f64], grad: &mut [f64]) {
    let w = policy.n_in + 1;
    for (o, &g) in g_action.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for (i, &p) in phi.iter().enumerate() {
            grad[o * w + i] += g * p;
        }
        grad[o * w + policy.n_in] += g;
    }
}

/// `Θ[:, :n_in]ᵀ g` (adjoint flowing from an action back into the features).
fn bilinear_feature_adjoint(policy: &PolicyParams, g_action: &[f64], out: &mut [f64]) {
    let w = policy.n_in + 1;
    for (o, &g) in g_action.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for (i, d) in out.iter_mut().enumerate() {
            *d += policy.theta[o * w + i] * g;
        }
    }
}

struct Linearized {
    locals: Vec<LocalJacobians>,
    fjac: Vec<Vec<Vec<f64>>>,
}

fn linearize<G: MarkovGame + ?Sized>(game: &G, traj: &Trajectory) -> Result<Linearized> {
    let mut locals = Vec::with_capacity(traj.len());
    let mut fjac = Vec::with_capacity(traj.len());
    for st in &traj.steps {
        locals.push(
            game.local_jacobians(&st.state, &st.leader, &st.follower)
                .ok_or_else(|| unsupported("games without differentiable dynamics"))?,
        );
        fjac.push(
            game.feature_jacobian(&st.state)
                .ok_or_else(|| unsupported("games without differentiable features"))?,
        );
    }
    Ok(Linearized { locals, fjac })
}

/// Reverse-mode pass through the deterministic dynamics for the objective
/// `Σ_t c_t(s_t, a_t, b_t)`; returns gradients in leader and follower
/// parameters.
fn backprop(
    leader: &PolicyParams,
    follower: &PolicyParams,
    traj: &Trajectory,
    lin: &Linearized,
    stages: &[Stage],
) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; leader.theta.len()];
    let mut gy = vec![0.0; follower.theta.len()];
    let n = traj.final_state.len();
    let mut v = vec![0.0; n];
    for t in (0..traj.len()).rev() {
        let st = &traj.steps[t];
        let loc = &lin.locals[t];
        let c = &stages[t];
        let mut ga = c.da.clone();
        mat_t_vec(&loc.dnext_da, &v, &mut ga);
        let mut gb = c.db.clone();
        mat_t_vec(&loc.dnext_db, &v, &mut gb);
        for (g, &on) in ga.iter_mut().zip(&st.leader_active) {
            if !on {
                *g = 0.0;
            }
        }
        for (g, &on) in gb.iter_mut().zip(&st.follower_active) {
            if !on || st.shielded {
                *g = 0.0;
            }
        }
        bilinear_param_grad(leader, &st.features, &ga, &mut gx);
        bilinear_param_grad(follower, &st.features, &gb, &mut gy);
        let mut dphi = vec![0.0; st.features.len()];
        bilinear_feature_adjoint(leader, &ga, &mut dphi);
        bilinear_feature_adjoint(follower, &gb, &mut dphi);
        let mut v_new = c.ds.clone();
        mat_t_vec(&loc.dnext_ds, &v, &mut v_new);
        mat_t_vec(&lin.fjac[t], &dphi, &mut v_new);
        v = v_new;
    }
    (gx, gy)
}

struct TrajEstimate {
    value: f64,
    gx: Vec<f64>,
    gy: Vec<f64>,
    g: Vec<f64>,
    jx: Vec<Vec<f64>>,
    jy: Vec<Vec<f64>>,
}

fn check_bilinear(leader: &PolicyParams, follower: &PolicyParams) -> Result<()> {
    for p in [leader, follower] {
        if p.kind != PolicyKind::Bilinear {
            return Err(unsupported(format!("{} policies", p.kind.name())));
        }
    }
    Ok(())
}

fn estimate_one<G: MarkovGame + ?Sized>(
    game: &G,
    leader: &PolicyParams,
    follower: &PolicyParams,
    traj: &Trajectory,
    constraints: Option<ConstraintForm>,
) -> Result<TrajEstimate> {
    let lin = linearize(game, traj)?;
    let reward_stages: Vec<Stage> = lin
        .locals
        .iter()
        .zip(&traj.discount_weights)
        .map(|(l, &w)| Stage {
            ds: l.dr_ds.iter().map(|d| w * d).collect(),
            da: l.dr_da.iter().map(|d| w * d).collect(),
            db: l.dr_db.iter().map(|d| w * d).collect(),
        })
        .collect();
    let (gx, gy) = backprop(leader, follower, traj, &lin, &reward_stages);
    let form = constraints.unwrap_or_default();
    let k = if constraints.is_some() {
        game.num_constraints()
    } else {
        0
    };
    let total_w: f64 = traj.discount_weights.iter().sum();
    let mut g = vec![0.0; k];
    let mut jx = Vec::with_capacity(k);
    let mut jy = Vec::with_capacity(k);
    for (kk, gk) in g.iter_mut().enumerate() {
        if total_w == 0.0 {
            jx.push(vec![0.0; leader.theta.len()]);
            jy.push(vec![0.0; follower.theta.len()]);
            continue;
        }
        let stages: Vec<Stage> = lin
            .locals
            .iter()
            .zip(&traj.discount_weights)
            .map(|(l, &w)| {
                let w = w / total_w;
                let gv = l.constraint[kk];
                *gk += w * form.apply(gv);
                let on = w * form.slope(gv);
                Stage {
                    ds: l.dg_ds[kk].iter().map(|d| on * d).collect(),
                    da: l.dg_da[kk].iter().map(|d| on * d).collect(),
                    db: l.dg_db[kk].iter().map(|d| on * d).collect(),
                }
            })
            .collect();
        let (cx, cy) = backprop(leader, follower, traj, &lin, &stages);
        jx.push(cx);
        jy.push(cy);
    }
    Ok(TrajEstimate {
        value: discounted_return(traj),
        gx,
        gy,
        g,
        jx,
        jy,
    })
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

fn scale(v: &mut [f64], s: f64) {
    for a in v {
        *a *= s;
    }
}

/// Pathwise estimate over `batch` trajectories drawn from streams
/// `(seed, 0..batch)`. The constraint block, present when `constraints` is
/// set, is the discounted-visitation average of the (projected) constraint
/// along each trajectory.
pub fn pathwise_batch<G: MarkovGame + ?Sized>(
    game: &G,
    leader: &PolicyParams,
    follower: &PolicyParams,
    seed: u64,
    batch: usize,
    mask: MaskMode,
    constraints: Option<ConstraintForm>,
) -> Result<PathwiseEstimate> {
    check_bilinear(leader, follower)?;
    if batch == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let trajs = rollout_batch(game, leader, follower, seed, 0, batch, mask)?;
    let parts: Vec<TrajEstimate> = trajs
        .par_iter()
        .map(|t| estimate_one(game, leader, follower, t, constraints))
        .collect::<Result<_>>()?;
    let k = if constraints.is_some() {
        game.num_constraints()
    } else {
        0
    };
    let mut value = 0.0;
    let mut gx = vec![0.0; leader.theta.len()];
    let mut gy = vec![0.0; follower.theta.len()];
    let mut g = vec![0.0; k];
    let mut jx = vec![vec![0.0; leader.theta.len()]; k];
    let mut jy = vec![vec![0.0; follower.theta.len()]; k];
    for p in &parts {
        value += p.value;
        add(&mut gx, &p.gx);
        add(&mut gy, &p.gy);
        add(&mut g, &p.g);
        for i in 0..k {
            add(&mut jx[i], &p.jx[i]);
            add(&mut jy[i], &p.jy[i]);
        }
    }
    let inv = 1.0 / batch as f64;
    value *= inv;
    scale(&mut gx, inv);
    scale(&mut gy, inv);
    scale(&mut g, inv);
    for row in jx.iter_mut().chain(jy.iter_mut()) {
        scale(row, inv);
    }
    Ok(PathwiseEstimate {
        value,
        grad_x: gx,
        grad_y: gy,
        constraint: ConstraintEstimate {
            values: g,
            jac_x: jx,
            jac_y: jy,
        },
    })
}

/// Deterministic policy gradient of the expected discounted payoff in the
/// leader and follower parameters.
pub fn det_pg_grad<G: MarkovGame + ?Sized>(
    game: &G,
    leader: &PolicyParams,
    follower: &PolicyParams,
    batch: usize,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let est = pathwise_batch(
        game,
        leader,
        follower,
        game_seed(rng),
        batch,
        MaskMode::None,
        None,
    )?;
    Ok((est.grad_x, est.grad_y))
}

/// Projected constraint estimate `E[Π_{R−} g]` with parameter Jacobians.
pub fn constraint_expectation<G: MarkovGame + ?Sized>(
    game: &G,
    leader: &PolicyParams,
    follower: &PolicyParams,
    batch: usize,
    rng: &mut Rng,
) -> Result<ConstraintEstimate> {
    let est = pathwise_batch(
        game,
        leader,
        follower,
        game_seed(rng),
        batch,
        MaskMode::None,
        Some(ConstraintForm::Projected),
    )?;
    Ok(est.constraint)
}

/// Score-function estimate `Σ_t γ^t (G_t − v̂(s_t)) ∇ log π(action_t | s_t)`
/// for the policy playing `role` in `traj`.
pub fn reinforce_grad(
    traj: &Trajectory,
    policy: &PolicyParams,
    role: Role,
    baseline: Option<&ValueBaseline>,
) -> Result<Vec<f64>> {
    if !policy.is_stochastic() {
        return Err(Error::UnsupportedEstimator {
            estimator: "reinforce",
            reason: "deterministic bilinear policies (use the pathwise estimator)".into(),
        });
    }
    let returns = traj.rewards_to_go();
    let mut grad = vec![0.0; policy.theta.len()];
    for ((st, &w), &g) in traj.steps.iter().zip(&traj.discount_weights).zip(&returns) {
        let b = baseline.map_or(0.0, |v| v.value(&st.features));
        let coef = w * (g - b);
        if coef == 0.0 {
            continue;
        }
        let (idx, mask) = match role {
            Role::Leader => (st.leader_index, None),
            Role::Follower => (st.follower_index, st.mask.as_deref()),
        };
        let idx =
            idx.ok_or_else(|| Error::Numerical("step has no discrete action index".into()))?;
        let glp = policy.grad_log_prob(&st.features, st.key, idx, mask)?;
        for (a, d) in grad.iter_mut().zip(&glp) {
            *a += coef * d;
        }
    }
    Ok(grad)
}
