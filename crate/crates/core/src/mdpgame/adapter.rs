use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minmax::{BoxSet, ConstraintSample, CoupledMinMaxProblem, ObjectiveSample};
use crate::rng::Rng;

use super::grad::{pathwise_batch, reinforce_grad, ConstraintForm};
use super::policy::PolicyParams;
use super::rollout::{discounted_return, rollout_batch, MaskMode, Trajectory};
use super::{game_seed, MarkovGame, Role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Deterministic policy gradient through the dynamics (bilinear policies).
    Pathwise,
    /// Score-function gradient (softmax and MLP policies).
    Reinforce,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub estimator: Estimator,
    pub batch: usize,
    pub mask: MaskMode,
    /// Expose the game's coupling constraints to the solver.
    pub constraints: bool,
    pub constraint_form: ConstraintForm,
    /// Every parameter lies in `[lo, hi]`; the default is `[−10, 10]`.
    pub param_box: (f64, f64),
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            estimator: Estimator::Pathwise,
            batch: 32,
            mask: MaskMode::None,
            constraints: true,
            constraint_form: ConstraintForm::Projected,
            param_box: (-10.0, 10.0),
        }
    }
}

/// A game seen as `min_x max_{y : ḡ(x, y) ≥ 0} u(x, y)` over policy
/// parameters, with one batch of trajectories per oracle draw.
pub struct GameProblem<'g, G: MarkovGame + ?Sized> {
    game: &'g G,
    leader: PolicyParams,
    follower: PolicyParams,
    cfg: EstimatorConfig,
}

/// Wraps `game` with policy templates `leader` and `follower`; their
/// current parameters become the solver's initial point.
pub fn as_minmax_problem<'g, G: MarkovGame + ?Sized>(
    game: &'g G,
    leader: &PolicyParams,
    follower: &PolicyParams,
    cfg: EstimatorConfig,
) -> Result<GameProblem<'g, G>> {
    leader.validate()?;
    follower.validate()?;
    if cfg.batch == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let (lo, hi) = cfg.param_box;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config(format!("invalid parameter box [{lo}, {hi}]")));
    }
    for p in [leader, follower] {
        let ok = match cfg.estimator {
            Estimator::Pathwise => !p.is_stochastic(),
            Estimator::Reinforce => p.is_stochastic(),
        };
        if !ok {
            return Err(Error::UnsupportedEstimator {
                estimator: match cfg.estimator {
                    Estimator::Pathwise => "pathwise",
                    Estimator::Reinforce => "reinforce",
                },
                reason: format!("{} policies", p.kind.name()),
            });
        }
    }
    Ok(GameProblem {
        game,
        leader: leader.clone(),
        follower: follower.clone(),
        cfg,
    })
}

impl<'g, G: MarkovGame + ?Sized> GameProblem<'g, G> {
    pub fn game(&self) -> &G {
        self.game
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn leader_policy(&self, x: &[f64]) -> PolicyParams {
        self.leader.with_theta(x)
    }

    pub fn follower_policy(&self, y: &[f64]) -> PolicyParams {
        self.follower.with_theta(y)
    }

    fn k(&self) -> usize {
        if self.cfg.constraints && self.cfg.estimator == Estimator::Pathwise {
            self.game.num_constraints()
        } else {
            0
        }
    }

    fn rollouts(&self, x: &[f64], y: &[f64], seed: u64) -> Result<Vec<Trajectory>> {
        rollout_batch(
            self.game,
            &self.leader_policy(x),
            &self.follower_policy(y),
            seed,
            0,
            self.cfg.batch,
            self.cfg.mask,
        )
    }

    fn reinforce_sample(&self, x: &[f64], y: &[f64], seed: u64) -> Result<ObjectiveSample<f64>> {
        let lp = self.leader_policy(x);
        let fp = self.follower_policy(y);
        let trajs = self.rollouts(x, y, seed)?;
        let n = trajs.len() as f64;
        let mut value = 0.0;
        let mut gx = vec![0.0; x.len()];
        let mut gy = vec![0.0; y.len()];
        for t in &trajs {
            value += discounted_return(t) / n;
            for (a, d) in gx
                .iter_mut()
                .zip(reinforce_grad(t, &lp, Role::Leader, None)?)
            {
                *a += d / n;
            }
            for (a, d) in gy
                .iter_mut()
                .zip(reinforce_grad(t, &fp, Role::Follower, None)?)
            {
                *a += d / n;
            }
        }
        Ok(ObjectiveSample {
            value,
            grad_x: gx,
            grad_y: gy,
        })
    }
}

/// Discounted-visitation average of the (projected) constraints along one
/// trajectory.
pub(crate) fn projected_constraint(traj: &Trajectory, k: usize, form: ConstraintForm) -> Vec<f64> {
    let total: f64 = traj.discount_weights.iter().sum();
    let mut g = vec![0.0; k];
    if total == 0.0 {
        return g;
    }
    for (st, &w) in traj.steps.iter().zip(&traj.discount_weights) {
        for (a, &v) in g.iter_mut().zip(&st.constraint) {
            *a += w / total * form.apply(v);
        }
    }
    g
}

impl<'g, G: MarkovGame + ?Sized> CoupledMinMaxProblem<f64> for GameProblem<'g, G> {
    fn dim_x(&self) -> usize {
        self.leader.theta.len()
    }

    fn dim_y(&self) -> usize {
        self.follower.theta.len()
    }

    fn num_constraints(&self) -> usize {
        self.k()
    }

    fn sample_objective(
        &self,
        x: &[f64],
        y: &[f64],
        rng: &mut Rng,
    ) -> Result<ObjectiveSample<f64>> {
        Ok(self.sample(x, y, rng)?.0)
    }

    fn sample_constraints(
        &self,
        x: &[f64],
        y: &[f64],
        rng: &mut Rng,
    ) -> Result<ConstraintSample<f64>> {
        Ok(self.sample(x, y, rng)?.1)
    }

    fn sample(
        &self,
        x: &[f64],
        y: &[f64],
        rng: &mut Rng,
    ) -> Result<(ObjectiveSample<f64>, ConstraintSample<f64>)> {
        let seed = game_seed(rng);
        match self.cfg.estimator {
            Estimator::Pathwise => {
                let est = pathwise_batch(
                    self.game,
                    &self.leader_policy(x),
                    &self.follower_policy(y),
                    seed,
                    self.cfg.batch,
                    self.cfg.mask,
                    (self.k() > 0).then_some(self.cfg.constraint_form),
                )?;
                Ok((
                    ObjectiveSample {
                        value: est.value,
                        grad_x: est.grad_x,
                        grad_y: est.grad_y,
                    },
                    ConstraintSample {
                        values: est.constraint.values,
                        jac_x: est.constraint.jac_x,
                        jac_y: est.constraint.jac_y,
                    },
                ))
            }
            Estimator::Reinforce => Ok((
                self.reinforce_sample(x, y, seed)?,
                ConstraintSample::empty(),
            )),
        }
    }

    fn sample_constraint_values(&self, x: &[f64], y: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        let k = self.k();
        let seed = game_seed(rng);
        if k == 0 {
            return Ok(Vec::new());
        }
        let trajs = self.rollouts(x, y, seed)?;
        let mut g = vec![0.0; k];
        for t in &trajs {
            for (a, v) in g
                .iter_mut()
                .zip(projected_constraint(t, k, self.cfg.constraint_form))
            {
                *a += v / trajs.len() as f64;
            }
        }
        Ok(g)
    }

    fn x_box(&self) -> Option<BoxSet<f64>> {
        let (lo, hi) = self.cfg.param_box;
        Some(BoxSet::cube(self.dim_x(), lo, hi))
    }

    fn y_box(&self) -> Option<BoxSet<f64>> {
        let (lo, hi) = self.cfg.param_box;
        Some(BoxSet::cube(self.dim_y(), lo, hi))
    }

    fn initial_x(&self) -> Vec<f64> {
        let mut x = self.leader.theta.clone();
        self.project_x(&mut x);
        x
    }

    fn initial_y(&self) -> Vec<f64> {
        let mut y = self.follower.theta.clone();
        self.project_y(&mut y);
        y
    }
}
