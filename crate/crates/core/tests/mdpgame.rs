use approx::assert_abs_diff_eq;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use stackgame_core::mdpgame::testgames::{
    AffineConcaveGame, Chain, MatrixBandit, QuadraticStepGame,
};
use stackgame_core::mdpgame::*;
use stackgame_core::minmax::{
    nested_sgda, se_residual, simultaneous_sgda, CoupledMinMaxProblem, LambdaCap,
    QuadraticBenchmark, ResidualConfig, SolverConfig, UpdateRule,
};
use stackgame_core::rng::{stream, Rng};
use stackgame_core::Error;

/// One-step game on a Gaussian state `s ∈ R²` with features `s`:
/// `r = |a|² + s·a + w(2 s·b − |b|²)`.
struct LinearQuadraticStep {
    follower_weight: f64,
    space: ActionSpace,
}

impl LinearQuadraticStep {
    fn new(follower_weight: f64) -> Self {
        Self {
            follower_weight,
            space: ActionSpace::Box {
                lo: vec![-100.0; 2],
                hi: vec![100.0; 2],
            },
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl MarkovGame for LinearQuadraticStep {
    fn state_dim(&self) -> usize {
        2
    }
    fn feature_dim(&self) -> usize {
        2
    }
    fn leader_actions(&self) -> &ActionSpace {
        &self.space
    }
    fn follower_actions(&self) -> &ActionSpace {
        &self.space
    }
    fn num_constraints(&self) -> usize {
        0
    }
    fn discount(&self) -> f64 {
        0.9
    }
    fn horizon(&self) -> usize {
        1
    }
    fn reward_bound(&self) -> f64 {
        1e5
    }
    fn initial_state(&self, rng: &mut Rng) -> Vec<f64> {
        (0..2).map(|_| StandardNormal.sample(rng)).collect()
    }
    fn features(&self, s: &[f64]) -> Vec<f64> {
        s.to_vec()
    }
    fn reward(&self, s: &[f64], a: &[f64], b: &[f64]) -> f64 {
        dot(a, a) + dot(s, a) + self.follower_weight * (2.0 * dot(s, b) - dot(b, b))
    }
    fn constraint(&self, _s: &[f64], _a: &[f64], _b: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    fn transition(
        &self,
        s: &[f64],
        _a: &[f64],
        _b: &[f64],
        _rng: &mut Rng,
    ) -> (Vec<f64>, StepStatus) {
        (s.to_vec(), StepStatus::Continue)
    }
    fn local_jacobians(&self, s: &[f64], a: &[f64], b: &[f64]) -> Option<LocalJacobians> {
        let w = self.follower_weight;
        let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let zero = vec![vec![0.0; 2]; 2];
        Some(LocalJacobians {
            next: s.to_vec(),
            reward: self.reward(s, a, b),
            constraint: Vec::new(),
            dnext_ds: eye,
            dnext_da: zero.clone(),
            dnext_db: zero,
            dr_ds: (0..2).map(|i| a[i] + 2.0 * w * b[i]).collect(),
            dr_da: (0..2).map(|i| 2.0 * a[i] + s[i]).collect(),
            dr_db: (0..2).map(|i| w * (2.0 * s[i] - 2.0 * b[i])).collect(),
            dg_ds: Vec::new(),
            dg_da: Vec::new(),
            dg_db: Vec::new(),
        })
    }
    fn feature_jacobian(&self, _s: &[f64]) -> Option<Vec<Vec<f64>>> {
        Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]])
    }
}

/// One-step game whose follower action is perturbed by Gaussian noise
/// carried in the state: `r = −(b + σz − 1)²`.
struct SmoothedStep {
    sigma: f64,
    space: ActionSpace,
}

impl MarkovGame for SmoothedStep {
    fn state_dim(&self) -> usize {
        1
    }
    fn feature_dim(&self) -> usize {
        0
    }
    fn leader_actions(&self) -> &ActionSpace {
        &self.space
    }
    fn follower_actions(&self) -> &ActionSpace {
        &self.space
    }
    fn num_constraints(&self) -> usize {
        0
    }
    fn discount(&self) -> f64 {
        0.9
    }
    fn horizon(&self) -> usize {
        1
    }
    fn reward_bound(&self) -> f64 {
        1e4
    }
    fn initial_state(&self, rng: &mut Rng) -> Vec<f64> {
        vec![StandardNormal.sample(rng)]
    }
    fn features(&self, _s: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    fn reward(&self, s: &[f64], _a: &[f64], b: &[f64]) -> f64 {
        -(b[0] + self.sigma * s[0] - 1.0).powi(2)
    }
    fn constraint(&self, _s: &[f64], _a: &[f64], _b: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    fn transition(
        &self,
        s: &[f64],
        _a: &[f64],
        _b: &[f64],
        _rng: &mut Rng,
    ) -> (Vec<f64>, StepStatus) {
        (s.to_vec(), StepStatus::Continue)
    }
    fn local_jacobians(&self, s: &[f64], a: &[f64], b: &[f64]) -> Option<LocalJacobians> {
        let e = b[0] + self.sigma * s[0] - 1.0;
        Some(LocalJacobians {
            next: s.to_vec(),
            reward: self.reward(s, a, b),
            constraint: Vec::new(),
            dnext_ds: vec![vec![1.0]],
            dnext_da: vec![vec![0.0]],
            dnext_db: vec![vec![0.0]],
            dr_ds: vec![-2.0 * self.sigma * e],
            dr_da: vec![0.0],
            dr_db: vec![-2.0 * e],
            dg_ds: Vec::new(),
            dg_da: Vec::new(),
            dg_db: Vec::new(),
        })
    }
    fn feature_jacobian(&self, _s: &[f64]) -> Option<Vec<Vec<f64>>> {
        Some(Vec::new())
    }
}

fn bias_policy(value: f64) -> PolicyParams {
    let mut p = PolicyParams::bilinear(0, 1);
    p.theta = vec![value];
    p
}

fn tabular(states: usize, actions: usize, theta: Vec<f64>) -> PolicyParams {
    let mut p = PolicyParams::tabular(states, actions);
    p.theta = theta;
    p
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

#[test]
fn horizon_one_gives_a_single_step() {
    let g = QuadraticStepGame::new(0.1);
    let t = sample_trajectory(
        &g,
        &bias_policy(0.3),
        &bias_policy(0.2),
        &mut stream(1, 0),
        MaskMode::None,
    )
    .unwrap();
    assert_eq!(t.len(), 1);
    assert_eq!(t.termination, Termination::Horizon);
    assert_eq!(t.discount_weights, vec![1.0]);
}

#[test]
fn rollouts_are_reproducible() {
    let g = QuadraticStepGame::new(0.5);
    let run = || {
        rollout_batch(
            &g,
            &bias_policy(0.3),
            &bias_policy(0.2),
            9,
            0,
            16,
            MaskMode::None,
        )
        .unwrap()
    };
    assert_eq!(run(), run());
    let other = rollout_batch(
        &g,
        &bias_policy(0.3),
        &bias_policy(0.2),
        10,
        0,
        16,
        MaskMode::None,
    )
    .unwrap();
    assert_ne!(run(), other);
}

#[test]
fn constant_reward_chain_return_is_a_geometric_sum() {
    let g = Chain::new(1.0, 0.99, 50);
    let one = tabular(2, 1, vec![0.0; 2]);
    let t = sample_trajectory(&g, &one, &one, &mut stream(0, 0), MaskMode::None).unwrap();
    assert_eq!(t.len(), 50);
    let expected = (1.0 - 0.99f64.powi(50)) / (1.0 - 0.99);
    assert_abs_diff_eq!(discounted_return(&t), expected, epsilon = 1e-9);
    assert_abs_diff_eq!(expected, 39.499, epsilon = 1e-3);
    for (i, w) in t.discount_weights.iter().enumerate() {
        assert_eq!(*w, 0.99f64.powi(i as i32));
    }
}

#[test]
fn discounted_return_trivial_cases() {
    let one = tabular(1, 1, vec![0.0]);
    let zero = MatrixBandit::arms(vec![0.0]);
    let t = sample_trajectory(&zero, &one, &one, &mut stream(0, 0), MaskMode::None).unwrap();
    assert_eq!(discounted_return(&t), 0.0);
    let five = MatrixBandit::arms(vec![5.0]);
    let t = sample_trajectory(&five, &one, &one, &mut stream(0, 0), MaskMode::None).unwrap();
    assert_eq!(discounted_return(&t), 5.0);
    assert_eq!(t.termination, Termination::Absorbed);
}

#[test]
fn returns_respect_the_value_bound() {
    let g = QuadraticStepGame::new(0.1);
    let bound = g.reward_bound() / (1.0 - g.discount());
    let mut rng = stream(3, 0);
    for i in 0..200 {
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let t = sample_trajectory(
            &g,
            &bias_policy(a),
            &bias_policy(b),
            &mut stream(3, i + 1),
            MaskMode::None,
        )
        .unwrap();
        assert!(discounted_return(&t).abs() <= bound);
    }
    let chain = Chain::new(-1.0, 0.99, 50);
    let one = tabular(2, 1, vec![0.0; 2]);
    let t = sample_trajectory(&chain, &one, &one, &mut stream(0, 0), MaskMode::None).unwrap();
    assert!(discounted_return(&t).abs() <= chain.reward_bound() / (1.0 - chain.discount()));
}

#[test]
fn reinforce_mean_matches_finite_differences_on_a_bandit() {
    let rewards = vec![1.0, 0.0];
    let g = MatrixBandit::arms(rewards.clone());
    let leader = tabular(1, 1, vec![0.0]);
    let theta = vec![0.3, -0.2];
    let follower = tabular(1, 2, theta.clone());
    let expected = |th: &[f64]| {
        let p = tabular(1, 2, th.to_vec())
            .probabilities(&[1.0], Some(0), None)
            .unwrap();
        p.iter().zip(&rewards).map(|(p, r)| p * r).sum::<f64>()
    };
    let h = 1e-4;
    let fd: Vec<f64> = (0..2)
        .map(|i| {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[i] += h;
            dn[i] -= h;
            (expected(&up) - expected(&dn)) / (2.0 * h)
        })
        .collect();
    let n = 100_000;
    let trajs = rollout_batch(&g, &leader, &follower, 17, 0, n, MaskMode::None).unwrap();
    let mut mean = vec![0.0; 2];
    for t in &trajs {
        let gr = reinforce_grad(t, &follower, Role::Follower, None).unwrap();
        for (m, d) in mean.iter_mut().zip(gr) {
            *m += d / n as f64;
        }
    }
    for i in 0..2 {
        assert!(
            (mean[i] - fd[i]).abs() <= 0.02 * fd[i].abs(),
            "{mean:?} vs {fd:?}"
        );
    }
}

#[test]
fn reinforce_is_zero_for_zero_rewards() {
    let g = MatrixBandit::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    let leader = tabular(1, 2, vec![0.4, -1.0]);
    let follower = tabular(1, 2, vec![0.1, 0.7]);
    for t in rollout_batch(&g, &leader, &follower, 4, 0, 64, MaskMode::None).unwrap() {
        assert!(reinforce_grad(&t, &leader, Role::Leader, None)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert!(reinforce_grad(&t, &follower, Role::Follower, None)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }
}

#[test]
fn reinforce_vanishes_in_mean_on_a_symmetric_bandit() {
    let g = MatrixBandit::arms(vec![1.0, 1.0]);
    let leader = tabular(1, 1, vec![0.0]);
    let follower = tabular(1, 2, vec![0.0, 0.0]);
    let trajs = rollout_batch(&g, &leader, &follower, 5, 0, 20_000, MaskMode::None).unwrap();
    let samples: Vec<f64> = trajs
        .iter()
        .map(|t| reinforce_grad(t, &follower, Role::Follower, None).unwrap()[0])
        .collect();
    let (m, sd) = mean_std(&samples);
    assert!(m.abs() <= 4.0 * sd / (samples.len() as f64).sqrt());
}

#[test]
fn reinforce_rejects_deterministic_policies() {
    let g = QuadraticStepGame::new(0.0);
    let t = sample_trajectory(
        &g,
        &bias_policy(0.1),
        &bias_policy(0.1),
        &mut stream(0, 0),
        MaskMode::None,
    )
    .unwrap();
    let err = reinforce_grad(&t, &bias_policy(0.1), Role::Leader, None).unwrap_err();
    assert!(matches!(err, Error::UnsupportedEstimator { .. }));
}

#[test]
fn pathwise_gradient_matches_the_hand_chain_rule() {
    let g = LinearQuadraticStep::new(1.0);
    let mut leader = PolicyParams::bilinear(2, 2);
    leader.theta = vec![0.3, -0.1, 0.2, 0.05, 0.4, -0.3];
    let mut follower = PolicyParams::bilinear(2, 2);
    follower.theta = vec![-0.2, 0.6, 0.1, 0.3, 0.0, 0.25];
    let (seed, batch) = (11, 64);
    let est = pathwise_batch(&g, &leader, &follower, seed, batch, MaskMode::None, None).unwrap();
    let trajs = rollout_batch(&g, &leader, &follower, seed, 0, batch, MaskMode::None).unwrap();
    let mut gx = [0.0; 6];
    let mut gy = [0.0; 6];
    for t in &trajs {
        let st = &t.steps[0];
        let s = &st.state;
        let phi1 = [s[0], s[1], 1.0];
        for o in 0..2 {
            let da = 2.0 * st.leader[o] + s[o];
            let db = 2.0 * s[o] - 2.0 * st.follower[o];
            for j in 0..3 {
                gx[o * 3 + j] += da * phi1[j] / batch as f64;
                gy[o * 3 + j] += db * phi1[j] / batch as f64;
            }
        }
    }
    for i in 0..6 {
        assert_abs_diff_eq!(est.grad_x[i], gx[i], epsilon = 1e-6);
        assert_abs_diff_eq!(est.grad_y[i], gy[i], epsilon = 1e-6);
    }
}

#[test]
fn pathwise_follower_gradient_vanishes_when_reward_ignores_the_follower() {
    let g = LinearQuadraticStep::new(0.0);
    let mut leader = PolicyParams::bilinear(2, 2);
    leader.theta = vec![0.3, -0.1, 0.2, 0.05, 0.4, -0.3];
    let mut follower = PolicyParams::bilinear(2, 2);
    follower.theta = vec![-0.2, 0.6, 0.1, 0.3, 0.0, 0.25];
    let (gx, gy) = det_pg_grad(&g, &leader, &follower, 32, &mut stream(2, 0)).unwrap();
    assert!(gy.iter().all(|&v| v == 0.0));
    assert!(gx.iter().any(|&v| v != 0.0));
}

#[test]
fn pathwise_and_score_function_estimates_agree_on_a_smoothed_game() {
    let sigma = 0.5;
    let g = SmoothedStep {
        sigma,
        space: ActionSpace::Box {
            lo: vec![-100.0],
            hi: vec![100.0],
        },
    };
    let theta = 0.3;
    let n = 50_000;
    let est = pathwise_batch(
        &g,
        &bias_policy(0.0),
        &bias_policy(theta),
        21,
        n,
        MaskMode::None,
        None,
    )
    .unwrap();
    let trajs = rollout_batch(
        &g,
        &bias_policy(0.0),
        &bias_policy(theta),
        21,
        0,
        n,
        MaskMode::None,
    )
    .unwrap();
    // Score function of the Gaussian perturbation b + σz around θ.
    let score: Vec<f64> = trajs
        .iter()
        .map(|t| t.steps[0].reward * t.steps[0].state[0] / sigma)
        .collect();
    let (m, sd) = mean_std(&score);
    let se = sd / (n as f64).sqrt();
    assert!(
        (est.grad_y[0] - m).abs() <= 3.0 * se,
        "pathwise {} score {m} ± {se}",
        est.grad_y[0]
    );
    assert_abs_diff_eq!(est.grad_y[0], -2.0 * (theta - 1.0), epsilon = 0.02);
}

#[test]
fn constraint_expectation_projects_and_differentiates() {
    let g = QuadraticStepGame::new(0.0);
    let feasible = constraint_expectation(
        &g,
        &bias_policy(0.2),
        &bias_policy(0.2),
        4,
        &mut stream(0, 0),
    )
    .unwrap();
    assert_eq!(feasible.values, vec![0.0]);
    assert_eq!(feasible.jac_x, vec![vec![0.0]]);

    let violated = constraint_expectation(
        &g,
        &bias_policy(0.6),
        &bias_policy(0.6),
        4,
        &mut stream(0, 0),
    )
    .unwrap();
    assert_abs_diff_eq!(violated.values[0], -0.2, epsilon = 1e-12);
    let h = 1e-5;
    let value = |a: f64, b: f64| {
        constraint_expectation(&g, &bias_policy(a), &bias_policy(b), 1, &mut stream(0, 0))
            .unwrap()
            .values[0]
    };
    let fd_x = (value(0.6 + h, 0.6) - value(0.6 - h, 0.6)) / (2.0 * h);
    let fd_y = (value(0.6, 0.6 + h) - value(0.6, 0.6 - h)) / (2.0 * h);
    assert_abs_diff_eq!(violated.jac_x[0][0], fd_x, epsilon = 1e-3 * fd_x.abs());
    assert_abs_diff_eq!(violated.jac_y[0][0], fd_y, epsilon = 1e-3 * fd_y.abs());
}

#[test]
fn pathwise_rejects_stochastic_policies() {
    let g = QuadraticStepGame::new(0.0);
    let err = det_pg_grad(
        &g,
        &tabular(1, 2, vec![0.0; 2]),
        &bias_policy(0.0),
        1,
        &mut stream(0, 0),
    )
    .unwrap_err();
    assert!(matches!(err, Error::UnsupportedEstimator { .. }));
    let err = as_minmax_problem(
        &g,
        &bias_policy(0.0),
        &bias_policy(0.0),
        EstimatorConfig {
            estimator: Estimator::Reinforce,
            ..Default::default()
        },
    )
    .err()
    .unwrap();
    assert!(matches!(err, Error::UnsupportedEstimator { .. }));
}

#[test]
fn games_without_constraints_give_an_empty_multiplier() {
    let g = AffineConcaveGame::default();
    let p = as_minmax_problem(
        &g,
        &bias_policy(1.0),
        &bias_policy(0.0),
        EstimatorConfig::default(),
    )
    .unwrap();
    assert_eq!(p.num_constraints(), 0);
    let log = nested_sgda(
        &p,
        &SolverConfig {
            outer_iters: 5,
            inner_iters: 3,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(log.last.lambda.is_empty());
    assert!(log.records.iter().all(|r| r.lambda.is_empty()));
}

fn one_step_problem(game: &QuadraticStepGame) -> GameProblem<'_, QuadraticStepGame> {
    as_minmax_problem(
        game,
        &bias_policy(0.9),
        &bias_policy(0.0),
        EstimatorConfig {
            batch: 1,
            param_box: (0.0, 1.0),
            constraint_form: ConstraintForm::Raw,
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn one_step_game_solves_like_its_closed_form_instance() {
    let game = QuadraticStepGame::new(0.05);
    let wrapped = one_step_problem(&game);
    let closed = QuadraticBenchmark::<f64>::new(0.05);
    let cfg = SolverConfig {
        outer_iters: 1000,
        inner_iters: 100,
        lambda_cap: LambdaCap::Fixed(20.0),
        ..Default::default()
    };
    let a = nested_sgda(&wrapped, &cfg).unwrap();
    let b = nested_sgda(&closed, &cfg).unwrap();
    for (u, v) in [(&a.last.x, &b.last.x), (&a.last.y, &b.last.y)] {
        assert_abs_diff_eq!(u[0], v[0], epsilon = 0.05);
    }
    assert_abs_diff_eq!(a.last.x[0], 0.5, epsilon = 0.05);
    assert_abs_diff_eq!(a.last.y[0], 0.5, epsilon = 0.05);
}

#[test]
fn simultaneous_updates_leave_a_larger_stackelberg_residual_on_the_one_step_game() {
    let game = QuadraticStepGame::new(0.05);
    let wrapped = one_step_problem(&game);
    let closed = QuadraticBenchmark::<f64>::new(0.0);
    let rc = ResidualConfig::default();
    let (mut nested, mut sim) = (0.0, 0.0);
    for seed in 0..5 {
        let cfg = SolverConfig {
            outer_iters: 1000,
            inner_iters: 100,
            lambda_cap: LambdaCap::Fixed(20.0),
            seed,
            ..Default::default()
        };
        let n = nested_sgda(&wrapped, &cfg).unwrap();
        let s = simultaneous_sgda(
            &wrapped,
            &SolverConfig {
                update: UpdateRule::Simultaneous,
                ..cfg
            },
        )
        .unwrap();
        nested += se_residual(&closed, &n.last.x, &n.last.y, &rc)
            .unwrap()
            .epsilon
            / 5.0;
        sim += se_residual(&closed, &s.last.x, &s.last.y, &rc)
            .unwrap()
            .epsilon
            / 5.0;
    }
    assert!(sim - nested >= 0.05, "simultaneous {sim} nested {nested}");
}

#[test]
fn follower_payoff_is_concave_for_bilinear_policies() {
    let g = AffineConcaveGame::default();
    let u = |a: f64, b: f64| {
        let t = sample_trajectory(
            &g,
            &bias_policy(a),
            &bias_policy(b),
            &mut stream(0, 0),
            MaskMode::None,
        )
        .unwrap();
        discounted_return(&t)
    };
    let mut rng = stream(42, 0);
    for _ in 0..200 {
        let x = rng.gen_range(-10.0..10.0);
        let (y1, y2) = (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let mu: f64 = rng.gen_range(0.0..1.0);
        let mid = u(x, mu * y1 + (1.0 - mu) * y2);
        assert!(mid >= mu * u(x, y1) + (1.0 - mu) * u(x, y2) - 1e-6);
        assert_abs_diff_eq!(u(x, y1), AffineConcaveGame::payoff(x, y1), epsilon = 1e-9);
    }
}

#[test]
fn marginal_is_convex_for_bilinear_policies() {
    let g = AffineConcaveGame::default();
    let v = |a: f64| {
        let b = AffineConcaveGame::best_response(a);
        let t = sample_trajectory(
            &g,
            &bias_policy(a),
            &bias_policy(b),
            &mut stream(0, 0),
            MaskMode::None,
        )
        .unwrap();
        discounted_return(&t)
    };
    let mut rng = stream(43, 0);
    for _ in 0..200 {
        let (x1, x2) = (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let mu: f64 = rng.gen_range(0.0..1.0);
        assert!(v(mu * x1 + (1.0 - mu) * x2) <= mu * v(x1) + (1.0 - mu) * v(x2) + 1e-6);
    }
    // The analytic best response is a maximizer.
    for &a in &[-3.0, 0.0, 2.5] {
        let b = AffineConcaveGame::best_response(a);
        for d in [-0.1, 0.1] {
            assert!(AffineConcaveGame::payoff(a, b) >= AffineConcaveGame::payoff(a, b + d));
        }
    }
}

#[test]
fn baseline_is_unchanged_when_it_already_predicts_returns() {
    let g = MatrixBandit::arms(vec![3.0]);
    let one = tabular(1, 1, vec![0.0]);
    let t = sample_trajectory(&g, &one, &one, &mut stream(0, 0), MaskMode::None).unwrap();
    let mut b = ValueBaseline::new(1, 8, &mut stream(0, 1));
    b.w.iter_mut().for_each(|w| *w = 0.0);
    *b.w.last_mut().unwrap() = 3.0;
    assert_eq!(baseline_update(&b, &t, 0.1).unwrap(), b);
    let fresh = ValueBaseline::new(1, 8, &mut stream(0, 2));
    assert_eq!(baseline_update(&fresh, &t, 0.0).unwrap(), fresh);
}

#[test]
fn baseline_learns_the_return_of_a_constant_chain() {
    let g = Chain::clocked(1.0, 0.99, 50);
    let one = tabular(50, 1, vec![0.0; 50]);
    let mut b = ValueBaseline::new(1, 16, &mut stream(8, 0));
    for i in 0..1000 {
        let t = sample_trajectory(&g, &one, &one, &mut stream(8, i + 1), MaskMode::None).unwrap();
        b = baseline_update(&b, &t, 2e-3).unwrap();
        assert!(b.is_finite());
    }
    let target = (1.0 - 0.99f64.powi(50)) / (1.0 - 0.99);
    let v0 = b.value(&g.features(&[0.0]));
    assert!(
        (v0 - target).abs() <= 0.05 * target,
        "v̂(s₀) = {v0}, return {target}"
    );
}

#[test]
fn softmax_policies_normalize_with_and_without_masks() {
    let mut rng = stream(6, 0);
    let mlp = PolicyParams::mlp(3, 5, 2, 8, &mut rng);
    for _ in 0..50 {
        let phi: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let p = mlp.probabilities(&phi, None, None).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let mask = [true, false, true, false, false];
        let p = mlp.probabilities(&phi, None, Some(&mask)).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert_eq!(p[1], 0.0);
    }
    assert!(mlp
        .probabilities(&[0.0; 3], None, Some(&[false; 5]))
        .is_err());
}

#[test]
fn checkpoints_round_trip_and_reject_corruption() {
    let mut rng = stream(7, 0);
    let policies = [
        PolicyParams::mlp(4, 3, 2, 6, &mut rng),
        tabular(2, 3, vec![0.1, -0.2, 0.3, 1e-300, -7.5, f64::MAX]),
        {
            let mut p = PolicyParams::bilinear(3, 2);
            p.theta = (0..8).map(|i| i as f64 / 7.0).collect();
            p
        },
    ];
    for p in &policies {
        let c = Checkpoint::from_policy(p, serde_json::json!({"role": "leader"}));
        let back = Checkpoint::from_json(&c.to_json().unwrap())
            .unwrap()
            .to_policy()
            .unwrap();
        assert_eq!(&back, p);
    }
    let mut c = Checkpoint::from_policy(&policies[2], serde_json::Value::Null);
    c.shape = vec![2, 4];
    assert!(matches!(c.to_policy(), Err(Error::Checkpoint(_))));
    let mut c = Checkpoint::from_policy(&policies[2], serde_json::Value::Null);
    c.schema_version = 99;
    assert!(matches!(c.to_policy(), Err(Error::Checkpoint(_))));
    assert!(Checkpoint::from_json("{\"schema_version\":1}").is_err());
    let text = Checkpoint::from_policy(&policies[1], serde_json::Value::Null)
        .to_json()
        .unwrap();
    let extra = text.replacen('{', "{\"surprise\": 1,", 1);
    assert!(Checkpoint::from_json(&extra).is_err());
}

#[test]
fn trajectories_serialize_one_record_per_step() {
    let g = Chain::new(1.0, 0.9, 4);
    let one = tabular(2, 1, vec![0.0; 2]);
    let t = sample_trajectory(&g, &one, &one, &mut stream(0, 0), MaskMode::None).unwrap();
    let mut buf = Vec::new();
    write_jsonl(&t, &mut buf).unwrap();
    let lines: Vec<serde_json::Value> = String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[2]["t"], 2);
    assert_abs_diff_eq!(
        lines[2]["discount"].as_f64().unwrap(),
        0.81,
        epsilon = 1e-12
    );
}
