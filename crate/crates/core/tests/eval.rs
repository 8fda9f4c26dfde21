use approx::assert_abs_diff_eq;
use rand::Rng as _;
use stackgame_core::eval::*;
use stackgame_core::mdpgame::{ActionSpace, MarkovGame, PolicyParams, StepStatus};
use stackgame_core::reachavoid::*;
use stackgame_core::rng::{stream, Rng};

// ---------------------------------------------------------------- LP

/// `max_p min_b Σ_a p(a) q[a][b]` over a simplex grid with step 1/100.
fn grid_value(q: &[Vec<f64>]) -> f64 {
    let n = 100;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        for j in 0..=n - i {
            let p = [
                i as f64 / n as f64,
                j as f64 / n as f64,
                (n - i - j) as f64 / n as f64,
            ];
            let worst = (0..3)
                .map(|b| (0..q.len()).map(|a| p[a] * q[a][b]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            best = best.max(worst);
        }
    }
    best
}

fn guaranteed(q: &[Vec<f64>], p: &[f64]) -> f64 {
    (0..q[0].len())
        .map(|b| q.iter().zip(p).map(|(row, pa)| pa * row[b]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn matching_pennies_commitment_is_uniform_with_value_zero() {
    let q = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
    let c = stackelberg_verify_lp(&q).unwrap();
    assert_abs_diff_eq!(c.value, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(c.leader_mix[0], 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(c.leader_mix[1], 0.5, epsilon = 1e-12);
}

#[test]
fn dominant_row_gets_all_the_mass() {
    let q = vec![vec![1.0, 1.0], vec![5.0, 6.0], vec![0.0, 2.0]];
    let c = stackelberg_verify_lp(&q).unwrap();
    assert_abs_diff_eq!(c.value, 5.0, epsilon = 1e-12);
    assert_eq!(c.leader_mix, vec![0.0, 1.0, 0.0]);
    assert_eq!(c.follower_response, 0);
}

#[test]
fn one_by_one_game() {
    let c = stackelberg_verify_lp(&[vec![5.0]]).unwrap();
    assert_eq!(c.value, 5.0);
    assert_eq!(c.leader_mix, vec![1.0]);
}

#[test]
fn random_three_by_three_match_grid_search() {
    let mut rng = stream(9, 0);
    for _ in 0..100 {
        let q: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let c = stackelberg_verify_lp(&q).unwrap();
        let grid = grid_value(&q);
        assert!(
            (c.value - grid).abs() <= 0.01,
            "lp {} grid {}",
            c.value,
            grid
        );
        // the grid is a subset of the simplex
        assert!(c.value >= grid - 1e-9);
        assert_abs_diff_eq!(c.leader_mix.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(guaranteed(&q, &c.leader_mix), c.value, epsilon = 1e-9);
    }
}

#[test]
fn commitment_never_loses_to_a_pure_strategy() {
    let mut rng = stream(10, 0);
    for _ in 0..100 {
        let rows = rng.gen_range(1..=8);
        let cols = rng.gen_range(1..=8);
        let q: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let c = stackelberg_verify_lp(&q).unwrap();
        for row in &q {
            let pure = row.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(c.value >= pure - 1e-9);
        }
    }
}

#[test]
fn lp_reports_infeasible_and_unbounded_programs() {
    let infeasible = LinearProgram {
        c: vec![1.0],
        a_ub: vec![vec![1.0]],
        b_ub: vec![-1.0],
        a_eq: vec![],
        b_eq: vec![],
    };
    assert_eq!(solve_lp(&infeasible).unwrap(), LpOutcome::Infeasible);
    let unbounded = LinearProgram {
        c: vec![1.0, 0.0],
        a_ub: vec![vec![0.0, 1.0]],
        b_ub: vec![1.0],
        a_eq: vec![],
        b_eq: vec![],
    };
    assert_eq!(solve_lp(&unbounded).unwrap(), LpOutcome::Unbounded);
}

#[test]
fn lp_solves_a_textbook_program() {
    // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), value 36
    let lp = LinearProgram {
        c: vec![3.0, 5.0],
        a_ub: vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
        b_ub: vec![4.0, 12.0, 18.0],
        a_eq: vec![],
        b_eq: vec![],
    };
    match solve_lp(&lp).unwrap() {
        LpOutcome::Optimal { x, value } => {
            assert_abs_diff_eq!(value, 36.0, epsilon = 1e-9);
            assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-9);
            assert_abs_diff_eq!(x[1], 6.0, epsilon = 1e-9);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn lp_rejects_ragged_matrices() {
    assert!(stackelberg_verify_lp(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    assert!(stackelberg_verify_lp::<f64>(&[]).is_err());
}

// ---------------------------------------------------------------- Bellman

/// The same matrix game played twice: state `[t]`, `t ∈ {0, 1}`.
struct TwoStage {
    payoff: Vec<Vec<f64>>,
    space_a: ActionSpace,
    space_b: ActionSpace,
}

impl TwoStage {
    fn new(payoff: Vec<Vec<f64>>) -> Self {
        let idx = |n: usize| ActionSpace::Discrete((0..n).map(|i| vec![i as f64]).collect());
        Self {
            space_a: idx(payoff.len()),
            space_b: idx(payoff[0].len()),
            payoff,
        }
    }
}

impl MarkovGame for TwoStage {
    fn state_dim(&self) -> usize {
        1
    }
    fn feature_dim(&self) -> usize {
        1
    }
    fn leader_actions(&self) -> &ActionSpace {
        &self.space_a
    }
    fn follower_actions(&self) -> &ActionSpace {
        &self.space_b
    }
    fn num_constraints(&self) -> usize {
        0
    }
    fn discount(&self) -> f64 {
        0.9
    }
    fn horizon(&self) -> usize {
        2
    }
    fn reward_bound(&self) -> f64 {
        10.0
    }
    fn initial_state(&self, _rng: &mut Rng) -> Vec<f64> {
        vec![0.0]
    }
    fn features(&self, s: &[f64]) -> Vec<f64> {
        vec![s[0]]
    }
    fn reward(&self, _s: &[f64], a: &[f64], b: &[f64]) -> f64 {
        self.payoff[a[0] as usize][b[0] as usize]
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
        let next = s[0] + 1.0;
        let status = if next >= 2.0 {
            StepStatus::Absorbed
        } else {
            StepStatus::Continue
        };
        (vec![next], status)
    }
    fn elapsed(&self, s: &[f64]) -> usize {
        s[0] as usize
    }
    fn state_index(&self, s: &[f64]) -> Option<usize> {
        Some(s[0] as usize)
    }
}

fn pure_tabular(states: usize, actions: usize, pick: usize) -> PolicyParams {
    let mut p = PolicyParams::tabular(states, actions);
    for s in 0..states {
        p.theta[s * actions + pick] = 60.0;
    }
    p
}

#[test]
fn saddle_profile_is_a_bellman_fixed_point() {
    // row maxima 2 and 3: the leader plays row 0, the follower column 1
    let game = TwoStage::new(vec![vec![1.0, 2.0], vec![0.0, 3.0]]);
    let leader = pure_tabular(2, 2, 0);
    let follower = pure_tabular(2, 2, 1);
    let states = vec![vec![0.0], vec![1.0]];
    for variant in [BellmanVariant::Stackelberg, BellmanVariant::Nash] {
        let cfg = BellmanConfig {
            num_rollouts: 8,
            variant,
            ..Default::default()
        };
        let est = bellman_error_at(&game, &leader, &follower, &states, &cfg, 3).unwrap();
        assert!(est.error < 1e-9, "{variant:?}: {}", est.error);
    }
}

#[test]
fn non_equilibrium_profile_has_the_exact_gap() {
    let game = TwoStage::new(vec![vec![1.0, 2.0], vec![0.0, 3.0]]);
    // follower plays column 0 everywhere: V(1) = 1, Q(1) = 2; V(0) = 1.9, Q(0) = 2 + 0.9
    let leader = pure_tabular(2, 2, 0);
    let follower = pure_tabular(2, 2, 0);
    let cfg = BellmanConfig {
        num_rollouts: 4,
        ..Default::default()
    };
    let est =
        bellman_error_at(&game, &leader, &follower, &[vec![0.0], vec![1.0]], &cfg, 0).unwrap();
    assert_abs_diff_eq!(est.per_state[0], 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(est.per_state[1], 1.0, epsilon = 1e-9);
}

fn random_bilinear(game: &ReachAvoid, rng: &mut Rng) -> PolicyParams {
    let mut p = PolicyParams::bilinear(game.feature_dim(), 1);
    for v in &mut p.theta {
        *v = rng.gen_range(-1.0..1.0);
    }
    p
}

#[test]
fn random_reach_avoid_policies_have_positive_error() {
    let game = ReachAvoid::new(ReachAvoidConfig::default()).unwrap();
    let mut rng = stream(4, 0);
    let leader = random_bilinear(&game, &mut rng);
    let follower = random_bilinear(&game, &mut rng);
    let cfg = BellmanConfig {
        num_states: 16,
        num_rollouts: 2,
        ..Default::default()
    };
    let est = bellman_error(&game, &leader, &follower, &cfg, &mut rng).unwrap();
    assert!(
        est.error > 3.0 * est.std_error,
        "{} ± {}",
        est.error,
        est.std_error
    );
    assert_eq!(est.per_state.len(), 16);
}

#[test]
fn bellman_error_is_deterministic_and_order_free() {
    let game = ReachAvoid::new(ReachAvoidConfig::default()).unwrap();
    let mut rng = stream(5, 0);
    let leader = random_bilinear(&game, &mut rng);
    let follower = random_bilinear(&game, &mut rng);
    let cfg = BellmanConfig {
        num_rollouts: 1,
        ..Default::default()
    };
    let states: Vec<Vec<f64>> = (0..6)
        .map(|i| initial_state(&mut stream(6, i), game.config()))
        .collect();
    let a = bellman_error_at(&game, &leader, &follower, &states, &cfg, 11).unwrap();
    let b = bellman_error_at(&game, &leader, &follower, &states, &cfg, 11).unwrap();
    assert_eq!(a, b);
    let mut reversed = states.clone();
    reversed.reverse();
    let r = bellman_error_at(&game, &leader, &follower, &reversed, &cfg, 11).unwrap();
    let mut back = r.per_state.clone();
    back.reverse();
    assert_eq!(back, a.per_state);
    assert_abs_diff_eq!(r.error, a.error, epsilon = 1e-12);
}

#[test]
fn bellman_error_rejects_empty_inputs() {
    let game = TwoStage::new(vec![vec![0.0]]);
    let p = pure_tabular(2, 1, 0);
    assert!(bellman_error_at(&game, &p, &p, &[], &BellmanConfig::default(), 0).is_err());
    let cfg = BellmanConfig {
        num_rollouts: 0,
        ..Default::default()
    };
    assert!(bellman_error_at(&game, &p, &p, &[vec![0.0]], &cfg, 0).is_err());
}

// ---------------------------------------------------------------- matches

/// Reach-avoid-shaped game where attacker action `1` jumps into the goal.
struct Teleport(ActionSpace);

fn teleport_game() -> Teleport {
    Teleport(ActionSpace::Discrete(vec![vec![0.0], vec![1.0]]))
}

impl MarkovGame for Teleport {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }
    fn feature_dim(&self) -> usize {
        1
    }
    fn leader_actions(&self) -> &ActionSpace {
        &self.0
    }
    fn follower_actions(&self) -> &ActionSpace {
        &self.0
    }
    fn num_constraints(&self) -> usize {
        0
    }
    fn discount(&self) -> f64 {
        0.99
    }
    fn horizon(&self) -> usize {
        50
    }
    fn reward_bound(&self) -> f64 {
        1.0
    }
    fn initial_state(&self, rng: &mut Rng) -> Vec<f64> {
        initial_state(rng, &ReachAvoidConfig::default())
    }
    fn features(&self, _s: &[f64]) -> Vec<f64> {
        vec![1.0]
    }
    fn reward(&self, _s: &[f64], _a: &[f64], b: &[f64]) -> f64 {
        b[0]
    }
    fn constraint(&self, _s: &[f64], _a: &[f64], _b: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    fn transition(
        &self,
        s: &[f64],
        _a: &[f64],
        b: &[f64],
        _rng: &mut Rng,
    ) -> (Vec<f64>, StepStatus) {
        let mut next = s.to_vec();
        next[6] += 1.0;
        let status = if b[0] == 1.0 {
            StepStatus::Absorbed
        } else {
            StepStatus::Continue
        };
        (next, status)
    }
}

fn teleporter() -> ConstantAgent {
    ConstantAgent {
        name: "teleport".into(),
        action: vec![1.0],
    }
}

fn idle(name: &str) -> ConstantAgent {
    ConstantAgent {
        name: name.into(),
        action: vec![0.0],
    }
}

#[test]
fn teleporting_attacker_wins_every_match_in_one_step() {
    let cfg = TournamentConfig {
        matches_per_pair: 50,
        seeds: vec![0, 1, 2],
    };
    let pursuit = PursuitAgent {
        cfg: ReachAvoidConfig::default(),
    };
    let still = idle("still");
    let res = tournament(
        &teleport_game(),
        &[&teleporter()],
        &[&pursuit, &still],
        &cfg,
    )
    .unwrap();
    assert_eq!(res.len(), 2);
    for r in &res {
        assert_eq!(r.attacker_wins.mean, 50.0);
        assert_eq!(r.attacker_wins.std, 0.0);
        assert_eq!(r.win_length.mean, 1.0);
        assert!(r.loss_length.mean.is_nan());
        assert_eq!(r.matches.len(), 150);
    }
    assert_eq!(res[0].scenario(), "teleport vs pursuit");
}

#[test]
fn idle_attacker_draws_at_the_horizon() {
    let cfg = TournamentConfig {
        matches_per_pair: 4,
        seeds: vec![0],
    };
    let res = tournament(&teleport_game(), &[&idle("idle")], &[&idle("still")], &cfg).unwrap();
    assert_eq!(res[0].draws.mean, 4.0);
    assert!(res[0].matches.iter().all(|m| m.length == 50));
}

#[test]
fn teleporter_reaches_against_pursuit() {
    let c = eval_vs_pursuit(
        &teleport_game(),
        &ReachAvoidConfig::default(),
        &teleporter(),
        100,
        0,
    )
    .unwrap();
    assert_eq!(
        c,
        PursuitCounts {
            reached: 100,
            collision: 0,
            neither: 0
        }
    );
}

#[test]
fn straight_attacker_mostly_collides_with_pursuit() {
    let game = ReachAvoid::new(ReachAvoidConfig::default())
        .unwrap()
        .with_mode(RewardMode::GneSoft);
    let c = eval_vs_pursuit(&game, game.config(), &idle("straight"), 200, 1).unwrap();
    assert_eq!(c.reached + c.collision + c.neither, 200);
    assert!(c.collision > c.reached + c.neither, "{c:?}");
}

#[test]
fn head_on_match_ends_in_a_collision() {
    // attacker right above the defender, both frozen in a straight line
    let game = ReachAvoid::new(ReachAvoidConfig::default())
        .unwrap()
        .with_mode(RewardMode::GneSoft);
    let pursuit = PursuitAgent {
        cfg: game.config().clone(),
    };
    let mut found = false;
    for seed in 0..500 {
        let s = game.initial_state(&mut stream(seed, 0));
        if s[3].abs() < 0.05 {
            let m = play_match(&game, &pursuit, &idle("straight"), seed).unwrap();
            assert_eq!(m.outcome, Outcome::DefenderWin);
            found = true;
        }
    }
    assert!(found);
}

#[test]
fn random_tournament_counts_add_up_and_repeat() {
    let game = ReachAvoid::new(ReachAvoidConfig::default())
        .unwrap()
        .with_mode(RewardMode::GneSoft);
    let mut rng = stream(12, 0);
    let att = PolicyAgent::new(
        "att",
        random_bilinear(&game, &mut rng),
        game.follower_actions().clone(),
    );
    let def = PolicyAgent::new(
        "def",
        random_bilinear(&game, &mut rng),
        game.leader_actions().clone(),
    );
    let pursuit = PursuitAgent {
        cfg: game.config().clone(),
    };
    let cfg = TournamentConfig {
        matches_per_pair: 20,
        seeds: vec![3, 4],
    };
    let a = tournament(&game, &[&att], &[&def, &pursuit], &cfg).unwrap();
    let b = tournament(&game, &[&att], &[&def, &pursuit], &cfg).unwrap();
    assert_eq!(a, b);
    for r in &a {
        for chunk in r.matches.chunks(20) {
            assert_eq!(chunk.len(), 20);
        }
        let total = r.attacker_wins.mean + r.defender_wins.mean + r.draws.mean;
        assert_abs_diff_eq!(total, 20.0, epsilon = 1e-12);
    }
    let mut csv = Vec::new();
    write_tournament_csv(&a, &mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], TOURNAMENT_CSV_HEADER);
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("att vs def,"));
    assert_eq!(
        lines[1].split(',').count(),
        TOURNAMENT_CSV_HEADER.split(',').count()
    );
    let text = tournament_text(&a);
    assert!(text.lines().next().unwrap().starts_with("scenario"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn coupled_attacker_never_enters_the_capture_ball() {
    let hard = ReachAvoid::new(ReachAvoidConfig::default()).unwrap();
    let pursuit = PursuitAgent {
        cfg: hard.config().clone(),
    };
    let mut rng = stream(13, 0);
    let mut steps = 0;
    for k in 0..20 {
        let att = CoupledAgent::new("coupled", random_bilinear(&hard, &mut rng), &hard);
        let mut r = stream(k, 0);
        let mut s = hard.initial_state(&mut r);
        for _ in 0..hard.horizon() {
            let phi = hard.features(&s);
            let a = pursuit.act(&s, &phi, None, None, &mut r).unwrap().unwrap();
            let Some(b) = att.act(&s, &phi, None, Some(&a), &mut r).unwrap() else {
                break;
            };
            let (next, status) = hard.transition(&s, &a, &b, &mut r);
            assert!(!hard.is_captured(&next));
            steps += 1;
            if status != StepStatus::Continue {
                break;
            }
            s = next;
        }
    }
    assert!(steps > 100);
}

#[test]
fn coupled_agent_needs_the_leader_move() {
    let hard = ReachAvoid::new(ReachAvoidConfig::default()).unwrap();
    let att = CoupledAgent::new("c", PolicyParams::bilinear(hard.feature_dim(), 1), &hard);
    let s = hard.initial_state(&mut stream(0, 0));
    let phi = hard.features(&s);
    assert!(att.act(&s, &phi, None, None, &mut stream(0, 1)).is_err());
    let b = att
        .act(&s, &phi, None, Some(&[0.0]), &mut stream(0, 1))
        .unwrap()
        .unwrap();
    assert!(hard.is_feasible(&s, &[0.0], &b));
}

#[test]
fn mean_std_of_small_samples() {
    assert!(MeanStd::of(&[]).mean.is_nan());
    assert_eq!(
        MeanStd::of(&[3.0]),
        MeanStd {
            mean: 3.0,
            std: 0.0
        }
    );
    let m = MeanStd::of(&[1.0, 3.0]);
    assert_eq!(m.mean, 2.0);
    assert_abs_diff_eq!(m.std, 2f64.sqrt(), epsilon = 1e-12);
}
