//! Head-to-head matches between attacker (follower) and defender (leader)
//! agents, tournament tables and the pursuit benchmark.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdpgame::{
    feasible_mask, policy_action, shield, ActionSpace, MarkovGame, PolicyParams, StepStatus,
};
use crate::reachavoid::{pursuit_defender, ReachAvoidConfig};
use crate::rng::{derive_seed, stream, Rng};

/// Anything that picks an action from a state.
pub trait Agent: Sync {
    fn name(&self) -> &str;
    /// Action at state `s` with features `phi`. Attackers also see the
    /// defender's committed action. `None` means no legal move is left.
    fn act(
        &self,
        s: &[f64],
        phi: &[f64],
        key: Option<usize>,
        leader_action: Option<&[f64]>,
        rng: &mut Rng,
    ) -> Result<Option<Vec<f64>>>;
}

/// A trained policy acting in one side's action space.
pub struct PolicyAgent {
    pub name: String,
    pub policy: PolicyParams,
    pub space: ActionSpace,
}

impl PolicyAgent {
    pub fn new(name: impl Into<String>, policy: PolicyParams, space: ActionSpace) -> Self {
        Self {
            name: name.into(),
            policy,
            space,
        }
    }
}

impl Agent for PolicyAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(
        &self,
        _s: &[f64],
        phi: &[f64],
        key: Option<usize>,
        _leader_action: Option<&[f64]>,
        rng: &mut Rng,
    ) -> Result<Option<Vec<f64>>> {
        policy_action(&self.policy, &self.space, phi, key, None, rng).map(Some)
    }
}

/// Attacker policy restricted to the actions that satisfy the coupling
/// constraints of `game` given the defender's move: softmax policies sample
/// among feasible actions, bilinear ones fall back to the nearest feasible
/// deviation.
pub struct CoupledAgent<'g, G: ?Sized> {
    pub name: String,
    pub policy: PolicyParams,
    pub game: &'g G,
}

impl<'g, G: MarkovGame + ?Sized> CoupledAgent<'g, G> {
    pub fn new(name: impl Into<String>, policy: PolicyParams, game: &'g G) -> Self {
        Self {
            name: name.into(),
            policy,
            game,
        }
    }
}

impl<G: MarkovGame + ?Sized> Agent for CoupledAgent<'_, G> {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(
        &self,
        s: &[f64],
        phi: &[f64],
        key: Option<usize>,
        leader_action: Option<&[f64]>,
        rng: &mut Rng,
    ) -> Result<Option<Vec<f64>>> {
        let a = leader_action
            .ok_or_else(|| Error::Config("coupled agents play the follower side".into()))?;
        let mask = feasible_mask(self.game, s, a);
        if !mask.iter().any(|&m| m) {
            return Ok(None);
        }
        let space = self.game.follower_actions();
        let b = policy_action(&self.policy, space, phi, key, Some(&mask), rng)?;
        if self.game.is_feasible(s, a, &b) {
            return Ok(Some(b));
        }
        let devs = self.game.follower_deviations();
        Ok(shield(&devs, &mask, &b).map(|i| devs[i].clone()))
    }
}

/// Scripted defender that turns toward the attacker.
pub struct PursuitAgent {
    pub cfg: ReachAvoidConfig,
}

impl Agent for PursuitAgent {
    fn name(&self) -> &str {
        "pursuit"
    }

    fn act(
        &self,
        s: &[f64],
        _phi: &[f64],
        _key: Option<usize>,
        _leader_action: Option<&[f64]>,
        _rng: &mut Rng,
    ) -> Result<Option<Vec<f64>>> {
        Ok(Some(vec![pursuit_defender(s, &self.cfg)]))
    }
}

/// Agent that always plays the same action.
pub struct ConstantAgent {
    pub name: String,
    pub action: Vec<f64>,
}

impl Agent for ConstantAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(
        &self,
        _s: &[f64],
        _phi: &[f64],
        _key: Option<usize>,
        _leader_action: Option<&[f64]>,
        _rng: &mut Rng,
    ) -> Result<Option<Vec<f64>>> {
        Ok(Some(self.action.clone()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    AttackerWin,
    DefenderWin,
    Draw,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchResult {
    pub outcome: Outcome,
    pub length: usize,
    pub seed: u64,
}

/// Plays one episode. Reaching the target is an attacker win; capture, or an
/// attacker left without a legal move, is a defender win; running out of
/// steps is a draw.
pub fn play_match<G: MarkovGame + ?Sized>(
    game: &G,
    defender: &dyn Agent,
    attacker: &dyn Agent,
    seed: u64,
) -> Result<MatchResult> {
    let mut rng = stream(seed, 0);
    let mut s = game.initial_state(&mut rng);
    let horizon = game.horizon();
    for t in 0..horizon {
        let phi = game.features(&s);
        let key = game.state_index(&s);
        let a = defender
            .act(&s, &phi, key, None, &mut rng)?
            .ok_or_else(|| {
                Error::Numerical(format!("defender `{}` produced no action", defender.name()))
            })?;
        let Some(b) = attacker.act(&s, &phi, key, Some(&a), &mut rng)? else {
            return Ok(MatchResult {
                outcome: Outcome::DefenderWin,
                length: t,
                seed,
            });
        };
        let (next, status) = game.transition(&s, &a, &b, &mut rng);
        let outcome = match status {
            StepStatus::Continue => None,
            StepStatus::Absorbed => Some(Outcome::AttackerWin),
            StepStatus::Captured => Some(Outcome::DefenderWin),
        };
        if let Some(outcome) = outcome {
            return Ok(MatchResult {
                outcome,
                length: t + 1,
                seed,
            });
        }
        s = next;
    }
    Ok(MatchResult {
        outcome: Outcome::Draw,
        length: horizon,
        seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TournamentConfig {
    pub matches_per_pair: usize,
    pub seeds: Vec<u64>,
}

impl Default for TournamentConfig {
    fn default() -> Self {
        Self {
            matches_per_pair: 50,
            seeds: (0..5).collect(),
        }
    }
}

/// Mean and sample standard deviation (`0` for fewer than two values).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Results of one attacker against one defender.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairResult {
    pub attacker: String,
    pub defender: String,
    /// Matches in seed order, then match order.
    pub matches: Vec<MatchResult>,
    pub attacker_wins: MeanStd,
    pub defender_wins: MeanStd,
    pub draws: MeanStd,
    /// Per-seed mean episode length of attacker wins (seeds without a win
    /// are skipped).
    pub win_length: MeanStd,
    /// Per-seed mean episode length of defender wins.
    pub loss_length: MeanStd,
}

impl PairResult {
    fn summarize(
        attacker: &str,
        defender: &str,
        matches: Vec<MatchResult>,
        per_seed: usize,
    ) -> Self {
        let chunks: Vec<&[MatchResult]> = matches.chunks(per_seed.max(1)).collect();
        let count = |o: Outcome| -> Vec<f64> {
            chunks
                .iter()
                .map(|c| c.iter().filter(|m| m.outcome == o).count() as f64)
                .collect()
        };
        let lengths = |o: Outcome| -> Vec<f64> {
            chunks
                .iter()
                .filter_map(|c| {
                    let l: Vec<f64> = c
                        .iter()
                        .filter(|m| m.outcome == o)
                        .map(|m| m.length as f64)
                        .collect();
                    (!l.is_empty()).then(|| l.iter().sum::<f64>() / l.len() as f64)
                })
                .collect()
        };
        Self {
            attacker: attacker.to_string(),
            defender: defender.to_string(),
            attacker_wins: MeanStd::of(&count(Outcome::AttackerWin)),
            defender_wins: MeanStd::of(&count(Outcome::DefenderWin)),
            draws: MeanStd::of(&count(Outcome::Draw)),
            win_length: MeanStd::of(&lengths(Outcome::AttackerWin)),
            loss_length: MeanStd::of(&lengths(Outcome::DefenderWin)),
            matches,
        }
    }

    pub fn scenario(&self) -> String {
        format!("{} vs {}", self.attacker, self.defender)
    }
}

/// Match seed shared by every pair, so all pairs face the same starts.
fn match_seed(seed: u64, m: usize) -> u64 {
    derive_seed(seed, &[m as u64])
}

/// Every attacker against every defender, `matches_per_pair` episodes per
/// seed. Matches run in parallel; results are ordered by attacker, defender,
/// seed and match.
pub fn tournament<G: MarkovGame + ?Sized>(
    game: &G,
    attackers: &[&dyn Agent],
    defenders: &[&dyn Agent],
    cfg: &TournamentConfig,
) -> Result<Vec<PairResult>> {
    if cfg.matches_per_pair == 0 || cfg.seeds.is_empty() {
        return Err(Error::Config(
            "tournament needs at least one match and one seed".into(),
        ));
    }
    let mut out = Vec::with_capacity(attackers.len() * defenders.len());
    for att in attackers {
        for def in defenders {
            let jobs: Vec<u64> = cfg
                .seeds
                .iter()
                .flat_map(|&s| (0..cfg.matches_per_pair).map(move |m| match_seed(s, m)))
                .collect();
            let matches = jobs
                .par_iter()
                .map(|&seed| play_match(game, *def, *att, seed))
                .collect::<Result<Vec<_>>>()?;
            out.push(PairResult::summarize(
                att.name(),
                def.name(),
                matches,
                cfg.matches_per_pair,
            ));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PursuitCounts {
    pub reached: usize,
    pub collision: usize,
    pub neither: usize,
}

/// `n` matches of `attacker` against the pursuit defender on `game`,
/// seeded from `seed`.
pub fn eval_vs_pursuit<G: MarkovGame + ?Sized>(
    game: &G,
    cfg: &ReachAvoidConfig,
    attacker: &dyn Agent,
    n: usize,
    seed: u64,
) -> Result<PursuitCounts> {
    let pursuit = PursuitAgent { cfg: cfg.clone() };
    let matches = (0..n)
        .into_par_iter()
        .map(|m| play_match(game, &pursuit, attacker, match_seed(seed, m)))
        .collect::<Result<Vec<_>>>()?;
    let mut c = PursuitCounts::default();
    for m in matches {
        match m.outcome {
            Outcome::AttackerWin => c.reached += 1,
            Outcome::DefenderWin => c.collision += 1,
            Outcome::Draw => c.neither += 1,
        }
    }
    Ok(c)
}

pub const TOURNAMENT_CSV_HEADER: &str = "scenario,attacker_wins_mean,attacker_wins_std,defender_wins_mean,defender_wins_std,draws_mean,draws_std,win_length_mean,win_length_std,loss_length_mean,loss_length_std";

pub fn write_tournament_csv<W: Write>(results: &[PairResult], mut w: W) -> Result<()> {
    writeln!(w, "{TOURNAMENT_CSV_HEADER}")?;
    for r in results {
        let cols = [
            r.attacker_wins,
            r.defender_wins,
            r.draws,
            r.win_length,
            r.loss_length,
        ];
        let nums: Vec<String> = cols
            .iter()
            .flat_map(|c| [c.mean.to_string(), c.std.to_string()])
            .collect();
        writeln!(w, "{},{}", r.scenario(), nums.join(","))?;
    }
    Ok(())
}

fn pm(m: MeanStd) -> String {
    if m.mean.is_nan() {
        "-".to_string()
    } else {
        format!("{:.2} ± {:.2}", m.mean, m.std)
    }
}

/// Aligned plain-text version of the tournament table.
pub fn tournament_text(results: &[PairResult]) -> String {
    let header = [
        "scenario",
        "attacker wins",
        "defender wins",
        "draws",
        "win length",
        "loss length",
    ];
    let rows: Vec<[String; 6]> = results
        .iter()
        .map(|r| {
            [
                r.scenario(),
                pm(r.attacker_wins),
                pm(r.defender_wins),
                pm(r.draws),
                pm(r.win_length),
                pm(r.loss_length),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut s = String::new();
    let line = |cells: Vec<&str>, s: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        let _ = writeln!(s, "{}", padded.join("  ").trim_end());
    };
    line(header.to_vec(), &mut s);
    for r in &rows {
        line(r.iter().map(String::as_str).collect(), &mut s);
    }
    s
}
