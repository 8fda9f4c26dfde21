use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Subcommand};
use rand::Rng as _;
use serde::Serialize;
use stackgame_core::eval::{
    bellman_error, eval_vs_pursuit, stackelberg_verify_lp, tournament, tournament_text,
    write_tournament_csv, Agent, BellmanVariant, CoupledAgent, PairResult, PolicyAgent,
    PursuitAgent,
};
use stackgame_core::mdpgame::{MarkovGame, PolicyParams, Role};
use stackgame_core::reachavoid::{ReachAvoid, RewardMode};
use stackgame_core::rng::stream;

use crate::error::CliError;
use crate::policies::{load_policy, named_path};
use crate::{Common, Run};

const RANDOM_POLICY_STREAM: u64 = 0xB311;
const BELLMAN_STREAM: u64 = 0xBE11;

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(subcommand)]
    what: EvalCommand,
}

#[derive(Subcommand, Debug)]
enum EvalCommand {
    /// Every attacker against every defender.
    Tournament(TournamentArgs),
    /// One attacker against the scripted pursuit defender.
    Pursuit(PursuitArgs),
    /// Monte-Carlo Bellman error of a policy profile.
    Bellman(BellmanArgs),
    /// Optimal leader commitment of a payoff matrix by linear programming.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct TournamentArgs {
    /// Attacker policy, `NAME=PATH` (repeatable).
    #[arg(long, value_name = "NAME=PATH")]
    attacker: Vec<String>,
    /// Attacker policy restricted to moves that avoid capture, `NAME=PATH`.
    #[arg(long, value_name = "NAME=PATH")]
    coupled: Vec<String>,
    /// Defender policy, `NAME=PATH` (repeatable).
    #[arg(long, value_name = "NAME=PATH")]
    defender: Vec<String>,
    /// Add the scripted pursuit defender.
    #[arg(long)]
    pursuit: bool,
    /// Matches per pair and seed.
    #[arg(long, value_name = "N")]
    matches: Option<usize>,
    /// Comma-separated tournament seeds.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Args, Debug)]
struct PursuitArgs {
    /// Attacker policy file.
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with = "coupled",
        required_unless_present = "coupled"
    )]
    attacker: Option<PathBuf>,
    /// Attacker policy file, restricted to moves that avoid capture.
    #[arg(long, value_name = "PATH")]
    coupled: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    episodes: Option<usize>,
}

#[derive(Args, Debug)]
struct BellmanArgs {
    /// Leader policy file; random bilinear policies are used when omitted.
    #[arg(long, value_name = "PATH", requires = "follower")]
    leader: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires = "leader")]
    follower: Option<PathBuf>,
    #[arg(long, value_enum)]
    variant: Option<Variant>,
    #[arg(long, value_name = "N")]
    states: Option<usize>,
    #[arg(long, value_name = "N")]
    rollouts: Option<usize>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum Variant {
    Nash,
    Stackelberg,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// CSV payoff matrix of the leader; rows are leader actions.
    #[arg(long, value_name = "CSV")]
    matrix: PathBuf,
}

pub fn run(common: &Common, args: EvalArgs) -> Result<(), CliError> {
    match args.what {
        EvalCommand::Tournament(a) => run_tournament(common, a),
        EvalCommand::Pursuit(a) => run_pursuit(common, a),
        EvalCommand::Bellman(a) => run_bellman(common, a),
        EvalCommand::Verify(a) => run_verify(common, a),
    }
}

/// Matches are played where capture ends the episode; coupled attackers
/// check feasibility against the hard-constraint game.
fn games(run: &Run) -> Result<(ReachAvoid, ReachAvoid), CliError> {
    let base = ReachAvoid::new(run.cfg.env.clone()).map_err(CliError::usage)?;
    Ok((
        base.with_mode(RewardMode::GneSoft),
        base.with_mode(RewardMode::StackelbergHard),
    ))
}

fn named_all(specs: &[String]) -> Result<Vec<(String, PathBuf)>, CliError> {
    specs.iter().map(|s| named_path(s)).collect()
}

fn run_tournament(common: &Common, args: TournamentArgs) -> Result<(), CliError> {
    let load = |specs: &[String], role| -> Result<Vec<(String, PolicyParams)>, CliError> {
        named_all(specs)?
            .into_iter()
            .map(|(name, path)| Ok((name, load_policy(&path, role)?)))
            .collect()
    };
    let attackers = load(&args.attacker, Role::Follower)?;
    let coupled = load(&args.coupled, Role::Follower)?;
    let defenders = load(&args.defender, Role::Leader)?;
    if attackers.is_empty() && coupled.is_empty() {
        return Err(CliError::Usage(
            "tournament needs at least one --attacker or --coupled".into(),
        ));
    }
    if defenders.is_empty() && !args.pursuit {
        return Err(CliError::Usage(
            "tournament needs at least one --defender or --pursuit".into(),
        ));
    }
    let run = Run::open(common, |cfg| {
        if let Some(m) = args.matches {
            cfg.eval.tournament.matches_per_pair = m;
        }
        if let Some(s) = &args.seeds {
            cfg.eval.tournament.seeds = s.clone();
        }
        let t = &cfg.eval.tournament;
        if t.matches_per_pair == 0 || t.seeds.is_empty() {
            return Err(CliError::Usage(
                "tournament needs at least one match and one seed".into(),
            ));
        }
        Ok(())
    })?;
    let (play, hard) = games(&run)?;

    let mut att: Vec<Box<dyn Agent + '_>> = Vec::new();
    for (name, p) in attackers {
        att.push(Box::new(PolicyAgent::new(
            name,
            p,
            play.follower_actions().clone(),
        )));
    }
    for (name, p) in coupled {
        att.push(Box::new(CoupledAgent::new(name, p, &hard)));
    }
    let mut def: Vec<Box<dyn Agent + '_>> = Vec::new();
    for (name, p) in defenders {
        def.push(Box::new(PolicyAgent::new(
            name,
            p,
            play.leader_actions().clone(),
        )));
    }
    if args.pursuit {
        def.push(Box::new(PursuitAgent {
            cfg: run.cfg.env.clone(),
        }));
    }
    let att_refs: Vec<&dyn Agent> = att.iter().map(|a| a.as_ref()).collect();
    let def_refs: Vec<&dyn Agent> = def.iter().map(|a| a.as_ref()).collect();
    let results = tournament(&play, &att_refs, &def_refs, &run.cfg.eval.tournament)?;

    let f = File::create(run.out.path("tables/tournament.csv"))?;
    write_tournament_csv(&results, BufWriter::new(f))?;
    let text = tournament_text(&results);
    run.out.write("tables/tournament.txt", &text)?;
    write_matches(&run, &results)?;
    print!("{text}");
    Ok(())
}

fn write_matches(run: &Run, results: &[PairResult]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(run.out.path("tables/matches.csv"))?);
    writeln!(w, "attacker,defender,seed,outcome,length")?;
    for r in results {
        for m in &r.matches {
            let outcome = serde_json::to_value(m.outcome).map_err(CliError::failed)?;
            writeln!(
                w,
                "{},{},{},{},{}",
                r.attacker,
                r.defender,
                m.seed,
                outcome.as_str().unwrap_or_default(),
                m.length
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run_pursuit(common: &Common, args: PursuitArgs) -> Result<(), CliError> {
    let path = args
        .attacker
        .as_ref()
        .or(args.coupled.as_ref())
        .expect("clap requires one attacker");
    let policy = load_policy(path, Role::Follower)?;
    let run = Run::open(common, |cfg| {
        if let Some(n) = args.episodes {
            cfg.eval.pursuit_episodes = n;
        }
        if cfg.eval.pursuit_episodes == 0 {
            return Err(CliError::Usage(
                "eval.pursuit_episodes must be at least 1".into(),
            ));
        }
        Ok(())
    })?;
    let (play, hard) = games(&run)?;
    let agent: Box<dyn Agent + '_> = if args.coupled.is_some() {
        Box::new(CoupledAgent::new("attacker", policy, &hard))
    } else {
        Box::new(PolicyAgent::new(
            "attacker",
            policy,
            play.follower_actions().clone(),
        ))
    };
    let n = run.cfg.eval.pursuit_episodes;
    let c = eval_vs_pursuit(&play, &run.cfg.env, agent.as_ref(), n, run.cfg.eval.seed)?;
    let csv = format!(
        "episodes,reached,collision,neither\n{n},{},{},{}\n",
        c.reached, c.collision, c.neither
    );
    run.out.write("tables/pursuit.csv", &csv)?;
    println!(
        "{n} episodes: reached {}, collision {}, neither {}",
        c.reached, c.collision, c.neither
    );
    Ok(())
}

/// Bilinear policy with parameters drawn from `U(−1, 1)`.
fn random_bilinear(n_in: usize, n_out: usize, seed: u64, idx: u64) -> PolicyParams {
    let mut rng = stream(seed ^ RANDOM_POLICY_STREAM, idx);
    let p = PolicyParams::bilinear(n_in, n_out);
    let theta: Vec<f64> = (0..p.theta.len())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    p.with_theta(&theta)
}

fn run_bellman(common: &Common, args: BellmanArgs) -> Result<(), CliError> {
    let loaded = match (&args.leader, &args.follower) {
        (Some(l), Some(f)) => Some((
            load_policy(l, Role::Leader)?,
            load_policy(f, Role::Follower)?,
        )),
        _ => None,
    };
    let run = Run::open(common, |cfg| {
        let b = &mut cfg.eval.bellman;
        if let Some(v) = args.variant {
            b.variant = match v {
                Variant::Nash => BellmanVariant::Nash,
                Variant::Stackelberg => BellmanVariant::Stackelberg,
            };
        }
        if let Some(n) = args.states {
            b.num_states = n;
        }
        if let Some(n) = args.rollouts {
            b.num_rollouts = n;
        }
        if b.num_states == 0 || b.num_rollouts == 0 {
            return Err(CliError::Usage(
                "bellman needs at least one state and one rollout".into(),
            ));
        }
        Ok(())
    })?;
    let game = ReachAvoid::new(run.cfg.env.clone()).map_err(CliError::usage)?;
    let seed = run.cfg.eval.seed;
    let (leader, follower) = match loaded {
        Some(pair) => pair,
        None => (
            random_bilinear(game.feature_dim(), game.leader_actions().dim(), seed, 0),
            random_bilinear(game.feature_dim(), game.follower_actions().dim(), seed, 1),
        ),
    };
    let mut rng = stream(seed ^ BELLMAN_STREAM, 0);
    let est = bellman_error(&game, &leader, &follower, &run.cfg.eval.bellman, &mut rng)?;

    let variant = serde_json::to_value(est.variant).map_err(CliError::failed)?;
    let variant = variant.as_str().unwrap_or_default();
    run.out.write(
        "tables/bellman.csv",
        format!(
            "variant,num_states,num_rollouts,error,std_error\n{variant},{},{},{},{}\n",
            est.num_states, est.num_rollouts, est.error, est.std_error
        ),
    )?;
    let mut per_state = String::from("state,error\n");
    for (i, e) in est.per_state.iter().enumerate() {
        let _ = writeln!(per_state, "{i},{e}");
    }
    run.out.write("tables/bellman_states.csv", per_state)?;
    println!(
        "{variant} Bellman error {:.6} ± {:.6} ({} states, {} rollouts)",
        est.error, est.std_error, est.num_states, est.num_rollouts
    );
    Ok(())
}

fn read_matrix(path: &PathBuf) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split(',')
                .map(|c| {
                    c.trim().parse::<f64>().map_err(|_| {
                        CliError::Usage(format!(
                            "{}:{}: bad number `{}`",
                            path.display(),
                            i + 1,
                            c.trim()
                        ))
                    })
                })
                .collect()
        })
        .collect()
}

#[derive(Serialize)]
struct VerifyReport {
    rows: usize,
    cols: usize,
    leader_mix: Vec<f64>,
    value: f64,
    follower_response: usize,
}

fn run_verify(common: &Common, args: VerifyArgs) -> Result<(), CliError> {
    let q = read_matrix(&args.matrix)?;
    let commitment = stackelberg_verify_lp(&q).map_err(CliError::usage)?;
    let run = Run::open(common, |_| Ok(()))?;
    let report = VerifyReport {
        rows: q.len(),
        cols: q.first().map_or(0, Vec::len),
        leader_mix: commitment.leader_mix,
        value: commitment.value,
        follower_response: commitment.follower_response,
    };
    run.out.write(
        "tables/verify.json",
        serde_json::to_string_pretty(&report).map_err(CliError::failed)?,
    )?;
    let mix: Vec<String> = report
        .leader_mix
        .iter()
        .map(|p| format!("{p:.6}"))
        .collect();
    let text = format!(
        "leader mix [{}]\nvalue {:.6}\nfollower response {}\n",
        mix.join(", "),
        report.value,
        report.follower_response
    );
    run.out.write("tables/verify.txt", &text)?;
    print!("{text}");
    Ok(())
}
