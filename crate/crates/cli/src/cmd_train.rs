use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use stackgame_core::algos::{
    initial_policies, train, write_train_csv, Algo, TrainInit, TrainRecord, TrainState,
};
use stackgame_core::mdpgame::{sample_trajectory, Checkpoint};
use stackgame_core::reachavoid::{render_svg, ReachAvoid};
use stackgame_core::rng::stream;

use crate::error::CliError;
use crate::{Common, Run};

/// Episodes drawn in the trajectory figure.
const FIGURE_EPISODES: u64 = 4;
const FIGURE_STREAM: u64 = 0x5F16;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// nested_pgda, sim_pgda, nested_reinforce or sim_reinforce.
    #[arg(long)]
    algo: Option<String>,
    /// Outer iterations (overrides `train.outer_iters`).
    #[arg(long, value_name = "N")]
    outer: Option<usize>,
    /// Continue from a training-state snapshot.
    #[arg(long, value_name = "PATH")]
    resume: Option<PathBuf>,
}

fn write_metrics(run: &Run, records: &[TrainRecord]) -> Result<(), CliError> {
    let f = File::create(run.out.path("metrics.csv"))?;
    write_train_csv(records, BufWriter::new(f))?;
    Ok(())
}

pub fn run(common: &Common, args: TrainArgs) -> Result<(), CliError> {
    // Read before the output directory is cleared: the snapshot may live there.
    let resumed = args
        .resume
        .as_ref()
        .map(|path| {
            TrainState::load(path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
        })
        .transpose()?;
    let run = Run::open(common, |cfg| {
        if let Some(a) = &args.algo {
            cfg.train.algo = Algo::from_str(a).map_err(CliError::usage)?;
        }
        if let Some(n) = args.outer {
            cfg.train.outer_iters = n;
        }
        cfg.train.validate().map_err(CliError::usage)?;
        let game = ReachAvoid::new(cfg.env.clone()).map_err(CliError::usage)?;
        initial_policies(&game, &cfg.train, None)?;
        Ok(())
    })?;
    let cfg = &run.cfg.train;
    let game = ReachAvoid::new(run.cfg.env.clone()).map_err(CliError::usage)?;

    let init = match resumed {
        Some(state) => TrainInit::Resume(Box::new(state)),
        None => {
            let (leader, follower) = initial_policies(&game, cfg, None)?;
            TrainInit::Fresh { leader, follower }
        }
    };

    let out = &run.out;
    let mut hook =
        |s: &TrainState| s.save(&out.path(&format!("checkpoints/iter_{:06}.json", s.iteration)));
    let outcome = match train(&game, cfg, init, Some(&mut hook)) {
        Ok(o) => o,
        Err(aborted) => {
            write_metrics(&run, &aborted.partial)?;
            return Err(CliError::Failed(format!(
                "{} (after {} iterations; partial metrics written)",
                aborted.error,
                aborted.partial.len()
            )));
        }
    };

    write_metrics(&run, &outcome.records)?;
    outcome.state.save(&out.path("checkpoints/final.json"))?;
    let meta = |role: &str| {
        serde_json::json!({
            "role": role,
            "algo": cfg.algo.name(),
            "seed": cfg.seed,
            "iteration": outcome.state.iteration,
        })
    };
    Checkpoint::from_policy(&outcome.leader, meta("leader"))
        .save(&out.path("checkpoints/leader.json"))?;
    Checkpoint::from_policy(&outcome.follower, meta("follower"))
        .save(&out.path("checkpoints/follower.json"))?;

    let trajs = (0..FIGURE_EPISODES)
        .map(|i| {
            let mut rng = stream(cfg.seed ^ FIGURE_STREAM, i);
            sample_trajectory(
                &game,
                &outcome.leader,
                &outcome.follower,
                &mut rng,
                cfg.mask,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    out.write("figures/episodes.svg", render_svg(&trajs, &run.cfg.env))?;

    if let Some(last) = outcome.records.last() {
        println!(
            "{} seed {}: {} iterations, return {:.4}, violation {:.4}, |lambda| {:.4}",
            cfg.algo.name(),
            cfg.seed,
            outcome.state.iteration,
            last.mean_return,
            last.violation,
            last.lambda_norm
        );
    }
    Ok(())
}
