use std::fs::File;
use std::io::BufWriter;

use clap::Args;
use serde::Serialize;
use stackgame_core::minmax::{
    benchmark_by_name, se_residual, ResidualConfig, SeResidual, SolutionDump, Solver,
};
use stackgame_core::{IterateLog, Quadratic};

use crate::config::MinmaxSection;
use crate::error::CliError;
use crate::{Common, Run};

#[derive(Args, Debug)]
pub struct MinmaxArgs {
    /// `quadratic` (noise from `minmax.noise`) or `quadratic-noisy:SIGMA`.
    problem: String,
}

fn problem(name: &str, section: &MinmaxSection) -> Result<Quadratic, CliError> {
    if name == "quadratic" {
        return Ok(Quadratic::new(section.noise));
    }
    benchmark_by_name::<f64>(name).map_err(CliError::usage)
}

#[derive(Serialize)]
struct ResidualRow {
    iterate: &'static str,
    x: Vec<f64>,
    y: Vec<f64>,
    epsilon: f64,
    delta: f64,
    marginal: f64,
    marginal_min: f64,
    probes: usize,
}

impl ResidualRow {
    fn new(iterate: &'static str, x: Vec<f64>, y: Vec<f64>, r: SeResidual<f64>) -> Self {
        Self {
            iterate,
            x,
            y,
            epsilon: r.epsilon,
            delta: r.delta,
            marginal: r.marginal,
            marginal_min: r.marginal_min,
            probes: r.probes,
        }
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|a| format!("{a:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn write_metrics(run: &Run, log: &IterateLog, eps: Option<&[f64]>) -> Result<(), CliError> {
    let f = File::create(run.out.path("metrics.csv"))?;
    log.write_csv(BufWriter::new(f), eps)?;
    Ok(())
}

pub fn run(common: &Common, args: MinmaxArgs) -> Result<(), CliError> {
    let run = Run::open(common, |cfg| {
        cfg.minmax.solver_config()?;
        problem(&args.problem, &cfg.minmax).map(|_| ())
    })?;
    let section = &run.cfg.minmax;
    let solver_cfg = section.solver_config()?;
    let p = problem(&args.problem, section)?;
    let solver = Solver::new(&p, solver_cfg.clone()).map_err(CliError::usage)?;

    let log = match solver.run() {
        Ok(log) => log,
        Err(aborted) => {
            write_metrics(&run, &aborted.partial, None)?;
            return Err(CliError::Failed(format!(
                "{} (after {} iterations; partial metrics written)",
                aborted.error,
                aborted.partial.len()
            )));
        }
    };

    let rcfg = ResidualConfig {
        eval_budget: section.eval_budget,
        seed: section.seed,
        lambda_cap: log.lambda_cap,
        ..ResidualConfig::default()
    };
    let eps = log
        .records
        .iter()
        .map(|r| se_residual(&p, &r.x, &r.y, &rcfg).map(|s| s.epsilon))
        .collect::<Result<Vec<f64>, _>>()?;
    write_metrics(&run, &log, Some(&eps))?;

    let config =
        serde_json::json!({ "problem": args.problem, "solver": solver_cfg, "noise": p.sigma });
    let dump = SolutionDump::from_log(&log, config);
    run.out.write(
        "solution.json",
        serde_json::to_string_pretty(&dump).map_err(CliError::failed)?,
    )?;

    let (last_x, last_y) = (log.last.x.clone(), log.last.y.clone());
    let (avg_x, avg_y) = (log.average_x(), log.average_y());
    let rows = vec![
        ResidualRow::new(
            "last",
            last_x.clone(),
            last_y.clone(),
            se_residual(&p, &last_x, &last_y, &rcfg)?,
        ),
        ResidualRow::new(
            "average",
            avg_x.clone(),
            avg_y.clone(),
            se_residual(&p, &avg_x, &avg_y, &rcfg)?,
        ),
    ];
    let mut text = format!(
        "problem {}  iterations {}  lambda_cap {:.6}\n",
        args.problem,
        log.len(),
        log.lambda_cap
    );
    for r in &rows {
        text.push_str(&format!(
            "{:<8} x={} y={} epsilon={:.6e} delta={:.6e}\n",
            r.iterate,
            fmt_vec(&r.x),
            fmt_vec(&r.y),
            r.epsilon,
            r.delta
        ));
    }
    run.out.write("tables/se_residual.txt", &text)?;
    run.out.write(
        "tables/se_residual.json",
        serde_json::to_string_pretty(&rows).map_err(CliError::failed)?,
    )?;
    print!("{text}");
    Ok(())
}
