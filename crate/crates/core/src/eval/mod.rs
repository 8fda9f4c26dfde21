//! Evaluation: Monte-Carlo Bellman error, LP verification of Stackelberg
//! commitments, tournaments and the pursuit benchmark.

mod bellman;
mod lp;
mod tournament;

pub use bellman::{
    bellman_error, bellman_error_at, BellmanConfig, BellmanEstimate, BellmanVariant,
};
pub use lp::{solve_lp, stackelberg_verify_lp, Commitment, LinearProgram, LpOutcome};
pub use tournament::{
    eval_vs_pursuit, play_match, tournament, tournament_text, write_tournament_csv, Agent,
    ConstantAgent, CoupledAgent, MatchResult, MeanStd, Outcome, PairResult, PolicyAgent,
    PursuitAgent, PursuitCounts, TournamentConfig, TOURNAMENT_CSV_HEADER,
};
