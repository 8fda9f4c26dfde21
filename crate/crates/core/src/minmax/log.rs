use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::Scalar;

use super::solver::SaddleState;

pub const SCHEMA_VERSION: u32 = 1;

/// State and diagnostics of one outer iteration, taken before the leader step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord<T> {
    pub t: usize,
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub lambda: Vec<T>,
    pub lr: T,
    /// Sampled objective at `(x_t, y_t)`.
    pub f_hat: T,
    /// Sampled `‖min(g, 0)‖` at `(x_t, y_t)`.
    pub delta_hat: T,
    pub grad_x_norm: T,
    pub grad_y_norm: T,
}

/// Per-iterate records plus running `η`-weighted sums of `x`, `y` and `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateLog<T> {
    pub records: Vec<IterateRecord<T>>,
    /// Outer iterations folded into the sums; equals `records.len()` unless
    /// records were dropped.
    #[serde(default)]
    pub completed: usize,
    pub sum_lr: T,
    pub sum_x: Vec<T>,
    pub sum_y: Vec<T>,
    pub sum_lambda: Vec<T>,
    pub lambda_cap: T,
    /// State after the last completed update.
    pub last: SaddleState<T>,
}

fn accumulate<T: Scalar>(sum: &mut [T], v: &[T], w: T) {
    for (s, &z) in sum.iter_mut().zip(v) {
        *s += w * z;
    }
}

fn divide<T: Scalar>(sum: &[T], w: T) -> Vec<T> {
    sum.iter().map(|&s| s / w).collect()
}

impl<T: Scalar> IterateLog<T> {
    pub fn new(start: SaddleState<T>, lambda_cap: T) -> Self {
        Self {
            records: Vec::new(),
            completed: 0,
            sum_lr: T::zero(),
            sum_x: vec![T::zero(); start.x.len()],
            sum_y: vec![T::zero(); start.y.len()],
            sum_lambda: vec![T::zero(); start.lambda.len()],
            lambda_cap,
            last: start,
        }
    }

    pub fn push(&mut self, record: IterateRecord<T>) {
        let w = record.lr;
        self.sum_lr += w;
        accumulate(&mut self.sum_x, &record.x, w);
        accumulate(&mut self.sum_y, &record.y, w);
        accumulate(&mut self.sum_lambda, &record.lambda, w);
        self.records.push(record);
        self.completed += 1;
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `x̄ = Σ η_t x_t / Σ η_t`; the last state when nothing was logged.
    pub fn average_x(&self) -> Vec<T> {
        if self.sum_lr > T::zero() {
            divide(&self.sum_x, self.sum_lr)
        } else {
            self.last.x.clone()
        }
    }

    pub fn average_y(&self) -> Vec<T> {
        if self.sum_lr > T::zero() {
            divide(&self.sum_y, self.sum_lr)
        } else {
            self.last.y.clone()
        }
    }

    pub fn average_lambda(&self) -> Vec<T> {
        if self.sum_lr > T::zero() {
            divide(&self.sum_lambda, self.sum_lr)
        } else {
            self.last.lambda.clone()
        }
    }

    /// CSV `t,lr,f_hat,delta_hat,eps_hat`; `eps` supplies the last column
    /// per record (empty when absent).
    pub fn write_csv<W: Write>(&self, mut w: W, eps: Option<&[f64]>) -> Result<()> {
        writeln!(w, "t,lr,f_hat,delta_hat,eps_hat")?;
        for (i, r) in self.records.iter().enumerate() {
            let e = eps
                .and_then(|e| e.get(i))
                .map(|v| v.to_string())
                .unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{}",
                r.t,
                r.lr.value(),
                r.f_hat.value(),
                r.delta_hat.value(),
                e
            )?;
        }
        Ok(())
    }
}

/// Weighted mean `Σ wᵢzᵢ / Σ wᵢ` of vectors.
pub fn weighted_average<T: Scalar>(values: &[Vec<T>], weights: &[T]) -> Vec<T> {
    let dim = values.first().map_or(0, Vec::len);
    let mut sum = vec![T::zero(); dim];
    let mut total = T::zero();
    for (v, &w) in values.iter().zip(weights) {
        accumulate(&mut sum, v, w);
        total += w;
    }
    divide(&sum, total)
}

/// Versioned JSON sidecar of a solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionDump {
    pub schema_version: u32,
    pub config: serde_json::Value,
    pub iterations: usize,
    pub lambda_cap: f64,
    pub final_x: Vec<f64>,
    pub final_y: Vec<f64>,
    pub final_lambda: Vec<f64>,
    pub avg_x: Vec<f64>,
    pub avg_y: Vec<f64>,
    pub avg_lambda: Vec<f64>,
}

fn values<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.value()).collect()
}

impl SolutionDump {
    pub fn from_log<T: Scalar>(log: &IterateLog<T>, config: serde_json::Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config,
            iterations: log.len(),
            lambda_cap: log.lambda_cap.value(),
            final_x: values(&log.last.x),
            final_y: values(&log.last.y),
            final_lambda: values(&log.last.lambda),
            avg_x: values(&log.average_x()),
            avg_y: values(&log.average_y()),
            avg_lambda: values(&log.average_lambda()),
        }
    }
}
