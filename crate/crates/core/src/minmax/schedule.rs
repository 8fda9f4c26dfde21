use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Step-size schedule `η_t`.
///
/// Textual form: `inv_sqrt`, `fixed:<c>`, `strongly_convex:<mu>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LrSchedule {
    /// `1/√(t+1)`
    InvSqrt,
    /// constant `c`
    Fixed(f64),
    /// `2/(μ(t+1))`
    StronglyConvex(f64),
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LrSchedule::InvSqrt => Ok(()),
            LrSchedule::Fixed(c) if c >= 0.0 && c.is_finite() => Ok(()),
            LrSchedule::StronglyConvex(mu) if mu > 0.0 && mu.is_finite() => Ok(()),
            LrSchedule::Fixed(c) => Err(Error::Config(format!(
                "fixed learning rate must be nonnegative, got {c}"
            ))),
            LrSchedule::StronglyConvex(mu) => Err(Error::Config(format!(
                "strong-convexity modulus must be positive, got {mu}"
            ))),
        }
    }

    /// Step size at iteration `t`; assumes a validated schedule.
    pub fn at<T: Scalar>(&self, t: usize) -> T {
        let t1 = T::lit(t as f64 + 1.0);
        match *self {
            LrSchedule::InvSqrt => t1.sqrt().recip(),
            LrSchedule::Fixed(c) => T::lit(c),
            LrSchedule::StronglyConvex(mu) => T::lit(2.0) / (T::lit(mu) * t1),
        }
    }
}

/// Validated step size of `kind` at iteration `t`.
pub fn lr_schedule<T: Scalar>(kind: LrSchedule, t: usize) -> Result<T> {
    kind.validate()?;
    Ok(kind.at(t))
}

impl fmt::Display for LrSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LrSchedule::InvSqrt => write!(f, "inv_sqrt"),
            LrSchedule::Fixed(c) => write!(f, "fixed:{c}"),
            LrSchedule::StronglyConvex(mu) => write!(f, "strongly_convex:{mu}"),
        }
    }
}

impl FromStr for LrSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::Config(format!("schedule `{s}` needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("schedule `{s}`: {e}")))
        };
        let sched = match kind {
            "inv_sqrt" if arg.is_none() => LrSchedule::InvSqrt,
            "fixed" => LrSchedule::Fixed(num(arg)?),
            "strongly_convex" => LrSchedule::StronglyConvex(num(arg)?),
            _ => {
                return Err(Error::Config(format!(
                    "unknown learning-rate schedule `{s}`"
                )))
            }
        };
        sched.validate()?;
        Ok(sched)
    }
}

impl TryFrom<String> for LrSchedule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LrSchedule> for String {
    fn from(s: LrSchedule) -> String {
        s.to_string()
    }
}
