//! Car kinematics, rewards, constraints and features, generic over the
//! scalar so the same code yields values (`f64`) and exact local Jacobians
//! ([`Dual`](crate::Dual)).

use crate::scalar::Scalar;

use super::{ConstraintKind, ReachAvoidConfig, RewardKind, RewardMode};

/// Planar car: position and heading in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarState<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Scalar> CarState<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self { x, y, theta }
    }

    pub fn distance(&self, other: &Self) -> T {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

fn tau<T: Scalar>() -> T {
    T::PI() + T::PI()
}

/// Wraps an angle to `[0, 2π)`.
pub fn wrap_angle<T: Scalar>(theta: T) -> T {
    let tau = tau::<T>();
    let mut r = theta % tau;
    if r < T::zero() {
        r += tau;
    }
    if r >= tau {
        r -= tau;
    }
    r
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_signed<T: Scalar>(theta: T) -> T {
    let r = wrap_angle(theta);
    if r > T::PI() {
        r - tau::<T>()
    } else {
        r
    }
}

/// Reflects a car that left the plane back onto the violated boundary.
pub fn bounce<T: Scalar>(car: CarState<T>, cfg: &ReachAvoidConfig) -> CarState<T> {
    let (lo, hi) = (T::lit(cfg.env_min), T::lit(cfg.env_max));
    let mut c = car;
    if c.x > hi || c.x < lo {
        c.x = if c.x > hi { hi } else { lo };
        c.theta = T::PI() - c.theta;
    }
    if c.y > hi || c.y < lo {
        c.y = if c.y > hi { hi } else { lo };
        c.theta = -c.theta;
    }
    c.theta = wrap_angle(c.theta);
    c
}

/// Turns by `turn·ω` (`turn ∈ [−1, 1]`), moves `c` along the new heading,
/// and bounces off the plane's edge.
pub fn displacement<T: Scalar>(car: CarState<T>, turn: T, cfg: &ReachAvoidConfig) -> CarState<T> {
    let theta = wrap_angle(car.theta + turn * T::lit(cfg.turn_angle_deg.to_radians()));
    let c = T::lit(cfg.speed);
    bounce(
        CarState::new(car.x + c * theta.cos(), car.y + c * theta.sin(), theta),
        cfg,
    )
}

/// Distance from `car` to the goal ball (zero inside it).
pub fn goal_gap<T: Scalar>(car: &CarState<T>, cfg: &ReachAvoidConfig) -> T {
    let d = ((car.x - T::lit(cfg.goal_center[0])).powi(2)
        + (car.y - T::lit(cfg.goal_center[1])).powi(2))
    .sqrt();
    (d - T::lit(cfg.goal_radius)).max(T::zero())
}

pub fn in_goal<T: Scalar>(car: &CarState<T>, cfg: &ReachAvoidConfig) -> bool {
    let d2 =
        (car.x - T::lit(cfg.goal_center[0])).powi(2) + (car.y - T::lit(cfg.goal_center[1])).powi(2);
    d2.value() <= cfg.goal_radius * cfg.goal_radius
}

pub fn captured<T: Scalar>(
    defender: &CarState<T>,
    attacker: &CarState<T>,
    cfg: &ReachAvoidConfig,
) -> bool {
    defender.distance(attacker).value() <= cfg.capture_radius
}

/// Attacker's payoff for the joint position `(defender, attacker)`.
pub fn state_reward<T: Scalar>(
    defender: &CarState<T>,
    attacker: &CarState<T>,
    cfg: &ReachAvoidConfig,
) -> T {
    let reached = in_goal(attacker, cfg);
    match cfg.reward_kind {
        RewardKind::ReachDistance => {
            if reached {
                T::lit(cfg.target_bonus)
            } else if cfg.reward_mode == RewardMode::GneSoft && captured(defender, attacker, cfg) {
                -T::lit(cfg.capture_penalty)
            } else {
                -goal_gap(attacker, cfg).powi(2)
            }
        }
        RewardKind::ReachProbability => {
            if reached {
                T::one()
            } else {
                T::zero()
            }
        }
    }
}

/// Safety constraint of the attacker's move from `attacker` to
/// `attacker_next` when the defender ends at `defender_next`; `≥ 0` is safe.
pub fn safety<T: Scalar>(
    attacker: &CarState<T>,
    defender_next: &CarState<T>,
    attacker_next: &CarState<T>,
    cfg: &ReachAvoidConfig,
) -> T {
    let r = T::lit(cfg.capture_radius);
    match cfg.constraint {
        ConstraintKind::Hard => attacker_next.distance(defender_next) - r,
        ConstraintKind::Exponential => {
            let avoid = (attacker.distance(defender_next) - r).max(T::zero());
            let moved = ((attacker_next.x - attacker.x).powi(2)
                + (attacker_next.y - attacker.y).powi(2))
            .sqrt();
            avoid.exp() - T::one() - moved
        }
    }
}

/// Joint state as `[defender, attacker]`.
pub fn split<T: Scalar>(s: &[T]) -> (CarState<T>, CarState<T>) {
    (
        CarState::new(s[0], s[1], s[2]),
        CarState::new(s[3], s[4], s[5]),
    )
}

/// One joint move: `(next cars, attacker payoff, constraint)`.
pub fn advance<T: Scalar>(
    s: &[T],
    defender_turn: T,
    attacker_turn: T,
    cfg: &ReachAvoidConfig,
) -> (CarState<T>, CarState<T>, T, T) {
    let (d, a) = split(s);
    let d_next = if cfg.static_defender {
        d
    } else {
        displacement(d, defender_turn, cfg)
    };
    let a_next = displacement(a, attacker_turn, cfg);
    let r = state_reward(&d_next, &a_next, cfg);
    let g = safety(&a, &d_next, &a_next, cfg);
    (d_next, a_next, r, g)
}

fn bearing<T: Scalar>(from: &CarState<T>, to_x: T, to_y: T) -> T {
    (to_y - from.y).atan2(to_x - from.x)
}

/// The 13 policy features of the joint state `[defender, attacker]`.
pub fn features<T: Scalar>(s: &[T], cfg: &ReachAvoidConfig) -> Vec<T> {
    let (d, a) = split(s);
    let span = T::lit(cfg.env_max - cfg.env_min);
    let mid = T::lit(cfg.env_max + cfg.env_min);
    let norm = |v: T| (v + v - mid) / span;
    let (gx, gy) = (T::lit(cfg.goal_center[0]), T::lit(cfg.goal_center[1]));
    let goal_dist = ((a.x - gx).powi(2) + (a.y - gy).powi(2)).sqrt();
    vec![
        norm(a.x),
        norm(a.y),
        a.theta.cos(),
        a.theta.sin(),
        norm(d.x),
        norm(d.y),
        d.theta.cos(),
        d.theta.sin(),
        goal_dist / span,
        wrap_signed(bearing(&a, d.x, d.y) - a.theta),
        a.distance(&d) / span,
        wrap_signed(bearing(&a, gx, gy) - a.theta),
        wrap_signed(bearing(&d, gx, gy) - d.theta),
    ]
}
