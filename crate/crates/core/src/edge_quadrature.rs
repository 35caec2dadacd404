//! Area-conservative endpoint corrections along mesh edges.
//!
//! A velocity profile `v` on `[a, b]` is replaced by the line with the same
//! endpoint slope whose integral equals a higher-order quadrature of `v`.
//! That line is the secant shifted by
//!
//! ```text
//! dS = S / (b - a) - (v(a) + v(b)) / 2
//! ```
//!
//! so its endpoint values are `v(a) + dS` and `v(b) + dS`. Both rules here
//! have algebraic precision 3, which makes the corrected endpoint value
//! `u(a) - h^2/12 u'' - h^3/24 u''' + O(h^4)` for either choice.

use std::fmt;
use std::str::FromStr;

use crate::fields::VelocityField;
use crate::{Error, Result, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QuadratureRule {
    /// Three-point Gauss-Lobatto (Simpson): nodes `a`, midpoint, `b`.
    Lobatto3,
    /// Two-point Gauss-Legendre: nodes `mid -/+ (b - a) / (2 sqrt 3)`.
    Legendre2,
}

impl QuadratureRule {
    pub const ALL: [QuadratureRule; 2] = [QuadratureRule::Lobatto3, QuadratureRule::Legendre2];

    pub fn name(self) -> &'static str {
        match self {
            QuadratureRule::Lobatto3 => "lobatto",
            QuadratureRule::Legendre2 => "legendre",
        }
    }
}

impl fmt::Display for QuadratureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QuadratureRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lobatto" | "lobatto3" | "gauss-lobatto" => Ok(QuadratureRule::Lobatto3),
            "legendre" | "legendre2" | "gauss-legendre" => Ok(QuadratureRule::Legendre2),
            _ => Err(Error::InvalidConfig(format!("unknown quadrature rule '{s}'"))),
        }
    }
}

/// Half-offset of the Gauss-Legendre nodes from the midpoint, as a fraction
/// of the interval length: `1 / (2 sqrt 3)`.
const LEGENDRE_OFFSET: f64 = 0.288_675_134_594_812_9;

/// Result of shifting a secant so its integral matches `s_target`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservativeLinearization {
    pub v_a_prime: f64,
    pub v_b_prime: f64,
    pub delta_s: f64,
    /// Integral over the interval (not divided by its length).
    pub s_target: f64,
}

pub fn linearize_conservative(
    v_a: f64,
    v_b: f64,
    s_target: f64,
    a: f64,
    b: f64,
) -> Result<ConservativeLinearization> {
    if !(b > a) {
        return Err(Error::DegenerateInterval { a, b });
    }
    let delta_s = s_target / (b - a) - 0.5 * (v_a + v_b);
    Ok(ConservativeLinearization {
        v_a_prime: v_a + delta_s,
        v_b_prime: v_b + delta_s,
        delta_s,
        s_target,
    })
}

/// Quadrature of `f` over `[a, b]`.
pub fn segment_integral(
    rule: QuadratureRule,
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    if !(b > a) {
        return Err(Error::DegenerateInterval { a, b });
    }
    let len = b - a;
    let mid = 0.5 * (a + b);
    Ok(match rule {
        QuadratureRule::Lobatto3 => len * (f(a) + 4.0 * f(mid) + f(b)) / 6.0,
        QuadratureRule::Legendre2 => {
            let d = len * LEGENDRE_OFFSET;
            len * (f(mid - d) + f(mid + d)) / 2.0
        }
    })
}

/// Endpoint-corrected velocity at `x_q` for the edge `x_q -> x_q2`.
///
/// Samples lie on the chord between the endpoints. The weights are the
/// closed forms of `u(x_q) + dS` for each rule, applied componentwise.
pub fn corrected_endpoint_velocity(
    rule: QuadratureRule,
    u: &impl VelocityField,
    x_q: Vec2,
    x_q2: Vec2,
) -> Result<Vec2> {
    if x_q == x_q2 {
        return Err(Error::DegenerateEdge { at: x_q });
    }
    let ua = u.velocity(x_q);
    let ub = u.velocity(x_q2);
    Ok(match rule {
        QuadratureRule::Lobatto3 => {
            let um = u.velocity(x_q.lerp(x_q2, 0.5));
            (2.0 / 3.0) * (ua + um) - (1.0 / 3.0) * ub
        }
        QuadratureRule::Legendre2 => {
            let u1 = u.velocity(x_q.lerp(x_q2, 0.5 - LEGENDRE_OFFSET));
            let u2 = u.velocity(x_q.lerp(x_q2, 0.5 + LEGENDRE_OFFSET));
            0.5 * (ua + u1 + u2 - ub)
        }
    })
}

/// Componentwise area correction `dS` of the edge `x_q -> x_q2`.
///
/// This is the same for both endpoints of an edge.
pub fn edge_correction(
    rule: QuadratureRule,
    u: &impl VelocityField,
    x_q: Vec2,
    x_q2: Vec2,
) -> Result<Vec2> {
    Ok(corrected_endpoint_velocity(rule, u, x_q, x_q2)? - u.velocity(x_q))
}
