//! Analytic, time-independent velocity fields.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::{Error, Vec2};

/// Anything that maps a position to a velocity.
pub trait VelocityField: Sync {
    fn velocity(&self, p: Vec2) -> Vec2;
}

impl<T: VelocityField + ?Sized> VelocityField for &T {
    fn velocity(&self, p: Vec2) -> Vec2 {
        (**self).velocity(p)
    }
}

/// Smooth vortex on `[-10, 10]^2`:
/// `u = 5 / (2 pi) (-y, x) exp((1 - x^2 - y^2) / 2)`.
pub fn isentropic_vortex_velocity(x: f64, y: f64) -> Vec2 {
    let s = 5.0 / (2.0 * PI) * ((1.0 - x * x - y * y) / 2.0).exp();
    Vec2::new(-y * s, x * s)
}

/// Steady Taylor-Green vortex on `[0, 1]^2`.
pub fn taylor_green_velocity(x: f64, y: f64) -> Vec2 {
    let (sx, cx) = (PI * x).sin_cos();
    let (sy, cy) = (PI * y).sin_cos();
    Vec2::new(sx * cy, -cx * sy)
}

pub type Sampler = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;

#[derive(Clone)]
pub enum Field {
    IsentropicVortex,
    TaylorGreen,
    Constant(Vec2),
    /// Rigid rotation `(-y, x)` about the origin.
    Rotation,
    /// `(a + b x + c y, d + e x + f y)`.
    Affine([f64; 6]),
    Custom(Sampler),
}

impl Field {
    pub fn custom(f: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static) -> Self {
        Field::Custom(Arc::new(f))
    }

    /// Divergence-free fields keep every cell's exact area constant.
    pub fn is_solenoidal(&self) -> Option<bool> {
        match self {
            Field::IsentropicVortex | Field::TaylorGreen | Field::Constant(_) | Field::Rotation => {
                Some(true)
            }
            Field::Affine(k) => Some(k[1] + k[5] == 0.0),
            Field::Custom(_) => None,
        }
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::IsentropicVortex => f.write_str("IsentropicVortex"),
            Field::TaylorGreen => f.write_str("TaylorGreen"),
            Field::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Field::Rotation => f.write_str("Rotation"),
            Field::Affine(k) => f.debug_tuple("Affine").field(k).finish(),
            Field::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl VelocityField for Field {
    #[inline]
    fn velocity(&self, p: Vec2) -> Vec2 {
        match self {
            Field::IsentropicVortex => isentropic_vortex_velocity(p.x, p.y),
            Field::TaylorGreen => taylor_green_velocity(p.x, p.y),
            Field::Constant(c) => *c,
            Field::Rotation => Vec2::new(-p.y, p.x),
            Field::Affine([a, b, c, d, e, f]) => {
                Vec2::new(a + b * p.x + c * p.y, d + e * p.x + f * p.y)
            }
            Field::Custom(s) => s(p),
        }
    }
}

/// Parses `isentropic`, `taylor-green`, `rotation`, `constant:a,b` and
/// `affine:a,b,c,d,e,f`.
impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidConfig(format!("unknown field '{s}'"));
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (s.trim(), None),
        };
        let nums = |want: usize| -> Result<Vec<f64>, Error> {
            let v = args
                .ok_or_else(bad)?
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>, _>>()?;
            if v.len() != want || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "field '{name}' takes {want} finite numbers, got '{}'",
                    args.unwrap_or_default()
                )));
            }
            Ok(v)
        };
        match (name, args.is_some()) {
            ("isentropic", false) => Ok(Field::IsentropicVortex),
            ("taylor-green", false) => Ok(Field::TaylorGreen),
            ("rotation", false) => Ok(Field::Rotation),
            ("constant", true) => {
                let v = nums(2)?;
                Ok(Field::Constant(Vec2::new(v[0], v[1])))
            }
            ("affine", true) => {
                let v = nums(6)?;
                Ok(Field::Affine([v[0], v[1], v[2], v[3], v[4], v[5]]))
            }
            _ => Err(bad()),
        }
    }
}

/// Central-difference divergence with half-width `eps`.
pub fn numerical_divergence(field: &impl VelocityField, x: f64, y: f64, eps: f64) -> f64 {
    let dx = field.velocity(Vec2::new(x + eps, y)).x - field.velocity(Vec2::new(x - eps, y)).x;
    let dy = field.velocity(Vec2::new(x, y + eps)).y - field.velocity(Vec2::new(x, y - eps)).y;
    dx / (2.0 * eps) + dy / (2.0 * eps)
}
