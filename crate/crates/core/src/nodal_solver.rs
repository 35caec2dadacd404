//! Per-node weighted least-squares velocity reconstruction.
//!
//! For node `q` with incident edges `k = (q, q')` of length `l_k` and unit
//! normal `n_k`, the nodal velocity minimizes
//!
//! ```text
//! F(w) = sum_k alpha_k l_k (w . n_k - n_k . v_k)^2
//! ```
//!
//! where `v_k` is the endpoint-corrected edge velocity at `q`. The normal
//! equations are the 2x2 system `M w = b` with `M = sum l_k n_k n_k^T` and
//! `b = sum l_k n_k (n_k . v_k)`. The impedance weight `alpha_k` is 1.
//!
//! Because `b` is built from full edge velocities, the solution is the full
//! corrected nodal velocity `u*`, not the correction `u* - u(x_q)`.

use std::fmt;
use std::str::FromStr;

use arrayvec::ArrayVec;
use rayon::prelude::*;

use crate::edge_quadrature::{corrected_endpoint_velocity, QuadratureRule};
use crate::fields::VelocityField;
use crate::mesh::{edge_geometry, NodeKind, QuadMesh};
use crate::{Error, Result, Vec2};

/// Edge weight in the nodal functional. Fixed at unity: no shock weighting.
pub const EDGE_WEIGHT: f64 = 1.0;

/// Relative determinant threshold for the nodal solve.
pub const SINGULAR_TOL: f64 = 1e-14;

/// Symmetric 2x2 normal-equation system for one node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NodalSystem {
    /// `[m_xx, m_xy, m_yy]`
    pub m: [f64; 3],
    pub b: Vec2,
}

impl NodalSystem {
    /// Adds one edge's contribution `l n n^T` and `l n (n . v)`.
    pub fn add_edge(&mut self, length: f64, normal: Vec2, velocity: Vec2) {
        let w = EDGE_WEIGHT * length;
        self.m[0] += w * normal.x * normal.x;
        self.m[1] += w * normal.x * normal.y;
        self.m[2] += w * normal.y * normal.y;
        self.b += normal * (w * normal.dot(velocity));
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.m[0], self.m[1]], [self.m[1], self.m[2]]]
    }

    pub fn determinant(&self) -> f64 {
        self.m[0] * self.m[2] - self.m[1] * self.m[1]
    }

    pub fn apply(&self, w: Vec2) -> Vec2 {
        Vec2::new(
            self.m[0] * w.x + self.m[1] * w.y,
            self.m[1] * w.x + self.m[2] * w.y,
        )
    }

    /// Closed-form solve. `node` and `position` only label the error.
    pub fn solve_at(&self, node: usize, position: Vec2) -> Result<Vec2> {
        let det = self.determinant();
        let half_trace = 0.5 * (self.m[0] + self.m[2]);
        if !(det > SINGULAR_TOL * half_trace * half_trace) {
            return Err(Error::SingularSystem { node, position, det });
        }
        let inv = 1.0 / det;
        Ok(Vec2::new(
            inv * (self.m[2] * self.b.x - self.m[1] * self.b.y),
            inv * (self.m[0] * self.b.y - self.m[1] * self.b.x),
        ))
    }
}

/// Builds node `q`'s system from one velocity per incident edge, in the
/// order returned by [`QuadMesh::node_neighbors`].
pub fn assemble_nodal_system(
    mesh: &QuadMesh,
    q: usize,
    edge_velocities: &[Vec2],
) -> Result<NodalSystem> {
    let adj = mesh.node_neighbors(q)?;
    if adj.len() != edge_velocities.len() {
        return Err(Error::ContractViolation(format!(
            "node {q} has {} incident edges but {} velocity samples were given",
            adj.len(),
            edge_velocities.len()
        )));
    }
    let xq = mesh.coord(q);
    let mut sys = NodalSystem::default();
    for (&p, &v) in adj.iter().zip(edge_velocities) {
        let g = edge_geometry(xq, mesh.coord(p))?;
        sys.add_edge(g.length, g.normal, v);
    }
    Ok(sys)
}

/// See [`NodalSystem::solve_at`]; the error reports node 0 at the origin.
pub fn solve_nodal_system(sys: &NodalSystem) -> Result<Vec2> {
    sys.solve_at(0, Vec2::ZERO)
}

/// Corrected nodal velocities, optionally with `u* - u(x_q)` per node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalVelocityField {
    pub velocities: Vec<Vec2>,
    pub corrections: Option<Vec<Vec2>>,
}

impl NodalVelocityField {
    pub fn max_speed(&self) -> f64 {
        self.velocities.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Edge velocities `v_k` for every edge incident to `q`, with `q` as the
/// first endpoint.
pub fn node_edge_velocities(
    mesh: &QuadMesh,
    q: usize,
    u: &impl VelocityField,
    rule: QuadratureRule,
) -> Result<ArrayVec<Vec2, 4>> {
    let xq = mesh.coord(q);
    mesh.node_neighbors(q)?
        .iter()
        .map(|&p| corrected_endpoint_velocity(rule, u, xq, mesh.coord(p)))
        .collect()
}

fn reconstruct_node(
    mesh: &QuadMesh,
    q: usize,
    u: &impl VelocityField,
    rule: QuadratureRule,
) -> Result<Vec2> {
    let xq = mesh.coord(q);
    let mut sys = NodalSystem::default();
    for &p in mesh.node_neighbors(q)? {
        let xp = mesh.coord(p);
        let g = edge_geometry(xq, xp)?;
        let v = corrected_endpoint_velocity(rule, u, xq, xp)?;
        sys.add_edge(g.length, g.normal, v);
    }
    sys.solve_at(q, xq)
}

/// Corrected velocity `u*` at every node of `mesh`.
pub fn reconstruct_velocities(
    mesh: &QuadMesh,
    u: &impl VelocityField,
    rule: QuadratureRule,
) -> Result<NodalVelocityField> {
    let velocities = (0..mesh.node_count())
        .into_par_iter()
        .map(|q| reconstruct_node(mesh, q, u, rule))
        .collect::<Result<Vec<_>>>()?;
    Ok(NodalVelocityField {
        velocities,
        corrections: None,
    })
}

/// Like [`reconstruct_velocities`] but also records `u* - u(x_q)`.
pub fn reconstruct_with_corrections(
    mesh: &QuadMesh,
    u: &impl VelocityField,
    rule: QuadratureRule,
) -> Result<NodalVelocityField> {
    let mut field = reconstruct_velocities(mesh, u, rule)?;
    let corrections = field
        .velocities
        .par_iter()
        .zip(mesh.coords().par_iter())
        .map(|(&v, &x)| v - u.velocity(x))
        .collect();
    field.corrections = Some(corrections);
    Ok(field)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BoundaryMode {
    #[default]
    Free,
    /// Keep only the tangential component on boundary sides; corners fixed.
    Slide,
    Pin,
}

impl BoundaryMode {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryMode::Free => "free",
            BoundaryMode::Slide => "slide",
            BoundaryMode::Pin => "pin",
        }
    }
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(BoundaryMode::Free),
            "slide" => Ok(BoundaryMode::Slide),
            "pin" => Ok(BoundaryMode::Pin),
            _ => Err(Error::InvalidConfig(format!("unknown boundary mode '{s}'"))),
        }
    }
}

/// Applies `mode` to the boundary nodes of `field` in place.
pub fn apply_boundary_constraint(mesh: &QuadMesh, field: &mut NodalVelocityField, mode: BoundaryMode) {
    if mode == BoundaryMode::Free {
        return;
    }
    for (q, v) in field.velocities.iter_mut().enumerate() {
        match (mesh.node_kind(q), mode) {
            (NodeKind::Interior, _) | (_, BoundaryMode::Free) => {}
            (NodeKind::Edge(side), BoundaryMode::Slide) => {
                let t = side.tangent();
                *v = t * v.dot(t);
            }
            (NodeKind::Corner(..), BoundaryMode::Slide) | (_, BoundaryMode::Pin) => {
                *v = Vec2::ZERO;
            }
        }
    }
}

/// Largest relative normal-equation residual `|M u* - b| / (|M| |u*| + |b|)`
/// over all nodes.
pub fn max_normal_residual(
    mesh: &QuadMesh,
    u: &impl VelocityField,
    rule: QuadratureRule,
    field: &NodalVelocityField,
) -> Result<f64> {
    (0..mesh.node_count())
        .into_par_iter()
        .map(|q| {
            let v = node_edge_velocities(mesh, q, u, rule)?;
            let sys = assemble_nodal_system(mesh, q, &v)?;
            let w = field.velocities[q];
            let r = (sys.apply(w) - sys.b).norm();
            let m_norm = sys.m.iter().map(|x| x.abs()).fold(0.0, f64::max);
            let scale = m_norm * w.norm() + sys.b.norm();
            Ok(if scale > 0.0 { r / scale } else { r })
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}
