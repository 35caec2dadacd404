//! Error norms, convergence orders, GCL residuals and correction slopes.

use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::edge_quadrature::{edge_correction, QuadratureRule};
use crate::fields::VelocityField;
use crate::integrator::SimulationState;
use crate::mesh::{edge_geometry, QuadMesh, Rect};
use crate::nodal_solver::reconstruct_with_corrections;
use crate::{Error, Result, Vec2};

/// Density errors against the exact solution `rho = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub l_inf: f64,
    pub l2: f64,
    /// `l2 / sqrt(sum_c |cell_c|)`, the root-mean-square error. Refinement
    /// tables report this one.
    pub l2_normalized: f64,
    /// Initial mesh spacing.
    pub h: f64,
    pub t: f64,
    pub rule: Option<QuadratureRule>,
}

/// `max_c |rho_c - 1|` and `sqrt(sum_c (rho_c - 1)^2 |cell_c|)`, with
/// `rho_c = m_c / |cell_c|` taken from the current coordinates.
pub fn density_errors(state: &SimulationState) -> Result<ErrorReport> {
    let mesh = &state.mesh;
    let (l_inf, sum_sq, total) = state
        .cells
        .par_iter()
        .enumerate()
        .map(|(c, cell)| {
            let area = mesh.cell_area(c);
            if !(area > 0.0) {
                return Err(Error::Tangled { cell: c, area, stage: None });
            }
            let e = cell.mass / area - 1.0;
            Ok((e.abs(), e * e * area, area))
        })
        .try_reduce(
            || (0.0, 0.0, 0.0),
            |a, b| Ok((a.0.max(b.0), a.1 + b.1, a.2 + b.2)),
        )?;
    Ok(ErrorReport {
        l_inf,
        l2: sum_sq.sqrt(),
        l2_normalized: (sum_sq / total).sqrt(),
        h: mesh.spacing(),
        t: state.t,
        rule: None,
    })
}

/// `log2(e[i-1] / e[i])` for consecutive entries.
pub fn convergence_orders(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::ContractViolation(format!(
            "need matching error/h lists of length >= 2, got {} and {}",
            errors.len(),
            hs.len()
        )));
    }
    for w in hs.windows(2) {
        let ratio = w[0] / w[1];
        if !((ratio - 2.0).abs() <= 1e-9 * 2.0) {
            return Err(Error::ContractViolation(format!(
                "mesh sizes must halve, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if let Some(index) = errors.iter().position(|&e| !(e > 0.0)) {
        return Err(Error::OrderUndefined { index });
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub l_inf: f64,
    pub order_inf: Option<f64>,
    /// Area-normalized L2 error.
    pub l2: f64,
    pub order_2: Option<f64>,
}

/// One rule's refinement study, coarse to fine.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub rule: QuadratureRule,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn from_reports(rule: QuadratureRule, reports: &[ErrorReport]) -> Result<Self> {
        let hs: Vec<f64> = reports.iter().map(|r| r.h).collect();
        let linf: Vec<f64> = reports.iter().map(|r| r.l_inf).collect();
        let l2: Vec<f64> = reports.iter().map(|r| r.l2_normalized).collect();
        let (oi, o2) = if reports.len() >= 2 {
            (convergence_orders(&linf, &hs)?, convergence_orders(&l2, &hs)?)
        } else {
            (Vec::new(), Vec::new())
        };
        let rows = reports
            .iter()
            .enumerate()
            .map(|(i, r)| ConvergenceRow {
                h: r.h,
                l_inf: r.l_inf,
                order_inf: i.checked_sub(1).map(|j| oi[j]),
                l2: r.l2_normalized,
                order_2: i.checked_sub(1).map(|j| o2[j]),
            })
            .collect();
        Ok(Self { rule, rows })
    }

    pub const CSV_HEADER: &'static str = "h,Linf,order_inf,L2,order_2,rule";

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.5e},{},{:.5e},{},{}",
                r.h,
                r.l_inf,
                fmt_order(r.order_inf),
                r.l2,
                fmt_order(r.order_2),
                self.rule
            );
        }
        s
    }
}

fn fmt_order(o: Option<f64>) -> String {
    o.map(|v| format!("{v:.2}")).unwrap_or_default()
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rule: {}", self.rule)?;
        writeln!(f, "{:>8}  {:>12}  {:>6}  {:>12}  {:>6}", "h", "Linf", "order", "L2", "order")?;
        for r in &self.rows {
            let o = |x: Option<f64>| x.map(|v| format!("{v:.2}")).unwrap_or_else(|| "---".into());
            writeln!(
                f,
                "{:>8}  {:>12.4e}  {:>6}  {:>12.4e}  {:>6}",
                r.h,
                r.l_inf,
                o(r.order_inf),
                r.l2,
                o(r.order_2)
            )?;
        }
        Ok(())
    }
}

/// Cell-outward `l n` of the edge `from -> to` on a counterclockwise cell.
#[inline]
fn outward_scaled_normal(from: Vec2, to: Vec2) -> Vec2 {
    let e = to - from;
    Vec2::new(e.y, -e.x)
}

/// Flux-sum rate of change of the area of cell `c` under nodal velocities:
/// `1/2 sum_q (l_{q q+} n_{q q+} + l_{q- q} n_{q- q}) . u_q`.
pub fn cell_area_rate(mesh: &QuadMesh, c: usize, velocities: &[Vec2]) -> f64 {
    let nodes = mesh.cells()[c];
    let p = mesh.cell_vertices(c);
    let mut rate = 0.0;
    for i in 0..4 {
        let prev = p[(i + 3) % 4];
        let next = p[(i + 1) % 4];
        let ln = outward_scaled_normal(p[i], next) + outward_scaled_normal(prev, p[i]);
        rate += ln.dot(velocities[nodes[i]]);
    }
    0.5 * rate
}

/// Per-cell residual of the discrete area balance over one step:
/// `(|cell^{n+1}| - |cell^n|) - dt * rate^n`, geometry taken at time n.
pub fn gcl_residual(
    state_n: &SimulationState,
    state_np1: &SimulationState,
    velocities: &[Vec2],
    dt: f64,
) -> Result<Vec<f64>> {
    let (a, b) = (&state_n.mesh, &state_np1.mesh);
    if !a.same_topology(b) || a.cell_count() != b.cell_count() {
        return Err(Error::TopologyMismatch("states have different meshes".into()));
    }
    if velocities.len() != a.node_count() {
        return Err(Error::TopologyMismatch(format!(
            "{} velocities for {} nodes",
            velocities.len(),
            a.node_count()
        )));
    }
    Ok((0..a.cell_count())
        .into_par_iter()
        .map(|c| (b.cell_area(c) - a.cell_area(c)) - dt * cell_area_rate(a, c, velocities))
        .collect())
}

/// Fitted convergence slope, or the sentinel for identically-zero data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Slope {
    /// Every sample was below [`ZERO_TOL`].
    Exact,
    Fitted(f64),
}

impl Slope {
    /// `Exact` counts as arbitrarily high order.
    pub fn at_least(self, p: f64) -> bool {
        match self {
            Slope::Exact => true,
            Slope::Fitted(s) => s >= p,
        }
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slope::Exact => f.write_str("exact"),
            Slope::Fitted(s) => write!(f, "{s:.3}"),
        }
    }
}

/// Values at or below this are treated as rounding noise.
pub const ZERO_TOL: f64 = 1e-12;

/// Least-squares slope of `log(value)` against `log(h)`.
pub fn loglog_slope(hs: &[f64], values: &[f64]) -> Result<Slope> {
    if hs.len() != values.len() || hs.len() < 2 {
        return Err(Error::ContractViolation("slope fit needs >= 2 matching samples".into()));
    }
    if values.iter().all(|&v| v.abs() <= ZERO_TOL) {
        return Ok(Slope::Exact);
    }
    if let Some(index) = values.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::OrderUndefined { index });
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    Ok(Slope::Fitted(sxy / sxx))
}

/// Maxima of the three correction quantities on one mesh.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CorrectionMaxima {
    pub h: f64,
    /// `max_q |du_q|` over interior nodes.
    pub magnitude: f64,
    /// `max |du_q - du_q'|` over interior edges.
    pub smoothness: f64,
    /// `max |1/2 n_k . (du_q + du_q') - dS_k . n_k|` over interior edges.
    pub high_order: f64,
}

/// Computes [`CorrectionMaxima`] for `u` on `mesh`. An edge is interior
/// when both endpoints are interior nodes.
pub fn correction_maxima(
    mesh: &QuadMesh,
    u: &impl VelocityField,
    rule: QuadratureRule,
) -> Result<CorrectionMaxima> {
    let field = reconstruct_with_corrections(mesh, u, rule)?;
    let du = field.corrections.as_deref().unwrap_or_default();
    let interior = |q: usize| mesh.node_kind(q).is_interior();

    let magnitude = (0..mesh.node_count())
        .filter(|&q| interior(q))
        .map(|q| du[q].norm())
        .fold(0.0, f64::max);

    let edges: Vec<(usize, usize)> = mesh.edges().filter(|&(a, b)| interior(a) && interior(b)).collect();
    let (smoothness, high_order) = edges
        .par_iter()
        .map(|&(q, p)| {
            let (xq, xp) = (mesh.coord(q), mesh.coord(p));
            let n = edge_geometry(xq, xp)?.normal;
            let ds = edge_correction(rule, u, xq, xp)?.dot(n);
            let smooth = (du[q] - du[p]).norm();
            let high = (0.5 * n.dot(du[q] + du[p]) - ds).abs();
            Ok::<_, Error>((smooth, high))
        })
        .try_reduce(|| (0.0, 0.0), |a, b| Ok((a.0.max(b.0), a.1.max(b.1))))?;

    Ok(CorrectionMaxima {
        h: mesh.spacing(),
        magnitude,
        smoothness,
        high_order,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionSlopes {
    pub samples: Vec<CorrectionMaxima>,
    /// Expected near 2.
    pub magnitude: Slope,
    /// Expected near 3.
    pub smoothness: Slope,
    /// Expected near 4.
    pub high_order: Slope,
}

/// Refinement slopes of the three correction quantities on uniform square
/// meshes of `domain` with `n` cells per side for each `n` in `resolutions`.
pub fn theorem1_slopes(
    u: &impl VelocityField,
    rule: QuadratureRule,
    domain: Rect,
    resolutions: &[usize],
) -> Result<CorrectionSlopes> {
    if resolutions.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "slope fits need at least 3 mesh sizes, got {}",
            resolutions.len()
        )));
    }
    let samples = resolutions
        .iter()
        .map(|&n| {
            let mesh = QuadMesh::build_uniform(domain, n, n)?;
            correction_maxima(&mesh, u, rule)
        })
        .collect::<Result<Vec<_>>>()?;
    let hs: Vec<f64> = samples.iter().map(|s| s.h).collect();
    let pick = |f: fn(&CorrectionMaxima) -> f64| samples.iter().map(f).collect::<Vec<_>>();
    Ok(CorrectionSlopes {
        magnitude: loglog_slope(&hs, &pick(|s| s.magnitude))?,
        smoothness: loglog_slope(&hs, &pick(|s| s.smoothness))?,
        high_order: loglog_slope(&hs, &pick(|s| s.high_order))?,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Field;
    use crate::integrator::{euler_step, SimulationState};
    use crate::nodal_solver::NodalVelocityField;
    use approx::assert_relative_eq;

    fn state(mesh: QuadMesh) -> SimulationState {
        SimulationState::new(mesh, 1.0).unwrap()
    }

    #[test]
    fn unmoved_mesh_has_zero_error() {
        let s = state(QuadMesh::build_uniform(Rect::square(0.0, 1.0), 5, 5).unwrap());
        let r = density_errors(&s).unwrap();
        assert_eq!((r.l_inf, r.l2), (0.0, 0.0));
    }

    #[test]
    fn deflated_cell() {
        // Two unit cells; squash the right one to area 0.5 by lowering its top edge.
        let m = QuadMesh::build_uniform(Rect::new(0.0, 2.0, 0.0, 1.0), 2, 1).unwrap();
        let s = state(m.clone());
        let mut coords = m.coords().to_vec();
        // Nodes: bottom row 0,1,2; top row 3,4,5. Right cell is [1,2,5,4].
        coords[5].y = 0.0;
        coords[4].y = 1.0;
        // Area of (1,0),(2,0),(2,0),(1,1) is 0.5.
        let moved = SimulationState {
            mesh: m.with_coords(coords).unwrap(),
            ..s.clone()
        };
        assert_relative_eq!(moved.mesh.cell_area(1), 0.5);
        let r = density_errors(&moved).unwrap();
        assert_relative_eq!(r.l_inf, 1.0);
        assert_relative_eq!(r.l2, 0.5f64.sqrt());
        assert_relative_eq!(r.l2_normalized, (0.5f64 / 1.5).sqrt());
    }

    #[test]
    fn orders() {
        assert_eq!(convergence_orders(&[1.0, 1.0 / 16.0], &[0.2, 0.1]).unwrap(), vec![4.0]);
        let o = convergence_orders(&[2.0771e-4, 1.5225e-5], &[0.4, 0.2]).unwrap();
        assert!((o[0] - 3.77).abs() < 0.005);
        assert_eq!(convergence_orders(&[0.3, 0.3], &[0.2, 0.1]).unwrap(), vec![0.0]);
        assert!(matches!(
            convergence_orders(&[0.3, 0.0], &[0.2, 0.1]),
            Err(Error::OrderUndefined { index: 1 })
        ));
        assert!(convergence_orders(&[0.3], &[0.2]).is_err());
        assert!(convergence_orders(&[0.3, 0.1], &[0.2, 0.2]).is_err());
    }

    #[test]
    fn table_serialization() {
        let mk = |h, e| ErrorReport {
            l_inf: e,
            l2: e,
            l2_normalized: e / 10.0,
            h,
            t: 0.1,
            rule: None,
        };
        let t = ConvergenceTable::from_reports(
            QuadratureRule::Lobatto3,
            &[mk(0.4, 2.0771e-4), mk(0.2, 1.5225e-5)],
        )
        .unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "h,Linf,order_inf,L2,order_2,rule");
        assert_eq!(lines[1], "0.4,2.07710e-4,,2.07710e-5,,lobatto");
        assert_eq!(lines[2], "0.2,1.52250e-5,3.77,1.52250e-6,3.77,lobatto");
        let text = t.to_string();
        assert!(text.contains("---"));
        assert!(text.contains("3.77"));
    }

    #[test]
    fn dilation_residual_is_dt_squared() {
        let m = QuadMesh::build_uniform(Rect::square(0.0, 1.0), 1, 1).unwrap();
        let s = state(m);
        let v: Vec<Vec2> = s.mesh.coords().to_vec();
        let dt = 0.01;
        let next = euler_step(
            &s,
            &NodalVelocityField {
                velocities: v.clone(),
                corrections: None,
            },
            dt,
        )
        .unwrap();
        let r = gcl_residual(&s, &next, &v, dt).unwrap();
        assert_relative_eq!(r[0], dt * dt, max_relative = 1e-10);
        assert_relative_eq!(cell_area_rate(&s.mesh, 0, &v), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn residual_rejects_mismatched_states() {
        let a = state(QuadMesh::build_uniform(Rect::square(0.0, 1.0), 2, 2).unwrap());
        let b = state(QuadMesh::build_uniform(Rect::square(0.0, 1.0), 3, 3).unwrap());
        assert!(gcl_residual(&a, &b, &[Vec2::ZERO; 9], 0.1).is_err());
        assert!(gcl_residual(&a, &a, &[Vec2::ZERO; 3], 0.1).is_err());
    }

    #[test]
    fn slope_fit() {
        let hs = [0.4, 0.2, 0.1];
        let vs: Vec<f64> = hs.iter().map(|h: &f64| 3.0 * h.powi(3)).collect();
        match loglog_slope(&hs, &vs).unwrap() {
            Slope::Fitted(s) => assert_relative_eq!(s, 3.0, max_relative = 1e-12),
            Slope::Exact => panic!("expected a fitted slope"),
        }
        assert_eq!(loglog_slope(&hs, &[0.0, 1e-17, 0.0]).unwrap(), Slope::Exact);
        assert!(Slope::Exact.at_least(100.0));
    }

    #[test]
    fn affine_field_corrections_vanish() {
        let f = Field::Affine([0.1, 0.5, -0.3, 0.2, 0.7, -0.5]);
        let s = theorem1_slopes(&f, QuadratureRule::Lobatto3, Rect::square(0.0, 1.0), &[4, 8, 16])
            .unwrap();
        assert_eq!(s.magnitude, Slope::Exact);
        assert_eq!(s.smoothness, Slope::Exact);
        assert_eq!(s.high_order, Slope::Exact);
        assert!(theorem1_slopes(&f, QuadratureRule::Lobatto3, Rect::square(0.0, 1.0), &[4, 8]).is_err());
    }
}
