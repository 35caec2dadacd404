//! Time-step control and node position updates.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::diagnostics::{cell_area_rate, density_errors};
use crate::edge_quadrature::QuadratureRule;
use crate::fields::{Field, VelocityField};
use crate::mesh::QuadMesh;
use crate::nodal_solver::{
    apply_boundary_constraint, reconstruct_velocities, BoundaryMode, NodalVelocityField,
};
use crate::{Error, Result, Vec2};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum StepMode {
    /// `cfl * h_min / v_max`
    #[default]
    Simple,
    /// Minimum of the diameter, volume-change and growth limits.
    Full,
}

impl FromStr for StepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(StepMode::Simple),
            "full" => Ok(StepMode::Full),
            _ => Err(Error::InvalidConfig(format!("unknown step mode '{s}'"))),
        }
    }
}

impl fmt::Display for StepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepMode::Simple => "simple",
            StepMode::Full => "full",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeStepControl {
    pub cfl: f64,
    /// Diameter criterion coefficient.
    pub c_e: f64,
    /// Relative volume-change limit.
    pub c_v: f64,
    /// Allowed growth factor between steps.
    pub c_m: f64,
    pub dt_initial: f64,
    pub mode: StepMode,
}

impl Default for TimeStepControl {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            c_e: 0.5,
            c_v: 0.1,
            c_m: 1.01,
            dt_initial: 1e-8,
            mode: StepMode::Simple,
        }
    }
}

impl TimeStepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidConfig(format!("cfl must be in (0, 1], got {}", self.cfl)));
        }
        if !(self.dt_initial > 0.0) {
            return Err(Error::InvalidConfig("dt_initial must be positive".into()));
        }
        if !(self.c_m > 1.0) {
            return Err(Error::InvalidConfig("c_m must exceed 1".into()));
        }
        if !(self.c_e > 0.0 && self.c_v > 0.0) {
            return Err(Error::InvalidConfig("c_e and c_v must be positive".into()));
        }
        Ok(())
    }
}

/// Lagrangian quantities of one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellState {
    pub mass: f64,
    pub area: f64,
    pub density: f64,
    pub specific_volume: f64,
}

impl CellState {
    fn with_area(mass: f64, area: f64) -> Self {
        Self {
            mass,
            area,
            density: mass / area,
            specific_volume: area / mass,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimulationState {
    pub mesh: QuadMesh,
    pub cells: Vec<CellState>,
    pub t: f64,
    pub step_count: u64,
    /// Size of the last accepted step; `None` before the first step.
    pub dt_prev: Option<f64>,
}

impl SimulationState {
    /// Initial state with uniform density `rho0`, so `m_c = rho0 |cell|`.
    pub fn new(mesh: QuadMesh, rho0: f64) -> Result<Self> {
        if !(rho0 > 0.0) {
            return Err(Error::InvalidConfig(format!("initial density must be positive, got {rho0}")));
        }
        mesh.check_untangled(None)?;
        let cells = mesh
            .cell_areas()
            .into_iter()
            .map(|a| CellState::with_area(rho0 * a, a))
            .collect();
        Ok(Self {
            mesh,
            cells,
            t: 0.0,
            step_count: 0,
            dt_prev: None,
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum()
    }

    /// Moves to `mesh`, keeping masses and recomputing areas and densities.
    fn advance(&self, mesh: QuadMesh, dt: f64) -> Result<Self> {
        if !mesh.same_topology(&self.mesh) {
            return Err(Error::TopologyMismatch("advanced mesh differs in shape".into()));
        }
        let cells = self
            .cells
            .par_iter()
            .enumerate()
            .map(|(c, old)| {
                let area = mesh.cell_area(c);
                if !(area > 0.0) {
                    return Err(Error::Tangled { cell: c, area, stage: None });
                }
                Ok(CellState::with_area(old.mass, area))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mesh,
            cells,
            t: self.t + dt,
            step_count: self.step_count + 1,
            dt_prev: Some(dt),
        })
    }
}

pub fn compute_time_step(
    state: &SimulationState,
    velocities: &NodalVelocityField,
    ctl: &TimeStepControl,
    t_final: f64,
) -> Result<f64> {
    let remaining = t_final - state.t;
    let v_max = velocities.max_speed();
    let limit = match ctl.mode {
        StepMode::Simple => {
            if v_max > 0.0 {
                ctl.cfl * state.mesh.min_edge_length() / v_max
            } else {
                f64::INFINITY
            }
        }
        StepMode::Full => {
            let mesh = &state.mesh;
            let dt_e = if v_max > 0.0 {
                let lambda = (0..mesh.cell_count())
                    .map(|c| mesh.cell_diameter(c))
                    .fold(f64::INFINITY, f64::min);
                ctl.c_e * lambda / v_max
            } else {
                f64::INFINITY
            };
            let dt_v = (0..mesh.cell_count())
                .map(|c| {
                    let rate = cell_area_rate(mesh, c, &velocities.velocities).abs();
                    if rate > 0.0 {
                        ctl.c_v * mesh.cell_area(c) / rate
                    } else {
                        f64::INFINITY
                    }
                })
                .fold(f64::INFINITY, f64::min);
            let dt_m = ctl.c_m * state.dt_prev.unwrap_or(ctl.dt_initial);
            dt_e.min(dt_v).min(dt_m)
        }
    };
    let dt = limit.min(remaining);
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::TimeStepCollapse { dt, t: state.t });
    }
    Ok(dt)
}

fn displaced(mesh: &QuadMesh, base: &[Vec2], v: &[Vec2], dt: f64) -> Result<QuadMesh> {
    let coords = base
        .par_iter()
        .zip(v.par_iter())
        .map(|(&x, &u)| x + u * dt)
        .collect();
    mesh.with_coords(coords)
}

/// `x_q <- x_q + dt u*_q`.
pub fn euler_step(
    state: &SimulationState,
    velocities: &NodalVelocityField,
    dt: f64,
) -> Result<SimulationState> {
    check_dt(dt)?;
    check_len(state, velocities)?;
    let mesh = displaced(&state.mesh, state.mesh.coords(), &velocities.velocities, dt)?;
    state.advance(mesh, dt)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::TimeStepCollapse { dt, t: f64::NAN });
    }
    Ok(())
}

fn check_len(state: &SimulationState, v: &NodalVelocityField) -> Result<()> {
    if v.velocities.len() != state.mesh.node_count() {
        return Err(Error::TopologyMismatch(format!(
            "{} velocities for {} nodes",
            v.velocities.len(),
            state.mesh.node_count()
        )));
    }
    Ok(())
}

/// Reconstruction followed by the boundary constraint.
pub fn stage_velocity(
    mesh: &QuadMesh,
    u: &impl VelocityField,
    rule: QuadratureRule,
    boundary: BoundaryMode,
) -> Result<NodalVelocityField> {
    let mut v = reconstruct_velocities(mesh, u, rule)?;
    apply_boundary_constraint(mesh, &mut v, boundary);
    Ok(v)
}

/// Classical RK4 over four reconstructions.
pub fn rk4_step(
    state: &SimulationState,
    u: &impl VelocityField,
    rule: QuadratureRule,
    dt: f64,
    boundary: BoundaryMode,
) -> Result<SimulationState> {
    let k1 = stage_velocity(&state.mesh, u, rule, boundary)?;
    rk4_step_from(state, &k1, u, rule, dt, boundary)
}

/// RK4 with a precomputed first stage.
pub fn rk4_step_from(
    state: &SimulationState,
    k1: &NodalVelocityField,
    u: &impl VelocityField,
    rule: QuadratureRule,
    dt: f64,
    boundary: BoundaryMode,
) -> Result<SimulationState> {
    rk4_step_observed(state, k1, u, rule, dt, boundary, |_, _| Ok(()))
}

/// RK4 step that hands each intermediate stage mesh (stages 2 to 4) to
/// `observe` before its velocities are reconstructed.
pub fn rk4_step_observed(
    state: &SimulationState,
    k1: &NodalVelocityField,
    u: &impl VelocityField,
    rule: QuadratureRule,
    dt: f64,
    boundary: BoundaryMode,
    mut observe: impl FnMut(usize, &QuadMesh) -> Result<()>,
) -> Result<SimulationState> {
    check_dt(dt)?;
    check_len(state, k1)?;
    let mesh = &state.mesh;
    let x0 = mesh.coords();

    let mut stage = |k: &NodalVelocityField, h: f64, idx: usize| -> Result<NodalVelocityField> {
        let m = displaced(mesh, x0, &k.velocities, h)?;
        m.check_untangled(Some(idx))?;
        observe(idx, &m)?;
        stage_velocity(&m, u, rule, boundary)
    };
    let k2 = stage(k1, 0.5 * dt, 2)?;
    let k3 = stage(&k2, 0.5 * dt, 3)?;
    let k4 = stage(&k3, dt, 4)?;

    let coords = (0..x0.len())
        .into_par_iter()
        .map(|q| {
            let incr = k1.velocities[q]
                + 2.0 * k2.velocities[q]
                + 2.0 * k3.velocities[q]
                + k4.velocities[q];
            x0[q] + incr * (dt / 6.0)
        })
        .collect();
    state.advance(mesh.with_coords(coords)?, dt)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

impl FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Integrator::Rk4),
            "euler" => Ok(Integrator::Euler),
            _ => Err(Error::InvalidConfig(format!("unknown integrator '{s}'"))),
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::Rk4 => "rk4",
            Integrator::Euler => "euler",
        })
    }
}

pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

/// Everything needed for one run on one mesh.
#[derive(Clone, Debug)]
pub struct SimulationSetup {
    pub mesh: QuadMesh,
    pub field: Field,
    pub rule: QuadratureRule,
    pub integrator: Integrator,
    pub boundary: BoundaryMode,
    pub control: TimeStepControl,
    pub t_final: f64,
    pub max_steps: u64,
    /// Emit a snapshot every this many steps (and at the end); 0 disables.
    pub snapshot_every: u64,
    /// Record density errors against rho = 1 after every step.
    pub track_errors: bool,
}

impl SimulationSetup {
    pub fn new(mesh: QuadMesh, field: Field, rule: QuadratureRule, t_final: f64) -> Self {
        Self {
            mesh,
            field,
            rule,
            integrator: Integrator::Rk4,
            boundary: BoundaryMode::Free,
            control: TimeStepControl::default(),
            t_final,
            max_steps: DEFAULT_MAX_STEPS,
            snapshot_every: 0,
            track_errors: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub h_min: f64,
    /// `(l_inf, l2)` density errors, when tracked.
    pub errors: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunDiagnostics {
    pub steps: Vec<StepRecord>,
}

/// Steps from `t = 0` to exactly `t_final`.
///
/// `on_snapshot` receives the state every `snapshot_every` steps and after
/// the final step.
pub fn run_simulation(
    setup: &SimulationSetup,
    mut on_snapshot: impl FnMut(&SimulationState) -> std::io::Result<()>,
) -> Result<(SimulationState, RunDiagnostics)> {
    setup.control.validate()?;
    if !(setup.t_final >= 0.0) || !setup.t_final.is_finite() {
        return Err(Error::InvalidConfig(format!("t_final must be >= 0, got {}", setup.t_final)));
    }
    let mut state = SimulationState::new(setup.mesh.clone(), 1.0)?;
    let mut diag = RunDiagnostics::default();
    let u = &setup.field;

    while state.t < setup.t_final {
        if state.step_count >= setup.max_steps {
            return Err(Error::Runaway { limit: setup.max_steps });
        }
        let k1 = stage_velocity(&state.mesh, u, setup.rule, setup.boundary)?;
        let dt = compute_time_step(&state, &k1, &setup.control, setup.t_final)?;
        let last = dt >= setup.t_final - state.t;
        let mut next = match setup.integrator {
            Integrator::Rk4 => rk4_step_from(&state, &k1, u, setup.rule, dt, setup.boundary)?,
            Integrator::Euler => euler_step(&state, &k1, dt)?,
        };
        if last {
            next.t = setup.t_final;
        }
        state = next;

        let errors = if setup.track_errors {
            let r = density_errors(&state)?;
            Some((r.l_inf, r.l2))
        } else {
            None
        };
        diag.steps.push(StepRecord {
            step: state.step_count,
            t: state.t,
            dt,
            h_min: state.mesh.min_edge_length(),
            errors,
        });
        if setup.snapshot_every > 0 && (state.step_count % setup.snapshot_every == 0 || last) {
            on_snapshot(&state)?;
        }
    }
    Ok((state, diag))
}
