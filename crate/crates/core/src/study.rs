//! Run configuration and refinement studies.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::diagnostics::{density_errors, theorem1_slopes, ConvergenceTable, CorrectionSlopes, ErrorReport};
use crate::edge_quadrature::QuadratureRule;
use crate::fields::Field;
use crate::integrator::{
    run_simulation, Integrator, RunDiagnostics, SimulationSetup, SimulationState, StepMode,
    TimeStepControl,
};
use crate::mesh::{QuadMesh, Rect};
use crate::nodal_solver::BoundaryMode;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Case {
    /// Smooth vortex on `[-10, 10]^2`.
    #[default]
    Isentropic,
    /// Taylor-Green vortex on `[0, 1]^2`.
    TaylorGreen,
    /// User-supplied field and domain.
    Custom,
}

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::Isentropic => "isentropic",
            Case::TaylorGreen => "taylor-green",
            Case::Custom => "custom",
        }
    }

    /// Built-in domain, `None` for `Custom`.
    pub fn domain(self) -> Option<Rect> {
        match self {
            Case::Isentropic => Some(Rect::square(-10.0, 10.0)),
            Case::TaylorGreen => Some(Rect::square(0.0, 1.0)),
            Case::Custom => None,
        }
    }

    pub fn default_boundary(self) -> BoundaryMode {
        match self {
            // Velocity is below 1e-20 on the far boundary.
            Case::Isentropic | Case::Custom => BoundaryMode::Free,
            // Exact field has zero normal velocity on the walls.
            Case::TaylorGreen => BoundaryMode::Slide,
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isentropic" => Ok(Case::Isentropic),
            "taylor-green" => Ok(Case::TaylorGreen),
            "custom" => Ok(Case::Custom),
            _ => Err(Error::InvalidConfig(format!("unknown case '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleChoice {
    Single(QuadratureRule),
    Both,
}

impl Default for RuleChoice {
    fn default() -> Self {
        RuleChoice::Single(QuadratureRule::Lobatto3)
    }
}

impl RuleChoice {
    pub fn rules(self) -> Vec<QuadratureRule> {
        match self {
            RuleChoice::Single(r) => vec![r],
            RuleChoice::Both => QuadratureRule::ALL.to_vec(),
        }
    }
}

impl FromStr for RuleChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "both" {
            Ok(RuleChoice::Both)
        } else {
            s.parse().map(RuleChoice::Single)
        }
    }
}

impl fmt::Display for RuleChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleChoice::Single(r) => r.fmt(f),
            RuleChoice::Both => f.write_str("both"),
        }
    }
}

/// Fully deterministic description of a run or study.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub case: Case,
    /// Cells per side; meshes are square.
    pub nx: usize,
    pub rule: RuleChoice,
    pub t_final: f64,
    pub cfl: f64,
    pub integrator: Integrator,
    /// `None` picks the case default.
    pub boundary: Option<BoundaryMode>,
    pub step_mode: StepMode,
    pub study: Option<Vec<usize>>,
    pub snapshot_every: u64,
    pub output_dir: PathBuf,
    pub verify_theorem1: bool,
    /// Only for `Case::Custom`, or equal to the built-in domain.
    pub domain: Option<Rect>,
    /// Only for `Case::Custom`.
    pub field: Option<Field>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: Case::Isentropic,
            nx: 50,
            rule: RuleChoice::default(),
            t_final: 0.1,
            cfl: 0.5,
            integrator: Integrator::Rk4,
            boundary: None,
            step_mode: StepMode::Simple,
            study: None,
            snapshot_every: 0,
            output_dir: PathBuf::from("out"),
            verify_theorem1: false,
            domain: None,
            field: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.nx == 0 {
            return bad("nx must be >= 1".into());
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return bad(format!("t_final must be a finite value >= 0, got {}", self.t_final));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must be in (0, 1], got {}", self.cfl));
        }
        match (self.case, self.case.domain(), self.domain) {
            (Case::Custom, _, None) => return bad("custom case needs a domain".into()),
            (Case::Custom, _, Some(d)) => QuadMesh::build_uniform(d, 1, 1).map(|_| ())?,
            (c, Some(builtin), Some(d)) if d != builtin => {
                return bad(format!(
                    "case {c} runs on [{}, {}] x [{}, {}]; domain conflicts",
                    builtin.x0, builtin.x1, builtin.y0, builtin.y1
                ))
            }
            _ => {}
        }
        match (self.case, &self.field) {
            (Case::Custom, None) => return bad("custom case needs a field".into()),
            (Case::Isentropic | Case::TaylorGreen, Some(_)) => {
                return bad(format!("case {} has a fixed field", self.case))
            }
            _ => {}
        }
        if let Some(study) = &self.study {
            validate_study(study)?;
        }
        Ok(())
    }

    pub fn domain(&self) -> Rect {
        self.case
            .domain()
            .or(self.domain)
            .unwrap_or(Rect::square(0.0, 1.0))
    }

    pub fn field(&self) -> Field {
        match self.case {
            Case::Isentropic => Field::IsentropicVortex,
            Case::TaylorGreen => Field::TaylorGreen,
            Case::Custom => self.field.clone().unwrap_or(Field::Constant(Default::default())),
        }
    }

    pub fn boundary(&self) -> BoundaryMode {
        self.boundary.unwrap_or(self.case.default_boundary())
    }

    pub fn control(&self) -> TimeStepControl {
        TimeStepControl {
            cfl: self.cfl,
            mode: self.step_mode,
            ..Default::default()
        }
    }

    /// Single-run setup at resolution `n` with `rule`.
    pub fn setup(&self, n: usize, rule: QuadratureRule) -> Result<SimulationSetup> {
        let mesh = QuadMesh::build_uniform(self.domain(), n, n)?;
        let mut s = SimulationSetup::new(mesh, self.field(), rule, self.t_final);
        s.integrator = self.integrator;
        s.boundary = self.boundary();
        s.control = self.control();
        s.snapshot_every = self.snapshot_every;
        Ok(s)
    }

    /// Resolutions for studies and slope checks, falling back to `nx`
    /// refined three times.
    pub fn resolutions(&self) -> Vec<usize> {
        self.study
            .clone()
            .unwrap_or_else(|| (0..4).map(|k| self.nx << k).collect())
    }
}

/// At least two entries, each double the previous.
pub fn validate_study(study: &[usize]) -> Result<()> {
    if study.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "a study needs at least 2 resolutions, got {}",
            study.len()
        )));
    }
    if study[0] == 0 {
        return Err(Error::InvalidConfig("resolutions must be >= 1".into()));
    }
    for w in study.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(Error::InvalidConfig(format!(
                "study resolutions must double: {} then {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Final state, per-step records and density errors of one run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: SimulationState,
    pub diagnostics: RunDiagnostics,
    pub report: ErrorReport,
}

/// One run; `on_snapshot` is forwarded to [`run_simulation`].
pub fn run_single(
    cfg: &RunConfig,
    n: usize,
    rule: QuadratureRule,
    on_snapshot: impl FnMut(&SimulationState) -> std::io::Result<()>,
) -> Result<RunOutcome> {
    let setup = cfg.setup(n, rule)?;
    let (state, diagnostics) = run_simulation(&setup, on_snapshot)?;
    let mut report = density_errors(&state)?;
    report.rule = Some(rule);
    Ok(RunOutcome {
        state,
        diagnostics,
        report,
    })
}

/// One table per rule over `cfg.study`.
pub fn run_convergence_study(cfg: &RunConfig) -> Result<Vec<ConvergenceTable>> {
    cfg.validate()?;
    let study = cfg
        .study
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("no study resolutions given".into()))?;
    cfg.rule
        .rules()
        .into_iter()
        .map(|rule| {
            let reports = study
                .iter()
                .map(|&n| {
                    run_single(cfg, n, rule, |_| Ok(()))
                        .map(|o| o.report)
                        .map_err(|e| Error::AtResolution {
                            resolution: n,
                            source: Box::new(e),
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            ConvergenceTable::from_reports(rule, &reports)
        })
        .collect()
}

/// Correction-slope check on the configured case for each rule.
pub fn verify_theorem1(cfg: &RunConfig) -> Result<Vec<(QuadratureRule, CorrectionSlopes)>> {
    let resolutions = cfg.resolutions();
    let field = cfg.field();
    cfg.rule
        .rules()
        .into_iter()
        .map(|rule| Ok((rule, theorem1_slopes(&field, rule, cfg.domain(), &resolutions)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.case, Case::Isentropic);
        assert_eq!(c.nx, 50);
        assert_eq!(c.rule, RuleChoice::Single(QuadratureRule::Lobatto3));
        assert_eq!(c.t_final, 0.1);
        assert_eq!(c.boundary(), BoundaryMode::Free);
        assert!(c.validate().is_ok());
        let tg = RunConfig {
            case: Case::TaylorGreen,
            ..Default::default()
        };
        assert_eq!(tg.boundary(), BoundaryMode::Slide);
        assert_eq!(tg.domain(), Rect::square(0.0, 1.0));
    }

    #[test]
    fn validation_errors() {
        let cases = [
            RunConfig { cfl: 0.0, ..Default::default() },
            RunConfig { nx: 0, ..Default::default() },
            RunConfig { t_final: -1.0, ..Default::default() },
            RunConfig { study: Some(vec![50, 50]), ..Default::default() },
            RunConfig { study: Some(vec![50]), ..Default::default() },
            RunConfig { domain: Some(Rect::square(0.0, 1.0)), ..Default::default() },
            RunConfig { field: Some(Field::Rotation), ..Default::default() },
            RunConfig { case: Case::Custom, field: Some(Field::Rotation), ..Default::default() },
            RunConfig { case: Case::Custom, domain: Some(Rect::square(0.0, 1.0)), ..Default::default() },
        ];
        for c in cases {
            assert!(c.validate().is_err(), "{c:?}");
        }
        let ok = RunConfig {
            case: Case::Custom,
            domain: Some(Rect::square(-1.0, 1.0)),
            field: Some(Field::Rotation),
            ..Default::default()
        };
        assert!(ok.validate().is_ok());
        let same = RunConfig {
            domain: Some(Rect::square(-10.0, 10.0)),
            ..Default::default()
        };
        assert!(same.validate().is_ok());
    }

    #[test]
    fn study_validation() {
        assert!(validate_study(&[25, 50, 100, 200]).is_ok());
        assert!(validate_study(&[25, 50, 99]).is_err());
        assert!(validate_study(&[0, 0]).is_err());
    }

    #[test]
    fn parse_enums() {
        assert_eq!("both".parse::<RuleChoice>().unwrap(), RuleChoice::Both);
        assert_eq!(
            "legendre".parse::<RuleChoice>().unwrap(),
            RuleChoice::Single(QuadratureRule::Legendre2)
        );
        assert_eq!("taylor-green".parse::<Case>().unwrap(), Case::TaylorGreen);
        assert!("tg".parse::<Case>().is_err());
    }

    #[test]
    fn small_study_runs() {
        let cfg = RunConfig {
            case: Case::TaylorGreen,
            study: Some(vec![4, 8]),
            rule: RuleChoice::Both,
            ..Default::default()
        };
        let tables = run_convergence_study(&cfg).unwrap();
        assert_eq!(tables.len(), 2);
        assert_eq!(tables[0].rows.len(), 2);
        assert!(tables[0].rows[0].order_inf.is_none());
        assert!(tables[0].rows[1].order_inf.is_some());
    }
}
