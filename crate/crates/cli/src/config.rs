use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;
use lagmesh::fields::Field;
use lagmesh::integrator::{Integrator, StepMode};
use lagmesh::mesh::Rect;
use lagmesh::nodal_solver::BoundaryMode;
use lagmesh::study::{Case, RuleChoice, RunConfig};
use serde::Deserialize;

use crate::{CliError, Result};

/// Environment fallback for the output directory.
pub const OUT_ENV: &str = "LAGMESH_OUT";

/// Fourth-order Lagrangian mesh motion: single runs, refinement studies and
/// correction-slope checks.
#[derive(Debug, Default, Parser)]
#[command(name = "lagmesh", version)]
pub struct Args {
    /// isentropic, taylor-green or custom
    #[arg(long, value_parser = Case::from_str)]
    pub case: Option<Case>,

    /// Cells per side
    #[arg(long)]
    pub nx: Option<usize>,

    /// lobatto, legendre or both
    #[arg(long, value_parser = RuleChoice::from_str)]
    pub rule: Option<RuleChoice>,

    #[arg(long)]
    pub t_final: Option<f64>,

    #[arg(long)]
    pub cfl: Option<f64>,

    /// rk4 or euler
    #[arg(long, value_parser = Integrator::from_str)]
    pub integrator: Option<Integrator>,

    /// free, slide or pin (default depends on the case)
    #[arg(long, value_parser = BoundaryMode::from_str)]
    pub boundary: Option<BoundaryMode>,

    /// simple or full
    #[arg(long, value_parser = StepMode::from_str)]
    pub step_mode: Option<StepMode>,

    /// Comma-separated resolutions, each double the previous
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub study: Option<Vec<usize>>,

    /// Write a mesh snapshot every N steps (0 disables)
    #[arg(long)]
    pub snapshot_every: Option<u64>,

    /// Output directory (falls back to $LAGMESH_OUT, then ./out)
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Fit the correction slopes instead of advancing the mesh
    #[arg(long)]
    pub verify_theorem1: bool,

    /// Domain x0,x1,y0,y1 for the custom case
    #[arg(long, value_parser = parse_domain, allow_hyphen_values = true)]
    pub domain: Option<Rect>,

    /// Velocity field for the custom case, e.g. rotation or affine:a,b,c,d,e,f
    #[arg(long, value_parser = Field::from_str)]
    pub field: Option<Field>,

    /// TOML file with the same keys (snake_case); flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn parse_domain(s: &str) -> std::result::Result<Rect, String> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    match v[..] {
        [x0, x1, y0, y1] => Ok(Rect::new(x0, x1, y0, y1)),
        _ => Err(format!("expected x0,x1,y0,y1, got {} numbers", v.len())),
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub case: Option<String>,
    pub nx: Option<usize>,
    pub rule: Option<String>,
    pub t_final: Option<f64>,
    pub cfl: Option<f64>,
    pub integrator: Option<String>,
    pub boundary: Option<String>,
    pub step_mode: Option<String>,
    pub study: Option<Vec<usize>>,
    pub snapshot_every: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub verify_theorem1: Option<bool>,
    pub domain: Option<[f64; 4]>,
    pub field: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::ConfigFile {
            path: path.to_owned(),
            message: e.message().to_owned(),
        })
    }
}

fn parse_key<T: FromStr>(key: &str, value: &Option<String>) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .as_deref()
        .map(|s| {
            s.parse::<T>().map_err(|e| CliError::BadValue {
                key: key.to_owned(),
                message: e.to_string(),
            })
        })
        .transpose()
}

/// Defaults, then the config file, then flags. `env_out` is used for the
/// output directory only when neither the file nor the flags set it.
pub fn resolve(args: Args, env_out: Option<PathBuf>) -> Result<RunConfig> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut cfg = RunConfig::default();

    if let Some(v) = parse_key("case", &file.case)? {
        cfg.case = v;
    }
    if let Some(v) = parse_key("rule", &file.rule)? {
        cfg.rule = v;
    }
    if let Some(v) = parse_key("integrator", &file.integrator)? {
        cfg.integrator = v;
    }
    if let Some(v) = parse_key("step_mode", &file.step_mode)? {
        cfg.step_mode = v;
    }
    cfg.boundary = parse_key("boundary", &file.boundary)?;
    cfg.field = parse_key("field", &file.field)?;
    cfg.domain = file.domain.map(|[x0, x1, y0, y1]| Rect::new(x0, x1, y0, y1));
    cfg.nx = file.nx.unwrap_or(cfg.nx);
    cfg.t_final = file.t_final.unwrap_or(cfg.t_final);
    cfg.cfl = file.cfl.unwrap_or(cfg.cfl);
    cfg.study = file.study;
    cfg.snapshot_every = file.snapshot_every.unwrap_or(cfg.snapshot_every);
    cfg.verify_theorem1 = file.verify_theorem1.unwrap_or(false);

    cfg.case = args.case.unwrap_or(cfg.case);
    cfg.nx = args.nx.unwrap_or(cfg.nx);
    cfg.rule = args.rule.unwrap_or(cfg.rule);
    cfg.t_final = args.t_final.unwrap_or(cfg.t_final);
    cfg.cfl = args.cfl.unwrap_or(cfg.cfl);
    cfg.integrator = args.integrator.unwrap_or(cfg.integrator);
    cfg.boundary = args.boundary.or(cfg.boundary);
    cfg.step_mode = args.step_mode.unwrap_or(cfg.step_mode);
    cfg.study = args.study.or(cfg.study);
    cfg.snapshot_every = args.snapshot_every.unwrap_or(cfg.snapshot_every);
    cfg.verify_theorem1 |= args.verify_theorem1;
    cfg.domain = args.domain.or(cfg.domain);
    cfg.field = args.field.or(cfg.field);
    cfg.output_dir = args
        .out
        .or(file.output_dir)
        .or(env_out)
        .unwrap_or(cfg.output_dir);

    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_parser() {
        assert_eq!(parse_domain("0,1,-2,2").unwrap(), Rect::new(0.0, 1.0, -2.0, 2.0));
        assert!(parse_domain("0,1,2").is_err());
    }

    #[test]
    fn file_keys_are_checked() {
        let ok: FileConfig = toml::from_str("case = \"taylor-green\"\nstudy = [25, 50]").unwrap();
        assert_eq!(ok.study, Some(vec![25, 50]));
        assert!(toml::from_str::<FileConfig>("resolution = 4").is_err());
    }

    #[test]
    fn bad_file_value_names_the_key() {
        let e = parse_key::<Case>("case", &Some("vortex".into())).unwrap_err();
        assert!(e.to_string().contains("'case'"));
    }
}
