use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lagmesh::diagnostics::{CorrectionSlopes, Slope};
use lagmesh::edge_quadrature::QuadratureRule;
use lagmesh::study::{self, RunConfig, RunOutcome};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{CliError, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

pub fn snapshot_name(cfg: &RunConfig, rule: QuadratureRule, step: u64) -> String {
    format!("{}_n{}_{}_step{step:06}.mesh", cfg.case, cfg.nx, rule)
}

pub fn summary_name(cfg: &RunConfig, rule: QuadratureRule) -> String {
    format!("{}_n{}_{}_summary.json", cfg.case, cfg.nx, rule)
}

pub fn table_stem(cfg: &RunConfig, rule: QuadratureRule) -> String {
    format!("{}_{}_table", cfg.case, rule)
}

pub fn theorem1_name(cfg: &RunConfig, rule: QuadratureRule) -> String {
    format!("{}_{}_theorem1.json", cfg.case, rule)
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub case: String,
    pub rule: String,
    pub nx: usize,
    pub h: f64,
    pub integrator: String,
    pub boundary: String,
    pub step_mode: String,
    pub cfl: f64,
    pub t_final: f64,
    pub t: f64,
    pub steps: u64,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub total_mass: f64,
    pub l_inf: f64,
    pub l2: f64,
    pub l2_normalized: f64,
}

impl Summary {
    fn new(cfg: &RunConfig, rule: QuadratureRule, o: &RunOutcome) -> Self {
        let dts = o.diagnostics.steps.iter().map(|s| s.dt);
        Self {
            case: cfg.case.to_string(),
            rule: rule.to_string(),
            nx: cfg.nx,
            h: o.report.h,
            integrator: cfg.integrator.to_string(),
            boundary: cfg.boundary().to_string(),
            step_mode: cfg.step_mode.to_string(),
            cfl: cfg.cfl,
            t_final: cfg.t_final,
            t: o.state.t,
            steps: o.state.step_count,
            dt_min: dts.clone().reduce(f64::min),
            dt_max: dts.reduce(f64::max),
            total_mass: o.state.total_mass(),
            l_inf: o.report.l_inf,
            l2: o.report.l2,
            l2_normalized: o.report.l2_normalized,
        }
    }
}

fn slope_json(s: Slope) -> Value {
    match s {
        Slope::Exact => json!("exact"),
        Slope::Fitted(v) => json!(v),
    }
}

fn slopes_json(cfg: &RunConfig, rule: QuadratureRule, s: &CorrectionSlopes) -> Value {
    let samples: Vec<Value> = s
        .samples
        .iter()
        .map(|m| {
            json!({
                "h": m.h,
                "magnitude": m.magnitude,
                "smoothness": m.smoothness,
                "high_order": m.high_order,
            })
        })
        .collect();
    json!({
        "case": cfg.case.to_string(),
        "rule": rule.to_string(),
        "samples": samples,
        "slopes": {
            "magnitude": slope_json(s.magnitude),
            "smoothness": slope_json(s.smoothness),
            "high_order": slope_json(s.high_order),
        },
    })
}

/// Runs whatever `cfg` asks for, writes its files into `cfg.output_dir`
/// and prints a human-readable digest to `log`. Returns the written paths
/// in creation order.
///
/// With `study` set a refinement table is produced per rule; with
/// `verify_theorem1` the correction slopes are fitted; otherwise one run
/// per rule is made at `nx`.
pub fn execute(cfg: &RunConfig, log: &mut impl Write) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let say = |log: &mut dyn Write, s: String| writeln!(log, "{s}").map_err(io_err(Path::new("<stdout>")));

    if cfg.study.is_some() {
        for table in study::run_convergence_study(cfg)? {
            let stem = table_stem(cfg, table.rule);
            let csv = dir.join(format!("{stem}.csv"));
            let txt = dir.join(format!("{stem}.txt"));
            write_file(&csv, &table.to_csv())?;
            write_file(&txt, &table.to_string())?;
            say(log, table.to_string())?;
            written.extend([csv, txt]);
        }
    }

    if cfg.verify_theorem1 {
        for (rule, slopes) in study::verify_theorem1(cfg)? {
            let path = dir.join(theorem1_name(cfg, rule));
            let v = slopes_json(cfg, rule, &slopes);
            write_file(&path, &(serde_json::to_string_pretty(&v)? + "\n"))?;
            say(
                log,
                format!(
                    "{rule}: correction slopes {} {} {}",
                    slopes.magnitude, slopes.smoothness, slopes.high_order
                ),
            )?;
            written.push(path);
        }
    }

    if cfg.study.is_none() && !cfg.verify_theorem1 {
        for rule in cfg.rule.rules() {
            let mut snaps = Vec::new();
            let outcome = study::run_single(cfg, cfg.nx, rule, |state| {
                let path = dir.join(snapshot_name(cfg, rule, state.step_count));
                let mut w = BufWriter::new(File::create(&path)?);
                state.mesh.write_snapshot(&mut w)?;
                w.flush()?;
                snaps.push(path);
                Ok(())
            })?;
            written.extend(snaps);
            let summary = Summary::new(cfg, rule, &outcome);
            let path = dir.join(summary_name(cfg, rule));
            write_file(&path, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
            say(
                log,
                format!(
                    "{rule}: t={} steps={} Linf={:.4e} L2={:.4e}",
                    summary.t, summary.steps, summary.l_inf, summary.l2_normalized
                ),
            )?;
            written.push(path);
        }
    }
    Ok(written)
}
