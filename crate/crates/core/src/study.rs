//! Convergence-study harness: flat TOML configuration, p-, h- and hp-sweeps,
//! CSV tables and plot-ready data files.
//!
//! # Output schema
//!
//! `study.csv` has one row per sweep point with the columns
//!
//! | column | meaning |
//! |---|---|
//! | `sweep` | `p`, `h` or `hp` |
//! | `param` | swept value: W for p and hp, brick size (box domains) or layer count (singular domains) for h |
//! | `degree` | degree cap W |
//! | `layers` | geometric layers N; on box domains the hp split factor, otherwise unused |
//! | `elements` | number of elements, corner elements included |
//! | `dof` | degrees of freedom |
//! | `iterations` | PCG iterations |
//! | `status` | `converged`, `max-iter` or `breakdown` |
//! | `rel_error_percent` | relative H¹ error in percent, 17 significant digits |
//! | `functional_final` | value of the least-squares functional at the solution |
//! | `rel_error_display` | the error in six-digit `0.dddddde±xx` form |
//!
//! Wall-clock times go to `timing.csv` (`param,wall_time`), which keeps
//! `study.csv` byte-identical between runs of the same configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::functional::Discretization;
use crate::mesh::{build_mesh, Domain, Frame, Mesh, MeshSpec};
use crate::precond::condition_number_study;
use crate::problems::{catalog, EllipticProblem, Geometry};
use crate::solver::{pcg_solve, PcgOptions, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    P,
    H,
    Hp,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::P => "p",
            SweepKind::H => "h",
            SweepKind::Hp => "hp",
        }
    }
}

/// A study configuration. Every key except `problem` has a default.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub problem: String,
    pub sweep: SweepKind,
    /// W values for p- and hp-sweeps, brick sizes or layer counts for h-sweeps.
    pub values: Vec<f64>,
    /// Degree cap for h-sweeps and single solves.
    pub degree: usize,
    /// Geometric layers for p-sweeps and single solves on singular domains.
    pub layers: usize,
    /// Brick size for box domains; the problem's own size when absent.
    pub h: Option<f64>,
    pub mu_v: f64,
    pub mu_e: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// Angular panel count of singular neighborhoods (the problem's default when absent).
    pub theta_panels: Option<usize>,
    /// hp coupling: N = max(1, round(hp_ratio · W) + hp_offset).
    pub hp_ratio: f64,
    pub hp_offset: i64,
    pub tol: f64,
    pub max_iter: usize,
    /// Write one residual-history CSV per sweep point.
    pub history: bool,
    pub output: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            problem: String::new(),
            sweep: SweepKind::P,
            values: Vec::new(),
            degree: 4,
            layers: 3,
            h: None,
            mu_v: 0.15,
            mu_e: 0.15,
            mu1: 1.0,
            mu2: 1.0,
            theta_panels: None,
            hp_ratio: 1.0,
            hp_offset: -1,
            tol: 1e-8,
            max_iter: 2000,
            history: false,
            output: None,
        }
    }
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self, need_sweep: bool) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.problem.trim().is_empty() {
            return bad("problem name is empty".into());
        }
        catalog(&self.problem).map_err(|e| Error::Config(e.to_string()))?;
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.degree == 0 || self.layers == 0 {
            return bad("degree and layers must be at least 1".into());
        }
        if !(self.hp_ratio > 0.0) {
            return bad(format!("hp_ratio must be positive, got {}", self.hp_ratio));
        }
        if need_sweep {
            if self.values.is_empty() {
                return bad("sweep list `values` is empty".into());
            }
            for &v in &self.values {
                let integral = v.fract() == 0.0 && v >= 1.0;
                let ok = match self.sweep {
                    SweepKind::P | SweepKind::Hp => integral,
                    SweepKind::H => v > 0.0 && (self.is_box()? || integral),
                };
                if !ok {
                    return bad(format!("invalid {}-sweep value {v}", self.sweep.name()));
                }
            }
        }
        for p in self.points()? {
            self.mesh_spec(&p)?.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    fn is_box(&self) -> Result<bool> {
        Ok(matches!(catalog(&self.problem)?.geometry, Geometry::Boxes { .. }))
    }

    fn hp_layers(&self, w: usize) -> usize {
        ((self.hp_ratio * w as f64).round() as i64 + self.hp_offset).max(1) as usize
    }

    /// The sweep points described by the configuration.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let boxes = self.is_box()?;
        Ok(self
            .values
            .iter()
            .map(|&v| match self.sweep {
                SweepKind::P => SweepPoint { param: v, degree: v as usize, layers: self.layers, h: self.h },
                SweepKind::H if boxes => SweepPoint { param: v, degree: self.degree, layers: self.layers, h: Some(v) },
                SweepKind::H => SweepPoint { param: v, degree: self.degree, layers: v as usize, h: None },
                SweepKind::Hp => {
                    let w = v as usize;
                    let n = self.hp_layers(w);
                    // Box domains refine by splitting the default bricks n times per direction.
                    let h = if boxes { Some(self.h.unwrap_or(self.base_h()) / n as f64) } else { None };
                    SweepPoint { param: v, degree: w, layers: n, h }
                }
            })
            .collect())
    }

    fn base_h(&self) -> f64 {
        match catalog(&self.problem).map(|p| p.geometry) {
            Ok(Geometry::Boxes { h, .. }) => h,
            _ => 1.0,
        }
    }

    /// The single point used by `solve` and `mesh-dump`.
    pub fn single_point(&self) -> SweepPoint {
        SweepPoint { param: self.degree as f64, degree: self.degree, layers: self.layers, h: self.h }
    }

    pub fn mesh_spec(&self, point: &SweepPoint) -> Result<MeshSpec> {
        let problem = catalog(&self.problem)?;
        let mut domain = problem.geometry.domain(point.h)?;
        if let Some(n) = self.theta_panels {
            match &mut domain {
                Domain::Vertex { theta_panels, .. }
                | Domain::Edge { theta_panels, .. }
                | Domain::VertexEdge { theta_panels, .. } => *theta_panels = n,
                Domain::Bricks(_) => {}
            }
        }
        let mut spec = MeshSpec::new(domain, point.layers, point.degree);
        spec.mu_v = self.mu_v;
        spec.mu_e = self.mu_e;
        spec.mu1 = self.mu1;
        spec.mu2 = self.mu2;
        Ok(spec)
    }

    pub fn mesh(&self, point: &SweepPoint) -> Result<Mesh> {
        build_mesh(&self.mesh_spec(point)?)
    }

    pub fn pcg_options(&self) -> PcgOptions {
        PcgOptions { tol: self.tol, max_iter: self.max_iter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub param: f64,
    pub degree: usize,
    pub layers: usize,
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Converged,
    MaxIter,
    Breakdown,
}

impl RowStatus {
    pub fn name(self) -> &'static str {
        match self {
            RowStatus::Converged => "converged",
            RowStatus::MaxIter => "max-iter",
            RowStatus::Breakdown => "breakdown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub sweep: SweepKind,
    pub point: SweepPoint,
    pub elements: usize,
    pub dof: usize,
    pub iterations: usize,
    pub status: RowStatus,
    /// NaN when the problem has no exact solution or the solve broke down.
    pub rel_error_percent: f64,
    pub functional_final: f64,
    pub wall_time: f64,
    pub residual_history: Vec<f64>,
}

impl StudyRow {
    pub fn converged(&self) -> bool {
        self.status == RowStatus::Converged
    }
}

/// Solves one sweep point. Solver breakdown is reported in the row; mesh and
/// configuration problems are errors.
pub fn solve_point(
    cfg: &StudyConfig,
    problem: &EllipticProblem,
    point: &SweepPoint,
    sweep: SweepKind,
) -> Result<StudyRow> {
    let start = Instant::now();
    let mesh = cfg.mesh(point)?;
    let elements = mesh.elements.len();
    let dof = mesh.dof_bookkeeping();
    let disc = Discretization::new(problem, mesh)?;
    let row = |status, rep: Option<SolveReport>| {
        let (iterations, err, fun, hist) = match rep {
            Some(r) => (r.iterations, r.rel_error_h1.unwrap_or(f64::NAN), r.functional_final, r.residual_history),
            None => (0, f64::NAN, f64::NAN, Vec::new()),
        };
        StudyRow {
            sweep,
            point: *point,
            elements,
            dof,
            iterations,
            status,
            rel_error_percent: err,
            functional_final: fun,
            wall_time: start.elapsed().as_secs_f64(),
            residual_history: hist,
        }
    };
    match pcg_solve(problem, &disc, &cfg.pcg_options()) {
        Ok((_, rep)) => {
            let status = if rep.converged { RowStatus::Converged } else { RowStatus::MaxIter };
            Ok(row(status, Some(rep)))
        }
        Err(Error::Breakdown { .. }) => Ok(row(RowStatus::Breakdown, None)),
        Err(e) => Err(e),
    }
}

/// Runs every sweep point in order. The configuration is validated first.
pub fn run_study(cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    cfg.validate(true)?;
    let problem = catalog(&cfg.problem)?;
    cfg.points()?.iter().map(|p| solve_point(cfg, &problem, p, cfg.sweep)).collect()
}

/// Six-digit scientific notation with a leading zero mantissa, `0.204875E+01`.
pub fn display_sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.000000E+00".into();
    }
    let s = format!("{:.5e}", x.abs());
    let (mant, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let e = exp + 1;
    let sign = if x < 0.0 { "-" } else { "" };
    let esign = if e < 0 { '-' } else { '+' };
    format!("{sign}0.{digits}E{esign}{:02}", e.abs())
}

/// Full-precision float: 17 significant digits.
pub fn full_precision(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn param_text(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{}", x as i64)
    } else {
        full_precision(x)
    }
}

pub const STUDY_HEADER: [&str; 11] = [
    "sweep",
    "param",
    "degree",
    "layers",
    "elements",
    "dof",
    "iterations",
    "status",
    "rel_error_percent",
    "functional_final",
    "rel_error_display",
];

pub fn write_study_csv<W: std::io::Write>(rows: &[StudyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STUDY_HEADER)?;
    for r in rows {
        w.write_record([
            r.sweep.name().to_string(),
            param_text(r.point.param),
            r.point.degree.to_string(),
            r.point.layers.to_string(),
            r.elements.to_string(),
            r.dof.to_string(),
            r.iterations.to_string(),
            r.status.name().to_string(),
            full_precision(r.rel_error_percent),
            full_precision(r.functional_final),
            display_sci(r.rel_error_percent),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timing_csv<W: std::io::Write>(rows: &[StudyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["param", "wall_time"])?;
    for r in rows {
        w.write_record([param_text(r.point.param), format!("{:.6}", r.wall_time)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_history_csv<W: std::io::Write>(history: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "residual"])?;
    for (i, r) in history.iter().enumerate() {
        w.write_record([i.to_string(), full_precision(*r)])?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares line through `(x, y)`: `(slope, intercept, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, my - slope * mx, r2))
}

/// Exponent `1/d` of the expected `exp(−b·DOF^{1/d})` error law.
pub fn dof_exponent(frame: Frame) -> f64 {
    match frame {
        Frame::Regular => 1.0 / 3.0,
        Frame::Vertex | Frame::Edge => 0.25,
        Frame::VertexEdge => 0.2,
    }
}

/// A two-column plot series with its straight-line fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub x_label: String,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<(f64, f64, f64)>,
}

impl PlotSeries {
    pub fn render(&self) -> String {
        let mut s = format!("# {} log10_rel_error_percent\n", self.x_label);
        if let Some((a, b, r2)) = self.fit {
            let _ = writeln!(
                s,
                "# fit slope={} intercept={} r2={}",
                full_precision(a),
                full_precision(b),
                full_precision(r2)
            );
        }
        for (x, y) in &self.points {
            let _ = writeln!(s, "{} {}", full_precision(*x), full_precision(*y));
        }
        s
    }
}

/// Plot data: log10 error against W and against `DOF^{1/d}`. Rows without a
/// finite positive error are skipped.
pub fn emit_plot_data(rows: &[StudyRow], frame: Frame) -> [PlotSeries; 2] {
    let good: Vec<&StudyRow> =
        rows.iter().filter(|r| r.rel_error_percent.is_finite() && r.rel_error_percent > 0.0).collect();
    let k = dof_exponent(frame);
    let series = |label: String, xs: Vec<f64>| {
        let points: Vec<(f64, f64)> = xs.iter().zip(&good).map(|(x, r)| (*x, r.rel_error_percent.log10())).collect();
        let (px, py): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        PlotSeries { x_label: label, fit: linear_fit(&px, &py), points }
    };
    let denom = (1.0 / k).round() as i64;
    [
        series("W".into(), good.iter().map(|r| r.point.degree as f64).collect()),
        series(format!("dof^(1/{denom})"), good.iter().map(|r| (r.dof as f64).powf(k)).collect()),
    ]
}

/// Writes `study.csv`, `timing.csv`, the two plot files and, when enabled,
/// one residual history per point. Returns the paths written.
pub fn write_study_outputs(cfg: &StudyConfig, rows: &[StudyRow], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("study.csv");
    write_study_csv(rows, fs::File::create(&path)?)?;
    written.push(path);
    let path = dir.join("timing.csv");
    write_timing_csv(rows, fs::File::create(&path)?)?;
    written.push(path);
    let frame = catalog(&cfg.problem)?.frame();
    let [by_w, by_dof] = emit_plot_data(rows, frame);
    for (name, s) in [("error_vs_degree.dat", by_w), ("error_vs_dof.dat", by_dof)] {
        let path = dir.join(name);
        fs::write(&path, s.render())?;
        written.push(path);
    }
    if cfg.history {
        for r in rows {
            let path = dir.join(format!("history_{}.csv", param_text(r.point.param)));
            write_history_csv(&r.residual_history, fs::File::create(&path)?)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Condition numbers of the preconditioned single-element form, `(W, κ)`.
pub fn condition_rows(degrees: &[usize]) -> Result<Vec<(usize, f64)>> {
    degrees.iter().map(|&w| Ok((w, condition_number_study(w)?))).collect()
}

pub fn write_condition_csv<W: std::io::Write>(rows: &[(usize, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["W", "kappa", "kappa_display"])?;
    for (d, k) in rows {
        w.write_record([d.to_string(), full_precision(*k), format!("{k:.6}")])?;
    }
    w.flush()?;
    Ok(())
}
