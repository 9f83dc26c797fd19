//! The five command-line runs as library functions. Each writes its files
//! into an output directory and returns a short summary. Outputs depend
//! only on the settings, so re-running reproduces them byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::inversion::{levenberg_marquardt, InversionResult, TikhonovProblem};
use crate::pde::{self, ForwardDiagnostics, StateTrajectory};
use crate::regselect::{self, lcurve_corner, lcurve_sweep, rate_study, RateStudyConfig};
use crate::sensitivity::{concentration_range, l2_distance, ConcentrationInterval, SensitivityFunction};
use crate::synth::{self, add_noise, NoisyData};

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    /// The optimizer gave up without converging somewhere in the run.
    pub stagnated: bool,
}

fn write(out: &Path, name: &str, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let p = out.join(name);
    std::fs::write(&p, text)?;
    files.push(p);
    Ok(())
}

/// Forward solve on the main grid with the truth sensitivity.
pub fn cmd_forward(s: &Settings, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out)?;
    let a = s.require_truth()?.build()?;
    let traj = pde::solve_forward_with(
        &s.u0.sample(&s.grid),
        &s.c0.sample(&s.grid),
        &s.params,
        &a,
        &s.grid,
        &s.solver,
        None,
    )?;
    let diag = ForwardDiagnostics::compute(&traj, &s.params);
    let c0_min = traj.frame(0).c.iter().copied().fold(f64::INFINITY, f64::min);
    let mut summary = String::new();
    let _ = writeln!(summary, "mass_drift = {:.6e}", diag.mass_drift);
    let _ = writeln!(summary, "min_u = {:.14e}", diag.min_u);
    let _ = writeln!(summary, "min_c = {:.14e}", diag.min_c);
    let _ = writeln!(summary, "c_lower_bound_at_T = {:.14e}", c0_min * (-s.params.mu * s.grid.t_final()).exp());
    let _ = writeln!(summary, "min_c_over_bound = {:.14e}", diag.c_bound_ratio);
    let _ = writeln!(summary, "max_u_T = {:.14e}", traj.last().u.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let _ = writeln!(summary, "invariants_ok = {}", diag.ok());
    let mut files = Vec::new();
    write(out, "trajectory.csv", &traj.to_csv_string(), &mut files)?;
    write(out, "summary.txt", &summary, &mut files)?;
    Ok(Outcome { files, summary, stagnated: false })
}

/// Fine-grid truth restricted to the main grid, without noise.
pub fn clean_measurements(s: &Settings) -> Result<StateTrajectory> {
    let a = s.require_truth()?.build()?;
    synth::synthesize_with(&a, &s.params, &s.fine, &s.grid, |x| s.u0.value(x), |x| s.c0.value(x), &s.fine_solver)
}

/// Data for the inversion commands: read from `data` if set, otherwise
/// synthesized with the configured noise.
pub fn load_or_make_data(s: &Settings) -> Result<NoisyData> {
    match &s.data {
        Some(p) => {
            let d = NoisyData::read_csv(p)?;
            if d.grid() != &s.grid {
                return Err(Error::DomainMismatch(format!("{} does not live on the configured grid", p.display())));
            }
            Ok(d)
        }
        None => add_noise(&clean_measurements(s)?, s.delta, s.seed),
    }
}

pub fn cmd_make_data(s: &Settings, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out)?;
    let clean = clean_measurements(s)?;
    let range = concentration_range(&clean, 0.0)?;
    let data = add_noise(&clean, s.delta, s.seed)?;
    let mut summary = String::new();
    let _ = writeln!(summary, "delta = {:.14e}", data.delta());
    let _ = writeln!(summary, "seed = {}", data.seed());
    let _ = writeln!(summary, "c_min = {:.14e}", range.lo);
    let _ = writeln!(summary, "c_max = {:.14e}", range.hi);
    let mut files = Vec::new();
    write(out, "data.csv", &data.to_csv_string(), &mut files)?;
    write(out, "summary.txt", &summary, &mut files)?;
    Ok(Outcome { files, summary, stagnated: false })
}

/// Basis interval: configured, or the data's concentration range plus
/// padding.
pub fn basis_interval(s: &Settings, data: &NoisyData) -> Result<ConcentrationInterval> {
    match (s.basis.c_min, s.basis.c_max) {
        (Some(lo), Some(hi)) => Ok(ConcentrationInterval { lo, hi }),
        _ => concentration_range(data.trajectory(), s.basis.padding),
    }
}

/// Inversion problem, prior and initial guess for the given data.
pub fn build_problem(s: &Settings, data: NoisyData, alpha: f64) -> Result<(TikhonovProblem, SensitivityFunction)> {
    let iv = basis_interval(s, &data)?;
    let a_star = s.a_star.on_basis(iv.lo, iv.hi, s.basis.n_basis)?;
    let a0 = match &s.a0 {
        Some(spec) => spec.on_basis(iv.lo, iv.hi, s.basis.n_basis)?,
        None => a_star.clone(),
    };
    let grid = *data.grid();
    let prob = TikhonovProblem::new(data, alpha, a_star, s.params, s.u0.sample(&grid), s.c0.sample(&grid))?
        .with_solver_options(s.solver);
    Ok((prob, a0))
}

fn truth_error_line(s: &Settings, res: &InversionResult, clean: Option<&StateTrajectory>) -> Result<String> {
    let (Some(spec), Some(clean)) = (&s.truth, clean) else { return Ok(String::new()) };
    let truth = spec.build()?;
    let iv = concentration_range(clean, 0.0)?;
    let err = l2_distance(&truth, &res.a_hat, iv.lo, iv.hi, 2000);
    let norm = l2_distance(&truth, &|_: f64| 0.0, iv.lo, iv.hi, 2000);
    Ok(format!(
        "observed_interval = [{:.14e}, {:.14e}]\ntruth_l2_error = {:.14e}\ntruth_rel_l2_error = {:.14e}\n",
        iv.lo,
        iv.hi,
        err,
        err / norm
    ))
}

pub fn cmd_invert(s: &Settings, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out)?;
    let clean = if s.data.is_none() { Some(clean_measurements(s)?) } else { None };
    let data = match &clean {
        Some(c) => add_noise(c, s.delta, s.seed)?,
        None => load_or_make_data(s)?,
    };
    let (delta, seed) = (data.delta(), data.seed());
    let (prob, a0) = build_problem(s, data, s.alpha)?;
    let res = levenberg_marquardt(&prob, &a0, &s.lm)?;
    let mut report = res.report(delta, seed);
    let a = &res.a_hat;
    let _ = writeln!(report, "basis = [{:.14e}, {:.14e}] with {} knots", a.c_min(), a.c_max(), a.n_basis());
    report.push_str(&truth_error_line(s, &res, clean.as_ref())?);
    let mut files = Vec::new();
    write(out, "sensitivity.csv", &a.to_csv_string(), &mut files)?;
    write(out, "report.txt", &report, &mut files)?;
    Ok(Outcome { files, summary: report, stagnated: res.stagnated })
}

pub fn cmd_lcurve(s: &Settings, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out)?;
    let data = load_or_make_data(s)?;
    let (prob, a0) = build_problem(s, data, s.alphas.first().copied().unwrap_or(0.0))?;
    let points = lcurve_sweep(&prob, &a0, &s.alphas, &s.lm, s.sweep)?;
    let mut files = Vec::new();
    let csv = out.join("lcurve.csv");
    regselect::write_lcurve_csv(&points, &csv)?;
    files.push(csv);
    let mut summary = String::new();
    let corner = lcurve_corner(&points);
    match &corner {
        Ok(c) => {
            let _ = writeln!(summary, "corner_alpha = {:.14e}", c.alpha);
            let _ = writeln!(summary, "corner_curvature = {:.14e}", c.curvature);
            let _ = writeln!(summary, "degenerate = {}", c.degenerate);
            if let Some(w) = &c.warning {
                let _ = writeln!(summary, "warning = {w}");
            }
        }
        Err(e) => {
            let _ = writeln!(summary, "corner_error = {e}");
        }
    }
    for p in &points {
        if let Some(e) = &p.error {
            let _ = writeln!(summary, "failed alpha {:e}: {e}", p.alpha);
        }
    }
    for a in regselect::sweep_anomalies(&points, 1e-6) {
        let _ = writeln!(summary, "anomaly: {a}");
    }
    let stagnated = points.iter().any(|p| p.stagnated());
    write(out, "lcurve.gp", &regselect::lcurve_plot_script("lcurve.csv", corner.as_ref().ok().map(|c| c.alpha)), &mut files)?;
    write(out, "corner.txt", &summary, &mut files)?;
    corner?;
    Ok(Outcome { files, summary, stagnated })
}

pub fn cmd_rates(s: &Settings, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out)?;
    let truth = s.require_truth()?.build()?;
    let clean = clean_measurements(s)?;
    let observed = concentration_range(&clean, 0.0)?;
    let (template, a0) = build_problem(s, NoisyData::exact(clean.clone()), 0.0)?;
    let cfg = RateStudyConfig { deltas: s.deltas.clone(), coupling: s.coupling, seeds: s.seeds.clone(), lm: s.lm };
    let study = rate_study(&truth, &clean, &template, &a0, observed, &cfg)?;
    let mut files = Vec::new();
    let csv = out.join("rates.csv");
    regselect::write_rates_csv(&study.records, &csv)?;
    files.push(csv);
    write(out, "rates.gp", &regselect::rates_plot_script("rates.csv", &study), &mut files)?;
    let mut summary = String::new();
    let _ = writeln!(summary, "misfit2_slope = {:.6}", study.misfit_slope);
    let _ = writeln!(summary, "param_error_slope = {:.6}", study.error_slope);
    for (d, seed, e) in &study.excluded {
        let _ = writeln!(summary, "excluded delta {d:e} seed {seed}: {e}");
    }
    write(out, "slopes.txt", &summary, &mut files)?;
    Ok(Outcome { files, summary, stagnated: false })
}
