//! Choice of the regularization parameter by the L-curve, and the empirical
//! convergence-rate study for α proportional to δ.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inversion::{levenberg_marquardt, InversionResult, LmConfig, TikhonovProblem};
use crate::pde::StateTrajectory;
use crate::sensitivity::{l2_distance, ConcentrationInterval, Sensitivity, SensitivityFunction};
use crate::synth::add_noise;

/// Minimum number of usable points for corner detection.
pub const MIN_CORNER_POINTS: usize = 5;
/// Minimum number of δ values that must survive a rate study.
pub const MIN_RATE_DELTAS: usize = 4;
/// Required spread of the δ values, in decades.
pub const MIN_RATE_DECADES: f64 = 1.5;

/// One inversion on the L-curve.
#[derive(Debug, Clone)]
pub struct LCurvePoint {
    pub alpha: f64,
    /// Square root of the data misfit.
    pub rho: f64,
    /// `|a_hat - a*|_{L²(I)}`.
    pub eta: f64,
    pub result: Option<InversionResult>,
    /// Failure message when the inversion errored; rho and eta are NaN then.
    pub error: Option<String>,
}

impl LCurvePoint {
    fn from_result(alpha: f64, r: Result<InversionResult>) -> Self {
        match r {
            Ok(res) => Self {
                alpha,
                rho: res.residual_norm2.sqrt(),
                eta: res.penalty_norm2.sqrt(),
                result: Some(res),
                error: None,
            },
            Err(e) => Self { alpha, rho: f64::NAN, eta: f64::NAN, result: None, error: Some(e.to_string()) },
        }
    }

    /// Finished without error and with a usable (rho, eta) pair.
    pub fn is_valid(&self) -> bool {
        self.result.is_some() && self.rho.is_finite() && self.eta.is_finite() && self.rho > 0.0 && self.eta > 0.0
    }

    pub fn stagnated(&self) -> bool {
        self.result.as_ref().is_some_and(|r| r.stagnated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// Sequential, each point starting from the previous point's estimate.
    #[default]
    WarmStart,
    /// Every point starts from the initial guess; points run in parallel.
    ColdParallel,
}

fn check_alphas(alphas: &[f64]) -> Result<Vec<f64>> {
    if alphas.is_empty() {
        return Err(Error::InvalidParameter("empty alpha list".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidParameter(format!("alphas must be positive and finite, got {a}")));
    }
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("alphas must be distinct".into()));
    }
    Ok(sorted)
}

/// Invert once per α. Points come back sorted by increasing α; failures are
/// recorded on the point and do not stop the sweep.
///
/// Warm starts run from the largest α down, where the estimate moves
/// gradually away from `a*`.
pub fn lcurve_sweep(
    template: &TikhonovProblem,
    a0: &SensitivityFunction,
    alphas: &[f64],
    cfg: &LmConfig,
    mode: SweepMode,
) -> Result<Vec<LCurvePoint>> {
    let sorted = check_alphas(alphas)?;
    cfg.validate()?;
    let run = |alpha: f64, start: &SensitivityFunction| -> Result<InversionResult> {
        levenberg_marquardt(&template.with_alpha(alpha)?, start, cfg)
    };
    match mode {
        SweepMode::ColdParallel => Ok(sorted.par_iter().map(|&a| LCurvePoint::from_result(a, run(a, a0))).collect()),
        SweepMode::WarmStart => {
            let mut start = a0.clone();
            let mut points = Vec::with_capacity(sorted.len());
            for &alpha in sorted.iter().rev() {
                let p = LCurvePoint::from_result(alpha, run(alpha, &start));
                if let Some(r) = &p.result {
                    start = r.a_hat.clone();
                }
                points.push(p);
            }
            points.reverse();
            Ok(points)
        }
    }
}

/// Violations of the expected ordering along a sweep: eta should not grow
/// and rho should not shrink as α increases. Stagnated and failed points
/// are skipped; `rel_tol` absorbs optimizer noise.
pub fn sweep_anomalies(points: &[LCurvePoint], rel_tol: f64) -> Vec<String> {
    let mut good: Vec<&LCurvePoint> = points.iter().filter(|p| p.is_valid() && !p.stagnated()).collect();
    good.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let mut out = Vec::new();
    for w in good.windows(2) {
        let (p, q) = (w[0], w[1]);
        if q.eta > p.eta * (1.0 + rel_tol) {
            out.push(format!("eta increases from {:e} to {:e} between alpha {:e} and {:e}", p.eta, q.eta, p.alpha, q.alpha));
        }
        if q.rho < p.rho * (1.0 - rel_tol) {
            out.push(format!("rho decreases from {:e} to {:e} between alpha {:e} and {:e}", p.rho, q.rho, p.alpha, q.alpha));
        }
    }
    out
}

/// Result of corner detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Corner {
    pub alpha: f64,
    /// Index into the valid points sorted by α.
    pub index: usize,
    pub curvature: f64,
    /// No point bends toward the corner; `alpha` is then the median.
    pub degenerate: bool,
    pub warning: Option<String>,
}

/// Signed curvature of a polyline at each interior vertex, from centered
/// first and second differences.
pub fn discrete_curvature(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    (1..x.len().saturating_sub(1))
        .map(|i| {
            let (dx, dy) = ((x[i + 1] - x[i - 1]) / 2.0, (y[i + 1] - y[i - 1]) / 2.0);
            let (ddx, ddy) = (x[i + 1] - 2.0 * x[i] + x[i - 1], y[i + 1] - 2.0 * y[i] + y[i - 1]);
            let speed = (dx * dx + dy * dy).powf(1.5);
            if speed > 0.0 { (dx * ddy - dy * ddx) / speed } else { 0.0 }
        })
        .collect()
}

const CURVATURE_EPS: f64 = 1e-10;

/// Corner of the L-curve: the point of largest curvature of
/// `(log rho, log eta)` after sorting by α.
pub fn lcurve_corner(points: &[LCurvePoint]) -> Result<Corner> {
    let mut good: Vec<&LCurvePoint> = points.iter().filter(|p| p.is_valid()).collect();
    if good.len() < MIN_CORNER_POINTS {
        return Err(Error::InsufficientSweep { valid: good.len(), required: MIN_CORNER_POINTS });
    }
    good.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let x: Vec<f64> = good.iter().map(|p| p.rho.ln()).collect();
    let y: Vec<f64> = good.iter().map(|p| p.eta.ln()).collect();
    let kappa = discrete_curvature(&x, &y);
    let (best, kmax) = kappa
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &k)| if k > acc.1 { (i, k) } else { acc });
    if !(kmax > CURVATURE_EPS) {
        let mid = (good.len() - 1) / 2;
        return Ok(Corner {
            alpha: good[mid].alpha,
            index: mid,
            curvature: kmax.max(0.0),
            degenerate: true,
            warning: Some("degenerate L-curve: no positive curvature, returning median alpha".into()),
        });
    }
    let index = best + 1;
    Ok(Corner { alpha: good[index].alpha, index, curvature: kmax, degenerate: false, warning: None })
}

pub fn write_lcurve_csv(points: &[LCurvePoint], path: &Path) -> Result<()> {
    let mut s = String::from("alpha,rho,eta\n");
    for p in points {
        let _ = writeln!(s, "{:.14e},{:.14e},{:.14e}", p.alpha, p.rho, p.eta);
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// gnuplot script drawing the L-curve from `csv_name` (relative to the
/// script's directory).
pub fn lcurve_plot_script(csv_name: &str, corner: Option<f64>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set xlabel 'rho (data misfit)'");
    let _ = writeln!(s, "set ylabel 'eta (|a - a*|)'");
    let _ = writeln!(s, "set terminal pngcairo size 800,600");
    let _ = writeln!(s, "set output 'lcurve.png'");
    if let Some(a) = corner {
        let _ = writeln!(s, "set title 'L-curve, corner at alpha = {a:.3e}'");
    }
    let _ = writeln!(s, "plot '{csv_name}' every ::1 using 2:3 with linespoints title 'L-curve'");
    s
}

/// One (δ, seed) cell of a rate study.
#[derive(Debug, Clone, PartialEq)]
pub struct RateStudyRecord {
    pub delta: f64,
    pub alpha: f64,
    pub misfit2: f64,
    pub param_error: f64,
    pub seed: u64,
    /// Every accepted step lowered the cost.
    pub cost_monotone: bool,
}

/// Inputs of a rate study apart from the truth and the clean data.
#[derive(Debug, Clone)]
pub struct RateStudyConfig {
    pub deltas: Vec<f64>,
    /// α = coupling · δ.
    pub coupling: f64,
    pub seeds: Vec<u64>,
    pub lm: LmConfig,
}

impl RateStudyConfig {
    pub fn new(deltas: Vec<f64>, coupling: f64, seeds: Vec<u64>) -> Self {
        Self { deltas, coupling, seeds, lm: LmConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::RateStudy("every delta must be positive and finite".into()));
        }
        if self.deltas.len() < MIN_RATE_DELTAS {
            return Err(Error::RateStudy(format!(
                "need at least {MIN_RATE_DELTAS} delta values, got {}",
                self.deltas.len()
            )));
        }
        let (lo, hi) = self.deltas.iter().fold((f64::INFINITY, 0.0f64), |(l, h), d| (l.min(*d), h.max(*d)));
        if (hi / lo).log10() < MIN_RATE_DECADES - 1e-12 {
            return Err(Error::RateStudy(format!("deltas span {:.2} decades, need {MIN_RATE_DECADES}", (hi / lo).log10())));
        }
        if self.seeds.is_empty() {
            return Err(Error::RateStudy("no seeds".into()));
        }
        if !(self.coupling > 0.0 && self.coupling.is_finite()) {
            return Err(Error::RateStudy(format!("coupling must be positive, got {}", self.coupling)));
        }
        self.lm.validate()
    }
}

#[derive(Debug, Clone)]
pub struct RateStudy {
    pub records: Vec<RateStudyRecord>,
    /// Cells whose inversion failed: (δ, seed, message).
    pub excluded: Vec<(f64, u64, String)>,
    /// Least-squares slope of the seed-averaged log misfit² against log δ.
    pub misfit_slope: f64,
    /// Same for log of the parameter error.
    pub error_slope: f64,
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// For every (δ, seed): add noise to `clean`, invert with α = coupling·δ
/// starting from `a0`, and measure `|truth - a_hat|` over `interval`.
/// Errors are averaged geometrically over seeds before fitting slopes.
/// `template` supplies everything but the data and α.
pub fn rate_study(
    truth: &dyn Sensitivity,
    clean: &StateTrajectory,
    template: &TikhonovProblem,
    a0: &SensitivityFunction,
    interval: ConcentrationInterval,
    cfg: &RateStudyConfig,
) -> Result<RateStudy> {
    cfg.validate()?;
    let cells: Vec<(f64, u64)> =
        cfg.deltas.iter().flat_map(|&d| cfg.seeds.iter().map(move |&s| (d, s))).collect();
    let outcomes: Vec<Result<RateStudyRecord>> = cells
        .par_iter()
        .map(|&(delta, seed)| {
            let alpha = cfg.coupling * delta;
            let data = add_noise(clean, delta, seed)?;
            let prob = template.with_data(data)?.with_alpha(alpha)?;
            let res = levenberg_marquardt(&prob, a0, &cfg.lm)?;
            if res.stagnated {
                return Err(Error::Numerical("optimizer stagnated".into()));
            }
            let param_error = l2_distance(truth, &res.a_hat, interval.lo, interval.hi, 2000);
            let cost_monotone = res.cost_history.windows(2).all(|w| w[1] <= w[0]);
            Ok(RateStudyRecord { delta, alpha, misfit2: res.residual_norm2, param_error, seed, cost_monotone })
        })
        .collect();

    let mut records = Vec::new();
    let mut excluded = Vec::new();
    for ((delta, seed), o) in cells.into_iter().zip(outcomes) {
        match o {
            Ok(r) => records.push(r),
            Err(e) => excluded.push((delta, seed, e.to_string())),
        }
    }

    let mut lx = Vec::new();
    let mut lm = Vec::new();
    let mut le = Vec::new();
    for &d in &cfg.deltas {
        let rs: Vec<&RateStudyRecord> = records.iter().filter(|r| r.delta == d).collect();
        if rs.is_empty() || rs.iter().any(|r| !(r.misfit2 > 0.0 && r.param_error > 0.0)) {
            continue;
        }
        let n = rs.len() as f64;
        lx.push(d.ln());
        lm.push(rs.iter().map(|r| r.misfit2.ln()).sum::<f64>() / n);
        le.push(rs.iter().map(|r| r.param_error.ln()).sum::<f64>() / n);
    }
    if lx.len() < MIN_RATE_DELTAS {
        return Err(Error::InsufficientSweep { valid: lx.len(), required: MIN_RATE_DELTAS });
    }
    Ok(RateStudy { misfit_slope: fit_slope(&lx, &lm), error_slope: fit_slope(&lx, &le), records, excluded })
}

pub fn write_rates_csv(records: &[RateStudyRecord], path: &Path) -> Result<()> {
    let mut s = String::from("delta,alpha,misfit2,param_error,seed\n");
    for r in records {
        let _ = writeln!(s, "{:.14e},{:.14e},{:.14e},{:.14e},{}", r.delta, r.alpha, r.misfit2, r.param_error, r.seed);
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// gnuplot script for the two log-log rate plots, with reference slopes 2
/// and 1/2 anchored at the smallest δ.
pub fn rates_plot_script(csv_name: &str, study: &RateStudy) -> String {
    let d0 = study.records.iter().map(|r| r.delta).fold(f64::INFINITY, f64::min);
    let m0 = study.records.iter().filter(|r| r.delta == d0).map(|r| r.misfit2).fold(f64::INFINITY, f64::min);
    let e0 = study.records.iter().filter(|r| r.delta == d0).map(|r| r.param_error).fold(f64::INFINITY, f64::min);
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set xlabel 'delta'");
    let _ = writeln!(s, "set terminal pngcairo size 1200,500");
    let _ = writeln!(s, "set output 'rates.png'");
    let _ = writeln!(s, "set multiplot layout 1,2");
    let _ = writeln!(s, "set title 'misfit^2 (fitted slope {:.3})'", study.misfit_slope);
    let _ = writeln!(
        s,
        "plot '{csv_name}' every ::1 using 1:3 with points title 'misfit^2', {m0:.6e}*(x/{d0:.6e})**2 title 'slope 2'"
    );
    let _ = writeln!(s, "set title 'parameter error (fitted slope {:.3})'", study.error_slope);
    let _ = writeln!(
        s,
        "plot '{csv_name}' every ::1 using 1:4 with points title 'error', {e0:.6e}*(x/{d0:.6e})**0.5 title 'slope 1/2'"
    );
    let _ = writeln!(s, "unset multiplot");
    s
}
