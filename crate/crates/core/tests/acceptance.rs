//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! numbers underneath.
//!
//! Every criterion is evaluated and reported, and by default the process
//! exits 0 regardless. Set `ACCEPTANCE_STRICT=1` to exit 1 when any
//! criterion fails.

mod common;

use std::time::Instant;

use chemotaxis_id::inversion::{jacobian_fd, levenberg_marquardt, objective, residual_vector};
use chemotaxis_id::pde::{self, ForwardDiagnostics, SolverOptions, StateField, Transport};
use chemotaxis_id::presets::{myerscough_c0, myerscough_u0, Scenario};
use chemotaxis_id::regselect::{lcurve_corner, lcurve_sweep, rate_study, LCurvePoint, RateStudyConfig, SweepMode};
use chemotaxis_id::sensitivity::{concentration_range, l2_distance, ConcentrationInterval};
use chemotaxis_id::synth::add_noise;
use chemotaxis_id::{
    AnalyticSensitivity, InversionResult, LmConfig, NoisyData, PhysicalParams, Sensitivity, SensitivityFunction,
    SimulationGrid, TikhonovProblem,
};
use common::{oracle_mismatch, summed_objective};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_BASIS: usize = 16;
/// Noise level for the Keller-Segel runs.
const EX2_DELTA: f64 = 0.005;
const EX2_SEED: u64 = 1;
/// Concentration range reported for the Keller-Segel example.
const EX2_RANGE: (f64, f64) = (0.1794, 0.6398);
const EX2_BASIS: (f64, f64) = (0.1, 0.7);

struct Report {
    failed: Vec<u32>,
    /// Printed lines per criterion, emitted in order at the end.
    lines: Vec<(u32, String)>,
    /// Cost histories of every inversion run here, for the monotonicity
    /// part of criterion 5.
    histories: Vec<(String, bool)>,
}

impl Report {
    fn criterion(&mut self, n: u32, name: &str, pass: bool, details: &[String]) {
        let mut text = format!("{} criterion {n}: {name}\n", if pass { "PASS" } else { "FAIL" });
        for d in details {
            text.push_str(&format!("    {d}\n"));
        }
        self.lines.push((n, text));
        if !pass {
            self.failed.push(n);
        }
    }

    fn record(&mut self, label: impl Into<String>, res: &InversionResult) {
        self.histories.push((label.into(), res.cost_history.windows(2).all(|w| w[1] <= w[0])));
    }
}

fn sup_deviation(a: &dyn Sensitivity, target: f64, iv: ConcentrationInterval) -> f64 {
    (0..=2000).map(|k| iv.lo + (iv.hi - iv.lo) * k as f64 / 2000.0).map(|c| (a.value(c) - target).abs()).fold(0.0, f64::max)
}

fn relative_l2(truth: &dyn Sensitivity, a: &dyn Sensitivity, iv: ConcentrationInterval) -> f64 {
    l2_distance(truth, a, iv.lo, iv.hi, 2000) / l2_distance(truth, &|_: f64| 0.0, iv.lo, iv.hi, 2000)
}

fn problem(sc: &Scenario, data: NoisyData, alpha: f64, a_star: SensitivityFunction) -> TikhonovProblem {
    let g = sc.measurement;
    TikhonovProblem::new(data, alpha, a_star, sc.params, sc.u0_on(&g), sc.c0_on(&g))
        .expect("valid problem")
        .with_solver_options(sc.inversion_solver)
}

/// Clean data for a ≡ 2, the basis over the observed range plus 10 %, and
/// the constant-1 prior on it.
fn ex1_setup(sc: &Scenario) -> (pde::StateTrajectory, ConcentrationInterval, SensitivityFunction) {
    let clean = sc.measurements(&AnalyticSensitivity::Constant(2.0)).expect("truth solve");
    let basis = concentration_range(&clean, 0.1).expect("range");
    let a_star = SensitivityFunction::constant(basis.lo, basis.hi, N_BASIS, 1.0).expect("basis");
    (clean, basis, a_star)
}

fn criterion_1(r: &mut Report, sc: &Scenario) {
    let t = Instant::now();
    let (clean, _, a_star) = ex1_setup(sc);
    let observed = concentration_range(&clean, 0.0).expect("range");
    let prob = problem(sc, NoisyData::exact(clean), 0.0, a_star.clone());
    match levenberg_marquardt(&prob, &a_star, &LmConfig::default()) {
        Ok(res) => {
            r.record("constant recovery", &res);
            let dev = sup_deviation(&res.a_hat, 2.0, observed);
            let secs = t.elapsed().as_secs_f64();
            r.criterion(
                1,
                "constant sensitivity recovered from clean data",
                dev <= 1e-3 && secs < 120.0,
                &[
                    format!("max |a - 2| on [{:.4}, {:.4}] = {dev:.3e} (limit 1e-3)", observed.lo, observed.hi),
                    format!("iterations {}, final cost {:.3e}, runtime {secs:.1} s", res.iterations, res.final_cost()),
                ],
            );
        }
        Err(e) => r.criterion(1, "constant sensitivity recovered from clean data", false, &[format!("error: {e}")]),
    }
}

fn ex2_data(sc: &Scenario) -> (pde::StateTrajectory, NoisyData) {
    let clean = sc.measurements(&AnalyticSensitivity::Inverse(2.0)).expect("truth solve");
    let data = add_noise(&clean, EX2_DELTA, EX2_SEED).expect("noise");
    (clean, data)
}

fn ex2_prior() -> SensitivityFunction {
    SensitivityFunction::from_fn(EX2_BASIS.0, EX2_BASIS.1, N_BASIS, AnalyticSensitivity::Quadratic(15.0)).expect("basis")
}

fn criterion_2(r: &mut Report, sc: &Scenario) {
    let t = Instant::now();
    let name = "Keller-Segel sensitivity recovered; regularization beats none";
    let (clean, data) = ex2_data(sc);
    let observed = concentration_range(&clean, 0.0).expect("range");
    let truth = AnalyticSensitivity::Inverse(2.0);
    let prior = ex2_prior();
    let mut errs = Vec::new();
    for alpha in [1e-5, 0.0] {
        let prob = problem(sc, data.clone(), alpha, prior.clone());
        match levenberg_marquardt(&prob, &prior, &LmConfig::default()) {
            Ok(res) => {
                r.record(format!("Keller-Segel alpha={alpha:e}"), &res);
                errs.push((relative_l2(&truth, &res.a_hat, observed), res.iterations, res.stagnated));
            }
            Err(e) => {
                r.criterion(2, name, false, &[format!("alpha {alpha:e}: {e}")]);
                return;
            }
        }
    }
    let interval_ok = (observed.lo - EX2_RANGE.0).abs() <= 0.02 && (observed.hi - EX2_RANGE.1).abs() <= 0.02;
    let (reg, none) = (errs[0], errs[1]);
    let secs = t.elapsed().as_secs_f64();
    r.criterion(
        2,
        name,
        interval_ok && reg.0 <= 0.10 && none.0 > reg.0 && secs < 600.0,
        &[
            format!(
                "observed c range [{:.4}, {:.4}], expected [{}, {}] +- 0.02",
                observed.lo, observed.hi, EX2_RANGE.0, EX2_RANGE.1
            ),
            format!("noise delta {EX2_DELTA}, seed {EX2_SEED}"),
            format!("alpha 1e-5: relative L2 error {:.4} ({} iterations, stagnated {})", reg.0, reg.1, reg.2),
            format!("alpha 0:    relative L2 error {:.4} ({} iterations, stagnated {})", none.0, none.1, none.2),
            format!("runtime {secs:.1} s"),
        ],
    );
}

fn criterion_3(r: &mut Report, sc: &Scenario) {
    let name = "convergence-rate slopes with alpha = delta";
    let (clean, basis, a_star) = ex1_setup(sc);
    let observed = concentration_range(&clean, 0.0).expect("range");
    let template = problem(sc, NoisyData::exact(clean.clone()), 0.0, a_star.clone());
    let cfg = RateStudyConfig::new(vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1], 1.0, vec![0, 1, 2]);
    match rate_study(&AnalyticSensitivity::Constant(2.0), &clean, &template, &a_star, observed, &cfg) {
        Ok(study) => {
            for rec in &study.records {
                r.histories.push((format!("rate study delta={:e} seed={}", rec.delta, rec.seed), rec.cost_monotone));
            }
            let mut details = vec![
                format!("truth a = 2, prior a* = 1, basis [{:.4}, {:.4}] with {N_BASIS} knots", basis.lo, basis.hi),
                format!("slope of log misfit^2 = {:.3} (want [1.7, 2.3])", study.misfit_slope),
                format!("slope of log |a - a_hat| = {:.3} (want [0.3, 0.7])", study.error_slope),
            ];
            for rec in &study.records {
                details.push(format!(
                    "delta {:.0e} seed {}: misfit^2 {:.3e}, error {:.3e}",
                    rec.delta, rec.seed, rec.misfit2, rec.param_error
                ));
            }
            for (d, s, e) in &study.excluded {
                details.push(format!("excluded delta {d:e} seed {s}: {e}"));
            }
            let pass = (1.7..=2.3).contains(&study.misfit_slope) && (0.3..=0.7).contains(&study.error_slope);
            r.criterion(3, name, pass, &details);
        }
        Err(e) => r.criterion(3, name, false, &[format!("error: {e}")]),
    }
}

fn criterion_4(r: &mut Report, sc: &Scenario) {
    let mut worst_mass = 0.0f64;
    let mut worst_u = f64::INFINITY;
    let mut worst_bound = f64::INFINITY;
    let mut worst_sym = 0.0f64;
    let mut runs = 0;
    let mut check = |traj: &pde::StateTrajectory, params: &PhysicalParams, symmetric: bool| {
        let d = ForwardDiagnostics::compute(traj, params);
        worst_mass = worst_mass.max(d.mass_drift);
        worst_u = worst_u.min(d.min_u);
        worst_bound = worst_bound.min(d.c_bound_ratio);
        if symmetric {
            for f in traj.frames() {
                let n = f.u.len();
                for i in 0..n / 2 {
                    worst_sym = worst_sym.max((f.u[i] - f.u[n - 1 - i]).abs()).max((f.c[i] - f.c[n - 1 - i]).abs());
                }
            }
        }
        runs += 1;
    };
    let sensitivities = [AnalyticSensitivity::Constant(2.0), AnalyticSensitivity::Inverse(2.0), AnalyticSensitivity::Quadratic(15.0)];
    for grid in [sc.measurement, sc.fine] {
        for a in sensitivities {
            for transport in [Transport::ImplicitHybrid, Transport::ExplicitUpwind] {
                let opts = SolverOptions { transport, ..sc.inversion_solver };
                let traj = pde::solve_forward_with(&sc.u0_on(&grid), &sc.c0_on(&grid), &sc.params, &a, &grid, &opts, None)
                    .expect("forward solve");
                check(&traj, &sc.params, true);
            }
        }
    }
    // asymmetric, partly cell-free data
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let g = SimulationGrid::unit(33, 0.1, 100).unwrap();
        let u0: Vec<f64> = (0..33).map(|i| if (10..16).contains(&i) { 0.0 } else { rng.random_range(0.0..3.0) }).collect();
        let c0: Vec<f64> = (0..33).map(|_| rng.random_range(0.05..1.5)).collect();
        let a = AnalyticSensitivity::Inverse(rng.random_range(0.1..2.0));
        let traj = pde::solve_forward(&u0, &c0, &sc.params, &a, &g).expect("forward solve");
        check(&traj, &sc.params, false);
    }

    let mut worst_oracle = 0.0f64;
    for (m, n, dt) in [(0.25, 5, 1e-3), (0.25, 11, 1e-3), (0.25, 20, 1e-3), (0.01, 13, 5e-3), (0.01, 20, 5e-3)] {
        let p = PhysicalParams::new(m, 1.0, 50.0, 1.0, 50.0).unwrap();
        let g = SimulationGrid::unit(n, dt, 1).unwrap();
        let states = [
            StateField::new(g.sample(myerscough_u0), g.sample(myerscough_c0), 0.0).unwrap(),
            StateField::new(g.sample(|x| 1.0 + 0.5 * (3.0 * x).sin()), g.sample(|x| 0.3 + 0.2 * (5.0 * x).cos().powi(2)), 0.0)
                .unwrap(),
        ];
        for s in &states {
            for a in sensitivities {
                for tr in [Transport::ImplicitHybrid, Transport::ExplicitUpwind] {
                    let (du, dc) = oracle_mismatch(s, &p, &a, &g, tr);
                    let scale = 1.0 + s.u.iter().chain(&s.c).fold(0.0f64, |m, v| m.max(v.abs()));
                    worst_oracle = worst_oracle.max(du.max(dc) / scale);
                }
            }
        }
    }

    let pass = worst_mass <= 1e-10 && worst_u >= -1e-12 && worst_bound >= 1.0 - 1e-8 && worst_sym <= 1e-9 && worst_oracle <= 1e-10;
    r.criterion(
        4,
        "forward-solver invariants and dense-operator oracle",
        pass,
        &[
            format!("{runs} runs: max relative mass drift {worst_mass:.2e}, min u {worst_u:.2e}"),
            format!("min c / (min c0 exp(-mu t)) = {worst_bound:.10}"),
            format!("max reflection asymmetry {worst_sym:.2e}"),
            format!("max one-step oracle mismatch {worst_oracle:.2e} (relative)"),
        ],
    );
}

fn criterion_5(r: &mut Report, sc: &Scenario) {
    let (_, data) = ex2_data(sc);
    let prior = ex2_prior();
    let prob = problem(sc, data, 1e-5, prior.clone());
    let cfg = LmConfig::default();
    let penalty_only = prob.clone().with_data_weight(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_grad = 0.0f64;
    let mut worst_obj = 0.0f64;
    for _ in 0..10 {
        let x: Vec<f64> = prior.coeffs().iter().map(|c| c * rng.random_range(0.7..1.3)).collect();
        let res = residual_vector(&x, &prob).expect("residual");
        let jac = jacobian_fd(&x, &prob, &cfg).expect("jacobian");
        let grad = 2.0 * jac.transpose() * &res.values;
        // differences of J_α on the same time discretization as the Jacobian
        let cost = |y: &[f64]| -> f64 {
            let t = prob.forward(y, Some(&res.substeps)).expect("forward");
            let g = *prob.grid();
            let mut s = 0.0;
            for j in 1..=g.n_steps() {
                for i in 0..g.n_nodes() {
                    s += (t.frame(j).u[i] - prob.data().z_u(j)[i]).powi(2) + (t.frame(j).c[i] - prob.data().z_c(j)[i]).powi(2);
                }
            }
            s * g.dx() * g.dt() + objective(y, &penalty_only).expect("penalty")
        };
        let fd: Vec<f64> = (0..x.len())
            .map(|k| {
                let h = 1e-5 * x[k].abs().max(1.0);
                let (mut p, mut m) = (x.clone(), x.clone());
                p[k] += h;
                m[k] -= h;
                (cost(&p) - cost(&m)) / (2.0 * h)
            })
            .collect();
        let norm = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = grad.iter().zip(&fd).fold(0.0f64, |m, (g, f)| m.max((g - f).abs()));
        worst_grad = worst_grad.max(err / norm);
        let want = summed_objective(&x, &prob);
        worst_obj = worst_obj.max((res.norm_squared() - want).abs() / want);
    }
    let bad: Vec<&str> = r.histories.iter().filter(|(_, ok)| !ok).map(|(l, _)| l.as_str()).collect();
    let mut details = vec![
        format!("max relative gradient error over 10 points {worst_grad:.2e} (limit 1e-4)"),
        format!("max relative objective mismatch {worst_obj:.2e} (limit 1e-12)"),
        format!("{} inversion runs checked for monotone cost, {} violations", r.histories.len(), bad.len()),
    ];
    details.extend(bad.iter().map(|l| format!("non-monotone: {l}")));
    let pass = worst_grad <= 1e-4 && worst_obj <= 1e-12 && bad.is_empty() && !r.histories.is_empty();
    r.criterion(5, "optimizer gradient, objective and monotone descent", pass, &details);
}

fn criterion_6(r: &mut Report, sc: &Scenario) {
    let g = sc.measurement;
    let run = |a: &AnalyticSensitivity, opts: &SolverOptions| {
        pde::solve_forward_with(&g.sample(myerscough_u0), &g.sample(myerscough_c0), &sc.params, a, &g, opts, None)
            .expect("forward solve")
    };
    let a = run(&AnalyticSensitivity::Constant(2.0), &sc.inversion_solver);
    let b = run(&AnalyticSensitivity::Inverse(2.0), &sc.inversion_solver);
    let dist = pde::trajectory_sq_distance(&a, &b).sqrt();
    // self-consistency: replaying the recorded sub-step schedule must give
    // the same trajectory, and the solver's conservation contract is 1e-10
    let replay = pde::solve_forward_with(
        &g.sample(myerscough_u0),
        &g.sample(myerscough_c0),
        &sc.params,
        &AnalyticSensitivity::Constant(2.0),
        &g,
        &sc.inversion_solver,
        Some(a.substeps()),
    )
    .expect("forward solve");
    let replay_dist = pde::trajectory_sq_distance(&a, &replay).sqrt();
    let tol = 1e-10f64.max(replay_dist);
    r.criterion(
        6,
        "a = 2 and a = 2/c give distinguishable trajectories",
        dist >= 1e3 * tol,
        &[format!("space-time L2 distance {dist:.3e}; solver self-consistency tolerance {tol:.1e} (replay {replay_dist:.1e})")],
    );
}

fn synthetic_point(alpha: f64, rho: f64, eta: f64) -> LCurvePoint {
    let res = InversionResult {
        a_hat: SensitivityFunction::constant(0.0, 1.0, 2, 1.0).unwrap(),
        cost_history: vec![0.0],
        residual_norm2: rho * rho,
        penalty_norm2: eta * eta,
        alpha,
        iterations: 0,
        converged: true,
        stagnated: false,
        final_grad_inf: 0.0,
    };
    LCurvePoint { alpha, rho, eta, result: Some(res), error: None }
}

fn criterion_7(r: &mut Report, sc: &Scenario) {
    let name = "L-curve corner: synthetic vertex exact, Keller-Segel sweep near 1e-5";
    // vertical drop in log eta, then a horizontal run in log rho
    let mut pts = Vec::new();
    for k in 0..9 {
        let alpha = 10f64.powi(k - 8);
        let (rho, eta) = if k <= 4 { (1.0, (4 - k) as f64) } else { ((k - 4) as f64, 0.0) };
        pts.push(synthetic_point(alpha, rho.exp(), eta.exp()));
    }
    let vertex = pts[4].alpha;
    let synthetic = lcurve_corner(&pts).map(|c| c.alpha).ok();

    let (_, data) = ex2_data(sc);
    let prior = ex2_prior();
    let template = problem(sc, data, 0.0, prior.clone());
    let alphas: Vec<f64> = (-8..=-1).map(|k| 10f64.powi(k)).collect();
    let mut details = vec![format!("synthetic vertex {vertex:e}, detected {synthetic:?}")];
    let found = match lcurve_sweep(&template, &prior, &alphas, &LmConfig::default(), SweepMode::ColdParallel) {
        Ok(points) => {
            for p in &points {
                if let Some(res) = &p.result {
                    r.record(format!("L-curve alpha={:e}", p.alpha), res);
                }
                details.push(format!("alpha {:.0e}: rho {:.4e}, eta {:.4e}", p.alpha, p.rho, p.eta));
            }
            lcurve_corner(&points).map(|c| c.alpha).ok()
        }
        Err(e) => {
            details.push(format!("sweep error: {e}"));
            None
        }
    };
    details.push(format!("Keller-Segel corner {found:?} (delta {EX2_DELTA}, seed {EX2_SEED})"));
    let near = found.is_some_and(|a| (a / 1e-5).log10().abs() <= 1.0 + 1e-9);
    r.criterion(7, name, synthetic == Some(vertex) && near, &details);
}

fn main() {
    let start = Instant::now();
    let sc = Scenario::myerscough();
    let mut r = Report { failed: Vec::new(), lines: Vec::new(), histories: Vec::new() };
    criterion_1(&mut r, &sc);
    criterion_2(&mut r, &sc);
    criterion_3(&mut r, &sc);
    criterion_4(&mut r, &sc);
    criterion_6(&mut r, &sc);
    criterion_7(&mut r, &sc);
    // last, so it sees the cost histories of every run above
    criterion_5(&mut r, &sc);
    r.lines.sort_by_key(|(n, _)| *n);
    for (_, text) in &r.lines {
        print!("{text}");
    }
    r.failed.sort();
    println!("acceptance: {} of 7 criteria passed in {:.1} s", 7 - r.failed.len(), start.elapsed().as_secs_f64());
    if !r.failed.is_empty() {
        println!("failed: {:?}", r.failed);
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
