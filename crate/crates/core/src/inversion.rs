//! Tikhonov-regularized output least squares for the sensitivity
//! coefficients, minimized by Levenberg-Marquardt with forward-difference
//! Jacobians.
//!
//! The objective is written as a sum of squares `J_α(a) = |r(a)|²` with
//!
//! ```text
//! r = [ sqrt(dx dt) (u_a - z_u) ;  sqrt(dx dt) (c_a - z_c) ;  sqrt(α) R (a - a*) ]
//! ```
//!
//! where `R` is the upper Cholesky factor of the basis mass matrix, so the
//! last block contributes `α |a - a*|²_{L²(I)}`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{PhysicalParams, SimulationGrid};
use crate::pde::{self, SolverOptions, StateTrajectory};
use crate::sensitivity::{penalty, BasisMassMatrix, SensitivityFunction};
use crate::synth::NoisyData;

/// Everything that defines `J_α`.
#[derive(Debug, Clone)]
pub struct TikhonovProblem {
    data: NoisyData,
    alpha: f64,
    a_star: SensitivityFunction,
    params: PhysicalParams,
    u0: Vec<f64>,
    c0: Vec<f64>,
    /// Common factor applied to both data-misfit blocks.
    data_weight: f64,
    solver: SolverOptions,
    mass: BasisMassMatrix,
    chol: DMatrix<f64>,
}

impl TikhonovProblem {
    /// The inversion grid is the data grid; the unknown lives on the knots
    /// of `a_star`.
    pub fn new(
        data: NoisyData,
        alpha: f64,
        a_star: SensitivityFunction,
        params: PhysicalParams,
        u0: Vec<f64>,
        c0: Vec<f64>,
    ) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        params.validate()?;
        let grid = data.grid();
        if u0.len() != grid.n_nodes() || c0.len() != grid.n_nodes() {
            return Err(Error::InvalidParameter(format!(
                "initial data must have {} nodes (u0: {}, c0: {})",
                grid.n_nodes(),
                u0.len(),
                c0.len()
            )));
        }
        let mass = BasisMassMatrix::for_basis(&a_star);
        let chol = mass.cholesky_upper()?;
        Ok(Self {
            data,
            alpha,
            a_star,
            params,
            u0,
            c0,
            data_weight: 1.0,
            solver: SolverOptions::default(),
            mass,
            chol,
        })
    }

    /// Same problem with a different regularization parameter.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        Ok(Self { alpha, ..self.clone() })
    }

    /// Same problem with different data on the same grid.
    pub fn with_data(&self, data: NoisyData) -> Result<Self> {
        if data.grid() != self.data.grid() {
            return Err(Error::DomainMismatch("replacement data lives on a different grid".into()));
        }
        Ok(Self { data, ..self.clone() })
    }

    pub fn with_data_weight(mut self, w: f64) -> Self {
        self.data_weight = w;
        self
    }

    pub fn with_solver_options(mut self, opts: SolverOptions) -> Self {
        self.solver = opts;
        self
    }

    pub fn data(&self) -> &NoisyData {
        &self.data
    }

    pub fn grid(&self) -> &SimulationGrid {
        self.data.grid()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a_star(&self) -> &SensitivityFunction {
        &self.a_star
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn u0(&self) -> &[f64] {
        &self.u0
    }

    pub fn c0(&self) -> &[f64] {
        &self.c0
    }

    pub fn data_weight(&self) -> f64 {
        self.data_weight
    }

    pub fn mass_matrix(&self) -> &BasisMassMatrix {
        &self.mass
    }

    pub fn n_basis(&self) -> usize {
        self.a_star.n_basis()
    }

    /// Rows in each data block.
    fn block_len(&self) -> usize {
        self.grid().n_steps() * self.grid().n_nodes()
    }

    pub fn n_residuals(&self) -> usize {
        2 * self.block_len() + self.n_basis()
    }

    /// Sensitivity function for a coefficient vector on the problem basis.
    pub fn sensitivity(&self, coeffs: &[f64]) -> Result<SensitivityFunction> {
        self.a_star.with_coeffs(coeffs.to_vec())
    }

    pub fn forward(&self, coeffs: &[f64], schedule: Option<&[usize]>) -> Result<StateTrajectory> {
        let a = self.sensitivity(coeffs)?;
        pde::solve_forward_with(&self.u0, &self.c0, &self.params, &a, self.grid(), &self.solver, schedule)
    }
}

/// Residual vector together with the sub-step schedule of the forward solve
/// that produced it.
#[derive(Debug, Clone)]
pub struct Residual {
    pub values: DVector<f64>,
    pub substeps: Vec<usize>,
}

impl Residual {
    pub fn norm_squared(&self) -> f64 {
        self.values.norm_squared()
    }
}

fn residual_with(coeffs: &[f64], prob: &TikhonovProblem, schedule: Option<&[usize]>) -> Result<Residual> {
    if coeffs.len() != prob.n_basis() {
        return Err(Error::IncompatibleBasis(format!(
            "expected {} coefficients, got {}",
            prob.n_basis(),
            coeffs.len()
        )));
    }
    let traj = prob.forward(coeffs, schedule)?;
    let grid = prob.grid();
    let w = prob.data_weight * (grid.dx() * grid.dt()).sqrt();
    let block = prob.block_len();
    let n = grid.n_nodes();
    let mut r = DVector::zeros(prob.n_residuals());
    for j in 1..=grid.n_steps() {
        let f = traj.frame(j);
        let (zu, zc) = (prob.data.z_u(j), prob.data.z_c(j));
        let off = (j - 1) * n;
        for i in 0..n {
            r[off + i] = w * (f.u[i] - zu[i]);
            r[block + off + i] = w * (f.c[i] - zc[i]);
        }
    }
    if prob.alpha > 0.0 {
        let d = DVector::from_iterator(
            coeffs.len(),
            coeffs.iter().zip(prob.a_star.coeffs()).map(|(a, b)| a - b),
        );
        let p = prob.alpha.sqrt() * (&prob.chol * d);
        r.rows_mut(2 * block, coeffs.len()).copy_from(&p);
    }
    Ok(Residual { values: r, substeps: traj.substeps().to_vec() })
}

/// Stacked residual whose squared norm is the discrete `J_α`.
pub fn residual_vector(coeffs: &[f64], prob: &TikhonovProblem) -> Result<Residual> {
    residual_with(coeffs, prob, None)
}

/// `J_α(coeffs) = |residual_vector(coeffs)|²`.
pub fn objective(coeffs: &[f64], prob: &TikhonovProblem) -> Result<f64> {
    Ok(residual_vector(coeffs, prob)?.norm_squared())
}

/// Split of the objective into data misfit and `|a - a*|²` (unweighted by α).
pub fn objective_parts(coeffs: &[f64], prob: &TikhonovProblem) -> Result<(f64, f64)> {
    let r = residual_vector(coeffs, prob)?;
    let misfit = r.values.rows(0, 2 * prob.block_len()).norm_squared();
    let a = prob.sensitivity(coeffs)?;
    Ok((misfit, penalty(&a, &prob.a_star, &prob.mass)?))
}

/// Levenberg-Marquardt controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_iters: usize,
    /// Stop once the relative cost decrease stays below this for two
    /// consecutive accepted steps.
    pub tol_cost: f64,
    /// Stop once `|Jᵀr|_∞` falls below this.
    pub tol_grad: f64,
    /// Relative forward-difference step.
    pub fd_step: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            lambda0: 1e-3,
            lambda_up: 2.0,
            lambda_down: 1.0 / 3.0,
            max_iters: 100,
            tol_cost: 1e-8,
            tol_grad: 1e-8,
            fd_step: 1e-7,
        }
    }
}

/// Damping above this means no acceptable step exists.
pub const LAMBDA_MAX: f64 = 1e12;

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda0 > 0.0
            && self.lambda_up > 1.0
            && self.lambda_down > 0.0
            && self.lambda_down < 1.0
            && self.tol_cost > 0.0
            && self.tol_grad > 0.0
            && self.fd_step > 0.0
            && self.max_iters > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid LM configuration: {self:?}")))
        }
    }
}

fn jacobian_from(coeffs: &[f64], base: &Residual, prob: &TikhonovProblem, cfg: &LmConfig) -> Result<DMatrix<f64>> {
    let m = base.values.len();
    let l = coeffs.len();
    let data_rows = 2 * prob.block_len();
    let columns: Vec<Result<DVector<f64>>> = (0..l)
        .into_par_iter()
        .map(|k| {
            let h = cfg.fd_step * coeffs[k].abs().max(1.0);
            let mut x = coeffs.to_vec();
            x[k] += h;
            // actual step after rounding
            let h = x[k] - coeffs[k];
            let r = residual_with(&x, prob, Some(&base.substeps))
                .map_err(|e| Error::JacobianColumn { column: k, source: Box::new(e) })?;
            Ok((r.values.rows(0, data_rows) - base.values.rows(0, data_rows)) / h)
        })
        .collect();
    let mut jac = DMatrix::zeros(m, l);
    for (k, col) in columns.into_iter().enumerate() {
        jac.view_mut((0, k), (data_rows, 1)).copy_from(&col?);
    }
    if prob.alpha > 0.0 {
        let pen = prob.alpha.sqrt() * &prob.chol;
        jac.view_mut((data_rows, 0), (l, l)).copy_from(&pen);
    }
    Ok(jac)
}

/// Forward-difference Jacobian of [`residual_vector`]. Perturbed solves
/// reuse the base solve's sub-step schedule so that columns are not
/// polluted by changes in the time discretization. The penalty rows are
/// filled in exactly.
pub fn jacobian_fd(coeffs: &[f64], prob: &TikhonovProblem, cfg: &LmConfig) -> Result<DMatrix<f64>> {
    let base = residual_vector(coeffs, prob)?;
    jacobian_from(coeffs, &base, prob, cfg)
}

/// Outcome of a Levenberg-Marquardt run.
#[derive(Debug, Clone)]
pub struct InversionResult {
    pub a_hat: SensitivityFunction,
    /// Cost at the initial point followed by the cost after each accepted
    /// step.
    pub cost_history: Vec<f64>,
    /// Data misfit `|F(a) - z|²` (discrete, weighted).
    pub residual_norm2: f64,
    /// `|a_hat - a*|²_{L²(I)}`.
    pub penalty_norm2: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Damping overflowed without finding a decrease.
    pub stagnated: bool,
    pub final_grad_inf: f64,
}

impl InversionResult {
    pub fn final_cost(&self) -> f64 {
        *self.cost_history.last().expect("history starts with the initial cost")
    }

    pub fn report(&self, delta: f64, seed: u64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "converged = {}", self.converged);
        let _ = writeln!(s, "stagnated = {}", self.stagnated);
        let _ = writeln!(s, "final_cost = {:.14e}", self.final_cost());
        let _ = writeln!(s, "data_misfit = {:.14e}", self.residual_norm2);
        let _ = writeln!(s, "penalty_norm2 = {:.14e}", self.penalty_norm2);
        let _ = writeln!(s, "alpha = {:.14e}", self.alpha);
        let _ = writeln!(s, "delta = {:.14e}", delta);
        let _ = writeln!(s, "seed = {seed}");
        let _ = writeln!(s, "grad_inf = {:.14e}", self.final_grad_inf);
        s
    }

    pub fn write(&self, dir: &Path, delta: f64, seed: u64) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.a_hat.write_csv(&dir.join("sensitivity.csv"))?;
        std::fs::write(dir.join("report.txt"), self.report(delta, seed))?;
        Ok(())
    }
}

fn solve_damped(a: &DMatrix<f64>, g: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let n = a.nrows();
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let floor = (max_diag * 1e-12).max(f64::MIN_POSITIVE);
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] += lambda * a[(i, i)].max(floor);
    }
    let rhs = -g;
    match m.clone().cholesky() {
        Some(ch) => Some(ch.solve(&rhs)),
        None => m.lu().solve(&rhs),
    }
    .filter(|d| d.iter().all(|v| v.is_finite()))
}

/// Minimize `J_α` starting from `a0`.
pub fn levenberg_marquardt(prob: &TikhonovProblem, a0: &SensitivityFunction, cfg: &LmConfig) -> Result<InversionResult> {
    cfg.validate()?;
    if !a0.same_basis(prob.a_star()) {
        return Err(Error::IncompatibleBasis("initial guess is not on the problem basis".into()));
    }
    let mut x = a0.coeffs().to_vec();
    let mut res = residual_vector(&x, prob)?;
    let mut cost = res.norm_squared();
    let mut history = vec![cost];
    let mut lambda = cfg.lambda0;
    let mut small_decreases = 0;
    let mut iterations = 0;
    let mut converged = false;
    let mut stagnated = false;
    let mut grad_inf = f64::INFINITY;

    while iterations < cfg.max_iters {
        let jac = jacobian_from(&x, &res, prob, cfg)?;
        let g = jac.tr_mul(&res.values);
        grad_inf = g.amax();
        if grad_inf < cfg.tol_grad {
            converged = true;
            break;
        }
        let jtj = jac.tr_mul(&jac);
        let accepted = loop {
            if lambda > LAMBDA_MAX {
                break None;
            }
            let trial = solve_damped(&jtj, &g, lambda).and_then(|step| {
                let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
                residual_vector(&xn, prob).ok().map(|r| (xn, r))
            });
            match trial {
                Some((xn, rn)) if rn.norm_squared() < cost => break Some((xn, rn)),
                _ => lambda *= cfg.lambda_up,
            }
        };
        let Some((xn, rn)) = accepted else {
            stagnated = true;
            break;
        };
        iterations += 1;
        let new_cost = rn.norm_squared();
        let rel = (cost - new_cost) / cost;
        x = xn;
        res = rn;
        cost = new_cost;
        history.push(cost);
        lambda = (lambda * cfg.lambda_down).max(f64::MIN_POSITIVE);
        if rel < cfg.tol_cost {
            small_decreases += 1;
            if small_decreases >= 2 {
                converged = true;
                break;
            }
        } else {
            small_decreases = 0;
        }
    }

    let a_hat = prob.sensitivity(&x)?;
    let misfit = res.values.rows(0, 2 * prob.block_len()).norm_squared();
    let pen = penalty(&a_hat, prob.a_star(), prob.mass_matrix())?;
    Ok(InversionResult {
        a_hat,
        cost_history: history,
        residual_norm2: misfit,
        penalty_norm2: pen,
        alpha: prob.alpha(),
        iterations,
        converged,
        stagnated,
        final_grad_inf: grad_inf,
    })
}
