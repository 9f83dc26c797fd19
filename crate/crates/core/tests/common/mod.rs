//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use chemotaxis_id::pde::{step_with, StateField, Transport};
use chemotaxis_id::{PhysicalParams, Sensitivity, SimulationGrid, TikhonovProblem};
use nalgebra::{DMatrix, DVector};

/// Control volumes: half cells at the two ends.
pub fn volumes(n: usize, dx: f64) -> Vec<f64> {
    (0..n).map(|i| if i == 0 || i == n - 1 { dx / 2.0 } else { dx }).collect()
}

/// Neumann Laplacian from face fluxes (u_{i+1} - u_i)/dx divided by the
/// control volume.
pub fn dense_laplacian(n: usize, dx: f64) -> DMatrix<f64> {
    let vol = volumes(n, dx);
    let mut l = DMatrix::zeros(n, n);
    for f in 0..n - 1 {
        let k = 1.0 / dx;
        // flux into f from f+1, out of f+1 into f
        l[(f, f + 1)] += k / vol[f];
        l[(f, f)] -= k / vol[f];
        l[(f + 1, f)] += k / vol[f + 1];
        l[(f + 1, f + 1)] -= k / vol[f + 1];
    }
    l
}

pub fn velocities(c: &[f64], a: &dyn Sensitivity, dx: f64) -> Vec<f64> {
    c.windows(2).map(|w| a.value(0.5 * (w[0] + w[1])) * (w[1] - w[0]) / dx).collect()
}

/// Matrix T with (T u)_i = -(F_{i+1/2} - F_{i-1/2}) / V_i, where the face
/// flux is F = v (θ u_left + (1-θ) u_right).
pub fn dense_transport(v: &[f64], vol: &[f64], theta: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = vol.len();
    let mut t = DMatrix::zeros(n, n);
    for (f, &vf) in v.iter().enumerate() {
        let th = theta(vf);
        // F leaves f and enters f+1
        for (node, w) in [(f, vf * th), (f + 1, vf * (1.0 - th))] {
            t[(f, node)] -= w / vol[f];
            t[(f + 1, node)] += w / vol[f + 1];
        }
    }
    t
}

/// One step assembled from dense operators and solved by LU.
pub fn dense_step(s: &StateField, p: &PhysicalParams, a: &dyn Sensitivity, dx: f64, dt: f64, tr: Transport) -> (Vec<f64>, Vec<f64>) {
    let n = s.u.len();
    let vol = volumes(n, dx);
    let l = dense_laplacian(n, dx);
    let id = DMatrix::<f64>::identity(n, n);
    let u = DVector::from_column_slice(&s.u);
    let c = DVector::from_column_slice(&s.c);
    let v = velocities(&s.c, a, dx);
    let u_new = match tr {
        Transport::ExplicitUpwind => {
            let t = dense_transport(&v, &vol, |vf| if vf >= 0.0 { 1.0 } else { 0.0 });
            let star = &u + dt * (&t * &u);
            (&id - dt * p.m * &l).lu().solve(&star).unwrap()
        }
        Transport::ImplicitHybrid => {
            let t = dense_transport(&v, &vol, |vf| {
                if vf.abs() * dx <= 2.0 * p.m {
                    0.5
                } else if vf > 0.0 {
                    1.0
                } else {
                    0.0
                }
            });
            (&id - dt * (p.m * &l + t)).lu().solve(&u).unwrap()
        }
    };
    let prod = DVector::from_iterator(n, s.u.iter().map(|&u| p.b * u / (u + p.h)));
    let c_new = ((1.0 + dt * p.mu) * &id - dt * p.d * &l).lu().solve(&(&c + dt * prod)).unwrap();
    (u_new.iter().copied().collect(), c_new.iter().copied().collect())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest differences in u and c between one solver step and the dense
/// oracle.
pub fn oracle_mismatch(s: &StateField, p: &PhysicalParams, a: &dyn Sensitivity, grid: &SimulationGrid, tr: Transport) -> (f64, f64) {
    let got = step_with(s, p, a, grid, tr).unwrap();
    let (u, c) = dense_step(s, p, a, grid.dx(), grid.dt(), tr);
    (max_abs_diff(&got.u, &u), max_abs_diff(&got.c, &c))
}

/// L² Gram matrix of hat functions with spacing `h`, written out by hand.
pub fn gram(n: usize, h: f64) -> Vec<Vec<f64>> {
    let mut b = vec![vec![0.0; n]; n];
    for i in 0..n {
        b[i][i] = if i == 0 || i == n - 1 { h / 3.0 } else { 2.0 * h / 3.0 };
        if i + 1 < n {
            b[i][i + 1] = h / 6.0;
            b[i + 1][i] = h / 6.0;
        }
    }
    b
}

/// `J_α` summed term by term from a fresh forward solve: dx dt times the
/// squared misfits of frames 1.., plus α (a - a*)ᵀ B (a - a*).
pub fn summed_objective(coeffs: &[f64], prob: &TikhonovProblem) -> f64 {
    let g = *prob.grid();
    let traj = prob.forward(coeffs, None).unwrap();
    let mut misfit = 0.0;
    for j in 1..=g.n_steps() {
        for i in 0..g.n_nodes() {
            misfit += (traj.frame(j).u[i] - prob.data().z_u(j)[i]).powi(2);
            misfit += (traj.frame(j).c[i] - prob.data().z_c(j)[i]).powi(2);
        }
    }
    misfit *= g.dx() * g.dt();
    let a_star = prob.a_star();
    let d: Vec<f64> = coeffs.iter().zip(a_star.coeffs()).map(|(a, b)| a - b).collect();
    let b = gram(d.len(), (a_star.c_max() - a_star.c_min()) / (d.len() - 1) as f64);
    let mut pen = 0.0;
    for i in 0..d.len() {
        for j in 0..d.len() {
            pen += d[i] * b[i][j] * d[j];
        }
    }
    misfit + prob.alpha() * pen
}
