//! Forward solver for the 1-D chemotaxis system with no-flux boundaries.
//!
//! Node-centered finite volumes: interior cells have width `dx`, the two
//! boundary cells `dx / 2`. Each step is IMEX Euler:
//!
//! * cell diffusion and chemical diffusion + decay are implicit (one
//!   tridiagonal solve each),
//! * the chemotactic flux `a(c) u c_x` uses face velocities from the
//!   beginning-of-step `c`. By default ([`Transport::ImplicitHybrid`]) it
//!   is implicit in `u`, central where the cell Péclet number allows and
//!   upwind elsewhere; [`Transport::ExplicitUpwind`] is the explicit
//!   first-order alternative,
//! * Michaelis-Menten production uses the beginning-of-step `u`.
//!
//! The flux form telescopes, so the trapezoidal mass of `u` is conserved up
//! to round-off. Both transports keep `u >= 0`; grid steps that exceed the
//! transport's step limit are split into equal sub-steps.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{PhysicalParams, SimulationGrid};
use crate::sensitivity::Sensitivity;
use crate::tridiag::Tridiagonal;

pub use crate::grid::mass;

/// Values of `u` below zero but above this are treated as round-off and
/// clipped.
pub const POSITIVITY_TOL: f64 = 1e-12;

/// Cell density and chemoattractant concentration at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub u: Vec<f64>,
    pub c: Vec<f64>,
    pub t: f64,
}

impl StateField {
    pub fn new(u: Vec<f64>, c: Vec<f64>, t: f64) -> Result<Self> {
        let s = Self { u, c, t };
        s.check_shape(s.u.len())?;
        Ok(s)
    }

    fn check_shape(&self, n: usize) -> Result<()> {
        if self.u.len() != n || self.c.len() != n {
            return Err(Error::InvalidState(format!(
                "state has {} u-values and {} c-values, grid has {n} nodes",
                self.u.len(),
                self.c.len()
            )));
        }
        if let Some(i) = self.u.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidState(format!("u[{i}] is not finite")));
        }
        if let Some(i) = self.c.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidState(format!("c[{i}] is not finite")));
        }
        Ok(())
    }

    /// Validate against a grid: lengths, finiteness, `u >= 0`, `c > 0`.
    pub fn validate(&self, grid: &SimulationGrid) -> Result<()> {
        self.check_shape(grid.n_nodes())?;
        if let Some(i) = self.u.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidState(format!("u[{i}] = {} is negative", self.u[i])));
        }
        if let Some(i) = self.c.iter().position(|&v| v <= 0.0) {
            return Err(Error::InvalidState(format!("c[{i}] = {} is not positive", self.c[i])));
        }
        Ok(())
    }
}

/// Frames at `t_j = j dt`, `j = 0..=n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    grid: SimulationGrid,
    frames: Vec<StateField>,
    /// Sub-steps taken inside each grid step (empty when the trajectory was
    /// not produced by a solve).
    substeps: Vec<usize>,
}

impl StateTrajectory {
    pub fn new(grid: SimulationGrid, frames: Vec<StateField>) -> Result<Self> {
        if frames.len() != grid.n_steps() + 1 {
            return Err(Error::InvalidState(format!(
                "trajectory needs {} frames, got {}",
                grid.n_steps() + 1,
                frames.len()
            )));
        }
        let tol = 1e-9 * grid.dt();
        for (j, f) in frames.iter().enumerate() {
            f.check_shape(grid.n_nodes())?;
            if (f.t - grid.t(j)).abs() > tol {
                return Err(Error::InvalidState(format!(
                    "frame {j} has t = {}, expected {}",
                    f.t,
                    grid.t(j)
                )));
            }
        }
        Ok(Self { grid, frames, substeps: Vec::new() })
    }

    pub fn grid(&self) -> &SimulationGrid {
        &self.grid
    }

    pub fn frames(&self) -> &[StateField] {
        &self.frames
    }

    pub fn frame(&self, j: usize) -> &StateField {
        &self.frames[j]
    }

    pub fn last(&self) -> &StateField {
        self.frames.last().expect("trajectory has at least one frame")
    }

    pub fn substeps(&self) -> &[usize] {
        &self.substeps
    }

    pub fn into_frames(self) -> Vec<StateField> {
        self.frames
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(64 * self.frames.len() * self.grid.n_nodes());
        out.push_str("t,x,u,c\n");
        write_frames(&mut out, &self.grid, self.frames.iter().map(|f| (f.t, &f.u[..], &f.c[..])));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// Parse a `t,x,u,c` CSV. Lines starting with `#` are skipped. The grid
    /// is recovered from the distinct `t` and `x` columns.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let rows = read_rows(BufReader::new(file), path)?;
        Self::from_rows(&rows, path)
    }

    pub(crate) fn from_rows(rows: &[[f64; 4]], path: &Path) -> Result<Self> {
        let perr = |message: String| Error::Parse { path: path.to_path_buf(), message };
        if rows.is_empty() {
            return Err(perr("no data rows".into()));
        }
        let t0 = rows[0][0];
        let n_nodes = rows.iter().take_while(|r| r[0] == t0).count();
        if n_nodes < 3 || !rows.len().is_multiple_of(n_nodes) {
            return Err(perr(format!("{} rows do not form frames of {n_nodes} nodes", rows.len())));
        }
        let n_frames = rows.len() / n_nodes;
        if n_frames < 2 {
            return Err(perr("need at least two frames".into()));
        }
        let grid = SimulationGrid::new(
            rows[0][1],
            rows[n_nodes - 1][1],
            n_nodes,
            rows[rows.len() - 1][0] - t0,
            n_frames - 1,
        )?;
        let frames = rows
            .chunks(n_nodes)
            .map(|chunk| StateField {
                t: chunk[0][0],
                u: chunk.iter().map(|r| r[2]).collect(),
                c: chunk.iter().map(|r| r[3]).collect(),
            })
            .collect();
        Self::new(grid, frames)
    }
}

pub(crate) fn write_frames<'a>(
    out: &mut String,
    grid: &SimulationGrid,
    frames: impl Iterator<Item = (f64, &'a [f64], &'a [f64])>,
) {
    for (t, u, c) in frames {
        for i in 0..grid.n_nodes() {
            let _ = writeln!(out, "{:e},{:e},{:e},{:e}", t, grid.x(i), u[i], c[i]);
        }
    }
}

pub(crate) fn read_rows(reader: impl BufRead, path: &Path) -> Result<Vec<[f64; 4]>> {
    let perr = |message: String| Error::Parse { path: path.to_path_buf(), message };
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "t,x,u,c" {
                return Err(perr(format!("expected header `t,x,u,c`, found `{line}`")));
            }
            saw_header = true;
            continue;
        }
        let mut row = [0.0; 4];
        let mut fields = line.split(',');
        for slot in row.iter_mut() {
            let f = fields.next().ok_or_else(|| perr(format!("line {}: too few columns", lineno + 1)))?;
            *slot = f
                .trim()
                .parse()
                .map_err(|e| perr(format!("line {}: {e}", lineno + 1)))?;
        }
        if fields.next().is_some() {
            return Err(perr(format!("line {}: too many columns", lineno + 1)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Discretization of the chemotactic transport term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transport {
    /// Explicit first-order upwind flux; sub-steps keep every cell's
    /// outflow below `cfl` of its content.
    ExplicitUpwind,
    /// Implicit flux, central at faces whose cell Péclet number
    /// `|v| dx / M` is at most 2 and upwind elsewhere. The resulting
    /// matrix is an M-matrix for any step size. Sub-steps enforce
    /// `dt <= cfl dx / max|v|` to bound the lag in `c`.
    #[default]
    ImplicitHybrid,
}

/// Sub-stepping controls for [`solve_forward_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub transport: Transport,
    pub cfl: f64,
    /// Internal steps per grid step when stability does not ask for more.
    pub min_substeps: usize,
    /// Upper limit on sub-steps per grid step.
    pub max_substeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { transport: Transport::default(), cfl: 0.9, min_substeps: 1, max_substeps: 4096 }
    }
}

/// Face velocities `v_{i+1/2} = a(c̄) (c_{i+1} - c_i) / dx` with `c̄` the
/// arithmetic mean of the two nodes.
pub fn chemotactic_face_velocity<S: Sensitivity + ?Sized>(
    c: &[f64],
    a: &S,
    grid: &SimulationGrid,
) -> Result<Vec<f64>> {
    if c.len() != grid.n_nodes() {
        return Err(Error::InvalidState(format!(
            "c has {} values, grid has {} nodes",
            c.len(),
            grid.n_nodes()
        )));
    }
    if let Some(i) = c.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidState(format!("c[{i}] is not finite")));
    }
    let mut v = vec![0.0; c.len() - 1];
    face_velocities(c, a, grid.dx(), &mut v);
    Ok(v)
}

fn face_velocities<S: Sensitivity + ?Sized>(c: &[f64], a: &S, dx: f64, out: &mut [f64]) {
    for (i, v) in out.iter_mut().enumerate() {
        let grad = c[i + 1] - c[i];
        *v = if grad == 0.0 { 0.0 } else { a.value(0.5 * (c[i] + c[i + 1])) * grad / dx };
    }
}

/// Largest admissible sub-step for the given face velocities.
fn max_stable_dt(v: &[f64], dx: f64, cfl: f64, transport: Transport) -> f64 {
    if transport == Transport::ImplicitHybrid {
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        return if vmax == 0.0 { f64::INFINITY } else { cfl * dx / vmax };
    }
    let n = v.len() + 1;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let vol = if i == 0 || i == n - 1 { 0.5 * dx } else { dx };
        let right = if i < n - 1 { v[i].max(0.0) } else { 0.0 };
        let left = if i > 0 { (-v[i - 1]).max(0.0) } else { 0.0 };
        worst = worst.max((right + left) / vol);
    }
    if worst == 0.0 {
        f64::INFINITY
    } else {
        cfl / worst
    }
}

/// Reusable buffers for one solve.
struct Workspace {
    vel: Vec<f64>,
    flux: Vec<f64>,
    scratch: Vec<f64>,
    vol: Vec<f64>,
    transport: Transport,
    /// cell transport-diffusion operator, rebuilt every implicit step
    cell_tx: Tridiagonal,
    /// (dt, cell operator, chemical operator) of the last sub-step size used
    ops: Option<(f64, Tridiagonal, Tridiagonal)>,
}

impl Workspace {
    fn new(grid: &SimulationGrid, transport: Transport) -> Self {
        let n = grid.n_nodes();
        Self {
            vel: vec![0.0; n - 1],
            flux: vec![0.0; n - 1],
            scratch: vec![0.0; n],
            vol: grid.cell_volumes(),
            transport,
            cell_tx: Tridiagonal::zeros(n),
            ops: None,
        }
    }

    /// `V⁻¹ (V/dt + diffusion + transport)` scaled by dt, i.e. the matrix of
    /// the implicit cell update `A u^{n+1} = u^n`, using `self.vel`.
    fn build_cell_transport(&mut self, m: f64, dx: f64, dt: f64) {
        let n = self.vol.len();
        let a = &mut self.cell_tx;
        let d = m / dx;
        for i in 0..n {
            a.diag[i] = 0.0;
            a.lower[i] = 0.0;
            a.upper[i] = 0.0;
        }
        for (f, &v) in self.vel.iter().enumerate() {
            // face between nodes f and f+1; flux = v (θ u_f + (1-θ) u_{f+1})
            let theta = if v.abs() * dx <= 2.0 * m {
                0.5
            } else if v > 0.0 {
                1.0
            } else {
                0.0
            };
            let left = d + v * theta; // coefficient of u_f in -(flux out of f)
            let right = -d + v * (1.0 - theta); // coefficient of u_{f+1}
            a.diag[f] += left;
            a.upper[f] += right;
            a.lower[f + 1] -= left;
            a.diag[f + 1] -= right;
        }
        for i in 0..n {
            let s = dt / self.vol[i];
            a.diag[i] = 1.0 + s * a.diag[i];
            a.lower[i] *= s;
            a.upper[i] *= s;
        }
    }

    fn operators(&mut self, params: &PhysicalParams, dx: f64, dt: f64) -> &(f64, Tridiagonal, Tridiagonal) {
        let n = self.vol.len();
        let stale = !matches!(&self.ops, Some((d, _, _)) if *d == dt);
        if stale {
            let cell = Tridiagonal::shifted_neumann_laplacian(n, dx, 1.0, dt * params.m);
            let chem = Tridiagonal::shifted_neumann_laplacian(n, dx, 1.0 + dt * params.mu, dt * params.d);
            self.ops = Some((dt, cell, chem));
        }
        self.ops.as_ref().expect("operators just built")
    }
}

/// One IMEX step of size `dt` from `state` into `next`. Face velocities in
/// `ws.vel` must already hold the values for `state.c`.
fn imex_step(
    state: &StateField,
    next: &mut StateField,
    params: &PhysicalParams,
    dx: f64,
    dt: f64,
    ws: &mut Workspace,
) -> Result<()> {
    let n = state.u.len();
    for i in 0..n {
        next.c[i] = state.c[i] + dt * params.production(state.u[i]);
    }
    let mut scratch = std::mem::take(&mut ws.scratch);
    match ws.transport {
        Transport::ExplicitUpwind => {
            for (i, f) in ws.flux.iter_mut().enumerate() {
                let v = ws.vel[i];
                *f = if v >= 0.0 { v * state.u[i] } else { v * state.u[i + 1] };
            }
            for i in 0..n {
                let right = if i < n - 1 { ws.flux[i] } else { 0.0 };
                let left = if i > 0 { ws.flux[i - 1] } else { 0.0 };
                next.u[i] = state.u[i] - dt * (right - left) / ws.vol[i];
            }
            let (_, cell, _) = ws.operators(params, dx, dt);
            cell.solve_in_place(&mut next.u, &mut scratch)?;
        }
        Transport::ImplicitHybrid => {
            next.u.copy_from_slice(&state.u);
            ws.build_cell_transport(params.m, dx, dt);
            ws.cell_tx.solve_in_place(&mut next.u, &mut scratch)?;
        }
    }
    let (_, _, chem) = ws.operators(params, dx, dt);
    chem.solve_in_place(&mut next.c, &mut scratch)?;
    ws.scratch = scratch;
    next.t = state.t + dt;

    for (i, u) in next.u.iter_mut().enumerate() {
        if !u.is_finite() {
            return Err(Error::Numerical(format!("u[{i}] became non-finite at t = {}", next.t)));
        }
        if *u < 0.0 {
            if *u < -POSITIVITY_TOL {
                return Err(Error::Positivity { t: next.t, node: i, value: *u });
            }
            *u = 0.0;
        }
    }
    if let Some(i) = next.c.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("c[{i}] became non-finite at t = {}", next.t)));
    }
    Ok(())
}

/// Advance `state` by one grid step `grid.dt()` without sub-stepping.
pub fn step<S: Sensitivity + ?Sized>(
    state: &StateField,
    params: &PhysicalParams,
    a: &S,
    grid: &SimulationGrid,
) -> Result<StateField> {
    step_with(state, params, a, grid, Transport::default())
}

/// [`step`] with an explicit choice of transport discretization.
pub fn step_with<S: Sensitivity + ?Sized>(
    state: &StateField,
    params: &PhysicalParams,
    a: &S,
    grid: &SimulationGrid,
    transport: Transport,
) -> Result<StateField> {
    state.check_shape(grid.n_nodes())?;
    let mut ws = Workspace::new(grid, transport);
    face_velocities(&state.c, a, grid.dx(), &mut ws.vel);
    let mut next = state.clone();
    imex_step(state, &mut next, params, grid.dx(), grid.dt(), &mut ws)?;
    Ok(next)
}

/// Solve on `grid` with default [`SolverOptions`].
pub fn solve_forward<S: Sensitivity + ?Sized>(
    u0: &[f64],
    c0: &[f64],
    params: &PhysicalParams,
    a: &S,
    grid: &SimulationGrid,
) -> Result<StateTrajectory> {
    solve_forward_with(u0, c0, params, a, grid, &SolverOptions::default(), None)
}

/// Full forward solve. `schedule`, when given, is a per-step minimum
/// sub-step count (typically `substeps()` of an earlier solve); stability
/// may still raise it.
pub fn solve_forward_with<S: Sensitivity + ?Sized>(
    u0: &[f64],
    c0: &[f64],
    params: &PhysicalParams,
    a: &S,
    grid: &SimulationGrid,
    opts: &SolverOptions,
    schedule: Option<&[usize]>,
) -> Result<StateTrajectory> {
    params.validate()?;
    let init = StateField { u: u0.to_vec(), c: c0.to_vec(), t: 0.0 };
    init.validate(grid)?;
    if let Some(s) = schedule {
        if s.len() != grid.n_steps() {
            return Err(Error::InvalidParameter(format!(
                "sub-step schedule has {} entries, grid has {} steps",
                s.len(),
                grid.n_steps()
            )));
        }
    }

    let dx = grid.dx();
    let dt = grid.dt();
    let mut ws = Workspace::new(grid, opts.transport);
    let mut frames = Vec::with_capacity(grid.n_steps() + 1);
    let mut substeps = Vec::with_capacity(grid.n_steps());
    frames.push(init);
    let mut cur = frames[0].clone();
    let mut tmp = cur.clone();

    for j in 0..grid.n_steps() {
        let start = frames[j].clone();
        face_velocities(&start.c, a, dx, &mut ws.vel);
        let needed = (dt / max_stable_dt(&ws.vel, dx, opts.cfl, opts.transport)).ceil() as usize;
        let mut n_sub = needed.max(opts.min_substeps.max(1)).max(schedule.map_or(1, |s| s[j]));
        'attempt: loop {
            if n_sub > opts.max_substeps {
                return Err(Error::StepSize { t: start.t, required: n_sub, cap: opts.max_substeps });
            }
            let h = dt / n_sub as f64;
            cur.clone_from(&start);
            let planned = n_sub;
            for k in 0..planned {
                if k > 0 {
                    face_velocities(&cur.c, a, dx, &mut ws.vel);
                    let stable = max_stable_dt(&ws.vel, dx, opts.cfl, opts.transport);
                    if h > stable {
                        n_sub = n_sub.max((dt / stable).ceil() as usize).max(2 * n_sub);
                        continue 'attempt;
                    }
                }
                imex_step(&cur, &mut tmp, params, dx, h, &mut ws)?;
                std::mem::swap(&mut cur, &mut tmp);
            }
            break;
        }
        cur.t = grid.t(j + 1);
        substeps.push(n_sub);
        frames.push(cur.clone());
    }
    Ok(StateTrajectory { grid: *grid, frames, substeps })
}

/// Locate `p` in a uniform partition of `[lo, lo + h * (n - 1)]`: returns
/// the left index and the weight of the right neighbour. Points within
/// `1e-9` of a node snap onto it.
fn bracket(p: f64, lo: f64, h: f64, n: usize) -> (usize, f64) {
    let s = (p - lo) / h;
    let r = s.round();
    if (s - r).abs() < 1e-9 {
        let k = (r.max(0.0) as usize).min(n - 1);
        return (k, 0.0);
    }
    let k = (s.floor().max(0.0) as usize).min(n - 2);
    (k, (s - k as f64).clamp(0.0, 1.0))
}

/// Bilinear (x, t) interpolation of a trajectory onto another grid over the
/// same domain.
pub fn restrict(traj: &StateTrajectory, coarse: &SimulationGrid) -> Result<StateTrajectory> {
    let fine = traj.grid();
    let tol = 1e-12 * (1.0 + fine.x_right().abs().max(fine.t_final()));
    if coarse.x_left() < fine.x_left() - tol
        || coarse.x_right() > fine.x_right() + tol
        || coarse.t_final() > fine.t_final() + tol
    {
        return Err(Error::DomainMismatch(format!(
            "target [{}, {}] x [0, {}] exceeds source [{}, {}] x [0, {}]",
            coarse.x_left(),
            coarse.x_right(),
            coarse.t_final(),
            fine.x_left(),
            fine.x_right(),
            fine.t_final()
        )));
    }
    let xs: Vec<(usize, f64)> = (0..coarse.n_nodes())
        .map(|i| bracket(coarse.x(i), fine.x_left(), fine.dx(), fine.n_nodes()))
        .collect();
    let lerp = |vals: &[f64], (k, w): (usize, f64)| {
        if w == 0.0 {
            vals[k]
        } else {
            (1.0 - w) * vals[k] + w * vals[k + 1]
        }
    };
    let frames = (0..=coarse.n_steps())
        .map(|j| {
            let t = coarse.t(j);
            let (m, wt) = bracket(t, 0.0, fine.dt(), fine.n_steps() + 1);
            let pick = |field: fn(&StateField) -> &[f64]| -> Vec<f64> {
                let lo = field(traj.frame(m));
                let at_lo: Vec<f64> = xs.iter().map(|&b| lerp(lo, b)).collect();
                if wt == 0.0 {
                    return at_lo;
                }
                let hi = field(traj.frame(m + 1));
                at_lo
                    .iter()
                    .zip(&xs)
                    .map(|(&l, &b)| (1.0 - wt) * l + wt * lerp(hi, b))
                    .collect()
            };
            StateField { u: pick(|f| &f.u), c: pick(|f| &f.c), t }
        })
        .collect();
    StateTrajectory::new(*coarse, frames)
}

/// Post-solve checks of the conservation and lower-bound properties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardDiagnostics {
    /// `|mass(u_T) - mass(u_0)| / mass(u_0)` (absolute drift if the initial
    /// mass is zero).
    pub mass_drift: f64,
    pub min_u: f64,
    pub min_c: f64,
    /// Smallest `min_x c(x, t) / (c̄₀ e^{-μt})` over all frames.
    pub c_bound_ratio: f64,
}

impl ForwardDiagnostics {
    pub fn compute(traj: &StateTrajectory, params: &PhysicalParams) -> Self {
        let grid = traj.grid();
        let m0 = mass(&traj.frame(0).u, grid);
        let m_t = mass(&traj.last().u, grid);
        let mass_drift = if m0 > 0.0 { (m_t - m0).abs() / m0 } else { (m_t - m0).abs() };
        let c0_min = traj.frame(0).c.iter().copied().fold(f64::INFINITY, f64::min);
        let mut min_u = f64::INFINITY;
        let mut min_c = f64::INFINITY;
        let mut ratio = f64::INFINITY;
        for f in traj.frames() {
            let fu = f.u.iter().copied().fold(f64::INFINITY, f64::min);
            let fc = f.c.iter().copied().fold(f64::INFINITY, f64::min);
            min_u = min_u.min(fu);
            min_c = min_c.min(fc);
            ratio = ratio.min(fc / (c0_min * (-params.mu * f.t).exp()));
        }
        Self { mass_drift, min_u, min_c, c_bound_ratio: ratio }
    }

    /// All invariants hold at the standard tolerances.
    pub fn ok(&self) -> bool {
        self.mass_drift <= 1e-10 && self.min_u >= -POSITIVITY_TOL && self.c_bound_ratio >= 1.0 - 1e-8
    }
}

/// Discrete space-time squared distance `Σ_{j>=1} Σ_i (f_ij - g_ij)² dx dt`.
/// The initial frame is excluded since initial data are known inputs.
pub fn space_time_sq_distance<'a>(
    grid: &SimulationGrid,
    f: impl IntoIterator<Item = &'a [f64]>,
    g: impl IntoIterator<Item = &'a [f64]>,
) -> f64 {
    let w = grid.dx() * grid.dt();
    f.into_iter()
        .zip(g)
        .skip(1)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
        .sum::<f64>()
        * w
}

/// Squared discrete space-time distance between two trajectories on the
/// same grid, summed over both fields.
pub fn trajectory_sq_distance(a: &StateTrajectory, b: &StateTrajectory) -> f64 {
    let g = a.grid();
    space_time_sq_distance(g, a.frames().iter().map(|f| &f.u[..]), b.frames().iter().map(|f| &f.u[..]))
        + space_time_sq_distance(g, a.frames().iter().map(|f| &f.c[..]), b.frames().iter().map(|f| &f.c[..]))
}
