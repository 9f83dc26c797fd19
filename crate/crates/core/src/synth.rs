//! Synthetic measurements: fine-mesh ground truth, restriction to the
//! measurement mesh and additive Gaussian noise rescaled to an exact
//! space-time level δ.

use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{PhysicalParams, SimulationGrid};
use crate::pde::{self, read_rows, space_time_sq_distance, write_frames, SolverOptions, StateField, StateTrajectory};
use crate::sensitivity::Sensitivity;

/// Minimum refinement factor of the truth mesh over the measurement mesh,
/// in both x and t.
pub const MIN_REFINEMENT: usize = 4;

/// Noisy concentrations are kept at or above this fraction of the true
/// local concentration.
pub const C_FLOOR_FRACTION: f64 = 0.05;

/// Noisy measurements `(z_u, z_c)` on the measurement grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyData {
    data: StateTrajectory,
    delta: f64,
    seed: u64,
}

impl NoisyData {
    pub fn new(data: StateTrajectory, delta: f64, seed: u64) -> Result<Self> {
        if let Some((j, i)) = data
            .frames()
            .iter()
            .enumerate()
            .find_map(|(j, f)| f.c.iter().position(|&c| c <= 0.0).map(|i| (j, i)))
        {
            return Err(Error::NoiseLevel(format!("z_c[{i}] <= 0 in frame {j}")));
        }
        Ok(Self { data, delta, seed })
    }

    /// Clean data: the trajectory itself with δ = 0.
    pub fn exact(truth: StateTrajectory) -> Self {
        Self { data: truth, delta: 0.0, seed: 0 }
    }

    pub fn grid(&self) -> &SimulationGrid {
        self.data.grid()
    }

    pub fn trajectory(&self) -> &StateTrajectory {
        &self.data
    }

    pub fn z_u(&self, j: usize) -> &[f64] {
        &self.data.frame(j).u
    }

    pub fn z_c(&self, j: usize) -> &[f64] {
        &self.data.frame(j).c
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn to_csv_string(&self) -> String {
        let g = self.data.grid();
        let mut out = format!("# delta={:e},seed={}\nt,x,u,c\n", self.delta, self.seed);
        write_frames(&mut out, g, self.data.frames().iter().map(|f| (f.t, &f.u[..], &f.c[..])));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = BufReader::new(std::fs::File::open(path)?);
        let mut meta = String::new();
        reader.read_line(&mut meta)?;
        let perr = |message: String| Error::Parse { path: path.to_path_buf(), message };
        let meta = meta
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| perr("missing `# delta=...,seed=...` line".into()))?;
        let (mut delta, mut seed) = (None, None);
        for kv in meta.split(',') {
            match kv.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
                Some(("delta", v)) => delta = v.parse::<f64>().ok(),
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                _ => return Err(perr(format!("unknown metadata `{kv}`"))),
            }
        }
        let (delta, seed) = delta.zip(seed).ok_or_else(|| perr("metadata needs delta and seed".into()))?;
        let rows = read_rows(reader, path)?;
        Self::new(StateTrajectory::from_rows(&rows, path)?, delta, seed)
    }
}

/// Require `fine` to refine `measurement` by at least [`MIN_REFINEMENT`]
/// in both directions over the same domain.
pub fn check_refinement(fine: &SimulationGrid, measurement: &SimulationGrid) -> Result<()> {
    if !fine.same_extent(measurement, 1e-12) {
        return Err(Error::DomainMismatch("truth and measurement grids cover different domains".into()));
    }
    let rx = (measurement.dx() / fine.dx()).round() as usize;
    let rt = (measurement.dt() / fine.dt()).round() as usize;
    if fine.dx() * MIN_REFINEMENT as f64 > measurement.dx() * (1.0 + 1e-12)
        || fine.dt() * MIN_REFINEMENT as f64 > measurement.dt() * (1.0 + 1e-12)
    {
        return Err(Error::InvalidParameter(format!(
            "truth grid must be at least {MIN_REFINEMENT}x finer than the measurement grid \
             (x ratio ~{rx}, t ratio ~{rt})"
        )));
    }
    Ok(())
}

/// Forward solve on the fine grid.
pub fn generate_truth<S: Sensitivity + ?Sized>(
    a_true: &S,
    params: &PhysicalParams,
    fine: &SimulationGrid,
    u0: &[f64],
    c0: &[f64],
) -> Result<StateTrajectory> {
    pde::solve_forward(u0, c0, params, a_true, fine)
}

/// As [`generate_truth`] with explicit solver settings.
pub fn generate_truth_with<S: Sensitivity + ?Sized>(
    a_true: &S,
    params: &PhysicalParams,
    fine: &SimulationGrid,
    u0: &[f64],
    c0: &[f64],
    opts: &SolverOptions,
) -> Result<StateTrajectory> {
    pde::solve_forward_with(u0, c0, params, a_true, fine, opts, None)
}

/// Truth on `fine`, restricted to `measurement`. Initial data are given as
/// functions of x so each grid samples them at its own nodes.
pub fn synthesize<S: Sensitivity + ?Sized>(
    a_true: &S,
    params: &PhysicalParams,
    fine: &SimulationGrid,
    measurement: &SimulationGrid,
    u0: impl Fn(f64) -> f64,
    c0: impl Fn(f64) -> f64,
) -> Result<StateTrajectory> {
    synthesize_with(a_true, params, fine, measurement, u0, c0, &SolverOptions::default())
}

pub fn synthesize_with<S: Sensitivity + ?Sized>(
    a_true: &S,
    params: &PhysicalParams,
    fine: &SimulationGrid,
    measurement: &SimulationGrid,
    u0: impl Fn(f64) -> f64,
    c0: impl Fn(f64) -> f64,
    opts: &SolverOptions,
) -> Result<StateTrajectory> {
    check_refinement(fine, measurement)?;
    let truth = generate_truth_with(a_true, params, fine, &fine.sample(&u0), &fine.sample(&c0), opts)?;
    pde::restrict(&truth, measurement)
}

/// Standard normal draws for every node of frames `1..=n_steps`; frame 0
/// stays noise-free.
fn draw(rng: &mut ChaCha8Rng, grid: &SimulationGrid) -> Vec<Vec<f64>> {
    let n = grid.n_nodes();
    std::iter::once(vec![0.0; n])
        .chain((1..=grid.n_steps()).map(|_| (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect()))
        .collect()
}

fn sq_norm(grid: &SimulationGrid, e: &[Vec<f64>]) -> f64 {
    let w = grid.dx() * grid.dt();
    e.iter().skip(1).flatten().map(|x| x * x).sum::<f64>() * w
}

/// Scale `e` to space-time norm `delta`.
fn rescale(grid: &SimulationGrid, e: &mut [Vec<f64>], delta: f64) -> Result<()> {
    let norm = sq_norm(grid, e).sqrt();
    if norm == 0.0 {
        return Err(Error::NoiseLevel("degenerate noise draw".into()));
    }
    let s = delta / norm;
    e.iter_mut().flatten().for_each(|x| *x *= s);
    Ok(())
}

/// Find `s` with `|max(s e, -room)| = delta` where `room = c - floor`, and
/// apply it. The clipped norm is continuous and nondecreasing in `s`, so a
/// bracketing bisection suffices.
fn clip_rescale(grid: &SimulationGrid, e: &mut [Vec<f64>], room: &[Vec<f64>], delta: f64) -> Result<()> {
    let clipped = |s: f64| -> Vec<Vec<f64>> {
        e.iter()
            .zip(room)
            .map(|(ev, rv)| ev.iter().zip(rv).map(|(&x, &r)| (s * x).max(-r)).collect())
            .collect()
    };
    let target = delta * delta;
    let norm = sq_norm(grid, e).sqrt();
    let mut lo = 0.0;
    let mut hi = delta / norm;
    let mut grow = 0;
    while sq_norm(grid, &clipped(hi)) < target {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::NoiseLevel(format!("cannot reach delta = {delta} while keeping z_c > 0")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sq_norm(grid, &clipped(mid)) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut out = clipped(hi);
    // final exact normalization; the correction factor is 1 + O(eps) and
    // cannot push clipped entries meaningfully past their floor
    rescale(grid, &mut out, delta)?;
    e.iter_mut().zip(out).for_each(|(a, b)| *a = b);
    Ok(())
}

/// Add i.i.d. Gaussian noise to `u` and `c` independently, each rescaled so
/// its discrete space-time norm (weights dx dt, frames after the first) is
/// exactly `delta`. Deterministic in `seed`.
///
/// When the scaled perturbation would drive `z_c` below
/// [`C_FLOOR_FRACTION`] of the local concentration, the offending entries
/// are clipped at that floor and the common scale factor is re-solved so
/// the norm is still exactly `delta`.
pub fn add_noise(truth: &StateTrajectory, delta: f64, seed: u64) -> Result<NoisyData> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("delta must be finite and >= 0, got {delta}")));
    }
    if delta == 0.0 {
        return NoisyData::new(truth.clone(), 0.0, seed);
    }
    let grid = *truth.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e_u = draw(&mut rng, &grid);
    let mut e_c = draw(&mut rng, &grid);
    rescale(&grid, &mut e_u, delta)?;
    rescale(&grid, &mut e_c, delta)?;
    let room: Vec<Vec<f64>> = truth
        .frames()
        .iter()
        .map(|f| f.c.iter().map(|&c| (1.0 - C_FLOOR_FRACTION) * c).collect())
        .collect();
    let violates = e_c.iter().zip(&room).any(|(ev, rv)| ev.iter().zip(rv).any(|(&x, &r)| x < -r));
    if violates {
        clip_rescale(&grid, &mut e_c, &room, delta)?;
    }
    let frames: Vec<StateField> = truth
        .frames()
        .iter()
        .enumerate()
        .map(|(j, f)| StateField {
            u: f.u.iter().zip(&e_u[j]).map(|(a, b)| a + b).collect(),
            c: f.c.iter().zip(&e_c[j]).map(|(a, b)| a + b).collect(),
            t: f.t,
        })
        .collect();
    NoisyData::new(StateTrajectory::new(grid, frames)?, delta, seed)
}

/// Realized `(|u - z_u|, |c - z_c|)` in the discrete space-time norm.
pub fn realized_noise(truth: &StateTrajectory, data: &NoisyData) -> (f64, f64) {
    let g = truth.grid();
    let tu = truth.frames().iter().map(|f| &f.u[..]);
    let tc = truth.frames().iter().map(|f| &f.c[..]);
    let du = data.trajectory().frames().iter().map(|f| &f.u[..]);
    let dc = data.trajectory().frames().iter().map(|f| &f.c[..]);
    (space_time_sq_distance(g, tu, du).sqrt(), space_time_sq_distance(g, tc, dc).sqrt())
}
