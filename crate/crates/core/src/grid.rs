//! Physical parameters and the space-time discretization of Ω × (0, T).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the cell/chemoattractant system
///
/// ```text
/// u_t = M u_xx - (a(c) u c_x)_x
/// c_t = D c_xx + b u / (u + h) - mu c
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub m: f64,
    pub d: f64,
    pub b: f64,
    pub h: f64,
    pub mu: f64,
}

impl PhysicalParams {
    pub fn new(m: f64, d: f64, b: f64, h: f64, mu: f64) -> Result<Self> {
        let p = Self { m, d, b, h, mu };
        p.validate()?;
        Ok(p)
    }

    /// Dimensionless system: b = h = mu = 1.
    pub fn dimensionless(m: f64, d: f64) -> Result<Self> {
        Self::new(m, d, 1.0, 1.0, 1.0)
    }

    /// Limb-bud parameters of Myerscough et al.: M = 0.25, D = 1, h = 1, b = mu = 50.
    pub fn myerscough() -> Self {
        Self { m: 0.25, d: 1.0, b: 50.0, h: 1.0, mu: 50.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.m, self.d, self.b, self.h, self.mu];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("physical parameters must be finite".into()));
        }
        if self.m <= 0.0 || self.d <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "M, D, h must be positive (M = {}, D = {}, h = {})",
                self.m, self.d, self.h
            )));
        }
        if self.b < 0.0 || self.mu < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "b, mu must be nonnegative (b = {}, mu = {})",
                self.b, self.mu
            )));
        }
        Ok(())
    }

    /// Michaelis-Menten production b u / (u + h).
    #[inline]
    pub fn production(&self, u: f64) -> f64 {
        self.b * u / (u + self.h)
    }
}

/// Uniform node-centered grid on `[x_left, x_right]` with `n_steps` equal
/// time steps on `[0, t_final]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec")]
pub struct SimulationGrid {
    x_left: f64,
    x_right: f64,
    n_nodes: usize,
    t_final: f64,
    n_steps: usize,
}

#[derive(Deserialize)]
struct GridSpec {
    x_left: f64,
    x_right: f64,
    n_nodes: usize,
    t_final: f64,
    n_steps: usize,
}

impl TryFrom<GridSpec> for SimulationGrid {
    type Error = Error;

    fn try_from(s: GridSpec) -> Result<Self> {
        SimulationGrid::new(s.x_left, s.x_right, s.n_nodes, s.t_final, s.n_steps)
    }
}

impl SimulationGrid {
    pub fn new(x_left: f64, x_right: f64, n_nodes: usize, t_final: f64, n_steps: usize) -> Result<Self> {
        if !(x_left.is_finite() && x_right.is_finite() && t_final.is_finite()) {
            return Err(Error::InvalidParameter("grid extents must be finite".into()));
        }
        if x_right <= x_left {
            return Err(Error::InvalidParameter(format!(
                "x_right ({x_right}) must exceed x_left ({x_left})"
            )));
        }
        if n_nodes < 3 {
            return Err(Error::InvalidParameter(format!("n_nodes must be >= 3, got {n_nodes}")));
        }
        if t_final <= 0.0 {
            return Err(Error::InvalidParameter(format!("t_final must be positive, got {t_final}")));
        }
        if n_steps < 1 {
            return Err(Error::InvalidParameter("n_steps must be >= 1".into()));
        }
        Ok(Self { x_left, x_right, n_nodes, t_final, n_steps })
    }

    /// Grid on the unit interval.
    pub fn unit(n_nodes: usize, t_final: f64, n_steps: usize) -> Result<Self> {
        Self::new(0.0, 1.0, n_nodes, t_final, n_steps)
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dx(&self) -> f64 {
        (self.x_right - self.x_left) / (self.n_nodes - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == self.n_nodes - 1 {
            self.x_right
        } else {
            self.x_left + i as f64 * self.dx()
        }
    }

    #[inline]
    pub fn t(&self, j: usize) -> f64 {
        if j == self.n_steps {
            self.t_final
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|i| self.x(i)).collect()
    }

    /// Finite-volume cell sizes: `dx` in the interior, `dx / 2` at the two
    /// boundary nodes. These are also the trapezoidal quadrature weights.
    pub fn cell_volumes(&self) -> Vec<f64> {
        let dx = self.dx();
        let mut v = vec![dx; self.n_nodes];
        v[0] = 0.5 * dx;
        v[self.n_nodes - 1] = 0.5 * dx;
        v
    }

    /// Sample a function of x at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n_nodes).map(|i| f(self.x(i))).collect()
    }

    /// Same spatial and temporal extent as `other`, to within `tol`.
    pub fn same_extent(&self, other: &SimulationGrid, tol: f64) -> bool {
        (self.x_left - other.x_left).abs() <= tol
            && (self.x_right - other.x_right).abs() <= tol
            && (self.t_final - other.t_final).abs() <= tol
    }
}

/// Trapezoidal integral of node values over the grid's interval.
pub fn mass(u: &[f64], grid: &SimulationGrid) -> f64 {
    debug_assert_eq!(u.len(), grid.n_nodes());
    let dx = grid.dx();
    let n = u.len();
    let interior: f64 = u[1..n - 1].iter().sum();
    dx * (interior + 0.5 * (u[0] + u[n - 1]))
}
