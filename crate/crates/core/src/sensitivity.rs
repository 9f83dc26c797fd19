//! Piecewise-linear chemotactic sensitivity a(c) on a uniform knot grid,
//! its L² Gram (mass) matrix and the Tikhonov penalty built from it.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::pde::StateTrajectory;

/// Anything that maps a concentration to a chemotactic sensitivity.
pub trait Sensitivity: Sync {
    fn value(&self, c: f64) -> f64;
}

impl<F> Sensitivity for F
where
    F: Fn(f64) -> f64 + Sync,
{
    fn value(&self, c: f64) -> f64 {
        self(c)
    }
}

/// Closed-form sensitivities used to generate ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticSensitivity {
    /// a(c) = v
    Constant(f64),
    /// a(c) = k / c
    Inverse(f64),
    /// a(c) = k (1 - c)^2
    Quadratic(f64),
}

impl Sensitivity for AnalyticSensitivity {
    fn value(&self, c: f64) -> f64 {
        match *self {
            AnalyticSensitivity::Constant(v) => v,
            AnalyticSensitivity::Inverse(k) => k / c,
            AnalyticSensitivity::Quadratic(k) => k * (1.0 - c) * (1.0 - c),
        }
    }
}

/// How a(c) is extended outside `[c_min, c_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extension {
    /// Hold the endpoint value.
    #[default]
    Clamp,
}

impl Extension {
    pub fn name(&self) -> &'static str {
        match self {
            Extension::Clamp => "clamp",
        }
    }
}

/// a(c) = Σ a_k φ_k(c) with hat functions φ_k on uniform knots over
/// `[c_min, c_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityFunction {
    c_min: f64,
    c_max: f64,
    coeffs: Vec<f64>,
    extension: Extension,
    /// Lipschitz bound on da/dc of the admissible set. Carried along as
    /// metadata only.
    pub lipschitz_bound: Option<f64>,
}

impl SensitivityFunction {
    pub fn new(c_min: f64, c_max: f64, coeffs: Vec<f64>) -> Result<Self> {
        if !(c_min.is_finite() && c_max.is_finite()) || c_min >= c_max {
            return Err(Error::InvalidParameter(format!(
                "sensitivity interval must satisfy c_min < c_max (got [{c_min}, {c_max}])"
            )));
        }
        if coeffs.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "at least 2 basis functions required, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("sensitivity coefficients must be finite".into()));
        }
        Ok(Self { c_min, c_max, coeffs, extension: Extension::Clamp, lipschitz_bound: None })
    }

    /// Interpolate `f` at `n_basis` uniform knots.
    pub fn from_fn(c_min: f64, c_max: f64, n_basis: usize, f: impl Sensitivity) -> Result<Self> {
        if n_basis < 2 {
            return Err(Error::InvalidParameter(format!(
                "at least 2 basis functions required, got {n_basis}"
            )));
        }
        let dc = (c_max - c_min) / (n_basis - 1) as f64;
        let coeffs = (0..n_basis).map(|k| f.value(c_min + k as f64 * dc)).collect();
        Self::new(c_min, c_max, coeffs)
    }

    pub fn constant(c_min: f64, c_max: f64, n_basis: usize, v: f64) -> Result<Self> {
        Self::new(c_min, c_max, vec![v; n_basis])
    }

    /// Same knots, new coefficients.
    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != self.coeffs.len() {
            return Err(Error::IncompatibleBasis(format!(
                "expected {} coefficients, got {}",
                self.coeffs.len(),
                coeffs.len()
            )));
        }
        let mut s = Self::new(self.c_min, self.c_max, coeffs)?;
        s.lipschitz_bound = self.lipschitz_bound;
        Ok(s)
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn n_basis(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn spacing(&self) -> f64 {
        (self.c_max - self.c_min) / (self.coeffs.len() - 1) as f64
    }

    pub fn knot(&self, k: usize) -> f64 {
        if k + 1 == self.coeffs.len() {
            self.c_max
        } else {
            self.c_min + k as f64 * self.spacing()
        }
    }

    pub fn knots(&self) -> Vec<f64> {
        (0..self.coeffs.len()).map(|k| self.knot(k)).collect()
    }

    /// Same interval and knot count.
    pub fn same_basis(&self, other: &SensitivityFunction) -> bool {
        self.c_min == other.c_min && self.c_max == other.c_max && self.coeffs.len() == other.coeffs.len()
    }

    /// Segment index and local weight of `c`; `None` outside the interval.
    fn locate(&self, c: f64) -> Option<(usize, f64)> {
        if c <= self.c_min || c >= self.c_max {
            return None;
        }
        let s = (c - self.c_min) / self.spacing();
        let r = s.round();
        if (s - r).abs() < 1e-12 {
            // snap onto a knot so knot evaluation is exact
            return Some((r as usize, 0.0));
        }
        let k = (s.floor() as usize).min(self.coeffs.len() - 2);
        Some((k, s - k as f64))
    }

    /// Values of all hat functions at `c`, as (index, weight) pairs.
    pub fn basis_at(&self, c: f64) -> [(usize, f64); 2] {
        let last = self.coeffs.len() - 1;
        match self.locate(c) {
            None if c <= self.c_min => [(0, 1.0), (1, 0.0)],
            None => [(last, 1.0), (last - 1, 0.0)],
            Some((k, _)) if k == last => [(k, 1.0), (k - 1, 0.0)],
            Some((k, w)) => [(k, 1.0 - w), (k + 1, w)],
        }
    }

    /// Evaluate a(c); non-finite input is rejected.
    pub fn eval(&self, c: f64) -> Result<f64> {
        if !c.is_finite() {
            return Err(Error::InvalidParameter(format!("cannot evaluate sensitivity at c = {c}")));
        }
        Ok(self.value(c))
    }

    /// Largest change in slope between adjacent segments; compare against
    /// [`Self::lipschitz_bound`].
    pub fn max_slope_change(&self) -> f64 {
        let dc = self.spacing();
        self.coeffs
            .windows(3)
            .map(|w| ((w[2] - w[1]) / dc - (w[1] - w[0]) / dc).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = format!(
            "# c_min={:e},c_max={:e},L={},extension={}\n",
            self.c_min,
            self.c_max,
            self.coeffs.len(),
            self.extension.name()
        );
        out.push_str("c_knot,a_value\n");
        for (k, a) in self.coeffs.iter().enumerate() {
            let _ = writeln!(out, "{:e},{:e}", self.knot(k), a);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let perr = |message: String| Error::Parse { path: origin.to_path_buf(), message };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let meta = lines.next().ok_or_else(|| perr("empty sensitivity file".into()))?;
        let meta = meta
            .strip_prefix('#')
            .ok_or_else(|| perr("missing metadata line".into()))?;
        let (mut c_min, mut c_max, mut n) = (None, None, None);
        for kv in meta.split(',') {
            let (k, v) = kv.split_once('=').ok_or_else(|| perr(format!("bad metadata field `{kv}`")))?;
            match k.trim() {
                "c_min" => c_min = v.trim().parse::<f64>().ok(),
                "c_max" => c_max = v.trim().parse::<f64>().ok(),
                "L" => n = v.trim().parse::<usize>().ok(),
                "extension" if v.trim() == "clamp" => {}
                other => return Err(perr(format!("unknown metadata `{other}={v}`"))),
            }
        }
        let (c_min, c_max, n) = match (c_min, c_max, n) {
            (Some(a), Some(b), Some(n)) => (a, b, n),
            _ => return Err(perr("metadata must carry c_min, c_max and L".into())),
        };
        let header = lines.next().ok_or_else(|| perr("missing column header".into()))?;
        if header.trim() != "c_knot,a_value" {
            return Err(perr(format!("unexpected header `{header}`")));
        }
        let mut coeffs = Vec::with_capacity(n);
        for line in lines {
            let (_, a) = line.split_once(',').ok_or_else(|| perr(format!("bad row `{line}`")))?;
            coeffs.push(a.trim().parse::<f64>().map_err(|e| perr(format!("{e} in `{line}`")))?);
        }
        if coeffs.len() != n {
            return Err(perr(format!("expected {n} rows, found {}", coeffs.len())));
        }
        Self::new(c_min, c_max, coeffs)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text, path)
    }
}

impl Sensitivity for SensitivityFunction {
    fn value(&self, c: f64) -> f64 {
        let [(i, wi), (j, wj)] = self.basis_at(c);
        if wj == 0.0 {
            self.coeffs[i]
        } else {
            wi * self.coeffs[i] + wj * self.coeffs[j]
        }
    }
}

/// Exact L²(I) Gram matrix of the hat basis: tridiagonal with
/// `Δc/3` at the two end diagonals, `2Δc/3` inside and `Δc/6` off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMassMatrix {
    spacing: f64,
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl BasisMassMatrix {
    pub fn new(n_basis: usize, c_min: f64, c_max: f64) -> Result<Self> {
        if n_basis < 2 || !(c_min < c_max) {
            return Err(Error::InvalidParameter(format!(
                "mass matrix needs L >= 2 and c_min < c_max (L = {n_basis}, [{c_min}, {c_max}])"
            )));
        }
        let dc = (c_max - c_min) / (n_basis - 1) as f64;
        let mut diag = vec![2.0 * dc / 3.0; n_basis];
        diag[0] = dc / 3.0;
        diag[n_basis - 1] = dc / 3.0;
        Ok(Self { spacing: dc, diag, off: vec![dc / 6.0; n_basis - 1] })
    }

    pub fn for_basis(a: &SensitivityFunction) -> Self {
        Self::new(a.n_basis(), a.c_min(), a.c_max()).expect("validated basis")
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match i.abs_diff(j) {
            0 => self.diag[i],
            1 => self.off[i.min(j)],
            _ => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    /// dᵀ B d
    pub fn quadratic_form(&self, d: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            s += self.diag[i] * d[i] * d[i];
            if i + 1 < n {
                s += 2.0 * self.off[i] * d[i] * d[i + 1];
            }
        }
        s
    }

    /// Upper-triangular `R = Lᵀ` with `B = Rᵀ R`, so `|R d|² = dᵀ B d`.
    pub fn cholesky_upper(&self) -> Result<DMatrix<f64>> {
        let chol = self
            .to_dense()
            .cholesky()
            .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?;
        Ok(chol.l().transpose())
    }
}

/// Alias for [`BasisMassMatrix::new`].
pub fn mass_matrix(n_basis: usize, c_min: f64, c_max: f64) -> Result<BasisMassMatrix> {
    BasisMassMatrix::new(n_basis, c_min, c_max)
}

/// `(a - a*)ᵀ B (a - a*)`, i.e. `|a - a*|²` in L²(I).
pub fn penalty(a: &SensitivityFunction, a_star: &SensitivityFunction, b: &BasisMassMatrix) -> Result<f64> {
    if !a.same_basis(a_star) || b.dim() != a.n_basis() {
        return Err(Error::IncompatibleBasis(format!(
            "a on [{}, {}] with L = {}, a* on [{}, {}] with L = {}, B of size {}",
            a.c_min(),
            a.c_max(),
            a.n_basis(),
            a_star.c_min(),
            a_star.c_max(),
            a_star.n_basis(),
            b.dim()
        )));
    }
    let d: Vec<f64> = a.coeffs().iter().zip(a_star.coeffs()).map(|(x, y)| x - y).collect();
    Ok(b.quadratic_form(&d))
}

/// L²(lo, hi) norm of `f - g`, by composite Simpson on `n` panels.
pub fn l2_distance(f: &dyn Sensitivity, g: &dyn Sensitivity, lo: f64, hi: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (hi - lo) / n as f64;
    let sq = |c: f64| {
        let d = f.value(c) - g.value(c);
        d * d
    };
    let mut s = sq(lo) + sq(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * sq(lo + i as f64 * h);
    }
    (s * h / 3.0).max(0.0).sqrt()
}

/// Closed concentration interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ConcentrationInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `[min c, max c]` over every frame, widened on both sides by
/// `padding * width`.
pub fn concentration_range(traj: &StateTrajectory, padding: f64) -> Result<ConcentrationInterval> {
    if traj.frames().is_empty() {
        return Err(Error::InvalidState("empty trajectory".into()));
    }
    if !(padding >= 0.0) {
        return Err(Error::InvalidParameter(format!("padding must be >= 0, got {padding}")));
    }
    let (lo, hi) = traj
        .frames()
        .iter()
        .flat_map(|f| f.c.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c), hi.max(c)));
    let width = hi - lo;
    if width <= 0.0 {
        return Err(Error::ZeroWidthInterval(lo));
    }
    Ok(ConcentrationInterval { lo: lo - padding * width, hi: hi + padding * width })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
        }
        s * h / 3.0
    }

    /// Hat function k evaluated from its definition, independent of `basis_at`.
    fn hat(knots: &[f64], k: usize, c: f64) -> f64 {
        let ck = knots[k];
        if k > 0 && c >= knots[k - 1] && c <= ck {
            return (c - knots[k - 1]) / (ck - knots[k - 1]);
        }
        if k + 1 < knots.len() && c >= ck && c <= knots[k + 1] {
            return (knots[k + 1] - c) / (knots[k + 1] - ck);
        }
        0.0
    }

    #[test]
    fn constant_coeffs_evaluate_to_constant() {
        let a = SensitivityFunction::constant(0.1, 0.7, 16, 2.0).unwrap();
        for c in [-1.0, 0.1, 0.234, 0.5, 0.7, 3.0] {
            assert_eq!(a.eval(c).unwrap(), 2.0);
        }
    }

    #[test]
    fn linear_interpolation_between_two_knots() {
        let a = SensitivityFunction::new(0.0, 1.0, vec![0.0, 1.0]).unwrap();
        assert_eq!(a.eval(0.25).unwrap(), 0.25);
        // clamp outside
        assert_eq!(a.eval(-0.5).unwrap(), 0.0);
        assert_eq!(a.eval(1.5).unwrap(), 1.0);
    }

    #[test]
    fn knot_evaluation_is_exact() {
        let coeffs: Vec<f64> = (0..16).map(|k| (k as f64).sin() + 3.0).collect();
        let a = SensitivityFunction::new(0.1, 0.7, coeffs.clone()).unwrap();
        for (k, ck) in a.knots().into_iter().enumerate() {
            assert_eq!(a.eval(ck).unwrap(), coeffs[k]);
        }
    }

    #[test]
    fn non_finite_concentration_rejected() {
        let a = SensitivityFunction::constant(0.0, 1.0, 3, 1.0).unwrap();
        assert!(matches!(a.eval(f64::NAN), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn inverse_interpolation_error_within_second_order_bound() {
        let truth = AnalyticSensitivity::Inverse(2.0);
        let a = SensitivityFunction::from_fn(0.1, 0.7, 16, truth).unwrap();
        let dc = a.spacing();
        let bound = dc * dc / 8.0 * 4.0 / 0.1f64.powi(3);
        let max_err = (0..=20_000)
            .map(|i| 0.1 + 0.6 * i as f64 / 20_000.0)
            .map(|c| (a.value(c) - truth.value(c)).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= bound, "max error {max_err} exceeds bound {bound}");
    }

    #[test]
    fn two_function_mass_matrix() {
        let b = mass_matrix(2, 0.0, 1.0).unwrap().to_dense();
        let expect = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((b[(i, j)] - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_matrix_row_sums_integrate_hats() {
        for n in [2usize, 3, 7, 16] {
            let b = mass_matrix(n, 0.1, 0.7).unwrap();
            let dc = b.spacing();
            let d = b.to_dense();
            for i in 0..n {
                let row: f64 = d.row(i).iter().sum();
                let exact = if i == 0 || i == n - 1 { dc / 2.0 } else { dc };
                assert!((row - exact).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mass_matrix_matches_simpson_quadrature() {
        let b = mass_matrix(5, 0.1, 0.7).unwrap();
        let knots: Vec<f64> = (0..5).map(|k| 0.1 + 0.15 * k as f64).collect();
        for i in 0..5 {
            for j in 0..5 {
                // Simpson is exact on each quadratic piece when panels align with knots
                let q: f64 = knots
                    .windows(2)
                    .map(|w| simpson(|c| hat(&knots, i, c) * hat(&knots, j, c), w[0], w[1], 2))
                    .sum();
                assert!((b.entry(i, j) - q).abs() < 1e-12, "B[{i},{j}] = {} vs {q}", b.entry(i, j));
            }
        }
    }

    #[test]
    fn mass_matrix_is_positive_definite() {
        for n in [2usize, 5, 16, 40] {
            assert!(mass_matrix(n, 0.0, 1.0).unwrap().cholesky_upper().is_ok());
        }
    }

    #[test]
    fn penalty_examples() {
        let b = mass_matrix(11, 0.0, 1.0).unwrap();
        let zero = SensitivityFunction::constant(0.0, 1.0, 11, 0.0).unwrap();
        let one = SensitivityFunction::constant(0.0, 1.0, 11, 1.0).unwrap();
        assert_eq!(penalty(&one, &one, &b).unwrap(), 0.0);
        assert!((penalty(&one, &zero, &b).unwrap() - 1.0).abs() < 1e-14);
        let lin = SensitivityFunction::from_fn(0.0, 1.0, 11, |c: f64| c).unwrap();
        assert!((penalty(&lin, &zero, &b).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_rejects_knot_mismatch() {
        let b = mass_matrix(11, 0.0, 1.0).unwrap();
        let a = SensitivityFunction::constant(0.0, 1.0, 11, 0.0).unwrap();
        let other = SensitivityFunction::constant(0.0, 2.0, 11, 0.0).unwrap();
        assert!(matches!(penalty(&a, &other, &b), Err(Error::IncompatibleBasis(_))));
    }

    #[test]
    fn csv_round_trip() {
        let a = SensitivityFunction::from_fn(0.1, 0.7, 16, AnalyticSensitivity::Inverse(2.0)).unwrap();
        let back = SensitivityFunction::from_csv_str(&a.to_csv_string(), Path::new("mem")).unwrap();
        assert_eq!(a.n_basis(), back.n_basis());
        assert!((a.c_max() - back.c_max()).abs() < 1e-14);
        for (x, y) in a.coeffs().iter().zip(back.coeffs()) {
            assert!((x - y).abs() <= 1e-14 * x.abs());
        }
    }

    #[test]
    fn slope_change_diagnostic() {
        let lin = SensitivityFunction::from_fn(0.0, 1.0, 6, |c: f64| 3.0 * c).unwrap();
        assert!(lin.max_slope_change() < 1e-12);
        let kink = SensitivityFunction::new(0.0, 1.0, vec![0.0, 1.0, 0.0]).unwrap();
        assert!((kink.max_slope_change() - 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn partition_of_unity(c in 0.1f64..0.7, n in 2usize..40) {
            let a = SensitivityFunction::constant(0.1, 0.7, n, 0.0).unwrap();
            let knots = a.knots();
            let s: f64 = (0..n).map(|k| hat(&knots, k, c)).sum();
            prop_assert!((s - 1.0).abs() <= 1e-14);
            let [(_, w0), (_, w1)] = a.basis_at(c);
            prop_assert!((w0 + w1 - 1.0).abs() <= 1e-14);
        }

        #[test]
        fn reproduces_piecewise_linear_functions(coeffs in proptest::collection::vec(-5.0f64..5.0, 2..20), c in 0.0f64..1.0) {
            let a = SensitivityFunction::new(0.0, 1.0, coeffs.clone()).unwrap();
            let knots = a.knots();
            let direct: f64 = (0..coeffs.len()).map(|k| coeffs[k] * hat(&knots, k, c)).sum();
            prop_assert!((a.value(c) - direct).abs() <= 1e-12);
            let resampled = SensitivityFunction::from_fn(0.0, 1.0, coeffs.len(), a.clone()).unwrap();
            prop_assert_eq!(resampled.coeffs(), &coeffs[..]);
        }

        #[test]
        fn penalty_matches_quadrature(d in proptest::collection::vec(-3.0f64..3.0, 2..12)) {
            let n = d.len();
            let b = mass_matrix(n, 0.1, 0.7).unwrap();
            let a = SensitivityFunction::new(0.1, 0.7, d.clone()).unwrap();
            let zero = SensitivityFunction::constant(0.1, 0.7, n, 0.0).unwrap();
            let knots = a.knots();
            let q: f64 = knots
                .windows(2)
                .map(|w| simpson(|c| a.value(c).powi(2), w[0], w[1], 2))
                .sum();
            let p = penalty(&a, &zero, &b).unwrap();
            prop_assert!((p - q).abs() <= 1e-10 * q.max(1.0));
        }
    }
}
