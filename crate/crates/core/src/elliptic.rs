//! Uniform node grid on `(0, π)`, tridiagonal elimination, and the
//! screened-Poisson solve `V_xx − (V − K)/R² = 0` with Neumann ends.
//!
//! [`convolve_exponential`] evaluates `G * k` directly on the even periodic
//! extension; it is the independent check for [`solve_screened`].

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Result};

/// `n_cells + 1` nodes `x_i = i·h`, `h = π / n_cells`, both endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n_cells: usize,
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 8 || n_cells % 2 != 0 {
            return Err(Error::InvalidParameter {
                name: "n_cells",
                reason: "must be even and at least 8",
            });
        }
        Ok(Self { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn len(&self) -> usize {
        self.n_cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        PI / self.n_cells as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n_cells {
            PI
        } else {
            i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.x(i))
    }

    /// Trapezoid weights (without the factor `h`).
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n_cells {
            0.5
        } else {
            1.0
        }
    }

    /// Trapezoid integral over `(0, π)`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let s: f64 = values
            .iter()
            .enumerate()
            .map(|(i, v)| self.weight(i) * v)
            .sum();
        s * self.h()
    }

    /// Trapezoid mean over `(0, π)`.
    pub fn mean(&self, values: &[f64]) -> f64 {
        self.integrate(values) / PI
    }

    /// Samples `f` at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes().map(f).collect()
    }

    /// Eigenvalue of the discrete Neumann Laplacian on `cos(n x)`,
    /// negated: `4 sin²(n h / 2) / h²`.
    pub fn laplacian_symbol(&self, n: u32) -> f64 {
        let h = self.h();
        let s = libm::sin(0.5 * n as f64 * h);
        4.0 * s * s / (h * h)
    }

    pub(crate) fn check(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: values.len(),
            });
        }
        Ok(())
    }
}

/// LU factors of a tridiagonal matrix, for repeated Thomas solves.
///
/// Row `i` is `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    lower: Vec<f64>,
    // modified upper diagonal c'_i and reciprocal pivots
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl TridiagonalLu {
    /// Panics on a zero pivot; every matrix built here is strictly
    /// diagonally dominant.
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Self {
        let n = diag.len();
        assert!(lower.len() == n && upper.len() == n && n > 0);
        let mut c = vec![0.0; n];
        let mut inv = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let pivot = diag[i] - if i > 0 { lower[i] * prev_c } else { 0.0 };
            assert!(
                pivot != 0.0 && pivot.is_finite(),
                "singular tridiagonal system"
            );
            inv[i] = 1.0 / pivot;
            c[i] = upper[i] * inv[i];
            prev_c = c[i];
        }
        Self {
            lower: lower.to_vec(),
            upper: c,
            inv_pivot: inv,
        }
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper[i] * rhs[i + 1];
        }
    }
}

/// Diagonals of `I − c·L`, with `L` the ghost-node Neumann Laplacian.
pub(crate) fn shifted_laplacian(grid: &Grid, c: f64) -> TridiagonalLu {
    let n = grid.len();
    let r = c / (grid.h() * grid.h());
    let mut lower = vec![-r; n];
    let diag = vec![1.0 + 2.0 * r; n];
    let mut upper = vec![-r; n];
    lower[0] = 0.0;
    upper[0] = -2.0 * r;
    lower[n - 1] = -2.0 * r;
    upper[n - 1] = 0.0;
    TridiagonalLu::new(&lower, &diag, &upper)
}

/// Applies the ghost-node Neumann Laplacian.
pub fn apply_laplacian(grid: &Grid, values: &[f64], out: &mut [f64]) {
    let n = grid.n_cells();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    out[0] = 2.0 * (values[1] - values[0]) * inv_h2;
    for i in 1..n {
        out[i] = (values[i - 1] - 2.0 * values[i] + values[i + 1]) * inv_h2;
    }
    out[n] = 2.0 * (values[n - 1] - values[n]) * inv_h2;
}

/// Factorised screened-Poisson operator `(I − R² L) V = K` for a fixed
/// radius and grid.
#[derive(Debug, Clone)]
pub struct ScreenedSolver {
    grid: Grid,
    radius: f64,
    lu: TridiagonalLu,
}

impl ScreenedSolver {
    pub fn new(grid: Grid, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter {
                name: "R",
                reason: "must be > 0",
            });
        }
        let lu = shifted_laplacian(&grid, radius * radius);
        Ok(Self { grid, radius, lu })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn solve_into(&self, k: &[f64], v: &mut [f64]) {
        v.copy_from_slice(k);
        self.lu.solve_in_place(v);
    }

    pub fn solve(&self, k: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; k.len()];
        self.solve_into(k, &mut v);
        v
    }

    /// Max-norm residual of `V − R² L V − K`, relative to `max|K|`.
    pub fn residual(&self, k: &[f64], v: &[f64]) -> f64 {
        let mut lv = vec![0.0; v.len()];
        apply_laplacian(&self.grid, v, &mut lv);
        let r2 = self.radius * self.radius;
        let scale = k
            .iter()
            .fold(0.0f64, |m, x| m.max(libm::fabs(*x)))
            .max(f64::MIN_POSITIVE);
        v.iter()
            .zip(&lv)
            .zip(k)
            .map(|((v, lv), k)| libm::fabs(v - r2 * lv - k))
            .fold(0.0, f64::max)
            / scale
    }
}

/// Solves `V_xx − (V − K)/R² = 0`, `V_x(0) = V_x(π) = 0`, by second-order
/// central differences with ghost nodes.
pub fn solve_screened(k: &[f64], radius: f64, grid: &Grid) -> Result<Vec<f64>> {
    grid.check(k)?;
    Ok(ScreenedSolver::new(*grid, radius)?.solve(k))
}

/// Tail mass of the exponential kernel left out of the convolution.
const KERNEL_TAIL: f64 = 1e-12;

/// `(G * k̃)` restricted to the nodes, where `k̃` is the even `2π`-periodic
/// extension of `k_half` and `G(x) = e^{−|x|/R}/(2R)`.
///
/// Composite trapezoid quadrature on the node spacing, corrected for the
/// kernel cusp, summed over enough periods that the dropped kernel mass is below `1e−12`.
pub fn convolve_exponential(k_half: &[f64], radius: f64, grid: &Grid) -> Result<Vec<f64>> {
    grid.check(k_half)?;
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter {
            name: "R",
            reason: "must be > 0",
        });
    }
    let n = grid.n_cells();
    let h = grid.h();
    let period = 2 * n;
    // ∫_{|x|>L} G = e^{−L/R}
    let tail_len = radius * libm::log(1.0 / KERNEL_TAIL);
    let periods = libm::ceil(tail_len / (2.0 * PI)) as i64 + 1;

    // Periodised quadrature weight for each offset j·h, j ∈ [0, 2n).
    let mut weight = vec![0.0; period];
    for (j, w) in weight.iter_mut().enumerate() {
        let mut acc = 0.0;
        for m in -periods..=periods {
            let z = libm::fabs(j as f64 * h + m as f64 * 2.0 * PI);
            acc += libm::exp(-z / radius);
        }
        *w = acc * h / (2.0 * radius);
    }
    // Euler–Maclaurin correction for the kernel's derivative jump at the
    // node itself; lifts the trapezoid sum to fourth order.
    weight[0] -= h * h / (12.0 * radius * radius);

    // even periodic extension on 2n nodes: index j ↦ node |j| folded
    let extended: Vec<f64> = (0..period)
        .map(|j| {
            if j <= n {
                k_half[j]
            } else {
                k_half[period - j]
            }
        })
        .collect();

    let out = (0..=n)
        .map(|i| {
            (0..period)
                .map(|j| weight[(i + period - j) % period] * extended[j])
                .sum()
        })
        .collect();
    Ok(out)
}
