//! Dispersion relation of the homogeneous state and the per-mode
//! aggregation thresholds.
//!
//! A perturbation `∝ e^{λt} cos(n x)` grows at the roots of
//! `λ² − T λ + D = 0` with
//!
//! ```text
//! T(z)    = f_u + w_k − d z
//! D(α, z) = −(d z − f_u) w_k + α u* w_u z / (1 + z R²),     z = n²
//! ```
//!
//! plus the residual real eigenvalue `w_k` of the map equation. `D = 0`
//! defines the threshold `α_n`.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::model::{LinearizationData, ModelSpec};
use crate::{Error, Result};

/// Which sign of α destabilises the homogeneous state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `w_u > 0`: thresholds are negative (attraction to the map).
    AttractiveMap,
    /// `w_u < 0`: thresholds are positive.
    RepulsiveMap,
    /// `w_u = 0`: stable for every α.
    NeverUnstable,
}

impl Regime {
    pub fn of(lin: &LinearizationData) -> Self {
        if lin.w_u > 0.0 {
            Regime::AttractiveMap
        } else if lin.w_u < 0.0 {
            Regime::RepulsiveMap
        } else {
            Regime::NeverUnstable
        }
    }

    /// `+1` if increasing α destabilises, `−1` if decreasing does.
    pub fn destabilizing_sign(&self) -> f64 {
        match self {
            Regime::AttractiveMap => -1.0,
            Regime::RepulsiveMap => 1.0,
            Regime::NeverUnstable => 0.0,
        }
    }
}

/// Extremal threshold over wavenumbers and the smallest `n` attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPair {
    pub alpha: f64,
    pub n: u32,
}

/// Linear-stability data for one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion {
    pub lin: LinearizationData,
    pub d: f64,
    pub radius: f64,
    pub growth_present: bool,
}

/// Default upper wavenumber for threshold scans.
pub const DEFAULT_N_MAX: u32 = 64;

impl Dispersion {
    pub fn new(lin: LinearizationData, d: f64, radius: f64, growth_present: bool) -> Self {
        Self {
            lin,
            d,
            radius,
            growth_present,
        }
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self::new(
            spec.linearize()?,
            spec.d,
            spec.radius,
            spec.growth.is_present(),
        ))
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn regime(&self) -> Regime {
        Regime::of(&self.lin)
    }

    fn require_map(&self) -> Result<()> {
        if self.lin.w_u == 0.0 {
            Err(Error::DegenerateMap)
        } else {
            Ok(())
        }
    }

    /// Kernel damping `1 / (1 + z R²)` of mode `z = n²`.
    #[inline]
    pub fn damping(&self, z: f64) -> f64 {
        1.0 / (1.0 + z * self.radius * self.radius)
    }

    /// `α_n(R)`: the aggregation strength at which mode `n` has a zero
    /// eigenvalue.
    pub fn threshold(&self, n: u32) -> Result<f64> {
        self.require_map()?;
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "wavenumber must be >= 1",
            });
        }
        let l = &self.lin;
        let z = f64::from(n) * f64::from(n);
        let spread = 1.0 + z * self.radius * self.radius;
        Ok(if self.growth_present {
            spread * (self.d * z - l.f_u) * l.w_k / (l.u_star * l.w_u * z)
        } else {
            spread * self.d * l.w_k / (l.u_star * l.w_u)
        })
    }

    /// Continuous maximiser (or minimiser) of `z ↦ α_z`, `(−f_u / (d R²))^{1/4}`.
    pub fn continuous_optimum(&self) -> f64 {
        libm::pow(-self.lin.f_u / (self.d * self.radius * self.radius), 0.25)
    }

    /// Extremal threshold over `n ≥ 1`; `max` when `w_u > 0`, `min` when
    /// `w_u < 0`. Ties go to the smallest `n`.
    pub fn critical(&self, n_max: u32) -> Result<CriticalPair> {
        self.require_map()?;
        if !self.growth_present {
            return Ok(CriticalPair {
                alpha: self.threshold(1)?,
                n: 1,
            });
        }
        let cont = self.continuous_optimum();
        let upper = if cont.is_finite() {
            n_max.max(libm::ceil(cont) as u32 + 2)
        } else {
            n_max
        }
        .max(1);
        // flip so that "larger is more critical" in both regimes
        let sign = if self.lin.w_u > 0.0 { 1.0 } else { -1.0 };
        let mut best = CriticalPair {
            alpha: self.threshold(1)?,
            n: 1,
        };
        for n in 2..=upper {
            let a = self.threshold(n)?;
            let margin = 1e-12 * libm::fabs(best.alpha);
            if sign * (a - best.alpha) > margin {
                best = CriticalPair { alpha: a, n };
            }
        }
        Ok(best)
    }

    /// Trace `T(z)`.
    pub fn trace(&self, z: f64) -> f64 {
        self.lin.f_u + self.lin.w_k - self.d * z
    }

    /// Determinant `D(α, z)`.
    pub fn determinant(&self, alpha: f64, z: f64) -> f64 {
        let l = &self.lin;
        -(self.d * z - l.f_u) * l.w_k + alpha * l.u_star * l.w_u * z * self.damping(z)
    }

    /// Roots of `λ² − T λ + D` for squared wavenumber `z`.
    ///
    /// Taking `z` directly lets callers substitute a discrete Laplacian
    /// symbol.
    pub fn roots(&self, alpha: f64, z: f64) -> (Complex64, Complex64) {
        let t = self.trace(z);
        let det = self.determinant(alpha, z);
        let disc = t * t - 4.0 * det;
        if disc >= 0.0 {
            let sq = libm::sqrt(disc);
            // cancellation-free pair: q = (T ± √disc)/2 with the sign of T
            let q = 0.5 * (t + if t >= 0.0 { sq } else { -sq });
            let other = if q != 0.0 { det / q } else { 0.0 };
            let (a, b) = if q >= other { (q, other) } else { (other, q) };
            (Complex64::new(a, 0.0), Complex64::new(b, 0.0))
        } else {
            let im = 0.5 * libm::sqrt(-disc);
            (Complex64::new(0.5 * t, im), Complex64::new(0.5 * t, -im))
        }
    }

    /// `(λ₊, λ₋, w_k)` for wavenumber `n`.
    pub fn eigenvalues(&self, alpha: f64, n: u32) -> (Complex64, Complex64, f64) {
        let z = f64::from(n) * f64::from(n);
        let (p, m) = self.roots(alpha, z);
        (p, m, self.lin.w_k)
    }

    /// Largest real part over modes `0..=n_max` (and the residual `w_k`).
    pub fn max_growth_rate(&self, alpha: f64, n_max: u32) -> f64 {
        (0..=n_max)
            .map(|n| self.eigenvalues(alpha, n).0.re)
            .fold(self.lin.w_k, f64::max)
    }

    /// `∂λ/∂α` of the root crossing zero at `α = α_n`.
    pub fn transversality(&self, n: u32) -> f64 {
        let l = &self.lin;
        let z = f64::from(n) * f64::from(n);
        -l.u_star * l.w_u * z * self.damping(z) / (self.d * z - l.f_u - l.w_k)
    }

    pub fn report(&self, n_max: u32) -> StabilityReport {
        let regime = self.regime();
        let (alpha_n, critical) = if regime == Regime::NeverUnstable {
            (Vec::new(), None)
        } else {
            let crit = self.critical(n_max).ok();
            let top = n_max.max(crit.map_or(1, |c| c.n));
            let list = (1..=top).filter_map(|n| self.threshold(n).ok()).collect();
            (list, crit)
        };
        StabilityReport {
            lin: self.lin,
            alpha_n,
            critical,
            regime,
        }
    }
}

/// Thresholds `α_n` for `n = 1..` together with the critical pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub lin: LinearizationData,
    /// `alpha_n[i]` is the threshold of wavenumber `i + 1`.
    pub alpha_n: Vec<f64>,
    pub critical: Option<CriticalPair>,
    pub regime: Regime,
}

/// One sample of the stability boundary in the `(R, α)` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionPoint {
    pub radius: f64,
    pub alpha_crit: f64,
    pub n_crit: u32,
}

impl RegionPoint {
    pub fn abs_alpha(&self) -> f64 {
        libm::fabs(self.alpha_crit)
    }
}

/// Critical thresholds at each radius in `radii`.
pub fn stability_region_at(
    disp: &Dispersion,
    radii: impl IntoIterator<Item = f64>,
    n_max: u32,
) -> Result<Vec<RegionPoint>> {
    radii
        .into_iter()
        .map(|radius| {
            if !(radius > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "R",
                    reason: "must be > 0",
                });
            }
            let c = disp.with_radius(radius).critical(n_max)?;
            Ok(RegionPoint {
                radius,
                alpha_crit: c.alpha,
                n_crit: c.n,
            })
        })
        .collect()
}

/// `samples` equally spaced radii over `[r_min, r_max]`.
pub fn stability_region(
    disp: &Dispersion,
    r_min: f64,
    r_max: f64,
    samples: usize,
    n_max: u32,
) -> Result<Vec<RegionPoint>> {
    if !(r_min > 0.0 && r_max >= r_min) {
        return Err(Error::InvalidParameter {
            name: "R_range",
            reason: "need 0 < R_min <= R_max",
        });
    }
    if samples == 0 {
        return Err(Error::InvalidParameter {
            name: "n_R",
            reason: "must be >= 1",
        });
    }
    let step = if samples > 1 {
        (r_max - r_min) / (samples - 1) as f64
    } else {
        0.0
    };
    stability_region_at(disp, (0..samples).map(|i| r_min + step * i as f64), n_max)
}
