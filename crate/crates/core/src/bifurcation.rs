//! Pitchfork coefficients at `α = α_n`.
//!
//! Steady states near the threshold are
//! `(u*, k*, v*) + s (1, M₁, M₂) cos(nx) + O(s²)` with `α(s) = α_n + α''(0) s²/2 + O(s³)`. The curvature comes
//! from the Crandall–Rabinowitz/Shi projection
//!
//! ```text
//! α''(0) = −[⟨l, F'''[q,q,q]⟩ + 3⟨l, F''[q,Θ]⟩] / (3⟨l, F_α'[q]⟩)
//! ```
//!
//! where `l` pairs with the adjoint null vector `(1, M₁*, M₂*) cos(nx)` and
//! `Θ` solves `F''[q,q] + F'[Θ] = 0` in the span of `{1, cos(2nx)}`.
//!
//! [`alpha_curvature`] evaluates the resulting closed form;
//! [`projection`] evaluates the same brackets by quadrature of the
//! pointwise operators and serves as its cross-check.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::model::LinearizationData;
use crate::stability::Dispersion;
use crate::{Error, Result};

/// Null vector `(1, M1, M2)` and adjoint null vector `(1, M1s, M2s)`
/// coefficients of `cos(n x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenCoefficients {
    pub m1: f64,
    pub m2: f64,
    pub m1s: f64,
    pub m2s: f64,
}

/// Second-order correction `Θ = Θ⁰ + Θ² cos(2nx)` per component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theta {
    pub u_mean: f64,
    pub u_cos2: f64,
    pub k_mean: f64,
    pub k_cos2: f64,
    pub v_mean: f64,
    pub v_cos2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Branch bends toward larger α.
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchStability {
    Stable,
    Unstable,
}

impl core::fmt::Display for Direction {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

impl core::fmt::Display for BranchStability {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            BranchStability::Stable => "stable",
            BranchStability::Unstable => "unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BifurcationCoefficients {
    pub n: u32,
    pub alpha_n: f64,
    pub eigen: EigenCoefficients,
    pub theta: Theta,
    pub alpha_dd0: f64,
    /// The quadrature value `alpha_dd0` was checked against.
    pub alpha_dd0_projected: f64,
    pub direction: Direction,
    pub stability: BranchStability,
}

/// Relative agreement required between closed form and projection.
pub const CURVATURE_AGREEMENT: f64 = 1e-6;

fn wavenumber_sq(n: u32) -> f64 {
    f64::from(n) * f64::from(n)
}

pub fn eigen_coefficients(disp: &Dispersion, n: u32) -> Result<EigenCoefficients> {
    let l = &disp.lin;
    if l.w_u == 0.0 {
        return Err(Error::DegenerateMap);
    }
    if !(l.w_k < 0.0) {
        return Err(Error::InvalidParameter {
            name: "w_k",
            reason: "must be negative",
        });
    }
    let z = wavenumber_sq(n);
    let m1 = -l.w_u / l.w_k;
    let m1s = (disp.d * z - l.f_u) / l.w_u;
    Ok(EigenCoefficients {
        m1,
        m2: m1 * disp.damping(z),
        m1s,
        m2s: -disp.radius * disp.radius * l.w_k * m1s,
    })
}

/// `w_uu + 2 w_uk M₁ + w_kk M₁²`: the quadratic form of `w` along `q`.
fn w_quadratic(l: &LinearizationData, m1: f64) -> f64 {
    l.w_uu + 2.0 * l.w_uk * m1 + l.w_kk * m1 * m1
}

/// `w_uuu + 3 w_uuk M₁ + 3 w_ukk M₁² + w_kkk M₁³`: the cubic form of `w`
/// along `q`. Reduces to `w_uuu + 3 M₁ w_uuk` for this model.
pub fn w_cubic(l: &LinearizationData, m1: f64) -> f64 {
    l.w_uuu + 3.0 * m1 * l.w_uuk + 3.0 * m1 * m1 * l.w_ukk + m1 * m1 * m1 * l.w_kkk
}

/// Solves `F''[q,q] + F'[Θ] = 0` for `Θ` in the span of `{1, cos(2nx)}`.
pub fn theta_coefficients(disp: &Dispersion, n: u32, alpha_n: f64) -> Result<Theta> {
    let l = &disp.lin;
    if l.f_u == 0.0 {
        return Err(Error::GrowthDegenerate);
    }
    if alpha_n == 0.0 {
        return Err(Error::InvalidParameter {
            name: "alpha_n",
            reason: "must be nonzero",
        });
    }
    let e = eigen_coefficients(disp, n)?;
    let z = wavenumber_sq(n);
    let wq = w_quadratic(l, e.m1);

    // constant mode: f_uu/2 + f_u Θu = 0, wq/2 + w_u Θu + w_k Θk = 0, Θv = Θk
    let u_mean = -l.f_uu / (2.0 * l.f_u);
    let k_mean = -(0.5 * wq + l.w_u * u_mean) / l.w_k;

    // cos(2nx) mode, with Θk = (1 + 4zR²) Θv and Θk = −(wq/2 + w_u Θu)/w_k
    let spread2 = 1.0 + 4.0 * z * disp.radius * disp.radius;
    let coupling = 4.0 * z * alpha_n * l.u_star / (l.w_k * spread2);
    let pivot = l.f_u - 4.0 * disp.d * z + coupling * l.w_u;
    let forcing = -0.5 * l.f_uu + 2.0 * alpha_n * e.m2 * z - coupling * 0.5 * wq;
    if libm::fabs(pivot) <= 1e-12 * (libm::fabs(l.f_u) + 4.0 * disp.d * z) {
        return Err(Error::ResonantMode { n });
    }
    let u_cos2 = forcing / pivot;
    let k_cos2 = -(0.5 * wq + l.w_u * u_cos2) / l.w_k;

    Ok(Theta {
        u_mean,
        u_cos2,
        k_mean,
        k_cos2,
        v_mean: k_mean,
        v_cos2: k_cos2 / spread2,
    })
}

/// Closed form of `α''(0)`.
///
/// `∫₀^π cos⁴ = 3π/8`, `∫₀^π cos²(nx)(a + b cos 2nx) = π/2 (a + b/2)` and
/// `⟨l, F_α'[q]⟩ = −u* n² M₂ π/2` reduce the projection to
///
/// ```text
/// α''(0) · M₂ u* n² = (f_uuu + M₁* w̄)/4 + f_uu(Θu⁰ + Θu²/2)
///                     − M₂ α_n n² (Θu⁰ − Θu²/2) − α_n n² Θv²
///                     + M₁* [w₁ (Θu⁰ + Θu²/2) + w₂ (Θk⁰ + Θk²/2)]
/// ```
///
/// with `w₁ = w_uu + M₁ w_uk`, `w₂ = w_uk + M₁ w_kk` and `w̄` from [`w_cubic`].
pub fn alpha_curvature(disp: &Dispersion, n: u32, alpha_n: f64, theta: &Theta) -> Result<f64> {
    let l = &disp.lin;
    if l.f_u == 0.0 {
        return Err(Error::GrowthDegenerate);
    }
    let e = eigen_coefficients(disp, n)?;
    let z = wavenumber_sq(n);
    let w1 = l.w_uu + e.m1 * l.w_uk;
    let w2 = l.w_uk + e.m1 * l.w_kk;
    let u_plus = theta.u_mean + 0.5 * theta.u_cos2;
    let u_minus = theta.u_mean - 0.5 * theta.u_cos2;
    let k_plus = theta.k_mean + 0.5 * theta.k_cos2;
    let numer = 0.25 * (l.f_uuu + e.m1s * w_cubic(l, e.m1)) + l.f_uu * u_plus
        - e.m2 * alpha_n * z * u_minus
        - alpha_n * z * theta.v_cos2
        + e.m1s * (w1 * u_plus + w2 * k_plus);
    let denom = e.m2 * l.u_star * z;
    if denom == 0.0 {
        return Err(Error::InvalidParameter {
            name: "M2",
            reason: "must be nonzero",
        });
    }
    Ok(numer / denom)
}

/// Brackets of the bifurcation formula evaluated by quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// `⟨l, F''[q,q]⟩`; zero makes `α'(0) = 0`.
    pub quadratic: f64,
    /// `⟨l, F'''[q,q,q]⟩`.
    pub cubic: f64,
    /// `⟨l, F''[q,Θ]⟩`.
    pub mixed: f64,
    /// `⟨l, F_α'[q]⟩`.
    pub transversal: f64,
    /// `max_x |F''[q,q] + F'[Θ]|` over the quadrature nodes.
    pub theta_residual: f64,
}

impl Projection {
    pub fn alpha_d0(&self) -> f64 {
        -self.quadratic / (2.0 * self.transversal)
    }

    pub fn alpha_dd0(&self) -> f64 {
        -(self.cubic + 3.0 * self.mixed) / (3.0 * self.transversal)
    }
}

/// A function `a₀ + a₁ cos(m x)` with its first two derivatives.
#[derive(Clone, Copy)]
struct CosTerm {
    mean: f64,
    amp: f64,
    m: f64,
}

impl CosTerm {
    fn at(&self, x: f64) -> [f64; 3] {
        let (s, c) = (libm::sin(self.m * x), libm::cos(self.m * x));
        [
            self.mean + self.amp * c,
            -self.amp * self.m * s,
            -self.amp * self.m * self.m * c,
        ]
    }
}

/// Evaluates the operators pointwise on `points` trapezoid intervals of
/// `(0, π)` and projects onto the adjoint null vector.
pub fn projection(
    disp: &Dispersion,
    n: u32,
    alpha_n: f64,
    theta: &Theta,
    points: usize,
) -> Result<Projection> {
    let l = &disp.lin;
    let e = eigen_coefficients(disp, n)?;
    let nf = f64::from(n);
    let r2 = disp.radius * disp.radius;
    let q = [
        CosTerm {
            mean: 0.0,
            amp: 1.0,
            m: nf,
        },
        CosTerm {
            mean: 0.0,
            amp: e.m1,
            m: nf,
        },
        CosTerm {
            mean: 0.0,
            amp: e.m2,
            m: nf,
        },
    ];
    let th = [
        CosTerm {
            mean: theta.u_mean,
            amp: theta.u_cos2,
            m: 2.0 * nf,
        },
        CosTerm {
            mean: theta.k_mean,
            amp: theta.k_cos2,
            m: 2.0 * nf,
        },
        CosTerm {
            mean: theta.v_mean,
            amp: theta.v_cos2,
            m: 2.0 * nf,
        },
    ];

    // second derivative of (u, k, v) ↦ (d u_xx + α (u v_x)_x + f, w, v_xx − (v−k)/R²)
    let second = |a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]| -> [f64; 3] {
        let flux = |p: &[[f64; 3]; 3], r: &[[f64; 3]; 3]| p[0][1] * r[2][1] + p[0][0] * r[2][2];
        [
            alpha_n * (flux(a, b) + flux(b, a)) + l.f_uu * a[0][0] * b[0][0],
            l.w_uu * a[0][0] * b[0][0]
                + l.w_uk * (a[0][0] * b[1][0] + a[1][0] * b[0][0])
                + l.w_kk * a[1][0] * b[1][0],
            0.0,
        ]
    };
    let third = |a: &[[f64; 3]; 3]| -> [f64; 3] {
        let (p, r) = (a[0][0], a[1][0]);
        [
            l.f_uuu * p * p * p,
            l.w_uuu * p * p * p
                + 3.0 * l.w_uuk * p * p * r
                + 3.0 * l.w_ukk * p * r * r
                + l.w_kkk * r * r * r,
            0.0,
        ]
    };
    let first = |a: &[[f64; 3]; 3]| -> [f64; 3] {
        [
            disp.d * a[0][2] + l.f_u * a[0][0] + alpha_n * l.u_star * a[2][2],
            l.w_u * a[0][0] + l.w_k * a[1][0],
            a[2][2] - (a[2][0] - a[1][0]) / r2,
        ]
    };

    let h = PI / points as f64;
    let mut acc = [0.0f64; 4];
    let mut residual = 0.0f64;
    for j in 0..=points {
        let x = j as f64 * h;
        let w = if j == 0 || j == points { 0.5 * h } else { h };
        let qv = [q[0].at(x), q[1].at(x), q[2].at(x)];
        let tv = [th[0].at(x), th[1].at(x), th[2].at(x)];
        let adj = libm::cos(nf * x);
        let pair = |h3: [f64; 3]| (h3[0] + e.m1s * h3[1] + e.m2s * h3[2]) * adj;

        let qq = second(&qv, &qv);
        let lin_theta = first(&tv);
        for c in 0..3 {
            residual = residual.max(libm::fabs(qq[c] + lin_theta[c]));
        }
        acc[0] += w * pair(qq);
        acc[1] += w * pair(third(&qv));
        acc[2] += w * pair(second(&qv, &tv));
        acc[3] += w * pair([l.u_star * qv[2][2], 0.0, 0.0]);
    }
    Ok(Projection {
        quadratic: acc[0],
        cubic: acc[1],
        mixed: acc[2],
        transversal: acc[3],
        theta_residual: residual,
    })
}

/// Direction and stability of the branch from `sign(α''(0))` and the
/// regime.
pub fn classify(alpha_dd0: f64, w_u: f64) -> Result<(Direction, BranchStability)> {
    if alpha_dd0 == 0.0 || !alpha_dd0.is_finite() {
        return Err(Error::DegenerateCurvature);
    }
    if w_u == 0.0 {
        return Err(Error::DegenerateMap);
    }
    let direction = if alpha_dd0 > 0.0 {
        Direction::Forward
    } else {
        Direction::Backward
    };
    // stable exactly when the branch bends into the linearly unstable side
    let stable = (w_u > 0.0) == (alpha_dd0 < 0.0);
    let stability = if stable {
        BranchStability::Stable
    } else {
        BranchStability::Unstable
    };
    Ok((direction, stability))
}

/// Leading-order amplitude `s = √(2(α − α_n)/α''(0))` of `s cos(nx)`.
pub fn predicted_branch(alpha_n: f64, alpha_dd0: f64, alpha: f64) -> Result<f64> {
    if alpha_dd0 == 0.0 {
        return Err(Error::DegenerateCurvature);
    }
    let ratio = 2.0 * (alpha - alpha_n) / alpha_dd0;
    if ratio < 0.0 {
        return Err(Error::WrongSide);
    }
    Ok(libm::sqrt(ratio))
}

/// Quadrature intervals used for the projection cross-check.
pub fn default_quadrature_points(n: u32) -> usize {
    64 * (n as usize + 1)
}

/// All pitchfork data for mode `n`, with the closed form checked against
/// the projection.
pub fn coefficients(disp: &Dispersion, n: u32) -> Result<BifurcationCoefficients> {
    let alpha_n = disp.threshold(n)?;
    let eigen = eigen_coefficients(disp, n)?;
    let theta = theta_coefficients(disp, n, alpha_n)?;
    let alpha_dd0 = alpha_curvature(disp, n, alpha_n, &theta)?;
    let projected = projection(disp, n, alpha_n, &theta, default_quadrature_points(n))?.alpha_dd0();
    let scale = libm::fabs(alpha_dd0)
        .max(libm::fabs(projected))
        .max(f64::MIN_POSITIVE);
    if libm::fabs(alpha_dd0 - projected) > CURVATURE_AGREEMENT * scale {
        return Err(Error::CurvatureMismatch {
            closed_form: alpha_dd0,
            projected,
        });
    }
    let (direction, stability) = classify(alpha_dd0, disp.lin.w_u)?;
    Ok(BifurcationCoefficients {
        n,
        alpha_n,
        eigen,
        theta,
        alpha_dd0,
        alpha_dd0_projected: projected,
        direction,
        stability,
    })
}

/// Coefficients at the critical wavenumber.
pub fn critical_coefficients(disp: &Dispersion, n_max: u32) -> Result<BifurcationCoefficients> {
    let crit = disp.critical(n_max)?;
    coefficients(disp, crit.n)
}

/// `(α, s)` samples of the leading-order branch on its side of `α_n`.
pub fn branch_samples(c: &BifurcationCoefficients, amplitudes: &[f64]) -> Vec<(f64, f64)> {
    amplitudes
        .iter()
        .map(|&s| (c.alpha_n + 0.5 * c.alpha_dd0 * s * s, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EncodingFamily, GrowthModel, ModelSpec};
    use approx::assert_abs_diff_eq;

    fn disp(encoding: EncodingFamily, radius: f64) -> Dispersion {
        let spec = ModelSpec::new(
            1.0,
            0.0,
            radius,
            GrowthModel::Logistic {
                rate: 1.0,
                capacity: 1.0,
            },
            encoding,
            None,
        )
        .unwrap();
        Dispersion::from_spec(&spec).unwrap()
    }

    fn ex1(radius: f64) -> Dispersion {
        disp(EncodingFamily::ratio_quadratic(1.0, 0.15, 0.5), radius)
    }

    #[test]
    fn eigen_vectors() {
        let e = eigen_coefficients(&ex1(0.3), 2).unwrap();
        assert_abs_diff_eq!(e.m1, 0.5621, epsilon = 1e-4);
        assert_abs_diff_eq!(e.m2, 0.4134, epsilon = 1e-4);
        assert_abs_diff_eq!(e.m2 / e.m1, 1.0 / 1.36, epsilon = 1e-14);

        let e2 = eigen_coefficients(&disp(EncodingFamily::ratio_linear(1.0, 0.15, 0.5), 0.3), 2)
            .unwrap();
        assert_abs_diff_eq!(e2.m1, -0.2071, epsilon = 1e-4);
    }

    #[test]
    fn null_vector_annihilates_linearization() {
        let d = ex1(0.3);
        let n = 2;
        let a = d.threshold(n).unwrap();
        let e = eigen_coefficients(&d, n).unwrap();
        let l = d.lin;
        let z = 4.0;
        // Fourier symbol of the linearization acting on (1, M1, M2) cos(nx)
        let r = [
            -d.d * z + l.f_u - a * l.u_star * z * e.m2,
            l.w_u + l.w_k * e.m1,
            -z * e.m2 - (e.m2 - e.m1) / (d.radius * d.radius),
        ];
        for c in r {
            assert!(c.abs() < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn theta_solves_second_order_system() {
        for (r, n) in [(0.12, 3), (0.3, 2), (2.0, 1)] {
            let d = ex1(r);
            let a = d.threshold(n).unwrap();
            let th = theta_coefficients(&d, n, a).unwrap();
            assert_abs_diff_eq!(th.u_mean, -1.0, epsilon = 1e-15);
            assert_eq!(th.v_mean, th.k_mean);
            assert_abs_diff_eq!(
                th.k_cos2,
                (1.0 + 4.0 * (n * n) as f64 * r * r) * th.v_cos2,
                epsilon = 1e-14
            );
            let p = projection(&d, n, a, &th, default_quadrature_points(n)).unwrap();
            assert!(p.theta_residual < 1e-9, "residual {}", p.theta_residual);
        }
    }

    #[test]
    fn first_order_term_vanishes() {
        for (r, n) in [(0.12, 3), (0.3, 2), (2.0, 1), (0.7, 4)] {
            let d = ex1(r);
            let a = d.threshold(n).unwrap();
            let th = theta_coefficients(&d, n, a).unwrap();
            let p = projection(&d, n, a, &th, 512).unwrap();
            assert!(p.alpha_d0().abs() < 1e-12, "{}", p.alpha_d0());
        }
    }

    #[test]
    fn closed_form_matches_projection() {
        for (r, n) in [(0.12, 3), (0.3, 2), (2.0, 1), (1.0, 1), (0.2, 5)] {
            let c = coefficients(&ex1(r), n).unwrap();
            let rel = (c.alpha_dd0 - c.alpha_dd0_projected).abs() / c.alpha_dd0.abs();
            assert!(
                rel < 1e-10,
                "R={r} n={n}: {} vs {}",
                c.alpha_dd0,
                c.alpha_dd0_projected
            );
        }
    }

    #[test]
    fn cubic_form_reduces() {
        let l = ex1(0.3).lin;
        let m1 = 0.7;
        assert_eq!(w_cubic(&l, m1), l.w_uuu + 3.0 * m1 * l.w_uuk);
    }

    #[test]
    fn classification_table() {
        use BranchStability::*;
        use Direction::*;
        assert_eq!(classify(-0.2, 0.36).unwrap(), (Backward, Stable));
        assert_eq!(classify(0.2, 0.36).unwrap(), (Forward, Unstable));
        assert_eq!(classify(0.2, -0.13).unwrap(), (Forward, Stable));
        assert_eq!(classify(-0.2, -0.13).unwrap(), (Backward, Unstable));
        assert_eq!(classify(0.0, 1.0), Err(Error::DegenerateCurvature));
    }

    #[test]
    fn branch_amplitude() {
        assert_eq!(predicted_branch(-3.0, -0.5, -3.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            predicted_branch(-3.0242, -0.1810, -3.0342).unwrap(),
            0.332,
            epsilon = 1e-3
        );
        assert_eq!(predicted_branch(-17.79, 2.0, -17.8), Err(Error::WrongSide));
    }

    #[test]
    fn growth_degenerate() {
        let mut d = ex1(0.3);
        d.lin.f_u = 0.0;
        assert_eq!(
            theta_coefficients(&d, 1, -2.0),
            Err(Error::GrowthDegenerate)
        );
    }
}
