//! Growth and encoding functions, the homogeneous state and its
//! linearization data.
//!
//! All derivatives are analytic up to third order; [`finite_difference_check`]
//! compares them against central differences.

use core::f64::consts::PI;

use crate::{Error, Result};

/// Population growth `f(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthModel {
    /// `f(u) = r u (1 − u / capacity)`.
    Logistic {
        rate: f64,
        capacity: f64,
    },
    NoGrowth,
}

impl GrowthModel {
    /// `f(u)` (order 0) or its `order`-th derivative. Orders above 3 return 0.
    pub fn eval(&self, u: f64, order: u8) -> f64 {
        match *self {
            GrowthModel::NoGrowth => 0.0,
            GrowthModel::Logistic { rate, capacity } => match order {
                0 => rate * u * (1.0 - u / capacity),
                1 => rate * (1.0 - 2.0 * u / capacity),
                2 => -2.0 * rate / capacity,
                _ => 0.0,
            },
        }
    }

    pub fn is_present(&self) -> bool {
        matches!(self, GrowthModel::Logistic { .. })
    }

    /// The positive zero of `f`, if growth is present.
    pub fn positive_zero(&self) -> Option<f64> {
        match *self {
            GrowthModel::Logistic { capacity, .. } => Some(capacity),
            GrowthModel::NoGrowth => None,
        }
    }
}

/// Shape of the excitation term `g1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Excitation {
    /// `g1(u) = ρ u² / (1 + u)`.
    RatioQuadratic { rho: f64 },
    /// `g1(u) = ρ u / (1 + u)`.
    RatioLinear { rho: f64 },
}

impl Excitation {
    pub fn rho(&self) -> f64 {
        match *self {
            Excitation::RatioQuadratic { rho } | Excitation::RatioLinear { rho } => rho,
        }
    }

    fn eval(&self, u: f64, order: u8) -> f64 {
        let p = 1.0 + u;
        match *self {
            // ρ (u − 1 + 1/(1+u))
            Excitation::RatioQuadratic { rho } => match order {
                0 => rho * u * u / p,
                1 => rho * (1.0 - 1.0 / (p * p)),
                2 => 2.0 * rho / (p * p * p),
                3 => -6.0 * rho / (p * p * p * p),
                _ => 0.0,
            },
            // ρ (1 − 1/(1+u))
            Excitation::RatioLinear { rho } => match order {
                0 => rho * u / p,
                1 => rho / (p * p),
                2 => -2.0 * rho / (p * p * p),
                3 => 6.0 * rho / (p * p * p * p),
                _ => 0.0,
            },
        }
    }
}

/// Arctan step added to the adaptation rate:
/// `g̃(u) = ε/2 · (1 + (2/π) atan(γ (u − center)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothStep {
    pub epsilon: f64,
    pub gamma: f64,
    pub center: f64,
}

impl SmoothStep {
    pub const DEFAULT_EPSILON: f64 = 0.05;
    pub const DEFAULT_GAMMA: f64 = 10.0;

    fn eval(&self, u: f64, order: u8) -> f64 {
        let (eps, g) = (self.epsilon, self.gamma);
        let z = g * (u - self.center);
        let q = 1.0 + z * z;
        match order {
            0 => 0.5 * eps * (1.0 + 2.0 / PI * libm::atan(z)),
            1 => eps * g / (PI * q),
            2 => -2.0 * eps * g * g * z / (PI * q * q),
            3 => -2.0 * eps * g * g * g * (1.0 - 3.0 * z * z) / (PI * q * q * q),
            _ => 0.0,
        }
    }
}

/// Which encoding function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// `g1`, the excitation (source) term.
    Excitation,
    /// `g2`, the adaptation (decay) rate.
    Adaptation,
}

/// `g1` and `g2(u) = μ + β u [+ g̃(u)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingFamily {
    pub excitation: Excitation,
    pub mu: f64,
    pub beta: f64,
    /// Present for the smooth-step perturbed adaptation rate.
    pub step: Option<SmoothStep>,
}

impl EncodingFamily {
    pub fn ratio_quadratic(rho: f64, mu: f64, beta: f64) -> Self {
        Self {
            excitation: Excitation::RatioQuadratic { rho },
            mu,
            beta,
            step: None,
        }
    }

    pub fn ratio_linear(rho: f64, mu: f64, beta: f64) -> Self {
        Self {
            excitation: Excitation::RatioLinear { rho },
            mu,
            beta,
            step: None,
        }
    }

    pub fn with_step(mut self, step: SmoothStep) -> Self {
        self.step = Some(step);
        self
    }

    pub fn g1(&self, u: f64, order: u8) -> f64 {
        self.excitation.eval(u, order)
    }

    pub fn g2(&self, u: f64, order: u8) -> f64 {
        let base = match order {
            0 => self.mu + self.beta * u,
            1 => self.beta,
            _ => 0.0,
        };
        base + self.step.map_or(0.0, |s| s.eval(u, order))
    }

    pub fn eval(&self, which: Encoding, u: f64, order: u8) -> f64 {
        match which {
            Encoding::Excitation => self.g1(u, order),
            Encoding::Adaptation => self.g2(u, order),
        }
    }

    /// An upper bound `M ≥ g1/g2` on `u ≥ 0`, when one is available in
    /// closed form.
    pub fn ratio_bound(&self) -> Option<f64> {
        let rho = self.excitation.rho();
        match self.excitation {
            // u²/((1+u)(μ+βu)) increases to ρ/β.
            Excitation::RatioQuadratic { .. } if self.beta > 0.0 => Some(rho / self.beta),
            // u/((1+u)(μ+βu)) ≤ u/(1+u)/μ < ρ/μ.
            Excitation::RatioLinear { .. } => Some(rho / self.mu),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.excitation.rho() > 0.0) {
            return Err(Error::InvalidParameter {
                name: "rho",
                reason: "must be > 0",
            });
        }
        if !(self.mu > 0.0) {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: "must be > 0",
            });
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: "must be >= 0",
            });
        }
        if let Some(s) = self.step {
            if !(s.epsilon > 0.0 && s.epsilon < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "epsilon",
                    reason: "must lie in (0, 1)",
                });
            }
            if !(s.gamma > 1.0) || !s.gamma.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "gamma",
                    reason: "must be > 1",
                });
            }
            if !(s.center >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "center",
                    reason: "must be >= 0",
                });
            }
        }
        Ok(())
    }
}

/// Physical parameters and model functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub d: f64,
    pub alpha: f64,
    pub radius: f64,
    pub growth: GrowthModel,
    pub encoding: EncodingFamily,
    /// Constant density for no-growth models (the initial mean).
    pub u_star_override: Option<f64>,
}

impl ModelSpec {
    pub fn new(
        d: f64,
        alpha: f64,
        radius: f64,
        growth: GrowthModel,
        encoding: EncodingFamily,
        u_star_override: Option<f64>,
    ) -> Result<Self> {
        let spec = Self {
            d,
            alpha,
            radius,
            growth,
            encoding,
            u_star_override,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) || !self.d.is_finite() {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: "must be > 0",
            });
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidParameter {
                name: "R",
                reason: "must be > 0",
            });
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: "must be finite",
            });
        }
        if let GrowthModel::Logistic { rate, capacity } = self.growth {
            if !(rate > 0.0) || !rate.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "growth_rate",
                    reason: "must be > 0",
                });
            }
            if !(capacity > 0.0) || !capacity.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "capacity",
                    reason: "must be > 0",
                });
            }
        }
        match (self.growth, self.u_star_override) {
            (GrowthModel::NoGrowth, None) => {
                return Err(Error::InvalidParameter {
                    name: "u_star",
                    reason: "required without growth (sets the conserved mean density)",
                })
            }
            (_, Some(u)) if !(u > 0.0) || !u.is_finite() => {
                return Err(Error::InvalidParameter {
                    name: "u_star",
                    reason: "must be > 0",
                })
            }
            _ => {}
        }
        self.encoding.validate()
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn eval_f(&self, u: f64, order: u8) -> f64 {
        self.growth.eval(u, order)
    }

    pub fn eval_g(&self, which: Encoding, u: f64, order: u8) -> f64 {
        self.encoding.eval(which, u, order)
    }

    /// The homogeneous density: the positive zero of `f`, else the override.
    pub fn u_star(&self) -> Result<f64> {
        match self.growth {
            GrowthModel::Logistic { .. } => {
                self.growth.positive_zero().ok_or(Error::NoConstantState)
            }
            GrowthModel::NoGrowth => self.u_star_override.ok_or(Error::NoConstantState),
        }
    }

    /// Homogeneous state `(u*, k*, v*)` and partial derivatives of `f` and
    /// `w(u, k) = g1(u) − g2(u) k` there.
    pub fn linearize(&self) -> Result<LinearizationData> {
        let u = self.u_star()?;
        let e = &self.encoding;
        let g2 = e.g2(u, 0);
        let k = e.g1(u, 0) / g2;
        Ok(LinearizationData {
            u_star: u,
            k_star: k,
            v_star: k,
            f_u: self.eval_f(u, 1),
            f_uu: self.eval_f(u, 2),
            f_uuu: self.eval_f(u, 3),
            w_u: e.g1(u, 1) - e.g2(u, 1) * k,
            w_k: -g2,
            w_uu: e.g1(u, 2) - e.g2(u, 2) * k,
            w_uk: -e.g2(u, 1),
            w_kk: 0.0,
            w_uuu: e.g1(u, 3) - e.g2(u, 3) * k,
            w_uuk: -e.g2(u, 2),
            w_ukk: 0.0,
            w_kkk: 0.0,
        })
    }
}

/// Constant state and derivative data at `(u*, k*)`.
///
/// `w` is affine in `k`, so every partial of order two or more in `k`
/// vanishes; the fields are kept so the general formulas stay visible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizationData {
    pub u_star: f64,
    pub k_star: f64,
    pub v_star: f64,
    pub f_u: f64,
    pub f_uu: f64,
    pub f_uuu: f64,
    pub w_u: f64,
    pub w_k: f64,
    pub w_uu: f64,
    pub w_uk: f64,
    pub w_kk: f64,
    pub w_uuu: f64,
    pub w_uuk: f64,
    pub w_ukk: f64,
    pub w_kkk: f64,
}

/// Worst deviation between analytic and finite-difference derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeReport {
    pub f: f64,
    pub g1: f64,
    pub g2: f64,
}

impl DerivativeReport {
    pub fn max(&self) -> f64 {
        self.f.max(self.g1).max(self.g2)
    }
}

/// Compares orders 1–3 of `f`, `g1`, `g2` at `u` with central differences of
/// the next-lower analytic derivative.
///
/// Errors are relative to `max(|analytic|, 1)`.
pub fn finite_difference_check(spec: &ModelSpec, u: f64, step: f64) -> DerivativeReport {
    fn worst(eval: impl Fn(f64, u8) -> f64, u: f64, h: f64) -> f64 {
        (1..=3u8)
            .map(|order| {
                let exact = eval(u, order);
                let fd = (eval(u + h, order - 1) - eval(u - h, order - 1)) / (2.0 * h);
                libm::fabs(fd - exact) / libm::fabs(exact).max(1.0)
            })
            .fold(0.0, f64::max)
    }
    DerivativeReport {
        f: worst(|x, o| spec.eval_f(x, o), u, step),
        g1: worst(|x, o| spec.encoding.g1(x, o), u, step),
        g2: worst(|x, o| spec.encoding.g2(x, o), u, step),
    }
}
