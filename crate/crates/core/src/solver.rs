//! IMEX time stepping of the local system on `(0, π)`.
//!
//! Each step:
//! 1. `v` from the screened-Poisson solve of the current `k`;
//! 2. face fluxes `Φ_{i+½} = α ū_{i+½} (v_{i+1} − v_i)/h`, zero at both ends;
//! 3. `(I − dt·d·L) uⁿ⁺¹ = uⁿ + dt (div Φ + f(uⁿ))`;
//! 4. `k ← k e^{−g2 dt} + (g1/g2)(1 − e^{−g2 dt})` with `u = uⁿ⁺¹`.
//!
//! The trapezoid sums of `L u` and `div Φ` telescope to zero, so without
//! growth `∫u` is conserved to round-off, and the homogeneous state is a
//! fixed point of the scheme.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elliptic::{apply_laplacian, shifted_laplacian, Grid, ScreenedSolver, TridiagonalLu};
use crate::model::ModelSpec;
use crate::observe::{self, PhaseSign};
use crate::{Error, Result};

/// `u` above this is treated as blow-up.
pub const BLOW_UP_CEILING: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub grid: Grid,
    pub dt: f64,
    pub t_max: f64,
    pub steady_tol: f64,
    pub seed: u64,
    /// ChaCha stream; independent runs sharing a seed use distinct streams.
    pub stream: u64,
    pub perturb_amp: f64,
    /// How many times `dt` is halved after a blow-up before giving up.
    pub max_halvings: u32,
    /// Steps between samples of `∫u`.
    pub mass_stride: usize,
}

impl SolverConfig {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            dt: 1e-3,
            t_max: 2000.0,
            steady_tol: 1e-8,
            seed: 0,
            stream: 0,
            perturb_amp: 0.01,
            max_halvings: 6,
            mass_stride: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "must be > 0",
            });
        }
        if !(self.t_max > 0.0) {
            return Err(Error::InvalidParameter {
                name: "t_max",
                reason: "must be > 0",
            });
        }
        if !(self.steady_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "steady_tol",
                reason: "must be > 0",
            });
        }
        if !(self.perturb_amp >= 0.0) || !self.perturb_amp.is_finite() {
            return Err(Error::InvalidParameter {
                name: "perturb_amp",
                reason: "must be >= 0",
            });
        }
        if self.mass_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "mass_stride",
                reason: "must be >= 1",
            });
        }
        Ok(())
    }
}

/// `(u, k, v)` at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
}

impl FieldState {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        grid.check(&self.u)?;
        grid.check(&self.k)?;
        grid.check(&self.v)
    }
}

/// `u₀ = u* + η` with `η` uniform in `(−a, a)` shifted to zero trapezoid
/// mean, `k₀ = k*`, `v₀ = k*`.
pub fn make_initial(spec: &ModelSpec, config: &SolverConfig) -> Result<FieldState> {
    let lin = spec.linearize()?;
    let grid = &config.grid;
    let a = config.perturb_amp;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(config.stream);
    let mut eta: Vec<f64> = (0..grid.len())
        .map(|_| if a > 0.0 { rng.gen_range(-a..a) } else { 0.0 })
        .collect();
    let shift = grid.mean(&eta);
    for e in &mut eta {
        *e -= shift;
    }
    let u = eta.iter().map(|e| lin.u_star + e).collect();
    let k = vec![lin.k_star; grid.len()];
    let v = ScreenedSolver::new(*grid, spec.radius)?.solve(&k);
    Ok(FieldState { u, k, v })
}

/// Reusable stepping workspace for one model, grid and time step.
#[derive(Debug, Clone)]
pub struct Stepper {
    spec: ModelSpec,
    grid: Grid,
    dt: f64,
    screened: ScreenedSolver,
    diffusion: TridiagonalLu,
    rhs: Vec<f64>,
    flux: Vec<f64>,
    /// Largest `g1(u)/g2(u)` seen by the map update.
    pub ratio_max: f64,
}

impl Stepper {
    pub fn new(spec: &ModelSpec, grid: Grid, dt: f64) -> Result<Self> {
        spec.validate()?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "must be > 0",
            });
        }
        Ok(Self {
            spec: *spec,
            grid,
            dt,
            screened: ScreenedSolver::new(grid, spec.radius)?,
            diffusion: shifted_laplacian(&grid, dt * spec.d),
            rhs: vec![0.0; grid.len()],
            flux: vec![0.0; grid.n_cells()],
            ratio_max: f64::NEG_INFINITY,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Recomputes `v` from `k`.
    pub fn refresh_potential(&self, state: &mut FieldState) {
        self.screened.solve_into(&state.k, &mut state.v);
    }

    /// Advances `state` by one step and returns `max_i |Δu_i|`.
    pub fn step(&mut self, state: &mut FieldState) -> Result<f64> {
        let n = self.grid.n_cells();
        let h = self.grid.h();
        let dt = self.dt;
        let alpha = self.spec.alpha;

        self.screened.solve_into(&state.k, &mut state.v);

        let (u, v) = (&state.u, &state.v);
        for (i, phi) in self.flux.iter_mut().enumerate() {
            *phi = alpha * 0.5 * (u[i] + u[i + 1]) * (v[i + 1] - v[i]) / h;
        }
        let half = 0.5 * h;
        for i in 0..=n {
            let div = if i == 0 {
                self.flux[0] / half
            } else if i == n {
                -self.flux[n - 1] / half
            } else {
                (self.flux[i] - self.flux[i - 1]) / h
            };
            self.rhs[i] = u[i] + dt * (div + self.spec.eval_f(u[i], 0));
        }
        self.diffusion.solve_in_place(&mut self.rhs);

        let mut change = 0.0f64;
        let mut u_max = f64::NEG_INFINITY;
        let mut finite = true;
        for (old, new) in state.u.iter_mut().zip(&self.rhs) {
            change = change.max(libm::fabs(new - *old));
            u_max = u_max.max(*new);
            finite &= new.is_finite();
            *old = *new;
        }

        let enc = &self.spec.encoding;
        for (k, &uu) in state.k.iter_mut().zip(&state.u) {
            let g2 = enc.g2(uu, 0);
            let ratio = enc.g1(uu, 0) / g2;
            let decay = libm::expm1(-g2 * dt);
            // k e^{−g2 dt} + ratio (1 − e^{−g2 dt})
            *k += (*k - ratio) * decay;
            self.ratio_max = self.ratio_max.max(ratio);
            finite &= k.is_finite();
        }

        if !finite || u_max > BLOW_UP_CEILING || !change.is_finite() {
            return Err(Error::BlowUp { t: f64::NAN });
        }
        Ok(change)
    }
}

/// One IMEX step with a fresh workspace.
pub fn step(spec: &ModelSpec, state: &FieldState, grid: Grid, dt: f64) -> Result<FieldState> {
    state.check(&grid)?;
    let mut stepper = Stepper::new(spec, grid, dt)?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub final_state: FieldState,
    pub converged: bool,
    pub t_final: f64,
    pub steps: u64,
    pub dt: f64,
    /// Last value of `max|Δu|/dt`.
    pub residual: f64,
    pub amplitude: f64,
    pub peak_count: usize,
    pub mean_u: f64,
    pub phase_sign: PhaseSign,
    /// `(t, ∫u)` samples.
    pub mass_history: Vec<(f64, f64)>,
    pub k_min: f64,
    pub k_max: f64,
    /// `max k₀` and the largest `g1(u)/g2(u)` met along the trajectory.
    pub k0_max: f64,
    pub ratio_max: f64,
}

/// Steps until `max|Δu|/dt ≤ steady_tol` or `t > t_max`, halving `dt` and
/// restarting on blow-up.
pub fn run_to_steady(
    spec: &ModelSpec,
    config: &SolverConfig,
    initial: &FieldState,
) -> Result<RunResult> {
    run_to_steady_observed(spec, config, initial, 0, |_, _| {})
}

/// Like [`run_to_steady`], calling `observer(t, state)` every `stride`
/// steps (never if `stride == 0`) and at the end.
pub fn run_to_steady_observed(
    spec: &ModelSpec,
    config: &SolverConfig,
    initial: &FieldState,
    stride: usize,
    mut observer: impl FnMut(f64, &FieldState),
) -> Result<RunResult> {
    config.validate()?;
    initial.check(&config.grid)?;
    let mut dt = config.dt;
    let mut attempt = 0;
    loop {
        match integrate(spec, config, initial, dt, stride, &mut observer) {
            Err(Error::BlowUp { .. }) if attempt < config.max_halvings => {
                attempt += 1;
                dt *= 0.5;
            }
            other => return other,
        }
    }
}

fn integrate(
    spec: &ModelSpec,
    config: &SolverConfig,
    initial: &FieldState,
    dt: f64,
    stride: usize,
    observer: &mut impl FnMut(f64, &FieldState),
) -> Result<RunResult> {
    let grid = config.grid;
    let mut stepper = Stepper::new(spec, grid, dt)?;
    let mut state = initial.clone();
    let k0_max = state.k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut k_min = state.k.iter().copied().fold(f64::INFINITY, f64::min);
    let mut k_max = k0_max;
    let mut mass_history = vec![(0.0, grid.integrate(&state.u))];
    let max_steps = libm::ceil(config.t_max / dt) as u64;
    let mut steps = 0u64;
    let mut residual = f64::INFINITY;
    let mut converged = false;

    if stride > 0 {
        stepper.refresh_potential(&mut state);
        observer(0.0, &state);
    }
    while steps < max_steps {
        let change = stepper.step(&mut state).map_err(|_| Error::BlowUp {
            t: (steps + 1) as f64 * dt,
        })?;
        steps += 1;
        residual = change / dt;
        for &k in &state.k {
            k_min = k_min.min(k);
            k_max = k_max.max(k);
        }
        let t = steps as f64 * dt;
        if steps % config.mass_stride as u64 == 0 {
            mass_history.push((t, grid.integrate(&state.u)));
        }
        if stride > 0 && steps % stride as u64 == 0 {
            observer(t, &state);
        }
        if residual <= config.steady_tol {
            converged = true;
            break;
        }
    }
    let t_final = steps as f64 * dt;
    stepper.refresh_potential(&mut state);
    if mass_history.last().map(|m| m.0) != Some(t_final) {
        mass_history.push((t_final, grid.integrate(&state.u)));
    }
    if stride > 0 {
        observer(t_final, &state);
    }

    Ok(RunResult {
        converged,
        t_final,
        steps,
        dt,
        residual,
        amplitude: observe::amplitude(&state.u),
        peak_count: observe::peak_count(&state.u),
        mean_u: grid.mean(&state.u),
        phase_sign: observe::phase_sign(&grid, &state.u, &state.k),
        mass_history,
        k_min,
        k_max,
        k0_max,
        ratio_max: stepper.ratio_max,
        final_state: state,
    })
}

/// `|∫₀^π f(u) dx|` on the final state; zero for exact steady states.
pub fn steady_state_identity_check(spec: &ModelSpec, grid: &Grid, result: &RunResult) -> f64 {
    let fu: Vec<f64> = result
        .final_state
        .u
        .iter()
        .map(|&u| spec.eval_f(u, 0))
        .collect();
    libm::fabs(grid.integrate(&fu))
}

/// `u* + amp·cos(n x)`, `k = k*`: a finite kick toward mode `n`.
pub fn kicked_state(spec: &ModelSpec, grid: &Grid, n: u32, amp: f64) -> Result<FieldState> {
    let lin = spec.linearize()?;
    let u = grid.sample(|x| lin.u_star + amp * libm::cos(f64::from(n) * x));
    let k = vec![lin.k_star; grid.len()];
    let v = ScreenedSolver::new(*grid, spec.radius)?.solve(&k);
    Ok(FieldState { u, k, v })
}

/// Discrete right-hand side `d L u + div Φ + f(u)` of the `u` equation,
/// with `v` taken from the state.
pub fn u_rate(spec: &ModelSpec, grid: &Grid, state: &FieldState) -> Vec<f64> {
    let n = grid.n_cells();
    let h = grid.h();
    let mut lu = vec![0.0; grid.len()];
    apply_laplacian(grid, &state.u, &mut lu);
    let (u, v) = (&state.u, &state.v);
    let flux: Vec<f64> = (0..n)
        .map(|i| spec.alpha * 0.5 * (u[i] + u[i + 1]) * (v[i + 1] - v[i]) / h)
        .collect();
    (0..=n)
        .map(|i| {
            let div = if i == 0 {
                flux[0] / (0.5 * h)
            } else if i == n {
                -flux[n - 1] / (0.5 * h)
            } else {
                (flux[i] - flux[i - 1]) / h
            };
            spec.d * lu[i] + div + spec.eval_f(u[i], 0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EncodingFamily, GrowthModel};

    fn ex1(alpha: f64, radius: f64) -> ModelSpec {
        ModelSpec::new(
            1.0,
            alpha,
            radius,
            GrowthModel::Logistic {
                rate: 1.0,
                capacity: 1.0,
            },
            EncodingFamily::ratio_quadratic(1.0, 0.15, 0.5),
            None,
        )
        .unwrap()
    }

    #[test]
    fn initial_data_contract() {
        let spec = ex1(-2.0, 0.3);
        let mut cfg = SolverConfig::new(Grid::new(64).unwrap());
        cfg.seed = 7;
        let a = make_initial(&spec, &cfg).unwrap();
        let b = make_initial(&spec, &cfg).unwrap();
        assert_eq!(a, b);
        assert!((cfg.grid.mean(&a.u) - 1.0).abs() < 1e-14);
        assert!(a.u.iter().all(|u| (u - 1.0).abs() < 0.02));
        cfg.stream = 1;
        assert_ne!(make_initial(&spec, &cfg).unwrap().u, a.u);

        cfg.perturb_amp = 0.0;
        let flat = make_initial(&spec, &cfg).unwrap();
        assert!(flat.u.iter().all(|&u| u == 1.0));
        let k_star = spec.linearize().unwrap().k_star;
        assert!(flat.k.iter().all(|&k| k == k_star));
    }

    #[test]
    fn homogeneous_state_is_fixed_point() {
        let spec = ex1(-5.0, 0.3);
        let grid = Grid::new(64).unwrap();
        let mut cfg = SolverConfig::new(grid);
        cfg.perturb_amp = 0.0;
        let s0 = make_initial(&spec, &cfg).unwrap();
        let mut stepper = Stepper::new(&spec, grid, 1e-3).unwrap();
        let mut s = s0.clone();
        for _ in 0..100 {
            stepper.step(&mut s).unwrap();
            let du =
                s.u.iter()
                    .zip(&s0.u)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
            let dk =
                s.k.iter()
                    .zip(&s0.k)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
            assert!(du < 1e-13 && dk < 1e-13);
        }
    }

    #[test]
    fn map_update_is_exact_for_frozen_u() {
        // g2 ≡ μ, g1 = ρu/(1+u): k(t) = r + (k0 − r) e^{−μ t}
        let spec = ModelSpec::new(
            1.0,
            0.0,
            0.5,
            GrowthModel::NoGrowth,
            EncodingFamily::ratio_linear(1.0, 0.4, 0.0),
            Some(1.0),
        )
        .unwrap();
        let grid = Grid::new(16).unwrap();
        let dt = 0.01;
        let mut stepper = Stepper::new(&spec, grid, dt).unwrap();
        let mut s = FieldState {
            u: vec![1.0; grid.len()],
            k: vec![2.0; grid.len()],
            v: vec![2.0; grid.len()],
        };
        for _ in 0..50 {
            stepper.step(&mut s).unwrap();
        }
        let r = 0.5 / 0.4;
        let exact = r + (2.0 - r) * libm::exp(-0.4 * 0.5);
        for k in &s.k {
            assert!((k - exact).abs() < 1e-14, "{k} vs {exact}");
        }
    }

    #[test]
    fn no_growth_conserves_mass() {
        let spec = ModelSpec::new(
            1.0,
            -2.5,
            0.3,
            GrowthModel::NoGrowth,
            EncodingFamily::ratio_quadratic(1.0, 0.15, 0.5),
            Some(1.0),
        )
        .unwrap();
        let grid = Grid::new(64).unwrap();
        let mut cfg = SolverConfig::new(grid);
        cfg.perturb_amp = 0.2;
        let mut s = make_initial(&spec, &cfg).unwrap();
        let mut stepper = Stepper::new(&spec, grid, 1e-3).unwrap();
        let m0 = grid.integrate(&s.u);
        for _ in 0..2000 {
            let before = grid.integrate(&s.u);
            stepper.step(&mut s).unwrap();
            let after = grid.integrate(&s.u);
            assert!((after - before).abs() <= 1e-12 * before.abs());
        }
        assert!((grid.integrate(&s.u) - m0).abs() < 1e-12 * m0);
    }

    #[test]
    fn stable_side_relaxes_to_homogeneous() {
        let spec = ex1(-2.5, 0.3);
        let mut cfg = SolverConfig::new(Grid::new(64).unwrap());
        cfg.dt = 0.01;
        let init = make_initial(&spec, &cfg).unwrap();
        let r = run_to_steady(&spec, &cfg, &init).unwrap();
        assert!(r.converged);
        assert!(r.amplitude < 1e-6);
        assert_eq!(r.peak_count, 0);
        assert_eq!(r.phase_sign, PhaseSign::Flat);
        assert!(steady_state_identity_check(&spec, &cfg.grid, &r) < 1e-9);
    }

    #[test]
    fn blow_up_is_reported() {
        let spec = ex1(-2.5, 0.3);
        let grid = Grid::new(16).unwrap();
        let mut s = FieldState {
            u: vec![f64::NAN; grid.len()],
            k: vec![0.7; grid.len()],
            v: vec![0.7; grid.len()],
        };
        let mut st = Stepper::new(&spec, grid, 1e-3).unwrap();
        assert!(matches!(st.step(&mut s), Err(Error::BlowUp { .. })));
    }
}
