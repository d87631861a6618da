//! Two-direction α sweeps around the critical threshold, hysteresis
//! detection, mean-density curves and the normal-form comparison.

use rayon::prelude::*;

use memopat_core::bifurcation::{BifurcationCoefficients, BranchStability};
use memopat_core::solver::{
    self, kicked_state, make_initial, run_to_steady, FieldState, RunResult, SolverConfig,
};
use memopat_core::{Dispersion, ModelSpec};

use crate::error::{Error, Result};

pub const DEFAULT_POINTS: usize = 50;
/// Half-width of the default window as a fraction of `|α*|`.
pub const DEFAULT_HALF_WIDTH: f64 = 0.15;
pub const DEFAULT_AMP_TOL: f64 = 0.05;
/// Amplitude of the `cos(n x)` kick that seeds the continuation branch.
pub const CONTINUATION_KICK: f64 = 0.5;
/// Records below this amplitude count as homogeneous.
pub const ONSET_AMPLITUDE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Perturbation,
    Continuation,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Perturbation => "perturbation",
            Branch::Continuation => "continuation",
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "perturbation" => Ok(Branch::Perturbation),
            "continuation" => Ok(Branch::Continuation),
            other => Err(format!("unknown branch `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    /// Model with the radius set; `alpha` is overwritten per point.
    pub spec: ModelSpec,
    pub solver: SolverConfig,
    pub alpha_center: f64,
    pub delta0: f64,
    pub n_points: usize,
    /// Wavenumber of the continuation kick.
    pub n_crit: u32,
    pub branches: Vec<Branch>,
    /// Cap on concurrent perturbation runs; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl SweepPlan {
    /// Window of half-width `0.15|α*|` around the critical threshold.
    pub fn around_threshold(spec: &ModelSpec, solver: SolverConfig, n_max: u32) -> Result<Self> {
        let crit = Dispersion::from_spec(spec)?.critical(n_max)?;
        Ok(Self {
            spec: *spec,
            solver,
            alpha_center: crit.alpha,
            delta0: DEFAULT_HALF_WIDTH * crit.alpha.abs(),
            n_points: DEFAULT_POINTS,
            n_crit: crit.n,
            branches: vec![Branch::Perturbation, Branch::Continuation],
            threads: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta0 > 0.0) || !self.delta0.is_finite() {
            return Err(Error::Precondition("delta0 must be > 0".into()));
        }
        if self.n_points < 2 {
            return Err(Error::Precondition("n_points must be >= 2".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Precondition("threads must be >= 1".into()));
        }
        self.spec.validate()?;
        self.solver.validate()?;
        Ok(())
    }

    /// Evenly spaced α over `[α* − δ0, α* + δ0]`, ascending.
    pub fn alphas(&self) -> Vec<f64> {
        linspace(
            self.alpha_center - self.delta0,
            self.alpha_center + self.delta0,
            self.n_points,
        )
    }

    /// `+1` if destabilization lies toward larger α, `−1` otherwise.
    pub fn destabilizing_sign(&self) -> Result<f64> {
        let lin = self.spec.linearize()?;
        Ok(if lin.w_u < 0.0 { 1.0 } else { -1.0 })
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BifurcationRecord {
    pub alpha: f64,
    pub branch: Branch,
    pub amplitude: f64,
    pub peak_count: usize,
    pub mean_u: f64,
    pub converged: bool,
    pub t_final: f64,
}

impl BifurcationRecord {
    fn from_run(alpha: f64, branch: Branch, run: &RunResult) -> Self {
        Self {
            alpha,
            branch,
            amplitude: run.amplitude,
            peak_count: run.peak_count,
            mean_u: run.mean_u,
            converged: run.converged,
            t_final: run.t_final,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BifurcationDiagram {
    pub records: Vec<BifurcationRecord>,
}

impl BifurcationDiagram {
    pub fn branch(&self, branch: Branch) -> impl Iterator<Item = &BifurcationRecord> + '_ {
        self.records.iter().filter(move |r| r.branch == branch)
    }

    pub fn has_branch(&self, branch: Branch) -> bool {
        self.branch(branch).next().is_some()
    }

    /// Sorts by branch, then α.
    pub fn normalize(&mut self) {
        self.records
            .sort_by(|a, b| a.branch.cmp(&b.branch).then(a.alpha.total_cmp(&b.alpha)));
    }
}

/// Runs every requested branch of the plan. Records come back sorted by
/// α within each branch.
pub fn run_sweep(plan: &SweepPlan) -> Result<BifurcationDiagram> {
    plan.validate()?;
    let mut diagram = BifurcationDiagram::default();
    for &branch in &plan.branches {
        let records = match branch {
            Branch::Perturbation => perturbation_branch(plan)?,
            Branch::Continuation => continuation_branch(plan)?,
        };
        diagram.records.extend(records);
    }
    diagram.normalize();
    Ok(diagram)
}

fn perturbation_branch(plan: &SweepPlan) -> Result<Vec<BifurcationRecord>> {
    let alphas = plan.alphas();
    let job = |(i, &alpha): (usize, &f64)| -> Result<BifurcationRecord> {
        let spec = plan.spec.with_alpha(alpha);
        let mut cfg = plan.solver;
        cfg.stream = i as u64;
        let init = make_initial(&spec, &cfg)?;
        let run = run_to_steady(&spec, &cfg, &init)?;
        Ok(BifurcationRecord::from_run(
            alpha,
            Branch::Perturbation,
            &run,
        ))
    };
    let collect = || {
        alphas
            .par_iter()
            .enumerate()
            .map(job)
            .collect::<Result<Vec<_>>>()
    };
    match plan.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Precondition(e.to_string()))?
            .install(collect),
        None => collect(),
    }
}

/// Starts beyond the threshold from a kicked state and walks back toward
/// the stable side, seeding each point with the previous terminal state.
fn continuation_branch(plan: &SweepPlan) -> Result<Vec<BifurcationRecord>> {
    let mut alphas = plan.alphas();
    if plan.destabilizing_sign()? > 0.0 {
        alphas.reverse();
    }
    let mut state: Option<FieldState> = None;
    let mut out = Vec::with_capacity(alphas.len());
    for alpha in alphas {
        let spec = plan.spec.with_alpha(alpha);
        let init = match state.take() {
            Some(s) => s,
            None => kicked_state(&spec, &plan.solver.grid, plan.n_crit, CONTINUATION_KICK)?,
        };
        let run = run_to_steady(&spec, &plan.solver, &init)?;
        out.push(BifurcationRecord::from_run(
            alpha,
            Branch::Continuation,
            &run,
        ));
        state = Some(run.final_state);
    }
    Ok(out)
}

/// α-interval over which converged records of the two branches at the
/// same α differ in amplitude by more than `amp_tol`.
pub fn detect_hysteresis(diagram: &BifurcationDiagram, amp_tol: f64) -> Result<Option<(f64, f64)>> {
    if !diagram.has_branch(Branch::Perturbation) || !diagram.has_branch(Branch::Continuation) {
        return Err(Error::InsufficientData(
            "hysteresis needs both branches".into(),
        ));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in diagram.branch(Branch::Perturbation).filter(|r| r.converged) {
        let partner = diagram
            .branch(Branch::Continuation)
            .find(|c| c.converged && c.alpha == p.alpha);
        if let Some(c) = partner {
            if (p.amplitude - c.amplitude).abs() > amp_tol {
                lo = lo.min(p.alpha);
                hi = hi.max(p.alpha);
            }
        }
    }
    Ok((lo <= hi).then_some((lo, hi)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassPoint {
    pub alpha: f64,
    pub mean_u: f64,
    pub amplitude: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassSeries {
    pub radius: f64,
    pub points: Vec<MassPoint>,
}

impl MassSeries {
    /// Largest decrease of `mean_u` between consecutive points.
    pub fn max_drop(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[0].mean_u - w[1].mean_u)
            .fold(0.0, f64::max)
    }
}

/// Mean density along α for each radius. α is traversed from the stable
/// side in the destabilizing direction; every point starts from the
/// previous terminal state plus fresh mean-zero noise of size
/// `perturb_amp`.
pub fn mass_curve(
    spec: &ModelSpec,
    solver: &SolverConfig,
    radii: &[f64],
    alpha_grid: &[f64],
) -> Result<Vec<MassSeries>> {
    if !spec.growth.is_present() {
        return Err(Error::Precondition(
            "mass curve needs logistic growth".into(),
        ));
    }
    solver.validate()?;
    radii
        .par_iter()
        .map(|&radius| {
            let template = spec.with_radius(radius);
            let sign = if template.linearize()?.w_u < 0.0 {
                1.0
            } else {
                -1.0
            };
            let mut alphas = alpha_grid.to_vec();
            alphas.sort_by(|a, b| (sign * a).total_cmp(&(sign * b)));
            let mut state: Option<FieldState> = None;
            let mut points = Vec::with_capacity(alphas.len());
            for (i, alpha) in alphas.into_iter().enumerate() {
                let s = template.with_alpha(alpha);
                let mut cfg = *solver;
                cfg.stream = i as u64;
                let mut init = make_initial(&s, &cfg)?;
                if let Some(prev) = state.take() {
                    let u_star = s.u_star()?;
                    for (u, p) in init.u.iter_mut().zip(&prev.u) {
                        *u += p - u_star;
                    }
                    init.k = prev.k;
                    init.v = prev.v;
                }
                let run = run_to_steady(&s, &cfg, &init)?;
                points.push(MassPoint {
                    alpha,
                    mean_u: run.mean_u,
                    amplitude: run.amplitude,
                    converged: run.converged,
                });
                state = Some(run.final_state);
            }
            Ok(MassSeries { radius, points })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormReport {
    /// Least-squares slope of `s²` against `α − α_n`, `s = amplitude/2`.
    pub slope: f64,
    /// `2/α″(0)`.
    pub predicted: f64,
    pub relative_deviation: f64,
    pub points_used: usize,
}

pub const NORMAL_FORM_POINTS: usize = 5;

/// Fits the squared half-amplitude against `α − α_n` over the five
/// converged patterned records closest to onset and compares the slope
/// with the local branch `α − α_n ≈ α″(0) s²/2`.
pub fn validate_against_normal_form(
    diagram: &BifurcationDiagram,
    coeffs: &BifurcationCoefficients,
) -> Result<NormalFormReport> {
    if coeffs.stability != BranchStability::Stable {
        return Err(Error::Precondition(
            "the local branch is unstable; the sweep does not follow it".into(),
        ));
    }
    let a_n = coeffs.alpha_n;
    // the local branch lies on the side sign(α″(0)) of α_n
    let side = coeffs.alpha_dd0.signum();
    let pick = |branch: Branch| -> Vec<&BifurcationRecord> {
        let mut v: Vec<_> = diagram
            .branch(branch)
            .filter(|r| {
                r.converged && side * (r.alpha - a_n) > 0.0 && r.amplitude > ONSET_AMPLITUDE
            })
            .collect();
        v.sort_by(|a, b| (a.alpha - a_n).abs().total_cmp(&(b.alpha - a_n).abs()));
        v.truncate(NORMAL_FORM_POINTS);
        v
    };
    let chosen = [Branch::Continuation, Branch::Perturbation]
        .into_iter()
        .map(pick)
        .find(|v| v.len() == NORMAL_FORM_POINTS)
        .ok_or_else(|| {
            Error::InsufficientData(format!(
                "need {NORMAL_FORM_POINTS} converged post-onset records on one branch"
            ))
        })?;
    let xs: Vec<f64> = chosen.iter().map(|r| r.alpha - a_n).collect();
    let ys: Vec<f64> = chosen.iter().map(|r| (0.5 * r.amplitude).powi(2)).collect();
    let slope = least_squares_slope(&xs, &ys)
        .ok_or_else(|| Error::InsufficientData("post-onset records share one α".into()))?;
    let predicted = 2.0 / coeffs.alpha_dd0;
    Ok(NormalFormReport {
        slope,
        predicted,
        relative_deviation: ((slope - predicted) / predicted).abs(),
        points_used: chosen.len(),
    })
}

/// Slope of the least-squares line with intercept.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Single run from the standard perturbed initial data.
pub fn simulate(spec: &ModelSpec, cfg: &SolverConfig) -> Result<RunResult> {
    let init = make_initial(spec, cfg)?;
    Ok(solver::run_to_steady(spec, cfg, &init)?)
}
