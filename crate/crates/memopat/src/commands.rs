//! Command dispatch: each command computes, writes its artifacts into the
//! output directory and returns the lines to print.

use std::fs;
use std::path::PathBuf;

use memopat_core::bifurcation::{coefficients, critical_coefficients};
use memopat_core::elliptic::{convolve_exponential, solve_screened};
use memopat_core::solver::{make_initial, run_to_steady_observed, steady_state_identity_check};
use memopat_core::stability::stability_region;
use memopat_core::{Dispersion, Grid};

use crate::config::{Command, RunConfig};
use crate::error::{Error, Result};
use crate::io::{self, Metadata, Table};
use crate::svg::{Plot, Series, Style};
use crate::sweep::{self, Branch, SweepPlan, DEFAULT_AMP_TOL, DEFAULT_HALF_WIDTH};

/// Printed lines and written files of one command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    fn say(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    meta: Metadata,
    out: Outcome,
}

impl Ctx<'_> {
    fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        let path = io::output_path(&self.cfg.output, name)?;
        io::write_table(&path, &self.meta, table)?;
        self.out.files.push(path);
        Ok(())
    }

    fn svg(&mut self, name: &str, plot: impl FnOnce() -> Plot) -> Result<()> {
        if !self.cfg.emit_svg {
            return Ok(());
        }
        let path = io::output_path(&self.cfg.output, name)?;
        fs::write(&path, plot().render()).map_err(|e| Error::io(&path, e))?;
        self.out.files.push(path);
        Ok(())
    }
}

pub fn dispatch(cfg: &RunConfig) -> Result<Outcome> {
    let mut ctx = Ctx {
        cfg,
        meta: Metadata {
            seed: cfg.solver.seed,
            config: cfg.resolved.clone(),
        },
        out: Outcome::default(),
    };
    let run = match cfg.command {
        Command::StabilityRegion => region(&mut ctx),
        Command::Dispersion => dispersion(&mut ctx),
        Command::Bifcoef => bifcoef(&mut ctx),
        Command::Simulate => simulate(&mut ctx),
        Command::Sweep => sweep_cmd(&mut ctx),
        Command::MassCurve => mass(&mut ctx),
        Command::VerifyEquivalence => equivalence(&mut ctx),
    };
    run.map_err(|e| Error::Command {
        command: cfg.command.as_str(),
        source: Box::new(e),
    })?;
    Ok(ctx.out)
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Precondition(e.to_string()))?
            .install(f)),
    }
}

fn region(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let disp = Dispersion::from_spec(&cfg.spec)?;
    let points = stability_region(&disp, cfg.r_min, cfg.r_max, cfg.n_r, cfg.n_max)?;
    ctx.table("stability_region.csv", &io::region_table(&points))?;
    ctx.svg("stability_region.svg", || Plot {
        title: "critical threshold".into(),
        x_label: "R".into(),
        y_label: "|alpha_crit|".into(),
        series: vec![Series {
            label: "|alpha_crit|".into(),
            points: points.iter().map(|p| (p.radius, p.abs_alpha())).collect(),
            style: Style::Line,
        }],
    })?;
    ctx.out.say(format!("regime: {:?}", disp.regime()));
    ctx.out.say(format!(
        "{} radii in [{}, {}]",
        points.len(),
        cfg.r_min,
        cfg.r_max
    ));
    Ok(())
}

fn dispersion(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let disp = Dispersion::from_spec(&cfg.spec)?;
    let alpha = cfg.spec.alpha;
    let mut t = Table::new(&[
        "n",
        "z",
        "alpha_n",
        "trace",
        "determinant",
        "lambda_plus_re",
        "lambda_plus_im",
        "lambda_minus_re",
        "lambda_minus_im",
    ]);
    for n in 0..=cfg.n_max {
        let z = f64::from(n * n);
        let (p, m, _) = disp.eigenvalues(alpha, n);
        let threshold = if n == 0 {
            f64::NAN
        } else {
            disp.threshold(n).unwrap_or(f64::NAN)
        };
        t.push(
            [
                z,
                threshold,
                disp.trace(z),
                disp.determinant(alpha, z),
                p.re,
                p.im,
                m.re,
                m.im,
            ]
            .iter()
            .map(f64::to_string)
            .fold(vec![n.to_string()], |mut row, v| {
                row.push(v);
                row
            }),
        );
    }
    ctx.table("dispersion.csv", &t)?;
    match disp.critical(cfg.n_max) {
        Ok(c) => ctx
            .out
            .say(format!("critical: alpha = {:.4}, n = {}", c.alpha, c.n)),
        Err(e) => ctx.out.say(format!("critical: {e}")),
    }
    ctx.out.say(format!(
        "max growth rate at alpha = {alpha}: {:.6e}",
        disp.max_growth_rate(alpha, cfg.n_max)
    ));
    Ok(())
}

fn bifcoef(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let disp = Dispersion::from_spec(&cfg.spec)?;
    let crit = critical_coefficients(&disp, cfg.n_max)?;
    let mut t = Table::new(&[
        "n",
        "alpha_n",
        "M1",
        "M2",
        "alpha_dd0",
        "direction",
        "stability",
    ]);
    let mut modes: Vec<u32> = (1..=cfg.n_max.min(8)).collect();
    if !modes.contains(&crit.n) {
        modes.push(crit.n);
    }
    for n in modes {
        let Ok(c) = coefficients(&disp, n) else {
            continue;
        };
        t.push(vec![
            n.to_string(),
            c.alpha_n.to_string(),
            c.eigen.m1.to_string(),
            c.eigen.m2.to_string(),
            c.alpha_dd0.to_string(),
            c.direction.to_string(),
            c.stability.to_string(),
        ]);
    }
    ctx.table("bifcoef.csv", &t)?;
    ctx.out.say(format!("n = {}", crit.n));
    ctx.out.say(format!("alpha_n = {:.4}", crit.alpha_n));
    ctx.out.say(format!(
        "alpha_dd0 = {:.4} (projection {:.4})",
        crit.alpha_dd0, crit.alpha_dd0_projected
    ));
    ctx.out
        .say(format!("branch: {}/{}", crit.direction, crit.stability));
    Ok(())
}

fn simulate(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let spec = &cfg.spec;
    let grid = cfg.solver.grid;
    let init = make_initial(spec, &cfg.solver)?;
    let mut snaps = Table::new(&["t", "x", "u", "k", "v"]);
    let result = run_to_steady_observed(spec, &cfg.solver, &init, cfg.snapshot_stride, |t, s| {
        io::snapshot_rows(&mut snaps, &grid, t, s)
    })?;
    ctx.table(
        "final_state.csv",
        &io::state_table(&grid, &result.final_state),
    )?;
    let mut mass = Table::new(&["t", "mass"]);
    for (t, m) in &result.mass_history {
        mass.push(vec![t.to_string(), m.to_string()]);
    }
    ctx.table("mass_history.csv", &mass)?;
    if cfg.snapshot_stride > 0 {
        ctx.table("snapshots.csv", &snaps)?;
    }
    ctx.svg("final_state.svg", || {
        let g = &grid;
        let profile = |f: &[f64]| g.nodes().zip(f.iter().copied()).collect();
        Plot {
            title: format!("alpha = {}, R = {}", spec.alpha, spec.radius),
            x_label: "x".into(),
            y_label: "density".into(),
            series: vec![
                Series {
                    label: "u".into(),
                    points: profile(&result.final_state.u),
                    style: Style::Line,
                },
                Series {
                    label: "k".into(),
                    points: profile(&result.final_state.k),
                    style: Style::Line,
                },
            ],
        }
    })?;
    let o = &mut ctx.out;
    o.say(format!(
        "converged: {} (t = {}, steps = {}, dt = {})",
        result.converged, result.t_final, result.steps, result.dt
    ));
    o.say(format!("residual: {:.3e}", result.residual));
    o.say(format!("amplitude: {:.6}", result.amplitude));
    o.say(format!("peak_count: {}", result.peak_count));
    o.say(format!("mean_u: {:.8}", result.mean_u));
    o.say(format!("phase: {}", result.phase_sign));
    if spec.growth.is_present() {
        o.say(format!(
            "identity residual: {:.3e}",
            steady_state_identity_check(spec, &grid, &result)
        ));
    }
    Ok(())
}

fn sweep_cmd(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let mut plan = SweepPlan::around_threshold(&cfg.spec, cfg.solver, cfg.n_max)?;
    plan.n_points = cfg.n_points;
    plan.threads = cfg.threads;
    if let Some(d) = cfg.delta0 {
        plan.delta0 = d;
    }
    let diagram = sweep::run_sweep(&plan)?;
    ctx.table("sweep.csv", &io::sweep_table(&diagram.records))?;
    ctx.svg("sweep.svg", || Plot {
        title: format!("R = {}", cfg.spec.radius),
        x_label: "alpha".into(),
        y_label: "max u - min u".into(),
        series: [
            (Branch::Perturbation, Style::Dots),
            (Branch::Continuation, Style::Rings),
        ]
        .into_iter()
        .map(|(b, style)| Series {
            label: b.to_string(),
            points: diagram.branch(b).map(|r| (r.alpha, r.amplitude)).collect(),
            style,
        })
        .collect(),
    })?;
    let o = &mut ctx.out;
    o.say(format!(
        "threshold {:.4} (n = {}), window half-width {}",
        plan.alpha_center, plan.n_crit, plan.delta0
    ));
    let unconverged = diagram.records.iter().filter(|r| !r.converged).count();
    o.say(format!(
        "{} records, {} not converged",
        diagram.records.len(),
        unconverged
    ));
    match sweep::detect_hysteresis(&diagram, DEFAULT_AMP_TOL)? {
        Some((lo, hi)) => o.say(format!("hysteresis window: [{lo}, {hi}]")),
        None => o.say("hysteresis window: none"),
    }
    let report = coefficients(&Dispersion::from_spec(&cfg.spec)?, plan.n_crit)
        .map_err(Error::from)
        .and_then(|c| sweep::validate_against_normal_form(&diagram, &c));
    match report {
        Ok(r) => o.say(format!(
            "normal form: slope {:.4} vs {:.4}, deviation {:.1}%",
            r.slope,
            r.predicted,
            100.0 * r.relative_deviation
        )),
        Err(e) => o.say(format!("normal form: {e}")),
    }
    Ok(())
}

fn mass(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let mut series = Vec::new();
    for &radius in &cfg.r_list {
        let spec = cfg.spec.with_radius(radius);
        let grid = match (cfg.alpha_min, cfg.alpha_max) {
            (Some(lo), Some(hi)) => sweep::linspace(lo, hi, cfg.n_alpha),
            _ => {
                let c = Dispersion::from_spec(&spec)?.critical(cfg.n_max)?;
                let half = DEFAULT_HALF_WIDTH * c.alpha.abs();
                let lo = cfg.alpha_min.unwrap_or(c.alpha - half);
                let hi = cfg.alpha_max.unwrap_or(c.alpha + half);
                if hi <= lo {
                    return Err(Error::Precondition(format!(
                        "empty alpha range at R = {radius}"
                    )));
                }
                sweep::linspace(lo, hi, cfg.n_alpha)
            }
        };
        let solver = cfg.solver;
        series.extend(with_threads(cfg.threads, || {
            sweep::mass_curve(&spec, &solver, &[radius], &grid)
        })??);
    }
    ctx.table("mass_curve.csv", &io::mass_table(&series))?;
    ctx.svg("mass_curve.svg", || Plot {
        title: "mean density".into(),
        x_label: "alpha".into(),
        y_label: "mean u".into(),
        series: series
            .iter()
            .map(|s| Series {
                label: format!("R = {}", s.radius),
                points: s.points.iter().map(|p| (p.alpha, p.mean_u)).collect(),
                style: Style::Line,
            })
            .collect(),
    })?;
    for s in &series {
        ctx.out.say(format!(
            "R = {}: largest single-step drop in mean_u {:.4}",
            s.radius,
            s.max_drop()
        ));
    }
    Ok(())
}

/// Test field for the equivalence check.
pub fn equivalence_field(grid: &Grid) -> Vec<f64> {
    grid.sample(|x| 0.8 + 0.3 * x.cos() + 0.2 * (3.0 * x).cos() + 0.1 * (0.5 * x.cos()).exp())
}

/// Max |screened solve − direct convolution| on the test field.
pub fn equivalence_discrepancy(grid: &Grid, radius: f64) -> Result<f64> {
    let k = equivalence_field(grid);
    let a = solve_screened(&k, radius, grid)?;
    let b = convolve_exponential(&k, radius, grid)?;
    Ok(a.iter()
        .zip(&b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max))
}

fn equivalence(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let grid = cfg.solver.grid;
    let radius = cfg.spec.radius;
    let k = equivalence_field(&grid);
    let a = solve_screened(&k, radius, &grid)?;
    let b = convolve_exponential(&k, radius, &grid)?;
    let mut t = Table::new(&["x", "k", "screened", "convolved"]);
    for (i, x) in grid.nodes().enumerate() {
        t.push(vec![
            x.to_string(),
            k[i].to_string(),
            a[i].to_string(),
            b[i].to_string(),
        ]);
    }
    ctx.table("equivalence.csv", &t)?;
    let max = a
        .iter()
        .zip(&b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    ctx.out
        .say(format!("n_cells = {}, R = {}", grid.n_cells(), radius));
    ctx.out.say(format!("max discrepancy: {max:.3e}"));
    Ok(())
}
