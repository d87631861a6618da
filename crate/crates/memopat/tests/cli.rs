use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use tempfile::TempDir;

use memopat::io::read_region;
use memopat::parse_config;

fn memopat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memopat"))
        .args(args)
        .arg("--output")
        .arg(dir)
        .env_remove("MEMOPAT_OUTPUT")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// File contents without the timestamp line.
fn stable_contents(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("# timestamp"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn bifcoef_reports_the_subcritical_point() {
    let dir = TempDir::new().unwrap();
    let out = memopat(
        dir.path(),
        &["--command", "bifcoef", "--growth", "logistic", "--R", "2"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("n = 1"), "{text}");
    assert!(text.contains("alpha_n = -17.7895"), "{text}");
    assert!(text.contains("branch: forward/unstable"), "{text}");
    assert!(dir.path().join("bifcoef.csv").exists());
}

#[test]
fn verify_equivalence_meets_its_bound() {
    let dir = TempDir::new().unwrap();
    let out = memopat(
        dir.path(),
        &[
            "--command",
            "verify-equivalence",
            "--growth",
            "logistic",
            "--R",
            "0.12",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let value: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("max discrepancy: "))
        .expect("discrepancy line")
        .parse()
        .unwrap();
    assert!(value <= 1e-4, "{value}");
}

#[test]
fn sweeps_are_reproducible() {
    let args = [
        "--command",
        "sweep",
        "--growth",
        "logistic",
        "--R",
        "0.3",
        "--n_cells",
        "32",
        "--dt",
        "0.05",
        "--t_max",
        "100",
        "--n_points",
        "40",
        "--seed",
        "7",
    ];
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let threaded: Vec<&str> = args.iter().copied().chain(["--threads", "1"]).collect();
    let oa = memopat(a.path(), &args);
    let ob = memopat(b.path(), &threaded);
    assert!(
        oa.status.success() && ob.status.success(),
        "{}{}",
        stderr(&oa),
        stderr(&ob)
    );
    let ca = stable_contents(&a.path().join("sweep.csv"));
    let cb = stable_contents(&b.path().join("sweep.csv"));
    // the resolved config differs only in the thread count and directory
    let strip = |s: &str| {
        s.lines()
            .filter(|l| !l.starts_with("# config: threads") && !l.starts_with("# config: output"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&ca), strip(&cb));
    assert!(ca.contains("# seed: 7"));
}

#[test]
fn unknown_key_exits_with_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "command = bifcoef\ngrowth = logistic\nradius = 2\n").unwrap();
    let out = memopat(dir.path(), &[cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 3") && err.contains("radius"), "{err}");
}

#[test]
fn negative_radius_is_rejected_by_name() {
    let dir = TempDir::new().unwrap();
    let out = memopat(
        dir.path(),
        &["--command", "bifcoef", "--growth", "logistic", "--R", "-1"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`R`"), "{}", stderr(&out));
}

#[test]
fn no_growth_without_density_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = memopat(dir.path(), &["--command", "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("u_star"), "{}", stderr(&out));
}

#[test]
fn missing_config_file_fails() {
    let dir = TempDir::new().unwrap();
    let out = memopat(
        dir.path(),
        &[dir.path().join("absent.cfg").to_str().unwrap()],
    );
    assert_ne!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("absent.cfg"));
}

#[test]
fn output_directory_from_environment() {
    let target = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_memopat"))
        .args(["--command", "bifcoef", "--growth", "logistic"])
        .env("MEMOPAT_OUTPUT", target.path())
        .current_dir(target.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(target.path().join("bifcoef.csv").exists());

    // an explicit flag wins
    let other = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_memopat"))
        .args(["--command", "bifcoef", "--growth", "logistic", "--output"])
        .arg(other.path())
        .env("MEMOPAT_OUTPUT", target.path().join("unused"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(other.path().join("bifcoef.csv").exists());
    assert!(!target.path().join("unused").exists());
}

#[test]
fn stability_region_round_trips() {
    let dir = TempDir::new().unwrap();
    let out = memopat(
        dir.path(),
        &[
            "--command",
            "stability-region",
            "--growth",
            "logistic",
            "--n_R",
            "12",
            "--emit_svg",
            "true",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let points = read_region(&dir.path().join("stability_region.csv")).unwrap();
    assert_eq!(points.len(), 12);
    assert!((points[0].radius - 0.05).abs() < 1e-12);
    assert!((points[11].radius - 3.0).abs() < 1e-12);
    for w in points.windows(2) {
        assert!(w[0].radius < w[1].radius);
        assert!(w[0].n_crit >= w[1].n_crit);
    }
    assert!(points.iter().all(|p| p.alpha_crit < 0.0));
    let svg = std::fs::read_to_string(dir.path().join("stability_region.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# point Q\ncommand = bifcoef\ngrowth = logistic\nR = 2\n",
    )
    .unwrap();
    let out = memopat(dir.path(), &[cfg.to_str().unwrap(), "--R=0.3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("n = 2") && text.contains("backward/stable"),
        "{text}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn parser_never_panics(text in "[a-zA-Z_=#. 0-9\\-\n]{0,200}") {
        let _ = parse_config(&text);
    }

    #[test]
    fn parser_accepts_arbitrary_key_orders(radius in 0.05..3.0f64, alpha in -20.0..20.0f64, swap in any::<bool>()) {
        let (a, b) = (format!("R = {radius}"), format!("alpha = {alpha}"));
        let body = if swap { format!("{b}\n{a}") } else { format!("{a}\n{b}") };
        let cfg = parse_config(&format!("growth = logistic\n{body}\n")).unwrap();
        prop_assert_eq!(cfg.spec.radius, radius);
        prop_assert_eq!(cfg.spec.alpha, alpha);
    }
}
