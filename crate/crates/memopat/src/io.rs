//! CSV tables with a `#` metadata block.
//!
//! Every file starts with comment lines (tool version, timestamp, seed and
//! the resolved configuration), then a header row and data rows. Floats are
//! written in Rust's shortest round-trip form, so reading a table back
//! reproduces the written values exactly.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use memopat_core::solver::FieldState;
use memopat_core::stability::RegionPoint;
use memopat_core::Grid;

use crate::error::{Error, Result};
use crate::sweep::{BifurcationRecord, Branch, MassSeries};

pub const TIMESTAMP_PREFIX: &str = "# timestamp: ";

/// Comment lines written ahead of every table.
#[derive(Debug, Clone, Default)]
pub struct Metadata {
    pub seed: u64,
    pub config: Vec<(String, String)>,
}

impl Metadata {
    fn lines(&self) -> Vec<String> {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut out = vec![
            format!("# memopat {}", env!("CARGO_PKG_VERSION")),
            format!("{TIMESTAMP_PREFIX}{now}"),
            format!("# seed: {}", self.seed),
        ];
        out.extend(
            self.config
                .iter()
                .map(|(k, v)| format!("# config: {k} = {v}")),
        );
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn column(&self, path: &Path, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                line: 0,
                reason: format!("missing column `{name}`"),
            })
    }
}

pub fn write_table(path: &Path, meta: &Metadata, table: &Table) -> Result<()> {
    let mut text = meta.lines().join("\n");
    text.push('\n');
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    };
    writer.write_record(&table.header).map_err(csv_err)?;
    for row in &table.rows {
        writer.write_record(row).map_err(csv_err)?;
    }
    let body = writer.into_inner().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })?;
    text.push_str(&String::from_utf8_lossy(&body));
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            line: 0,
            reason: e.to_string(),
        })?;
    let fmt_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        Error::Format {
            path: path.to_path_buf(),
            line,
            reason: e.to_string(),
        }
    };
    let header = reader
        .headers()
        .map_err(fmt_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = reader
        .records()
        .map(|r| {
            r.map(|r| r.iter().map(str::to_string).collect())
                .map_err(fmt_err)
        })
        .collect::<Result<_>>()?;
    Ok(Table { header, rows })
}

fn field<T: std::str::FromStr>(path: &Path, row: usize, value: &str, name: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Format {
        path: path.to_path_buf(),
        line: row,
        reason: format!("bad `{name}` value `{value}`"),
    })
}

fn fmt(v: f64) -> String {
    v.to_string()
}

pub const SWEEP_COLUMNS: [&str; 7] = [
    "alpha",
    "branch",
    "amplitude",
    "peak_count",
    "mean_u",
    "converged",
    "t_final",
];

pub fn sweep_table(records: &[BifurcationRecord]) -> Table {
    let mut t = Table::new(&SWEEP_COLUMNS);
    for r in records {
        t.push(vec![
            fmt(r.alpha),
            r.branch.to_string(),
            fmt(r.amplitude),
            r.peak_count.to_string(),
            fmt(r.mean_u),
            r.converged.to_string(),
            fmt(r.t_final),
        ]);
    }
    t
}

pub fn read_sweep(path: &Path) -> Result<Vec<BifurcationRecord>> {
    let t = read_table(path)?;
    let cols = SWEEP_COLUMNS.map(|c| t.column(path, c));
    let [a, b, amp, pc, mu, conv, tf] = cols;
    let (a, b, amp, pc, mu, conv, tf) = (a?, b?, amp?, pc?, mu?, conv?, tf?);
    t.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(BifurcationRecord {
                alpha: field(path, i + 1, &row[a], "alpha")?,
                branch: field::<Branch>(path, i + 1, &row[b], "branch")?,
                amplitude: field(path, i + 1, &row[amp], "amplitude")?,
                peak_count: field(path, i + 1, &row[pc], "peak_count")?,
                mean_u: field(path, i + 1, &row[mu], "mean_u")?,
                converged: field(path, i + 1, &row[conv], "converged")?,
                t_final: field(path, i + 1, &row[tf], "t_final")?,
            })
        })
        .collect()
}

pub const REGION_COLUMNS: [&str; 4] = ["R", "alpha_crit_signed", "abs_alpha_crit", "n_crit"];

pub fn region_table(points: &[RegionPoint]) -> Table {
    let mut t = Table::new(&REGION_COLUMNS);
    for p in points {
        t.push(vec![
            fmt(p.radius),
            fmt(p.alpha_crit),
            fmt(p.abs_alpha()),
            p.n_crit.to_string(),
        ]);
    }
    t
}

pub fn read_region(path: &Path) -> Result<Vec<RegionPoint>> {
    let t = read_table(path)?;
    let (r, a, n) = (
        t.column(path, "R")?,
        t.column(path, "alpha_crit_signed")?,
        t.column(path, "n_crit")?,
    );
    t.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(RegionPoint {
                radius: field(path, i + 1, &row[r], "R")?,
                alpha_crit: field(path, i + 1, &row[a], "alpha_crit_signed")?,
                n_crit: field(path, i + 1, &row[n], "n_crit")?,
            })
        })
        .collect()
}

pub const MASS_COLUMNS: [&str; 5] = ["R", "alpha", "mean_u", "amplitude", "converged"];

pub fn mass_table(series: &[MassSeries]) -> Table {
    let mut t = Table::new(&MASS_COLUMNS);
    for s in series {
        for p in &s.points {
            t.push(vec![
                fmt(s.radius),
                fmt(p.alpha),
                fmt(p.mean_u),
                fmt(p.amplitude),
                p.converged.to_string(),
            ]);
        }
    }
    t
}

/// Final profile over the reflected domain `[−π, π]`.
pub fn state_table(grid: &Grid, state: &FieldState) -> Table {
    let mut t = Table::new(&["x", "u", "k", "v"]);
    let n = grid.n_cells();
    for j in 0..=2 * n {
        let (i, x) = if j < n {
            (n - j, -grid.x(n - j))
        } else {
            (j - n, grid.x(j - n))
        };
        t.push(vec![
            fmt(x),
            fmt(state.u[i]),
            fmt(state.k[i]),
            fmt(state.v[i]),
        ]);
    }
    t
}

pub fn snapshot_rows(table: &mut Table, grid: &Grid, t: f64, state: &FieldState) {
    for (i, x) in grid.nodes().enumerate() {
        table.push(vec![
            fmt(t),
            fmt(x),
            fmt(state.u[i]),
            fmt(state.k[i]),
            fmt(state.v[i]),
        ]);
    }
}

/// Creates `dir` if needed and returns the path of `name` inside it.
pub fn output_path(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir.join(name))
}
