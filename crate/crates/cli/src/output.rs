//! Trajectory files. CSV rows are `t`, then μ, ξ and parameter coordinates,
//! printed with 17 significant digits so they re-parse exactly.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use epred::{SystemBundle, SystemName, Trajectory};
use serde::Serialize;

use crate::CliError;

/// Column prefixes for (μ, ξ, a).
fn prefixes(name: SystemName) -> [&'static str; 3] {
    match name {
        SystemName::HeavyTop => ["mu", "omega", "gamma"],
        SystemName::Nematic | SystemName::NematicProjected => ["mu", "xi", "m"],
        SystemName::Hs1d => ["mu", "u", ""],
        SystemName::DensityHs1d => ["mu", "u", "rho"],
        SystemName::SpinLattice => ["mu", "xi", "gamma"],
    }
}

fn names(prefix: &str, dim: usize, system: &SystemBundle) -> Vec<String> {
    match system.grid() {
        None => (1..=dim).map(|i| format!("{prefix}_{i}")).collect(),
        Some(g) if dim == g.n() => (0..dim).map(|j| format!("{prefix}_{j}")).collect(),
        Some(_) => (0..dim).map(|i| format!("{prefix}_{}_{}", i / 3, i % 3 + 1)).collect(),
    }
}

pub fn header(system: &SystemBundle) -> Vec<String> {
    let [mu, xi, a] = prefixes(system.name);
    let dim = system.algebra.dim();
    let mut cols = vec!["t".to_string()];
    cols.extend(names(mu, dim, system));
    cols.extend(names(xi, dim, system));
    if system.action.dim() > 0 {
        cols.extend(names(a, system.action.dim(), system));
    }
    cols
}

/// One row per stored state.
pub fn rows(traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.states
        .iter()
        .zip(&traj.xi)
        .map(|(s, xi)| {
            let mut row = Vec::with_capacity(1 + 2 * xi.coords().len() + s.a.value().len());
            row.push(s.t);
            row.extend_from_slice(s.mu.coords());
            row.extend_from_slice(xi.coords());
            row.extend_from_slice(s.a.value());
            row
        })
        .collect()
}

pub fn to_csv(system: &SystemBundle, traj: &Trajectory) -> String {
    let mut out = header(system).join(",");
    out.push('\n');
    for row in rows(traj) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses a trajectory CSV into its header and rows.
pub fn read_csv(reader: impl Read) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut lines = BufReader::new(reader).lines();
    let header: Vec<String> = match lines.next() {
        Some(line) => line?.split(',').map(str::to_string).collect(),
        None => return Err(CliError::Parse("empty trajectory file".into())),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let row = line
            .split(',')
            .map(|f| f.parse::<f64>().map_err(|e| CliError::Parse(format!("row {}: {e}", i + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != header.len() {
            return Err(CliError::Parse(format!("row {} has {} fields, expected {}", i + 1, row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[derive(Serialize)]
struct JsonTrajectory<'a> {
    columns: Vec<String>,
    rows: &'a [Vec<f64>],
}

pub fn to_json(system: &SystemBundle, traj: &Trajectory) -> String {
    let rows = rows(traj);
    serde_json::to_string(&JsonTrajectory { columns: header(system), rows: &rows }).unwrap()
}
