//! CSV writers and readers. Floats are written with Rust's shortest
//! round-trip formatting, so reading a file back gives the same `f64`s.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use edfluid_core::fluid::FluidSolution;
use edfluid_core::sim::{EventRecord, SimPaths, Snapshot};

use crate::error::AppError;

/// Number of uniform points used to tabulate a continuous tail.
pub const TAIL_SAMPLES: usize = 256;

fn write(path: &Path, text: String) -> Result<(), AppError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn row(out: &mut String, cells: &[f64]) {
    for (i, c) in cells.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{c}");
    }
    out.push('\n');
}

pub fn write_events(path: &Path, events: &[EventRecord]) -> Result<(), AppError> {
    let mut out = String::from("time,kind,id\n");
    for e in events {
        let _ = writeln!(out, "{},{},{}", e.time, e.kind.as_str(), e.id);
    }
    write(path, out)
}

pub const PATHS_HEADER: &str = "t,Q/N,R/N,X/N,F,C,Z";

pub fn write_paths(path: &Path, p: &SimPaths) -> Result<(), AppError> {
    let mut out = format!("{PATHS_HEADER}\n");
    for k in 0..p.t.len() {
        row(&mut out, &[p.t[k], p.q[k], p.r[k], p.x[k], p.frontier[k], p.current[k], p.head[k]]);
    }
    write(path, out)
}

pub fn read_paths(path: &Path) -> Result<SimPaths, AppError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(PATHS_HEADER) {
        return Err(AppError::Config(format!("{}: unexpected header", path.display())));
    }
    let mut p = SimPaths::default();
    for (n, line) in lines.enumerate() {
        let cells: Vec<f64> = line
            .split(',')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| AppError::Config(format!("{} line {}: {e}", path.display(), n + 2)))?;
        if cells.len() != 7 {
            return Err(AppError::Config(format!("{} line {}: expected 7 columns", path.display(), n + 2)));
        }
        p.t.push(cells[0]);
        p.q.push(cells[1]);
        p.r.push(cells[2]);
        p.x.push(cells[3]);
        p.frontier.push(cells[4]);
        p.current.push(cells[5]);
        p.head.push(cells[6]);
    }
    Ok(p)
}

fn write_tail(path: &Path, samples: &[(f64, f64)]) -> Result<(), AppError> {
    let mut out = String::from("a,tail\n");
    for (a, v) in samples {
        row(&mut out, &[*a, *v]);
    }
    write(path, out)
}

/// `index.csv` plus one `(a, tail)` file per snapshot and measure.
pub fn write_snapshots(dir: &Path, snapshots: &[Snapshot]) -> Result<(), AppError> {
    let mut index = String::from("index,t,queue_mass,potential_mass,cf_mass,queue_file,potential_file\n");
    for (i, s) in snapshots.iter().enumerate() {
        let qf = format!("queue_{i:03}.csv");
        let pf = format!("potential_{i:03}.csv");
        write_tail(&dir.join(&qf), &s.queue.tail_samples(TAIL_SAMPLES))?;
        write_tail(&dir.join(&pf), &s.potential.tail_samples(TAIL_SAMPLES))?;
        let _ = writeln!(
            index,
            "{i},{},{},{},{},{qf},{pf}",
            s.t,
            s.queue.total_mass(),
            s.potential.total_mass(),
            s.cf_mass
        );
    }
    write(&dir.join("index.csv"), index)
}

/// `t, psi, h, eta, phi` plus `F` (blank before `κ`) when `λ >= μ`, or
/// `phi_bar` when underloaded.
pub fn write_fluid(path: &Path, sol: &FluidSolution) -> Result<(), AppError> {
    let loaded = sol.regime().is_loaded();
    let mut out = String::from(if loaded { "t,psi,h,eta,phi,F\n" } else { "t,psi,h,eta,phi,phi_bar\n" });
    for (k, &t) in sol.times.iter().enumerate() {
        let _ = write!(out, "{t},{},{},{},{},", sol.psi[k], sol.h[k], sol.eta[k], sol.phi[k]);
        if loaded {
            if let Some(f) = sol.frontier.as_ref().filter(|f| k >= f.start) {
                let _ = write!(out, "{}", f.values[k - f.start]);
            }
        } else {
            let _ = write!(out, "{}", sol.phi_bar_at(t));
        }
        out.push('\n');
    }
    write(path, out)
}

/// Tails of the fluid queue measure at `count` evenly spaced grid times in
/// `[κ, T]`, with an index file.
pub fn write_fluid_measures(dir: &Path, sol: &FluidSolution, count: usize) -> Result<(), AppError> {
    let Some(front) = sol.frontier.as_ref() else {
        return Ok(());
    };
    let available = sol.times.len() - front.start;
    let count = count.min(available).max(1);
    let mut index = String::from("index,t,F,mass,file\n");
    for j in 0..count {
        let k = if count == 1 {
            sol.times.len() - 1
        } else {
            front.start + j * (available - 1) / (count - 1)
        };
        let t = sol.times[k];
        let m = sol.limit_measure(t)?;
        let file = format!("fluid_tail_{j:03}.csv");
        write_tail(&dir.join(&file), &m.tail_samples(TAIL_SAMPLES))?;
        let _ = writeln!(index, "{j},{t},{},{},{file}", front.values[k - front.start], m.total_mass());
    }
    write(&dir.join("index.csv"), index)
}

pub fn write_oracle(path: &Path, rows: &[(f64, f64, f64)]) -> Result<(), AppError> {
    let mut out = String::from("t,phi,eta\n");
    for (t, phi, eta) in rows {
        row(&mut out, &[*t, *phi, *eta]);
    }
    write(path, out)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), AppError> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    write(path, text + "\n")
}
