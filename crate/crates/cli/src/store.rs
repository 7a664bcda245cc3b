//! On-disk layout of a run directory: `series.csv`, `summary.json` and the
//! optional `snapshots.bin`.
//!
//! `snapshots.bin` is little-endian: the 8-byte magic `MWSNAP01`, the point
//! count and snapshot count as u64, the u₁ field (points × f64), then for
//! each snapshot its time followed by its values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use memwave_core::solver::{BlowupEstimate, ForcingModel, SchemeAgreement, Snapshot};
use memwave_core::{RunConfig, RunResult, SeriesRow, Verdict};
use serde::{Deserialize, Serialize};

use crate::{verdict_exit_code, CmdResult, Failure};

pub const SERIES: &str = "series.csv";
pub const SUMMARY: &str = "summary.json";
pub const SNAPSHOTS: &str = "snapshots.bin";
const MAGIC: &[u8; 8] = b"MWSNAP01";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub tool: String,
    pub version: String,
    pub verdict: Verdict,
    pub exit_code: i32,
    pub stop_detail: String,
    pub t_max: Option<f64>,
    pub t_max_uncertainty: Option<f64>,
    pub blowup: BlowupEstimate,
    pub agreement: Option<SchemeAgreement>,
    pub warnings: Vec<String>,
    pub alpha: f64,
    pub forcing: ForcingModel,
    pub data_radius: Option<f64>,
    pub dt_halvings: u32,
    pub rows: usize,
    pub t_last: f64,
    pub snapshots: usize,
    pub config: RunConfig,
}

impl Summary {
    pub fn new(config: &RunConfig, r: &RunResult) -> Self {
        Summary {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            verdict: r.verdict,
            exit_code: verdict_exit_code(r.verdict),
            stop_detail: r.stop_detail.clone(),
            t_max: r.blowup.t_max,
            t_max_uncertainty: r.blowup.uncertainty,
            blowup: r.blowup,
            agreement: r.agreement,
            warnings: r.warnings.clone(),
            alpha: r.alpha,
            forcing: r.forcing,
            data_radius: r.data_radius,
            dt_halvings: r.dt_halvings,
            rows: r.rows.len(),
            t_last: r.rows.last().map_or(0.0, |x| x.t),
            snapshots: r.snapshots.len(),
            config: config.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::new(crate::exit::FAILURE, e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_summary(dir: &Path) -> CmdResult<Summary> {
    let path = dir.join(SUMMARY);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

pub fn write_series(path: &Path, rows: &[SeriesRow]) -> CmdResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", SeriesRow::CSV_HEADER)?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `series.csv`; any malformed or short row is an error message.
pub fn read_series(path: &Path) -> Result<Vec<SeriesRow>, String> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let header: Vec<String> =
        rd.headers().map_err(|e| e.to_string())?.iter().map(str::to_owned).collect();
    if header.join(",") != SeriesRow::CSV_HEADER {
        return Err(format!("{}: unexpected header {:?}", path.display(), header.join(",")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: row {}: {e}", path.display(), i + 1))?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("{}: row {}: {e}", path.display(), i + 1))?;
        rows.push(SeriesRow {
            t: v[0],
            l2: v[1],
            h1: v[2],
            linf: v[3],
            energy: v[4],
            int_u: v[5],
            int_up: v[6],
            support_radius: v[7],
            tail_fraction: v[8],
        });
    }
    Ok(rows)
}

fn put(w: &mut impl Write, xs: &[f64]) -> std::io::Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_snapshots(path: &Path, u1: &[f64], snaps: &[Snapshot]) -> CmdResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(u1.len() as u64).to_le_bytes())?;
    w.write_all(&(snaps.len() as u64).to_le_bytes())?;
    put(&mut w, u1)?;
    for s in snaps {
        put(&mut w, &[s.t])?;
        put(&mut w, &s.u)?;
    }
    w.flush()?;
    Ok(())
}

fn take(r: &mut impl Read, n: usize) -> std::io::Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// (u₁, snapshots)
pub fn read_snapshots(path: &Path) -> Result<(Vec<f64>, Vec<Snapshot>), String> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut r = BufReader::new(f);
    let bad = |e: std::io::Error| format!("{}: {e}", path.display());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(bad)?;
    if &magic != MAGIC {
        return Err(format!("{}: not a snapshot store", path.display()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word).map_err(bad)?;
    let points = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word).map_err(bad)?;
    let count = u64::from_le_bytes(word) as usize;
    let u1 = take(&mut r, points).map_err(bad)?;
    let mut snaps = Vec::with_capacity(count);
    for _ in 0..count {
        let t = take(&mut r, 1).map_err(bad)?[0];
        snaps.push(Snapshot { t, u: take(&mut r, points).map_err(bad)? });
    }
    Ok((u1, snaps))
}
