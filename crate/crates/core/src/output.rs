//! CSV writers for profiles, series and sweep tables.

use std::fmt::Write as _;
use std::path::Path;

use crate::criticality::Probe;
use crate::error::Result;
use crate::fbsolver::{SeriesRecord, Snapshot};

/// Two-column table with the given header names.
pub fn pairs_csv(header: (&str, &str), rows: &[(f64, f64)]) -> String {
    let mut s = format!("{},{}\n", header.0, header.1);
    for (a, b) in rows {
        let _ = writeln!(s, "{a},{b}");
    }
    s
}

pub fn series_csv(series: &[SeriesRecord]) -> String {
    let mut s = String::from("t,h,hdot,max_u,gap\n");
    for r in series {
        let _ = writeln!(s, "{},{},{},{},{}", r.t, r.h, r.hdot, r.max_u, r.gap);
    }
    s
}

pub fn snapshot_csv(snap: &Snapshot) -> String {
    pairs_csv(("x", "u"), &snap.points)
}

pub fn transcript_csv(transcript: &[Probe]) -> String {
    let mut s = String::from("sigma,outcome,h_end,max_u_end,gap_end\n");
    for p in transcript {
        let d = &p.classification.diagnostics;
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            p.sigma, p.classification.outcome, d.h_inf_estimate, d.max_u_end, d.gap_end
        );
    }
    s
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}
