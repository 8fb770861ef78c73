//! Benchmark aggregation: per-(algorithm, n) means recomputable from the
//! emitted per-instance rows.

use crate::solvers::SolveRow;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub algo: String,
    pub n: usize,
    pub count: usize,
    pub mean_obj: f64,
    pub mean_gap_pct: Option<f64>,
    pub mean_wall_ms: f64,
    pub seed: u64,
}

/// Aggregate rows per algorithm (insertion order preserved).
pub fn aggregate(rows: &[SolveRow]) -> Vec<ReportLine> {
    let mut order: Vec<String> = Vec::new();
    for r in rows {
        if !order.contains(&r.algo) {
            order.push(r.algo.clone());
        }
    }
    order
        .into_iter()
        .map(|algo| {
            let group: Vec<&SolveRow> = rows.iter().filter(|r| r.algo == algo).collect();
            let count = group.len();
            let mean_obj = group.iter().map(|r| r.obj).sum::<f64>() / count as f64;
            let gaps: Vec<f64> = group.iter().filter_map(|r| r.gap_pct).collect();
            let mean_gap_pct = if gaps.len() == count {
                Some(gaps.iter().sum::<f64>() / count as f64)
            } else {
                None
            };
            let mean_wall_ms =
                group.iter().map(|r| r.wall_ms as f64).sum::<f64>() / count as f64;
            ReportLine {
                algo,
                n: group[0].n,
                count,
                mean_obj,
                mean_gap_pct,
                mean_wall_ms,
                seed: group[0].seed,
            }
        })
        .collect()
}

pub const REPORT_HEADER: &str = "algo,n,count,mean_obj,mean_gap_pct,mean_wall_ms,seed";

pub fn report_to_csv(lines: &[ReportLine]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for l in lines {
        let gap = l.mean_gap_pct.map(|g| g.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{gap},{},{}",
            l.algo, l.n, l.count, l.mean_obj, l.mean_wall_ms, l.seed
        );
    }
    out
}

/// Human-readable table for stdout.
pub fn report_to_table(lines: &[ReportLine]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>6} {:>7} {:>10} {:>10} {:>12} {:>10}",
        "algorithm", "n", "count", "mean obj", "gap %", "wall ms", "seed"
    );
    for l in lines {
        let gap = l
            .mean_gap_pct
            .map(|g| format!("{g:.2}"))
            .unwrap_or_else(|| "-".to_string());
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>7} {:>10.4} {:>10} {:>12.3} {:>10}",
            l.algo, l.n, l.count, l.mean_obj, gap, l.mean_wall_ms, l.seed
        );
    }
    out
}

/// Parse rows back from CSV (used by tests to confirm the aggregates are
/// recomputable from what was written).
#[cfg(test)]
pub fn parse_rows(csv: &str) -> Vec<SolveRow> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(idx, l)| {
            let cols: Vec<&str> = l.split(',').collect();
            SolveRow {
                instance_idx: idx,
                instance_id: cols[0].to_string(),
                n: cols[1].parse().unwrap(),
                k: cols[2].parse().unwrap(),
                algo: cols[3].to_string(),
                obj: cols[4].parse().unwrap(),
                gap_pct: if cols[5].is_empty() {
                    None
                } else {
                    Some(cols[5].parse().unwrap())
                },
                wall_ms: cols[6].parse().unwrap(),
                seed: cols[7].parse().unwrap(),
            }
        })
        .collect()
}
