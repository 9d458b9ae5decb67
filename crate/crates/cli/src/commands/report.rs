//! Plot-ready series from earlier outputs in one directory:
//!
//! * `simulate_*.csv` -> `bound_curve.csv`, one row per simulated cell
//! * `sweep.csv` -> `samples_by_difficulty.csv`
//! * `report.json` -> `score_histogram.csv`

use std::path::{Path, PathBuf};

use clap::Args;

use crate::error::{CliResult, Fail};
use crate::output::{num, read_file};
use crate::Context;

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Directory holding verify, sample or simulate outputs; defaults to
    /// the output directory.
    #[arg(long)]
    input_dir: Option<PathBuf>,
}

type Table = (Vec<String>, Vec<Vec<String>>);

fn read_csv(path: &Path) -> CliResult<Table> {
    let bytes = read_file(path)?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Fail::invalid(format!("{}: {e}", path.display())))?
        .iter()
        .map(String::from)
        .collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| Fail::invalid(format!("{}: {e}", path.display())))?;
    Ok((header, rows))
}

fn bound_rows(kind: &str, (header, rows): &Table) -> Vec<Vec<String>> {
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(e), Some(b), Some(c), Some(s)) = (col("empirical"), col("bound"), col("ci"), col("satisfied")) else {
        return Vec::new();
    };
    rows.iter()
        .map(|r| {
            let cell: Vec<String> = header[..e]
                .iter()
                .zip(r)
                .filter(|(h, _)| !["trials", "exact", "required_k"].contains(&h.as_str()))
                .map(|(h, v)| format!("{h}={v}"))
                .collect();
            vec![
                kind.to_string(),
                cell.join(";"),
                r[e].clone(),
                r[b].clone(),
                r[c].clone(),
                r[s].clone(),
            ]
        })
        .collect()
}

fn histogram(scores: &[f64]) -> Vec<usize> {
    let mut counts = vec![0; HISTOGRAM_BINS];
    for &s in scores {
        let bin = ((s * HISTOGRAM_BINS as f64).floor() as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }
    counts
}

fn scores(report: &serde_json::Value, field: &str) -> Vec<f64> {
    report["consistency"][field]
        .as_array()
        .map(|a| a.iter().filter_map(|s| s["score"].as_f64()).collect())
        .unwrap_or_default()
}

pub fn run(ctx: &Context, a: &ReportArgs) -> CliResult<()> {
    let dir = a.input_dir.clone().unwrap_or_else(|| ctx.output.dir.clone());
    let mut names: Vec<String> = match std::fs::read_dir(&dir) {
        Ok(entries) => entries.filter_map(|e| e.ok()?.file_name().into_string().ok()).collect(),
        Err(e) => return Err(Fail::missing_input(format!("cannot read {}: {e}", dir.display()))),
    };
    names.sort();
    let mut produced = false;

    let mut curve = Vec::new();
    for n in &names {
        if let Some(kind) = n.strip_prefix("simulate_").and_then(|r| r.strip_suffix(".csv")) {
            curve.extend(bound_rows(kind, &read_csv(&dir.join(n))?));
        }
    }
    if !curve.is_empty() {
        ctx.output.write_text(
            "bound_curve.csv",
            &crate::output::render_csv(&["kind", "cell", "empirical", "bound", "ci", "satisfied"], &curve)?,
        )?;
        produced = true;
    }

    if names.iter().any(|n| n == "sweep.csv") {
        let (header, rows) = read_csv(&dir.join("sweep.csv"))?;
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Fail::invalid(format!("sweep.csv lacks column {name}")))
        };
        let (d, c, m) = (col("difficulty")?, col("corruption")?, col("mean_samples")?);
        let out: Vec<Vec<String>> = rows
            .iter()
            .map(|r| vec![r[d].clone(), r[c].clone(), r[m].clone()])
            .collect();
        ctx.output.write_text(
            "samples_by_difficulty.csv",
            &crate::output::render_csv(&["difficulty", "corruption", "mean_samples"], &out)?,
        )?;
        produced = true;
    }

    if names.iter().any(|n| n == "report.json") {
        let report: serde_json::Value = serde_json::from_slice(&read_file(&dir.join("report.json"))?)
            .map_err(|e| Fail::invalid(format!("report.json: {e}")))?;
        let mut rows = Vec::new();
        for (level, field) in [("statement", "per_statement"), ("edge", "per_edge")] {
            for (i, count) in histogram(&scores(&report, field)).into_iter().enumerate() {
                let lo = i as f64 / HISTOGRAM_BINS as f64;
                let hi = (i + 1) as f64 / HISTOGRAM_BINS as f64;
                rows.push(vec![level.to_string(), num(lo), num(hi), count.to_string()]);
            }
        }
        ctx.output.write_text(
            "score_histogram.csv",
            &crate::output::render_csv(&["level", "bin_lo", "bin_hi", "count"], &rows)?,
        )?;
        produced = true;
    }

    if produced {
        Ok(())
    } else {
        Err(Fail::missing_input(format!(
            "no simulate_*.csv, sweep.csv or report.json in {}",
            dir.display()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_edges() {
        let h = histogram(&[0.0, 0.05, 0.1, 0.95, 1.0]);
        assert_eq!(h[0], 2);
        assert_eq!(h[1], 1);
        assert_eq!(h[9], 2);
    }

    #[test]
    fn curve_rows_name_their_cell() {
        let t: Table = (
            ["tau", "k", "empirical", "bound", "ci", "satisfied"]
                .map(String::from)
                .to_vec(),
            vec![["0.1", "3", "0.02", "0.38", "0.003", "true"].map(String::from).to_vec()],
        );
        assert_eq!(bound_rows("majority", &t)[0][1], "tau=0.1;k=3");
    }
}
