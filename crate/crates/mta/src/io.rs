//! File formats: task data CSV, labeled similarity matrices, point-set CSVs,
//! and the report writers. Numbers are serialized with 17 significant digits
//! so every written value re-parses to the identical `f64`.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{MtaError, Result};
use crate::estimators::{EstimateVector, TaskSamples, TaskSummary};
use crate::kde::{DensityTask, MrrBreakdown};
use crate::simulate::RiskReport;

/// 17 significant digits: lossless for `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, source: std::io::Error) -> MtaError {
    MtaError::Io {
        file: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, field: &str, message: impl Into<String>) -> MtaError {
    MtaError::Parse {
        file: path.display().to_string(),
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_finite(path: &Path, line: usize, field: &str, raw: &str) -> Result<f64> {
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, field, format!("{raw:?} is not a number")))?;
    if !value.is_finite() {
        return Err(parse_err(path, line, field, format!("{raw:?} is not finite")));
    }
    Ok(value)
}

/// Reads a task data file: header `task_id,value`, one sample per row.
/// Tasks are returned in first-appearance order.
pub fn read_task_data(path: &Path) -> Result<Vec<TaskSamples>> {
    let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "header", "file is empty"))?;
    if header.trim() != "task_id,value" {
        return Err(parse_err(
            path,
            1,
            "header",
            format!("expected \"task_id,value\", got {header:?}"),
        ));
    }

    let mut order: Vec<String> = Vec::new();
    let mut grouped: Vec<Vec<f64>> = Vec::new();
    let mut rows = 0usize;
    for (idx, raw_line) in lines {
        let line_no = idx + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw_line.split(',').collect();
        if fields.len() != 2 {
            return Err(parse_err(
                path,
                line_no,
                "row",
                format!("expected 2 fields, got {}", fields.len()),
            ));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(parse_err(path, line_no, "task_id", "task id is empty"));
        }
        let value = parse_finite(path, line_no, "value", fields[1])?;
        match order.iter().position(|o| o == id) {
            Some(i) => grouped[i].push(value),
            None => {
                order.push(id.to_string());
                grouped.push(vec![value]);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_err(path, 1, "rows", "no data rows"));
    }
    order
        .into_iter()
        .zip(grouped)
        .map(|(id, values)| TaskSamples::new(id, values))
        .collect()
}

/// Reads a labeled similarity matrix: first row and first column carry task
/// labels, the body is the square matrix. Returns labels in file order and
/// the raw (label-row-ordered) entries.
pub fn read_similarity(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "header", "file is empty"))?;
    let header_fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if header_fields.len() < 2 {
        return Err(parse_err(path, 1, "header", "expected corner cell plus labels"));
    }
    let labels: Vec<String> = header_fields[1..].iter().map(|s| s.to_string()).collect();
    let t = labels.len();
    let unique: BTreeSet<&String> = labels.iter().collect();
    if unique.len() != t {
        return Err(parse_err(path, 1, "header", "labels are not unique"));
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(t);
    for (row_idx, (idx, raw_line)) in lines.enumerate() {
        let line_no = idx + 1;
        if row_idx >= t {
            return Err(parse_err(path, line_no, "row", "more rows than labels"));
        }
        let fields: Vec<&str> = raw_line.split(',').map(str::trim).collect();
        if fields.len() != t + 1 {
            return Err(parse_err(
                path,
                line_no,
                "row",
                format!("expected {} fields, got {}", t + 1, fields.len()),
            ));
        }
        if fields[0] != labels[row_idx] {
            return Err(parse_err(
                path,
                line_no,
                "row label",
                format!(
                    "row label {:?} does not match column label {:?}",
                    fields[0], labels[row_idx]
                ),
            ));
        }
        let mut row = Vec::with_capacity(t);
        for (c, raw) in fields[1..].iter().enumerate() {
            let v = parse_finite(path, line_no, &labels[c], raw)?;
            if v < 0.0 {
                return Err(parse_err(
                    path,
                    line_no,
                    &labels[c],
                    format!("similarity {v} is negative"),
                ));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.len() != t {
        return Err(parse_err(
            path,
            1,
            "rows",
            format!("expected {} rows, got {}", t, rows.len()),
        ));
    }
    Ok((labels, rows))
}

/// Reads a point set: one row per point, `d` comma-separated coordinates,
/// no header.
pub fn read_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut dim = 0usize;
    for (idx, raw_line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw_line.split(',').collect();
        if points.is_empty() {
            dim = fields.len();
        } else if fields.len() != dim {
            return Err(parse_err(
                path,
                line_no,
                "row",
                format!("expected {dim} coordinates, got {}", fields.len()),
            ));
        }
        let point = fields
            .iter()
            .enumerate()
            .map(|(c, raw)| parse_finite(path, line_no, &format!("coordinate {c}"), raw))
            .collect::<Result<Vec<f64>>>()?;
        points.push(point);
    }
    if points.is_empty() {
        return Err(parse_err(path, 1, "rows", "no points"));
    }
    Ok(points)
}

/// Loads every `*.csv` in a directory as one density task per file (task id
/// from the file stem), sorted by file name.
pub fn read_density_tasks(dir: &Path) -> Result<Vec<DensityTask>> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(parse_err(dir, 0, "directory", "no .csv task files"));
    }
    files
        .into_iter()
        .map(|file| {
            let id = file
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("task")
                .to_string();
            let points = read_points(&file)?;
            DensityTask::new(id, points)
        })
        .collect()
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    Ok(std::io::BufWriter::new(file))
}

fn finish(mut w: std::io::BufWriter<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes the per-task estimate report: `task_id,n,sample_mean,estimate`.
pub fn write_estimates(
    path: &Path,
    ids: &[String],
    summary: &TaskSummary,
    estimate: &EstimateVector,
) -> Result<()> {
    let mut w = create(path)?;
    let write = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "task_id,n,sample_mean,estimate")?;
        for (i, id) in ids.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                id,
                summary.counts()[i],
                fmt_f64(summary.means()[i]),
                fmt_f64(estimate.values()[i]),
            )?;
        }
        Ok(())
    };
    write(&mut w).map_err(|e| io_err(path, e))?;
    finish(w, path)
}

/// Writes a hierarchical-study risk CSV: one row per
/// `(sigma_mu_sq, estimator)` with columns
/// `sigma_mu_sq,estimator,risk,pct_change,stderr,replicates`.
pub fn write_risk_grid(path: &Path, reports: &[(f64, RiskReport)]) -> Result<()> {
    let mut w = create(path)?;
    let write = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "sigma_mu_sq,estimator,risk,pct_change,stderr,replicates")?;
        for (sigma_mu_sq, report) in reports {
            for row in &report.rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    fmt_f64(*sigma_mu_sq),
                    row.estimator,
                    fmt_f64(row.risk),
                    fmt_f64(row.pct_change),
                    fmt_f64(row.stderr),
                    report.replicates,
                )?;
            }
        }
        Ok(())
    };
    write(&mut w).map_err(|e| io_err(path, e))?;
    finish(w, path)
}

/// Writes a single-design risk CSV (no mean-variance column):
/// `estimator,risk,pct_change,stderr,replicates`.
pub fn write_risk_plain(path: &Path, report: &RiskReport) -> Result<()> {
    let mut w = create(path)?;
    let write = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "estimator,risk,pct_change,stderr,replicates")?;
        for row in &report.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                row.estimator,
                fmt_f64(row.risk),
                fmt_f64(row.pct_change),
                fmt_f64(row.stderr),
                report.replicates,
            )?;
        }
        Ok(())
    };
    write(&mut w).map_err(|e| io_err(path, e))?;
    finish(w, path)
}

/// Writes per-(task, grid point) densities: `task_id,point_index,density`,
/// task-major.
pub fn write_densities(path: &Path, task_ids: &[String], densities: &[Vec<f64>]) -> Result<()> {
    let mut w = create(path)?;
    let write = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "task_id,point_index,density")?;
        for (t, id) in task_ids.iter().enumerate() {
            for (g, value) in densities[t].iter().enumerate() {
                writeln!(w, "{},{},{}", id, g, fmt_f64(*value))?;
            }
        }
        Ok(())
    };
    write(&mut w).map_err(|e| io_err(path, e))?;
    finish(w, path)
}

/// Writes per-task and overall mean reciprocal ranks:
/// `task_id,events,mrr`, overall last under the id `ALL`.
pub fn write_mrr(path: &Path, breakdown: &MrrBreakdown) -> Result<()> {
    let mut w = create(path)?;
    let write = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "task_id,events,mrr")?;
        let mut total = 0usize;
        for (id, events, mrr) in &breakdown.per_task {
            writeln!(w, "{},{},{}", id, events, fmt_f64(*mrr))?;
            total += events;
        }
        writeln!(w, "ALL,{},{}", total, fmt_f64(breakdown.overall))?;
        Ok(())
    };
    write(&mut w).map_err(|e| io_err(path, e))?;
    finish(w, path)
}

/// Writes pretty-printed JSON.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| io_err(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    finish(w, path)
}
