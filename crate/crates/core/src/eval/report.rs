//! Report files: per-arm episode CSVs, a metric summary CSV, a markdown
//! summary table, and the ablation curve CSV.
//!
//! Episode CSVs round-trip: parsing one back yields a matrix equal to the
//! one written, so metrics recomputed from disk match in-memory values
//! exactly. Metric cells use the shortest-round-trip float formatting;
//! absent metrics are empty CSV fields and `n/a` in markdown.

use std::path::{Path, PathBuf};

use super::{AblationCurve, EvalError, ResultsMatrix, StepAggregation};

fn fmt_metric(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

pub fn write_episodes_csv(matrix: &ResultsMatrix, path: &Path) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["task_id", "rep", "success", "steps"])?;
    for t in 0..matrix.n_tasks() {
        for r in 0..matrix.reps() {
            writer.write_record([
                matrix.task_ids()[t].as_str(),
                &r.to_string(),
                if matrix.success(t, r) { "true" } else { "false" },
                &matrix.steps(t, r).to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn read_episodes_csv(path: &Path) -> Result<ResultsMatrix, EvalError> {
    let malformed = |message: String| EvalError::MalformedReport {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path)?;
    let mut task_ids: Vec<String> = Vec::new();
    let mut success: Vec<Vec<bool>> = Vec::new();
    let mut steps: Vec<Vec<usize>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 4 {
            return Err(malformed(format!("expected 4 fields, got {}", record.len())));
        }
        let task_id = record[0].to_string();
        let rep: usize = record[1]
            .parse()
            .map_err(|e| malformed(format!("bad rep: {e}")))?;
        let ok: bool = record[2]
            .parse()
            .map_err(|e| malformed(format!("bad success flag: {e}")))?;
        let count: usize = record[3]
            .parse()
            .map_err(|e| malformed(format!("bad steps: {e}")))?;
        if task_ids.last() != Some(&task_id) {
            task_ids.push(task_id);
            success.push(Vec::new());
            steps.push(Vec::new());
        }
        let row = success.len() - 1;
        if rep != success[row].len() {
            return Err(malformed(format!(
                "rep {rep} out of order for task {}",
                task_ids[row]
            )));
        }
        success[row].push(ok);
        steps[row].push(count);
    }
    let reps = success.first().map_or(0, Vec::len);
    ResultsMatrix::from_parts(task_ids, reps, success, steps)
}

pub fn write_summary_csv(
    arms: &[(String, &ResultsMatrix)],
    steps_mode: StepAggregation,
    path: &Path,
) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["arm", "accuracy", "best_of_n", "reliability", "avg_steps"])?;
    for (name, matrix) in arms {
        writer.write_record([
            name.as_str(),
            &fmt_metric(Some(matrix.accuracy()?)),
            &fmt_metric(Some(matrix.best_of_n()?)),
            &fmt_metric(matrix.reliability()?),
            &fmt_metric(matrix.avg_steps_with(steps_mode)?),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_summary_markdown(
    arms: &[(String, &ResultsMatrix)],
    steps_mode: StepAggregation,
    path: &Path,
) -> Result<(), EvalError> {
    let md_metric = |value: Option<f64>| match value {
        Some(v) => format!("{v:.4}"),
        None => "n/a".to_owned(),
    };
    let mut out = String::from("# Results summary\n\n");
    out.push_str("| metric |");
    for (name, _) in arms {
        out.push_str(&format!(" {name} |"));
    }
    out.push_str("\n|---|");
    for _ in arms {
        out.push_str("---|");
    }
    out.push('\n');
    let mut rows: Vec<(&str, Vec<String>)> = vec![
        ("accuracy", Vec::new()),
        ("best_of_n", Vec::new()),
        ("reliability", Vec::new()),
        ("avg_steps", Vec::new()),
    ];
    for (_, matrix) in arms {
        rows[0].1.push(md_metric(Some(matrix.accuracy()?)));
        rows[1].1.push(md_metric(Some(matrix.best_of_n()?)));
        rows[2].1.push(md_metric(matrix.reliability()?));
        rows[3].1.push(md_metric(matrix.avg_steps_with(steps_mode)?));
    }
    for (metric, cells) in rows {
        out.push_str(&format!("| {metric} |"));
        for cell in cells {
            out.push_str(&format!(" {cell} |"));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_ablation_csv(curve: &AblationCurve, path: &Path) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["k", "accuracy"])?;
    for (k, acc) in curve.k_values.iter().zip(&curve.accuracy) {
        writer.write_record([k.to_string(), format!("{acc}")])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_ablation_csv(path: &Path) -> Result<Vec<(usize, f64)>, EvalError> {
    let malformed = |message: String| EvalError::MalformedReport {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let k: usize = record[0]
            .parse()
            .map_err(|e| malformed(format!("bad k: {e}")))?;
        let acc: f64 = record[1]
            .parse()
            .map_err(|e| malformed(format!("bad accuracy: {e}")))?;
        rows.push((k, acc));
    }
    Ok(rows)
}

/// Write the full report set into `dir`: one episodes CSV per arm, the
/// summary CSV and markdown, and the ablation CSV when a curve is given.
/// Returns the created paths.
pub fn emit_report(
    arms: &[(String, ResultsMatrix)],
    curve: Option<&AblationCurve>,
    dir: &Path,
    steps_mode: StepAggregation,
) -> Result<Vec<PathBuf>, EvalError> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, matrix) in arms {
        let path = dir.join(format!("{name}_episodes.csv"));
        write_episodes_csv(matrix, &path)?;
        paths.push(path);
    }
    if !arms.is_empty() {
        let refs: Vec<(String, &ResultsMatrix)> =
            arms.iter().map(|(n, m)| (n.clone(), m)).collect();
        let summary = dir.join("summary.csv");
        write_summary_csv(&refs, steps_mode, &summary)?;
        paths.push(summary);
        let markdown = dir.join("summary.md");
        write_summary_markdown(&refs, steps_mode, &markdown)?;
        paths.push(markdown);
    }
    if let Some(curve) = curve {
        let path = dir.join("ablation.csv");
        write_ablation_csv(curve, &path)?;
        paths.push(path);
    }
    Ok(paths)
}
