//! Human-readable report rendering: a metrics table in the usual
//! accuracy/sensitivity/specificity/AUC column layout, a per-site table for
//! leave-one-site-out runs, and plaintext charts for the loss trace and the
//! per-fold metrics.

use super::{ErrorCode, PipelineError};
use crate::evalkit::{EvalReport, MeanStd, Protocol};
use crate::trainer::{read_loss_trace, EpochLoss};
use std::fs;
use std::path::{Path, PathBuf};

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.4}"),
        None => "n/a".to_string(),
    }
}

fn fmt_mean_std(v: &Option<MeanStd>) -> String {
    match v {
        Some(ms) => format!("{:.4} ± {:.4}", ms.mean, ms.std),
        None => "n/a".to_string(),
    }
}

/// Fold table plus the aggregate row, in the Accuracy / Sensitivity /
/// Specificity / AUC column layout.
pub fn render_report_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let protocol = match report.config.protocol {
        Protocol::StratifiedK { k } => format!("stratified {k}-fold"),
        Protocol::LeaveOneSiteOut => "leave-one-site-out".to_string(),
    };
    out.push_str(&format!(
        "Evaluation: {} over {} subjects (positive class: {})\n\n",
        protocol, report.items, report.positive_class
    ));
    if report.folds.is_empty() {
        out.push_str("no results: the report contains zero folds\n");
        return out;
    }
    let site_table = matches!(report.config.protocol, Protocol::LeaveOneSiteOut);
    let head0 = if site_table { "Site" } else { "Fold" };
    out.push_str(&format!(
        "{head0:<14} {:>8} {:>12} {:>12} {:>12} {:>12}\n",
        "Subjects", "Acc.", "Sen.", "Spe.", "AUC"
    ));
    out.push_str(&"-".repeat(74));
    out.push('\n');
    for fold in &report.folds {
        out.push_str(&format!(
            "{:<14} {:>8} {:>12} {:>12} {:>12} {:>12}\n",
            fold.name,
            fold.test_size,
            format!("{:.4}", fold.metrics.accuracy),
            fmt_opt(fold.metrics.sensitivity),
            fmt_opt(fold.metrics.specificity),
            fmt_opt(fold.metrics.auc),
        ));
    }
    out.push_str(&"-".repeat(74));
    out.push('\n');
    let agg = &report.aggregate;
    out.push_str(&format!(
        "{:<14} {:>8} {:>16} {:>16} {:>16} {:>16}\n",
        "mean ± std",
        report.items,
        fmt_mean_std(&agg.accuracy),
        fmt_mean_std(&agg.sensitivity),
        fmt_mean_std(&agg.specificity),
        fmt_mean_std(&agg.auc),
    ));
    out
}

fn bar(value: f64, max: f64, width: usize) -> String {
    let filled = if max > 0.0 {
        ((value / max) * width as f64).round().clamp(0.0, width as f64) as usize
    } else {
        0
    };
    let mut s = "#".repeat(filled);
    s.push_str(&" ".repeat(width - filled));
    s
}

/// Plaintext chart of the loss trace (epoch 0 is pre-training).
pub fn render_loss_chart(trace: &[EpochLoss]) -> String {
    let mut out = String::from("L_total by epoch (epoch 0 = pre-training)\n");
    let max = trace.iter().map(|r| r.l_total).fold(0.0f64, f64::max);
    for row in trace {
        out.push_str(&format!(
            "epoch {:>3} |{}| {:.4}  (TD {:.4}, GS {:.4})\n",
            row.epoch,
            bar(row.l_total, max, 40),
            row.l_total,
            row.l_td,
            row.l_gs,
        ));
    }
    out
}

/// Plaintext chart of per-fold accuracy and AUC.
pub fn render_fold_chart(report: &EvalReport) -> String {
    let mut out = String::from("Per-fold metrics\n");
    for fold in &report.folds {
        out.push_str(&format!(
            "{:<14} acc |{}| {:.4}\n",
            fold.name,
            bar(fold.metrics.accuracy, 1.0, 30),
            fold.metrics.accuracy
        ));
        if let Some(auc) = fold.metrics.auc {
            out.push_str(&format!(
                "{:<14} auc |{}| {:.4}\n",
                "",
                bar(auc, 1.0, 30),
                auc
            ));
        }
    }
    out
}

/// Render `report.json` (and optionally the loss trace) into
/// `report.txt`, `loss_plot.txt`, and `folds_plot.txt` under `out_dir`.
/// Returns the files written. An empty report is not an error; the summary
/// says "no results" and charts are skipped with a warning.
pub fn emit_report(
    report_json: &Path,
    loss_trace: Option<&Path>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, PipelineError> {
    let stage = "report";
    let text = fs::read_to_string(report_json).map_err(|e| {
        PipelineError::new(
            stage,
            ErrorCode::Validation,
            format!("cannot read {}: {e}", report_json.display()),
        )
    })?;
    let report: EvalReport = serde_json::from_str(&text).map_err(|e| {
        PipelineError::new(
            stage,
            ErrorCode::Validation,
            format!("{}: {e}", report_json.display()),
        )
    })?;
    fs::create_dir_all(out_dir)
        .map_err(|e| PipelineError::new(stage, ErrorCode::Runtime, e.to_string()))?;

    let mut written = Vec::new();
    let summary_path = out_dir.join("report.txt");
    fs::write(&summary_path, render_report_text(&report))
        .map_err(|e| PipelineError::new(stage, ErrorCode::Runtime, e.to_string()))?;
    written.push(summary_path);

    let loss_path = out_dir.join("loss_plot.txt");
    match loss_trace {
        Some(path) if path.is_file() => {
            let trace = read_loss_trace(path)
                .map_err(|e| PipelineError::new(stage, ErrorCode::Validation, e.to_string()))?;
            fs::write(&loss_path, render_loss_chart(&trace))
                .map_err(|e| PipelineError::new(stage, ErrorCode::Runtime, e.to_string()))?;
            written.push(loss_path);
        }
        _ => {
            eprintln!("[{stage}] warning: no loss trace available, skipping loss_plot.txt");
            fs::write(&loss_path, "no loss trace available\n")
                .map_err(|e| PipelineError::new(stage, ErrorCode::Runtime, e.to_string()))?;
            written.push(loss_path);
        }
    }

    let folds_path = out_dir.join("folds_plot.txt");
    fs::write(&folds_path, render_fold_chart(&report))
        .map_err(|e| PipelineError::new(stage, ErrorCode::Runtime, e.to_string()))?;
    written.push(folds_path);

    if report.folds.is_empty() {
        eprintln!("[{stage}] warning: report contains no folds");
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::{AggregateReport, EvalConfig, FoldReport, PartialMetrics};

    fn sample_report(protocol: Protocol, folds: usize) -> EvalReport {
        let fold_reports: Vec<FoldReport> = (0..folds)
            .map(|f| FoldReport {
                name: if matches!(protocol, Protocol::LeaveOneSiteOut) {
                    format!("SITE_{f}")
                } else {
                    format!("fold_{f:02}")
                },
                test_size: 10,
                positives: 5,
                negatives: 5,
                test_ids: (0..10).map(|i| format!("s{f}{i}")).collect(),
                metrics: PartialMetrics {
                    accuracy: 0.8,
                    sensitivity: Some(0.7),
                    specificity: Some(0.9),
                    auc: Some(0.85),
                },
            })
            .collect();
        EvalReport {
            config: EvalConfig {
                protocol,
                ..EvalConfig::default()
            },
            positive_class: "label 1 (case)".into(),
            items: folds * 10,
            aggregate: AggregateReport {
                accuracy: Some(MeanStd { mean: 0.8, std: 0.0, folds }),
                sensitivity: Some(MeanStd { mean: 0.7, std: 0.0, folds }),
                specificity: Some(MeanStd { mean: 0.9, std: 0.0, folds }),
                auc: Some(MeanStd { mean: 0.85, std: 0.0, folds }),
            },
            folds: fold_reports,
        }
    }

    #[test]
    fn stratified_report_has_fold_rows_and_aggregate() {
        let report = sample_report(Protocol::StratifiedK { k: 10 }, 10);
        let text = render_report_text(&report);
        assert!(text.contains("stratified 10-fold"));
        assert!(text.contains("fold_00"));
        assert!(text.contains("mean ± std"));
        assert!(text.contains("0.8000 ± 0.0000"));
    }

    #[test]
    fn site_report_lists_twenty_site_rows() {
        let report = sample_report(Protocol::LeaveOneSiteOut, 20);
        let text = render_report_text(&report);
        assert!(text.starts_with("Evaluation: leave-one-site-out"));
        assert!(text.contains("Site"));
        for f in 0..20 {
            assert!(text.contains(&format!("SITE_{f}")));
        }
    }

    #[test]
    fn empty_report_renders_no_results() {
        let mut report = sample_report(Protocol::StratifiedK { k: 10 }, 0);
        report.aggregate = AggregateReport {
            accuracy: None,
            sensitivity: None,
            specificity: None,
            auc: None,
        };
        let text = render_report_text(&report);
        assert!(text.contains("no results"));
    }

    #[test]
    fn emit_writes_all_three_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("report.json");
        let report = sample_report(Protocol::StratifiedK { k: 3 }, 3);
        fs::write(&json, serde_json::to_string(&report).unwrap()).unwrap();
        let out = dir.path().join("reports");
        let written = emit_report(&json, None, &out).unwrap();
        assert_eq!(written.len(), 3);
        for path in &written {
            assert!(path.is_file());
        }
        let summary = fs::read_to_string(&written[0]).unwrap();
        assert!(summary.contains("fold_00"));
    }
}
