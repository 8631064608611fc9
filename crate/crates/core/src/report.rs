//! Report rendering: stable JSON and plain-text tables.
//!
//! JSON is the machine artifact: serde with fixed field order, no timestamps,
//! no environment echoes — two identical runs serialize byte for byte. The
//! text tables are the human artifact: scores shown as `mean ± std` scaled to
//! percentages with one decimal, the best value in each column marked `*`,
//! and a caption echoing the configuration the numbers came from.

use serde::Serialize;

use crate::harness::{
    CorruptionReport, EvalCell, ExperimentReport, GridReport, PromptEvalReport, Strategy,
};
use crate::shift::ShiftMatrix;

/// Pretty JSON with a trailing newline — the canonical `report.json` body.
pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("report serializes");
    out.push('\n');
    out
}

/// A score as a percentage with one decimal: `0.823` -> `"82.3"`.
pub fn fmt_score(value: f64) -> String {
    format!("{:.1}", value * 100.0)
}

fn fmt_cell(mean: f64, std: Option<f64>, marked: bool) -> String {
    let mut cell = match std {
        Some(std) => format!("{} ± {}", fmt_score(mean), fmt_score(std)),
        None => fmt_score(mean),
    };
    if marked {
        cell.push('*');
    }
    cell
}

fn strategy_label(strategy: Strategy) -> &'static str {
    match strategy {
        Strategy::Top1 => "top1",
        Strategy::Ensemble => "ensemble",
    }
}

/// Simple aligned-pipe table with a caption line.
struct TextTable {
    caption: String,
    corner: String,
    col_names: Vec<String>,
    rows: Vec<(String, Vec<String>)>,
}

impl TextTable {
    fn render(&self) -> String {
        // Widths in characters, not bytes — score cells contain `±`.
        let chars = |s: &str| s.chars().count();
        let pad = |s: &str, width: usize| {
            let mut out = s.to_string();
            out.extend(std::iter::repeat(' ').take(width.saturating_sub(chars(s))));
            out
        };
        let mut widths = vec![chars(&self.corner)];
        widths.extend(self.col_names.iter().map(|c| chars(c)));
        for (label, cells) in &self.rows {
            widths[0] = widths[0].max(chars(label));
            for (i, cell) in cells.iter().enumerate() {
                widths[i + 1] = widths[i + 1].max(chars(cell));
            }
        }
        let mut lines = vec![self.caption.clone(), String::new()];
        let header: Vec<String> = std::iter::once(&self.corner)
            .chain(self.col_names.iter())
            .enumerate()
            .map(|(i, name)| pad(name, widths[i]))
            .collect();
        lines.push(header.join(" | ").trim_end().to_string());
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        lines.push(rule.join("-+-"));
        for (label, cells) in &self.rows {
            let row: Vec<String> = std::iter::once(label)
                .chain(cells.iter())
                .enumerate()
                .map(|(i, cell)| pad(cell, widths[i]))
                .collect();
            lines.push(row.join(" | ").trim_end().to_string());
        }
        lines.push(String::new());
        lines.join("\n")
    }
}

/// Mark the argmax means within each (target) column of an experiment's cells.
fn best_by_target(cells: &[EvalCell]) -> Vec<bool> {
    cells
        .iter()
        .map(|cell| {
            cells
                .iter()
                .filter(|other| other.target == cell.target)
                .all(|other| other.mean <= cell.mean)
        })
        .collect()
}

/// Text table for one experiment: strategies as rows, targets as columns.
pub fn render_experiment(report: &ExperimentReport) -> String {
    let caption = format!(
        "method={} source={} metric={} n_shot={} k={} runs={} seed={} threshold={} ablation={} test_size={}",
        json_token(&report.method),
        report.source,
        json_token(&report.metric),
        report.n_shot,
        report.k_prompts,
        report.runs,
        report.base_seed,
        report
            .threshold
            .map(|t| format!("{t}"))
            .unwrap_or_else(|| "default".to_string()),
        json_token(&report.ablation),
        report.test_size,
    );
    let marked = best_by_target(&report.cells);
    let mut strategies: Vec<Strategy> = Vec::new();
    for cell in &report.cells {
        if !strategies.contains(&cell.strategy) {
            strategies.push(cell.strategy);
        }
    }
    let rows = strategies
        .iter()
        .map(|&strategy| {
            let cells: Vec<String> = report
                .targets
                .iter()
                .map(|target| {
                    report
                        .cells
                        .iter()
                        .zip(&marked)
                        .find(|(c, _)| c.target == *target && c.strategy == strategy)
                        .map(|(c, &m)| fmt_cell(c.mean, Some(c.std), m))
                        .unwrap_or_else(|| "-".to_string())
                })
                .collect();
            (strategy_label(strategy).to_string(), cells)
        })
        .collect();
    let mut text = TextTable {
        caption,
        corner: "strategy".to_string(),
        col_names: report.targets.clone(),
        rows,
    }
    .render();
    if let Some(note) = &report.incomplete {
        text.push_str(&format!("INCOMPLETE: {note}\n"));
    }
    text
}

/// Text table for an all-pairs grid: sources as rows, targets as columns,
/// the best source for each target column marked.
pub fn render_grid(report: &GridReport) -> String {
    let caption = format!(
        "grid method={} strategy={} metric={} runs={} seed={}",
        json_token(&report.method),
        strategy_label(report.strategy),
        json_token(&report.metric),
        report.runs,
        report.base_seed,
    );
    let rows = report
        .row_names
        .iter()
        .enumerate()
        .map(|(r, name)| {
            let cells: Vec<String> = report.cells[r]
                .iter()
                .enumerate()
                .map(|(c, &mean)| fmt_cell(mean, Some(report.stds[r][c]), report.col_best[c] == r))
                .collect();
            (name.clone(), cells)
        })
        .collect();
    TextTable {
        caption,
        corner: "source \\ target".to_string(),
        col_names: report.col_names.clone(),
        rows,
    }
    .render()
}

/// Text table for a corruption study: fractions as rows.
pub fn render_corruption(report: &CorruptionReport) -> String {
    let caption = format!(
        "corruption source={} target={} metric={} runs={} seed={}",
        report.source,
        report.target,
        json_token(&report.metric),
        report.runs,
        report.base_seed,
    );
    let rows = report
        .fractions
        .iter()
        .enumerate()
        .map(|(i, fraction)| {
            let cells = vec![
                fmt_score(report.label_quality[i]),
                fmt_cell(report.cells[i].mean, Some(report.cells[i].std), false),
            ];
            (format!("{:.2}", fraction), cells)
        })
        .collect();
    TextTable {
        caption,
        corner: "fraction".to_string(),
        col_names: vec!["label_quality".to_string(), "test_score".to_string()],
        rows,
    }
    .render()
}

/// Text table for a prompt-set evaluation (no optimization): targets as rows.
pub fn render_prompt_eval(report: &PromptEvalReport) -> String {
    let prompt_note = if report.prompts.len() == 1 {
        format!("prompt={:?}", report.prompts[0])
    } else {
        format!("prompts={}", report.prompts.len())
    };
    let caption = format!(
        "prompt-eval strategy={} metric={} seed={} test_size={} {}",
        strategy_label(report.strategy),
        json_token(&report.metric),
        report.base_seed,
        report.test_size,
        prompt_note,
    );
    let rows = report
        .cells
        .iter()
        .map(|cell| (cell.target.clone(), vec![fmt_score(cell.mean)]))
        .collect();
    TextTable {
        caption,
        corner: "target".to_string(),
        col_names: vec!["test_score".to_string()],
        rows,
    }
    .render()
}

/// Text table for a shift diagnostic matrix. Values are raw (not
/// percentages); absent cells render as `-`; each column's best present value
/// is marked.
pub fn render_shift(matrix: &ShiftMatrix) -> String {
    let caption = match matrix.ngram_mode {
        Some(mode) => format!(
            "shift stat={} ngram_mode={}",
            json_token(&matrix.stat),
            json_token(&mode)
        ),
        None => format!("shift stat={}", json_token(&matrix.stat)),
    };
    let rows = matrix
        .row_names
        .iter()
        .enumerate()
        .map(|(r, name)| {
            let cells: Vec<String> = matrix.cells[r]
                .iter()
                .enumerate()
                .map(|(c, value)| match value {
                    Some(v) => {
                        let marked = matrix.col_best[c] == Some(r);
                        let mut cell = format!("{v:.4}");
                        if marked {
                            cell.push('*');
                        }
                        cell
                    }
                    None => "-".to_string(),
                })
                .collect();
            (name.clone(), cells)
        })
        .collect();
    TextTable {
        caption,
        corner: "source \\ target".to_string(),
        col_names: matrix.col_names.clone(),
        rows,
    }
    .render()
}

/// JSONL of every pseudo-labeling decision in an experiment report.
pub fn labels_jsonl(report: &ExperimentReport) -> String {
    let mut out = String::new();
    for detail in &report.run_details {
        for opt in &detail.optimizations {
            let Some(labeling) = &opt.labeling else { continue };
            let target = opt.target.as_deref().unwrap_or("-");
            for (decision, accepted) in labeling
                .accepted
                .iter()
                .map(|d| (d, true))
                .chain(labeling.rejected.iter().map(|d| (d, false)))
            {
                let line = serde_json::json!({
                    "run": detail.run,
                    "target": target,
                    "id": decision.example.id,
                    "input": decision.example.input,
                    "pseudo_label": decision.answer,
                    "agreement": decision.agreement,
                    "accepted": accepted,
                });
                out.push_str(&serde_json::to_string(&line).expect("label line serializes"));
                out.push('\n');
            }
        }
    }
    out
}

/// Prompt texts produced by an experiment as (filename, content) pairs —
/// every candidate plus a `best` copy per optimization.
pub fn prompt_files(report: &ExperimentReport) -> Vec<(String, String)> {
    let mut files = Vec::new();
    for detail in &report.run_details {
        for opt in &detail.optimizations {
            let scope = opt.target.as_deref().unwrap_or("source-only");
            for candidate in &opt.candidates {
                files.push((
                    format!("run{}.{}.candidate{}.txt", detail.run, scope, candidate.split_index),
                    format!("{}\n", candidate.text),
                ));
            }
            files.push((
                format!("run{}.{}.best.txt", detail.run, scope),
                format!("{}\n", opt.candidates[opt.top1].text),
            ));
        }
    }
    files
}

/// Lowercase token for an enum's serde name (used in captions).
fn json_token<T: Serialize>(value: &T) -> String {
    serde_json::to_value(value)
        .expect("token serializes")
        .as_str()
        .expect("enum serializes to a string")
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MetricKind;
    use crate::gpo::Ablation;
    use crate::harness::Method;

    fn toy_report() -> ExperimentReport {
        ExperimentReport {
            method: Method::Gpo,
            source: "src".to_string(),
            targets: vec!["t1".to_string(), "t2".to_string()],
            metric: MetricKind::Accuracy,
            n_shot: 4,
            k_prompts: 2,
            runs: 2,
            base_seed: 11,
            threshold: Some(0.83),
            ablation: Ablation::None,
            test_size: 6,
            cells: vec![
                EvalCell {
                    target: "t1".to_string(),
                    strategy: Strategy::Top1,
                    per_run: vec![0.8, 0.9],
                    mean: 0.85,
                    std: 0.05,
                },
                EvalCell {
                    target: "t1".to_string(),
                    strategy: Strategy::Ensemble,
                    per_run: vec![0.9, 1.0],
                    mean: 0.95,
                    std: 0.05,
                },
                EvalCell {
                    target: "t2".to_string(),
                    strategy: Strategy::Top1,
                    per_run: vec![0.7, 0.7],
                    mean: 0.7,
                    std: 0.0,
                },
                EvalCell {
                    target: "t2".to_string(),
                    strategy: Strategy::Ensemble,
                    per_run: vec![0.6, 0.7],
                    mean: 0.65,
                    std: 0.05,
                },
            ],
            run_details: vec![],
            calls_per_run: vec![100, 100],
            incomplete: None,
        }
    }

    #[test]
    fn scores_render_as_percentages() {
        assert_eq!(fmt_score(0.823), "82.3");
        assert_eq!(fmt_score(1.0), "100.0");
        assert_eq!(fmt_score(0.0), "0.0");
        assert_eq!(fmt_cell(0.85, Some(0.05), true), "85.0 ± 5.0*");
        assert_eq!(fmt_cell(0.85, None, false), "85.0");
    }

    #[test]
    fn experiment_table_marks_best_strategy_per_target() {
        let text = render_experiment(&toy_report());
        // Ensemble wins on t1, top1 wins on t2.
        let top1_line = text.lines().find(|l| l.starts_with("top1")).unwrap();
        let ensemble_line = text.lines().find(|l| l.starts_with("ensemble")).unwrap();
        assert!(ensemble_line.contains("95.0 ± 5.0*"));
        assert!(top1_line.contains("85.0 ± 5.0 "));
        assert!(top1_line.contains("70.0 ± 0.0*"));
        assert!(ensemble_line.contains("65.0 ± 5.0"));
        assert!(!ensemble_line.contains("65.0 ± 5.0*"));
        // Caption carries the configuration.
        assert!(text.starts_with(
            "method=gpo source=src metric=accuracy n_shot=4 k=2 runs=2 seed=11 threshold=0.83 ablation=none test_size=6"
        ));
    }

    #[test]
    fn json_round_trip_renders_identically() {
        let report = toy_report();
        let json = to_json_pretty(&report);
        let parsed: ExperimentReport = serde_json::from_str(&json).unwrap();
        assert_eq!(render_experiment(&report), render_experiment(&parsed));
        assert_eq!(json, to_json_pretty(&parsed));
    }

    #[test]
    fn grid_table_marks_column_best_rows() {
        let grid = GridReport {
            method: Method::Ape,
            strategy: Strategy::Top1,
            metric: MetricKind::Accuracy,
            runs: 2,
            base_seed: 0,
            row_names: vec!["a".to_string(), "b".to_string()],
            col_names: vec!["a".to_string(), "b".to_string()],
            cells: vec![vec![0.9, 0.4], vec![0.5, 0.8]],
            stds: vec![vec![0.0, 0.1], vec![0.1, 0.0]],
            col_best: vec![0, 1],
        };
        let text = render_grid(&grid);
        let row_a = text.lines().find(|l| l.starts_with("a ")).unwrap();
        let row_b = text.lines().find(|l| l.starts_with("b ")).unwrap();
        assert!(row_a.contains("90.0 ± 0.0*"));
        assert!(row_a.contains("40.0 ± 10.0"));
        assert!(!row_a.contains("40.0 ± 10.0*"));
        assert!(row_b.contains("80.0 ± 0.0*"));
    }

    #[test]
    fn shift_table_renders_absent_cells_as_dash() {
        let matrix = ShiftMatrix {
            stat: crate::shift::ShiftStat::LabelKl,
            ngram_mode: None,
            row_names: vec!["a".to_string(), "b".to_string()],
            col_names: vec!["a".to_string(), "b".to_string()],
            cells: vec![vec![None, Some(0.1234)], vec![Some(0.5), None]],
            col_best: vec![Some(1), Some(0)],
        };
        let text = render_shift(&matrix);
        let row_a = text.lines().find(|l| l.starts_with("a ")).unwrap();
        assert!(row_a.contains("-"));
        assert!(row_a.contains("0.1234*"));
        assert!(text.starts_with("shift stat=label_kl"));
    }

    #[test]
    fn incomplete_reports_carry_a_visible_flag() {
        let mut report = toy_report();
        report.incomplete = Some("run 1 failed: transport".to_string());
        let text = render_experiment(&report);
        assert!(text.ends_with("INCOMPLETE: run 1 failed: transport\n"));
    }

    #[test]
    fn prompt_eval_table_lists_targets_as_rows() {
        let report = PromptEvalReport {
            prompts: vec!["classify the sentiment".to_string()],
            strategy: Strategy::Top1,
            metric: MetricKind::Accuracy,
            base_seed: 7,
            test_size: 6,
            cells: vec![EvalCell {
                target: "t1".to_string(),
                strategy: Strategy::Top1,
                per_run: vec![0.5],
                mean: 0.5,
                std: 0.0,
            }],
        };
        let text = render_prompt_eval(&report);
        assert!(text.starts_with(
            "prompt-eval strategy=top1 metric=accuracy seed=7 test_size=6 prompt=\"classify the sentiment\""
        ));
        let row = text.lines().find(|l| l.starts_with("t1")).unwrap();
        assert!(row.contains("50.0"));
    }

    #[test]
    fn tables_have_no_trailing_whitespace_rows() {
        let text = render_experiment(&toy_report());
        for line in text.lines() {
            assert_eq!(line, line.trim_end(), "trailing whitespace in: {line:?}");
        }
    }
}
