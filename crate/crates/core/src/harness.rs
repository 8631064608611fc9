//! Repeated, seeded experiments over dataset groups.
//!
//! The harness turns the optimizer and pipeline primitives into studies:
//! optimize on a source group with one of three methods, evaluate on held-out
//! target test sets under two deployment strategies, repeat R times with
//! shifted seeds, and aggregate. Test sets are carved out of every group
//! *before* any optimization pool is formed, from the base seed, so all runs
//! of one experiment — and all experiments sharing that seed — score against
//! identical test examples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, GenParams};
use crate::data::{
    corrupt_labels, derive_seed, sample_shots, split_train_val, Example, Group, MetricKind,
    SplitSpec,
};
use crate::error::{Error, Result};
use crate::gpo::{
    default_threshold, joint_optimize, labeling_accuracy, run_gpo, Ablation, GpoConfig, JointData,
    LabeledTargetSet, StageCalls,
};
use crate::optimizer::{
    ensemble_predict, evaluate_candidates, generate_candidates, predict_one, select_top1,
    MetaPromptTemplate, OptimizerConfig, PromptCandidate,
};
use crate::task_metrics::{score, score_one};

/// Optimization method under study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Prompt search on source demonstrations only.
    Ape,
    /// Like [`Method::Ape`], but every meta prompt also sees unlabeled
    /// target inputs.
    ApeUt,
    /// The full pseudo-labeling pipeline.
    Gpo,
}

/// How the optimized prompts are deployed at test time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// The single best candidate answers alone (one call per input).
    Top1,
    /// All K candidates vote (K calls per input).
    Ensemble,
}

/// Full description of one experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub method: Method,
    pub source: String,
    pub targets: Vec<String>,
    pub n_shot: usize,
    pub k_prompts: usize,
    pub runs: usize,
    pub seed: u64,
    /// Consistency threshold; `None` means the metric's default.
    pub threshold: Option<f64>,
    pub ablation: Ablation,
    /// Source train/validation carve (applies after the test split).
    pub split: SplitSpec,
    /// Held-out test examples per group.
    pub test_size: usize,
    /// Unlabeled target inputs sampled for labeling / meta prompts
    /// (default `n_shot`).
    pub target_sample_size: Option<usize>,
    /// Validation examples scored per candidate for source-only methods
    /// (default `n_shot`).
    pub val_sample_size: Option<usize>,
    pub strategies: Vec<Strategy>,
    pub gen_params: GenParams,
    pub infer_params: GenParams,
}

impl ExperimentConfig {
    pub fn new(method: Method, source: impl Into<String>, targets: Vec<String>) -> Self {
        ExperimentConfig {
            method,
            source: source.into(),
            targets,
            n_shot: 36,
            k_prompts: 6,
            runs: 5,
            seed: 0,
            threshold: None,
            ablation: Ablation::None,
            split: SplitSpec::default(),
            test_size: 150,
            target_sample_size: None,
            val_sample_size: None,
            strategies: vec![Strategy::Top1, Strategy::Ensemble],
            gen_params: GenParams::default(),
            infer_params: GenParams::default(),
        }
    }

    fn optimizer_config(&self, metric: MetricKind) -> Result<OptimizerConfig> {
        let mut opt = OptimizerConfig::new(self.n_shot, self.k_prompts, metric)?;
        opt.gen_params = self.gen_params;
        opt.infer_params = self.infer_params;
        Ok(opt)
    }
}

/// Scores of one (target, strategy) cell across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub target: String,
    pub strategy: Strategy,
    pub per_run: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// What one optimization produced within a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationRecord {
    /// Which target's data fed the optimization; `None` when it used source
    /// data alone and serves every target.
    pub target: Option<String>,
    pub candidates: Vec<PromptCandidate>,
    pub top1: usize,
    /// Pseudo-labeling outcome (pipeline method only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labeling: Option<LabeledTargetSet>,
    /// Accepted-label quality against gold, when gold labels exist.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labeling_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage_calls: Option<StageCalls>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunDetail {
    pub run: usize,
    pub seed: u64,
    pub optimizations: Vec<OptimizationRecord>,
}

/// Aggregated outcome of one experiment.
///
/// `incomplete` is `None` for a fully completed experiment; otherwise it
/// describes the run failure that aborted it, and every aggregate covers only
/// the runs that finished.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: Method,
    pub source: String,
    pub targets: Vec<String>,
    pub metric: MetricKind,
    pub n_shot: usize,
    pub k_prompts: usize,
    pub runs: usize,
    pub base_seed: u64,
    pub threshold: Option<f64>,
    pub ablation: Ablation,
    pub test_size: usize,
    pub cells: Vec<EvalCell>,
    pub run_details: Vec<RunDetail>,
    pub calls_per_run: Vec<usize>,
    pub incomplete: Option<String>,
}

impl ExperimentReport {
    pub fn cell(&self, target: &str, strategy: Strategy) -> Option<&EvalCell> {
        self.cells
            .iter()
            .find(|c| c.target == target && c.strategy == strategy)
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.max(0.0).sqrt())
}

/// One group's role-ready pools: held-out test examples and the remainder.
struct GroupPools {
    /// Labeled test examples (gold outputs required at evaluation time).
    test: Vec<Example>,
    /// Everything else, in original order.
    rest: Vec<Example>,
}

/// Carve the test split from a group with a seed derived from the base seed
/// and the group's name — identical across runs and methods.
fn carve_test(group: &Group, test_size: usize, base_seed: u64) -> Result<GroupPools> {
    let want = test_size.min(group.examples.len());
    let test = sample_shots(
        &group.examples,
        want,
        derive_seed(base_seed, &format!("test:{}", group.name)),
    )?;
    let test_ids: std::collections::BTreeSet<&str> = test.iter().map(|e| e.id.as_str()).collect();
    let rest: Vec<Example> = group
        .examples
        .iter()
        .filter(|e| !test_ids.contains(e.id.as_str()))
        .cloned()
        .collect();
    Ok(GroupPools { test, rest })
}

fn strip_labels(examples: &[Example]) -> Vec<Example> {
    examples
        .iter()
        .map(|e| Example {
            id: e.id.clone(),
            input: e.input.clone(),
            output: None,
            meta: e.meta.clone(),
        })
        .collect()
}

fn gold_map(examples: &[Example]) -> BTreeMap<String, String> {
    examples
        .iter()
        .filter_map(|e| e.output.clone().map(|o| (e.id.clone(), o)))
        .collect()
}

/// Source-only prompt search (with optional unlabeled inputs in the meta
/// prompt): split, sample demos, generate K candidates, score them on a
/// validation sample, pick the best.
#[allow(clippy::too_many_arguments)]
fn optimize_source_only(
    backend: &dyn Backend,
    source_pool: &[Example],
    unlabeled: Option<&[Example]>,
    opt: &OptimizerConfig,
    split: SplitSpec,
    val_sample_size: usize,
    label_space: Option<&[String]>,
    seed: u64,
) -> Result<(Vec<PromptCandidate>, usize)> {
    let mut spec = split;
    spec.seed = derive_seed(seed, "source-split");
    let (train, val) = split_train_val(source_pool, spec)?;
    let demos = sample_shots(&train, opt.n_shot, derive_seed(seed, "source-shots"))?;
    let template = if unlabeled.is_some() {
        MetaPromptTemplate::demos_plus_unlabeled()
    } else {
        MetaPromptTemplate::demos()
    };
    let mut candidates = generate_candidates(
        backend,
        &template,
        &demos,
        opt.k_prompts,
        unlabeled,
        opt.gen_params,
    )?;
    let val_sample = sample_shots(
        &val,
        val_sample_size.min(val.len()),
        derive_seed(seed, "val-sample"),
    )?;
    evaluate_candidates(
        backend,
        &mut candidates,
        &val_sample,
        opt.metric,
        label_space,
        opt.infer_params,
    )?;
    let top1 = select_top1(&candidates)?;
    Ok((candidates, top1))
}

/// Score a prompt set on a labeled test set under one strategy.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_on_test(
    backend: &dyn Backend,
    best: &str,
    all: &[String],
    test: &[Example],
    strategy: Strategy,
    metric: MetricKind,
    label_space: Option<&[String]>,
    params: GenParams,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyValidation);
    }
    if strategy == Strategy::Ensemble && all.len() < 2 {
        return Err(Error::EnsembleNeedsPrompts);
    }
    let mut predictions = Vec::with_capacity(test.len());
    let mut golds = Vec::with_capacity(test.len());
    for ex in test {
        let gold = ex.require_output()?.to_string();
        let prediction = match strategy {
            Strategy::Top1 => predict_one(backend, best, &ex.input, label_space, params)?,
            Strategy::Ensemble => {
                ensemble_predict(backend, all, &ex.input, label_space, params)?
                    .answer
                    .unwrap_or_default()
            }
        };
        predictions.push(prediction);
        golds.push(gold);
    }
    score(metric, &predictions, &golds)
}

/// Run one experiment: R seeded optimization runs, each evaluated on every
/// target test set under every configured strategy. A failing run aborts the
/// experiment.
pub fn run_experiment(
    backend: &dyn Backend,
    source: &Group,
    targets: &[&Group],
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let (report, failure) = run_experiment_partial(backend, source, targets, config)?;
    match failure {
        None => Ok(report),
        Some(error) => Err(error),
    }
}

/// Like [`run_experiment`], but a run failure yields the partial report over
/// the completed runs (flagged via [`ExperimentReport::incomplete`]) next to
/// the error, so callers can preserve what finished. Setup problems — bad
/// configuration, metric mismatches, pools too small to carve — still fail
/// outright with no report.
pub fn run_experiment_partial(
    backend: &dyn Backend,
    source: &Group,
    targets: &[&Group],
    config: &ExperimentConfig,
) -> Result<(ExperimentReport, Option<Error>)> {
    let metric = source.metric;
    if targets.iter().any(|t| t.metric != metric) {
        return Err(Error::MetricMismatch);
    }
    let opt = config.optimizer_config(metric)?;
    if config.runs == 0 {
        return Err(Error::InvalidConfig {
            message: "runs must be at least 1".to_string(),
        });
    }

    let source_pools = carve_test(source, config.test_size, config.seed)?;
    let mut target_pools = Vec::with_capacity(targets.len());
    for target in targets {
        // The source group may itself be a target; its pools are identical
        // either way because the carve seed depends only on name + base seed.
        target_pools.push(carve_test(target, config.test_size, config.seed)?);
    }

    let run_once = |run: usize| -> Result<(RunDetail, Vec<((String, Strategy), f64)>, usize)> {
        let run_seed = config.seed + run as u64;
        let calls_before = backend.calls();
        let mut optimizations = Vec::new();

        match config.method {
            Method::Ape => {
                let (candidates, top1) = optimize_source_only(
                    backend,
                    &source_pools.rest,
                    None,
                    &opt,
                    config.split,
                    config.val_sample_size.unwrap_or(config.n_shot),
                    source.label_space.as_deref(),
                    run_seed,
                )?;
                optimizations.push(OptimizationRecord {
                    target: None,
                    candidates,
                    top1,
                    labeling: None,
                    labeling_accuracy: None,
                    stage_calls: None,
                });
            }
            Method::ApeUt => {
                for (target, pools) in targets.iter().zip(&target_pools) {
                    let target_seed = derive_seed(run_seed, &format!("target:{}", target.name));
                    let want = config
                        .target_sample_size
                        .unwrap_or(config.n_shot)
                        .min(pools.rest.len());
                    let unlabeled_pool = strip_labels(&pools.rest);
                    let unlabeled_sample = sample_shots(
                        &unlabeled_pool,
                        want,
                        derive_seed(target_seed, "unlabeled-sample"),
                    )?;
                    let (candidates, top1) = optimize_source_only(
                        backend,
                        &source_pools.rest,
                        Some(&unlabeled_sample),
                        &opt,
                        config.split,
                        config.val_sample_size.unwrap_or(config.n_shot),
                        source.label_space.as_deref(),
                        target_seed,
                    )?;
                    optimizations.push(OptimizationRecord {
                        target: Some(target.name.clone()),
                        candidates,
                        top1,
                        labeling: None,
                        labeling_accuracy: None,
                        stage_calls: None,
                    });
                }
            }
            Method::Gpo => {
                for (target, pools) in targets.iter().zip(&target_pools) {
                    let target_seed = derive_seed(run_seed, &format!("target:{}", target.name));
                    let gpo_config = GpoConfig {
                        opt: opt.clone(),
                        threshold: config
                            .threshold
                            .unwrap_or_else(|| default_threshold(metric)),
                        ablation: config.ablation,
                        split: config.split,
                        target_sample_size: config.target_sample_size,
                        seed: target_seed,
                    };
                    let unlabeled_pool = strip_labels(&pools.rest);
                    let result = run_gpo(
                        backend,
                        &source_pools.rest,
                        source.label_space.as_deref(),
                        &unlabeled_pool,
                        &gpo_config,
                    )?;
                    let gold = gold_map(&pools.rest);
                    let label_acc = if gold.is_empty() {
                        None
                    } else {
                        labeling_accuracy(&result.labeled, &gold, metric).ok()
                    };
                    optimizations.push(OptimizationRecord {
                        target: Some(target.name.clone()),
                        candidates: result.candidates,
                        top1: result.top1,
                        labeling: Some(result.labeled),
                        labeling_accuracy: label_acc,
                        stage_calls: Some(result.stage_calls),
                    });
                }
            }
        }

        // Evaluate on every (target, strategy) pair.
        let mut scores = Vec::new();
        for (t_idx, (target, pools)) in targets.iter().zip(&target_pools).enumerate() {
            let record = match config.method {
                Method::Ape => &optimizations[0],
                _ => &optimizations[t_idx],
            };
            let all: Vec<String> = record.candidates.iter().map(|c| c.text.clone()).collect();
            let best = &record.candidates[record.top1].text;
            for &strategy in &config.strategies {
                let value = evaluate_on_test(
                    backend,
                    best,
                    &all,
                    &pools.test,
                    strategy,
                    metric,
                    target.label_space.as_deref(),
                    config.infer_params,
                )?;
                scores.push(((target.name.clone(), strategy), value));
            }
        }

        let detail = RunDetail {
            run,
            seed: run_seed,
            optimizations,
        };
        Ok((detail, scores, backend.calls() - calls_before))
    };

    let mut cells: BTreeMap<(String, Strategy), Vec<f64>> = BTreeMap::new();
    let mut run_details = Vec::with_capacity(config.runs);
    let mut calls_per_run = Vec::with_capacity(config.runs);
    let mut failure = None;

    for run in 0..config.runs {
        match run_once(run) {
            Ok((detail, scores, calls)) => {
                for (key, value) in scores {
                    cells.entry(key).or_default().push(value);
                }
                run_details.push(detail);
                calls_per_run.push(calls);
            }
            Err(e) => {
                failure = Some(Error::RunFailed {
                    run,
                    source: Box::new(e),
                });
                break;
            }
        }
    }

    // Emit cells in (configured target order) x (configured strategy order),
    // covering only completed runs.
    let mut out_cells = Vec::new();
    for target in targets {
        for &strategy in &config.strategies {
            if let Some(per_run) = cells.remove(&(target.name.clone(), strategy)) {
                let (mean, std) = mean_std(&per_run);
                out_cells.push(EvalCell {
                    target: target.name.clone(),
                    strategy,
                    per_run,
                    mean,
                    std,
                });
            }
        }
    }

    let report = ExperimentReport {
        method: config.method,
        source: source.name.clone(),
        targets: targets.iter().map(|t| t.name.clone()).collect(),
        metric,
        n_shot: config.n_shot,
        k_prompts: config.k_prompts,
        runs: config.runs,
        base_seed: config.seed,
        threshold: config.threshold,
        ablation: config.ablation,
        test_size: config.test_size,
        cells: out_cells,
        run_details,
        calls_per_run,
        incomplete: failure.as_ref().map(|e| e.to_string()),
    };
    Ok((report, failure))
}

/// All-pairs table: optimize on each group, evaluate on every group's test
/// set (diagonal included).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridReport {
    pub method: Method,
    pub strategy: Strategy,
    pub metric: MetricKind,
    pub runs: usize,
    pub base_seed: u64,
    pub row_names: Vec<String>,
    pub col_names: Vec<String>,
    /// `cells[row][col]` = mean score of row-source prompts on col-target test.
    pub cells: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
    /// Per column: row index with the highest mean.
    pub col_best: Vec<usize>,
}

/// Run the all-pairs study. Only the source-only method is supported here:
/// its prompts are target-independent, so one optimization per row serves the
/// whole row and the table stays comparable column by column.
pub fn run_grid(
    backend: &dyn Backend,
    groups: &[&Group],
    config: &ExperimentConfig,
    strategy: Strategy,
) -> Result<GridReport> {
    if config.method != Method::Ape {
        return Err(Error::InvalidConfig {
            message: "grid studies support the source-only method (ape)".to_string(),
        });
    }
    if groups.len() < 2 {
        return Err(Error::TooFewGroups { have: groups.len() });
    }
    let metric = groups[0].metric;
    if groups.iter().any(|g| g.metric != metric) {
        return Err(Error::MetricMismatch);
    }
    let names: Vec<String> = groups.iter().map(|g| g.name.clone()).collect();
    let mut cells = Vec::with_capacity(groups.len());
    let mut stds = Vec::with_capacity(groups.len());
    for source in groups {
        let mut row_config = config.clone();
        row_config.source = source.name.clone();
        row_config.targets = names.clone();
        row_config.strategies = vec![strategy];
        let report = run_experiment(backend, source, groups, &row_config)?;
        let mut row_means = Vec::with_capacity(groups.len());
        let mut row_stds = Vec::with_capacity(groups.len());
        for name in &names {
            let cell = report.cell(name, strategy).expect("cell for every target");
            row_means.push(cell.mean);
            row_stds.push(cell.std);
        }
        cells.push(row_means);
        stds.push(row_stds);
    }
    let col_best = (0..names.len())
        .map(|c| {
            let mut best = 0;
            for r in 1..names.len() {
                if cells[r][c] > cells[best][c] {
                    best = r;
                }
            }
            best
        })
        .collect();
    Ok(GridReport {
        method: config.method,
        strategy,
        metric,
        runs: config.runs,
        base_seed: config.seed,
        row_names: names.clone(),
        col_names: names,
        cells,
        stds,
        col_best,
    })
}

/// Label-noise study: replace the pseudo-labeling step with gold target
/// labels corrupted at a set of fractions, and measure how test quality
/// degrades as the injected labels get worse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorruptionReport {
    pub source: String,
    pub target: String,
    pub metric: MetricKind,
    pub runs: usize,
    pub base_seed: u64,
    pub fractions: Vec<f64>,
    /// Measured injected-label quality per fraction (mean over runs).
    pub label_quality: Vec<f64>,
    /// Test score per fraction.
    pub cells: Vec<EvalCell>,
}

/// Corruption study (see [`CorruptionReport`]). The corrupted subsets are
/// nested across fractions within a run, so rising fractions strictly add
/// noise rather than re-rolling it.
pub fn run_corruption_study(
    backend: &dyn Backend,
    source: &Group,
    target: &Group,
    fractions: &[f64],
    config: &ExperimentConfig,
) -> Result<CorruptionReport> {
    let metric = source.metric;
    if target.metric != metric {
        return Err(Error::MetricMismatch);
    }
    let label_space = source.label_space.as_ref().ok_or(Error::NoLabelSpace {
        group: source.name.clone(),
    })?;
    let opt = config.optimizer_config(metric)?;
    let source_pools = carve_test(source, config.test_size, config.seed)?;
    let target_pools = carve_test(target, config.test_size, config.seed)?;

    let mut per_fraction_scores: Vec<Vec<f64>> = vec![Vec::new(); fractions.len()];
    let mut per_fraction_quality: Vec<Vec<f64>> = vec![Vec::new(); fractions.len()];

    for run in 0..config.runs {
        let run_seed = config.seed + run as u64;
        let fail = |e: Error| Error::RunFailed {
            run,
            source: Box::new(e),
        };
        let mut split = config.split;
        split.seed = derive_seed(run_seed, "source-split");
        let (train, val) = split_train_val(&source_pools.rest, split).map_err(fail)?;
        let demos =
            sample_shots(&train, opt.n_shot, derive_seed(run_seed, "source-shots")).map_err(fail)?;
        let want = config
            .target_sample_size
            .unwrap_or(config.n_shot)
            .min(target_pools.rest.len());
        let target_sample = sample_shots(
            &target_pools.rest,
            want,
            derive_seed(run_seed, "target-sample"),
        )
        .map_err(fail)?;
        let corrupt_seed = derive_seed(run_seed, "corrupt");

        for (f_idx, &fraction) in fractions.iter().enumerate() {
            let corrupted =
                corrupt_labels(&target_sample, label_space, fraction, corrupt_seed).map_err(fail)?;
            // Quality of the injected labels against gold.
            let quality = {
                let total: f64 = target_sample
                    .iter()
                    .zip(&corrupted)
                    .map(|(gold, noisy)| {
                        score_one(
                            metric,
                            noisy.output.as_deref().unwrap_or_default(),
                            gold.output.as_deref().unwrap_or_default(),
                        )
                    })
                    .sum();
                total / target_sample.len() as f64
            };
            per_fraction_quality[f_idx].push(quality);

            let gpo_config = GpoConfig {
                opt: opt.clone(),
                threshold: 0.0,
                ablation: Ablation::None,
                split: config.split,
                target_sample_size: config.target_sample_size,
                seed: run_seed,
            };
            let joint = JointData {
                source_demos: &demos,
                source_val: &val,
                accepted_targets: &corrupted,
            };
            let (candidates, top1) =
                joint_optimize(backend, joint, &gpo_config, Some(label_space)).map_err(fail)?;
            let value = evaluate_on_test(
                backend,
                &candidates[top1].text,
                &candidates.iter().map(|c| c.text.clone()).collect::<Vec<_>>(),
                &target_pools.test,
                Strategy::Top1,
                metric,
                target.label_space.as_deref(),
                config.infer_params,
            )
            .map_err(fail)?;
            per_fraction_scores[f_idx].push(value);
        }
    }

    let cells = fractions
        .iter()
        .zip(&per_fraction_scores)
        .map(|(&fraction, per_run)| {
            let (mean, std) = mean_std(per_run);
            EvalCell {
                target: format!("{:.2}", fraction),
                strategy: Strategy::Top1,
                per_run: per_run.clone(),
                mean,
                std,
            }
        })
        .collect();
    let label_quality = per_fraction_quality
        .iter()
        .map(|q| mean_std(q).0)
        .collect();

    Ok(CorruptionReport {
        source: source.name.clone(),
        target: target.name.clone(),
        metric,
        runs: config.runs,
        base_seed: config.seed,
        fractions: fractions.to_vec(),
        label_quality,
        cells,
    })
}

/// Score a fixed prompt set (no optimization) on target test sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptEvalReport {
    pub prompts: Vec<String>,
    pub strategy: Strategy,
    pub metric: MetricKind,
    pub base_seed: u64,
    pub test_size: usize,
    pub cells: Vec<EvalCell>,
}

/// Evaluate given prompts on every target's held-out test split. Top-1 uses
/// the first prompt; the ensemble strategy needs at least two.
pub fn run_prompt_eval(
    backend: &dyn Backend,
    prompts: &[String],
    targets: &[&Group],
    strategy: Strategy,
    config: &ExperimentConfig,
) -> Result<PromptEvalReport> {
    if prompts.is_empty() || prompts.iter().any(|p| p.trim().is_empty()) {
        return Err(Error::EmptyPrompt);
    }
    if targets.is_empty() {
        return Err(Error::TooFewGroups { have: 0 });
    }
    let metric = targets[0].metric;
    if targets.iter().any(|t| t.metric != metric) {
        return Err(Error::MetricMismatch);
    }
    let mut cells = Vec::new();
    for target in targets {
        let pools = carve_test(target, config.test_size, config.seed)?;
        let value = evaluate_on_test(
            backend,
            &prompts[0],
            prompts,
            &pools.test,
            strategy,
            metric,
            target.label_space.as_deref(),
            config.infer_params,
        )?;
        cells.push(EvalCell {
            target: target.name.clone(),
            strategy,
            per_run: vec![value],
            mean: value,
            std: 0.0,
        });
    }
    Ok(PromptEvalReport {
        prompts: prompts.to_vec(),
        strategy,
        metric,
        base_seed: config.seed,
        test_size: config.test_size,
        cells,
    })
}

/// Score one fixed, human-written instruction — the baseline every optimized
/// prompt is compared against. Ensemble strategy is unavailable for a single
/// prompt.
pub fn run_fixed_prompt(
    backend: &dyn Backend,
    prompt: &str,
    targets: &[&Group],
    strategy: Strategy,
    config: &ExperimentConfig,
) -> Result<PromptEvalReport> {
    run_prompt_eval(backend, &[prompt.to_string()], targets, strategy, config)
}
