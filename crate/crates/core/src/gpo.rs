//! Shift-robust prompt optimization over unlabeled deployment data.
//!
//! Three steps, all through the same backend:
//!
//! 1. Generate K labeling prompts from N labeled source demonstrations
//!    (these are never evaluated — they exist to vote).
//! 2. Let the K prompts vote on unlabeled target inputs. A target example is
//!    pseudo-labeled only when the ensemble's agreement clears the
//!    consistency threshold.
//! 3. Re-run prompt search on a mixed pool: the source demonstrations plus
//!    the accepted target examples upsampled to parity, with a mixed
//!    validation set to match. The best candidate on mixed validation wins.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::data::{
    derive_seed, sample_shots, split_train_val, upsample_to, Example, SplitSpec,
};
use crate::error::{Error, Result};
use crate::optimizer::{
    ensemble_predict, evaluate_candidates, generate_candidates, select_top1, MetaPromptTemplate,
    OptimizerConfig, PromptCandidate,
};
use crate::task_metrics::score_one;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which part of the pipeline to disable (for ablation studies).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Full pipeline.
    None,
    /// Drop the consistency filter: every target with a usable ensemble
    /// answer is accepted (threshold 0).
    NoConsistency,
    /// Additionally keep pseudo-labeled targets out of the final prompt
    /// *generation* demos; they still enter the mixed validation set.
    NoConsistencyNoTargetTrain,
}

/// Pipeline configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpoConfig {
    pub opt: OptimizerConfig,
    /// Consistency threshold `t`: accept a pseudo-label iff agreement > t.
    pub threshold: f64,
    pub ablation: Ablation,
    /// How the source group is carved into train/validation pools.
    pub split: SplitSpec,
    /// Unlabeled target inputs to pseudo-label (clamped to availability).
    /// Defaults to `opt.n_shot`.
    pub target_sample_size: Option<usize>,
    pub seed: u64,
}

impl GpoConfig {
    pub fn new(opt: OptimizerConfig, threshold: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidConfig {
                message: format!("threshold {threshold} outside [0, 1]"),
            });
        }
        Ok(GpoConfig {
            opt,
            threshold,
            ablation: Ablation::None,
            split: SplitSpec::default(),
            target_sample_size: None,
            seed,
        })
    }

    /// The threshold actually applied: ablations that drop the consistency
    /// filter force it to zero.
    pub fn effective_threshold(&self) -> f64 {
        match self.ablation {
            Ablation::None => self.threshold,
            Ablation::NoConsistency | Ablation::NoConsistencyNoTargetTrain => 0.0,
        }
    }
}

/// Default consistency threshold for a metric: strict for classification,
/// lenient for free-text answers where exact agreement is rare.
pub fn default_threshold(metric: crate::data::MetricKind) -> f64 {
    match metric {
        crate::data::MetricKind::Accuracy => 0.83,
        crate::data::MetricKind::TokenF1 => 0.33,
    }
}

/// One pseudo-labeling decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingDecision {
    pub example: Example,
    /// Ensemble agreement on this input.
    pub agreement: f64,
    /// The winning answer, if usable (set on the example for accepted ones).
    pub answer: Option<String>,
}

/// Outcome of the pseudo-labeling step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTargetSet {
    /// Threshold the decisions were made against.
    pub threshold: f64,
    /// Accepted examples, pseudo-label written into `output`.
    pub accepted: Vec<LabelingDecision>,
    /// Everything the filter turned away.
    pub rejected: Vec<LabelingDecision>,
}

impl LabeledTargetSet {
    pub fn acceptance_rate(&self) -> f64 {
        let total = self.accepted.len() + self.rejected.len();
        if total == 0 {
            0.0
        } else {
            self.accepted.len() as f64 / total as f64
        }
    }

    pub fn accepted_examples(&self) -> Vec<Example> {
        self.accepted.iter().map(|d| d.example.clone()).collect()
    }
}

/// Backend calls spent in each pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCalls {
    pub labeling_generation: usize,
    pub labeling: usize,
    pub joint_generation: usize,
    pub joint_evaluation: usize,
}

impl StageCalls {
    pub fn total(&self) -> usize {
        self.labeling_generation + self.labeling + self.joint_generation + self.joint_evaluation
    }
}

/// Everything one pipeline run produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpoResult {
    /// Step-1 prompts (never evaluated).
    pub labeling_prompts: Vec<PromptCandidate>,
    /// Step-3 candidates with validation scores.
    pub candidates: Vec<PromptCandidate>,
    /// Index of the winning candidate.
    pub top1: usize,
    pub labeled: LabeledTargetSet,
    pub stage_calls: StageCalls,
}

impl GpoResult {
    pub fn best_prompt(&self) -> &PromptCandidate {
        &self.candidates[self.top1]
    }
}

/// Step 2 on its own: vote on each target input and split by the threshold.
///
/// Targets must be unlabeled. A decision is accepted iff the ensemble
/// produced a usable answer *and* its agreement strictly exceeds the
/// threshold; an unusable answer (no prompt output matched) is rejected no
/// matter how unanimous.
pub fn ensemble_label(
    backend: &dyn Backend,
    instructions: &[String],
    targets: &[Example],
    label_space: Option<&[String]>,
    threshold: f64,
    params: crate::backend::GenParams,
) -> Result<LabeledTargetSet> {
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for target in targets {
        if target.output.is_some() {
            return Err(Error::LabeledTarget {
                id: target.id.clone(),
            });
        }
        let prediction = ensemble_predict(backend, instructions, &target.input, label_space, params)
            .map_err(|e| Error::Labeling {
                id: target.id.clone(),
                source: Box::new(e),
            })?;
        let usable = prediction.answer.is_some();
        let decision = LabelingDecision {
            example: Example {
                id: target.id.clone(),
                input: target.input.clone(),
                output: prediction.answer.clone(),
                meta: target.meta.clone(),
            },
            agreement: prediction.agreement,
            answer: prediction.answer,
        };
        if usable && prediction.agreement > threshold {
            accepted.push(decision);
        } else {
            rejected.push(decision);
        }
    }
    Ok(LabeledTargetSet {
        threshold,
        accepted,
        rejected,
    })
}

/// Borrowed inputs to [`joint_optimize`].
#[derive(Debug, Clone, Copy)]
pub struct JointData<'a> {
    /// The N source demonstrations already sampled for this run.
    pub source_demos: &'a [Example],
    /// The source validation pool (sampled from internally).
    pub source_val: &'a [Example],
    /// Labeled target examples to mix in (pseudo-labeled or otherwise).
    pub accepted_targets: &'a [Example],
}

/// Step 3 on its own: prompt search over source demos mixed with accepted
/// target examples.
///
/// The accepted pool is upsampled (independently for the demo and validation
/// sides) to the size of the source demo set, so both sides of the mixed data
/// are balanced. Under [`Ablation::NoConsistencyNoTargetTrain`] the
/// generation demos stay source-only while validation remains mixed.
pub fn joint_optimize(
    backend: &dyn Backend,
    data: JointData<'_>,
    config: &GpoConfig,
    label_space: Option<&[String]>,
) -> Result<(Vec<PromptCandidate>, usize)> {
    let n = config.opt.n_shot;
    let k = config.opt.k_prompts;
    let template = MetaPromptTemplate::demos();

    let demo_targets = upsample_to(
        data.accepted_targets,
        n,
        derive_seed(config.seed, "joint-demo-upsample"),
    )?;
    let val_targets = upsample_to(
        data.accepted_targets,
        n,
        derive_seed(config.seed, "joint-val-upsample"),
    )?;

    let demos = match config.ablation {
        Ablation::NoConsistencyNoTargetTrain => data.source_demos.to_vec(),
        _ => {
            let mut mixed = data.source_demos.to_vec();
            mixed.extend(demo_targets);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "joint-demos"));
            mixed.shuffle(&mut rng);
            mixed
        }
    };

    let source_val_sample = sample_shots(
        data.source_val,
        n.min(data.source_val.len()),
        derive_seed(config.seed, "joint-val-sample"),
    )?;
    let mut validation = source_val_sample;
    validation.extend(val_targets);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "joint-val"));
    validation.shuffle(&mut rng);

    let mut candidates = generate_candidates(backend, &template, &demos, k, None, config.opt.gen_params)?;
    evaluate_candidates(
        backend,
        &mut candidates,
        &validation,
        config.opt.metric,
        label_space,
        config.opt.infer_params,
    )?;
    let top1 = select_top1(&candidates)?;
    Ok((candidates, top1))
}

/// Run the full pipeline: optimize prompts for `targets` using the labeled
/// `source_pool` and the unlabeled target inputs.
pub fn run_gpo(
    backend: &dyn Backend,
    source_pool: &[Example],
    label_space: Option<&[String]>,
    targets: &[Example],
    config: &GpoConfig,
) -> Result<GpoResult> {
    config.opt.validate()?;
    let n = config.opt.n_shot;
    let k = config.opt.k_prompts;
    let template = MetaPromptTemplate::demos();

    let mut split = config.split;
    split.seed = derive_seed(config.seed, "source-split");
    let (train, val) = split_train_val(source_pool, split)?;
    let source_demos = sample_shots(&train, n, derive_seed(config.seed, "source-shots"))?;

    // Step 1: labeling prompts from source demonstrations.
    let before = backend.calls();
    let labeling_prompts =
        generate_candidates(backend, &template, &source_demos, k, None, config.opt.gen_params)?;
    let labeling_generation = backend.calls() - before;

    // Step 2: consistency-filtered pseudo-labeling.
    let want = config.target_sample_size.unwrap_or(n).min(targets.len());
    let target_sample = sample_shots(targets, want, derive_seed(config.seed, "target-sample"))?;
    let instructions: Vec<String> = labeling_prompts.iter().map(|c| c.text.clone()).collect();
    let before = backend.calls();
    let labeled = ensemble_label(
        backend,
        &instructions,
        &target_sample,
        label_space,
        config.effective_threshold(),
        config.opt.infer_params,
    )?;
    let labeling = backend.calls() - before;
    if labeled.accepted.is_empty() {
        return Err(Error::AllRejected);
    }

    // Step 3: joint prompt search over mixed data.
    let accepted = labeled.accepted_examples();
    let before = backend.calls();
    let joint = JointData {
        source_demos: &source_demos,
        source_val: &val,
        accepted_targets: &accepted,
    };
    let (candidates, top1) = joint_optimize(backend, joint, config, label_space)?;
    let joint_total = backend.calls() - before;
    // Generation makes exactly one call per candidate; the rest is evaluation.
    let joint_generation = k;
    let joint_evaluation = joint_total - joint_generation;

    Ok(GpoResult {
        labeling_prompts,
        candidates,
        top1,
        labeled,
        stage_calls: StageCalls {
            labeling_generation,
            labeling,
            joint_generation,
            joint_evaluation,
        },
    })
}

/// Fraction of accepted pseudo-labels that match the gold labels (by id),
/// under the given metric.
pub fn labeling_accuracy(
    labeled: &LabeledTargetSet,
    gold: &BTreeMap<String, String>,
    metric: crate::data::MetricKind,
) -> Result<f64> {
    if labeled.accepted.is_empty() {
        return Err(Error::EmptyScores);
    }
    let mut total = 0.0;
    for decision in &labeled.accepted {
        let gold_label = gold
            .get(&decision.example.id)
            .ok_or_else(|| Error::GoldMismatch {
                id: decision.example.id.clone(),
            })?;
        let pseudo = decision.example.require_output()?;
        total += score_one(metric, pseudo, gold_label);
    }
    Ok(total / labeled.accepted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::GenParams;
    use crate::data::MetricKind;
    use crate::testutil::{sentiment_group, unlabeled_targets, TestModel};

    use crate::data::Group;

    fn source_group(n: usize) -> Group {
        sentiment_group("src", n)
    }

    fn targets(n: usize) -> Vec<Example> {
        unlabeled_targets(n)
    }

    fn gpo(
        model: &TestModel,
        source: &Group,
        targets: &[Example],
        cfg: &GpoConfig,
    ) -> crate::error::Result<GpoResult> {
        run_gpo(
            model,
            &source.examples,
            source.label_space.as_deref(),
            targets,
            cfg,
        )
    }

    fn config(n: usize, k: usize, threshold: f64, seed: u64) -> GpoConfig {
        let opt = OptimizerConfig::new(n, k, MetricKind::Accuracy).unwrap();
        let mut config = GpoConfig::new(opt, threshold, seed).unwrap();
        config.split = SplitSpec {
            train_size: 10,
            seed: 0,
        };
        config
    }

    #[test]
    fn full_pipeline_labels_and_reoptimizes() {
        let model = TestModel::new(vec![]);
        let source = source_group(16);
        let targets = targets(6);
        let mut cfg = config(4, 2, 0.83, 7);
        cfg.target_sample_size = Some(6);
        let result = gpo(&model, &source, &targets, &cfg).unwrap();

        assert_eq!(result.labeling_prompts.len(), 2);
        assert!(result.labeling_prompts.iter().all(|c| c.val_score.is_none()));
        // All prompts behave identically, so agreement is 1.0 everywhere.
        assert_eq!(result.labeled.accepted.len(), 6);
        assert!(result.labeled.rejected.is_empty());
        assert!((result.labeled.acceptance_rate() - 1.0).abs() < 1e-12);
        for decision in &result.labeled.accepted {
            let expected = if decision.example.input.contains("bad") {
                "negative"
            } else {
                "positive"
            };
            assert_eq!(decision.example.output.as_deref(), Some(expected));
        }
        // Joint candidates are evaluated, and the scripted answers are always
        // right, so both score 1.0 and the tie goes to split 0.
        assert_eq!(result.candidates.len(), 2);
        assert!(result
            .candidates
            .iter()
            .all(|c| (c.val_score.unwrap() - 1.0).abs() < 1e-12));
        assert_eq!(result.best_prompt().split_index, 0);

        // Call accounting: K + K*T + K + K*2N.
        assert_eq!(result.stage_calls.labeling_generation, 2);
        assert_eq!(result.stage_calls.labeling, 2 * 6);
        assert_eq!(result.stage_calls.joint_generation, 2);
        assert_eq!(result.stage_calls.joint_evaluation, 2 * 8);
        assert_eq!(result.stage_calls.total(), model.calls());
    }

    #[test]
    fn pipeline_is_deterministic() {
        let source = source_group(16);
        let tgts = targets(6);
        let mut cfg = config(4, 2, 0.5, 42);
        cfg.target_sample_size = Some(4);
        let a = gpo(&TestModel::new(vec![]), &source, &tgts, &cfg).unwrap();
        let b = gpo(&TestModel::new(vec![]), &source, &tgts, &cfg).unwrap();
        assert_eq!(a.labeled, b.labeled);
        assert_eq!(a.top1, b.top1);
        assert_eq!(a.stage_calls, b.stage_calls);
        assert_eq!(
            a.candidates.iter().map(|c| &c.text).collect::<Vec<_>>(),
            b.candidates.iter().map(|c| &c.text).collect::<Vec<_>>()
        );
    }

    #[test]
    fn threshold_filters_disagreements() {
        // Instruction v0 always says "positive": on "bad" targets the two
        // prompts split 1-1, agreement 0.5.
        let model = TestModel::new(vec![0]);
        let source = source_group(16);
        let targets = targets(6); // 3 good, 3 bad
        let mut cfg = config(4, 2, 0.83, 7);
        cfg.target_sample_size = Some(6);
        let result = gpo(&model, &source, &targets, &cfg).unwrap();
        // Good targets: both prompts agree on "positive" -> accepted.
        assert_eq!(result.labeled.accepted.len(), 3);
        // Bad targets: 0.5 agreement is not > 0.83 -> rejected.
        assert_eq!(result.labeled.rejected.len(), 3);
        for decision in &result.labeled.rejected {
            assert!(decision.example.input.contains("bad"));
            assert!((decision.agreement - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn dropping_consistency_accepts_ties() {
        let model = TestModel::new(vec![0]);
        let source = source_group(16);
        let targets = targets(6);
        let mut cfg = config(4, 2, 0.83, 7);
        cfg.target_sample_size = Some(6);
        cfg.ablation = Ablation::NoConsistency;
        assert_eq!(cfg.effective_threshold(), 0.0);
        let result = gpo(&model, &source, &targets, &cfg).unwrap();
        // Ties (agreement 0.5 > 0) now pass the filter.
        assert_eq!(result.labeled.accepted.len(), 6);
        // The tie-break picks the earliest voter, the always-positive v0, so
        // bad targets get mislabeled "positive".
        let wrong: Vec<_> = result
            .labeled
            .accepted
            .iter()
            .filter(|d| d.example.input.contains("bad"))
            .collect();
        assert_eq!(wrong.len(), 3);
        assert!(wrong.iter().all(|d| d.example.output.as_deref() == Some("positive")));
    }

    #[test]
    fn no_target_train_keeps_generation_demos_source_only() {
        let model = TestModel::new(vec![]);
        let source = source_group(16);
        let targets = targets(6);
        let mut cfg = config(4, 2, 0.83, 7);
        cfg.target_sample_size = Some(6);
        cfg.ablation = Ablation::NoConsistencyNoTargetTrain;
        let result = gpo(&model, &source, &targets, &cfg).unwrap();
        assert_eq!(result.candidates.len(), 2);
        // Meta prompts for the joint round must not mention target text.
        let joint_meta: Vec<String> = model
            .prompts()
            .into_iter()
            .filter(|p| p.contains("The instruction is to"))
            .skip(2) // the two labeling-prompt generations
            .collect();
        assert_eq!(joint_meta.len(), 2);
        for prompt in &joint_meta {
            assert!(!prompt.contains("target text"), "target leaked into generation demos");
            assert!(prompt.contains("src text"));
        }
        // With 4 source demos and K=2, each joint meta prompt saw 2 demos.
        for candidate in &result.candidates {
            assert_eq!(candidate.demo_ids.len(), 2);
            assert!(candidate.demo_ids.iter().all(|id| id.starts_with("src:")));
        }
    }

    #[test]
    fn mixed_generation_demos_include_upsampled_targets() {
        let model = TestModel::new(vec![]);
        let source = source_group(16);
        let targets = targets(2);
        let mut cfg = config(4, 2, 0.83, 7);
        cfg.target_sample_size = Some(2);
        let result = gpo(&model, &source, &targets, &cfg).unwrap();
        // Demo pool is 4 source + 2 targets upsampled to 4 = 8, split 2 ways.
        let all_demo_ids: Vec<&String> = result
            .candidates
            .iter()
            .flat_map(|c| c.demo_ids.iter())
            .collect();
        assert_eq!(all_demo_ids.len(), 8);
        let target_demos = all_demo_ids.iter().filter(|id| id.starts_with("tgt:")).count();
        assert_eq!(target_demos, 4);
    }

    #[test]
    fn rejecting_everything_is_an_error() {
        let model = TestModel::new(vec![]);
        let source = source_group(16);
        let targets = targets(4);
        let mut cfg = config(4, 2, 1.0, 7); // agreement can never exceed 1.0
        cfg.target_sample_size = Some(4);
        assert!(matches!(
            gpo(&model, &source, &targets, &cfg),
            Err(Error::AllRejected)
        ));
    }

    #[test]
    fn labeled_targets_are_rejected_as_input() {
        let model = TestModel::new(vec![]);
        let instructions = vec!["decide sentiment v0".to_string()];
        let labeled_input = vec![Example::labeled("t", "text", "positive")];
        assert!(matches!(
            ensemble_label(&model, &instructions, &labeled_input, None, 0.5, GenParams::default()),
            Err(Error::LabeledTarget { .. })
        ));
    }

    #[test]
    fn labeling_accuracy_compares_by_id() {
        let labeled = LabeledTargetSet {
            threshold: 0.83,
            accepted: vec![
                LabelingDecision {
                    example: Example::labeled("t:0", "x", "positive"),
                    agreement: 1.0,
                    answer: Some("positive".to_string()),
                },
                LabelingDecision {
                    example: Example::labeled("t:1", "y", "positive"),
                    agreement: 1.0,
                    answer: Some("positive".to_string()),
                },
            ],
            rejected: vec![],
        };
        let gold = BTreeMap::from([
            ("t:0".to_string(), "positive".to_string()),
            ("t:1".to_string(), "negative".to_string()),
        ]);
        let acc = labeling_accuracy(&labeled, &gold, MetricKind::Accuracy).unwrap();
        assert!((acc - 0.5).abs() < 1e-12);

        let missing = BTreeMap::from([("t:0".to_string(), "positive".to_string())]);
        assert!(matches!(
            labeling_accuracy(&labeled, &missing, MetricKind::Accuracy),
            Err(Error::GoldMismatch { .. })
        ));
    }

    #[test]
    fn config_rejects_out_of_range_thresholds() {
        let opt = OptimizerConfig::new(4, 2, MetricKind::Accuracy).unwrap();
        assert!(GpoConfig::new(opt.clone(), 1.5, 0).is_err());
        assert!(GpoConfig::new(opt.clone(), -0.1, 0).is_err());
        assert!(GpoConfig::new(opt, 0.83, 0).is_ok());
    }

    #[test]
    fn default_thresholds_by_metric() {
        assert_eq!(default_threshold(MetricKind::Accuracy), 0.83);
        assert_eq!(default_threshold(MetricKind::TokenF1), 0.33);
    }
}
