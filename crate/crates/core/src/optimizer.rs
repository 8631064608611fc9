//! Prompt search: generate candidate instructions from demonstrations,
//! score them on validation data, keep the best.
//!
//! Candidate instructions come from a meta prompt that shows the model K
//! disjoint slices of the demonstration set and asks it to describe the
//! underlying instruction. Prompt selection is plain argmax over validation
//! scores. An ensemble of candidates can also vote on a single input, which
//! is what drives pseudo-labeling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::{complete_text, fill_template, Backend, GenParams};
use crate::data::{Example, MetricKind};
use crate::error::{Error, Result};
use crate::task_metrics::{match_label, normalize_answer, score};

/// Meta prompt asking for an instruction given labeled demonstrations.
/// `[DEMO]` receives the rendered input/output blocks.
pub const META_PROMPT_DEMOS: &str = "I provide my friend with an instruction. Based on the instruction, I gave him several inputs, and he generated the corresponding outputs. Here are the input-output examples:[DEMO]. Please briefly illustrate the instruction and describe the output format. The instruction is to";

/// Meta prompt that additionally shows unlabeled inputs from the deployment
/// distribution. `[Source]` receives the labeled blocks, `[Unlabeled Target]`
/// the unlabeled ones.
pub const META_PROMPT_DEMOS_PLUS_UNLABELED: &str = "I provide my friend with an instruction. Based on the instruction, I gave him several inputs, and he generated the corresponding outputs. Here are the input-output examples:[Source]. Here are also some unlabeled examples. Please consider these examples as well for prompt generation:[Unlabeled Target].Please briefly illustrate the instruction and describe the output format. The instruction is to ";

/// Which placeholders a meta prompt template must provide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// Labeled demonstrations only (`[DEMO]`).
    Demos,
    /// Labeled demonstrations plus unlabeled inputs
    /// (`[Source]` + `[Unlabeled Target]`).
    DemosPlusUnlabeled,
}

/// A validated meta prompt template.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetaPromptTemplate {
    pub kind: TemplateKind,
    pub text: String,
}

impl MetaPromptTemplate {
    /// The standard demonstrations-only template.
    pub fn demos() -> Self {
        MetaPromptTemplate {
            kind: TemplateKind::Demos,
            text: META_PROMPT_DEMOS.to_string(),
        }
    }

    /// The standard demonstrations-plus-unlabeled template.
    pub fn demos_plus_unlabeled() -> Self {
        MetaPromptTemplate {
            kind: TemplateKind::DemosPlusUnlabeled,
            text: META_PROMPT_DEMOS_PLUS_UNLABELED.to_string(),
        }
    }

    /// A custom template; its text must contain the placeholders its kind needs.
    pub fn custom(kind: TemplateKind, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let required: &[&str] = match kind {
            TemplateKind::Demos => &["[DEMO]"],
            TemplateKind::DemosPlusUnlabeled => &["[Source]", "[Unlabeled Target]"],
        };
        if let Some(missing) = required.iter().find(|p| !text.contains(**p)) {
            return Err(Error::TemplateShape {
                kind: match kind {
                    TemplateKind::Demos => "demos",
                    TemplateKind::DemosPlusUnlabeled => "demos-plus-unlabeled",
                },
                placeholders: vec![missing],
            });
        }
        Ok(MetaPromptTemplate { kind, text })
    }

    /// Fill the template with rendered demo (and, if needed, unlabeled) blocks.
    pub fn render(&self, demo_block: &str, unlabeled_block: Option<&str>) -> Result<String> {
        match self.kind {
            TemplateKind::Demos => {
                fill_template(&self.text, &BTreeMap::from([("DEMO", demo_block)]))
            }
            TemplateKind::DemosPlusUnlabeled => {
                let unlabeled = unlabeled_block.ok_or(Error::TemplateShape {
                    kind: "demos-plus-unlabeled",
                    placeholders: vec!["[Unlabeled Target]"],
                })?;
                fill_template(
                    &self.text,
                    &BTreeMap::from([("Source", demo_block), ("Unlabeled Target", unlabeled)]),
                )
            }
        }
    }
}

/// Render labeled examples as `Input:`/`Output:` blocks separated by blank lines.
pub fn format_demos(examples: &[Example]) -> Result<String> {
    let mut blocks = Vec::with_capacity(examples.len());
    for ex in examples {
        let output = ex.require_output()?;
        blocks.push(format!("Input: {}\nOutput: {}", ex.input, output));
    }
    Ok(blocks.join("\n\n"))
}

/// Render unlabeled examples as `Input:` blocks separated by blank lines.
pub fn format_unlabeled(examples: &[Example]) -> String {
    examples
        .iter()
        .map(|ex| format!("Input: {}", ex.input))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// The prompt actually sent for one input: instruction, blank line, input.
pub fn compose_prompt(instruction: &str, input: &str) -> String {
    format!("{instruction}\n\n{input}")
}

/// A generated candidate instruction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptCandidate {
    pub text: String,
    /// Which contiguous demo slice produced it (0-based).
    pub split_index: usize,
    /// Ids of the demos shown in its meta prompt.
    pub demo_ids: Vec<String>,
    /// Mean validation score, once evaluated.
    pub val_score: Option<f64>,
}

/// Shared knobs for one optimization round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Total demonstrations shown across all meta prompts.
    pub n_shot: usize,
    /// Number of candidate prompts (must divide `n_shot`).
    pub k_prompts: usize,
    pub metric: MetricKind,
    /// Sampling for meta-prompt candidate generation.
    pub gen_params: GenParams,
    /// Sampling for downstream inference (labeling, evaluation).
    pub infer_params: GenParams,
}

impl OptimizerConfig {
    pub fn new(n_shot: usize, k_prompts: usize, metric: MetricKind) -> Result<Self> {
        let config = OptimizerConfig {
            n_shot,
            k_prompts,
            metric,
            gen_params: GenParams::default(),
            infer_params: GenParams::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_prompts == 0 {
            return Err(Error::InvalidConfig {
                message: "k_prompts must be at least 1".to_string(),
            });
        }
        if self.n_shot == 0 {
            return Err(Error::InvalidConfig {
                message: "n_shot must be at least 1".to_string(),
            });
        }
        if self.n_shot % self.k_prompts != 0 {
            return Err(Error::InvalidConfig {
                message: format!(
                    "k_prompts ({}) must divide n_shot ({})",
                    self.k_prompts, self.n_shot
                ),
            });
        }
        Ok(())
    }
}

/// Generate candidates from K contiguous slices of `demos`.
///
/// Each slice of `demos.len() / k` examples becomes one meta prompt; the
/// model's completion (trimmed) is the candidate instruction. With a
/// demos-plus-unlabeled template, every slice sees the *full* `unlabeled`
/// block. Empty completions are rejected rather than silently carried along.
pub fn generate_candidates(
    backend: &dyn Backend,
    template: &MetaPromptTemplate,
    demos: &[Example],
    k: usize,
    unlabeled: Option<&[Example]>,
    gen_params: GenParams,
) -> Result<Vec<PromptCandidate>> {
    if k == 0 || demos.is_empty() || demos.len() % k != 0 {
        return Err(Error::InvalidConfig {
            message: format!("{} demos cannot be split into {k} equal slices", demos.len()),
        });
    }
    let unlabeled_block = unlabeled.map(format_unlabeled);
    let chunk = demos.len() / k;
    let mut candidates = Vec::with_capacity(k);
    for split_index in 0..k {
        let slice = &demos[split_index * chunk..(split_index + 1) * chunk];
        let demo_block = format_demos(slice)?;
        let meta_prompt = template.render(&demo_block, unlabeled_block.as_deref())?;
        let completion =
            complete_text(backend, &meta_prompt, gen_params).map_err(|e| Error::CandidateGeneration {
                split: split_index,
                source: Box::new(e),
            })?;
        if completion.is_empty() {
            return Err(Error::DegenerateCandidate { split: split_index });
        }
        candidates.push(PromptCandidate {
            text: completion,
            split_index,
            demo_ids: slice.iter().map(|e| e.id.clone()).collect(),
            val_score: None,
        });
    }
    Ok(candidates)
}

/// One model prediction for one input, mapped to scoring form.
///
/// Classification (a label space is given): the completion is matched onto
/// the label space; no match means an empty prediction, which scores zero.
/// Generation: the raw completion is used as-is.
pub fn predict_one(
    backend: &dyn Backend,
    instruction: &str,
    input: &str,
    label_space: Option<&[String]>,
    params: GenParams,
) -> Result<String> {
    let completion = complete_text(backend, &compose_prompt(instruction, input), params)?;
    Ok(match label_space {
        Some(space) => match_label(&completion, space).unwrap_or_default(),
        None => completion,
    })
}

/// Mean metric score of one instruction over a validation set.
pub fn evaluate_prompt(
    backend: &dyn Backend,
    instruction: &str,
    validation: &[Example],
    metric: MetricKind,
    label_space: Option<&[String]>,
    params: GenParams,
) -> Result<f64> {
    if instruction.is_empty() {
        return Err(Error::EmptyPrompt);
    }
    if validation.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let mut predictions = Vec::with_capacity(validation.len());
    let mut golds = Vec::with_capacity(validation.len());
    for ex in validation {
        let gold = ex.require_output()?;
        let pred = predict_one(backend, instruction, &ex.input, label_space, params).map_err(|e| {
            Error::Evaluation {
                context: ex.id.clone(),
                source: Box::new(e),
            }
        })?;
        predictions.push(pred);
        golds.push(gold.to_string());
    }
    score(metric, &predictions, &golds)
}

/// Evaluate every candidate in place (filling `val_score`).
pub fn evaluate_candidates(
    backend: &dyn Backend,
    candidates: &mut [PromptCandidate],
    validation: &[Example],
    metric: MetricKind,
    label_space: Option<&[String]>,
    params: GenParams,
) -> Result<()> {
    for candidate in candidates.iter_mut() {
        candidate.val_score = Some(evaluate_prompt(
            backend,
            &candidate.text,
            validation,
            metric,
            label_space,
            params,
        )?);
    }
    Ok(())
}

/// Index of the best evaluated candidate: highest validation score, ties
/// broken by lowest split index.
pub fn select_top1(candidates: &[PromptCandidate]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let mut best: Option<(usize, f64, usize)> = None; // (index, score, split)
    for (idx, candidate) in candidates.iter().enumerate() {
        let score = candidate.val_score.ok_or(Error::UnevaluatedCandidate {
            split: candidate.split_index,
        })?;
        let better = match best {
            None => true,
            Some((_, best_score, best_split)) => {
                score > best_score || (score == best_score && candidate.split_index < best_split)
            }
        };
        if better {
            best = Some((idx, score, candidate.split_index));
        }
    }
    Ok(best.expect("non-empty candidates").0)
}

/// Outcome of one prompt-ensemble vote on a single input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    /// Plurality answer; `None` when the winning vote group is "no usable
    /// answer" (unmatched classification output or empty generation).
    pub answer: Option<String>,
    /// Fraction of prompts in the winning vote group.
    pub agreement: f64,
    /// Each prompt's individual (normalized) vote, in prompt order.
    pub votes: Vec<Option<String>>,
}

/// Let every instruction answer the input, then take the plurality vote.
///
/// Votes are canonicalized first: classification completions are mapped onto
/// the label space (unmatched → `None`), generation completions are
/// normalized (empty → `None`). `None` is a real vote group — if most
/// prompts produce nothing usable, the ensemble's answer is `None` with the
/// corresponding agreement. Ties go to the group whose earliest voter comes
/// first in prompt order.
pub fn ensemble_predict(
    backend: &dyn Backend,
    instructions: &[String],
    input: &str,
    label_space: Option<&[String]>,
    params: GenParams,
) -> Result<EnsemblePrediction> {
    if instructions.is_empty() {
        return Err(Error::NoCandidates);
    }
    let mut votes = Vec::with_capacity(instructions.len());
    for instruction in instructions {
        let completion = complete_text(backend, &compose_prompt(instruction, input), params)?;
        let vote = match label_space {
            Some(space) => match_label(&completion, space),
            None => {
                let normalized = normalize_answer(&completion);
                (!normalized.is_empty()).then_some(normalized)
            }
        };
        votes.push(vote);
    }
    Ok(tally_votes(&votes))
}

/// Plurality vote with earliest-voter tie-breaking (see [`ensemble_predict`]).
pub fn tally_votes(votes: &[Option<String>]) -> EnsemblePrediction {
    let mut groups: BTreeMap<&Option<String>, (usize, usize)> = BTreeMap::new(); // vote -> (count, first index)
    for (idx, vote) in votes.iter().enumerate() {
        let entry = groups.entry(vote).or_insert((0, idx));
        entry.0 += 1;
    }
    let (winner, (count, _)) = groups
        .into_iter()
        .max_by(|(_, (ca, fa)), (_, (cb, fb))| ca.cmp(cb).then(fb.cmp(fa)))
        .expect("votes is non-empty");
    EnsemblePrediction {
        answer: winner.clone(),
        agreement: count as f64 / votes.len() as f64,
        votes: votes.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::Matcher;
    use crate::backend::{ScriptRule, ScriptedBackend};

    fn rule(needle: &str, response: &str) -> ScriptRule {
        ScriptRule {
            matcher: Matcher {
                prompt_contains: Some(vec![needle.to_string()]),
                digest: None,
            },
            response: response.to_string(),
        }
    }

    fn demos(n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| Example::labeled(format!("d:{i}"), format!("demo input {i}"), "yes"))
            .collect()
    }

    #[test]
    fn default_templates_have_expected_shape() {
        let demos_t = MetaPromptTemplate::demos();
        assert!(demos_t.text.contains("[DEMO]"));
        assert!(demos_t.text.starts_with("I provide my friend with an instruction."));
        assert!(demos_t.text.ends_with("The instruction is to"));

        let plus = MetaPromptTemplate::demos_plus_unlabeled();
        assert!(plus.text.contains("[Source]"));
        assert!(plus.text.contains("[Unlabeled Target]"));
        assert!(plus.text.contains("Please consider these examples as well for prompt generation"));
        assert!(plus.text.ends_with("The instruction is to "));
    }

    #[test]
    fn custom_template_validates_placeholders() {
        assert!(MetaPromptTemplate::custom(TemplateKind::Demos, "no placeholder").is_err());
        assert!(MetaPromptTemplate::custom(TemplateKind::Demos, "with [DEMO] here").is_ok());
        assert!(
            MetaPromptTemplate::custom(TemplateKind::DemosPlusUnlabeled, "[Source] only").is_err()
        );
        assert!(MetaPromptTemplate::custom(
            TemplateKind::DemosPlusUnlabeled,
            "[Source] and [Unlabeled Target]"
        )
        .is_ok());
    }

    #[test]
    fn demo_blocks_render_with_blank_line_separators() {
        let examples = vec![
            Example::labeled("a", "first text", "yes"),
            Example::labeled("b", "second text", "no"),
        ];
        assert_eq!(
            format_demos(&examples).unwrap(),
            "Input: first text\nOutput: yes\n\nInput: second text\nOutput: no"
        );
        assert_eq!(
            format_unlabeled(&examples),
            "Input: first text\n\nInput: second text"
        );
    }

    #[test]
    fn format_demos_requires_labels() {
        let examples = vec![Example::unlabeled("u", "no label")];
        assert!(matches!(
            format_demos(&examples),
            Err(Error::UnlabeledExample { .. })
        ));
    }

    #[test]
    fn composed_prompt_separates_instruction_and_input_with_blank_line() {
        assert_eq!(
            compose_prompt("classify the review", "great food"),
            "classify the review\n\ngreat food"
        );
    }

    #[test]
    fn render_fills_demo_slot() {
        let t = MetaPromptTemplate::demos();
        let rendered = t.render("Input: x\nOutput: y", None).unwrap();
        assert!(rendered.contains("examples:Input: x\nOutput: y. Please briefly"));

        let t = MetaPromptTemplate::demos_plus_unlabeled();
        let rendered = t.render("LAB", Some("UNLAB")).unwrap();
        assert!(rendered.contains("examples:LAB."));
        assert!(rendered.contains("prompt generation:UNLAB.Please briefly"));
        // The unlabeled block is mandatory for this template kind.
        assert!(t.render("LAB", None).is_err());
    }

    #[test]
    fn candidates_come_from_contiguous_slices() {
        let backend = ScriptedBackend::new(
            "m",
            vec![
                rule("demo input 0", "first instruction"),
                rule("demo input 2", "second instruction"),
                rule("demo input 4", "third instruction"),
            ],
            None,
        );
        let demos = demos(6);
        let template = MetaPromptTemplate::demos();
        let candidates =
            generate_candidates(&backend, &template, &demos, 3, None, GenParams::default())
                .unwrap();
        assert_eq!(candidates.len(), 3);
        assert_eq!(candidates[0].text, "first instruction");
        assert_eq!(candidates[0].demo_ids, vec!["d:0", "d:1"]);
        assert_eq!(candidates[1].demo_ids, vec!["d:2", "d:3"]);
        assert_eq!(candidates[2].demo_ids, vec!["d:4", "d:5"]);
        assert_eq!(candidates[2].split_index, 2);
        // Each meta prompt contained only its own slice.
        let log = backend.request_log();
        assert!(!log[0].prompt.contains("demo input 2"));
        assert!(!log[1].prompt.contains("demo input 0"));
    }

    #[test]
    fn unlabeled_block_goes_to_every_split() {
        let backend = ScriptedBackend::new("m", vec![], Some("inst".to_string()));
        let demos = demos(4);
        let unlabeled = vec![
            Example::unlabeled("u:0", "target text zero"),
            Example::unlabeled("u:1", "target text one"),
        ];
        let template = MetaPromptTemplate::demos_plus_unlabeled();
        generate_candidates(&backend, &template, &demos, 2, Some(&unlabeled), GenParams::default())
            .unwrap();
        for req in backend.request_log() {
            assert!(req.prompt.contains("target text zero"));
            assert!(req.prompt.contains("target text one"));
        }
    }

    #[test]
    fn generation_rejects_bad_split_counts_and_empty_completions() {
        let backend = ScriptedBackend::new("m", vec![], Some("inst".to_string()));
        let template = MetaPromptTemplate::demos();
        let d = demos(6);
        assert!(matches!(
            generate_candidates(&backend, &template, &d, 4, None, GenParams::default()),
            Err(Error::InvalidConfig { .. })
        ));
        let empty_backend = ScriptedBackend::new("m", vec![], Some("   ".to_string()));
        assert!(matches!(
            generate_candidates(&empty_backend, &template, &d, 3, None, GenParams::default()),
            Err(Error::DegenerateCandidate { split: 0 })
        ));
    }

    #[test]
    fn config_requires_k_dividing_n() {
        assert!(OptimizerConfig::new(36, 6, MetricKind::Accuracy).is_ok());
        assert!(OptimizerConfig::new(9, 9, MetricKind::Accuracy).is_ok());
        assert!(matches!(
            OptimizerConfig::new(10, 4, MetricKind::Accuracy),
            Err(Error::InvalidConfig { .. })
        ));
        assert!(OptimizerConfig::new(10, 0, MetricKind::Accuracy).is_err());
    }

    #[test]
    fn evaluation_scores_classification_through_label_matching() {
        let backend = ScriptedBackend::new(
            "m",
            vec![
                rule("good movie", "It is positive."),
                rule("bad movie", "Clearly negative sentiment"),
                rule("odd movie", "no idea"),
            ],
            None,
        );
        let validation = vec![
            Example::labeled("v:0", "good movie", "positive"),
            Example::labeled("v:1", "bad movie", "negative"),
            Example::labeled("v:2", "odd movie", "positive"),
        ];
        let space = vec!["positive".to_string(), "negative".to_string()];
        let acc = evaluate_prompt(
            &backend,
            "classify",
            &validation,
            MetricKind::Accuracy,
            Some(&space),
            GenParams::default(),
        )
        .unwrap();
        // Two matched correctly, one unmatched -> 2/3.
        assert!((acc - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn evaluation_rejects_empty_inputs() {
        let backend = ScriptedBackend::new("m", vec![], Some("x".to_string()));
        assert!(matches!(
            evaluate_prompt(&backend, "inst", &[], MetricKind::Accuracy, None, GenParams::default()),
            Err(Error::EmptyValidation)
        ));
        let validation = vec![Example::labeled("v", "text", "gold")];
        assert!(matches!(
            evaluate_prompt(&backend, "", &validation, MetricKind::Accuracy, None, GenParams::default()),
            Err(Error::EmptyPrompt)
        ));
    }

    #[test]
    fn top1_takes_argmax_with_lowest_split_on_ties() {
        let mk = |split: usize, score: f64| PromptCandidate {
            text: format!("inst {split}"),
            split_index: split,
            demo_ids: vec![],
            val_score: Some(score),
        };
        let candidates = vec![mk(0, 0.5), mk(1, 0.9), mk(2, 0.9), mk(3, 0.2)];
        assert_eq!(select_top1(&candidates).unwrap(), 1);
        let candidates = vec![mk(2, 0.4), mk(0, 0.4), mk(1, 0.4)];
        // All tied: split 0 wins even though it is not first in the list.
        assert_eq!(select_top1(&candidates).unwrap(), 1);
        let unevaluated = vec![PromptCandidate {
            text: "x".into(),
            split_index: 0,
            demo_ids: vec![],
            val_score: None,
        }];
        assert!(matches!(
            select_top1(&unevaluated),
            Err(Error::UnevaluatedCandidate { .. })
        ));
        assert!(matches!(select_top1(&[]), Err(Error::NoCandidates)));
    }

    #[test]
    fn vote_tally_takes_plurality_with_agreement() {
        let votes: Vec<Option<String>> = ["A", "A", "A", "A", "A", "B"]
            .iter()
            .map(|s| Some(s.to_string()))
            .collect();
        let out = tally_votes(&votes);
        assert_eq!(out.answer.as_deref(), Some("A"));
        assert!((out.agreement - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn vote_ties_go_to_earliest_voter() {
        let votes: Vec<Option<String>> = ["A", "B", "B", "A"]
            .iter()
            .map(|s| Some(s.to_string()))
            .collect();
        let out = tally_votes(&votes);
        assert_eq!(out.answer.as_deref(), Some("A"));
        assert!((out.agreement - 0.5).abs() < 1e-12);
        // Same groups, opposite order of first appearance.
        let votes: Vec<Option<String>> = ["B", "A", "A", "B"]
            .iter()
            .map(|s| Some(s.to_string()))
            .collect();
        assert_eq!(tally_votes(&votes).answer.as_deref(), Some("B"));
    }

    #[test]
    fn missing_votes_form_a_real_group() {
        let votes = vec![None, None, Some("A".to_string())];
        let out = tally_votes(&votes);
        assert_eq!(out.answer, None);
        assert!((out.agreement - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ensemble_votes_through_label_matching() {
        let backend = ScriptedBackend::new(
            "m",
            vec![
                rule("first instruction", "positive"),
                rule("second instruction", "The answer: positive!"),
                rule("third instruction", "negative"),
                rule("fourth instruction", "cannot tell"),
            ],
            None,
        );
        let instructions: Vec<String> = [
            "first instruction",
            "second instruction",
            "third instruction",
            "fourth instruction",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let space = vec!["positive".to_string(), "negative".to_string()];
        let out = ensemble_predict(
            &backend,
            &instructions,
            "the input",
            Some(&space),
            GenParams::default(),
        )
        .unwrap();
        assert_eq!(out.answer.as_deref(), Some("positive"));
        assert!((out.agreement - 0.5).abs() < 1e-12);
        assert_eq!(
            out.votes,
            vec![
                Some("positive".to_string()),
                Some("positive".to_string()),
                Some("negative".to_string()),
                None,
            ]
        );
    }

    #[test]
    fn generation_votes_normalize_and_blank_is_none() {
        let backend = ScriptedBackend::new(
            "m",
            vec![
                rule("inst one", "The 10 yards!"),
                rule("inst two", "10 yards"),
                rule("inst three", "   "),
            ],
            None,
        );
        let instructions: Vec<String> =
            ["inst one", "inst two", "inst three"].iter().map(|s| s.to_string()).collect();
        let out =
            ensemble_predict(&backend, &instructions, "q", None, GenParams::default()).unwrap();
        assert_eq!(out.answer.as_deref(), Some("10 yards"));
        assert!((out.agreement - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(out.votes[2], None);
    }
}
