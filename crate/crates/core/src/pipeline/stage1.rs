use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::generate::strategies_for;
use super::{
    compose_sentence, compute_multiplier, correct_candidates, correction_line, generate_candidates, parse_statement,
    polish_sentence, AnalogyCandidate, AnalogySentence, Calculation, DataStatement, PipelineError, StageError,
    StatementKind, Warnings,
};
use crate::designspace::{select_fewshot, AnalogyCase, AnalogyStrategy};
use crate::genai::{DecodingParams, PromptSet, TextGenProvider};
use crate::lexicon::{head_lemma, Lexicon};
use crate::scoring::{rank_candidates, rerank, PerceptibilityRules, RankInput, ScoredCandidate, ScoringError, WeightConfig};
use crate::units::UnitRegistry;

pub const STAGE1_SCHEMA: &str = "analogist.stage1/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub fewshot_k: usize,
    pub fewshot_seed: u64,
    pub fewshot_topic: Option<String>,
    pub candidates_per_strategy: usize,
    pub parse_retries: u32,
    /// Ask the provider for unit and subject before falling back to patterns.
    pub assist_parse: bool,
    pub decoding: DecodingParams,
    pub rules: PerceptibilityRules,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            fewshot_k: 3,
            fewshot_seed: 7,
            fewshot_topic: None,
            candidates_per_strategy: 5,
            parse_retries: 1,
            assist_parse: false,
            decoding: DecodingParams::default(),
            rules: PerceptibilityRules::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Request {
    pub statement: String,
    #[serde(default)]
    pub kind: StatementKind,
    /// `None` leaves the statement unclassified.
    #[serde(default)]
    pub strategy: Option<AnalogyStrategy>,
    #[serde(default)]
    pub weights: WeightConfig,
    #[serde(default)]
    pub theme_hint: String,
}

pub struct Stage1Context<'a> {
    pub text: &'a dyn TextGenProvider,
    pub lexicon: &'a Lexicon,
    pub registry: &'a UnitRegistry,
    pub prompts: &'a PromptSet,
    pub corpus: &'a [AnalogyCase],
    pub options: &'a PipelineOptions,
}

/// Everything known about one ranked analogy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analogy {
    pub candidate: AnalogyCandidate,
    pub calculation: Calculation,
    pub sentence: AnalogySentence,
    pub trace: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Report {
    pub schema: String,
    pub statement: DataStatement,
    pub strategy: Option<AnalogyStrategy>,
    pub strategies: Vec<AnalogyStrategy>,
    pub weights: WeightConfig,
    pub statement_lemma: String,
    pub themes: BTreeMap<AnalogyStrategy, String>,
    pub analogies: Vec<ScoredCandidate<Analogy>>,
    pub warnings: Warnings,
}

impl Stage1Report {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    /// Re-orders analogies under new weights without touching generation output.
    pub fn rerank(&mut self, weights: &WeightConfig) -> Result<(), ScoringError> {
        rerank(&mut self.analogies, weights)?;
        self.weights = *weights;
        Ok(())
    }

    pub fn find(&self, id: &str) -> Option<&ScoredCandidate<Analogy>> {
        self.analogies.iter().find(|a| a.candidate.candidate.id == id)
    }
}

fn lemma_of(phrase: &str) -> String {
    head_lemma(phrase).unwrap_or_else(|_| phrase.trim().to_lowercase())
}

/// Stage 1: parse → generate → correct → calculate → rank → compose → polish.
/// The first hard failure aborts with the stage that raised it.
pub fn run_stage1(request: &Stage1Request, ctx: &Stage1Context<'_>) -> Result<Stage1Report, StageError> {
    let opts = ctx.options;
    let mut warnings = Warnings::default();

    let assist = opts.assist_parse.then_some((ctx.text, ctx.prompts, &opts.decoding));
    let mut statement = parse_statement(&request.statement, request.kind, ctx.registry, assist, &mut warnings)
        .map_err(|e| e.at("stage1.parse"))?;
    statement.theme_hint = request.theme_hint.clone();
    request.weights.validate().map_err(|e| PipelineError::from(e).at("stage1.parse"))?;

    let strategies = strategies_for(statement.kind, request.strategy).map_err(|e| e.at("stage1.generate"))?;
    let fewshot: Vec<AnalogyCase> = strategies
        .iter()
        .flat_map(|s| select_fewshot(ctx.corpus, *s, opts.fewshot_k, opts.fewshot_seed, opts.fewshot_topic.as_deref()))
        .collect();
    let generated = generate_candidates(
        &statement,
        request.strategy,
        &fewshot,
        ctx.text,
        ctx.prompts,
        ctx.registry,
        &opts.decoding,
        opts.candidates_per_strategy,
        &mut warnings,
    )
    .map_err(|e| e.at("stage1.generate"))?;

    let mut traces: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for c in &generated.candidates {
        traces.entry(c.id.clone()).or_default().push(format!(
            "stage1.generate: {} ({}, {}{})",
            correction_line(c),
            c.strategy,
            c.quantity_kind,
            if c.measurement_transformed { ", transformed" } else { "" }
        ));
    }

    let corrected = correct_candidates(
        generated.candidates,
        ctx.text,
        ctx.prompts,
        &opts.decoding,
        ctx.registry,
        opts.parse_retries,
        &mut warnings,
    )
    .map_err(|e| e.at("stage1.correct"))?;
    for c in &corrected {
        let trace = traces.entry(c.id.clone()).or_default();
        for r in c.history.iter().filter(|r| r.step.starts_with("correct")) {
            trace.push(format!("stage1.correct: {} {} -> {}", r.field, r.from, r.to));
        }
    }

    let mut inputs = Vec::new();
    let mut first_error = None;
    for c in corrected {
        match compute_multiplier(&statement, &c, ctx.registry) {
            Ok(calc) => {
                traces.entry(c.id.clone()).or_default().push(format!("stage1.calculate: {}", calc.formula));
                let lemma = lemma_of(&c.object);
                let strategy = c.strategy;
                let (multiplier, check) = (calc.multiplier, calc.check_value);
                let mut input = RankInput::new((c, calc), lemma, strategy, multiplier);
                input.check_value = check;
                inputs.push(input);
            }
            Err(e) => {
                warnings.push(format!("{} dropped: {e}", c.id));
                first_error.get_or_insert(e);
            }
        }
    }
    if inputs.is_empty() {
        let e = first_error.unwrap_or_else(|| PipelineError::Generation("no candidates left".into()));
        return Err(e.at("stage1.calculate"));
    }

    let statement_lemma = lemma_of(&statement.subject);
    let ranked = rank_candidates(&statement_lemma, inputs, &request.weights, ctx.lexicon, &opts.rules)
        .map_err(|e| PipelineError::from(e).at("stage1.rank"))?;

    let mut analogies = Vec::with_capacity(ranked.len());
    for scored in ranked {
        let (candidate, calculation) = scored.candidate;
        let mut trace = traces.remove(&candidate.id).unwrap_or_default();
        let flags = scored.factors.flags();
        trace.push(format!(
            "stage1.rank: perceptibility {}{}",
            if scored.perceptibility.passed() { "pass" } else { "fail" },
            if flags.is_empty() { String::new() } else { format!("; missing {}", flags.join(", ")) }
        ));
        let mut sentence = compose_sentence(&statement, &candidate, &calculation, &scored.perceptibility, &opts.rules, ctx.prompts)
            .map_err(|e| e.at("stage1.compose"))?;
        trace.push(format!("stage1.compose: {}", sentence.draft));
        let polished = polish_sentence(&sentence.draft, ctx.text, ctx.prompts, &opts.decoding).map_err(|e| e.at("stage1.polish"))?;
        match &polished.warning {
            Some(w) => {
                warnings.push(format!("{}: {w}", candidate.id));
                trace.push(format!("stage1.polish: kept draft ({w})"));
            }
            None => trace.push("stage1.polish: accepted".to_string()),
        }
        sentence.polished = polished.text;
        sentence.polish_accepted = polished.accepted;
        analogies.push(ScoredCandidate {
            candidate: Analogy {
                candidate,
                calculation,
                sentence,
                trace,
            },
            factors: scored.factors,
            composite: scored.composite,
            multiplier: scored.multiplier,
            perceptibility: scored.perceptibility,
            position: scored.position,
        });
    }

    Ok(Stage1Report {
        schema: STAGE1_SCHEMA.to_string(),
        statement,
        strategy: request.strategy,
        strategies,
        weights: request.weights,
        statement_lemma,
        themes: generated.themes,
        analogies,
        warnings,
    })
}
