//! Diagnosis and coding stages, and one meta-generation of the algorithm population.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::backend::{Backend, BackendReply, BackendRequest, RequestContext, Stage};
use super::population::{choose_mode, select_parents, AlgorithmEntry, AlgorithmPopulation, ModeWeights};
use super::prompts::Template;
use super::MetaError;
use crate::dsl::{
    find_primitive, grammar_reference, validate_value, GraphNode, Lineage, NodeKind, OperatorSpec, ReasoningMode, SpecId,
    SpecViolation, WEIGHT_BOUNDS,
};
use crate::probe::{CandidateReport, RolloutReport, TrajectoryFeatures};
use crate::problem::Domain;
use crate::rng::SeedStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaSettings {
    pub mode_weights: ModeWeights,
    /// Extra attempts after the first, per stage.
    pub retries: usize,
    /// Temperature of combine and mutate requests.
    pub focused_temperature: f64,
    pub explore_temperature: f64,
    pub max_tokens: u32,
    /// Strip feature blocks from prompts.
    pub blind: bool,
    /// Algorithm population size.
    pub capacity: usize,
}

impl Default for MetaSettings {
    fn default() -> Self {
        Self {
            mode_weights: ModeWeights::default(),
            retries: 3,
            focused_temperature: 0.7,
            explore_temperature: 1.0,
            max_tokens: 2048,
            blind: false,
            capacity: 5,
        }
    }
}

impl MetaSettings {
    pub fn temperature(&self, mode: Option<ReasoningMode>) -> f64 {
        match mode {
            Some(ReasoningMode::Explore) | None => self.explore_temperature,
            _ => self.focused_temperature,
        }
    }
}

/// Natural-language diagnosis handed from the first stage to the second.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerbalGradient {
    pub analysis: String,
    pub direction: String,
    /// Feature text the diagnosis was based on.
    pub features: String,
}

/// One request and its outcome, as logged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: BackendRequest,
    pub reply: Option<BackendReply>,
    pub error: Option<String>,
}

/// A parent as presented to the prompts.
#[derive(Clone, Debug)]
pub struct ParentView {
    pub spec: OperatorSpec,
    /// Rendered feature block; empty in blind runs.
    pub features: String,
}

/// Feature text for a parent: its probe features and, for the applied spec,
/// the real-trajectory window.
pub fn feature_block(probe: Option<&TrajectoryFeatures>, real: Option<&TrajectoryFeatures>) -> String {
    let mut out = String::new();
    if let Some(f) = probe {
        out.push_str("Search trajectory features (look-ahead rollouts):\n");
        out.push_str(&f.render());
    }
    if let Some(f) = real {
        out.push_str("Search trajectory features (real trajectory, last horizon):\n");
        out.push_str(&f.render());
    }
    out
}

/// Text between `<tag>` and `</tag>`. When `strict_close` is false a
/// repeated opening tag also closes the region.
pub fn extract_tag(text: &str, tag: &str, strict_close: bool) -> Option<String> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = text.find(&open)? + open.len();
    let rest = &text[start..];
    let end = match rest.find(&close) {
        Some(e) => e,
        None if !strict_close => rest.find(&open)?,
        None => return None,
    };
    let inner = rest[..end].trim();
    (!inner.is_empty()).then(|| inner.to_string())
}

fn parse_gradient(text: &str, features: &str) -> Option<VerbalGradient> {
    Some(VerbalGradient {
        analysis: extract_tag(text, "analysis", false)?,
        direction: extract_tag(text, "direction", true)?,
        features: features.to_string(),
    })
}

fn call(
    backend: &mut dyn Backend,
    request: BackendRequest,
    log: &mut Vec<Exchange>,
) -> Option<BackendReply> {
    match backend.complete(&request) {
        Ok(reply) => {
            log.push(Exchange {
                request,
                reply: Some(reply.clone()),
                error: None,
            });
            Some(reply)
        }
        Err(e) => {
            log.push(Exchange {
                request,
                reply: None,
                error: Some(e.to_string()),
            });
            None
        }
    }
}

fn context(domain: Domain, parents: &[ParentView]) -> RequestContext {
    RequestContext {
        domain: Some(domain),
        parents: parents.iter().map(|p| p.spec.clone()).collect(),
    }
}

fn features_of(p: &ParentView, settings: &MetaSettings) -> String {
    if settings.blind {
        String::new()
    } else {
        p.features.clone()
    }
}

/// Diagnosis stage: renders the mode's template and parses the reply tags.
pub fn diagnose(
    mode: ReasoningMode,
    parents: &[ParentView],
    domain: Domain,
    backend: &mut dyn Backend,
    settings: &MetaSettings,
    log: &mut Vec<Exchange>,
) -> Result<VerbalGradient, MetaError> {
    let problem = domain.long_name();
    let (prompt, features) = match mode {
        ReasoningMode::Combine => {
            let [a, b] = parents else {
                return Err(MetaError::CombineNeedsTwo);
            };
            let (fa, fb) = (features_of(a, settings), features_of(b, settings));
            let prompt = Template::Diagnosis(mode).render(&[
                ("problem_type", problem),
                ("parent1", &a.spec.serialize_pretty()),
                ("parent1_feature", &fa),
                ("parent2", &b.spec.serialize_pretty()),
                ("parent2_feature", &fb),
            ]);
            (prompt, format!("{fa}{fb}"))
        }
        _ => {
            let p = parents.first().ok_or(MetaError::EmptyPopulation)?;
            let f = features_of(p, settings);
            let prompt = Template::Diagnosis(mode).render(&[
                ("problem_type", problem),
                ("parent", &p.spec.serialize_pretty()),
                ("parent_feature", &f),
            ]);
            (prompt, f)
        }
    };
    for attempt in 0..=settings.retries {
        let request = BackendRequest {
            stage: Stage::Diagnosis,
            mode: Some(mode),
            attempt,
            prompt: prompt.clone(),
            temperature: settings.temperature(Some(mode)),
            max_tokens: settings.max_tokens,
            context: context(domain, parents),
        };
        if let Some(reply) = call(backend, request, log) {
            if let Some(g) = parse_gradient(&reply.text, &features) {
                return Ok(g);
            }
        }
    }
    Err(MetaError::DiagnosisFailed(settings.retries + 1))
}

fn bound_lines(spec: &OperatorSpec) -> String {
    let gate = find_primitive(NodeKind::Gate, "gate").expect("catalog gate");
    let mut lines = Vec::new();
    spec.graph.root.walk(&mut |n| {
        let mut push = |name: &String, lo: f64, hi: f64, integer: bool| {
            let v = spec.params.get(name).copied().unwrap_or(f64::NAN);
            let kind = if integer { " integer" } else { "" };
            let line = format!("{name} = {v} in [{lo}, {hi}]{kind}");
            if !lines.contains(&line) {
                lines.push(line);
            }
        };
        match n {
            GraphNode::Primitive(p) => {
                for (slot, name) in &p.bindings {
                    if let Some(d) = p.descriptor().param(slot) {
                        push(name, d.lower, d.upper, d.integer);
                    }
                }
            }
            GraphNode::Gate { bindings, .. } => {
                for (slot, name) in bindings {
                    if let Some(d) = gate.param(slot) {
                        push(name, d.lower, d.upper, d.integer);
                    }
                }
            }
            GraphNode::Choice { weights, .. } => {
                for w in weights {
                    push(w, WEIGHT_BOUNDS.lower, WEIGHT_BOUNDS.upper, false);
                }
            }
            GraphNode::Sequence(_) => {}
        }
    });
    lines.join("\n")
}

fn coding_prompt(mode: Option<ReasoningMode>, parents: &[ParentView], domain: Domain, direction: &str) -> Result<String, MetaError> {
    let problem = domain.long_name();
    let dsl = grammar_reference(domain);
    Ok(match mode {
        None => Template::Initialize.render(&[("problem_type", problem), ("dsl_reference", &dsl)]),
        Some(ReasoningMode::Combine) => {
            let [a, b] = parents else {
                return Err(MetaError::CombineNeedsTwo);
            };
            Template::Coding(ReasoningMode::Combine).render(&[
                ("problem_type", problem),
                ("parent1", &a.spec.serialize_pretty()),
                ("parent2", &b.spec.serialize_pretty()),
                ("optimization_direction", direction),
                ("dsl_reference", &dsl),
            ])
        }
        Some(ReasoningMode::Mutate) => {
            let p = parents.first().ok_or(MetaError::EmptyPopulation)?;
            Template::Coding(ReasoningMode::Mutate).render(&[
                ("problem_type", problem),
                ("algorithm_to_evolve", &p.spec.serialize_pretty()),
                ("parameter_to_evolve", &bound_lines(&p.spec)),
                ("optimization_direction", direction),
                ("dsl_reference", &dsl),
            ])
        }
        Some(ReasoningMode::Explore) => {
            let p = parents.first().ok_or(MetaError::EmptyPopulation)?;
            Template::Coding(ReasoningMode::Explore).render(&[
                ("problem_type", problem),
                ("parent_algorithm", &p.spec.serialize_pretty()),
                ("optimization_direction", direction),
                ("dsl_reference", &dsl),
            ])
        }
    })
}

/// Turns a coding reply into a validated spec (id and lineage unset).
pub fn parse_coding_reply(text: &str, domain: Domain) -> Result<OperatorSpec, Vec<SpecViolation>> {
    let code = extract_tag(text, "code", false)
        .ok_or_else(|| vec![SpecViolation::Malformed("missing <code> section".into())])?;
    let code = strip_fence(&code);
    let value: Value =
        serde_json::from_str(code).map_err(|e| vec![SpecViolation::Malformed(format!("<code> is not JSON: {e}"))])?;
    let mut doc = match value {
        Value::Object(m) if m.contains_key("graph") => m,
        other => {
            let mut m = Map::new();
            m.insert("graph".into(), other);
            m
        }
    };
    doc.remove("id");
    doc.remove("lineage");
    if let Some(d) = extract_tag(text, "description", false) {
        doc.insert("description".into(), Value::String(d));
    }
    if let Some(p) = extract_tag(text, "parameter", false) {
        let p: Value = serde_json::from_str(strip_fence(&p))
            .map_err(|e| vec![SpecViolation::Malformed(format!("<parameter> is not JSON: {e}"))])?;
        let Value::Object(overrides) = p else {
            return Err(vec![SpecViolation::Malformed("<parameter> must be a JSON object".into())]);
        };
        let params = doc
            .entry("parameters")
            .or_insert_with(|| Value::Object(Map::new()));
        match params {
            Value::Object(m) => m.extend(overrides),
            _ => *params = Value::Object(overrides),
        }
    }
    validate_value(&Value::Object(doc), domain)
}

fn strip_fence(s: &str) -> &str {
    let t = s.trim();
    let Some(rest) = t.strip_prefix("```") else { return t };
    let rest = rest.split_once('\n').map(|(_, r)| r).unwrap_or("");
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

/// Coding stage. On validation failure the prompt is re-sent with the
/// violation list appended.
pub fn synthesize(
    mode: Option<ReasoningMode>,
    parents: &[ParentView],
    gradient: Option<&VerbalGradient>,
    domain: Domain,
    backend: &mut dyn Backend,
    settings: &MetaSettings,
    log: &mut Vec<Exchange>,
) -> Result<OperatorSpec, MetaError> {
    let direction = gradient.map(|g| g.direction.as_str()).unwrap_or("Improve on the reference algorithm.");
    let base = coding_prompt(mode, parents, domain, direction)?;
    let mut prompt = base.clone();
    let mut last = Vec::new();
    for attempt in 0..=settings.retries {
        let request = BackendRequest {
            stage: Stage::Coding,
            mode,
            attempt,
            prompt: prompt.clone(),
            temperature: settings.temperature(mode),
            max_tokens: settings.max_tokens,
            context: context(domain, parents),
        };
        let Some(reply) = call(backend, request, log) else { continue };
        match parse_coding_reply(&reply.text, domain) {
            Ok(mut spec) => {
                spec.lineage = Lineage {
                    parents: parents.iter().map(|p| p.spec.id).collect(),
                    mode,
                };
                return Ok(spec);
            }
            Err(violations) => {
                last = violations.iter().map(|v| v.to_string()).collect();
                prompt = format!(
                    "{base}\nYour previous reply was rejected:\n{}\nFix these problems and reply again in the same format.\n",
                    last.iter().map(|v| format!("- {v}")).collect::<Vec<_>>().join("\n")
                );
            }
        }
    }
    Err(MetaError::SynthesisFailed {
        attempts: settings.retries + 1,
        violations: last,
    })
}

/// Asks the back end for `count` initial specs instead of using the catalog seeds.
pub fn initialize_with_backend(
    domain: Domain,
    count: usize,
    backend: &mut dyn Backend,
    settings: &MetaSettings,
    log: &mut Vec<Exchange>,
) -> Result<Vec<OperatorSpec>, MetaError> {
    (0..count)
        .map(|_| synthesize(None, &[], None, domain, backend, settings, log))
        .collect()
}

/// What happened during one meta-generation.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolveOutcome {
    pub mode: ReasoningMode,
    pub parents: Vec<SpecId>,
    pub exchanges: Vec<Exchange>,
    pub gradient: Option<VerbalGradient>,
    pub offspring: Option<OperatorSpec>,
    pub offspring_report: Option<CandidateReport>,
    pub failure: Option<String>,
}

/// Copies scores and features from `report` onto the matching entries.
pub fn refresh_scores(pop: &mut AlgorithmPopulation, report: &RolloutReport) {
    for e in &mut pop.entries {
        if let Some(c) = report.get(e.spec.id) {
            e.score = c.score;
            e.features = c.features;
        }
    }
}

/// One meta-generation: refresh scores, pick a mode and parents, diagnose,
/// synthesize one offspring, score it with `scorer`, and truncate.
#[allow(clippy::too_many_arguments)]
pub fn evolve_algorithms(
    pop: &mut AlgorithmPopulation,
    report: &RolloutReport,
    anchor: Option<(SpecId, TrajectoryFeatures)>,
    domain: Domain,
    backend: &mut dyn Backend,
    settings: &MetaSettings,
    stream: SeedStream,
    scorer: &mut dyn FnMut(&OperatorSpec) -> CandidateReport,
) -> Result<EvolveOutcome, MetaError> {
    refresh_scores(pop, report);
    let mode = choose_mode(&settings.mode_weights, pop.len(), stream.derive_named("mode"));
    let idx = select_parents(pop, mode, stream.derive_named("parents"))?;
    let views: Vec<ParentView> = idx
        .iter()
        .map(|&i| {
            let e: &AlgorithmEntry = &pop.entries[i];
            let real = anchor.as_ref().filter(|(id, _)| *id == e.spec.id).map(|(_, f)| f);
            ParentView {
                spec: e.spec.clone(),
                features: feature_block(e.features.as_ref(), real),
            }
        })
        .collect();
    let mut outcome = EvolveOutcome {
        mode,
        parents: views.iter().map(|v| v.spec.id).collect(),
        exchanges: Vec::new(),
        gradient: None,
        offspring: None,
        offspring_report: None,
        failure: None,
    };
    pop.generation += 1;

    let gradient = match diagnose(mode, &views, domain, backend, settings, &mut outcome.exchanges) {
        Ok(g) => g,
        Err(e) => {
            outcome.failure = Some(e.to_string());
            return Ok(outcome);
        }
    };
    let spec = synthesize(Some(mode), &views, Some(&gradient), domain, backend, settings, &mut outcome.exchanges);
    outcome.gradient = Some(gradient);
    let mut spec = match spec {
        Ok(s) => s,
        Err(e) => {
            outcome.failure = Some(e.to_string());
            return Ok(outcome);
        }
    };
    spec.id = pop.mint_id();
    let cand = scorer(&spec);
    pop.entries.push(AlgorithmEntry {
        spec: spec.clone(),
        score: cand.score,
        features: cand.features,
        born: pop.generation,
    });
    pop.truncate(settings.capacity);
    outcome.offspring = Some(spec);
    outcome.offspring_report = Some(cand);
    Ok(outcome)
}
