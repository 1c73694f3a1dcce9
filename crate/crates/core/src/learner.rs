//! Max-violation perceptron training with latent derivations.
//!
//! Gold data gives only the meaning representation, so reference
//! derivations are found first by forced decoding: exhaustive search pruned
//! against the gold expression, then (for what that misses) beam search
//! guided by a model trained on the first batch of references.

use std::fmt::Write as _;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Example, Sentence};
use crate::error::LearnError;
use crate::features::{FeatureTemplateSet, FeatureVector, Model, WeightVector};
use crate::lexicon::Domain;
use crate::mr::{mr_equal, TypedResult};
use crate::parser::{Action, Parser, ParserState, ReferenceSet, TargetIndex};

#[derive(Clone, Debug)]
pub struct TrainingExample {
    pub id: usize,
    pub sentence: Sentence,
    pub gold: TypedResult,
    pub refs: ReferenceSet,
}

impl From<Example> for TrainingExample {
    fn from(ex: Example) -> Self {
        TrainingExample {
            id: ex.id,
            sentence: ex.sentence,
            gold: ex.mr,
            refs: ReferenceSet::new(),
        }
    }
}

impl TrainingExample {
    pub fn covered(&self) -> bool {
        !self.refs.is_empty()
    }

    /// Adds a reference after checking that it replays to the gold
    /// expression. Returns whether it was new.
    pub fn add_reference(&mut self, domain: &Domain, actions: &[Action]) -> Result<bool, LearnError> {
        let d = Parser::new(domain).replay_derivation(&self.sentence, actions)?;
        if !mr_equal(&d.result.expr, &self.gold.expr) {
            return Err(LearnError::BadReference {
                id: self.id,
                got: d.result.to_string(),
                want: self.gold.to_string(),
            });
        }
        Ok(self.refs.insert(actions))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    pub iterations: usize,
    pub beam_width: usize,
    pub pass1_time_limit: Duration,
    pub pass2_beam: usize,
    pub averaging: bool,
    pub seed: u64,
    /// When no step shows a violation but the beam's best full derivation
    /// is wrong, update against it anyway.
    pub final_step_fallback: bool,
    /// Threads for forced decoding and evaluation; 0 uses the default pool.
    pub workers: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            iterations: 20,
            beam_width: 16,
            pass1_time_limit: Duration::from_secs(60),
            pass2_beam: 1024,
            averaging: true,
            seed: 0,
            final_step_fallback: false,
            workers: 0,
        }
    }
}

impl TrainerConfig {
    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("iterations".into(), self.iterations.to_string()),
            ("beam".into(), self.beam_width.to_string()),
            ("time_limit".into(), format!("{}", self.pass1_time_limit.as_secs_f64())),
            ("pass2_beam".into(), self.pass2_beam.to_string()),
            ("averaging".into(), self.averaging.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("final_step_fallback".into(), self.final_step_fallback.to_string()),
        ]
    }
}

/// Runs `f` on a pool of `workers` threads, or on the global pool when 0.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("could not build a {}-thread pool ({}); using the default", workers, e);
            f()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoverageReport {
    pub total: usize,
    pub covered: usize,
    /// Examples whose search was cut off by the time limit.
    pub timed_out: usize,
    pub newly_covered: usize,
    pub references: usize,
}

impl CoverageReport {
    fn of(examples: &[TrainingExample]) -> CoverageReport {
        CoverageReport {
            total: examples.len(),
            covered: examples.iter().filter(|e| e.covered()).count(),
            references: examples.iter().map(|e| e.refs.len()).sum(),
            ..Default::default()
        }
    }

    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.covered as f64 / self.total as f64
        }
    }
}

/// Exhaustive search for derivations of each uncovered example's gold MR.
pub fn forced_decode_pass1(
    examples: &mut [TrainingExample],
    domain: &Domain,
    time_limit: Duration,
    workers: usize,
) -> CoverageReport {
    let parser = Parser::new(domain);
    let results: Vec<(usize, bool, bool)> = with_workers(workers, || {
        examples
            .par_iter_mut()
            .filter(|ex| !ex.covered())
            .map(|ex| {
                let found = parser.enumerate_derivations(&ex.sentence, time_limit, Some(&ex.gold.expr));
                for d in &found.derivations {
                    ex.refs.insert(&d.actions);
                }
                (ex.id, ex.covered(), !found.complete)
            })
            .collect()
    });
    let mut report = CoverageReport::of(examples);
    report.newly_covered = results.iter().filter(|r| r.1).count();
    report.timed_out = results.iter().filter(|r| r.2).count();
    for (id, covered, timed_out) in results {
        if !covered {
            log::info!("example {} uncovered{}", id, if timed_out { " (timed out)" } else { "" });
        }
    }
    report
}

/// Beam search guided by `model` and pruned against the gold MR, for the
/// examples pass 1 left uncovered.
pub fn forced_decode_pass2(
    examples: &mut [TrainingExample],
    domain: &Domain,
    model: &Model,
    beam: usize,
    workers: usize,
) -> CoverageReport {
    let parser = Parser::new(domain).with_model(model);
    let newly: usize = with_workers(workers, || {
        examples
            .par_iter_mut()
            .filter(|ex| !ex.covered())
            .map(|ex| {
                let index = TargetIndex::new(&ex.gold.expr);
                let out = parser.beam_search_with(&ex.sentence, beam, |s| index.admits_state(s));
                for s in &out.finals {
                    let result = &s.top(0).expect("final has one item").result;
                    if mr_equal(&result.expr, &ex.gold.expr) {
                        ex.refs.insert(&s.actions());
                    }
                }
                usize::from(ex.covered())
            })
            .sum()
    });
    let mut report = CoverageReport::of(examples);
    report.newly_covered = newly;
    report
}

/// What one call to [`max_violation_update`] saw and did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ViolationRecord {
    /// `score(d⁻_i) - score(d⁺_i)` for each step `i` (index 0 is the empty
    /// prefix), `None` where either side is missing.
    pub violations: Vec<Option<f64>>,
    /// The step updated at, if any.
    pub step: Option<usize>,
    pub delta: FeatureVector,
    pub plus: Vec<Action>,
    pub minus: Vec<Action>,
}

impl ViolationRecord {
    pub fn updated(&self) -> bool {
        self.step.is_some()
    }
}

fn best_bad<'s>(bucket: &'s [ParserState], refs: &ReferenceSet) -> Option<&'s ParserState> {
    bucket.iter().find(|s| !refs.contains_prefix(&s.actions()))
}

/// One max-violation perceptron step on `ex`: find the prefix length where
/// the best non-reference beam item most outscores the best reference
/// prefix, and move the weights toward the reference there. Ties count as
/// violations.
pub fn max_violation_update(
    model: &mut Model,
    domain: &Domain,
    ex: &TrainingExample,
    beam: usize,
    final_step_fallback: bool,
) -> Result<ViolationRecord, LearnError> {
    if ex.refs.is_empty() {
        return Err(LearnError::EmptyReferenceSet(ex.id));
    }
    let (plus, outcome) = {
        let parser = Parser::new(domain).with_model(model);
        (
            parser.constrained_decode(&ex.sentence, beam, &ex.refs)?,
            parser.beam_search(&ex.sentence, beam),
        )
    };
    let mut record = ViolationRecord::default();
    let mut best: Option<(usize, f64, &ParserState)> = None;
    for (i, p) in plus.iter().enumerate() {
        let minus = outcome.buckets.get(i).and_then(|b| best_bad(b, &ex.refs));
        let v = minus.map(|m| m.score - p.score);
        record.violations.push(v);
        if let (Some(v), Some(m)) = (v, minus) {
            if best.is_none_or(|(_, bv, _)| v >= bv) {
                best = Some((i, v, m));
            }
        }
    }
    let chosen = match best {
        Some((i, v, m)) if v >= 0.0 => Some((i, plus[i].actions(), m.actions())),
        _ if final_step_fallback => {
            let parser = Parser::new(domain).with_model(model);
            outcome
                .best_final()
                .filter(|s| !ex.refs.contains(&s.actions()))
                .and_then(|wrong| {
                    let right = plus.iter().rev().find(|s| parser.is_final(s, &ex.sentence))?;
                    Some((right.num_actions(), right.actions(), wrong.actions()))
                })
        }
        _ => None,
    };
    let Some((step, plus_actions, minus_actions)) = chosen else {
        return Ok(record);
    };
    let parser = Parser::new(domain);
    if ex.refs.contains(&plus_actions) {
        let d = parser.replay_derivation(&ex.sentence, &plus_actions)?;
        if !mr_equal(&d.result.expr, &ex.gold.expr) {
            return Err(LearnError::BadReference {
                id: ex.id,
                got: d.result.to_string(),
                want: ex.gold.to_string(),
            });
        }
    }
    let delta = model
        .derivation_features(&parser, &ex.sentence, &plus_actions)
        .minus(&model.derivation_features(&parser, &ex.sentence, &minus_actions));
    model.weights.add(&delta, 1.0);
    record.step = Some(step);
    record.delta = delta;
    record.plus = plus_actions;
    record.minus = minus_actions;
    Ok(record)
}

/// Running sum for weight averaging: after `c` examples the average is
/// `w - u / c`, where `u` accumulates each update scaled by its time.
#[derive(Default)]
struct Averager {
    u: WeightVector,
    c: f64,
}

impl Averager {
    fn new() -> Self {
        Averager {
            u: WeightVector::new(),
            c: 1.0,
        }
    }

    fn average(&self, w: &WeightVector) -> WeightVector {
        let mut out = w.clone();
        for (f, uw) in self.u.sorted() {
            out.set(f, w.get(f) - uw / self.c);
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochStats {
    pub updates: usize,
    pub examples: usize,
}

/// Epochs of max-violation updates over the covered examples, in an order
/// reshuffled each epoch from `cfg.seed`.
pub fn train(
    examples: &[TrainingExample],
    domain: &Domain,
    cfg: &TrainerConfig,
    templates: &FeatureTemplateSet,
) -> Result<(Model, Vec<EpochStats>), LearnError> {
    let mut order: Vec<usize> = (0..examples.len()).filter(|&i| examples[i].covered()).collect();
    if order.is_empty() {
        return Err(LearnError::NoCoverage);
    }
    let mut model = Model::new(templates.clone());
    model.config = cfg.echo();
    let mut avg = Averager::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stats = Vec::with_capacity(cfg.iterations);
    for epoch in 0..cfg.iterations {
        order.shuffle(&mut rng);
        let mut epoch_stats = EpochStats::default();
        for &i in &order {
            let rec = max_violation_update(
                &mut model,
                domain,
                &examples[i],
                cfg.beam_width,
                cfg.final_step_fallback,
            )?;
            if rec.updated() {
                epoch_stats.updates += 1;
                avg.u.add(&rec.delta, avg.c);
            }
            avg.c += 1.0;
            epoch_stats.examples += 1;
        }
        log::info!("epoch {}: {} updates over {} examples", epoch + 1, epoch_stats.updates, epoch_stats.examples);
        stats.push(epoch_stats);
    }
    if cfg.averaging {
        model.weights = avg.average(&model.weights);
    }
    Ok((model, stats))
}

#[derive(Clone, Debug, Default)]
pub struct PipelineReport {
    pub pass1: Option<CoverageReport>,
    pub pass2: Option<CoverageReport>,
    pub epochs: Vec<EpochStats>,
}

/// Pass 1 forced decoding (unless every example is already covered), a
/// first training round, pass 2 for what is still uncovered, and a final
/// training round from scratch over all references.
pub fn train_pipeline(
    examples: &mut [TrainingExample],
    domain: &Domain,
    cfg: &TrainerConfig,
    templates: &FeatureTemplateSet,
) -> Result<(Model, PipelineReport), LearnError> {
    let mut report = PipelineReport::default();
    if examples.iter().any(|e| !e.covered()) {
        report.pass1 = Some(forced_decode_pass1(examples, domain, cfg.pass1_time_limit, cfg.workers));
    }
    let (mut model, mut epochs) = train(examples, domain, cfg, templates)?;
    if examples.iter().any(|e| !e.covered()) {
        let pass2 = forced_decode_pass2(examples, domain, &model, cfg.pass2_beam, cfg.workers);
        if pass2.newly_covered > 0 {
            (model, epochs) = train(examples, domain, cfg, templates)?;
        }
        report.pass2 = Some(pass2);
    }
    report.epochs = epochs;
    Ok((model, report))
}

const CACHE_HEADER: &str = "typeshift-refs v1";

/// Reference cache text: a header, then `id<TAB>seq<TAB>seq...` per example
/// with actions space-separated.
pub fn save_references(examples: &[TrainingExample]) -> String {
    let mut out = String::from(CACHE_HEADER);
    out.push('\n');
    for ex in examples {
        let _ = write!(out, "{}", ex.id);
        for seq in ex.refs.sequences() {
            let codes: Vec<String> = seq.iter().map(Action::to_string).collect();
            let _ = write!(out, "\t{}", codes.join(" "));
        }
        out.push('\n');
    }
    out
}

/// Loads cached references into `examples` (matched by id), validating
/// every sequence against the gold MR.
pub fn load_references(
    text: &str,
    examples: &mut [TrainingExample],
    domain: &Domain,
) -> Result<usize, LearnError> {
    let bad = |line: usize, msg: String| LearnError::Cache { line, msg };
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l) != Some(CACHE_HEADER) {
        return Err(bad(1, format!("expected header `{}`", CACHE_HEADER)));
    }
    let mut loaded = 0;
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| bad(i + 1, "bad example id".into()))?;
        let ex = examples
            .iter_mut()
            .find(|e| e.id == id)
            .ok_or_else(|| bad(i + 1, format!("no example with id {}", id)))?;
        for seq in fields {
            let actions = seq
                .split(' ')
                .map(str::parse::<Action>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|m| bad(i + 1, m))?;
            ex.add_reference(domain, &actions)?;
            loaded += 1;
        }
    }
    Ok(loaded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{bundled, parse_dataset};
    use crate::parser::tests::{geo, running_example};

    fn toy(domain: &Domain) -> Vec<TrainingExample> {
        parse_dataset(bundled::TOY_TRAIN, &domain.signature)
            .unwrap()
            .into_iter()
            .map(TrainingExample::from)
            .collect()
    }

    #[test]
    fn add_reference_validates() {
        let d = geo();
        let (sent, mut actions) = running_example(&d);
        actions.push(Action::Skip);
        let gold = d.signature.parse_expression("(capital (argmax state size))").unwrap();
        let mut ex = TrainingExample {
            id: 0,
            sentence: sent,
            gold,
            refs: ReferenceSet::new(),
        };
        assert!(ex.add_reference(&d, &actions).unwrap());
        assert!(!ex.add_reference(&d, &actions).unwrap());
        assert!(ex.add_reference(&d, &actions[..13]).is_err());
        ex.gold = d.signature.parse_expression("(capital texas)").unwrap();
        assert!(matches!(
            ex.add_reference(&d, &actions),
            Err(LearnError::BadReference { .. })
        ));
    }

    #[test]
    fn pass1_covers_toy_corpus() {
        let d = geo();
        let mut exs = toy(&d);
        let r = forced_decode_pass1(&mut exs, &d, Duration::from_secs(60), 0);
        assert_eq!(r.covered, r.total);
        assert_eq!(r.timed_out, 0);
    }

    #[test]
    fn uncoverable_example_stays_uncovered() {
        let d = geo();
        let mut exs: Vec<TrainingExample> = parse_dataset("capital of texas\t(population texas)", &d.signature)
            .unwrap()
            .into_iter()
            .map(TrainingExample::from)
            .collect();
        let r = forced_decode_pass1(&mut exs, &d, Duration::from_secs(10), 1);
        assert_eq!(r.covered, 0);
        let r2 = forced_decode_pass2(&mut exs, &d, &Model::default(), 64, 1);
        assert_eq!(r2.covered, 0);
        assert!(matches!(
            train(&exs, &d, &TrainerConfig::default(), &FeatureTemplateSet::default()),
            Err(LearnError::NoCoverage)
        ));
    }

    #[test]
    fn pass2_finds_what_a_tiny_time_limit_missed() {
        let d = geo();
        let mut exs: Vec<TrainingExample> = toy(&d)
            .into_iter()
            .filter(|e| e.sentence.len() >= 6)
            .collect();
        let r1 = forced_decode_pass1(&mut exs, &d, Duration::from_nanos(1), 1);
        assert!(r1.covered < r1.total);
        let before: Vec<usize> = exs.iter().map(|e| e.refs.len()).collect();
        let r2 = forced_decode_pass2(&mut exs, &d, &Model::default(), 1024, 1);
        assert_eq!(r2.covered, r2.total);
        for (e, n) in exs.iter().zip(before) {
            if n > 0 {
                assert_eq!(e.refs.len(), n);
            }
        }
    }

    #[test]
    fn zero_iterations_gives_zero_model() {
        let d = geo();
        let mut exs = toy(&d);
        forced_decode_pass1(&mut exs, &d, Duration::from_secs(60), 0);
        let cfg = TrainerConfig {
            iterations: 0,
            ..Default::default()
        };
        let (m, _) = train(&exs, &d, &cfg, &FeatureTemplateSet::default()).unwrap();
        assert!(m.weights.is_empty());
    }

    #[test]
    fn reference_cache_round_trip() {
        let d = geo();
        let mut exs = toy(&d);
        forced_decode_pass1(&mut exs, &d, Duration::from_secs(60), 0);
        let text = save_references(&exs);
        let mut fresh = toy(&d);
        let n = load_references(&text, &mut fresh, &d).unwrap();
        assert_eq!(n, exs.iter().map(|e| e.refs.len()).sum::<usize>());
        assert_eq!(save_references(&fresh), text);
        assert!(load_references("bogus", &mut fresh, &d).is_err());
        assert!(load_references("typeshift-refs v1\n0\tsh:9:9999", &mut toy(&d), &d).is_err());
    }

    #[test]
    fn converged_example_gets_no_update() {
        let d = geo();
        let mut exs = toy(&d);
        forced_decode_pass1(&mut exs, &d, Duration::from_secs(60), 0);
        let ex = &exs[0];
        let mut m = Model::default();
        let mut quiet = false;
        for _ in 0..50 {
            let before = m.weights.clone();
            let rec = max_violation_update(&mut m, &d, ex, 16, false).unwrap();
            if !rec.updated() {
                assert_eq!(m.weights, before);
                quiet = true;
                break;
            }
            assert!(rec.violations[rec.step.unwrap()].unwrap() >= 0.0);
        }
        assert!(quiet);
        let best = Parser::new(&d).with_model(&m).beam_decode(&ex.sentence, 16).unwrap();
        assert!(mr_equal(&best.result.expr, &ex.gold.expr));
    }
}
