//! Exact-match evaluation.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::Example;
use crate::features::Model;
use crate::learner::with_workers;
use crate::lexicon::Domain;
use crate::mr::mr_equal;
use crate::parser::{Derivation, Parser};
use crate::types::Type;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub total: usize,
    pub parsed: usize,
    pub correct: usize,
    /// correct / parsed
    pub precision: f64,
    /// correct / total
    pub recall: f64,
    pub f1: f64,
    pub seconds_total: f64,
    pub seconds_per_sentence: f64,
}

fn ratio(num: usize, den: usize, what: &str) -> f64 {
    if den == 0 {
        log::warn!("{} is 0/0; reporting 0", what);
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_counts(total: usize, parsed: usize, correct: usize) -> EvalReport {
        assert!(correct <= parsed && parsed <= total, "need correct <= parsed <= total");
        let precision = ratio(correct, parsed, "precision");
        let recall = ratio(correct, total, "recall");
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvalReport {
            total,
            parsed,
            correct,
            precision,
            recall,
            f1,
            ..Default::default()
        }
    }

    /// `key=value` lines.
    pub fn key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "total={}", self.total);
        let _ = writeln!(out, "parsed={}", self.parsed);
        let _ = writeln!(out, "correct={}", self.correct);
        let _ = writeln!(out, "precision={}", self.precision);
        let _ = writeln!(out, "recall={}", self.recall);
        let _ = writeln!(out, "f1={}", self.f1);
        let _ = writeln!(out, "seconds_total={}", self.seconds_total);
        let _ = writeln!(out, "seconds_per_sentence={}", self.seconds_per_sentence);
        out
    }

    pub fn table(&self) -> String {
        let rows = [
            ("questions", self.total.to_string()),
            ("parsed", self.parsed.to_string()),
            ("correct", self.correct.to_string()),
            ("precision", format!("{:.2}", 100.0 * self.precision)),
            ("recall", format!("{:.2}", 100.0 * self.recall)),
            ("F1", format!("{:.2}", 100.0 * self.f1)),
            ("seconds", format!("{:.3}", self.seconds_total)),
            ("sec/sentence", format!("{:.4}", self.seconds_per_sentence)),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{:<14}{:>10}", k, v);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Prediction {
    pub id: usize,
    pub derivation: Option<Derivation>,
    pub correct: bool,
    pub seconds: f64,
}

/// Beam-decodes every example and scores exact matches under `mr_equal`.
pub fn evaluate(
    model: &Model,
    examples: &[Example],
    domain: &Domain,
    beam: usize,
    goal: Option<&Type>,
    workers: usize,
) -> (EvalReport, Vec<Prediction>) {
    let parser = Parser::new(domain).with_model(model).with_goal(goal);
    let start = Instant::now();
    let predictions: Vec<Prediction> = with_workers(workers, || {
        examples
            .par_iter()
            .map(|ex| {
                let t = Instant::now();
                let derivation = parser.beam_decode(&ex.sentence, beam).ok();
                let correct = derivation
                    .as_ref()
                    .is_some_and(|d| mr_equal(&d.result.expr, &ex.mr.expr));
                Prediction {
                    id: ex.id,
                    derivation,
                    correct,
                    seconds: t.elapsed().as_secs_f64(),
                }
            })
            .collect()
    });
    let parsed = predictions.iter().filter(|p| p.derivation.is_some()).count();
    let correct = predictions.iter().filter(|p| p.correct).count();
    let mut report = EvalReport::from_counts(examples.len(), parsed, correct);
    report.seconds_total = start.elapsed().as_secs_f64();
    report.seconds_per_sentence = if examples.is_empty() {
        0.0
    } else {
        predictions.iter().map(|p| p.seconds).sum::<f64>() / examples.len() as f64
    };
    (report, predictions)
}
