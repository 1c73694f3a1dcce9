//! Fixtures shared by the benchmarks in `benches/`.

use typeshift::data::{bundled, parse_dataset, Sentence};
use typeshift::learner::{self, TrainingExample};
use typeshift::{Domain, FeatureTemplateSet, Model, TrainerConfig};

pub const RUNNING_EXAMPLE: &str = "what is the capital of the largest state by area ?";

pub fn geo() -> Domain {
    Domain::parse(bundled::GEO_DOMAIN).expect("bundled domain parses")
}

pub fn toy_examples(domain: &Domain) -> Vec<TrainingExample> {
    parse_dataset(bundled::TOY_TRAIN, &domain.signature)
        .expect("bundled data parses")
        .into_iter()
        .map(TrainingExample::from)
        .collect()
}

/// A model trained on the bundled toy corpus for `iterations` epochs.
pub fn trained_model(domain: &Domain, iterations: usize) -> Model {
    let cfg = TrainerConfig {
        iterations,
        ..TrainerConfig::default()
    };
    let mut examples = toy_examples(domain);
    learner::train_pipeline(&mut examples, domain, &cfg, &FeatureTemplateSet::default())
        .expect("toy corpus trains")
        .0
}

/// `n` tokens drawn from the lexicon vocabulary and a few function words
/// by a fixed stride, so runs are comparable.
pub fn synthetic_sentence(domain: &Domain, n: usize) -> Sentence {
    let mut words: Vec<String> = domain.vocabulary();
    words.extend(["the", "of", "in", "is"].map(String::from));
    let mut toks = Vec::with_capacity(n);
    let mut i = 0;
    while toks.len() < n {
        toks.extend(words[(i * 7 + 3) % words.len()].split(' ').map(String::from));
        i += 1;
    }
    toks.truncate(n);
    Sentence::from_tokens(&toks)
}
