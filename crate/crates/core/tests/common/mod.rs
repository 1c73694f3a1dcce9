#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use typeshift::data::{bundled, parse_dataset};
use typeshift::{Action, Domain, Example, Model, Parser, ParserState, Sentence};

pub const RUNNING_EXAMPLE: &str = "what is the capital of the largest state by area ?";

pub fn geo() -> Domain {
    Domain::parse(bundled::GEO_DOMAIN).unwrap()
}

pub fn toy_train(d: &Domain) -> Vec<Example> {
    parse_dataset(bundled::TOY_TRAIN, &d.signature).unwrap()
}

pub fn toy_heldout(d: &Domain) -> Vec<Example> {
    parse_dataset(bundled::TOY_HELDOUT, &d.signature).unwrap()
}

/// skip×3, shift(capital), skip×2, shift(argmax), shift(state), reduceRight,
/// skip, shift(size), reduceRight, reduceRight; each shift is the first one
/// the lexicon offers at that position.
pub fn running_actions(p: &Parser, sent: &Sentence) -> Vec<Action> {
    let plan = "skip skip skip sh skip skip sh sh reR skip sh reR reR";
    let mut s = ParserState::initial();
    let mut out = Vec::new();
    for code in plan.split_whitespace() {
        let a = if code == "sh" {
            p.legal_actions(&s, sent)
                .into_iter()
                .find(|a| matches!(a, Action::Shift { .. }))
                .expect("a shift is available")
        } else {
            code.parse().unwrap()
        };
        s = p.step(&s, a, sent).unwrap();
        out.push(a);
    }
    out
}

pub fn stack_types(s: &ParserState) -> Vec<String> {
    s.stack().iter().map(|i| i.result.ty.to_string()).collect()
}

/// Scores of every final state, by plain recursion over legal actions.
pub fn all_final_scores(p: &Parser, sent: &Sentence) -> Vec<f64> {
    fn go(p: &Parser, sent: &Sentence, s: &ParserState, out: &mut Vec<f64>) {
        if p.is_final(s, sent) {
            out.push(s.score);
            return;
        }
        for a in p.legal_actions(s, sent) {
            let next = p.step(s, a, sent).unwrap();
            go(p, sent, &next, out);
        }
    }
    let mut out = Vec::new();
    go(p, sent, &ParserState::initial(), &mut out);
    out
}

/// Every feature any legal transition of `sent` can fire.
pub fn reachable_features(d: &Domain, sent: &Sentence) -> BTreeSet<String> {
    fn go(p: &Parser, m: &Model, sent: &Sentence, s: &ParserState, out: &mut BTreeSet<String>) {
        if p.is_final(s, sent) {
            return;
        }
        for a in p.legal_actions(s, sent) {
            for (f, _) in m.extract(s, a, sent, p.domain).iter() {
                out.insert(f.to_string());
            }
            let next = p.step(s, a, sent).unwrap();
            go(p, m, sent, &next, out);
        }
    }
    let m = Model::default();
    let mut out = BTreeSet::new();
    go(&Parser::new(d), &m, sent, &ParserState::initial(), &mut out);
    out
}

pub fn random_model<'a>(features: impl IntoIterator<Item = &'a String>, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Model::default();
    for f in features {
        m.weights.set(f, rng.gen_range(-1.0..1.0));
    }
    m
}
