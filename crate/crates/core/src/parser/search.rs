//! Beam search, reference-constrained search, and exhaustive enumeration.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use super::{Derivation, ParserState, Parser, ReferenceSet};
use crate::data::Sentence;
use crate::error::ParseError;
use crate::mr::{mr_equal, Expr, AND};

/// Beam width meaning "keep everything".
pub const UNBOUNDED: usize = usize::MAX;

fn by_score_desc(a: &ParserState, b: &ParserState) -> Ordering {
    b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal)
}

/// Surviving states per action count, plus every final state that survived.
#[derive(Clone, Debug, Default)]
pub struct BeamOutcome {
    pub buckets: Vec<Vec<ParserState>>,
    pub finals: Vec<ParserState>,
}

impl BeamOutcome {
    /// Highest-scoring final; the earliest found wins ties.
    pub fn best_final(&self) -> Option<&ParserState> {
        self.finals.iter().fold(None, |best: Option<&ParserState>, s| match best {
            Some(b) if b.score >= s.score => Some(b),
            _ => Some(s),
        })
    }
}

/// Results of exhaustive search.
#[derive(Clone, Debug, Default)]
pub struct Enumeration {
    pub derivations: Vec<Derivation>,
    /// False if the time limit cut the search short.
    pub complete: bool,
    pub states_visited: usize,
}

/// Structural facts about a target expression used to prune partial
/// states that can no longer grow into it.
#[derive(Clone, Debug)]
pub struct TargetIndex {
    target: Expr,
    atoms: HashSet<String>,
    subterms: HashSet<String>,
    applications: HashMap<String, Vec<Vec<String>>>,
}

fn atom_key(e: &Expr) -> Option<String> {
    match e {
        Expr::Const { name, ty } => Some(format!("{}:{}", name, ty)),
        Expr::Pred { name, .. } => Some(name.to_string()),
        _ => None,
    }
}

fn for_each_subterm(e: &Expr, f: &mut impl FnMut(&Expr)) {
    f(e);
    match e {
        Expr::Lam { body, .. } => for_each_subterm(body, f),
        Expr::App { fun, arg, .. } => {
            for_each_subterm(fun, f);
            for_each_subterm(arg, f);
        }
        _ => {}
    }
}

impl TargetIndex {
    pub fn new(target: &Expr) -> TargetIndex {
        let mut atoms = HashSet::new();
        let mut subterms = HashSet::new();
        let mut applications: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        for_each_subterm(target, &mut |e| {
            if let Some(k) = atom_key(e) {
                atoms.insert(k);
            }
            subterms.insert(e.canonical());
            if let Expr::App { .. } = e {
                let (head, args) = e.spine();
                if let Expr::Pred { name, .. } = head {
                    if &**name != AND {
                        applications
                            .entry(name.to_string())
                            .or_default()
                            .push(args.iter().map(|a| a.canonical()).collect());
                    }
                }
            }
        });
        TargetIndex {
            target: target.clone(),
            atoms,
            subterms,
            applications,
        }
    }

    pub fn target(&self) -> &Expr {
        &self.target
    }

    /// Whether `item` could still appear inside the target: its atoms all
    /// occur there, a closed base-typed item is literally a subterm, and a
    /// partially applied predicate matches the leading arguments of some
    /// application of that predicate.
    pub fn admits(&self, item: &Expr) -> bool {
        let mut ok = true;
        for_each_subterm(item, &mut |e| {
            if let Some(k) = atom_key(e) {
                ok &= self.atoms.contains(&k);
            }
        });
        if !ok {
            return false;
        }
        let (head, args) = item.spine();
        let head_name = match head {
            Expr::Pred { name, .. } => Some(&**name),
            _ => None,
        };
        if head_name == Some(AND) {
            return true;
        }
        if item.ty().is_base() {
            return self.subterms.contains(&item.canonical());
        }
        match head_name {
            Some(name) if !args.is_empty() => {
                let args: Vec<String> = args.iter().map(|a| a.canonical()).collect();
                self.applications.get(name).is_some_and(|apps| {
                    apps.iter()
                        .any(|full| full.len() >= args.len() && full[..args.len()] == args[..])
                })
            }
            _ => true,
        }
    }

    /// Checks the item the last action created, if any.
    pub fn admits_state(&self, s: &ParserState) -> bool {
        match s.last_action() {
            None | Some(super::Action::Skip) => true,
            Some(_) => s.top(0).is_none_or(|item| self.admits(&item.result.expr)),
        }
    }
}

impl Parser<'_> {
    pub fn beam_search(&self, sent: &Sentence, width: usize) -> BeamOutcome {
        self.beam_search_with(sent, width, |_| true)
    }

    /// Beam search over buckets indexed by the number of actions taken.
    /// Successors rejected by `admit` are dropped before ranking.
    pub fn beam_search_with(
        &self,
        sent: &Sentence,
        width: usize,
        mut admit: impl FnMut(&ParserState) -> bool,
    ) -> BeamOutcome {
        assert!(width >= 1, "beam width must be positive");
        let mut out = BeamOutcome::default();
        let mut bucket = vec![ParserState::initial()];
        while !bucket.is_empty() {
            let mut next = Vec::new();
            for s in &bucket {
                if self.is_final(s, sent) {
                    out.finals.push(s.clone());
                    continue;
                }
                next.extend(
                    self.successors(s, sent)
                        .into_iter()
                        .map(|(_, n)| n)
                        .filter(|n| admit(n)),
                );
            }
            next.sort_by(by_score_desc);
            next.truncate(width);
            out.buckets.push(std::mem::replace(&mut bucket, next));
        }
        out
    }

    pub fn beam_decode(&self, sent: &Sentence, width: usize) -> Result<Derivation, ParseError> {
        let out = self.beam_search(sent, width);
        out.best_final()
            .and_then(|s| self.derivation(s, sent))
            .ok_or(ParseError::NoParse)
    }

    /// Beam search restricted to prefixes of `refs`. Element `i` of the
    /// result is the best reference prefix with `i` actions; the vector
    /// ends at the first step with no surviving prefix.
    pub fn constrained_decode(
        &self,
        sent: &Sentence,
        width: usize,
        refs: &ReferenceSet,
    ) -> Result<Vec<ParserState>, ParseError> {
        if refs.is_empty() {
            return Err(ParseError::EmptyReference(0));
        }
        let mut out = vec![ParserState::initial()];
        let mut beam = vec![(ParserState::initial(), ReferenceSet::ROOT)];
        loop {
            let mut next = Vec::new();
            for (s, node) in &beam {
                for (a, n) in self.successors(s, sent) {
                    if let Some(child) = refs.child(*node, a) {
                        next.push((n, child));
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            next.sort_by(|a, b| by_score_desc(&a.0, &b.0));
            next.truncate(width);
            out.push(next[0].0.clone());
            beam = next;
        }
        Ok(out)
    }

    /// Depth-first enumeration of full derivations, in legal-action order.
    /// With a target, only derivations whose result is `mr_equal` to it are
    /// kept and branches that cannot embed into it are cut.
    pub fn enumerate_derivations(
        &self,
        sent: &Sentence,
        time_limit: Duration,
        target: Option<&Expr>,
    ) -> Enumeration {
        let start = Instant::now();
        let index = target.map(TargetIndex::new);
        let mut out = Enumeration {
            complete: true,
            ..Default::default()
        };
        let mut stack = vec![ParserState::initial()];
        while let Some(s) = stack.pop() {
            out.states_visited += 1;
            if start.elapsed() >= time_limit {
                out.complete = false;
                break;
            }
            if let Some(d) = self.derivation(&s, sent) {
                if target.is_none_or(|t| mr_equal(&d.result.expr, t)) {
                    out.derivations.push(d);
                }
                continue;
            }
            let children = self.successors(&s, sent);
            for (_, n) in children.into_iter().rev() {
                if index.as_ref().is_none_or(|ix| ix.admits_state(&n)) {
                    stack.push(n);
                }
            }
        }
        out
    }
}
