//! The shift/skip/reduce transition system.
//!
//! States are persistent: the stack and the action history are shared
//! cons-lists, so every successor shares structure with its parent and the
//! search space forms a tree of states.

mod reference;
mod search;
mod trace;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::data::Sentence;
use crate::error::ParseError;
use crate::features::Model;
use crate::lexicon::{Domain, Trigger};
use crate::mr::{self, ApplyNote, TypedResult};
use crate::types::{is_subtype, Type};

pub use reference::ReferenceSet;
pub use search::{BeamOutcome, Enumeration, TargetIndex, UNBOUNDED};
pub use trace::TraceRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Skip,
    Shift { consumed: usize, template: usize },
    /// Second-from-top applied to top.
    ReduceRight,
    /// Top applied to second-from-top.
    ReduceLeft,
    Union,
}

impl Action {
    /// Short name used in feature strings.
    pub fn name(&self) -> &'static str {
        match self {
            Action::Skip => "skip",
            Action::Shift { .. } => "sh",
            Action::ReduceRight => "reR",
            Action::ReduceLeft => "reL",
            Action::Union => "union",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Shift { consumed, template } => write!(f, "sh:{}:{}", consumed, template),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "skip" => Ok(Action::Skip),
            "reR" => Ok(Action::ReduceRight),
            "reL" => Ok(Action::ReduceLeft),
            "union" => Ok(Action::Union),
            _ => {
                let bad = || format!("bad action `{}`", s);
                let mut parts = s.split(':');
                if parts.next() != Some("sh") {
                    return Err(bad());
                }
                let consumed = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
                let template = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
                if parts.next().is_some() || consumed == 0 {
                    return Err(bad());
                }
                Ok(Action::Shift { consumed, template })
            }
        }
    }
}

/// A stack entry and the token range (inclusive) it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct StackItem {
    pub result: TypedResult,
    pub span: (usize, usize),
}

#[derive(Debug)]
struct Node<T> {
    value: T,
    next: Option<Arc<Node<T>>>,
}

fn push<T>(list: &Option<Arc<Node<T>>>, value: T) -> Option<Arc<Node<T>>> {
    Some(Arc::new(Node {
        value,
        next: list.clone(),
    }))
}

#[derive(Clone, Debug)]
pub struct ParserState {
    stack: Option<Arc<Node<StackItem>>>,
    depth: usize,
    history: Option<Arc<Node<Action>>>,
    steps: usize,
    pub queue_pos: usize,
    pub score: f64,
    /// Bindings and subsumption checks made by the last reduce.
    pub note: Option<Arc<ApplyNote>>,
}

impl ParserState {
    pub fn initial() -> ParserState {
        ParserState {
            stack: None,
            depth: 0,
            history: None,
            steps: 0,
            queue_pos: 0,
            score: 0.0,
            note: None,
        }
    }

    pub fn stack_len(&self) -> usize {
        self.depth
    }

    /// The `k`-th item from the top (0 is the top).
    pub fn top(&self, k: usize) -> Option<&StackItem> {
        let mut cur = self.stack.as_deref();
        for _ in 0..k {
            cur = cur?.next.as_deref();
        }
        cur.map(|n| &n.value)
    }

    /// Stack items from bottom to top.
    pub fn stack(&self) -> Vec<&StackItem> {
        let mut out = Vec::with_capacity(self.depth);
        let mut cur = self.stack.as_deref();
        while let Some(n) = cur {
            out.push(&n.value);
            cur = n.next.as_deref();
        }
        out.reverse();
        out
    }

    pub fn num_actions(&self) -> usize {
        self.steps
    }

    pub fn last_action(&self) -> Option<Action> {
        self.history.as_ref().map(|n| n.value)
    }

    /// Actions taken so far, first to last.
    pub fn actions(&self) -> Vec<Action> {
        let mut out = Vec::with_capacity(self.steps);
        let mut cur = self.history.as_deref();
        while let Some(n) = cur {
            out.push(n.value);
            cur = n.next.as_deref();
        }
        out.reverse();
        out
    }

    fn advance(&self, action: Action) -> ParserState {
        ParserState {
            stack: self.stack.clone(),
            depth: self.depth,
            history: push(&self.history, action),
            steps: self.steps + 1,
            queue_pos: self.queue_pos,
            score: self.score,
            note: None,
        }
    }

    fn pop2_push(&self, item: StackItem) -> (Option<Arc<Node<StackItem>>>, usize) {
        let rest = self
            .stack
            .as_ref()
            .and_then(|n| n.next.as_ref())
            .and_then(|n| n.next.clone());
        (push(&rest, item), self.depth - 1)
    }
}

/// A complete action sequence and what it produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivation {
    pub sentence: Sentence,
    pub actions: Vec<Action>,
    pub result: TypedResult,
    pub score: f64,
}

/// Decodes sentences against a domain, optionally scoring with a model.
#[derive(Clone, Copy)]
pub struct Parser<'a> {
    pub domain: &'a Domain,
    pub model: Option<&'a Model>,
    /// When set, final items must be a subtype of this type.
    pub goal: Option<&'a Type>,
}

impl<'a> Parser<'a> {
    pub fn new(domain: &'a Domain) -> Self {
        Parser {
            domain,
            model: None,
            goal: None,
        }
    }

    pub fn with_model(mut self, model: &'a Model) -> Self {
        self.model = Some(model);
        self
    }

    pub fn with_goal(mut self, goal: Option<&'a Type>) -> Self {
        self.goal = goal;
        self
    }

    fn shift_matches(&self, s: &ParserState, sent: &Sentence, consumed: usize, template: usize) -> Option<TypedResult> {
        let entry = self.domain.entry(template)?;
        let at = s.queue_pos;
        let ok = match &entry.trigger {
            Trigger::Phrase(words) => {
                words.len() == consumed && sent.tokens.get(at..at + consumed) == Some(&words[..])
            }
            Trigger::Pos(tag) => {
                consumed == 1 && sent.tags().and_then(|t| t.get(at)) == Some(tag)
            }
        };
        ok.then(|| entry.template.freshen(((at as u32) + 1) << 16))
    }

    /// The successor of `s` under `a`, or `None` if `a` is not legal.
    pub fn try_step(&self, s: &ParserState, a: Action, sent: &Sentence) -> Option<ParserState> {
        let h = self.domain.hierarchy();
        let mut next = match a {
            Action::Skip => {
                if s.queue_pos >= sent.len() {
                    return None;
                }
                let mut n = s.advance(a);
                n.queue_pos += 1;
                n
            }
            Action::Shift { consumed, template } => {
                let result = self.shift_matches(s, sent, consumed, template)?;
                let mut n = s.advance(a);
                n.stack = push(&s.stack, StackItem {
                    result,
                    span: (s.queue_pos, s.queue_pos + consumed - 1),
                });
                n.depth += 1;
                n.queue_pos += consumed;
                n
            }
            Action::ReduceRight | Action::ReduceLeft | Action::Union => {
                let top = s.top(0)?;
                let second = s.top(1)?;
                let (result, note) = match a {
                    Action::ReduceRight => mr::apply_noted(&second.result, &top.result, h).ok()?,
                    Action::ReduceLeft => mr::apply_noted(&top.result, &second.result, h).ok()?,
                    _ => (mr::union(&second.result, &top.result, h).ok()?, ApplyNote::default()),
                };
                let item = StackItem {
                    result,
                    span: (second.span.0, top.span.1),
                };
                let mut n = s.advance(a);
                (n.stack, n.depth) = s.pop2_push(item);
                if note != ApplyNote::default() {
                    n.note = Some(Arc::new(note));
                }
                n
            }
        };
        if let Some(model) = self.model {
            next.score += model.score_action(s, a, sent, self.domain);
        }
        Some(next)
    }

    pub fn step(&self, s: &ParserState, a: Action, sent: &Sentence) -> Result<ParserState, ParseError> {
        self.try_step(s, a, sent)
            .ok_or_else(|| ParseError::IllegalAction(a.to_string()))
    }

    /// Candidate actions in a fixed order: reduces, union, shifts (longest
    /// trigger first, then template id), skip.
    fn candidates(&self, s: &ParserState, sent: &Sentence) -> Vec<Action> {
        let mut out = Vec::new();
        if s.depth >= 2 {
            out.extend([Action::ReduceRight, Action::ReduceLeft, Action::Union]);
        }
        if s.queue_pos < sent.len() {
            for (consumed, e) in self.domain.lookup_shifts(&sent.tokens, sent.tags(), s.queue_pos) {
                out.push(Action::Shift {
                    consumed,
                    template: e.template_id,
                });
            }
            out.push(Action::Skip);
        }
        out
    }

    pub fn legal_actions(&self, s: &ParserState, sent: &Sentence) -> Vec<Action> {
        self.candidates(s, sent)
            .into_iter()
            .filter(|&a| match a {
                Action::ReduceRight | Action::ReduceLeft | Action::Union => {
                    self.unscored().try_step(s, a, sent).is_some()
                }
                _ => true,
            })
            .collect()
    }

    /// Every legal successor, in [`Parser::legal_actions`] order.
    pub fn successors(&self, s: &ParserState, sent: &Sentence) -> Vec<(Action, ParserState)> {
        self.candidates(s, sent)
            .into_iter()
            .filter_map(|a| self.try_step(s, a, sent).map(|n| (a, n)))
            .collect()
    }

    fn unscored(&self) -> Parser<'a> {
        Parser {
            model: None,
            ..*self
        }
    }

    pub fn is_final(&self, s: &ParserState, sent: &Sentence) -> bool {
        if s.queue_pos < sent.len() || s.depth != 1 {
            return false;
        }
        let ty = &s.top(0).expect("depth is 1").result.ty;
        ty.is_base()
            && match self.goal {
                Some(goal) => is_subtype(ty, goal, self.domain.hierarchy()).unwrap_or(false),
                None => true,
            }
    }

    /// Every state along `actions`, starting with the initial state.
    pub fn replay(&self, sent: &Sentence, actions: &[Action]) -> Result<Vec<ParserState>, ParseError> {
        let mut states = vec![ParserState::initial()];
        for &a in actions {
            let next = self.step(states.last().unwrap(), a, sent)?;
            states.push(next);
        }
        Ok(states)
    }

    /// The derivation ending in `s`; `None` unless `s` is final.
    pub fn derivation(&self, s: &ParserState, sent: &Sentence) -> Option<Derivation> {
        if !self.is_final(s, sent) {
            return None;
        }
        Some(Derivation {
            sentence: sent.clone(),
            actions: s.actions(),
            result: s.top(0)?.result.clone(),
            score: s.score,
        })
    }

    /// Replays `actions` and returns the derivation if it ends in a final state.
    pub fn replay_derivation(&self, sent: &Sentence, actions: &[Action]) -> Result<Derivation, ParseError> {
        let states = self.replay(sent, actions)?;
        self.derivation(states.last().unwrap(), sent)
            .ok_or(ParseError::NoParse)
    }
}
