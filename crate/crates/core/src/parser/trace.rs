use std::fmt;

use super::{Action, Parser, ParserState};
use crate::data::Sentence;
use crate::error::ParseError;

/// One line of a step-by-step parse table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub step: usize,
    pub action: String,
    /// Stack items bottom to top, `expr:type`.
    pub stack: Vec<String>,
    /// Next unread token, if any.
    pub queue_head: Option<String>,
    pub note: String,
}

impl fmt::Display for TraceRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let stack = if self.stack.is_empty() {
            "[]".to_string()
        } else {
            self.stack.join("  ")
        };
        write!(
            f,
            "{}\t{}\t{}\t{}",
            self.step,
            self.action,
            stack,
            self.queue_head.as_deref().unwrap_or("-")
        )?;
        if !self.note.is_empty() {
            write!(f, "\t{}", self.note)?;
        }
        Ok(())
    }
}

impl Parser<'_> {
    fn trace_action_name(&self, before: &ParserState, a: Action, sent: &Sentence) -> String {
        match a {
            Action::Skip => "skip".into(),
            Action::Shift { consumed, .. } => {
                let end = (before.queue_pos + consumed).min(sent.len());
                format!("sh_{}", sent.tokens[before.queue_pos..end].join("_"))
            }
            Action::ReduceRight => "re>".into(),
            Action::ReduceLeft => "re<".into(),
            Action::Union => "union".into(),
        }
    }

    /// Replays `actions`, describing the state after each one.
    pub fn trace(&self, sent: &Sentence, actions: &[Action]) -> Result<Vec<TraceRow>, ParseError> {
        let states = self.replay(sent, actions)?;
        Ok(states
            .windows(2)
            .zip(actions)
            .enumerate()
            .map(|(i, (pair, &a))| {
                let after = &pair[1];
                TraceRow {
                    step: i + 1,
                    action: self.trace_action_name(&pair[0], a, sent),
                    stack: after.stack().iter().map(|s| s.result.to_string()).collect(),
                    queue_head: sent.word(after.queue_pos).map(String::from),
                    note: after.note.as_ref().map(|n| n.to_string()).unwrap_or_default(),
                }
            })
            .collect())
    }
}
