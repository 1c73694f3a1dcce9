//! Domain files: type hierarchy, typed constants and predicates, and the
//! phrase- or tag-triggered expression templates consulted at shift time.
//!
//! ```text
//! type st <: au
//! const texas : st
//! pred capital : st -> ct
//! lex "next to" => next_to
//! lexpos NNP => (lambda (x : st) x)
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::DomainError;
use crate::mr::{Expr, Signature, TypedResult, AND};
use crate::syntax;
use crate::types::{self, Type, TypeHierarchy, BOOL, TOP};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Trigger {
    Phrase(Vec<String>),
    Pos(String),
}

impl Trigger {
    pub fn len(&self) -> usize {
        match self {
            Trigger::Phrase(words) => words.len(),
            Trigger::Pos(_) => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct LexiconEntry {
    pub template_id: usize,
    pub trigger: Trigger,
    pub template: TypedResult,
    /// Constant and predicate names grounded by this template.
    pub atoms: Vec<Arc<str>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct LexDecl {
    trigger: Trigger,
    template: Expr,
}

#[derive(Clone, Debug)]
pub struct Domain {
    pub signature: Signature,
    consts: Vec<(Arc<str>, Type)>,
    preds: Vec<(Arc<str>, Type)>,
    lex: Vec<LexDecl>,
    entries: Vec<LexiconEntry>,
    by_first_word: HashMap<String, Vec<usize>>,
    by_tag: HashMap<String, Vec<usize>>,
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.signature.hierarchy == other.signature.hierarchy
            && self.consts == other.consts
            && self.preds == other.preds
            && self.lex == other.lex
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> DomainError {
    DomainError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Splits `name : type`.
fn parse_typed_name(line: usize, rest: &str) -> Result<(String, Type), DomainError> {
    let (name, ty) = rest
        .split_once(':')
        .ok_or_else(|| parse_err(line, "expected `<name> : <type>`"))?;
    let name = name.trim();
    if !syntax::is_identifier(name) {
        return Err(parse_err(line, format!("bad name `{}`", name)));
    }
    let ty = Type::parse(ty.trim()).map_err(|e| parse_err(line, e.to_string()))?;
    Ok((name.to_string(), ty))
}

fn parse_lex(line: usize, rest: &str) -> Result<(Trigger, String), DomainError> {
    let rest = rest.trim_start();
    let rest = rest
        .strip_prefix('"')
        .ok_or_else(|| parse_err(line, "expected a quoted phrase"))?;
    let (phrase, tail) = rest
        .split_once('"')
        .ok_or_else(|| parse_err(line, "unterminated phrase"))?;
    let words: Vec<String> = phrase.split_whitespace().map(str::to_lowercase).collect();
    if words.is_empty() {
        return Err(parse_err(line, "empty phrase"));
    }
    let mr = tail
        .trim_start()
        .strip_prefix("=>")
        .ok_or_else(|| parse_err(line, "expected `=>`"))?;
    Ok((Trigger::Phrase(words), mr.trim().to_string()))
}

fn parse_lexpos(line: usize, rest: &str) -> Result<(Trigger, String), DomainError> {
    let (tag, mr) = rest
        .split_once("=>")
        .ok_or_else(|| parse_err(line, "expected `=>`"))?;
    let tag = tag.trim();
    if tag.is_empty() || tag.contains(char::is_whitespace) {
        return Err(parse_err(line, format!("bad tag `{}`", tag)));
    }
    Ok((Trigger::Pos(tag.to_string()), mr.trim().to_string()))
}

/// Drops a `#` comment unless the `#` sits inside a quoted phrase.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn keyword<'a>(line: &'a str, kw: &str) -> Option<&'a str> {
    let rest = line.strip_prefix(kw)?;
    rest.starts_with(char::is_whitespace).then_some(rest)
}

impl Domain {
    pub fn empty() -> Domain {
        Domain::parse("").expect("empty domain is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Domain, DomainError> {
        Domain::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses a domain file. Type declarations are read first, then
    /// constants and predicates, then lexicon lines, so declarations may
    /// appear in any order.
    pub fn parse(text: &str) -> Result<Domain, DomainError> {
        let mut type_decls = Vec::new();
        let mut typed = Vec::new();
        let mut lexical = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if keyword(line, "type").is_some() {
                let (c, p) = types::parse_type_decl(line)
                    .ok_or_else(|| parse_err(line_no, "expected `type <child> <: <parent>`"))?;
                type_decls.push((line_no, c.to_string(), p.to_string()));
            } else if let Some(rest) = keyword(line, "const") {
                typed.push((line_no, false, parse_typed_name(line_no, rest)?));
            } else if let Some(rest) = keyword(line, "pred") {
                typed.push((line_no, true, parse_typed_name(line_no, rest)?));
            } else if let Some(rest) = keyword(line, "lexpos") {
                lexical.push((line_no, parse_lexpos(line_no, rest)?));
            } else if let Some(rest) = keyword(line, "lex") {
                lexical.push((line_no, parse_lex(line_no, rest)?));
            } else {
                return Err(parse_err(line_no, format!("unrecognized line `{}`", line)));
            }
        }

        let hierarchy = TypeHierarchy::from_decls(type_decls)?;
        let mut signature = Signature::new(hierarchy);
        let mut consts = Vec::new();
        let mut preds = Vec::new();
        for (line, is_pred, (name, ty)) in typed {
            if let Err(unknown) = signature.check_type(&ty) {
                return Err(DomainError::UnknownType { line, name: unknown });
            }
            if !is_pred && !ty.is_ground() {
                return Err(parse_err(line, "constants cannot be polymorphic"));
            }
            let name: Arc<str> = name.as_str().into();
            if name.as_ref() == AND {
                return Err(parse_err(line, "`and` is reserved"));
            }
            let table = if is_pred {
                &mut signature.predicates
            } else {
                &mut signature.constants
            };
            let slot = table.entry(name.clone()).or_default();
            if slot.contains(&ty) {
                return Err(DomainError::Redefinition { line, name: name.to_string(), ty });
            }
            slot.push(ty.clone());
            if is_pred {
                preds.push((name, ty));
            } else {
                consts.push((name, ty));
            }
        }

        let mut lex = Vec::new();
        let mut entries = Vec::new();
        for (line, (trigger, mr)) in lexical {
            let readings = signature
                .parse_readings(&mr)
                .map_err(|error| DomainError::Template { line, error })?;
            lex.push(LexDecl {
                trigger: trigger.clone(),
                template: readings[0].expr.clone(),
            });
            for template in readings {
                let atoms = template.expr.atoms();
                entries.push(LexiconEntry {
                    template_id: entries.len(),
                    trigger: trigger.clone(),
                    template,
                    atoms,
                });
            }
        }

        let mut by_first_word: HashMap<String, Vec<usize>> = HashMap::new();
        let mut by_tag: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            match &e.trigger {
                Trigger::Phrase(words) => by_first_word.entry(words[0].clone()).or_default().push(i),
                Trigger::Pos(tag) => by_tag.entry(tag.clone()).or_default().push(i),
            }
        }

        Ok(Domain {
            signature,
            consts,
            preds,
            lex,
            entries,
            by_first_word,
            by_tag,
        })
    }

    pub fn hierarchy(&self) -> &TypeHierarchy {
        &self.signature.hierarchy
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn entry(&self, template_id: usize) -> Option<&LexiconEntry> {
        self.entries.get(template_id)
    }

    /// Entries whose trigger matches a prefix of `tokens[at..]` (or the tag at
    /// `at`), ordered by tokens consumed (longest first), then template id.
    pub fn lookup_shifts(
        &self,
        tokens: &[String],
        pos_tags: Option<&[String]>,
        at: usize,
    ) -> Vec<(usize, &LexiconEntry)> {
        let mut out = Vec::new();
        let Some(head) = tokens.get(at) else {
            return out;
        };
        if let Some(ids) = self.by_first_word.get(head) {
            for &i in ids {
                let e = &self.entries[i];
                if let Trigger::Phrase(words) = &e.trigger {
                    if tokens[at..].starts_with(words) {
                        out.push((words.len(), e));
                    }
                }
            }
        }
        if let Some(tag) = pos_tags.and_then(|t| t.get(at)) {
            if let Some(ids) = self.by_tag.get(tag) {
                out.extend(ids.iter().map(|&i| (1, &self.entries[i])));
            }
        }
        out.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.template_id.cmp(&b.1.template_id)));
        out
    }

    /// Writes the domain back in file syntax.
    pub fn save(&self) -> String {
        let mut out = String::new();
        for line in self.hierarchy().to_lines() {
            out.push_str(&line);
            out.push('\n');
        }
        for (name, ty) in &self.consts {
            let _ = writeln!(out, "const {} : {}", name, ty);
        }
        for (name, ty) in &self.preds {
            let _ = writeln!(out, "pred {} : {}", name, ty);
        }
        for decl in &self.lex {
            match &decl.trigger {
                Trigger::Phrase(words) => {
                    let _ = writeln!(out, "lex \"{}\" => {}", words.join(" "), decl.template);
                }
                Trigger::Pos(tag) => {
                    let _ = writeln!(out, "lexpos {} => {}", tag, decl.template);
                }
            }
        }
        out
    }

    /// The same domain with every domain base type (including `top`) and
    /// every type variable collapsed to a single entity type `e`, except the
    /// types named in `keep`, which stay as direct children of `top`.
    pub fn simple_types(&self, keep: &[&str]) -> Result<Domain, DomainError> {
        let kept: BTreeSet<&str> = keep
            .iter()
            .copied()
            .filter(|k| *k != TOP && *k != BOOL && self.hierarchy().contains(k))
            .collect();
        let collapse = |t: &Type| {
            t.map_leaves(&|leaf| match leaf {
                Type::Base(n) if &**n == BOOL || kept.contains(&**n) => leaf.clone(),
                _ => Type::base("e"),
            })
        };
        let mut out = String::from("type e <: top\n");
        for k in &kept {
            let _ = writeln!(out, "type {} <: top", k);
        }
        let mut seen = BTreeSet::new();
        for (kw, decls) in [("const", &self.consts), ("pred", &self.preds)] {
            for (name, ty) in decls.iter() {
                let line = format!("{} {} : {}", kw, name, collapse(ty));
                if seen.insert(line.clone()) {
                    out.push_str(&line);
                    out.push('\n');
                }
            }
        }
        let mut seen_lex = BTreeSet::new();
        for decl in &self.lex {
            let template = collapse_expr(&decl.template, &collapse);
            let line = match &decl.trigger {
                Trigger::Phrase(words) => format!("lex \"{}\" => {}", words.join(" "), template),
                Trigger::Pos(tag) => format!("lexpos {} => {}", tag, template),
            };
            if seen_lex.insert(line.clone()) {
                out.push_str(&line);
                out.push('\n');
            }
        }
        Domain::parse(&out)
    }

    /// Distinct surface phrases, for generating synthetic inputs.
    pub fn vocabulary(&self) -> Vec<String> {
        let words: BTreeSet<String> = self
            .entries
            .iter()
            .filter_map(|e| match &e.trigger {
                Trigger::Phrase(w) => Some(w.join(" ")),
                Trigger::Pos(_) => None,
            })
            .collect();
        words.into_iter().collect()
    }

    /// Base-type names by their declared parent, for inspection.
    pub fn children(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (c, p) in self.hierarchy().declarations() {
            out.entry(p.to_string()).or_default().push(c.to_string());
        }
        out
    }
}

fn collapse_expr(e: &Expr, f: &impl Fn(&Type) -> Type) -> String {
    // Only the printed form is needed: binder types are the sole types
    // that appear in template text.
    fn go(e: &Expr, f: &impl Fn(&Type) -> Type, out: &mut String) {
        match e {
            Expr::Lam { index, ty, body } => {
                let _ = write!(out, "(lambda (x{} : {}) ", index, f(ty));
                go(body, f, out);
                out.push(')');
            }
            Expr::App { .. } => {
                let (head, args) = e.spine();
                out.push('(');
                go(head, f, out);
                for a in args {
                    out.push(' ');
                    go(a, f, out);
                }
                out.push(')');
            }
            other => {
                let _ = write!(out, "{}", other);
            }
        }
    }
    let mut out = String::new();
    go(e, f, &mut out);
    out
}
