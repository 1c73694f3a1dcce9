//! Sparse features over (state, action) pairs and the linear model.
//!
//! Atomic values describe the top three stack items (printed type, first and
//! last word of the span they cover), the next three queue words, and the
//! action (its name, and for shifts the grounded names and template id).
//! Templates conjoin a few atomic classes into one feature string such as
//! `t17:S1T=st->t|Q0=by|ACT=reR`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::data::Sentence;
use crate::error::ModelError;
use crate::lexicon::Domain;
use crate::parser::{Action, Parser, ParserState};

pub const NONE: &str = "NONE";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomClass {
    S0T,
    S1T,
    S2T,
    S0L,
    S0R,
    S1L,
    S1R,
    S2L,
    S2R,
    Q0,
    Q1,
    Q2,
    P,
    TID,
    ACT,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetGroup {
    Type,
    Word,
    Lexical,
    Action,
}

impl AtomClass {
    pub const ALL: [AtomClass; 15] = [
        AtomClass::S0T,
        AtomClass::S1T,
        AtomClass::S2T,
        AtomClass::S0L,
        AtomClass::S0R,
        AtomClass::S1L,
        AtomClass::S1R,
        AtomClass::S2L,
        AtomClass::S2R,
        AtomClass::Q0,
        AtomClass::Q1,
        AtomClass::Q2,
        AtomClass::P,
        AtomClass::TID,
        AtomClass::ACT,
    ];

    pub fn name(self) -> &'static str {
        use AtomClass::*;
        match self {
            S0T => "S0T",
            S1T => "S1T",
            S2T => "S2T",
            S0L => "S0L",
            S0R => "S0R",
            S1L => "S1L",
            S1R => "S1R",
            S2L => "S2L",
            S2R => "S2R",
            Q0 => "Q0",
            Q1 => "Q1",
            Q2 => "Q2",
            P => "P",
            TID => "TID",
            ACT => "ACT",
        }
    }

    pub fn group(self) -> BudgetGroup {
        use AtomClass::*;
        match self {
            S0T | S1T | S2T => BudgetGroup::Type,
            P | TID => BudgetGroup::Lexical,
            ACT => BudgetGroup::Action,
            _ => BudgetGroup::Word,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for AtomClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AtomClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown feature class `{}`", s))
    }
}

/// Maximum number of classes from each group in one template.
pub const BUDGET_TYPES: usize = 3;
pub const BUDGET_WORDS: usize = 2;
pub const BUDGET_LEXICAL: usize = 2;

/// Atomic feature values of one (state, action) pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomicFeatures {
    values: [String; 15],
}

impl AtomicFeatures {
    pub fn new(s: &ParserState, a: Action, sent: &Sentence, domain: &Domain) -> AtomicFeatures {
        let mut values: [String; 15] = Default::default();
        let word = |i: usize| sent.word(i).unwrap_or(NONE).to_string();
        for k in 0..3 {
            let (t, l, r) = match s.top(k) {
                Some(item) => (
                    item.result.ty.to_string(),
                    word(item.span.0),
                    word(item.span.1),
                ),
                None => (NONE.into(), NONE.into(), NONE.into()),
            };
            values[k] = t;
            values[3 + 2 * k] = l;
            values[4 + 2 * k] = r;
            values[9 + k] = word(s.queue_pos + k);
        }
        let (p, tid) = match a {
            Action::Shift { template, .. } => match domain.entry(template) {
                Some(e) => {
                    let names: Vec<&str> = e.atoms.iter().map(|n| &**n).collect();
                    (names.join("+"), template.to_string())
                }
                None => (NONE.into(), template.to_string()),
            },
            _ => (NONE.into(), NONE.into()),
        };
        values[AtomClass::P.index()] = p;
        values[AtomClass::TID.index()] = tid;
        values[AtomClass::ACT.index()] = a.name().to_string();
        AtomicFeatures { values }
    }

    pub fn get(&self, c: AtomClass) -> &str {
        &self.values[c.index()]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureTemplate {
    pub name: String,
    pub classes: Vec<AtomClass>,
}

impl FeatureTemplate {
    pub fn render(&self, atoms: &AtomicFeatures) -> String {
        let mut out = String::with_capacity(32);
        self.render_into(atoms, &mut out);
        out
    }

    /// Appends the rendered feature to `out`.
    pub fn render_into(&self, atoms: &AtomicFeatures, out: &mut String) {
        out.push_str(&self.name);
        out.push(':');
        for (i, c) in self.classes.iter().enumerate() {
            if i > 0 {
                out.push('|');
            }
            out.push_str(c.name());
            out.push('=');
            out.push_str(atoms.get(*c));
        }
    }

    fn within_budget(&self) -> bool {
        let count = |g| self.classes.iter().filter(|c| c.group() == g).count();
        count(BudgetGroup::Type) <= BUDGET_TYPES
            && count(BudgetGroup::Word) <= BUDGET_WORDS
            && count(BudgetGroup::Lexical) <= BUDGET_LEXICAL
            && count(BudgetGroup::Action) <= 1
    }
}

impl fmt::Display for FeatureTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let classes: Vec<&str> = self.classes.iter().map(|c| c.name()).collect();
        write!(f, "{}: {}", self.name, classes.join(","))
    }
}

const DEFAULT_COMBINATIONS: &str = "\
ACT
S0T ACT
S1T ACT
S2T ACT
S0L ACT
S0R ACT
S1L ACT
S1R ACT
S2L ACT
S2R ACT
Q0 ACT
Q1 ACT
Q2 ACT
P ACT
TID ACT
S0T S1T ACT
S0T S2T ACT
S1T S2T ACT
S0T S1T S2T ACT
S0T S0L ACT
S0T S0R ACT
S1T S1L ACT
S1T S1R ACT
S2T S2L ACT
S2T S2R ACT
S0T Q0 ACT
S0T Q1 ACT
S0T Q2 ACT
S1T Q0 ACT
S1T Q1 ACT
S1T Q2 ACT
S2T Q0 ACT
S2T Q1 ACT
S2T Q2 ACT
S0T S1T Q0 ACT
S0T S1T Q1 ACT
S0T S1T S0L ACT
S0T S1T S0R ACT
S0T S1T S1L ACT
S0T S1T S1R ACT
Q0 Q1 ACT
Q1 Q2 ACT
S0R Q0 ACT
S0L S0R ACT
S1L S1R ACT
S2L S2R ACT
S1R S0L ACT
S0L Q0 ACT
S1R Q0 ACT
S0R Q1 ACT
P Q0 ACT
P Q1 ACT
P Q2 ACT
P S0L ACT
P S0R ACT
P S1L ACT
P S1R ACT
TID Q0 ACT
TID Q1 ACT
TID Q2 ACT
TID S0L ACT
TID S0R ACT
TID S1L ACT
TID S1R ACT
P S0T ACT
P S1T ACT
P S2T ACT
TID S0T ACT
TID S1T ACT
TID S2T ACT
P TID ACT
P TID S0T ACT
P TID S1T ACT
P TID Q0 ACT
P TID Q1 ACT
S0T S1T S2T Q0 ACT
S0T Q0 Q1 ACT
S1T Q0 Q1 ACT
S0T S0L S0R ACT
S1T S1L S1R ACT
S0T S0R Q0 ACT
S1T S1R Q0 ACT
S0T S1T P ACT
S0T S1T TID ACT
";

/// An ordered list of templates; numbering is the list order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureTemplateSet {
    templates: Vec<FeatureTemplate>,
}

impl Default for FeatureTemplateSet {
    fn default() -> Self {
        let templates = DEFAULT_COMBINATIONS
            .lines()
            .enumerate()
            .map(|(i, line)| FeatureTemplate {
                name: format!("t{:02}", i),
                classes: line
                    .split_whitespace()
                    .map(|c| c.parse().expect("default classes are valid"))
                    .collect(),
            })
            .collect();
        FeatureTemplateSet { templates }
    }
}

impl FeatureTemplateSet {
    pub fn new(templates: Vec<FeatureTemplate>) -> Result<Self, ModelError> {
        let mut seen = std::collections::HashSet::new();
        for (i, t) in templates.iter().enumerate() {
            let bad = |msg: String| ModelError::Template { line: i + 1, msg };
            if t.classes.is_empty() {
                return Err(bad(format!("template `{}` has no classes", t.name)));
            }
            if !t.within_budget() {
                return Err(bad(format!("template `{}` exceeds the class budget", t.name)));
            }
            if !seen.insert(&t.name) {
                return Err(bad(format!("duplicate template name `{}`", t.name)));
            }
        }
        Ok(FeatureTemplateSet { templates })
    }

    /// Reads `name: CLASS[,CLASS]*` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut templates = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| ModelError::Template { line: i + 1, msg };
            let (name, classes) = line
                .split_once(':')
                .ok_or_else(|| bad("expected `name: CLASS[,CLASS]*`".into()))?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(bad(format!("bad template name `{}`", name)));
            }
            let classes = classes
                .split(',')
                .map(|c| c.trim().parse::<AtomClass>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(bad)?;
            templates.push(FeatureTemplate {
                name: name.to_string(),
                classes,
            });
        }
        Self::new(templates)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.templates {
            let _ = writeln!(out, "{}", t);
        }
        out
    }

    pub fn templates(&self) -> &[FeatureTemplate] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// One feature string per template.
    pub fn render(&self, atoms: &AtomicFeatures) -> impl Iterator<Item = String> + '_ {
        let atoms = atoms.clone();
        self.templates.iter().map(move |t| t.render(&atoms))
    }
}

/// Sparse feature counts with no zero entries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureVector {
    counts: BTreeMap<String, i64>,
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, feature: String, count: i64) {
        if count == 0 {
            return;
        }
        let entry = self.counts.entry(feature);
        match entry {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += count;
                if *o.get() == 0 {
                    o.remove();
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(count);
            }
        }
    }

    pub fn add_all(&mut self, other: &FeatureVector, sign: i64) {
        for (f, &c) in &other.counts {
            self.add(f.clone(), c * sign);
        }
    }

    /// `self - other`.
    pub fn minus(&self, other: &FeatureVector) -> FeatureVector {
        let mut out = self.clone();
        out.add_all(other, -1);
        out
    }

    pub fn get(&self, feature: &str) -> i64 {
        self.counts.get(feature).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, i64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn norm_sq(&self) -> f64 {
        self.counts.values().map(|&c| (c * c) as f64).sum()
    }
}

impl FromIterator<String> for FeatureVector {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        let mut v = FeatureVector::new();
        for f in iter {
            v.add(f, 1);
        }
        v
    }
}

/// Sparse weights; absent features weigh zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightVector {
    weights: HashMap<String, f64>,
}

impl WeightVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, feature: &str) -> f64 {
        self.weights.get(feature).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, feature: &str, w: f64) {
        if w == 0.0 {
            self.weights.remove(feature);
        } else {
            self.weights.insert(feature.to_string(), w);
        }
    }

    /// `self += scale * v`.
    pub fn add(&mut self, v: &FeatureVector, scale: f64) {
        for (f, c) in v.iter() {
            let w = self.get(f) + scale * c as f64;
            self.set(f, w);
        }
    }

    pub fn dot(&self, v: &FeatureVector) -> f64 {
        v.iter().map(|(f, c)| self.get(f) * c as f64).sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Nonzero weights sorted by feature.
    pub fn sorted(&self) -> Vec<(&str, f64)> {
        let mut out: Vec<(&str, f64)> = self.weights.iter().map(|(k, &v)| (k.as_str(), v)).collect();
        out.sort_by(|a, b| a.0.cmp(b.0));
        out
    }
}

/// Feature templates plus weights, with the configuration that produced them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Model {
    pub templates: FeatureTemplateSet,
    pub weights: WeightVector,
    pub config: Vec<(String, String)>,
}

const MODEL_HEADER: &str = "typeshift-model v1";

impl Model {
    pub fn new(templates: FeatureTemplateSet) -> Model {
        Model {
            templates,
            ..Default::default()
        }
    }

    pub fn score_action(&self, s: &ParserState, a: Action, sent: &Sentence, domain: &Domain) -> f64 {
        if self.weights.is_empty() {
            return 0.0;
        }
        let atoms = AtomicFeatures::new(s, a, sent, domain);
        let mut buf = String::with_capacity(64);
        self.templates
            .templates()
            .iter()
            .map(|t| {
                buf.clear();
                t.render_into(&atoms, &mut buf);
                self.weights.get(&buf)
            })
            .sum()
    }

    pub fn extract(&self, s: &ParserState, a: Action, sent: &Sentence, domain: &Domain) -> FeatureVector {
        self.templates
            .render(&AtomicFeatures::new(s, a, sent, domain))
            .collect()
    }

    /// Features of `actions` replayed from the initial state.
    pub fn derivation_features(&self, parser: &Parser, sent: &Sentence, actions: &[Action]) -> FeatureVector {
        let states = parser.replay(sent, actions).expect("derivation replays");
        let mut out = FeatureVector::new();
        for (s, &a) in states.iter().zip(actions) {
            out.add_all(&self.extract(s, a, sent, parser.domain), 1);
        }
        out
    }

    pub fn save(&self) -> String {
        let mut out = String::new();
        out.push_str(MODEL_HEADER);
        out.push('\n');
        for (k, v) in &self.config {
            let _ = writeln!(out, "# {}={}", k, v);
        }
        for t in self.templates.templates() {
            let _ = writeln!(out, "% {}", t);
        }
        for (f, w) in self.weights.sorted() {
            let _ = writeln!(out, "{}\t{}", f, w);
        }
        out
    }

    pub fn save_to(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.save())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Model, ModelError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, MODEL_HEADER)) => {}
            _ => {
                return Err(ModelError::Format {
                    line: 1,
                    msg: format!("expected header `{}`", MODEL_HEADER),
                })
            }
        }
        let mut config = Vec::new();
        let mut template_text = String::new();
        let mut weights = WeightVector::new();
        for (i, line) in lines {
            let bad = |msg: &str| ModelError::Format {
                line: i + 1,
                msg: msg.to_string(),
            };
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest.split_once('=').ok_or_else(|| bad("expected `# key=value`"))?;
                config.push((k.to_string(), v.to_string()));
            } else if let Some(rest) = line.strip_prefix("% ") {
                template_text.push_str(rest);
                template_text.push('\n');
            } else if !line.is_empty() {
                let (f, w) = line.rsplit_once('\t').ok_or_else(|| bad("expected `feature<TAB>weight`"))?;
                let w: f64 = w.parse().map_err(|_| bad("bad weight"))?;
                weights.set(f, w);
            }
        }
        let templates = if template_text.is_empty() {
            FeatureTemplateSet::default()
        } else {
            FeatureTemplateSet::parse(&template_text)?
        };
        Ok(Model {
            templates,
            weights,
            config,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model, ModelError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::tests::{geo, running_example};

    #[test]
    fn default_set_has_84_budgeted_templates() {
        let t = FeatureTemplateSet::default();
        assert_eq!(t.len(), 84);
        assert!(t.templates().iter().all(|x| x.within_budget()));
        assert!(t.templates().iter().all(|x| x.classes.contains(&AtomClass::ACT)));
        let mut combos: Vec<_> = t.templates().iter().map(|x| x.classes.clone()).collect();
        combos.sort();
        combos.dedup();
        assert_eq!(combos.len(), 84);
        assert_eq!(FeatureTemplateSet::parse(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn template_file_errors() {
        assert!(FeatureTemplateSet::parse("a: S0T,S1T,S2T,S0L,S0R,S1L").is_err());
        assert!(FeatureTemplateSet::parse("a: S0T,S1T,S2T,Q0").is_ok());
        assert!(FeatureTemplateSet::parse("a: ZZ").is_err());
        assert!(FeatureTemplateSet::parse("a: ACT\na: Q0").is_err());
        assert!(FeatureTemplateSet::parse("no colon").is_err());
    }

    #[test]
    fn atomic_values_after_step_8() {
        let d = geo();
        let (sent, actions) = running_example(&d);
        let states = Parser::new(&d).replay(&sent, &actions).unwrap();
        let a = AtomicFeatures::new(&states[8], Action::ReduceRight, &sent, &d);
        assert_eq!(a.get(AtomClass::S0T), "st->t");
        assert_eq!(a.get(AtomClass::S1T), "('a->t)->('a->i)->'a");
        assert_eq!(a.get(AtomClass::S2T), "st->ct");
        assert_eq!(a.get(AtomClass::Q0), "by");
        assert_eq!(a.get(AtomClass::S0L), "state");
        assert_eq!(a.get(AtomClass::ACT), "reR");
        assert_eq!(a.get(AtomClass::P), NONE);

        let init = AtomicFeatures::new(&states[0], Action::Skip, &sent, &d);
        for c in [AtomClass::S0T, AtomClass::S1L, AtomClass::S2R, AtomClass::TID] {
            assert_eq!(init.get(c), NONE);
        }
        assert_eq!(init.get(AtomClass::Q0), "what");

        let sh = actions[6];
        let a = AtomicFeatures::new(&states[6], sh, &sent, &d);
        let Action::Shift { template, .. } = sh else { unreachable!() };
        assert_eq!(a.get(AtomClass::TID), template.to_string());
        assert_eq!(a.get(AtomClass::P), "argmax");
    }

    #[test]
    fn extract_gives_one_string_per_template() {
        let d = geo();
        let (sent, actions) = running_example(&d);
        let m = Model::default();
        let states = Parser::new(&d).replay(&sent, &actions).unwrap();
        let v = m.extract(&states[8], Action::ReduceRight, &sent, &d);
        assert_eq!(v.len(), 84);
        assert!(v.iter().any(|(f, _)| f == "t00:ACT=reR"));
        assert_eq!(v, m.extract(&states[8], Action::ReduceRight, &sent, &d));
        let full = m.derivation_features(&Parser::new(&d), &sent, &actions);
        assert!(full.minus(&full).is_empty());
    }

    #[test]
    fn scoring_arithmetic() {
        let mut v = FeatureVector::new();
        v.add("f".into(), 2);
        let mut w = WeightVector::new();
        assert_eq!(w.dot(&v), 0.0);
        w.set("f", 0.5);
        assert_eq!(w.dot(&v), 1.0);
        v.add("f".into(), -2);
        assert!(v.is_empty());
    }

    #[test]
    fn incremental_score_equals_vector_score() {
        let d = geo();
        let (sent, actions) = running_example(&d);
        let mut m = Model::default();
        let p0 = Parser::new(&d);
        let phi = m.derivation_features(&p0, &sent, &actions);
        for (i, (f, _)) in phi.iter().enumerate() {
            m.weights.set(f, (i % 7) as f64 - 3.0);
        }
        let p = Parser::new(&d).with_model(&m);
        let last = p.replay(&sent, &actions).unwrap().pop().unwrap();
        assert_eq!(last.score, m.weights.dot(&phi));
    }

    #[test]
    fn model_file_round_trip() {
        let mut m = Model::default();
        m.config.push(("seed".into(), "7".into()));
        m.weights.set("t00:ACT=sh", 1.5);
        m.weights.set("t13:P=capital|ACT=sh", -0.1);
        m.weights.set("t01:S0T=st->t|ACT=reR", 1e-17);
        let text = m.save();
        let back = Model::parse(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.save(), text);
        assert!(Model::parse("nope").is_err());
    }
}
