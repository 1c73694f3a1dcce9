//! Base-type hierarchies, curried function types and type-variable bindings.
//!
//! Subtyping on base types is the reflexive-transitive closure of a tree
//! hierarchy rooted at `top`; the boolean type `t` is a separate root with no
//! descendants. Function types are contravariant in their input and covariant
//! in their output. Type variables (`'a`) are bound by [`match_argument`] to
//! the exact type an argument demands at their first constrained occurrence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{HierarchyError, TypeError};
use crate::syntax::{self, Sexp};

pub const TOP: &str = "top";
pub const BOOL: &str = "t";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeVar {
    pub name: Arc<str>,
    /// Distinguishes copies of the same variable taken from different
    /// lexicon entries; never printed.
    pub stamp: u32,
}

impl TypeVar {
    pub fn new(name: &str) -> Self {
        TypeVar {
            name: name.into(),
            stamp: 0,
        }
    }
}

impl fmt::Display for TypeVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "'{}", self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Base(Arc<str>),
    Arrow(Arc<Type>, Arc<Type>),
    Var(TypeVar),
}

impl Type {
    pub fn base(name: &str) -> Type {
        Type::Base(name.into())
    }

    pub fn var(name: &str) -> Type {
        Type::Var(TypeVar::new(name))
    }

    pub fn arrow(input: Type, output: Type) -> Type {
        Type::Arrow(Arc::new(input), Arc::new(output))
    }

    pub fn boolean() -> Type {
        Type::base(BOOL)
    }

    /// Parses the textual syntax: `st`, `'a`, `(st -> i) -> st`.
    pub fn parse(text: &str) -> Result<Type, TypeError> {
        let items = syntax::read_all(text)?;
        Type::from_sexps(&items)
    }

    /// Builds a type from already-read s-expression items, splitting on
    /// top-level `->` atoms (right-associative).
    pub fn from_sexps(items: &[Sexp]) -> Result<Type, TypeError> {
        let malformed = || {
            let text: Vec<String> = items.iter().map(|s| s.to_string()).collect();
            TypeError::Malformed(text.join(" "))
        };
        let mut segments: Vec<&[Sexp]> = Vec::new();
        let mut start = 0;
        for (i, item) in items.iter().enumerate() {
            if item.as_atom() == Some("->") {
                segments.push(&items[start..i]);
                start = i + 1;
            }
        }
        segments.push(&items[start..]);
        let mut parts = Vec::with_capacity(segments.len());
        for seg in segments {
            if seg.len() != 1 {
                return Err(malformed());
            }
            let part = match &seg[0] {
                Sexp::List(inner) => Type::from_sexps(inner)?,
                Sexp::Atom(a) => {
                    if let Some(v) = a.strip_prefix('\'') {
                        if !syntax::is_identifier(v) {
                            return Err(malformed());
                        }
                        Type::var(v)
                    } else if syntax::is_identifier(a) {
                        Type::base(a)
                    } else {
                        return Err(malformed());
                    }
                }
            };
            parts.push(part);
        }
        let mut ty = parts.pop().ok_or_else(malformed)?;
        while let Some(input) = parts.pop() {
            ty = Type::arrow(input, ty);
        }
        Ok(ty)
    }

    pub fn is_arrow(&self) -> bool {
        matches!(self, Type::Arrow(..))
    }

    pub fn is_base(&self) -> bool {
        matches!(self, Type::Base(_))
    }

    pub fn base_name(&self) -> Option<&str> {
        match self {
            Type::Base(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_arrow(&self) -> Option<(&Type, &Type)> {
        match self {
            Type::Arrow(i, o) => Some((i, o)),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Type::Base(_) => true,
            Type::Var(_) => false,
            Type::Arrow(i, o) => i.is_ground() && o.is_ground(),
        }
    }

    pub fn contains_var(&self, v: &TypeVar) -> bool {
        match self {
            Type::Base(_) => false,
            Type::Var(w) => w == v,
            Type::Arrow(i, o) => i.contains_var(v) || o.contains_var(v),
        }
    }

    pub fn first_var(&self) -> Option<&TypeVar> {
        match self {
            Type::Base(_) => None,
            Type::Var(v) => Some(v),
            Type::Arrow(i, o) => i.first_var().or_else(|| o.first_var()),
        }
    }

    /// Re-stamps every type variable so it cannot collide with variables
    /// coming from other lexicon entries.
    pub fn freshen(&self, stamp: u32) -> Type {
        match self {
            Type::Base(_) => self.clone(),
            Type::Var(v) => Type::Var(TypeVar {
                name: v.name.clone(),
                stamp,
            }),
            Type::Arrow(i, o) => Type::arrow(i.freshen(stamp), o.freshen(stamp)),
        }
    }

    /// Base type names mentioned, in first-occurrence order.
    pub fn base_names(&self, out: &mut Vec<Arc<str>>) {
        match self {
            Type::Base(n) => {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
            Type::Var(_) => {}
            Type::Arrow(i, o) => {
                i.base_names(out);
                o.base_names(out);
            }
        }
    }

    /// Replaces base types and type variables through `f`.
    pub fn map_leaves(&self, f: &impl Fn(&Type) -> Type) -> Type {
        match self {
            Type::Arrow(i, o) => Type::arrow(i.map_leaves(f), o.map_leaves(f)),
            leaf => f(leaf),
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Base(n) => f.write_str(n),
            Type::Var(v) => write!(f, "{}", v),
            Type::Arrow(i, o) => {
                if i.is_arrow() {
                    write!(f, "({})->{}", i, o)
                } else {
                    write!(f, "{}->{}", i, o)
                }
            }
        }
    }
}

/// A forest of exactly two trees: the domain tree rooted at `top` and the
/// lone boolean root `t`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeHierarchy {
    parent: BTreeMap<Arc<str>, Arc<str>>,
    order: Vec<Arc<str>>,
}

impl TypeHierarchy {
    /// Roots only.
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads `type <child> <: <parent>` lines; blank lines and `#` comments
    /// are ignored. Parents may be declared after their children.
    pub fn from_lines<I, S>(lines: I) -> Result<Self, HierarchyError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut decls = Vec::new();
        for (idx, raw) in lines.into_iter().enumerate() {
            let line = strip_comment(raw.as_ref()).trim();
            if line.is_empty() {
                continue;
            }
            let (child, parent) =
                parse_type_decl(line).ok_or_else(|| HierarchyError::BadLine {
                    line: idx + 1,
                    text: line.to_string(),
                })?;
            decls.push((idx + 1, child.to_string(), parent.to_string()));
        }
        Self::from_decls(decls)
    }

    /// Builds from `(line, child, parent)` triples.
    pub fn from_decls(decls: Vec<(usize, String, String)>) -> Result<Self, HierarchyError> {
        let mut h = TypeHierarchy::new();
        let mut lines = BTreeMap::new();
        for (line, child, parent) in &decls {
            if child == TOP || child == BOOL {
                return Err(HierarchyError::RootParent {
                    line: *line,
                    name: child.clone(),
                });
            }
            if parent == BOOL {
                return Err(HierarchyError::BooleanChild {
                    line: *line,
                    child: child.clone(),
                });
            }
            let key: Arc<str> = child.as_str().into();
            if h.parent.contains_key(&key) {
                return Err(HierarchyError::Duplicate {
                    line: *line,
                    name: child.clone(),
                });
            }
            h.parent.insert(key.clone(), parent.as_str().into());
            h.order.push(key);
            lines.insert(child.clone(), *line);
        }
        for (line, child, parent) in &decls {
            if parent != TOP && !h.parent.contains_key(parent.as_str()) {
                return Err(HierarchyError::UndeclaredParent {
                    line: *line,
                    child: child.clone(),
                    parent: parent.clone(),
                });
            }
        }
        for name in &h.order {
            let mut cur: &str = name;
            let mut steps = 0;
            while let Some(p) = h.parent.get(cur) {
                cur = p;
                steps += 1;
                if steps > h.order.len() {
                    return Err(HierarchyError::Cycle(name.to_string()));
                }
            }
        }
        Ok(h)
    }

    pub fn contains(&self, name: &str) -> bool {
        name == TOP || name == BOOL || self.parent.contains_key(name)
    }

    pub fn parent(&self, name: &str) -> Option<&str> {
        self.parent.get(name).map(|p| &**p)
    }

    /// All base-type names: the two roots, then declared types in order.
    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        [TOP, BOOL]
            .into_iter()
            .chain(self.order.iter().map(|n| &**n))
    }

    /// Declared `(child, parent)` pairs in declaration order.
    pub fn declarations(&self) -> impl Iterator<Item = (&str, &str)> {
        self.order.iter().map(|c| (&**c, &*self.parent[c]))
    }

    pub fn len(&self) -> usize {
        self.order.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn depth(&self, name: &str) -> usize {
        let mut d = 0;
        let mut cur = name;
        while let Some(p) = self.parent(cur) {
            d += 1;
            cur = p;
        }
        d
    }

    /// Reflexive-transitive closure of the parent relation.
    pub fn is_base_subtype(&self, sub: &str, sup: &str) -> bool {
        let mut cur = sub;
        loop {
            if cur == sup {
                return true;
            }
            match self.parent(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    /// Declarations listed parents-first, as written by the domain saver.
    pub fn to_lines(&self) -> Vec<String> {
        self.declarations()
            .map(|(c, p)| format!("type {} <: {}", c, p))
            .collect()
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// `type <child> <: <parent>` with the leading keyword already present.
pub(crate) fn parse_type_decl(line: &str) -> Option<(&str, &str)> {
    let rest = line.strip_prefix("type")?;
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    let (child, parent) = rest.split_once("<:")?;
    let (child, parent) = (child.trim(), parent.trim());
    if syntax::is_identifier(child) && syntax::is_identifier(parent) {
        Some((child, parent))
    } else {
        None
    }
}

/// Assignments from type variables to types.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Binding {
    map: BTreeMap<TypeVar, Type>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: &TypeVar) -> Option<&Type> {
        self.map.get(v)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TypeVar, &Type)> {
        self.map.iter()
    }

    /// Adds `v := ty`, rejecting assignments that would make `v` recursive.
    pub fn bind(&mut self, v: TypeVar, ty: Type) -> Result<(), TypeError> {
        let ty = resolve(&ty, self);
        if ty.contains_var(&v) {
            return Err(TypeError::Occurs { var: v, ty });
        }
        self.map.insert(v, ty);
        Ok(())
    }

    /// Union of two bindings over disjoint variables; on overlap `self` wins.
    pub fn merged(&self, other: &Binding) -> Binding {
        let mut out = self.clone();
        for (k, v) in &other.map {
            out.map.entry(k.clone()).or_insert_with(|| v.clone());
        }
        out
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (v, ty)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}={}", v, resolve(ty, self))?;
        }
        Ok(())
    }
}

/// Substitutes every assigned variable, recursively, until no assigned
/// variable remains. Unassigned variables pass through unchanged.
pub fn resolve(ty: &Type, b: &Binding) -> Type {
    if b.is_empty() {
        return ty.clone();
    }
    match ty {
        Type::Base(_) => ty.clone(),
        Type::Var(v) => match b.get(v) {
            Some(t) => resolve(t, b),
            None => ty.clone(),
        },
        Type::Arrow(i, o) => Type::arrow(resolve(i, b), resolve(o, b)),
    }
}

/// `s <: t` for ground types.
pub fn is_subtype(s: &Type, t: &Type, h: &TypeHierarchy) -> Result<bool, TypeError> {
    if let Some(v) = s.first_var().or_else(|| t.first_var()) {
        return Err(TypeError::UnboundVariable(v.clone()));
    }
    Ok(subtype_ground(s, t, h))
}

fn subtype_ground(s: &Type, t: &Type, h: &TypeHierarchy) -> bool {
    match (s, t) {
        (Type::Base(a), Type::Base(b)) => h.is_base_subtype(a, b),
        (Type::Arrow(si, so), Type::Arrow(ti, to)) => {
            subtype_ground(ti, si, h) && subtype_ground(so, to, h)
        }
        _ => false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Variance {
    /// need `arg <: param`
    Co,
    /// need `param <: arg`
    Contra,
}

impl Variance {
    fn flip(self) -> Self {
        match self {
            Variance::Co => Variance::Contra,
            Variance::Contra => Variance::Co,
        }
    }
}

/// Extends `b` so that `arg <: resolve(param)`.
///
/// Each unbound variable in `param` is bound to the exact type found at the
/// matching position of `arg` the first time it is met; later occurrences are
/// checked by subtyping against that binding. `arg` must be ground under `b`.
pub fn match_argument(
    param: &Type,
    arg: &Type,
    h: &TypeHierarchy,
    b: &Binding,
) -> Result<Binding, TypeError> {
    let arg = resolve(arg, b);
    if let Some(v) = arg.first_var() {
        return Err(TypeError::UnboundVariable(v.clone()));
    }
    let mut out = b.clone();
    if fit(param, &arg, Variance::Co, h, &mut out) {
        Ok(out)
    } else {
        Err(TypeError::Mismatch {
            expected: resolve(param, b),
            found: arg,
        })
    }
}

fn fit(param: &Type, arg: &Type, var: Variance, h: &TypeHierarchy, b: &mut Binding) -> bool {
    match param {
        Type::Var(v) => match b.get(v).cloned() {
            Some(bound) => fit(&bound, arg, var, h, b),
            None => b.bind(v.clone(), arg.clone()).is_ok(),
        },
        Type::Base(p) => match arg {
            Type::Base(a) => match var {
                Variance::Co => h.is_base_subtype(a, p),
                Variance::Contra => h.is_base_subtype(p, a),
            },
            _ => false,
        },
        Type::Arrow(pi, po) => match arg {
            Type::Arrow(ai, ao) => fit(pi, ai, var.flip(), h, b) && fit(po, ao, var, h, b),
            _ => false,
        },
    }
}

/// The most specific base type below both `a` and `b`.
pub fn greatest_lower_bound(a: &Type, b: &Type, h: &TypeHierarchy) -> Result<Type, TypeError> {
    let fail = || TypeError::NoLowerBound(a.clone(), b.clone());
    match (a, b) {
        (Type::Base(x), Type::Base(y)) => {
            if h.is_base_subtype(x, y) {
                Ok(a.clone())
            } else if h.is_base_subtype(y, x) {
                Ok(b.clone())
            } else {
                Err(fail())
            }
        }
        _ => Err(fail()),
    }
}

/// Names of the base types in the `top` tree (excluding `t`).
pub fn domain_nodes(h: &TypeHierarchy) -> BTreeSet<String> {
    h.nodes()
        .filter(|n| *n != BOOL)
        .map(|n| n.to_string())
        .collect()
}
