//! Typed lambda-calculus meaning representations.
//!
//! Expressions are immutable trees with shared children. Every application
//! node stores the type it was checked at, so reading a stack item's type is
//! O(1). Bound variables are numbered `x1, x2, ...` in preorder, which keeps
//! printing canonical and substitution capture-free.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{MrError, TypeError};
use crate::syntax::{self, Sexp};
use crate::types::{
    greatest_lower_bound, match_argument, resolve, Binding, Type, TypeHierarchy, TypeVar, BOOL,
};

/// The reserved conjunction predicate.
pub const AND: &str = "and";

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const { name: Arc<str>, ty: Type },
    Pred { name: Arc<str>, ty: Type },
    Var { index: u32, ty: Type },
    Lam { index: u32, ty: Type, body: Arc<Expr> },
    App { fun: Arc<Expr>, arg: Arc<Expr>, ty: Type },
}

impl Expr {
    /// The type recorded at construction.
    pub fn ty(&self) -> Type {
        match self {
            Expr::Const { ty, .. } | Expr::Pred { ty, .. } | Expr::Var { ty, .. } => ty.clone(),
            Expr::App { ty, .. } => ty.clone(),
            Expr::Lam { ty, body, .. } => Type::arrow(ty.clone(), body.ty()),
        }
    }

    pub fn is_lambda(&self) -> bool {
        matches!(self, Expr::Lam { .. })
    }

    /// Head of an application spine and its arguments in order.
    pub fn spine(&self) -> (&Expr, Vec<&Expr>) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Expr::App { fun, arg, .. } = cur {
            args.push(&**arg);
            cur = fun;
        }
        args.reverse();
        (cur, args)
    }

    /// Name of a constant or predicate leaf.
    pub fn atom_name(&self) -> Option<&str> {
        match self {
            Expr::Const { name, .. } | Expr::Pred { name, .. } => Some(name),
            _ => None,
        }
    }

    /// Constant and predicate names in preorder, without repeats.
    pub fn atoms(&self) -> Vec<Arc<str>> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut Vec<Arc<str>>) {
        match self {
            Expr::Const { name, .. } | Expr::Pred { name, .. } => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            Expr::Var { .. } => {}
            Expr::Lam { body, .. } => body.collect_atoms(out),
            Expr::App { fun, arg, .. } => {
                fun.collect_atoms(out);
                arg.collect_atoms(out);
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Expr::Lam { body, .. } => 1 + body.size(),
            Expr::App { fun, arg, .. } => 1 + fun.size() + arg.size(),
            _ => 1,
        }
    }

    fn max_binder(&self) -> u32 {
        match self {
            Expr::Lam { index, body, .. } => (*index).max(body.max_binder()),
            Expr::App { fun, arg, .. } => fun.max_binder().max(arg.max_binder()),
            Expr::Var { index, .. } => *index,
            _ => 0,
        }
    }

    /// Recomputes the type bottom-up, re-checking every application.
    pub fn infer(&self, h: &TypeHierarchy) -> Result<Type, TypeError> {
        match self {
            Expr::Const { ty, .. } | Expr::Pred { ty, .. } | Expr::Var { ty, .. } => Ok(ty.clone()),
            Expr::Lam { ty, body, .. } => Ok(Type::arrow(ty.clone(), body.infer(h)?)),
            Expr::App { fun, arg, .. } => {
                let fty = fun.infer(h)?;
                let aty = arg.infer(h)?;
                let (input, output) = fty
                    .as_arrow()
                    .ok_or_else(|| TypeError::NotAFunction(fty.clone()))?;
                let b = match_argument(input, &aty, h, &Binding::new())?;
                Ok(resolve(output, &b))
            }
        }
    }

    fn map_types(&self, f: &impl Fn(&Type) -> Type) -> Expr {
        match self {
            Expr::Const { name, ty } => Expr::Const {
                name: name.clone(),
                ty: f(ty),
            },
            Expr::Pred { name, ty } => Expr::Pred {
                name: name.clone(),
                ty: f(ty),
            },
            Expr::Var { index, ty } => Expr::Var {
                index: *index,
                ty: f(ty),
            },
            Expr::Lam { index, ty, body } => Expr::Lam {
                index: *index,
                ty: f(ty),
                body: Arc::new(body.map_types(f)),
            },
            Expr::App { fun, arg, ty } => Expr::App {
                fun: Arc::new(fun.map_types(f)),
                arg: Arc::new(arg.map_types(f)),
                ty: f(ty),
            },
        }
    }

    /// Renames bound variables to `1..n` in preorder.
    fn renumber(&self) -> Expr {
        fn go(e: &Expr, scope: &mut Vec<(u32, u32)>, next: &mut u32) -> Expr {
            match e {
                Expr::Var { index, ty } => {
                    let index = scope
                        .iter()
                        .rev()
                        .find(|(old, _)| old == index)
                        .map(|(_, new)| *new)
                        .unwrap_or(*index);
                    Expr::Var {
                        index,
                        ty: ty.clone(),
                    }
                }
                Expr::Lam { index, ty, body } => {
                    *next += 1;
                    let fresh = *next;
                    scope.push((*index, fresh));
                    let body = go(body, scope, next);
                    scope.pop();
                    Expr::Lam {
                        index: fresh,
                        ty: ty.clone(),
                        body: Arc::new(body),
                    }
                }
                Expr::App { fun, arg, ty } => Expr::App {
                    fun: Arc::new(go(fun, scope, next)),
                    arg: Arc::new(go(arg, scope, next)),
                    ty: ty.clone(),
                },
                other => other.clone(),
            }
        }
        go(self, &mut Vec::new(), &mut 0)
    }

    /// Shifts the indices of variables bound inside `self` by `offset`.
    fn shift_bound(&self, offset: u32) -> Expr {
        fn go(e: &Expr, offset: u32, bound: &mut Vec<u32>) -> Expr {
            match e {
                Expr::Var { index, ty } if bound.contains(index) => Expr::Var {
                    index: index + offset,
                    ty: ty.clone(),
                },
                Expr::Lam { index, ty, body } => {
                    bound.push(*index);
                    let body = go(body, offset, bound);
                    bound.pop();
                    Expr::Lam {
                        index: index + offset,
                        ty: ty.clone(),
                        body: Arc::new(body),
                    }
                }
                Expr::App { fun, arg, ty } => Expr::App {
                    fun: Arc::new(go(fun, offset, bound)),
                    arg: Arc::new(go(arg, offset, bound)),
                    ty: ty.clone(),
                },
                other => other.clone(),
            }
        }
        if offset == 0 {
            return self.clone();
        }
        go(self, offset, &mut Vec::new())
    }

    /// Replaces variable `index` by `val`, reducing any redex this creates.
    fn subst(&self, index: u32, val: &Expr) -> Expr {
        match self {
            Expr::Var { index: i, .. } if *i == index => val.clone(),
            Expr::Lam { index: i, ty, body } => Expr::Lam {
                index: *i,
                ty: ty.clone(),
                body: Arc::new(body.subst(index, val)),
            },
            Expr::App { fun, arg, ty } => {
                let fun = fun.subst(index, val);
                let arg = arg.subst(index, val);
                beta(&fun, &arg).unwrap_or_else(|| Expr::App {
                    fun: Arc::new(fun),
                    arg: Arc::new(arg),
                    ty: ty.clone(),
                })
            }
            other => other.clone(),
        }
    }

    /// Canonical text used for equality: de Bruijn variables, typed leaves,
    /// and `and` conjunctions flattened and sorted.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        canon(self, &mut Vec::new(), &mut out);
        out
    }
}

fn beta(fun: &Expr, arg: &Expr) -> Option<Expr> {
    match fun {
        Expr::Lam { index, body, .. } => {
            let val = arg.shift_bound(fun.max_binder());
            Some(body.subst(*index, &val))
        }
        _ => None,
    }
}

fn canon(e: &Expr, scope: &mut Vec<u32>, out: &mut String) {
    match e {
        Expr::Const { name, ty } => {
            out.push_str(name);
            out.push(':');
            out.push_str(&ty.to_string());
        }
        Expr::Pred { name, .. } => out.push_str(name),
        Expr::Var { index, .. } => match scope.iter().rev().position(|i| i == index) {
            Some(k) => out.push_str(&format!("#{}", k)),
            None => out.push_str(&format!("free{}", index)),
        },
        Expr::Lam { index, ty, body } => {
            out.push_str("(lambda ");
            out.push_str(&ty.to_string());
            out.push(' ');
            scope.push(*index);
            canon(body, scope, out);
            scope.pop();
            out.push(')');
        }
        Expr::App { .. } => {
            let (head, args) = e.spine();
            if head.atom_name() == Some(AND) && args.len() == 2 {
                let mut conjuncts = Vec::new();
                flatten_and(e, &mut conjuncts);
                let mut parts: Vec<String> = conjuncts
                    .iter()
                    .map(|c| {
                        let mut s = String::new();
                        canon(c, scope, &mut s);
                        s
                    })
                    .collect();
                parts.sort();
                out.push_str("(and");
                for p in parts {
                    out.push(' ');
                    out.push_str(&p);
                }
                out.push(')');
            } else {
                out.push('(');
                canon(head, scope, out);
                for a in args {
                    out.push(' ');
                    canon(a, scope, out);
                }
                out.push(')');
            }
        }
    }
}

fn flatten_and<'e>(e: &'e Expr, out: &mut Vec<&'e Expr>) {
    let (head, args) = e.spine();
    if head.atom_name() == Some(AND) && args.len() == 2 {
        flatten_and(args[0], out);
        flatten_and(args[1], out);
    } else {
        out.push(e);
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const { name, .. } | Expr::Pred { name, .. } => f.write_str(name),
            Expr::Var { index, .. } => write!(f, "x{}", index),
            Expr::Lam { index, ty, body } => write!(f, "(lambda (x{} : {}) {})", index, ty, body),
            Expr::App { .. } => {
                let (head, args) = self.spine();
                write!(f, "({}", head)?;
                for a in args {
                    write!(f, " {}", a)?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Equality up to alpha-renaming and reordering of `and` conjuncts.
pub fn mr_equal(a: &Expr, b: &Expr) -> bool {
    a.canonical() == b.canonical()
}

/// An expression together with its (resolved) type and the type-variable
/// assignments made while building it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedResult {
    pub expr: Expr,
    pub ty: Type,
    pub binding: Binding,
}

impl TypedResult {
    pub fn new(expr: Expr) -> Self {
        let ty = expr.ty();
        TypedResult {
            expr,
            ty,
            binding: Binding::new(),
        }
    }

    /// Re-stamps all type variables with `base | old_stamp` so that copies
    /// shifted at different positions never share variables.
    pub fn freshen(&self, base: u32) -> TypedResult {
        if self.ty.is_ground() && self.binding.is_empty() && !has_type_vars(&self.expr) {
            return self.clone();
        }
        let restamp = |t: &Type| {
            t.map_leaves(&|leaf| match leaf {
                Type::Var(v) => Type::Var(TypeVar {
                    name: v.name.clone(),
                    stamp: base | v.stamp,
                }),
                other => other.clone(),
            })
        };
        let mut binding = Binding::new();
        for (v, t) in self.binding.iter() {
            let v = TypeVar {
                name: v.name.clone(),
                stamp: base | v.stamp,
            };
            binding
                .bind(v, restamp(t))
                .expect("restamping preserves acyclicity");
        }
        TypedResult {
            expr: self.expr.map_types(&restamp),
            ty: restamp(&self.ty),
            binding,
        }
    }
}

fn has_type_vars(e: &Expr) -> bool {
    match e {
        Expr::Const { ty, .. } | Expr::Pred { ty, .. } | Expr::Var { ty, .. } => !ty.is_ground(),
        Expr::Lam { ty, body, .. } => !ty.is_ground() || has_type_vars(body),
        Expr::App { fun, arg, ty } => !ty.is_ground() || has_type_vars(fun) || has_type_vars(arg),
    }
}

impl fmt::Display for TypedResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.expr, self.ty)
    }
}

/// What a successful application had to establish, for traces.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ApplyNote {
    /// Variables bound by this application.
    pub bound: Vec<(TypeVar, Type)>,
    /// `(arg type, expected type)` when the argument was accepted through
    /// strict subtyping rather than equality.
    pub subsumed: Option<(Type, Type)>,
}

impl fmt::Display for ApplyNote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.bound.is_empty() {
            let b: Vec<String> = self
                .bound
                .iter()
                .map(|(v, t)| format!("{}={}", v, t))
                .collect();
            parts.push(format!("binding: {}", b.join(",")));
        }
        if let Some((s, t)) = &self.subsumed {
            parts.push(format!("({})<:({})", s, t));
        }
        f.write_str(&parts.join("; "))
    }
}

fn apply_raw(
    fun: &TypedResult,
    arg: &TypedResult,
    h: &TypeHierarchy,
) -> Result<(TypedResult, ApplyNote), MrError> {
    let (input, output) = fun
        .ty
        .as_arrow()
        .ok_or_else(|| TypeError::NotAFunction(fun.ty.clone()))?;
    let fresh = match_argument(input, &arg.ty, h, &Binding::new())?;
    let ty = resolve(output, &fresh);
    let expected = resolve(input, &fresh);
    let note = ApplyNote {
        bound: fresh
            .iter()
            .map(|(v, t)| (v.clone(), resolve(t, &fresh)))
            .collect(),
        subsumed: (expected != arg.ty).then(|| (arg.ty.clone(), expected)),
    };
    let expr = match beta(&fun.expr, &arg.expr) {
        Some(reduced) => reduced,
        None => Expr::App {
            fun: Arc::new(fun.expr.clone()),
            arg: Arc::new(arg.expr.clone()),
            ty: ty.clone(),
        },
    };
    let binding = fun.binding.merged(&arg.binding).merged(&fresh);
    Ok((TypedResult { expr, ty, binding }, note))
}

/// Applies `fun` to `arg` if `arg`'s type is a subtype of `fun`'s input
/// (binding type variables as needed). Lambdas are beta-reduced eagerly, and
/// the application fails if the reduced term does not re-check to the same
/// type.
pub fn apply(
    fun: &TypedResult,
    arg: &TypedResult,
    h: &TypeHierarchy,
) -> Result<TypedResult, MrError> {
    apply_noted(fun, arg, h).map(|(r, _)| r)
}

/// [`apply`], also reporting bindings made and any subsumption used.
pub fn apply_noted(
    fun: &TypedResult,
    arg: &TypedResult,
    h: &TypeHierarchy,
) -> Result<(TypedResult, ApplyNote), MrError> {
    let (mut r, note) = apply_raw(fun, arg, h)?;
    if fun.expr.is_lambda() {
        r.expr = r.expr.renumber();
        if note.subsumed.is_some() && r.expr.infer(h).ok().as_ref() != Some(&r.ty) {
            return Err(MrError::IllTypedReduct(r.expr.to_string()));
        }
    }
    Ok((r, note))
}

/// Conjoins two boolean-valued predicates: `λx:X.(and (a x) (b x))` where `X`
/// is the greatest lower bound of their input types.
pub fn union(a: &TypedResult, b: &TypedResult, h: &TypeHierarchy) -> Result<TypedResult, MrError> {
    let not_preds = || MrError::NotPredicates(a.ty.clone(), b.ty.clone());
    let (ia, oa) = a.ty.as_arrow().ok_or_else(not_preds)?;
    let (ib, ob) = b.ty.as_arrow().ok_or_else(not_preds)?;
    if oa.base_name() != Some(BOOL) || ob.base_name() != Some(BOOL) {
        return Err(not_preds());
    }
    let x_ty = greatest_lower_bound(ia, ib, h)?;
    let index = a.expr.max_binder().max(b.expr.max_binder()) + 1;
    let x = TypedResult::new(Expr::Var {
        index,
        ty: x_ty.clone(),
    });
    let (ax, _) = apply_raw(a, &x, h)?;
    let (bx, _) = apply_raw(b, &x, h)?;
    let and = Expr::Pred {
        name: AND.into(),
        ty: and_type(),
    };
    let body = Expr::App {
        fun: Arc::new(Expr::App {
            fun: Arc::new(and),
            arg: Arc::new(ax.expr),
            ty: Type::arrow(Type::boolean(), Type::boolean()),
        }),
        arg: Arc::new(bx.expr),
        ty: Type::boolean(),
    };
    let expr = Expr::Lam {
        index,
        ty: x_ty,
        body: Arc::new(body),
    }
    .renumber();
    Ok(TypedResult {
        ty: expr.ty(),
        expr,
        binding: a.binding.merged(&b.binding),
    })
}

pub fn and_type() -> Type {
    Type::arrow(
        Type::boolean(),
        Type::arrow(Type::boolean(), Type::boolean()),
    )
}

/// Typed constants and predicates of a domain, plus its hierarchy.
#[derive(Clone, Debug, Default)]
pub struct Signature {
    pub hierarchy: TypeHierarchy,
    pub constants: BTreeMap<Arc<str>, Vec<Type>>,
    pub predicates: BTreeMap<Arc<str>, Vec<Type>>,
}

impl Signature {
    pub fn new(hierarchy: TypeHierarchy) -> Self {
        let mut predicates = BTreeMap::new();
        predicates.insert(AND.into(), vec![and_type()]);
        Signature {
            hierarchy,
            constants: BTreeMap::new(),
            predicates,
        }
    }

    /// Every base type in `ty` is declared in the hierarchy.
    pub fn check_type(&self, ty: &Type) -> Result<(), String> {
        let mut names = Vec::new();
        ty.base_names(&mut names);
        match names.iter().find(|n| !self.hierarchy.contains(n)) {
            Some(n) => Err(n.to_string()),
            None => Ok(()),
        }
    }

    /// Readings of an MR s-expression, in declaration order of the atoms.
    pub fn parse_readings(&self, text: &str) -> Result<Vec<TypedResult>, MrError> {
        let sexp = syntax::read_one(text)?;
        let mut el = Elaborator {
            sig: self,
            next_binder: 0,
            next_stamp: 0,
        };
        let readings = el.elaborate(&sexp, &mut Vec::new())?;
        let mut out: Vec<TypedResult> = Vec::new();
        for mut r in readings {
            r.expr = r.expr.renumber();
            if !out.iter().any(|o| o.expr == r.expr && o.ty == r.ty) {
                out.push(r);
            }
        }
        Ok(out)
    }

    /// Parses an MR, type-checking every application; with ambiguous atoms
    /// the first well-typed reading wins.
    pub fn parse_expression(&self, text: &str) -> Result<TypedResult, MrError> {
        let mut readings = self.parse_readings(text)?;
        Ok(readings.swap_remove(0))
    }
}

const MAX_READINGS: usize = 64;

struct Elaborator<'a> {
    sig: &'a Signature,
    next_binder: u32,
    next_stamp: u32,
}

impl Elaborator<'_> {
    fn fresh_stamp(&mut self) -> u32 {
        self.next_stamp += 1;
        self.next_stamp
    }

    fn atom(&mut self, name: &str, scope: &[(String, u32, Type)]) -> Result<Vec<TypedResult>, MrError> {
        if let Some((_, index, ty)) = scope.iter().rev().find(|(n, _, _)| n == name) {
            return Ok(vec![TypedResult::new(Expr::Var {
                index: *index,
                ty: ty.clone(),
            })]);
        }
        let mut out = Vec::new();
        if let Some(types) = self.sig.constants.get(name) {
            for ty in types {
                let ty = ty.freshen(self.fresh_stamp());
                out.push(TypedResult::new(Expr::Const {
                    name: name.into(),
                    ty,
                }));
            }
        }
        if let Some(types) = self.sig.predicates.get(name) {
            for ty in types {
                let ty = ty.freshen(self.fresh_stamp());
                out.push(TypedResult::new(Expr::Pred {
                    name: name.into(),
                    ty,
                }));
            }
        }
        if out.is_empty() {
            Err(MrError::UnknownAtom(name.to_string()))
        } else {
            Ok(out)
        }
    }

    fn elaborate(
        &mut self,
        e: &Sexp,
        scope: &mut Vec<(String, u32, Type)>,
    ) -> Result<Vec<TypedResult>, MrError> {
        match e {
            Sexp::Atom(a) => {
                if !syntax::is_identifier(a) {
                    return Err(MrError::Malformed(a.clone()));
                }
                self.atom(a, scope)
            }
            Sexp::List(items) if items.is_empty() => Err(MrError::Malformed("()".into())),
            Sexp::List(items) if items.len() == 1 => self.elaborate(&items[0], scope),
            Sexp::List(items) if items[0].as_atom() == Some("lambda") => self.lambda(e, items, scope),
            Sexp::List(items) => {
                let mut current = self.elaborate(&items[0], scope)?;
                for arg in &items[1..] {
                    let args = self.elaborate(arg, scope)?;
                    let mut next = Vec::new();
                    let mut first_err = None;
                    for f in &current {
                        for a in &args {
                            match apply_raw(f, a, &self.sig.hierarchy) {
                                Ok((r, _)) => {
                                    if next.len() < MAX_READINGS {
                                        next.push(r)
                                    }
                                }
                                Err(err) => {
                                    first_err.get_or_insert(err);
                                }
                            }
                        }
                    }
                    if next.is_empty() {
                        return Err(first_err.unwrap_or_else(|| MrError::Malformed(e.to_string())));
                    }
                    current = next;
                }
                Ok(current)
            }
        }
    }

    fn lambda(
        &mut self,
        whole: &Sexp,
        items: &[Sexp],
        scope: &mut Vec<(String, u32, Type)>,
    ) -> Result<Vec<TypedResult>, MrError> {
        let malformed = || MrError::Malformed(whole.to_string());
        if items.len() != 3 {
            return Err(malformed());
        }
        let binder = match &items[1] {
            Sexp::List(b) if b.len() >= 3 && b[1].as_atom() == Some(":") => b,
            _ => return Err(malformed()),
        };
        let name = binder[0]
            .as_atom()
            .filter(|n| syntax::is_identifier(n))
            .ok_or_else(malformed)?;
        let ty = Type::from_sexps(&binder[2..])?;
        if let Err(unknown) = self.sig.check_type(&ty) {
            return Err(MrError::UnknownAtom(unknown));
        }
        let ty = ty.freshen(self.fresh_stamp());
        self.next_binder += 1;
        let index = self.next_binder;
        scope.push((name.to_string(), index, ty.clone()));
        let bodies = self.elaborate(&items[2], scope);
        scope.pop();
        Ok(bodies?
            .into_iter()
            .map(|body| TypedResult {
                expr: Expr::Lam {
                    index,
                    ty: ty.clone(),
                    body: Arc::new(body.expr),
                },
                ty: Type::arrow(ty.clone(), body.ty),
                binding: body.binding,
            })
            .collect())
    }
}
