//! Staged monomorphic type checking.
//!
//! Inference is unification based because code produced by dl carries no
//! binder annotations. There is no generalisation: every binder has exactly
//! one type. The checker only accepts ML-free terms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::signature;
use crate::syntax::{self, BinOp, TagName, Term, TypeExpr};

/// Where in a staged run a check happened.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckPoint {
    /// The body of a top-level splice must be `Code`.
    DownMl,
    /// The bound term of a `letdown` must have some type.
    LetDown,
    /// The compiled program, before it runs.
    Residual,
    /// Code produced by `eval` must have the annotated type.
    Eval,
}

impl CheckPoint {
    pub const fn as_str(self) -> &'static str {
        match self {
            CheckPoint::DownMl => "downML check",
            CheckPoint::LetDown => "letdown check",
            CheckPoint::Residual => "residual check",
            CheckPoint::Eval => "eval check",
        }
    }
}

impl fmt::Display for CheckPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeErrorKind {
    Mismatch { expected: TypeExpr, found: TypeExpr },
    /// Occurs-check failure: `found` would have to contain itself.
    Infinite { expected: TypeExpr, found: TypeExpr },
    Unbound(String),
    Arity { tag: TagName, found: usize },
    /// A binder position of `astLam`/`astRec` is not an `astStr(..)`.
    BinderShape { tag: TagName },
    NotATag(TypeExpr),
    NotLiftable(TypeExpr),
    Ambiguous(TypeExpr),
    NotMlFree,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct TypeError {
    pub kind: TypeErrorKind,
    /// The offending subterm.
    pub at: Term,
    pub phase: Option<CheckPoint>,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            TypeErrorKind::Mismatch { expected, found } => {
                write!(f, "expected {expected}, found {found}")?
            }
            TypeErrorKind::Infinite { expected, found } => {
                write!(f, "expected {expected}, found {found} (infinite type)")?
            }
            TypeErrorKind::Unbound(x) => write!(f, "unbound variable `{x}`")?,
            TypeErrorKind::Arity { tag, found } => write!(
                f,
                "`{}` expects {} argument(s), found {found}",
                tag.ctor_keyword(),
                signature::describe_arity(*tag)
            )?,
            TypeErrorKind::BinderShape { tag } => write!(
                f,
                "binder positions of `{}` must be `astStr(..)`",
                tag.ctor_keyword()
            )?,
            TypeErrorKind::NotATag(t) => write!(f, "expected a tag type, found {t}")?,
            TypeErrorKind::NotLiftable(t) => {
                write!(f, "expected Int, String or Bool for lift, found {t}")?
            }
            TypeErrorKind::Ambiguous(t) => write!(f, "ambiguous type {t}")?,
            TypeErrorKind::NotMlFree => f.write_str("splices and quotes cannot be type checked")?,
        }
        write!(f, " at `{}`", self.at)
    }
}

/// Typing environment. Extension requires a fresh name; the checker renames
/// shadowing binders instead of overwriting entries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeEnv {
    bindings: BTreeMap<String, TypeExpr>,
}

impl TypeEnv {
    pub fn new() -> TypeEnv {
        TypeEnv::default()
    }

    pub fn get(&self, x: &str) -> Option<&TypeExpr> {
        self.bindings.get(x)
    }

    pub fn contains(&self, x: &str) -> bool {
        self.bindings.contains_key(x)
    }

    /// `Γ, x : α`. Returns `None` if `x` is already bound.
    pub fn extend(&self, x: &str, ty: TypeExpr) -> Option<TypeEnv> {
        if self.contains(x) {
            return None;
        }
        let mut next = self.clone();
        next.bindings.insert(x.to_owned(), ty);
        Some(next)
    }

    fn names(&self) -> impl Iterator<Item = &String> {
        self.bindings.keys()
    }
}

impl<S: Into<String>> FromIterator<(S, TypeExpr)> for TypeEnv {
    fn from_iter<I: IntoIterator<Item = (S, TypeExpr)>>(iter: I) -> TypeEnv {
        TypeEnv {
            bindings: iter.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }
}

/// A solution for meta-variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution(BTreeMap<u32, TypeExpr>);

impl Substitution {
    pub fn get(&self, id: u32) -> Option<&TypeExpr> {
        self.0.get(&id)
    }

    pub fn apply(&self, t: &TypeExpr) -> TypeExpr {
        match t {
            TypeExpr::Meta(id) => match self.0.get(id) {
                Some(t) => self.apply(t),
                None => t.clone(),
            },
            TypeExpr::Arrow(a, b) => TypeExpr::arrow(self.apply(a), self.apply(b)),
            other => other.clone(),
        }
    }

    fn occurs(&self, id: u32, t: &TypeExpr) -> bool {
        match self.apply(t) {
            TypeExpr::Meta(other) => other == id,
            TypeExpr::Arrow(a, b) => self.occurs(id, &a) || self.occurs(id, &b),
            _ => false,
        }
    }

    fn unify(&mut self, expected: &TypeExpr, found: &TypeExpr) -> Result<(), TypeErrorKind> {
        let a = self.apply(expected);
        let b = self.apply(found);
        match (&a, &b) {
            (TypeExpr::Meta(x), TypeExpr::Meta(y)) if x == y => Ok(()),
            (TypeExpr::Meta(x), other) | (other, TypeExpr::Meta(x)) => {
                if self.occurs(*x, other) {
                    Err(TypeErrorKind::Infinite {
                        expected: a.clone(),
                        found: b.clone(),
                    })
                } else {
                    self.0.insert(*x, other.clone());
                    Ok(())
                }
            }
            (TypeExpr::Arrow(a1, a2), TypeExpr::Arrow(b1, b2)) => {
                self.unify(a1, b1).map_err(|_| self.mismatch(&a, &b))?;
                self.unify(a2, b2).map_err(|_| self.mismatch(&a, &b))
            }
            (x, y) if x == y => Ok(()),
            _ => Err(self.mismatch(&a, &b)),
        }
    }

    fn mismatch(&self, expected: &TypeExpr, found: &TypeExpr) -> TypeErrorKind {
        TypeErrorKind::Mismatch {
            expected: self.apply(expected),
            found: self.apply(found),
        }
    }
}

/// Most general unifier of two types.
pub fn unify(a: &TypeExpr, b: &TypeExpr) -> Result<Substitution, TypeErrorKind> {
    let mut s = Substitution::default();
    s.unify(a, b)?;
    Ok(s)
}

/// Principal monomorphic type of `m` under `env`.
pub fn infer(env: &TypeEnv, m: &Term) -> Result<TypeExpr, TypeError> {
    let mut c = Checker::default();
    let ty = c.infer(env, m)?;
    c.finish(m, ty)
}

/// Checks that `m` has type `expected` under `env`.
pub fn check(env: &TypeEnv, m: &Term, expected: &TypeExpr) -> Result<(), TypeError> {
    let mut c = Checker::default();
    let ty = c.infer(env, m)?;
    c.subst.unify(expected, &ty).map_err(|kind| TypeError {
        kind,
        at: m.clone(),
        phase: None,
    })?;
    c.finish(m, ty).map(|_| ())
}

enum Pending {
    Tag,
    Liftable,
}

#[derive(Default)]
struct Checker {
    subst: Substitution,
    next_meta: u32,
    pending: Vec<(Pending, TypeExpr, Term)>,
}

impl Checker {
    fn fresh(&mut self) -> TypeExpr {
        self.next_meta += 1;
        TypeExpr::Meta(self.next_meta - 1)
    }

    fn err(kind: TypeErrorKind, at: &Term) -> TypeError {
        TypeError {
            kind,
            at: at.clone(),
            phase: None,
        }
    }

    fn expect(&mut self, expected: &TypeExpr, found: &TypeExpr, at: &Term) -> Result<(), TypeError> {
        self.subst.unify(expected, found).map_err(|k| Self::err(k, at))
    }

    fn check_term(&mut self, env: &TypeEnv, m: &Term, expected: &TypeExpr) -> Result<(), TypeError> {
        let found = self.infer(env, m)?;
        self.expect(expected, &found, m)
    }

    /// Resolves deferred constraints and rejects unsolved meta-variables in
    /// the reported type.
    fn finish(&mut self, m: &Term, ty: TypeExpr) -> Result<TypeExpr, TypeError> {
        for (kind, t, at) in std::mem::take(&mut self.pending) {
            let t = self.subst.apply(&t);
            match (kind, &t) {
                (_, TypeExpr::Meta(_)) => return Err(Self::err(TypeErrorKind::Ambiguous(t), &at)),
                (Pending::Tag, TypeExpr::Tag(_)) => {}
                (Pending::Tag, _) => return Err(Self::err(TypeErrorKind::NotATag(t), &at)),
                (Pending::Liftable, TypeExpr::Int | TypeExpr::String | TypeExpr::Bool) => {}
                (Pending::Liftable, _) => return Err(Self::err(TypeErrorKind::NotLiftable(t), &at)),
            }
        }
        let ty = self.subst.apply(&ty);
        if ty.has_meta() {
            return Err(Self::err(TypeErrorKind::Ambiguous(ty), m));
        }
        Ok(ty)
    }

    /// Binds `names` in order, renaming any that are already in scope.
    fn bind(&mut self, env: &TypeEnv, body: &Term, names: &[(&str, TypeExpr)]) -> (TypeEnv, Term) {
        let mut env = env.clone();
        let mut body = body.clone();
        for (x, ty) in names {
            let x = if env.contains(x) {
                let mut avoid: BTreeSet<String> = env.names().cloned().collect();
                avoid.extend(syntax::free_vars(&body));
                avoid.extend(names.iter().map(|(n, _)| n.to_string()));
                let fresh = syntax::fresh_name(x, &avoid);
                body = syntax::subst(&body, &Term::Var(fresh.clone()), x);
                fresh
            } else {
                x.to_string()
            };
            env = env.extend(&x, ty.clone()).expect("name is fresh");
        }
        (env, body)
    }

    fn infer(&mut self, env: &TypeEnv, m: &Term) -> Result<TypeExpr, TypeError> {
        match m {
            Term::Var(x) => env
                .get(x)
                .cloned()
                .ok_or_else(|| Self::err(TypeErrorKind::Unbound(x.clone()), m)),
            Term::Lam { param, annot, body } => {
                let arg = annot.clone().unwrap_or_else(|| self.fresh());
                let (env, body) = self.bind(env, body, &[(param, arg.clone())]);
                let res = self.infer(&env, &body)?;
                Ok(TypeExpr::arrow(arg, res))
            }
            Term::Rec {
                name,
                param,
                annot,
                body,
            } => {
                let (arg, res) = match annot {
                    Some((a, b)) => (a.clone(), b.clone()),
                    None => (self.fresh(), self.fresh()),
                };
                let fun = TypeExpr::arrow(arg.clone(), res.clone());
                // With `rec g g. ..` the parameter shadows the function name.
                let binders: Vec<(&str, TypeExpr)> = if name == param {
                    vec![(param, arg)]
                } else {
                    vec![(name, fun.clone()), (param, arg)]
                };
                let (env, body) = self.bind(env, body, &binders);
                self.check_term(&env, &body, &res)?;
                Ok(fun)
            }
            Term::App(f, a) => {
                let tf = self.infer(env, f)?;
                let ta = self.infer(env, a)?;
                match self.subst.apply(&tf) {
                    TypeExpr::Arrow(from, to) => {
                        self.expect(&from, &ta, a)?;
                        Ok(*to)
                    }
                    TypeExpr::Meta(_) => {
                        let res = self.fresh();
                        self.expect(&tf, &TypeExpr::arrow(ta, res.clone()), f)?;
                        Ok(res)
                    }
                    other => {
                        let want = TypeExpr::arrow(self.subst.apply(&ta), self.fresh());
                        Err(Self::err(
                            TypeErrorKind::Mismatch {
                                expected: want,
                                found: other,
                            },
                            f,
                        ))
                    }
                }
            }
            Term::Int(_) => Ok(TypeExpr::Int),
            Term::Str(_) => Ok(TypeExpr::String),
            Term::Bool(_) => Ok(TypeExpr::Bool),
            Term::BinOp(op, a, b) => {
                self.check_term(env, a, &TypeExpr::Int)?;
                self.check_term(env, b, &TypeExpr::Int)?;
                Ok(match op {
                    BinOp::Eq => TypeExpr::Bool,
                    _ => TypeExpr::Int,
                })
            }
            Term::If(c, t, e) => {
                self.check_term(env, c, &TypeExpr::Bool)?;
                let tt = self.infer(env, t)?;
                self.check_term(env, e, &tt)?;
                Ok(tt)
            }
            Term::TagLit(tag) => Ok(TypeExpr::Tag(tag.name)),
            Term::Ast(tag, args) => {
                if !signature::check_arity(tag.name, args.len()) {
                    return Err(Self::err(
                        TypeErrorKind::Arity {
                            tag: tag.name,
                            found: args.len(),
                        },
                        m,
                    ));
                }
                self.infer_ast(env, tag.name, args)?;
                Ok(TypeExpr::Code)
            }
            Term::Eval(annot, body) => {
                self.check_term(env, body, &TypeExpr::Code)?;
                Ok(annot.clone().unwrap_or_else(|| self.fresh()))
            }
            Term::Lift(body) => {
                let t = self.infer(env, body)?;
                match self.subst.apply(&t) {
                    TypeExpr::Int | TypeExpr::String | TypeExpr::Bool => {}
                    TypeExpr::Meta(_) => self.pending.push((Pending::Liftable, t, (**body).clone())),
                    other => return Err(Self::err(TypeErrorKind::NotLiftable(other), body)),
                }
                Ok(TypeExpr::Code)
            }
            Term::DownMl(_) | Term::UpMl(_) | Term::LetDown { .. } => {
                Err(Self::err(TypeErrorKind::NotMlFree, m))
            }
        }
    }

    /// Requires a tag type; returns the tag when it is already known.
    fn expect_tag(&mut self, env: &TypeEnv, m: &Term) -> Result<Option<TagName>, TypeError> {
        let t = self.infer(env, m)?;
        match self.subst.apply(&t) {
            TypeExpr::Tag(name) => Ok(Some(name)),
            TypeExpr::Meta(_) => {
                self.pending.push((Pending::Tag, t, m.clone()));
                Ok(None)
            }
            other => Err(Self::err(TypeErrorKind::NotATag(other), m)),
        }
    }

    fn infer_ast(&mut self, env: &TypeEnv, tag: TagName, args: &[Term]) -> Result<(), TypeError> {
        match tag {
            TagName::Var | TagName::Str => self.check_term(env, &args[0], &TypeExpr::String),
            TagName::Int => self.check_term(env, &args[0], &TypeExpr::Int),
            TagName::Bool => self.check_term(env, &args[0], &TypeExpr::Bool),
            TagName::Lam | TagName::Rec => {
                let (binders, body) = args.split_at(args.len() - 1);
                for b in binders {
                    match b {
                        Term::Ast(t, inner) if t.name == TagName::Str && inner.len() == 1 => {
                            self.check_term(env, &inner[0], &TypeExpr::String)?
                        }
                        other => return Err(Self::err(TypeErrorKind::BinderShape { tag }, other)),
                    }
                }
                self.check_term(env, &body[0], &TypeExpr::Code)
            }
            TagName::Promote => {
                let mut rest = &args[1..];
                if self.expect_tag(env, &args[0])? == Some(TagName::Promote) {
                    // An AST of an `astPromote`: its own tag argument is
                    // represented by the tag itself.
                    let Some((inner, tail)) = rest.split_first() else {
                        return Err(Self::err(
                            TypeErrorKind::Arity {
                                tag: TagName::Promote,
                                found: 1,
                            },
                            &Term::ast(TagName::Promote, args.to_vec()),
                        ));
                    };
                    self.expect_tag(env, inner)?;
                    rest = tail;
                }
                for a in rest {
                    self.check_term(env, a, &TypeExpr::Code)?;
                }
                Ok(())
            }
            TagName::App
            | TagName::Add
            | TagName::Sub
            | TagName::Mul
            | TagName::Eq
            | TagName::If
            | TagName::Eval
            | TagName::Lift => {
                for a in args {
                    self.check_term(env, a, &TypeExpr::Code)?;
                }
                Ok(())
            }
        }
    }
}
