//! The four big-step relations and the compile-then-run pipeline.
//!
//! Every rule application costs one unit of [`Fuel`]; a type check counts
//! as one application. When tracing is on each relation also returns the
//! [`Derivation`] it built, with premises in the order the rule runs them.

use std::fmt;

use crate::derivation::{Derivation, Judgement, Relation};
use crate::signature;
use crate::syntax::{subst, unbound_vars, BinOp, Tag, TagName, Term, TypeExpr};
use crate::typing::{self, CheckPoint, TypeEnv, TypeError};
use crate::Mode;

pub const DEFAULT_FUEL: u64 = 100_000;

// Deep object programs recurse deeply in a big-step evaluator.
const STACK_RED_ZONE: usize = 128 * 1024;
const STACK_SEGMENT: usize = 8 * 1024 * 1024;

/// Rule-application budget shared by all relations in one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fuel {
    remaining: u64,
}

impl Fuel {
    pub const fn new(units: u64) -> Fuel {
        Fuel { remaining: units }
    }

    pub const fn remaining(self) -> u64 {
        self.remaining
    }
}

impl Default for Fuel {
    fn default() -> Fuel {
        Fuel::new(DEFAULT_FUEL)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// No rule applies to a term that is not a value.
    Stuck,
    FuelExhausted,
    TypeError,
}

impl ErrorKind {
    pub const fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Stuck => "stuck",
            ErrorKind::FuelExhausted => "fuel",
            ErrorKind::TypeError => "type",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalError {
    pub kind: ErrorKind,
    pub phase: Relation,
    /// For `Stuck`, the irreducible term; for type errors, the whole term
    /// that was being checked.
    pub term: Term,
    pub message: String,
    pub type_error: Option<TypeError>,
}

impl EvalError {
    fn stuck(phase: Relation, term: &Term, message: impl Into<String>) -> EvalError {
        EvalError {
            kind: ErrorKind::Stuck,
            phase,
            term: term.clone(),
            message: message.into(),
            type_error: None,
        }
    }

    fn typing(term: &Term, err: TypeError) -> EvalError {
        EvalError {
            kind: ErrorKind::TypeError,
            phase: Relation::Type,
            term: term.clone(),
            message: err.to_string(),
            type_error: Some(err),
        }
    }
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.kind, &self.type_error) {
            (ErrorKind::TypeError, Some(te)) => {
                write!(f, "error[type]: {te}")?;
                if let Some(cp) = te.phase {
                    write!(f, " ({cp})")?;
                }
                if te.at != self.term {
                    write!(f, " in `{}`", self.term)?;
                }
                Ok(())
            }
            (ErrorKind::FuelExhausted, _) => write!(
                f,
                "error[fuel]: {} during {} at `{}`",
                self.message, self.phase, self.term
            ),
            (kind, _) => write!(
                f,
                "error[{}]: {} at `{}` ({})",
                kind.as_str(),
                self.message,
                self.term,
                self.phase
            ),
        }
    }
}

impl std::error::Error for EvalError {}

/// The result of one relation, with its derivation when tracing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Judged {
    pub term: Term,
    pub derivation: Option<Derivation>,
}

type Step = Result<Judged, EvalError>;

/// Per-run evaluation state.
#[derive(Clone, Debug)]
pub struct Machine {
    mode: Mode,
    fuel: Fuel,
    trace: bool,
}

impl Machine {
    pub fn new(mode: Mode, fuel: Fuel, trace: bool) -> Machine {
        Machine { mode, fuel, trace }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn fuel(&self) -> Fuel {
        self.fuel
    }

    fn tick(&mut self, rel: Relation, m: &Term) -> Result<(), EvalError> {
        if self.fuel.remaining == 0 {
            return Err(EvalError {
                kind: ErrorKind::FuelExhausted,
                phase: rel,
                term: m.clone(),
                message: "fuel exhausted".into(),
                type_error: None,
            });
        }
        self.fuel.remaining -= 1;
        Ok(())
    }

    fn conclude(
        &self,
        rule: &'static str,
        relation: Relation,
        input: &Term,
        output: Term,
        premises: Vec<Option<Derivation>>,
    ) -> Judged {
        let derivation = self.trace.then(|| Derivation {
            rule,
            relation,
            input: input.clone(),
            output: Judgement::Term(output.clone()),
            premises: premises.into_iter().flatten().collect(),
        });
        Judged {
            term: output,
            derivation,
        }
    }

    fn type_node(&self, m: &Term, ty: &TypeExpr) -> Option<Derivation> {
        self.trace.then(|| Derivation {
            rule: "Typecheck",
            relation: Relation::Type,
            input: m.clone(),
            output: Judgement::Type(ty.clone()),
            premises: vec![],
        })
    }

    /// `⊢ m : expected` in the empty environment.
    pub fn check(
        &mut self,
        m: &Term,
        expected: &TypeExpr,
        at: CheckPoint,
    ) -> Result<Option<Derivation>, EvalError> {
        self.tick(Relation::Type, m)?;
        typing::check(&TypeEnv::new(), m, expected)
            .map_err(|e| EvalError::typing(m, TypeError { phase: Some(at), ..e }))?;
        Ok(self.type_node(m, expected))
    }

    /// Infers a closed type for `m` in the empty environment.
    pub fn infer(
        &mut self,
        m: &Term,
        at: CheckPoint,
    ) -> Result<(TypeExpr, Option<Derivation>), EvalError> {
        self.tick(Relation::Type, m)?;
        let ty = typing::infer(&TypeEnv::new(), m)
            .map_err(|e| EvalError::typing(m, TypeError { phase: Some(at), ..e }))?;
        let node = self.type_node(m, &ty);
        Ok((ty, node))
    }

    /// Applies one relation.
    pub fn apply(&mut self, rel: Relation, m: &Term) -> Step {
        match rel {
            Relation::Ct => self.ct(m),
            Relation::Dl => self.dl(m),
            Relation::Ul => self.ul(m),
            Relation::Rt => self.rt(m),
            Relation::Type => {
                let (_, node) = self.infer(m, CheckPoint::Residual)?;
                Ok(Judged {
                    term: m.clone(),
                    derivation: node,
                })
            }
        }
    }

    fn all(
        &mut self,
        args: &[Term],
        f: fn(&mut Machine, &Term) -> Step,
    ) -> Result<(Vec<Term>, Vec<Option<Derivation>>), EvalError> {
        let mut terms = Vec::with_capacity(args.len());
        let mut derivs = Vec::with_capacity(args.len());
        for a in args {
            let j = f(self, a)?;
            terms.push(j.term);
            derivs.push(j.derivation);
        }
        Ok((terms, derivs))
    }

    /// Compile-time reduction: runs every top-level splice and expands
    /// every quote.
    pub fn ct(&mut self, m: &Term) -> Step {
        stacker::maybe_grow(STACK_RED_ZONE, STACK_SEGMENT, || self.ct_inner(m))
    }

    fn ct_inner(&mut self, m: &Term) -> Step {
        self.tick(Relation::Ct, m)?;
        let ct = Relation::Ct;
        match m {
            Term::Var(_) => Ok(self.conclude("Var ct", ct, m, m.clone(), vec![])),
            Term::Int(_) | Term::Str(_) | Term::Bool(_) => {
                Ok(self.conclude("Const ct", ct, m, m.clone(), vec![]))
            }
            Term::TagLit(_) => Ok(self.conclude("Tag ct", ct, m, m.clone(), vec![])),
            Term::App(f, a) => {
                let f = self.ct(f)?;
                let a = self.ct(a)?;
                let out = Term::app(f.term, a.term);
                Ok(self.conclude("App ct", ct, m, out, vec![f.derivation, a.derivation]))
            }
            Term::Lam { param, annot, body } => {
                let b = self.ct(body)?;
                let out = Term::Lam {
                    param: param.clone(),
                    annot: annot.clone(),
                    body: Box::new(b.term),
                };
                Ok(self.conclude("Lam ct", ct, m, out, vec![b.derivation]))
            }
            Term::Rec {
                name,
                param,
                annot,
                body,
            } => {
                let b = self.ct(body)?;
                let out = Term::Rec {
                    name: name.clone(),
                    param: param.clone(),
                    annot: annot.clone(),
                    body: Box::new(b.term),
                };
                Ok(self.conclude("Rec ct", ct, m, out, vec![b.derivation]))
            }
            Term::BinOp(op, a, b) => {
                let a = self.ct(a)?;
                let b = self.ct(b)?;
                let out = Term::bin(*op, a.term, b.term);
                Ok(self.conclude(binop_rule(*op, ct), ct, m, out, vec![a.derivation, b.derivation]))
            }
            Term::If(c, t, e) => {
                let c = self.ct(c)?;
                let t = self.ct(t)?;
                let e = self.ct(e)?;
                let out = Term::if_(c.term, t.term, e.term);
                let ps = vec![c.derivation, t.derivation, e.derivation];
                Ok(self.conclude("If ct", ct, m, out, ps))
            }
            Term::Ast(tag, args) => {
                let (terms, ps) = self.all(args, Machine::ct)?;
                let rule = if tag.name == TagName::Promote {
                    "Promote ct"
                } else {
                    "Ast_c ct"
                };
                Ok(self.conclude(rule, ct, m, Term::Ast(tag.clone(), terms), ps))
            }
            Term::Eval(annot, b) => {
                let b = self.ct(b)?;
                let out = Term::eval(annot.clone(), b.term);
                Ok(self.conclude("Eval ct", ct, m, out, vec![b.derivation]))
            }
            Term::Lift(b) => {
                let b = self.ct(b)?;
                Ok(self.conclude("Lift ct", ct, m, Term::lift(b.term), vec![b.derivation]))
            }
            Term::DownMl(body) => {
                let a = self.ct(body)?;
                let checked = match self.mode {
                    Mode::Typed => self.check(&a.term, &TypeExpr::Code, CheckPoint::DownMl)?,
                    Mode::Untyped => None,
                };
                let b = self.rt(&a.term)?;
                let c = self.dl(&b.term)?;
                let ps = vec![a.derivation, checked, b.derivation, c.derivation];
                Ok(self.conclude("DownML ct", ct, m, c.term, ps))
            }
            Term::UpMl(body) => {
                let a = self.ul(body)?;
                Ok(self.conclude("UpML ct", ct, m, a.term, vec![a.derivation]))
            }
            Term::LetDown { name, bound, body } => {
                let a = self.ct(bound)?;
                let typed = match self.mode {
                    Mode::Typed => self.infer(&a.term, CheckPoint::LetDown)?.1,
                    Mode::Untyped => None,
                };
                let b = self.rt(&a.term)?;
                let c = self.ct(&subst(body, &b.term, name))?;
                let ps = vec![a.derivation, typed, b.derivation, c.derivation];
                Ok(self.conclude("Let ct", ct, m, c.term, ps))
            }
        }
    }

    /// Converts an AST value into the program it represents.
    pub fn dl(&mut self, m: &Term) -> Step {
        stacker::maybe_grow(STACK_RED_ZONE, STACK_SEGMENT, || self.dl_inner(m))
    }

    fn dl_inner(&mut self, m: &Term) -> Step {
        self.tick(Relation::Dl, m)?;
        let dl = Relation::Dl;
        let (tag, args) = match m {
            Term::TagLit(_) => return Ok(self.conclude("Tag dl", dl, m, m.clone(), vec![])),
            Term::Ast(tag, args) => (tag, args),
            _ => return Err(EvalError::stuck(dl, m, "not an AST value")),
        };
        if tag.name == TagName::Promote {
            return self.dl_promote(m, args);
        }
        if !signature::check_arity(tag.name, args.len()) {
            return Err(EvalError::stuck(
                dl,
                m,
                format!(
                    "`{}` expects {} argument(s), found {}",
                    tag.name.ctor_keyword(),
                    signature::describe_arity(tag.name),
                    args.len()
                ),
            ));
        }
        match (tag.name, args.as_slice()) {
            (TagName::Var, [Term::Str(x)]) => {
                Ok(self.conclude("Var dl", dl, m, Term::var(x.as_str()), vec![]))
            }
            (TagName::Var, _) => Err(EvalError::stuck(dl, m, "`astVar` needs a string literal")),
            (TagName::Int, [n @ Term::Int(_)]) => Ok(self.conclude("Int dl", dl, m, n.clone(), vec![])),
            (TagName::Str, [s @ Term::Str(_)]) => {
                Ok(self.conclude("String dl", dl, m, s.clone(), vec![]))
            }
            (TagName::Bool, [b @ Term::Bool(_)]) => {
                Ok(self.conclude("Bool dl", dl, m, b.clone(), vec![]))
            }
            (TagName::Int | TagName::Str | TagName::Bool, _) => Err(EvalError::stuck(
                dl,
                m,
                format!("`{}` needs a literal argument", tag.name.ctor_keyword()),
            )),
            (TagName::App, [f, a]) => {
                let f = self.dl(f)?;
                let a = self.dl(a)?;
                let out = Term::app(f.term, a.term);
                Ok(self.conclude("App dl", dl, m, out, vec![f.derivation, a.derivation]))
            }
            (TagName::Lam, [x, body]) => {
                let (x, px) = self.dl_binder(m, x)?;
                let b = self.dl(body)?;
                Ok(self.conclude("Lam dl", dl, m, Term::lam(x, b.term), vec![px, b.derivation]))
            }
            (TagName::Rec, [g, x, body]) => {
                let (g, pg) = self.dl_binder(m, g)?;
                let (x, px) = self.dl_binder(m, x)?;
                let b = self.dl(body)?;
                let ps = vec![pg, px, b.derivation];
                Ok(self.conclude("Rec dl", dl, m, Term::rec(g, x, b.term), ps))
            }
            (TagName::Add | TagName::Sub | TagName::Mul | TagName::Eq, [a, b]) => {
                let op = tag.name.bin_op().expect("arithmetic tag");
                let a = self.dl(a)?;
                let b = self.dl(b)?;
                let out = Term::bin(op, a.term, b.term);
                Ok(self.conclude(binop_rule(op, dl), dl, m, out, vec![a.derivation, b.derivation]))
            }
            (TagName::If, [c, t, e]) => {
                let c = self.dl(c)?;
                let t = self.dl(t)?;
                let e = self.dl(e)?;
                let out = Term::if_(c.term, t.term, e.term);
                let ps = vec![c.derivation, t.derivation, e.derivation];
                Ok(self.conclude("If dl", dl, m, out, ps))
            }
            (TagName::Eval, [b]) => {
                let b = self.dl(b)?;
                let out = Term::eval(tag.eval_annot.clone(), b.term);
                Ok(self.conclude("Eval dl", dl, m, out, vec![b.derivation]))
            }
            (TagName::Lift, [b]) => {
                let b = self.dl(b)?;
                Ok(self.conclude("Lift dl", dl, m, Term::lift(b.term), vec![b.derivation]))
            }
            _ => unreachable!("arity checked above"),
        }
    }

    fn dl_binder(&mut self, whole: &Term, m: &Term) -> Result<(String, Option<Derivation>), EvalError> {
        let j = self.dl(m)?;
        match j.term {
            Term::Str(x) => Ok((x, j.derivation)),
            _ => Err(EvalError::stuck(
                Relation::Dl,
                whole,
                "binder position does not convert to a string",
            )),
        }
    }

    fn dl_promote(&mut self, m: &Term, args: &[Term]) -> Step {
        let dl = Relation::Dl;
        let Some((first, rest)) = args.split_first() else {
            return Err(EvalError::stuck(dl, m, "`astPromote` needs a tag argument"));
        };
        let l = self.dl(first)?;
        match l.term {
            Term::TagLit(t) if t.name != TagName::Promote => {
                let (terms, mut ps) = self.all(rest, Machine::dl)?;
                ps.insert(0, l.derivation);
                Ok(self.conclude("Promote dl 1", dl, m, Term::Ast(t, terms), ps))
            }
            Term::TagLit(_) => {
                let Some((second, rest)) = rest.split_first() else {
                    return Err(EvalError::stuck(dl, m, "promoted `astPromote` needs a tag argument"));
                };
                let t = self.dl(second)?;
                if !matches!(t.term, Term::TagLit(_)) {
                    return Err(EvalError::stuck(dl, m, "promoted tag does not convert to a tag"));
                }
                let (mut terms, mut ps) = self.all(rest, Machine::dl)?;
                terms.insert(0, t.term);
                ps.insert(0, t.derivation);
                ps.insert(0, l.derivation);
                let out = Term::ast(TagName::Promote, terms);
                Ok(self.conclude("Promote dl 2", dl, m, out, ps))
            }
            _ => Err(EvalError::stuck(dl, m, "first argument of `astPromote` is not a tag")),
        }
    }

    /// Converts program syntax into the AST that represents it.
    pub fn ul(&mut self, m: &Term) -> Step {
        stacker::maybe_grow(STACK_RED_ZONE, STACK_SEGMENT, || self.ul_inner(m))
    }

    fn ul_inner(&mut self, m: &Term) -> Step {
        self.tick(Relation::Ul, m)?;
        let ul = Relation::Ul;
        match m {
            Term::Var(x) => Ok(self.conclude("Var ul", ul, m, Term::ast_var(x), vec![])),
            Term::Str(_) => {
                let out = Term::ast(TagName::Str, vec![m.clone()]);
                Ok(self.conclude("String ul", ul, m, out, vec![]))
            }
            Term::Int(_) => {
                let out = Term::ast(TagName::Int, vec![m.clone()]);
                Ok(self.conclude("Int ul", ul, m, out, vec![]))
            }
            Term::Bool(_) => {
                let out = Term::ast(TagName::Bool, vec![m.clone()]);
                Ok(self.conclude("Bool ul", ul, m, out, vec![]))
            }
            Term::TagLit(_) => Ok(self.conclude("Tag ul", ul, m, m.clone(), vec![])),
            Term::App(f, a) => {
                let f = self.ul(f)?;
                let a = self.ul(a)?;
                let out = Term::ast(TagName::App, vec![f.term, a.term]);
                Ok(self.conclude("App ul", ul, m, out, vec![f.derivation, a.derivation]))
            }
            Term::Lam { param, body, .. } => {
                let b = self.ul(body)?;
                let out = Term::ast_lam(param, b.term);
                Ok(self.conclude("Lam ul", ul, m, out, vec![b.derivation]))
            }
            Term::Rec {
                name, param, body, ..
            } => {
                let b = self.ul(body)?;
                let out = Term::ast(
                    TagName::Rec,
                    vec![Term::ast_str(name), Term::ast_str(param), b.term],
                );
                Ok(self.conclude("Rec ul", ul, m, out, vec![b.derivation]))
            }
            Term::BinOp(op, a, b) => {
                let a = self.ul(a)?;
                let b = self.ul(b)?;
                let out = Term::ast(op.tag(), vec![a.term, b.term]);
                Ok(self.conclude(binop_rule(*op, ul), ul, m, out, vec![a.derivation, b.derivation]))
            }
            Term::If(c, t, e) => {
                let c = self.ul(c)?;
                let t = self.ul(t)?;
                let e = self.ul(e)?;
                let out = Term::ast(TagName::If, vec![c.term, t.term, e.term]);
                let ps = vec![c.derivation, t.derivation, e.derivation];
                Ok(self.conclude("If ul", ul, m, out, ps))
            }
            Term::Eval(annot, b) => {
                let b = self.ul(b)?;
                let out = Term::ast(Tag::eval(annot.clone()), vec![b.term]);
                Ok(self.conclude("Eval ul", ul, m, out, vec![b.derivation]))
            }
            Term::Lift(b) => {
                let b = self.ul(b)?;
                let out = Term::ast(TagName::Lift, vec![b.term]);
                Ok(self.conclude("Lift ul", ul, m, out, vec![b.derivation]))
            }
            Term::Ast(tag, args) => {
                let (mut terms, ps) = self.all(args, Machine::ul)?;
                terms.insert(0, Term::TagLit(tag.clone()));
                let out = Term::ast(TagName::Promote, terms);
                Ok(self.conclude("Ast ul", ul, m, out, ps))
            }
            Term::UpMl(body) => {
                let a = self.ul(body)?;
                let b = self.ul(&a.term)?;
                Ok(self.conclude("UpML ul", ul, m, b.term, vec![a.derivation, b.derivation]))
            }
            Term::DownMl(body) => {
                let a = self.ct(body)?;
                Ok(self.conclude("DownML ul", ul, m, a.term, vec![a.derivation]))
            }
            Term::LetDown { .. } => Err(EvalError::stuck(
                ul,
                m,
                "`letdown` has no AST representation and cannot appear inside a quote",
            )),
        }
    }

    /// Call-by-value run-time evaluation.
    pub fn rt(&mut self, m: &Term) -> Step {
        stacker::maybe_grow(STACK_RED_ZONE, STACK_SEGMENT, || self.rt_inner(m))
    }

    fn rt_inner(&mut self, m: &Term) -> Step {
        self.tick(Relation::Rt, m)?;
        let rt = Relation::Rt;
        match m {
            Term::Int(_) | Term::Str(_) | Term::Bool(_) => {
                Ok(self.conclude("Const", rt, m, m.clone(), vec![]))
            }
            Term::Lam { .. } => Ok(self.conclude("Lam", rt, m, m.clone(), vec![])),
            Term::Rec { .. } => Ok(self.conclude("Rec", rt, m, m.clone(), vec![])),
            Term::TagLit(_) => Ok(self.conclude("Tag", rt, m, m.clone(), vec![])),
            Term::App(f, a) => {
                let f = self.rt(f)?;
                let a = self.rt(a)?;
                let (rule, body) = match &f.term {
                    Term::Lam { param, body, .. } => ("App", subst(body, &a.term, param)),
                    Term::Rec {
                        name, param, body, ..
                    } => {
                        let unrolled = if name == param {
                            (**body).clone()
                        } else {
                            subst(body, &f.term, name)
                        };
                        ("App rec", subst(&unrolled, &a.term, param))
                    }
                    other => {
                        let stuck = Term::app(other.clone(), a.term);
                        return Err(EvalError::stuck(rt, &stuck, "application of a non-function"));
                    }
                };
                let r = self.rt(&body)?;
                let ps = vec![f.derivation, a.derivation, r.derivation];
                Ok(self.conclude(rule, rt, m, r.term, ps))
            }
            Term::BinOp(op, a, b) => {
                let a = self.rt(a)?;
                let b = self.rt(b)?;
                let out = match (op, &a.term, &b.term) {
                    (BinOp::Add, Term::Int(x), Term::Int(y)) => Term::Int(x + y),
                    (BinOp::Sub, Term::Int(x), Term::Int(y)) => Term::Int(x - y),
                    (BinOp::Mul, Term::Int(x), Term::Int(y)) => Term::Int(x * y),
                    (BinOp::Eq, Term::Int(x), Term::Int(y)) => Term::Bool(x == y),
                    (BinOp::Eq, Term::Str(x), Term::Str(y)) => Term::Bool(x == y),
                    _ => {
                        let stuck = Term::bin(*op, a.term, b.term);
                        return Err(EvalError::stuck(
                            rt,
                            &stuck,
                            format!("`{}` is not defined on these operands", op.symbol()),
                        ));
                    }
                };
                Ok(self.conclude(binop_rule(*op, rt), rt, m, out, vec![a.derivation, b.derivation]))
            }
            Term::If(c, t, e) => {
                let c = self.rt(c)?;
                let (rule, branch) = match c.term {
                    Term::Bool(true) => ("If true", t),
                    Term::Bool(false) => ("If false", e),
                    other => {
                        let stuck = Term::if_(other, (**t).clone(), (**e).clone());
                        return Err(EvalError::stuck(rt, &stuck, "condition is not a boolean"));
                    }
                };
                let r = self.rt(branch)?;
                Ok(self.conclude(rule, rt, m, r.term, vec![c.derivation, r.derivation]))
            }
            Term::Ast(tag, args) => {
                let (terms, ps) = self.all(args, Machine::rt)?;
                if tag.name == TagName::Promote && !matches!(terms.first(), Some(Term::TagLit(_))) {
                    let stuck = Term::Ast(tag.clone(), terms);
                    return Err(EvalError::stuck(
                        rt,
                        &stuck,
                        "first argument of `astPromote` is not a tag",
                    ));
                }
                let rule = if tag.name == TagName::Promote {
                    "Promote"
                } else {
                    "Ast_c"
                };
                Ok(self.conclude(rule, rt, m, Term::Ast(tag.clone(), terms), ps))
            }
            Term::Eval(annot, l) => {
                let code = self.rt(l)?;
                let prog = self.dl(&code.term)?;
                let checked = match (self.mode, annot) {
                    (Mode::Untyped, _) => None,
                    (Mode::Typed, Some(ty)) => self.check(&prog.term, ty, CheckPoint::Eval)?,
                    (Mode::Typed, None) => {
                        return Err(EvalError {
                            kind: ErrorKind::TypeError,
                            phase: Relation::Type,
                            term: m.clone(),
                            message: "`eval` needs a type annotation in typed mode".into(),
                            type_error: None,
                        })
                    }
                };
                let v = self.rt(&prog.term)?;
                let ps = vec![code.derivation, prog.derivation, checked, v.derivation];
                Ok(self.conclude("Eval rt", rt, m, v.term, ps))
            }
            Term::Lift(b) => {
                let v = self.rt(b)?;
                let (rule, tag) = match &v.term {
                    Term::Int(_) => ("Lift int", TagName::Int),
                    Term::Str(_) => ("Lift string", TagName::Str),
                    Term::Bool(_) => ("Lift bool", TagName::Bool),
                    other => {
                        let stuck = Term::lift(other.clone());
                        return Err(EvalError::stuck(rt, &stuck, "only constants can be lifted"));
                    }
                };
                let out = Term::ast(tag, vec![v.term]);
                Ok(self.conclude(rule, rt, m, out, vec![v.derivation]))
            }
            Term::Var(x) => Err(EvalError::stuck(rt, m, format!("unbound variable `{x}`"))),
            Term::DownMl(_) | Term::UpMl(_) | Term::LetDown { .. } => Err(EvalError::stuck(
                rt,
                m,
                "compile-time construct reached run time",
            )),
        }
    }
}

fn binop_rule(op: BinOp, rel: Relation) -> &'static str {
    match (rel, op) {
        (Relation::Ct, BinOp::Add) => "Add ct",
        (Relation::Ct, BinOp::Sub) => "Sub ct",
        (Relation::Ct, BinOp::Mul) => "Mul ct",
        (Relation::Ct, BinOp::Eq) => "Eq ct",
        (Relation::Dl, BinOp::Add) => "Add dl",
        (Relation::Dl, BinOp::Sub) => "Sub dl",
        (Relation::Dl, BinOp::Mul) => "Mul dl",
        (Relation::Dl, BinOp::Eq) => "Eq dl",
        (Relation::Ul, BinOp::Add) => "Add ul",
        (Relation::Ul, BinOp::Sub) => "Sub ul",
        (Relation::Ul, BinOp::Mul) => "Mul ul",
        (Relation::Ul, BinOp::Eq) => "Eq ul",
        (_, BinOp::Add) => "Add",
        (_, BinOp::Sub) => "Sub",
        (_, BinOp::Mul) => "Mul",
        (_, BinOp::Eq) => "Eq",
    }
}

/// Everything one compile-and-run produces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PipelineOutcome {
    pub residual: Term,
    /// Present in typed mode.
    pub residual_type: Option<TypeExpr>,
    pub value: Term,
    pub ct_derivation: Option<Derivation>,
    pub type_derivation: Option<Derivation>,
    pub rt_derivation: Option<Derivation>,
    pub fuel_used: u64,
}

/// `M ⇓ct A`, then `⊢ A : α` in typed mode, then `A ⇓rt V`.
pub fn run_pipeline(
    m: &Term,
    mode: Mode,
    fuel: Fuel,
    trace: bool,
) -> Result<PipelineOutcome, EvalError> {
    if let Some(x) = unbound_vars(m).into_iter().next() {
        return Err(EvalError::stuck(
            Relation::Ct,
            m,
            format!("program is not closed: `{x}` is free"),
        ));
    }
    let mut machine = Machine::new(mode, fuel, trace);
    let compiled = machine.ct(m)?;
    let (residual_type, type_derivation) = match mode {
        Mode::Typed => {
            let (ty, d) = machine.infer(&compiled.term, CheckPoint::Residual)?;
            (Some(ty), d)
        }
        Mode::Untyped => (None, None),
    };
    let run = machine.rt(&compiled.term)?;
    Ok(PipelineOutcome {
        residual: compiled.term,
        residual_type,
        value: run.term,
        ct_derivation: compiled.derivation,
        type_derivation,
        rt_derivation: run.derivation,
        fuel_used: fuel.remaining() - machine.fuel().remaining(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_term;
    use crate::syntax::alpha_eq;

    fn p(s: &str) -> Term {
        parse_term(s, Mode::Untyped).unwrap()
    }

    fn pt(s: &str) -> Term {
        parse_term(s, Mode::Typed).unwrap()
    }

    fn run(mode: Mode, rel: Relation, m: &Term) -> Step {
        Machine::new(mode, Fuel::default(), true).apply(rel, m)
    }

    fn ct(s: &str) -> Term {
        run(Mode::Untyped, Relation::Ct, &p(s)).unwrap().term
    }

    fn assert_alpha(got: &Term, want: &str) {
        let want = p(want);
        assert!(alpha_eq(got, &want), "got `{got}`, want `{want}`");
    }

    #[test]
    fn ct_examples() {
        assert_eq!(ct("(\\z. z) $(astStr((\\y. y) \"x\"))"), p("(\\z. z) \"x\""));
        assert_eq!(ct("(\\x. x) $((\\x. x) astInt(7))"), p("(\\x. x) 7"));
        assert_eq!(ct("\\x. $(astVar(\"x\"))"), p("\\x. x"));
        assert_eq!(ct("\\y. $(astVar(\"x\"))"), p("\\y. x"));
        assert_eq!(ct("\\x. x + 1"), p("\\x. x + 1"));
    }

    #[test]
    fn splice_identity_shape() {
        let j = run(Mode::Untyped, Relation::Ct, &p("(\\x. x) $((\\x. x) astInt(7))")).unwrap();
        let d = j.derivation.unwrap();
        assert_eq!(d.rule, "App ct");
        let down = &d.premises[1];
        assert_eq!(down.rule, "DownML ct");
        let rules: Vec<_> = down.premises.iter().map(|p| (p.rule, p.relation)).collect();
        assert_eq!(
            rules,
            vec![
                ("App ct", Relation::Ct),
                ("App", Relation::Rt),
                ("Int dl", Relation::Dl)
            ]
        );
    }

    #[test]
    fn dl_examples() {
        let dl = |s: &str| run(Mode::Untyped, Relation::Dl, &p(s));
        assert_eq!(dl("astVar(\"x\")").unwrap().term, p("x"));
        assert_eq!(dl("astLam(astStr(\"x\"), astVar(\"x\"))").unwrap().term, p("\\x. x"));
        assert_eq!(
            dl("astPromote(#str, astStr(\"x\"))").unwrap().term,
            p("astStr(\"x\")")
        );
        let e = dl("\\x. x").unwrap_err();
        assert_eq!((e.kind, e.phase), (ErrorKind::Stuck, Relation::Dl));
        let bad = Term::ast(TagName::Int, vec![Term::int(1), Term::int(1)]);
        let e = run(Mode::Untyped, Relation::Dl, &bad).unwrap_err();
        assert_eq!((e.kind, e.phase), (ErrorKind::Stuck, Relation::Dl));
        assert_eq!(dl("astVar(\"let\")").unwrap().term.to_string(), "`let`");
        assert_eq!(
            dl("astLam(astStr(\"\"), astVar(\"\"))").unwrap().term.to_string(),
            "\\``. ``"
        );
        assert!(dl("astLam(\"x\", astVar(\"x\"))").is_err());
    }

    #[test]
    fn ul_examples() {
        let ul = |s: &str| run(Mode::Untyped, Relation::Ul, &p(s)).unwrap().term;
        assert_eq!(ul("x"), p("astVar(\"x\")"));
        assert_eq!(ul("astInt(3)"), p("astPromote(#int, astInt(3))"));
        assert_eq!(ul("#lam"), p("#lam"));
        assert_eq!(ul("[| x |]"), p("astPromote(#var, astStr(\"x\"))"));
        assert_eq!(
            ct("[| 2 + $([| 3 + 4 |]) |]"),
            p("astAdd(astInt(2), astAdd(astInt(3), astInt(4)))")
        );
        let e = run(Mode::Untyped, Relation::Ul, &p("letdown x = 1 in x")).unwrap_err();
        assert_eq!(e.phase, Relation::Ul);
    }

    #[test]
    fn rt_examples() {
        let rt = |s: &str| run(Mode::Untyped, Relation::Rt, &p(s));
        assert_eq!(rt("(\\x. x) (eval((\\x. x) astInt(7)))").unwrap().term, p("7"));
        assert_eq!(rt("lift(2 + 3)").unwrap().term, p("astInt(5)"));
        assert_eq!(rt("astInt(2 + 3)").unwrap().term, p("astInt(5)"));
        assert_eq!(
            rt("astPromote((\\t. t) #int, astInt(1))").unwrap().term,
            p("astPromote(#int, astInt(1))")
        );
        let e = rt("2 + \\x. x").unwrap_err();
        assert_eq!((e.kind, e.phase), (ErrorKind::Stuck, Relation::Rt));
        assert_eq!(e.term, p("2 + \\x. x"));
        assert_eq!(rt("\"a\" == \"a\"").unwrap().term, Term::Bool(true));
        assert!(rt("lift(\\x. x)").is_err());
    }

    #[test]
    fn rec_unrolls() {
        let m = p("(rec f n. if n == 0 then 1 else n * f (n - 1)) 5");
        assert_eq!(run(Mode::Untyped, Relation::Rt, &m).unwrap().term, Term::int(120));
    }

    #[test]
    fn values_are_fixed_points() {
        for s in ["7", "\\x. x", "#lam", "astLam(astStr(\"x\"), astVar(\"x\"))"] {
            let m = p(s);
            assert_eq!(run(Mode::Untyped, Relation::Rt, &m).unwrap().term, m);
        }
    }

    const POWER: &str = "letdown M = rec p n. if n == 1 then [| x |] else [| x * $(p (n - 1)) |] in \
                         letdown power = \\n. [| \\x. $(M n) |] in ";

    #[test]
    fn staged_power() {
        let m = p(&format!("{POWER}$(power 3)"));
        let out = run_pipeline(&m, Mode::Untyped, Fuel::default(), false).unwrap();
        assert_alpha(&out.residual, "\\x. x * (x * x)");

        let m = p(&format!("{POWER}letdown cube = $(power 3) in cube 4 + cube 5"));
        let out = run_pipeline(&m, Mode::Untyped, Fuel::default(), false).unwrap();
        assert_eq!(out.value, Term::int(189));

        let m = pt(&format!("{POWER}let cube = eval{{Int -> Int}}(power 3) in cube 4 + cube 5"));
        let out = run_pipeline(&m, Mode::Typed, Fuel::default(), false).unwrap();
        assert_eq!(out.value, Term::int(189));
        assert_eq!(out.residual_type, Some(TypeExpr::Int));
    }

    #[test]
    fn staged_type_errors() {
        let m = pt("2 + $(astLam(astStr(\"x\"), astVar(\"x\")))");
        let e = run_pipeline(&m, Mode::Typed, Fuel::default(), false).unwrap_err();
        assert_eq!((e.kind, e.phase), (ErrorKind::TypeError, Relation::Type));
        assert_eq!(e.term, pt("2 + \\x. x"));
        assert_eq!(
            e.to_string(),
            "error[type]: expected Int, found _ -> _ at `\\x. x` (residual check) in `2 + \\x. x`"
        );

        let arity = "astPromote(#promote, #int, astPromote(#int, astInt(1)), astPromote(#int, astInt(1)))";
        let m = pt(&format!("$($($({arity})))"));
        let e = run_pipeline(&m, Mode::Typed, Fuel::default(), false).unwrap_err();
        assert_eq!(e.kind, ErrorKind::TypeError);
        assert_eq!(e.term, Term::ast(TagName::Int, vec![Term::int(1), Term::int(1)]));
        let m = p(&format!("$($($({arity})))"));
        let e = run_pipeline(&m, Mode::Untyped, Fuel::default(), false).unwrap_err();
        assert_eq!((e.kind, e.phase), (ErrorKind::Stuck, Relation::Dl));
    }

    #[test]
    fn typed_eval_requires_matching_code() {
        let m = pt("eval{Int}(astLam(astStr(\"x\"), astVar(\"x\")))");
        let e = run_pipeline(&m, Mode::Typed, Fuel::default(), false).unwrap_err();
        assert_eq!(e.kind, ErrorKind::TypeError);
        assert_eq!(e.type_error.unwrap().phase, Some(CheckPoint::Eval));
    }

    #[test]
    fn fuel_is_reported_separately() {
        let m = p("(rec f n. f n) 0");
        let e = run_pipeline(&m, Mode::Untyped, Fuel::new(500), false).unwrap_err();
        assert_eq!(e.kind, ErrorKind::FuelExhausted);
    }

    #[test]
    fn open_programs_are_rejected() {
        let e = run_pipeline(&p("x"), Mode::Untyped, Fuel::default(), false).unwrap_err();
        assert_eq!((e.kind, e.phase), (ErrorKind::Stuck, Relation::Ct));
    }

    #[test]
    fn fuel_counts_rule_applications() {
        let m = p("(\\x. x) 7");
        let out = run_pipeline(&m, Mode::Untyped, Fuel::default(), true).unwrap();
        let nodes = out.ct_derivation.unwrap().size() + out.rt_derivation.unwrap().size();
        assert_eq!(out.fuel_used, nodes as u64);
    }
}
