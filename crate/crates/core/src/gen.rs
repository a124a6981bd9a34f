//! Random term generators for property tests.
//!
//! Generators draw from a proptest [`TestRng`], so a runner built from a
//! fixed seed replays the same programs. [`strategy`] wraps any of them as a
//! [`Strategy`]; generated values do not shrink.

use std::fmt;

use num_bigint::BigInt;
use proptest::prelude::RngExt;
use proptest::strategy::{Just, NewTree, Strategy};
use proptest::test_runner::{TestRng, TestRunner};

use crate::signature::{spec_for, Arity};
use crate::syntax::{BinOp, Tag, TagName, Term, TypeExpr};
use crate::Mode;

/// A [`Strategy`] backed by a plain generator function.
pub struct FromRng<F> {
    name: &'static str,
    gen: F,
}

impl<F> fmt::Debug for FromRng<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FromRng({})", self.name)
    }
}

impl<T, F> Strategy for FromRng<F>
where
    T: Clone + fmt::Debug,
    F: Fn(&mut TestRng) -> T,
{
    type Tree = Just<T>;
    type Value = T;

    fn new_tree(&self, runner: &mut TestRunner) -> NewTree<Self> {
        Ok(Just((self.gen)(runner.rng())))
    }
}

pub fn strategy<T, F>(name: &'static str, gen: F) -> FromRng<F>
where
    T: Clone + fmt::Debug,
    F: Fn(&mut TestRng) -> T,
{
    FromRng { name, gen }
}

fn pick<'a, T>(rng: &mut TestRng, xs: &'a [T]) -> &'a T {
    &xs[rng.random_range(0..xs.len())]
}

fn chance(rng: &mut TestRng, p: f64) -> bool {
    rng.random_bool(p)
}

const PLAIN_NAMES: [&str; 10] = ["x", "y", "z", "f", "g", "n", "m", "x1", "_a", "x'"];
const ODD_NAMES: [&str; 10] = [
    "", "1 x", "let", "astInt", "a`b", "λ", "tab\there", "back\\slash", "new\nline", "if",
];
const STRING_CHARS: [char; 20] = [
    'a', 'Z', '0', ' ', '"', '\\', '\n', '\t', '\r', '\0', '\u{7f}', 'é', '🦀', '`', '$', '|',
    ']', '#', '{', 'λ',
];

/// A variable name; mostly identifiers, sometimes text that must be
/// backquoted.
pub fn name(rng: &mut TestRng) -> String {
    if chance(rng, 0.15) {
        pick(rng, &ODD_NAMES).to_string()
    } else {
        pick(rng, &PLAIN_NAMES).to_string()
    }
}

pub fn string(rng: &mut TestRng) -> String {
    let len = rng.random_range(0..7);
    (0..len).map(|_| *pick(rng, &STRING_CHARS)).collect()
}

/// Small, word-sized and arbitrary-precision integers of either sign.
pub fn integer(rng: &mut TestRng) -> BigInt {
    match rng.random_range(0..10) {
        0..=5 => BigInt::from(rng.random_range(-10i64..100)),
        6 | 7 => BigInt::from(rng.random::<i64>()),
        _ => {
            let len = rng.random_range(9..25);
            let bytes: Vec<u8> = (0..len).map(|_| rng.random::<u8>()).collect();
            let n = BigInt::from_signed_bytes_le(&bytes);
            if chance(rng, 0.5) {
                -n
            } else {
                n
            }
        }
    }
}

/// A type without meta-variables.
pub fn type_expr(rng: &mut TestRng, depth: u32) -> TypeExpr {
    let k = if depth == 0 { rng.random_range(0..5) } else { rng.random_range(0..7) };
    match k {
        0 => TypeExpr::Int,
        1 => TypeExpr::Bool,
        2 => TypeExpr::String,
        3 => TypeExpr::Code,
        4 => TypeExpr::Tag(*pick(rng, &TagName::ALL)),
        _ => TypeExpr::arrow(type_expr(rng, depth - 1), type_expr(rng, depth - 1)),
    }
}

fn tag(rng: &mut TestRng, mode: Mode) -> Tag {
    let name = *pick(rng, &TagName::ALL);
    if name == TagName::Eval && mode == Mode::Typed {
        Tag::eval(Some(type_expr(rng, 1)))
    } else {
        Tag::new(name)
    }
}

/// A literal constant: integer, string or boolean.
pub fn constant(rng: &mut TestRng) -> Term {
    match rng.random_range(0..3) {
        0 => Term::Int(integer(rng)),
        1 => Term::Str(string(rng)),
        _ => Term::Bool(chance(rng, 0.5)),
    }
}

fn ast_args(rng: &mut TestRng, name: TagName, mut child: impl FnMut(&mut TestRng) -> Term) -> Vec<Term> {
    let n = match spec_for(name).arity {
        Arity::Fixed(n) => n,
        Arity::Variadic => rng.random_range(1..5),
    };
    (0..n).map(|_| child(rng)).collect()
}

/// Any syntactically valid term, with `eval` annotations exactly when
/// `mode` is typed. Terms may be open and need not evaluate.
pub fn any_term(rng: &mut TestRng, mode: Mode, depth: u32) -> Term {
    if depth == 0 || chance(rng, 0.2) {
        return match rng.random_range(0..5) {
            0 | 1 => Term::Var(name(rng)),
            2 => constant(rng),
            3 => Term::TagLit(tag(rng, mode)),
            _ => Term::Int(integer(rng)),
        };
    }
    let d = depth - 1;
    match rng.random_range(0..13) {
        0 => Term::app(any_term(rng, mode, d), any_term(rng, mode, d)),
        1 => Term::Lam {
            param: name(rng),
            annot: chance(rng, 0.3).then(|| type_expr(rng, 2)),
            body: Box::new(any_term(rng, mode, d)),
        },
        2 => Term::Rec {
            name: name(rng),
            param: name(rng),
            annot: chance(rng, 0.3).then(|| (type_expr(rng, 1), type_expr(rng, 1))),
            body: Box::new(any_term(rng, mode, d)),
        },
        3 => {
            let op = *pick(rng, &[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Eq]);
            Term::bin(op, any_term(rng, mode, d), any_term(rng, mode, d))
        }
        4 => Term::if_(any_term(rng, mode, d), any_term(rng, mode, d), any_term(rng, mode, d)),
        5 | 6 => {
            let t = tag(rng, mode);
            let args = ast_args(rng, t.name, |r| any_term(r, mode, d));
            Term::Ast(t, args)
        }
        7 => Term::down(any_term(rng, mode, d)),
        8 => Term::up(any_term(rng, mode, d)),
        9 => {
            let annot = (mode == Mode::Typed).then(|| type_expr(rng, 2));
            Term::eval(annot, any_term(rng, mode, d))
        }
        10 => Term::lift(any_term(rng, mode, d)),
        11 => Term::let_down(name(rng), any_term(rng, mode, d), any_term(rng, mode, d)),
        _ => Term::app(
            Term::app(any_term(rng, mode, d), any_term(rng, mode, d)),
            any_term(rng, mode, d),
        ),
    }
}

/// An ML-free term without `eval`, `lift` or annotations, whose promote
/// ASTs start with a tag literal: the domain on which `dl` inverts `ul`.
pub fn ml_free_term(rng: &mut TestRng, depth: u32) -> Term {
    if depth == 0 || chance(rng, 0.2) {
        return match rng.random_range(0..4) {
            0 => Term::Var(name(rng)),
            1 => Term::TagLit(tag(rng, Mode::Untyped)),
            _ => constant(rng),
        };
    }
    let d = depth - 1;
    match rng.random_range(0..7) {
        0 => Term::app(ml_free_term(rng, d), ml_free_term(rng, d)),
        1 => Term::lam(name(rng), ml_free_term(rng, d)),
        2 => Term::rec(name(rng), name(rng), ml_free_term(rng, d)),
        3 => {
            let op = *pick(rng, &[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Eq]);
            Term::bin(op, ml_free_term(rng, d), ml_free_term(rng, d))
        }
        4 => Term::if_(ml_free_term(rng, d), ml_free_term(rng, d), ml_free_term(rng, d)),
        _ => {
            let t = tag(rng, Mode::Untyped);
            let mut args = ast_args(rng, t.name, |r| ml_free_term(r, d));
            if t.name == TagName::Promote {
                args[0] = Term::TagLit(tag(rng, Mode::Untyped));
            }
            Term::Ast(t, args)
        }
    }
}

/// Types used by the staged program generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ty {
    Int,
    Bool,
    Str,
    Code,
    IntToInt,
    IntToCode,
}

impl Ty {
    pub const ALL: [Ty; 6] = [Ty::Int, Ty::Bool, Ty::Str, Ty::Code, Ty::IntToInt, Ty::IntToCode];

    pub fn to_type(self) -> TypeExpr {
        match self {
            Ty::Int => TypeExpr::Int,
            Ty::Bool => TypeExpr::Bool,
            Ty::Str => TypeExpr::String,
            Ty::Code => TypeExpr::Code,
            Ty::IntToInt => TypeExpr::arrow(TypeExpr::Int, TypeExpr::Int),
            Ty::IntToCode => TypeExpr::arrow(TypeExpr::Int, TypeExpr::Code),
        }
    }
}

#[derive(Clone, Debug)]
struct Binding {
    name: String,
    ty: Ty,
    /// Stage at which a `\` or `rec` bound the name; `None` for `letdown`,
    /// whose value is substituted at every stage.
    level: Option<i32>,
}

#[derive(Clone, Copy)]
struct Cx {
    level: i32,
    /// Under a quote that is not cancelled by a splice: the position is
    /// compiled by `ul`, which has no rule for `letdown`.
    quoted: bool,
}

const BINDER_NAMES: [&str; 7] = ["x", "y", "n", "f", "g", "k", "`1 x`"];

/// Type-directed generator of closed staged programs. Splice bodies only
/// mention names that exist when they run, so the programs are closed at
/// every stage; whether the generated code fits its context is left to the
/// staged checks.
struct Staged<'r> {
    rng: &'r mut TestRng,
    mode: Mode,
    env: Vec<Binding>,
}

impl Staged<'_> {
    fn binder(&mut self) -> String {
        pick(self.rng, &BINDER_NAMES).trim_matches('`').to_string()
    }

    fn usable(&self, ty: Ty, cx: Cx) -> Vec<String> {
        let mut out = Vec::new();
        for (i, b) in self.env.iter().enumerate() {
            let shadowed = self.env[i + 1..].iter().any(|later| later.name == b.name);
            let visible = b.level.is_none_or(|l| l == cx.level);
            if !shadowed && visible && b.ty == ty {
                out.push(b.name.clone());
            }
        }
        out
    }

    fn with<T>(&mut self, bindings: Vec<Binding>, f: impl FnOnce(&mut Self) -> T) -> T {
        let n = self.env.len();
        self.env.extend(bindings);
        let out = f(self);
        self.env.truncate(n);
        out
    }

    fn bound(&self, name: &str, ty: Ty, cx: Cx) -> Binding {
        Binding {
            name: name.to_string(),
            ty,
            level: Some(cx.level),
        }
    }

    fn annot(&mut self, ty: Ty) -> Option<TypeExpr> {
        (self.mode == Mode::Typed || chance(self.rng, 0.3)).then(|| ty.to_type())
    }

    fn eval_annot(&self, ty: Ty) -> Option<TypeExpr> {
        (self.mode == Mode::Typed).then(|| ty.to_type())
    }

    fn lam(&mut self, arg: Ty, res: Ty, cx: Cx, depth: u32) -> Term {
        let x = self.binder();
        let annot = if chance(self.rng, 0.9) { self.annot(arg) } else { None };
        let b = self.bound(&x, arg, cx);
        let body = self.with(vec![b], |s| s.term(res, cx, depth));
        Term::Lam {
            param: x,
            annot,
            body: Box::new(body),
        }
    }

    /// `rec f n. if n == 0 then base else step`, with `f` and `n` in scope
    /// of `step`.
    fn rec_fun(&mut self, res: Ty, cx: Cx, depth: u32) -> Term {
        let f = self.binder();
        let mut n = self.binder();
        if n == f {
            n.push('\'');
        }
        let base = self.term(res, cx, depth);
        let fb = self.bound(&f, if res == Ty::Int { Ty::IntToInt } else { Ty::IntToCode }, cx);
        let nb = self.bound(&n, Ty::Int, cx);
        let step = self.with(vec![fb, nb], |s| {
            let recursive = Term::app(
                Term::var(&f),
                Term::bin(BinOp::Sub, Term::var(&n), Term::int(1)),
            );
            let other = s.term(res, cx, depth);
            match res {
                Ty::Int => Term::bin(BinOp::Add, other, recursive),
                _ => Term::ast(TagName::App, vec![other, recursive]),
            }
        });
        let annot = if self.mode == Mode::Typed || chance(self.rng, 0.3) {
            Some((TypeExpr::Int, res.to_type()))
        } else {
            None
        };
        Term::Rec {
            name: f,
            param: n.clone(),
            annot,
            body: Box::new(Term::if_(
                Term::bin(BinOp::Eq, Term::var(&n), Term::int(0)),
                base,
                step,
            )),
        }
    }

    fn leaf(&mut self, ty: Ty, cx: Cx) -> Term {
        let vars = self.usable(ty, cx);
        if !vars.is_empty() && chance(self.rng, 0.5) {
            return Term::Var(pick(self.rng, &vars).clone());
        }
        match ty {
            Ty::Int => Term::int(self.rng.random_range(-3i64..10)),
            Ty::Bool => Term::Bool(chance(self.rng, 0.5)),
            Ty::Str => Term::Str(string(self.rng)),
            Ty::Code => match self.rng.random_range(0..3) {
                0 => Term::ast_int(self.rng.random_range(0i64..10)),
                1 => Term::lift(Term::int(self.rng.random_range(0i64..10))),
                _ => Term::up(Term::int(self.rng.random_range(0i64..10))),
            },
            Ty::IntToInt => self.lam(Ty::Int, Ty::Int, cx, 0),
            Ty::IntToCode => {
                let x = self.binder();
                Term::Lam {
                    param: x.clone(),
                    annot: self.annot(Ty::Int),
                    body: Box::new(Term::lift(Term::var(x))),
                }
            }
        }
    }

    fn term(&mut self, ty: Ty, cx: Cx, depth: u32) -> Term {
        if depth == 0 || chance(self.rng, 0.15) {
            return self.leaf(ty, cx);
        }
        let d = depth - 1;
        match self.rng.random_range(0..20) {
            0 => {
                let c = self.term(Ty::Bool, cx, d);
                let t = self.term(ty, cx, d);
                let e = self.term(ty, cx, d);
                Term::if_(c, t, e)
            }
            1 => {
                let arg = *pick(self.rng, &[Ty::Int, Ty::Bool, Ty::Str, Ty::Code]);
                let f = self.lam(arg, ty, cx, d);
                Term::app(f, self.term(arg, cx, d))
            }
            2 | 3 => Term::down(self.code_for(ty, Cx { level: cx.level - 1, quoted: false }, d)),
            4 => {
                let inner = Cx {
                    level: cx.level + 1,
                    quoted: true,
                };
                let body = if chance(self.rng, 0.8) {
                    Term::up(self.term(ty, inner, d))
                } else {
                    self.term(Ty::Code, cx, d)
                };
                Term::eval(self.eval_annot(ty), body)
            }
            5 if !cx.quoted => self.letdown(ty, cx, d),
            _ => self.specific(ty, cx, d),
        }
    }

    /// A `Code` expression meant to represent a term of type `ty`.
    fn code_for(&mut self, ty: Ty, cx: Cx, depth: u32) -> Term {
        if chance(self.rng, 0.8) {
            let inner = Cx {
                level: cx.level + 1,
                quoted: true,
            };
            Term::up(self.term(ty, inner, depth))
        } else {
            self.term(Ty::Code, cx, depth)
        }
    }

    fn letdown(&mut self, ty: Ty, cx: Cx, depth: u32) -> Term {
        let x = self.binder();
        let bty = *pick(self.rng, &[Ty::Int, Ty::Code, Ty::IntToCode, Ty::IntToInt]);
        // The bound term runs at compile time, before any enclosing binder
        // has a value.
        let outer: Vec<Binding> = self.env.iter().filter(|b| b.level.is_none()).cloned().collect();
        let saved = std::mem::replace(&mut self.env, outer);
        let bound = self.term(bty, Cx { level: cx.level, quoted: false }, depth);
        self.env = saved;
        let b = Binding {
            name: x.clone(),
            ty: bty,
            level: None,
        };
        let body = self.with(vec![b], |s| s.term(ty, cx, depth));
        Term::let_down(x, bound, body)
    }

    fn specific(&mut self, ty: Ty, cx: Cx, d: u32) -> Term {
        match ty {
            Ty::Int => match self.rng.random_range(0..5) {
                0 | 1 => {
                    let op = *pick(self.rng, &[BinOp::Add, BinOp::Sub, BinOp::Mul]);
                    Term::bin(op, self.term(Ty::Int, cx, d), self.term(Ty::Int, cx, d))
                }
                2 => Term::app(self.term(Ty::IntToInt, cx, d), self.term(Ty::Int, cx, d)),
                3 => {
                    let f = self.rec_fun(Ty::Int, cx, d);
                    Term::app(f, Term::int(self.rng.random_range(0i64..5)))
                }
                _ => self.leaf(ty, cx),
            },
            Ty::Bool => match self.rng.random_range(0..2) {
                0 => Term::bin(BinOp::Eq, self.term(Ty::Int, cx, d), self.term(Ty::Int, cx, d)),
                _ => self.leaf(ty, cx),
            },
            Ty::Str => self.leaf(ty, cx),
            Ty::Code => self.code(cx, d),
            Ty::IntToInt => match self.rng.random_range(0..3) {
                0 => self.rec_fun(Ty::Int, cx, d),
                _ => self.lam(Ty::Int, Ty::Int, cx, d),
            },
            Ty::IntToCode => match self.rng.random_range(0..3) {
                0 => self.rec_fun(Ty::Code, cx, d),
                _ => self.lam(Ty::Int, Ty::Code, cx, d),
            },
        }
    }

    fn code(&mut self, cx: Cx, d: u32) -> Term {
        let c = |s: &mut Self| s.term(Ty::Code, cx, d);
        match self.rng.random_range(0..16) {
            0 | 1 => {
                let ty = *pick(self.rng, &Ty::ALL);
                let inner = Cx {
                    level: cx.level + 1,
                    quoted: true,
                };
                Term::up(self.term(ty, inner, d))
            }
            2 => {
                let ty = *pick(self.rng, &[Ty::Int, Ty::Bool, Ty::Str]);
                Term::lift(self.term(ty, cx, d))
            }
            3 => Term::ast(TagName::Int, vec![self.term(Ty::Int, cx, d)]),
            4 => match self.rng.random_range(0..3) {
                0 => Term::ast(TagName::Str, vec![self.term(Ty::Str, cx, d)]),
                1 => Term::ast(TagName::Bool, vec![self.term(Ty::Bool, cx, d)]),
                _ => Term::ast_var(pick(self.rng, &BINDER_NAMES).trim_matches('`')),
            },
            5 => Term::ast(TagName::App, vec![c(self), c(self)]),
            6 => {
                let x = Term::ast_str(&self.binder());
                Term::ast(TagName::Lam, vec![x, c(self)])
            }
            7 => {
                let f = Term::ast_str(&self.binder());
                let x = Term::ast_str(&self.binder());
                Term::ast(TagName::Rec, vec![f, x, c(self)])
            }
            8 => {
                let t = *pick(self.rng, &[TagName::Add, TagName::Sub, TagName::Mul, TagName::Eq]);
                Term::ast(t, vec![c(self), c(self)])
            }
            9 => Term::ast(TagName::If, vec![c(self), c(self), c(self)]),
            10 => {
                let ty = *pick(self.rng, &Ty::ALL);
                Term::Ast(Tag::eval(self.eval_annot(ty)), vec![c(self)])
            }
            11 => Term::ast(TagName::Lift, vec![c(self)]),
            12 => {
                // Usually the constructor's own arity; occasionally not.
                let inner = *pick(self.rng, &[TagName::Int, TagName::App, TagName::Add, TagName::Lift, TagName::If]);
                let mut n = match spec_for(inner).arity {
                    Arity::Fixed(n) => n,
                    Arity::Variadic => 1,
                };
                if chance(self.rng, 0.2) {
                    n += 1;
                }
                let mut args = vec![Term::tag(inner)];
                args.extend((0..n).map(|_| c(self)));
                if chance(self.rng, 0.3) {
                    args.insert(0, Term::tag(TagName::Promote));
                }
                Term::ast(TagName::Promote, args)
            }
            13 => Term::eval(self.eval_annot(Ty::Code), c(self)),
            14 => Term::app(self.term(Ty::IntToCode, cx, d), self.term(Ty::Int, cx, d)),
            _ => self.leaf(Ty::Code, cx),
        }
    }
}

/// A closed staged program of a random type. In typed mode every `eval` is
/// annotated and most binders carry their type; in untyped mode no `eval`
/// is annotated.
pub fn staged_program(rng: &mut TestRng, mode: Mode, depth: u32) -> Term {
    let ty = *pick(rng, &[Ty::Int, Ty::Int, Ty::Bool, Ty::Str, Ty::Code, Ty::IntToInt]);
    staged_program_of(rng, mode, ty, depth)
}

pub fn staged_program_of(rng: &mut TestRng, mode: Mode, ty: Ty, depth: u32) -> Term {
    let mut g = Staged {
        rng,
        mode,
        env: Vec::new(),
    };
    g.term(
        ty,
        Cx {
            level: 0,
            quoted: false,
        },
        depth,
    )
}
