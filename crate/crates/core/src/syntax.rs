//! The term language: λ-core, AST constructors, tags, splices, quotes,
//! `eval`, `lift` and compile-time `letdown`, plus types.
//!
//! Substitution, free variables and α-equivalence live here too; they are
//! the only operations the relations in [`crate::reduction`] need from the
//! syntax.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;

/// Names of AST constructors. The set is closed and equal to the tagged
/// subset of [`crate::signature::registry`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TagName {
    Var,
    App,
    Lam,
    Rec,
    Int,
    Str,
    Bool,
    Add,
    Sub,
    Mul,
    Eq,
    If,
    Eval,
    Lift,
    Promote,
}

impl TagName {
    pub const ALL: [TagName; 15] = [
        TagName::Var,
        TagName::App,
        TagName::Lam,
        TagName::Rec,
        TagName::Int,
        TagName::Str,
        TagName::Bool,
        TagName::Add,
        TagName::Sub,
        TagName::Mul,
        TagName::Eq,
        TagName::If,
        TagName::Eval,
        TagName::Lift,
        TagName::Promote,
    ];

    /// Registry name, also used in JSON output.
    pub const fn name(self) -> &'static str {
        match self {
            TagName::Var => "var",
            TagName::App => "app",
            TagName::Lam => "lam",
            TagName::Rec => "rec",
            TagName::Int => "int",
            TagName::Str => "string",
            TagName::Bool => "bool",
            TagName::Add => "add",
            TagName::Sub => "sub",
            TagName::Mul => "mul",
            TagName::Eq => "eq",
            TagName::If => "if",
            TagName::Eval => "eval",
            TagName::Lift => "lift",
            TagName::Promote => "promote",
        }
    }

    /// The word written after `#` in tag literals and `Tag#` types.
    pub const fn surface(self) -> &'static str {
        match self {
            TagName::Str => "str",
            other => other.name(),
        }
    }

    /// The AST constructor keyword, e.g. `astLam`.
    pub const fn ctor_keyword(self) -> &'static str {
        match self {
            TagName::Var => "astVar",
            TagName::App => "astApp",
            TagName::Lam => "astLam",
            TagName::Rec => "astRec",
            TagName::Int => "astInt",
            TagName::Str => "astStr",
            TagName::Bool => "astBool",
            TagName::Add => "astAdd",
            TagName::Sub => "astSub",
            TagName::Mul => "astMul",
            TagName::Eq => "astEq",
            TagName::If => "astIf",
            TagName::Eval => "astEval",
            TagName::Lift => "astLift",
            TagName::Promote => "astPromote",
        }
    }

    pub fn from_surface(word: &str) -> Option<TagName> {
        TagName::ALL.into_iter().find(|t| t.surface() == word)
    }

    pub fn from_name(word: &str) -> Option<TagName> {
        TagName::ALL.into_iter().find(|t| t.name() == word)
    }

    pub fn from_ctor_keyword(word: &str) -> Option<TagName> {
        TagName::ALL.into_iter().find(|t| t.ctor_keyword() == word)
    }

    /// The binary operator an AST tag mirrors, if any.
    pub const fn bin_op(self) -> Option<BinOp> {
        match self {
            TagName::Add => Some(BinOp::Add),
            TagName::Sub => Some(BinOp::Sub),
            TagName::Mul => Some(BinOp::Mul),
            TagName::Eq => Some(BinOp::Eq),
            _ => None,
        }
    }
}

/// A first-class constructor name. Only `eval` tags carry an annotation,
/// and only in typed mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tag {
    pub name: TagName,
    pub eval_annot: Option<TypeExpr>,
}

impl Tag {
    pub const fn new(name: TagName) -> Tag {
        Tag {
            name,
            eval_annot: None,
        }
    }

    pub fn eval(annot: Option<TypeExpr>) -> Tag {
        Tag {
            name: TagName::Eval,
            eval_annot: annot,
        }
    }
}

impl From<TagName> for Tag {
    fn from(name: TagName) -> Tag {
        Tag::new(name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
}

impl BinOp {
    pub const fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
        }
    }

    pub const fn tag(self) -> TagName {
        match self {
            BinOp::Add => TagName::Add,
            BinOp::Sub => TagName::Sub,
            BinOp::Mul => TagName::Mul,
            BinOp::Eq => TagName::Eq,
        }
    }
}

/// Static types. `Meta` only exists while inference is running.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TypeExpr {
    Int,
    Bool,
    String,
    Code,
    Tag(TagName),
    Arrow(Box<TypeExpr>, Box<TypeExpr>),
    Meta(u32),
}

impl TypeExpr {
    pub fn arrow(from: TypeExpr, to: TypeExpr) -> TypeExpr {
        TypeExpr::Arrow(Box::new(from), Box::new(to))
    }

    pub fn has_meta(&self) -> bool {
        match self {
            TypeExpr::Meta(_) => true,
            TypeExpr::Arrow(a, b) => a.has_meta() || b.has_meta(),
            _ => false,
        }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Int => f.write_str("Int"),
            TypeExpr::Bool => f.write_str("Bool"),
            TypeExpr::String => f.write_str("String"),
            TypeExpr::Code => f.write_str("Code"),
            TypeExpr::Tag(t) => write!(f, "Tag#{}", t.surface()),
            TypeExpr::Arrow(a, b) => {
                if matches!(**a, TypeExpr::Arrow(..)) {
                    write!(f, "({a}) -> {b}")
                } else {
                    write!(f, "{a} -> {b}")
                }
            }
            // Unsolved inference variables never leave the checker in a
            // successful result; error messages show them as holes.
            TypeExpr::Meta(_) => f.write_str("_"),
        }
    }
}

/// Terms of the calculus. ML constructs (`DownMl`, `UpMl`, `LetDown`) are
/// eliminated by the compile-time relation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    App(Box<Term>, Box<Term>),
    Lam {
        param: String,
        annot: Option<TypeExpr>,
        body: Box<Term>,
    },
    /// `rec g x. body`; the annotation is the (argument, result) pair.
    Rec {
        name: String,
        param: String,
        annot: Option<(TypeExpr, TypeExpr)>,
        body: Box<Term>,
    },
    Int(BigInt),
    Str(String),
    Bool(bool),
    BinOp(BinOp, Box<Term>, Box<Term>),
    If(Box<Term>, Box<Term>, Box<Term>),
    /// Variadic on purpose: ill-formed constructors such as `astInt(1, 1)`
    /// are representable so that dl and the checker can reject them.
    Ast(Tag, Vec<Term>),
    TagLit(Tag),
    DownMl(Box<Term>),
    UpMl(Box<Term>),
    Eval(Option<TypeExpr>, Box<Term>),
    Lift(Box<Term>),
    LetDown {
        name: String,
        bound: Box<Term>,
        body: Box<Term>,
    },
}

// Constructors used throughout the crate and its tests.
impl Term {
    pub fn var(x: impl Into<String>) -> Term {
        Term::Var(x.into())
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn lam(x: impl Into<String>, body: Term) -> Term {
        Term::Lam {
            param: x.into(),
            annot: None,
            body: Box::new(body),
        }
    }

    pub fn rec(g: impl Into<String>, x: impl Into<String>, body: Term) -> Term {
        Term::Rec {
            name: g.into(),
            param: x.into(),
            annot: None,
            body: Box::new(body),
        }
    }

    pub fn int(n: impl Into<BigInt>) -> Term {
        Term::Int(n.into())
    }

    pub fn str(s: impl Into<String>) -> Term {
        Term::Str(s.into())
    }

    pub fn bin(op: BinOp, a: Term, b: Term) -> Term {
        Term::BinOp(op, Box::new(a), Box::new(b))
    }

    pub fn if_(c: Term, t: Term, e: Term) -> Term {
        Term::If(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn ast(tag: impl Into<Tag>, args: Vec<Term>) -> Term {
        Term::Ast(tag.into(), args)
    }

    pub fn tag(tag: impl Into<Tag>) -> Term {
        Term::TagLit(tag.into())
    }

    pub fn down(m: Term) -> Term {
        Term::DownMl(Box::new(m))
    }

    pub fn up(m: Term) -> Term {
        Term::UpMl(Box::new(m))
    }

    pub fn eval(annot: Option<TypeExpr>, m: Term) -> Term {
        Term::Eval(annot, Box::new(m))
    }

    pub fn lift(m: Term) -> Term {
        Term::Lift(Box::new(m))
    }

    pub fn let_down(x: impl Into<String>, bound: Term, body: Term) -> Term {
        Term::LetDown {
            name: x.into(),
            bound: Box::new(bound),
            body: Box::new(body),
        }
    }

    /// `astVar("x")`.
    pub fn ast_var(x: &str) -> Term {
        Term::ast(TagName::Var, vec![Term::str(x)])
    }

    /// `astStr("x")`.
    pub fn ast_str(x: &str) -> Term {
        Term::ast(TagName::Str, vec![Term::str(x)])
    }

    pub fn ast_int(n: impl Into<BigInt>) -> Term {
        Term::ast(TagName::Int, vec![Term::int(n)])
    }

    pub fn ast_lam(x: &str, body: Term) -> Term {
        Term::ast(TagName::Lam, vec![Term::ast_str(x), body])
    }
}

impl Term {
    /// Children in evaluation order.
    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::Int(_) | Term::Str(_) | Term::Bool(_) | Term::TagLit(_) => {
                vec![]
            }
            Term::App(a, b) | Term::BinOp(_, a, b) => vec![a, b],
            Term::Lam { body, .. } | Term::Rec { body, .. } => vec![body],
            Term::If(c, t, e) => vec![c, t, e],
            Term::Ast(_, args) => args.iter().collect(),
            Term::DownMl(m) | Term::UpMl(m) | Term::Eval(_, m) | Term::Lift(m) => vec![m],
            Term::LetDown { bound, body, .. } => vec![bound, body],
        }
    }

    /// Short constructor name used in JSON and diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Term::Var(_) => "var",
            Term::App(..) => "app",
            Term::Lam { .. } => "lam",
            Term::Rec { .. } => "rec",
            Term::Int(_) => "int",
            Term::Str(_) => "string",
            Term::Bool(_) => "bool",
            Term::BinOp(op, ..) => op.tag().name(),
            Term::If(..) => "if",
            Term::Ast(..) => "ast",
            Term::TagLit(_) => "tag",
            Term::DownMl(_) => "downml",
            Term::UpMl(_) => "upml",
            Term::Eval(..) => "eval",
            Term::Lift(_) => "lift",
            Term::LetDown { .. } => "letdown",
        }
    }

    /// Run-time values: constants, functions, tags and ASTs whose
    /// children are values.
    pub fn is_value(&self) -> bool {
        match self {
            Term::Int(_)
            | Term::Str(_)
            | Term::Bool(_)
            | Term::Lam { .. }
            | Term::Rec { .. }
            | Term::TagLit(_) => true,
            Term::Ast(tag, args) => {
                args.iter().all(Term::is_value)
                    && (tag.name != TagName::Promote
                        || matches!(args.first(), Some(Term::TagLit(_))))
            }
            _ => false,
        }
    }
}

pub fn free_vars(m: &Term) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_free(m, &mut Vec::new(), &mut out);
    out
}

fn collect_free<'a>(m: &'a Term, bound: &mut Vec<&'a str>, out: &mut BTreeSet<String>) {
    match m {
        Term::Var(x) => {
            if !bound.contains(&x.as_str()) {
                out.insert(x.clone());
            }
        }
        Term::Lam { param, body, .. } => {
            bound.push(param);
            collect_free(body, bound, out);
            bound.pop();
        }
        Term::Rec {
            name, param, body, ..
        } => {
            bound.push(name);
            bound.push(param);
            collect_free(body, bound, out);
            bound.truncate(bound.len() - 2);
        }
        Term::LetDown { name, bound: b, body } => {
            collect_free(b, bound, out);
            bound.push(name);
            collect_free(body, bound, out);
            bound.pop();
        }
        other => {
            for c in other.children() {
                collect_free(c, bound, out);
            }
        }
    }
}

/// Variables a program would still need when it runs. Quoted code is data,
/// so an occurrence only counts outside any quote (splices cancel quotes);
/// `\` and `rec` bind only at their own quote depth, while `letdown`
/// substitutes at every depth.
pub fn unbound_vars(m: &Term) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_unbound(m, 0, &mut Vec::new(), &mut out);
    out
}

fn collect_unbound<'a>(
    m: &'a Term,
    depth: i64,
    bound: &mut Vec<(&'a str, Option<i64>)>,
    out: &mut BTreeSet<String>,
) {
    match m {
        Term::Var(x) => {
            let is_bound = bound
                .iter()
                .any(|(y, d)| y == x && d.is_none_or(|d| d == depth));
            if depth <= 0 && !is_bound {
                out.insert(x.clone());
            }
        }
        Term::Lam { param, body, .. } => {
            bound.push((param, Some(depth)));
            collect_unbound(body, depth, bound, out);
            bound.pop();
        }
        Term::Rec {
            name, param, body, ..
        } => {
            bound.push((name, Some(depth)));
            bound.push((param, Some(depth)));
            collect_unbound(body, depth, bound, out);
            bound.truncate(bound.len() - 2);
        }
        Term::LetDown { name, bound: b, body } => {
            collect_unbound(b, depth, bound, out);
            bound.push((name, None));
            collect_unbound(body, depth, bound, out);
            bound.pop();
        }
        Term::UpMl(b) => collect_unbound(b, depth + 1, bound, out),
        Term::DownMl(b) => collect_unbound(b, depth - 1, bound, out),
        other => {
            for c in other.children() {
                collect_unbound(c, depth, bound, out);
            }
        }
    }
}

fn occurs_free(x: &str, m: &Term) -> bool {
    free_vars(m).contains(x)
}

/// A name based on `base` (with primes appended) that is not in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut candidate = format!("{base}'");
    while avoid.contains(&candidate) {
        candidate.push('\'');
    }
    candidate
}

/// Capture-avoiding substitution `m{n/x}`.
pub fn subst(m: &Term, n: &Term, x: &str) -> Term {
    let fv_n = free_vars(n);
    Subst { n, x, fv_n: &fv_n }.go(m)
}

struct Subst<'a> {
    n: &'a Term,
    x: &'a str,
    fv_n: &'a BTreeSet<String>,
}

impl Subst<'_> {
    fn go(&self, m: &Term) -> Term {
        match m {
            Term::Var(y) => {
                if y == self.x {
                    self.n.clone()
                } else {
                    m.clone()
                }
            }
            Term::Lam { param, annot, body } => {
                if param == self.x || !occurs_free(self.x, body) {
                    return m.clone();
                }
                let (param, body) = self.freshen(param, body, &[]);
                Term::Lam {
                    param,
                    annot: annot.clone(),
                    body: Box::new(self.go(&body)),
                }
            }
            Term::Rec {
                name,
                param,
                annot,
                body,
            } => {
                if name == self.x || param == self.x || !occurs_free(self.x, body) {
                    return m.clone();
                }
                let (name, body) = self.freshen(name, body, &[param]);
                let (param, body) = self.freshen(param, &body, &[&name]);
                Term::Rec {
                    name,
                    param,
                    annot: annot.clone(),
                    body: Box::new(self.go(&body)),
                }
            }
            Term::LetDown { name, bound, body } => {
                let bound = Box::new(self.go(bound));
                if name == self.x || !occurs_free(self.x, body) {
                    return Term::LetDown {
                        name: name.clone(),
                        bound,
                        body: body.clone(),
                    };
                }
                let (name, body) = self.freshen(name, body, &[]);
                Term::LetDown {
                    name,
                    bound,
                    body: Box::new(self.go(&body)),
                }
            }
            Term::Int(_) | Term::Str(_) | Term::Bool(_) | Term::TagLit(_) => {
                m.clone()
            }
            Term::App(a, b) => Term::App(Box::new(self.go(a)), Box::new(self.go(b))),
            Term::BinOp(op, a, b) => Term::BinOp(*op, Box::new(self.go(a)), Box::new(self.go(b))),
            Term::If(c, t, e) => Term::If(
                Box::new(self.go(c)),
                Box::new(self.go(t)),
                Box::new(self.go(e)),
            ),
            Term::Ast(tag, args) => Term::Ast(tag.clone(), args.iter().map(|a| self.go(a)).collect()),
            Term::DownMl(b) => Term::DownMl(Box::new(self.go(b))),
            Term::UpMl(b) => Term::UpMl(Box::new(self.go(b))),
            Term::Eval(annot, b) => Term::Eval(annot.clone(), Box::new(self.go(b))),
            Term::Lift(b) => Term::Lift(Box::new(self.go(b))),
        }
    }

    /// Renames binder `y` in `body` when it would capture a free variable
    /// of the substituted term.
    fn freshen(&self, y: &str, body: &Term, siblings: &[&str]) -> (String, Term) {
        if !self.fv_n.contains(y) {
            return (y.to_owned(), body.clone());
        }
        let mut avoid = self.fv_n.clone();
        avoid.extend(free_vars(body));
        avoid.insert(self.x.to_owned());
        avoid.extend(siblings.iter().map(|s| s.to_string()));
        let fresh = fresh_name(y, &avoid);
        let renamed = subst(body, &Term::Var(fresh.clone()), y);
        (fresh, renamed)
    }
}

/// Equality up to consistent renaming of bound variables. Strings, including
/// those inside AST constructors, compare literally.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    AlphaEq::default().eq(a, b)
}

#[derive(Default)]
struct AlphaEq {
    left: Vec<String>,
    right: Vec<String>,
}

impl AlphaEq {
    fn lookup(stack: &[String], x: &str) -> Option<usize> {
        stack.iter().rposition(|y| y == x)
    }

    fn bind<R>(&mut self, l: &[&String], r: &[&String], k: impl FnOnce(&mut Self) -> R) -> R {
        self.left.extend(l.iter().map(|s| (*s).clone()));
        self.right.extend(r.iter().map(|s| (*s).clone()));
        let out = k(self);
        self.left.truncate(self.left.len() - l.len());
        self.right.truncate(self.right.len() - r.len());
        out
    }

    fn eq(&mut self, a: &Term, b: &Term) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => {
                match (Self::lookup(&self.left, x), Self::lookup(&self.right, y)) {
                    (None, None) => x == y,
                    (Some(i), Some(j)) => i == j,
                    _ => false,
                }
            }
            (
                Term::Lam {
                    param: x,
                    annot: ta,
                    body: ba,
                },
                Term::Lam {
                    param: y,
                    annot: tb,
                    body: bb,
                },
            ) => ta == tb && self.bind(&[x], &[y], |s| s.eq(ba, bb)),
            (
                Term::Rec {
                    name: ga,
                    param: xa,
                    annot: ta,
                    body: ba,
                },
                Term::Rec {
                    name: gb,
                    param: xb,
                    annot: tb,
                    body: bb,
                },
            ) => ta == tb && self.bind(&[ga, xa], &[gb, xb], |s| s.eq(ba, bb)),
            (
                Term::LetDown {
                    name: xa,
                    bound: ma,
                    body: na,
                },
                Term::LetDown {
                    name: xb,
                    bound: mb,
                    body: nb,
                },
            ) => self.eq(ma, mb) && self.bind(&[xa], &[xb], |s| s.eq(na, nb)),
            (Term::Int(x), Term::Int(y)) => x == y,
            (Term::Str(x), Term::Str(y)) => x == y,
            (Term::Bool(x), Term::Bool(y)) => x == y,
            (Term::TagLit(x), Term::TagLit(y)) => x == y,
            (Term::App(a1, a2), Term::App(b1, b2)) => self.eq(a1, b1) && self.eq(a2, b2),
            (Term::BinOp(o1, a1, a2), Term::BinOp(o2, b1, b2)) => {
                o1 == o2 && self.eq(a1, b1) && self.eq(a2, b2)
            }
            (Term::If(a1, a2, a3), Term::If(b1, b2, b3)) => {
                self.eq(a1, b1) && self.eq(a2, b2) && self.eq(a3, b3)
            }
            (Term::Ast(ta, xs), Term::Ast(tb, ys)) => {
                ta == tb && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.eq(x, y))
            }
            (Term::DownMl(x), Term::DownMl(y))
            | (Term::UpMl(x), Term::UpMl(y))
            | (Term::Lift(x), Term::Lift(y)) => self.eq(x, y),
            (Term::Eval(ta, x), Term::Eval(tb, y)) => ta == tb && self.eq(x, y),
            _ => false,
        }
    }
}

/// True iff no `$(..)`, `[| .. |]` or `letdown` occurs anywhere in `m`.
pub fn is_ml_free(m: &Term) -> bool {
    match m {
        Term::DownMl(_) | Term::UpMl(_) | Term::LetDown { .. } => false,
        other => other.children().into_iter().all(is_ml_free),
    }
}

/// Renders concrete syntax that [`crate::parser::parse_term`] reads back as
/// the same term.
pub fn pretty(m: &Term) -> String {
    let mut out = String::new();
    Printer { out: &mut out }.term(m, Prec::Open, true);
    out
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty(self))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Open,
    Eq,
    Sum,
    Product,
    App,
    Atom,
}

impl BinOp {
    fn prec(self) -> Prec {
        match self {
            BinOp::Eq => Prec::Eq,
            BinOp::Add | BinOp::Sub => Prec::Sum,
            BinOp::Mul => Prec::Product,
        }
    }
}

fn next_prec(p: Prec) -> Prec {
    match p {
        Prec::Open => Prec::Eq,
        Prec::Eq => Prec::Sum,
        Prec::Sum => Prec::Product,
        Prec::Product => Prec::App,
        Prec::App | Prec::Atom => Prec::Atom,
    }
}

struct Printer<'a> {
    out: &'a mut String,
}

impl Printer<'_> {
    /// `tail` is true when nothing follows this term inside the current
    /// bracket, so a binder form may extend to the right unparenthesised.
    fn term(&mut self, m: &Term, prec: Prec, tail: bool) {
        let own = match m {
            Term::Lam { .. } | Term::Rec { .. } | Term::If(..) | Term::LetDown { .. } => {
                Prec::Open
            }
            Term::BinOp(op, ..) => op.prec(),
            Term::App(..) => Prec::App,
            _ => Prec::Atom,
        };
        let bare = if own == Prec::Open {
            prec == Prec::Open || tail
        } else {
            own >= prec
        };
        if !bare {
            self.out.push('(');
            self.term(m, Prec::Open, true);
            self.out.push(')');
            return;
        }
        match m {
            Term::Var(x) => self.name(x),
            Term::App(f, a) => {
                self.term(f, Prec::App, false);
                self.out.push(' ');
                self.term(a, Prec::Atom, tail);
            }
            Term::Lam { param, annot, body } => {
                self.out.push('\\');
                self.name(param);
                if let Some(t) = annot {
                    self.out.push_str(&format!(" : {t}"));
                }
                self.out.push_str(". ");
                self.term(body, Prec::Open, true);
            }
            Term::Rec {
                name,
                param,
                annot,
                body,
            } => {
                self.out.push_str("rec ");
                self.name(name);
                self.out.push(' ');
                self.name(param);
                if let Some((a, b)) = annot {
                    let whole = TypeExpr::arrow(a.clone(), b.clone());
                    self.out.push_str(&format!(" : {whole}"));
                }
                self.out.push_str(". ");
                self.term(body, Prec::Open, true);
            }
            Term::Int(n) => {
                if n.sign() == num_bigint::Sign::Minus {
                    self.out.push_str(&format!("({n})"));
                } else {
                    self.out.push_str(&n.to_string());
                }
            }
            Term::Str(s) => self.quoted(s, '"'),
            Term::Bool(b) => self.out.push_str(if *b { "true" } else { "false" }),
            Term::BinOp(op, a, b) => {
                let p = op.prec();
                self.term(a, p, false);
                self.out.push_str(&format!(" {} ", op.symbol()));
                self.term(b, next_prec(p), tail);
            }
            Term::If(c, t, e) => {
                self.out.push_str("if ");
                self.term(c, Prec::Open, true);
                self.out.push_str(" then ");
                self.term(t, Prec::Open, true);
                self.out.push_str(" else ");
                self.term(e, Prec::Open, true);
            }
            Term::Ast(tag, args) => {
                self.out.push_str(tag.name.ctor_keyword());
                self.annot(&tag.eval_annot);
                self.args(args);
            }
            Term::TagLit(tag) => {
                self.out.push('#');
                self.out.push_str(tag.name.surface());
                self.annot(&tag.eval_annot);
            }
            Term::DownMl(b) => {
                self.out.push_str("$(");
                self.term(b, Prec::Open, true);
                self.out.push(')');
            }
            Term::UpMl(b) => {
                self.out.push_str("[| ");
                self.term(b, Prec::Open, true);
                self.out.push_str(" |]");
            }
            Term::Eval(annot, b) => {
                self.out.push_str("eval");
                self.annot(annot);
                self.args(std::slice::from_ref(&**b));
            }
            Term::Lift(b) => {
                self.out.push_str("lift");
                self.args(std::slice::from_ref(&**b));
            }
            Term::LetDown { name, bound, body } => {
                self.out.push_str("letdown ");
                self.name(name);
                self.out.push_str(" = ");
                self.term(bound, Prec::Open, true);
                self.out.push_str(" in ");
                self.term(body, Prec::Open, true);
            }
        }
    }

    fn annot(&mut self, annot: &Option<TypeExpr>) {
        if let Some(t) = annot {
            self.out.push_str(&format!("{{{t}}}"));
        }
    }

    fn args(&mut self, args: &[Term]) {
        self.out.push('(');
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.term(a, Prec::Open, true);
        }
        self.out.push(')');
    }

    /// Variable names that are not plain identifiers are backquoted.
    fn name(&mut self, x: &str) {
        if crate::parser::is_identifier(x) {
            self.out.push_str(x);
        } else {
            self.quoted(x, '`');
        }
    }

    fn quoted(&mut self, s: &str, delim: char) {
        self.out.push(delim);
        for ch in s.chars() {
            match ch {
                c if c == delim => {
                    self.out.push('\\');
                    self.out.push(c);
                }
                '\\' => self.out.push_str("\\\\"),
                '\n' => self.out.push_str("\\n"),
                '\t' => self.out.push_str("\\t"),
                '\r' => self.out.push_str("\\r"),
                c if c.is_control() => self.out.push_str(&format!("\\u{{{:x}}}", c as u32)),
                c => self.out.push(c),
            }
        }
        self.out.push(delim);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lam(x: &str, b: Term) -> Term {
        Term::lam(x, b)
    }

    fn v(x: &str) -> Term {
        Term::var(x)
    }

    #[test]
    fn free_vars_of_closed_and_open_terms() {
        assert!(free_vars(&lam("x", v("x"))).is_empty());
        assert!(free_vars(&lam("y", Term::down(Term::ast_var("x")))).is_empty());
        let letdown = Term::let_down("f", lam("x", v("x")), Term::down(v("f")));
        assert!(free_vars(&letdown).is_empty());
        assert_eq!(
            free_vars(&Term::down(v("f"))),
            BTreeSet::from(["f".to_string()])
        );
    }

    #[test]
    fn unbound_vars_ignore_quoted_code() {
        let power = Term::lam("n", Term::up(lam("x", Term::down(Term::app(v("M"), v("n"))))));
        assert_eq!(unbound_vars(&power), BTreeSet::from(["M".to_string()]));
        assert!(unbound_vars(&Term::up(v("x"))).is_empty());
        let cross = Term::up(lam("x", Term::down(v("x"))));
        assert_eq!(unbound_vars(&cross), BTreeSet::from(["x".to_string()]));
        let ld = Term::let_down("f", Term::int(1), Term::down(v("f")));
        assert!(unbound_vars(&ld).is_empty());
    }

    #[test]
    fn subst_basic_cases() {
        let m = lam("y", v("x"));
        assert_eq!(subst(&m, &Term::int(7), "x"), lam("y", Term::int(7)));

        let m = Term::down(Term::bin(BinOp::Add, v("x"), Term::int(1)));
        let out = subst(&m, &Term::ast_int(2), "x");
        assert_eq!(
            out,
            Term::down(Term::bin(BinOp::Add, Term::ast_int(2), Term::int(1)))
        );
    }

    #[test]
    fn subst_letdown_shadowing_leaves_term_unchanged() {
        let m = Term::let_down("x", Term::int(1), Term::bin(BinOp::Add, v("x"), v("z")));
        assert_eq!(subst(&m, &Term::str("L"), "x"), m);
    }

    #[test]
    fn subst_letdown_distinct_name_pushes_in() {
        let m = Term::let_down("y", v("x"), Term::bin(BinOp::Add, v("x"), v("y")));
        let out = subst(&m, &Term::int(3), "x");
        assert_eq!(
            out,
            Term::let_down("y", Term::int(3), Term::bin(BinOp::Add, Term::int(3), v("y")))
        );
    }

    #[test]
    fn subst_avoids_capture() {
        let out = subst(&lam("y", v("x")), &v("y"), "x");
        match &out {
            Term::Lam { param, body, .. } => {
                assert_ne!(param, "y");
                assert_eq!(**body, v("y"));
            }
            other => panic!("expected lambda, got {other}"),
        }
    }

    #[test]
    fn subst_in_rec_renames_both_binders_when_needed() {
        let m = Term::rec("g", "n", Term::app(v("g"), v("x")));
        let out = subst(&m, &Term::app(v("g"), v("n")), "x");
        match &out {
            Term::Rec { name, param, body, .. } => {
                assert_ne!(name, "g");
                assert_ne!(param, "n");
                assert_ne!(name, param);
                assert_eq!(
                    **body,
                    Term::app(v(name), Term::app(v("g"), v("n")))
                );
            }
            other => panic!("expected rec, got {other}"),
        }
    }

    #[test]
    fn subst_ignores_names_inside_asts() {
        let m = Term::ast_lam("x", Term::ast_var("x"));
        assert_eq!(subst(&m, &Term::int(1), "x"), m);
    }

    #[test]
    fn alpha_eq_cases() {
        assert!(alpha_eq(&lam("x", v("x")), &lam("y", v("y"))));
        assert!(!alpha_eq(
            &Term::ast_lam("x", Term::ast_var("x")),
            &Term::ast_lam("y", Term::ast_var("y"))
        ));
        assert!(alpha_eq(
            &lam("x", lam("x", v("x"))),
            &lam("y", lam("x", v("x")))
        ));
        assert!(!alpha_eq(
            &lam("x", lam("y", v("x"))),
            &lam("y", lam("x", v("x")))
        ));
        assert!(!alpha_eq(&lam("x", v("z")), &lam("x", v("w"))));
    }

    #[test]
    fn ml_freedom() {
        let inc = lam("x", Term::bin(BinOp::Add, v("x"), Term::int(1)));
        assert!(is_ml_free(&inc));
        assert!(!is_ml_free(&lam("x", Term::down(Term::ast_var("x")))));
        assert!(is_ml_free(&Term::eval(Some(TypeExpr::Int), Term::ast_int(3))));
        assert!(!is_ml_free(&Term::let_down("x", Term::int(1), v("x"))));
    }

    #[test]
    fn pretty_examples() {
        assert_eq!(pretty(&v("x")), "x");
        let t = Term::ast(TagName::Add, vec![Term::ast_int(2), Term::ast_int(3)]);
        assert_eq!(pretty(&t), "astAdd(astInt(2), astInt(3))");
        let t = Term::up(Term::bin(BinOp::Add, Term::int(2), Term::int(3)));
        assert_eq!(pretty(&t), "[| 2 + 3 |]");
    }

    #[test]
    fn pretty_parenthesises_binders_only_when_needed() {
        let id = lam("x", v("x"));
        assert_eq!(
            pretty(&Term::bin(BinOp::Add, Term::int(2), id.clone())),
            "2 + \\x. x"
        );
        assert_eq!(
            pretty(&Term::bin(BinOp::Add, id.clone(), Term::int(2))),
            "(\\x. x) + 2"
        );
        assert_eq!(pretty(&Term::app(id.clone(), Term::int(7))), "(\\x. x) 7");
        assert_eq!(
            pretty(&Term::bin(
                BinOp::Sub,
                Term::int(1),
                Term::bin(BinOp::Sub, Term::int(2), Term::int(3))
            )),
            "1 - (2 - 3)"
        );
        assert_eq!(pretty(&Term::int(-3)), "(-3)");
    }

    #[test]
    fn type_display() {
        let t = TypeExpr::arrow(
            TypeExpr::arrow(TypeExpr::Int, TypeExpr::Int),
            TypeExpr::arrow(TypeExpr::Code, TypeExpr::Tag(TagName::Str)),
        );
        assert_eq!(t.to_string(), "(Int -> Int) -> Code -> Tag#str");
    }
}
