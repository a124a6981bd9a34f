//! Constructor signature table.
//!
//! Every base-language constructor is mirrored by an AST constructor and a
//! tag; `eval` and `promote` are added on top, and the three compile-time
//! forms (`$(..)`, `[| .. |]`, `letdown`) get specs without tags. The
//! parser, dl, ul and the type checker all consult this table for arity.

use crate::syntax::TagName;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arity {
    Fixed(usize),
    /// `promote`: one tag argument followed by any number of children.
    Variadic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleClass {
    /// Children are reduced structurally and the constructor rebuilt.
    Generic,
    /// Some argument positions are binders carried as strings by the AST.
    Binder,
    /// Dedicated rules (atoms, eval, lift, promote, the ML forms).
    Special,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CtorSpec {
    pub name: &'static str,
    pub tag: Option<TagName>,
    pub arity: Arity,
    pub binders: &'static [usize],
    pub rule_class: RuleClass,
}

const fn spec(
    name: &'static str,
    tag: Option<TagName>,
    arity: Arity,
    binders: &'static [usize],
    rule_class: RuleClass,
) -> CtorSpec {
    CtorSpec {
        name,
        tag,
        arity,
        binders,
        rule_class,
    }
}

use Arity::{Fixed, Variadic};
use RuleClass::{Binder, Generic, Special};

static REGISTRY: [CtorSpec; 18] = [
    spec("var", Some(TagName::Var), Fixed(1), &[], Special),
    spec("app", Some(TagName::App), Fixed(2), &[], Generic),
    spec("lam", Some(TagName::Lam), Fixed(2), &[0], Binder),
    spec("rec", Some(TagName::Rec), Fixed(3), &[0, 1], Binder),
    spec("int", Some(TagName::Int), Fixed(1), &[], Special),
    spec("string", Some(TagName::Str), Fixed(1), &[], Special),
    spec("bool", Some(TagName::Bool), Fixed(1), &[], Special),
    spec("add", Some(TagName::Add), Fixed(2), &[], Generic),
    spec("sub", Some(TagName::Sub), Fixed(2), &[], Generic),
    spec("mul", Some(TagName::Mul), Fixed(2), &[], Generic),
    spec("eq", Some(TagName::Eq), Fixed(2), &[], Generic),
    spec("if", Some(TagName::If), Fixed(3), &[], Generic),
    spec("eval", Some(TagName::Eval), Fixed(1), &[], Special),
    spec("lift", Some(TagName::Lift), Fixed(1), &[], Special),
    spec("promote", Some(TagName::Promote), Variadic, &[], Special),
    spec("downML", None, Fixed(1), &[], Special),
    spec("upML", None, Fixed(1), &[], Special),
    spec("letdown", None, Fixed(3), &[0], Special),
];

pub fn registry() -> &'static [CtorSpec] {
    &REGISTRY
}

pub fn lookup(name: &str) -> Option<&'static CtorSpec> {
    REGISTRY.iter().find(|s| s.name == name)
}

pub fn spec_for(tag: TagName) -> &'static CtorSpec {
    REGISTRY
        .iter()
        .find(|s| s.tag == Some(tag))
        .expect("every tag has a registry entry")
}

/// Whether an AST constructor with this tag accepts `arg_count` children.
pub fn check_arity(tag: TagName, arg_count: usize) -> bool {
    match spec_for(tag).arity {
        Fixed(n) => n == arg_count,
        Variadic => arg_count >= 1,
    }
}

/// Human-readable arity, for diagnostics.
pub fn describe_arity(tag: TagName) -> String {
    match spec_for(tag).arity {
        Fixed(n) => n.to_string(),
        Variadic => "at least 1".to_string(),
    }
}
