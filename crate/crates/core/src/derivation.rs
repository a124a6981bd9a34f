//! Derivation trees recorded while the relations run.

use std::fmt;

use num_traits::ToPrimitive;
use serde_json::{json, Map, Value};

use crate::syntax::{Term, TypeExpr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Ct,
    Dl,
    Ul,
    Rt,
    Type,
}

impl Relation {
    pub const fn as_str(self) -> &'static str {
        match self {
            Relation::Ct => "ct",
            Relation::Dl => "dl",
            Relation::Ul => "ul",
            Relation::Rt => "rt",
            Relation::Type => "type",
        }
    }

    pub fn from_name(s: &str) -> Option<Relation> {
        [Relation::Ct, Relation::Dl, Relation::Ul, Relation::Rt, Relation::Type]
            .into_iter()
            .find(|r| r.as_str() == s)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Right-hand side of a conclusion: a term for the reduction relations, a
/// type for checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Judgement {
    Term(Term),
    Type(TypeExpr),
}

impl fmt::Display for Judgement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Judgement::Term(t) => t.fmt(f),
            Judgement::Type(t) => t.fmt(f),
        }
    }
}

/// One rule application. Premises are kept in the left-to-right order in
/// which the rule evaluates them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub rule: &'static str,
    pub relation: Relation,
    pub input: Term,
    pub output: Judgement,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    /// Pre-order walk.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Derivation)) {
        f(self);
        for p in &self.premises {
            p.walk(f);
        }
    }

    /// Indented text, one rule per line, premises above their conclusion.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        self.render_into(0, &mut out);
        out
    }

    fn render_into(&self, depth: usize, out: &mut String) {
        for p in &self.premises {
            p.render_into(depth + 1, out);
        }
        let indent = "  ".repeat(depth);
        let line = match self.relation {
            Relation::Type => format!("{indent}⊢ {} : {}", self.input, self.output),
            rel => format!("{indent}{} ⇓{} {}", self.input, rel, self.output),
        };
        out.push_str(&format!("{line}  [{}]\n", self.rule));
    }

    pub fn to_json(&self) -> Value {
        let out = match &self.output {
            Judgement::Term(t) => term_json(t),
            Judgement::Type(t) => json!({ "type": t.to_string() }),
        };
        json!({
            "rule": self.rule,
            "relation": self.relation.as_str(),
            "in": term_json(&self.input),
            "out": out,
            "premises": self.premises.iter().map(Derivation::to_json).collect::<Vec<_>>(),
        })
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_text())
    }
}

/// `{"ctor": name, "children": [...], "atom": value?}`; annotations appear
/// under `"type"`.
pub fn term_json(t: &Term) -> Value {
    let mut obj = Map::new();
    obj.insert("ctor".into(), Value::from(t.kind()));
    let atom = match t {
        Term::Var(x) => Some(Value::from(x.as_str())),
        Term::Lam { param, .. } => Some(Value::from(param.as_str())),
        Term::Rec { name, param, .. } => Some(json!([name, param])),
        Term::Int(n) => Some(match n.to_i64() {
            Some(i) => Value::from(i),
            None => Value::from(n.to_string()),
        }),
        Term::Str(s) => Some(Value::from(s.as_str())),
        Term::Bool(b) => Some(Value::from(*b)),
        Term::Ast(tag, _) | Term::TagLit(tag) => Some(Value::from(tag.name.name())),
        Term::LetDown { name, .. } => Some(Value::from(name.as_str())),
        _ => None,
    };
    if let Some(a) = atom {
        obj.insert("atom".into(), a);
    }
    let annot = match t {
        Term::Lam { annot: Some(a), .. } => Some(a.to_string()),
        Term::Rec {
            annot: Some((a, b)), ..
        } => Some(TypeExpr::arrow(a.clone(), b.clone()).to_string()),
        Term::Eval(Some(a), _) => Some(a.to_string()),
        Term::Ast(tag, _) | Term::TagLit(tag) => tag.eval_annot.as_ref().map(|a| a.to_string()),
        _ => None,
    };
    if let Some(a) = annot {
        obj.insert("type".into(), Value::from(a));
    }
    obj.insert(
        "children".into(),
        Value::Array(t.children().into_iter().map(term_json).collect()),
    );
    Value::Object(obj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn term_json_shape() {
        let v = term_json(&Term::app(Term::lam("x", Term::var("x")), Term::ast_int(7)));
        assert_eq!(
            v,
            json!({
                "ctor": "app",
                "children": [
                    {"ctor": "lam", "atom": "x", "children": [{"ctor": "var", "atom": "x", "children": []}]},
                    {"ctor": "ast", "atom": "int", "children": [{"ctor": "int", "atom": 7, "children": []}]}
                ]
            })
        );
    }

    #[test]
    fn text_puts_premises_first() {
        let leaf = Derivation {
            rule: "Var ct",
            relation: Relation::Ct,
            input: Term::var("x"),
            output: Judgement::Term(Term::var("x")),
            premises: vec![],
        };
        let root = Derivation {
            rule: "Lam ct",
            relation: Relation::Ct,
            input: Term::lam("x", Term::var("x")),
            output: Judgement::Term(Term::lam("x", Term::var("x"))),
            premises: vec![leaf],
        };
        assert_eq!(
            root.render_text(),
            "  x ⇓ct x  [Var ct]\n\\x. x ⇓ct \\x. x  [Lam ct]\n"
        );
        assert_eq!(root.size(), 2);
    }
}
