//! An executable model of homogeneous generative meta-programming.
//!
//! The calculus is a call-by-value λ-calculus extended with AST
//! constructors, compile-time splices `$(..)`, quasi-quotes `[| .. |]`,
//! run-time `eval`, `lift`, compile-time `letdown` bindings and first-class
//! tags for higher-order ASTs. Four big-step relations give it meaning:
//!
//! * `ct` compiles a program, running every splice and expanding every quote;
//! * `dl` turns an AST value into the program it represents;
//! * `ul` turns program syntax into the AST that represents it;
//! * `rt` is ordinary run-time evaluation.
//!
//! In typed mode a monomorphic checker runs at each point where generated
//! code is about to execute: splice bodies, the compiled residual and every
//! `eval`'d fragment.
//!
//! ```
//! use hgmp_core::{parse_term, run_pipeline, Mode, Fuel};
//!
//! let m = parse_term("(\\x. x) $((\\x. x) astInt(7))", Mode::Untyped).unwrap();
//! let out = run_pipeline(&m, Mode::Untyped, Fuel::default(), false).unwrap();
//! assert_eq!(out.residual.to_string(), "(\\x. x) 7");
//! assert_eq!(out.value.to_string(), "7");
//! ```

#![allow(clippy::result_large_err)]

pub mod derivation;
#[cfg(feature = "arbitrary")]
pub mod gen;
pub mod parser;
pub mod reduction;
pub mod signature;
pub mod syntax;
pub mod typing;

use std::fmt;
use std::str::FromStr;

pub use derivation::{Derivation, Judgement, Relation};
pub use parser::{parse_term, parse_type, ParseError, SourceSpan};
pub use reduction::{
    run_pipeline, ErrorKind, EvalError, Fuel, Judged, Machine, PipelineOutcome, DEFAULT_FUEL,
};
pub use signature::{check_arity, registry, Arity, CtorSpec};
pub use syntax::{
    alpha_eq, free_vars, is_ml_free, pretty, subst, unbound_vars, BinOp, Tag, TagName, Term, TypeExpr,
};
pub use typing::{check, infer, unify, CheckPoint, TypeEnv, TypeError, TypeErrorKind};

/// Whether the staged type checker participates in evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Mode {
    #[default]
    Untyped,
    Typed,
}

impl Mode {
    pub const fn as_str(self) -> &'static str {
        match self {
            Mode::Untyped => "untyped",
            Mode::Typed => "typed",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "untyped" => Ok(Mode::Untyped),
            "typed" => Ok(Mode::Typed),
            other => Err(format!("unknown mode `{other}` (expected typed or untyped)")),
        }
    }
}
