//! Commands behind the `hgmp` binary.
//!
//! Every command returns an [`Output`] instead of printing, so the binary,
//! the REPL and the tests share one implementation.

#![allow(clippy::result_large_err)]

pub mod corpus;
pub mod repl;

use std::fmt::Write as _;

use hgmp_core::typing::CheckPoint;
use hgmp_core::{parse_term, Derivation, EvalError, Fuel, Machine, Mode, ParseError, Relation, Term, TypeExpr, DEFAULT_FUEL};
use serde_json::Value;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum TraceFormat {
    Text,
    Json,
}

/// The relations `step` can apply on their own.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum StepRelation {
    Ct,
    Dl,
    Ul,
    Rt,
}

impl From<StepRelation> for Relation {
    fn from(r: StepRelation) -> Relation {
        match r {
            StepRelation::Ct => Relation::Ct,
            StepRelation::Dl => Relation::Dl,
            StepRelation::Ul => Relation::Ul,
            StepRelation::Rt => Relation::Rt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Config {
    pub mode: Mode,
    pub fuel: u64,
    pub trace: Option<TraceFormat>,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            mode: Mode::Untyped,
            fuel: DEFAULT_FUEL,
            trace: None,
        }
    }
}

impl Config {
    fn machine(&self, mode: Mode) -> Machine {
        Machine::new(mode, Fuel::new(self.fuel), self.trace.is_some())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Output {
    fn error(message: impl Into<String>) -> Output {
        let mut stderr = message.into();
        if !stderr.ends_with('\n') {
            stderr.push('\n');
        }
        Output {
            stdout: String::new(),
            stderr,
            code: EXIT_ERROR,
        }
    }
}

/// Program text together with the name used in diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct Source<'a> {
    pub name: &'a str,
    pub text: &'a str,
}

impl<'a> Source<'a> {
    pub fn new(name: &'a str, text: &'a str) -> Source<'a> {
        Source { name, text }
    }
}

/// `error[parse]: ...` with a `file:line:col` pointer and the offending
/// line underlined.
pub fn render_parse_error(src: Source, err: &ParseError) -> String {
    let start = err.span.start.min(src.text.len());
    let line_start = src.text[..start].rfind('\n').map_or(0, |i| i + 1);
    let line_end = src.text[start..].find('\n').map_or(src.text.len(), |i| start + i);
    let line_no = src.text[..start].matches('\n').count() + 1;
    let col = src.text[line_start..start].chars().count() + 1;
    let line = &src.text[line_start..line_end];
    let end = err.span.end.clamp(start, line_end);
    let width = src.text[start..end].chars().count().max(1);
    let gutter = " ".repeat(line_no.to_string().len());
    let mut out = format!("error[parse]: {}\n", err.message);
    let _ = writeln!(out, "{gutter}--> {}:{line_no}:{col}", src.name);
    let _ = writeln!(out, "{gutter} |");
    let _ = writeln!(out, "{line_no} | {line}");
    let _ = writeln!(out, "{gutter} | {}{}", " ".repeat(col - 1), "^".repeat(width));
    out
}

pub fn parse(src: Source, mode: Mode) -> Result<Term, String> {
    parse_term(src.text, mode).map_err(|e| render_parse_error(src, &e))
}

fn trace_text(parts: &[(&str, &Option<Derivation>)]) -> String {
    let mut out = String::new();
    for (label, d) in parts {
        if let Some(d) = d {
            let _ = writeln!(out, "-- {label}");
            out.push_str(&d.render_text());
        }
    }
    out
}

fn trace_json(parts: &[(&str, &Option<Derivation>)]) -> Value {
    let mut obj = serde_json::Map::new();
    for (label, d) in parts {
        if let Some(d) = d {
            obj.insert(label.to_string(), d.to_json());
        }
    }
    Value::Object(obj)
}

/// Builds the output of a successful command. `lines` is the plain result;
/// `fields` is the same result for JSON output.
fn finish(
    cfg: &Config,
    lines: String,
    mut fields: serde_json::Map<String, Value>,
    trace: &[(&str, &Option<Derivation>)],
) -> Output {
    match cfg.trace {
        Some(TraceFormat::Json) => {
            fields.insert("trace".into(), trace_json(trace));
            let mut stdout = serde_json::to_string_pretty(&Value::Object(fields)).expect("json");
            stdout.push('\n');
            Output {
                stdout,
                stderr: String::new(),
                code: EXIT_OK,
            }
        }
        Some(TraceFormat::Text) => Output {
            stdout: lines,
            stderr: trace_text(trace),
            code: EXIT_OK,
        },
        None => Output {
            stdout: lines,
            stderr: String::new(),
            code: EXIT_OK,
        },
    }
}

fn eval_error(e: &EvalError) -> Output {
    Output::error(e.to_string())
}

fn fields(pairs: &[(&str, String)]) -> serde_json::Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), Value::from(v.as_str()))).collect()
}

/// `compile`: the residual program, and in typed mode its type.
pub fn compile(src: Source, cfg: &Config) -> Output {
    let m = match parse(src, cfg.mode) {
        Ok(m) => m,
        Err(e) => return Output::error(e),
    };
    let mut machine = cfg.machine(cfg.mode);
    let compiled = match machine.ct(&m) {
        Ok(c) => c,
        Err(e) => return eval_error(&e),
    };
    let mut lines = format!("{}\n", compiled.term);
    let mut json = fields(&[("residual", compiled.term.to_string())]);
    let mut type_derivation = None;
    if cfg.mode == Mode::Typed {
        match machine.infer(&compiled.term, CheckPoint::Residual) {
            Ok((ty, d)) => {
                let _ = writeln!(lines, "-- : {ty}");
                json.insert("type".into(), Value::from(ty.to_string()));
                type_derivation = d;
            }
            Err(e) => return eval_error(&e),
        }
    }
    finish(
        cfg,
        lines,
        json,
        &[("ct", &compiled.derivation), ("type", &type_derivation)],
    )
}

/// `run`: compile, check in typed mode, then evaluate.
pub fn run(src: Source, cfg: &Config) -> Output {
    let m = match parse(src, cfg.mode) {
        Ok(m) => m,
        Err(e) => return Output::error(e),
    };
    match hgmp_core::run_pipeline(&m, cfg.mode, Fuel::new(cfg.fuel), cfg.trace.is_some()) {
        Ok(out) => {
            let mut json = fields(&[
                ("residual", out.residual.to_string()),
                ("value", out.value.to_string()),
            ]);
            if let Some(ty) = &out.residual_type {
                json.insert("type".into(), Value::from(ty.to_string()));
            }
            finish(
                cfg,
                format!("{}\n", out.value),
                json,
                &[
                    ("ct", &out.ct_derivation),
                    ("type", &out.type_derivation),
                    ("rt", &out.rt_derivation),
                ],
            )
        }
        Err(e) => eval_error(&e),
    }
}

/// `step`: exactly one relation applied to the parsed term.
pub fn step(src: Source, cfg: &Config, relation: StepRelation) -> Output {
    let m = match parse(src, cfg.mode) {
        Ok(m) => m,
        Err(e) => return Output::error(e),
    };
    let rel = Relation::from(relation);
    match cfg.machine(cfg.mode).apply(rel, &m) {
        Ok(j) => finish(
            cfg,
            format!("{}\n", j.term),
            fields(&[("result", j.term.to_string())]),
            &[(rel.as_str(), &j.derivation)],
        ),
        Err(e) => eval_error(&e),
    }
}

/// Compiles in typed mode and infers the residual's type.
pub fn type_of(m: &Term, cfg: &Config) -> Result<(TypeExpr, Option<Derivation>, Option<Derivation>), EvalError> {
    let mut machine = cfg.machine(Mode::Typed);
    let compiled = machine.ct(m)?;
    let (ty, d) = machine.infer(&compiled.term, CheckPoint::Residual)?;
    Ok((ty, compiled.derivation, d))
}

/// `typecheck`: always typed, whatever `--mode` says.
pub fn typecheck(src: Source, cfg: &Config) -> Output {
    let m = match parse(src, Mode::Typed) {
        Ok(m) => m,
        Err(e) => return Output::error(e),
    };
    match type_of(&m, cfg) {
        Ok((ty, ct, d)) => finish(
            cfg,
            format!("{ty}\n"),
            fields(&[("type", ty.to_string())]),
            &[("ct", &ct), ("type", &d)],
        ),
        Err(e) => eval_error(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(text: &str) -> Source<'_> {
        Source::new("t.hgmp", text)
    }

    #[test]
    fn compile_prints_the_residual() {
        let out = compile(src("(\\x. x) $((\\x. x) astInt(7))"), &Config::default());
        assert_eq!(out.stdout, "(\\x. x) 7\n");
        assert_eq!(out.code, EXIT_OK);
    }

    #[test]
    fn typed_compile_adds_a_type_line() {
        let cfg = Config {
            mode: Mode::Typed,
            ..Config::default()
        };
        let out = compile(src("(\\x. x) $((\\x. x) astInt(7))"), &cfg);
        assert_eq!(out.stdout, "(\\x. x) 7\n-- : Int\n");
    }

    #[test]
    fn parse_errors_point_at_the_source() {
        let out = run(src("1 +\n  (2 +"), &Config::default());
        assert_eq!(out.code, EXIT_ERROR);
        assert!(out.stdout.is_empty());
        assert!(out.stderr.starts_with("error[parse]: "), "{}", out.stderr);
        assert!(out.stderr.contains("--> t.hgmp:2:"), "{}", out.stderr);
    }

    #[test]
    fn json_trace_is_the_only_stdout() {
        let cfg = Config {
            trace: Some(TraceFormat::Json),
            ..Config::default()
        };
        let out = run(src("(\\x. x) (eval((\\x. x) astInt(7)))"), &cfg);
        let v: Value = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(v["value"], "7");
        assert_eq!(v["trace"]["rt"]["rule"], "App");
        assert!(out.stderr.is_empty());
    }

    #[test]
    fn text_trace_goes_to_stderr() {
        let cfg = Config {
            trace: Some(TraceFormat::Text),
            ..Config::default()
        };
        let out = step(src("astVar(\"x\")"), &cfg, StepRelation::Dl);
        assert_eq!(out.stdout, "x\n");
        assert!(out.stderr.contains("[Var dl]"), "{}", out.stderr);
    }

    #[test]
    fn typecheck_reports_code() {
        let out = typecheck(src("astInt(3)"), &Config::default());
        assert_eq!(out.stdout, "Code\n");
    }
}
