//! Corpus runner.
//!
//! A case is a `.hgmp` program with a `.expected` file next to it, or a
//! program under `golden/` with a `.json` derivation. Leading `--` comment
//! lines may set `mode: typed|untyped|both` (default untyped) and
//! `relation: ct|dl|ul|rt` (apply one relation instead of the whole
//! pipeline; golden cases must name one) and `fuel: N` (overrides the
//! runner's fuel).
//!
//! An `.expected` file holds one entry, or one `typed: ` and one
//! `untyped: ` entry. An entry is `error:<phase>` or a term, which is
//! compiled and compared up to α-equivalence.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hgmp_core::{alpha_eq, parse_term, run_pipeline, Derivation, Fuel, Machine, Mode, Relation, Term};
use serde_json::Value;

use crate::{Config, Output, Source, StepRelation, TraceFormat, EXIT_ERROR, EXIT_OK, EXIT_USAGE};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expect {
    Term(String),
    Error(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Check {
    /// Per-mode expectations; `None` applies to every mode.
    Expected(Vec<(Option<Mode>, Expect)>),
    Golden(Value),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub name: String,
    pub path: PathBuf,
    pub text: String,
    pub modes: Vec<Mode>,
    pub relation: Option<Relation>,
    pub fuel: Option<u64>,
    pub check: Check,
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

struct Headers {
    modes: Vec<Mode>,
    relation: Option<Relation>,
    fuel: Option<u64>,
}

fn headers(text: &str) -> Result<Headers, String> {
    let mut modes = vec![Mode::Untyped];
    let mut relation = None;
    let mut fuel = None;
    for line in text.lines().map(str::trim).take_while(|l| l.starts_with("--")) {
        let body = line.trim_start_matches('-').trim();
        if let Some(v) = body.strip_prefix("mode:") {
            modes = match v.trim() {
                "both" => vec![Mode::Untyped, Mode::Typed],
                other => vec![other.parse()?],
            };
        } else if let Some(v) = body.strip_prefix("relation:") {
            let r = Relation::from_name(v.trim())
                .filter(|r| *r != Relation::Type)
                .ok_or_else(|| format!("unknown relation `{}`", v.trim()))?;
            relation = Some(r);
        } else if let Some(v) = body.strip_prefix("fuel:") {
            let n = v.trim().parse::<u64>().ok().filter(|n| *n >= 1);
            fuel = Some(n.ok_or_else(|| format!("bad fuel `{}`", v.trim()))?);
        }
    }
    Ok(Headers { modes, relation, fuel })
}

fn parse_expected(text: &str) -> Result<Vec<(Option<Mode>, Expect)>, String> {
    let entry = |s: &str| match s.trim().strip_prefix("error:") {
        Some(phase) => Expect::Error(phase.trim().to_string()),
        None => Expect::Term(s.trim().to_string()),
    };
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut out = Vec::new();
    for line in &lines {
        if let Some(rest) = line.strip_prefix("typed:") {
            out.push((Some(Mode::Typed), entry(rest)));
        } else if let Some(rest) = line.strip_prefix("untyped:") {
            out.push((Some(Mode::Untyped), entry(rest)));
        }
    }
    if out.is_empty() {
        if lines.is_empty() {
            return Err("empty .expected file".to_string());
        }
        out.push((None, entry(&lines.join("\n"))));
    }
    Ok(out)
}

fn load_case(root: &Path, path: &Path) -> Result<Case, String> {
    let text = read(path)?;
    let Headers { modes, relation, fuel } = headers(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let rel = path.strip_prefix(root).unwrap_or(path).with_extension("");
    let name = rel.to_string_lossy().replace('\\', "/");
    let golden = name.starts_with("golden/");
    let check = if golden {
        if relation.is_none() {
            return Err(format!("{}: golden cases need a `-- relation:` header", path.display()));
        }
        let json = read(&path.with_extension("json"))?;
        Check::Golden(serde_json::from_str(&json).map_err(|e| format!("{}: {e}", path.display()))?)
    } else {
        Check::Expected(parse_expected(&read(&path.with_extension("expected"))?)?)
    };
    Ok(Case {
        name,
        path: path.to_path_buf(),
        text,
        modes,
        relation,
        fuel,
        check,
    })
}

fn hgmp_files(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let entries = fs::read_dir(dir).map_err(|e| format!("cannot read {}: {e}", dir.display()))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|x| x == "hgmp") {
            out.push(path);
        }
    }
    Ok(out)
}

/// Every case in `dir` and `dir/golden`, sorted by name.
pub fn load(dir: &Path) -> Result<Vec<Case>, String> {
    let mut files = hgmp_files(dir)?;
    let golden = dir.join("golden");
    if golden.is_dir() {
        files.extend(hgmp_files(&golden)?);
    }
    let mut cases = files
        .iter()
        .map(|p| load_case(dir, p))
        .collect::<Result<Vec<_>, _>>()?;
    cases.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(cases)
}

/// The term a case produces and, for single-relation cases, its derivation.
/// Errors are reduced to their phase (`parse` for syntax errors) and text.
pub fn evaluate(case: &Case, mode: Mode, fuel: u64) -> Result<(Term, Option<Derivation>), (String, String)> {
    let fuel = case.fuel.unwrap_or(fuel);
    let m = parse_term(&case.text, mode).map_err(|e| ("parse".to_string(), e.to_string()))?;
    let failed = |e: hgmp_core::EvalError| (e.phase.as_str().to_string(), e.to_string());
    match case.relation {
        Some(rel) => {
            let j = Machine::new(mode, Fuel::new(fuel), true).apply(rel, &m).map_err(failed)?;
            Ok((j.term, j.derivation))
        }
        None => {
            let out = run_pipeline(&m, mode, Fuel::new(fuel), false).map_err(failed)?;
            Ok((out.value, None))
        }
    }
}

fn expectation(case: &Case, mode: Mode) -> Option<&Expect> {
    let Check::Expected(entries) = &case.check else {
        return None;
    };
    entries
        .iter()
        .find(|(m, _)| *m == Some(mode))
        .or_else(|| entries.iter().find(|(m, _)| m.is_none()))
        .map(|(_, e)| e)
}

/// Checks one case in one mode; `Err` carries the reason for a failure.
pub fn check_case(case: &Case, mode: Mode, fuel: u64) -> Result<(), String> {
    let outcome = evaluate(case, mode, fuel);
    if let Check::Golden(want) = &case.check {
        let (_, d) = outcome.map_err(|(_, msg)| msg)?;
        let got = d.expect("single-relation cases are traced").to_json();
        return if &got == want {
            Ok(())
        } else {
            Err(format!("derivation differs from golden:\n{}", serde_json::to_string_pretty(&got).expect("json")))
        };
    }
    let want = expectation(case, mode).ok_or_else(|| format!("no expectation for {mode} mode"))?;
    match (want, outcome) {
        (Expect::Error(phase), Err((got, _))) if *phase == got => Ok(()),
        (Expect::Error(phase), Err((got, msg))) => Err(format!("expected error:{phase}, got error:{got}: {msg}")),
        (Expect::Error(phase), Ok((t, _))) => Err(format!("expected error:{phase}, got `{t}`")),
        (Expect::Term(_), Err((_, msg))) => Err(msg),
        (Expect::Term(src), Ok((t, _))) => {
            let expected = parse_term(src, mode).map_err(|e| format!("bad expectation `{src}`: {e}"))?;
            let expected = Machine::new(mode, Fuel::new(fuel), false)
                .ct(&expected)
                .map_err(|e| format!("bad expectation `{src}`: {e}"))?
                .term;
            if alpha_eq(&t, &expected) {
                Ok(())
            } else {
                Err(format!("expected `{expected}`, got `{t}`"))
            }
        }
    }
}

/// The command-line output of a case: `run`, or `step` for single-relation
/// cases, with the given config.
pub fn case_output(case: &Case, mode: Mode, cfg: &Config) -> Output {
    let cfg = Config {
        mode,
        fuel: case.fuel.unwrap_or(cfg.fuel),
        ..*cfg
    };
    let src = Source::new(&case.name, &case.text);
    match case.relation {
        Some(Relation::Ct) => crate::step(src, &cfg, StepRelation::Ct),
        Some(Relation::Dl) => crate::step(src, &cfg, StepRelation::Dl),
        Some(Relation::Ul) => crate::step(src, &cfg, StepRelation::Ul),
        Some(Relation::Rt) => crate::step(src, &cfg, StepRelation::Rt),
        _ => crate::run(src, &cfg),
    }
}

/// `corpus`: checks every case in every mode it declares. The `--mode`
/// flag is ignored; `--trace` is not used.
pub fn run(dir: &Path, cfg: &Config) -> Output {
    if !dir.is_dir() {
        return Output {
            stderr: format!("error: {} is not a directory\n", dir.display()),
            code: EXIT_USAGE,
            ..Output::default()
        };
    }
    let cases = match load(dir) {
        Ok(c) => c,
        Err(e) => return Output::error(format!("error: {e}")),
    };
    let mut out = Output::default();
    let (mut passed, mut failed) = (0, 0);
    for case in &cases {
        for &mode in &case.modes {
            match check_case(case, mode, cfg.fuel) {
                Ok(()) => {
                    passed += 1;
                    let _ = writeln!(out.stdout, "ok   {} [{mode}]", case.name);
                }
                Err(reason) => {
                    failed += 1;
                    let _ = writeln!(out.stdout, "FAIL {} [{mode}]", case.name);
                    let _ = writeln!(out.stderr, "{} [{mode}]: {reason}", case.name);
                }
            }
        }
    }
    let _ = writeln!(out.stdout, "{passed} passed, {failed} failed");
    out.code = if failed == 0 { EXIT_OK } else { EXIT_ERROR };
    out
}

/// JSON-traced output for a case, as compared by the determinism check.
pub fn traced_output(case: &Case, mode: Mode, fuel: u64) -> Output {
    let cfg = Config {
        mode,
        fuel,
        trace: Some(TraceFormat::Json),
    };
    case_output(case, mode, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_and_expectations() {
        let h = headers("-- mode: both\n-- relation: ct\n-- fuel: 50\n-- a note\n1").unwrap();
        assert_eq!(h.modes, vec![Mode::Untyped, Mode::Typed]);
        assert_eq!(h.relation, Some(Relation::Ct));
        assert_eq!(h.fuel, Some(50));
        assert!(headers("-- fuel: 0\n1").is_err());
        assert!(headers("-- relation: type\n1").is_err());
        assert_eq!(
            parse_expected("typed: error:type\nuntyped: error:rt\n").unwrap(),
            vec![
                (Some(Mode::Typed), Expect::Error("type".into())),
                (Some(Mode::Untyped), Expect::Error("rt".into()))
            ]
        );
        assert_eq!(parse_expected("189\n").unwrap(), vec![(None, Expect::Term("189".into()))]);
    }
}
