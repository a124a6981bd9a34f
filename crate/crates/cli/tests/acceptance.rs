//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

use std::cell::Cell;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use hgmp_cli::corpus;
use hgmp_core::gen::{self, any_term, constant, ml_free_term, staged_program};
use hgmp_core::typing::CheckPoint;
use hgmp_core::{
    alpha_eq, is_ml_free, parse_term, pretty, run_pipeline, Derivation, ErrorKind, Fuel, Machine, Mode,
    Relation, TagName, Term,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use serde_json::Value;

/// Cases per property suite.
const CASES: u32 = 500;
/// Fuel for generated programs; divergence shows up as FuelExhausted.
const SUITE_FUEL: u64 = 20_000;
/// A suite whose interesting branch is hit less often than this proves
/// little, so it counts as a failure.
const MIN_CT_SUCCESS: f64 = 0.25;
const MIN_TYPED_OK: f64 = 0.5;

const POWER: &str = "letdown M = rec p n. if n == 1 then [| x |] else [| x * $(p (n - 1)) |] in \
                     letdown power = \\n. [| \\x. $(M n) |] in ";
const POWER_HO: &str = "letdown power_ho = \\m : Int. [| (\\m. \\n. [| \\x. $(M (m + n)) |]) $(lift(m)) |] in ";
const ARITY: &str = "astPromote(#promote, #int, astPromote(#int, astInt(1)), astPromote(#int, astInt(1)))";

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn parse(src: &str, mode: Mode) -> Result<Term, String> {
    parse_term(src, mode).map_err(|e| format!("{src}: {e}"))
}

fn apply(rel: Relation, src: &str, mode: Mode) -> Result<(Term, Derivation), String> {
    let m = parse(src, mode)?;
    let j = Machine::new(mode, Fuel::default(), true)
        .apply(rel, &m)
        .map_err(|e| format!("{src}: {e}"))?;
    Ok((j.term, j.derivation.expect("traced")))
}

fn expect_alpha(got: &Term, want: &str, mode: Mode) -> Result<(), String> {
    let want_t = parse(want, mode)?;
    if alpha_eq(got, &want_t) {
        Ok(())
    } else {
        Err(format!("expected `{want}`, got `{got}`"))
    }
}

/// `Rule[premise, ...]`, the shape compared against the worked derivations.
fn shape(d: &Derivation) -> String {
    if d.premises.is_empty() {
        d.rule.to_string()
    } else {
        let inner: Vec<String> = d.premises.iter().map(shape).collect();
        format!("{}[{}]", d.rule, inner.join(", "))
    }
}

fn golden(name: &str) -> Result<Value, String> {
    let path = corpus_dir().join("golden").join(name);
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn ac1() -> Check {
    let (out, d) = apply(Relation::Ct, "(\\x. x) $((\\x. x) astInt(7))", Mode::Untyped)?;
    if out.to_string() != "(\\x. x) 7" {
        return Err(format!("residual `{out}`"));
    }
    let want = "App ct[Lam ct[Var ct], DownML ct[App ct[Lam ct[Var ct], Ast_c ct[Const ct]], \
                App[Lam, Ast_c[Const], Ast_c[Const]], Int dl]]";
    if shape(&d) != want {
        return Err(format!("derivation shape {}", shape(&d)));
    }
    let down = &d.premises[1];
    let conclusions: Vec<String> = down.premises.iter().map(|p| format!("{} => {}", p.input, p.output)).collect();
    let want_conclusions = [
        "(\\x. x) astInt(7) => (\\x. x) astInt(7)",
        "(\\x. x) astInt(7) => astInt(7)",
        "astInt(7) => 7",
    ];
    if conclusions != want_conclusions {
        return Err(format!("DownML ct premises {conclusions:?}"));
    }
    if d.to_json() != golden("splice_identity.json")? {
        return Err("derivation differs from corpus/golden/splice_identity.json".into());
    }
    Ok(format!("`{out}`, {} rule applications, golden tree equal", d.size()))
}

fn ac2() -> Check {
    let (out, d) = apply(Relation::Rt, "(\\x. x) (eval((\\x. x) astInt(7)))", Mode::Untyped)?;
    if out != Term::int(7) {
        return Err(format!("value `{out}`"));
    }
    let want = "App[Lam, Eval rt[App[Lam, Ast_c[Const], Ast_c[Const]], Int dl, Const], Const]";
    if shape(&d) != want {
        return Err(format!("derivation shape {}", shape(&d)));
    }
    if d.to_json() != golden("eval_identity.json")? {
        return Err("derivation differs from corpus/golden/eval_identity.json".into());
    }
    Ok("value 7 with the [Eval rt] derivation, golden tree equal".into())
}

fn ac3() -> Check {
    let ct_cases = [
        ("(\\z. z) $(astStr((\\y. y) \"x\"))", "(\\z. z) \"x\""),
        ("\\x. $(astVar(\"x\"))", "\\x. x"),
        ("\\y. $(astVar(\"x\"))", "\\y. x"),
        ("[| 2 + $([| 3 + 4 |]) |]", "astAdd(astInt(2), astAdd(astInt(3), astInt(4)))"),
        ("[| 2 + 3 |]", "astAdd(astInt(2), astInt(3))"),
        ("lift(2 + 3)", "lift(2 + 3)"),
    ];
    for (src, want) in ct_cases {
        let (got, _) = apply(Relation::Ct, src, Mode::Untyped)?;
        expect_alpha(&got, want, Mode::Untyped).map_err(|e| format!("{src} ⇓ct: {e}"))?;
    }
    let (got, _) = apply(Relation::Dl, "astPromote(#str, astStr(\"x\"))", Mode::Untyped)?;
    expect_alpha(&got, "astStr(\"x\")", Mode::Untyped).map_err(|e| format!("promote ⇓dl: {e}"))?;
    for (src, want) in [("[| 2 + 3 |]", "astAdd(astInt(2), astInt(3))"), ("lift(2 + 3)", "astInt(5)")] {
        let m = parse(src, Mode::Untyped)?;
        let out = run_pipeline(&m, Mode::Untyped, Fuel::default(), false).map_err(|e| e.to_string())?;
        expect_alpha(&out.value, want, Mode::Untyped).map_err(|e| format!("{src} ⇓ct∘⇓rt: {e}"))?;
    }
    Ok("downML/astStr, both capture examples, promote ⇓dl, nested quote, four lift comparisons".into())
}

fn pipeline_value(src: &str, mode: Mode) -> Result<Term, String> {
    let m = parse(src, mode)?;
    run_pipeline(&m, mode, Fuel::default(), false)
        .map(|o| o.value)
        .map_err(|e| format!("{src}: {e}"))
}

fn ac4() -> Check {
    let ast = pipeline_value(&format!("{POWER}power 3"), Mode::Untyped)?;
    let code = Machine::new(Mode::Untyped, Fuel::default(), false)
        .dl(&ast)
        .map_err(|e| e.to_string())?
        .term;
    expect_alpha(&code, "\\x. x * (x * x)", Mode::Untyped).map_err(|e| format!("power 3: {e}"))?;
    let checks = [
        (format!("{POWER}let cube = $(power 3) in cube 4 + cube 5"), Mode::Untyped, 189),
        (format!("{POWER}letdown cube = $(power 3) in cube 4 + cube 5"), Mode::Untyped, 189),
        (format!("{POWER}letdown cube = $(power 3) in cube 4 + cube 5"), Mode::Typed, 189),
        (format!("{POWER}let cube = eval(power 3) in cube 4 + cube 5"), Mode::Untyped, 189),
        (format!("{POWER}let cube = eval{{Int -> Int}}(power 3) in cube 4 + cube 5"), Mode::Typed, 189),
        (format!("{POWER}{POWER_HO}letdown cube = $($(power_ho 1) 2) in cube 4"), Mode::Untyped, 64),
        (format!("{POWER}{POWER_HO}letdown cube = $($(power_ho 1) 2) in cube 4"), Mode::Typed, 64),
        (
            format!("{POWER}{POWER_HO}letdown f = $(power_ho 1) in let cube = f 2 in eval(cube) 4"),
            Mode::Untyped,
            64,
        ),
        (
            format!("{POWER}{POWER_HO}letdown f = $(power_ho 1) in let cube = f 2 in eval{{Int -> Int}}(cube) 4"),
            Mode::Typed,
            64,
        ),
    ];
    for (src, mode, want) in &checks {
        let v = pipeline_value(src, *mode)?;
        if v != Term::int(*want) {
            return Err(format!("{src} [{mode}] gave `{v}`, expected {want}"));
        }
    }
    Ok(format!("power 3 ⇓dl \\x. x * (x * x); {} cube programs give 189/64", checks.len()))
}

fn ac5() -> Check {
    // (a) the splice body is Code, compilation succeeds, the residual fails.
    let src = "2 + $(astLam(astStr(\"x\"), astVar(\"x\")))";
    let m = parse(src, Mode::Typed)?;
    let mut machine = Machine::new(Mode::Typed, Fuel::default(), true);
    let compiled = machine.ct(&m).map_err(|e| format!("(a) ct failed: {e}"))?;
    let checked_code = compiled
        .derivation
        .as_ref()
        .is_some_and(|d| d.premises[1].premises.iter().any(|p| p.rule == "Typecheck" && p.output.to_string() == "Code"));
    if !checked_code {
        return Err("(a) no Code check for the splice body".into());
    }
    expect_alpha(&compiled.term, "2 + \\x. x", Mode::Typed)?;
    let e = machine
        .infer(&compiled.term, CheckPoint::Residual)
        .err()
        .ok_or("(a) residual type-checked")?;
    let residual_error = e.kind == ErrorKind::TypeError
        && e.type_error.as_ref().and_then(|t| t.phase) == Some(CheckPoint::Residual);
    if !residual_error {
        return Err(format!("(a) unexpected error {e}"));
    }

    // (b) a lambda in a binder position never type-checks.
    let b = parse("astLam(\\x. x, astVar(\"x\"))", Mode::Typed)?;
    let e = run_pipeline(&b, Mode::Typed, Fuel::default(), false)
        .err()
        .ok_or("(b) accepted")?;
    if e.kind != ErrorKind::TypeError {
        return Err(format!("(b) unexpected error {e}"));
    }

    // (c) the promote arity program: two splices are fine, the third fails.
    let mut typed = Machine::new(Mode::Typed, Fuel::default(), false);
    let two = typed
        .ct(&parse(&format!("$($({ARITY}))"), Mode::Typed)?)
        .map_err(|e| format!("(c) second stage failed: {e}"))?;
    if two.term != Term::ast(TagName::Int, vec![Term::int(1), Term::int(1)]) {
        return Err(format!("(c) second stage gave `{}`", two.term));
    }
    let three = format!("$($($({ARITY})))");
    let e = run_pipeline(&parse(&three, Mode::Typed)?, Mode::Typed, Fuel::default(), false)
        .err()
        .ok_or("(c) typed run succeeded")?;
    let arity_error = e.kind == ErrorKind::TypeError
        && e.type_error.as_ref().and_then(|t| t.phase) == Some(CheckPoint::DownMl);
    if !arity_error {
        return Err(format!("(c) typed: {e}"));
    }
    let e = run_pipeline(&parse(&three, Mode::Untyped)?, Mode::Untyped, Fuel::default(), false)
        .err()
        .ok_or("(c) untyped run succeeded")?;
    if (e.kind, e.phase) != (ErrorKind::Stuck, Relation::Dl) {
        return Err(format!("(c) untyped: {e}"));
    }
    Ok("(a) residual check fails after a Code splice, (b) rejected, (c) type error typed / stuck at dl untyped".into())
}

fn runner(seed: u8) -> TestRunner {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]))
}

fn suite<T: Clone + std::fmt::Debug>(
    seed: u8,
    strat: impl Strategy<Value = T>,
    test: impl Fn(T) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(seed).run(&strat, test).map_err(|e| format!("seed [{seed}; 32]: {e}"))
}

fn ac6() -> Check {
    let mut report = Vec::new();

    let ct_ok = Cell::new(0u32);
    suite(
        61,
        gen::strategy("staged or arbitrary", |r| {
            let mode = if r.random_bool(0.5) { Mode::Typed } else { Mode::Untyped };
            let m = if r.random_bool(0.75) { staged_program(r, mode, 5) } else { any_term(r, mode, 4) };
            (mode, m)
        }),
        |(mode, m)| {
            if let Ok(out) = Machine::new(mode, Fuel::new(SUITE_FUEL), false).ct(&m) {
                ct_ok.set(ct_ok.get() + 1);
                prop_assert!(is_ml_free(&out.term), "{} compiled to {}", m, out.term);
            }
            Ok(())
        },
    )
    .map_err(|e| format!("ct-elimination: {e}"))?;
    if f64::from(ct_ok.get()) < MIN_CT_SUCCESS * f64::from(CASES) {
        return Err(format!("ct-elimination: only {} of {CASES} compiled", ct_ok.get()));
    }
    report.push(format!("ct-elim {}/{CASES} compiled", ct_ok.get()));

    suite(62, gen::strategy("ml-free", |r| ml_free_term(r, 5)), |m| {
        let mut machine = Machine::new(Mode::Untyped, Fuel::new(SUITE_FUEL), false);
        let up = machine.ul(&m).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let down = machine.dl(&up.term).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(alpha_eq(&down.term, &m), "{} -> {}", m, down.term);
        Ok(())
    })
    .map_err(|e| format!("dl∘ul: {e}"))?;
    report.push("dl∘ul ok".into());

    for (seed, mode) in [(63, Mode::Untyped), (64, Mode::Typed)] {
        suite(seed, gen::strategy("any", move |r| any_term(r, mode, 5)), |m| {
            let text = pretty(&m);
            let back = parse_term(&text, mode).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
            prop_assert_eq!(back, m);
            Ok(())
        })
        .map_err(|e| format!("parse∘pretty [{mode}]: {e}"))?;
    }
    report.push("parse∘pretty ok in both modes".into());

    suite(65, gen::strategy("constant", constant), |c| {
        let mut machine = Machine::new(Mode::Untyped, Fuel::new(SUITE_FUEL), false);
        let ast = machine.rt(&Term::lift(c.clone())).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let back = machine.dl(&ast.term).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back.term, c);
        Ok(())
    })
    .map_err(|e| format!("lift/dl: {e}"))?;
    report.push("lift/dl ok".into());

    let (ok, rejected, fuel) = (Cell::new(0u32), Cell::new(0u32), Cell::new(0u32));
    suite(66, gen::strategy("typed staged", |r| staged_program(r, Mode::Typed, 5)), |m| {
        match run_pipeline(&m, Mode::Typed, Fuel::new(SUITE_FUEL), false) {
            Ok(_) => ok.set(ok.get() + 1),
            Err(e) => match e.kind {
                ErrorKind::TypeError => rejected.set(rejected.get() + 1),
                ErrorKind::FuelExhausted => fuel.set(fuel.get() + 1),
                ErrorKind::Stuck => prop_assert!(false, "{} got stuck: {}", m, e),
            },
        }
        Ok(())
    })
    .map_err(|e| format!("typed progress: {e}"))?;
    if f64::from(ok.get()) < MIN_TYPED_OK * f64::from(CASES) {
        return Err(format!("typed progress: only {} of {CASES} ran", ok.get()));
    }
    report.push(format!(
        "typed progress: {} ran, {} rejected by a staged check, {} out of fuel, 0 stuck",
        ok.get(),
        rejected.get(),
        fuel.get()
    ));
    Ok(format!("{CASES} cases per suite, seeds [61..66; 32]: {}", report.join("; ")))
}

fn ac7() -> Check {
    let cases = corpus::load(&corpus_dir())?;
    let mut runs = 0;
    for case in &cases {
        for &mode in &case.modes {
            let plain = hgmp_cli::Config {
                mode,
                ..hgmp_cli::Config::default()
            };
            let outs = [
                corpus::case_output(case, mode, &plain),
                corpus::case_output(case, mode, &plain),
                corpus::traced_output(case, mode, hgmp_core::DEFAULT_FUEL),
                corpus::traced_output(case, mode, hgmp_core::DEFAULT_FUEL),
            ];
            if outs[0] != outs[1] || outs[2] != outs[3] {
                return Err(format!("{} [{mode}] differs between runs", case.name));
            }
            corpus::check_case(case, mode, hgmp_core::DEFAULT_FUEL).map_err(|e| format!("{} [{mode}]: {e}", case.name))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} corpus runs identical twice, plain and JSON-traced"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4", ac4),
        ("AC5", ac5),
        ("AC6", ac6),
        ("AC7", ac7),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let result = check();
        let took = t.elapsed();
        match result {
            Ok(detail) => println!("{name} PASS ({took:.2?}) {detail}"),
            Err(reason) => {
                failed += 1;
                println!("{name} FAIL ({took:.2?}) {reason}");
            }
        }
    }
    println!("acceptance: {} of 7 passed in {:.2?}", 7 - failed, start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
