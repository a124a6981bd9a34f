//! Line-oriented read-eval-print loop.

use std::io::{self, BufRead, Write};

use hgmp_core::{Mode, Relation};

use crate::{Config, Output, Source, StepRelation, TraceFormat};

const HELP: &str = "\
<term>            compile, check (typed mode) and run
:ct <term>        compile only
:dl <term>        apply dl once
:ul <term>        apply ul once
:rt <term>        run without compiling
:t <term>         compile and type check
:mode typed|untyped
:fuel <n>
:trace on|off
:load <file>      run a file
:help
:quit";

pub struct Session {
    pub config: Config,
}

/// What the caller should do after a line.
#[derive(Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Quit,
}

impl Default for Session {
    fn default() -> Session {
        Session::new(Config::default())
    }
}

impl Session {
    pub fn new(config: Config) -> Session {
        Session { config }
    }

    /// Handles one input line. Errors are part of the returned output; the
    /// session always survives them.
    pub fn line(&mut self, line: &str) -> (Output, Flow) {
        let line = line.trim();
        if line.is_empty() || line.starts_with("--") {
            return (Output::default(), Flow::Continue);
        }
        let Some(rest) = line.strip_prefix(':') else {
            return (crate::run(Source::new("<repl>", line), &self.config), Flow::Continue);
        };
        let (cmd, arg) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
        let arg = arg.trim();
        let out = match cmd {
            "q" | "quit" => return (Output::default(), Flow::Quit),
            "help" | "h" => ok(HELP),
            "mode" => match arg.parse::<Mode>() {
                Ok(m) => {
                    self.config.mode = m;
                    ok(&format!("mode: {m}"))
                }
                Err(e) => Output::error(e),
            },
            "fuel" => match arg.parse::<u64>() {
                Ok(n) if n >= 1 => {
                    self.config.fuel = n;
                    ok(&format!("fuel: {n}"))
                }
                _ => Output::error(format!("`:fuel` needs a positive integer, found `{arg}`")),
            },
            "trace" => match arg {
                "on" => {
                    self.config.trace = Some(TraceFormat::Text);
                    ok("trace: on")
                }
                "off" => {
                    self.config.trace = None;
                    ok("trace: off")
                }
                _ => Output::error(format!("`:trace` takes on or off, found `{arg}`")),
            },
            "load" => match std::fs::read_to_string(arg) {
                Ok(text) => crate::run(Source::new(arg, &text), &self.config),
                Err(e) => Output::error(format!("error: cannot read `{arg}`: {e}")),
            },
            "t" | "type" => crate::typecheck(Source::new("<repl>", arg), &self.config),
            other => match Relation::from_name(other) {
                Some(Relation::Ct) => crate::step(self.src(arg), &self.config, StepRelation::Ct),
                Some(Relation::Dl) => crate::step(self.src(arg), &self.config, StepRelation::Dl),
                Some(Relation::Ul) => crate::step(self.src(arg), &self.config, StepRelation::Ul),
                Some(Relation::Rt) => crate::step(self.src(arg), &self.config, StepRelation::Rt),
                _ => Output::error(format!("unknown command `:{other}` (try :help)")),
            },
        };
        (out, Flow::Continue)
    }

    fn src<'a>(&self, arg: &'a str) -> Source<'a> {
        Source::new("<repl>", arg)
    }
}

fn ok(text: &str) -> Output {
    Output {
        stdout: format!("{text}\n"),
        ..Output::default()
    }
}

/// Runs a session until `:quit` or end of input. Results go to `out`,
/// errors and traces to `err`; `prompt` is written to `out` before each
/// line.
pub fn run(
    input: impl BufRead,
    mut out: impl Write,
    mut err: impl Write,
    config: Config,
    prompt: Option<&str>,
) -> io::Result<()> {
    let mut session = Session::new(config);
    let mut lines = input.lines();
    loop {
        if let Some(p) = prompt {
            write!(out, "{p}")?;
            out.flush()?;
        }
        let Some(line) = lines.next() else {
            break;
        };
        let (o, flow) = session.line(&line?);
        out.write_all(o.stdout.as_bytes())?;
        err.write_all(o.stderr.as_bytes())?;
        if flow == Flow::Quit {
            break;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(lines: &str) -> (String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        run(lines.as_bytes(), &mut out, &mut err, Config::default(), None).unwrap();
        (String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn directives() {
        let (out, err) = session(":t astInt(3)\nlift(2 + 3)\n:ul [| x |]\n");
        assert_eq!(out, "Code\nastInt(5)\nastPromote(#var, astStr(\"x\"))\n");
        assert!(err.is_empty());
    }

    #[test]
    fn errors_do_not_end_the_session() {
        let (out, err) = session(":dl \\x. x\n1 +\n:bogus\n1 + 1\n:quit\n2\n");
        assert_eq!(out, "2\n");
        assert!(err.contains("error[stuck]"), "{err}");
        assert!(err.contains("error[parse]"), "{err}");
        assert!(err.contains("unknown command"), "{err}");
    }

    #[test]
    fn mode_and_fuel_persist() {
        let (out, err) = session(":mode typed\neval{Int}(astInt(1))\n:fuel 3\n(\\x. x) 1\n");
        assert_eq!(out, "mode: typed\n1\nfuel: 3\n");
        assert!(err.contains("error[fuel]"), "{err}");
    }
}
