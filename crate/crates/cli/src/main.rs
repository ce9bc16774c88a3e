use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use linear_meld::check::{check_program, parse_const_override, CheckError};
use linear_meld::corpus::generate;
use linear_meld::runtime::{run, Graph, RunConfig, Status};
use linear_meld::syntax::{dump_ast, parse_source, Span};
use linear_meld::value::Value;
use linear_meld::verify::{verify, VerifyOptions};

#[derive(Parser)]
#[command(name = "lm", version, about = "Run and check LM programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a program to quiescence. Several files are concatenated.
    Run {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Seed for `random` selectors.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Program constant, `name=value`; repeatable.
        #[arg(long = "const", value_name = "NAME=VALUE")]
        consts: Vec<String>,
        #[arg(long)]
        max_steps: Option<u64>,
        /// Print one line per rule firing.
        #[arg(long)]
        trace: bool,
        /// Print the final databases.
        #[arg(long)]
        dump_db: bool,
        /// Print the parsed program and stop.
        #[arg(long)]
        dump_ast: bool,
        /// Check every step against the conservation law.
        #[arg(long)]
        audit: bool,
    },
    /// Compare engine steps with the exhaustive oracle.
    Verify {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Largest linear context the oracle enumerates.
        #[arg(long, default_value_t = 6)]
        bound: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "const", value_name = "NAME=VALUE")]
        consts: Vec<String>,
        #[arg(long, default_value_t = 10_000)]
        max_steps: u64,
    },
    /// Print generated axioms.
    Gen {
        /// `nqueens` or `pagerank-ring`.
        kind: String,
        #[arg(long)]
        size: u64,
    },
}

/// Concatenated sources with a map back to the original files.
struct Sources {
    text: String,
    files: Vec<(String, usize)>,
}

impl Sources {
    fn read(paths: &[PathBuf]) -> Result<Sources> {
        let mut text = String::new();
        let mut files = Vec::new();
        for p in paths {
            let src = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            files.push((p.display().to_string(), text.lines().count() + 1));
            text.push_str(&src);
            if !src.ends_with('\n') {
                text.push('\n');
            }
        }
        Ok(Sources { text, files })
    }

    /// `file:line:col` for a span of the concatenated text.
    fn locate(&self, span: Span) -> String {
        let line = span.line as usize;
        let (name, first) = self.files.iter().rev().find(|(_, first)| *first <= line).unwrap_or(&self.files[0]);
        format!("{name}:{}:{}", line + 1 - first, span.col)
    }
}

fn consts(raw: &[String]) -> Result<BTreeMap<String, Value>, String> {
    raw.iter().map(|s| parse_const_override(s).map_err(|e| format!("--const {s}: {e}"))).collect()
}

fn load(files: &[PathBuf], raw_consts: &[String]) -> Result<Result<linear_meld::ir::TypedProgram, Vec<String>>> {
    let src = Sources::read(files)?;
    let consts = match consts(raw_consts) {
        Ok(c) => c,
        Err(e) => return Ok(Err(vec![e])),
    };
    let program = match parse_source(&src.text) {
        Ok(p) => p,
        Err(e) => return Ok(Err(vec![format!("{}: {}: {}", src.locate(e.span()), e.code(), e.message())])),
    };
    Ok(check_program(&program, &consts).map_err(|errs| {
        errs.iter()
            .map(|e: &CheckError| {
                let rule = e.rule.map(|r| format!(" (rule {r})")).unwrap_or_default();
                format!("{}: {}: {}{rule}", src.locate(e.span), e.code, e.message)
            })
            .collect()
    }))
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { files, workers, seed, consts, max_steps, trace, dump_db, dump_ast: ast, audit } => {
            if ast {
                let src = Sources::read(&files)?;
                return match parse_source(&src.text) {
                    Ok(p) => {
                        print!("{}", dump_ast(&p));
                        Ok(ExitCode::SUCCESS)
                    }
                    Err(e) => {
                        eprintln!("{}: {}: {}", src.locate(e.span()), e.code(), e.message());
                        Ok(ExitCode::from(1))
                    }
                };
            }
            let typed = match load(&files, &consts)? {
                Ok(t) => t,
                Err(errs) => {
                    errs.iter().for_each(|e| eprintln!("{e}"));
                    return Ok(ExitCode::from(1));
                }
            };
            let graph = Graph::load(Arc::new(typed))?;
            let cfg = RunConfig { workers, seed, max_steps, trace, audit };
            let report = run(graph, &cfg)?;
            for ev in &report.trace {
                println!("{}", ev.render(&report.graph.program));
            }
            if dump_db {
                print!("{}", report.graph.dump());
            }
            match report.status {
                Status::Quiescent => {
                    if audit {
                        eprintln!("audit: {} steps checked, 0 violations", report.audited);
                    }
                    Ok(ExitCode::SUCCESS)
                }
                Status::StepLimit => {
                    eprintln!("aborted: step limit of {} reached before quiescence", max_steps.unwrap_or(0));
                    Ok(ExitCode::from(2))
                }
            }
        }
        Command::Verify { files, bound, samples, seed, consts, max_steps } => {
            let typed = match load(&files, &consts)? {
                Ok(t) => Arc::new(t),
                Err(errs) => {
                    errs.iter().for_each(|e| eprintln!("{e}"));
                    return Ok(ExitCode::from(1));
                }
            };
            let opts = VerifyOptions { bound, samples, seed, max_steps };
            let report = verify(typed.clone(), &opts)?;
            match &report.failure {
                None => {
                    println!("pass: {} states checked, {} over the bound", report.checked, report.skipped);
                    Ok(ExitCode::SUCCESS)
                }
                Some(c) => {
                    println!("fail: {}", c.render(&typed));
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Gen { kind, size } => match generate(&kind, size) {
            Ok(text) => {
                print!("{text}");
                Ok(ExitCode::SUCCESS)
            }
            Err(e) => {
                eprintln!("error: {e}");
                Ok(ExitCode::from(1))
            }
        },
    }
}
