//! Shared fixtures for the integration tests: program loading, the full inference pipeline
//! up to the constraint system, and parsing of printed query results.
#![allow(dead_code)]

use std::path::PathBuf;

use prasp::grounder::{ground_program, ground_queries, GroundedProgram};
use prasp::linsys::{build_system, ConstraintSystem, SystemOptions};
use prasp::query::{compile_queries, CompiledQuery};
use prasp::spanning::{build_spanning_program, SpanOptions, SpanningProgram};
use prasp::syntax::{load_file, parse_text, FileKind};
use prasp::worlds::{enumerate_answer_sets, EnumLimits, World};

pub fn program(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/programs").join(name)
}

pub fn arg(name: &str) -> String {
    program(name).display().to_string()
}

/// Runs the command line in-process and returns the exit code and stdout.
pub fn run_cli(args: &[&str]) -> (i32, String) {
    let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    let mut out = Vec::new();
    let code = prasp::cli::main_with_args(&args, &mut out);
    (code, String::from_utf8(out).expect("utf-8 output"))
}

/// Numbers inside the leading `[...]` of each result line; `[?]` yields an empty list.
pub fn values(out: &str) -> Vec<Vec<f64>> {
    out.lines()
        .filter(|l| l.starts_with('['))
        .map(|l| {
            let end = l.find(|c| c == '|' || c == ']').expect("annotation end");
            let inner = &l[1..end];
            if inner == "?" {
                return Vec::new();
            }
            inner.split([';', ',']).map(|v| v.parse::<f64>().expect("number")).collect()
        })
        .collect()
}

/// Every stage of exact inference for one program and query text.
pub struct Pipeline {
    pub grounded: GroundedProgram,
    pub sp: SpanningProgram,
    pub worlds: Vec<World>,
    pub system: ConstraintSystem,
    pub queries: Vec<CompiledQuery>,
}

impl Pipeline {
    pub fn from_text(program: &str, queries: &str, opts: SystemOptions, auto_indeps: bool) -> Pipeline {
        let stmts = parse_text(program, "test.prasp", FileKind::Background).expect("parse program");
        let grounded = ground_program(&stmts).expect("ground program");
        Self::finish(grounded, parse_text(queries, "test.query", FileKind::Query).expect("parse queries"), opts, auto_indeps)
    }

    pub fn from_files(program: &str, queries: Option<&str>, opts: SystemOptions) -> Pipeline {
        let stmts = load_file(&self::program(program)).expect("load program");
        let grounded = ground_program(&stmts).expect("ground program");
        let q = queries.map(|q| load_file(&self::program(q)).expect("load queries")).unwrap_or_default();
        Self::finish(grounded, q, opts, true)
    }

    fn finish(
        grounded: GroundedProgram,
        query_stmts: Vec<prasp::syntax::Statement>,
        opts: SystemOptions,
        auto_indeps: bool,
    ) -> Pipeline {
        let sp = build_spanning_program(&grounded, SpanOptions { auto_indeps }).expect("spanning program");
        let worlds = enumerate_answer_sets(&sp.ground, EnumLimits::default()).expect("enumeration");
        let system = build_system(&worlds, &sp, opts).expect("constraint system");
        let qf = ground_queries(&query_stmts, &grounded).expect("ground queries");
        let queries = compile_queries(&qf, &sp.ground.table).expect("compile queries");
        Pipeline { grounded, sp, worlds, system, queries }
    }
}

/// Corpus programs solvable by full enumeration, each with its query file.
pub const CORPUS: &[(&str, &str)] = &[
    ("coins.prasp", "coins.query"),
    ("happy_rule.prasp", "happy.query"),
    ("happy_cond.prasp", "happy.query"),
    ("tweety.prasp", "tweety.query"),
    ("traffic.prasp", "traffic.query"),
    ("sneezing.prasp", "sneezing.query"),
    ("two_coins.prasp", "win.query"),
    ("two_coins_indep.prasp", "win.query"),
    ("counting.prasp", "counting.query"),
    ("three_coins.prasp", "three_coins.query"),
    ("monty2.prasp", "monty2.query"),
];
