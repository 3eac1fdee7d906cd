//! Command-line front end: argument parsing, task dispatch and the inference pipeline
//! parse → ground → span → sample → solve → query (or learn).

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::approx::{
    iterative_refinement, maxwalksat, refinement_start, simulated_annealing, walksat_weight, world_counts,
    AnnealParams, RefineParams, WalkSatParams,
};
use crate::error::{Error, Result};
use crate::grounder::{ground_program, ground_queries, GroundAnnotation, GroundedProgram};
use crate::learning::{learn, LearnOptions, LearningTask};
use crate::linsys::{build_system, candidates, entropy, pick_distribution, ConstraintSystem, PickMode, RowKind, SystemOptions};
use crate::modelcount::{count_query, weights2cc_transform, DEFAULT_DENOMINATOR_CAP};
use crate::query::{
    answer_bounds, answer_distribution, answer_distributions, answer_samples, compile_queries, format_result,
    CompiledQuery, QueryResult, QueryValue, EXACT_DIGITS, SOLVER_DIGITS,
};
use crate::sampling::{initial_sample, stream_rng, SampleMultiset, SampleSpace, SamplerConfig, UniMethod};
use crate::spanning::{build_spanning_program, SpanOptions, SpanningProgram};
use crate::syntax::{format_prob, load_file, AnnKind, Statement};
use crate::worlds::{enumerate_answer_sets, EnumLimits, GFormula, Head, World};

/// Default sample count for sampling methods other than "all models".
pub const DEFAULT_MODELS: usize = 1024;
/// Candidate distributions compared by entropy in the default solver.
pub const DEFAULT_CANDIDATES: usize = 5;

const UNSUPPORTED_FLAGS: &[&str] = &[
    "--ascheckmode",
    "--mod0",
    "--mod1",
    "--checkconsistency",
    "--showindeps",
    "--cacheinfsetup",
    "--noremotesampling",
    "--mlns",
    "--linoptimconf",
    "--linsolveconf",
    "--enforceSMT",
    "--omitSMT",
    "--strongnegbelief",
    "--addnegf",
    "--spangenconf",
    "--spanqueries",
    "--dnf",
    "--assumegroundersolver",
    "--grounder",
    "--groundersolver",
    "--groundingconf",
    "--folconv",
    "--SMTsolver",
    "--stream",
    "--extiidanalysis",
    "--nnls",
];

pub const USAGE: &str = "\
usage: prasp [options] <background.prasp> [<queries.query>...]
       prasp [options] <background.prasp> <hypotheses.hypoth> <examples.examples>

files:
  -b, --bgk FILE            background knowledge file
  -q, --query FILE...       query files
  -l, --learn FILE          hypothesis file (learning)
  -e, --examples FILE       examples file (learning)

sampling:
  --initsample M            initial sampling method 0-7 (default 2: all models)
  --models N                number of initial samples (0: all models)
  --unisample M             near-uniform draws: 0 all models, 1 flip, 2 xor
  --xorconf Q1 [Q2]         parity sampling: models kept per draw (0: all), constraint count
  --flipsampconf R          accepted for compatibility; has no effect
  --sirndconf O             accepted for compatibility; has no effect
  --seed S                  random seed (default 0)

solving:
  --nosolve                 answer from sample frequencies (or plain counting)
  --simanneal [E T A M I S G]  simulated annealing
  --itrefinement [EPS N R]  maximum-entropy iterative refinement
  --maxwalksat [C F T P R]  MaxWalkSAT search for low-cost worlds
  --weights2cc              counting over helper-expanded weights
  --intervalresults         report lower and upper probability bounds
  --ndistrs N               report results under N candidate distributions
  --maxentropy              maximum-entropy distribution
  --ignoreentropy           first candidate distribution, no entropy comparison
  --noautoindeps            no automatic independence detection
  --noindepconstrs          no independence constraints
  --ignoredeclindeps        ignore declared independence
  --limitindepcombs N       cap on independence rows per group
  -o1, -o2, -o3             optimization shortcuts

output:
  --check --pwdistr --pwsamples N --showentropy --showspan --showexpansion
  --strict                  exit with status 1 when any query result is unknown
  --verbose --debug --help

learning:
  --maxconjexamples --keepduplicateexamples --nonorm
";

#[derive(Clone, Debug)]
pub enum Solver {
    Linear,
    Refinement(RefineParams),
    Anneal(AnnealParams),
    WalkSat(WalkSatParams),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub background: PathBuf,
    pub queries: Vec<PathBuf>,
    pub hypotheses: Option<PathBuf>,
    pub examples: Option<PathBuf>,
    pub initsample: Option<u8>,
    pub models: Option<usize>,
    pub uni: UniMethod,
    pub xor_q1: usize,
    pub xor_q2: Option<usize>,
    pub seed: u64,
    pub nosolve: bool,
    pub solver: Solver,
    pub weights2cc: bool,
    pub interval_results: bool,
    pub ndistrs: Option<usize>,
    pub maxentropy: bool,
    pub ignore_entropy: bool,
    pub auto_indeps: bool,
    pub indep_constraints: bool,
    pub ignore_declared: bool,
    pub limit_combs: Option<usize>,
    pub check: bool,
    pub pwdistr: bool,
    pub pwsamples: Option<usize>,
    pub show_entropy: bool,
    pub show_span: bool,
    pub show_expansion: bool,
    pub verbose: bool,
    pub debug: bool,
    pub conjunctive: bool,
    pub keep_duplicates: bool,
    pub normalize: bool,
    pub strict: bool,
}

/// What a command line asks for.
#[derive(Clone, Debug)]
pub enum Command {
    Help,
    Run(Box<RunConfig>),
}

#[derive(Default)]
struct Draft {
    background: Vec<PathBuf>,
    queries: Vec<PathBuf>,
    hypotheses: Vec<PathBuf>,
    examples: Vec<PathBuf>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

/// Consumes the numeric arguments following a flag.
fn numbers(args: &[String], i: &mut usize, max: usize) -> Vec<f64> {
    let mut out = Vec::new();
    while out.len() < max {
        match args.get(*i + 1).and_then(|a| a.parse::<f64>().ok()) {
            Some(v) => {
                out.push(v);
                *i += 1;
            }
            None => break,
        }
    }
    out
}

fn required<T: std::str::FromStr>(args: &[String], i: &mut usize, flag: &str) -> Result<T> {
    *i += 1;
    args.get(*i)
        .and_then(|a| a.parse().ok())
        .ok_or_else(|| usage(format!("{flag} needs a numeric argument")))
}

fn classify(d: &mut Draft, path: &str) -> Result<()> {
    let p = PathBuf::from(path);
    match Path::new(path).extension().and_then(|e| e.to_str()) {
        Some("prasp") => d.background.push(p),
        Some("query") => d.queries.push(p),
        Some("hypoth") => d.hypotheses.push(p),
        Some("examples") => d.examples.push(p),
        _ => {
            return Err(usage(format!(
                "cannot tell the role of '{path}' from its extension; use --bgk, --query, --learn or --examples"
            )))
        }
    }
    Ok(())
}

/// Parses a command line (without the program name). Switches apply regardless of position.
pub fn parse_args(args: &[String]) -> Result<Command> {
    let mut d = Draft::default();
    let mut cfg = RunConfig {
        background: PathBuf::new(),
        queries: Vec::new(),
        hypotheses: None,
        examples: None,
        initsample: None,
        models: None,
        uni: UniMethod::AllModels,
        xor_q1: 100,
        xor_q2: None,
        seed: 0,
        nosolve: false,
        solver: Solver::Linear,
        weights2cc: false,
        interval_results: false,
        ndistrs: None,
        maxentropy: false,
        ignore_entropy: false,
        auto_indeps: true,
        indep_constraints: true,
        ignore_declared: false,
        limit_combs: None,
        check: false,
        pwdistr: false,
        pwsamples: None,
        show_entropy: false,
        show_span: false,
        show_expansion: false,
        verbose: false,
        debug: false,
        conjunctive: false,
        keep_duplicates: false,
        normalize: true,
        strict: false,
    };
    let mut i = 0;
    while i < args.len() {
        let a = args[i].as_str();
        match a {
            "--help" | "-h" => return Ok(Command::Help),
            "-b" | "--bgk" | "-l" | "--learn" | "-e" | "--examples" => {
                i += 1;
                let f = args.get(i).ok_or_else(|| usage(format!("{a} needs a file name")))?;
                let list = match a {
                    "-b" | "--bgk" => &mut d.background,
                    "-l" | "--learn" => &mut d.hypotheses,
                    _ => &mut d.examples,
                };
                list.push(PathBuf::from(f));
            }
            "-q" | "--query" => {
                let start = i;
                while args.get(i + 1).is_some_and(|f| !f.starts_with('-')) {
                    i += 1;
                    d.queries.push(PathBuf::from(&args[i]));
                }
                if i == start {
                    return Err(usage("--query needs at least one file name"));
                }
            }
            "--models" => cfg.models = Some(required(args, &mut i, a)?),
            "--initsample" => cfg.initsample = Some(required(args, &mut i, a)?),
            "--unisample" => {
                cfg.uni = match required::<u8>(args, &mut i, a)? {
                    0 => UniMethod::AllModels,
                    1 => UniMethod::Flip,
                    2 => UniMethod::Xor,
                    m => return Err(usage(format!("unknown --unisample method {m}"))),
                }
            }
            "--xorconf" => {
                let v = numbers(args, &mut i, 2);
                if v.is_empty() {
                    return Err(usage("--xorconf needs q1 [q2]"));
                }
                cfg.uni = UniMethod::Xor;
                cfg.xor_q1 = v[0] as usize;
                cfg.xor_q2 = v.get(1).map(|&q| q as usize);
            }
            "--flipsampconf" | "--sirndconf" => {
                let _: f64 = required(args, &mut i, a)?;
                log::warn!("{a} has no effect in prasp-lite");
            }
            "--seed" => cfg.seed = required(args, &mut i, a)?,
            "--nosolve" => cfg.nosolve = true,
            "--strict" => cfg.strict = true,
            "--nospan" => log::warn!("--nospan has no effect: the spanning program is always generated"),
            "--simanneal" => {
                let v = numbers(args, &mut i, 7);
                let mut p = AnnealParams::default();
                let fields: [&mut dyn FnMut(f64); 7] = [
                    &mut |x| p.max_energy = x,
                    &mut |x| p.min_temp = x,
                    &mut |x| p.temp_decr = x,
                    &mut |x| p.sampling_method = x as u8,
                    &mut |x| p.init_temp = x,
                    &mut |x| p.samples_per_step = x as usize,
                    &mut |x| p.target_all = x != 0.0,
                ];
                for (set, x) in fields.into_iter().zip(v) {
                    set(x);
                }
                if !(p.temp_decr > 0.0 && p.temp_decr < 1.0) {
                    return Err(usage("--simanneal temperature decrease must lie in (0,1)"));
                }
                cfg.solver = Solver::Anneal(p);
            }
            "--itrefinement" => {
                let v = numbers(args, &mut i, 3);
                let mut p = RefineParams::default();
                if let Some(&e) = v.first() {
                    if e <= 0.0 {
                        return Err(usage("--itrefinement epsilon must be positive"));
                    }
                    p.epsilon = e;
                }
                if let Some(&n) = v.get(1) {
                    p.max_iterations = n as usize;
                }
                if let Some(&r) = v.get(2) {
                    p.retain_counts = r != 0.0;
                }
                cfg.solver = Solver::Refinement(p);
            }
            "--maxwalksat" => {
                let v = numbers(args, &mut i, 5);
                let mut p = WalkSatParams::default();
                let fields: [&mut dyn FnMut(f64); 5] = [
                    &mut |x| p.cost_target = x,
                    &mut |x| p.max_flips = x as usize,
                    &mut |x| p.max_tries = x as usize,
                    &mut |x| p.p = x,
                    &mut |x| p.replacement = x != 0.0,
                ];
                for (set, x) in fields.into_iter().zip(v) {
                    set(x);
                }
                if !(0.0..=1.0).contains(&p.p) {
                    return Err(usage("--maxwalksat p must lie in [0,1]"));
                }
                cfg.solver = Solver::WalkSat(p);
            }
            "--weights2cc" => cfg.weights2cc = true,
            "--intervalresults" => cfg.interval_results = true,
            "--ndistrs" => cfg.ndistrs = Some(required(args, &mut i, a)?),
            "--maxentropy" => {
                if !numbers(args, &mut i, 4).is_empty() {
                    log::warn!("--maxentropy parameters have no effect in prasp-lite");
                }
                cfg.maxentropy = true;
            }
            "--ignoreentropy" => cfg.ignore_entropy = true,
            "--noautoindeps" => cfg.auto_indeps = false,
            "--noindepconstrs" => cfg.indep_constraints = false,
            "--ignoredeclindeps" => cfg.ignore_declared = true,
            "--limitindepcombs" => cfg.limit_combs = Some(required(args, &mut i, a)?),
            "--check" => cfg.check = true,
            "--pwdistr" => cfg.pwdistr = true,
            "--pwsamples" => cfg.pwsamples = Some(required(args, &mut i, a)?),
            "--showentropy" => cfg.show_entropy = true,
            "--showspan" => cfg.show_span = true,
            "--showexpansion" => cfg.show_expansion = true,
            "--verbose" => cfg.verbose = true,
            "--debug" => {
                cfg.debug = true;
                cfg.verbose = true;
            }
            "--maxconjexamples" => cfg.conjunctive = true,
            "--keepduplicateexamples" => cfg.keep_duplicates = true,
            "--nonorm" => cfg.normalize = false,
            "-o1" | "-o1asp" | "-o2" | "-o2asp" | "-o4asp" => {
                cfg.indep_constraints = false;
                cfg.auto_indeps = false;
                cfg.solver = Solver::Refinement(RefineParams::default());
                if a.starts_with("-o2") {
                    cfg.initsample = Some(4);
                }
            }
            "-o3" | "-o3asp" => {
                cfg.solver = Solver::Anneal(AnnealParams::default());
                cfg.nosolve = true;
                cfg.ignore_declared = true;
                cfg.indep_constraints = false;
                cfg.auto_indeps = false;
            }
            _ if UNSUPPORTED_FLAGS.contains(&a) => {
                return Err(Error::Unsupported(format!("option '{a}' is not supported in prasp-lite")))
            }
            _ if a.starts_with('-') && a.len() > 1 && a.parse::<f64>().is_err() => {
                return Err(usage(format!("unknown option '{a}'")))
            }
            _ => classify(&mut d, a)?,
        }
        i += 1;
    }
    match d.background.len() {
        0 => return Err(usage("exactly one background knowledge file is required; none given")),
        1 => cfg.background = d.background.remove(0),
        n => return Err(usage(format!("exactly one background knowledge file is required; {n} given"))),
    }
    if d.hypotheses.len() > 1 || d.examples.len() > 1 {
        return Err(usage("at most one hypothesis file and one examples file may be given"));
    }
    cfg.hypotheses = d.hypotheses.pop();
    cfg.examples = d.examples.pop();
    if cfg.hypotheses.is_some() != cfg.examples.is_some() {
        return Err(usage("learning needs both a hypothesis file and an examples file"));
    }
    cfg.queries = d.queries;
    Ok(Command::Run(Box::new(cfg)))
}

/// Visible atoms of a world as `{a, b}`.
pub fn show_world(sp: &SpanningProgram, w: &World) -> String {
    let atoms: Vec<String> = w.ones().filter(|&a| !sp.is_helper(a)).map(|a| sp.ground.table.atom(a).to_string()).collect();
    format!("{{{}}}", atoms.join(", "))
}

fn show_expansion(g: &GroundedProgram, out: &mut dyn Write) -> Result<()> {
    for it in &g.items {
        if it.volatile {
            continue;
        }
        let line = match &it.ann {
            None => format!("{}.", it.formula),
            Some(GroundAnnotation::Weight(w)) => format!("[{w}] {}.", it.formula),
            Some(GroundAnnotation::Cond(w, c)) => format!("[{w}|{c}] {}.", it.formula),
            Some(GroundAnnotation::Span) => format!("[.] {}.", it.formula),
        };
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Hard rules of the spanning program plus weighted simple formulas, for MaxWalkSAT.
fn walksat_formulas(sp: &SpanningProgram) -> Vec<(GFormula, f64)> {
    let mut fs = Vec::new();
    for r in &sp.ground.rules {
        let mut body: Vec<GFormula> = r.pos.iter().map(|&a| GFormula::Atom(a)).collect();
        body.extend(r.neg.iter().map(|&a| GFormula::not(GFormula::Atom(a))));
        body.extend(r.other.iter().cloned());
        let f = match &r.head {
            Head::Atom(h) => {
                let mut d: Vec<GFormula> = body.into_iter().map(GFormula::not).collect();
                d.push(GFormula::Atom(*h));
                GFormula::Or(d)
            }
            Head::None => GFormula::not(GFormula::and(body)),
            Head::Choice { lo, hi, atoms } => {
                let c = GFormula::Count {
                    lower: Some(*lo as i64),
                    upper: Some(*hi as i64),
                    elems: atoms.iter().map(|&a| GFormula::Atom(a)).collect(),
                };
                if body.is_empty() {
                    c
                } else {
                    let mut d: Vec<GFormula> = body.into_iter().map(GFormula::not).collect();
                    d.push(c);
                    GFormula::Or(d)
                }
            }
        };
        // Bare 0{a}1 choices never constrain an assignment.
        if matches!(&f, GFormula::Count { lower: Some(0), upper: Some(1), elems } if elems.len() == 1) {
            continue;
        }
        fs.push((f, 1000.0));
    }
    for f in &sp.ground.formula_constraints {
        fs.push((f.clone(), 1000.0));
    }
    for e in &sp.weighted {
        if let (Some(w), None, false) = (e.weight, &e.cond, e.volatile) {
            fs.push((e.formula.clone(), walksat_weight(w)));
        }
    }
    fs
}

struct QuerySet {
    name: String,
    queries: Vec<CompiledQuery>,
}

fn load_queries(cfg: &RunConfig, g: &GroundedProgram, sp: &SpanningProgram) -> Result<Vec<QuerySet>> {
    cfg.queries
        .iter()
        .map(|p| {
            let stmts = load_file(p)?;
            let qf = ground_queries(&stmts, g)?;
            Ok(QuerySet { name: p.display().to_string(), queries: compile_queries(&qf, &sp.ground.table)? })
        })
        .collect()
}

/// Prints one line per query with `digits` significant digits; with `strict`, unknown
/// results turn into an error afterwards.
fn print_results(
    sets: &[QuerySet],
    digits: i32,
    strict: bool,
    out: &mut dyn Write,
    answer: &dyn Fn(&CompiledQuery) -> QueryResult,
) -> Result<()> {
    let mut unknown = 0;
    for s in sets {
        log::debug!("queries of {}", s.name);
        for q in &s.queries {
            let r = answer(q);
            unknown += usize::from(r.value == QueryValue::Unknown);
            writeln!(out, "{}", format_result(&r, digits))?;
        }
    }
    if strict && unknown > 0 {
        return Err(Error::Solver(format!("{unknown} query result(s) unknown")));
    }
    Ok(())
}

fn system_options(cfg: &RunConfig) -> SystemOptions {
    SystemOptions {
        indep_constraints: cfg.indep_constraints,
        ignore_declared: cfg.ignore_declared,
        limit_combs: cfg.limit_combs,
    }
}

fn print_check(system: &ConstraintSystem, sp: &SpanningProgram, probs: &[f64], out: &mut dyn Write) -> Result<()> {
    for r in &system.rows {
        let label = match (r.kind, r.source) {
            (RowKind::Weight | RowKind::Conditional, Some(i)) => sp.weighted[i].describe(),
            (RowKind::Independence, _) => "independence".into(),
            (RowKind::Normalization, _) => "normalization".into(),
            _ => "row".into(),
        };
        writeln!(out, "check: delta {} for {label}", format_prob(r.violation(probs)))?;
    }
    Ok(())
}

fn print_distribution(sp: &SpanningProgram, worlds: &[World], probs: &[f64], out: &mut dyn Write) -> Result<()> {
    for (w, p) in worlds.iter().zip(probs) {
        writeln!(out, "[{}] {}", format_prob(*p), show_world(sp, w))?;
    }
    Ok(())
}

/// Runs an inference or learning task, writing results to `out`.
pub fn run(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let background = load_file(&cfg.background)?;
    if let (Some(h), Some(e)) = (&cfg.hypotheses, &cfg.examples) {
        return run_learning(cfg, background, h, e, out);
    }
    let grounded = ground_program(&background)?;
    if cfg.show_expansion {
        show_expansion(&grounded, out)?;
    }
    let grounded_for_span = if cfg.weights2cc { weights2cc_transform(&grounded, DEFAULT_DENOMINATOR_CAP)? } else { grounded.clone() };
    let sp = build_spanning_program(&grounded_for_span, SpanOptions { auto_indeps: cfg.auto_indeps })?;
    if cfg.show_span {
        write!(out, "{}", sp.show())?;
    }
    let all_worlds = enumerate_answer_sets(&sp.ground, EnumLimits::default())?;
    if all_worlds.is_empty() {
        return Err(Error::Solver("the spanning program has no answer sets: the background knowledge is inconsistent".into()));
    }
    if cfg.verbose {
        log::info!("{} possible worlds over {} atoms", all_worlds.len(), sp.ground.n_atoms());
    }
    let sets = load_queries(cfg, &grounded, &sp)?;

    // Plain counting: weights2cc, or --nosolve without any sampler.
    let sampled = cfg.initsample.is_some() || matches!(cfg.solver, Solver::Anneal(_));
    if cfg.weights2cc || (cfg.nosolve && !sampled && matches!(cfg.solver, Solver::Linear)) {
        if cfg.pwdistr {
            let u = vec![1.0 / all_worlds.len() as f64; all_worlds.len()];
            print_distribution(&sp, &all_worlds, &u, out)?;
        }
        return print_results(&sets, EXACT_DIGITS, cfg.strict, out, &|q| {
            let value = count_query(&all_worlds, q)
                .map_or(QueryValue::Unknown, |r| QueryValue::Point(*r.numer() as f64 / *r.denom() as f64));
            QueryResult { formula: q.formula.clone(), cond: q.cond.clone(), value }
        });
    }

    let space = SampleSpace::new(&sp, all_worlds);
    let method = cfg.initsample.unwrap_or(2);
    let n = cfg.models.unwrap_or(if method == 2 { 0 } else { DEFAULT_MODELS });
    let sampler = SamplerConfig { method, n, uni: cfg.uni, xor_q1: cfg.xor_q1, xor_q2: cfg.xor_q2 };
    if cfg.verbose {
        log::info!("initial sampling method {method} with {n} samples (0: all models), seed {}", cfg.seed);
    }
    let mut rng = stream_rng(cfg.seed, 0);
    let mut samples: SampleMultiset = initial_sample(&sampler, &space, &mut rng)?;

    match &cfg.solver {
        Solver::Anneal(p) => {
            let r = simulated_annealing(&space, p, &sampler, samples, &mut rng)?;
            if cfg.verbose {
                log::info!("annealing stopped after {} iterations at energy {}", r.iterations, format_prob(r.energy));
            }
            samples = r.samples;
        }
        Solver::WalkSat(p) => {
            let formulas = walksat_formulas(&sp);
            let models = maxwalksat(&formulas, sp.ground.n_atoms(), p, &mut rng)?;
            for m in &models {
                writeln!(out, "{}", show_world(&sp, m))?;
            }
            let ms: SampleMultiset = models.into_iter().map(Some).collect();
            return print_results(&sets, EXACT_DIGITS, cfg.strict, out, &|q| answer_samples(&ms, q));
        }
        _ => {}
    }
    if let Some(k) = cfg.pwsamples {
        for w in samples.iter().take(k) {
            match w {
                Some(w) => writeln!(out, "{}", show_world(&sp, w))?,
                None => writeln!(out, "{{}}")?,
            }
        }
    }
    if cfg.nosolve {
        if samples.iter().all(Option::is_none) {
            return Err(Error::Solver("no consistent samples to count".into()));
        }
        return print_results(&sets, EXACT_DIGITS, cfg.strict, out, &|q| answer_samples(&samples, q));
    }

    let (worlds, counts) = world_counts(&samples);
    if worlds.is_empty() {
        return Err(Error::Solver("initial sampling produced no worlds".into()));
    }
    let system = build_system(&worlds, &sp, system_options(cfg))?;
    if cfg.interval_results {
        return print_results(&sets, SOLVER_DIGITS, cfg.strict, out, &|q| answer_bounds(&worlds, &system, q));
    }
    let probs = match &cfg.solver {
        Solver::Refinement(p) => {
            let start = refinement_start(&counts, p.retain_counts);
            iterative_refinement(start, &system.targets, p)?
        }
        _ => {
            if let Some(k) = cfg.ndistrs.filter(|&k| k > 1) {
                let dists: Vec<Vec<f64>> = candidates(&system, k, cfg.seed)?.into_iter().map(|d| d.probs).collect();
                return print_results(&sets, SOLVER_DIGITS, cfg.strict, out, &|q| answer_distributions(&worlds, &dists, q));
            }
            let mode = if cfg.maxentropy {
                PickMode::Maxent
            } else if cfg.ignore_entropy {
                PickMode::IgnoreEntropy
            } else {
                PickMode::Default
            };
            pick_distribution(&system, mode, DEFAULT_CANDIDATES, cfg.seed)?.probs
        }
    };
    if cfg.pwdistr {
        print_distribution(&sp, &worlds, &probs, out)?;
    }
    if cfg.show_entropy {
        writeln!(out, "entropy: {}", format_prob(entropy(&probs)))?;
    }
    if cfg.check {
        print_check(&system, &sp, &probs, out)?;
    }
    print_results(&sets, SOLVER_DIGITS, cfg.strict, out, &|q| answer_distribution(&worlds, &probs, q))
}

fn run_learning(cfg: &RunConfig, background: Vec<Statement>, h: &Path, e: &Path, out: &mut dyn Write) -> Result<()> {
    let hyp_stmts = load_file(h)?;
    let ex_stmts = load_file(e)?;
    let hypotheses = hyp_stmts
        .into_iter()
        .filter_map(|s| match s {
            Statement::Formula(f) => Some(Ok(f)),
            Statement::Domain(_) => None,
            _ => Some(Err(usage("hypothesis files may only contain [?] formulas"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let examples = ex_stmts
        .into_iter()
        .filter_map(|s| match s {
            Statement::Formula(f) => Some(Ok(f)),
            Statement::Domain(_) => None,
            _ => Some(Err(usage("example files may only contain formulas"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let task = LearningTask {
        background,
        hypotheses: hypotheses.clone(),
        examples,
        conjunctive: cfg.conjunctive,
        keep_duplicates: cfg.keep_duplicates,
        normalize: cfg.normalize,
    };
    let opts = LearnOptions { system: system_options(cfg), auto_indeps: cfg.auto_indeps, ..LearnOptions::default() };
    let learned = learn(&task, &opts)?;
    if cfg.verbose {
        log::info!(
            "learning finished after {} iterations with likelihood {}",
            learned.iterations,
            format_prob(learned.objective)
        );
    }
    for (hf, w) in hypotheses.iter().zip(&learned.w) {
        let w = format_prob(*w);
        match hf.annotation.as_ref().map(|a| &a.kind) {
            Some(AnnKind::CondQuery(c)) => writeln!(out, "[{w}|{c}] {}.", hf.formula)?,
            _ => writeln!(out, "[{w}] {}.", hf.formula)?,
        }
    }
    Ok(())
}

/// Entry point shared by the binary: parses `args`, runs, and returns the exit code.
pub fn main_with_args(args: &[String], out: &mut dyn Write) -> i32 {
    match parse_args(args) {
        Ok(Command::Help) => {
            let _ = write!(out, "{USAGE}");
            0
        }
        Ok(Command::Run(cfg)) => match run(&cfg, out) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("ERROR: {e}");
                1
            }
        },
        Err(e) => {
            eprintln!("ERROR: {e}");
            if matches!(e, Error::Usage(_)) {
                eprintln!("run with --help for usage");
            }
            2
        }
    }
}
