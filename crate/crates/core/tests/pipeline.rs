//! Grounding, spanning, answer sets, the constraint system, queries and model counting,
//! checked on the corpus and on generated programs.

mod common;

use common::{Pipeline, CORPUS};
use num_rational::Ratio;
use proptest::prelude::*;
use prasp::cli::show_world;
use prasp::grounder::{ground_program, ground_queries, GroundAnnotation};
use prasp::linsys::{
    entropy, pick_distribution, solve_lp_bounds, truth_vector, PickMode, SystemOptions, INCONSISTENCY_TOL,
};
use prasp::modelcount::{count_query, weights2cc_transform};
use prasp::query::{answer_bounds, answer_distribution, compile_queries, probability, CompiledQuery, QueryValue};
use prasp::spanning::{build_spanning_program, SpanOptions};
use prasp::syntax::{load_file, parse_text, Atom, FileKind, Formula, Term, Weight};
use prasp::worlds::{
    brute_force_answer_sets, enumerate_answer_sets, holds, is_stable, sort_worlds, AtomTable, EnumLimits, GFormula,
    GroundProgram, GroundRule, Head,
};

const TOL: f64 = 1e-6;

fn ground_text(text: &str) -> prasp::grounder::GroundedProgram {
    ground_program(&parse_text(text, "t.prasp", FileKind::Background).unwrap()).unwrap()
}

fn has_variable(f: &Formula) -> bool {
    fn term(t: &Term) -> bool {
        match t {
            Term::Var(_) | Term::Interval(..) | Term::Pool(_) => true,
            Term::Compound(_, ts) => ts.iter().any(term),
            _ => false,
        }
    }
    let mut found = false;
    f.for_each_atom(&mut |a: &Atom, _| found |= a.args.iter().any(term));
    found
}

/// The point distribution of the default solver, or `None` when the system is inconsistent.
fn consistent_distribution(p: &Pipeline) -> Option<Vec<f64>> {
    let d = pick_distribution(&p.system, PickMode::Default, 5, 0).unwrap();
    (p.system.all_point() && d.residual <= INCONSISTENCY_TOL).then_some(d.probs)
}

// ---------------------------------------------------------------------------------------------
// Grounding

#[test]
fn grounding_is_deterministic() {
    for entry in std::fs::read_dir(common::program("")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "prasp") {
            let stmts = load_file(&path).unwrap();
            let a = ground_program(&stmts).unwrap();
            let b = ground_program(&stmts).unwrap();
            assert_eq!(a.items, b.items, "{}", path.display());
            assert_eq!(a.groups, b.groups, "{}", path.display());
        }
    }
}

#[test]
fn double_brackets_instantiate_each_binding() {
    let g = ground_text("coin(1..3).\n[[0.5]] coin_out(N,heads) :- coin(N), N != 1.\n");
    let weighted: Vec<String> = g
        .items
        .iter()
        .filter(|it| matches!(it.ann, Some(GroundAnnotation::Weight(_))))
        .map(|it| it.formula.to_string())
        .collect();
    assert_eq!(weighted, ["coin_out(2,heads)", "coin_out(3,heads)"]);
}

#[test]
fn distribute_splits_unit_mass() {
    let g = ground_text("face(1..6).\n[[:]] faceObserved(F) :- face(F).\n");
    let ws: Vec<f64> = g
        .items
        .iter()
        .filter_map(|it| match it.ann {
            Some(GroundAnnotation::Weight(w)) => Some(w.mid()),
            _ => None,
        })
        .collect();
    assert_eq!(ws.len(), 6);
    assert!(ws.iter().all(|&w| w == 1.0 / 6.0));
    assert!((ws.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
}

#[test]
fn triple_brackets_take_the_cross_product() {
    let g = ground_text("person(1..3).\n#domain person(P).\n[[[0.3|smokes(P)]]] asthma(P).\n");
    let n = g.items.iter().filter(|it| matches!(it.ann, Some(GroundAnnotation::Cond(..)))).count();
    assert_eq!(n, 9);
}

#[test]
fn unsafe_variables_are_rejected() {
    let stmts = parse_text("[[0.5]] v(X).\n", "t.prasp", FileKind::Background).unwrap();
    let err = ground_program(&stmts).unwrap_err().to_string();
    assert!(err.contains('X'), "{err}");
}

proptest! {
    #[test]
    fn level_two_yields_one_ground_formula_per_instance(n in 1usize..8, w in 0.0f64..=1.0, cut in 0usize..8) {
        let text = format!("d(1..{n}).\n[[{w}]] v(X) :- d(X), X > {cut}.\n");
        let g = ground_text(&text);
        let weighted: Vec<_> = g.items.iter().filter(|it| it.ann.is_some()).collect();
        prop_assert_eq!(weighted.len(), n.saturating_sub(cut));
        for it in &weighted {
            prop_assert!(!has_variable(&it.formula), "{}", it.formula);
            prop_assert_eq!(it.ann.clone(), Some(GroundAnnotation::Weight(Weight::Point(w))));
        }
    }

    #[test]
    fn distribute_weights_sum_to_one(n in 1usize..30) {
        let g = ground_text(&format!("d(1..{n}).\n[[:]] v(X) :- d(X).\n"));
        let total: f64 = g.items.iter().filter_map(|it| match it.ann {
            Some(GroundAnnotation::Weight(w)) => Some(w.mid()),
            _ => None,
        }).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn corpus_grounds_fully() {
    for (prog, _) in CORPUS {
        let g = ground_program(&load_file(&common::program(prog)).unwrap()).unwrap();
        for it in &g.items {
            assert!(!has_variable(&it.formula), "{} in {prog}", it.formula);
        }
    }
}

// ---------------------------------------------------------------------------------------------
// Spanning program and answer sets

#[test]
fn weighted_atoms_span_both_truth_values() {
    for (prog, q) in CORPUS {
        let p = Pipeline::from_files(prog, Some(q), SystemOptions::default());
        for e in &p.sp.weighted {
            let GFormula::Atom(a) = e.formula else { continue };
            if e.cond.is_some() {
                continue;
            }
            assert!(p.worlds.iter().any(|w| w.contains(a)), "{} never true in {prog}", e.source);
            assert!(p.worlds.iter().any(|w| !w.contains(a)), "{} never false in {prog}", e.source);
        }
    }
}

#[test]
fn weight_free_program_spans_to_its_own_answer_sets() {
    let text = "bird(tweety).\nbird(tux).\npenguin(tux).\nfly(X) :- bird(X), not neg_fly(X).\nneg_fly(X) :- bird(X), not fly(X).\nneg_fly(X) :- penguin(X).\n";
    let g = ground_text(text);
    let sp = build_spanning_program(&g, SpanOptions::default()).unwrap();
    assert!(sp.weighted.is_empty());
    assert_eq!(sp.helper_atoms.count_ones(..), 0);
    assert!(sp.ground.rules.iter().all(|r| !matches!(r.head, Head::Choice { .. })));
    let mut worlds = enumerate_answer_sets(&sp.ground, EnumLimits::default()).unwrap();
    sort_worlds(&mut worlds);
    assert_eq!(worlds, brute_force_answer_sets(&sp.ground));
    assert_eq!(worlds.len(), 2);
}

#[test]
fn weighted_rule_gives_its_classical_reading() {
    let p = Pipeline::from_files("happy_rule.prasp", Some("happy.query"), SystemOptions::default());
    let d = pick_distribution(&p.system, PickMode::Default, 5, 0).unwrap();
    let r = answer_distribution(&p.worlds, &d.probs, &p.queries[0]);
    let QueryValue::Point(v) = r.value else { panic!("{r:?}") };
    assert!((v - 0.1).abs() <= TOL, "{v}");
}

#[test]
fn returned_worlds_are_stable_and_tautologies_hold() {
    for (prog, q) in CORPUS {
        let p = Pipeline::from_files(prog, Some(q), SystemOptions::default());
        for w in &p.worlds {
            assert!(is_stable(w, &p.sp.ground), "unstable world in {prog}");
            for cq in &p.queries {
                let f = cq.f.clone();
                assert!(!holds(w, &GFormula::And(vec![f.clone(), GFormula::not(f.clone())])));
                assert!(holds(w, &GFormula::Or(vec![f.clone(), GFormula::not(f)])));
            }
        }
    }
}

/// Normal programs over atoms 0..n; the first `k` atoms come from `choice` when requested.
fn arb_normal_program(choice: bool) -> impl Strategy<Value = GroundProgram> {
    (2usize..7).prop_flat_map(move |n| {
        let rule = (
            prop::option::of(0..n),
            prop::collection::vec(0..n, 0..3),
            prop::collection::vec(0..n, 0..2),
        );
        (Just(n), prop::collection::vec(rule, 1..(2 * n)), 0..=if choice { n.min(3) } else { 0 })
    })
    .prop_map(|(n, rules, k)| {
        let mut table = AtomTable::new();
        for i in 0..n {
            table.intern(&Atom::prop(format!("a{i}")));
        }
        let mut rs: Vec<GroundRule> = rules
            .into_iter()
            .filter(|(h, pos, _)| h.is_some() || !pos.is_empty())
            .map(|(h, pos, neg)| GroundRule {
                head: h.map_or(Head::None, Head::Atom),
                pos,
                neg,
                other: Vec::new(),
            })
            .collect();
        if k > 0 {
            rs.push(GroundRule::choice((0..k).collect(), 0, k));
        }
        GroundProgram { table, rules: rs, formula_constraints: Vec::new() }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn enumeration_matches_brute_force(p in arb_normal_program(true)) {
        let mut got = enumerate_answer_sets(&p, EnumLimits::default()).unwrap();
        sort_worlds(&mut got);
        prop_assert_eq!(got.clone(), brute_force_answer_sets(&p));
        for w in &got {
            prop_assert!(is_stable(w, &p));
        }
    }

    #[test]
    fn answer_sets_of_normal_programs_form_an_antichain(p in arb_normal_program(false)) {
        let got = enumerate_answer_sets(&p, EnumLimits::default()).unwrap();
        for (i, a) in got.iter().enumerate() {
            for (j, b) in got.iter().enumerate() {
                prop_assert!(i == j || !a.is_subset(b), "answer set {} inside {}", i, j);
            }
        }
    }
}

// ---------------------------------------------------------------------------------------------
// Constraint system

#[test]
fn distributions_are_normalized_and_consistent_systems_are_solved() {
    let consistent = [
        "coins.prasp",
        "happy_rule.prasp",
        "happy_cond.prasp",
        "traffic.prasp",
        "sneezing.prasp",
        "two_coins_indep.prasp",
        "counting.prasp",
        "three_coins.prasp",
    ];
    for (prog, q) in CORPUS {
        let p = Pipeline::from_files(prog, Some(q), SystemOptions::default());
        for mode in [PickMode::Default, PickMode::IgnoreEntropy] {
            let d = pick_distribution(&p.system, mode, 5, 0).unwrap();
            assert!(d.probs.iter().all(|&x| x >= -1e-12), "{prog}");
            assert!((d.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-6, "{prog}");
            if consistent.contains(prog) {
                assert!(d.residual <= TOL, "{prog}: residual {}", d.residual);
            }
        }
    }
}

#[test]
fn lp_bounds_bracket_point_answers() {
    for (prog, q) in CORPUS {
        let p = Pipeline::from_files(prog, Some(q), SystemOptions::default());
        let Some(probs) = consistent_distribution(&p) else { continue };
        for cq in &p.queries {
            let (QueryValue::Point(v), QueryValue::Interval(lo, hi)) =
                (answer_distribution(&p.worlds, &probs, cq).value, answer_bounds(&p.worlds, &p.system, cq).value)
            else {
                continue;
            };
            assert!(lo - TOL <= v && v <= hi + TOL, "{prog} {}: {v} not in [{lo};{hi}]", cq.formula);
        }
    }
}

#[test]
fn lp_bounds_of_an_unconstrained_conjunction() {
    let p = Pipeline::from_files("two_coins.prasp", Some("win.query"), SystemOptions::default());
    let win = truth_vector(&p.worlds, &p.queries[0].f);
    let (lo, hi) = solve_lp_bounds(&p.system, &win, None).unwrap();
    assert!(lo.abs() <= TOL && (hi - 0.5).abs() <= TOL, "[{lo};{hi}]");
}

#[test]
fn declared_independence_holds_in_the_solution() {
    for prog in ["coins.prasp", "two_coins_indep.prasp", "three_coins.prasp"] {
        let p = Pipeline::from_files(prog, None, SystemOptions::default());
        let probs = consistent_distribution(&p).expect("consistent");
        let pr = |f: &GFormula| -> f64 { p.worlds.iter().zip(&probs).filter(|(w, _)| holds(w, f)).map(|(_, x)| x).sum() };
        assert!(!p.sp.declared_mutual.is_empty(), "{prog}");
        for group in &p.sp.declared_mutual {
            for (i, &a) in group.iter().enumerate() {
                for &b in &group[i + 1..] {
                    let (fa, fb) = (&p.sp.weighted[a].formula, &p.sp.weighted[b].formula);
                    let both = pr(&GFormula::And(vec![fa.clone(), fb.clone()]));
                    assert!((both - pr(fa) * pr(fb)).abs() <= TOL, "{prog}: entries {a},{b}");
                }
            }
        }
    }
}

#[test]
fn default_pick_has_at_least_the_entropy_of_the_first_candidate() {
    for (prog, q) in CORPUS {
        let p = Pipeline::from_files(prog, Some(q), SystemOptions::default());
        let best = pick_distribution(&p.system, PickMode::Default, 5, 0).unwrap();
        let first = pick_distribution(&p.system, PickMode::IgnoreEntropy, 1, 0).unwrap();
        assert!(entropy(&best.probs) >= entropy(&first.probs) - 1e-9, "{prog}");
    }
}

// ---------------------------------------------------------------------------------------------
// Queries

fn negated(q: &CompiledQuery) -> CompiledQuery {
    CompiledQuery { f: GFormula::not(q.f.clone()), formula: Formula::not(q.formula.clone()), ..q.clone() }
}

#[test]
fn query_answers_are_probabilities_and_complementary() {
    for (prog, q) in CORPUS {
        let p = Pipeline::from_files(prog, Some(q), SystemOptions::default());
        let d = pick_distribution(&p.system, PickMode::Default, 5, 0).unwrap();
        let pr = |cq: &CompiledQuery| probability(p.worlds.iter().zip(d.probs.iter().copied()), cq);
        for cq in &p.queries {
            let (Some(a), Some(b)) = (pr(cq), pr(&negated(cq))) else { continue };
            assert!((0.0..=1.0).contains(&a), "{prog}");
            assert!((a + b - 1.0).abs() <= TOL, "{prog} {}: {a} + {b}", cq.formula);
        }
    }
}

#[test]
fn conditional_answers_factor_through_the_condition() {
    let mut checked = 0;
    for (prog, q) in CORPUS {
        let p = Pipeline::from_files(prog, Some(q), SystemOptions::default());
        let d = pick_distribution(&p.system, PickMode::Default, 5, 0).unwrap();
        let pr = |cq: &CompiledQuery| probability(p.worlds.iter().zip(d.probs.iter().copied()), cq);
        for cq in p.queries.iter().filter(|cq| cq.c.is_some()) {
            let c = cq.c.clone().unwrap();
            let plain = |f: GFormula| CompiledQuery { f, c: None, cond: None, formula: cq.formula.clone() };
            let pc = pr(&plain(c.clone())).unwrap();
            if pc <= 0.01 {
                continue;
            }
            let joint = pr(&plain(GFormula::And(vec![cq.f.clone(), c]))).unwrap();
            assert!((pr(cq).unwrap() * pc - joint).abs() <= TOL, "{prog} {}", cq.formula);
            checked += 1;
        }
    }
    assert!(checked >= 4, "only {checked} conditional queries checked");
}

#[test]
fn expanded_queries_match_single_instance_queries() {
    let prog = std::fs::read_to_string(common::program("three_coins.prasp")).unwrap();
    let expanded = Pipeline::from_text(&prog, "[[?]] coin_out(N,heads) :- coin(N).\n", SystemOptions::default(), true);
    let single = Pipeline::from_text(
        &prog,
        "[?] coin_out(1,heads).\n[?] coin_out(2,heads).\n[?] coin_out(3,heads).\n",
        SystemOptions::default(),
        true,
    );
    let d = pick_distribution(&expanded.system, PickMode::Default, 5, 0).unwrap();
    let answers = |p: &Pipeline| -> Vec<QueryValue> {
        p.queries.iter().map(|q| answer_distribution(&p.worlds, &d.probs, q).value).collect()
    };
    let a = answers(&expanded);
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(answers(&single)) {
        let (QueryValue::Point(x), QueryValue::Point(y)) = (x, y) else { panic!("{x:?}") };
        assert!((x - y).abs() <= TOL);
    }
    let QueryValue::Point(first) = a[0] else { unreachable!() };
    assert!((first - 0.6).abs() <= TOL);
}

#[test]
fn queries_on_unknown_atoms_are_false() {
    let p = Pipeline::from_text("[0.5] a.\n", "[?] b.\n[?] not b.\n", SystemOptions::default(), true);
    let d = pick_distribution(&p.system, PickMode::Default, 1, 0).unwrap();
    let v: Vec<QueryValue> = p.queries.iter().map(|q| answer_distribution(&p.worlds, &d.probs, q).value).collect();
    assert_eq!(v, [QueryValue::Point(0.0), QueryValue::Point(1.0)]);
}

// ---------------------------------------------------------------------------------------------
// Model counting

/// Counting-semantics answer for a conjunction of the first `k` weighted atoms.
fn counted_conjunction(weights: &[(u64, u64)]) -> (Ratio<u64>, prasp::spanning::SpanningProgram, Vec<prasp::worlds::World>) {
    let mut text = String::from("#indep\n");
    for (i, (m, n)) in weights.iter().enumerate() {
        text.push_str(&format!("[{}] a{i}.\n", *m as f64 / *n as f64));
    }
    text.push_str("#endIndep\n");
    let g = weights2cc_transform(&ground_text(&text), 20).unwrap();
    let sp = build_spanning_program(&g, SpanOptions::default()).unwrap();
    let worlds = enumerate_answer_sets(&sp.ground, EnumLimits::default()).unwrap();
    let query: String = (0..weights.len()).map(|i| format!("a{i}")).collect::<Vec<_>>().join(" & ");
    let qs = parse_text(&format!("[?] {query}.\n"), "t.query", FileKind::Query).unwrap();
    let qf = ground_queries(&qs, &g).unwrap();
    let cq = compile_queries(&qf, &sp.ground.table).unwrap();
    (count_query(&worlds, &cq[0]).unwrap(), sp, worlds)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn counting_reproduces_product_semantics(
        weights in prop::collection::vec((1u64..=6).prop_flat_map(|n| (0..=n, Just(n))), 1..=3)
    ) {
        let (got, sp, worlds) = counted_conjunction(&weights);
        let expected = weights.iter().fold(Ratio::new(1u64, 1), |acc, (m, n)| acc * Ratio::new(*m, *n));
        prop_assert_eq!(got, expected);
        for w in &worlds {
            prop_assert!(!show_world(&sp, w).contains(prasp::syntax::RESERVED_PREFIX));
        }
    }
}
