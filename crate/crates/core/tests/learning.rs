//! Weight learning: gradients, ascent behaviour, bounds and reproducibility.

mod common;

use proptest::prelude::*;
use prasp::learning::{learn, numeric_gradient, LearnOptions, LearningModel, LearningTask};
use prasp::syntax::{parse_text, FileKind, Statement};

fn task(program: &str, hypoth: &str, examples: &str) -> LearningTask {
    let formulas = |text: &str, file: &str| {
        parse_text(text, file, FileKind::from_path(file))
            .unwrap()
            .into_iter()
            .filter_map(|s| match s {
                Statement::Formula(f) => Some(f),
                _ => None,
            })
            .collect()
    };
    LearningTask {
        background: parse_text(program, "b.prasp", FileKind::Background).unwrap(),
        hypotheses: formulas(hypoth, "h.hypoth"),
        examples: formulas(examples, "e.examples"),
        conjunctive: false,
        keep_duplicates: false,
        normalize: true,
    }
}

fn smokers() -> LearningTask {
    let read = |f: &str| std::fs::read_to_string(common::program(f)).unwrap();
    task(&read("smokers_learn.prasp"), &read("smokers_learn.hypoth"), &read("smokers_learn.examples"))
}

fn identity() -> LearningTask {
    task("0{a}1.\n", "[?] a.\n", "a.\n")
}

fn conditional() -> LearningTask {
    task("[0.5] a.\n0{c}1.\n", "[?|a] c.\n", "c.\na.\n")
}

fn corpus_tasks() -> Vec<(&'static str, LearningTask)> {
    vec![("smokers", smokers()), ("identity", identity()), ("conditional", conditional())]
}

#[test]
fn forward_gradient_agrees_with_central_differences() {
    for (name, t) in corpus_tasks() {
        let model = LearningModel::new(&t, &LearnOptions::default()).unwrap();
        let k = t.hypotheses.len();
        for base in [0.2, 0.5, 0.8] {
            let w = vec![base; k];
            let g = numeric_gradient(&model, &w);
            for i in 0..k {
                let h = 1e-5;
                let (mut up, mut down) = (w.clone(), w.clone());
                up[i] += h;
                down[i] -= h;
                let central = (model.likelihood(&up).unwrap() - model.likelihood(&down).unwrap()) / (2.0 * h);
                assert!((g[i] - central).abs() <= 1e-4 * central.abs().max(1.0), "{name} at {base}: {} vs {central}", g[i]);
            }
        }
    }
}

#[test]
fn identity_task_is_linear_in_its_weight() {
    let model = LearningModel::new(&identity(), &LearnOptions::default()).unwrap();
    for w in [0.1, 0.3, 0.5, 0.7, 0.9] {
        assert!((model.likelihood(&[w]).unwrap() - w).abs() <= 1e-9);
        assert!((numeric_gradient(&model, &[w])[0] - 1.0).abs() <= 1e-5);
    }
    assert!(learn(&identity(), &LearnOptions::default()).unwrap().w[0] >= 0.9);
}

#[test]
fn ascent_rarely_steps_downhill() {
    for (name, t) in corpus_tasks() {
        let r = learn(&t, &LearnOptions::default()).unwrap();
        let steps = r.history.len() - 1;
        assert!(steps >= 1, "{name}");
        let up = r.history.windows(2).filter(|p| p[1] >= p[0] - 1e-12).count();
        assert!(up as f64 >= 0.9 * steps as f64, "{name}: {up} of {steps} steps non-decreasing");
    }
}

#[test]
fn learning_is_reproducible() {
    for (name, t) in corpus_tasks() {
        let a = learn(&t, &LearnOptions::default()).unwrap();
        let b = learn(&t, &LearnOptions::default()).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn weighted_examples_are_rejected() {
    let err = parse_text("[0.5] a.\n", "e.examples", FileKind::from_path("e.examples")).unwrap_err().to_string();
    assert!(err.contains("weighted examples"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn learned_weights_are_probabilities(
        p in 0.05f64..0.95,
        example in prop_oneof![Just("b."), Just("not b."), Just("a & b."), Just("a | b.")],
        normalize in any::<bool>(),
    ) {
        let mut t = task(&format!("[{p}] a.\n0{{b}}1.\n"), "[?] b.\n[?|a] b.\n", &format!("{example}\n"));
        t.normalize = normalize;
        let r = learn(&t, &LearnOptions { max_iter: 40, ..LearnOptions::default() }).unwrap();
        for w in &r.w {
            prop_assert!((0.0..=1.0).contains(w), "{:?}", r.w);
        }
    }
}
