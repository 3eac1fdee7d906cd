//! Weight learning: hypothesis weights maximizing the probability of examples, found by
//! Barzilai-Borwein gradient ascent with forward-difference gradients.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::approx::{iterative_refinement, RefineParams};
use crate::error::{Error, Result};
use crate::grounder::{ground_program, ground_queries};
use crate::linsys::{build_system, pick_distribution, PickMode, SystemOptions, Target};
use crate::query::{compile_queries, probability, CompiledQuery};
use crate::spanning::{build_spanning_program, SpanOptions};
use crate::syntax::{AnnKind, Annotation, AnnotatedFormula, Formula, Origin, Statement, Weight};
use crate::worlds::{enumerate_answer_sets, EnumLimits, World};

pub const BOX_LO: f64 = 0.001;
pub const BOX_HI: f64 = 0.999;
/// World count above which learning warns that inner inference gets slow.
const LARGE_WORLD_COUNT: usize = 4096;

#[derive(Clone, Debug)]
pub struct LearningTask {
    pub background: Vec<Statement>,
    /// `[?]` or `[?|c]` formulas whose weights are learned.
    pub hypotheses: Vec<AnnotatedFormula>,
    pub examples: Vec<AnnotatedFormula>,
    pub conjunctive: bool,
    pub keep_duplicates: bool,
    pub normalize: bool,
}

#[derive(Clone, Debug)]
pub struct LearnOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub alpha0: f64,
    pub system: SystemOptions,
    pub auto_indeps: bool,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions { max_iter: 200, tol: 1e-4, alpha0: 1.0, system: SystemOptions::default(), auto_indeps: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnedWeights {
    pub w: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Objective at the start point and at every iterate, in order.
    pub history: Vec<f64>,
}

/// Weighted version of a hypothesis with weight `w`.
fn weighted_hypothesis(h: &AnnotatedFormula, w: f64) -> Result<AnnotatedFormula> {
    let ann = h.annotation.as_ref().ok_or_else(|| Error::Usage(format!("hypothesis '{}' needs a [?] annotation", h.formula)))?;
    let kind = match &ann.kind {
        AnnKind::Query => AnnKind::Weight(Weight::Point(w)),
        AnnKind::CondQuery(c) => AnnKind::Cond(Weight::Point(w), c.clone()),
        _ => return Err(Error::Usage(format!("hypothesis '{}' needs a [?] annotation", h.formula))),
    };
    Ok(AnnotatedFormula { annotation: Some(Annotation { kind, level: ann.level }), ..h.clone() })
}

/// Possible worlds, weighted formulas and compiled examples of a task; weights of hypothesis
/// formulas are substituted per evaluation since the worlds do not depend on them.
pub struct LearningModel {
    pub worlds: Vec<World>,
    targets: Vec<Target>,
    /// For each target, the hypothesis it instantiates.
    hyp_of_target: Vec<Option<usize>>,
    examples: Vec<CompiledQuery>,
    conjunctive: bool,
    opts: LearnOptions,
}

impl LearningModel {
    pub fn new(task: &LearningTask, opts: &LearnOptions) -> Result<LearningModel> {
        if task.hypotheses.is_empty() {
            return Err(Error::Usage("learning needs at least one hypothesis formula".into()));
        }
        let mut stmts = task.background.clone();
        let origins: Vec<Origin> = task.hypotheses.iter().map(|h| h.origin.clone()).collect();
        for h in &task.hypotheses {
            stmts.push(Statement::Formula(weighted_hypothesis(h, 0.5)?));
        }
        let g = ground_program(&stmts)?;
        let sp = build_spanning_program(&g, SpanOptions { auto_indeps: opts.auto_indeps })?;
        let worlds = enumerate_answer_sets(&sp.ground, EnumLimits::default())?;
        if worlds.len() > LARGE_WORLD_COUNT {
            log::warn!("learning over {} possible worlds; inference may be slow", worlds.len());
        }
        let system = build_system(&worlds, &sp, opts.system)?;
        let hyp_of_target = system
            .targets
            .iter()
            .map(|t| origins.iter().position(|o| *o == sp.weighted[t.entry].origin))
            .collect();

        let mut seen = HashSet::new();
        let mut example_stmts = Vec::new();
        for e in &task.examples {
            if e.annotation.is_some() {
                return Err(Error::Unsupported("weighted examples are not yet supported".into()));
            }
            if task.keep_duplicates || seen.insert(e.formula.to_string()) {
                let query = Annotation { kind: AnnKind::Query, level: 1 };
                example_stmts.push(Statement::Formula(AnnotatedFormula { annotation: Some(query), ..e.clone() }));
            }
        }
        let qf = ground_queries(&example_stmts, &g)?;
        let mut examples = compile_queries(&qf, &sp.ground.table)?;
        if task.conjunctive && examples.len() > 1 {
            let f = crate::worlds::GFormula::and(examples.iter().map(|q| q.f.clone()).collect());
            let formula = Formula::And(examples.iter().map(|q| q.formula.clone()).collect());
            examples = vec![CompiledQuery { formula, cond: None, f, c: None }];
        }
        Ok(LearningModel {
            worlds,
            targets: system.targets,
            hyp_of_target,
            examples,
            conjunctive: task.conjunctive,
            opts: opts.clone(),
        })
    }

    fn targets_for(&self, w: &[f64]) -> Vec<Target> {
        self.targets
            .iter()
            .zip(&self.hyp_of_target)
            .map(|(t, h)| match h {
                Some(k) => Target { weight: Weight::Point(w[*k]), ..t.clone() },
                None => t.clone(),
            })
            .collect()
    }

    /// Maximum-entropy distribution over the worlds with hypothesis weights `w`.
    pub fn distribution(&self, w: &[f64]) -> Result<Vec<f64>> {
        let n = self.worlds.len();
        iterative_refinement(vec![1.0 / n as f64; n], &self.targets_for(w), &RefineParams::exact())
    }

    /// ∏ Pr(eᵢ) (or Pr(⋀eᵢ) for conjunctive targets) under weights `w`.
    pub fn likelihood(&self, w: &[f64]) -> Result<f64> {
        let probs = self.distribution(w)?;
        let mut l = 1.0;
        for e in &self.examples {
            let p = probability(self.worlds.iter().zip(probs.iter().copied()), e)
                .ok_or_else(|| Error::Solver(format!("example {} has undefined probability", e.formula)))?;
            l *= p;
        }
        Ok(l)
    }

    pub fn is_conjunctive(&self) -> bool {
        self.conjunctive
    }
}

fn objective(model: &LearningModel, w: &[f64]) -> f64 {
    model.likelihood(w).unwrap_or(f64::NEG_INFINITY)
}

/// Forward differences with step √ε·wᵢ, at least 1e-8.
pub fn numeric_gradient(model: &LearningModel, w: &[f64]) -> Vec<f64> {
    let base = objective(model, w);
    (0..w.len())
        .into_par_iter()
        .map(|i| {
            let h = (f64::EPSILON.sqrt() * w[i]).max(1e-8);
            let mut wp = w.to_vec();
            wp[i] += h;
            (objective(model, &wp) - base) / h
        })
        .collect()
}

fn project(w: &mut [f64]) {
    for v in w.iter_mut() {
        *v = v.clamp(BOX_LO, BOX_HI);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Barzilai-Borwein ascent from `w0`, projected onto [0.001, 0.999]. The step scale uses the
/// magnitude of the BB quotient, since the raw quotient is negative on concave stretches and
/// would turn ascent into descent.
pub fn bb_learn(model: &LearningModel, w0: &[f64]) -> LearnedWeights {
    let opts = &model.opts;
    let mut w = w0.to_vec();
    project(&mut w);
    let mut g = numeric_gradient(model, &w);
    let mut alpha = opts.alpha0;
    let mut best = (objective(model, &w), w.clone());
    let mut history = vec![best.0];
    let mut bad_steps = 0;
    let mut iterations = 0;
    for k in 0..opts.max_iter {
        iterations = k + 1;
        let mut next: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi + gi / alpha).collect();
        project(&mut next);
        let s: Vec<f64> = next.iter().zip(&w).map(|(a, b)| a - b).collect();
        let g_next = numeric_gradient(model, &next);
        let obj = objective(model, &next);
        history.push(obj);
        if obj.is_finite() {
            bad_steps = 0;
            if obj > best.0 {
                best = (obj, next.clone());
            }
        } else {
            bad_steps += 1;
            if bad_steps >= 5 {
                log::warn!("learning objective undefined for 5 consecutive steps; returning best weights found");
                break;
            }
        }
        let ss = dot(&s, &s);
        if ss.sqrt() <= opts.tol {
            w = next;
            break;
        }
        let y: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
        let q = dot(&s, &y) / ss;
        alpha = if q.abs() > 1e-12 && q.is_finite() { q.abs() } else { opts.alpha0 };
        w = next;
        g = g_next;
    }
    let final_obj = objective(model, &w);
    let (objective, w) = if final_obj >= best.0 { (final_obj, w) } else { best };
    LearnedWeights { w, objective, iterations, history }
}

/// Learns hypothesis weights starting from 0.5 each; with `normalize`, weights inconsistent
/// with the background are replaced by the probabilities of their formulas under one
/// least-squares solution of the combined system.
pub fn learn(task: &LearningTask, opts: &LearnOptions) -> Result<LearnedWeights> {
    let model = LearningModel::new(task, opts)?;
    let mut result = bb_learn(&model, &vec![0.5; task.hypotheses.len()]);
    for v in result.w.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    if task.normalize {
        let mut stmts = task.background.clone();
        for (h, w) in task.hypotheses.iter().zip(&result.w) {
            stmts.push(Statement::Formula(weighted_hypothesis(h, *w)?));
        }
        let g = ground_program(&stmts)?;
        let sp = build_spanning_program(&g, SpanOptions { auto_indeps: opts.auto_indeps })?;
        let worlds = enumerate_answer_sets(&sp.ground, EnumLimits::default())?;
        let system = build_system(&worlds, &sp, opts.system)?;
        let dist = pick_distribution(&system, PickMode::IgnoreEntropy, 1, 0)?;
        if dist.residual > crate::linsys::INCONSISTENCY_TOL {
            let origins: Vec<&Origin> = task.hypotheses.iter().map(|h| &h.origin).collect();
            for t in &system.targets {
                let k = origins.iter().position(|o| **o == sp.weighted[t.entry].origin);
                if let (Some(k), None) = (k, &t.c) {
                    let p: f64 = t.f.iter().zip(&dist.probs).filter(|(b, _)| **b).map(|(_, p)| p).sum();
                    result.w[k] = p.clamp(0.0, 1.0);
                }
            }
        }
    }
    Ok(result)
}
