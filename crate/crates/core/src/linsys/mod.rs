//! Linear constraint system over possible worlds: weight, conditional, independence and
//! normalization rows, solved by NNLS for point distributions and by LP for bounds.

pub mod nnls;
pub mod simplex;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sampling::stream_rng;
use crate::spanning::SpanningProgram;
use crate::syntax::Weight;
use crate::worlds::{holds, GFormula, World};
use simplex::{Lp, LpOutcome, Rel};

/// Lower bound on condition probabilities in conditional LP queries.
pub const COND_EPSILON: f64 = 1e-9;
/// Residual above which the system is reported as inconsistent.
pub const INCONSISTENCY_TOL: f64 = 1e-6;
/// Ridge weight of the first NNLS candidate; small enough to leave consistent rows exact and
/// large enough to pick the minimum-norm solution of an underdetermined system.
pub const RIDGE_LAMBDA: f64 = 1e-12;
const DINKELBACH_MAX_ITER: usize = 100;
const DINKELBACH_TOL: f64 = 1e-12;
/// Clipping tolerance for negative entries of the minimum-norm solution.
const MIN_NORM_NEG_TOL: f64 = 1e-10;
/// Cap on independence rows per group when no explicit limit is given.
pub const DEFAULT_INDEP_ROW_CAP: usize = 4096;
const NORMALIZATION_SCALE: f64 = 10.0;
const LP_MAX_ITER: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Weight,
    Conditional,
    Independence,
    Normalization,
}

/// `lo ≤ coef·Pr ≤ hi`; `source` indexes the weighted entry the row came from.
#[derive(Clone, Debug)]
pub struct ConstraintRow {
    pub coef: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    pub kind: RowKind,
    pub source: Option<usize>,
}

impl ConstraintRow {
    pub fn value(&self, probs: &[f64]) -> f64 {
        self.coef.iter().zip(probs).map(|(a, p)| a * p).sum()
    }

    /// Distance of the row value from its admissible range.
    pub fn violation(&self, probs: &[f64]) -> f64 {
        let v = self.value(probs);
        (self.lo - v).max(v - self.hi).max(0.0)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }
}

/// A weighted formula evaluated over the worlds, as used by iterative refinement.
#[derive(Clone, Debug)]
pub struct Target {
    pub entry: usize,
    pub f: Vec<bool>,
    pub c: Option<Vec<bool>>,
    pub weight: Weight,
}

#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub rows: Vec<ConstraintRow>,
    pub n_worlds: usize,
    pub targets: Vec<Target>,
    /// Weighted entries whose condition holds in no world; they contribute no row.
    pub empty_conditions: Vec<usize>,
}

impl ConstraintSystem {
    pub fn residual(&self, probs: &[f64]) -> f64 {
        self.rows.iter().map(|r| r.violation(probs).powi(2)).sum::<f64>().sqrt()
    }

    pub fn all_point(&self) -> bool {
        self.rows.iter().all(ConstraintRow::is_point)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SystemOptions {
    /// Emit independence rows at all.
    pub indep_constraints: bool,
    /// Use only automatically detected independence.
    pub ignore_declared: bool,
    /// Maximum number of subset rows per mutual group.
    pub limit_combs: Option<usize>,
}

impl Default for SystemOptions {
    fn default() -> Self {
        SystemOptions { indep_constraints: true, ignore_declared: false, limit_combs: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldDistribution {
    pub probs: Vec<f64>,
    pub residual: f64,
}

pub fn truth_vector(worlds: &[World], f: &GFormula) -> Vec<bool> {
    worlds.iter().map(|w| holds(w, f)).collect()
}

fn indicator(t: &[bool]) -> Vec<f64> {
    t.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Assembles the constraint system of the weighted formulas of `sp` over `worlds`.
pub fn build_system(worlds: &[World], sp: &SpanningProgram, opts: SystemOptions) -> Result<ConstraintSystem> {
    if worlds.is_empty() {
        return Err(Error::Solver("no possible worlds: the program is unsatisfiable".into()));
    }
    let n = worlds.len();
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut empty_conditions = Vec::new();
    let mut truths: Vec<Option<Vec<bool>>> = vec![None; sp.weighted.len()];
    for (i, e) in sp.weighted.iter().enumerate() {
        let Some(w) = e.weight else { continue };
        let f = truth_vector(worlds, &e.formula);
        truths[i] = Some(f.clone());
        if e.volatile {
            continue;
        }
        match &e.cond {
            None => {
                rows.push(ConstraintRow { coef: indicator(&f), lo: w.lo(), hi: w.hi(), kind: RowKind::Weight, source: Some(i) });
                targets.push(Target { entry: i, f, c: None, weight: w });
            }
            Some((c, _)) => {
                let c = truth_vector(worlds, c);
                if !c.iter().any(|&b| b) {
                    empty_conditions.push(i);
                    continue;
                }
                let row = |k: f64| -> Vec<f64> {
                    f.iter().zip(&c).map(|(&fv, &cv)| if cv { f64::from(u8::from(fv)) - k } else { 0.0 }).collect()
                };
                match w {
                    Weight::Point(p) => {
                        rows.push(ConstraintRow { coef: row(p), lo: 0.0, hi: 0.0, kind: RowKind::Conditional, source: Some(i) })
                    }
                    Weight::Interval(l, u) => {
                        rows.push(ConstraintRow { coef: row(l), lo: 0.0, hi: f64::INFINITY, kind: RowKind::Conditional, source: Some(i) });
                        rows.push(ConstraintRow { coef: row(u), lo: f64::NEG_INFINITY, hi: 0.0, kind: RowKind::Conditional, source: Some(i) });
                    }
                }
                targets.push(Target { entry: i, f, c: Some(c), weight: w });
            }
        }
    }
    if opts.indep_constraints {
        let (mutual, pairwise): (Vec<Vec<usize>>, Vec<Vec<usize>>) = if opts.ignore_declared {
            let auto = if sp.auto_indep.len() > 1 { vec![sp.auto_indep.clone()] } else { Vec::new() };
            (auto, Vec::new())
        } else {
            (sp.mutual_groups.clone(), sp.pairwise_groups.clone())
        };
        let usable = |g: &[usize]| -> Vec<usize> {
            g.iter().copied().filter(|&i| truths[i].is_some() && sp.weighted[i].cond.is_none()).collect()
        };
        let cap = opts.limit_combs.unwrap_or(DEFAULT_INDEP_ROW_CAP);
        for g in &mutual {
            let members = usable(g);
            let total = subset_count(members.len());
            if total > cap {
                log::warn!(
                    "independence group of {} formulas needs {total} rows; only the first {cap} are used",
                    members.len()
                );
            }
            let mut emitted = 0;
            'sizes: for k in 2..=members.len() {
                for combo in combinations(members.len(), k) {
                    if emitted >= cap {
                        break 'sizes;
                    }
                    let subset: Vec<usize> = combo.iter().map(|&j| members[j]).collect();
                    rows.push(indep_row(&subset, &truths, sp));
                    emitted += 1;
                }
            }
        }
        for g in &pairwise {
            let members = usable(g);
            for combo in combinations(members.len(), 2) {
                rows.push(indep_row(&[members[combo[0]], members[combo[1]]], &truths, sp));
            }
        }
    }
    rows.push(ConstraintRow { coef: vec![1.0; n], lo: 1.0, hi: 1.0, kind: RowKind::Normalization, source: None });
    Ok(ConstraintSystem { rows, n_worlds: n, targets, empty_conditions })
}

fn subset_count(m: usize) -> usize {
    if m >= usize::BITS as usize - 1 {
        usize::MAX
    } else {
        (1usize << m) - m - 1
    }
}

fn indep_row(subset: &[usize], truths: &[Option<Vec<bool>>], sp: &SpanningProgram) -> ConstraintRow {
    let n = truths[subset[0]].as_ref().map_or(0, Vec::len);
    let coef = (0..n)
        .map(|j| if subset.iter().all(|&i| truths[i].as_ref().is_some_and(|t| t[j])) { 1.0 } else { 0.0 })
        .collect();
    let weights: Vec<Weight> = subset.iter().filter_map(|&i| sp.weighted[i].weight).collect();
    ConstraintRow {
        coef,
        lo: weights.iter().map(|w| w.lo()).product(),
        hi: weights.iter().map(|w| w.hi()).product(),
        kind: RowKind::Independence,
        source: None,
    }
}

/// k-subsets of 0..m in lexicographic order.
pub fn combinations(m: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut cur: Option<Vec<usize>> = if k <= m { Some((0..k).collect()) } else { None };
    std::iter::from_fn(move || {
        let out = cur.clone()?;
        let c = cur.as_mut().expect("checked above");
        let mut i = k;
        loop {
            if i == 0 {
                cur = None;
                break;
            }
            i -= 1;
            if c[i] < m - k + i {
                c[i] += 1;
                for j in i + 1..k {
                    c[j] = c[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    })
}

/// −Σ p ln p with 0·ln 0 = 0.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Clamps tiny negatives, renormalizes and records the residual against `system`.
fn finish(system: &ConstraintSystem, mut probs: Vec<f64>) -> WorldDistribution {
    for p in probs.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let s: f64 = probs.iter().sum();
    if s > 0.0 {
        probs.iter_mut().for_each(|p| *p /= s);
    } else {
        let u = 1.0 / probs.len() as f64;
        probs.iter_mut().for_each(|p| *p = u);
    }
    let residual = system.residual(&probs);
    WorldDistribution { probs, residual }
}

/// Least-squares solution of the point rows with columns visited in `order`.
/// Interval rows are ignored; callers route interval systems to [`lp_candidates`].
pub fn solve_nnls(system: &ConstraintSystem, lambda: f64, order: &[usize]) -> WorldDistribution {
    let point: Vec<&ConstraintRow> = system.rows.iter().filter(|r| r.is_point()).collect();
    let m = point.len();
    let n = system.n_worlds;
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for (i, r) in point.iter().enumerate() {
        let scale = if r.kind == RowKind::Normalization { NORMALIZATION_SCALE } else { 1.0 };
        for (k, &j) in order.iter().enumerate() {
            a[(i, k)] = scale * r.coef[j];
        }
        b[i] = scale * r.lo;
    }
    if lambda > 0.0 {
        if let Some(x) = nnls::min_norm_nonneg(&a, &b, MIN_NORM_NEG_TOL) {
            let mut probs = vec![0.0; n];
            for (k, &j) in order.iter().enumerate() {
                probs[j] = x[k];
            }
            return finish(system, probs);
        }
    }
    let res = nnls::nnls(&a, &b, lambda, 10 * (m + n) + 100);
    if !res.converged {
        log::warn!("least-squares solver reached its iteration cap; using the best solution found");
    }
    let mut probs = vec![0.0; n];
    for (k, &j) in order.iter().enumerate() {
        probs[j] = res.x[k];
    }
    finish(system, probs)
}

/// Point candidates from NNLS: candidate 0 is the minimum-norm solution when that is
/// nonnegative and the ridge solution in natural column order otherwise;
/// the others use random column orders without ridge.
pub fn nnls_candidates(system: &ConstraintSystem, count: usize, seed: u64) -> Vec<WorldDistribution> {
    let n = system.n_worlds;
    (0..count.max(1))
        .into_par_iter()
        .map(|k| {
            let mut order: Vec<usize> = (0..n).collect();
            if k == 0 {
                solve_nnls(system, RIDGE_LAMBDA, &order)
            } else {
                order.shuffle(&mut stream_rng(seed, k as u64));
                solve_nnls(system, 0.0, &order)
            }
        })
        .collect()
}

fn base_lp(system: &ConstraintSystem) -> Lp {
    let mut lp = Lp::new(system.n_worlds);
    for r in &system.rows {
        push_range(&mut lp, r.coef.clone(), r.lo, r.hi);
    }
    lp
}

fn push_range(lp: &mut Lp, coef: Vec<f64>, lo: f64, hi: f64) {
    if lo == hi {
        lp.add(coef, Rel::Eq, lo);
        return;
    }
    if lo.is_finite() {
        lp.add(coef.clone(), Rel::Ge, lo);
    }
    if hi.is_finite() {
        lp.add(coef, Rel::Le, hi);
    }
}

fn run_lp(lp: &Lp) -> Result<(Vec<f64>, f64)> {
    match simplex::solve(lp, LP_MAX_ITER) {
        LpOutcome::Optimal { x, value } => Ok((x, value)),
        LpOutcome::Infeasible => Err(Error::Solver("primal infeasible".into())),
        LpOutcome::Unbounded => Err(Error::Solver("linear program is unbounded".into())),
        LpOutcome::IterationLimit => Err(Error::Solver("simplex iteration limit reached".into())),
    }
}

/// Point candidates for systems with interval rows: LP vertices for random objectives and
/// their average, which is feasible by convexity.
pub fn lp_candidates(system: &ConstraintSystem, count: usize, seed: u64) -> Result<Vec<WorldDistribution>> {
    let n = system.n_worlds;
    let vertices: Vec<Result<Vec<f64>>> = (0..count.max(1))
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let mut lp = base_lp(system);
            lp.objective = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            run_lp(&lp).map(|(x, _)| x)
        })
        .collect();
    let vertices: Vec<Vec<f64>> = vertices.into_iter().collect::<Result<_>>()?;
    let mut out: Vec<WorldDistribution> = vertices.iter().map(|x| finish(system, x.clone())).collect();
    if vertices.len() > 1 {
        let mut avg = vec![0.0; n];
        for x in &vertices {
            for (a, v) in avg.iter_mut().zip(x) {
                *a += v / vertices.len() as f64;
            }
        }
        out.push(finish(system, avg));
    }
    Ok(out)
}

/// Minimum and maximum of Pr(q) (or Pr(q|c)) over all distributions satisfying the system.
/// Conditional bounds additionally require Pr(c) ≥ COND_EPSILON.
pub fn solve_lp_bounds(system: &ConstraintSystem, q: &[bool], cond: Option<&[bool]>) -> Result<(f64, f64)> {
    let Some(c) = cond else {
        let mut lp = base_lp(system);
        let obj = indicator(q);
        lp.objective = obj.clone();
        let (_, lo) = run_lp(&lp)?;
        lp.objective = obj.iter().map(|v| -v).collect();
        let (_, neg_hi) = run_lp(&lp)?;
        return Ok((lo.clamp(0.0, 1.0), (-neg_hi).clamp(0.0, 1.0)));
    };
    let mut lp = base_lp(system);
    lp.add(indicator(c), Rel::Ge, COND_EPSILON);
    let qc: Vec<f64> = q.iter().zip(c).map(|(&a, &b)| if a && b { 1.0 } else { 0.0 }).collect();
    let cv = indicator(c);
    let lo = dinkelbach(&mut lp, &qc, &cv, 1.0)?;
    let hi = dinkelbach(&mut lp, &qc, &cv, -1.0)?;
    Ok((lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0)))
}

/// Dinkelbach iteration for the extreme ratio (num·x)/(den·x) over the feasible set of `lp`:
/// `sense` 1 minimizes, -1 maximizes. Each step solves min sense·(num − λ·den)·x and moves λ
/// to the ratio at the optimum, which is monotone and stops when the parametric optimum is 0.
fn dinkelbach(lp: &mut Lp, num: &[f64], den: &[f64], sense: f64) -> Result<f64> {
    let dot = |a: &[f64], x: &[f64]| a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
    lp.objective = vec![0.0; lp.n];
    let (x, _) = run_lp(lp)?;
    let mut lambda = dot(num, &x) / dot(den, &x);
    for _ in 0..DINKELBACH_MAX_ITER {
        lp.objective = num.iter().zip(den).map(|(a, b)| sense * (a - lambda * b)).collect();
        let (x, value) = run_lp(lp)?;
        let next = dot(num, &x) / dot(den, &x);
        if value >= -DINKELBACH_TOL || (next - lambda).abs() <= DINKELBACH_TOL {
            return Ok(if sense * (next - lambda) < 0.0 { next } else { lambda });
        }
        lambda = next;
    }
    log::warn!("ratio bound did not settle after {DINKELBACH_MAX_ITER} steps");
    Ok(lambda)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PickMode {
    Default,
    Maxent,
    IgnoreEntropy,
}

/// Selects one distribution: the highest-entropy candidate, the first candidate, or the
/// maximum-entropy distribution computed by iterative refinement.
pub fn pick_distribution(
    system: &ConstraintSystem,
    mode: PickMode,
    n_candidates: usize,
    seed: u64,
) -> Result<WorldDistribution> {
    let dist = match mode {
        PickMode::Maxent => {
            let params = crate::approx::RefineParams::exact();
            let uniform = vec![1.0 / system.n_worlds as f64; system.n_worlds];
            let probs = crate::approx::iterative_refinement(uniform, &system.targets, &params)?;
            finish(system, probs)
        }
        PickMode::Default | PickMode::IgnoreEntropy => {
            let count = if mode == PickMode::IgnoreEntropy { 1 } else { n_candidates };
            let cands = candidates(system, count, seed)?;
            select_max_entropy(cands)
        }
    };
    if dist.residual > INCONSISTENCY_TOL {
        log::warn!("Specified probabilities appear to be inconsistent (residual {:.3e})", dist.residual);
    }
    Ok(dist)
}

/// `count` candidate distributions; NNLS for point systems, LP vertices otherwise.
pub fn candidates(system: &ConstraintSystem, count: usize, seed: u64) -> Result<Vec<WorldDistribution>> {
    if system.all_point() {
        Ok(nnls_candidates(system, count, seed))
    } else {
        lp_candidates(system, count, seed)
    }
}

/// First candidate of maximal entropy.
pub fn select_max_entropy(cands: Vec<WorldDistribution>) -> WorldDistribution {
    let mut best: Option<(f64, WorldDistribution)> = None;
    for c in cands {
        let h = entropy(&c.probs);
        if best.as_ref().is_none_or(|(bh, _)| h > bh + 1e-12) {
            best = Some((h, c));
        }
    }
    best.expect("at least one candidate").1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_are_lexicographic() {
        let c: Vec<Vec<usize>> = combinations(4, 2).collect();
        assert_eq!(c, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(3, 3).count(), 1);
        assert_eq!(combinations(2, 3).count(), 0);
        assert_eq!(subset_count(4), 11);
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&[0.25; 4]) - 4f64.ln()).abs() < 1e-12);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
        assert!((entropy(&[0.3, 0.3, 0.2, 0.2]) - 1.366159).abs() < 1e-6);
    }
}
