//! Approximate inference: simulated annealing over sample multisets, maximum-entropy iterative
//! refinement and MaxWalkSAT search for low-cost assignments.

use fixedbitset::FixedBitSet;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linsys::Target;
use crate::sampling::{initial_sample, stream_rng, uniform_draw, SampleMultiset, SampleRng, SampleSpace, SamplerConfig};
use crate::syntax::Weight;
use crate::worlds::{holds, GFormula, World};

/// Distance of a frequency from a weight; zero inside an interval.
fn weight_distance(freq: f64, w: Weight) -> f64 {
    if freq < w.lo() {
        w.lo() - freq
    } else if freq > w.hi() {
        freq - w.hi()
    } else {
        0.0
    }
}

/// Running satisfaction counts of the energy formulas over a multiset.
#[derive(Clone, Debug)]
struct Tally {
    /// Indices into the weighted entries taking part in the energy.
    entries: Vec<usize>,
    n: usize,
    both: Vec<usize>,
    cond: Vec<usize>,
}

impl Tally {
    fn new(space: &SampleSpace, target_all: bool) -> Tally {
        let entries: Vec<usize> = space
            .sp
            .weighted
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.volatile && e.weight.is_some_and(|w| target_all || w.lo() < 1.0))
            .map(|(i, _)| i)
            .collect();
        let k = entries.len();
        Tally { entries, n: 0, both: vec![0; k], cond: vec![0; k] }
    }

    fn add(&mut self, space: &SampleSpace, s: &SampleMultiset) {
        for w in s.iter().flatten() {
            self.n += 1;
            for (k, &i) in self.entries.iter().enumerate() {
                let e = &space.sp.weighted[i];
                let c = e.cond.as_ref().is_none_or(|(c, _)| holds(w, c));
                if c {
                    self.cond[k] += 1;
                    if holds(w, &e.formula) {
                        self.both[k] += 1;
                    }
                }
            }
        }
    }

    fn energy(&self, space: &SampleSpace) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let w = space.sp.weighted[i].weight.expect("energy formulas are weighted");
                let freq = if self.cond[k] == 0 { 0.0 } else { self.both[k] as f64 / self.cond[k] as f64 };
                weight_distance(freq, w).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Euclidean distance between formula frequencies in `s` and their weights. Formulas with
/// weight 1 only count with `target_all`; placeholders are skipped.
pub fn energy(space: &SampleSpace, s: &SampleMultiset, target_all: bool) -> Result<f64> {
    let mut t = Tally::new(space, target_all);
    t.add(space, s);
    if t.n == 0 {
        return Err(Error::Solver("energy of an empty sample multiset".into()));
    }
    Ok(t.energy(space))
}

#[derive(Clone, Copy, Debug)]
pub struct AnnealParams {
    pub max_energy: f64,
    pub min_temp: f64,
    pub temp_decr: f64,
    pub sampling_method: u8,
    pub init_temp: f64,
    pub samples_per_step: usize,
    pub target_all: bool,
    pub max_time: usize,
    pub parallelism: usize,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams {
            max_energy: 0.05,
            min_temp: 1e-150,
            temp_decr: 0.95,
            sampling_method: 0,
            init_temp: 5.0,
            samples_per_step: 1,
            target_all: false,
            max_time: 5000,
            parallelism: 4,
        }
    }
}

/// Outcome of annealing: the accepted multiset and its energy.
#[derive(Clone, Debug)]
pub struct AnnealResult {
    pub samples: SampleMultiset,
    pub energy: f64,
    pub iterations: usize,
}

/// Grows the multiset by one sampling step per candidate, keeps the lowest-energy candidate
/// and accepts it by the Metropolis rule under a geometric cooling schedule.
pub fn simulated_annealing(
    space: &SampleSpace,
    params: &AnnealParams,
    sampler: &SamplerConfig,
    init: SampleMultiset,
    rng: &mut SampleRng,
) -> Result<AnnealResult> {
    let mut s = init;
    let mut tally = Tally::new(space, params.target_all);
    tally.add(space, &s);
    let mut e = tally.energy(space);
    let mut temp = params.init_temp;
    let mut k = 0;
    while k <= params.max_time && temp >= params.min_temp && e > params.max_energy {
        let base: u64 = rng.random();
        let cands: Vec<Result<(SampleMultiset, Tally, f64)>> = (0..params.parallelism.max(1))
            .into_par_iter()
            .map(|i| {
                let mut r = stream_rng(base, i as u64);
                let inc = sample_step(params.sampling_method, space, sampler, params.samples_per_step, &mut r)?;
                let mut t = tally.clone();
                t.add(space, &inc);
                let en = t.energy(space);
                Ok((inc, t, en))
            })
            .collect();
        let mut best: Option<(SampleMultiset, Tally, f64)> = None;
        for c in cands {
            let c = c?;
            if best.as_ref().is_none_or(|b| c.2 < b.2) {
                best = Some(c);
            }
        }
        let (inc, t, e2) = best.expect("at least one candidate");
        let accept = e2 < e || (e2.is_finite() && rng.random::<f64>() < (-(e2 - e) / temp).exp());
        if accept {
            s.extend(inc);
            tally = t;
            e = e2;
        }
        temp *= params.temp_decr;
        k += 1;
    }
    if tally.n == 0 {
        return Err(Error::Solver("simulated annealing produced no consistent sample".into()));
    }
    Ok(AnnealResult { samples: s, energy: e, iterations: k })
}

/// Product of the weights of the formulas a world supports, per method 1 (smallest product
/// over independent supported subsets) or method 2 (all supported formulas).
fn support_product(space: &SampleSpace, w: &World, independent_only: bool) -> (f64, bool) {
    let entries: Vec<usize> = space.flippable();
    let supported: Vec<usize> = entries.iter().copied().filter(|&i| holds(w, &space.sp.weighted[i].formula)).collect();
    let weight = |i: usize| space.sp.weighted[i].weight.expect("flippable").mid();
    let all = supported.len() == entries.len();
    if !independent_only {
        return (supported.iter().map(|&i| weight(i)).product(), all);
    }
    let mut best = supported.iter().map(|&i| weight(i)).fold(1.0, f64::min);
    for g in &space.sp.mutual_groups {
        let p: f64 = supported.iter().filter(|i| g.contains(i)).map(|&i| weight(i)).product();
        best = best.min(p);
    }
    (best, all)
}

/// One annealing step: method 0 draws near-uniformly, methods 1 and 2 accept a near-uniform
/// draw with a probability tied to the weights it supports (∅ on rejection), and higher
/// methods delegate to initial sampling of the same number.
pub fn sample_step(
    method: u8,
    space: &SampleSpace,
    sampler: &SamplerConfig,
    n: usize,
    rng: &mut SampleRng,
) -> Result<SampleMultiset> {
    match method {
        0 => (0..n).map(|_| uniform_draw(space, sampler, rng).map(Some)).collect(),
        1 | 2 => (0..n)
            .map(|_| {
                let cs = uniform_draw(space, sampler, rng)?;
                let (prod, all) = support_product(space, &cs, method == 1);
                let r = if all { prod } else { rng.random::<f64>() * prod };
                Ok(if rng.random::<f64>() <= r { Some(cs) } else { None })
            })
            .collect(),
        m => {
            let cfg = SamplerConfig { method: m, n, ..*sampler };
            initial_sample(&cfg, space, rng)
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RefineParams {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub retain_counts: bool,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams { epsilon: 0.02, max_iterations: 1000, retain_counts: false }
    }
}

impl RefineParams {
    /// Tight settings for computing the maximum-entropy distribution itself.
    pub fn exact() -> RefineParams {
        RefineParams { epsilon: 1e-12, max_iterations: 20000, retain_counts: false }
    }
}

/// Deduplicated worlds of a multiset with their counts, in first-occurrence order.
pub fn world_counts(s: &SampleMultiset) -> (Vec<World>, Vec<usize>) {
    let mut index: std::collections::HashMap<&World, usize> = std::collections::HashMap::new();
    let mut worlds = Vec::new();
    let mut counts = Vec::new();
    for w in s.iter().flatten() {
        match index.get(w) {
            Some(&k) => counts[k] += 1,
            None => {
                index.insert(w, worlds.len());
                worlds.push(w.clone());
                counts.push(1);
            }
        }
    }
    (worlds, counts)
}

/// Starting distribution: uniform over the distinct worlds, or their relative counts.
pub fn refinement_start(counts: &[usize], retain_counts: bool) -> Vec<f64> {
    let n = counts.len();
    if retain_counts {
        let total: usize = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    } else {
        vec![1.0 / n as f64; n]
    }
}

/// Cyclic multiplicative projection onto each weighted (conditional) formula in turn; from a
/// uniform start the iterates approach the maximum-entropy distribution satisfying all
/// targets. Cells of probability zero are left unchanged in that round.
pub fn iterative_refinement(init: Vec<f64>, targets: &[Target], params: &RefineParams) -> Result<Vec<f64>> {
    let mut pr = init;
    for t in targets {
        if let Weight::Interval(..) = t.weight {
            return Err(Error::Unsupported(
                "iterative refinement needs point weights; interval weights require the linear programming route".into(),
            ));
        }
    }
    for _ in 0..params.max_iterations {
        let prev = pr.clone();
        for t in targets {
            let w = t.weight.lo();
            let in_c = |j: usize| t.c.as_ref().is_none_or(|c| c[j]);
            let (mut p_cf, mut p_cnf, mut p_nc) = (0.0, 0.0, 0.0);
            for (j, &p) in pr.iter().enumerate() {
                if !in_c(j) {
                    p_nc += p;
                } else if t.f[j] {
                    p_cf += p;
                } else {
                    p_cnf += p;
                }
            }
            let b = p_cf.powf(w) * p_cnf.powf(1.0 - w);
            let denom = b + p_nc * w.powf(w) * (1.0 - w).powf(1.0 - w);
            if denom <= 0.0 {
                continue;
            }
            let a = b / denom;
            let f_nc = if p_nc > 0.0 { (1.0 - a) / p_nc } else { 1.0 };
            let f_cnf = if p_cnf > 0.0 { (1.0 - w) * a / p_cnf } else { 1.0 };
            let f_cf = if p_cf > 0.0 { w * a / p_cf } else { 1.0 };
            for (j, p) in pr.iter_mut().enumerate() {
                *p *= if !in_c(j) {
                    f_nc
                } else if t.f[j] {
                    f_cf
                } else {
                    f_cnf
                };
            }
        }
        let d = pr.iter().zip(&prev).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if d <= params.epsilon {
            break;
        }
    }
    Ok(pr)
}

#[derive(Clone, Copy, Debug)]
pub struct WalkSatParams {
    pub cost_target: f64,
    pub max_flips: usize,
    pub max_tries: usize,
    pub p: f64,
    pub replacement: bool,
    pub n_models: usize,
}

impl Default for WalkSatParams {
    fn default() -> Self {
        WalkSatParams { cost_target: 1.0, max_flips: 100_000, max_tries: 10_000, p: 0.3, replacement: true, n_models: 1 }
    }
}

/// Cost weight of a formula: 1000 for hard weights, the mean of an interval otherwise.
pub fn walksat_weight(w: Weight) -> f64 {
    if w.lo() >= 1.0 {
        1000.0
    } else {
        w.mid()
    }
}

fn is_literal(f: &GFormula) -> bool {
    match f {
        GFormula::Atom(_) | GFormula::True | GFormula::False => true,
        GFormula::Not(g) => matches!(**g, GFormula::Atom(_)),
        _ => false,
    }
}

/// Conjunctions, disjunctions (rules), negated conjunctions (constraints) and counts of
/// literals.
pub fn is_simple(f: &GFormula) -> bool {
    match f {
        GFormula::And(gs) | GFormula::Or(gs) => gs.iter().all(|g| is_literal(g) || matches!(g, GFormula::Not(h) if matches!(&**h, GFormula::And(hs) if hs.iter().all(is_literal)))),
        GFormula::Not(g) => is_literal(g) || matches!(&**g, GFormula::And(hs) if hs.iter().all(is_literal)),
        GFormula::Count { elems, .. } => elems.iter().all(is_literal),
        g => is_literal(g),
    }
}

/// Sum of the weights of the formulas `m` violates.
pub fn walksat_cost(formulas: &[(GFormula, f64)], m: &World) -> f64 {
    formulas.iter().filter(|(f, _)| !holds(m, f)).map(|(_, w)| w).sum()
}

/// Local search for assignments whose violated weight is at most the cost target. Each try
/// starts from a random assignment; each flip either flips a random atom of a random violated
/// formula (probability p) or its atom giving the lowest cost, ties to the lowest index.
pub fn maxwalksat(
    formulas: &[(GFormula, f64)],
    n_atoms: usize,
    params: &WalkSatParams,
    rng: &mut SampleRng,
) -> Result<Vec<World>> {
    for (f, _) in formulas {
        if !is_simple(f) {
            return Err(Error::Unsupported(format!("MaxWalkSAT needs simple formulas; got {f:?}")));
        }
    }
    let mut atoms: Vec<usize> = formulas.iter().flat_map(|(f, _)| f.atoms()).collect();
    atoms.sort_unstable();
    atoms.dedup();
    let mut top: Vec<World> = Vec::new();
    for _ in 0..params.max_tries {
        let mut m = FixedBitSet::with_capacity(n_atoms);
        for &a in &atoms {
            if rng.random::<bool>() {
                m.insert(a);
            }
        }
        for _ in 0..params.max_flips {
            let cost = walksat_cost(formulas, &m);
            if cost <= params.cost_target {
                if params.replacement || !top.contains(&m) {
                    top.push(m.clone());
                }
                if top.len() >= params.n_models {
                    return Ok(top);
                }
                break;
            }
            let unsat: Vec<&GFormula> = formulas.iter().filter(|(f, _)| !holds(&m, f)).map(|(f, _)| f).collect();
            let usf = unsat[rng.random_range(0..unsat.len())];
            let usf_atoms = usf.atoms();
            if usf_atoms.is_empty() {
                // A violated formula without atoms cannot be repaired by flipping.
                break;
            }
            let flip = if rng.random::<f64>() < params.p {
                usf_atoms[rng.random_range(0..usf_atoms.len())]
            } else {
                let mut best = (f64::INFINITY, usize::MAX);
                for &a in &usf_atoms {
                    m.toggle(a);
                    let c = walksat_cost(formulas, &m);
                    m.toggle(a);
                    if c < best.0 || (c == best.0 && a < best.1) {
                        best = (c, a);
                    }
                }
                best.1
            };
            m.toggle(flip);
        }
    }
    if top.is_empty() {
        log::warn!("MaxWalkSAT found no assignment within the cost target");
    }
    Ok(top)
}
