//! Initial sampling of possible worlds: uniform draws, XOR-constrained draws and weighted
//! flip-sampling, all over the enumerated answer sets of the spanning program.

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spanning::SpanningProgram;
use crate::worlds::{holds, World};

pub type SampleRng = ChaCha8Rng;

/// Independent generator for one stream of a seed; streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Multiset of sampled worlds; `None` marks a draw whose forced literals had no model.
pub type SampleMultiset = Vec<Option<World>>;

/// Source of near-uniform single draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UniMethod {
    AllModels,
    Flip,
    Xor,
}

#[derive(Clone, Copy, Debug)]
pub struct SamplerConfig {
    pub method: u8,
    pub n: usize,
    pub uni: UniMethod,
    pub xor_q1: usize,
    pub xor_q2: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { method: 2, n: 0, uni: UniMethod::AllModels, xor_q1: 100, xor_q2: None }
    }
}

/// Enumerated worlds of a spanning program with the truth sets of its weighted formulas.
pub struct SampleSpace<'a> {
    pub sp: &'a SpanningProgram,
    pub worlds: Vec<World>,
    /// Per weighted entry, the worlds satisfying its formula.
    pub truth: Vec<FixedBitSet>,
}

impl<'a> SampleSpace<'a> {
    pub fn new(sp: &'a SpanningProgram, worlds: Vec<World>) -> SampleSpace<'a> {
        let truth = sp
            .weighted
            .iter()
            .map(|e| {
                let mut t = FixedBitSet::with_capacity(worlds.len());
                for (j, w) in worlds.iter().enumerate() {
                    if holds(w, &e.formula) {
                        t.insert(j);
                    }
                }
                t
            })
            .collect();
        SampleSpace { sp, worlds, truth }
    }

    /// Unconditional, non-volatile weighted entries; the formulas flip-sampling can force.
    pub fn flippable(&self) -> Vec<usize> {
        self.sp
            .weighted
            .iter()
            .enumerate()
            .filter(|(_, e)| e.weight.is_some() && e.cond.is_none() && !e.volatile)
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn sample_uniform(worlds: &[World], n: usize, rng: &mut SampleRng) -> Result<SampleMultiset> {
    if worlds.is_empty() {
        return Err(Error::Solver("cannot sample from an empty set of worlds".into()));
    }
    Ok((0..n).map(|_| Some(worlds[rng.random_range(0..worlds.len())].clone())).collect())
}

/// Draws one world among at most `q1` worlds (all of them for q1 = 0) satisfying `q2` random
/// even-parity constraints.
/// Each constraint covers every atom with probability 1/2 and a constant true with
/// probability 1/2. Unsatisfiable constraint sets are redrawn; after 50 failures the draw
/// falls back to unconstrained uniform sampling.
pub fn xor_sample(worlds: &[World], n_atoms: usize, q1: usize, q2: Option<usize>, rng: &mut SampleRng) -> Result<World> {
    if worlds.is_empty() {
        return Err(Error::Solver("cannot sample from an empty set of worlds".into()));
    }
    let q2 = q2.unwrap_or_else(|| (n_atoms.max(1) as f64).log2().ceil() as usize);
    for _ in 0..50 {
        let constraints: Vec<(FixedBitSet, bool)> = (0..q2)
            .map(|_| {
                let mut s = FixedBitSet::with_capacity(n_atoms);
                for a in 0..n_atoms {
                    if rng.random::<bool>() {
                        s.insert(a);
                    }
                }
                (s, rng.random::<bool>())
            })
            .collect();
        let matching: Vec<&World> = worlds
            .iter()
            .filter(|w| {
                constraints.iter().all(|(s, constant)| {
                    let ones = s.intersection(w).count() + usize::from(*constant);
                    ones % 2 == 0
                })
            })
            .take(if q1 == 0 { usize::MAX } else { q1 })
            .collect();
        if !matching.is_empty() {
            return Ok(matching[rng.random_range(0..matching.len())].clone());
        }
    }
    log::warn!("no world satisfied 50 sets of parity constraints; sampling without them");
    Ok(worlds[rng.random_range(0..worlds.len())].clone())
}

/// One near-uniform draw with the configured method.
pub fn uniform_draw(space: &SampleSpace, cfg: &SamplerConfig, rng: &mut SampleRng) -> Result<World> {
    match cfg.uni {
        UniMethod::AllModels | UniMethod::Flip => {
            Ok(sample_uniform(&space.worlds, 1, rng)?.pop().flatten().expect("one draw"))
        }
        UniMethod::Xor => xor_sample(&space.worlds, space.sp.ground.n_atoms(), cfg.xor_q1, cfg.xor_q2, rng),
    }
}

/// Weighted flip-sampling. For every flippable formula a rank vector over the n draws is fixed
/// up front (a shuffled stratification k/n, or i.i.d. uniforms); draw j forces the formula true
/// when its rank is below a threshold drawn from the weight interval and false otherwise, then
/// picks a world uniformly among those satisfying the forced literals.
/// With `respect_indep` a formula is only forced while all forced formulas share an
/// independence group.
pub fn flip_sample(
    space: &SampleSpace,
    n: usize,
    stratified: bool,
    respect_indep: bool,
    rng: &mut SampleRng,
) -> Result<SampleMultiset> {
    if space.worlds.is_empty() {
        return Err(Error::Solver("cannot sample from an empty set of worlds".into()));
    }
    let formulas = space.flippable();
    let ranks: Vec<Vec<f64>> = formulas
        .iter()
        .map(|_| {
            let mut r: Vec<f64> = if stratified {
                (1..=n).map(|k| k as f64 / n as f64).collect()
            } else {
                (0..n).map(|_| rng.random::<f64>()).collect()
            };
            if stratified {
                r.shuffle(rng);
            }
            r
        })
        .collect();
    let base: u64 = rng.random();
    let groups = &space.sp.mutual_groups;
    let n_worlds = space.worlds.len();
    let out = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut r = stream_rng(base, j as u64);
            let mut allowed = FixedBitSet::with_capacity(n_worlds);
            allowed.insert_range(..);
            let mut forced: Vec<usize> = Vec::new();
            for (k, &i) in formulas.iter().enumerate() {
                let w = space.sp.weighted[i].weight.expect("flippable formulas are weighted");
                let threshold = w.lo() + (w.hi() - w.lo()) * r.random::<f64>();
                if respect_indep && !forced.is_empty() {
                    let fits = groups.iter().any(|g| g.contains(&i) && forced.iter().all(|f| g.contains(f)));
                    if !fits {
                        continue;
                    }
                }
                forced.push(i);
                if ranks[k][j] <= threshold {
                    allowed.intersect_with(&space.truth[i]);
                } else {
                    allowed.difference_with(&space.truth[i]);
                }
            }
            let ones: Vec<usize> = allowed.ones().collect();
            if ones.is_empty() {
                None
            } else {
                Some(space.worlds[ones[r.random_range(0..ones.len())]].clone())
            }
        })
        .collect();
    Ok(out)
}

/// Resamples enumerated worlds proportionally to the product semantics of the independent
/// weighted atoms.
fn product_sample(space: &SampleSpace, n: usize, rng: &mut SampleRng) -> Result<SampleMultiset> {
    let mut indep: Vec<usize> = space.sp.mutual_groups.iter().chain(&space.sp.pairwise_groups).flatten().copied().collect();
    indep.sort_unstable();
    indep.dedup();
    indep.retain(|&i| space.sp.weighted[i].weight.is_some() && space.sp.weighted[i].cond.is_none());
    if indep.is_empty() {
        return Err(Error::Usage(
            "initial sampling method 3 needs independence information; use methods 4 to 7 instead".into(),
        ));
    }
    let weights: Vec<f64> = (0..space.worlds.len())
        .map(|j| {
            indep
                .iter()
                .map(|&i| {
                    let w = space.sp.weighted[i].weight.expect("filtered").mid();
                    if space.truth[i].contains(j) {
                        w
                    } else {
                        1.0 - w
                    }
                })
                .product()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Solver("independent weights give every world probability zero".into()));
    }
    Ok((0..n)
        .map(|_| {
            let mut x = rng.random::<f64>() * total;
            let mut pick = weights.len() - 1;
            for (j, w) in weights.iter().enumerate() {
                if x < *w {
                    pick = j;
                    break;
                }
                x -= w;
            }
            Some(space.worlds[pick].clone())
        })
        .collect())
}

/// Initial sample per method number 0 to 7.
pub fn initial_sample(cfg: &SamplerConfig, space: &SampleSpace, rng: &mut SampleRng) -> Result<SampleMultiset> {
    match cfg.method {
        0 => Ok(Vec::new()),
        1 => (0..cfg.n).map(|_| uniform_draw(space, cfg, rng).map(Some)).collect(),
        2 => {
            let take = if cfg.n == 0 { space.worlds.len() } else { cfg.n.min(space.worlds.len()) };
            Ok(space.worlds[..take].iter().cloned().map(Some).collect())
        }
        3 => product_sample(space, cfg.n, rng),
        4 => flip_sample(space, cfg.n, true, false, rng),
        5 => flip_sample(space, cfg.n, true, true, rng),
        6 => flip_sample(space, cfg.n, false, false, rng),
        7 => flip_sample(space, cfg.n, false, true, rng),
        m => Err(Error::Usage(format!("unknown initial sampling method {m}"))),
    }
}
