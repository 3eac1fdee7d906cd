//! Inference by counting answer sets, including the conversion of weights into counting
//! constraints over fresh helper atoms.

use num_rational::Ratio;

use crate::error::Result;
use crate::grounder::{GroundAnnotation, GroundItem, GroundedProgram};
use crate::query::CompiledQuery;
use crate::syntax::{Atom, CountElem, Formula, RESERVED_PREFIX};
use crate::worlds::{holds, World};

pub const DEFAULT_DENOMINATOR_CAP: u64 = 20;

/// Pr(f) or Pr(f|c) as the exact fraction of worlds; `None` when no world satisfies c.
pub fn count_query(worlds: &[World], q: &CompiledQuery) -> Option<Ratio<u64>> {
    let mut cond = 0u64;
    let mut both = 0u64;
    for w in worlds {
        if q.c.as_ref().is_none_or(|c| holds(w, c)) {
            cond += 1;
            if holds(w, &q.f) {
                both += 1;
            }
        }
    }
    (cond > 0).then(|| Ratio::new(both, cond))
}

/// Closest fraction m/n to `w` with n ≤ cap; the smallest such n wins ties.
pub fn approximate_weight(w: f64, cap: u64) -> Ratio<u64> {
    let mut best = Ratio::new(w.round().clamp(0.0, 1.0) as u64, 1);
    let mut best_err = (w - *best.numer() as f64).abs();
    for n in 2..=cap.max(1) {
        let m = (w * n as f64).round().clamp(0.0, n as f64) as u64;
        let err = (w - m as f64 / n as f64).abs();
        if err < best_err - 1e-15 {
            best = Ratio::new(m, n);
            best_err = err;
        }
    }
    if best_err > 1e-9 {
        log::warn!("weight {w} approximated by {best} for counting");
    }
    best
}

fn item(formula: Formula, origin: &crate::syntax::Origin) -> GroundItem {
    GroundItem { formula, ann: None, origin: origin.clone(), volatile: false }
}

/// Replaces every unconditional `[w] f` with w ≈ m/n by helpers h1..hn, exactly one of which
/// holds, and the equivalence f ↔ h1 ∨ … ∨ hm, so that a fraction m/n of the answer sets
/// satisfies f. Conditional weights keep only their spanning effect.
pub fn weights2cc_transform(prog: &GroundedProgram, cap: u64) -> Result<GroundedProgram> {
    let mut items = Vec::new();
    let mut counter = 0usize;
    for it in &prog.items {
        if it.volatile {
            continue;
        }
        match &it.ann {
            None | Some(GroundAnnotation::Span) => items.push(it.clone()),
            Some(GroundAnnotation::Cond(..)) => {
                log::warn!("conditional weight of {} ignored by counting", it.formula);
                items.push(GroundItem { ann: Some(GroundAnnotation::Span), ..it.clone() });
            }
            Some(GroundAnnotation::Weight(w)) => {
                let r = approximate_weight(w.mid(), cap);
                let (m, n) = (*r.numer(), *r.denom());
                let f = it.formula.clone();
                if m == n {
                    items.push(item(f, &it.origin));
                    continue;
                }
                counter += 1;
                let helpers: Vec<Formula> = (1..=n)
                    .map(|i| Formula::Atom(Atom::prop(format!("{RESERVED_PREFIX}cc_{counter}_{i}"))))
                    .collect();
                if n > 1 {
                    let elems = helpers.iter().map(|h| CountElem { lit: h.clone(), cond: Vec::new() }).collect();
                    items.push(item(Formula::Count { lower: Some(1), elems, upper: Some(1) }, &it.origin));
                }
                let chosen: Vec<Formula> = helpers[..m as usize].to_vec();
                match &f {
                    Formula::Atom(_) => {
                        for h in &chosen {
                            items.push(item(Formula::Rule { head: Some(Box::new(f.clone())), body: vec![h.clone()] }, &it.origin));
                        }
                        let mut body = vec![f.clone()];
                        body.extend(chosen.iter().map(|h| Formula::not(h.clone())));
                        items.push(item(Formula::Rule { head: None, body }, &it.origin));
                    }
                    _ => {
                        // Atoms of a compound formula stay open; the equivalence is a formula constraint.
                        items.push(GroundItem { ann: Some(GroundAnnotation::Span), ..it.clone() });
                        let any = if chosen.is_empty() { Formula::False } else { Formula::Or(chosen) };
                        items.push(item(Formula::Or(vec![Formula::not(any.clone()), f.clone()]), &it.origin));
                        items.push(item(Formula::Or(vec![Formula::not(f.clone()), any]), &it.origin));
                    }
                }
            }
        }
    }
    Ok(GroundedProgram { items, groups: Vec::new(), ctx: prog.ctx.clone() })
}
