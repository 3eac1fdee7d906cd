//! Query evaluation over world distributions and sample multisets, and result formatting.

use crate::error::Result;
use crate::grounder::GroundQueryFile;
use crate::linsys::{solve_lp_bounds, truth_vector, ConstraintSystem};
use crate::syntax::{format_prob_digits, Formula};
use crate::worlds::{holds, AtomTable, GFormula, World};

/// Probabilities below this are reported as an unknown conditional.
pub const MIN_CONDITION_PROB: f64 = 1e-12;
/// Significant digits of exact results: frequencies and counts print as the nearest double.
pub const EXACT_DIGITS: i32 = 16;
/// Significant digits of numerically solved results; solver round-off stays below the last one.
pub const SOLVER_DIGITS: i32 = 12;

#[derive(Clone, Debug, PartialEq)]
pub enum QueryValue {
    Point(f64),
    Interval(f64, f64),
    List(Vec<f64>),
    Unknown,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryResult {
    pub formula: Formula,
    pub cond: Option<Formula>,
    pub value: QueryValue,
}

/// A ground query translated to world formulas; query-file context is conjoined into `f`.
#[derive(Clone, Debug)]
pub struct CompiledQuery {
    pub formula: Formula,
    pub cond: Option<Formula>,
    pub f: GFormula,
    pub c: Option<GFormula>,
}

/// Atoms unknown to `table` are interned past its end; they are false in every world.
pub fn compile_queries(qf: &GroundQueryFile, table: &AtomTable) -> Result<Vec<CompiledQuery>> {
    let mut table = table.clone();
    let context: Vec<GFormula> =
        qf.context.iter().map(|f| GFormula::from_formula(f, &mut table)).collect::<Result<_>>()?;
    qf.queries
        .iter()
        .map(|q| {
            let mut f = GFormula::from_formula(&q.formula, &mut table)?;
            if !context.is_empty() {
                let mut parts = vec![f];
                parts.extend(context.iter().cloned());
                f = GFormula::and(parts);
            }
            let c = q.cond.as_ref().map(|c| GFormula::from_formula(c, &mut table)).transpose()?;
            Ok(CompiledQuery { formula: q.shown.clone(), cond: q.shown_cond.clone(), f, c })
        })
        .collect()
}

/// Rounding noise outside [0, 1] is clamped; values inside are reported as computed.
fn clamp(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// Pr(f) or Pr(f|c) under weighted worlds; weights need not be normalized.
pub fn probability<'a>(weighted: impl IntoIterator<Item = (&'a World, f64)>, q: &CompiledQuery) -> Option<f64> {
    let (mut total, mut cond, mut both) = (0.0, 0.0, 0.0);
    for (w, p) in weighted {
        total += p;
        if q.c.as_ref().is_none_or(|c| holds(w, c)) {
            cond += p;
            if holds(w, &q.f) {
                both += p;
            }
        }
    }
    if total <= 0.0 {
        return None;
    }
    if q.c.is_some() && cond / total < MIN_CONDITION_PROB {
        return None;
    }
    Some(clamp(both / cond))
}

fn result(q: &CompiledQuery, value: QueryValue) -> QueryResult {
    QueryResult { formula: q.formula.clone(), cond: q.cond.clone(), value }
}

/// Point answer from a distribution over `worlds`.
pub fn answer_distribution(worlds: &[World], probs: &[f64], q: &CompiledQuery) -> QueryResult {
    let v = probability(worlds.iter().zip(probs.iter().copied()), q);
    result(q, v.map_or(QueryValue::Unknown, QueryValue::Point))
}

/// One value per distribution, as printed with several candidate distributions.
pub fn answer_distributions(worlds: &[World], dists: &[Vec<f64>], q: &CompiledQuery) -> QueryResult {
    let vals: Option<Vec<f64>> = dists.iter().map(|p| probability(worlds.iter().zip(p.iter().copied()), q)).collect();
    result(q, vals.map_or(QueryValue::Unknown, QueryValue::List))
}

/// Frequency answer over a sample multiset; placeholders are excluded.
pub fn answer_samples(samples: &[Option<World>], q: &CompiledQuery) -> QueryResult {
    let v = probability(samples.iter().flatten().map(|w| (w, 1.0)), q);
    result(q, v.map_or(QueryValue::Unknown, QueryValue::Point))
}

/// Tightest bounds over all distributions satisfying the constraint system.
pub fn answer_bounds(worlds: &[World], system: &ConstraintSystem, q: &CompiledQuery) -> QueryResult {
    let f = truth_vector(worlds, &q.f);
    let c = q.c.as_ref().map(|c| truth_vector(worlds, c));
    if c.as_ref().is_some_and(|c| !c.iter().any(|&b| b)) {
        return result(q, QueryValue::Unknown);
    }
    match solve_lp_bounds(system, &f, c.as_deref()) {
        Ok((lo, hi)) => result(q, QueryValue::Interval(clamp(lo), clamp(hi.max(lo)))),
        Err(e) => {
            log::warn!("no bounds for query {}: {e}", q.formula);
            result(q, QueryValue::Unknown)
        }
    }
}

/// `[p] f.`, `[p|c] f.`, `[lo;hi] f.`, `[p1,p2] f.` or `[?] f.`.
/// Probabilities are rounded to `digits` significant digits.
pub fn format_result(r: &QueryResult, digits: i32) -> String {
    let format_prob = |p: f64| format_prob_digits(p, digits);
    let w = match &r.value {
        QueryValue::Point(p) => format_prob(*p),
        QueryValue::Interval(lo, hi) => format!("{};{}", format_prob(*lo), format_prob(*hi)),
        QueryValue::List(ps) => ps.iter().map(|p| format_prob(*p)).collect::<Vec<_>>().join(","),
        QueryValue::Unknown => "?".into(),
    };
    match &r.cond {
        Some(c) => format!("[{w}|{c}] {}.", r.formula),
        None => format!("[{w}] {}.", r.formula),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Atom;

    #[test]
    fn formats_all_value_kinds() {
        let f = Formula::Atom(Atom::prop("win"));
        let mk = |value| QueryResult { formula: f.clone(), cond: None, value };
        assert_eq!(format_result(&mk(QueryValue::Point(0.4)), SOLVER_DIGITS), "[0.4] win.");
        assert_eq!(format_result(&mk(QueryValue::Interval(0.0, 1.0)), SOLVER_DIGITS), "[0;1] win.");
        assert_eq!(format_result(&mk(QueryValue::List(vec![0.25, 0.5])), SOLVER_DIGITS), "[0.25,0.5] win.");
        assert_eq!(format_result(&mk(QueryValue::Unknown), SOLVER_DIGITS), "[?] win.");
        assert_eq!(format_result(&mk(QueryValue::Point(0.4 - 4e-16)), SOLVER_DIGITS), "[0.4] win.");
        assert_eq!(format_result(&mk(QueryValue::Point(1.0 / 3.0)), EXACT_DIGITS), "[0.3333333333333333] win.");
        assert_eq!(format_result(&mk(QueryValue::Point(2.0 / 3.0)), EXACT_DIGITS), "[0.6666666666666666] win.");
    }
}
