//! Variable instantiation. Domain predicates are evaluated completely at grounding time; every
//! other predicate is over-approximated by a fixpoint of atoms that might become true.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::syntax::*;

pub type Subst = BTreeMap<String, Term>;
pub type Sig = (String, usize);

/// Predicate signature to the set of ground argument tuples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DomainMap {
    pub map: BTreeMap<Sig, BTreeSet<Vec<Term>>>,
}

impl DomainMap {
    pub fn insert(&mut self, a: &Atom) -> bool {
        self.map.entry(a.signature()).or_default().insert(a.args.clone())
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.map.get(&a.signature()).is_some_and(|s| s.contains(&a.args))
    }

    pub fn tuples(&self, sig: &Sig) -> impl Iterator<Item = &Vec<Term>> {
        self.map.get(sig).into_iter().flat_map(|s| s.iter())
    }

    pub fn len(&self) -> usize {
        self.map.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn atoms(&self) -> impl Iterator<Item = Atom> + '_ {
        self.map
            .iter()
            .flat_map(|((p, _), ts)| ts.iter().map(move |args| Atom::new(p.clone(), args.clone())))
    }
}

/// Everything needed to instantiate a formula.
#[derive(Clone, Debug, Default)]
pub struct GroundContext {
    pub domain_preds: BTreeSet<Sig>,
    pub domains: DomainMap,
    /// Over-approximation of derivable atoms; contains every domain atom.
    pub possible: DomainMap,
    /// `#domain p(X)` declarations keyed by variable name.
    pub var_domains: BTreeMap<String, Atom>,
}

/// Annotation of a ground program item (queries are handled separately).
#[derive(Clone, Debug, PartialEq)]
pub enum GroundAnnotation {
    Weight(Weight),
    Cond(Weight, Formula),
    Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundItem {
    pub formula: Formula,
    pub ann: Option<GroundAnnotation>,
    pub origin: Origin,
    /// Only used to state independence; not part of the program.
    pub volatile: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndepGroup {
    pub pairwise: bool,
    /// Indices into `GroundedProgram::items`.
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct GroundedProgram {
    pub items: Vec<GroundItem>,
    pub groups: Vec<IndepGroup>,
    pub ctx: GroundContext,
}

/// A ground query `[?] f` or `[?|c] f`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundQuery {
    pub formula: Formula,
    pub cond: Option<Formula>,
    /// Query and condition as printed: the input text for `[?]`, the instance for `[[?]]`.
    pub shown: Formula,
    pub shown_cond: Option<Formula>,
    pub origin: Origin,
}

// ---------------------------------------------------------------------------------------------
// Terms

fn term_rank(t: &Term) -> u8 {
    match t {
        Term::Int(_) => 0,
        Term::Const(_) => 1,
        Term::Compound(..) => 2,
        _ => 3,
    }
}

/// Total order on ground terms: integers, then constants, then compound terms.
pub fn term_cmp(a: &Term, b: &Term) -> Ordering {
    match (a, b) {
        (Term::Int(x), Term::Int(y)) => x.cmp(y),
        (Term::Const(x), Term::Const(y)) => x.cmp(y),
        (Term::Compound(f, xs), Term::Compound(g, ys)) => xs
            .len()
            .cmp(&ys.len())
            .then_with(|| f.cmp(g))
            .then_with(|| {
                xs.iter().zip(ys).map(|(x, y)| term_cmp(x, y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
            }),
        _ => term_rank(a).cmp(&term_rank(b)).then_with(|| a.cmp(b)),
    }
}

fn eval_cmp(op: CmpOp, a: &Term, b: &Term) -> bool {
    let o = term_cmp(a, b);
    match op {
        CmpOp::Eq => o.is_eq(),
        CmpOp::Ne => o.is_ne(),
        CmpOp::Lt => o.is_lt(),
        CmpOp::Le => o.is_le(),
        CmpOp::Gt => o.is_gt(),
        CmpOp::Ge => o.is_ge(),
    }
}

pub fn subst_term(t: &Term, s: &Subst) -> Term {
    match t {
        Term::Var(v) => s.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Interval(a, b) => Term::Interval(Box::new(subst_term(a, s)), Box::new(subst_term(b, s))),
        Term::Pool(ts) => Term::Pool(ts.iter().map(|t| subst_term(t, s)).collect()),
        Term::Compound(f, ts) => Term::Compound(f.clone(), ts.iter().map(|t| subst_term(t, s)).collect()),
        Term::Const(_) | Term::Int(_) => t.clone(),
    }
}

pub fn subst_atom(a: &Atom, s: &Subst) -> Atom {
    Atom { pred: a.pred.clone(), args: a.args.iter().map(|t| subst_term(t, s)).collect() }
}

fn expand_term(t: &Term) -> Result<Vec<Term>> {
    Ok(match t {
        Term::Const(_) | Term::Int(_) => vec![t.clone()],
        Term::Var(v) => return Err(Error::Ground(format!("variable '{v}' is not bound"))),
        Term::Interval(a, b) => {
            let (lo, hi) = match (expand_term(a)?.as_slice(), expand_term(b)?.as_slice()) {
                ([Term::Int(lo)], [Term::Int(hi)]) => (*lo, *hi),
                _ => return Err(Error::Ground(format!("interval bounds of '{t}' must be integers"))),
            };
            if hi < lo {
                log::warn!("empty interval {lo}..{hi}");
            }
            (lo..=hi).map(Term::Int).collect()
        }
        Term::Pool(ts) => {
            let mut out = Vec::new();
            for t in ts {
                out.extend(expand_term(t)?);
            }
            out
        }
        Term::Compound(f, args) => cartesian(args)?.into_iter().map(|a| Term::Compound(f.clone(), a)).collect(),
    })
}

fn cartesian(args: &[Term]) -> Result<Vec<Vec<Term>>> {
    let mut acc: Vec<Vec<Term>> = vec![Vec::new()];
    for a in args {
        let opts = expand_term(a)?;
        let mut next = Vec::with_capacity(acc.len() * opts.len());
        for prefix in &acc {
            for o in &opts {
                let mut v = prefix.clone();
                v.push(o.clone());
                next.push(v);
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// Expands intervals and pools of a variable-free atom into its instances.
pub fn expand_atom(a: &Atom) -> Result<Vec<Atom>> {
    Ok(cartesian(&a.args)?.into_iter().map(|args| Atom { pred: a.pred.clone(), args }).collect())
}

fn strong(a: &Atom) -> Atom {
    Atom { pred: format!("-{}", a.pred), args: a.args.clone() }
}

/// Expands `p(1..3)` and `p(a;b)` shorthand in a variable-free formula. A shorthand fact or rule
/// head yields one formula per instance; shorthand elsewhere becomes a conjunction.
pub fn expand_term_shorthand(f: &Formula) -> Result<Vec<Formula>> {
    instantiate(f, &Subst::new(), None)
}

// ---------------------------------------------------------------------------------------------
// Variables and binders

fn is_shorthand_free(a: &Atom) -> bool {
    fn ok(t: &Term) -> bool {
        match t {
            Term::Interval(..) | Term::Pool(_) => false,
            Term::Compound(_, ts) => ts.iter().all(ok),
            _ => true,
        }
    }
    a.args.iter().all(ok)
}

/// Variables occurring outside count aggregates; count-local variables are bound per element.
fn global_vars(f: &Formula, out: &mut Vec<String>) {
    match f {
        Formula::Count { .. } | Formula::True | Formula::False => {}
        Formula::Atom(a) | Formula::StrongNeg(a) => a.collect_vars(out),
        Formula::Not(g) => global_vars(g, out),
        Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| global_vars(g, out)),
        Formula::Rule { head, body } => {
            if let Some(h) = head {
                global_vars(h, out);
            }
            body.iter().for_each(|g| global_vars(g, out));
        }
        Formula::Cmp(_, a, b) => {
            a.collect_vars(out);
            b.collect_vars(out);
        }
    }
}

fn formula_global_vars(f: &Formula) -> Vec<String> {
    let mut v = Vec::new();
    global_vars(f, &mut v);
    v
}

fn positive_body(f: &Formula) -> Vec<Atom> {
    match f {
        Formula::Rule { body, .. } => body
            .iter()
            .filter_map(|b| match b {
                Formula::Atom(a) if is_shorthand_free(a) => Some(a.clone()),
                Formula::StrongNeg(a) if is_shorthand_free(a) => Some(strong(a)),
                _ => None,
            })
            .collect(),
        _ => Vec::new(),
    }
}

fn head_sigs(f: &Formula) -> Vec<Sig> {
    let mut out = Vec::new();
    if let Formula::Rule { head: Some(h), .. } = f {
        h.for_each_atom(&mut |a, _| out.push(a.signature()));
    } else if !f.is_rule() {
        f.for_each_atom(&mut |a, _| out.push(a.signature()));
    }
    out
}

fn body_cmps(f: &Formula) -> Vec<(CmpOp, Term, Term)> {
    match f {
        Formula::Rule { body, .. } => body
            .iter()
            .filter_map(|b| match b {
                Formula::Cmp(op, x, y) => Some((*op, x.clone(), y.clone())),
                _ => None,
            })
            .collect(),
        _ => Vec::new(),
    }
}

fn match_term(pat: &Term, val: &Term, s: &mut Subst) -> bool {
    match (pat, val) {
        (Term::Var(v), _) => match s.get(v) {
            Some(b) => b == val,
            None => {
                s.insert(v.clone(), val.clone());
                true
            }
        },
        (Term::Compound(f, ps), Term::Compound(g, vs)) => {
            f == g && ps.len() == vs.len() && ps.iter().zip(vs).all(|(p, v)| match_term(p, v, s))
        }
        _ => pat == val,
    }
}

fn term_vars(t: &Term) -> Vec<String> {
    let mut v = Vec::new();
    t.collect_vars(&mut v);
    v
}

impl GroundContext {
    fn is_domain(&self, sig: &Sig) -> bool {
        self.domain_preds.contains(sig)
    }

    fn candidates(&self, sig: &Sig) -> Vec<Vec<Term>> {
        if self.is_domain(sig) {
            self.domains.tuples(sig).cloned().collect()
        } else {
            self.possible.tuples(sig).cloned().collect()
        }
    }

    /// All substitutions for `vars`, joining `binders` in order and filtering by comparisons.
    /// Variables without a binder fall back to their `#domain` declaration.
    fn substitutions(
        &self,
        vars: &[String],
        mut binders: Vec<Atom>,
        cmps: &[(CmpOp, Term, Term)],
        head_sigs: &[Sig],
        base: &Subst,
        what: &dyn Fn() -> String,
    ) -> Result<Vec<Subst>> {
        for v in vars {
            if base.contains_key(v) {
                continue;
            }
            if let Some(d) = self.var_domains.get(v) {
                if !head_sigs.contains(&d.signature()) && !binders.contains(d) {
                    binders.push(d.clone());
                }
            }
        }
        binders.sort_by_key(|b| !self.is_domain(&b.signature()));
        let mut bound: BTreeSet<String> = base.keys().cloned().collect();
        for b in &binders {
            let mut vs = Vec::new();
            b.collect_vars(&mut vs);
            bound.extend(vs);
        }
        // `X == t` binds X when t is bound.
        let mut changed = true;
        while changed {
            changed = false;
            for (op, x, y) in cmps {
                if *op != CmpOp::Eq {
                    continue;
                }
                for (p, q) in [(x, y), (y, x)] {
                    if let Term::Var(v) = p {
                        if !bound.contains(v) && term_vars(q).iter().all(|w| bound.contains(w)) {
                            bound.insert(v.clone());
                            changed = true;
                        }
                    }
                }
            }
        }
        if let Some(v) = vars.iter().find(|v| !bound.contains(*v)) {
            return Err(Error::Ground(format!("unsafe variable '{v}' in '{}'", what())));
        }
        let mut out = Vec::new();
        self.join(&binders, 0, base.clone(), cmps, &mut out);
        Ok(out)
    }

    fn join(&self, binders: &[Atom], i: usize, s: Subst, cmps: &[(CmpOp, Term, Term)], out: &mut Vec<Subst>) {
        let mut s = s;
        // Bind equalities and prune on comparisons that are already ground.
        loop {
            let mut progress = false;
            for (op, x, y) in cmps {
                let (gx, gy) = (subst_term(x, &s), subst_term(y, &s));
                match (gx.is_ground(), gy.is_ground()) {
                    (true, true) => {
                        if !eval_cmp(*op, &gx, &gy) {
                            return;
                        }
                    }
                    (false, true) if *op == CmpOp::Eq => {
                        if let Term::Var(v) = &gx {
                            s.insert(v.clone(), gy);
                            progress = true;
                        }
                    }
                    (true, false) if *op == CmpOp::Eq => {
                        if let Term::Var(v) = &gy {
                            s.insert(v.clone(), gx);
                            progress = true;
                        }
                    }
                    _ => {}
                }
            }
            if !progress {
                break;
            }
        }
        if i == binders.len() {
            out.push(s);
            return;
        }
        let b = subst_atom(&binders[i], &s);
        if b.is_ground() {
            let present = if self.is_domain(&b.signature()) { self.domains.contains(&b) } else { self.possible.contains(&b) };
            if present {
                self.join(binders, i + 1, s, cmps, out);
            }
            return;
        }
        for tuple in self.candidates(&b.signature()) {
            let mut s2 = s.clone();
            if b.args.iter().zip(&tuple).all(|(p, v)| match_term(p, v, &mut s2)) {
                self.join(binders, i + 1, s2, cmps, out);
            }
        }
    }

    /// Ground substitutions for the global variables of a formula.
    fn formula_substitutions(&self, f: &Formula, extra_vars: &[String]) -> Result<Vec<Subst>> {
        let mut vars = formula_global_vars(f);
        for v in extra_vars {
            if !vars.contains(v) {
                vars.push(v.clone());
            }
        }
        self.substitutions(&vars, positive_body(f), &body_cmps(f), &head_sigs(f), &Subst::new(), &|| f.to_string())
    }
}

// ---------------------------------------------------------------------------------------------
// Instantiation

fn ground_atoms(a: &Atom, s: &Subst) -> Result<Vec<Atom>> {
    let g = subst_atom(a, s);
    let mut vs = Vec::new();
    g.collect_vars(&mut vs);
    if let Some(v) = vs.first() {
        return Err(Error::Ground(format!("unsafe variable '{v}' in '{a}'")));
    }
    expand_atom(&g)
}

fn conj_atoms(atoms: Vec<Atom>, neg: bool) -> Formula {
    let mut fs: Vec<Formula> = atoms.into_iter().map(Formula::Atom).collect();
    if neg {
        fs = fs.into_iter().map(Formula::not).collect();
    }
    if fs.len() == 1 {
        fs.pop().unwrap()
    } else {
        Formula::And(fs)
    }
}

/// Grounds a nested formula position; shorthand expands to a conjunction.
fn ground_nested(f: &Formula, s: &Subst, ctx: Option<&GroundContext>) -> Result<Formula> {
    Ok(match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(a) => conj_atoms(ground_atoms(a, s)?, false),
        Formula::StrongNeg(a) => conj_atoms(ground_atoms(&strong(a), s)?, false),
        Formula::Not(g) => match g.as_ref() {
            Formula::Atom(a) => conj_atoms(ground_atoms(a, s)?, true),
            Formula::StrongNeg(a) => conj_atoms(ground_atoms(&strong(a), s)?, true),
            _ => Formula::not(ground_nested(g, s, ctx)?),
        },
        Formula::And(gs) => Formula::And(gs.iter().map(|g| ground_nested(g, s, ctx)).collect::<Result<_>>()?),
        Formula::Or(gs) => Formula::Or(gs.iter().map(|g| ground_nested(g, s, ctx)).collect::<Result<_>>()?),
        Formula::Cmp(op, a, b) => {
            let (a, b) = (subst_term(a, s), subst_term(b, s));
            if !a.is_ground() || !b.is_ground() {
                return Err(Error::Ground(format!("unsafe variable in comparison '{a} {} {b}'", op.symbol())));
            }
            Formula::Cmp(*op, a, b)
        }
        Formula::Count { lower, elems, upper } => {
            let mut out = Vec::new();
            for e in elems {
                out.extend(ground_count_elem(e, s, ctx)?);
            }
            Formula::Count { lower: *lower, elems: out, upper: *upper }
        }
        Formula::Rule { .. } => {
            let mut v = instantiate(f, s, ctx)?;
            if v.len() == 1 {
                v.pop().unwrap()
            } else {
                Formula::And(v)
            }
        }
    })
}

fn ground_count_elem(e: &CountElem, s: &Subst, ctx: Option<&GroundContext>) -> Result<Vec<CountElem>> {
    let mut all = Vec::new();
    e.lit.collect_vars(&mut all);
    e.cond.iter().for_each(|c| c.collect_vars(&mut all));
    let local: Vec<String> = all.into_iter().filter(|v| !s.contains_key(v)).collect();
    let substs = if local.is_empty() {
        vec![s.clone()]
    } else {
        let ctx = ctx.ok_or_else(|| Error::Ground(format!("unbound variables in count element '{e}'")))?;
        let binders: Vec<Atom> = e
            .cond
            .iter()
            .filter_map(|c| match c {
                Formula::Atom(a) if is_shorthand_free(a) => Some(a.clone()),
                _ => None,
            })
            .collect();
        let cmps: Vec<_> = e
            .cond
            .iter()
            .filter_map(|c| match c {
                Formula::Cmp(op, x, y) => Some((*op, x.clone(), y.clone())),
                _ => None,
            })
            .collect();
        ctx.substitutions(&local, binders, &cmps, &[], s, &|| e.to_string())?
    };
    let mut out = Vec::new();
    for s in substs {
        let cond: Vec<Formula> = e.cond.iter().map(|c| ground_nested(c, &s, ctx)).collect::<Result<_>>()?;
        let lits = match &e.lit {
            Formula::Atom(a) => ground_atoms(a, &s)?.into_iter().map(Formula::Atom).collect(),
            Formula::StrongNeg(a) => ground_atoms(&strong(a), &s)?.into_iter().map(Formula::Atom).collect(),
            Formula::Not(g) if matches!(g.as_ref(), Formula::Atom(_)) => {
                let Formula::Atom(a) = g.as_ref() else { unreachable!() };
                ground_atoms(a, &s)?.into_iter().map(|a| Formula::not(Formula::Atom(a))).collect()
            }
            other => vec![ground_nested(other, &s, ctx)?],
        };
        for lit in lits {
            out.push(CountElem { lit, cond: cond.clone() });
        }
    }
    Ok(out)
}

/// Applies a substitution at top level. Shorthand in a fact or rule head yields several formulas.
fn instantiate(f: &Formula, s: &Subst, ctx: Option<&GroundContext>) -> Result<Vec<Formula>> {
    match f {
        Formula::Atom(a) => Ok(ground_atoms(a, s)?.into_iter().map(Formula::Atom).collect()),
        Formula::StrongNeg(a) => Ok(ground_atoms(&strong(a), s)?.into_iter().map(Formula::Atom).collect()),
        Formula::Rule { head, body } => {
            let mut gbody = Vec::new();
            for b in body {
                match b {
                    Formula::Atom(a) => gbody.extend(ground_atoms(a, s)?.into_iter().map(Formula::Atom)),
                    Formula::StrongNeg(a) => gbody.extend(ground_atoms(&strong(a), s)?.into_iter().map(Formula::Atom)),
                    Formula::Not(g) if matches!(g.as_ref(), Formula::Atom(_) | Formula::StrongNeg(_)) => {
                        let a = match g.as_ref() {
                            Formula::Atom(a) => a.clone(),
                            Formula::StrongNeg(a) => strong(a),
                            _ => unreachable!(),
                        };
                        gbody.extend(ground_atoms(&a, s)?.into_iter().map(|a| Formula::not(Formula::Atom(a))));
                    }
                    other => gbody.push(ground_nested(other, s, ctx)?),
                }
            }
            let heads: Vec<Option<Formula>> = match head.as_deref() {
                None => vec![None],
                Some(Formula::Atom(a)) => ground_atoms(a, s)?.into_iter().map(|a| Some(Formula::Atom(a))).collect(),
                Some(Formula::StrongNeg(a)) => {
                    ground_atoms(&strong(a), s)?.into_iter().map(|a| Some(Formula::Atom(a))).collect()
                }
                Some(h) => vec![Some(ground_nested(h, s, ctx)?)],
            };
            Ok(heads
                .into_iter()
                .map(|h| Formula::Rule { head: h.map(Box::new), body: gbody.clone() })
                .collect())
        }
        other => Ok(vec![ground_nested(other, s, ctx)?]),
    }
}

/// Outcome of simplifying a literal against the domains.
enum Truth {
    True,
    False,
    Unknown,
}

fn literal_truth(f: &Formula, ctx: &GroundContext, drop_impossible: bool) -> Truth {
    let atom_truth = |a: &Atom| {
        if ctx.is_domain(&a.signature()) {
            if ctx.domains.contains(a) {
                Truth::True
            } else {
                Truth::False
            }
        } else if drop_impossible && !ctx.possible.contains(a) {
            Truth::False
        } else {
            Truth::Unknown
        }
    };
    match f {
        Formula::True => Truth::True,
        Formula::False => Truth::False,
        Formula::Cmp(op, a, b) => {
            if eval_cmp(*op, a, b) {
                Truth::True
            } else {
                Truth::False
            }
        }
        Formula::Atom(a) => atom_truth(a),
        Formula::Not(g) => match g.as_ref() {
            Formula::Atom(a) => match atom_truth(a) {
                Truth::True => Truth::False,
                Truth::False => Truth::True,
                Truth::Unknown => Truth::Unknown,
            },
            _ => Truth::Unknown,
        },
        _ => Truth::Unknown,
    }
}

fn simplify_count(f: Formula, ctx: &GroundContext) -> Formula {
    match f {
        Formula::Count { lower, elems, upper } => {
            let mut out = Vec::new();
            'elems: for mut e in elems {
                let mut cond = Vec::new();
                for c in e.cond {
                    match literal_truth(&c, ctx, false) {
                        Truth::True => {}
                        Truth::False => continue 'elems,
                        Truth::Unknown => cond.push(c),
                    }
                }
                e.cond = cond;
                if !out.contains(&e) {
                    out.push(e);
                }
            }
            Formula::Count { lower, elems: out, upper }
        }
        other => other,
    }
}

/// Evaluates comparisons inside a compound formula.
fn simplify_nested(f: Formula, ctx: &GroundContext) -> Formula {
    match f {
        Formula::Cmp(op, a, b) => {
            if eval_cmp(op, &a, &b) {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::Not(g) => Formula::not(simplify_nested(*g, ctx)),
        Formula::And(gs) => Formula::And(gs.into_iter().map(|g| simplify_nested(g, ctx)).collect()),
        Formula::Or(gs) => Formula::Or(gs.into_iter().map(|g| simplify_nested(g, ctx)).collect()),
        c @ Formula::Count { .. } => simplify_count(c, ctx),
        other => other,
    }
}

/// Removes body literals that are true at grounding time. Returns `None` when a body literal is
/// false, so the instance can never fire.
fn simplify(f: Formula, ctx: &GroundContext, drop_impossible: bool) -> Option<Formula> {
    match f {
        Formula::Rule { head, body } => {
            let mut kept = Vec::new();
            for b in body {
                match literal_truth(&b, ctx, drop_impossible) {
                    Truth::True => {}
                    Truth::False => return None,
                    Truth::Unknown => kept.push(simplify_nested(b, ctx)),
                }
            }
            let head = head.map(|h| Box::new(simplify_nested(*h, ctx)));
            match (head, kept.is_empty()) {
                (Some(h), true) => Some(*h),
                (head, _) => Some(Formula::Rule { head, body: kept }),
            }
        }
        other => Some(simplify_nested(other, ctx)),
    }
}

// ---------------------------------------------------------------------------------------------
// Sorting

#[derive(Clone, Debug, PartialEq, Eq)]
enum SortTok {
    Int(i64),
    Word(String),
}

impl PartialOrd for SortTok {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SortTok {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (SortTok::Int(a), SortTok::Int(b)) => a.cmp(b),
            (SortTok::Word(a), SortTok::Word(b)) => a.cmp(b),
            (SortTok::Int(_), SortTok::Word(_)) => Ordering::Less,
            (SortTok::Word(_), SortTok::Int(_)) => Ordering::Greater,
        }
    }
}

fn sort_key(s: &str) -> Vec<SortTok> {
    let cs: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let st = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            let w: String = cs[st..i].iter().collect();
            out.push(w.parse().map(SortTok::Int).unwrap_or(SortTok::Word(w)));
        } else if c.is_alphanumeric() || c == '_' {
            let st = i;
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push(SortTok::Word(cs[st..i].iter().collect()));
        } else {
            out.push(SortTok::Word(c.to_string()));
            i += 1;
        }
    }
    out
}

/// Token-wise comparison of printed formulas: words lexicographic, integers numeric.
pub fn token_cmp(a: &str, b: &str) -> Ordering {
    sort_key(a).cmp(&sort_key(b))
}

/// Stable sort of ground formulas by their printed token sequence.
pub fn sort_instances(list: &mut [Formula]) {
    let mut keyed: Vec<(Vec<SortTok>, Formula)> = list.iter().map(|f| (sort_key(&f.to_string()), f.clone())).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    for (slot, (_, f)) in list.iter_mut().zip(keyed) {
        *slot = f;
    }
}

// ---------------------------------------------------------------------------------------------
// Domains

fn is_plain_atom_head(f: &Formula) -> Option<&Atom> {
    match f {
        Formula::Atom(a) => Some(a),
        Formula::Rule { head: Some(h), .. } => match h.as_ref() {
            Formula::Atom(a) => Some(a),
            _ => None,
        },
        _ => None,
    }
}

fn sig_of_strong(f: &Formula) -> Option<Sig> {
    match f {
        Formula::StrongNeg(a) => Some((format!("-{}", a.pred), a.args.len())),
        Formula::Rule { head: Some(h), .. } => sig_of_strong(h),
        _ => None,
    }
}

fn all_sigs(f: &Formula, out: &mut BTreeSet<Sig>) {
    f.for_each_atom(&mut |a, neg| {
        if neg {
            out.insert((format!("-{}", a.pred), a.args.len()));
        } else {
            out.insert(a.signature());
        }
    });
}

/// Predicates defined only by facts and by rules over other domain predicates, and never used in
/// an uncertain position.
fn domain_predicates(plain: &[Formula], uncertain: &BTreeSet<Sig>) -> BTreeSet<Sig> {
    let mut cand: BTreeSet<Sig> = BTreeSet::new();
    let mut bad: BTreeSet<Sig> = uncertain.clone();
    for f in plain {
        match is_plain_atom_head(f) {
            Some(a) => {
                cand.insert(a.signature());
            }
            None => {
                if let Some(s) = sig_of_strong(f) {
                    bad.insert(s);
                } else if let Formula::Rule { head: Some(h), .. } = f {
                    all_sigs(h, &mut bad);
                } else if !f.is_rule() {
                    all_sigs(f, &mut bad);
                }
            }
        }
    }
    let mut d: BTreeSet<Sig> = cand.difference(&bad).cloned().collect();
    loop {
        let mut removed = false;
        for f in plain {
            let Formula::Rule { head: Some(h), body } = f else { continue };
            let Formula::Atom(a) = h.as_ref() else { continue };
            if !d.contains(&a.signature()) {
                continue;
            }
            let ok = body.iter().all(|b| match b {
                Formula::Atom(x) => d.contains(&x.signature()),
                Formula::Cmp(..) => true,
                _ => false,
            });
            if !ok {
                d.remove(&a.signature());
                removed = true;
            }
        }
        if !removed {
            return d;
        }
    }
}

/// Evaluates the domain predicates of `plain` to a fixpoint.
pub fn compute_domains(plain: &[Formula], var_domains: &BTreeMap<String, Atom>) -> Result<(BTreeSet<Sig>, DomainMap)> {
    compute_domains_excluding(plain, var_domains, &BTreeSet::new())
}

fn compute_domains_excluding(
    plain: &[Formula],
    var_domains: &BTreeMap<String, Atom>,
    uncertain: &BTreeSet<Sig>,
) -> Result<(BTreeSet<Sig>, DomainMap)> {
    let preds = domain_predicates(plain, uncertain);
    let mut ctx = GroundContext { domain_preds: preds.clone(), var_domains: var_domains.clone(), ..Default::default() };
    let rules: Vec<&Formula> = plain
        .iter()
        .filter(|f| is_plain_atom_head(f).is_some_and(|a| preds.contains(&a.signature())))
        .collect();
    loop {
        let before = ctx.domains.len();
        for f in &rules {
            for s in ctx.formula_substitutions(f, &[])? {
                for g in instantiate(f, &s, Some(&ctx))? {
                    if let Some(Formula::Atom(a)) = simplify(g, &ctx, false) {
                        ctx.domains.insert(&a);
                    }
                }
            }
        }
        if ctx.domains.len() == before {
            return Ok((preds, ctx.domains));
        }
    }
}

// ---------------------------------------------------------------------------------------------
// Program grounding

/// Source formulas with their annotation, gathered from all statements.
struct Collected {
    plain: Vec<AnnotatedFormula>,
    volat: Vec<AnnotatedFormula>,
    weighted: Vec<(AnnotatedFormula, Option<usize>)>,
    blocks: Vec<(BlockKind, Vec<usize>)>,
    ads: Vec<AnnotatedDisjunction>,
    decls: BTreeMap<String, Atom>,
}

fn collect(stmts: &[Statement]) -> Result<Collected> {
    let mut c = Collected {
        plain: Vec::new(),
        volat: Vec::new(),
        weighted: Vec::new(),
        blocks: Vec::new(),
        ads: Vec::new(),
        decls: BTreeMap::new(),
    };
    for st in stmts {
        match st {
            Statement::Formula(f) if f.annotation.is_none() => c.plain.push(f.clone()),
            Statement::Formula(f) => c.weighted.push((f.clone(), None)),
            Statement::Block(b) => {
                let id = c.blocks.len();
                c.blocks.push((b.kind, Vec::new()));
                for f in &b.items {
                    c.blocks[id].1.push(c.weighted.len());
                    c.weighted.push((f.clone(), Some(id)));
                }
            }
            Statement::Disjunction(d) => c.ads.push(d.clone()),
            Statement::Domain(a) => add_decl(&mut c.decls, a)?,
            Statement::Volat(items) => c.volat.extend(items.iter().cloned()),
        }
    }
    Ok(c)
}

fn add_decl(decls: &mut BTreeMap<String, Atom>, a: &Atom) -> Result<()> {
    let mut vs = Vec::new();
    a.collect_vars(&mut vs);
    if vs.is_empty() {
        return Err(Error::Ground(format!("'#domain {a}' declares no variable")));
    }
    for v in vs {
        decls.insert(v, a.clone());
    }
    Ok(())
}

fn cond_pr_parts(f: &Formula) -> Option<(&Atom, Vec<Formula>)> {
    let (head, body) = match f {
        Formula::Atom(a) => (a, Vec::new()),
        Formula::Rule { head: Some(h), body } => match h.as_ref() {
            Formula::Atom(a) => (a, body.clone()),
            _ => return None,
        },
        _ => return None,
    };
    (head.pred == "condPr" || head.pred == "condProb").then_some((head, body))
}

fn term_to_atom(t: &Term) -> Result<Atom> {
    match t {
        Term::Const(c) => Ok(Atom::prop(c.clone())),
        Term::Compound(f, args) => Ok(Atom::new(f.clone(), args.clone())),
        _ => Err(Error::Ground(format!("'{t}' is not an atom"))),
    }
}

/// Signatures of every atom whose truth is uncertain: weighted formulas, conditions, choice
/// heads, disjunction alternatives and compound formulas.
fn uncertain_sigs(c: &Collected) -> BTreeSet<Sig> {
    let mut u = BTreeSet::new();
    for (f, _) in &c.weighted {
        if let Some((head, _)) = cond_pr_parts(&f.formula) {
            for t in &head.args {
                if let Ok(a) = term_to_atom(t) {
                    u.insert(a.signature());
                }
            }
            continue;
        }
        match &f.formula {
            Formula::Rule { head: Some(h), .. } => all_sigs(h, &mut u),
            Formula::Rule { head: None, .. } => {}
            other => all_sigs(other, &mut u),
        }
        if let Some(Annotation { kind: AnnKind::Cond(_, cond), .. }) = &f.annotation {
            all_sigs(cond, &mut u);
        }
    }
    for d in &c.ads {
        for (_, a) in &d.alternatives {
            u.insert(a.signature());
        }
    }
    u
}

fn rule_heads_into(f: &Formula, out: &mut Vec<Atom>) {
    match f {
        Formula::Rule { head: Some(h), .. } => h.for_each_atom(&mut |a, _| out.push(a.clone())),
        Formula::Rule { head: None, .. } => {}
        other => other.for_each_atom(&mut |a, _| out.push(a.clone())),
    }
}

impl GroundContext {
    /// Ground, simplified instances of a formula, sorted.
    pub fn instances(&self, f: &Formula, drop_impossible: bool) -> Result<Vec<Formula>> {
        let mut out = Vec::new();
        for s in self.formula_substitutions(f, &[])? {
            for g in instantiate(f, &s, Some(self))? {
                if let Some(g) = simplify(g, self, drop_impossible) {
                    if !out.contains(&g) {
                        out.push(g);
                    }
                }
            }
        }
        sort_instances(&mut out);
        Ok(out)
    }
}

fn weighted_formulas_for_possible(f: &AnnotatedFormula) -> Vec<Formula> {
    let mut v = vec![f.formula.clone()];
    if let Some((head, body)) = cond_pr_parts(&f.formula) {
        v.clear();
        for t in &head.args {
            if let Ok(a) = term_to_atom(t) {
                v.push(if body.is_empty() {
                    Formula::Atom(a)
                } else {
                    Formula::Rule { head: Some(Box::new(Formula::Atom(a))), body: body.clone() }
                });
            }
        }
    }
    if let Some(Annotation { kind: AnnKind::Cond(_, c), .. }) = &f.annotation {
        v.push(c.clone());
    }
    v
}

fn ad_as_rule(d: &AnnotatedDisjunction) -> Formula {
    Formula::Rule {
        head: Some(Box::new(Formula::Or(d.alternatives.iter().map(|(_, a)| Formula::Atom(a.clone())).collect()))),
        body: if d.body.is_empty() { vec![Formula::True] } else { d.body.clone() },
    }
}

fn conjunction(mut fs: Vec<Formula>) -> Formula {
    if fs.len() == 1 {
        fs.pop().unwrap()
    } else {
        Formula::And(fs)
    }
}

/// Grounds the statements of a background program.
pub fn ground_program(stmts: &[Statement]) -> Result<GroundedProgram> {
    let c = collect(stmts)?;
    let plain_all: Vec<Formula> = c.plain.iter().chain(&c.volat).map(|f| f.formula.clone()).collect();
    let uncertain = uncertain_sigs(&c);
    let (domain_preds, domains) = compute_domains_excluding(&plain_all, &c.decls, &uncertain)?;
    let mut ctx = GroundContext {
        domain_preds,
        possible: domains.clone(),
        domains,
        var_domains: c.decls.clone(),
    };

    // Fixpoint of possibly-true atoms.
    let mut sources: Vec<Formula> = plain_all.clone();
    for (f, _) in &c.weighted {
        sources.extend(weighted_formulas_for_possible(f));
    }
    sources.extend(c.ads.iter().map(ad_as_rule));
    loop {
        let before = ctx.possible.len();
        for f in &sources {
            for g in ctx.instances(f, true)? {
                let mut heads = Vec::new();
                rule_heads_into(&g, &mut heads);
                for a in heads {
                    ctx.possible.insert(&a);
                }
            }
        }
        if ctx.possible.len() == before {
            break;
        }
    }

    let mut prog = GroundedProgram { items: Vec::new(), groups: Vec::new(), ctx: GroundContext::default() };
    for f in &c.plain {
        for g in ctx.instances(&f.formula, true)? {
            prog.items.push(GroundItem { formula: g, ann: None, origin: f.origin.clone(), volatile: false });
        }
    }

    let mut members_of: Vec<Vec<usize>> = vec![Vec::new(); c.blocks.len()];
    for (f, block) in &c.weighted {
        let volatile = block.is_some_and(|b| c.blocks[b].0.is_volatile());
        let items = ground_weighted(f, &ctx)?;
        for mut it in items {
            it.volatile = volatile;
            if let Some(b) = block {
                members_of[*b].push(prog.items.len());
            }
            prog.items.push(it);
        }
    }
    for ((kind, _), members) in c.blocks.iter().zip(members_of) {
        prog.groups.push(IndepGroup { pairwise: kind.is_pairwise(), members });
    }

    let mut ad_members = Vec::new();
    let mut ad_index = 0usize;
    for d in &c.ads {
        let rule = ad_as_rule(d);
        for s in ctx.formula_substitutions(&rule, &[])? {
            let mut body = Vec::new();
            let mut dropped = false;
            for b in &d.body {
                let gb = instantiate(&Formula::Rule { head: None, body: vec![b.clone()] }, &s, Some(&ctx))?;
                match gb.into_iter().next().and_then(|g| simplify(g, &ctx, true)) {
                    None => dropped = true,
                    Some(Formula::Rule { body: bs, .. }) => body.extend(bs),
                    Some(_) => {}
                }
            }
            if dropped {
                continue;
            }
            let mut alternatives = Vec::new();
            for (w, a) in &d.alternatives {
                for ga in ground_atoms(a, &s)? {
                    alternatives.push((*w, ga));
                }
            }
            let gad = AnnotatedDisjunction { alternatives, body, origin: d.origin.clone() };
            let des = desugar_annotated_disjunction(&gad, ad_index);
            ad_index += 1;
            for f in des.formulas {
                let ann = match f.annotation.map(|a| a.kind) {
                    Some(AnnKind::Weight(w)) => Some(GroundAnnotation::Weight(w)),
                    _ => None,
                };
                if ann.is_some() {
                    ad_members.push(prog.items.len());
                }
                prog.items.push(GroundItem { formula: f.formula, ann, origin: f.origin, volatile: false });
            }
        }
    }
    if !ad_members.is_empty() {
        prog.groups.push(IndepGroup { pairwise: false, members: ad_members });
    }

    add_strong_negation_constraints(&mut prog);
    prog.ctx = ctx;
    Ok(prog)
}

fn add_strong_negation_constraints(prog: &mut GroundedProgram) {
    let mut negs: BTreeSet<Atom> = BTreeSet::new();
    let mut visit = |f: &Formula| {
        f.for_each_atom(&mut |a, _| {
            if a.pred.starts_with('-') {
                negs.insert(a.clone());
            }
        })
    };
    for it in &prog.items {
        visit(&it.formula);
        if let Some(GroundAnnotation::Cond(_, c)) = &it.ann {
            visit(c);
        }
    }
    for n in negs {
        let pos = Atom::new(n.pred[1..].to_string(), n.args.clone());
        prog.items.push(GroundItem {
            formula: Formula::Rule { head: None, body: vec![Formula::Atom(pos), Formula::Atom(n)] },
            ann: None,
            origin: Origin::default(),
            volatile: false,
        });
    }
}

fn has_vars_or_shorthand(f: &Formula) -> bool {
    if !f.vars().is_empty() {
        return true;
    }
    let mut sh = false;
    f.for_each_atom(&mut |a, _| sh |= !is_shorthand_free(a));
    sh
}

/// Pairs condition instances with formula instances according to the bracket level.
fn pair_instances(
    fs: &[Formula],
    cs: &[Formula],
    level: u8,
    what: &dyn Fn() -> String,
) -> Result<Vec<(Formula, Formula)>> {
    if level >= 3 {
        return Ok(fs.iter().flat_map(|f| cs.iter().map(move |c| (f.clone(), c.clone()))).collect());
    }
    if fs.len() == cs.len() {
        Ok(fs.iter().cloned().zip(cs.iter().cloned()).collect())
    } else if fs.len() == 1 {
        Ok(cs.iter().map(|c| (fs[0].clone(), c.clone())).collect())
    } else if cs.len() == 1 {
        Ok(fs.iter().map(|f| (f.clone(), cs[0].clone())).collect())
    } else {
        Err(Error::Ground(format!(
            "'{}': {} formula instances cannot be paired with {} condition instances",
            what(),
            fs.len(),
            cs.len()
        )))
    }
}

fn ground_weighted(f: &AnnotatedFormula, ctx: &GroundContext) -> Result<Vec<GroundItem>> {
    let ann = f.annotation.as_ref().expect("weighted formula");
    let level = ann.level;
    let item = |formula: Formula, ann: GroundAnnotation| GroundItem {
        formula,
        ann: Some(ann),
        origin: f.origin.clone(),
        volatile: false,
    };
    if let Some(weight) = match &ann.kind {
        AnnKind::Weight(w) => Some(*w),
        AnnKind::Distribute => Some(Weight::Point(0.0)),
        _ => None,
    } {
        if cond_pr_parts(&f.formula).is_some() {
            let mut out = Vec::new();
            let inst = ctx.instances(&f.formula, false)?;
            let n = inst.len();
            for g in inst {
                let Formula::Atom(head) = g else {
                    return Err(Error::Ground(format!(
                        "'{}': body of '{}' must reduce to grounding-time conditions",
                        f.formula, "condPr"
                    )));
                };
                let target = term_to_atom(&head.args[0])?;
                let cond = term_to_atom(&head.args[1])?;
                let w = if ann.kind == AnnKind::Distribute { Weight::Point(1.0 / n as f64) } else { weight };
                out.push(item(Formula::Atom(target), GroundAnnotation::Cond(w, Formula::Atom(cond))));
            }
            return Ok(out);
        }
    }
    let inst = ctx.instances(&f.formula, false)?;
    let nonground = has_vars_or_shorthand(&f.formula);
    if inst.is_empty() {
        log::warn!("{}: '{}' has no ground instances and is ignored", f.origin, f.formula);
        return Ok(Vec::new());
    }
    let per_instance = level >= 2 || !nonground;
    let units: Vec<Formula> = if per_instance { inst } else { vec![conjunction(inst)] };
    Ok(match &ann.kind {
        AnnKind::Weight(w) => units.into_iter().map(|g| item(g, GroundAnnotation::Weight(*w))).collect(),
        AnnKind::Span => units.into_iter().map(|g| item(g, GroundAnnotation::Span)).collect(),
        AnnKind::Distribute => {
            let n = units.len() as f64;
            units.into_iter().map(|g| item(g, GroundAnnotation::Weight(Weight::Point(1.0 / n)))).collect()
        }
        AnnKind::Cond(w, c) => {
            let cs = ctx.instances(c, false)?;
            if cs.is_empty() {
                log::warn!("{}: condition '{c}' has no ground instances", f.origin);
                return Ok(Vec::new());
            }
            let cnonground = has_vars_or_shorthand(c);
            let cs = if level >= 2 || !cnonground { cs } else { vec![conjunction(cs)] };
            pair_instances(&units, &cs, level, &|| f.formula.to_string())?
                .into_iter()
                .map(|(g, c)| item(g, GroundAnnotation::Cond(*w, c)))
                .collect()
        }
        AnnKind::Query | AnnKind::CondQuery(_) => {
            return Err(Error::Ground("query annotations are not allowed in background knowledge".into()))
        }
    })
}

/// Context formulas from a query file together with its ground queries.
#[derive(Clone, Debug, Default)]
pub struct GroundQueryFile {
    pub queries: Vec<GroundQuery>,
    /// Unannotated formulas of the query file, ground.
    pub context: Vec<Formula>,
}

/// Grounds a query file against a grounded background program. Facts and `#domain`
/// declarations in the query file extend the grounding context.
pub fn ground_queries(stmts: &[Statement], bg: &GroundedProgram) -> Result<GroundQueryFile> {
    let mut ctx = bg.ctx.clone();
    let mut out = GroundQueryFile::default();
    let mut plain = Vec::new();
    for st in stmts {
        match st {
            Statement::Domain(a) => add_decl(&mut ctx.var_domains, a)?,
            Statement::Formula(f) if f.annotation.is_none() => plain.push(f.formula.clone()),
            _ => {}
        }
    }
    if !plain.is_empty() {
        let (preds, doms) = compute_domains(&plain, &ctx.var_domains)?;
        for (sig, tuples) in doms.map {
            if !ctx.domain_preds.contains(&sig) && ctx.possible.tuples(&sig).next().is_some() {
                continue;
            }
            for t in tuples {
                let a = Atom::new(sig.0.clone(), t);
                ctx.domains.insert(&a);
                ctx.possible.insert(&a);
            }
        }
        ctx.domain_preds.extend(preds.into_iter().filter(|s| bg.ctx.possible.tuples(s).next().is_none()));
        for f in &plain {
            for g in ctx.instances(f, false)? {
                if !matches!(g, Formula::Atom(_)) {
                    out.context.push(g);
                }
            }
        }
    }
    for st in stmts {
        let Statement::Formula(f) = st else { continue };
        let Some(ann) = &f.annotation else { continue };
        let cond = match &ann.kind {
            AnnKind::Query => None,
            AnnKind::CondQuery(c) => Some(c),
            _ => return Err(Error::Ground(format!("{}: query files only contain queries", f.origin))),
        };
        let inst = ctx.instances(&f.formula, false)?;
        let per_instance = ann.level >= 2 || !has_vars_or_shorthand(&f.formula);
        let units = if per_instance { inst } else { vec![conjunction(inst)] };
        match cond {
            None => out.queries.extend(units.into_iter().map(|g| GroundQuery {
                shown: if ann.level >= 2 { g.clone() } else { f.formula.clone() },
                formula: g,
                cond: None,
                shown_cond: None,
                origin: f.origin.clone(),
            })),
            Some(c) => {
                let c_src = c;
                let cs = ctx.instances(c, false)?;
                let cs = if ann.level >= 2 || !has_vars_or_shorthand(c) { cs } else { vec![conjunction(cs)] };
                for (g, c) in pair_instances(&units, &cs, ann.level, &|| f.formula.to_string())? {
                    let (shown, shown_cond) =
                        if ann.level >= 2 { (g.clone(), c.clone()) } else { (f.formula.clone(), (*c_src).clone()) };
                    out.queries.push(GroundQuery { formula: g, cond: Some(c), shown, shown_cond: Some(shown_cond), origin: f.origin.clone() });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prog(src: &str) -> GroundedProgram {
        ground_program(&parse_text(src, "t.prasp", FileKind::Background).unwrap()).unwrap()
    }

    #[test]
    fn shorthand_fact_expands() {
        let f = parse_formula("twoCoins(1..3,1..2)", "t", 1).unwrap();
        assert_eq!(expand_term_shorthand(&f).unwrap().len(), 6);
        let f = parse_formula("person(a;b;c)", "t", 1).unwrap();
        assert_eq!(expand_term_shorthand(&f).unwrap().len(), 3);
    }

    #[test]
    fn weighted_rule_instances() {
        let p = prog("coin(1..3).\n[[0.5]] coin_out(N,heads) :- coin(N), N != 1.\n");
        let weighted: Vec<String> =
            p.items.iter().filter(|i| i.ann.is_some()).map(|i| i.formula.to_string()).collect();
        assert_eq!(weighted, vec!["coin_out(2,heads)", "coin_out(3,heads)"]);
    }

    #[test]
    fn numeric_sort() {
        let mut v: Vec<Formula> = ["v(2)", "v(10)", "v(1)"].iter().map(|s| parse_formula(s, "t", 1).unwrap()).collect();
        sort_instances(&mut v);
        let s: Vec<String> = v.iter().map(|f| f.to_string()).collect();
        assert_eq!(s, vec!["v(1)", "v(2)", "v(10)"]);
    }
}
