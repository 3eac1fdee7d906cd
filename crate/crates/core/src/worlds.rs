//! Ground programs over interned atoms, stable-model checking and answer set enumeration.

use std::collections::HashMap;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::syntax::{Atom, Formula};

/// A possible world: the set of true atoms, indexed by the atom table.
pub type World = FixedBitSet;

/// Interned ground atoms. Index order is the atom universe order.
#[derive(Clone, Debug, Default)]
pub struct AtomTable {
    atoms: Vec<Atom>,
    index: HashMap<Atom, usize>,
}

impl AtomTable {
    pub fn new() -> AtomTable {
        AtomTable::default()
    }

    pub fn intern(&mut self, a: &Atom) -> usize {
        if let Some(&i) = self.index.get(a) {
            return i;
        }
        let i = self.atoms.len();
        self.atoms.push(a.clone());
        self.index.insert(a.clone(), i);
        i
    }

    pub fn get(&self, a: &Atom) -> Option<usize> {
        self.index.get(a).copied()
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
}

/// Ground formula over interned atoms.
#[derive(Clone, Debug, PartialEq)]
pub enum GFormula {
    True,
    False,
    Atom(usize),
    Not(Box<GFormula>),
    And(Vec<GFormula>),
    Or(Vec<GFormula>),
    /// Counts the satisfied elements.
    Count { lower: Option<i64>, upper: Option<i64>, elems: Vec<GFormula> },
}

impl GFormula {
    pub fn not(f: GFormula) -> GFormula {
        GFormula::Not(Box::new(f))
    }

    pub fn and(mut fs: Vec<GFormula>) -> GFormula {
        if fs.len() == 1 {
            fs.pop().unwrap()
        } else {
            GFormula::And(fs)
        }
    }

    /// Converts a ground formula, interning its atoms. Rules read as implications.
    pub fn from_formula(f: &Formula, table: &mut AtomTable) -> Result<GFormula> {
        Ok(match f {
            Formula::True => GFormula::True,
            Formula::False => GFormula::False,
            Formula::Atom(a) => {
                if !a.is_ground() {
                    return Err(Error::Ground(format!("'{a}' is not ground")));
                }
                GFormula::Atom(table.intern(a))
            }
            Formula::StrongNeg(a) => {
                let s = Atom::new(format!("-{}", a.pred), a.args.clone());
                GFormula::from_formula(&Formula::Atom(s), table)?
            }
            Formula::Not(g) => GFormula::not(GFormula::from_formula(g, table)?),
            Formula::And(gs) => GFormula::And(gs.iter().map(|g| GFormula::from_formula(g, table)).collect::<Result<_>>()?),
            Formula::Or(gs) => GFormula::Or(gs.iter().map(|g| GFormula::from_formula(g, table)).collect::<Result<_>>()?),
            Formula::Rule { head, body } => {
                let b = GFormula::And(body.iter().map(|g| GFormula::from_formula(g, table)).collect::<Result<_>>()?);
                match head {
                    Some(h) => GFormula::Or(vec![GFormula::not(b), GFormula::from_formula(h, table)?]),
                    None => GFormula::not(b),
                }
            }
            Formula::Count { lower, elems, upper } => {
                let mut out = Vec::new();
                for e in elems {
                    let mut parts = vec![GFormula::from_formula(&e.lit, table)?];
                    for c in &e.cond {
                        parts.push(GFormula::from_formula(c, table)?);
                    }
                    out.push(GFormula::and(parts));
                }
                GFormula::Count { lower: *lower, upper: *upper, elems: out }
            }
            Formula::Cmp(..) => {
                return Err(Error::Ground(format!("comparison '{f}' must be resolved during grounding")))
            }
        })
    }

    pub fn for_each_atom(&self, f: &mut dyn FnMut(usize)) {
        match self {
            GFormula::True | GFormula::False => {}
            GFormula::Atom(a) => f(*a),
            GFormula::Not(g) => g.for_each_atom(f),
            GFormula::And(gs) | GFormula::Or(gs) | GFormula::Count { elems: gs, .. } => {
                gs.iter().for_each(|g| g.for_each_atom(f))
            }
        }
    }

    pub fn atoms(&self) -> Vec<usize> {
        let mut v = Vec::new();
        self.for_each_atom(&mut |a| v.push(a));
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn display(&self, table: &AtomTable) -> String {
        match self {
            GFormula::True => "true".into(),
            GFormula::False => "false".into(),
            GFormula::Atom(a) => table.atom(*a).to_string(),
            GFormula::Not(g) => format!("not {}", g.display_inner(table)),
            GFormula::And(gs) => gs.iter().map(|g| g.display_inner(table)).collect::<Vec<_>>().join(" & "),
            GFormula::Or(gs) => gs.iter().map(|g| g.display_inner(table)).collect::<Vec<_>>().join(" | "),
            GFormula::Count { lower, upper, elems } => format!(
                "{}{{{}}}{}",
                lower.map(|l| l.to_string()).unwrap_or_default(),
                elems.iter().map(|g| g.display(table)).collect::<Vec<_>>().join(", "),
                upper.map(|u| u.to_string()).unwrap_or_default()
            ),
        }
    }

    fn display_inner(&self, table: &AtomTable) -> String {
        match self {
            GFormula::And(_) | GFormula::Or(_) => format!("({})", self.display(table)),
            _ => self.display(table),
        }
    }
}

fn count_ok(n: i64, lower: Option<i64>, upper: Option<i64>) -> bool {
    lower.is_none_or(|l| n >= l) && upper.is_none_or(|u| n <= u)
}

/// Classical truth of a ground formula in a world. Atoms outside the world's range are false.
pub fn holds(w: &World, f: &GFormula) -> bool {
    match f {
        GFormula::True => true,
        GFormula::False => false,
        GFormula::Atom(a) => w.contains(*a),
        GFormula::Not(g) => !holds(w, g),
        GFormula::And(gs) => gs.iter().all(|g| holds(w, g)),
        GFormula::Or(gs) => gs.iter().any(|g| holds(w, g)),
        GFormula::Count { lower, upper, elems } => {
            count_ok(elems.iter().filter(|g| holds(w, g)).count() as i64, *lower, *upper)
        }
    }
}

/// Kleene evaluation under a partial interpretation: atoms in `lower` are true, atoms outside
/// `upper` are false, the rest unknown.
pub fn eval3(f: &GFormula, lower: &World, upper: &World) -> Option<bool> {
    match f {
        GFormula::True => Some(true),
        GFormula::False => Some(false),
        GFormula::Atom(a) => {
            if lower.contains(*a) {
                Some(true)
            } else if !upper.contains(*a) {
                Some(false)
            } else {
                None
            }
        }
        GFormula::Not(g) => eval3(g, lower, upper).map(|b| !b),
        GFormula::And(gs) => {
            let mut unknown = false;
            for g in gs {
                match eval3(g, lower, upper) {
                    Some(false) => return Some(false),
                    None => unknown = true,
                    Some(true) => {}
                }
            }
            if unknown {
                None
            } else {
                Some(true)
            }
        }
        GFormula::Or(gs) => {
            let mut unknown = false;
            for g in gs {
                match eval3(g, lower, upper) {
                    Some(true) => return Some(true),
                    None => unknown = true,
                    Some(false) => {}
                }
            }
            if unknown {
                None
            } else {
                Some(false)
            }
        }
        GFormula::Count { lower: lo, upper: hi, elems } => {
            let (mut t, mut u) = (0i64, 0i64);
            for g in elems {
                match eval3(g, lower, upper) {
                    Some(true) => t += 1,
                    None => u += 1,
                    Some(false) => {}
                }
            }
            if lo.is_some_and(|l| t + u < l) || hi.is_some_and(|h| t > h) {
                Some(false)
            } else if count_ok(t, *lo, *hi) && count_ok(t + u, *lo, *hi) {
                Some(true)
            } else {
                None
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Head {
    /// Integrity constraint.
    None,
    Atom(usize),
    /// `lo { atoms } hi`
    Choice { lo: usize, hi: usize, atoms: Vec<usize> },
}

/// `head :- pos, not neg, other` where `other` holds count aggregates (possibly negated); they
/// are evaluated against the candidate model like negative literals.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundRule {
    pub head: Head,
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
    pub other: Vec<GFormula>,
}

impl GroundRule {
    pub fn fact(a: usize) -> GroundRule {
        GroundRule { head: Head::Atom(a), pos: Vec::new(), neg: Vec::new(), other: Vec::new() }
    }

    pub fn choice(atoms: Vec<usize>, lo: usize, hi: usize) -> GroundRule {
        GroundRule { head: Head::Choice { lo, hi, atoms }, pos: Vec::new(), neg: Vec::new(), other: Vec::new() }
    }

    fn body_holds(&self, w: &World) -> bool {
        self.pos.iter().all(|&a| w.contains(a))
            && self.neg.iter().all(|&a| !w.contains(a))
            && self.other.iter().all(|g| holds(w, g))
    }

    pub fn display(&self, table: &AtomTable) -> String {
        let name = |a: usize| table.atom(a).to_string();
        let head = match &self.head {
            Head::None => String::new(),
            Head::Atom(a) => name(*a),
            Head::Choice { lo, hi, atoms } => {
                format!("{lo}{{{}}}{hi}", atoms.iter().map(|&a| name(a)).collect::<Vec<_>>().join(";"))
            }
        };
        let mut body: Vec<String> = self.pos.iter().map(|&a| name(a)).collect();
        body.extend(self.neg.iter().map(|&a| format!("not {}", name(a))));
        body.extend(self.other.iter().map(|g| g.display(table)));
        match (head.is_empty(), body.is_empty()) {
            (_, true) => format!("{head}."),
            (true, false) => format!(":- {}.", body.join(", ")),
            (false, false) => format!("{head} :- {}.", body.join(", ")),
        }
    }
}

/// Normal and choice rules plus formulas that must hold classically in every answer set.
#[derive(Clone, Debug, Default)]
pub struct GroundProgram {
    pub table: AtomTable,
    pub rules: Vec<GroundRule>,
    pub formula_constraints: Vec<GFormula>,
}

impl GroundProgram {
    pub fn n_atoms(&self) -> usize {
        self.table.len()
    }

    pub fn empty_world(&self) -> World {
        FixedBitSet::with_capacity(self.n_atoms())
    }

    pub fn world_from_atoms(&self, atoms: &[usize]) -> World {
        let mut w = self.empty_world();
        for &a in atoms {
            w.insert(a);
        }
        w
    }
}

/// Least model of the definite part: rules whose negative parts are ignored by the caller.
pub fn least_model(n: usize, rules: &[(Option<usize>, Vec<usize>)]) -> World {
    let mut m = FixedBitSet::with_capacity(n);
    // Watch lists keyed by positive body atoms.
    let mut missing: Vec<usize> = rules.iter().map(|(_, p)| p.len()).collect();
    let mut watch: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut queue = Vec::new();
    for (ri, (h, pos)) in rules.iter().enumerate() {
        for &a in pos {
            watch[a].push(ri);
        }
        if pos.is_empty() {
            if let Some(h) = h {
                queue.push(*h);
            }
        }
    }
    while let Some(a) = queue.pop() {
        if m.contains(a) {
            continue;
        }
        m.insert(a);
        for &ri in &watch[a] {
            missing[ri] -= 1;
            if missing[ri] == 0 {
                if let Some(h) = rules[ri].0 {
                    if !m.contains(h) {
                        queue.push(h);
                    }
                }
            }
        }
    }
    m
}

fn dedup_pos(pos: &[usize]) -> Vec<usize> {
    let mut p = pos.to_vec();
    p.sort_unstable();
    p.dedup();
    p
}

/// Gelfond-Lifschitz check: `w` satisfies every rule and constraint and equals the least model of
/// the reduct. Chosen atoms of a choice rule whose body holds become facts of the reduct.
pub fn is_stable(w: &World, p: &GroundProgram) -> bool {
    let n = p.n_atoms();
    if w.ones().any(|a| a >= n) {
        return false;
    }
    let mut reduct: Vec<(Option<usize>, Vec<usize>)> = Vec::new();
    for r in &p.rules {
        let body = r.body_holds(w);
        match &r.head {
            Head::None => {
                if body {
                    return false;
                }
            }
            Head::Atom(h) => {
                if body && !w.contains(*h) {
                    return false;
                }
                if r.neg.iter().all(|&a| !w.contains(a)) && r.other.iter().all(|g| holds(w, g)) {
                    reduct.push((Some(*h), dedup_pos(&r.pos)));
                }
            }
            Head::Choice { lo, hi, atoms } => {
                if body {
                    let k = atoms.iter().filter(|&&a| w.contains(a)).count();
                    if k < *lo || k > *hi {
                        return false;
                    }
                }
                if r.neg.iter().all(|&a| !w.contains(a)) && r.other.iter().all(|g| holds(w, g)) {
                    for &a in atoms.iter().filter(|&&a| w.contains(a)) {
                        reduct.push((Some(a), dedup_pos(&r.pos)));
                    }
                }
            }
        }
    }
    if !p.formula_constraints.iter().all(|f| holds(w, f)) {
        return false;
    }
    let m = least_model(n, &reduct);
    m == *w
}

/// Reference enumeration over all subsets of the atom universe.
pub fn brute_force_answer_sets(p: &GroundProgram) -> Vec<World> {
    let n = p.n_atoms();
    assert!(n <= 24, "brute force enumeration limited to 24 atoms");
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << n) {
        let mut w = FixedBitSet::with_capacity(n);
        for i in 0..n {
            if mask >> i & 1 == 1 {
                w.insert(i);
            }
        }
        if is_stable(&w, p) {
            out.push(w);
        }
    }
    sort_worlds(&mut out);
    out
}

/// Canonical world order: lexicographic on the atom bit vector in universe order, false first.
pub fn sort_worlds(ws: &mut [World]) {
    ws.sort_by(|a, b| {
        let n = a.len().max(b.len());
        for i in 0..n {
            match (a.contains(i), b.contains(i)) {
                (false, true) => return std::cmp::Ordering::Less,
                (true, false) => return std::cmp::Ordering::Greater,
                _ => {}
            }
        }
        std::cmp::Ordering::Equal
    });
}

/// Limits for answer set enumeration.
#[derive(Clone, Copy, Debug)]
pub struct EnumLimits {
    /// Stop after this many answer sets.
    pub max_models: Option<usize>,
    /// Abort after this many search nodes.
    pub max_nodes: u64,
}

impl Default for EnumLimits {
    fn default() -> Self {
        EnumLimits { max_models: None, max_nodes: 50_000_000 }
    }
}

struct Search<'a> {
    p: &'a GroundProgram,
    n: usize,
    guess: Vec<usize>,
    found: Vec<World>,
    limits: EnumLimits,
    nodes: u64,
}

/// Three-valued assignment to the guess atoms: `t` assigned true, `f` assigned false.
#[derive(Clone)]
struct Partial {
    t: FixedBitSet,
    f: FixedBitSet,
}

enum Prop {
    Conflict,
    Ok(World, World),
}

impl<'a> Search<'a> {
    /// Computes lower and upper bounds of the model for a partial guess, forcing guess atoms
    /// whose value is determined. Returns `Conflict` when no extension can be stable.
    fn propagate(&self, part: &mut Partial) -> Prop {
        loop {
            let (lower, upper) = self.bounds(part);
            let mut changed = false;
            for &g in &self.guess {
                let assigned_t = part.t.contains(g);
                let assigned_f = part.f.contains(g);
                let in_lower = lower.contains(g);
                let in_upper = upper.contains(g);
                if assigned_t && !in_upper {
                    return Prop::Conflict;
                }
                if assigned_f && in_lower {
                    return Prop::Conflict;
                }
                if !assigned_t && !assigned_f {
                    if !in_upper {
                        part.f.insert(g);
                        changed = true;
                    } else if in_lower {
                        part.t.insert(g);
                        changed = true;
                    }
                }
            }
            if !changed {
                if self.violated(&lower, &upper) {
                    return Prop::Conflict;
                }
                return Prop::Ok(lower, upper);
            }
        }
    }

    fn bounds(&self, part: &Partial) -> (World, World) {
        let n = self.n;
        // For evaluation of negative literals and aggregates: a guess atom is certainly true if
        // assigned true, possibly true unless assigned false. Non-guess atoms never occur there.
        let mut sure = part.t.clone();
        sure.grow(n);
        let mut maybe = FixedBitSet::with_capacity(n);
        maybe.insert_range(..);
        for a in part.f.ones() {
            maybe.set(a, false);
        }
        let mut lo_rules: Vec<(Option<usize>, Vec<usize>)> = Vec::new();
        let mut up_rules: Vec<(Option<usize>, Vec<usize>)> = Vec::new();
        for r in &self.p.rules {
            let neg_sure = r.neg.iter().all(|&a| part.f.contains(a));
            let neg_maybe = r.neg.iter().all(|&a| !part.t.contains(a));
            let other: Vec<Option<bool>> = r.other.iter().map(|g| eval3(g, &sure, &maybe)).collect();
            let other_sure = other.iter().all(|v| *v == Some(true));
            let other_maybe = other.iter().all(|v| *v != Some(false));
            let pos = dedup_pos(&r.pos);
            match &r.head {
                Head::None => {}
                Head::Atom(h) => {
                    if neg_sure && other_sure {
                        lo_rules.push((Some(*h), pos.clone()));
                    }
                    if neg_maybe && other_maybe {
                        up_rules.push((Some(*h), pos));
                    }
                }
                Head::Choice { atoms, .. } => {
                    for &a in atoms {
                        if neg_sure && other_sure && part.t.contains(a) {
                            lo_rules.push((Some(a), pos.clone()));
                        }
                        if neg_maybe && other_maybe && !part.f.contains(a) {
                            up_rules.push((Some(a), pos.clone()));
                        }
                    }
                }
            }
        }
        (least_model(n, &lo_rules), least_model(n, &up_rules))
    }

    fn violated(&self, lower: &World, upper: &World) -> bool {
        for r in &self.p.rules {
            let pos_sure = r.pos.iter().all(|&a| lower.contains(a));
            let neg_sure = r.neg.iter().all(|&a| !upper.contains(a));
            let other: Vec<Option<bool>> = r.other.iter().map(|g| eval3(g, lower, upper)).collect();
            let body_sure = pos_sure && neg_sure && other.iter().all(|v| *v == Some(true));
            match &r.head {
                Head::None => {
                    if body_sure {
                        return true;
                    }
                }
                Head::Atom(_) => {}
                Head::Choice { lo, hi, atoms } => {
                    if body_sure {
                        let t = atoms.iter().filter(|&&a| lower.contains(a)).count();
                        let u = atoms.iter().filter(|&&a| upper.contains(a)).count();
                        if t > *hi || u < *lo {
                            return true;
                        }
                    }
                }
            }
        }
        self.p.formula_constraints.iter().any(|f| eval3(f, lower, upper) == Some(false))
    }

    fn run(&mut self, part: Partial) -> Result<()> {
        if self.limits.max_models.is_some_and(|m| self.found.len() >= m) {
            return Ok(());
        }
        self.nodes += 1;
        if self.nodes > self.limits.max_nodes {
            return Err(Error::Solver(format!(
                "answer set enumeration exceeded {} search nodes ({} answer sets found)",
                self.limits.max_nodes,
                self.found.len()
            )));
        }
        let mut part = part;
        let (lower, upper) = match self.propagate(&mut part) {
            Prop::Conflict => return Ok(()),
            Prop::Ok(l, u) => (l, u),
        };
        let next = self.guess.iter().copied().find(|&g| !part.t.contains(g) && !part.f.contains(g));
        match next {
            None => {
                if lower == upper && is_stable(&lower, self.p) {
                    self.found.push(lower);
                }
                Ok(())
            }
            Some(g) => {
                let mut pf = part.clone();
                pf.f.insert(g);
                self.run(pf)?;
                let mut pt = part;
                pt.t.insert(g);
                self.run(pt)
            }
        }
    }
}

/// Answer sets of a ground program in canonical order.
pub fn enumerate_answer_sets(p: &GroundProgram, limits: EnumLimits) -> Result<Vec<World>> {
    let n = p.n_atoms();
    let mut is_guess = FixedBitSet::with_capacity(n);
    for r in &p.rules {
        if let Head::Choice { atoms, .. } = &r.head {
            for &a in atoms {
                is_guess.insert(a);
            }
        }
        for &a in &r.neg {
            is_guess.insert(a);
        }
        for g in &r.other {
            g.for_each_atom(&mut |a| is_guess.insert(a));
        }
    }
    let guess: Vec<usize> = is_guess.ones().collect();
    let mut s = Search {
        p,
        n,
        guess,
        found: Vec::new(),
        limits,
        nodes: 0,
    };
    let part = Partial { t: FixedBitSet::with_capacity(n), f: FixedBitSet::with_capacity(n) };
    s.run(part)?;
    let mut found = s.found;
    sort_worlds(&mut found);
    found.dedup();
    Ok(found)
}
