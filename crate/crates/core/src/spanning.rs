//! Spanning program: weights are removed and each weighted formula is compiled into a
//! nondeterministic fragment, so that the answer sets are the possible worlds.

use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::grounder::{GroundAnnotation, GroundItem, GroundedProgram};
use crate::syntax::{Atom, Formula, Origin, Weight, RESERVED_PREFIX};
use crate::worlds::{GFormula, GroundProgram, GroundRule, Head};

pub const SPAN_HELPER_PREFIX: &str = "hp__span_";

/// One weighted formula of the program.
#[derive(Clone, Debug)]
pub struct WeightedEntry {
    pub formula: GFormula,
    pub source: Formula,
    /// `None` for `[.]` spanning-only formulas.
    pub weight: Option<Weight>,
    pub cond: Option<(GFormula, Formula)>,
    /// Only used to state independence.
    pub volatile: bool,
    pub origin: Origin,
}

impl WeightedEntry {
    pub fn describe(&self) -> String {
        let w = match self.weight {
            Some(w) => w.to_string(),
            None => ".".into(),
        };
        match &self.cond {
            Some((_, c)) => format!("[{w}|{c}] {}.", self.source),
            None => format!("[{w}] {}.", self.source),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SpanningProgram {
    pub ground: GroundProgram,
    pub weighted: Vec<WeightedEntry>,
    /// Atoms hidden from world display.
    pub helper_atoms: FixedBitSet,
    /// Groups of indices into `weighted`, after merging automatically detected independence.
    pub mutual_groups: Vec<Vec<usize>>,
    pub pairwise_groups: Vec<Vec<usize>>,
    /// Groups exactly as declared.
    pub declared_mutual: Vec<Vec<usize>>,
    pub declared_pairwise: Vec<Vec<usize>>,
    /// Automatically detected mutually independent weighted atoms.
    pub auto_indep: Vec<usize>,
}

impl SpanningProgram {
    pub fn is_helper(&self, a: usize) -> bool {
        self.helper_atoms.contains(a)
    }

    /// Prints the spanning program in input syntax.
    pub fn show(&self) -> String {
        let mut s = String::new();
        for r in &self.ground.rules {
            s.push_str(&r.display(&self.ground.table));
            s.push('\n');
        }
        for f in &self.ground.formula_constraints {
            s.push_str(&f.display(&self.ground.table));
            s.push_str(".\n");
        }
        s
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SpanOptions {
    pub auto_indeps: bool,
}

impl Default for SpanOptions {
    fn default() -> Self {
        SpanOptions { auto_indeps: true }
    }
}

struct Builder {
    g: GroundProgram,
    defined: BTreeSet<usize>,
    /// Atoms of compound formulas that need a choice if nothing else defines them.
    open: Vec<usize>,
    span_counter: usize,
}

impl Builder {
    fn intern(&mut self, a: &Atom) -> usize {
        self.g.table.intern(a)
    }

    fn gformula(&mut self, f: &Formula) -> Result<GFormula> {
        GFormula::from_formula(f, &mut self.g.table)
    }

    fn push_rule(&mut self, r: GroundRule) {
        match &r.head {
            Head::Atom(a) => {
                self.defined.insert(*a);
            }
            Head::Choice { atoms, .. } => self.defined.extend(atoms.iter().copied()),
            Head::None => {}
        }
        self.g.rules.push(r);
    }

    fn choice(&mut self, a: usize) {
        self.push_rule(GroundRule::choice(vec![a], 0, 1));
    }

    /// Converts a ground rule body. `None` means the body can never hold.
    fn body(&mut self, body: &[Formula], r: &mut GroundRule) -> Result<bool> {
        for b in body {
            match b {
                Formula::True => {}
                Formula::False => return Ok(false),
                Formula::Atom(_) | Formula::StrongNeg(_) => {
                    let GFormula::Atom(a) = self.gformula(b)? else { unreachable!() };
                    r.pos.push(a);
                }
                Formula::Not(g) if matches!(g.as_ref(), Formula::Atom(_) | Formula::StrongNeg(_)) => {
                    let GFormula::Atom(a) = self.gformula(g)? else { unreachable!() };
                    r.neg.push(a);
                }
                Formula::Count { .. } | Formula::Not(_) => {
                    let gf = self.gformula(b)?;
                    r.other.push(gf);
                }
                Formula::And(gs) => {
                    if !self.body(gs, r)? {
                        return Ok(false);
                    }
                }
                other => {
                    let gf = self.gformula(other)?;
                    r.other.push(gf);
                }
            }
        }
        Ok(true)
    }

    fn choice_head(&mut self, f: &Formula) -> Result<Head> {
        let Formula::Count { lower, elems, upper } = f else { unreachable!() };
        let mut atoms = Vec::new();
        for e in elems {
            if !e.cond.is_empty() {
                return Err(Error::Unsupported(format!("choice element '{e}' keeps a non-domain condition")));
            }
            match &e.lit {
                Formula::Atom(_) | Formula::StrongNeg(_) => {
                    let GFormula::Atom(a) = self.gformula(&e.lit)? else { unreachable!() };
                    if !atoms.contains(&a) {
                        atoms.push(a);
                    }
                }
                other => return Err(Error::Unsupported(format!("choice element '{other}' is not an atom"))),
            }
        }
        let n = atoms.len();
        let lo = lower.unwrap_or(0).max(0) as usize;
        let hi = upper.map(|u| u.max(0) as usize).unwrap_or(n).min(n);
        Ok(Head::Choice { lo, hi, atoms })
    }

    /// Adds an unannotated formula (or a certain weighted one) to the program.
    fn certain(&mut self, f: &Formula) -> Result<()> {
        match f {
            Formula::True => Ok(()),
            Formula::Atom(_) | Formula::StrongNeg(_) => {
                let GFormula::Atom(a) = self.gformula(f)? else { unreachable!() };
                self.push_rule(GroundRule::fact(a));
                Ok(())
            }
            Formula::Count { .. } => {
                let head = self.choice_head(f)?;
                self.push_rule(GroundRule { head, pos: Vec::new(), neg: Vec::new(), other: Vec::new() });
                Ok(())
            }
            Formula::Rule { head, body } => {
                let head = match head.as_deref() {
                    None => Head::None,
                    Some(Formula::Atom(_)) | Some(Formula::StrongNeg(_)) => {
                        let GFormula::Atom(a) = self.gformula(head.as_deref().unwrap())? else { unreachable!() };
                        Head::Atom(a)
                    }
                    Some(c @ Formula::Count { .. }) => self.choice_head(c)?,
                    Some(Formula::True) => return Ok(()),
                    Some(Formula::False) => Head::None,
                    Some(other) => {
                        return Err(Error::Unsupported(format!("rule head '{other}' is not supported; use an atom or a choice")))
                    }
                };
                let mut r = GroundRule { head, pos: Vec::new(), neg: Vec::new(), other: Vec::new() };
                if self.body(body, &mut r)? {
                    self.push_rule(r);
                }
                Ok(())
            }
            other => {
                let gf = self.gformula(other)?;
                self.open.extend(gf.atoms());
                self.g.formula_constraints.push(gf);
                Ok(())
            }
        }
    }

    /// Spanning fragment of an uncertain rule `h :- b`: a helper atom selects whether the rule
    /// holds; without it the body holds and the head does not.
    fn span_rule(&mut self, head: &Formula, body: &[Formula]) -> Result<()> {
        let h = match head {
            Formula::Atom(_) | Formula::StrongNeg(_) => {
                let GFormula::Atom(h) = self.gformula(head)? else { unreachable!() };
                h
            }
            other => {
                return Err(Error::Unsupported(format!("weighted rule head '{other}' is not supported; use an atom")))
            }
        };
        let g = self.intern(&Atom::prop(format!("{SPAN_HELPER_PREFIX}{}", self.span_counter)));
        self.span_counter += 1;
        self.choice(g);
        let mut r = GroundRule { head: Head::Atom(h), pos: vec![g], neg: Vec::new(), other: Vec::new() };
        if !self.body(body, &mut r)? {
            return Ok(());
        }
        // Each body literal must hold when the rule is violated.
        let mut tmp = GroundRule { head: Head::None, pos: Vec::new(), neg: Vec::new(), other: Vec::new() };
        self.body(body, &mut tmp)?;
        for &a in &tmp.pos {
            self.push_rule(GroundRule { head: Head::None, pos: Vec::new(), neg: vec![g, a], other: Vec::new() });
        }
        for &a in &tmp.neg {
            self.push_rule(GroundRule { head: Head::None, pos: vec![a], neg: vec![g], other: Vec::new() });
        }
        for o in &tmp.other {
            self.push_rule(GroundRule {
                head: Head::None,
                pos: Vec::new(),
                neg: vec![g],
                other: vec![GFormula::not(o.clone())],
            });
        }
        self.push_rule(GroundRule { head: Head::None, pos: vec![h], neg: vec![g], other: Vec::new() });
        self.push_rule(r);
        Ok(())
    }

    fn span_uncertain(&mut self, f: &Formula) -> Result<()> {
        match f {
            Formula::Atom(_) | Formula::StrongNeg(_) => {
                let GFormula::Atom(a) = self.gformula(f)? else { unreachable!() };
                self.choice(a);
                Ok(())
            }
            Formula::Rule { head: Some(h), body } if !body.is_empty() => self.span_rule(h, body),
            other => {
                let gf = self.gformula(other)?;
                self.open.extend(gf.atoms());
                Ok(())
            }
        }
    }
}

fn is_certain(w: &Weight) -> bool {
    w.lo() >= 1.0
}

/// Builds the spanning program of a grounded program.
pub fn build_spanning_program(prog: &GroundedProgram, opts: SpanOptions) -> Result<SpanningProgram> {
    let mut b = Builder { g: GroundProgram::default(), defined: BTreeSet::new(), open: Vec::new(), span_counter: 0 };
    let mut weighted = Vec::new();
    let mut entry_of_item: Vec<Option<usize>> = vec![None; prog.items.len()];

    for (idx, it) in prog.items.iter().enumerate() {
        let GroundItem { formula, ann, origin, volatile } = it;
        let Some(ann) = ann else {
            b.certain(formula)?;
            continue;
        };
        let gf = b.gformula(formula)?;
        let (weight, cond) = match ann {
            GroundAnnotation::Weight(w) => (Some(*w), None),
            GroundAnnotation::Span => (None, None),
            GroundAnnotation::Cond(w, c) => (Some(*w), Some((b.gformula(c)?, c.clone()))),
        };
        entry_of_item[idx] = Some(weighted.len());
        weighted.push(WeightedEntry {
            formula: gf,
            source: formula.clone(),
            weight,
            cond: cond.clone(),
            volatile: *volatile,
            origin: origin.clone(),
        });
        if *volatile {
            continue;
        }
        match (&weight, &cond) {
            (Some(w), None) if is_certain(w) => b.certain(formula)?,
            (_, None) => b.span_uncertain(formula)?,
            (_, Some((cg, _))) => {
                let mut atoms = weighted.last().unwrap().formula.atoms();
                atoms.extend(cg.atoms());
                b.open.extend(atoms);
            }
        }
    }

    let open = std::mem::take(&mut b.open);
    let mut seen = BTreeSet::new();
    for a in open {
        if !b.defined.contains(&a) && seen.insert(a) {
            b.choice(a);
        }
    }

    let n = b.g.table.len();
    let mut helper_atoms = FixedBitSet::with_capacity(n);
    for (i, a) in b.g.table.atoms().iter().enumerate() {
        if a.pred.starts_with(RESERVED_PREFIX) {
            helper_atoms.insert(i);
        }
    }

    let map_group = |members: &[usize]| -> Vec<usize> {
        let mut v: Vec<usize> = members.iter().filter_map(|&i| entry_of_item[i]).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let declared_mutual: Vec<Vec<usize>> =
        prog.groups.iter().filter(|g| !g.pairwise).map(|g| map_group(&g.members)).collect();
    let declared_pairwise: Vec<Vec<usize>> =
        prog.groups.iter().filter(|g| g.pairwise).map(|g| map_group(&g.members)).collect();

    let mut sp = SpanningProgram {
        ground: b.g,
        weighted,
        helper_atoms,
        mutual_groups: Vec::new(),
        pairwise_groups: Vec::new(),
        declared_mutual,
        declared_pairwise,
        auto_indep: Vec::new(),
    };
    if opts.auto_indeps {
        sp.auto_indep = detect_auto_indep(&sp);
    }
    merge_groups(&mut sp);
    Ok(sp)
}

/// Weighted atoms with an unconditional weight below 1 whose atom is constrained by nothing
/// but its own spanning choice: it occurs in no other rule head, integrity constraint, weighted
/// formula or formula constraint. Such atoms are mutually independent.
pub fn detect_auto_indep(sp: &SpanningProgram) -> Vec<usize> {
    let n = sp.ground.table.len();
    let mut head_count = vec![0usize; n];
    let mut blocked = FixedBitSet::with_capacity(n);
    for r in &sp.ground.rules {
        match &r.head {
            Head::Atom(a) => head_count[*a] += 1,
            Head::Choice { atoms, .. } => {
                for &a in atoms {
                    head_count[a] += 1;
                }
                if atoms.len() > 1 {
                    atoms.iter().for_each(|&a| blocked.insert(a));
                }
            }
            Head::None => {
                r.pos.iter().chain(&r.neg).for_each(|&a| blocked.insert(a));
                r.other.iter().for_each(|g| g.for_each_atom(&mut |a| blocked.insert(a)));
            }
        }
        if !matches!(r.head, Head::None) {
            r.other.iter().for_each(|g| g.for_each_atom(&mut |a| blocked.insert(a)));
        }
    }
    for f in &sp.ground.formula_constraints {
        f.for_each_atom(&mut |a| blocked.insert(a));
    }
    let mut entry_uses = vec![0usize; n];
    for e in &sp.weighted {
        for a in e.formula.atoms() {
            entry_uses[a] += 1;
        }
        if let Some((c, _)) = &e.cond {
            c.for_each_atom(&mut |a| blocked.insert(a));
        }
    }
    let mut out = Vec::new();
    for (i, e) in sp.weighted.iter().enumerate() {
        let (Some(w), None, false) = (e.weight, &e.cond, e.volatile) else { continue };
        if w.hi() >= 1.0 {
            continue;
        }
        let GFormula::Atom(a) = e.formula else { continue };
        if head_count[a] == 1 && entry_uses[a] == 1 && !blocked.contains(a) {
            out.push(i);
        }
    }
    out
}

fn merge_groups(sp: &mut SpanningProgram) {
    let auto = &sp.auto_indep;
    let union = |g: &Vec<usize>| -> Vec<usize> {
        let mut v: Vec<usize> = g.iter().chain(auto.iter()).copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut mutual: Vec<Vec<usize>> = Vec::new();
    if auto.len() > 1 {
        mutual.push(auto.clone());
    }
    for g in &sp.declared_mutual {
        let u = union(g);
        if u.len() > 1 && !mutual.contains(&u) {
            mutual.push(u);
        }
    }
    let mut pairwise: Vec<Vec<usize>> = Vec::new();
    for g in &sp.declared_pairwise {
        let u = union(g);
        if u.len() > 1 && !pairwise.contains(&u) && !mutual.contains(&u) {
            pairwise.push(u);
        }
    }
    sp.mutual_groups = mutual;
    sp.pairwise_groups = pairwise;
}
