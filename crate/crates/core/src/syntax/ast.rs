use std::fmt;

/// Argument term of an atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(String),
    Int(i64),
    Var(String),
    /// `lo..hi`; bounds are integer terms or variables bound to integers.
    Interval(Box<Term>, Box<Term>),
    /// `a;b;c` inside an argument position.
    Pool(Vec<Term>),
    Compound(String, Vec<Term>),
}

impl Term {
    pub fn is_ground(&self) -> bool {
        match self {
            Term::Const(_) | Term::Int(_) => true,
            Term::Var(_) | Term::Interval(..) | Term::Pool(_) => false,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone())
                }
            }
            Term::Interval(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Term::Pool(ts) | Term::Compound(_, ts) => ts.iter().for_each(|t| t.collect_vars(out)),
            Term::Const(_) | Term::Int(_) => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Atom {
        Atom { pred: pred.into(), args }
    }

    pub fn prop(pred: impl Into<String>) -> Atom {
        Atom { pred: pred.into(), args: Vec::new() }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn collect_vars(&self, out: &mut Vec<String>) {
        self.args.iter().for_each(|t| t.collect_vars(out));
    }

    pub fn signature(&self) -> (String, usize) {
        (self.pred.clone(), self.args.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// One element of a count aggregate: a literal with optional condition literals (`a(X) : d(X)`).
#[derive(Clone, Debug, PartialEq)]
pub struct CountElem {
    pub lit: Formula,
    pub cond: Vec<Formula>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    /// Classical negation; only ever wraps an atom.
    StrongNeg(Atom),
    /// Default negation.
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    /// `head :- body`. A missing head makes an integrity constraint.
    Rule { head: Option<Box<Formula>>, body: Vec<Formula> },
    Count { lower: Option<i64>, elems: Vec<CountElem>, upper: Option<i64> },
    Cmp(CmpOp, Term, Term),
}

impl Formula {
    pub fn atom(a: Atom) -> Formula {
        Formula::Atom(a)
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn is_rule(&self) -> bool {
        matches!(self, Formula::Rule { .. })
    }

    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) | Formula::StrongNeg(a) => a.collect_vars(out),
            Formula::Not(f) => f.collect_vars(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_vars(out)),
            Formula::Rule { head, body } => {
                if let Some(h) = head {
                    h.collect_vars(out);
                }
                body.iter().for_each(|f| f.collect_vars(out));
            }
            Formula::Count { elems, .. } => {
                for e in elems {
                    e.lit.collect_vars(out);
                    e.cond.iter().for_each(|c| c.collect_vars(out));
                }
            }
            Formula::Cmp(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn vars(&self) -> Vec<String> {
        let mut v = Vec::new();
        self.collect_vars(&mut v);
        v
    }

    /// Visits every atom occurrence (plain or strongly negated) in the formula.
    pub fn for_each_atom<'a>(&'a self, f: &mut dyn FnMut(&'a Atom, bool)) {
        match self {
            Formula::True | Formula::False | Formula::Cmp(..) => {}
            Formula::Atom(a) => f(a, false),
            Formula::StrongNeg(a) => f(a, true),
            Formula::Not(g) => g.for_each_atom(f),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.for_each_atom(f)),
            Formula::Rule { head, body } => {
                if let Some(h) = head {
                    h.for_each_atom(f);
                }
                body.iter().for_each(|g| g.for_each_atom(f));
            }
            Formula::Count { elems, .. } => {
                for e in elems {
                    e.lit.for_each_atom(f);
                    e.cond.iter().for_each(|c| c.for_each_atom(f));
                }
            }
        }
    }
}

/// Point or interval probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weight {
    Point(f64),
    Interval(f64, f64),
}

impl Weight {
    pub fn lo(self) -> f64 {
        match self {
            Weight::Point(w) => w,
            Weight::Interval(l, _) => l,
        }
    }

    pub fn hi(self) -> f64 {
        match self {
            Weight::Point(w) => w,
            Weight::Interval(_, h) => h,
        }
    }

    pub fn mid(self) -> f64 {
        0.5 * (self.lo() + self.hi())
    }

    pub fn is_certain(self) -> bool {
        self.lo() >= 1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnnKind {
    Weight(Weight),
    Cond(Weight, Formula),
    Query,
    CondQuery(Formula),
    /// `[.]`: spanning formula only, no weight.
    Span,
    /// `[[:]]`: weight 1/n for each of n instances.
    Distribute,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Annotation {
    pub kind: AnnKind,
    pub level: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Origin {
    pub file: String,
    pub line: usize,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedFormula {
    pub annotation: Option<Annotation>,
    pub formula: Formula,
    pub origin: Origin,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedDisjunction {
    pub alternatives: Vec<(f64, Atom)>,
    pub body: Vec<Formula>,
    pub origin: Origin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    Indep,
    PIndep,
    IndepVolat,
    PIndepVolat,
}

impl BlockKind {
    pub fn is_volatile(self) -> bool {
        matches!(self, BlockKind::IndepVolat | BlockKind::PIndepVolat)
    }

    pub fn is_pairwise(self) -> bool {
        matches!(self, BlockKind::PIndep | BlockKind::PIndepVolat)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaBlock {
    pub kind: BlockKind,
    pub items: Vec<AnnotatedFormula>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Statement {
    Formula(AnnotatedFormula),
    Block(MetaBlock),
    Disjunction(AnnotatedDisjunction),
    /// `#domain p(X).`
    Domain(Atom),
    /// `#volat ... #endVolat`: used for domains only, removed before spanning.
    Volat(Vec<AnnotatedFormula>),
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T], sep: &str) -> fmt::Result {
    for (i, t) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{t}")?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => f.write_str(c),
            Term::Int(i) => write!(f, "{i}"),
            Term::Var(v) => f.write_str(v),
            Term::Interval(a, b) => write!(f, "{a}..{b}"),
            Term::Pool(ts) => write_list(f, ts, ";"),
            Term::Compound(name, args) => {
                write!(f, "{name}(")?;
                write_list(f, args, ",")?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            write_list(f, &self.args, ",")?;
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for CountElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.lit)?;
        for c in &self.cond {
            write!(f, ":{c}")?;
        }
        Ok(())
    }
}

impl Formula {
    fn precedence(&self) -> u8 {
        match self {
            Formula::Rule { .. } => 0,
            Formula::Or(_) => 1,
            Formula::And(_) => 2,
            _ => 3,
        }
    }

    fn fmt_child(&self, child: &Formula, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if child.precedence() <= self.precedence() {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::StrongNeg(a) => write!(f, "-{a}"),
            Formula::Not(g) => {
                f.write_str("not ")?;
                if g.precedence() < 3 {
                    write!(f, "({g})")
                } else {
                    write!(f, "{g}")
                }
            }
            Formula::And(gs) | Formula::Or(gs) => {
                let sep = if matches!(self, Formula::And(_)) { " & " } else { " | " };
                if gs.is_empty() {
                    return f.write_str(if matches!(self, Formula::And(_)) { "true" } else { "false" });
                }
                for (i, g) in gs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    self.fmt_child(g, f)?;
                }
                Ok(())
            }
            Formula::Rule { head, body } => {
                if let Some(h) = head {
                    write!(f, "{h}")?;
                    if body.is_empty() {
                        return Ok(());
                    }
                    f.write_str(" ")?;
                }
                f.write_str(":- ")?;
                for (i, b) in body.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    if b.precedence() < 3 {
                        write!(f, "({b})")?;
                    } else {
                        write!(f, "{b}")?;
                    }
                }
                Ok(())
            }
            Formula::Count { lower, elems, upper } => {
                if let Some(l) = lower {
                    write!(f, "{l}")?;
                }
                f.write_str("{")?;
                write_list(f, elems, ", ")?;
                f.write_str("}")?;
                if let Some(u) = upper {
                    write!(f, "{u}")?;
                }
                Ok(())
            }
            Formula::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
        }
    }
}

/// Formats a probability with at most 15 significant digits and no trailing zeros.
pub fn format_prob(p: f64) -> String {
    format_prob_digits(p, 15)
}

/// `p` rounded to `digits` significant digits, without trailing zeros.
pub fn format_prob_digits(p: f64, digits: i32) -> String {
    if p == 0.0 || !p.is_finite() {
        return if p.is_nan() { "NaN".into() } else { format!("{}", p.abs()) };
    }
    let mag = p.abs().log10().floor() as i32;
    let decimals = (digits - 1 - mag).max(0) as usize;
    let s = format!("{:.*}", decimals, p);
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Point(w) => f.write_str(&format_prob(*w)),
            Weight::Interval(l, h) => write!(f, "{};{}", format_prob(*l), format_prob(*h)),
        }
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lvl = self.level.clamp(1, 3) as usize;
        f.write_str(&"[".repeat(lvl))?;
        match &self.kind {
            AnnKind::Weight(w) => write!(f, "{w}")?,
            AnnKind::Cond(w, c) => write!(f, "{w}|{c}")?,
            AnnKind::Query => f.write_str("?")?,
            AnnKind::CondQuery(c) => write!(f, "?|{c}")?,
            AnnKind::Span => f.write_str(".")?,
            AnnKind::Distribute => f.write_str(":")?,
        }
        f.write_str(&"]".repeat(lvl))
    }
}

impl fmt::Display for AnnotatedFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(a) = &self.annotation {
            write!(f, "{a} ")?;
        }
        write!(f, "{}.", self.formula)
    }
}
