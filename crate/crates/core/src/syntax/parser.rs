use super::ast::*;
use super::lexer::{tokenize, Tok};
use crate::error::{Error, Result};

/// Which kind of input file a text comes from; controls which annotations are legal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileKind {
    Background,
    Query,
    Hypothesis,
    Examples,
}

impl FileKind {
    pub fn from_path(path: &str) -> FileKind {
        match std::path::Path::new(path).extension().and_then(|e| e.to_str()) {
            Some("query") => FileKind::Query,
            Some("hypoth") => FileKind::Hypothesis,
            Some("examples") => FileKind::Examples,
            _ => FileKind::Background,
        }
    }
}

pub const RESERVED_PREFIX: &str = "hp__";

const UNSUPPORTED_META: [&str; 14] = [
    "gIndep",
    "endGIndep",
    "indepGroups",
    "endIndepGroups",
    "pIndepGroups",
    "endPIndepGroups",
    "indepGroupsVolat",
    "pIndepGroupsVolat",
    "scala",
    "endScala",
    "external",
    "dontExternalize",
    "endDontExternalize",
    "script",
];

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    file: &'a str,
    line: usize,
    fresh: &'a mut usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::parse_at(msg, self.file, self.line))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<()> {
        if self.eat(t) {
            Ok(())
        } else {
            self.err(format!("expected {t:?}, found {:?}", self.peek()))
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn check_name(&self, name: &str) -> Result<()> {
        if name.starts_with(RESERVED_PREFIX) {
            return self.err(format!("identifier '{name}' uses the reserved prefix '{RESERVED_PREFIX}'"));
        }
        Ok(())
    }

    /// statement := [head] ':-' body | expr
    fn statement(&mut self) -> Result<Formula> {
        let has_if = self.toks.contains(&Tok::If);
        let f = if has_if {
            let head = if self.peek() == Some(&Tok::If) { None } else { Some(Box::new(self.expr()?)) };
            self.expect(&Tok::If)?;
            let mut body = vec![self.expr()?];
            while self.eat(&Tok::Comma) {
                body.push(self.expr()?);
            }
            Formula::Rule { head, body }
        } else {
            self.expr()?
        };
        if !self.at_end() {
            return self.err(format!("unexpected token {:?}", self.peek()));
        }
        Ok(f)
    }

    /// expr := or ('->' expr | '<-' expr)?
    fn expr(&mut self) -> Result<Formula> {
        let lhs = self.or()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.expr()?;
            return Ok(Formula::Or(vec![Formula::not(lhs), rhs]));
        }
        if self.eat(&Tok::LArrow) {
            let rhs = self.expr()?;
            return Ok(Formula::Or(vec![Formula::not(rhs), lhs]));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula> {
        let mut parts = vec![self.and()?];
        while self.eat(&Tok::Pipe) {
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::Or(parts) })
    }

    fn and(&mut self) -> Result<Formula> {
        let mut parts = vec![self.unary()?];
        while self.eat(&Tok::Amp) {
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek().cloned() {
            Some(Tok::Ident(w)) if w == "not" => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Some(Tok::Ident(w)) if w == "true" && !matches!(self.peek_at(1), Some(Tok::LParen)) => {
                self.bump();
                Ok(Formula::True)
            }
            Some(Tok::Ident(w)) if w == "false" && !matches!(self.peek_at(1), Some(Tok::LParen)) => {
                self.bump();
                Ok(Formula::False)
            }
            Some(Tok::Minus) if matches!(self.peek_at(1), Some(Tok::Ident(_))) => {
                self.bump();
                let a = self.atom()?;
                Ok(Formula::StrongNeg(a))
            }
            Some(Tok::LParen) => {
                self.bump();
                let f = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(f)
            }
            Some(Tok::LBrace) => self.count(None),
            Some(Tok::Meta(m)) if m == "count" => self.count(None),
            Some(Tok::Int(n))
                if matches!(self.peek_at(1), Some(Tok::LBrace))
                    || matches!(self.peek_at(1), Some(Tok::Meta(m)) if m == "count") =>
            {
                self.bump();
                self.count(Some(n))
            }
            Some(Tok::Ident(_)) => {
                let save = self.pos;
                let t = self.term()?;
                if let Some(Tok::Cmp(op)) = self.peek().cloned() {
                    self.bump();
                    let rhs = self.term()?;
                    return Ok(Formula::Cmp(op, t, rhs));
                }
                self.pos = save;
                Ok(Formula::Atom(self.atom()?))
            }
            Some(Tok::Var(_)) | Some(Tok::Int(_)) | Some(Tok::Minus) | Some(Tok::Underscore) => {
                let t = self.term()?;
                match self.bump() {
                    Some(Tok::Cmp(op)) => {
                        let rhs = self.term()?;
                        Ok(Formula::Cmp(op, t, rhs))
                    }
                    other => self.err(format!("expected comparison operator, found {other:?}")),
                }
            }
            other => self.err(format!("unexpected token {other:?}")),
        }
    }

    fn count(&mut self, lower: Option<i64>) -> Result<Formula> {
        if matches!(self.peek(), Some(Tok::Meta(m)) if m == "count") {
            self.bump();
        }
        self.expect(&Tok::LBrace)?;
        let mut elems = Vec::new();
        if !self.eat(&Tok::RBrace) {
            loop {
                let lit = self.literal()?;
                let mut cond = Vec::new();
                while self.eat(&Tok::Colon) {
                    cond.push(self.literal()?);
                }
                elems.push(CountElem { lit, cond });
                if self.eat(&Tok::Comma) || self.eat(&Tok::Semi) {
                    continue;
                }
                self.expect(&Tok::RBrace)?;
                break;
            }
        }
        let upper = match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.bump();
                Some(n)
            }
            _ => None,
        };
        if let (Some(l), Some(u)) = (lower, upper) {
            if l > u {
                return self.err(format!("count bounds {l} > {u}"));
            }
        }
        Ok(Formula::Count { lower, elems, upper })
    }

    /// literal := 'not' literal | '-' atom | atom | comparison
    fn literal(&mut self) -> Result<Formula> {
        match self.peek() {
            Some(Tok::Ident(w)) if w == "not" => {
                self.bump();
                Ok(Formula::not(self.literal()?))
            }
            Some(Tok::Minus) if matches!(self.peek_at(1), Some(Tok::Ident(_))) => {
                self.bump();
                Ok(Formula::StrongNeg(self.atom()?))
            }
            Some(Tok::Ident(_)) => {
                let save = self.pos;
                let t = self.term()?;
                if let Some(Tok::Cmp(op)) = self.peek().cloned() {
                    self.bump();
                    let rhs = self.term()?;
                    return Ok(Formula::Cmp(op, t, rhs));
                }
                self.pos = save;
                Ok(Formula::Atom(self.atom()?))
            }
            _ => {
                let t = self.term()?;
                match self.bump() {
                    Some(Tok::Cmp(op)) => Ok(Formula::Cmp(op, t, self.term()?)),
                    other => self.err(format!("expected literal, found {other:?}")),
                }
            }
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        match self.bump() {
            Some(Tok::Ident(name)) => {
                self.check_name(&name)?;
                let args = if self.eat(&Tok::LParen) { self.args()? } else { Vec::new() };
                Ok(Atom { pred: name, args })
            }
            other => self.err(format!("expected atom, found {other:?}")),
        }
    }

    /// args := arg (',' arg)* ')'; arg := term (';' term)*
    fn args(&mut self) -> Result<Vec<Term>> {
        let mut args = Vec::new();
        loop {
            let mut pool = vec![self.term()?];
            while self.eat(&Tok::Semi) {
                pool.push(self.term()?);
            }
            args.push(if pool.len() == 1 { pool.pop().unwrap() } else { Term::Pool(pool) });
            if self.eat(&Tok::Comma) {
                continue;
            }
            self.expect(&Tok::RParen)?;
            return Ok(args);
        }
    }

    fn term(&mut self) -> Result<Term> {
        let t = self.simple_term()?;
        if self.eat(&Tok::DotDot) {
            let hi = self.simple_term()?;
            return Ok(Term::Interval(Box::new(t), Box::new(hi)));
        }
        Ok(t)
    }

    fn simple_term(&mut self) -> Result<Term> {
        match self.bump() {
            Some(Tok::Int(n)) => Ok(Term::Int(n)),
            Some(Tok::Minus) => match self.bump() {
                Some(Tok::Int(n)) => Ok(Term::Int(-n)),
                other => self.err(format!("expected integer after '-', found {other:?}")),
            },
            Some(Tok::Var(v)) => Ok(Term::Var(v)),
            Some(Tok::Underscore) => {
                *self.fresh += 1;
                Ok(Term::Var(format!("Anon__{}", self.fresh)))
            }
            Some(Tok::Ident(name)) => {
                self.check_name(&name)?;
                if self.eat(&Tok::LParen) {
                    Ok(Term::Compound(name, self.args()?))
                } else {
                    Ok(Term::Const(name))
                }
            }
            other => self.err(format!("expected term, found {other:?}")),
        }
    }
}

/// Parses a single formula (no annotation, no trailing dot).
pub fn parse_formula(src: &str, file: &str, line: usize) -> Result<Formula> {
    let mut fresh = 0;
    parse_formula_with(src, file, line, &mut fresh)
}

fn parse_formula_with(src: &str, file: &str, line: usize, fresh: &mut usize) -> Result<Formula> {
    let toks = tokenize(src).map_err(|m| Error::parse_at(m, file, line))?;
    if toks.is_empty() {
        return Err(Error::parse_at("empty formula", file, line));
    }
    let mut p = Parser { toks, pos: 0, file, line, fresh };
    let f = p.statement()?;
    check_cond_pr(&f, true).map_err(|m| Error::parse_at(m, file, line))?;
    Ok(f)
}

fn is_cond_pr(a: &Atom) -> bool {
    a.pred == "condPr" || a.pred == "condProb"
}

/// `condPr(f, c)` is only legal as the whole head of a rule or as a whole formula.
fn check_cond_pr(f: &Formula, top: bool) -> std::result::Result<(), String> {
    let bad = |a: &Atom| {
        if is_cond_pr(a) {
            Err(format!("'{}' is reserved and may only be the head of an annotated formula", a.pred))
        } else {
            Ok(())
        }
    };
    match f {
        Formula::Atom(a) => {
            if top {
                if is_cond_pr(a) && a.args.len() != 2 {
                    return Err(format!("'{}' takes exactly two arguments", a.pred));
                }
                Ok(())
            } else {
                bad(a)
            }
        }
        Formula::Rule { head, body } => {
            if let Some(h) = head {
                check_cond_pr(h, top)?;
            }
            body.iter().try_for_each(|b| check_cond_pr(b, false))
        }
        _ => {
            let mut res = Ok(());
            f.for_each_atom(&mut |a, _| {
                if res.is_ok() {
                    res = bad(a);
                }
            });
            res
        }
    }
}

pub fn formula_uses_cond_pr(f: &Formula) -> bool {
    let mut found = false;
    f.for_each_atom(&mut |a, _| found |= is_cond_pr(a));
    found
}

fn parse_prob(s: &str, file: &str, line: usize) -> Result<f64> {
    let s = s.trim();
    let ok_chars = !s.is_empty() && s.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '-' | '+'));
    let v: f64 = if ok_chars { s.parse().ok() } else { None }
        .ok_or_else(|| Error::parse_at(format!("malformed weight '{s}'"), file, line))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::parse_at(format!("weight {v} outside [0,1]"), file, line));
    }
    Ok(v)
}

fn parse_weight(s: &str, file: &str, line: usize) -> Result<Weight> {
    match s.split_once(';') {
        Some((lo, hi)) => {
            let (lo, hi) = (parse_prob(lo, file, line)?, parse_prob(hi, file, line)?);
            if hi < lo {
                return Err(Error::parse_at(format!("interval weight upper bound {hi} below lower bound {lo}"), file, line));
            }
            Ok(Weight::Interval(lo, hi))
        }
        None => Ok(Weight::Point(parse_prob(s, file, line)?)),
    }
}

/// Splits a leading annotation `[..]`, `[[..]]` or `[[[..]]]` off `src`.
fn split_annotation<'s>(src: &'s str, file: &str, line: usize) -> Result<(Option<(u8, &'s str)>, &'s str)> {
    let s = src.trim_start();
    if !s.starts_with('[') {
        return Ok((None, s));
    }
    let level = s.chars().take_while(|&c| c == '[').count();
    if level > 3 {
        return Err(Error::parse_at("annotations use at most three brackets", file, line));
    }
    let inner = &s[level..];
    let close = "]".repeat(level);
    let end = inner
        .find(']')
        .ok_or_else(|| Error::parse_at("unterminated annotation", file, line))?;
    if !inner[end..].starts_with(&close) {
        return Err(Error::parse_at("mismatched annotation brackets", file, line));
    }
    let rest = &inner[end + level..];
    if rest.starts_with(']') {
        return Err(Error::parse_at("mismatched annotation brackets", file, line));
    }
    Ok((Some((level as u8, &inner[..end])), rest))
}

fn parse_annotation(level: u8, content: &str, file: &str, line: usize, fresh: &mut usize) -> Result<Annotation> {
    let c = content.trim();
    let kind = if c == "?" {
        AnnKind::Query
    } else if let Some(cond) = c.strip_prefix('?') {
        let cond = cond
            .trim_start()
            .strip_prefix('|')
            .ok_or_else(|| Error::parse_at(format!("malformed query annotation '{c}'"), file, line))?;
        AnnKind::CondQuery(parse_formula_with(cond, file, line, fresh)?)
    } else if c == "." {
        AnnKind::Span
    } else if c == ":" {
        if level < 2 {
            return Err(Error::parse_at("'[:]' requires at least two brackets", file, line));
        }
        AnnKind::Distribute
    } else {
        match c.split_once('|') {
            Some((w, cond)) => AnnKind::Cond(parse_weight(w, file, line)?, parse_formula_with(cond, file, line, fresh)?),
            None => AnnKind::Weight(parse_weight(c, file, line)?),
        }
    };
    Ok(Annotation { kind, level })
}

/// Splits at `sep` occurring outside parentheses, braces and brackets.
fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '{' | '[' => depth += 1,
            ')' | '}' | ']' => depth -= 1,
            _ if c == sep && depth == 0 => {
                parts.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

fn parse_disjunction(src: &str, file: &str, line: usize, fresh: &mut usize) -> Result<AnnotatedDisjunction> {
    let (heads, body) = src.split_once("::-").expect("caller checked for '::-'");
    let mut alternatives = Vec::new();
    for alt in split_top(heads, ';') {
        let (ann, rest) = split_annotation(alt, file, line)?;
        let w = match ann {
            Some((1, content)) => match parse_weight(content, file, line)? {
                Weight::Point(w) => w,
                Weight::Interval(..) => {
                    return Err(Error::parse_at("annotated disjunctions take point weights", file, line))
                }
            },
            _ => return Err(Error::parse_at("each disjunction alternative needs a '[w]' weight", file, line)),
        };
        match parse_formula_with(rest, file, line, fresh)? {
            Formula::Atom(a) => alternatives.push((w, a)),
            _ => return Err(Error::parse_at("disjunction alternatives must be atoms", file, line)),
        }
    }
    let total: f64 = alternatives.iter().map(|(w, _)| w).sum();
    if total > 1.0 + 1e-9 {
        return Err(Error::parse_at(format!("disjunction weights sum to {total} > 1"), file, line));
    }
    let body = if body.trim().is_empty() {
        Vec::new()
    } else {
        match parse_formula_with(&format!(":- {body}"), file, line, fresh)? {
            Formula::Rule { body, .. } => body,
            _ => unreachable!(),
        }
    };
    Ok(AnnotatedDisjunction { alternatives, body, origin: Origin { file: file.into(), line } })
}

enum Line {
    Formula(AnnotatedFormula),
    Disjunction(AnnotatedDisjunction),
}

fn parse_line(src: &str, file: &str, line: usize, kind: FileKind, fresh: &mut usize) -> Result<Line> {
    if src.contains("::-") {
        if kind != FileKind::Background {
            return Err(Error::parse_at("annotated disjunctions belong in background files", file, line));
        }
        return Ok(Line::Disjunction(parse_disjunction(src, file, line, fresh)?));
    }
    let (ann, rest) = split_annotation(src, file, line)?;
    let annotation = match ann {
        Some((level, content)) => Some(parse_annotation(level, content, file, line, fresh)?),
        None => None,
    };
    let formula = parse_formula_with(rest, file, line, fresh)?;
    if formula_uses_cond_pr(&formula) {
        let weighted = matches!(
            annotation.as_ref().map(|a| &a.kind),
            Some(AnnKind::Weight(_)) | Some(AnnKind::Distribute)
        );
        if !weighted {
            return Err(Error::parse_at("'condPr' is reserved and requires a weight annotation", file, line));
        }
    }
    if let Some(a) = &annotation {
        let is_query = matches!(a.kind, AnnKind::Query | AnnKind::CondQuery(_));
        match kind {
            FileKind::Query | FileKind::Hypothesis if !is_query => {
                return Err(Error::parse_at("numeric weights are not allowed in query files", file, line))
            }
            FileKind::Background if is_query => {
                return Err(Error::parse_at("query annotations belong in query files", file, line))
            }
            FileKind::Examples => {
                return Err(Error::Unsupported(format!(
                    "{file}:{line}: weighted examples are not yet supported"
                )))
            }
            _ => {}
        }
    }
    Ok(Line::Formula(AnnotatedFormula { annotation, formula, origin: Origin { file: file.into(), line } }))
}

struct OpenBlock {
    kind: BlockKind,
    items: Vec<AnnotatedFormula>,
    line: usize,
}

fn block_open(word: &str) -> Option<BlockKind> {
    match word {
        "indep" => Some(BlockKind::Indep),
        "pIndep" => Some(BlockKind::PIndep),
        "indepVolat" => Some(BlockKind::IndepVolat),
        "pIndepVolat" => Some(BlockKind::PIndepVolat),
        _ => None,
    }
}

fn block_close(word: &str) -> Option<BlockKind> {
    match word {
        "endIndep" => Some(BlockKind::Indep),
        "endPIndep" => Some(BlockKind::PIndep),
        "endIndepVolat" => Some(BlockKind::IndepVolat),
        "endPIndepVolat" => Some(BlockKind::PIndepVolat),
        _ => None,
    }
}

fn check_block_item(f: &AnnotatedFormula, file: &str, line: usize) -> Result<()> {
    match f.annotation.as_ref().map(|a| &a.kind) {
        Some(AnnKind::Weight(_)) | Some(AnnKind::Distribute) => Ok(()),
        Some(AnnKind::Cond(..)) => Err(Error::parse_at("conditional weights are not allowed in independence blocks", file, line)),
        _ => Err(Error::parse_at("formulas in independence blocks need a numeric weight", file, line)),
    }
}

/// Parses preprocessed program text (comments stripped, includes and macros resolved).
pub fn parse_program(text: &str, file: &str, kind: FileKind) -> Result<Vec<Statement>> {
    let mut out = Vec::new();
    let mut block: Option<OpenBlock> = None;
    let mut volat: Option<(Vec<AnnotatedFormula>, usize)> = None;
    let mut fresh = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        if let Some(meta) = s.strip_prefix('#') {
            let word: String = meta.chars().take_while(|c| c.is_ascii_alphanumeric()).collect();
            if let Some(k) = block_open(&word) {
                if block.is_some() || volat.is_some() {
                    return Err(Error::parse_at(format!("'#{word}' cannot be nested"), file, line));
                }
                block = Some(OpenBlock { kind: k, items: Vec::new(), line });
                continue;
            }
            if let Some(k) = block_close(&word) {
                match block.take() {
                    Some(b) if b.kind == k => {
                        out.push(Statement::Block(MetaBlock { kind: b.kind, items: b.items }));
                        continue;
                    }
                    _ => return Err(Error::parse_at(format!("'#{word}' without matching opening statement"), file, line)),
                }
            }
            match word.as_str() {
                "volat" => {
                    if block.is_some() || volat.is_some() {
                        return Err(Error::parse_at("'#volat' cannot be nested", file, line));
                    }
                    volat = Some((Vec::new(), line));
                }
                "endVolat" => match volat.take() {
                    Some((items, _)) => out.push(Statement::Volat(items)),
                    None => return Err(Error::parse_at("'#endVolat' without '#volat'", file, line)),
                },
                "domain" => {
                    let rest = meta["domain".len()..].trim();
                    let rest = rest
                        .strip_suffix('.')
                        .ok_or_else(|| Error::parse_at("'#domain' must end with '.'", file, line))?;
                    match parse_formula_with(rest, file, line, &mut fresh)? {
                        Formula::Atom(a) => out.push(Statement::Domain(a)),
                        _ => return Err(Error::parse_at("'#domain' expects a single atom", file, line)),
                    }
                }
                "hide" | "show" => log::warn!("{file}:{line}: '#{word}' has no effect and is ignored"),
                "include" => return Err(Error::parse_at("'#include' must be resolved before parsing", file, line)),
                "def" => {}
                "count" => {
                    return Err(Error::parse_at("a '#count' aggregate needs to be part of a formula", file, line))
                }
                w if UNSUPPORTED_META.contains(&w) => {
                    return Err(Error::Unsupported(format!("{file}:{line}: '#{w}' is not supported in prasp-lite")))
                }
                w => return Err(Error::parse_at(format!("unknown meta-statement '#{w}'"), file, line)),
            }
            continue;
        }
        let Some(body) = s.strip_suffix('.') else {
            return Err(Error::parse_at(
                "formula must end with '.' on the same line; line breaks inside formulas are not allowed",
                file,
                line,
            ));
        };
        match parse_line(body, file, line, kind, &mut fresh)? {
            Line::Formula(f) => {
                if let Some(b) = block.as_mut() {
                    check_block_item(&f, file, line)?;
                    b.items.push(f);
                } else if let Some((items, _)) = volat.as_mut() {
                    items.push(f);
                } else {
                    out.push(Statement::Formula(f));
                }
            }
            Line::Disjunction(d) => {
                if block.is_some() || volat.is_some() {
                    return Err(Error::parse_at("annotated disjunctions cannot appear inside meta blocks", file, line));
                }
                out.push(Statement::Disjunction(d));
            }
        }
    }
    if let Some(b) = block {
        return Err(Error::parse_at("unterminated independence block", file, b.line));
    }
    if let Some((_, l)) = volat {
        return Err(Error::parse_at("unterminated '#volat' region", file, l));
    }
    Ok(out)
}
