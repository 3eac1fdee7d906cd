use super::ast::CmpOp;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    /// `#count`, `#domain`, ...
    Meta(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    If,
    AdIf,
    Pipe,
    Amp,
    Arrow,
    LArrow,
    Cmp(CmpOp),
    Minus,
    DotDot,
    Dot,
    Underscore,
}

/// Splits one statement into tokens. Returns a message describing the first bad character.
pub fn tokenize(src: &str) -> Result<Vec<Tok>, String> {
    let cs: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let peek = |i: usize| cs.get(i).copied().unwrap_or('\0');
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            let w: String = cs[start..i].iter().collect();
            if w == "_" {
                toks.push(Tok::Underscore);
            } else if c.is_ascii_uppercase() || c == '_' {
                toks.push(Tok::Var(w));
            } else {
                toks.push(Tok::Ident(w));
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            let w: String = cs[start..i].iter().collect();
            let v = w.parse::<i64>().map_err(|_| format!("integer '{w}' out of range"))?;
            toks.push(Tok::Int(v));
            continue;
        }
        if c == '#' {
            let start = i + 1;
            i += 1;
            while i < cs.len() && cs[i].is_ascii_alphanumeric() {
                i += 1;
            }
            toks.push(Tok::Meta(cs[start..i].iter().collect()));
            continue;
        }
        let (tok, len) = match (c, peek(i + 1), peek(i + 2)) {
            (':', ':', '-') => (Tok::AdIf, 3),
            (':', '-', _) => (Tok::If, 2),
            (':', _, _) => (Tok::Colon, 1),
            ('-', '>', _) => (Tok::Arrow, 2),
            ('-', _, _) => (Tok::Minus, 1),
            ('<', '-', _) => (Tok::LArrow, 2),
            ('<', '=', _) => (Tok::Cmp(CmpOp::Le), 2),
            ('<', '>', _) => (Tok::Cmp(CmpOp::Ne), 2),
            ('<', _, _) => (Tok::Cmp(CmpOp::Lt), 1),
            ('>', '=', _) => (Tok::Cmp(CmpOp::Ge), 2),
            ('>', _, _) => (Tok::Cmp(CmpOp::Gt), 1),
            ('=', '=', _) => (Tok::Cmp(CmpOp::Eq), 2),
            ('=', _, _) => (Tok::Cmp(CmpOp::Eq), 1),
            ('!', '=', _) => (Tok::Cmp(CmpOp::Ne), 2),
            ('!' | '?', '[', _) => return Err("first-order quantifiers are not supported in prasp-lite".into()),
            ('.', '.', _) => (Tok::DotDot, 2),
            ('.', _, _) => (Tok::Dot, 1),
            ('(', _, _) => (Tok::LParen, 1),
            (')', _, _) => (Tok::RParen, 1),
            ('{', _, _) => (Tok::LBrace, 1),
            ('}', _, _) => (Tok::RBrace, 1),
            (',', _, _) => (Tok::Comma, 1),
            (';', _, _) => (Tok::Semi, 1),
            ('|', _, _) => (Tok::Pipe, 1),
            ('&', _, _) => (Tok::Amp, 1),
            _ => return Err(format!("unexpected character '{c}'")),
        };
        toks.push(tok);
        i += len;
    }
    Ok(toks)
}
