//! Annotated input language: preprocessing, parsing and desugaring.

mod ast;
mod lexer;
mod parser;
mod preprocess;

use std::collections::HashSet;
use std::path::Path;

pub use ast::*;
pub use parser::{formula_uses_cond_pr, parse_formula, parse_program, FileKind, RESERVED_PREFIX};
pub use preprocess::{expand_macros, resolve_includes, strip_comments};

use crate::error::Result;

/// Strips comments, expands macros and parses program text that has no `#include` lines.
pub fn parse_text(text: &str, file: &str, kind: FileKind) -> Result<Vec<Statement>> {
    let stripped = strip_comments(text)?;
    parse_program(&expand_macros(&stripped), file, kind)
}

/// Reads and fully preprocesses a file; the file kind follows from its extension.
pub fn load_file(path: &Path) -> Result<Vec<Statement>> {
    let text = resolve_includes(path, &mut HashSet::new())?;
    let name = path.display().to_string();
    parse_program(&expand_macros(&text), &name, FileKind::from_path(&name))
}

/// Result of desugaring one ground annotated disjunction.
#[derive(Clone, Debug, PartialEq)]
pub struct DesugaredDisjunction {
    /// Weighted helper facts followed by plain rules.
    pub formulas: Vec<AnnotatedFormula>,
    /// Helper atoms; they belong to one implicit mutual-independence group.
    pub helpers: Vec<Atom>,
}

/// Replaces a ground annotated disjunction by independent helper facts and plain rules.
/// Alternative i fires when its helper holds and no earlier helper does; helper weights are
/// chosen so that alternative i fires with its stated probability.
pub fn desugar_annotated_disjunction(ad: &AnnotatedDisjunction, index: usize) -> DesugaredDisjunction {
    let mut formulas = Vec::new();
    let mut helpers: Vec<Atom> = Vec::new();
    let origin = ad.origin.clone();
    if let [(w, head)] = ad.alternatives.as_slice() {
        if *w >= 1.0 {
            let formula = if ad.body.is_empty() {
                Formula::Atom(head.clone())
            } else {
                Formula::Rule { head: Some(Box::new(Formula::Atom(head.clone()))), body: ad.body.clone() }
            };
            formulas.push(AnnotatedFormula { annotation: None, formula, origin });
            return DesugaredDisjunction { formulas, helpers };
        }
    }
    let mut remaining = 1.0f64;
    let mut rules = Vec::new();
    for (alt, (p, head)) in ad.alternatives.iter().enumerate() {
        let q = if remaining <= 1e-12 { 0.0 } else { (p / remaining).clamp(0.0, 1.0) };
        remaining *= 1.0 - q;
        let h = Atom::prop(format!("{RESERVED_PREFIX}ad_{index}_{}", alt + 1));
        formulas.push(AnnotatedFormula {
            annotation: Some(Annotation { kind: AnnKind::Weight(Weight::Point(q)), level: 1 }),
            formula: Formula::Atom(h.clone()),
            origin: origin.clone(),
        });
        let mut body = ad.body.clone();
        body.push(Formula::Atom(h.clone()));
        body.extend(helpers.iter().map(|e| Formula::not(Formula::Atom(e.clone()))));
        rules.push(AnnotatedFormula {
            annotation: None,
            formula: Formula::Rule { head: Some(Box::new(Formula::Atom(head.clone()))), body },
            origin: origin.clone(),
        });
        helpers.push(h);
    }
    formulas.extend(rules);
    DesugaredDisjunction { formulas, helpers }
}
