//! Textual preprocessing applied before parsing: comments, includes and macros.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Blanks `%` line comments and `%* ... *%` block comments with spaces, keeping newlines
/// so that line and column numbers of the remaining text are unchanged.
pub fn strip_comments(text: &str) -> Result<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    let mut line = 1;
    while i < chars.len() {
        let c = chars[i];
        if c == '%' && chars.get(i + 1) == Some(&'*') {
            let start_line = line;
            out.push_str("  ");
            i += 2;
            loop {
                if i >= chars.len() {
                    return Err(Error::parse_at("unterminated '%*' comment block", "", start_line));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'%') {
                    out.push_str("  ");
                    i += 2;
                    break;
                }
                if chars[i] == '\n' {
                    line += 1;
                    out.push('\n');
                } else {
                    out.push(' ');
                }
                i += 1;
            }
        } else if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                out.push(' ');
                i += 1;
            }
        } else {
            if c == '\n' {
                line += 1;
            }
            out.push(c);
            i += 1;
        }
    }
    Ok(out)
}

const RECURSIVE_EXTENSIONS: [&str; 4] = ["prasp", "hypoth", "query", "examples"];

fn include_target(line: &str) -> Option<&str> {
    let rest = line.trim().strip_prefix("#include")?;
    let rest = rest.trim();
    let rest = rest.strip_prefix('"')?;
    let end = rest.find('"')?;
    Some(&rest[..end])
}

/// Reads `path`, strips its comments and substitutes every `#include "file"` line with the
/// (recursively processed) contents of that file, resolved relative to the including file.
pub fn resolve_includes(path: &Path, visited: &mut HashSet<PathBuf>) -> Result<String> {
    let canon = path.canonicalize().map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if !visited.insert(canon.clone()) {
        return Err(Error::parse_at(
            format!("include cycle through '{}'", path.display()),
            path.display().to_string(),
            0,
        ));
    }
    let raw = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let text = strip_comments(&raw)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut out = String::with_capacity(text.len());
    for line in text.split_inclusive('\n') {
        match include_target(line) {
            Some(target) => {
                let inc = dir.join(target);
                let recursive = inc
                    .extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| RECURSIVE_EXTENSIONS.contains(&e));
                let body = if recursive {
                    resolve_includes(&inc, visited)?
                } else {
                    let raw = std::fs::read_to_string(&inc)
                        .map_err(|e| Error::Io(format!("{}: {e}", inc.display())))?;
                    strip_comments(&raw)?
                };
                out.push_str(&body);
                if !body.ends_with('\n') {
                    out.push('\n');
                }
            }
            None => out.push_str(line),
        }
    }
    visited.remove(&canon);
    Ok(out)
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Replaces whole-word occurrences of each macro name. Words directly preceded by `#` are
/// meta keywords and stay untouched.
fn substitute(line: &str, macros: &[(String, String)]) -> String {
    if macros.is_empty() {
        return line.to_string();
    }
    let mut out = String::with_capacity(line.len());
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if is_word_char(chars[i]) {
            let start = i;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let after_hash = start > 0 && chars[start - 1] == '#';
            match macros.iter().rev().find(|(n, _)| *n == word) {
                Some((_, content)) if !after_hash => out.push_str(content),
                _ => out.push_str(&word),
            }
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

fn parse_def(line: &str) -> Option<(String, String)> {
    let rest = line.trim_start().strip_prefix("#def")?;
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    let (name, content) = rest.split_once('=')?;
    let name = name.trim();
    if name.is_empty() || !name.chars().all(is_word_char) {
        return None;
    }
    let content = content.split('%').next().unwrap_or("").trim();
    Some((name.to_string(), content.to_string()))
}

/// Expands `#def name = content` macros below their definition. Definition lines are blanked.
/// Redefinitions warn and the latest definition wins.
pub fn expand_macros(text: &str) -> String {
    let mut macros: Vec<(String, String)> = Vec::new();
    let mut out = String::with_capacity(text.len());
    for line in text.split_inclusive('\n') {
        if let Some((name, content)) = parse_def(line) {
            let content = substitute(&content, &macros);
            if let Some(slot) = macros.iter_mut().find(|(n, _)| *n == name) {
                log::warn!("macro '{name}' redefined; the latest definition is used");
                slot.1 = content;
            } else {
                macros.push((name, content));
            }
            if line.ends_with('\n') {
                out.push('\n');
            }
        } else {
            out.push_str(&substitute(line, &macros));
        }
    }
    out
}
