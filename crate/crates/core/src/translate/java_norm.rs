//! Structural normalization of Java source: strips comments, renames method
//! parameters to `p1, p2, …` and fields/locals to `v1, v2, …` in declaration
//! order, preserves class and method names, and pretty-prints the result in a
//! canonical layout. Two alpha-renamed variants of one program normalize to
//! byte-identical text, so downstream similarity scoring reflects structure
//! rather than identifier choice.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// A single lexical token. Normalization is token-preserving: every pass
/// substitutes identifier text in place and never inserts or removes tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Kw(&'static str),
    Num(String),
    Str(String),
    Chr(String),
    P(&'static str),
}

impl Tok {
    fn text(&self) -> &str {
        match self {
            Tok::Ident(s) | Tok::Num(s) | Tok::Str(s) | Tok::Chr(s) => s,
            Tok::Kw(s) | Tok::P(s) => s,
        }
    }

    fn is_p(&self, p: &str) -> bool {
        matches!(self, Tok::P(s) if *s == p)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self, Tok::Kw(s) if *s == k)
    }

    fn is_ident(&self) -> bool {
        matches!(self, Tok::Ident(_))
    }
}

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "var", "void", "volatile", "while", "true", "false", "null", "yield", "record",
];

const MODIFIERS: &[&str] = &[
    "public", "protected", "private", "static", "final", "abstract", "synchronized", "native",
    "transient", "volatile", "strictfp", "default",
];

const PRIMITIVES: &[&str] = &[
    "boolean", "byte", "short", "int", "long", "char", "float", "double", "void", "var",
];

/// Multi-character operators first so the lexer always takes the longest match.
const PUNCTS: &[&str] = &[
    ">>>=", ">>>", ">>=", "<<=", "...", "->", "::", "==", "!=", "<=", ">=", "&&", "||", "++",
    "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "+", "-", "*", "/", "%",
    "=", "<", ">", "!", "&", "|", "^", "~", "?", ":", ";", ",", ".", "(", ")", "{", "}", "[",
    "]", "@",
];

fn norm_err(detail: impl Into<String>) -> Error {
    Error::Normalize { detail: detail.into() }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

fn lex(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1usize;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && i + 1 < chars.len() && chars[i + 1] == '/' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && i + 1 < chars.len() && chars[i + 1] == '*' {
            let start = line;
            i += 2;
            loop {
                if i + 1 >= chars.len() {
                    return Err(norm_err(format!("unterminated block comment starting on line {start}")));
                }
                if chars[i] == '\n' {
                    line += 1;
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        if c == '"' {
            // Text block?
            if i + 2 < chars.len() && chars[i + 1] == '"' && chars[i + 2] == '"' {
                let start = line;
                let mut j = i + 3;
                let mut text = String::from("\"\"\"");
                loop {
                    if j + 2 >= chars.len() + 1 {
                        return Err(norm_err(format!("unterminated text block starting on line {start}")));
                    }
                    if j + 2 < chars.len() && chars[j] == '"' && chars[j + 1] == '"' && chars[j + 2] == '"' {
                        text.push_str("\"\"\"");
                        j += 3;
                        break;
                    }
                    if chars[j] == '\n' {
                        line += 1;
                    }
                    text.push(chars[j]);
                    j += 1;
                }
                toks.push(Tok::Str(text));
                i = j;
                continue;
            }
            let mut j = i + 1;
            let mut text = String::from("\"");
            loop {
                if j >= chars.len() || chars[j] == '\n' {
                    return Err(norm_err(format!("unterminated string literal on line {line}")));
                }
                if chars[j] == '\\' {
                    if j + 1 >= chars.len() {
                        return Err(norm_err(format!("unterminated string literal on line {line}")));
                    }
                    text.push(chars[j]);
                    text.push(chars[j + 1]);
                    j += 2;
                    continue;
                }
                if chars[j] == '"' {
                    text.push('"');
                    j += 1;
                    break;
                }
                text.push(chars[j]);
                j += 1;
            }
            toks.push(Tok::Str(text));
            i = j;
            continue;
        }
        if c == '\'' {
            let mut j = i + 1;
            let mut text = String::from("'");
            loop {
                if j >= chars.len() || chars[j] == '\n' {
                    return Err(norm_err(format!("unterminated character literal on line {line}")));
                }
                if chars[j] == '\\' {
                    if j + 1 >= chars.len() {
                        return Err(norm_err(format!("unterminated character literal on line {line}")));
                    }
                    text.push(chars[j]);
                    text.push(chars[j + 1]);
                    j += 2;
                    continue;
                }
                if chars[j] == '\'' {
                    text.push('\'');
                    j += 1;
                    break;
                }
                text.push(chars[j]);
                j += 1;
                if text.len() > 12 {
                    return Err(norm_err(format!("overlong character literal on line {line}")));
                }
            }
            toks.push(Tok::Chr(text));
            i = j;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && i + 1 < chars.len() && chars[i + 1].is_ascii_digit()) {
            let mut j = i;
            let mut text = String::new();
            let mut seen_dot = c == '.';
            if seen_dot {
                text.push('.');
                j += 1;
            }
            while j < chars.len() {
                let d = chars[j];
                if d.is_ascii_alphanumeric() || d == '_' {
                    // Exponent sign: 1e+9 / 0x1p-3
                    if (d == 'e' || d == 'E' || d == 'p' || d == 'P')
                        && j + 1 < chars.len()
                        && (chars[j + 1] == '+' || chars[j + 1] == '-')
                        && !text.starts_with("0x")
                        && !text.starts_with("0X")
                    {
                        text.push(d);
                        text.push(chars[j + 1]);
                        j += 2;
                        continue;
                    }
                    text.push(d);
                    j += 1;
                    continue;
                }
                if d == '.' && !seen_dot && j + 1 < chars.len() && chars[j + 1].is_ascii_digit() {
                    seen_dot = true;
                    text.push('.');
                    j += 1;
                    continue;
                }
                if d == '.' && !seen_dot && (j + 1 >= chars.len() || !chars[j + 1].is_ascii_alphabetic()) {
                    // `1.` trailing-dot literal
                    seen_dot = true;
                    text.push('.');
                    j += 1;
                    continue;
                }
                break;
            }
            toks.push(Tok::Num(text));
            i = j;
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '$' {
            let mut j = i;
            let mut text = String::new();
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_' || chars[j] == '$') {
                text.push(chars[j]);
                j += 1;
            }
            if let Some(kw) = KEYWORDS.iter().find(|k| **k == text) {
                toks.push(Tok::Kw(kw));
            } else {
                toks.push(Tok::Ident(text));
            }
            i = j;
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 4)].iter().collect();
        if let Some(p) = PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            toks.push(Tok::P(p));
            i += p.chars().count();
            continue;
        }
        return Err(norm_err(format!("unexpected character {c:?} on line {line}")));
    }
    Ok(toks)
}

fn check_balanced(toks: &[Tok]) -> Result<()> {
    let mut stack: Vec<&'static str> = Vec::new();
    for t in toks {
        if let Tok::P(p) = t {
            match *p {
                "(" | "[" | "{" => stack.push(p),
                ")" | "]" | "}" => {
                    let want = match *p {
                        ")" => "(",
                        "]" => "[",
                        _ => "{",
                    };
                    match stack.pop() {
                        Some(open) if open == want => {}
                        _ => return Err(norm_err(format!("unbalanced delimiter {p:?}"))),
                    }
                }
                _ => {}
            }
        }
    }
    if let Some(open) = stack.pop() {
        return Err(norm_err(format!("unclosed delimiter {open:?}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Token-stream helpers
// ---------------------------------------------------------------------------

/// End index (exclusive) of a type written at `i`, or None if no type starts
/// there. Handles qualified names, generic arguments (with `>>` splitting),
/// and array dimensions. Never emits.
fn type_end(toks: &[Tok], mut i: usize) -> Option<usize> {
    match toks.get(i) {
        Some(Tok::Kw(k)) if PRIMITIVES.contains(k) => i += 1,
        Some(Tok::Ident(_)) => {
            i += 1;
            while toks.get(i).map_or(false, |t| t.is_p("."))
                && toks.get(i + 1).map_or(false, Tok::is_ident)
            {
                i += 2;
            }
        }
        _ => return None,
    }
    if toks.get(i).map_or(false, |t| t.is_p("<")) {
        i = angle_end(toks, i)?;
    }
    while toks.get(i).map_or(false, |t| t.is_p("["))
        && toks.get(i + 1).map_or(false, |t| t.is_p("]"))
    {
        i += 2;
    }
    Some(i)
}

/// End index just past the `>` matching the `<` at `i`, validating that the
/// contents look like type arguments. Accounts for `>>` and `>>>`.
fn angle_end(toks: &[Tok], i: usize) -> Option<usize> {
    let mut depth: i32 = 0;
    let mut j = i;
    while j < toks.len() {
        match &toks[j] {
            Tok::P("<") => depth += 1,
            Tok::P(">") => depth -= 1,
            Tok::P(">>") => depth -= 2,
            Tok::P(">>>") => depth -= 3,
            Tok::Ident(_) | Tok::P(".") | Tok::P(",") | Tok::P("?") | Tok::P("&")
            | Tok::P("[") | Tok::P("]") | Tok::P("@") => {}
            Tok::Kw(k) if *k == "extends" || *k == "super" || PRIMITIVES.contains(k) => {}
            _ => return None,
        }
        if depth < 0 {
            return None;
        }
        if depth == 0 {
            return Some(j + 1);
        }
        j += 1;
    }
    None
}

fn matching_paren(toks: &[Tok], open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (j, t) in toks.iter().enumerate().skip(open) {
        if t.is_p("(") {
            depth += 1;
        } else if t.is_p(")") {
            depth -= 1;
            if depth == 0 {
                return Some(j);
            }
        }
    }
    None
}

/// Skips a balanced `{ … }` region starting at `open`, returning the index
/// just past the closing brace.
fn skip_braces(toks: &[Tok], open: usize) -> usize {
    let mut depth = 0i32;
    let mut j = open;
    while j < toks.len() {
        if toks[j].is_p("{") {
            depth += 1;
        } else if toks[j].is_p("}") {
            depth -= 1;
            if depth == 0 {
                return j + 1;
            }
        }
        j += 1;
    }
    toks.len()
}

fn skip_annotation(toks: &[Tok], mut i: usize) -> usize {
    i += 1; // '@'
    if toks.get(i).map_or(false, Tok::is_ident) || toks.get(i).map_or(false, |t| t.is_kw("interface")) {
        i += 1;
        while toks.get(i).map_or(false, |t| t.is_p("."))
            && toks.get(i + 1).map_or(false, Tok::is_ident)
        {
            i += 2;
        }
    }
    if toks.get(i).map_or(false, |t| t.is_p("(")) {
        if let Some(close) = matching_paren(toks, i) {
            i = close + 1;
        }
    }
    i
}

/// What a class-body member turns out to be, judged by the first structural
/// token at angle-depth zero.
#[derive(Debug, PartialEq)]
enum MemberShape {
    Method { open_paren: usize },
    Field,
    Other,
}

fn member_shape(toks: &[Tok], mut i: usize) -> MemberShape {
    let mut ang: i32 = 0;
    while i < toks.len() {
        match &toks[i] {
            Tok::P("<") => ang += 1,
            Tok::P(">") => ang = (ang - 1).max(0),
            Tok::P(">>") => ang = (ang - 2).max(0),
            Tok::P(">>>") => ang = (ang - 3).max(0),
            Tok::P("(") if ang == 0 => return MemberShape::Method { open_paren: i },
            Tok::P("=") | Tok::P(";") if ang == 0 => return MemberShape::Field,
            Tok::P("{") | Tok::P("}") if ang == 0 => return MemberShape::Other,
            _ => {}
        }
        i += 1;
    }
    MemberShape::Other
}

/// Collects field names declared directly in a type body, in textual order.
/// `start` indexes the token right after the opening brace.
fn collect_field_names(toks: &[Tok], start: usize, is_enum: bool) -> Vec<String> {
    let mut names = Vec::new();
    let mut i = start;
    if is_enum {
        // Skip the constant list: up to the first ';' at member level or the
        // closing brace.
        let mut depth = 0i32;
        while i < toks.len() {
            let t = &toks[i];
            if depth == 0 && (t.is_p(";") || t.is_p("}")) {
                if t.is_p(";") {
                    i += 1;
                }
                break;
            }
            if t.is_p("(") || t.is_p("{") {
                depth += 1;
            } else if t.is_p(")") || t.is_p("}") {
                depth -= 1;
            }
            i += 1;
        }
    }
    while i < toks.len() {
        let t = &toks[i];
        if t.is_p("}") {
            break;
        }
        if t.is_p(";") {
            i += 1;
            continue;
        }
        if t.is_p("@") {
            i = skip_annotation(toks, i);
            continue;
        }
        if let Tok::Kw(k) = t {
            if MODIFIERS.contains(k) {
                i += 1;
                continue;
            }
            if matches!(*k, "class" | "interface" | "enum" | "record") {
                // Nested type: skip its entire body.
                while i < toks.len() && !toks[i].is_p("{") {
                    i += 1;
                }
                i = skip_braces(toks, i);
                continue;
            }
        }
        if t.is_p("{") {
            i = skip_braces(toks, i);
            continue;
        }
        match member_shape(toks, i) {
            MemberShape::Method { open_paren } => {
                let close = matching_paren(toks, open_paren).unwrap_or(toks.len().saturating_sub(1));
                let mut j = close + 1;
                while j < toks.len() && !toks[j].is_p("{") && !toks[j].is_p(";") {
                    j += 1;
                }
                if toks.get(j).map_or(false, |t| t.is_p("{")) {
                    i = skip_braces(toks, j);
                } else {
                    i = j + 1;
                }
            }
            MemberShape::Field => {
                let Some(mut j) = type_end(toks, i) else {
                    i += 1;
                    continue;
                };
                loop {
                    let Some(Tok::Ident(name)) = toks.get(j) else { break };
                    names.push(name.clone());
                    j += 1;
                    while toks.get(j).map_or(false, |t| t.is_p("["))
                        && toks.get(j + 1).map_or(false, |t| t.is_p("]"))
                    {
                        j += 2;
                    }
                    if toks.get(j).map_or(false, |t| t.is_p("=")) {
                        // Skip the initializer expression.
                        j += 1;
                        let mut depth = 0i32;
                        while j < toks.len() {
                            let u = &toks[j];
                            if depth == 0 && (u.is_p(",") || u.is_p(";")) {
                                break;
                            }
                            if u.is_p("(") || u.is_p("[") || u.is_p("{") {
                                depth += 1;
                            } else if u.is_p(")") || u.is_p("]") || u.is_p("}") {
                                depth -= 1;
                            }
                            j += 1;
                        }
                    }
                    if toks.get(j).map_or(false, |t| t.is_p(",")) {
                        j += 1;
                        continue;
                    }
                    break;
                }
                while j < toks.len() && !toks[j].is_p(";") {
                    j += 1;
                }
                i = j + 1;
            }
            MemberShape::Other => {
                i += 1;
            }
        }
    }
    names
}

// ---------------------------------------------------------------------------
// Renamer
// ---------------------------------------------------------------------------

type Scope = HashMap<String, String>;

struct Renamer {
    toks: Vec<Tok>,
    pos: usize,
    out: Vec<Tok>,
}

impl Renamer {
    fn cur(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn at_p(&self, p: &str) -> bool {
        self.cur().map_or(false, |t| t.is_p(p))
    }

    fn at_kw(&self, k: &str) -> bool {
        self.cur().map_or(false, |t| t.is_kw(k))
    }

    fn pass(&mut self) {
        if let Some(t) = self.toks.get(self.pos) {
            self.out.push(t.clone());
            self.pos += 1;
        }
    }

    fn pass_n(&mut self, n: usize) {
        for _ in 0..n {
            self.pass();
        }
    }

    fn emit_ident(&mut self, name: String) {
        self.out.push(Tok::Ident(name));
        self.pos += 1;
    }

    fn expect_p(&mut self, p: &'static str) -> Result<()> {
        if self.at_p(p) {
            self.pass();
            Ok(())
        } else {
            Err(norm_err(format!(
                "expected {:?} but found {:?}",
                p,
                self.cur().map(Tok::text).unwrap_or("end of input")
            )))
        }
    }

    fn pass_annotation(&mut self) {
        let end = skip_annotation(&self.toks, self.pos);
        while self.pos < end {
            self.pass();
        }
    }

    fn pass_type(&mut self) -> Result<()> {
        let end = type_end(&self.toks, self.pos)
            .ok_or_else(|| norm_err(format!(
                "expected a type but found {:?}",
                self.cur().map(Tok::text).unwrap_or("end of input")
            )))?;
        while self.pos < end {
            self.pass();
        }
        Ok(())
    }

    // -- compilation unit ---------------------------------------------------

    fn compilation_unit(&mut self) -> Result<()> {
        if self.at_kw("package") {
            self.pass();
            self.pass_qualified_to_semi()?;
        }
        while self.at_kw("import") {
            self.pass();
            if self.at_kw("static") {
                self.pass();
            }
            self.pass_qualified_to_semi()?;
        }
        let mut saw_type = false;
        while self.pos < self.toks.len() {
            if self.at_p(";") {
                self.pass();
                continue;
            }
            self.type_or_err()?;
            saw_type = true;
        }
        if !saw_type {
            return Err(norm_err("no type declaration found"));
        }
        Ok(())
    }

    fn pass_qualified_to_semi(&mut self) -> Result<()> {
        while self.pos < self.toks.len() && !self.at_p(";") {
            match self.cur() {
                Some(Tok::Ident(_)) | Some(Tok::P(".")) | Some(Tok::P("*")) => self.pass(),
                other => {
                    return Err(norm_err(format!(
                        "unexpected token {:?} in package or import",
                        other.map(Tok::text).unwrap_or("end of input")
                    )))
                }
            }
        }
        self.expect_p(";")
    }

    fn type_or_err(&mut self) -> Result<()> {
        loop {
            if self.at_p("@") {
                // '@interface' is an annotation-type declaration.
                if self.toks.get(self.pos + 1).map_or(false, |t| t.is_kw("interface")) {
                    return self.annotation_type_decl();
                }
                self.pass_annotation();
                continue;
            }
            match self.cur() {
                Some(Tok::Kw(k)) if MODIFIERS.contains(k) => self.pass(),
                Some(Tok::Kw(k)) if matches!(*k, "class" | "interface" | "enum" | "record") => {
                    return self.type_decl();
                }
                other => {
                    return Err(norm_err(format!(
                        "expected a type declaration but found {:?}",
                        other.map(Tok::text).unwrap_or("end of input")
                    )))
                }
            }
        }
    }

    fn annotation_type_decl(&mut self) -> Result<()> {
        self.pass(); // '@'
        self.pass(); // 'interface'
        if !self.cur().map_or(false, Tok::is_ident) {
            return Err(norm_err("annotation type without a name"));
        }
        self.pass();
        while self.pos < self.toks.len() && !self.at_p("{") {
            self.pass();
        }
        let end = skip_braces(&self.toks, self.pos);
        while self.pos < end {
            self.pass();
        }
        Ok(())
    }

    fn type_decl(&mut self) -> Result<()> {
        let kind = match self.cur() {
            Some(Tok::Kw(k)) => *k,
            _ => return Err(norm_err("expected a type keyword")),
        };
        self.pass();
        if !self.cur().map_or(false, Tok::is_ident) {
            return Err(norm_err(format!("{kind} declaration without a name")));
        }
        self.pass(); // type name, preserved
        if self.at_p("<") {
            let end = angle_end(&self.toks, self.pos)
                .ok_or_else(|| norm_err("malformed type parameter list"))?;
            while self.pos < end {
                self.pass();
            }
        }
        if kind == "record" && self.at_p("(") {
            let close = matching_paren(&self.toks, self.pos)
                .ok_or_else(|| norm_err("malformed record header"))?;
            while self.pos <= close {
                self.pass();
            }
        }
        while self.pos < self.toks.len() && !self.at_p("{") {
            self.pass(); // extends / implements / permits clauses, preserved
        }
        self.type_body(kind == "enum")
    }

    fn type_body(&mut self, is_enum: bool) -> Result<()> {
        self.expect_p("{")?;
        let field_names = collect_field_names(&self.toks, self.pos, is_enum);
        let mut vctr: usize = 0;
        let mut fields: Scope = Scope::new();
        for name in field_names {
            vctr += 1;
            fields.entry(name).or_insert_with(|| format!("v{vctr}"));
        }
        let mut scopes = vec![fields];

        if is_enum {
            // Enum constants are API names: pass the whole constant segment
            // verbatim, up to the first member-level ';' or the body end.
            let mut depth = 0i32;
            while self.pos < self.toks.len() {
                let t = &self.toks[self.pos];
                if depth == 0 && (t.is_p(";") || t.is_p("}")) {
                    if t.is_p(";") {
                        self.pass();
                    }
                    break;
                }
                if t.is_p("(") || t.is_p("{") {
                    depth += 1;
                } else if t.is_p(")") || t.is_p("}") {
                    depth -= 1;
                }
                self.pass();
            }
        }

        loop {
            if self.pos >= self.toks.len() {
                return Err(norm_err("unterminated type body"));
            }
            if self.at_p("}") {
                self.pass();
                return Ok(());
            }
            if self.at_p(";") {
                self.pass();
                continue;
            }
            if self.at_p("@") {
                self.pass_annotation();
                continue;
            }
            if self.at_p("{") {
                // Instance or static initializer block.
                self.block(&mut scopes, &mut vctr)?;
                continue;
            }
            if let Some(Tok::Kw(k)) = self.cur() {
                if MODIFIERS.contains(k) {
                    self.pass();
                    continue;
                }
                if matches!(*k, "class" | "interface" | "enum" | "record") {
                    self.type_decl()?;
                    continue;
                }
            }
            match member_shape(&self.toks, self.pos) {
                MemberShape::Method { open_paren } => {
                    if open_paren == self.pos {
                        return Err(norm_err("member starts with a parenthesis"));
                    }
                    // Return type / type parameters verbatim, then the
                    // preserved method (or constructor) name.
                    while self.pos < open_paren - 1 {
                        self.pass();
                    }
                    if !self.cur().map_or(false, Tok::is_ident) {
                        return Err(norm_err("method declaration without a name"));
                    }
                    self.pass();
                    self.method_rest(&mut scopes, &mut vctr)?;
                }
                MemberShape::Field => {
                    self.declarators(&mut scopes, &mut vctr, true)?;
                }
                MemberShape::Other => {
                    return Err(norm_err(format!(
                        "unrecognized member starting at {:?}",
                        self.cur().map(Tok::text).unwrap_or("end of input")
                    )));
                }
            }
        }
    }

    fn method_rest(&mut self, scopes: &mut Vec<Scope>, vctr: &mut usize) -> Result<()> {
        self.expect_p("(")?;
        let mut params: Scope = Scope::new();
        let mut pctr = 0usize;
        while !self.at_p(")") {
            if self.pos >= self.toks.len() {
                return Err(norm_err("unterminated parameter list"));
            }
            if self.at_p(",") {
                self.pass();
                continue;
            }
            if self.at_p("@") {
                self.pass_annotation();
                continue;
            }
            if self.at_kw("final") {
                self.pass();
                continue;
            }
            self.pass_type()?;
            if self.at_p("...") {
                self.pass();
            }
            if self.at_kw("this") {
                // Receiver parameter: not a renameable name.
                self.pass();
                continue;
            }
            match self.cur().cloned() {
                Some(Tok::Ident(name)) => {
                    pctr += 1;
                    let rep = format!("p{pctr}");
                    params.insert(name, rep.clone());
                    self.emit_ident(rep);
                }
                other => {
                    return Err(norm_err(format!(
                        "expected a parameter name but found {:?}",
                        other.as_ref().map(Tok::text).unwrap_or("end of input")
                    )))
                }
            }
            while self.at_p("[") && self.toks.get(self.pos + 1).map_or(false, |t| t.is_p("]")) {
                self.pass_n(2);
            }
        }
        self.pass(); // ')'
        scopes.push(params);
        while self.pos < self.toks.len() && !self.at_p("{") && !self.at_p(";") {
            self.pass(); // throws clause, preserved
        }
        let r = if self.at_p("{") {
            self.block(scopes, vctr)
        } else {
            self.expect_p(";")
        };
        scopes.pop();
        r
    }

    /// Parses one declaration statement: type, then a comma-separated list of
    /// declarator names with optional initializers, ending at ';'. Fields look
    /// their replacement up in the pre-collected map; locals mint fresh names.
    fn declarators(&mut self, scopes: &mut Vec<Scope>, vctr: &mut usize, is_field: bool) -> Result<()> {
        while self.at_p("@") {
            self.pass_annotation();
        }
        while self.at_kw("final") {
            self.pass();
        }
        self.pass_type()?;
        loop {
            match self.cur().cloned() {
                Some(Tok::Ident(name)) => {
                    let rep = if is_field {
                        scopes[0].get(&name).cloned().unwrap_or_else(|| {
                            *vctr += 1;
                            let r = format!("v{vctr}");
                            scopes[0].insert(name.clone(), r.clone());
                            r
                        })
                    } else {
                        *vctr += 1;
                        let r = format!("v{vctr}");
                        scopes.last_mut().expect("scope stack").insert(name.clone(), r.clone());
                        r
                    };
                    self.emit_ident(rep);
                }
                other => {
                    return Err(norm_err(format!(
                        "expected a variable name but found {:?}",
                        other.as_ref().map(Tok::text).unwrap_or("end of input")
                    )))
                }
            }
            while self.at_p("[") && self.toks.get(self.pos + 1).map_or(false, |t| t.is_p("]")) {
                self.pass_n(2);
            }
            if self.at_p("=") {
                self.pass();
                self.expr_until(scopes, vctr, &[",", ";"])?;
            }
            if self.at_p(",") {
                self.pass();
                continue;
            }
            self.expect_p(";")?;
            return Ok(());
        }
    }

    // -- statements ----------------------------------------------------------

    fn block(&mut self, scopes: &mut Vec<Scope>, vctr: &mut usize) -> Result<()> {
        self.expect_p("{")?;
        scopes.push(Scope::new());
        loop {
            if self.pos >= self.toks.len() {
                scopes.pop();
                return Err(norm_err("unterminated block"));
            }
            if self.at_p("}") {
                self.pass();
                scopes.pop();
                return Ok(());
            }
            self.statement(scopes, vctr)?;
        }
    }

    fn statement(&mut self, scopes: &mut Vec<Scope>, vctr: &mut usize) -> Result<()> {
        if self.at_p("{") {
            return self.block(scopes, vctr);
        }
        if self.at_p(";") {
            self.pass();
            return Ok(());
        }
        if self.at_p("@") {
            self.pass_annotation();
            return Ok(());
        }
        if self.cur().map_or(false, Tok::is_ident)
            && self.toks.get(self.pos + 1).map_or(false, |t| t.is_p(":"))
        {
            // Labeled statement: keep the label, then parse its target normally.
            self.pass();
            self.pass();
            return self.statement(scopes, vctr);
        }
        if let Some(Tok::Kw(k)) = self.cur() {
            match *k {
                "if" | "while" | "switch" | "synchronized" => {
                    self.pass();
                    self.expect_p("(")?;
                    self.expr_until(scopes, vctr, &[")"])?;
                    self.expect_p(")")?;
                    return Ok(());
                }
                "for" => return self.for_statement(scopes, vctr),
                "do" | "else" | "finally" => {
                    self.pass();
                    return Ok(());
                }
                "try" => {
                    self.pass();
                    if self.at_p("(") {
                        scopes.push(Scope::new());
                        self.pass();
                        loop {
                            if self.at_p(")") {
                                self.pass();
                                break;
                            }
                            if self.at_p(";") {
                                self.pass();
                                continue;
                            }
                            if self.looks_like_declaration() {
                                self.resource_decl(scopes, vctr)?;
                            } else {
                                self.expr_until(scopes, vctr, &[";", ")"])?;
                            }
                        }
                        let r = self.block(scopes, vctr);
                        scopes.pop();
                        return r;
                    }
                    return Ok(());
                }
                "catch" => {
                    self.pass();
                    scopes.push(Scope::new());
                    let r = (|| {
                        self.expect_p("(")?;
                        if self.at_kw("final") {
                            self.pass();
                        }
                        self.pass_type()?;
                        while self.at_p("|") {
                            self.pass();
                            self.pass_type()?;
                        }
                        match self.cur().cloned() {
                            Some(Tok::Ident(name)) => {
                                *vctr += 1;
                                let rep = format!("v{vctr}");
                                scopes.last_mut().expect("scope stack").insert(name, rep.clone());
                                self.emit_ident(rep);
                            }
                            other => {
                                return Err(norm_err(format!(
                                    "expected an exception name but found {:?}",
                                    other.as_ref().map(Tok::text).unwrap_or("end of input")
                                )))
                            }
                        }
                        self.expect_p(")")?;
                        self.block(scopes, vctr)
                    })();
                    scopes.pop();
                    return r;
                }
                "return" | "throw" | "yield" | "assert" => {
                    self.pass();
                    self.expr_until(scopes, vctr, &[";"])?;
                    self.expect_p(";")?;
                    return Ok(());
                }
                "break" | "continue" => {
                    self.pass();
                    if self.cur().map_or(false, Tok::is_ident) {
                        self.pass(); // label, preserved
                    }
                    self.expect_p(";")?;
                    return Ok(());
                }
                "case" => {
                    self.pass();
                    self.expr_until(scopes, vctr, &[":", "->"])?;
                    self.pass();
                    return Ok(());
                }
                "default" => {
                    self.pass();
                    if self.at_p(":") || self.at_p("->") {
                        self.pass();
                    }
                    return Ok(());
                }
                _ => {}
            }
        }
        if self.looks_like_declaration() {
            return self.declarators(scopes, vctr, false);
        }
        self.expr_until(scopes, vctr, &[";"])?;
        if self.at_p(";") {
            self.pass();
        }
        Ok(())
    }

    fn for_statement(&mut self, scopes: &mut Vec<Scope>, vctr: &mut usize) -> Result<()> {
        self.pass(); // 'for'
        scopes.push(Scope::new());
        let r = (|| {
            self.expect_p("(")?;
            let mut foreach = false;
            if self.at_p(";") {
                self.pass();
            } else if self.looks_like_declaration() {
                let save = self.pos;
                // Peek whether this is an enhanced for: Type name ':' …
                let mut j = save;
                while self.toks.get(j).map_or(false, |t| t.is_p("@")) {
                    j = skip_annotation(&self.toks, j);
                }
                while self.toks.get(j).map_or(false, |t| t.is_kw("final")) {
                    j += 1;
                }
                if let Some(after_ty) = type_end(&self.toks, j) {
                    if self.toks.get(after_ty).map_or(false, Tok::is_ident)
                        && self.toks.get(after_ty + 1).map_or(false, |t| t.is_p(":"))
                    {
                        foreach = true;
                        while self.at_p("@") {
                            self.pass_annotation();
                        }
                        while self.at_kw("final") {
                            self.pass();
                        }
                        self.pass_type()?;
                        if let Some(Tok::Ident(name)) = self.cur().cloned() {
                            *vctr += 1;
                            let rep = format!("v{vctr}");
                            scopes.last_mut().expect("scope stack").insert(name, rep.clone());
                            self.emit_ident(rep);
                        }
                        self.expect_p(":")?;
                        self.expr_until(scopes, vctr, &[")"])?;
                        self.expect_p(")")?;
                    }
                }
                if !foreach {
                    self.declarators(scopes, vctr, false)?;
                }
            } else {
                self.expr_until(scopes, vctr, &[";"])?;
                self.expect_p(";")?;
            }
            if !foreach {
                self.expr_until(scopes, vctr, &[";"])?;
                self.expect_p(";")?;
                self.expr_until(scopes, vctr, &[")"])?;
                self.expect_p(")")?;
            }
            if self.at_p("{") {
                self.block(scopes, vctr)
            } else {
                self.statement(scopes, vctr)
            }
        })();
        scopes.pop();
        r
    }

    fn resource_decl(&mut self, scopes: &mut Vec<Scope>, vctr: &mut usize) -> Result<()> {
        while self.at_p("@") {
            self.pass_annotation();
        }
        while self.at_kw("final") {
            self.pass();
        }
        self.pass_type()?;
        match self.cur().cloned() {
            Some(Tok::Ident(name)) => {
                *vctr += 1;
                let rep = format!("v{vctr}");
                scopes.last_mut().expect("scope stack").insert(name, rep.clone());
                self.emit_ident(rep);
            }
            other => {
                return Err(norm_err(format!(
                    "expected a resource name but found {:?}",
                    other.as_ref().map(Tok::text).unwrap_or("end of input")
                )))
            }
        }
        if self.at_p("=") {
            self.pass();
            self.expr_until(scopes, vctr, &[";", ")"])?;
        }
        Ok(())
    }

    fn looks_like_declaration(&self) -> bool {
        let mut j = self.pos;
        while self.toks.get(j).map_or(false, |t| t.is_p("@")) {
            j = skip_annotation(&self.toks, j);
        }
        while self.toks.get(j).map_or(false, |t| t.is_kw("final")) {
            j += 1;
        }
        let Some(after_ty) = type_end(&self.toks, j) else {
            return false;
        };
        let Some(Tok::Ident(_)) = self.toks.get(after_ty) else {
            return false;
        };
        match self.toks.get(after_ty + 1) {
            Some(t) if t.is_p("=") || t.is_p(";") || t.is_p(",") || t.is_p(":") => true,
            Some(t) if t.is_p("[") => self.toks.get(after_ty + 2).map_or(false, |u| u.is_p("]")),
            _ => false,
        }
    }

    // -- expressions ---------------------------------------------------------

    /// Walks expression tokens, renaming resolvable identifiers, until one of
    /// `stops` appears at delimiter depth zero. The stop token is not
    /// consumed. A '}' at depth zero also ends the walk.
    fn expr_until(&mut self, scopes: &mut Vec<Scope>, vctr: &mut usize, stops: &[&str]) -> Result<()> {
        let mut par = 0i32;
        let mut brk = 0i32;
        let mut brc = 0i32;
        loop {
            let Some(tok) = self.cur().cloned() else {
                return Err(norm_err("unterminated expression"));
            };
            if par == 0 && brk == 0 && brc == 0 {
                if let Tok::P(p) = &tok {
                    if stops.contains(p) {
                        return Ok(());
                    }
                    if *p == "}" {
                        return Ok(());
                    }
                }
            }
            match &tok {
                Tok::P("(") => {
                    if self.lambda_at_paren(scopes, vctr)? {
                        continue;
                    }
                    par += 1;
                    self.pass();
                }
                Tok::P(")") => {
                    par -= 1;
                    if par < 0 {
                        return Err(norm_err("unbalanced ')' in expression"));
                    }
                    self.pass();
                }
                Tok::P("[") => {
                    brk += 1;
                    self.pass();
                }
                Tok::P("]") => {
                    brk -= 1;
                    self.pass();
                }
                Tok::P("{") => {
                    brc += 1;
                    self.pass();
                }
                Tok::P("}") => {
                    brc -= 1;
                    self.pass();
                }
                Tok::P("<") if is_generic_open(&self.toks, self.pos) => {
                    // Type arguments pass through whole so the commas inside
                    // them never read as expression separators.
                    let mut depth: i32 = 0;
                    loop {
                        let Some(t) = self.cur() else {
                            return Err(norm_err("unterminated type arguments"));
                        };
                        match t {
                            Tok::P("<") => depth += 1,
                            Tok::P(">") => depth -= 1,
                            Tok::P(">>") => depth -= 2,
                            Tok::P(">>>") => depth -= 3,
                            _ => {}
                        }
                        self.pass();
                        if depth <= 0 {
                            break;
                        }
                    }
                }
                Tok::Ident(name) => {
                    // Single-parameter lambda: `x -> …`
                    if self.toks.get(self.pos + 1).map_or(false, |t| t.is_p("->"))
                        && !self.prev_is_dot()
                    {
                        let name = name.clone();
                        self.lambda_single(scopes, vctr, name)?;
                        continue;
                    }
                    let rep = self.resolve(name, scopes);
                    match rep {
                        Some(r) => self.emit_ident(r),
                        None => self.pass(),
                    }
                }
                _ => self.pass(),
            }
        }
    }

    fn prev_is_dot(&self) -> bool {
        self.pos > 0 && self.toks[self.pos - 1].is_p(".")
    }

    /// Resolution rule for an identifier in expression position: member
    /// accesses after '.' keep their name unless the receiver is a bare
    /// `this`; names followed by '(' are calls and keep their name; the name
    /// after `new` is a type. Everything else resolves against the scope
    /// stack, innermost first.
    fn resolve(&self, name: &str, scopes: &[Scope]) -> Option<String> {
        let prev = self.pos.checked_sub(1).map(|i| &self.toks[i]);
        let next = self.toks.get(self.pos + 1);
        if next.map_or(false, |t| t.is_p("(")) {
            return None;
        }
        if let Some(p) = prev {
            if p.is_p(".") {
                let before = self.pos.checked_sub(2).map(|i| &self.toks[i]);
                let qualifier_is_bare_this = before.map_or(false, |t| t.is_kw("this"))
                    && self.pos.checked_sub(3).map_or(true, |i| !self.toks[i].is_p("."));
                if qualifier_is_bare_this {
                    return scopes[0].get(name).cloned();
                }
                return None;
            }
            if p.is_kw("new") || p.is_p("@") {
                return None;
            }
        }
        for scope in scopes.iter().rev() {
            if let Some(r) = scope.get(name) {
                return Some(r.clone());
            }
        }
        None
    }

    /// Handles `( … ) -> …` lambdas when positioned at '('. Returns true if a
    /// lambda was consumed (parameters declared and emitted, body handled for
    /// block form).
    fn lambda_at_paren(&mut self, scopes: &mut Vec<Scope>, vctr: &mut usize) -> Result<bool> {
        let Some(close) = matching_paren(&self.toks, self.pos) else {
            return Ok(false);
        };
        if !self.toks.get(close + 1).map_or(false, |t| t.is_p("->")) {
            return Ok(false);
        }
        let block_body = self.toks.get(close + 2).map_or(false, |t| t.is_p("{"));
        scopes.push(Scope::new());
        let r = (|| {
            self.pass(); // '('
            while !self.at_p(")") {
                if self.at_p(",") {
                    self.pass();
                    continue;
                }
                if self.at_p("@") {
                    self.pass_annotation();
                    continue;
                }
                if self.at_kw("final") {
                    self.pass();
                    continue;
                }
                // Typed parameter if a type precedes the name.
                if let Some(after_ty) = type_end(&self.toks, self.pos) {
                    if self.toks.get(after_ty).map_or(false, Tok::is_ident) && after_ty > self.pos {
                        self.pass_type()?;
                    }
                }
                match self.cur().cloned() {
                    Some(Tok::Ident(name)) => {
                        *vctr += 1;
                        let rep = format!("v{vctr}");
                        scopes.last_mut().expect("scope stack").insert(name, rep.clone());
                        self.emit_ident(rep);
                    }
                    other => {
                        return Err(norm_err(format!(
                            "expected a lambda parameter but found {:?}",
                            other.as_ref().map(Tok::text).unwrap_or("end of input")
                        )))
                    }
                }
            }
            self.pass(); // ')'
            self.pass(); // '->'
            if block_body {
                self.block(scopes, vctr)?;
            }
            Ok(())
        })();
        if !block_body {
            // Expression body: the parameter stays visible while the enclosing
            // expression walk continues; the scope entry is merged downward.
            let lambda_scope = scopes.pop().expect("scope stack");
            if let Some(inner) = scopes.last_mut() {
                for (k, v) in lambda_scope {
                    inner.insert(k, v);
                }
            }
            r?;
            return Ok(true);
        }
        scopes.pop();
        r?;
        Ok(true)
    }

    fn lambda_single(&mut self, scopes: &mut Vec<Scope>, vctr: &mut usize, name: String) -> Result<()> {
        let block_body = self.toks.get(self.pos + 2).map_or(false, |t| t.is_p("{"));
        *vctr += 1;
        let rep = format!("v{vctr}");
        if block_body {
            scopes.push(Scope::new());
            scopes.last_mut().expect("scope stack").insert(name, rep.clone());
            self.emit_ident(rep);
            self.pass(); // '->'
            let r = self.block(scopes, vctr);
            scopes.pop();
            r
        } else {
            scopes.last_mut().expect("scope stack").insert(name, rep.clone());
            self.emit_ident(rep);
            self.pass(); // '->'
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

const BINARY_OPS: &[&str] = &[
    "+", "-", "*", "/", "%", "=", "==", "!=", "<=", ">=", "&&", "||", "&", "|", "^", "<<", ">>",
    ">>>", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>=", "?", "->",
    "instanceof",
];

fn is_generic_open(toks: &[Tok], i: usize) -> bool {
    let prev_ok = i > 0
        && matches!(&toks[i - 1], Tok::Ident(_))
        || (i > 0 && matches!(&toks[i - 1], Tok::P(p) if matches!(*p, ">" | ">>" | ">>>" | "]" | ".")));
    if !prev_ok {
        return false;
    }
    // Tolerant angle scan: when this `<` is nested inside another generic, a
    // single `>>`/`>>>` may close more levels than were opened here.
    let mut depth: i32 = 0;
    let mut j = i;
    while j < toks.len() {
        match &toks[j] {
            Tok::P("<") => depth += 1,
            Tok::P(">") => depth -= 1,
            Tok::P(">>") => depth -= 2,
            Tok::P(">>>") => depth -= 3,
            Tok::Ident(_) | Tok::P(".") | Tok::P(",") | Tok::P("?") | Tok::P("&")
            | Tok::P("[") | Tok::P("]") | Tok::P("@") => {}
            Tok::Kw(k) if *k == "extends" || *k == "super" || PRIMITIVES.contains(k) => {}
            _ => return false,
        }
        if depth <= 0 {
            return true;
        }
        j += 1;
    }
    false
}

fn print_tokens(toks: &[Tok]) -> String {
    #[derive(PartialEq)]
    enum Brace {
        Block,
        Expr,
    }
    let mut out = String::new();
    let mut indent: usize = 0;
    let mut at_line_start = true;
    let mut braces: Vec<Brace> = Vec::new();
    let mut paren_depth: i32 = 0;
    let mut angle_depth: i32 = 0;
    let mut prev: Option<&Tok> = None;
    let mut prev_was_prefix = false;
    let mut prev_angle = false; // previous token was a generic '<'/'>' family

    let newline = |out: &mut String| {
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };

    for (i, tok) in toks.iter().enumerate() {
        let text = tok.text();

        // Brace classification.
        let mut this_brace: Option<Brace> = None;
        if tok.is_p("{") {
            let expr = match prev {
                Some(Tok::P(p)) if matches!(*p, "=" | "," | "(" | "[" | "]") => true,
                Some(Tok::P("{")) => braces.last() == Some(&Brace::Expr),
                Some(Tok::Kw("return")) => true,
                _ => false,
            };
            this_brace = Some(if expr { Brace::Expr } else { Brace::Block });
        }

        // Decide the separator before this token.
        let cur_generic_open = tok.is_p("<") && is_generic_open(toks, i);
        let sep = if at_line_start {
            if tok.is_p("}") && braces.last() == Some(&Brace::Block) {
                indent = indent.saturating_sub(1);
            }
            for _ in 0..indent {
                out.push_str("    ");
            }
            ""
        } else {
            separator(prev, tok, cur_generic_open, angle_depth, prev_was_prefix, prev_angle)
        };
        if !at_line_start && tok.is_p("}") && braces.last() == Some(&Brace::Block) {
            // Block close must start its own line.
            newline(&mut out);
            indent = indent.saturating_sub(1);
            for _ in 0..indent {
                out.push_str("    ");
            }
        } else {
            out.push_str(sep);
        }
        out.push_str(text);
        at_line_start = false;

        // Track depths and line breaks.
        prev_was_prefix = false;
        prev_angle = false;
        match tok {
            Tok::P("(") => paren_depth += 1,
            Tok::P(")") => paren_depth -= 1,
            Tok::P("<") => {
                if is_generic_open(toks, i) {
                    angle_depth += 1;
                    prev_angle = true;
                }
            }
            Tok::P(">") if angle_depth > 0 => {
                angle_depth -= 1;
                prev_angle = true;
            }
            Tok::P(">>") if angle_depth > 1 => {
                angle_depth -= 2;
                prev_angle = true;
            }
            Tok::P(">>>") if angle_depth > 2 => {
                angle_depth -= 3;
                prev_angle = true;
            }
            Tok::P(p) if matches!(*p, "+" | "-" | "++" | "--" | "!" | "~") => {
                let prefix = match prev {
                    None => true,
                    Some(Tok::P(q)) => !matches!(*q, ")" | "]"),
                    Some(Tok::Kw(k)) => matches!(*k, "return" | "case" | "yield" | "else" | "throw" | "while" | "if" | "assert"),
                    Some(Tok::Ident(_)) | Some(Tok::Num(_)) | Some(Tok::Str(_)) | Some(Tok::Chr(_)) => false,
                };
                prev_was_prefix = prefix;
            }
            _ => {}
        }

        match tok {
            Tok::P("{") => {
                if this_brace == Some(Brace::Block) {
                    braces.push(Brace::Block);
                    indent += 1;
                    newline(&mut out);
                    at_line_start = true;
                } else {
                    braces.push(Brace::Expr);
                }
            }
            Tok::P("}") => {
                let kind = braces.pop().unwrap_or(Brace::Block);
                if kind == Brace::Block {
                    let next = toks.get(i + 1);
                    let stay = match next {
                        Some(Tok::Kw(k)) => matches!(*k, "else" | "catch" | "finally" | "while"),
                        Some(Tok::P(p)) => matches!(*p, ";" | "," | ")" | "."),
                        _ => false,
                    };
                    if !stay {
                        newline(&mut out);
                        at_line_start = true;
                    }
                }
            }
            Tok::P(";") if paren_depth == 0 => {
                newline(&mut out);
                at_line_start = true;
            }
            _ => {}
        }
        prev = Some(tok);
    }
    while out.ends_with(' ') || out.ends_with('\n') {
        out.pop();
    }
    out.push('\n');
    out
}

fn separator(
    prev: Option<&Tok>,
    cur: &Tok,
    cur_generic_open: bool,
    angle_depth: i32,
    prev_was_prefix: bool,
    prev_angle: bool,
) -> &'static str {
    let Some(prev) = prev else { return "" };
    let merge_guard = |sep: &'static str| -> &'static str {
        if sep.is_empty() {
            let a = prev.text().chars().last().unwrap_or(' ');
            let b = cur.text().chars().next().unwrap_or(' ');
            let opch = |c: char| "+-*/%=<>!&|^~?:.@".contains(c);
            let wordish = |c: char| c.is_alphanumeric() || c == '_' || c == '$';
            if (opch(a) && opch(b)) || (wordish(a) && wordish(b)) {
                return " ";
            }
        }
        sep
    };

    if prev_was_prefix {
        return merge_guard("");
    }
    if let Tok::P(p) = cur {
        match *p {
            ")" | "]" | ";" | "," | "." | "::" | "..." => return merge_guard(""),
            _ => {}
        }
    }
    if let Tok::P(p) = prev {
        match *p {
            "(" | "[" | "." | "::" | "@" | "~" | "!" => return merge_guard(""),
            _ => {}
        }
    }
    if let Tok::P(p) = cur {
        match *p {
            "(" => {
                return match prev {
                    Tok::Ident(_) => "",
                    Tok::P(q) if matches!(*q, ")" | "]") => "",
                    Tok::P(q) if matches!(*q, ">" | ">>" | ">>>") && prev_angle => "",
                    Tok::Kw(k) if matches!(*k, "this" | "super") => "",
                    _ => " ",
                }
            }
            "[" => {
                return match prev {
                    Tok::Ident(_) => "",
                    Tok::P(q) if matches!(*q, ")" | "]") => "",
                    Tok::P(q) if matches!(*q, ">" | ">>" | ">>>") && prev_angle => "",
                    Tok::Kw(k) if PRIMITIVES.contains(k) => "",
                    _ => " ",
                }
            }
            "++" | "--" => {
                // Postfix forms attach to the left.
                return match prev {
                    Tok::Ident(_) => "",
                    Tok::P(q) if matches!(*q, ")" | "]") => "",
                    _ => " ",
                };
            }
            "<" if cur_generic_open => return merge_guard(""),
            _ => {}
        }
    }

    // Generic-argument spacing: tight inside angles. Plain "" (no merge
    // guard): `<>`, `<?`, and `?>` never re-lex into a different token.
    if angle_depth > 0 {
        if let Tok::P(p) = cur {
            if matches!(*p, ">" | ">>" | ">>>" | "&" | "?") {
                return "";
            }
        }
        if let Tok::P(p) = prev {
            if matches!(*p, "<" | "?") {
                return "";
            }
        }
    }
    if prev_angle {
        // After closing a generic: `List<String> name` needs a space, while
        // `<>()` and `<String>[` stay tight (handled above for '(' and '[').
        return match cur {
            Tok::Ident(_) | Tok::Kw(_) => " ",
            Tok::P(p) if matches!(*p, ">" | ">>" | ">>>") => merge_guard(""),
            _ => " ",
        };
    }
    if let Tok::P(p) = cur {
        if BINARY_OPS.contains(p) || matches!(*p, "<" | ">" | ">>" | ">>>" | ":") {
            return " ";
        }
    }
    if let Tok::P(p) = prev {
        if *p == ":" || *p == "," || *p == ";" || *p == "?" || *p == "->" {
            return " ";
        }
        if BINARY_OPS.contains(p) || matches!(*p, "<" | ">" | ">>" | ">>>") {
            return " ";
        }
    }
    " "
}

// ---------------------------------------------------------------------------
// Public API
// ---------------------------------------------------------------------------

/// Normalizes a Java compilation unit: comments removed, parameters renamed
/// `p1, p2, …` per method, fields and locals renamed `v1, v2, …` in
/// declaration order per type, class/method names preserved, canonical
/// layout. Fails with a normalization error when the input does not have the
/// structure of a Java program.
pub fn normalize_java(src: &str) -> Result<String> {
    let toks = lex(src)?;
    if toks.is_empty() {
        return Err(norm_err("empty source"));
    }
    check_balanced(&toks)?;
    let mut renamer = Renamer { toks, pos: 0, out: Vec::new() };
    renamer.compilation_unit()?;
    Ok(print_tokens(&renamer.out))
}

/// Lexical token texts of a Java source, in order. Comments and whitespace
/// are dropped. Used as the token stream for embedding-based similarity.
pub fn lex_token_texts(src: &str) -> Result<Vec<String>> {
    Ok(lex(src)?.iter().map(|t| t.text().to_string()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_of_a_small_method() {
        let src = r#"
            class A {
                // sums two numbers
                int add(int alpha, int beta) {
                    int total = alpha + beta; /* running sum */
                    return total;
                }
            }
        "#;
        let expect = "class A {\n    int add(int p1, int p2) {\n        int v1 = p1 + p2;\n        return v1;\n    }\n}\n";
        assert_eq!(normalize_java(src).unwrap(), expect);
    }

    #[test]
    fn alpha_renamed_variants_normalize_identically() {
        let a = r#"
            public class Calc {
                private int counter;
                public int scale(int factor) {
                    int result = counter * factor;
                    for (int i = 0; i < factor; i++) {
                        result += i;
                    }
                    return result;
                }
            }
        "#;
        let b = r#"
            public class Calc {
                private int total;
                public int scale(int multiplier) {
                    int acc = total * multiplier;
                    for (int idx = 0; idx < multiplier; idx++) {
                        acc += idx;
                    }
                    return acc;
                }
            }
        "#;
        assert_eq!(normalize_java(a).unwrap(), normalize_java(b).unwrap());
    }

    #[test]
    fn fields_then_locals_share_the_counter() {
        let src = "class C { int first; int second; void go() { int third = first + second; } }";
        let out = normalize_java(src).unwrap();
        assert!(out.contains("int v1"), "{out}");
        assert!(out.contains("int v2"), "{out}");
        assert!(out.contains("int v3 = v1 + v2"), "{out}");
    }

    #[test]
    fn this_access_renamed_other_object_access_preserved() {
        let src = "class B { int count; void bump(B other) { this.count = other.count + count; } }";
        let out = normalize_java(src).unwrap();
        assert!(out.contains("this.v1 = p1.count + v1"), "{out}");
    }

    #[test]
    fn class_and_method_names_survive() {
        let src = "class Inventory { int tally(int units) { return units; } }";
        let out = normalize_java(src).unwrap();
        assert!(out.contains("class Inventory"));
        assert!(out.contains("int tally(int p1)"));
        assert!(!out.contains("units"));
    }

    #[test]
    fn comments_and_string_contents_handled() {
        let src = "class S { String greet(String name) { // drops name\n return \"hello name\" + name; } }";
        let out = normalize_java(src).unwrap();
        assert!(!out.contains("drops"));
        assert!(out.contains("\"hello name\""), "string literal preserved verbatim: {out}");
        assert!(out.contains("+ p1"));
    }

    #[test]
    fn idempotent_on_nontrivial_input() {
        let src = r#"
            public class Loop {
                static int[] data = {3, 1, 2};
                public static void main(String[] args) {
                    int sum = 0;
                    for (int value : data) {
                        if (value > 1) { sum += value; } else { sum -= value; }
                    }
                    System.out.println(sum);
                }
            }
        "#;
        let once = normalize_java(src).unwrap();
        let twice = normalize_java(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn prose_is_rejected() {
        let err = normalize_java("This is a short paragraph about mainframes, not a program.")
            .unwrap_err();
        assert!(matches!(err, Error::Normalize { .. }), "{err}");
    }

    #[test]
    fn truncated_source_is_rejected() {
        let err = normalize_java("class A { void f() { int x = 1;").unwrap_err();
        assert!(matches!(err, Error::Normalize { .. }), "{err}");
    }

    #[test]
    fn empty_and_garbage_rejected() {
        assert!(normalize_java("").is_err());
        assert!(normalize_java("#### ####").is_err());
        assert!(normalize_java("int x = 5;").is_err(), "statements without a class are rejected");
    }

    #[test]
    fn method_calls_and_member_access_keep_names() {
        let src = "class M { void run(java.util.List<String> items) { items.add(helper()); } String helper() { return \"x\"; } }";
        let out = normalize_java(src).unwrap();
        assert!(out.contains("p1.add(helper())"), "{out}");
    }

    #[test]
    fn catch_and_foreach_variables_renamed() {
        let src = r#"
            class E {
                void scan(int[] rows) {
                    try {
                        for (int row : rows) {
                            System.out.println(row);
                        }
                    } catch (RuntimeException boom) {
                        throw boom;
                    }
                }
            }
        "#;
        let out = normalize_java(src).unwrap();
        assert!(out.contains("for (int v1 : p1)"), "{out}");
        assert!(out.contains("catch (RuntimeException v2)"), "{out}");
        assert!(out.contains("throw v2;"), "{out}");
    }

    #[test]
    fn lambda_parameters_renamed() {
        let src = "class L { void go(java.util.List<Integer> xs) { xs.forEach(item -> System.out.println(item)); } }";
        let a = normalize_java(src).unwrap();
        let b = normalize_java(&src.replace("item", "element")).unwrap();
        assert_eq!(a, b);
        assert!(!a.contains("item"), "{a}");
    }

    #[test]
    fn generics_render_tightly() {
        let src = "class G { java.util.Map<String, java.util.List<Integer>> index = new java.util.HashMap<>(); }";
        let out = normalize_java(src).unwrap();
        assert!(out.contains("Map<String, java.util.List<Integer>> v1"), "{out}");
        assert!(out.contains("new java.util.HashMap<>()"), "{out}");
        assert_eq!(out, normalize_java(&out).unwrap());
    }

    #[test]
    fn shadowing_resolves_innermost() {
        let src = "class H { int size; int grow(int size) { int inner = size; return this.size + inner; } }";
        let out = normalize_java(src).unwrap();
        // Parameter shadows the field; `this.` reaches the field.
        assert!(out.contains("int v2 = p1;"), "{out}");
        assert!(out.contains("this.v1 + v2"), "{out}");
    }

    #[test]
    fn token_texts_for_embedding() {
        let toks = lex_token_texts("class A { int f() { return 1 + 2; } }").unwrap();
        assert_eq!(
            toks,
            vec!["class", "A", "{", "int", "f", "(", ")", "{", "return", "1", "+", "2", ";", "}", "}"]
        );
    }

    #[test]
    fn unterminated_comment_and_string_rejected() {
        assert!(normalize_java("class A { /* forever").is_err());
        assert!(normalize_java("class A { String s = \"oops; }").is_err());
    }

    #[test]
    fn static_main_and_println_pipeline_shape() {
        let src = r#"
            public class Main {
                public static void main(String[] args) {
                    int limit = 5;
                    int acc = 0;
                    while (acc < limit) {
                        acc++;
                    }
                    System.out.println(acc);
                }
            }
        "#;
        let out = normalize_java(src).unwrap();
        assert!(out.contains("public static void main(String[] p1)"), "{out}");
        assert!(out.contains("int v1 = 5;"), "{out}");
        assert!(out.contains("int v2 = 0;"), "{out}");
        assert!(out.contains("while (v2 < v1)"), "{out}");
        assert!(out.contains("System.out.println(v2);"), "{out}");
    }
}
