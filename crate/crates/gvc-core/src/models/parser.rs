//! Loader for the line-oriented model-definition language: declarations of
//! constants, fields, ghosts and antifields with index ranges, macro
//! definitions, and Lagrangian/gauge/identity/BRST statements with implicit
//! summation over repeated indices.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_traits::Zero;

use crate::jetcalc::{total_derivative, GradedDerivation, HForm};
use crate::kernel::{
    GradedExpr, JetVar, MultiIndex, Parity, Rational, SymbolDecl, SymbolId, SymbolRole,
    SymbolTable,
};
use crate::noether::{IdentityDensity, IdentityRow};

use super::{
    antisym_resolve, idx_name, levi_civita, metric_table, strict_tuples, validate_structure_constants,
    ConstTable, FieldModel, MetricKind, ModelError,
};

/// Parse or validation failure, with a source location for syntax errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    Syntax { line: usize, col: usize, message: String },
    Validation(String),
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax { line, col, message } => {
                write!(f, "parse error at {line}:{col}: {message}")
            }
            ParseError::Validation(m) => write!(f, "validation error: {m}"),
        }
    }
}

impl std::error::Error for ParseError {}

impl From<ModelError> for ParseError {
    fn from(e: ModelError) -> Self {
        ParseError::Validation(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    Arrow,
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    while let Some(&ch) = chars.peek() {
        let (tline, tcol) = (line, col);
        let bump = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        if ch.is_whitespace() {
            chars.next();
            bump(ch, &mut line, &mut col);
            continue;
        }
        if ch == '#' {
            while let Some(&c) = chars.peek() {
                chars.next();
                bump(c, &mut line, &mut col);
                if c == '\n' {
                    break;
                }
            }
            continue;
        }
        if ch.is_ascii_alphabetic() || ch == '_' {
            let mut name = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    name.push(c);
                    chars.next();
                    bump(c, &mut line, &mut col);
                } else {
                    break;
                }
            }
            if chars.peek() == Some(&'~') {
                name.push('~');
                chars.next();
                bump('~', &mut line, &mut col);
            }
            out.push(Token { tok: Tok::Ident(name), line: tline, col: tcol });
            continue;
        }
        if ch.is_ascii_digit() {
            let mut value: u64 = 0;
            while let Some(&c) = chars.peek() {
                if let Some(d) = c.to_digit(10) {
                    value = value * 10 + d as u64;
                    chars.next();
                    bump(c, &mut line, &mut col);
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Int(value), line: tline, col: tcol });
            continue;
        }
        if ch == '"' {
            chars.next();
            bump('"', &mut line, &mut col);
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('"') => {
                        bump('"', &mut line, &mut col);
                        break;
                    }
                    Some(c) => {
                        s.push(c);
                        bump(c, &mut line, &mut col);
                    }
                    None => {
                        return Err(ParseError::Syntax {
                            line: tline,
                            col: tcol,
                            message: "unterminated string".into(),
                        })
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), line: tline, col: tcol });
            continue;
        }
        if ch == '<' {
            chars.next();
            bump('<', &mut line, &mut col);
            if chars.peek() == Some(&'-') {
                chars.next();
                bump('-', &mut line, &mut col);
                out.push(Token { tok: Tok::Arrow, line: tline, col: tcol });
                continue;
            }
            return Err(ParseError::Syntax {
                line: tline,
                col: tcol,
                message: "expected `<-`".into(),
            });
        }
        if "[](){},;:=*+-/".contains(ch) {
            chars.next();
            bump(ch, &mut line, &mut col);
            out.push(Token { tok: Tok::Punct(ch), line: tline, col: tcol });
            continue;
        }
        return Err(ParseError::Syntax {
            line: tline,
            col: tcol,
            message: format!("unexpected character `{ch}`"),
        });
    }
    Ok(out)
}

/// Index expression: a symbolic index variable or a literal.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Idx {
    Var(String),
    Num(usize),
}

#[derive(Debug, Clone)]
enum Atom {
    Num(Rational),
    /// Field/ghost/antifield reference with field indices and jet indices.
    Sym { name: String, idx: Vec<Idx>, jet: Vec<Idx> },
    /// Constant table or macro call, disambiguated during expansion.
    Call { name: String, idx: Vec<Idx> },
    /// Total derivative d(expr, index).
    Deriv { inner: Box<ExprAst>, idx: Idx },
    Paren(Box<ExprAst>),
}

#[derive(Debug, Clone)]
struct TermAst {
    negative: bool,
    factors: Vec<Atom>,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
struct ExprAst {
    terms: Vec<TermAst>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn loc(&self) -> (usize, usize) {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|t| (t.line, t.col))
            .unwrap_or((0, 0))
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.loc();
        Err(ParseError::Syntax { line, col, message: message.into() })
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, c: char) -> Result<(), ParseError> {
        match self.next() {
            Some(Token { tok: Tok::Punct(p), .. }) if p == c => Ok(()),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                self.err(format!("expected `{c}`"))
            }
        }
    }

    fn try_punct(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Token { tok: Tok::Punct(p), .. }) if *p == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.next() {
            Some(Token { tok: Tok::Ident(s), .. }) => Ok(s),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                self.err("expected identifier")
            }
        }
    }

    fn int(&mut self) -> Result<u64, ParseError> {
        match self.next() {
            Some(Token { tok: Tok::Int(v), .. }) => Ok(v),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                self.err("expected integer")
            }
        }
    }

    fn idx(&mut self) -> Result<Idx, ParseError> {
        match self.next() {
            Some(Token { tok: Tok::Ident(s), .. }) => Ok(Idx::Var(s)),
            Some(Token { tok: Tok::Int(v), .. }) => Ok(Idx::Num(v as usize)),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                self.err("expected index")
            }
        }
    }

    fn idx_list(&mut self, terminators: &[char]) -> Result<Vec<Idx>, ParseError> {
        let mut out = Vec::new();
        loop {
            if let Some(Token { tok: Tok::Punct(p), .. }) = self.peek() {
                if terminators.contains(p) {
                    return Ok(out);
                }
            }
            out.push(self.idx()?);
            if !self.try_punct(',') {
                return Ok(out);
            }
        }
    }

    fn expr(&mut self) -> Result<ExprAst, ParseError> {
        let mut terms = Vec::new();
        let mut negative = self.try_punct('-');
        loop {
            let term = self.term(negative)?;
            terms.push(term);
            if self.try_punct('+') {
                negative = false;
            } else if self.try_punct('-') {
                negative = true;
            } else {
                break;
            }
        }
        Ok(ExprAst { terms })
    }

    fn term(&mut self, mut negative: bool) -> Result<TermAst, ParseError> {
        let (line, col) = self.loc();
        let mut factors = Vec::new();
        loop {
            while self.try_punct('-') {
                negative = !negative;
            }
            factors.push(self.factor()?);
            if !self.try_punct('*') {
                break;
            }
        }
        Ok(TermAst { negative, factors, line, col })
    }

    fn factor(&mut self) -> Result<Atom, ParseError> {
        match self.peek().cloned() {
            Some(Token { tok: Tok::Int(num), .. }) => {
                self.pos += 1;
                let mut value = Rational::from_integer(num.into());
                if self.try_punct('/') {
                    let den = self.int()?;
                    if den == 0 {
                        return self.err("zero denominator");
                    }
                    value /= Rational::from_integer(den.into());
                }
                Ok(Atom::Num(value))
            }
            Some(Token { tok: Tok::Punct('('), .. }) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.eat_punct(')')?;
                Ok(Atom::Paren(Box::new(inner)))
            }
            Some(Token { tok: Tok::Ident(name), .. }) => {
                self.pos += 1;
                if name == "d" && self.try_punct('(') {
                    let inner = self.expr()?;
                    self.eat_punct(',')?;
                    let idx = self.idx()?;
                    self.eat_punct(')')?;
                    return Ok(Atom::Deriv { inner: Box::new(inner), idx });
                }
                if self.try_punct('(') {
                    let idx = self.idx_list(&[')'])?;
                    self.eat_punct(')')?;
                    return Ok(Atom::Call { name, idx });
                }
                if self.try_punct('[') {
                    let idx = self.idx_list(&[';', ']'])?;
                    let jet = if self.try_punct(';') {
                        self.idx_list(&[']'])?
                    } else {
                        Vec::new()
                    };
                    self.eat_punct(']')?;
                    return Ok(Atom::Sym { name, idx, jet });
                }
                Ok(Atom::Sym { name, idx: Vec::new(), jet: Vec::new() })
            }
            _ => self.err("expected factor"),
        }
    }
}

#[derive(Debug, Clone)]
struct MacroDef {
    formals: Vec<String>,
    body: ExprAst,
}

#[derive(Debug, Clone)]
#[allow(dead_code)]
struct FamilyDecl {
    shape: Vec<usize>,
    antisym: bool,
    role: SymbolRole,
}

/// A concrete left-hand-side component and the index bindings it induces.
type PatternComponent = (SymbolId, BTreeMap<String, usize>);

/// Everything needed to expand expressions against a declared model.
struct Expander {
    n: usize,
    table: SymbolTable,
    families: BTreeMap<String, FamilyDecl>,
    constants: BTreeMap<String, ConstTable>,
    macros: BTreeMap<String, MacroDef>,
}

/// One index occurrence: the range its slot dictates and whether it sits
/// inside a subexpression (parenthesis or derivative argument), which owns
/// its purely local indices.
#[derive(Debug, Clone)]
struct SlotOccurrence {
    idx: Idx,
    range: usize,
    inside_subexpr: bool,
}

impl Expander {
    /// Range of one index expression in a given slot, for inference.
    fn slot_ranges(&self, atom: &Atom, out: &mut Vec<(Idx, usize)>) -> Result<(), ParseError> {
        let mut occ = Vec::new();
        self.slot_occurrences(atom, false, &mut occ)?;
        out.extend(occ.into_iter().map(|o| (o.idx, o.range)));
        Ok(())
    }

    fn slot_occurrences(
        &self,
        atom: &Atom,
        inside: bool,
        out: &mut Vec<SlotOccurrence>,
    ) -> Result<(), ParseError> {
        let push = |idx: &Idx, range: usize, out: &mut Vec<SlotOccurrence>| {
            out.push(SlotOccurrence { idx: idx.clone(), range, inside_subexpr: inside });
        };
        match atom {
            Atom::Num(_) => {}
            Atom::Sym { name, idx, jet } => {
                if let Some(fam) = self.families.get(name) {
                    if idx.len() != fam.shape.len() {
                        return Err(ParseError::Validation(format!(
                            "`{name}` expects {} indices, got {}",
                            fam.shape.len(),
                            idx.len()
                        )));
                    }
                    for (i, r) in idx.iter().zip(&fam.shape) {
                        push(i, *r, out);
                    }
                } else if idx.is_empty() && self.table.lookup(name).is_some() {
                    // scalar symbol
                } else {
                    return Err(ParseError::Validation(format!("undeclared symbol `{name}`")));
                }
                for j in jet {
                    push(j, self.n, out);
                }
            }
            Atom::Call { name, idx } => {
                if let Some(c) = self.constants.get(name) {
                    if idx.len() != c.dims.len() {
                        return Err(ParseError::Validation(format!(
                            "constant `{name}` expects {} indices, got {}",
                            c.dims.len(),
                            idx.len()
                        )));
                    }
                    for (i, r) in idx.iter().zip(&c.dims) {
                        push(i, *r, out);
                    }
                } else if let Some(m) = self.macros.get(name) {
                    if idx.len() != m.formals.len() {
                        return Err(ParseError::Validation(format!(
                            "macro `{name}` expects {} indices, got {}",
                            m.formals.len(),
                            idx.len()
                        )));
                    }
                    // Macro formal ranges are inferred from the body.
                    let ranges = self.macro_formal_ranges(name)?;
                    for (i, r) in idx.iter().zip(ranges) {
                        push(i, r, out);
                    }
                } else {
                    return Err(ParseError::Validation(format!(
                        "unknown constant or macro `{name}`"
                    )));
                }
            }
            Atom::Deriv { inner, idx } => {
                push(idx, self.n, out);
                for term in &inner.terms {
                    for f in &term.factors {
                        self.slot_occurrences(f, true, out)?;
                    }
                }
            }
            Atom::Paren(inner) => {
                for term in &inner.terms {
                    for f in &term.factors {
                        self.slot_occurrences(f, true, out)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn macro_formal_ranges(&self, name: &str) -> Result<Vec<usize>, ParseError> {
        let m = &self.macros[name];
        let mut found: BTreeMap<String, usize> = BTreeMap::new();
        for term in &m.body.terms {
            let mut slots = Vec::new();
            for f in &term.factors {
                self.slot_ranges(f, &mut slots)?;
            }
            for (idx, r) in slots {
                if let Idx::Var(v) = idx {
                    if m.formals.contains(&v) {
                        if let Some(prev) = found.insert(v.clone(), r) {
                            if prev != r {
                                return Err(ParseError::Validation(format!(
                                    "macro `{name}` formal `{v}` has conflicting ranges"
                                )));
                            }
                        }
                    }
                }
            }
        }
        m.formals
            .iter()
            .map(|f| {
                found.get(f).copied().ok_or_else(|| {
                    ParseError::Validation(format!("macro `{name}` formal `{f}` range unknown"))
                })
            })
            .collect()
    }

    /// Expands one expression under the given index bindings; unbound indices
    /// occurring at least twice in a term are summed over their inferred
    /// ranges, unbound single occurrences are an error.
    fn expand(
        &self,
        expr: &ExprAst,
        env: &BTreeMap<String, usize>,
    ) -> Result<GradedExpr, ParseError> {
        let mut out = GradedExpr::zero();
        for term in &expr.terms {
            out = out.add(&self.expand_term(term, env)?);
        }
        Ok(out)
    }

    fn expand_term(
        &self,
        term: &TermAst,
        env: &BTreeMap<String, usize>,
    ) -> Result<GradedExpr, ParseError> {
        // Collect index occurrences per top-level factor. A variable is
        // summed at this level when it occurs at least twice and either
        // appears outside every subexpression or spans several factors;
        // indices purely local to one parenthesis or derivative argument are
        // summed by that subexpression's own expansion.
        struct Info {
            count: usize,
            outside: usize,
            factors: std::collections::BTreeSet<usize>,
            range: usize,
        }
        let mut counts: BTreeMap<String, Info> = BTreeMap::new();
        for (fi, f) in term.factors.iter().enumerate() {
            let mut occ = Vec::new();
            self.slot_occurrences(f, false, &mut occ)?;
            for o in occ {
                let Idx::Var(v) = o.idx else { continue };
                if env.contains_key(&v) {
                    continue;
                }
                let e = counts.entry(v.clone()).or_insert(Info {
                    count: 0,
                    outside: 0,
                    factors: std::collections::BTreeSet::new(),
                    range: o.range,
                });
                e.count += 1;
                if !o.inside_subexpr {
                    e.outside += 1;
                }
                e.factors.insert(fi);
                if e.range != o.range {
                    return Err(ParseError::Syntax {
                        line: term.line,
                        col: term.col,
                        message: format!("index `{v}` used with conflicting ranges"),
                    });
                }
            }
        }
        let mut summed: Vec<(String, usize)> = Vec::new();
        for (v, info) in &counts {
            if info.count >= 2 && (info.outside >= 1 || info.factors.len() >= 2) {
                summed.push((v.clone(), info.range));
            } else if info.outside == info.count {
                // Occurs only at the top level and only once: a free index.
                return Err(ParseError::Syntax {
                    line: term.line,
                    col: term.col,
                    message: format!("free index `{v}` is not bound"),
                });
            }
            // Otherwise the variable is local to one subexpression and is
            // handled (or reported) when that subexpression expands.
        }
        let mut out = GradedExpr::zero();
        let mut assignment = vec![0usize; summed.len()];
        loop {
            let mut local = env.clone();
            for ((v, _), val) in summed.iter().zip(&assignment) {
                local.insert(v.clone(), *val);
            }
            let mut product = GradedExpr::one();
            for f in &term.factors {
                let value = self.eval_atom(f, &local, term)?;
                product = product.mul(&value, &self.table);
                if product.is_zero() {
                    break;
                }
            }
            if term.negative {
                product = product.neg();
            }
            out = out.add(&product);
            // Advance the multi-counter.
            let mut i = 0;
            loop {
                if i == summed.len() {
                    return Ok(out);
                }
                assignment[i] += 1;
                if assignment[i] < summed[i].1 {
                    break;
                }
                assignment[i] = 0;
                i += 1;
            }
        }
    }

    fn resolve_idx(
        &self,
        idx: &Idx,
        env: &BTreeMap<String, usize>,
        term: &TermAst,
    ) -> Result<usize, ParseError> {
        match idx {
            Idx::Num(v) => Ok(*v),
            Idx::Var(v) => env.get(v).copied().ok_or(ParseError::Syntax {
                line: term.line,
                col: term.col,
                message: format!("unbound index `{v}`"),
            }),
        }
    }

    fn eval_atom(
        &self,
        atom: &Atom,
        env: &BTreeMap<String, usize>,
        term: &TermAst,
    ) -> Result<GradedExpr, ParseError> {
        match atom {
            Atom::Num(v) => Ok(GradedExpr::constant(v.clone())),
            Atom::Sym { name, idx, jet } => {
                let concrete: Vec<usize> = idx
                    .iter()
                    .map(|i| self.resolve_idx(i, env, term))
                    .collect::<Result<_, _>>()?;
                let jets: Vec<usize> = jet
                    .iter()
                    .map(|i| self.resolve_idx(i, env, term))
                    .collect::<Result<_, _>>()?;
                let (full_name, sign) = match self.families.get(name) {
                    Some(fam) if fam.antisym => match antisym_resolve(&concrete) {
                        Some((sorted, sign)) => (idx_name(name, &sorted), sign),
                        None => return Ok(GradedExpr::zero()),
                    },
                    _ => (idx_name(name, &concrete), 1),
                };
                let Some(id) = self.table.lookup(&full_name) else {
                    return Err(ParseError::Syntax {
                        line: term.line,
                        col: term.col,
                        message: format!("undeclared symbol `{full_name}`"),
                    });
                };
                for &j in &jets {
                    if j >= self.n {
                        return Err(ParseError::Syntax {
                            line: term.line,
                            col: term.col,
                            message: format!("jet index {j} out of range"),
                        });
                    }
                }
                let jet_idx: Vec<u8> = jets.iter().map(|&j| j as u8).collect();
                let e = GradedExpr::var(JetVar::new(id, MultiIndex::new(&jet_idx)));
                Ok(if sign < 0 { e.neg() } else { e })
            }
            Atom::Call { name, idx } => {
                let concrete: Vec<usize> = idx
                    .iter()
                    .map(|i| self.resolve_idx(i, env, term))
                    .collect::<Result<_, _>>()?;
                if let Some(c) = self.constants.get(name) {
                    for (v, dim) in concrete.iter().zip(&c.dims) {
                        if v >= dim {
                            return Err(ParseError::Syntax {
                                line: term.line,
                                col: term.col,
                                message: format!("constant index {v} out of range for `{name}`"),
                            });
                        }
                    }
                    return Ok(GradedExpr::constant(c.get(&concrete)));
                }
                if let Some(m) = self.macros.get(name).cloned() {
                    let mut inner_env = BTreeMap::new();
                    for (f, v) in m.formals.iter().zip(concrete) {
                        inner_env.insert(f.clone(), v);
                    }
                    return self.expand(&m.body, &inner_env);
                }
                Err(ParseError::Syntax {
                    line: term.line,
                    col: term.col,
                    message: format!("unknown constant or macro `{name}`"),
                })
            }
            Atom::Deriv { inner, idx } => {
                let lam = self.resolve_idx(idx, env, term)?;
                if lam >= self.n {
                    return Err(ParseError::Syntax {
                        line: term.line,
                        col: term.col,
                        message: format!("derivative index {lam} out of range"),
                    });
                }
                let e = self.expand(inner, env)?;
                Ok(total_derivative(&self.table, &e, lam as u8))
            }
            Atom::Paren(inner) => self.expand(inner, env),
        }
    }

    /// Enumerates the concrete components of an LHS pattern like `a[r,mu]`;
    /// antisymmetric families range over sorted strict tuples only.
    fn pattern_components(
        &self,
        name: &str,
        idx: &[Idx],
        line: usize,
        col: usize,
    ) -> Result<Vec<PatternComponent>, ParseError> {
        let fam = self.families.get(name).ok_or(ParseError::Syntax {
            line,
            col,
            message: format!("undeclared symbol `{name}`"),
        })?;
        if idx.len() != fam.shape.len() {
            return Err(ParseError::Syntax {
                line,
                col,
                message: format!("`{name}` expects {} indices", fam.shape.len()),
            });
        }
        let vars: Vec<&str> = idx
            .iter()
            .map(|i| match i {
                Idx::Var(v) => Ok(v.as_str()),
                Idx::Num(_) => Err(ParseError::Syntax {
                    line,
                    col,
                    message: "left-hand patterns use index variables".into(),
                }),
            })
            .collect::<Result<_, _>>()?;
        let tuples: Vec<Vec<usize>> = if fam.antisym {
            let k = fam.shape.len();
            strict_tuples(fam.shape.first().copied().unwrap_or(self.n), k)
        } else {
            let mut out = vec![Vec::new()];
            for r in &fam.shape {
                let mut next = Vec::new();
                for prefix in &out {
                    for v in 0..*r {
                        let mut p = prefix.clone();
                        p.push(v);
                        next.push(p);
                    }
                }
                out = next;
            }
            out
        };
        let mut components = Vec::new();
        for tup in tuples {
            let full_name = idx_name(name, &tup);
            let id = self.table.lookup(&full_name).ok_or(ParseError::Syntax {
                line,
                col,
                message: format!("undeclared component `{full_name}`"),
            })?;
            let mut env = BTreeMap::new();
            for (v, val) in vars.iter().zip(&tup) {
                env.insert((*v).to_string(), *val);
            }
            components.push((id, env));
        }
        Ok(components)
    }
}

/// Loads a model definition from a file.
pub fn load_model(path: impl AsRef<Path>) -> Result<FieldModel, ParseError> {
    let src = std::fs::read_to_string(path.as_ref())
        .map_err(|e| ParseError::Validation(format!("cannot read model file: {e}")))?;
    load_model_str(&src)
}

/// Loads a model definition from source text.
pub fn load_model_str(src: &str) -> Result<FieldModel, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };

    let mut name = String::new();
    let mut dim: Option<usize> = None;
    let mut metric = MetricKind::Minkowski;
    let mut expander = Expander {
        n: 0,
        table: SymbolTable::with_base_dim(0),
        families: BTreeMap::new(),
        constants: BTreeMap::new(),
        macros: BTreeMap::new(),
    };
    let mut table_ready = false;
    let mut lagrangian: Option<GradedExpr> = None;
    let mut gauge_stage_stmts: BTreeMap<usize, BTreeMap<SymbolId, GradedExpr>> = BTreeMap::new();
    let mut identity_stmts: BTreeMap<usize, Vec<IdentityRow>> = BTreeMap::new();
    let mut gamma: BTreeMap<SymbolId, GradedExpr> = BTreeMap::new();
    let mut has_gauge = false;

    while p.peek().is_some() {
        let keyword = p.ident()?;
        match keyword.as_str() {
            "model" => {
                name = match p.next() {
                    Some(Token { tok: Tok::Str(s), .. }) => s,
                    _ => return p.err("expected model name string"),
                };
            }
            "dim" => {
                let n = p.int()? as usize;
                if n == 0 || n > 16 {
                    return p.err("dimension must be between 1 and 16");
                }
                dim = Some(n);
            }
            "metric" => {
                let kind = p.ident()?;
                metric = match kind.as_str() {
                    "minkowski" => MetricKind::Minkowski,
                    "euclidean" => MetricKind::Euclidean,
                    _ => return p.err("metric must be `minkowski` or `euclidean`"),
                };
            }
            "constant" => {
                let n = require_dim(&dim, &p)?;
                ensure_tables(&mut expander, &mut table_ready, n, metric);
                let cname = p.ident()?;
                p.eat_punct('[')?;
                let dims: Vec<usize> = {
                    let mut out = Vec::new();
                    loop {
                        out.push(p.int()? as usize);
                        if !p.try_punct(',') {
                            break;
                        }
                    }
                    out
                };
                p.eat_punct(']')?;
                p.eat_punct('=')?;
                p.eat_punct('{')?;
                let mut entries: Vec<(Vec<usize>, Rational)> = Vec::new();
                while !p.try_punct('}') {
                    p.eat_punct('[')?;
                    let mut idx = Vec::new();
                    loop {
                        idx.push(p.int()? as usize);
                        if !p.try_punct(',') {
                            break;
                        }
                    }
                    p.eat_punct(']')?;
                    p.eat_punct('=')?;
                    let negative = p.try_punct('-');
                    let num = p.int()?;
                    let mut value = Rational::from_integer(num.into());
                    if p.try_punct('/') {
                        let den = p.int()?;
                        if den == 0 {
                            return p.err("zero denominator");
                        }
                        value /= Rational::from_integer(den.into());
                    }
                    if negative {
                        value = -value;
                    }
                    entries.push((idx, value));
                    p.try_punct(',');
                }
                // Symmetry tags.
                let mut syms: Vec<(bool, usize, usize)> = Vec::new();
                if matches!(p.peek(), Some(Token { tok: Tok::Ident(w), .. }) if w == "with") {
                    p.ident()?;
                    p.eat_punct('{')?;
                    while !p.try_punct('}') {
                        let tag = p.ident()?;
                        let anti = match tag.as_str() {
                            "antisym" => true,
                            "sym" => false,
                            _ => return p.err("expected `antisym` or `sym`"),
                        };
                        p.eat_punct('(')?;
                        let i = p.int()? as usize;
                        p.eat_punct(',')?;
                        let j = p.int()? as usize;
                        p.eat_punct(')')?;
                        syms.push((anti, i, j));
                        p.try_punct(',');
                    }
                }
                let table = build_constant(&cname, dims, entries, &syms)?;
                if cname == "c3" {
                    let d = table.dims[0];
                    validate_structure_constants(&table, d)?;
                }
                expander.constants.insert(cname, table);
            }
            "field" | "ghost" | "antifield" => {
                let n = require_dim(&dim, &p)?;
                ensure_tables(&mut expander, &mut table_ready, n, metric);
                let fname = p.ident()?;
                let mut shape = Vec::new();
                if p.try_punct('[') {
                    loop {
                        shape.push(p.int()? as usize);
                        if !p.try_punct(',') {
                            break;
                        }
                    }
                    p.eat_punct(']')?;
                }
                let w = p.ident()?;
                if w != "parity" {
                    return p.err("expected `parity`");
                }
                let parity = match p.ident()?.as_str() {
                    "even" => Parity::Even,
                    "odd" => Parity::Odd,
                    _ => return p.err("parity must be `even` or `odd`"),
                };
                let mut stage: Option<i64> = None;
                let mut antisym = false;
                while let Some(Token { tok: Tok::Ident(w), .. }) = p.peek() {
                    match w.as_str() {
                        "stage" => {
                            p.ident()?;
                            stage = Some(p.int()? as i64);
                        }
                        "antisym" => {
                            p.ident()?;
                            antisym = true;
                        }
                        _ => break,
                    }
                }
                declare_family(
                    &mut expander,
                    &keyword,
                    &fname,
                    shape,
                    parity,
                    stage,
                    antisym,
                )?;
            }
            "def" => {
                let mname = p.ident()?;
                p.eat_punct('(')?;
                let mut formals = Vec::new();
                loop {
                    formals.push(p.ident()?);
                    if !p.try_punct(',') {
                        break;
                    }
                }
                p.eat_punct(')')?;
                p.eat_punct('=')?;
                let body = p.expr()?;
                expander.macros.insert(mname, MacroDef { formals, body });
            }
            "lagrangian" => {
                p.eat_punct('=')?;
                let ast = p.expr()?;
                lagrangian = Some(expander.expand(&ast, &BTreeMap::new())?);
            }
            "gauge" => {
                has_gauge = true;
                let w = p.ident()?;
                if w != "stage" {
                    return p.err("expected `stage`");
                }
                let stage = p.int()? as usize;
                p.eat_punct(':')?;
                let (line, col) = p.loc();
                let target = p.ident()?;
                let idx = if p.try_punct('[') {
                    let v = p.idx_list(&[']'])?;
                    p.eat_punct(']')?;
                    v
                } else {
                    Vec::new()
                };
                match p.next() {
                    Some(Token { tok: Tok::Arrow, .. }) => {}
                    _ => return p.err("expected `<-`"),
                }
                let rhs = p.expr()?;
                for (id, env) in expander.pattern_components(&target, &idx, line, col)? {
                    let value = expander.expand(&rhs, &env)?;
                    gauge_stage_stmts.entry(stage).or_default().insert(id, value);
                }
            }
            "identity" => {
                let w = p.ident()?;
                if w != "stage" {
                    return p.err("expected `stage`");
                }
                let stage = p.int()? as usize;
                p.eat_punct(':')?;
                let (line, col) = p.loc();
                let target = p.ident()?;
                let idx = if p.try_punct('[') {
                    let v = p.idx_list(&[']'])?;
                    p.eat_punct(']')?;
                    v
                } else {
                    Vec::new()
                };
                match p.next() {
                    Some(Token { tok: Tok::Arrow, .. }) => {}
                    _ => return p.err("expected `<-`"),
                }
                let rhs = p.expr()?;
                for (id, env) in expander.pattern_components(&target, &idx, line, col)? {
                    let value = expander.expand(&rhs, &env)?;
                    identity_stmts
                        .entry(stage)
                        .or_default()
                        .push(IdentityRow { antifield: id, value });
                }
            }
            "brst" => {
                let w = p.ident()?;
                if w != "gamma" {
                    return p.err("expected `gamma`");
                }
                p.eat_punct(':')?;
                let (line, col) = p.loc();
                let target = p.ident()?;
                let idx = if p.try_punct('[') {
                    let v = p.idx_list(&[']'])?;
                    p.eat_punct(']')?;
                    v
                } else {
                    Vec::new()
                };
                match p.next() {
                    Some(Token { tok: Tok::Arrow, .. }) => {}
                    _ => return p.err("expected `<-`"),
                }
                let rhs = p.expr()?;
                for (id, env) in expander.pattern_components(&target, &idx, line, col)? {
                    let value = expander.expand(&rhs, &env)?;
                    if !value.is_zero() {
                        gamma.insert(id, value);
                    }
                }
            }
            other => {
                p.pos = p.pos.saturating_sub(1);
                return p.err(format!("unknown statement `{other}`"));
            }
        }
        p.eat_punct(';')?;
    }

    let n = dim.ok_or_else(|| ParseError::Validation("model has no `dim`".into()))?;
    ensure_tables(&mut expander, &mut table_ready, n, metric);
    let lagrangian = lagrangian
        .ok_or_else(|| ParseError::Validation("model has no `lagrangian`".into()))?;
    if name.is_empty() {
        return Err(ParseError::Validation("model has no name".into()));
    }

    // Antifield pairing by the `~` naming convention, componentwise.
    let mut antifield_of: BTreeMap<SymbolId, SymbolId> = BTreeMap::new();
    for id in expander.table.ids() {
        let decl = expander.table.get(id).clone();
        if !decl.role.is_antifield() {
            continue;
        }
        let base_name = decl
            .name
            .replacen('~', "", 1);
        let base = expander.table.lookup(&base_name).ok_or_else(|| {
            ParseError::Validation(format!("antifield `{}` pairs no declared symbol", decl.name))
        })?;
        let base_decl = expander.table.get(base);
        if base_decl.parity == decl.parity {
            return Err(ParseError::Validation(format!(
                "antifield `{}` must have parity opposite to `{}`",
                decl.name, base_decl.name
            )));
        }
        let role_ok = match decl.role {
            SymbolRole::FieldAntifield => base_decl.role == SymbolRole::Field,
            SymbolRole::NoetherAntifield => {
                base_decl.role == SymbolRole::Ghost && base_decl.stage == decl.stage
            }
            _ => false,
        };
        if !role_ok {
            return Err(ParseError::Validation(format!(
                "antifield `{}` is inconsistent with `{}`",
                decl.name, base_decl.name
            )));
        }
        antifield_of.insert(base, id);
    }

    // Assemble gauge stages (dense by stage index).
    let gauge_stages = if has_gauge {
        let max_stage = gauge_stage_stmts.keys().max().copied().unwrap_or(0);
        let mut stages = Vec::new();
        for s in 0..=max_stage {
            let comps = gauge_stage_stmts.remove(&s).ok_or_else(|| {
                ParseError::Validation(format!("gauge tower has a gap at stage {s}"))
            })?;
            let d = GradedDerivation::vertical_only(&expander.table, comps, Parity::Odd, 1)
                .map_err(|e| ParseError::Validation(e.0))?;
            stages.push(d);
        }
        Some(stages)
    } else {
        None
    };

    let mut tower = Vec::new();
    if !identity_stmts.is_empty() {
        let max_stage = identity_stmts.keys().max().copied().unwrap_or(0);
        for s in 0..=max_stage {
            let rows = identity_stmts.remove(&s).ok_or_else(|| {
                ParseError::Validation(format!("identity tower has a gap at stage {s}"))
            })?;
            tower.push(IdentityDensity { stage: s, rows });
        }
    }

    Ok(FieldModel {
        name,
        dim: n,
        table: expander.table,
        lagrangian: HForm::density(lagrangian, n),
        constants: expander.constants,
        gauge_stages,
        tower,
        gamma,
        antifield_of,
    })
}

fn require_dim(dim: &Option<usize>, p: &Parser) -> Result<usize, ParseError> {
    match dim {
        Some(n) => Ok(*n),
        None => {
            let (line, col) = p.loc();
            Err(ParseError::Syntax { line, col, message: "`dim` must come first".into() })
        }
    }
}

fn ensure_tables(expander: &mut Expander, ready: &mut bool, n: usize, metric: MetricKind) {
    if *ready {
        return;
    }
    expander.n = n;
    expander.table = SymbolTable::with_base_dim(n);
    expander.constants.insert("eta".into(), metric_table(metric, n));
    expander.constants.insert("eps".into(), levi_civita(n));
    *ready = true;
}

fn build_constant(
    name: &str,
    dims: Vec<usize>,
    entries: Vec<(Vec<usize>, Rational)>,
    syms: &[(bool, usize, usize)],
) -> Result<ConstTable, ParseError> {
    let mut table = ConstTable::new(dims.clone());
    for (idx, v) in &entries {
        if idx.len() != dims.len() || idx.iter().zip(&dims).any(|(i, d)| i >= d) {
            return Err(ParseError::Validation(format!(
                "constant `{name}` entry index out of range"
            )));
        }
        table.set(idx.clone(), v.clone());
    }
    for (_, i, j) in syms {
        if *i >= dims.len() || *j >= dims.len() || dims[*i] != dims[*j] {
            return Err(ParseError::Validation(format!(
                "constant `{name}` symmetry tag slots out of range"
            )));
        }
    }
    // Closure under the symmetry group generated by the tags.
    let mut queue: Vec<(Vec<usize>, Rational)> =
        table.entries().map(|(k, v)| (k.clone(), v.clone())).collect();
    while let Some((idx, v)) = queue.pop() {
        for (anti, i, j) in syms {
            let mut swapped = idx.clone();
            swapped.swap(*i, *j);
            let want = if *anti { -v.clone() } else { v.clone() };
            let existing = table.get(&swapped);
            if existing.is_zero() && !want.is_zero() {
                table.set(swapped.clone(), want.clone());
                queue.push((swapped, want));
            } else if existing != want {
                return Err(ParseError::Validation(format!(
                    "constant `{name}` conflicts with its symmetry tags at {idx:?}"
                )));
            }
        }
    }
    Ok(table)
}

fn declare_family(
    expander: &mut Expander,
    keyword: &str,
    name: &str,
    shape: Vec<usize>,
    parity: Parity,
    stage: Option<i64>,
    antisym: bool,
) -> Result<(), ParseError> {
    let role = match keyword {
        "field" => SymbolRole::Field,
        "ghost" => SymbolRole::Ghost,
        "antifield" => {
            if name.ends_with('~') && stage.is_some() {
                SymbolRole::NoetherAntifield
            } else if name.ends_with('~') {
                SymbolRole::FieldAntifield
            } else {
                return Err(ParseError::Validation(format!(
                    "antifield name `{name}` must end with `~`"
                )));
            }
        }
        _ => unreachable!(),
    };
    if antisym {
        let Some(&first) = shape.first() else {
            return Err(ParseError::Validation(format!(
                "`{name}`: antisym requires at least one index"
            )));
        };
        if shape.iter().any(|&d| d != first) {
            return Err(ParseError::Validation(format!(
                "`{name}`: antisym requires equal index ranges"
            )));
        }
    }
    let tuples: Vec<Vec<usize>> = if antisym {
        strict_tuples(shape[0], shape.len())
    } else {
        let mut out = vec![Vec::new()];
        for r in &shape {
            let mut next = Vec::new();
            for prefix in &out {
                for v in 0..*r {
                    let mut p = prefix.clone();
                    p.push(v);
                    next.push(p);
                }
            }
            out = next;
        }
        out
    };
    for tup in tuples {
        let full = idx_name(name, &tup);
        let decl = match role {
            SymbolRole::Field => SymbolDecl::field(full, parity),
            SymbolRole::Ghost => SymbolDecl::ghost(
                full,
                parity,
                stage.ok_or_else(|| {
                    ParseError::Validation(format!("ghost `{name}` needs a stage"))
                })?,
            ),
            SymbolRole::FieldAntifield => SymbolDecl::field_antifield(full, parity),
            SymbolRole::NoetherAntifield => {
                SymbolDecl::noether_antifield(full, parity, stage.unwrap())
            }
            _ => unreachable!(),
        };
        expander
            .table
            .declare(decl)
            .map_err(|e| ParseError::Validation(e.to_string()))?;
    }
    expander
        .families
        .insert(name.to_string(), FamilyDecl { shape, antisym, role });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_model_parses() {
        let src = r#"
            model "free_scalar";
            dim 2;
            metric minkowski;
            field y parity even;
            lagrangian = 1/2*eta(mu,mu)*y[;mu]*y[;mu];
        "#;
        let m = load_model_str(src).unwrap();
        assert_eq!(m.name, "free_scalar");
        assert_eq!(m.dim, 2);
        let l = m.lagrangian.density_coefficient(2);
        assert_eq!(l.num_terms(), 2);
    }

    #[test]
    fn parse_error_has_location() {
        let src = "model \"x\";\ndim 2;\nfield y parity odd stagex 0;\n";
        let err = load_model_str(src).unwrap_err();
        match err {
            ParseError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn free_index_rejected() {
        let src = r#"
            model "bad";
            dim 2;
            field y parity even;
            lagrangian = y[;mu];
        "#;
        let err = load_model_str(src).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }));
    }

    #[test]
    fn undeclared_symbol_rejected() {
        let src = r#"
            model "bad";
            dim 2;
            field y parity even;
            lagrangian = z*y;
        "#;
        assert!(load_model_str(src).is_err());
    }

    #[test]
    fn gauge_stage_gap_rejected() {
        let src = r#"
            model "gap";
            dim 2;
            field y parity even;
            ghost c parity odd stage 0;
            ghost g parity even stage 1;
            lagrangian = y*y;
            gauge stage 1: c <- d(g,mu)*x0[;mu];
        "#;
        let err = load_model_str(src).unwrap_err();
        assert!(matches!(err, ParseError::Validation(m) if m.contains("gap")));
    }

    #[test]
    fn conflicting_symmetry_tags_rejected() {
        let src = r#"
            model "conflict";
            dim 2;
            field y parity even;
            constant k[2,2] = { [0,1] = 1, [1,0] = 1 } with { antisym(0,1) };
            lagrangian = y*y;
        "#;
        let err = load_model_str(src).unwrap_err();
        assert!(matches!(err, ParseError::Validation(_)));
    }

    #[test]
    fn out_of_range_component_rejected() {
        let src = r#"
            model "range";
            dim 2;
            field a[2] parity even;
            lagrangian = a[5]*a[5];
        "#;
        assert!(load_model_str(src).is_err());
    }

    #[test]
    fn macros_and_locals_scope_inside_parens() {
        // An index local to a parenthesized inner term is summed there and
        // does not multiply sibling terms.
        let src = r#"
            model "scope";
            dim 2;
            field y[2] parity even;
            field w parity even;
            lagrangian = w*(w + y[k]*y[k]);
        "#;
        let m = load_model_str(src).unwrap();
        let l = m.lagrangian.density_coefficient(2);
        // w^2 + w y0^2 + w y1^2: three monomials, w^2 with coefficient 1.
        assert_eq!(l.num_terms(), 3);
    }

    #[test]
    fn antifield_parity_validation() {
        let src = r#"
            model "bad";
            dim 2;
            field y parity even;
            antifield y~ parity even;
            lagrangian = y*y;
        "#;
        let err = load_model_str(src).unwrap_err();
        assert!(matches!(err, ParseError::Validation(_)));
    }
}
