use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use super::multi_index::MultiIndex;
use super::symbol::{Parity, SymbolId, SymbolTable};
use super::Rational;

/// A jet variable `s^A_Lambda`: a declared symbol together with a symmetric
/// multi-index of base-coordinate indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JetVar {
    pub symbol: SymbolId,
    pub index: MultiIndex,
}

impl JetVar {
    pub fn plain(symbol: SymbolId) -> Self {
        JetVar { symbol, index: MultiIndex::empty() }
    }

    pub fn new(symbol: SymbolId, index: MultiIndex) -> Self {
        JetVar { symbol, index }
    }

    pub fn raised(&self, lam: u8) -> Self {
        JetVar { symbol: self.symbol, index: self.index.raised(lam) }
    }

    pub fn display<'a>(&'a self, table: &'a SymbolTable) -> JetVarDisplay<'a> {
        JetVarDisplay { var: self, table }
    }
}

pub struct JetVarDisplay<'a> {
    var: &'a JetVar,
    table: &'a SymbolTable,
}

impl fmt::Display for JetVarDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = &self.table.get(self.var.symbol).name;
        if self.var.index.is_empty() {
            return write!(f, "{name}");
        }
        // `a[1,0]` with jet (2) prints as `a[1,0;2]`, a bare `y` as `y[;2]`.
        if let Some(stripped) = name.strip_suffix(']') {
            write!(f, "{stripped};{}]", self.var.index)
        } else {
            write!(f, "{name}[;{}]", self.var.index)
        }
    }
}

/// Factor sequence of a canonical monomial: sorted by variable, exponents
/// at least 1, odd variables with exponent exactly 1.
pub(crate) type Factors = Vec<(JetVar, u32)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KernelError {
    UndeclaredSymbol(String),
    ParityMismatch(String),
    JetOnScalar(String),
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::UndeclaredSymbol(s) => write!(f, "undeclared symbol: {s}"),
            KernelError::ParityMismatch(s) => write!(f, "parity mismatch: {s}"),
            KernelError::JetOnScalar(s) => {
                write!(f, "base coordinates and constants carry no jets: {s}")
            }
        }
    }
}

impl std::error::Error for KernelError {}

/// Canonical polynomial over the rationals in even/odd jet variables.
///
/// Invariants: no zero coefficients, no duplicate factor sequences, every
/// monomial in canonical factor order (declaration order, then multi-index),
/// odd variables squared annihilate.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GradedExpr {
    terms: BTreeMap<Factors, Rational>,
}

impl GradedExpr {
    pub fn zero() -> Self {
        GradedExpr::default()
    }

    pub fn one() -> Self {
        GradedExpr::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Vec::new(), c);
        }
        GradedExpr { terms }
    }

    pub fn var(v: JetVar) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![(v, 1)], Rational::one());
        GradedExpr { terms }
    }

    /// Builds a one-term expression from an already-canonical factor
    /// sequence. Crate-internal; callers must uphold the canonical form.
    pub(crate) fn from_canonical_monomial(factors: Factors, coeff: Rational) -> Self {
        let mut e = GradedExpr::zero();
        e.add_term(factors, coeff);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Factors, &Rational)> {
        self.terms.iter()
    }

    /// Builds a canonical expression from raw terms given as (coefficient,
    /// factor list in arbitrary order). This is the `normalize` entry point;
    /// it is idempotent by construction.
    pub fn normalize(
        table: &SymbolTable,
        raw: impl IntoIterator<Item = (Rational, Vec<JetVar>)>,
    ) -> Result<Self, KernelError> {
        let mut out = GradedExpr::zero();
        for (coeff, factors) in raw {
            for v in &factors {
                if v.symbol.0 as usize >= table.len() {
                    return Err(KernelError::UndeclaredSymbol(format!("id {}", v.symbol.0)));
                }
                if !table.role(v.symbol).carries_jets() && !v.index.is_empty() {
                    return Err(KernelError::JetOnScalar(table.get(v.symbol).name.clone()));
                }
            }
            if let Some((factors, sign)) = sort_factors(table, factors) {
                out.add_term(factors, coeff * Rational::from_integer(sign.into()));
            }
        }
        Ok(out)
    }

    fn add_term(&mut self, factors: Factors, coeff: Rational) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(factors) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += coeff;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &GradedExpr) -> GradedExpr {
        let mut out = self.clone();
        for (f, c) in &other.terms {
            out.add_term(f.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &GradedExpr) -> GradedExpr {
        let mut out = self.clone();
        for (f, c) in &other.terms {
            out.add_term(f.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> GradedExpr {
        GradedExpr {
            terms: self.terms.iter().map(|(f, c)| (f.clone(), -c.clone())).collect(),
        }
    }

    pub fn scale(&self, c: &Rational) -> GradedExpr {
        if c.is_zero() {
            return GradedExpr::zero();
        }
        GradedExpr {
            terms: self.terms.iter().map(|(f, k)| (f.clone(), k * c)).collect(),
        }
    }

    /// Graded-commutative product; the Koszul sign is accumulated while the
    /// factor sequences are merged.
    pub fn mul(&self, other: &GradedExpr, table: &SymbolTable) -> GradedExpr {
        let mut out = GradedExpr::zero();
        for (fa, ca) in &self.terms {
            for (fb, cb) in &other.terms {
                if let Some((factors, sign)) = merge_factors(table, fa, fb) {
                    out.add_term(factors, ca * cb * Rational::from_integer(sign.into()));
                }
            }
        }
        out
    }

    pub fn pow(&self, k: u32, table: &SymbolTable) -> GradedExpr {
        let mut out = GradedExpr::one();
        for _ in 0..k {
            out = out.mul(self, table);
        }
        out
    }

    /// Simultaneous, non-recursive substitution; each binding must preserve
    /// parity.
    pub fn substitute(
        &self,
        bindings: &BTreeMap<JetVar, GradedExpr>,
        table: &SymbolTable,
    ) -> Result<GradedExpr, KernelError> {
        for (v, e) in bindings {
            let vp = table.parity(v.symbol);
            match e.parity(table) {
                None => {
                    return Err(KernelError::ParityMismatch(format!(
                        "binding for {} is parity-inhomogeneous",
                        v.display(table)
                    )))
                }
                Some(p) if !e.is_zero() && p != vp => {
                    return Err(KernelError::ParityMismatch(format!(
                        "binding for {} has parity {p}, expected {vp}",
                        v.display(table)
                    )))
                }
                _ => {}
            }
        }
        let mut out = GradedExpr::zero();
        for (factors, coeff) in &self.terms {
            let mut acc = GradedExpr::constant(coeff.clone());
            for (v, k) in factors {
                let piece = match bindings.get(v) {
                    Some(e) => e.pow(*k, table),
                    None => GradedExpr::var(v.clone()).pow(*k, table),
                };
                acc = acc.mul(&piece, table);
                if acc.is_zero() {
                    break;
                }
            }
            out = out.add(&acc);
        }
        Ok(out)
    }

    /// Graded left or right partial derivative with respect to a jet variable.
    pub fn partial_derivative(&self, v: &JetVar, side: Side, table: &SymbolTable) -> GradedExpr {
        let v_odd = table.parity(v.symbol).is_odd();
        let mut out = GradedExpr::zero();
        for (factors, coeff) in &self.terms {
            let Some(pos) = factors.iter().position(|(w, _)| w == v) else {
                continue;
            };
            let (_, exp) = &factors[pos];
            let mut new_factors = factors.clone();
            if *exp == 1 {
                new_factors.remove(pos);
            } else {
                new_factors[pos].1 -= 1;
            }
            let mut c = coeff * Rational::from_integer((*exp).into());
            if v_odd {
                let crossings = match side {
                    Side::Left => factors[..pos]
                        .iter()
                        .filter(|(w, _)| table.parity(w.symbol).is_odd())
                        .count(),
                    Side::Right => factors[pos + 1..]
                        .iter()
                        .filter(|(w, _)| table.parity(w.symbol).is_odd())
                        .count(),
                };
                if crossings % 2 == 1 {
                    c = -c;
                }
            }
            out.add_term(new_factors, c);
        }
        out
    }

    /// Parity of the expression if homogeneous; `None` when terms of both
    /// parities occur. The zero expression counts as even.
    pub fn parity(&self, table: &SymbolTable) -> Option<Parity> {
        let mut seen: Option<Parity> = None;
        for factors in self.terms.keys() {
            let p = factors_parity(factors, table);
            match seen {
                None => seen = Some(p),
                Some(q) if q != p => return None,
                _ => {}
            }
        }
        Some(seen.unwrap_or(Parity::Even))
    }

    pub fn even_part(&self, table: &SymbolTable) -> GradedExpr {
        self.parity_part(table, Parity::Even)
    }

    pub fn odd_part(&self, table: &SymbolTable) -> GradedExpr {
        self.parity_part(table, Parity::Odd)
    }

    fn parity_part(&self, table: &SymbolTable, p: Parity) -> GradedExpr {
        GradedExpr {
            terms: self
                .terms
                .iter()
                .filter(|(f, _)| factors_parity(f, table) == p)
                .map(|(f, c)| (f.clone(), c.clone()))
                .collect(),
        }
    }

    /// Ghost number when every monomial carries the same one.
    pub fn ghost_number(&self, table: &SymbolTable) -> Option<i64> {
        let mut seen: Option<i64> = None;
        for factors in self.terms.keys() {
            let g: i64 = factors
                .iter()
                .map(|(v, k)| table.get(v.symbol).ghost_number * *k as i64)
                .sum();
            match seen {
                None => seen = Some(g),
                Some(h) if h != g => return None,
                _ => {}
            }
        }
        seen.or(Some(0))
    }

    /// Antifield number when every monomial carries the same one.
    pub fn antifield_number(&self, table: &SymbolTable) -> Option<i64> {
        let mut seen: Option<i64> = None;
        for factors in self.terms.keys() {
            let g: i64 = factors
                .iter()
                .map(|(v, k)| table.get(v.symbol).antifield_number as i64 * *k as i64)
                .sum();
            match seen {
                None => seen = Some(g),
                Some(h) if h != g => return None,
                _ => {}
            }
        }
        seen.or(Some(0))
    }

    /// Highest jet order occurring in the expression.
    pub fn max_jet_order(&self) -> usize {
        self.terms
            .keys()
            .flat_map(|f| f.iter().map(|(v, _)| v.index.order()))
            .max()
            .unwrap_or(0)
    }

    /// The distinct jet variables occurring in the expression.
    pub fn jet_vars(&self) -> BTreeSet<JetVar> {
        self.terms
            .keys()
            .flat_map(|f| f.iter().map(|(v, _)| v.clone()))
            .collect()
    }

    /// Decomposes an expression that is linear in the symbols selected by
    /// `class` as `sum_v coeff_v * v`, with the selected variable moved to the
    /// rightmost position of each monomial. Returns `None` when a monomial
    /// contains no selected factor or more than one of them.
    pub fn extract_linear(
        &self,
        table: &SymbolTable,
        class: impl Fn(SymbolId) -> bool,
    ) -> Option<BTreeMap<JetVar, GradedExpr>> {
        let mut out: BTreeMap<JetVar, GradedExpr> = BTreeMap::new();
        for (factors, coeff) in &self.terms {
            let selected: Vec<usize> = factors
                .iter()
                .enumerate()
                .filter(|(_, (v, _))| class(v.symbol))
                .map(|(i, _)| i)
                .collect();
            let [pos] = selected.as_slice() else {
                return None;
            };
            let (v, exp) = &factors[*pos];
            if *exp != 1 {
                return None;
            }
            // Sign to move v past the factors to its right.
            let crossings = if table.parity(v.symbol).is_odd() {
                factors[pos + 1..]
                    .iter()
                    .filter(|(w, _)| table.parity(w.symbol).is_odd())
                    .count()
            } else {
                0
            };
            let mut rest = factors.clone();
            rest.remove(*pos);
            let c = if crossings % 2 == 1 { -coeff.clone() } else { coeff.clone() };
            let mut e = GradedExpr::zero();
            e.add_term(rest, c);
            out.entry(v.clone())
                .and_modify(|acc| *acc = acc.add(&e))
                .or_insert(e);
        }
        out.retain(|_, e| !e.is_zero());
        Some(out)
    }

    pub fn display<'a>(&'a self, table: &'a SymbolTable) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, table }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

fn factors_parity(factors: &Factors, table: &SymbolTable) -> Parity {
    let odd = factors
        .iter()
        .filter(|(v, _)| table.parity(v.symbol).is_odd())
        .count();
    if odd % 2 == 0 {
        Parity::Even
    } else {
        Parity::Odd
    }
}

/// Sorts an arbitrary factor list into canonical order, counting Koszul
/// transpositions. Returns `None` when a repeated odd factor annihilates the
/// monomial.
fn sort_factors(table: &SymbolTable, factors: Vec<JetVar>) -> Option<(Factors, i32)> {
    let mut sign = 1i32;
    let mut sorted: Vec<JetVar> = Vec::with_capacity(factors.len());
    for v in factors {
        let v_odd = table.parity(v.symbol).is_odd();
        let pos = sorted.partition_point(|w| *w <= v);
        if v_odd {
            if pos > 0 && sorted[pos - 1] == v {
                return None;
            }
            let crossings = sorted[pos..]
                .iter()
                .filter(|w| table.parity(w.symbol).is_odd())
                .count();
            if crossings % 2 == 1 {
                sign = -sign;
            }
        }
        sorted.insert(pos, v);
    }
    let mut out: Factors = Vec::with_capacity(sorted.len());
    for v in sorted {
        match out.last_mut() {
            Some((w, k)) if *w == v => *k += 1,
            _ => out.push((v, 1)),
        }
    }
    Some((out, sign))
}

/// Merges two canonical factor sequences, accumulating the Koszul sign of the
/// interleaving. Returns `None` when an odd factor repeats.
fn merge_factors(table: &SymbolTable, a: &Factors, b: &Factors) -> Option<(Factors, i32)> {
    let mut out: Factors = Vec::with_capacity(a.len() + b.len());
    let mut sign = 1i32;
    let mut odd_left_in_a = a
        .iter()
        .filter(|(v, _)| table.parity(v.symbol).is_odd())
        .count();
    let mut i = 0;
    let mut j = 0;
    while i < a.len() && j < b.len() {
        let (va, ka) = &a[i];
        let (vb, kb) = &b[j];
        if va < vb {
            if table.parity(va.symbol).is_odd() {
                odd_left_in_a -= 1;
            }
            out.push((va.clone(), *ka));
            i += 1;
        } else if vb < va {
            if table.parity(vb.symbol).is_odd() && odd_left_in_a % 2 == 1 {
                sign = -sign;
            }
            out.push((vb.clone(), *kb));
            j += 1;
        } else {
            if table.parity(va.symbol).is_odd() {
                return None;
            }
            out.push((va.clone(), ka + kb));
            i += 1;
            j += 1;
        }
    }
    while i < a.len() {
        out.push(a[i].clone());
        i += 1;
    }
    while j < b.len() {
        out.push(b[j].clone());
        j += 1;
    }
    Some((out, sign))
}

pub struct ExprDisplay<'a> {
    expr: &'a GradedExpr,
    table: &'a SymbolTable,
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.expr.is_zero() {
            return write!(f, "0");
        }
        for (k, (factors, coeff)) in self.expr.terms.iter().enumerate() {
            let neg = coeff.is_negative();
            let abs = coeff.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut wrote = false;
            if !abs.is_one() || factors.is_empty() {
                write!(f, "{abs}")?;
                wrote = true;
            }
            for (v, exp) in factors {
                if wrote {
                    write!(f, "*")?;
                }
                write!(f, "{}", v.display(self.table))?;
                if *exp > 1 {
                    write!(f, "^{exp}")?;
                }
                wrote = true;
            }
        }
        Ok(())
    }
}
