//! Jet-bundle calculus: total derivatives, horizontal and one-contact forms,
//! the horizontal/vertical differentials, and contact graded derivations with
//! on-demand jet prolongation.

use std::collections::BTreeMap;

use num_traits::One;

use crate::kernel::{
    GradedExpr, JetVar, MultiIndex, Parity, Rational, Side, SymbolId, SymbolRole, SymbolTable,
};

/// Total derivative `d_lam`: treats jets as independent coordinates and
/// raises each jet order by one.
pub fn total_derivative(table: &SymbolTable, e: &GradedExpr, lam: u8) -> GradedExpr {
    let mut out = GradedExpr::zero();
    for v in e.jet_vars() {
        let dv = match table.role(v.symbol) {
            SymbolRole::Constant => continue,
            SymbolRole::BaseCoordinate => {
                // d_lam x^mu = delta.
                if table.get(v.symbol).name == format!("x{lam}") {
                    GradedExpr::one()
                } else {
                    continue;
                }
            }
            _ => GradedExpr::var(v.raised(lam)),
        };
        let de = e.partial_derivative(&v, Side::Left, table);
        out = out.add(&dv.mul(&de, table));
    }
    out
}

/// Iterated total derivative `d_Lambda`.
pub fn total_derivative_multi(table: &SymbolTable, e: &GradedExpr, idx: &MultiIndex) -> GradedExpr {
    let mut out = e.clone();
    for &lam in idx.indices() {
        out = total_derivative(table, &out, lam);
    }
    out
}

/// Sorted strict subset of base indices labelling `dx^{s_1} ^ ... ^ dx^{s_k}`.
pub type IdxSet = Vec<u8>;

fn insert_sign(lam: u8, set: &IdxSet) -> Option<(IdxSet, i32)> {
    if set.contains(&lam) {
        return None;
    }
    let pos = set.partition_point(|&i| i < lam);
    let mut out = set.clone();
    out.insert(pos, lam);
    let sign = if pos % 2 == 0 { 1 } else { -1 };
    Some((out, sign))
}

fn full_set(n: usize) -> IdxSet {
    (0..n as u8).collect()
}

/// Horizontal k-form: a map from sorted k-subsets of base indices to
/// coefficients, representing `sum f_S dx^S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HForm {
    pub degree: usize,
    comps: BTreeMap<IdxSet, GradedExpr>,
}

impl HForm {
    pub fn zero(degree: usize) -> Self {
        HForm { degree, comps: BTreeMap::new() }
    }

    /// A horizontal 0-form: a scalar.
    pub fn scalar(e: GradedExpr) -> Self {
        let mut f = HForm::zero(0);
        f.add_component(Vec::new(), e);
        f
    }

    /// A density `g * omega` on an n-dimensional base.
    pub fn density(g: GradedExpr, n: usize) -> Self {
        let mut f = HForm::zero(n);
        f.add_component(full_set(n), g);
        f
    }

    /// `g * omega_mu` where `omega_mu` is the contraction of `d/dx^mu` with
    /// the volume form.
    pub fn times_omega_mu(g: GradedExpr, mu: u8, n: usize) -> Self {
        let mut set = full_set(n);
        set.retain(|&i| i != mu);
        let mut f = HForm::zero(n - 1);
        let signed = if mu % 2 == 0 { g } else { g.neg() };
        f.add_component(set, signed);
        f
    }

    pub fn add_component(&mut self, set: IdxSet, e: GradedExpr) {
        debug_assert_eq!(set.len(), self.degree);
        if e.is_zero() {
            return;
        }
        match self.comps.entry(set) {
            std::collections::btree_map::Entry::Vacant(en) => {
                en.insert(e);
            }
            std::collections::btree_map::Entry::Occupied(mut en) => {
                let sum = en.get().add(&e);
                if sum.is_zero() {
                    en.remove();
                } else {
                    *en.get_mut() = sum;
                }
            }
        }
    }

    pub fn component(&self, set: &IdxSet) -> GradedExpr {
        self.comps.get(set).cloned().unwrap_or_default()
    }

    pub fn components(&self) -> impl Iterator<Item = (&IdxSet, &GradedExpr)> {
        self.comps.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn add(&self, other: &HForm) -> HForm {
        debug_assert_eq!(self.degree, other.degree);
        let mut out = self.clone();
        for (s, e) in &other.comps {
            out.add_component(s.clone(), e.clone());
        }
        out
    }

    pub fn sub(&self, other: &HForm) -> HForm {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> HForm {
        HForm {
            degree: self.degree,
            comps: self.comps.iter().map(|(s, e)| (s.clone(), e.neg())).collect(),
        }
    }

    /// The density coefficient of a top-degree form.
    pub fn density_coefficient(&self, n: usize) -> GradedExpr {
        debug_assert_eq!(self.degree, n);
        self.component(&full_set(n))
    }

    /// Component `J^mu` of an (n-1)-form written as `J^mu omega_mu`.
    pub fn omega_mu_coefficient(&self, mu: u8, n: usize) -> GradedExpr {
        debug_assert_eq!(self.degree, n - 1);
        let mut set = full_set(n);
        set.retain(|&i| i != mu);
        let c = self.component(&set);
        if mu % 2 == 0 {
            c
        } else {
            c.neg()
        }
    }

    pub fn max_jet_order(&self) -> usize {
        self.comps.values().map(|e| e.max_jet_order()).max().unwrap_or(0)
    }
}

/// The horizontal differential cannot raise a form beyond the base degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeOverflow;

impl std::fmt::Display for DegreeOverflow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "d_H applied to a top-degree horizontal form")
    }
}

impl std::error::Error for DegreeOverflow {}

/// Fallible horizontal differential; rejects top-degree input.
pub fn d_h_checked(table: &SymbolTable, w: &HForm) -> Result<HForm, DegreeOverflow> {
    if w.degree >= table.base_dim() {
        return Err(DegreeOverflow);
    }
    Ok(d_h(table, w))
}

/// Horizontal differential `d_H = dx^lam ^ d_lam`; nilpotent. Panics on
/// top-degree input; use `d_h_checked` at trust boundaries.
pub fn d_h(table: &SymbolTable, w: &HForm) -> HForm {
    let n = table.base_dim();
    assert!(w.degree < n, "d_H overflows the base degree");
    let mut out = HForm::zero(w.degree + 1);
    for (set, f) in w.components() {
        for lam in 0..n as u8 {
            if let Some((new_set, sign)) = insert_sign(lam, set) {
                let df = total_derivative(table, f, lam);
                let signed = if sign > 0 { df } else { df.neg() };
                out.add_component(new_set, signed);
            }
        }
    }
    out
}

/// One-contact (1,k)-form: `sum theta^A_Lambda ^ g dx^S`, stored as a map
/// from (contact label, horizontal subset) to the coefficient g.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactHForm {
    pub horizontal_degree: usize,
    comps: BTreeMap<(JetVar, IdxSet), GradedExpr>,
}

impl ContactHForm {
    pub fn zero(horizontal_degree: usize) -> Self {
        ContactHForm { horizontal_degree, comps: BTreeMap::new() }
    }

    pub fn add_component(&mut self, theta: JetVar, set: IdxSet, e: GradedExpr) {
        debug_assert_eq!(set.len(), self.horizontal_degree);
        if e.is_zero() {
            return;
        }
        match self.comps.entry((theta, set)) {
            std::collections::btree_map::Entry::Vacant(en) => {
                en.insert(e);
            }
            std::collections::btree_map::Entry::Occupied(mut en) => {
                let sum = en.get().add(&e);
                if sum.is_zero() {
                    en.remove();
                } else {
                    *en.get_mut() = sum;
                }
            }
        }
    }

    pub fn component(&self, theta: &JetVar, set: &IdxSet) -> GradedExpr {
        self.comps.get(&(theta.clone(), set.clone())).cloned().unwrap_or_default()
    }

    pub fn components(&self) -> impl Iterator<Item = (&(JetVar, IdxSet), &GradedExpr)> {
        self.comps.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn add(&self, other: &ContactHForm) -> ContactHForm {
        debug_assert_eq!(self.horizontal_degree, other.horizontal_degree);
        let mut out = self.clone();
        for ((v, s), e) in &other.comps {
            out.add_component(v.clone(), s.clone(), e.clone());
        }
        out
    }

    pub fn sub(&self, other: &ContactHForm) -> ContactHForm {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> ContactHForm {
        ContactHForm {
            horizontal_degree: self.horizontal_degree,
            comps: self.comps.iter().map(|(k, e)| (k.clone(), e.neg())).collect(),
        }
    }
}

/// Vertical differential of a horizontal form: `d_V(f dx^S) = theta^A_Lambda
/// ^ (left d/d s^A_Lambda f) dx^S`.
pub fn d_v(table: &SymbolTable, w: &HForm) -> ContactHForm {
    let mut out = ContactHForm::zero(w.degree);
    for (set, f) in w.components() {
        for v in f.jet_vars() {
            if !table.role(v.symbol).carries_jets() {
                continue;
            }
            let df = f.partial_derivative(&v, Side::Left, table);
            out.add_component(v, set.clone(), df);
        }
    }
    out
}

/// Horizontal differential on one-contact forms, using
/// `d_H theta^A_Lambda = dx^lam ^ theta^A_{lam+Lambda}`.
pub fn d_h_contact(table: &SymbolTable, w: &ContactHForm) -> ContactHForm {
    let n = table.base_dim();
    assert!(w.horizontal_degree < n, "d_H overflows the base degree");
    let mut out = ContactHForm::zero(w.horizontal_degree + 1);
    for ((theta, set), g) in w.components() {
        for lam in 0..n as u8 {
            if let Some((new_set, sign)) = insert_sign(lam, set) {
                // dx^lam ^ theta ^ g dx^S = -theta_{lam+Lambda} ^ g dx^lam ^ dx^S
                let s = Rational::from_integer((-sign).into());
                out.add_component(theta.raised(lam), new_set.clone(), g.scale(&s));
                let dg = total_derivative(table, g, lam);
                out.add_component(theta.clone(), new_set, dg.scale(&s));
            }
        }
    }
    out
}

/// Contact graded derivation, stored as horizontal components (acting through
/// total derivatives) plus vertical characteristic components (prolonged on
/// demand over all jets).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradedDerivation {
    pub horizontal: BTreeMap<u8, GradedExpr>,
    pub vertical: BTreeMap<SymbolId, GradedExpr>,
    pub parity: Parity,
    pub ghost_number: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradingMismatch(pub String);

impl std::fmt::Display for GradingMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "grading mismatch: {}", self.0)
    }
}

impl std::error::Error for GradingMismatch {}

impl GradedDerivation {
    pub fn new(
        table: &SymbolTable,
        horizontal: BTreeMap<u8, GradedExpr>,
        vertical: BTreeMap<SymbolId, GradedExpr>,
        parity: Parity,
        ghost_number: i64,
    ) -> Result<Self, GradingMismatch> {
        for (lam, e) in &horizontal {
            if e.is_zero() {
                continue;
            }
            if e.parity(table) != Some(parity) {
                return Err(GradingMismatch(format!(
                    "horizontal component {lam} is not parity-homogeneous of the declared parity"
                )));
            }
        }
        for (a, e) in &vertical {
            if e.is_zero() {
                continue;
            }
            let want = parity.combine(table.parity(*a));
            if e.parity(table) != Some(want) {
                return Err(GradingMismatch(format!(
                    "vertical component on {} has the wrong parity",
                    table.get(*a).name
                )));
            }
            let want_gh = ghost_number + table.get(*a).ghost_number;
            if e.ghost_number(table) != Some(want_gh) {
                return Err(GradingMismatch(format!(
                    "vertical component on {} has ghost number != {want_gh}",
                    table.get(*a).name
                )));
            }
        }
        let mut d = GradedDerivation { horizontal, vertical, parity, ghost_number };
        d.horizontal.retain(|_, e| !e.is_zero());
        d.vertical.retain(|_, e| !e.is_zero());
        Ok(d)
    }

    pub fn vertical_only(
        table: &SymbolTable,
        vertical: BTreeMap<SymbolId, GradedExpr>,
        parity: Parity,
        ghost_number: i64,
    ) -> Result<Self, GradingMismatch> {
        Self::new(table, BTreeMap::new(), vertical, parity, ghost_number)
    }

    /// Derivation of a projectable vector field `u^lam d/dx^lam + u^A d/ds^A`
    /// on the graded bundle: the stored vertical components are the
    /// characteristics `u^A - s^A_lam u^lam`.
    pub fn from_projectable(
        table: &SymbolTable,
        horizontal: BTreeMap<u8, GradedExpr>,
        components: BTreeMap<SymbolId, GradedExpr>,
        parity: Parity,
        ghost_number: i64,
    ) -> Result<Self, GradingMismatch> {
        let mut vertical = BTreeMap::new();
        let symbols: std::collections::BTreeSet<SymbolId> = components
            .keys()
            .copied()
            .chain(table.generator_ids())
            .collect();
        for a in symbols {
            let mut ch = components.get(&a).cloned().unwrap_or_default();
            for (lam, u) in &horizontal {
                let jet = GradedExpr::var(JetVar::new(a, MultiIndex::single(*lam)));
                ch = ch.sub(&jet.mul(u, table));
            }
            if !ch.is_zero() {
                vertical.insert(a, ch);
            }
        }
        Self::new(table, horizontal, vertical, parity, ghost_number)
    }

    pub fn is_vertical(&self) -> bool {
        self.horizontal.is_empty()
    }

    /// Total action on a single jet variable:
    /// `u^lam s^A_{lam+Lambda} + d_Lambda(vertical^A)`.
    pub fn apply_to_jet(&self, table: &SymbolTable, v: &JetVar) -> GradedExpr {
        let mut out = GradedExpr::zero();
        match table.role(v.symbol) {
            SymbolRole::Constant => return out,
            SymbolRole::BaseCoordinate => {
                let name = &table.get(v.symbol).name;
                for (lam, u) in &self.horizontal {
                    if name == &format!("x{lam}") {
                        out = out.add(u);
                    }
                }
                return out;
            }
            _ => {}
        }
        for (lam, u) in &self.horizontal {
            let jet = GradedExpr::var(v.raised(*lam));
            out = out.add(&u.mul(&jet, table));
        }
        if let Some(comp) = self.vertical.get(&v.symbol) {
            out = out.add(&total_derivative_multi(table, comp, &v.index));
        }
        out
    }

    /// Divergence of the horizontal part, `d_lam u^lam`.
    pub fn horizontal_divergence(&self, table: &SymbolTable) -> GradedExpr {
        let mut out = GradedExpr::zero();
        for (lam, u) in &self.horizontal {
            out = out.add(&total_derivative(table, u, *lam));
        }
        out
    }
}

/// Applies the infinite-order jet prolongation of a contact derivation to an
/// expression; the sum over jets truncates at the jets actually present.
pub fn prolong_apply(table: &SymbolTable, d: &GradedDerivation, e: &GradedExpr) -> GradedExpr {
    let mut out = GradedExpr::zero();
    for (lam, u) in &d.horizontal {
        out = out.add(&u.mul(&total_derivative(table, e, *lam), table));
    }
    let mut cache: BTreeMap<JetVar, GradedExpr> = BTreeMap::new();
    for v in e.jet_vars() {
        if !table.role(v.symbol).carries_jets() {
            continue;
        }
        let Some(comp) = d.vertical.get(&v.symbol) else {
            continue;
        };
        let value = cache
            .entry(v.clone())
            .or_insert_with(|| total_derivative_multi(table, comp, &v.index))
            .clone();
        let de = e.partial_derivative(&v, Side::Left, table);
        out = out.add(&value.mul(&de, table));
    }
    out
}

/// Lie superbracket of two contact derivations, computed through their action
/// on the generating variables.
pub fn superbracket(
    table: &SymbolTable,
    a: &GradedDerivation,
    b: &GradedDerivation,
) -> GradedDerivation {
    let sign = if a.parity.is_odd() && b.parity.is_odd() {
        Rational::from_integer((-1).into())
    } else {
        Rational::one()
    };
    let mut horizontal = BTreeMap::new();
    for lam in 0..table.base_dim() as u8 {
        let ub = b.horizontal.get(&lam).cloned().unwrap_or_default();
        let ua = a.horizontal.get(&lam).cloned().unwrap_or_default();
        let h = prolong_apply(table, a, &ub).sub(&prolong_apply(table, b, &ua).scale(&sign));
        if !h.is_zero() {
            horizontal.insert(lam, h);
        }
    }
    // Total component on s^A is Q^A + u^lam s^A_lam; bracket the totals, then
    // subtract the jet part of the bracket's own horizontal components.
    let total = |d: &GradedDerivation, s: SymbolId| -> GradedExpr {
        let mut t = d.vertical.get(&s).cloned().unwrap_or_default();
        for (lam, u) in &d.horizontal {
            let jet = GradedExpr::var(JetVar::new(s, MultiIndex::single(*lam)));
            t = t.add(&u.mul(&jet, table));
        }
        t
    };
    let mut vertical = BTreeMap::new();
    let symbols: std::collections::BTreeSet<SymbolId> = a
        .vertical
        .keys()
        .chain(b.vertical.keys())
        .copied()
        .chain(if a.horizontal.is_empty() && b.horizontal.is_empty() {
            Vec::new()
        } else {
            table.generator_ids().collect()
        })
        .collect();
    for s in symbols {
        let tb = total(b, s);
        let ta = total(a, s);
        let mut t = prolong_apply(table, a, &tb).sub(&prolong_apply(table, b, &ta).scale(&sign));
        for (lam, h) in &horizontal {
            let jet = GradedExpr::var(JetVar::new(s, MultiIndex::single(*lam)));
            t = t.sub(&h.mul(&jet, table));
        }
        if !t.is_zero() {
            vertical.insert(s, t);
        }
    }
    GradedDerivation {
        horizontal,
        vertical,
        parity: a.parity.combine(b.parity),
        ghost_number: a.ghost_number + b.ghost_number,
    }
}
