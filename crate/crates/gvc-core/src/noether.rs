//! Second Noether theorem, direct direction: verification of declared
//! Noether-identity towers, derivation of identities from gauge symmetries,
//! and assembly and nilpotency checking of the Koszul-Tate operator.

use std::collections::BTreeMap;
use std::fmt;

use crate::jetcalc::total_derivative_multi;
use crate::kernel::{GradedExpr, JetVar, MultiIndex, Side, SymbolId, SymbolRole, SymbolTable};
use crate::symmetry::GaugeSymmetry;
use crate::variational::{higher_euler_eta_family, variational_derivative, EulerLagrange};

/// One row of a Noether-identity tower: the value the Koszul-Tate operator
/// assigns to a stage-k Noether antifield. Stage-0 values are linear in the
/// field-antifield jets; stage-k values are linear in stage-(k-1) antifield
/// jets, with an optional term quadratic in lower antifields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityRow {
    /// The stage-k Noether antifield this row is attached to.
    pub antifield: SymbolId,
    pub value: GradedExpr,
}

/// A declared identity tower stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityDensity {
    pub stage: usize,
    pub rows: Vec<IdentityRow>,
}

/// Residual of a stage-0 Noether identity:
/// `sum_{A,Lambda} Delta^{A,Lambda} d_Lambda E_A`, which must normalize to
/// zero for the identity to hold.
pub fn noether_identity_residual(
    table: &SymbolTable,
    row: &IdentityRow,
    el: &EulerLagrange,
    base_of: &BTreeMap<SymbolId, SymbolId>,
) -> Option<GradedExpr> {
    let coeffs = row
        .value
        .extract_linear(table, |s| table.role(s) == SymbolRole::FieldAntifield)?;
    let mut residual = GradedExpr::zero();
    for (v, delta) in coeffs {
        let field = *base_of.get(&v.symbol)?;
        let de = total_derivative_multi(table, &el.component(field), &v.index);
        residual = residual.add(&delta.mul(&de, table));
    }
    Some(residual)
}

/// Checks a stage-0 identity exactly.
pub fn check_noether_identity(
    table: &SymbolTable,
    row: &IdentityRow,
    el: &EulerLagrange,
    base_of: &BTreeMap<SymbolId, SymbolId>,
) -> bool {
    noether_identity_residual(table, row, el, base_of)
        .map(|r| r.is_zero())
        .unwrap_or(false)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NoetherError {
    /// The derivation is not a variational symmetry: the variational
    /// derivative of `u^A E_A` with respect to some ghost does not vanish.
    NotASymmetry(String),
    /// Parity, ghost number or antifield number bookkeeping is inconsistent.
    GradingMismatch(String),
}

impl fmt::Display for NoetherError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoetherError::NotASymmetry(m) => write!(f, "not a gauge symmetry: {m}"),
            NoetherError::GradingMismatch(m) => write!(f, "grading mismatch: {m}"),
        }
    }
}

impl std::error::Error for NoetherError {}

/// Derives the stage-0 Noether identities associated with a gauge symmetry:
/// the variational derivative of `u^A E_A omega` with respect to each ghost
/// must vanish, and rewriting it through the higher Euler operator packages
/// the identity coefficients in their canonical form.
///
/// `antifield_of` maps each field to its field-antifield, and each ghost to
/// the stage-0 Noether antifield its identity is attached to.
pub fn derive_identities_from_gauge(
    table: &SymbolTable,
    gauge: &GaugeSymmetry,
    el: &EulerLagrange,
    antifield_of: &BTreeMap<SymbolId, SymbolId>,
) -> Result<Vec<IdentityRow>, NoetherError> {
    // P = sum_A u^A E_A.
    let mut p = GradedExpr::zero();
    for (a, comp) in &gauge.derivation.vertical {
        p = p.add(&comp.mul(&el.component(*a), table));
    }
    let mut rows = Vec::new();
    for &ghost in &gauge.parameters {
        let residual = variational_derivative(table, &p, ghost, Side::Left);
        if !residual.is_zero() {
            return Err(NoetherError::NotASymmetry(format!(
                "variational derivative of u^A E_A with respect to {} is nonzero",
                table.get(ghost).name
            )));
        }
        // Per field A: the ghost-jet coefficient family of u^A, pushed
        // through the higher Euler operator.
        let mut value = GradedExpr::zero();
        for (a, comp) in &gauge.derivation.vertical {
            let abar = *antifield_of.get(a).ok_or_else(|| {
                NoetherError::GradingMismatch(format!(
                    "no antifield paired with {}",
                    table.get(*a).name
                ))
            })?;
            let mut family: BTreeMap<MultiIndex, GradedExpr> = BTreeMap::new();
            for v in comp.jet_vars() {
                if v.symbol != ghost {
                    continue;
                }
                let c = comp.partial_derivative(&v, Side::Left, table);
                if !c.is_zero() {
                    family.insert(v.index.clone(), c);
                }
            }
            if family.is_empty() {
                continue;
            }
            let eta = higher_euler_eta_family(table, &family);
            for (m, coeff) in eta {
                let abar_jet = GradedExpr::var(JetVar::new(abar, m));
                value = value.add(&coeff.mul(&abar_jet, table));
            }
        }
        let antifield = *antifield_of.get(&ghost).ok_or_else(|| {
            NoetherError::GradingMismatch(format!(
                "no Noether antifield paired with ghost {}",
                table.get(ghost).name
            ))
        })?;
        rows.push(IdentityRow { antifield, value });
    }
    Ok(rows)
}

/// The Koszul-Tate operator: an odd right graded derivation acting on the
/// antifield generators, assembled from the Euler-Lagrange components and a
/// declared identity tower.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KoszulTate {
    /// Field-antifield rows: `sbar_A -> E_A`.
    pub field_rows: BTreeMap<SymbolId, GradedExpr>,
    /// Tower rows per stage, `cbar_{r_k} -> Delta_{r_k}`.
    pub stages: Vec<Vec<IdentityRow>>,
}

impl KoszulTate {
    /// All rows as one map from antifield symbol to value.
    fn values(&self) -> BTreeMap<SymbolId, GradedExpr> {
        let mut out = self.field_rows.clone();
        for stage in &self.stages {
            for row in stage {
                out.insert(row.antifield, row.value.clone());
            }
        }
        out
    }

    /// Right-derivation application:
    /// `D(phi) = sum_v (right d phi / d v) d_Lambda(value)`, summed over
    /// antifield jets occurring in `phi`.
    pub fn apply(&self, table: &SymbolTable, phi: &GradedExpr) -> GradedExpr {
        let values = self.values();
        let mut out = GradedExpr::zero();
        for v in phi.jet_vars() {
            let Some(value) = values.get(&v.symbol) else { continue };
            let dphi = phi.partial_derivative(&v, Side::Right, table);
            let dv = total_derivative_multi(table, value, &v.index);
            out = out.add(&dphi.mul(&dv, table));
        }
        out
    }
}

/// Assembles the Koszul-Tate operator of a model: `sbar_A -> E_A` together
/// with the declared tower rows, with grading validation against the
/// antifield bookkeeping conventions.
pub fn build_koszul_tate(
    table: &SymbolTable,
    el: &EulerLagrange,
    tower: &[IdentityDensity],
    antifield_of: &BTreeMap<SymbolId, SymbolId>,
) -> Result<KoszulTate, NoetherError> {
    let mut field_rows = BTreeMap::new();
    for (field, abar) in antifield_of {
        if table.role(*abar) != SymbolRole::FieldAntifield {
            continue;
        }
        field_rows.insert(*abar, el.component(*field));
    }
    let mut stages = Vec::new();
    for (k, density) in tower.iter().enumerate() {
        if density.stage != k {
            return Err(NoetherError::GradingMismatch(format!(
                "tower stage {k} declared with stage tag {}",
                density.stage
            )));
        }
        for row in &density.rows {
            let decl = table.get(row.antifield);
            if decl.role != SymbolRole::NoetherAntifield || decl.stage != k as i64 {
                return Err(NoetherError::GradingMismatch(format!(
                    "row antifield {} is not a stage-{k} Noether antifield",
                    decl.name
                )));
            }
            if row.value.is_zero() {
                continue;
            }
            let want_parity = decl.parity.flip();
            if row.value.parity(table) != Some(want_parity) {
                return Err(NoetherError::GradingMismatch(format!(
                    "value for {} must have parity {want_parity}",
                    decl.name
                )));
            }
            let want_af = decl.antifield_number as i64 - 1;
            if row.value.antifield_number(table) != Some(want_af) {
                return Err(NoetherError::GradingMismatch(format!(
                    "value for {} must have antifield number {want_af}",
                    decl.name
                )));
            }
            let want_gh = decl.ghost_number + 1;
            if row.value.ghost_number(table) != Some(want_gh) {
                return Err(NoetherError::GradingMismatch(format!(
                    "value for {} must have ghost number {want_gh}",
                    decl.name
                )));
            }
        }
        stages.push(density.rows.clone());
    }
    Ok(KoszulTate { field_rows, stages })
}

/// Per-row nilpotency residuals of the Koszul-Tate operator: applying it to
/// every antifield value. Stage-k residuals verify the stage-k Noether
/// identities, h-term contributions included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KtReport {
    /// (stage, antifield, residual) for every tower row; stage-0 rows verify
    /// the complete Noether identities.
    pub rows: Vec<(usize, SymbolId, GradedExpr)>,
}

impl KtReport {
    pub fn nilpotent(&self) -> bool {
        self.rows.iter().all(|(_, _, r)| r.is_zero())
    }

    pub fn failing(&self) -> Vec<&(usize, SymbolId, GradedExpr)> {
        self.rows.iter().filter(|(_, _, r)| !r.is_zero()).collect()
    }
}

pub fn check_kt_nilpotency(table: &SymbolTable, kt: &KoszulTate) -> KtReport {
    let mut rows = Vec::new();
    for (k, stage) in kt.stages.iter().enumerate() {
        for row in stage {
            rows.push((k, row.antifield, kt.apply(table, &row.value)));
        }
    }
    KtReport { rows }
}
