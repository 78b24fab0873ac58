//! Inverse second Noether theorem outputs: the gauge operator, higher-stage
//! gauge-symmetry conditions, BRST extension and nilpotency, the antibracket,
//! the classical master equation, and proper solutions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::jetcalc::{prolong_apply, GradedDerivation, HForm};
use crate::kernel::{
    GradedExpr, JetVar, MultiIndex, Parity, Side, SymbolId, SymbolRole, SymbolTable,
};
use crate::noether::IdentityDensity;
use crate::symmetry::{on_shell_witness, OnShellWitness};
use crate::variational::{
    higher_euler_eta_family, is_variationally_trivial, variational_derivative, Bounds,
    EulerLagrange, Triviality,
};

/// The gauge operator: stage-0 components act on fields, stage-k components
/// on stage-(k-1) ghosts, each linear in stage-k ghost jets, odd, of ghost
/// number one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaugeOperator {
    pub stages: Vec<GradedDerivation>,
}

impl GaugeOperator {
    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    /// All components folded into one vertical derivation.
    pub fn combined(&self, table: &SymbolTable) -> GradedDerivation {
        let mut vertical = BTreeMap::new();
        for stage in &self.stages {
            for (a, comp) in &stage.vertical {
                vertical.insert(*a, comp.clone());
            }
        }
        GradedDerivation::vertical_only(table, vertical, Parity::Odd, 1)
            .expect("stage components carry consistent gradings")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BrstError {
    /// Neither a gauge tower nor declared gauge components exist.
    MissingTower,
    /// Declared components disagree with the tower assembly.
    TowerMismatch(String),
    /// Grading bookkeeping violated.
    GradingMismatch(String),
    /// Proper solutions require a nilpotent BRST operator.
    NotNilpotent,
    /// Antibracket over an unpaired variable.
    UnpairedVariable(String),
}

impl fmt::Display for BrstError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BrstError::MissingTower => write!(f, "model declares no gauge or Noether tower"),
            BrstError::TowerMismatch(m) => write!(f, "tower mismatch: {m}"),
            BrstError::GradingMismatch(m) => write!(f, "grading mismatch: {m}"),
            BrstError::NotNilpotent => write!(f, "BRST operator is not nilpotent"),
            BrstError::UnpairedVariable(m) => write!(f, "unpaired variable: {m}"),
        }
    }
}

impl std::error::Error for BrstError {}

/// Assembles the stage-k gauge derivations from a Noether tower by the
/// higher-Euler-operator formula
/// `u^{r_{k-1}} = sum_Lambda c^{r_k}_Lambda eta(Delta^{r_{k-1}}_{r_k})^Lambda`.
///
/// `base_of` maps every antifield to the field or ghost it pairs with.
pub fn gauge_operator_from_tower(
    table: &SymbolTable,
    tower: &[IdentityDensity],
    base_of: &BTreeMap<SymbolId, SymbolId>,
) -> Result<GaugeOperator, BrstError> {
    let mut stages = Vec::new();
    for (k, density) in tower.iter().enumerate() {
        let lower_role = if k == 0 {
            SymbolRole::FieldAntifield
        } else {
            SymbolRole::NoetherAntifield
        };
        let mut components: BTreeMap<SymbolId, GradedExpr> = BTreeMap::new();
        for row in &density.rows {
            let ghost = *base_of.get(&row.antifield).ok_or_else(|| {
                BrstError::GradingMismatch(format!(
                    "antifield {} has no paired ghost",
                    table.get(row.antifield).name
                ))
            })?;
            // Group the row coefficients by the lower antifield's base symbol.
            let mut families: BTreeMap<SymbolId, BTreeMap<MultiIndex, GradedExpr>> =
                BTreeMap::new();
            for v in row.value.jet_vars() {
                let decl = table.get(v.symbol);
                if decl.role != lower_role {
                    continue;
                }
                if k > 0 && decl.stage != k as i64 - 1 {
                    continue;
                }
                let coeff = row.value.partial_derivative(&v, Side::Left, table);
                if coeff.is_zero() {
                    continue;
                }
                let base = *base_of.get(&v.symbol).ok_or_else(|| {
                    BrstError::GradingMismatch(format!(
                        "antifield {} has no paired base symbol",
                        decl.name
                    ))
                })?;
                families
                    .entry(base)
                    .or_default()
                    .insert(v.index.clone(), coeff);
            }
            for (base, family) in families {
                let eta = higher_euler_eta_family(table, &family);
                let mut piece = GradedExpr::zero();
                for (m, coeff) in eta {
                    let ghost_jet = GradedExpr::var(JetVar::new(ghost, m));
                    piece = piece.add(&ghost_jet.mul(&coeff, table));
                }
                components
                    .entry(base)
                    .and_modify(|e| *e = e.add(&piece))
                    .or_insert(piece);
            }
        }
        components.retain(|_, e| !e.is_zero());
        let derivation = GradedDerivation::vertical_only(table, components, Parity::Odd, 1)
            .map_err(|e| BrstError::GradingMismatch(e.0))?;
        stages.push(derivation);
    }
    Ok(GaugeOperator { stages })
}

/// Assembles the gauge operator of a model: declared gauge stages when
/// present, tower-derived ones otherwise, and a cross-check that the two
/// agree when both exist.
pub fn assemble_gauge_operator(
    table: &SymbolTable,
    declared: Option<&[GradedDerivation]>,
    tower: &[IdentityDensity],
    base_of: &BTreeMap<SymbolId, SymbolId>,
) -> Result<GaugeOperator, BrstError> {
    let from_tower = if tower.is_empty() {
        None
    } else {
        Some(gauge_operator_from_tower(table, tower, base_of)?)
    };
    match (declared, from_tower) {
        (Some(stages), Some(assembled)) => {
            if stages.len() != assembled.stages.len() {
                return Err(BrstError::TowerMismatch(format!(
                    "{} declared stages vs {} tower stages",
                    stages.len(),
                    assembled.stages.len()
                )));
            }
            for (k, (d, a)) in stages.iter().zip(&assembled.stages).enumerate() {
                if d != &a.clone() {
                    return Err(BrstError::TowerMismatch(format!(
                        "stage {k} declared components disagree with the tower assembly"
                    )));
                }
            }
            Ok(GaugeOperator { stages: stages.to_vec() })
        }
        (Some(stages), None) => Ok(GaugeOperator { stages: stages.to_vec() }),
        (None, Some(assembled)) => Ok(assembled),
        (None, None) => Err(BrstError::MissingTower),
    }
}

/// Per-stage status of the higher-stage gauge-symmetry conditions
/// `u^{(k+1)}(u^{(k)}) = 0` (off-shell) or on-shell with a witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StageStatus {
    OffShellZero,
    OnShell(Vec<(SymbolId, OnShellWitness)>),
    Inconclusive(Vec<SymbolId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageConditionReport {
    /// Status of `u^{(k+1)}(u^{(k)})` for k = 0..N-1.
    pub stages: Vec<StageStatus>,
}

impl StageConditionReport {
    pub fn all_satisfied(&self) -> bool {
        self.stages
            .iter()
            .all(|s| !matches!(s, StageStatus::Inconclusive(_)))
    }

    pub fn all_off_shell(&self) -> bool {
        self.stages.iter().all(|s| matches!(s, StageStatus::OffShellZero))
    }
}

pub fn check_gauge_stage_conditions(
    table: &SymbolTable,
    gop: &GaugeOperator,
    el: &EulerLagrange,
    bounds: Bounds,
) -> StageConditionReport {
    let mut stages = Vec::new();
    for k in 0..gop.stages.len().saturating_sub(1) {
        let lower = &gop.stages[k];
        let higher = &gop.stages[k + 1];
        let mut witnesses = Vec::new();
        let mut unresolved = Vec::new();
        let mut all_zero = true;
        for (a, comp) in &lower.vertical {
            let residual = prolong_apply(table, higher, comp);
            if residual.is_zero() {
                continue;
            }
            all_zero = false;
            match on_shell_witness(table, &residual, el, bounds) {
                Some(w) => witnesses.push((*a, w)),
                None => unresolved.push(*a),
            }
        }
        stages.push(if all_zero {
            StageStatus::OffShellZero
        } else if unresolved.is_empty() {
            StageStatus::OnShell(witnesses)
        } else {
            StageStatus::Inconclusive(unresolved)
        });
    }
    StageConditionReport { stages }
}

/// A BRST operator: the gauge operator plus antifield-free terms of ghost
/// polynomial degree at least two on each ghost generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrstOperator {
    pub gauge: GaugeOperator,
    pub gamma: BTreeMap<SymbolId, GradedExpr>,
    /// The combined vertical derivation on fields and ghosts.
    pub derivation: GradedDerivation,
}

pub fn brst_extend(
    table: &SymbolTable,
    gauge: &GaugeOperator,
    gamma: &BTreeMap<SymbolId, GradedExpr>,
) -> Result<BrstOperator, BrstError> {
    let mut vertical: BTreeMap<SymbolId, GradedExpr> = BTreeMap::new();
    for stage in &gauge.stages {
        for (a, comp) in &stage.vertical {
            vertical
                .entry(*a)
                .and_modify(|e| *e = e.add(comp))
                .or_insert_with(|| comp.clone());
        }
    }
    for (ghost, term) in gamma {
        let decl = table.get(*ghost);
        if decl.role != SymbolRole::Ghost {
            return Err(BrstError::GradingMismatch(format!(
                "gamma term attached to non-ghost {}",
                decl.name
            )));
        }
        if term.is_zero() {
            continue;
        }
        if term.antifield_number(table) != Some(0) {
            return Err(BrstError::GradingMismatch(format!(
                "gamma term for {} must be antifield-free",
                decl.name
            )));
        }
        if term.ghost_number(table) != Some(decl.ghost_number + 1) {
            return Err(BrstError::GradingMismatch(format!(
                "gamma term for {} must raise ghost number by one",
                decl.name
            )));
        }
        vertical
            .entry(*ghost)
            .and_modify(|e| *e = e.add(term))
            .or_insert_with(|| term.clone());
    }
    let derivation = GradedDerivation::vertical_only(table, vertical, Parity::Odd, 1)
        .map_err(|e| BrstError::GradingMismatch(e.0))?;
    Ok(BrstOperator { gauge: gauge.clone(), gamma: gamma.clone(), derivation })
}

/// Nilpotency report for the BRST operator: the residual of the square on
/// every field and ghost generator, decomposed by polynomial ghost degree.
/// Degree one is the higher-stage condition layer, degree two the
/// commutation-relation layer, degree three the Jacobi layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrstReport {
    pub residuals: Vec<(SymbolId, GradedExpr)>,
}

impl BrstReport {
    pub fn nilpotent(&self) -> bool {
        self.residuals.iter().all(|(_, r)| r.is_zero())
    }

    /// Residual pieces of the given polynomial ghost degree across all
    /// generators.
    pub fn residual_of_ghost_degree(&self, table: &SymbolTable, degree: usize) -> GradedExpr {
        let mut out = GradedExpr::zero();
        for (_, r) in &self.residuals {
            for (factors, coeff) in r.terms() {
                let gd: usize = factors
                    .iter()
                    .filter(|(v, _)| table.role(v.symbol) == SymbolRole::Ghost)
                    .map(|(_, k)| *k as usize)
                    .sum();
                if gd == degree {
                    out = out.add(&GradedExpr::from_canonical_monomial(
                        factors.clone(),
                        coeff.clone(),
                    ));
                }
            }
        }
        out
    }
}

pub fn check_brst_nilpotency(table: &SymbolTable, b: &BrstOperator) -> BrstReport {
    let mut residuals = Vec::new();
    for (a, comp) in &b.derivation.vertical {
        residuals.push((*a, prolong_apply(table, &b.derivation, comp)));
    }
    BrstReport { residuals }
}

/// The antibracket of two densities over a field-antifield basis:
/// `{L w, L' w} = [dL/dzbar_a (right) dL'/dz^a + dL'/dzbar_a (right) dL/dz^a] w`.
pub fn antibracket(
    table: &SymbolTable,
    l1: &HForm,
    l2: &HForm,
    antifield_of: &BTreeMap<SymbolId, SymbolId>,
) -> Result<HForm, BrstError> {
    let n = table.base_dim();
    let s1 = l1.density_coefficient(n);
    let s2 = l2.density_coefficient(n);
    // Every generator occurring must be paired (either as z or as zbar).
    let mut fields: BTreeSet<SymbolId> = BTreeSet::new();
    for v in s1.jet_vars().into_iter().chain(s2.jet_vars()) {
        let decl = table.get(v.symbol);
        match decl.role {
            SymbolRole::Field | SymbolRole::Ghost => {
                if !antifield_of.contains_key(&v.symbol) {
                    return Err(BrstError::UnpairedVariable(decl.name.clone()));
                }
                fields.insert(v.symbol);
            }
            SymbolRole::FieldAntifield | SymbolRole::NoetherAntifield => {
                let Some((z, _)) = antifield_of.iter().find(|(_, ab)| **ab == v.symbol) else {
                    return Err(BrstError::UnpairedVariable(decl.name.clone()));
                };
                fields.insert(*z);
            }
            _ => {}
        }
    }
    let mut out = GradedExpr::zero();
    for z in fields {
        let zbar = antifield_of[&z];
        let r1 = variational_derivative(table, &s1, zbar, Side::Right);
        let l2d = variational_derivative(table, &s2, z, Side::Left);
        out = out.add(&r1.mul(&l2d, table));
        let r2 = variational_derivative(table, &s2, zbar, Side::Right);
        let l1d = variational_derivative(table, &s1, z, Side::Left);
        out = out.add(&r2.mul(&l1d, table));
    }
    Ok(HForm::density(out, n))
}

/// Classical master equation: the antibracket of the density with itself is
/// variationally trivial.
pub fn check_master_equation(
    table: &SymbolTable,
    l_e: &HForm,
    antifield_of: &BTreeMap<SymbolId, SymbolId>,
) -> Result<Triviality, BrstError> {
    let bracket = antibracket(table, l_e, l_e, antifield_of)?;
    Ok(is_variationally_trivial(table, &bracket))
}

/// Builds the proper solution `L_E = L + b(sum_a z^a zbar_a) omega` of the
/// master equation from a nilpotent BRST operator.
pub fn build_proper_solution(
    table: &SymbolTable,
    lagrangian: &HForm,
    b: &BrstOperator,
    antifield_of: &BTreeMap<SymbolId, SymbolId>,
) -> Result<HForm, BrstError> {
    if !check_brst_nilpotency(table, b).nilpotent() {
        return Err(BrstError::NotNilpotent);
    }
    let n = table.base_dim();
    let mut inner = GradedExpr::zero();
    for (z, zbar) in antifield_of {
        inner = inner.add(&GradedExpr::var(JetVar::plain(*z)).mul(
            &GradedExpr::var(JetVar::plain(*zbar)),
            table,
        ));
    }
    let extension = prolong_apply(table, &b.derivation, &inner);
    Ok(HForm::density(
        lagrangian.density_coefficient(n).add(&extension),
        n,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{rat, SymbolDecl};
    use crate::noether::IdentityRow;
    use crate::variational::euler_lagrange;

    fn jet(v: &JetVar, idx: &[u8]) -> JetVar {
        JetVar::new(v.symbol, MultiIndex::new(idx))
    }

    /// Abelian gauge field at n=2 with Euclidean contraction,
    /// L = 1/2 (a1_0 - a0_1)^2, gauge a_mu -> d_mu c, tower and gamma = 0.
    struct Toy {
        t: SymbolTable,
        a: Vec<JetVar>,
        c: JetVar,
        dens: HForm,
        antifield_of: BTreeMap<SymbolId, SymbolId>,
        base_of: BTreeMap<SymbolId, SymbolId>,
        tower: Vec<IdentityDensity>,
        gauge: GradedDerivation,
    }

    fn toy() -> Toy {
        let mut t = SymbolTable::with_base_dim(2);
        let a0 = JetVar::plain(t.declare(SymbolDecl::field("a[0]", Parity::Even)).unwrap());
        let a1 = JetVar::plain(t.declare(SymbolDecl::field("a[1]", Parity::Even)).unwrap());
        let c = JetVar::plain(t.declare(SymbolDecl::ghost("c", Parity::Odd, 0)).unwrap());
        let a0b = t
            .declare(SymbolDecl::field_antifield("a~[0]", Parity::Odd))
            .unwrap();
        let a1b = t
            .declare(SymbolDecl::field_antifield("a~[1]", Parity::Odd))
            .unwrap();
        let cb = t
            .declare(SymbolDecl::noether_antifield("c~", Parity::Even, 0))
            .unwrap();
        let f01 = GradedExpr::var(jet(&a1, &[0])).sub(&GradedExpr::var(jet(&a0, &[1])));
        let dens = HForm::density(f01.pow(2, &t).scale(&rat(1, 2)), 2);
        let antifield_of =
            BTreeMap::from([(a0.symbol, a0b), (a1.symbol, a1b), (c.symbol, cb)]);
        let base_of: BTreeMap<SymbolId, SymbolId> =
            antifield_of.iter().map(|(k, v)| (*v, *k)).collect();
        // Tower row: Delta = -(a~[0];0 + a~[1];1), the eta-consistent form.
        let value = GradedExpr::var(jet(&JetVar::plain(a0b), &[0]))
            .add(&GradedExpr::var(jet(&JetVar::plain(a1b), &[1])))
            .neg();
        let tower = vec![IdentityDensity {
            stage: 0,
            rows: vec![IdentityRow { antifield: cb, value }],
        }];
        let gauge = GradedDerivation::vertical_only(
            &t,
            BTreeMap::from([
                (a0.symbol, GradedExpr::var(jet(&c, &[0]))),
                (a1.symbol, GradedExpr::var(jet(&c, &[1]))),
            ]),
            Parity::Odd,
            1,
        )
        .unwrap();
        Toy { t, a: vec![a0, a1], c, dens, antifield_of, base_of, tower, gauge }
    }

    #[test]
    fn tower_assembly_matches_declared_gauge() {
        let toy = toy();
        let gop = assemble_gauge_operator(
            &toy.t,
            Some(std::slice::from_ref(&toy.gauge)),
            &toy.tower,
            &toy.base_of,
        )
        .unwrap();
        assert_eq!(gop.stages.len(), 1);
        assert_eq!(gop.stages[0], toy.gauge);
    }

    #[test]
    fn abelian_brst_is_gauge_operator_and_nilpotent() {
        let toy = toy();
        let gop = GaugeOperator { stages: vec![toy.gauge.clone()] };
        let b = brst_extend(&toy.t, &gop, &BTreeMap::new()).unwrap();
        let report = check_brst_nilpotency(&toy.t, &b);
        assert!(report.nilpotent());
    }

    #[test]
    fn master_equation_for_proper_solution() {
        let toy = toy();
        let gop = GaugeOperator { stages: vec![toy.gauge.clone()] };
        let b = brst_extend(&toy.t, &gop, &BTreeMap::new()).unwrap();
        let l_e = build_proper_solution(&toy.t, &toy.dens, &b, &toy.antifield_of).unwrap();
        // L_E = L + c_mu a~^mu.
        let verdict = check_master_equation(&toy.t, &l_e, &toy.antifield_of).unwrap();
        assert!(verdict.trivial);
        // The original Lagrangian is a trivial solution.
        let verdict = check_master_equation(&toy.t, &toy.dens, &toy.antifield_of).unwrap();
        assert!(verdict.trivial);
        // A corrupted extension fails.
        let bad = l_e.add(&HForm::density(
            GradedExpr::var(toy.c.clone())
                .mul(&GradedExpr::var(JetVar::plain(toy.antifield_of[&toy.a[0].symbol])), &toy.t)
                .mul(&GradedExpr::var(toy.a[1].clone()), &toy.t),
            2,
        ));
        let verdict = check_master_equation(&toy.t, &bad, &toy.antifield_of).unwrap();
        assert!(!verdict.trivial);
    }

    #[test]
    fn antibracket_swap_symmetry_and_triviality() {
        let toy = toy();
        // Antifield-independent densities have vanishing self-bracket.
        let verdict = check_master_equation(&toy.t, &toy.dens, &toy.antifield_of).unwrap();
        assert!(verdict.trivial);
        // Swap symmetry of the defining formula.
        let l1 = HForm::density(
            GradedExpr::var(toy.a[0].clone())
                .mul(&GradedExpr::var(JetVar::plain(toy.antifield_of[&toy.a[0].symbol])), &toy.t),
            2,
        );
        let l2 = HForm::density(
            GradedExpr::var(toy.a[1].clone())
                .pow(2, &toy.t)
                .mul(&GradedExpr::var(JetVar::plain(toy.antifield_of[&toy.a[1].symbol])), &toy.t),
            2,
        );
        let b12 = antibracket(&toy.t, &l1, &l2, &toy.antifield_of).unwrap();
        let b21 = antibracket(&toy.t, &l2, &l1, &toy.antifield_of).unwrap();
        assert_eq!(b12, b21);
        // Unpaired variables are rejected.
        let mut broken = toy.antifield_of.clone();
        broken.remove(&toy.a[0].symbol);
        assert!(matches!(
            antibracket(&toy.t, &l1, &l2, &broken),
            Err(BrstError::UnpairedVariable(_))
        ));
    }

    #[test]
    fn stage_conditions_trivial_for_irreducible() {
        let toy = toy();
        let gop = GaugeOperator { stages: vec![toy.gauge.clone()] };
        let el = euler_lagrange(&toy.t, &toy.dens);
        let report =
            check_gauge_stage_conditions(&toy.t, &gop, &el, Bounds { order: 1, degree: 1 });
        assert!(report.stages.is_empty());
        assert!(report.all_satisfied());
    }
}
