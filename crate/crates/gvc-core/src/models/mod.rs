//! Built-in field models with their full data (Lagrangian, gauge tower,
//! Noether tower, BRST terms), index-template expansion, and the model-file
//! loader.

pub mod parser;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;

use crate::jetcalc::{GradedDerivation, HForm};
use crate::kernel::{
    rat, GradedExpr, JetVar, MultiIndex, Parity, Rational, SymbolDecl, SymbolId, SymbolTable,
};
use crate::noether::{IdentityDensity, IdentityRow};

pub use parser::{load_model, load_model_str, ParseError};

/// Fully numeric constant table (metric, Levi-Civita symbol, structure
/// constants, invariant bilinear forms).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstTable {
    pub dims: Vec<usize>,
    entries: BTreeMap<Vec<usize>, Rational>,
}

impl ConstTable {
    pub fn new(dims: Vec<usize>) -> Self {
        ConstTable { dims, entries: BTreeMap::new() }
    }

    pub fn set(&mut self, idx: Vec<usize>, value: Rational) {
        debug_assert_eq!(idx.len(), self.dims.len());
        if value.is_zero() {
            self.entries.remove(&idx);
        } else {
            self.entries.insert(idx, value);
        }
    }

    pub fn get(&self, idx: &[usize]) -> Rational {
        self.entries.get(idx).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<usize>, &Rational)> {
        self.entries.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Minkowski,
    Euclidean,
}

/// Diagonal constant metric: Minkowski is (+, -, ..., -).
pub fn metric_table(kind: MetricKind, n: usize) -> ConstTable {
    let mut t = ConstTable::new(vec![n, n]);
    for mu in 0..n {
        let v = match kind {
            MetricKind::Euclidean => rat(1, 1),
            MetricKind::Minkowski => {
                if mu == 0 {
                    rat(1, 1)
                } else {
                    rat(-1, 1)
                }
            }
        };
        t.set(vec![mu, mu], v);
    }
    t
}

fn permutation_sign(idx: &[usize]) -> i64 {
    let mut inversions = 0;
    for i in 0..idx.len() {
        for j in (i + 1)..idx.len() {
            if idx[i] > idx[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Totally antisymmetric Levi-Civita symbol with eps(0,1,...,n-1) = 1.
pub fn levi_civita(n: usize) -> ConstTable {
    let mut t = ConstTable::new(vec![n; n]);
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        t.set(perm.clone(), rat(permutation_sign(&perm), 1));
        if !next_permutation(&mut perm) {
            break;
        }
    }
    t
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Resolves a reference to an antisymmetric component: the sorted strict
/// tuple and the permutation sign, or `None` when an index repeats.
pub fn antisym_resolve(idx: &[usize]) -> Option<(Vec<usize>, i64)> {
    let mut sorted = idx.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((sorted, permutation_sign(idx)))
}

/// Sorted strict k-subsets of `0..n`.
pub fn strict_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, start: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for i in start..n {
            prefix.push(i);
            rec(n, k, i + 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, 0, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    /// Structure constants fail antisymmetry or the Jacobi identity, or the
    /// bilinear form is not invariant.
    BadAlgebra(String),
    /// Dimension or form-degree constraints violated.
    BadShape(String),
    Decl(String),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::BadAlgebra(m) => write!(f, "bad algebra: {m}"),
            ModelError::BadShape(m) => write!(f, "bad shape: {m}"),
            ModelError::Decl(m) => write!(f, "declaration error: {m}"),
        }
    }
}

impl std::error::Error for ModelError {}

/// Antisymmetry and Jacobi validation of structure constants.
pub fn validate_structure_constants(c: &ConstTable, dim: usize) -> Result<(), ModelError> {
    for r in 0..dim {
        for p in 0..dim {
            for q in 0..dim {
                if c.get(&[r, p, q]) != -c.get(&[r, q, p]) {
                    return Err(ModelError::BadAlgebra(format!(
                        "structure constants not antisymmetric at ({r},{p},{q})"
                    )));
                }
            }
        }
    }
    for p in 0..dim {
        for q in 0..dim {
            for r in 0..dim {
                for s in 0..dim {
                    let mut sum = Rational::zero();
                    for m in 0..dim {
                        sum += c.get(&[m, p, q]) * c.get(&[s, m, r])
                            + c.get(&[m, q, r]) * c.get(&[s, m, p])
                            + c.get(&[m, r, p]) * c.get(&[s, m, q]);
                    }
                    if !sum.is_zero() {
                        return Err(ModelError::BadAlgebra(format!(
                            "Jacobi identity fails at ({p},{q},{r};{s})"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// The gauge algebra of a model, as fully numeric tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Algebra {
    pub name: String,
    pub dim: usize,
    /// c^r_{pq}, indexed (r, p, q).
    pub structure: ConstTable,
    /// Invariant bilinear form a_{pq}.
    pub bilinear: ConstTable,
}

impl Algebra {
    pub fn u1() -> Self {
        let mut bilinear = ConstTable::new(vec![1, 1]);
        bilinear.set(vec![0, 0], rat(1, 1));
        Algebra {
            name: "u1".into(),
            dim: 1,
            structure: ConstTable::new(vec![1, 1, 1]),
            bilinear,
        }
    }

    pub fn su2() -> Self {
        let mut structure = ConstTable::new(vec![3, 3, 3]);
        let eps = levi_civita(3);
        for (idx, v) in eps.entries() {
            structure.set(idx.clone(), v.clone());
        }
        let mut bilinear = ConstTable::new(vec![3, 3]);
        for r in 0..3 {
            bilinear.set(vec![r, r], rat(1, 1));
        }
        Algebra { name: "su2".into(), dim: 3, structure, bilinear }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        validate_structure_constants(&self.structure, self.dim)
    }
}

/// A concretely instantiated model: symbol table, Lagrangian density,
/// constant tables, optional gauge and Noether towers, and BRST terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldModel {
    pub name: String,
    pub dim: usize,
    pub table: SymbolTable,
    pub lagrangian: HForm,
    pub constants: BTreeMap<String, ConstTable>,
    pub gauge_stages: Option<Vec<GradedDerivation>>,
    pub tower: Vec<IdentityDensity>,
    pub gamma: BTreeMap<SymbolId, GradedExpr>,
    /// Pairing of every field and ghost with its antifield.
    pub antifield_of: BTreeMap<SymbolId, SymbolId>,
}

impl FieldModel {
    /// Inverse of the antifield pairing.
    pub fn base_of(&self) -> BTreeMap<SymbolId, SymbolId> {
        self.antifield_of.iter().map(|(z, zb)| (*zb, *z)).collect()
    }

    /// Structural identity: everything except the model name.
    pub fn structurally_eq(&self, other: &FieldModel) -> bool {
        self.dim == other.dim
            && self.table == other.table
            && self.lagrangian == other.lagrangian
            && self.gauge_stages == other.gauge_stages
            && self.tower == other.tower
            && self.gamma == other.gamma
            && self.antifield_of == other.antifield_of
    }
}

fn idx_name(base: &str, idx: &[usize]) -> String {
    if idx.is_empty() {
        return base.to_string();
    }
    let parts: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
    format!("{base}[{}]", parts.join(","))
}

fn var(sym: SymbolId) -> GradedExpr {
    GradedExpr::var(JetVar::plain(sym))
}

fn jet(sym: SymbolId, idx: &[u8]) -> GradedExpr {
    GradedExpr::var(JetVar::new(sym, MultiIndex::new(idx)))
}

/// Yang-Mills theory on a Minkowski background: gauge potentials a^r_mu,
/// strength F^r_{lam mu} = d_lam a^r_mu - d_mu a^r_lam + c^r_{pq} a^p_lam
/// a^q_mu, and the quadratic gauge-invariant Lagrangian.
pub fn yang_mills(algebra: &Algebra, n: usize) -> Result<FieldModel, ModelError> {
    if n < 2 {
        return Err(ModelError::BadShape(format!("Yang-Mills needs n >= 2, got {n}")));
    }
    algebra.validate()?;
    let dg = algebra.dim;
    let mut table = SymbolTable::with_base_dim(n);
    let mut a = vec![vec![SymbolId(0); n]; dg];
    for r in 0..dg {
        for mu in 0..n {
            a[r][mu] = table
                .declare(SymbolDecl::field(idx_name("a", &[r, mu]), Parity::Even))
                .map_err(|e| ModelError::Decl(e.to_string()))?;
        }
    }
    let mut c = vec![SymbolId(0); dg];
    for r in 0..dg {
        c[r] = table
            .declare(SymbolDecl::ghost(idx_name("c", &[r]), Parity::Odd, 0))
            .map_err(|e| ModelError::Decl(e.to_string()))?;
    }
    let mut ab = vec![vec![SymbolId(0); n]; dg];
    for r in 0..dg {
        for mu in 0..n {
            ab[r][mu] = table
                .declare(SymbolDecl::field_antifield(idx_name("a~", &[r, mu]), Parity::Odd))
                .map_err(|e| ModelError::Decl(e.to_string()))?;
        }
    }
    let mut cb = vec![SymbolId(0); dg];
    for r in 0..dg {
        cb[r] = table
            .declare(SymbolDecl::noether_antifield(idx_name("c~", &[r]), Parity::Even, 0))
            .map_err(|e| ModelError::Decl(e.to_string()))?;
    }
    let eta = metric_table(MetricKind::Minkowski, n);
    let strength = |r: usize, lam: usize, mu: usize, table: &SymbolTable| -> GradedExpr {
        let mut f = jet(a[r][mu], &[lam as u8]).sub(&jet(a[r][lam], &[mu as u8]));
        for p in 0..dg {
            for q in 0..dg {
                let cc = algebra.structure.get(&[r, p, q]);
                if cc.is_zero() {
                    continue;
                }
                f = f.add(&var(a[p][lam]).mul(&var(a[q][mu]), table).scale(&cc));
            }
        }
        f
    };
    // L = 1/4 a_{pq} eta^{lam mu} eta^{bt nu} F^p_{lam bt} F^q_{mu nu};
    // the metric is diagonal, so only mu = lam, nu = bt contribute.
    let mut l = GradedExpr::zero();
    for p in 0..dg {
        for q in 0..dg {
            let apq = algebra.bilinear.get(&[p, q]);
            if apq.is_zero() {
                continue;
            }
            for lam in 0..n {
                for bt in 0..n {
                    let coeff = &apq * eta.get(&[lam, lam]) * eta.get(&[bt, bt]) * rat(1, 4);
                    let fp = strength(p, lam, bt, &table);
                    let fq = strength(q, lam, bt, &table);
                    l = l.add(&fp.mul(&fq, &table).scale(&coeff));
                }
            }
        }
    }
    // Gauge symmetry: a^r_mu -> c^r_mu + c^r_{pq} a^p_mu c^q.
    let mut gauge = BTreeMap::new();
    for r in 0..dg {
        for mu in 0..n {
            let mut comp = jet(c[r], &[mu as u8]);
            for p in 0..dg {
                for q in 0..dg {
                    let cc = algebra.structure.get(&[r, p, q]);
                    if cc.is_zero() {
                        continue;
                    }
                    comp = comp.add(&var(a[p][mu]).mul(&var(c[q]), &table).scale(&cc));
                }
            }
            gauge.insert(a[r][mu], comp);
        }
    }
    let gauge = GradedDerivation::vertical_only(&table, gauge, Parity::Odd, 1)
        .map_err(|e| ModelError::Decl(e.0))?;
    // Noether tower, oriented so that the higher-Euler assembly reproduces
    // the declared gauge components exactly:
    // Delta_r = c^p_{qr} a^q_mu a~^mu_p - d_mu a~^mu_r.
    let mut tower_rows = Vec::new();
    for r in 0..dg {
        let mut value = GradedExpr::zero();
        for p in 0..dg {
            for q in 0..dg {
                let cc = algebra.structure.get(&[p, q, r]);
                if cc.is_zero() {
                    continue;
                }
                for mu in 0..n {
                    value = value.add(&var(a[q][mu]).mul(&var(ab[p][mu]), &table).scale(&cc));
                }
            }
        }
        for mu in 0..n {
            value = value.sub(&jet(ab[r][mu], &[mu as u8]));
        }
        tower_rows.push(IdentityRow { antifield: cb[r], value });
    }
    // BRST term: gamma^r = -1/2 c^r_{pq} c^p c^q.
    let mut gamma = BTreeMap::new();
    for r in 0..dg {
        let mut g = GradedExpr::zero();
        for p in 0..dg {
            for q in 0..dg {
                let cc = algebra.structure.get(&[r, p, q]);
                if cc.is_zero() {
                    continue;
                }
                g = g.add(&var(c[p]).mul(&var(c[q]), &table).scale(&(cc * rat(-1, 2))));
            }
        }
        if !g.is_zero() {
            gamma.insert(c[r], g);
        }
    }
    let mut antifield_of = BTreeMap::new();
    for r in 0..dg {
        for mu in 0..n {
            antifield_of.insert(a[r][mu], ab[r][mu]);
        }
        antifield_of.insert(c[r], cb[r]);
    }
    let mut constants = BTreeMap::new();
    constants.insert("eta".into(), eta);
    constants.insert("c3".into(), algebra.structure.clone());
    constants.insert("ab".into(), algebra.bilinear.clone());
    Ok(FieldModel {
        name: format!("yang_mills_{}", algebra.name),
        dim: n,
        table,
        lagrangian: HForm::density(l, n),
        constants,
        gauge_stages: Some(vec![gauge]),
        tower: vec![IdentityDensity { stage: 0, rows: tower_rows }],
        gamma,
        antifield_of,
    })
}

/// Local Chern-Simons theory at n = 3: the metric-independent cubic
/// Lagrangian, algebra ghosts and odd frame ghosts, and the nilpotent BRST
/// extension.
pub fn chern_simons_3d(algebra: &Algebra) -> Result<FieldModel, ModelError> {
    let n = 3;
    algebra.validate()?;
    let dg = algebra.dim;
    let mut table = SymbolTable::with_base_dim(n);
    let mut a = vec![vec![SymbolId(0); n]; dg];
    for m in 0..dg {
        for al in 0..n {
            a[m][al] = table
                .declare(SymbolDecl::field(idx_name("a", &[m, al]), Parity::Even))
                .map_err(|e| ModelError::Decl(e.to_string()))?;
        }
    }
    let mut c = vec![SymbolId(0); dg];
    for r in 0..dg {
        c[r] = table
            .declare(SymbolDecl::ghost(idx_name("c", &[r]), Parity::Odd, 0))
            .map_err(|e| ModelError::Decl(e.to_string()))?;
    }
    let mut cv = vec![SymbolId(0); n];
    for mu in 0..n {
        cv[mu] = table
            .declare(SymbolDecl::ghost(idx_name("cv", &[mu]), Parity::Odd, 0))
            .map_err(|e| ModelError::Decl(e.to_string()))?;
    }
    let mut ab = vec![vec![SymbolId(0); n]; dg];
    for m in 0..dg {
        for al in 0..n {
            ab[m][al] = table
                .declare(SymbolDecl::field_antifield(idx_name("a~", &[m, al]), Parity::Odd))
                .map_err(|e| ModelError::Decl(e.to_string()))?;
        }
    }
    let mut cb = vec![SymbolId(0); dg];
    for r in 0..dg {
        cb[r] = table
            .declare(SymbolDecl::noether_antifield(idx_name("c~", &[r]), Parity::Even, 0))
            .map_err(|e| ModelError::Decl(e.to_string()))?;
    }
    let mut cvb = vec![SymbolId(0); n];
    for mu in 0..n {
        cvb[mu] = table
            .declare(SymbolDecl::noether_antifield(idx_name("cv~", &[mu]), Parity::Even, 0))
            .map_err(|e| ModelError::Decl(e.to_string()))?;
    }
    let eps = levi_civita(n);
    let strength = |r: usize, bt: usize, gm: usize, table: &SymbolTable| -> GradedExpr {
        let mut f = jet(a[r][gm], &[bt as u8]).sub(&jet(a[r][bt], &[gm as u8]));
        for p in 0..dg {
            for q in 0..dg {
                let cc = algebra.structure.get(&[r, p, q]);
                if cc.is_zero() {
                    continue;
                }
                f = f.add(&var(a[p][bt]).mul(&var(a[q][gm]), table).scale(&cc));
            }
        }
        f
    };
    // L_CS = 1/2 h_{mn} eps^{al bt gm} a^m_al (F^n_{bt gm} - 1/3 c^n_{pq}
    // a^p_bt a^q_gm).
    let mut l = GradedExpr::zero();
    for m in 0..dg {
        for nn in 0..dg {
            let h = algebra.bilinear.get(&[m, nn]);
            if h.is_zero() {
                continue;
            }
            for al in 0..n {
                for bt in 0..n {
                    for gm in 0..n {
                        let e = eps.get(&[al, bt, gm]);
                        if e.is_zero() {
                            continue;
                        }
                        let coeff = &h * &e * rat(1, 2);
                        let mut inner = strength(nn, bt, gm, &table);
                        for p in 0..dg {
                            for q in 0..dg {
                                let cc = algebra.structure.get(&[nn, p, q]);
                                if cc.is_zero() {
                                    continue;
                                }
                                inner = inner.sub(
                                    &var(a[p][bt])
                                        .mul(&var(a[q][gm]), &table)
                                        .scale(&(cc * rat(1, 3))),
                                );
                            }
                        }
                        l = l.add(&var(a[m][al]).mul(&inner, &table).scale(&coeff));
                    }
                }
            }
        }
    }
    // Gauge symmetry (frame ghosts included):
    // a^r_lam -> -c^r_{pq} c^p a^q_lam + c^r_lam - cv^mu_lam a^r_mu
    //            - cv^mu a^r_{mu;lam}.
    let mut gauge = BTreeMap::new();
    for r in 0..dg {
        for lam in 0..n {
            let mut comp = jet(c[r], &[lam as u8]);
            for p in 0..dg {
                for q in 0..dg {
                    let cc = algebra.structure.get(&[r, p, q]);
                    if cc.is_zero() {
                        continue;
                    }
                    comp = comp.sub(&var(c[p]).mul(&var(a[q][lam]), &table).scale(&cc));
                }
            }
            for mu in 0..n {
                comp = comp.sub(&jet(cv[mu], &[lam as u8]).mul(&var(a[r][mu]), &table));
                comp = comp.sub(&var(cv[mu]).mul(&jet(a[r][lam], &[mu as u8]), &table));
            }
            gauge.insert(a[r][lam], comp);
        }
    }
    let gauge = GradedDerivation::vertical_only(&table, gauge, Parity::Odd, 1)
        .map_err(|e| ModelError::Decl(e.0))?;
    // BRST terms: gamma^r = -1/2 c^r_{ij} c^i c^j - cv^mu c^r_mu (the second
    // summand transports the algebra ghost along the frame ghosts; without
    // it the square of the operator does not vanish), and
    // gamma^lam = cv^lam_mu cv^mu.
    let mut gamma = BTreeMap::new();
    for r in 0..dg {
        let mut g = GradedExpr::zero();
        for i in 0..dg {
            for j in 0..dg {
                let cc = algebra.structure.get(&[r, i, j]);
                if cc.is_zero() {
                    continue;
                }
                g = g.add(&var(c[i]).mul(&var(c[j]), &table).scale(&(cc * rat(-1, 2))));
            }
        }
        for mu in 0..n {
            g = g.sub(&var(cv[mu]).mul(&jet(c[r], &[mu as u8]), &table));
        }
        gamma.insert(c[r], g);
    }
    for lam in 0..n {
        let mut g = GradedExpr::zero();
        for mu in 0..n {
            g = g.add(&jet(cv[lam], &[mu as u8]).mul(&var(cv[mu]), &table));
        }
        gamma.insert(cv[lam], g);
    }
    let mut antifield_of = BTreeMap::new();
    for m in 0..dg {
        for al in 0..n {
            antifield_of.insert(a[m][al], ab[m][al]);
        }
    }
    for r in 0..dg {
        antifield_of.insert(c[r], cb[r]);
    }
    for mu in 0..n {
        antifield_of.insert(cv[mu], cvb[mu]);
    }
    let mut constants = BTreeMap::new();
    constants.insert("eps".into(), eps);
    constants.insert("c3".into(), algebra.structure.clone());
    constants.insert("h".into(), algebra.bilinear.clone());
    Ok(FieldModel {
        name: format!("chern_simons_{}", algebra.name),
        dim: n,
        table,
        lagrangian: HForm::density(l, n),
        constants,
        gauge_stages: Some(vec![gauge]),
        tower: Vec::new(),
        gamma,
        antifield_of,
    })
}

/// Topological BF theory: two antisymmetric form fields with `L = A ^ d_H B`,
/// the full reducible ghost tower, the abelian gauge operator, and the
/// Koszul-Tate tower.
pub fn bf_theory(n: usize, p: usize) -> Result<FieldModel, ModelError> {
    if p < 1 || n < p + 2 {
        return Err(ModelError::BadShape(format!("BF needs 1 <= p <= n-2, got n={n}, p={p}")));
    }
    let q = n - 1 - p;
    if q % 2 != 0 || q < p {
        return Err(ModelError::BadShape(format!(
            "BF convention requires q = n-1-p even and q >= p, got q={q}"
        )));
    }
    let mut table = SymbolTable::with_base_dim(n);
    let declare_family =
        |table: &mut SymbolTable, base: &str, k: usize, decl: &dyn Fn(String) -> SymbolDecl| {
            let mut map: BTreeMap<Vec<usize>, SymbolId> = BTreeMap::new();
            for tup in strict_tuples(n, k) {
                let id = table.declare(decl(idx_name(base, &tup))).unwrap();
                map.insert(tup, id);
            }
            map
        };
    let a_fields =
        declare_family(&mut table, "A", p, &|s| SymbolDecl::field(s, Parity::Even));
    let b_fields =
        declare_family(&mut table, "B", q, &|s| SymbolDecl::field(s, Parity::Even));
    // Ghost towers: stage s carries p-1-s (A side) or q-1-s (B side) indices.
    let ghost_parity = |s: usize| if s % 2 == 0 { Parity::Odd } else { Parity::Even };
    let mut e_ghosts: Vec<BTreeMap<Vec<usize>, SymbolId>> = Vec::new();
    for s in 0..p {
        e_ghosts.push(declare_family(&mut table, &format!("e{s}"), p - 1 - s, &|name| {
            SymbolDecl::ghost(name, ghost_parity(s), s as i64)
        }));
    }
    let mut xi_ghosts: Vec<BTreeMap<Vec<usize>, SymbolId>> = Vec::new();
    for s in 0..q {
        xi_ghosts.push(declare_family(&mut table, &format!("xi{s}"), q - 1 - s, &|name| {
            SymbolDecl::ghost(name, ghost_parity(s), s as i64)
        }));
    }
    let a_bar =
        declare_family(&mut table, "A~", p, &|s| SymbolDecl::field_antifield(s, Parity::Odd));
    let b_bar =
        declare_family(&mut table, "B~", q, &|s| SymbolDecl::field_antifield(s, Parity::Odd));
    let mut e_bar: Vec<BTreeMap<Vec<usize>, SymbolId>> = Vec::new();
    for s in 0..p {
        e_bar.push(declare_family(&mut table, &format!("e{s}~"), p - 1 - s, &|name| {
            SymbolDecl::noether_antifield(name, ghost_parity(s).flip(), s as i64)
        }));
    }
    let mut xi_bar: Vec<BTreeMap<Vec<usize>, SymbolId>> = Vec::new();
    for s in 0..q {
        xi_bar.push(declare_family(&mut table, &format!("xi{s}~"), q - 1 - s, &|name| {
            SymbolDecl::noether_antifield(name, ghost_parity(s).flip(), s as i64)
        }));
    }
    let eps = levi_civita(n);
    // L_BF = sum over partitions M + (lam) + N of 0..n-1:
    // eps^{M lam N} A_M d_lam B_N.
    let mut l = GradedExpr::zero();
    for (m_tup, &a_id) in &a_fields {
        for (n_tup, &b_id) in &b_fields {
            for lam in 0..n {
                if m_tup.contains(&lam) || n_tup.contains(&lam) {
                    continue;
                }
                let mut full = m_tup.clone();
                full.push(lam);
                full.extend_from_slice(n_tup);
                let e = eps.get(&full);
                if e.is_zero() {
                    continue;
                }
                l = l.add(&var(a_id).mul(&jet(b_id, &[lam as u8]), &table).scale(&e));
            }
        }
    }
    // Exterior-derivative pattern shared by every tower layer:
    // (d g)_M = sum_i (-1)^i d_{M_i} g_{M \ M_i}.
    let ext_d = |m_tup: &[usize],
                 lower: &BTreeMap<Vec<usize>, SymbolId>,
                 table: &SymbolTable|
     -> GradedExpr {
        let mut out = GradedExpr::zero();
        for (i, &mi) in m_tup.iter().enumerate() {
            let rest: Vec<usize> = m_tup
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &x)| x)
                .collect();
            let g = lower[&rest];
            let term = GradedExpr::var(JetVar::new(g, MultiIndex::single(mi as u8)));
            let _ = table;
            if i % 2 == 0 {
                out = out.add(&term);
            } else {
                out = out.sub(&term);
            }
        }
        out
    };
    // Gauge stages 0..q-1; the A side stops at stage p-1.
    let mut gauge_stages = Vec::new();
    for s in 0..q {
        let mut comps: BTreeMap<SymbolId, GradedExpr> = BTreeMap::new();
        if s < p {
            let (upper, lower): (&BTreeMap<_, _>, &BTreeMap<_, _>) = if s == 0 {
                (&a_fields, &e_ghosts[0])
            } else {
                (&e_ghosts[s - 1], &e_ghosts[s])
            };
            for (m_tup, &id) in upper {
                comps.insert(id, ext_d(m_tup, lower, &table));
            }
        }
        let (upper, lower): (&BTreeMap<_, _>, &BTreeMap<_, _>) = if s == 0 {
            (&b_fields, &xi_ghosts[0])
        } else {
            (&xi_ghosts[s - 1], &xi_ghosts[s])
        };
        for (n_tup, &id) in upper {
            comps.insert(id, ext_d(n_tup, lower, &table));
        }
        gauge_stages.push(
            GradedDerivation::vertical_only(&table, comps, Parity::Odd, 1)
                .map_err(|e| ModelError::Decl(e.0))?,
        );
    }
    // Koszul-Tate tower rows, oriented for exact higher-Euler consistency:
    // value(g~_{M'}) = -sum_nu sign(nu, M') d_nu lower~_{nu + M'}.
    let kt_value = |m_tup: &[usize],
                    lower_bar: &BTreeMap<Vec<usize>, SymbolId>,
                    table: &SymbolTable|
     -> GradedExpr {
        let mut out = GradedExpr::zero();
        for nu in 0..n {
            if m_tup.contains(&nu) {
                continue;
            }
            let mut full = vec![nu];
            full.extend_from_slice(m_tup);
            let (sorted, sign) = antisym_resolve(&full).unwrap();
            let term = GradedExpr::var(JetVar::new(lower_bar[&sorted], MultiIndex::single(nu as u8)))
                .scale(&rat(-sign, 1));
            let _ = table;
            out = out.add(&term);
        }
        out
    };
    let mut tower = Vec::new();
    for s in 0..q {
        let mut rows = Vec::new();
        if s < p {
            let lower: &BTreeMap<_, _> = if s == 0 { &a_bar } else { &e_bar[s - 1] };
            for (m_tup, &id) in &e_bar[s] {
                rows.push(IdentityRow { antifield: id, value: kt_value(m_tup, lower, &table) });
            }
        }
        let lower: &BTreeMap<_, _> = if s == 0 { &b_bar } else { &xi_bar[s - 1] };
        for (n_tup, &id) in &xi_bar[s] {
            rows.push(IdentityRow { antifield: id, value: kt_value(n_tup, lower, &table) });
        }
        tower.push(IdentityDensity { stage: s, rows });
    }
    let mut antifield_of = BTreeMap::new();
    for (t, &id) in &a_fields {
        antifield_of.insert(id, a_bar[t]);
    }
    for (t, &id) in &b_fields {
        antifield_of.insert(id, b_bar[t]);
    }
    for s in 0..p {
        for (t, &id) in &e_ghosts[s] {
            antifield_of.insert(id, e_bar[s][t]);
        }
    }
    for s in 0..q {
        for (t, &id) in &xi_ghosts[s] {
            antifield_of.insert(id, xi_bar[s][t]);
        }
    }
    let mut constants = BTreeMap::new();
    constants.insert("eps".into(), eps);
    Ok(FieldModel {
        name: format!("bf_{n}_{p}"),
        dim: n,
        table,
        lagrangian: HForm::density(l, n),
        constants,
        gauge_stages: Some(gauge_stages),
        tower,
        gamma: BTreeMap::new(),
        antifield_of,
    })
}

/// Resolves a built-in model reference: `yang_mills_su2`, `maxwell`,
/// `chern_simons_su2`, `chern_simons_u1`, `bf:<n>:<p>`.
pub fn builtin(name: &str) -> Option<Result<FieldModel, ModelError>> {
    if let Some(rest) = name.strip_prefix("bf:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 2 {
            return Some(Err(ModelError::BadShape(format!("bad bf reference `{name}`"))));
        }
        let (Ok(n), Ok(p)) = (parts[0].parse(), parts[1].parse()) else {
            return Some(Err(ModelError::BadShape(format!("bad bf reference `{name}`"))));
        };
        return Some(bf_theory(n, p));
    }
    match name {
        "yang_mills_su2" => Some(yang_mills(&Algebra::su2(), 4)),
        "maxwell" => Some(yang_mills(&Algebra::u1(), 4).map(|mut m| {
            m.name = "maxwell".into();
            m
        })),
        "chern_simons_su2" => Some(chern_simons_3d(&Algebra::su2())),
        "chern_simons_u1" => Some(chern_simons_3d(&Algebra::u1())),
        _ => None,
    }
}
