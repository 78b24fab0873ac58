//! Named verification checks over a field model, producing uniform reports
//! for the command-line front end and the acceptance suite.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::brst::{
    antibracket, assemble_gauge_operator, brst_extend, build_proper_solution,
    check_brst_nilpotency, check_gauge_stage_conditions, check_master_equation, StageStatus,
};
use crate::kernel::{GradedExpr, SymbolTable};
use crate::models::FieldModel;
use crate::noether::{
    build_koszul_tate, check_kt_nilpotency, derive_identities_from_gauge, noether_identity_residual,
};
use crate::symmetry::{
    is_variational_symmetry, noether_current, superpotential_decompose, weak_conservation_check,
    GaugeSymmetry,
};
use crate::variational::{euler_lagrange, verify_variational_decomposition, Bounds};

/// Verdict of one named check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Fail => write!(f, "fail"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub degree: usize,
    pub order: usize,
}

/// Uniform check report. Field order is alphabetical so that the JSON
/// rendering is byte-stable under parse and re-render.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub bounds: BoundsReport,
    pub check: String,
    pub elapsed_ms: u64,
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<String>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

/// A check could not even start on this model (missing tower, missing gauge
/// declaration, unknown check name); the front end maps this to a usage or
/// validation failure, distinct from a failing verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckSetupError(pub String);

impl fmt::Display for CheckSetupError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for CheckSetupError {}

pub const CHECK_NAMES: &[&str] = &[
    "el",
    "decomposition",
    "symmetry",
    "current",
    "superpotential",
    "noether-id",
    "derive-id",
    "kt",
    "gauge-stages",
    "brst",
    "master-eq",
    "proper-solution",
];

/// Ansatz bound overrides from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoundOverrides {
    pub order: Option<usize>,
    pub degree: Option<usize>,
}

impl BoundOverrides {
    fn apply(&self, base: Bounds) -> Bounds {
        Bounds {
            order: self.order.unwrap_or(base.order),
            degree: self.degree.unwrap_or(base.degree),
        }
    }
}

struct Ctx<'a> {
    model: &'a FieldModel,
    overrides: BoundOverrides,
}

impl Ctx<'_> {
    fn table(&self) -> &SymbolTable {
        &self.model.table
    }

    /// Default ansatz bounds: jet order and degree of the Lagrangian density.
    fn base_bounds(&self) -> Bounds {
        self.overrides.apply(Bounds::from_form(&self.model.lagrangian))
    }

    /// Bounds for ideal-membership searches: one extra derivative order.
    fn witness_bounds(&self) -> Bounds {
        let base = Bounds::from_form(&self.model.lagrangian);
        self.overrides.apply(Bounds { order: base.order.max(1), degree: base.degree.max(2) })
    }

    fn gauge_derivation(&self) -> Result<&crate::jetcalc::GradedDerivation, CheckSetupError> {
        self.model
            .gauge_stages
            .as_ref()
            .and_then(|s| s.first())
            .ok_or_else(|| CheckSetupError("model declares no gauge symmetry".into()))
    }

    fn report(
        &self,
        check: &str,
        start: Instant,
        bounds: Bounds,
        verdict: Verdict,
        residual: Option<String>,
        witness: Option<String>,
    ) -> CheckReport {
        CheckReport {
            bounds: BoundsReport { degree: bounds.degree, order: bounds.order },
            check: check.into(),
            elapsed_ms: start.elapsed().as_millis() as u64,
            model: self.model.name.clone(),
            residual,
            verdict,
            witness,
        }
    }
}

fn render(table: &SymbolTable, e: &GradedExpr) -> String {
    e.display(table).to_string()
}

/// Runs one named check; `all` runs every check applicable to the model.
pub fn run_check(
    model: &FieldModel,
    check: &str,
    overrides: BoundOverrides,
) -> Result<Vec<CheckReport>, CheckSetupError> {
    let ctx = Ctx { model, overrides };
    match check {
        "all" => {
            let mut out = Vec::new();
            for name in CHECK_NAMES {
                if applicable(model, name) {
                    out.extend(run_check(model, name, overrides)?);
                }
            }
            Ok(out)
        }
        "el" => Ok(vec![check_el(&ctx)]),
        "decomposition" => Ok(vec![check_decomposition(&ctx)]),
        "symmetry" => Ok(vec![check_symmetry(&ctx)?]),
        "current" => Ok(vec![check_current(&ctx)?]),
        "superpotential" => Ok(vec![check_superpotential(&ctx)?]),
        "noether-id" => Ok(vec![check_noether_id(&ctx)?]),
        "derive-id" => Ok(vec![check_derive_id(&ctx)?]),
        "kt" => Ok(vec![check_kt(&ctx)?]),
        "gauge-stages" => Ok(vec![check_stages(&ctx)?]),
        "brst" => Ok(vec![check_brst(&ctx)?]),
        "master-eq" => Ok(vec![check_master(&ctx)?]),
        "proper-solution" => Ok(vec![check_proper(&ctx)?]),
        other => Err(CheckSetupError(format!("unknown check `{other}`"))),
    }
}

/// Which checks `all` runs for a given model.
pub fn applicable(model: &FieldModel, check: &str) -> bool {
    let has_gauge = model.gauge_stages.as_ref().is_some_and(|s| !s.is_empty());
    let has_tower = !model.tower.is_empty();
    match check {
        "el" | "decomposition" => true,
        "symmetry" | "current" | "superpotential" | "derive-id" | "gauge-stages" | "brst"
        | "master-eq" | "proper-solution" => has_gauge,
        "noether-id" | "kt" => has_tower,
        _ => false,
    }
}

fn check_el(ctx: &Ctx) -> CheckReport {
    let start = Instant::now();
    let el = euler_lagrange(ctx.table(), &ctx.model.lagrangian);
    let mut lines = Vec::new();
    for (a, e) in &el.components {
        lines.push(format!("E[{}] = {}", ctx.table().get(*a).name, render(ctx.table(), e)));
    }
    ctx.report(
        "el",
        start,
        ctx.base_bounds(),
        Verdict::Pass,
        None,
        Some(lines.join("; ")),
    )
}

fn check_decomposition(ctx: &Ctx) -> CheckReport {
    let start = Instant::now();
    let ok = verify_variational_decomposition(ctx.table(), &ctx.model.lagrangian);
    ctx.report(
        "decomposition",
        start,
        ctx.base_bounds(),
        if ok { Verdict::Pass } else { Verdict::Fail },
        None,
        None,
    )
}

fn check_symmetry(ctx: &Ctx) -> Result<CheckReport, CheckSetupError> {
    let start = Instant::now();
    let d = ctx.gauge_derivation()?;
    let v = is_variational_symmetry(ctx.table(), d, &ctx.model.lagrangian);
    let verdict = if v.variational { Verdict::Pass } else { Verdict::Fail };
    let witness = Some(format!(
        "exact: {}, variational: {}{}",
        v.exact,
        v.variational,
        if v.even_caveat { " (modulo closed forms)" } else { "" }
    ));
    Ok(ctx.report("symmetry", start, ctx.base_bounds(), verdict, None, witness))
}

fn check_current(ctx: &Ctx) -> Result<CheckReport, CheckSetupError> {
    let start = Instant::now();
    let d = ctx.gauge_derivation()?;
    let bounds = ctx.witness_bounds();
    let current = match noether_current(ctx.table(), d, &ctx.model.lagrangian, bounds) {
        Ok(c) => c,
        Err(e) => {
            return Ok(ctx.report(
                "current",
                start,
                bounds,
                Verdict::Fail,
                Some(e.to_string()),
                None,
            ))
        }
    };
    let el = euler_lagrange(ctx.table(), &ctx.model.lagrangian);
    let verdict = match weak_conservation_check(ctx.table(), &current, &el, bounds) {
        Some(_) => Verdict::Pass,
        None => Verdict::Inconclusive,
    };
    let comps: Vec<String> = current
        .components
        .iter()
        .enumerate()
        .map(|(mu, c)| format!("J^{mu} = {}", render(ctx.table(), c)))
        .collect();
    Ok(ctx.report("current", start, bounds, verdict, None, Some(comps.join("; "))))
}

fn check_superpotential(ctx: &Ctx) -> Result<CheckReport, CheckSetupError> {
    let start = Instant::now();
    let d = ctx.gauge_derivation()?;
    let bounds = ctx.witness_bounds();
    let gauge = GaugeSymmetry::new(ctx.table(), d.clone())
        .map_err(|e| CheckSetupError(e.to_string()))?;
    let current = match noether_current(ctx.table(), d, &ctx.model.lagrangian, bounds) {
        Ok(c) => c,
        Err(e) => {
            return Ok(ctx.report(
                "superpotential",
                start,
                bounds,
                Verdict::Fail,
                Some(e.to_string()),
                None,
            ))
        }
    };
    let el = euler_lagrange(ctx.table(), &ctx.model.lagrangian);
    match superpotential_decompose(ctx.table(), &current, &gauge, &el, bounds) {
        Ok(split) => {
            // J = W + d_H U holds exactly by construction; re-verify anyway.
            let n = ctx.model.dim;
            let mut exact = true;
            for mu in 0..n as u8 {
                let rebuilt = split.on_shell_part[mu as usize].add(
                    &split
                        .superpotential
                        .horizontal_differential(ctx.table(), mu),
                );
                if rebuilt != current.components[mu as usize] {
                    exact = false;
                }
            }
            let mut parts = Vec::new();
            for nu in 0..n as u8 {
                for mu in (nu + 1)..n as u8 {
                    let u = split.superpotential.component(nu, mu);
                    if !u.is_zero() {
                        parts.push(format!("U^{{{nu}{mu}}} = {}", render(ctx.table(), &u)));
                    }
                }
            }
            Ok(ctx.report(
                "superpotential",
                start,
                bounds,
                if exact { Verdict::Pass } else { Verdict::Fail },
                None,
                Some(parts.join("; ")),
            ))
        }
        Err(crate::symmetry::SuperpotentialError::WitnessNotFound) => Ok(ctx.report(
            "superpotential",
            start,
            bounds,
            Verdict::Inconclusive,
            Some("no on-shell witness within bounds".into()),
            None,
        )),
        Err(e) => Ok(ctx.report(
            "superpotential",
            start,
            bounds,
            Verdict::Fail,
            Some(e.to_string()),
            None,
        )),
    }
}

fn check_noether_id(ctx: &Ctx) -> Result<CheckReport, CheckSetupError> {
    let start = Instant::now();
    if ctx.model.tower.is_empty() {
        return Err(CheckSetupError("model declares no Noether tower".into()));
    }
    let el = euler_lagrange(ctx.table(), &ctx.model.lagrangian);
    let base_of = ctx.model.base_of();
    let mut failures = Vec::new();
    for row in &ctx.model.tower[0].rows {
        match noether_identity_residual(ctx.table(), row, &el, &base_of) {
            Some(r) if r.is_zero() => {}
            Some(r) => failures.push(format!(
                "{}: {}",
                ctx.table().get(row.antifield).name,
                render(ctx.table(), &r)
            )),
            None => failures.push(format!(
                "{}: not linear in field-antifields",
                ctx.table().get(row.antifield).name
            )),
        }
    }
    let verdict = if failures.is_empty() { Verdict::Pass } else { Verdict::Fail };
    let residual = if failures.is_empty() { None } else { Some(failures.join("; ")) };
    Ok(ctx.report("noether-id", start, ctx.base_bounds(), verdict, residual, None))
}

fn check_derive_id(ctx: &Ctx) -> Result<CheckReport, CheckSetupError> {
    let start = Instant::now();
    let d = ctx.gauge_derivation()?;
    let gauge = GaugeSymmetry::new(ctx.table(), d.clone())
        .map_err(|e| CheckSetupError(e.to_string()))?;
    let el = euler_lagrange(ctx.table(), &ctx.model.lagrangian);
    match derive_identities_from_gauge(ctx.table(), &gauge, &el, &ctx.model.antifield_of) {
        Ok(rows) => {
            // Every derived identity must hold; when the model also declares
            // a stage-0 tower, the normal forms must agree row by row.
            let base_of = ctx.model.base_of();
            let mut failures = Vec::new();
            for row in &rows {
                match noether_identity_residual(ctx.table(), row, &el, &base_of) {
                    Some(r) if r.is_zero() => {}
                    _ => failures.push(format!(
                        "derived identity for {} does not hold",
                        ctx.table().get(row.antifield).name
                    )),
                }
            }
            if let Some(declared) = ctx.model.tower.first() {
                if declared.rows != rows {
                    failures.push("derived identities differ from the declared tower".into());
                }
            }
            let verdict = if failures.is_empty() { Verdict::Pass } else { Verdict::Fail };
            let residual = if failures.is_empty() { None } else { Some(failures.join("; ")) };
            Ok(ctx.report("derive-id", start, ctx.base_bounds(), verdict, residual, None))
        }
        Err(e) => Ok(ctx.report(
            "derive-id",
            start,
            ctx.base_bounds(),
            Verdict::Fail,
            Some(e.to_string()),
            None,
        )),
    }
}

fn check_kt(ctx: &Ctx) -> Result<CheckReport, CheckSetupError> {
    let start = Instant::now();
    if ctx.model.tower.is_empty() {
        return Err(CheckSetupError("model declares no Noether tower".into()));
    }
    let el = euler_lagrange(ctx.table(), &ctx.model.lagrangian);
    let kt = build_koszul_tate(ctx.table(), &el, &ctx.model.tower, &ctx.model.antifield_of)
        .map_err(|e| CheckSetupError(e.to_string()))?;
    let report = check_kt_nilpotency(ctx.table(), &kt);
    let verdict = if report.nilpotent() { Verdict::Pass } else { Verdict::Fail };
    let residual = if report.nilpotent() {
        None
    } else {
        Some(
            report
                .failing()
                .iter()
                .map(|(k, a, r)| {
                    format!(
                        "stage {k}, {}: {}",
                        ctx.table().get(*a).name,
                        render(ctx.table(), r)
                    )
                })
                .collect::<Vec<_>>()
                .join("; "),
        )
    };
    let witness = Some(format!("stages checked: {}", ctx.model.tower.len()));
    Ok(ctx.report("kt", start, ctx.base_bounds(), verdict, residual, witness))
}

fn check_stages(ctx: &Ctx) -> Result<CheckReport, CheckSetupError> {
    let start = Instant::now();
    let gop = assemble_gauge_operator(
        ctx.table(),
        ctx.model.gauge_stages.as_deref(),
        &ctx.model.tower,
        &ctx.model.base_of(),
    )
    .map_err(|e| CheckSetupError(e.to_string()))?;
    let el = euler_lagrange(ctx.table(), &ctx.model.lagrangian);
    let bounds = ctx.witness_bounds();
    let report = check_gauge_stage_conditions(ctx.table(), &gop, &el, bounds);
    let verdict = if report.all_off_shell() || report.all_satisfied() {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    let witness = Some(
        report
            .stages
            .iter()
            .enumerate()
            .map(|(k, s)| match s {
                StageStatus::OffShellZero => format!("stage {k}: zero off-shell"),
                StageStatus::OnShell(_) => format!("stage {k}: zero on-shell (witnessed)"),
                StageStatus::Inconclusive(_) => format!("stage {k}: inconclusive"),
            })
            .collect::<Vec<_>>()
            .join("; "),
    );
    Ok(ctx.report("gauge-stages", start, bounds, verdict, None, witness))
}

fn check_brst(ctx: &Ctx) -> Result<CheckReport, CheckSetupError> {
    let start = Instant::now();
    let gop = assemble_gauge_operator(
        ctx.table(),
        ctx.model.gauge_stages.as_deref(),
        &ctx.model.tower,
        &ctx.model.base_of(),
    )
    .map_err(|e| CheckSetupError(e.to_string()))?;
    let b = brst_extend(ctx.table(), &gop, &ctx.model.gamma)
        .map_err(|e| CheckSetupError(e.to_string()))?;
    let report = check_brst_nilpotency(ctx.table(), &b);
    let verdict = if report.nilpotent() { Verdict::Pass } else { Verdict::Fail };
    let residual = if report.nilpotent() {
        None
    } else {
        Some(
            report
                .residuals
                .iter()
                .filter(|(_, r)| !r.is_zero())
                .map(|(a, r)| {
                    format!("b^2({}) = {}", ctx.table().get(*a).name, render(ctx.table(), r))
                })
                .collect::<Vec<_>>()
                .join("; "),
        )
    };
    // Status of the square by polynomial ghost degree: degree one carries
    // the stage conditions, degree two the commutation relations, higher
    // degrees the Jacobi layer.
    let witness = Some(
        (1..=3usize)
            .map(|d| {
                let zero = report.residual_of_ghost_degree(ctx.table(), d).is_zero();
                format!("degree {d}: {}", if zero { "zero" } else { "nonzero" })
            })
            .collect::<Vec<_>>()
            .join("; "),
    );
    Ok(ctx.report("brst", start, ctx.base_bounds(), verdict, residual, witness))
}

fn build_brst(ctx: &Ctx) -> Result<crate::brst::BrstOperator, CheckSetupError> {
    let gop = assemble_gauge_operator(
        ctx.table(),
        ctx.model.gauge_stages.as_deref(),
        &ctx.model.tower,
        &ctx.model.base_of(),
    )
    .map_err(|e| CheckSetupError(e.to_string()))?;
    brst_extend(ctx.table(), &gop, &ctx.model.gamma).map_err(|e| CheckSetupError(e.to_string()))
}

fn check_master(ctx: &Ctx) -> Result<CheckReport, CheckSetupError> {
    let start = Instant::now();
    let b = build_brst(ctx)?;
    match build_proper_solution(ctx.table(), &ctx.model.lagrangian, &b, &ctx.model.antifield_of) {
        Ok(l_e) => {
            let verdict = check_master_equation(ctx.table(), &l_e, &ctx.model.antifield_of)
                .map_err(|e| CheckSetupError(e.to_string()))?;
            let residual = if verdict.trivial {
                None
            } else {
                let bracket =
                    antibracket(ctx.table(), &l_e, &l_e, &ctx.model.antifield_of).unwrap();
                Some(render(
                    ctx.table(),
                    &bracket.density_coefficient(ctx.model.dim),
                ))
            };
            Ok(ctx.report(
                "master-eq",
                start,
                ctx.base_bounds(),
                if verdict.trivial { Verdict::Pass } else { Verdict::Fail },
                residual,
                None,
            ))
        }
        Err(e) => Ok(ctx.report(
            "master-eq",
            start,
            ctx.base_bounds(),
            Verdict::Fail,
            Some(e.to_string()),
            None,
        )),
    }
}

fn check_proper(ctx: &Ctx) -> Result<CheckReport, CheckSetupError> {
    let start = Instant::now();
    let b = build_brst(ctx)?;
    match build_proper_solution(ctx.table(), &ctx.model.lagrangian, &b, &ctx.model.antifield_of) {
        Ok(l_e) => {
            let verdict = check_master_equation(ctx.table(), &l_e, &ctx.model.antifield_of)
                .map_err(|e| CheckSetupError(e.to_string()))?;
            Ok(ctx.report(
                "proper-solution",
                start,
                ctx.base_bounds(),
                if verdict.trivial { Verdict::Pass } else { Verdict::Fail },
                None,
                Some(format!(
                    "L_E = {}",
                    render(ctx.table(), &l_e.density_coefficient(ctx.model.dim))
                )),
            ))
        }
        Err(e) => Ok(ctx.report(
            "proper-solution",
            start,
            ctx.base_bounds(),
            Verdict::Fail,
            Some(e.to_string()),
            None,
        )),
    }
}
