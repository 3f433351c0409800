use serde::Serialize;

use super::{evaluate_check, CheckContext, CheckId, CheckResult, ExponentSet, Prepared, Status};
use crate::error::{Error, Result};
use crate::exec;
use crate::testfns::TestFunction;

/// Members needed before a supremum over the family is reported.
pub const MIN_MEMBERS: usize = 4;
/// Relative change under refinement above which an estimate is flagged.
pub const UNSTABLE_DELTA: f64 = 0.1;

/// Sampled lower estimate of the best constant of one check.
#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalConstant {
    pub check_id: CheckId,
    pub gauge: String,
    pub domain: String,
    pub n: usize,
    pub p: f64,
    pub alpha: f64,
    pub sup_ratio: Option<f64>,
    pub witness: Option<String>,
    pub ratios: Vec<(String, Option<f64>)>,
    pub refined_sup_ratio: Option<f64>,
    /// `|sup_refined / sup - 1|`.
    pub refinement_delta: Option<f64>,
    pub unstable: bool,
    pub skipped: Option<String>,
}

fn sup_of(rows: &[CheckResult]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in rows.iter().enumerate() {
        if matches!(r.status, Status::Skipped(_)) {
            continue;
        }
        if let Some(x) = r.ratio.filter(|x| x.is_finite()) {
            if best.is_none_or(|(_, b)| x > b) {
                best = Some((i, x));
            }
        }
    }
    best
}

/// Supremum of the ratios in `rows`, compared against the same family on a refined grid.
pub fn empirical_from_rows(id: CheckId, rows: &[CheckResult], refined: Option<&[CheckResult]>) -> Result<EmpiricalConstant> {
    let first = rows.first().ok_or(Error::EmptyFamily)?;
    let mut out = EmpiricalConstant {
        check_id: id,
        gauge: first.gauge.clone(),
        domain: first.domain.clone(),
        n: first.n,
        p: first.p,
        alpha: first.alpha,
        sup_ratio: None,
        witness: None,
        ratios: rows.iter().map(|r| (r.function.clone(), r.ratio)).collect(),
        refined_sup_ratio: None,
        refinement_delta: None,
        unstable: false,
        skipped: None,
    };
    let live = rows.iter().filter(|r| !matches!(r.status, Status::Skipped(_))).count();
    if live == 0 {
        out.skipped = Some(match &first.status {
            Status::Skipped(reason) => reason.clone(),
            _ => "all members skipped".into(),
        });
        return Ok(out);
    }
    if rows.len() < MIN_MEMBERS {
        out.skipped = Some(format!("family of {} < {MIN_MEMBERS} members", rows.len()));
        return Ok(out);
    }
    let Some((i, sup)) = sup_of(rows) else {
        out.skipped = Some("no finite ratio".into());
        return Ok(out);
    };
    out.sup_ratio = Some(sup);
    out.witness = Some(rows[i].function.clone());
    if let Some((_, fine)) = refined.and_then(sup_of) {
        let delta = (fine / sup - 1.0).abs();
        out.refined_sup_ratio = Some(fine);
        out.refinement_delta = Some(delta);
        out.unstable = delta > UNSTABLE_DELTA;
    }
    Ok(out)
}

/// Family members resampled on the grid of `ctx` when needed, with their gradients.
pub fn prepare_family(family: &[TestFunction], ctx: &CheckContext) -> Result<Vec<Prepared>> {
    let prepared: Vec<Result<Prepared>> = exec::map_slice(family, |tf| {
        let field = if std::sync::Arc::ptr_eq(&tf.field.grid, ctx.df.grid()) {
            tf.field.clone()
        } else {
            tf.spec.evaluate(ctx.df)?
        };
        Ok(Prepared::new(tf.id.clone(), field, ctx.gauge))
    });
    prepared.into_iter().collect()
}

/// Rows of one per-function check over prepared members.
pub fn prepared_rows(id: CheckId, family: &[Prepared], ctx: &CheckContext, exps: &ExponentSet) -> Result<Vec<CheckResult>> {
    let rows: Vec<Result<CheckResult>> = exec::map_slice(family, |f| evaluate_check(id, f, ctx, exps));
    rows.into_iter().collect()
}

/// Rows of one per-function check over a family whose specs are sampled on the grid of `ctx`.
pub fn family_rows(id: CheckId, family: &[TestFunction], ctx: &CheckContext, exps: &ExponentSet) -> Result<Vec<CheckResult>> {
    prepared_rows(id, &prepare_family(family, ctx)?, ctx, exps)
}

/// Evaluates `id` over the family on `ctx` and, when given, on `refined`
/// (the same specs resampled on the finer grid).
pub fn empirical_constant(
    id: CheckId,
    family: &[TestFunction],
    ctx: &CheckContext,
    refined: Option<&CheckContext>,
    exps: &ExponentSet,
) -> Result<EmpiricalConstant> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let rows = family_rows(id, family, ctx, exps)?;
    let fine = match refined {
        Some(r) => Some(family_rows(id, family, r, exps)?),
        None => None,
    };
    empirical_from_rows(id, &rows, fine.as_deref())
}
