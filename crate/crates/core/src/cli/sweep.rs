//! One-parameter sweeps over a registered experiment or an analytic target.

use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::Serialize;

use super::experiments::{find, run_experiment};
use crate::error::{invalid, Error, Result};
use crate::field::{symmetric_majority_closed_forms, RestrictedField};
use crate::numerics::{eigenvalues, SmallMatrix};
use crate::rules::{minority_rprime_half, TypeRule};
use crate::structure::CommunityStructure;

/// Analytic sweep targets that need no simulation.
pub const ANALYTIC_TARGETS: [&str; 2] = ["minority-rprime", "majority-branch"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub statistic: String,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub median_spread: Option<f64>,
}

/// Seed of sweep cell `cell`: the splitmix output of `base ⊕ cell`.
pub fn cell_seed(base: u64, cell: usize) -> u64 {
    SplitMix64::seed_from_u64(base ^ cell as u64).next_u64()
}

pub fn sweep(
    target: &str,
    param: &str,
    values: &[String],
    overrides: &[(String, String)],
    base_seed: u64,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(invalid("a sweep needs at least one value"));
    }
    match target {
        "minority-rprime" => analytic(param, "m", values, |v| {
            let m = parse_int(v)?;
            let x = minority_rprime_half(m)?;
            Ok(("rprime_half", x))
        }),
        "majority-branch" => analytic(param, "theta", values, |v| {
            let theta: f64 = v
                .parse()
                .map_err(|e| invalid(format!("bad theta `{v}`: {e}")))?;
            Ok(("max_re_eig", majority_branch_max_re(theta)?))
        }),
        name => {
            let exp = find(name)?;
            if exp.defaults().get(param).is_none() {
                return Err(invalid(format!(
                    "experiment `{name}` has no parameter `{param}`"
                )));
            }
            values
                .iter()
                .enumerate()
                .map(|(cell, v)| {
                    let mut o = overrides.to_vec();
                    o.push((param.to_string(), v.clone()));
                    let run = run_experiment(name, &o, cell_seed(base_seed, cell))?;
                    let h = &run.outcome.headline;
                    Ok(SweepRow {
                        param: param.to_string(),
                        value: v.clone(),
                        statistic: h.statistic.clone(),
                        estimate: h.estimate,
                        lo: h.lo,
                        hi: h.hi,
                        median_spread: Some(run.outcome.median_spread),
                    })
                })
                .collect()
        }
    }
}

fn parse_int(v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|e| invalid(format!("bad integer `{v}`: {e}")))
}

fn analytic(
    param: &str,
    expected: &str,
    values: &[String],
    f: impl Fn(&str) -> Result<(&'static str, f64)>,
) -> Result<Vec<SweepRow>> {
    if param != expected {
        return Err(invalid(format!(
            "this target sweeps `{expected}`, not `{param}`"
        )));
    }
    values
        .iter()
        .map(|v| {
            let (statistic, x) = f(v.trim())?;
            Ok(SweepRow {
                param: param.to_string(),
                value: v.trim().to_string(),
                statistic: statistic.to_string(),
                estimate: x,
                lo: x,
                hi: x,
                median_spread: None,
            })
        })
        .collect()
}

/// Largest real eigenvalue part at the first closed-form branch of the
/// symmetric two-community majority model (`m = 3`).
pub fn majority_branch_max_re(theta: f64) -> Result<f64> {
    let rows = symmetric_majority_closed_forms(theta)?;
    let (y1, y2) = rows[0]
        .ok_or_else(|| Error::Domain(format!("branch 1 does not exist at theta = {theta}")))?;
    let cs = CommunityStructure::uniform(&[vec![1.0, theta], vec![theta, 1.0]])?;
    let field = RestrictedField::new(TypeRule::majority(3)?, cs)?;
    let z = [2.0 * y1, 2.0 * y2];
    let jac: SmallMatrix = field.jacobian(&z)?;
    Ok(eigenvalues(&jac)?.max_re())
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("param,value,statistic,estimate,lo,hi,median_spread\n");
    for r in rows {
        let ms = r.median_spread.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.param, r.value, r.statistic, r.estimate, r.lo, r.hi, ms
        )
        .unwrap();
    }
    out
}
