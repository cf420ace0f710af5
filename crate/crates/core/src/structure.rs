//! Community structure: attractiveness matrix, community measure, the
//! limiting edge-end measure `ν` and the influence digraph `Γ`.
//!
//! Convention: `α[x][y]` (row `x`, column `y`) is the attractiveness of an
//! existing vertex in community `x` to a newcomer in community `y`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::SmallMatrix;

pub const NU_TOL: f64 = 1e-13;
pub const NU_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityStructure {
    a: SmallMatrix,
    mu: Vec<f64>,
}

impl CommunityStructure {
    pub fn new(a: SmallMatrix, mu: Vec<f64>) -> Result<Self> {
        let n = a.dim();
        if n == 0 {
            return Err(invalid("at least one community is required"));
        }
        if mu.len() != n {
            return Err(invalid(format!(
                "mu has {} entries but A is {n}x{n}",
                mu.len()
            )));
        }
        for x in 0..n {
            for y in 0..n {
                let v = a.get(x, y);
                if v < 0.0 {
                    return Err(invalid(format!(
                        "attractiveness A[{x}][{y}] = {v} is negative"
                    )));
                }
            }
        }
        for y in 0..n {
            if (0..n).map(|x| a.get(x, y)).sum::<f64>() <= 0.0 {
                return Err(invalid(format!(
                    "column {y} of A is zero: newcomers in community {y} could attach nowhere"
                )));
            }
        }
        if let Some((i, v)) = mu
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(invalid(format!("mu[{i}] = {v} must be positive")));
        }
        let total: f64 = mu.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("mu sums to {total}, not 1")));
        }
        Ok(Self { a, mu })
    }

    pub fn from_rows(rows: &[Vec<f64>], mu: Vec<f64>) -> Result<Self> {
        Self::new(SmallMatrix::from_rows(rows)?, mu)
    }

    /// `N` communities with the uniform measure.
    pub fn uniform(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        Self::from_rows(rows, vec![1.0 / n as f64; n])
    }

    pub fn n(&self) -> usize {
        self.a.dim()
    }

    pub fn a(&self) -> &SmallMatrix {
        &self.a
    }

    pub fn alpha(&self, x: usize, y: usize) -> f64 {
        self.a.get(x, y)
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Relabels communities so that new community `k` is old community `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(invalid("permutation length mismatch"));
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|x| (0..n).map(|y| self.alpha(perm[x], perm[y])).collect())
            .collect();
        let mu = perm.iter().map(|&k| self.mu[k]).collect();
        Self::from_rows(&rows, mu)
    }

    /// Right-hand side of the edge-end limit equations at `nu`.
    pub fn nu_map(&self, nu: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out: Vec<f64> = self.mu.iter().map(|m| 0.5 * m).collect();
        for j in 0..n {
            let denom: f64 = (0..n).map(|k| self.alpha(k, j) * nu[k]).sum();
            if denom <= 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += 0.5 * self.mu[j] * self.alpha(i, j) * nu[i] / denom;
            }
        }
        out
    }

    pub fn nu_residual(&self, nu: &[f64]) -> f64 {
        self.nu_map(nu)
            .iter()
            .zip(nu)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Limiting edge-end measure by damped fixed-point iteration from `μ`.
    pub fn solve_nu(&self) -> Result<NuMeasure> {
        let mut nu = self.mu.clone();
        let mut residual = f64::INFINITY;
        for iteration in 1..=NU_MAX_ITER {
            let image = self.nu_map(&nu);
            let mut next: Vec<f64> = nu
                .iter()
                .zip(&image)
                .map(|(a, b)| 0.5 * a + 0.5 * b)
                .collect();
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= total);
            let step = next
                .iter()
                .zip(&nu)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            nu = next;
            if step <= NU_TOL {
                residual = self.nu_residual(&nu);
                return Ok(NuMeasure {
                    nu,
                    residual,
                    iterations: iteration,
                });
            }
            residual = step;
        }
        Err(Error::NuNotConverged {
            iterations: NU_MAX_ITER,
            residual,
        })
    }

    pub fn gamma(&self) -> Digraph {
        let n = self.n();
        let mut adj = vec![vec![false; n]; n];
        for (i, row) in adj.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = self.alpha(j, i) > 0.0;
            }
        }
        Digraph { adj }
    }

    /// Sign of `det A` for two communities, 0 inside `|det| <= 1e-12`.
    pub fn det_sign_2x2(&self) -> Result<i8> {
        if self.n() != 2 {
            return Err(invalid(format!(
                "the determinant test needs N = 2, got N = {}",
                self.n()
            )));
        }
        let det = self.alpha(0, 0) * self.alpha(1, 1) - self.alpha(0, 1) * self.alpha(1, 0);
        Ok(if det > 1e-12 {
            1
        } else if det < -1e-12 {
            -1
        } else {
            0
        })
    }
}

/// `A_θ`: the diagonal of `A1` kept, off-diagonal entries scaled by `θ`.
pub fn make_a_theta(a1: &SmallMatrix, theta: f64) -> Result<SmallMatrix> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(invalid(format!(
            "theta = {theta} must be a finite nonnegative number"
        )));
    }
    let n = a1.dim();
    let mut out = a1.clone();
    for x in 0..n {
        if a1.get(x, x) <= 0.0 {
            return Err(invalid(format!(
                "A1[{x}][{x}] = {} must be positive",
                a1.get(x, x)
            )));
        }
        for y in 0..n {
            if x != y {
                out.set(x, y, theta * a1.get(x, y));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuMeasure {
    pub nu: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Influence digraph: edge `i -> j` iff `α[j][i] > 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    adj: Vec<Vec<bool>>,
}

impl Digraph {
    pub fn from_adjacency(adj: Vec<Vec<bool>>) -> Result<Self> {
        let n = adj.len();
        if adj.iter().any(|r| r.len() != n) {
            return Err(invalid("adjacency matrix must be square"));
        }
        Ok(Self { adj })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i][j]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adj[i][j])
            .collect()
    }

    /// Reflexive transitive closure (Warshall).
    pub fn reachability(&self) -> Vec<Vec<bool>> {
        let n = self.n();
        let mut r = self.adj.clone();
        for (i, row) in r.iter_mut().enumerate() {
            row[i] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if r[i][k] {
                    for j in 0..n {
                        if r[k][j] {
                            r[i][j] = true;
                        }
                    }
                }
            }
        }
        r
    }

    /// Every pair of vertices can reach a common vertex.
    pub fn common_reachability(&self) -> bool {
        let r = self.reachability();
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| (0..n).any(|h| r[i][h] && r[j][h])))
    }
}

/// Structure section of a configuration file. `A` may be given directly or
/// as `A1` plus `theta`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StructureConfig {
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(rename = "A1", default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<Vec<Vec<f64>>>,
}

impl StructureConfig {
    pub fn build(&self) -> Result<CommunityStructure> {
        let a = match (&self.a, &self.a1) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either `A` or `A1` + `theta`, not both".into(),
                ))
            }
            (Some(rows), None) => {
                if self.theta.is_some() {
                    return Err(Error::Config("`theta` needs `A1`".into()));
                }
                SmallMatrix::from_rows(&parse_rows(rows, self.n)?)?
            }
            (None, Some(rows)) => {
                let theta = self
                    .theta
                    .ok_or_else(|| Error::Config("`A1` needs `theta`".into()))?;
                make_a_theta(&SmallMatrix::from_rows(&parse_rows(rows, self.n)?)?, theta)?
            }
            (None, None) => return Err(Error::Config("missing attractiveness matrix `A`".into())),
        };
        let n = a.dim();
        let mu = match &self.mu {
            Some(mu) => mu.clone(),
            None => vec![1.0 / n as f64; n],
        };
        CommunityStructure::new(a, mu)
    }
}

fn parse_rows(rows: &[Vec<f64>], n: Option<usize>) -> Result<Vec<Vec<f64>>> {
    // a flat row-major list of N^2 numbers is accepted when N is given
    if let (Some(n), [flat]) = (n, rows) {
        if n > 1 && flat.len() == n * n {
            return Ok(flat.chunks(n).map(<[f64]>::to_vec).collect());
        }
    }
    if let Some(n) = n {
        if rows.len() != n {
            return Err(Error::Config(format!(
                "N = {n} but A has {} rows",
                rows.len()
            )));
        }
    }
    Ok(rows.to_vec())
}
