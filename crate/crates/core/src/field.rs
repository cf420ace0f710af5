//! The mean-field drift `F = G + H - 2m x` on the simplex of community/type
//! edge-end proportions, its restriction to the slice `Y = ν`, stationary
//! points and their stability, and the linear-model generator `Ψ`.
//!
//! Points are stored as `(x_{1,1}, x_{1,2}, ..., x_{N,1}, x_{N,2})` where
//! type 1 is red. On the slice, `x_{i,1} = ν_i z_i`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numerics::{
    eigenvalues, fd_jacobian, newton_solve, solve_linear, NewtonOptions, SmallMatrix, Spectrum,
};
use crate::rules::{Linearity, TypeRule};
use crate::sim::{spread, Trajectory};
use crate::structure::CommunityStructure;

/// Stationary points must re-evaluate below this residual.
pub const STATIONARY_TOL: f64 = 1e-9;
/// Real parts within this band of zero are marginal.
pub const MARGINAL_BAND: f64 = 1e-8;
pub const DEDUP_TOL: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldPoint {
    x: Vec<f64>,
}

impl FieldPoint {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() % 2 != 0 {
            return Err(invalid(format!(
                "a field point has 2N coordinates, got {}",
                x.len()
            )));
        }
        if let Some((i, v)) = x
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(invalid(format!(
                "coordinate {i} = {v} is not a nonnegative number"
            )));
        }
        let s: f64 = x.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("coordinates sum to {s}, not 1")));
        }
        Ok(Self { x })
    }

    /// The point of the slice with community masses `nu` and red shares `z`.
    pub fn on_slice(nu: &[f64], z: &[f64]) -> Result<Self> {
        if nu.len() != z.len() {
            return Err(invalid("nu and z lengths differ"));
        }
        Self::new(slice_point(nu, z))
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.len() / 2
    }

    pub fn y(&self) -> Vec<f64> {
        self.x.chunks(2).map(|c| c[0] + c[1]).collect()
    }

    pub fn z(&self) -> Vec<f64> {
        self.x.chunks(2).map(|c| c[0] / (c[0] + c[1])).collect()
    }
}

fn slice_point(nu: &[f64], z: &[f64]) -> Vec<f64> {
    nu.iter()
        .zip(z)
        .flat_map(|(&v, &zi)| [v * zi, v * (1.0 - zi)])
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldValue {
    /// All `2N` components of `F`.
    pub f: Vec<f64>,
    /// `Q_{i,1}`: chance that one edge of a newcomer in `i` lands on red.
    pub q: Vec<f64>,
}

/// `F(x)` with no simplex check; the caller guarantees positive
/// attachment mass for every newcomer community.
fn field_raw(rule: &TypeRule, cs: &CommunityStructure, x: &[f64]) -> Result<FieldValue> {
    let n = cs.n();
    let m = rule.m() as f64;
    let y: Vec<f64> = x.chunks(2).map(|c| c[0] + c[1]).collect();
    let mut s = vec![0.0; n];
    for (i, si) in s.iter_mut().enumerate() {
        *si = (0..n).map(|k| cs.alpha(k, i) * y[k]).sum();
        if !(*si > 0.0) {
            return Err(Error::Domain(format!(
                "newcomers in community {} see no edge-end mass",
                i + 1
            )));
        }
    }
    let q: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|k| cs.alpha(k, i) * x[2 * k]).sum::<f64>() / s[i])
        .collect();
    let mut f = vec![0.0; 2 * n];
    for i in 0..n {
        let mu = cs.mu()[i];
        let r = rule.eval(q[i]);
        let g1 = m * mu * r;
        let g2 = m * mu * (1.0 - r);
        let c: f64 = (0..n).map(|k| cs.mu()[k] * cs.alpha(i, k) / s[k]).sum();
        f[2 * i] = g1 + m * x[2 * i] * c - 2.0 * m * x[2 * i];
        f[2 * i + 1] = g2 + m * x[2 * i + 1] * c - 2.0 * m * x[2 * i + 1];
    }
    Ok(FieldValue { f, q })
}

/// Evaluates `F` at a point of the simplex.
pub fn eval_field(rule: &TypeRule, cs: &CommunityStructure, x: &FieldPoint) -> Result<FieldValue> {
    if x.n() != cs.n() {
        return Err(invalid(format!(
            "point has {} communities, structure has {}",
            x.n(),
            cs.n()
        )));
    }
    if let Some(i) = x.y().iter().position(|&v| v <= 0.0) {
        return Err(Error::Domain(format!(
            "community {} has no edge-end mass",
            i + 1
        )));
    }
    field_raw(rule, cs, x.x())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryPoint {
    pub z: Vec<f64>,
    /// `y_i = x_{i,1} = ν_i z_i`.
    pub y: Vec<f64>,
    pub residual: f64,
    #[serde(serialize_with = "serialize_spectrum")]
    pub spectrum: Spectrum,
    pub max_re: f64,
    pub stability: Linearity,
}

fn serialize_spectrum<S: serde::Serializer>(
    s: &Spectrum,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = ser.serialize_seq(Some(s.eigenvalues.len()))?;
    for l in &s.eigenvalues {
        seq.serialize_element(&[l.re, l.im])?;
    }
    seq.end()
}

pub fn classify_spectrum(s: &Spectrum) -> Linearity {
    let max = s.max_re();
    if max < -MARGINAL_BAND {
        Linearity::LinearlyStable
    } else if max > MARGINAL_BAND {
        Linearity::LinearlyUnstable
    } else {
        Linearity::Marginal
    }
}

/// The field restricted to the slice `Y = ν`, in the `z` coordinates.
#[derive(Debug, Clone)]
pub struct RestrictedField {
    rule: TypeRule,
    cs: CommunityStructure,
    nu: Vec<f64>,
}

impl RestrictedField {
    pub fn new(rule: TypeRule, cs: CommunityStructure) -> Result<Self> {
        let nu = cs.solve_nu()?.nu;
        Ok(Self { rule, cs, nu })
    }

    pub fn with_nu(rule: TypeRule, cs: CommunityStructure, nu: Vec<f64>) -> Result<Self> {
        if nu.len() != cs.n() {
            return Err(invalid("nu has the wrong length"));
        }
        Ok(Self { rule, cs, nu })
    }

    pub fn rule(&self) -> &TypeRule {
        &self.rule
    }

    pub fn structure(&self) -> &CommunityStructure {
        &self.cs
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn point(&self, z: &[f64]) -> Vec<f64> {
        slice_point(&self.nu, z)
    }

    /// Full `2N` field at the slice point for `z` (no range check on `z`).
    pub fn full(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(field_raw(&self.rule, &self.cs, &self.point(z))?.f)
    }

    /// `F_{i,1}(x(z))` for each community.
    pub fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.full(z)?.iter().step_by(2).copied().collect())
    }

    fn eval_or_nan(&self, z: &[f64]) -> Vec<f64> {
        self.eval(z).unwrap_or_else(|_| vec![f64::NAN; z.len()])
    }

    /// `J[i][j] = ∂F_{i,1}/∂x_{j,1}` along the slice, by central differences
    /// in `z` (so `J = (∂F/∂z) diag(1/ν)`).
    pub fn jacobian(&self, z: &[f64]) -> Result<SmallMatrix> {
        self.eval(z)?;
        let dz = fd_jacobian(&|v: &[f64]| self.eval_or_nan(v), z, FD_STEP);
        let n = z.len();
        let mut out = SmallMatrix::zeros(n)?;
        for i in 0..n {
            for j in 0..n {
                let v = dz[i][j] / self.nu[j];
                if !v.is_finite() {
                    return Err(Error::Domain(
                        "finite-difference stencil left the field's domain".into(),
                    ));
                }
                out.set(i, j, v);
            }
        }
        Ok(out)
    }

    /// The same Jacobian in closed form:
    /// `J[i][j] = m μ_i R′(Q_i) α_{j,i} / S_i + δ_{ij} m (c_i − 2)` with
    /// `S_i = Σ_k α_{k,i} ν_k` and `c_i = Σ_k μ_k α_{i,k} / S_k`.
    pub fn analytic_jacobian(&self, z: &[f64]) -> Result<SmallMatrix> {
        let n = self.cs.n();
        let m = self.rule.m() as f64;
        let fv = field_raw(&self.rule, &self.cs, &self.point(z))?;
        let s: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|k| self.cs.alpha(k, i) * self.nu[k]).sum())
            .collect();
        let mut out = SmallMatrix::zeros(n)?;
        for i in 0..n {
            let slope = m * self.cs.mu()[i] * self.rule.deriv(fv.q[i], 1) / s[i];
            for j in 0..n {
                out.set(i, j, slope * self.cs.alpha(j, i));
            }
            let c: f64 = (0..n)
                .map(|k| self.cs.mu()[k] * self.cs.alpha(i, k) / s[k])
                .sum();
            out.set(i, i, out.get(i, i) + m * (c - 2.0));
        }
        Ok(out)
    }

    /// Newton's method from `z0`; the result may lie slightly outside
    /// `[0, 1]^N`.
    pub fn solve_from(&self, z0: &[f64]) -> Result<Vec<f64>> {
        newton_solve(
            |z: &[f64]| self.eval_or_nan(z),
            z0,
            NewtonOptions::default(),
        )
    }

    /// Classifies `z` as a stationary point (after checking the residual).
    pub fn classify(&self, z: &[f64]) -> Result<StationaryPoint> {
        let residual = self.full(z)?.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if residual > STATIONARY_TOL {
            return Err(Error::NewtonFailed(format!(
                "residual {residual:e} at {z:?} is not stationary"
            )));
        }
        let spectrum = eigenvalues(&self.jacobian(z)?)?;
        let max_re = spectrum.max_re();
        let stability = classify_spectrum(&spectrum);
        let y = z.iter().zip(&self.nu).map(|(a, b)| a * b).collect();
        Ok(StationaryPoint {
            z: z.to_vec(),
            y,
            residual,
            spectrum,
            max_re,
            stability,
        })
    }

    /// Multistart Newton from a `grid^N` lattice on `[0, 1]^N`.
    pub fn stationary_points(&self, grid: usize) -> Result<Vec<StationaryPoint>> {
        let n = self.cs.n();
        if grid < 2 {
            return Err(invalid("grid density must be at least 2"));
        }
        let starts = (grid as u64)
            .checked_pow(n as u32)
            .filter(|&c| c <= 5_000_000)
            .ok_or_else(|| invalid(format!("{grid}^{n} starting points is too many")))?;
        let step = 1.0 / (grid - 1) as f64;
        let found: Vec<Vec<f64>> = (0..starts)
            .into_par_iter()
            .filter_map(|mut idx| {
                let z0: Vec<f64> = (0..n)
                    .map(|_| {
                        let k = idx % grid as u64;
                        idx /= grid as u64;
                        k as f64 * step
                    })
                    .collect();
                let z = self.solve_from(&z0).ok()?;
                if z.iter().any(|&v| !(-1e-9..=1.0 + 1e-9).contains(&v)) {
                    return None;
                }
                Some(z.iter().map(|v| v.clamp(0.0, 1.0)).collect())
            })
            .collect();

        let mut unique: Vec<Vec<f64>> = Vec::new();
        for z in found {
            if !unique.iter().any(|u| sup_dist(u, &z) <= DEDUP_TOL) {
                unique.push(z);
            }
        }
        let mut points: Vec<StationaryPoint> = unique
            .iter()
            .filter_map(|z| self.classify(z).ok())
            .collect();
        points.sort_by(|a, b| {
            a.z.iter()
                .zip(&b.z)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Ok(points)
    }
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Default lattice density: 21 per axis for up to three communities, 9 for
/// four or five, 5 beyond.
pub fn default_grid(n: usize) -> usize {
    match n {
        0..=3 => 21,
        4..=5 => 9,
        _ => 5,
    }
}

pub fn find_stationary_points(
    rule: &TypeRule,
    cs: &CommunityStructure,
    grid: Option<usize>,
) -> Result<Vec<StationaryPoint>> {
    let field = RestrictedField::new(rule.clone(), cs.clone())?;
    field.stationary_points(grid.unwrap_or_else(|| default_grid(cs.n())))
}

/// Closed-form stationary points of the symmetric two-community majority
/// model (`m = 3`, `A = [[1, θ], [θ, 1]]`, `μ = (½, ½)`), as `(y_1, y_2)`
/// with `y_i = z_i / 2`. Rows that do not exist at this `θ` are `None`.
pub fn symmetric_majority_closed_forms(theta: f64) -> Result<[Option<(f64, f64)>; 9]> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(invalid(format!("theta = {theta} is outside [0, 1]")));
    }
    let t = theta;
    let mut rows = [None; 9];
    if t <= 0.2 {
        let c = (t + 1.0) / (4.0 * (t - 1.0)) * ((5.0 * t - 1.0) / (t - 1.0)).sqrt();
        rows[0] = Some((0.25 + c, 0.25 - c));
        rows[1] = Some((0.25 - c, 0.25 + c));
    }
    rows[2] = Some((0.0, 0.0));
    rows[3] = Some((0.5, 0.5));
    rows[4] = Some((0.25, 0.25));
    if t <= 1.0 / 7.0 {
        let s = 3.0 * t.powi(3) - 9.0 * t * t + 3.0 * t - 1.0;
        let r = (t - 1.0) * (-(7.0 * t - 1.0) * (t + 1.0).powi(3)).max(0.0).sqrt();
        let u = (t - 1.0).powi(3);
        let k = 2f64.sqrt() / 8.0;
        let a = k * ((s + r) / u).max(0.0).sqrt();
        let b = k * ((s - r) / u).max(0.0).sqrt();
        rows[5] = Some((0.25 + a, 0.25 - b));
        rows[6] = Some((0.25 - a, 0.25 + b));
        rows[7] = Some((0.25 + b, 0.25 - a));
        rows[8] = Some((0.25 - b, 0.25 + a));
    }
    Ok(rows)
}

/// Closed-form Jacobian eigenvalues for the same model at `z`:
/// `λ = −3 + 9/(1+θ) (J ± √(J² − 4K))`.
pub fn symmetric_majority_eigenvalues(theta: f64, z: [f64; 2]) -> Spectrum {
    let q1 = (z[0] + theta * z[1]) / (1.0 + theta);
    let q2 = (z[1] + theta * z[0]) / (1.0 + theta);
    let j = q1 * (1.0 - q1) + q2 * (1.0 - q2);
    let k = q1 * q2 * (1.0 - q1) * (1.0 - q2) * (1.0 - theta * theta);
    let root = Complex64::new(j * j - 4.0 * k, 0.0).sqrt();
    let scale = 9.0 / (1.0 + theta);
    let mut eigenvalues = vec![
        Complex64::new(-3.0, 0.0) + scale * (j + root),
        Complex64::new(-3.0, 0.0) + scale * (j - root),
    ];
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Spectrum { eigenvalues }
}

/// Jacobian for structures where every newcomer community attaches to a
/// single source community `s(i)` (each column of `A` has one positive
/// entry): `m μ_i R′(z_{s(i)}) / ν_{s(i)}` at `(i, s(i))`, plus
/// `m Σ_{k: s(k)=i} μ_k / ν_i − 2m` on the diagonal. `None` for other
/// structures.
pub fn single_source_jacobian(
    rule: &TypeRule,
    cs: &CommunityStructure,
    nu: &[f64],
    z: &[f64],
) -> Option<SmallMatrix> {
    let n = cs.n();
    let m = rule.m() as f64;
    let mut source = Vec::with_capacity(n);
    for i in 0..n {
        let positive: Vec<usize> = (0..n).filter(|&k| cs.alpha(k, i) > 0.0).collect();
        if positive.len() != 1 {
            return None;
        }
        source.push(positive[0]);
    }
    let mut j = SmallMatrix::zeros(n).ok()?;
    for i in 0..n {
        let s = source[i];
        j.set(i, s, m * cs.mu()[i] * rule.deriv(z[s], 1) / nu[s]);
    }
    for i in 0..n {
        let inflow: f64 = (0..n).filter(|&k| source[k] == i).map(|k| cs.mu()[k]).sum();
        j.set(i, i, j.get(i, i) + m * inflow / nu[i] - 2.0 * m);
    }
    Some(j)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum ThetaCrit {
    /// The tracked branch changes linear stability inside `[lo, hi]`.
    Crossing { lo: f64, hi: f64 },
    /// No sign change of the largest real part along the sweep.
    NoCrossing { theta_end: f64, max_re_end: f64 },
}

/// Continuation step in `θ` before bisection.
pub const THETA_STEP: f64 = 1e-3;
pub const THETA_TOL: f64 = 1e-7;
const BRANCH_JUMP: f64 = 0.05;

/// Tracks the stationary branch through `z_start` at `theta_from` toward
/// `theta_to` and brackets the first sign change of its largest eigenvalue
/// real part to within `THETA_TOL`.
pub fn theta_crit_bisect<Fam>(
    rule: &TypeRule,
    family: Fam,
    z_start: &[f64],
    theta_from: f64,
    theta_to: f64,
) -> Result<ThetaCrit>
where
    Fam: Fn(f64) -> Result<CommunityStructure>,
{
    if !(theta_from.is_finite() && theta_to.is_finite()) || theta_from == theta_to {
        return Err(invalid("theta range must be finite and non-empty"));
    }
    let track = |theta: f64, guess: &[f64]| -> Result<(Vec<f64>, f64)> {
        let field = RestrictedField::new(rule.clone(), family(theta)?)?;
        let lost = |reason: String| Error::BranchLost { theta, reason };
        let z = field.solve_from(guess).map_err(|e| lost(e.to_string()))?;
        if z.iter().any(|&v| !(-1e-9..=1.0 + 1e-9).contains(&v)) {
            return Err(lost(format!("branch left [0,1]^N at {z:?}")));
        }
        if sup_dist(&z, guess) > BRANCH_JUMP {
            return Err(lost(format!("branch jumped from {guess:?} to {z:?}")));
        }
        let z: Vec<f64> = z.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let max_re = eigenvalues(&field.jacobian(&z)?)?.max_re();
        Ok((z, max_re))
    };

    let dir = (theta_to - theta_from).signum();
    let (mut z, mut re) = track(theta_from, z_start)?;
    let mut theta = theta_from;
    loop {
        let next = if dir > 0.0 {
            (theta + THETA_STEP).min(theta_to)
        } else {
            (theta - THETA_STEP).max(theta_to)
        };
        let (z_next, re_next) = track(next, &z)?;
        if (re < 0.0) != (re_next < 0.0) {
            let (mut a, mut b) = (theta, next);
            let za = z.clone();
            while (b - a).abs() > THETA_TOL {
                let mid = 0.5 * (a + b);
                let (_, re_mid) = track(mid, &za)?;
                if (re_mid < 0.0) == (re < 0.0) {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Ok(ThetaCrit::Crossing {
                lo: a.min(b),
                hi: a.max(b),
            });
        }
        theta = next;
        z = z_next;
        re = re_next;
        if theta == theta_to {
            return Ok(ThetaCrit::NoCrossing {
                theta_end: theta,
                max_re_end: re,
            });
        }
    }
}

/// Generator `Ψ`: `ψ_{i,j} = μ_i α_{j,i} ν_j / Σ_k α_{k,i} ν_k` off the
/// diagonal, rows summing to zero.
pub fn psi_matrix(cs: &CommunityStructure, nu: &[f64]) -> Result<SmallMatrix> {
    let n = cs.n();
    let mut psi = SmallMatrix::zeros(n)?;
    for i in 0..n {
        let denom: f64 = (0..n).map(|k| cs.alpha(k, i) * nu[k]).sum();
        let mut off = 0.0;
        for j in (0..n).filter(|&j| j != i) {
            let v = cs.mu()[i] * cs.alpha(j, i) * nu[j] / denom;
            psi.set(i, j, v);
            off += v;
        }
        psi.set(i, i, -off);
    }
    Ok(psi)
}

/// Stationary distribution `σ Ψ = 0`, `Σ σ = 1`. Requires common
/// reachability of the influence digraph.
pub fn stationary_sigma(cs: &CommunityStructure, psi: &SmallMatrix) -> Result<Vec<f64>> {
    if !cs.gamma().common_reachability() {
        return Err(Error::Precondition(
            "the influence digraph lacks common reachability; the stationary distribution is not unique".into(),
        ));
    }
    let n = psi.dim();
    // Ψᵀ σᵀ = 0 with the last equation replaced by the normalization
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| psi.get(i, j)).collect())
        .collect();
    let mut b = vec![0.0; n];
    a[n - 1] = vec![1.0; n];
    b[n - 1] = 1.0;
    let mut sigma = solve_linear(a, b)
        .ok_or_else(|| Error::NewtonFailed("singular generator system".into()))?;
    for v in &mut sigma {
        if *v < 0.0 && *v > -1e-14 {
            *v = 0.0;
        }
    }
    Ok(sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncReport {
    pub sigma: Vec<f64>,
    pub nu: Vec<f64>,
    pub n: Vec<u64>,
    /// `max_{i,j} |Z_i − Z_j|` per snapshot.
    pub spread: Vec<f64>,
    /// `M_n = Σ σ_i Y_i Z_i / ν_i` per snapshot.
    pub m_n: Vec<f64>,
}

impl SyncReport {
    pub fn terminal_spread(&self) -> f64 {
        *self.spread.last().expect("trajectories are never empty")
    }

    pub fn terminal_m(&self) -> f64 {
        *self.m_n.last().expect("trajectories are never empty")
    }
}

pub fn sync_diagnostic(traj: &Trajectory, cs: &CommunityStructure) -> Result<SyncReport> {
    let nu = cs.solve_nu()?.nu;
    let sigma = stationary_sigma(cs, &psi_matrix(cs, &nu)?)?;
    let mut report = SyncReport {
        sigma,
        nu,
        n: Vec::new(),
        spread: Vec::new(),
        m_n: Vec::new(),
    };
    for s in &traj.snapshots {
        report.n.push(s.n);
        report.spread.push(spread(&s.z));
        let m: f64 = (0..cs.n())
            .map(|i| report.sigma[i] * s.y[i] * s.z[i] / report.nu[i])
            .sum();
        report.m_n.push(m);
    }
    Ok(report)
}

/// `F` as a closure on the full simplex, for flow integration.
pub fn flow<'a>(
    rule: &'a TypeRule,
    cs: &'a CommunityStructure,
) -> impl Fn(&[f64]) -> Vec<f64> + 'a {
    move |x: &[f64]| {
        field_raw(rule, cs, x)
            .map(|v| v.f)
            .unwrap_or_else(|_| vec![f64::NAN; x.len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_flow;

    fn sym(theta: f64) -> CommunityStructure {
        CommunityStructure::uniform(&[vec![1.0, theta], vec![theta, 1.0]]).unwrap()
    }

    fn majority() -> TypeRule {
        TypeRule::majority(3).unwrap()
    }

    #[test]
    fn field_point_validation() {
        assert!(FieldPoint::new(vec![0.5, 0.5, 0.1]).is_err());
        assert!(FieldPoint::new(vec![0.5, 0.6]).is_err());
        assert!(FieldPoint::new(vec![-0.1, 1.1]).is_err());
        let p = FieldPoint::on_slice(&[0.5, 0.5], &[0.2, 0.6]).unwrap();
        assert_eq!(p.x(), &[0.1, 0.4, 0.3, 0.2]);
        assert!(matches!(
            eval_field(
                &majority(),
                &sym(0.0),
                &FieldPoint::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap()
            ),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn centre_is_stationary_for_all_theta() {
        for theta in [0.0, 0.1, 0.3, 1.0] {
            let x = FieldPoint::new(vec![0.25; 4]).unwrap();
            let f = eval_field(&majority(), &sym(theta), &x).unwrap().f;
            assert!(f.iter().all(|v| v.abs() < 1e-14), "{f:?}");
        }
    }

    #[test]
    fn fd_and_analytic_jacobians_agree() {
        let field = RestrictedField::new(majority(), sym(0.3)).unwrap();
        let z = [0.3, 0.8];
        let a = field.jacobian(&z).unwrap();
        let b = field.analytic_jacobian(&z).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn table_rows_at_zero() {
        let rows = symmetric_majority_closed_forms(0.0).unwrap();
        let (a, b) = rows[0].unwrap();
        assert!((a - 0.0).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
        assert_eq!(rows[2], Some((0.0, 0.0)));
        assert_eq!(rows[3], Some((0.5, 0.5)));
        assert_eq!(rows[4], Some((0.25, 0.25)));
        assert!(symmetric_majority_closed_forms(0.16).unwrap()[5].is_none());
        assert!(symmetric_majority_closed_forms(0.25).unwrap()[0].is_none());
        assert!(symmetric_majority_closed_forms(1.5).is_err());
    }

    #[test]
    fn table_eigenvalues_at_centre_and_corner() {
        for theta in [0.0, 0.2, 0.9] {
            let s = symmetric_majority_eigenvalues(theta, [0.5, 0.5]);
            assert!((s.eigenvalues[0].re - 1.5).abs() < 1e-12);
            let s = symmetric_majority_eigenvalues(theta, [1.0, 1.0]);
            assert!(s.eigenvalues.iter().all(|l| (l.re + 3.0).abs() < 1e-12));
        }
    }

    #[test]
    fn stationary_points_at_theta_tenth() {
        let pts = find_stationary_points(&majority(), &sym(0.1), None).unwrap();
        assert_eq!(
            pts.len(),
            9,
            "{:?}",
            pts.iter().map(|p| &p.z).collect::<Vec<_>>()
        );
        let rows = symmetric_majority_closed_forms(0.1).unwrap();
        for row in rows.iter().flatten() {
            let hit = pts
                .iter()
                .find(|p| (p.y[0] - row.0).abs() < 1e-8 && (p.y[1] - row.1).abs() < 1e-8);
            assert!(hit.is_some(), "row {row:?} missing");
        }
    }

    #[test]
    fn flow_reaches_all_red_when_decoupled() {
        let rule = majority();
        let cs = sym(0.0);
        let path = integrate_flow(flow(&rule, &cs), &[0.45, 0.05, 0.45, 0.05], 50.0, 0.01).unwrap();
        let end = path.last();
        let target = [0.5, 0.0, 0.5, 0.0];
        assert!(sup_dist(end, &target) < 1e-6, "{end:?}");
    }

    #[test]
    fn sigma_for_symmetric_structures() {
        let cs = sym(0.4);
        let nu = cs.solve_nu().unwrap().nu;
        let psi = psi_matrix(&cs, &nu).unwrap();
        let sigma = stationary_sigma(&cs, &psi).unwrap();
        assert!((sigma[0] - 0.5).abs() < 1e-12);
        assert!(matches!(
            stationary_sigma(&sym(0.0), &psi),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn theta_crit_random_visible_has_no_crossing() {
        let rule = TypeRule::random_visible(3).unwrap();
        let out = theta_crit_bisect(&rule, |t| Ok(sym(t)), &[0.5, 0.5], 0.01, 0.2).unwrap();
        assert!(matches!(out, ThetaCrit::NoCrossing { .. }));
    }
}
