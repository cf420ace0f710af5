//! Two-type assignment rules and the fixed-point structure of their
//! Bernstein polynomial `R(z) = Σ C(m,k) z^k (1-z)^(m-k) p_k`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numerics::{poly_roots, root_candidates, Poly, MAX_DEGREE};

/// Tolerance below which `|R(z) - z|` counts as a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-9;
/// Fixed points closer than this are the same point.
pub const DEDUP_TOL: f64 = 1e-7;
const SIGN_PROBE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeRule {
    name: String,
    m: usize,
    p: Vec<f64>,
}

impl TypeRule {
    /// `p[k]` is the probability that a newcomer with `k` red neighbours
    /// (counted with multiplicity) turns red.
    pub fn new(name: impl Into<String>, p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return Err(invalid("a rule needs p_0..p_m with m >= 1"));
        }
        let m = p.len() - 1;
        if m > MAX_DEGREE {
            return Err(invalid(format!(
                "m = {m} exceeds the supported maximum of {MAX_DEGREE}"
            )));
        }
        if let Some((k, v)) = p
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(invalid(format!("p[{k}] = {v} is not a probability")));
        }
        Ok(Self {
            name: name.into(),
            m,
            p,
        })
    }

    pub fn explicit(p: Vec<f64>) -> Result<Self> {
        Self::new("explicit", p)
    }

    /// Majority wins; for even `m` a tie is broken by a fair coin.
    pub fn majority(m: usize) -> Result<Self> {
        check_m(m)?;
        let p = (0..=m)
            .map(|k| match (2 * k).cmp(&m) {
                std::cmp::Ordering::Less => 0.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Greater => 1.0,
            })
            .collect();
        Self::new(format!("majority:m={m}"), p)
    }

    /// Take the type that is less common among the neighbours.
    pub fn minority(m: usize) -> Result<Self> {
        check_m(m)?;
        let p = (0..=m)
            .map(|k| match (2 * k).cmp(&m) {
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Greater => 0.0,
            })
            .collect();
        Self::new(format!("minority:m={m}"), p)
    }

    /// Pick one of the visible types uniformly at random.
    pub fn random_visible(m: usize) -> Result<Self> {
        check_m(m)?;
        let p = (0..=m)
            .map(|k| {
                if k == 0 {
                    0.0
                } else if k == m {
                    1.0
                } else {
                    0.5
                }
            })
            .collect();
        Self::new(format!("random-visible:m={m}"), p)
    }

    pub fn linear(m: usize) -> Result<Self> {
        check_m(m)?;
        let p = (0..=m).map(|k| k as f64 / m as f64).collect();
        Self::new(format!("linear:m={m}"), p)
    }

    /// `p_k = 1` for `k <= r`, else 0.
    pub fn modified_minority(m: usize, r: usize) -> Result<Self> {
        check_m(m)?;
        if r >= m {
            return Err(invalid(format!(
                "modified minority needs r < m (got r = {r}, m = {m})"
            )));
        }
        let p = (0..=m).map(|k| if k <= r { 1.0 } else { 0.0 }).collect();
        Self::new(format!("modified-minority:m={m},r={r}"), p)
    }

    /// The m = 3 rule `(1/4, 0, 1, 1)`: touchpoint at 1/3, stable point at 1.
    pub fn touchpoint() -> Result<Self> {
        Self::new("touchpoint", vec![0.25, 0.0, 1.0, 1.0])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn is_linear(&self) -> bool {
        self.p
            .iter()
            .enumerate()
            .all(|(k, &v)| (v - k as f64 / self.m as f64).abs() <= 1e-15)
    }

    /// `p_k = 1 - p_{m-k}` for all `k`.
    pub fn is_colour_symmetric(&self) -> bool {
        (0..=self.m).all(|k| (self.p[k] + self.p[self.m - k] - 1.0).abs() <= 1e-15)
    }

    /// `R(z)` evaluated directly in the Bernstein basis.
    pub fn eval(&self, z: f64) -> f64 {
        bernstein(&self.p, z)
    }

    /// `k`-th derivative of `R` at `z` via forward differences of `p`.
    pub fn deriv(&self, z: f64, order: usize) -> f64 {
        if order == 0 {
            return self.eval(z);
        }
        if order > self.m {
            return 0.0;
        }
        let mut d = self.p.clone();
        for _ in 0..order {
            d = d.windows(2).map(|w| w[1] - w[0]).collect();
        }
        let falling: f64 = (0..order).map(|j| (self.m - j) as f64).product();
        falling * bernstein(&d, z)
    }

    /// Power-basis coefficients of `R`, accumulated exactly in rationals
    /// (every `f64` is a dyadic rational) and rounded once at the end.
    pub fn r_poly(&self) -> Poly {
        let m = self.m;
        let binom = binomials(m);
        let mut coeffs = vec![BigRational::zero(); m + 1];
        // magnitude of the terms feeding each coefficient
        let mut scale = vec![0.0_f64; m + 1];
        for (i, &pi) in self.p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            let pr = BigRational::from_float(pi).expect("finite probability");
            // C(m,i) z^i (1-z)^(m-i) = Σ_j C(m,i) C(m-i,j) (-1)^j z^(i+j)
            for j in 0..=m - i {
                let mut c = &binom[m][i] * &binom[m - i][j];
                scale[i + j] += pi * c.to_f64().unwrap_or(f64::INFINITY);
                if j % 2 == 1 {
                    c = -c;
                }
                coeffs[i + j] += &pr * BigRational::from_integer(c);
            }
        }
        // a decimal probability such as 1/3 is only known to within an ulp,
        // so coefficients below that uncertainty are zero
        let coeffs = coeffs
            .iter()
            .zip(&scale)
            .map(|(c, s)| {
                let v = c.to_f64().unwrap_or(f64::NAN);
                if v.abs() <= 4.0 * f64::EPSILON * s {
                    0.0
                } else {
                    v
                }
            })
            .collect();
        Poly::new(coeffs).expect("bernstein coefficients are finite")
    }

    /// `P(z) = (R(z) - z) / 2`.
    pub fn p_poly(&self) -> Poly {
        let r = self.r_poly();
        let id = Poly::new(vec![0.0, 1.0]).unwrap();
        let diff = r.sub(&id);
        Poly::new(diff.coeffs().iter().map(|c| c / 2.0).collect()).unwrap()
    }

    /// Power-basis coefficients of `R(R(z))`.
    pub fn composite_poly(&self) -> Result<Poly> {
        let r = self.r_poly();
        r.compose(&r)
    }

    /// Fixed points of `R` in `[0, 1]`, or the continuum marker for the
    /// linear rule.
    pub fn fixed_points(&self) -> Result<FixedPointSet> {
        if self.is_linear() {
            return Ok(FixedPointSet::Continuum);
        }
        let g = |z: f64, order: usize| -> f64 {
            match order {
                0 => self.eval(z) - z,
                1 => self.deriv(z, 1) - 1.0,
                k => self.deriv(z, k),
            }
        };
        let diff = self.r_poly().sub(&Poly::new(vec![0.0, 1.0]).unwrap());
        let roots = unit_interval_roots(&diff, &g)?;
        let points = classify(&roots, &g, |z| self.deriv(z, 1));
        Ok(FixedPointSet::Isolated(points))
    }

    /// Fixed points of `R∘R` in `[0, 1]`, classified by `(R²)′`.
    pub fn composite_fixed_points(&self) -> Result<FixedPointSet> {
        if self.is_linear() {
            return Ok(FixedPointSet::Continuum);
        }
        let comp = self.composite_poly()?;
        let comp_d3 = comp.derivative().derivative().derivative();
        let g = |z: f64, order: usize| -> f64 {
            let r = self.eval(z);
            match order {
                0 => self.eval(r) - z,
                1 => self.deriv(r, 1) * self.deriv(z, 1) - 1.0,
                2 => {
                    let d1 = self.deriv(z, 1);
                    self.deriv(r, 2) * d1 * d1 + self.deriv(r, 1) * self.deriv(z, 2)
                }
                k => {
                    let mut p = comp_d3.clone();
                    for _ in 3..k {
                        p = p.derivative();
                    }
                    p.eval(z)
                }
            }
        };
        let diff = comp.sub(&Poly::new(vec![0.0, 1.0]).unwrap());
        let roots = unit_interval_roots(&diff, &g)?;
        let points = classify(&roots, &g, |z| {
            self.deriv(self.eval(z), 1) * self.deriv(z, 1)
        });
        Ok(FixedPointSet::Isolated(points))
    }

    /// Minimum of `R′` over `[0, 1]`, taken over the endpoints and the real
    /// critical points of `R′` (roots of `R″`).
    pub fn min_derivative(&self) -> f64 {
        let mut candidates = vec![0.0, 1.0];
        let second = self.r_poly().derivative().derivative();
        if second.is_zero() || second.degree() == 0 {
            // R′ is constant or linear: endpoints suffice
        } else {
            match poly_roots(&second) {
                Ok(roots) => candidates.extend(
                    roots
                        .iter()
                        .filter(|r| r.im.abs() <= 1e-6 && (0.0..=1.0).contains(&r.re))
                        .map(|r| r.re),
                ),
                Err(_) => candidates.extend((0..=1000).map(|k| k as f64 / 1000.0)),
            }
        }
        candidates
            .iter()
            .map(|&z| self.deriv(z, 1))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_increasing(&self) -> bool {
        self.min_derivative() >= -1e-12
    }

    /// Searches for `0 <= z' < z* < z'' <= 1` with `R(z') >= z''` and
    /// `R(z'') <= z'`. Requires a unique stable fixed point `z*` and no
    /// other fixed points in `(0, 1)`.
    pub fn check_two_point_condition(&self) -> Result<TwoPointCheck> {
        let points = match self.fixed_points()? {
            FixedPointSet::Continuum => {
                return Err(Error::Precondition(
                    "the linear rule has a continuum of fixed points".into(),
                ))
            }
            FixedPointSet::Isolated(p) => p,
        };
        let stable: Vec<&FixedPoint> = points.iter().filter(|p| p.kind.is_stable()).collect();
        if stable.len() != 1 {
            return Err(Error::Precondition(format!(
                "expected exactly one stable fixed point, found {} among {} fixed points",
                stable.len(),
                points.len()
            )));
        }
        let z_star = stable[0].z;
        if points
            .iter()
            .any(|p| p.z > 0.0 && p.z < 1.0 && (p.z - z_star).abs() > DEDUP_TOL)
        {
            return Err(Error::Precondition(
                "R has fixed points in (0,1) other than the stable one".into(),
            ));
        }

        const GRID: usize = 2001;
        let h = 1.0 / (GRID - 1) as f64;
        let zs: Vec<f64> = (0..GRID).map(|k| k as f64 * h).collect();
        let rs: Vec<f64> = zs.iter().map(|&z| self.eval(z)).collect();
        let violates = |a: f64, b: f64| self.eval(a) >= b && self.eval(b) <= a;

        let mut best: Option<(f64, f64)> = None;
        for (ia, &a) in zs.iter().enumerate().filter(|(_, &z)| z < z_star) {
            for (ib, &b) in zs.iter().enumerate().rev().filter(|(_, &z)| z > z_star) {
                if best.is_some_and(|(ba, bb)| b - a <= bb - ba) {
                    break;
                }
                if rs[ia] >= b && rs[ib] <= a {
                    best = Some((a, b));
                    break;
                }
            }
        }
        let Some((mut a, mut b)) = best else {
            return Ok(TwoPointCheck {
                holds: true,
                z_star,
                witness: None,
            });
        };

        // widen the witness pair off-grid: push z' down and z'' up while the
        // violation persists
        for _ in 0..4 {
            let mut lo = (a - h).max(0.0);
            if violates(lo, b) {
                a = lo;
            } else {
                let mut hi = a;
                while hi - lo > 1e-9 {
                    let mid = 0.5 * (lo + hi);
                    if violates(mid, b) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                a = hi;
            }
            let mut hi = (b + h).min(1.0);
            if violates(a, hi) {
                b = hi;
            } else {
                let mut lo = b;
                while hi - lo > 1e-9 {
                    let mid = 0.5 * (lo + hi);
                    if violates(a, mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                b = lo;
            }
        }
        Ok(TwoPointCheck {
            holds: false,
            z_star,
            witness: Some((a, b)),
        })
    }
}

impl fmt::Display for TypeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p: Vec<String> = self.p.iter().map(f64::to_string).collect();
        write!(f, "{} (m = {}, p = [{}])", self.name, self.m, p.join(", "))
    }
}

/// Parses `majority:m=3`, `minority:m=7`, `random-visible:m=3`,
/// `linear:m=5`, `modified-minority:m=9,r=4`, `touchpoint`,
/// `explicit:p=[0.25,0,1,1]`.
impl FromStr for TypeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        if name == "explicit" {
            let list = args
                .trim()
                .strip_prefix("p=")
                .ok_or_else(|| invalid("explicit rules are written `explicit:p=[p0,...,pm]`"))?;
            let list = list.trim().trim_start_matches('[').trim_end_matches(']');
            let p = list
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| invalid(format!("bad probability `{v}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            return TypeRule::explicit(p);
        }
        let mut m = None;
        let mut r = None;
        for kv in args.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| invalid(format!("expected key=value, got `{kv}`")))?;
            let v: usize = v
                .trim()
                .parse()
                .map_err(|e| invalid(format!("bad value for `{k}`: {e}")))?;
            match k.trim() {
                "m" => m = Some(v),
                "r" => r = Some(v),
                other => return Err(invalid(format!("unknown rule parameter `{other}`"))),
            }
        }
        let need_m = || m.ok_or_else(|| invalid(format!("rule `{name}` needs m=<int>")));
        match name {
            "majority" => TypeRule::majority(need_m()?),
            "minority" => TypeRule::minority(need_m()?),
            "random-visible" => TypeRule::random_visible(need_m()?),
            "linear" => TypeRule::linear(need_m()?),
            "modified-minority" => TypeRule::modified_minority(
                need_m()?,
                r.ok_or_else(|| invalid("modified-minority needs r=<int>"))?,
            ),
            "touchpoint" => TypeRule::touchpoint(),
            other => Err(Error::UnknownRule(other.to_string())),
        }
    }
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        Err(invalid("m must be at least 1"))
    } else {
        Ok(())
    }
}

fn binomials(m: usize) -> Vec<Vec<BigInt>> {
    let mut rows: Vec<Vec<BigInt>> = vec![vec![BigInt::one()]];
    for n in 1..=m {
        let prev = &rows[n - 1];
        let mut row = vec![BigInt::one(); n + 1];
        for k in 1..n {
            row[k] = &prev[k - 1] + &prev[k];
        }
        rows.push(row);
    }
    rows
}

fn bernstein(coeffs: &[f64], z: f64) -> f64 {
    // de Casteljau
    let mut b = coeffs.to_vec();
    let n = b.len();
    for r in 1..n {
        for k in 0..n - r {
            b[k] = (1.0 - z) * b[k] + z * b[k + 1];
        }
    }
    b[0]
}

/// `R′(1/2)` of the minority rule with odd `m`, in closed form
/// `-m! / (2^(m-1) ((m-1)/2)!^2)`, computed exactly before rounding.
pub fn minority_rprime_half(m: usize) -> Result<f64> {
    if m == 0 || m % 2 == 0 {
        return Err(invalid(format!(
            "the closed form needs odd m >= 1, got {m}"
        )));
    }
    let fact = |n: usize| (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k));
    let half = fact((m - 1) / 2);
    let denom = (BigInt::one() << (m - 1)) * &half * &half;
    let value = -BigRational::new(fact(m), denom);
    debug_assert!(value.is_negative());
    Ok(value.to_f64().expect("finite"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointKind {
    Stable,
    Unstable,
    Touchpoint,
    BoundaryStable,
    BoundaryUnstable,
}

impl FixedPointKind {
    pub fn is_stable(self) -> bool {
        matches!(self, Self::Stable | Self::BoundaryStable)
    }

    pub fn is_unstable(self) -> bool {
        matches!(self, Self::Unstable | Self::BoundaryUnstable)
    }
}

impl fmt::Display for FixedPointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Stable => "stable",
            Self::Unstable => "unstable",
            Self::Touchpoint => "touchpoint",
            Self::BoundaryStable => "boundary-stable",
            Self::BoundaryUnstable => "boundary-unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linearity {
    LinearlyStable,
    LinearlyUnstable,
    Marginal,
}

impl fmt::Display for Linearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LinearlyStable => "linearly-stable",
            Self::LinearlyUnstable => "linearly-unstable",
            Self::Marginal => "marginal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint {
    pub z: f64,
    pub kind: FixedPointKind,
    pub linear: Linearity,
    /// Derivative of the map whose fixed point this is.
    pub rprime: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FixedPointSet {
    /// Every `z` in `[0, 1]` is fixed (the linear rule).
    Continuum,
    Isolated(Vec<FixedPoint>),
}

impl FixedPointSet {
    pub fn points(&self) -> &[FixedPoint] {
        match self {
            Self::Continuum => &[],
            Self::Isolated(p) => p,
        }
    }

    pub fn contains(&self, z: f64, tol: f64) -> bool {
        match self {
            Self::Continuum => (0.0..=1.0).contains(&z),
            Self::Isolated(p) => p.iter().any(|q| (q.z - z).abs() <= tol),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPointCheck {
    pub holds: bool,
    pub z_star: f64,
    /// `(z', z'')` maximizing `z'' - z'` when the condition fails.
    pub witness: Option<(f64, f64)>,
}

/// Real roots of `g` in `[0, 1]` with their multiplicity estimate.
///
/// Candidates come from the complex roots of `poly` that sit near the unit
/// interval plus sign changes on a fine grid; clusters are polished by
/// Newton's method on the derivative of order `multiplicity - 1`, evaluated
/// through `g` (which is numerically stabler than the power basis).
fn unit_interval_roots(poly: &Poly, g: &dyn Fn(f64, usize) -> f64) -> Result<Vec<(f64, usize)>> {
    let mut candidates: Vec<f64> = Vec::new();
    if poly.degree() >= 1 {
        for r in root_candidates(poly) {
            if r.im.abs() <= 1e-5 && r.re >= -1e-6 && r.re <= 1.0 + 1e-6 {
                candidates.push(r.re.clamp(0.0, 1.0));
            }
        }
    }
    candidates.sort_by(f64::total_cmp);

    // cluster into multiplicity groups
    let mut groups: Vec<(f64, usize)> = Vec::new();
    let mut i = 0;
    while i < candidates.len() {
        let mut j = i + 1;
        while j < candidates.len() && candidates[j] - candidates[j - 1] <= 1e-5 {
            j += 1;
        }
        let mean = candidates[i..j].iter().sum::<f64>() / (j - i) as f64;
        groups.push((mean, j - i));
        i = j;
    }

    // grid sign changes not already covered
    const SCAN: usize = 4000;
    let mut prev = g(0.0, 0);
    for k in 1..=SCAN {
        let z = k as f64 / SCAN as f64;
        let cur = g(z, 0);
        if prev != 0.0 && cur != 0.0 && (prev < 0.0) != (cur < 0.0) {
            let (mut lo, mut hi) = ((k - 1) as f64 / SCAN as f64, z);
            let flo = prev;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = g(mid, 0);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 {
                    break;
                }
            }
            let root = 0.5 * (lo + hi);
            if !groups.iter().any(|(z0, _)| (z0 - root).abs() <= 1e-5) {
                groups.push((root, 1));
            }
        }
        prev = cur;
    }

    let mut roots: Vec<(f64, usize)> = Vec::new();
    for (start, mult) in groups {
        let z = polish(start, mult, g);
        if g(z, 0).abs() > FIXED_POINT_TOL {
            continue;
        }
        if !roots.iter().any(|(q, _)| (q - z).abs() <= DEDUP_TOL) {
            roots.push((z, mult));
        }
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(roots)
}

fn polish(start: f64, mult: usize, g: &dyn Fn(f64, usize) -> f64) -> f64 {
    let order = mult.saturating_sub(1);
    let mut z = start;
    for _ in 0..60 {
        let f = g(z, order);
        let df = g(z, order + 1);
        if f == 0.0 || df == 0.0 || !df.is_finite() {
            break;
        }
        let step = f / df;
        let next = (z - step).clamp(0.0, 1.0);
        if (next - start).abs() > 1e-3 {
            // wandered off: keep the unpolished estimate
            z = start;
            break;
        }
        let done = (next - z).abs() <= 1e-16;
        z = next;
        if done {
            break;
        }
    }
    // prefer the exact endpoint when it is itself a root
    for end in [0.0, 1.0] {
        if (z - end).abs() <= 1e-8 && g(end, 0).abs() <= 1e-14 {
            z = end;
        }
    }
    if g(z, 0).abs() > g(start, 0).abs() {
        start
    } else {
        z
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn classify(
    roots: &[(f64, usize)],
    g: &dyn Fn(f64, usize) -> f64,
    slope: impl Fn(f64) -> f64,
) -> Vec<FixedPoint> {
    let zs: Vec<f64> = roots.iter().map(|r| r.0).collect();
    zs.iter()
        .enumerate()
        .map(|(idx, &z)| {
            // probe no further than half-way to the neighbouring fixed points
            let gap_lo = if idx > 0 { z - zs[idx - 1] } else { z };
            let gap_hi = if idx + 1 < zs.len() {
                zs[idx + 1] - z
            } else {
                1.0 - z
            };
            let probe = |eps_max: f64| -> (i8, i8) {
                let mut eps = eps_max;
                loop {
                    let lo = if z > 0.0 { sign(g(z - eps, 0)) } else { 0 };
                    let hi = if z < 1.0 { sign(g(z + eps, 0)) } else { 0 };
                    let ok = (z == 0.0 || lo != 0) && (z == 1.0 || hi != 0);
                    if ok || eps < 1e-12 {
                        return (lo, hi);
                    }
                    eps /= 10.0;
                }
            };
            let mut eps = SIGN_PROBE;
            if z > 0.0 {
                eps = eps.min(0.5 * gap_lo);
            }
            if z < 1.0 {
                eps = eps.min(0.5 * gap_hi);
            }
            let (lo, hi) = probe(eps);
            let kind = if z == 0.0 {
                if hi < 0 {
                    FixedPointKind::BoundaryStable
                } else if hi > 0 {
                    FixedPointKind::BoundaryUnstable
                } else {
                    FixedPointKind::Touchpoint
                }
            } else if z == 1.0 {
                if lo > 0 {
                    FixedPointKind::BoundaryStable
                } else if lo < 0 {
                    FixedPointKind::BoundaryUnstable
                } else {
                    FixedPointKind::Touchpoint
                }
            } else {
                match (lo, hi) {
                    (1, -1) => FixedPointKind::Stable,
                    (-1, 1) => FixedPointKind::Unstable,
                    _ => FixedPointKind::Touchpoint,
                }
            };
            let rprime = slope(z);
            let linear = if kind.is_stable() && rprime < 1.0 - 1e-9 {
                Linearity::LinearlyStable
            } else if kind.is_unstable() && rprime > 1.0 + 1e-9 {
                Linearity::LinearlyUnstable
            } else {
                Linearity::Marginal
            };
            FixedPoint {
                z,
                kind,
                linear,
                rprime,
            }
        })
        .collect()
}
