//! Small numerical kernels shared by the analysis modules.
//!
//! Everything here is sized for the problems at hand: polynomials of degree
//! at most [`MAX_DEGREE`] and dense matrices of dimension at most
//! [`MAX_DIM`]. Eigenvalues go through the characteristic polynomial, so one
//! root finder (Aberth–Ehrlich) serves both fixed points of assignment rules
//! and Jacobian spectra.

use std::fmt;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub const MAX_DEGREE: usize = 64;
pub const MAX_DIM: usize = 8;

const ABERTH_MAX_ITER: usize = 1_000;

/// Real polynomial in the power basis, coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    /// Trailing (highest-degree) zeros are trimmed; the zero polynomial is
    /// stored as `[0.0]`.
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("polynomial coefficients must be finite"));
        }
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        if coeffs.len() - 1 > MAX_DEGREE {
            return Err(Error::DegreeTooLarge(coeffs.len() - 1));
        }
        Ok(Self { coeffs })
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect();
        Poly::new(coeffs).expect("derivative lowers the degree")
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| {
                self.coeffs.get(k).copied().unwrap_or(0.0)
                    - other.coeffs.get(k).copied().unwrap_or(0.0)
            })
            .collect();
        Poly::new(coeffs).expect("difference cannot raise the degree")
    }

    pub fn mul(&self, other: &Poly) -> Result<Poly> {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// `self(inner(z))` by Horner's scheme over polynomials.
    pub fn compose(&self, inner: &Poly) -> Result<Poly> {
        let degree = self.degree() * inner.degree();
        if degree > MAX_DEGREE {
            return Err(Error::DegreeTooLarge(degree));
        }
        let mut acc = Poly::zero();
        for &c in self.coeffs.iter().rev() {
            acc = acc.mul(inner)?;
            acc.coeffs[0] += c;
        }
        Poly::new(acc.coeffs)
    }

    /// Bound used by the root-finder contract: `1e-9 * (1 + max|coeff|)`.
    pub fn residual_bound(&self) -> f64 {
        1e-9 * (1.0 + self.max_abs_coeff())
    }

    /// `|p(z)|` inside the unit disk; outside it, the residual of the
    /// reversed polynomial at `1/z`, i.e. `|p(z)| / |z|^n`. Far roots of
    /// polynomials with a tiny leading coefficient cannot meet an absolute
    /// bound in double precision.
    pub fn scaled_residual(&self, z: Complex64) -> f64 {
        let v = self.eval_complex(z).norm();
        let r = z.norm();
        if r <= 1.0 {
            v
        } else {
            v / r.powi(self.degree() as i32)
        }
    }

    /// Rounding-error scale of Horner evaluation at `z`.
    fn horner_noise(&self, z: Complex64) -> f64 {
        let r = z.norm();
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * r + c.abs();
        }
        acc * 4.0 * self.coeffs.len() as f64 * f64::EPSILON
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 && self.coeffs.len() > 1 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            first = false;
            match k {
                0 => write!(f, "{}", c.abs())?,
                1 => write!(f, "{}*z", c.abs())?,
                _ => write!(f, "{}*z^{}", c.abs(), k)?,
            }
        }
        Ok(())
    }
}

/// All `degree` complex roots of `p`, with multiplicity.
///
/// Exact zero roots are split off first; the rest are found by Aberth–Ehrlich
/// simultaneous iteration started on a perturbed circle of radius
/// `1 + max|coeff| / |lead|`. A root is frozen once its residual reaches the
/// rounding level of Horner evaluation. Near-coincident roots (multiple
/// roots, which Aberth only resolves to about `sqrt(eps)`) are replaced by
/// their cluster mean.
pub fn poly_roots(p: &Poly) -> Result<Vec<Complex64>> {
    if p.degree() == 0 {
        return Err(invalid("root finding needs a polynomial of degree >= 1"));
    }
    let zeros = p.coeffs.iter().take_while(|&&c| c == 0.0).count();
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    let reduced = Poly::new(p.coeffs[zeros..].to_vec())?;
    if reduced.degree() > 0 {
        roots.extend(aberth(&reduced)?);
    }
    merge_clusters(p, &mut roots);
    let bound = p.residual_bound();
    let residual = roots
        .iter()
        .map(|&r| p.scaled_residual(r))
        .fold(0.0, f64::max);
    if residual > bound {
        return Err(Error::RootsNotConverged {
            iterations: ABERTH_MAX_ITER,
            residual,
        });
    }
    Ok(roots)
}

/// Root estimates with multiplicity from the same iteration as
/// [`poly_roots`] but without the final residual check. Callers must verify
/// the roots they use by other means.
pub(crate) fn root_candidates(p: &Poly) -> Vec<Complex64> {
    if p.degree() == 0 {
        return Vec::new();
    }
    let zeros = p.coeffs.iter().take_while(|&&c| c == 0.0).count();
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    let reduced = Poly {
        coeffs: p.coeffs[zeros..].to_vec(),
    };
    if reduced.degree() > 0 {
        roots.extend(aberth_iterate(&reduced));
    }
    merge_clusters(p, &mut roots);
    roots
}

fn aberth(p: &Poly) -> Result<Vec<Complex64>> {
    let z = aberth_iterate(p);
    let lead = p.leading();
    let monic = Poly {
        coeffs: p.coeffs.iter().map(|c| c / lead).collect(),
    };
    let bound = p.residual_bound() / lead.abs();
    let residual = z
        .iter()
        .map(|&r| monic.scaled_residual(r))
        .fold(0.0, f64::max);
    if residual > bound {
        return Err(Error::RootsNotConverged {
            iterations: ABERTH_MAX_ITER,
            residual: residual * lead.abs(),
        });
    }
    Ok(z)
}

fn aberth_iterate(p: &Poly) -> Vec<Complex64> {
    let n = p.degree();
    let lead = p.leading();
    let monic: Vec<f64> = p.coeffs.iter().map(|c| c / lead).collect();
    let monic = Poly { coeffs: monic };
    let dp = monic.derivative();

    if n == 1 {
        return vec![Complex64::new(-monic.coeffs[0], 0.0)];
    }

    let radius = 1.0
        + monic.coeffs[..n]
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.abs()));
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius * (1.0 - 0.01 * (k % 3) as f64), angle)
        })
        .collect();
    let mut frozen = vec![false; n];

    for _ in 0..ABERTH_MAX_ITER {
        let mut all_done = true;
        for k in 0..n {
            if frozen[k] {
                continue;
            }
            let pz = monic.eval_complex(z[k]);
            if pz.norm() <= monic.horner_noise(z[k]) {
                frozen[k] = true;
                continue;
            }
            let dpz = dp.eval_complex(z[k]);
            let ratio = pz / dpz;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| {
                    let d = z[k] - z[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let mut step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !step.re.is_finite() || !step.im.is_finite() {
                // zero derivative: nudge off the critical point
                step = Complex64::new(1e-8, 1e-8) * (1.0 + z[k].norm());
            }
            z[k] -= step;
            if step.norm() <= 4.0 * f64::EPSILON * (1.0 + z[k].norm()) {
                frozen[k] = true;
            } else {
                all_done = false;
            }
        }
        if all_done {
            break;
        }
    }

    z
}

/// Replaces each cluster of nearly coincident roots by one point of the
/// same multiplicity `k`, refined by Newton's method on `p^(k-1)` (where the
/// root is simple).
fn merge_clusters(p: &Poly, roots: &mut [Complex64]) {
    let n = roots.len();
    let mut assigned = vec![false; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let tol = 1e-6 * roots[i].norm().max(1.0);
        let members: Vec<usize> = (i..n)
            .filter(|&j| !assigned[j] && (roots[j] - roots[i]).norm() <= tol)
            .collect();
        if members.len() > 1 {
            let mean = members.iter().map(|&j| roots[j]).sum::<Complex64>() / members.len() as f64;
            let mut q = p.clone();
            for _ in 1..members.len() {
                q = q.derivative();
            }
            let dq = q.derivative();
            let mut z = mean;
            for _ in 0..50 {
                let step = q.eval_complex(z) / dq.eval_complex(z);
                if !step.re.is_finite() || !step.im.is_finite() || step.norm() > tol {
                    break;
                }
                z -= step;
                if step.norm() <= f64::EPSILON * z.norm().max(1.0) {
                    break;
                }
            }
            let z = if p.eval_complex(z).norm() <= p.eval_complex(mean).norm() {
                z
            } else {
                mean
            };
            for &j in &members {
                roots[j] = z;
                assigned[j] = true;
            }
        }
    }
}

/// Dense square matrix, row-major, dimension at most [`MAX_DIM`].
#[derive(Debug, Clone, PartialEq)]
pub struct SmallMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SmallMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n > MAX_DIM {
            return Err(Error::DimensionTooLarge(n));
        }
        if n == 0 {
            return Err(invalid("matrix dimension must be positive"));
        }
        if data.len() != n * n {
            return Err(invalid(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix entries must be finite"));
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid(
                "matrix rows must all have length equal to the row count",
            ));
        }
        Self::new(n, rows.concat())
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(n, vec![0.0; n * n])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self) -> f64 {
        self.data.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn matmul(&self, other: &SmallMatrix) -> SmallMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * other.get(k, j);
                }
            }
        }
        SmallMatrix { n, data: out }
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
                .unwrap();
            if a[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(pivot * n + j, col * n + j);
                }
                det = -det;
            }
            let d = a[col * n + col];
            det *= d;
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                for j in col..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
            }
        }
        det
    }

    /// Characteristic polynomial `det(λI − M)` by Faddeev–LeVerrier.
    pub fn char_poly(&self) -> Poly {
        let n = self.n;
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        let mut mk = SmallMatrix {
            n,
            data: vec![0.0; n * n],
        };
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{n-k+1} I
            let mut next = self.matmul(&mk);
            for i in 0..n {
                next.data[i * n + i] += c[n - k + 1];
            }
            let am = self.matmul(&next);
            c[n - k] = -am.trace() / k as f64;
            mk = next;
        }
        Poly::new(c).expect("finite characteristic polynomial")
    }
}

impl fmt::Display for SmallMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.data.chunks(self.n) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.6}")).collect();
            writeln!(f, "[{}]", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Eigenvalues sorted by descending real part (ties: descending imaginary part).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
}

impl Spectrum {
    pub fn max_re(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn sorted(mut eigenvalues: Vec<Complex64>) -> Self {
        eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        Self { eigenvalues }
    }
}

pub fn eigenvalues(m: &SmallMatrix) -> Result<Spectrum> {
    if m.n > MAX_DIM {
        return Err(Error::DimensionTooLarge(m.n));
    }
    let mut roots = poly_roots(&m.char_poly())?;
    // the characteristic polynomial is real: snap numerically-real pairs
    for r in &mut roots {
        if r.im.abs() <= 1e-12 * r.norm().max(1.0) {
            r.im = 0.0;
        }
    }
    // and make complex pairs exact conjugates
    let n = roots.len();
    let mut paired = vec![false; n];
    for i in 0..n {
        if paired[i] || roots[i].im <= 0.0 {
            continue;
        }
        let partner = (0..n)
            .filter(|&j| !paired[j] && roots[j].im < 0.0)
            .min_by(|&a, &b| {
                (roots[a] - roots[i].conj())
                    .norm()
                    .total_cmp(&(roots[b] - roots[i].conj()).norm())
            });
        if let Some(j) = partner {
            let mid = Complex64::new(
                0.5 * (roots[i].re + roots[j].re),
                0.5 * (roots[i].im - roots[j].im),
            );
            roots[i] = mid;
            roots[j] = mid.conj();
            paired[i] = true;
            paired[j] = true;
        }
    }
    Ok(Spectrum::sorted(roots))
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 100,
            fd_step: 1e-6,
            max_halvings: 40,
        }
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// Central-difference Jacobian, `J[i][j] = ∂f_i/∂x_j`.
pub fn fd_jacobian<F>(f: &F, x: &[f64], h: f64) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        cols.push(
            fp.iter()
                .zip(&fm)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect::<Vec<f64>>(),
        );
    }
    let m = cols.first().map_or(0, Vec::len);
    (0..m)
        .map(|i| (0..n).map(|j| cols[j][i]).collect())
        .collect()
}

/// Solves `a x = b` for square `a` by partial-pivot elimination.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(pivot, col);
        b.swap(pivot, col);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[r][j] -= f * a[col][j];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Damped Newton iteration with a finite-difference Jacobian.
///
/// Steps are halved (up to `max_halvings` times) until the sup-norm residual
/// decreases. Returns a point with `‖f(x)‖∞ <= tol` or an error; never a
/// silently bad root.
pub fn newton_solve<F>(f: F, x0: &[f64], opts: NewtonOptions) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if fx.len() != x.len() {
        return Err(invalid("newton_solve needs a square system"));
    }
    let mut res = sup_norm(&fx);
    for _ in 0..opts.max_iter {
        if !res.is_finite() {
            return Err(Error::NewtonFailed("non-finite residual".into()));
        }
        if res <= opts.tol {
            return Ok(x);
        }
        let jac = fd_jacobian(&f, &x, opts.fd_step);
        let rhs: Vec<f64> = fx.iter().map(|v| -v).collect();
        let delta = solve_linear(jac, rhs)
            .ok_or_else(|| Error::NewtonFailed("singular Jacobian".into()))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let ft = f(&trial);
            let rt = sup_norm(&ft);
            if rt.is_finite() && rt < res {
                x = trial;
                fx = ft;
                res = rt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonFailed(format!(
                "no residual decrease (residual {res:e})"
            )));
        }
    }
    if res <= opts.tol {
        Ok(x)
    } else {
        Err(Error::NewtonFailed(format!(
            "no convergence in {} iterations (residual {res:e})",
            opts.max_iter
        )))
    }
}

/// States of a flow integration on the probability simplex.
#[derive(Debug, Clone)]
pub struct FlowPath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl FlowPath {
    pub fn last(&self) -> &[f64] {
        self.states
            .last()
            .expect("a path always holds its initial state")
    }
}

/// Clamps negative coordinates to zero and renormalizes to unit sum.
pub fn project_to_simplex(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s: f64 = x.iter().sum();
    if s > 0.0 {
        for v in x.iter_mut() {
            *v /= s;
        }
    }
}

/// Classical RK4 integration of `dx/dt = f(x)` with simplex projection after
/// every step.
pub fn integrate_flow<F>(f: F, x0: &[f64], t_end: f64, dt: f64) -> Result<FlowPath>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("integration step must be positive"));
    }
    if !(t_end >= 0.0) {
        return Err(invalid("integration horizon must be non-negative"));
    }
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut path = FlowPath {
        times: vec![0.0],
        states: vec![x.clone()],
    };
    let axpy = |x: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(a, b)| a + h * b).collect()
    };
    while t < t_end - 1e-12 * dt {
        let h = dt.min(t_end - t);
        let k1 = f(&x);
        let k2 = f(&axpy(&x, &k1, h / 2.0));
        let k3 = f(&axpy(&x, &k2, h / 2.0));
        let k4 = f(&axpy(&x, &k3, h));
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        project_to_simplex(&mut x);
        path.times.push(t);
        path.states.push(x.clone());
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn roots_of_majority_fixed_point_cubic() {
        // -z(2z-1)(z-1)
        let p = Poly::new(vec![0.0, -1.0, 3.0, -2.0]).unwrap();
        let r = sorted_re(poly_roots(&p).unwrap());
        for (root, want) in r.iter().zip([0.0, 0.5, 1.0]) {
            assert!(
                (root.re - want).abs() < 1e-12 && root.im.abs() < 1e-12,
                "{root}"
            );
        }
    }

    #[test]
    fn roots_of_monomial_and_quadratic() {
        let r = poly_roots(&Poly::new(vec![0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(r, vec![Complex64::new(0.0, 0.0)]);
        let r = sorted_re(poly_roots(&Poly::new(vec![1.0, 0.0, 1.0]).unwrap()).unwrap());
        assert!((r[0] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn double_root_is_resolved() {
        // (z - 1/3)^2 (z - 1)
        let a = Poly::new(vec![-1.0 / 3.0, 1.0]).unwrap();
        let b = Poly::new(vec![-1.0, 1.0]).unwrap();
        let p = a.mul(&a).unwrap().mul(&b).unwrap();
        let r = sorted_re(poly_roots(&p).unwrap());
        assert!((r[0].re - 1.0 / 3.0).abs() < 1e-9);
        assert!((r[1].re - 1.0 / 3.0).abs() < 1e-9);
        assert!((r[2].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_polynomial_is_rejected() {
        assert!(poly_roots(&Poly::new(vec![3.0]).unwrap()).is_err());
        assert!(matches!(
            Poly::new(vec![1.0; 70]),
            Err(Error::DegreeTooLarge(69))
        ));
    }

    #[test]
    fn compose_matches_pointwise() {
        let p = Poly::new(vec![1.0, -2.0, 0.5]).unwrap();
        let q = Poly::new(vec![0.25, 1.0, -1.0]).unwrap();
        let pq = p.compose(&q).unwrap();
        for z in [-1.0, 0.0, 0.3, 0.9, 2.0] {
            assert!((pq.eval(z) - p.eval(q.eval(z))).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_and_rotation_spectra() {
        let s = eigenvalues(&SmallMatrix::identity(2).unwrap()).unwrap();
        for l in &s.eigenvalues {
            assert!((l - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let rot = SmallMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let s = eigenvalues(&rot).unwrap();
        assert!((s.eigenvalues[0] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        assert!((s.eigenvalues[1] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn three_cycle_jacobian_spectrum() {
        // m = 1 with R'(1/2) = -2.1875 (minority rule, m = 7)
        let r = -2.1875;
        let m =
            SmallMatrix::from_rows(&[vec![-1.0, 0.0, r], vec![r, -1.0, 0.0], vec![0.0, r, -1.0]])
                .unwrap();
        let s = eigenvalues(&m).unwrap();
        let half_sqrt3 = 3f64.sqrt() / 2.0;
        let expected = [
            Complex64::new(-1.0 - 0.5 * r, -half_sqrt3 * r),
            Complex64::new(-1.0 - 0.5 * r, half_sqrt3 * r),
            Complex64::new(-1.0 + r, 0.0),
        ];
        for (got, want) in s.eigenvalues.iter().zip(expected) {
            assert!((got - want).norm() < 1e-10, "{got} vs {want}");
        }
        assert!((s.eigenvalues[0].re - 0.09375).abs() < 1e-10);
    }

    #[test]
    fn oversized_matrix_rejected() {
        assert!(matches!(
            SmallMatrix::zeros(9),
            Err(Error::DimensionTooLarge(9))
        ));
    }

    #[test]
    fn newton_examples() {
        let opts = NewtonOptions::default();
        let x = newton_solve(|x| vec![x[0] * x[0] - 1.0], &[2.0], opts).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-11);
        let x = newton_solve(|x| vec![x[0].sin()], &[3.0], opts).unwrap();
        assert!((x[0] - std::f64::consts::PI).abs() < 1e-11);
    }

    #[test]
    fn newton_reports_failure() {
        // no real root
        let r = newton_solve(
            |x| vec![x[0] * x[0] + 1.0],
            &[0.5],
            NewtonOptions::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn zero_field_keeps_state() {
        let x0 = [0.1, 0.2, 0.3, 0.4];
        let path = integrate_flow(|x| vec![0.0; x.len()], &x0, 1.0, 0.1).unwrap();
        assert_eq!(path.states.len(), 11);
        for s in &path.states {
            for (a, b) in s.iter().zip(&x0) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn non_finite_flow_aborts() {
        let r = integrate_flow(
            |x| x.iter().map(|v| 1.0 / (v - v)).collect(),
            &[0.5, 0.5],
            1.0,
            0.1,
        );
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }
}
