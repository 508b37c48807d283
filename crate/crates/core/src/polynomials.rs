//! Homogeneous polynomials as sections of `O(p)` and their zero sets.
//!
//! Coefficients are dense in graded-lexicographic order (exponent of `z0`
//! descending, then `z1`): on `P^1` index `k` is the monomial
//! `z0^(p-k) z1^k`, so the dehomogenization in the chart `z0 != 0` is the
//! plain coefficient sequence of `f(1,t)`.
//!
//! Roots on `P^1` come from balanced companion-matrix eigenvalues plus a few
//! Newton steps; multiplicities are recovered by chordal clustering at
//! relative tolerance 1e-8 and verified (and, when eigenvalue scatter of an
//! m-fold root exceeds the tolerance, promoted) by exact Taylor coefficients
//! of the polynomial recentred at the cluster. Common zeros on `P^2` go
//! through Sylvester resultant elimination in a rotated chart, univariate
//! root extraction, back-substitution and Newton polishing on the 2x2
//! holomorphic system.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::num::{self, binomial, Complex64};
use crate::projective::{random_unitary, unitary_with_first_column, ProjectivePoint};
use crate::rng::{substream, Purpose};

/// Chordal tolerance for merging root clusters into multiple points.
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("coefficient vector has length {got}, expected {expect}")]
    BadCoefficientLength { got: usize, expect: usize },
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("degrees differ: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("resultant vanishes identically: the two sections share a factor")]
    SharedFactor,
    #[error("{count} candidate zeros could not be polished to residual {tol:e} (worst {worst:e})")]
    NewtonDivergence { count: usize, tol: f64, worst: f64 },
    #[error("operation requires ambient dimension {expect}, got {got}")]
    WrongAmbient { got: usize, expect: usize },
}

// ---------------------------------------------------------------------------
// Monomial bookkeeping
// ---------------------------------------------------------------------------

pub fn monomial_count(n: usize, degree: usize) -> usize {
    binomial((n + degree) as u64, n as u64) as usize
}

/// Exponent vectors of all degree-`degree` monomials in `n+1` variables,
/// graded-lex order.
pub fn exponents(n: usize, degree: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(monomial_count(n, degree));
    match n {
        1 => {
            for k in 0..=degree {
                out.push([degree - k, k, 0]);
            }
        }
        2 => {
            for a0 in (0..=degree).rev() {
                for a1 in (0..=(degree - a0)).rev() {
                    out.push([a0, a1, degree - a0 - a1]);
                }
            }
        }
        _ => panic!("unsupported ambient dimension"),
    }
    out
}

pub fn monomial_index(n: usize, degree: usize, alpha: &[usize; 3]) -> usize {
    match n {
        1 => alpha[1],
        2 => {
            let r = degree - alpha[0];
            r * (r + 1) / 2 + (r - alpha[1])
        }
        _ => panic!("unsupported ambient dimension"),
    }
}

/// Values of every degree-`degree` monomial at `z`, graded-lex order.
pub fn monomial_values(n: usize, degree: usize, z: &[Complex64]) -> Vec<Complex64> {
    let mut pows: Vec<Vec<Complex64>> = Vec::with_capacity(n + 1);
    for zi in z.iter().take(n + 1) {
        let mut col = Vec::with_capacity(degree + 1);
        let mut acc = Complex64::new(1.0, 0.0);
        col.push(acc);
        for _ in 0..degree {
            acc *= zi;
            col.push(acc);
        }
        pows.push(col);
    }
    exponents(n, degree)
        .iter()
        .map(|a| {
            let mut v = pows[0][a[0]];
            v *= pows[1][a[1]];
            if n == 2 {
                v *= pows[2][a[2]];
            }
            v
        })
        .collect()
}

/// sqrt of the multinomial coefficients p!/(a0!...an!), the scaling that
/// makes monomials equal-norm under the Fubini-Study inner product.
pub fn multinomial_sqrt(n: usize, degree: usize) -> Vec<f64> {
    exponents(n, degree)
        .iter()
        .map(|a| {
            let mut ln = num::ln_factorial(degree as u64);
            for ai in a.iter().take(n + 1) {
                ln -= num::ln_factorial(*ai as u64);
            }
            (0.5 * ln).exp()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// HomogeneousPolynomial
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousPolynomial {
    pub n: usize,
    pub degree: usize,
    pub coeffs: Vec<Complex64>,
}

impl HomogeneousPolynomial {
    pub fn new(n: usize, degree: usize, coeffs: Vec<Complex64>) -> Result<Self, PolyError> {
        let expect = monomial_count(n, degree);
        if coeffs.len() != expect {
            return Err(PolyError::BadCoefficientLength { got: coeffs.len(), expect });
        }
        Ok(Self { n, degree, coeffs })
    }

    pub fn zero(n: usize, degree: usize) -> Self {
        Self { n, degree, coeffs: vec![Complex64::new(0.0, 0.0); monomial_count(n, degree)] }
    }

    pub fn is_identically_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm() == 0.0)
    }

    pub fn coeff_norm(&self) -> f64 {
        num::norm(&self.coeffs)
    }

    pub fn evaluate_at_coords(&self, z: &[Complex64]) -> Complex64 {
        let vals = monomial_values(self.n, self.degree, z);
        let mut s = Complex64::new(0.0, 0.0);
        for (c, v) in self.coeffs.iter().zip(vals.iter()) {
            s += c * v;
        }
        s
    }

    /// Value at the unit-norm representative; `|evaluate|` is then
    /// projectively well-defined.
    pub fn evaluate(&self, x: &ProjectivePoint) -> Result<Complex64, PolyError> {
        if x.dim() != self.n {
            return Err(PolyError::DimensionMismatch(x.dim(), self.n));
        }
        Ok(self.evaluate_at_coords(x.coords()))
    }

    /// Partial derivative with respect to variable `var` (degree drops by 1).
    pub fn derivative(&self, var: usize) -> HomogeneousPolynomial {
        if self.degree == 0 {
            return HomogeneousPolynomial::zero(self.n, 0);
        }
        let mut out = HomogeneousPolynomial::zero(self.n, self.degree - 1);
        for (a, c) in exponents(self.n, self.degree).iter().zip(self.coeffs.iter()) {
            if a[var] == 0 {
                continue;
            }
            let mut b = *a;
            b[var] -= 1;
            let idx = monomial_index(self.n, self.degree - 1, &b);
            out.coeffs[idx] += c * a[var] as f64;
        }
        out
    }

    /// `f(M z)` for a linear substitution `M` on the homogeneous coordinates.
    pub fn compose_linear(&self, m: &DMatrix<Complex64>) -> HomogeneousPolynomial {
        let nv = self.n + 1;
        debug_assert_eq!(m.nrows(), nv);
        let mut out = HomogeneousPolynomial::zero(self.n, self.degree);
        for (a, c) in exponents(self.n, self.degree).iter().zip(self.coeffs.iter()) {
            if c.norm() == 0.0 {
                continue;
            }
            // expand prod_i ((Mz)_i)^{a_i} by repeated linear multiplication
            let mut acc = vec![*c]; // degree-0 dense poly
            let mut deg = 0usize;
            for i in 0..nv {
                for _ in 0..a[i] {
                    let lin: Vec<Complex64> = (0..nv).map(|j| m[(i, j)]).collect();
                    acc = multiply_by_linear(self.n, deg, &acc, &lin);
                    deg += 1;
                }
            }
            for (o, v) in out.coeffs.iter_mut().zip(acc.iter()) {
                *o += v;
            }
        }
        out
    }
}

fn multiply_by_linear(n: usize, deg: usize, coeffs: &[Complex64], lin: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); monomial_count(n, deg + 1)];
    for (a, c) in exponents(n, deg).iter().zip(coeffs.iter()) {
        if c.norm() == 0.0 {
            continue;
        }
        for (j, lj) in lin.iter().enumerate().take(n + 1) {
            if lj.norm() == 0.0 {
                continue;
            }
            let mut b = *a;
            b[j] += 1;
            out[monomial_index(n, deg + 1, &b)] += c * lj;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// ZeroSet
// ---------------------------------------------------------------------------

/// Zero divisor with multiplicities; `expected_total` is the Bezout number
/// `p^m`. A total multiplicity below `expected_total` flags an incomplete
/// solve.
#[derive(Debug, Clone)]
pub struct ZeroSet {
    pub points: Vec<(ProjectivePoint, u32)>,
    pub expected_total: u64,
}

impl ZeroSet {
    pub fn total_multiplicity(&self) -> u64 {
        self.points.iter().map(|(_, m)| *m as u64).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.total_multiplicity() == self.expected_total
    }

    pub fn deficit(&self) -> u64 {
        self.expected_total.saturating_sub(self.total_multiplicity())
    }
}

// ---------------------------------------------------------------------------
// Univariate roots (companion matrix route)
// ---------------------------------------------------------------------------

/// All roots of `sum c_k t^k` with nonzero leading coefficient, via balanced
/// companion-matrix eigenvalues followed by Newton polishing.
pub(crate) fn univariate_roots(c: &[Complex64]) -> Vec<Complex64> {
    let deg = c.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    if deg == 1 {
        return vec![-c[0] / c[1]];
    }
    let lead = c[deg];
    let mut m = DMatrix::<Complex64>::zeros(deg, deg);
    for i in 1..deg {
        m[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..deg {
        m[(i, deg - 1)] = -c[i] / lead;
    }
    balance_in_place(&mut m);
    let eigs = m
        .schur()
        .eigenvalues()
        .expect("complex matrices are always triangularizable");
    eigs.iter().map(|t| polish_root(c, *t)).collect()
}

/// Parlett-Reinsch balancing with powers of two (exact in floating point).
fn balance_in_place(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    for _ in 0..32 {
        let mut converged = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    r += m[(i, j)].norm();
                    c += m[(j, i)].norm();
                }
            }
            if r == 0.0 || c == 0.0 {
                continue;
            }
            let mut f = 1.0f64;
            let s = r + c;
            while c < r / 2.0 {
                c *= 2.0;
                r /= 2.0;
                f *= 2.0;
            }
            while c >= r * 2.0 {
                c /= 2.0;
                r *= 2.0;
                f /= 2.0;
            }
            if (c + r) < 0.95 * s && f != 1.0 {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
}

fn horner_val_deriv(c: &[Complex64], t: Complex64) -> (Complex64, Complex64) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut d = Complex64::new(0.0, 0.0);
    for ck in c.iter().rev() {
        d = d * t + v;
        v = v * t + ck;
    }
    (v, d)
}

fn polish_root(c: &[Complex64], mut t: Complex64) -> Complex64 {
    let scale: f64 = c.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut best = t;
    let mut best_v = horner_val_deriv(c, t).0.norm();
    for _ in 0..6 {
        let (v, d) = horner_val_deriv(c, t);
        if v.norm() < best_v {
            best_v = v.norm();
            best = t;
        }
        if d.norm() == 0.0 || v.norm() <= 1e-16 * scale {
            break;
        }
        let step = v / d;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        t -= step;
        if step.norm() < 1e-15 * (1.0 + t.norm()) {
            break;
        }
    }
    if horner_val_deriv(c, t).0.norm() < best_v {
        best = t;
    }
    best
}

// ---------------------------------------------------------------------------
// Roots on P^1
// ---------------------------------------------------------------------------

pub fn roots_p1(f: &HomogeneousPolynomial) -> Result<ZeroSet, PolyError> {
    if f.n != 1 {
        return Err(PolyError::WrongAmbient { got: f.n, expect: 1 });
    }
    let p = f.degree;
    let maxc = f.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if maxc == 0.0 {
        return Err(PolyError::ZeroPolynomial);
    }
    // f(1,t) = sum_k coeffs[k] t^k; numerically dead leading and trailing
    // coefficients become the exact roots [0:1] and [1:0]
    let cutoff = 1e-14 * maxc;
    let mut lo = 0usize;
    while lo <= p && f.coeffs[lo].norm() <= cutoff {
        lo += 1;
    }
    let mut hi = p;
    while hi > lo && f.coeffs[hi].norm() <= cutoff {
        hi -= 1;
    }
    let mult_zero = lo as u32; // root [1:0] (t = 0)
    let mult_inf = (p - hi) as u32; // root [0:1] (t = infinity)

    let mid = &f.coeffs[lo..=hi];
    let finite = if mid.len() > 1 { univariate_roots(mid) } else { Vec::new() };

    let mut pts: Vec<(ProjectivePoint, u32)> = Vec::new();
    if mult_zero > 0 {
        pts.push((ProjectivePoint::from_affine_p1(Complex64::new(0.0, 0.0)), mult_zero));
    }
    if mult_inf > 0 {
        let inf =
            ProjectivePoint::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        pts.push((inf, mult_inf));
    }
    let clustered = cluster_points(
        finite.iter().map(|t| ProjectivePoint::from_affine_p1(*t)).collect(),
        CLUSTER_TOL,
    );
    pts.extend(verify_and_promote(f, clustered));
    Ok(ZeroSet { points: pts, expected_total: p as u64 })
}

/// Greedy single-linkage clustering in the chordal metric.
fn cluster_points(points: Vec<ProjectivePoint>, tol: f64) -> Vec<(ProjectivePoint, u32)> {
    let mut clusters: Vec<(Vec<ProjectivePoint>, u32)> = Vec::new();
    'outer: for x in points {
        for (members, count) in clusters.iter_mut() {
            if num::chordal(members[0].coords(), x.coords()) <= tol {
                members.push(x);
                *count += 1;
                continue 'outer;
            }
        }
        clusters.push((vec![x], 1));
    }
    clusters.into_iter().map(|(members, count)| (centroid(&members), count)).collect()
}

fn centroid(members: &[ProjectivePoint]) -> ProjectivePoint {
    // phase-align against the first member before averaging
    let base = &members[0];
    let mut acc = vec![Complex64::new(0.0, 0.0); base.coords().len()];
    for m in members {
        let ip = num::inner(m.coords(), base.coords());
        let phase = if ip.norm() > 0.0 { ip.conj() / ip.norm() } else { Complex64::new(1.0, 0.0) };
        for (a, c) in acc.iter_mut().zip(m.coords()) {
            *a += phase * c;
        }
    }
    ProjectivePoint::new(acc).unwrap_or_else(|_| base.clone())
}

/// Order of vanishing at a point, read off exactly from the Taylor
/// coefficients of the polynomial recentred by a unitary substitution.
fn taylor_multiplicity(f: &HomogeneousPolynomial, x: &ProjectivePoint) -> u32 {
    let v = unitary_with_first_column(x.coords());
    let g = f.compose_linear(&v);
    let maxc = g.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let tol = 1e-6 * maxc;
    for (k, c) in g.coeffs.iter().enumerate() {
        if c.norm() > tol {
            return k as u32;
        }
    }
    g.degree as u32
}

/// Derivative verification of cluster multiplicities: eigenvalues of an
/// m-fold root scatter like eps^(1/m), which can exceed `CLUSTER_TOL`; when
/// the vanishing order at a centroid exceeds the cluster size, clusters
/// within the expected scatter radius are merged.
fn verify_and_promote(
    f: &HomogeneousPolynomial,
    mut clusters: Vec<(ProjectivePoint, u32)>,
) -> Vec<(ProjectivePoint, u32)> {
    loop {
        let mut merge: Option<(usize, f64)> = None;
        for (i, (x, size)) in clusters.iter().enumerate() {
            let m = taylor_multiplicity(f, x);
            if m > *size {
                merge = Some((i, 20.0 * 1e-16f64.powf(1.0 / m as f64)));
                break;
            }
        }
        let Some((i, radius)) = merge else { break };
        let xi = clusters[i].0.clone();
        let mut members: Vec<(ProjectivePoint, u32)> = Vec::new();
        let mut rest: Vec<(ProjectivePoint, u32)> = Vec::new();
        for (x, c) in clusters.into_iter() {
            if num::chordal(x.coords(), xi.coords()) <= radius {
                members.push((x, c));
            } else {
                rest.push((x, c));
            }
        }
        if members.len() <= 1 {
            rest.extend(members);
            clusters = rest;
            break;
        }
        let total: u32 = members.iter().map(|(_, c)| c).sum();
        let pts: Vec<ProjectivePoint> = members
            .iter()
            .flat_map(|(x, c)| core::iter::repeat(x.clone()).take(*c as usize))
            .collect();
        rest.push((centroid(&pts), total));
        clusters = rest;
    }
    clusters
}

// ---------------------------------------------------------------------------
// Common zeros on P^2
// ---------------------------------------------------------------------------

/// Chart rotation seed used by [`common_zeros_p2`]; experiments thread their
/// own seed through [`common_zeros_p2_rotated`].
pub const DEFAULT_ROTATION_SEED: u64 = 0x5eed_c4a7;

pub fn common_zeros_p2(
    f: &HomogeneousPolynomial,
    g: &HomogeneousPolynomial,
    tol: f64,
) -> Result<ZeroSet, PolyError> {
    common_zeros_p2_rotated(f, g, tol, DEFAULT_ROTATION_SEED)
}

pub fn common_zeros_p2_rotated(
    f: &HomogeneousPolynomial,
    g: &HomogeneousPolynomial,
    tol: f64,
    rotation_seed: u64,
) -> Result<ZeroSet, PolyError> {
    if f.n != 2 || g.n != 2 {
        return Err(PolyError::WrongAmbient { got: f.n.max(g.n), expect: 2 });
    }
    if f.degree != g.degree {
        return Err(PolyError::DegreeMismatch(f.degree, g.degree));
    }
    if f.is_identically_zero() || g.is_identically_zero() {
        return Err(PolyError::ZeroPolynomial);
    }
    let p = f.degree;

    // unit-normalized copies so residual thresholds are scale-free
    let mut fu = f.clone();
    let nf = fu.coeff_norm();
    for c in fu.coeffs.iter_mut() {
        *c /= nf;
    }
    let mut gu = g.clone();
    let ng = gu.coeff_norm();
    for c in gu.coeffs.iter_mut() {
        *c /= ng;
    }

    // generic chart rotation, retried deterministically if the rotated chart
    // degenerates at infinity
    for attempt in 0..4u32 {
        let mut rng = substream(rotation_seed, Purpose::ChartRotation, attempt, 0);
        let u = random_unitary(3, &mut rng);
        let fr = fu.compose_linear(&u);
        let gr = gu.compose_linear(&u);
        match solve_rotated(&fr, &gr, p, tol) {
            Ok(points_rotated) => {
                // a rotated-chart solution w corresponds to z = U w
                let pts: Vec<(ProjectivePoint, u32)> = points_rotated
                    .into_iter()
                    .map(|(w, m)| {
                        let mut z = crate::projective::apply_unitary(&u, w.coords());
                        num::normalize(&mut z);
                        (ProjectivePoint::new(z).unwrap(), m)
                    })
                    .collect();
                return Ok(ZeroSet { points: pts, expected_total: (p * p) as u64 });
            }
            Err(RotatedFailure::DegenerateChart) => continue,
            Err(RotatedFailure::Shared) => return Err(PolyError::SharedFactor),
            Err(RotatedFailure::Newton { count, worst }) => {
                return Err(PolyError::NewtonDivergence { count, tol, worst })
            }
        }
    }
    Err(PolyError::SharedFactor)
}

enum RotatedFailure {
    DegenerateChart,
    Shared,
    Newton { count: usize, worst: f64 },
}

/// Bivariate view of a rotated section: `rows[j][i]` is the coefficient of
/// `y^j x^i` in the affine slice `w = (x, y, 1)`.
fn bivariate_rows(f: &HomogeneousPolynomial) -> Vec<Vec<Complex64>> {
    let p = f.degree;
    let mut rows = vec![vec![Complex64::new(0.0, 0.0); p + 1]; p + 1];
    for (a, c) in exponents(2, p).iter().zip(f.coeffs.iter()) {
        rows[a[1]][a[0]] += c;
    }
    rows
}

fn eval_poly(c: &[Complex64], x: Complex64) -> Complex64 {
    let mut v = Complex64::new(0.0, 0.0);
    for ck in c.iter().rev() {
        v = v * x + ck;
    }
    v
}

fn solve_rotated(
    fr: &HomogeneousPolynomial,
    gr: &HomogeneousPolynomial,
    p: usize,
    tol: f64,
) -> Result<Vec<(ProjectivePoint, u32)>, RotatedFailure> {
    let fa = bivariate_rows(fr);
    let ga = bivariate_rows(gr);
    // the y^p coefficients are constants in x; if either vanishes the chart
    // loses roots at y-infinity
    if fa[p][0].norm() < 1e-10 || ga[p][0].norm() < 1e-10 {
        return Err(RotatedFailure::DegenerateChart);
    }

    // R(x) = det Sylvester_y(F, G)(x), interpolated on roots of unity
    let nn = 2 * p * p + 1;
    let mut dets = Vec::with_capacity(nn);
    for s in 0..nn {
        let th = 2.0 * core::f64::consts::PI * s as f64 / nn as f64;
        dets.push(sylvester_det(&fa, &ga, p, Complex64::from_polar(1.0, th)));
    }
    let maxdet = dets.iter().map(|d| d.norm()).fold(0.0, f64::max);
    if maxdet <= 1e-12 {
        return Err(RotatedFailure::Shared);
    }
    let mut res = vec![Complex64::new(0.0, 0.0); nn];
    for (k, rk) in res.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (s, d) in dets.iter().enumerate() {
            let th = -2.0 * core::f64::consts::PI * ((k * s) % nn) as f64 / nn as f64;
            acc += d * Complex64::from_polar(1.0, th);
        }
        *rk = acc / nn as f64;
    }
    let maxr = res.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut deg_r = 0usize;
    for (k, c) in res.iter().enumerate() {
        if c.norm() > 1e-9 * maxr {
            deg_r = k;
        }
    }
    if deg_r == 0 {
        return Err(RotatedFailure::Shared);
    }

    let xs = univariate_roots(&res[..=deg_r]);

    // back-substitute each x-eigenvalue individually; clusters of the
    // polished pairs carry the intersection multiplicities
    let mut candidates: Vec<ProjectivePoint> = Vec::new();
    let mut failures = 0usize;
    let mut worst = 0.0f64;
    for x in xs {
        let fy: Vec<Complex64> = fa.iter().map(|row| eval_poly(row, x)).collect();
        let gy: Vec<Complex64> = ga.iter().map(|row| eval_poly(row, x)).collect();
        let ys = univariate_roots(&fy);
        let y = ys
            .into_iter()
            .min_by(|a, b| {
                let ra = eval_poly(&gy, *a).norm();
                let rb = eval_poly(&gy, *b).norm();
                ra.partial_cmp(&rb).unwrap_or(core::cmp::Ordering::Equal)
            })
            .unwrap_or(Complex64::new(0.0, 0.0));
        let (xx, yy) = newton_2x2(fr, gr, x, y);
        let mut w = vec![xx, yy, Complex64::new(1.0, 0.0)];
        num::normalize(&mut w);
        let resid = fr.evaluate_at_coords(&w).norm().max(gr.evaluate_at_coords(&w).norm());
        if resid > tol {
            failures += 1;
            worst = worst.max(resid);
            continue;
        }
        candidates.push(ProjectivePoint::new(w).unwrap());
    }
    if failures > 0 {
        return Err(RotatedFailure::Newton { count: failures, worst });
    }
    Ok(cluster_points(candidates, CLUSTER_TOL.max(10.0 * tol)))
}

fn sylvester_det(fa: &[Vec<Complex64>], ga: &[Vec<Complex64>], p: usize, x: Complex64) -> Complex64 {
    let m = 2 * p;
    let fy: Vec<Complex64> = fa.iter().map(|row| eval_poly(row, x)).collect();
    let gy: Vec<Complex64> = ga.iter().map(|row| eval_poly(row, x)).collect();
    let mut s = DMatrix::<Complex64>::zeros(m, m);
    for i in 0..p {
        for j in 0..=p {
            s[(i, i + j)] = fy[p - j];
        }
    }
    for i in 0..p {
        for j in 0..=p {
            s[(p + i, i + j)] = gy[p - j];
        }
    }
    s.lu().determinant()
}

/// Newton iteration on the affine 2x2 system with exact polynomial Jacobian.
fn newton_2x2(
    fr: &HomogeneousPolynomial,
    gr: &HomogeneousPolynomial,
    mut x: Complex64,
    mut y: Complex64,
) -> (Complex64, Complex64) {
    let fx = fr.derivative(0);
    let fy = fr.derivative(1);
    let gx = gr.derivative(0);
    let gy = gr.derivative(1);
    let one = Complex64::new(1.0, 0.0);
    let mut best = (x, y);
    let mut best_res = f64::INFINITY;
    for _ in 0..30 {
        let w = [x, y, one];
        let f0 = fr.evaluate_at_coords(&w);
        let g0 = gr.evaluate_at_coords(&w);
        let res = f0.norm().max(g0.norm());
        if res < best_res {
            best_res = res;
            best = (x, y);
        }
        let a = fx.evaluate_at_coords(&w);
        let b = fy.evaluate_at_coords(&w);
        let c = gx.evaluate_at_coords(&w);
        let d = gy.evaluate_at_coords(&w);
        let det = a * d - b * c;
        if det.norm() < 1e-30 {
            break;
        }
        let dx = (f0 * d - g0 * b) / det;
        let dy = (g0 * a - f0 * c) / det;
        x -= dx;
        y -= dy;
        if dx.norm() + dy.norm() < 1e-15 * (1.0 + x.norm() + y.norm()) {
            let w = [x, y, one];
            let res = fr.evaluate_at_coords(&w).norm().max(gr.evaluate_at_coords(&w).norm());
            if res < best_res {
                best = (x, y);
            }
            return best;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// z0*z1 on P^1 (p = 2, graded-lex coeffs for z0^2, z0 z1, z1^2)
    fn z0z1() -> HomogeneousPolynomial {
        HomogeneousPolynomial::new(1, 2, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap()
    }

    #[test]
    fn index_roundtrip() {
        for (n, p) in [(1usize, 7usize), (2, 5)] {
            let exps = exponents(n, p);
            assert_eq!(exps.len(), monomial_count(n, p));
            for (i, a) in exps.iter().enumerate() {
                assert_eq!(monomial_index(n, p, a), i, "alpha = {a:?}");
            }
        }
    }

    #[test]
    fn evaluate_examples() {
        let f = z0z1();
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let diag = ProjectivePoint::new(vec![c(s, 0.0), c(s, 0.0)]).unwrap();
        let v = f.evaluate(&diag).unwrap();
        assert!((v - c(0.5, 0.0)).norm() < 1e-14);
        let e0 = ProjectivePoint::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(f.evaluate(&e0).unwrap().norm() < 1e-15);
        // z0^2 + z1^2 vanishes at [1:i]/sqrt(2) since it factors (z0+iz1)(z0-iz1)
        let g = HomogeneousPolynomial::new(1, 2, vec![c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let xi = ProjectivePoint::new(vec![c(s, 0.0), c(0.0, s)]).unwrap();
        assert!(g.evaluate(&xi).unwrap().norm() < 1e-14);
    }

    #[test]
    fn roots_of_z0z1() {
        let z = roots_p1(&z0z1()).unwrap();
        assert_eq!(z.total_multiplicity(), 2);
        assert!(z.is_complete());
        let e0 = ProjectivePoint::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let e1 = ProjectivePoint::new(vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        for target in [e0, e1] {
            assert!(
                z.points.iter().any(|(x, m)| *m == 1 && x.approx_eq(&target, 1e-10)),
                "missing root"
            );
        }
    }

    #[test]
    fn double_root_is_clustered() {
        // (z1 - z0)^2 = z0^2 - 2 z0 z1 + z1^2
        let f = HomogeneousPolynomial::new(1, 2, vec![c(1.0, 0.0), c(-2.0, 0.0), c(1.0, 0.0)]).unwrap();
        let z = roots_p1(&f).unwrap();
        assert_eq!(z.points.len(), 1, "{:?}", z.points);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let diag = ProjectivePoint::new(vec![c(s, 0.0), c(s, 0.0)]).unwrap();
        assert!(z.points[0].0.approx_eq(&diag, 1e-7));
        assert_eq!(z.points[0].1, 2);
    }

    #[test]
    fn pure_power_root_at_infinity() {
        // z0^3 as a section of O(3): vanishing locus is z0 = 0, i.e. [0:1]
        let mut coeffs = vec![c(0.0, 0.0); 4];
        coeffs[0] = c(1.0, 0.0);
        let f = HomogeneousPolynomial::new(1, 3, coeffs).unwrap();
        let z = roots_p1(&f).unwrap();
        assert_eq!(z.points.len(), 1);
        let inf = ProjectivePoint::new(vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(z.points[0].0.approx_eq(&inf, 1e-14));
        assert_eq!(z.points[0].1, 3);
    }

    #[test]
    fn zero_polynomial_rejected() {
        let f = HomogeneousPolynomial::zero(1, 4);
        assert!(matches!(roots_p1(&f), Err(PolyError::ZeroPolynomial)));
    }

    #[test]
    fn derivative_of_z0sq_z1() {
        // d/dz0 (z0^2 z1) = 2 z0 z1
        let mut coeffs = vec![c(0.0, 0.0); 4];
        coeffs[1] = c(1.0, 0.0); // z0^2 z1 at index 1 for p=3
        let f = HomogeneousPolynomial::new(1, 3, coeffs).unwrap();
        let d = f.derivative(0);
        assert_eq!(d.degree, 2);
        assert!((d.coeffs[1] - c(2.0, 0.0)).norm() < 1e-15);
        assert!(d.coeffs[0].norm() < 1e-15 && d.coeffs[2].norm() < 1e-15);
    }

    #[test]
    fn compose_identity_is_identity() {
        let f = z0z1();
        let id = DMatrix::<Complex64>::identity(2, 2);
        let g = f.compose_linear(&id);
        for (a, b) in f.coeffs.iter().zip(g.coeffs.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn compose_matches_pointwise() {
        let mut rng = substream(3, Purpose::Test, 0, 7);
        use rand_distr::{Distribution, StandardNormal};
        let mut draw = |rng: &mut rand_chacha::ChaCha8Rng, len: usize| -> Vec<Complex64> {
            (0..len)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    c(re, im)
                })
                .collect()
        };
        for n in [1usize, 2] {
            let p = 4;
            let f = HomogeneousPolynomial::new(n, p, draw(&mut rng, monomial_count(n, p))).unwrap();
            let u = random_unitary(n + 1, &mut rng);
            let fu = f.compose_linear(&u);
            for _ in 0..20 {
                let z = draw(&mut rng, n + 1);
                let uz = crate::projective::apply_unitary(&u, &z);
                let a = fu.evaluate_at_coords(&z);
                let b = f.evaluate_at_coords(&uz);
                assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn common_zeros_linear_pair() {
        let mut f = HomogeneousPolynomial::zero(2, 1);
        f.coeffs[monomial_index(2, 1, &[1, 0, 0])] = c(1.0, 0.0); // z0
        let mut g = HomogeneousPolynomial::zero(2, 1);
        g.coeffs[monomial_index(2, 1, &[0, 1, 0])] = c(1.0, 0.0); // z1
        let z = common_zeros_p2(&f, &g, 1e-10).unwrap();
        assert_eq!(z.total_multiplicity(), 1);
        let e2 = ProjectivePoint::new(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(z.points[0].0.approx_eq(&e2, 1e-10));
    }

    #[test]
    fn common_zeros_four_points() {
        // f = z0 z1, g = (z0 - z2)(z1 - z2); the four linear 2x2 subsystems
        // give [0:1:0], [0:1:1], [1:0:1], [1:0:0], each simple
        let mut f = HomogeneousPolynomial::zero(2, 2);
        f.coeffs[monomial_index(2, 2, &[1, 1, 0])] = c(1.0, 0.0);
        let mut g = HomogeneousPolynomial::zero(2, 2);
        // (z0 - z2)(z1 - z2) = z0 z1 - z0 z2 - z1 z2 + z2^2
        g.coeffs[monomial_index(2, 2, &[1, 1, 0])] = c(1.0, 0.0);
        g.coeffs[monomial_index(2, 2, &[1, 0, 1])] = c(-1.0, 0.0);
        g.coeffs[monomial_index(2, 2, &[0, 1, 1])] = c(-1.0, 0.0);
        g.coeffs[monomial_index(2, 2, &[0, 0, 2])] = c(1.0, 0.0);
        let z = common_zeros_p2(&f, &g, 1e-9).unwrap();
        assert_eq!(z.total_multiplicity(), 4, "{:?}", z.points);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let targets = [
            vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(s, 0.0), c(s, 0.0)],
            vec![c(s, 0.0), c(0.0, 0.0), c(s, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        ];
        for t in targets {
            let t = ProjectivePoint::new(t).unwrap();
            assert!(
                z.points.iter().any(|(x, m)| *m == 1 && x.approx_eq(&t, 1e-8)),
                "missing {t:?} in {:?}",
                z.points
            );
        }
    }

    #[test]
    fn shared_factor_detected() {
        // f = z0^2, g = z0 z1 share the factor z0
        let mut f = HomogeneousPolynomial::zero(2, 2);
        f.coeffs[monomial_index(2, 2, &[2, 0, 0])] = c(1.0, 0.0);
        let mut g = HomogeneousPolynomial::zero(2, 2);
        g.coeffs[monomial_index(2, 2, &[1, 1, 0])] = c(1.0, 0.0);
        assert!(matches!(common_zeros_p2(&f, &g, 1e-10), Err(PolyError::SharedFactor)));
    }
}
