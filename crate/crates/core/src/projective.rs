//! Homogeneous-coordinate geometry of `P^1` and `P^2` and quadrature grids
//! for the normalized Fubini-Study volume (total mass 1).
//!
//! The `P^1` grid is a polar Gauss-Legendre product on the unit disk of the
//! affine chart `[1:t]` plus the matching disk of the chart at infinity
//! `[t:1]`; the two disks tile the sphere up to the measure-zero circle
//! `|t| = 1`. The `P^2` grid is a product of two such polar factors on each
//! of the three coordinate charts, blended by a smooth partition of unity in
//! the overlap region (max-modulus polydisks would tile exactly, but a smooth
//! blend keeps integrands smooth across chart seams).
//!
//! When a grid is built for a metric with declared singular loci it is
//! adapted: coordinates are rotated so the first singular locus sits at a
//! chart center (where the polar Jacobian absorbs the integrable
//! singularity), radial nodes are clustered toward chart centers, and a
//! guard radius of 1e-6 around every declared locus is enforced by nudging
//! offending nodes.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::num::{self, Complex64};

pub const GUARD_RADIUS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectiveError {
    #[error("projective dimension {0} not supported (only 1 and 2)")]
    InvalidDimension(usize),
    #[error("resolution {0} too small, need at least {1}")]
    ResolutionTooSmall(usize, usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero vector does not define a projective point")]
    ZeroVector,
}

/// A point of `P^n` stored as a unit-norm representative in `C^{n+1}`.
/// Two points are equal as projective points iff `|<a,b>| = 1`.
///
/// The base manifolds here are `P^1` and `P^2`, but the same type carries
/// points of the section spaces `P(H^0)` and Kodaira images in `P^(d_kp)`,
/// so any ambient dimension >= 1 is admitted.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectivePoint {
    pub(crate) coords: Vec<Complex64>,
}

impl ProjectivePoint {
    pub fn new(mut coords: Vec<Complex64>) -> Result<Self, ProjectiveError> {
        if coords.len() < 2 {
            return Err(ProjectiveError::InvalidDimension(coords.len().saturating_sub(1)));
        }
        if !num::normalize(&mut coords) {
            return Err(ProjectiveError::ZeroVector);
        }
        Ok(Self { coords })
    }

    /// Chart point `[1 : t]` of `P^1`, stable for large `|t|`.
    pub fn from_affine_p1(t: Complex64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        if t.norm() > 1.0 {
            let s = one / t;
            let mut coords = vec![s, one];
            num::normalize(&mut coords);
            Self { coords }
        } else {
            let mut coords = vec![one, t];
            num::normalize(&mut coords);
            Self { coords }
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    /// Projective equality up to phase, within `tol` in chordal distance.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim() == other.dim() && num::chordal(&self.coords, &other.coords) <= tol
    }
}

/// Chordal distance `sqrt(1 - |<a,b>|^2)`, in `[0,1]`; zero iff projectively
/// equal, one iff the representatives are orthogonal.
pub fn fs_distance(a: &ProjectivePoint, b: &ProjectivePoint) -> Result<f64, ProjectiveError> {
    if a.dim() != b.dim() {
        return Err(ProjectiveError::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(num::chordal(a.coords(), b.coords()))
}

// ---------------------------------------------------------------------------
// Unitaries
// ---------------------------------------------------------------------------

/// Deterministic unitary whose first column is the given unit vector
/// (modified Gram-Schmidt completion against the standard basis).
pub fn unitary_with_first_column(first: &[Complex64]) -> DMatrix<Complex64> {
    let n = first.len();
    let mut cols: Vec<Vec<Complex64>> = vec![first.to_vec()];
    num::normalize(&mut cols[0]);
    for k in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[k] = Complex64::new(1.0, 0.0);
        for c in &cols {
            let proj = num::inner(&v, c);
            for (vi, ci) in v.iter_mut().zip(c.iter()) {
                *vi -= proj * ci;
            }
        }
        if num::norm(&v) > 1e-6 {
            num::normalize(&mut v);
            cols.push(v);
        }
    }
    debug_assert_eq!(cols.len(), n);
    DMatrix::from_fn(n, n, |i, j| cols[j][i])
}

pub fn apply_unitary(u: &DMatrix<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            out[i] += u[(i, j)] * x[j];
        }
    }
    out
}

/// Haar-ish random unitary: QR of a complex Ginibre matrix with the phase
/// convention R_ii > 0 (Mezzadri).
pub fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    use rand_distr::{Distribution, StandardNormal};
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase.conj();
        }
    }
    q
}

// ---------------------------------------------------------------------------
// Gauss-Legendre
// ---------------------------------------------------------------------------

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // initial guess on [-1,1], refined by Newton on P_n
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map to [0,1], reversed so nodes come out ascending
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Declared singular loci a grid should be adapted to: unit coefficient
/// vectors of linear forms whose zero sets are the singular points (n=1) or
/// lines (n=2).
#[derive(Debug, Clone, Default)]
pub struct GridAdaptation {
    pub singular_forms: Vec<Vec<Complex64>>,
}

impl GridAdaptation {
    pub fn is_empty(&self) -> bool {
        self.singular_forms.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub n: usize,
    pub resolution: usize,
    points: Vec<ProjectivePoint>,
    weights: Vec<f64>,
    /// cheap content token used to sanity-check caches prepared on this grid
    tag: u64,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[ProjectivePoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tag(&self) -> u64 {
        self.tag
    }

    /// Integrates a function of the unit representative against the grid.
    pub fn integrate(&self, mut f: impl FnMut(&ProjectivePoint) -> f64) -> f64 {
        self.points
            .iter()
            .zip(self.weights.iter())
            .map(|(x, w)| f(x) * w)
            .sum()
    }

    /// Pushes the grid forward by a unitary (weights unchanged; the
    /// Fubini-Study volume is unitarily invariant).
    pub fn pushforward(&self, u: &DMatrix<Complex64>) -> QuadratureGrid {
        let points: Vec<ProjectivePoint> = self
            .points
            .iter()
            .map(|x| {
                let mut c = apply_unitary(u, x.coords());
                num::normalize(&mut c);
                ProjectivePoint { coords: c }
            })
            .collect();
        let tag = grid_tag(self.n, self.resolution, &points, &self.weights);
        QuadratureGrid { n: self.n, resolution: self.resolution, points, weights: self.weights.clone(), tag }
    }
}

fn grid_tag(n: usize, resolution: usize, points: &[ProjectivePoint], weights: &[f64]) -> u64 {
    // FNV-1a over a few determining values
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |v: u64| {
        h ^= v;
        h = h.wrapping_mul(0x100000001b3);
    };
    eat(n as u64);
    eat(resolution as u64);
    eat(points.len() as u64);
    if let Some(p) = points.first() {
        for c in p.coords() {
            eat(c.re.to_bits());
            eat(c.im.to_bits());
        }
    }
    if let Some(w) = weights.first() {
        eat(w.to_bits());
    }
    h
}

pub fn build_quadrature(n: usize, resolution: usize) -> Result<QuadratureGrid, ProjectiveError> {
    build_quadrature_adapted(n, resolution, None)
}

pub fn build_quadrature_adapted(
    n: usize,
    resolution: usize,
    adaptation: Option<&GridAdaptation>,
) -> Result<QuadratureGrid, ProjectiveError> {
    if n != 1 && n != 2 {
        return Err(ProjectiveError::InvalidDimension(n));
    }
    if resolution < 8 {
        return Err(ProjectiveError::ResolutionTooSmall(resolution, 8));
    }
    let adapted = adaptation.map(|a| !a.is_empty()).unwrap_or(false);
    let (mut points, mut weights) = match n {
        1 => build_p1(resolution, adapted),
        _ => build_p2(resolution),
    };

    if let Some(ad) = adaptation {
        if !ad.is_empty() {
            if n == 1 {
                // rotate the zero of the first singular form onto the chart
                // center [1:0]; on P^1 the orthogonal point lands on [0:1],
                // so an orthogonal second locus is handled as well
                let first = &ad.singular_forms[0];
                let zero_dir = singular_point_of_form_p1(first);
                let u = unitary_with_first_column(&zero_dir);
                for p in points.iter_mut() {
                    let mut c = apply_unitary(&u, &p.coords);
                    num::normalize(&mut c);
                    p.coords = c;
                }
            }
            enforce_guard_radius(&mut points, &ad.singular_forms);
        }
    }

    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let tag = grid_tag(n, resolution, &points, &weights);
    Ok(QuadratureGrid { n, resolution, points, weights, tag })
}

/// Unit vector spanning the zero set of a unit linear form on C^2.
fn singular_point_of_form_p1(form: &[Complex64]) -> Vec<Complex64> {
    // ker(l0 z0 + l1 z1) = span (conj(l1), -conj(l0))
    let mut v = vec![form[1].conj(), -form[0].conj()];
    num::normalize(&mut v);
    v
}

fn enforce_guard_radius(points: &mut [ProjectivePoint], forms: &[Vec<Complex64>]) {
    for p in points.iter_mut() {
        for form in forms {
            // |l(x)| is the chordal distance of x to the zero set of the
            // unit form l
            let lx: Complex64 = p
                .coords
                .iter()
                .zip(form.iter())
                .map(|(z, l)| z * l)
                .sum();
            if lx.norm() < GUARD_RADIUS {
                // move toward the point where |l| = 1, with the phase chosen
                // so the distance increases to ~2.5 guard radii
                let dir: Vec<Complex64> = form.iter().map(|l| l.conj()).collect();
                let phase = if lx.norm() > 0.0 { lx / lx.norm() } else { Complex64::new(1.0, 0.0) };
                for (c, d) in p.coords.iter_mut().zip(dir.iter()) {
                    *c += 2.5 * GUARD_RADIUS * phase * d;
                }
                num::normalize(&mut p.coords);
            }
        }
    }
}

fn build_p1(resolution: usize, cluster: bool) -> (Vec<ProjectivePoint>, Vec<f64>) {
    let (xs, xw) = gauss_legendre_01(resolution);
    let m = 2 * resolution;
    let dth = 2.0 * core::f64::consts::PI / m as f64;
    let mut points = Vec::with_capacity(2 * resolution * m);
    let mut weights = Vec::with_capacity(2 * resolution * m);
    for chart in 0..2usize {
        for (x, wx) in xs.iter().zip(xw.iter()) {
            // optional cubic clustering toward the chart center r = 0, where
            // adapted grids put the singular point
            let (r, dr) = if cluster { (x * x * x, 3.0 * x * x * wx) } else { (*x, *wx) };
            let dens = (1.0 / core::f64::consts::PI) * (1.0 + r * r).powi(-2) * r;
            for j in 0..m {
                let th = dth * (j as f64 + 0.5);
                let t = Complex64::from_polar(r, th);
                let coords = if chart == 0 {
                    vec![Complex64::new(1.0, 0.0), t]
                } else {
                    vec![t, Complex64::new(1.0, 0.0)]
                };
                let mut c = coords;
                num::normalize(&mut c);
                points.push(ProjectivePoint { coords: c });
                weights.push(dens * dr * dth);
            }
        }
    }
    (points, weights)
}

/// Smooth cutoff: 1 on [0,1], 0 beyond `P2_CHART_RADIUS`, C-infinity between.
fn chart_bump(x: f64) -> f64 {
    const R: f64 = P2_CHART_RADIUS;
    if x <= 1.0 {
        1.0
    } else if x >= R {
        0.0
    } else {
        let y = (R - x) / (R - 1.0);
        let q = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
        q(y) / (q(y) + q(1.0 - y))
    }
}

pub const P2_CHART_RADIUS: f64 = 1.4;

fn partition_weight(coords: &[Complex64], chart: usize) -> f64 {
    let mags: Vec<f64> = coords.iter().map(|c| c.norm()).collect();
    let chi = |j: usize| -> f64 {
        if mags[j] == 0.0 {
            return 0.0;
        }
        let mut v = 1.0;
        for (l, mag) in mags.iter().enumerate() {
            if l != j {
                v *= chart_bump(mag / mags[j]);
            }
        }
        v
    };
    let total: f64 = (0..3).map(chi).sum();
    chi(chart) / total
}

fn build_p2(resolution: usize) -> (Vec<ProjectivePoint>, Vec<f64>) {
    let (xs, xw) = gauss_legendre_01(resolution);
    let m = 2 * resolution;
    let dth = 2.0 * core::f64::consts::PI / m as f64;
    let r_max = P2_CHART_RADIUS;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for chart in 0..3usize {
        for (x1, w1) in xs.iter().zip(xw.iter()) {
            let r1 = r_max * x1;
            let dr1 = r_max * w1;
            for (x2, w2) in xs.iter().zip(xw.iter()) {
                let r2 = r_max * x2;
                let dr2 = r_max * w2;
                let dens = (2.0 / (core::f64::consts::PI * core::f64::consts::PI))
                    * (1.0 + r1 * r1 + r2 * r2).powi(-3)
                    * r1
                    * r2;
                for j1 in 0..m {
                    let th1 = dth * (j1 as f64 + 0.5);
                    let u = Complex64::from_polar(r1, th1);
                    for j2 in 0..m {
                        let th2 = dth * (j2 as f64 + 0.25);
                        let v = Complex64::from_polar(r2, th2);
                        let mut coords = vec![Complex64::new(0.0, 0.0); 3];
                        coords[chart] = Complex64::new(1.0, 0.0);
                        coords[(chart + 1) % 3] = u;
                        coords[(chart + 2) % 3] = v;
                        let chi = partition_weight(&coords, chart);
                        if chi == 0.0 {
                            continue;
                        }
                        num::normalize(&mut coords);
                        points.push(ProjectivePoint { coords });
                        weights.push(dens * dr1 * dr2 * dth * dth * chi);
                    }
                }
            }
        }
    }
    (points, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Purpose};

    fn p(coords: &[(f64, f64)]) -> ProjectivePoint {
        ProjectivePoint::new(coords.iter().map(|&(r, i)| Complex64::new(r, i)).collect()).unwrap()
    }

    #[test]
    fn point_is_normalized_and_phase_invariant() {
        let a = p(&[(3.0, 0.0), (4.0, 0.0)]);
        assert!((num::norm(a.coords()) - 1.0).abs() < 1e-12);
        let b = p(&[(0.0, 3.0), (0.0, 4.0)]); // i * a
        assert!(a.approx_eq(&b, 1e-12));
    }

    #[test]
    fn fs_distance_examples() {
        let e0 = p(&[(1.0, 0.0), (0.0, 0.0)]);
        let e1 = p(&[(0.0, 0.0), (1.0, 0.0)]);
        let diag = p(&[(1.0, 0.0), (1.0, 0.0)]);
        assert_eq!(fs_distance(&e0, &e1).unwrap(), 1.0);
        assert_eq!(fs_distance(&e0, &e0).unwrap(), 0.0);
        let d = fs_distance(&e0, &diag).unwrap();
        assert!((d - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12, "d = {d}");
        let q = ProjectivePoint::new(vec![Complex64::new(1.0, 0.0); 3]).unwrap();
        assert!(matches!(fs_distance(&e0, &q), Err(ProjectiveError::DimensionMismatch(1, 2))));
    }

    #[test]
    fn triangle_inequality_chordal() {
        for n in [1usize, 2] {
            let mut rng = substream(11, Purpose::Test, n as u32, 0);
            use rand_distr::{Distribution, StandardNormal};
            let draw = |rng: &mut ChaCha8Rng| {
                let coords: Vec<Complex64> = (0..=n)
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        Complex64::new(re, im)
                    })
                    .collect();
                ProjectivePoint::new(coords).unwrap()
            };
            for _ in 0..10_000 {
                let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
                let ab = fs_distance(&a, &b).unwrap();
                let bc = fs_distance(&b, &c).unwrap();
                let ac = fs_distance(&a, &c).unwrap();
                assert!(ac <= ab + bc + 1e-12);
            }
        }
    }

    #[test]
    fn grid_mass_is_one() {
        let g = build_quadrature(1, 64).unwrap();
        let mass: f64 = g.weights().iter().sum();
        assert!((mass - 1.0).abs() < 1e-9);
        let g2 = build_quadrature(2, 10).unwrap();
        let mass2: f64 = g2.weights().iter().sum();
        assert!((mass2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(matches!(build_quadrature(3, 32), Err(ProjectiveError::InvalidDimension(3))));
        assert!(matches!(build_quadrature(1, 4), Err(ProjectiveError::ResolutionTooSmall(4, 8))));
    }

    #[test]
    fn coordinate_moment_p1() {
        // by exchangeability of the two coordinates the integral is 1/2
        let g = build_quadrature(1, 64).unwrap();
        let v = g.integrate(|x| x.coords()[0].norm_sqr());
        assert!((v - 0.5).abs() < 1e-6, "v = {v}");
    }

    #[test]
    fn coordinate_moment_p2() {
        let g = build_quadrature(2, 12).unwrap();
        let v = g.integrate(|x| x.coords()[0].norm_sqr());
        assert!((v - 1.0 / 3.0).abs() < 1e-5, "v = {v}");
    }

    /// Brute-force radial oracle for the log integral:
    /// int log(|z0|/|z|) w_FS = int_0^inf -1/2 log(1+r^2) * 2r(1+r^2)^-2 dr.
    fn log_moment_oracle() -> f64 {
        let n = 400_000;
        // substitute r = s/(1-s) to compactify
        let mut acc = 0.0;
        for i in 0..n {
            let s = (i as f64 + 0.5) / n as f64;
            let r = s / (1.0 - s);
            let jac = 1.0 / ((1.0 - s) * (1.0 - s));
            let f = -0.5 * (1.0 + r * r).ln() * 2.0 * r * (1.0 + r * r).powi(-2);
            acc += f * jac / n as f64;
        }
        acc
    }

    #[test]
    fn log_moment_p1() {
        let oracle = log_moment_oracle();
        assert!((oracle + 0.5).abs() < 1e-6, "oracle = {oracle}"); // closed form -1/2
        let g = build_quadrature(1, 64).unwrap();
        let v = g.integrate(|x| (x.coords()[0].norm() / num::norm(x.coords())).ln());
        assert!((v - oracle).abs() < 1e-4, "v = {v}, oracle = {oracle}");
    }

    #[test]
    fn refinement_decreases_error_monotonically() {
        // smooth test family: |z0|^2/|z|^2 (exact 1/2) and the log moment
        let mut errs = Vec::new();
        for res in [8usize, 16, 32, 64] {
            let g = build_quadrature(1, res).unwrap();
            let e1 = (g.integrate(|x| x.coords()[0].norm_sqr()) - 0.5).abs();
            let e2 = (g.integrate(|x| (x.coords()[0].norm() / num::norm(x.coords())).ln()) + 0.5).abs();
            errs.push(e1.max(e2));
        }
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "errors not monotone: {errs:?}");
        }
    }

    #[test]
    fn richardson_drift_bidegree_4() {
        // fixed polynomial integrand of bidegree (4,4) in coords/conjugates
        let f = |x: &ProjectivePoint| {
            let c = x.coords();
            let z = c[0] * c[1].conj();
            (z.powu(4)).re + c[0].norm_sqr().powi(2) * c[1].norm_sqr().powi(2)
        };
        let mut drift = Vec::new();
        let mut prev: Option<f64> = None;
        for res in [8usize, 16, 32, 64] {
            let v = build_quadrature(1, res).unwrap().integrate(f);
            if let Some(p) = prev {
                drift.push((v - p).abs());
            }
            prev = Some(v);
        }
        // fit C on the coarsest drift; successive drifts must obey <= C/r^2
        let c = drift[0] * 8.0f64.powi(2) + 1e-12;
        assert!(drift[1] <= c / 16.0f64.powi(2) + 1e-12, "{drift:?}");
        assert!(drift[2] <= c / 32.0f64.powi(2) + 1e-12, "{drift:?}");
    }

    #[test]
    fn unitary_invariance_of_integrals() {
        for (n, res, tol) in [(1usize, 48usize, 1e-6), (2, 10, 2e-4)] {
            let g = build_quadrature(n, res).unwrap();
            let mut rng = substream(23, Purpose::Test, n as u32, 1);
            let u = random_unitary(n + 1, &mut rng);
            let gu = g.pushforward(&u);
            for k in 0..=n {
                let f = |x: &ProjectivePoint| x.coords()[k].norm_sqr();
                let a = g.integrate(f);
                let b = gu.integrate(f);
                assert!((a - b).abs() < tol, "n={n} k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn adapted_grid_respects_guard_radius_and_mass() {
        // singular point at [1:1]/sqrt(2): form (1, -1)/sqrt(2) vanishes there
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let form = vec![Complex64::new(s, 0.0), Complex64::new(-s, 0.0)];
        let ad = GridAdaptation { singular_forms: vec![form.clone()] };
        let g = build_quadrature_adapted(1, 32, Some(&ad)).unwrap();
        let mass: f64 = g.weights().iter().sum();
        assert!((mass - 1.0).abs() < 1e-9);
        for x in g.points() {
            let lx: Complex64 = x.coords().iter().zip(form.iter()).map(|(z, l)| z * l).sum();
            assert!(lx.norm() >= GUARD_RADIUS);
        }
        // adapted grid still integrates smooth functions correctly
        let v = g.integrate(|x| x.coords()[0].norm_sqr());
        assert!((v - 0.5).abs() < 1e-6, "v = {v}");
    }

    #[test]
    fn no_repeated_points_small_grid() {
        let g = build_quadrature(1, 8).unwrap();
        for (i, a) in g.points().iter().enumerate() {
            for b in g.points().iter().skip(i + 1) {
                assert!(fs_distance(a, b).unwrap() > 1e-10);
            }
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = substream(5, Purpose::Test, 0, 2);
        let u = random_unitary(3, &mut rng);
        let id = u.adjoint() * &u;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }
}
