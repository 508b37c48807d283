//! Singular Hermitian metrics on `O(1)`: the Fubini-Study baseline times
//! `e^(-2 phi)` with `phi = smooth part + sum lambda_i log(|l_i(z)|/|z|)`.
//!
//! The log poles sit along unit linear forms, so on `P^1` the curvature has
//! the Lelong-Poincare closed form
//! `c_1(L,h) = (1 - sum lambda_i) omega_FS + dd^c(smooth) + sum lambda_i delta_{a_i}`,
//! which doubles as an independent cross-check of the integration-by-parts
//! pairing route. `lambda_i < 1` keeps the smooth curvature part bounded
//! below by a positive multiple of omega, which is the hypothesis the
//! positivity check estimates.

use alloc::sync::Arc;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::charts::{chart_jet, relative_eigen_min, FD_STEP};
use crate::forms::PreparedForm;
use crate::num::{self, Complex64};
use crate::projective::{GridAdaptation, ProjectivePoint, QuadratureGrid, GUARD_RADIUS};
use crate::rng::{substream, Purpose};

#[derive(Debug, Error, Clone)]
pub enum MetricError {
    #[error("lambda = {0} outside (0,1)")]
    InvalidLambda(f64),
    #[error("singular form must be a nonzero vector of length n+1")]
    BadSingularForm,
    #[error("metric lives on P^{0} but was used with dimension {1}")]
    DimensionMismatch(usize, usize),
    #[error("quadrature divergence: node at distance {dist:e} from the singular locus (guard {guard:e})")]
    QuadratureDivergence { dist: f64, guard: f64 },
    #[error("curvature is not positive: margin {margin} at a witness point")]
    NonPositive { margin: f64, witness: Vec<Complex64> },
}

/// Global smooth part of the relative weight.
#[derive(Clone)]
pub enum SmoothPart {
    Zero,
    /// `phi_s([z]) = sum_ij q_ij z_i conj(z_j) / |z|^2` with `q` Hermitian
    Quadratic(DMatrix<Complex64>),
    Custom(Arc<dyn Fn(&ProjectivePoint) -> f64 + Send + Sync>),
}

impl core::fmt::Debug for SmoothPart {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SmoothPart::Zero => f.write_str("Zero"),
            SmoothPart::Quadratic(q) => f.debug_tuple("Quadratic").field(q).finish(),
            SmoothPart::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl SmoothPart {
    pub fn eval(&self, x: &ProjectivePoint) -> f64 {
        match self {
            SmoothPart::Zero => 0.0,
            SmoothPart::Quadratic(q) => {
                let z = x.coords();
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..z.len() {
                    for j in 0..z.len() {
                        s += q[(i, j)] * z[i] * z[j].conj();
                    }
                }
                s.re
            }
            SmoothPart::Custom(f) => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SmoothPart::Zero)
    }
}

/// One log pole: `lambda * log(|l(z)|/|z|)` along the zero set of the unit
/// linear form `l`.
#[derive(Debug, Clone)]
pub struct SingularTerm {
    pub form: Vec<Complex64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct HoelderParams {
    pub c: f64,
    pub nu: f64,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct MetricWeight {
    pub n: usize,
    pub smooth: SmoothPart,
    pub singular: Vec<SingularTerm>,
    /// claimed lower bound for the curvature against omega_FS
    pub positivity_margin: f64,
    pub hoelder: HoelderParams,
}

impl MetricWeight {
    pub fn new(
        n: usize,
        smooth: SmoothPart,
        singular: Vec<(Vec<Complex64>, f64)>,
        positivity_margin: f64,
        hoelder: HoelderParams,
    ) -> Result<Self, MetricError> {
        let mut terms = Vec::with_capacity(singular.len());
        for (mut form, lambda) in singular {
            if !(lambda > 0.0 && lambda < 1.0) {
                return Err(MetricError::InvalidLambda(lambda));
            }
            if form.len() != n + 1 || !num::normalize(&mut form) {
                return Err(MetricError::BadSingularForm);
            }
            terms.push(SingularTerm { form, lambda });
        }
        Ok(Self { n, smooth, singular: terms, positivity_margin, hoelder })
    }

    pub fn fs_baseline(n: usize) -> Self {
        Self {
            n,
            smooth: SmoothPart::Zero,
            singular: Vec::new(),
            positivity_margin: 0.9,
            hoelder: HoelderParams { c: 1.0, nu: 1.0, delta: 1.0 },
        }
    }

    /// Single log pole at the zero of `form`, zero smooth part. The claimed
    /// positivity margin is the Lelong-Poincare value `1 - lambda` (slightly
    /// relaxed) and the Hoelder constants are the mean-value bound
    /// `(c, nu, delta) = (2 lambda, 1, 1)`.
    pub fn log_pole(n: usize, form: Vec<Complex64>, lambda: f64) -> Result<Self, MetricError> {
        Self::new(
            n,
            SmoothPart::Zero,
            alloc::vec![(form, lambda)],
            (1.0 - lambda) * 0.99,
            HoelderParams { c: 2.0 * lambda, nu: 1.0, delta: 1.0 },
        )
    }

    pub fn lambda_sum(&self) -> f64 {
        self.singular.iter().map(|t| t.lambda).sum()
    }

    pub fn grid_adaptation(&self) -> GridAdaptation {
        GridAdaptation { singular_forms: self.singular.iter().map(|t| t.form.clone()).collect() }
    }

    /// Chordal distance from `x` to the singular locus A (infinite when the
    /// metric is smooth): for unit forms, `|l(x)|` is exactly the chordal
    /// distance to the zero set of `l`.
    pub fn dist_to_singular(&self, x: &ProjectivePoint) -> f64 {
        self.singular
            .iter()
            .map(|t| form_value(&t.form, x.coords()).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Zeros of the singular forms as points of P^1.
    pub fn singular_points_p1(&self) -> Vec<ProjectivePoint> {
        debug_assert_eq!(self.n, 1);
        self.singular
            .iter()
            .map(|t| {
                ProjectivePoint::new(alloc::vec![t.form[1].conj(), -t.form[0].conj()]).unwrap()
            })
            .collect()
    }
}

pub(crate) fn form_value(form: &[Complex64], z: &[Complex64]) -> Complex64 {
    form.iter().zip(z.iter()).map(|(l, zi)| l * zi).sum()
}

/// The global weight `phi_g(x) = smooth(x) + sum lambda_i log|l_i(x)|` at a
/// unit representative; `-inf` exactly on the singular locus.
pub fn weight_at(h: &MetricWeight, x: &ProjectivePoint) -> f64 {
    let mut v = h.smooth.eval(x);
    for t in &h.singular {
        let m = form_value(&t.form, x.coords()).norm();
        if m == 0.0 {
            return f64::NEG_INFINITY;
        }
        v += t.lambda * m.ln();
    }
    v
}

fn guard_check(h: &MetricWeight, grid: &QuadratureGrid) -> Result<(), MetricError> {
    if h.singular.is_empty() {
        return Ok(());
    }
    for x in grid.points() {
        let d = h.dist_to_singular(x);
        if d < GUARD_RADIUS * 0.99 {
            return Err(MetricError::QuadratureDivergence { dist: d, guard: GUARD_RADIUS });
        }
    }
    Ok(())
}

/// `<c_1(L,h), u>` (paired against `omega^(n-1)` on P^2) via integration by
/// parts: `int u omega^n + int phi_g (dd^c u wedge omega^(n-1))`. The
/// possibly singular weight is integrated against the smooth dd^c of the
/// test function. Constant forms pair exactly to their value: the mass of
/// `c_1(O(1),h)` is cohomological.
pub fn curvature_pair(
    h: &MetricWeight,
    u: &PreparedForm,
    grid: &QuadratureGrid,
) -> Result<f64, MetricError> {
    if h.n != grid.n {
        return Err(MetricError::DimensionMismatch(h.n, grid.n));
    }
    if u.form.is_constant {
        return Ok(u.values[0]);
    }
    guard_check(h, grid)?;
    let mut acc = 0.0;
    for ((x, w), (uv, du)) in grid
        .points()
        .iter()
        .zip(grid.weights())
        .zip(u.values.iter().zip(u.ddc_density.iter()))
    {
        let phi = weight_at(h, x);
        acc += (uv + phi * du) * w;
    }
    Ok(acc)
}

/// Lelong-Poincare closed form on P^1, the independent cross-check path:
/// `(1 - sum lambda_i) int u omega + sum lambda_i u(a_i) + smooth correction`.
pub fn curvature_pair_lelong_p1(
    h: &MetricWeight,
    u: &PreparedForm,
    grid: &QuadratureGrid,
) -> Result<f64, MetricError> {
    if h.n != 1 || grid.n != 1 {
        return Err(MetricError::DimensionMismatch(h.n, grid.n));
    }
    if u.form.is_constant {
        return Ok(u.values[0]);
    }
    let vol: f64 = u.integral(grid);
    let mut acc = (1.0 - h.lambda_sum()) * vol;
    for (t, a) in h.singular.iter().zip(h.singular_points_p1(). iter()) {
        let _ = t;
        acc += t.lambda * u.form.eval(a);
    }
    if !h.smooth.is_zero() {
        // int smooth * dd^c u, the parts-integrated smooth correction
        let corr: f64 = grid
            .points()
            .iter()
            .zip(grid.weights())
            .zip(u.ddc_density.iter())
            .map(|((x, w), du)| h.smooth.eval(x) * du * w)
            .sum();
        acc += corr;
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
pub struct PositivityReport {
    /// smallest eigenvalue of the smooth curvature part against omega_FS
    pub margin_hat: f64,
    pub witness: ProjectivePoint,
    pub passes_declared: bool,
}

/// Estimates the minimal eigenvalue of
/// `(1 - sum lambda_i) omega + dd^c(smooth)` against `omega` over the grid
/// by finite differences; the atomic curvature parts are positive and do not
/// enter the smooth minimum.
pub fn check_positivity(
    h: &MetricWeight,
    grid: &QuadratureGrid,
) -> Result<PositivityReport, MetricError> {
    if h.n != grid.n {
        return Err(MetricError::DimensionMismatch(h.n, grid.n));
    }
    let base = 1.0 - h.lambda_sum();
    let mut margin = f64::INFINITY;
    let mut witness = grid.points()[0].clone();
    if h.smooth.is_zero() {
        margin = base;
    } else {
        let mut f = |x: &ProjectivePoint| h.smooth.eval(x);
        for x in grid.points() {
            let jet = chart_jet(&mut f, x, FD_STEP);
            let m = base + relative_eigen_min(&jet.hess);
            if m < margin {
                margin = m;
                witness = x.clone();
            }
        }
    }
    if margin <= 0.0 {
        return Err(MetricError::NonPositive { margin, witness: witness.coords().to_vec() });
    }
    Ok(PositivityReport {
        margin_hat: margin,
        witness,
        passes_declared: margin >= h.positivity_margin,
    })
}

#[derive(Debug, Clone)]
pub struct HoelderReport {
    pub passed: bool,
    /// largest observed |phi(z)-phi(w)| / bound ratio
    pub worst_ratio: f64,
    pub worst_pair: Option<(ProjectivePoint, ProjectivePoint)>,
}

/// Samples random pairs off the singular locus and checks the declared
/// Hoelder-with-singularities inequality
/// `|phi(z)-phi(w)| <= c d(z,w)^nu / min(d(z,A), d(w,A))^delta`.
pub fn check_hoelder(h: &MetricWeight, samples: usize, rng_seed: u64) -> HoelderReport {
    let samples = samples.max(100);
    let mut rng = substream(rng_seed, Purpose::Hoelder, h.n as u32, 0);
    let mut worst_ratio = 0.0f64;
    let mut worst_pair = None;
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| loop {
        let coords: Vec<Complex64> = (0..=h.n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im)
            })
            .collect();
        if let Ok(p) = ProjectivePoint::new(coords) {
            if h.dist_to_singular(&p) > 1e-12 {
                return p;
            }
        }
    };
    for _ in 0..samples {
        let z = draw(&mut rng);
        let w = draw(&mut rng);
        let lhs = (weight_at(h, &z) - weight_at(h, &w)).abs();
        let d = num::chordal(z.coords(), w.coords());
        if d == 0.0 {
            continue;
        }
        let da = h.dist_to_singular(&z).min(h.dist_to_singular(&w)).min(1.0);
        let denom = if h.hoelder.delta == 0.0 { 1.0 } else { da.powf(h.hoelder.delta) };
        let rhs = h.hoelder.c * d.powf(h.hoelder.nu) / denom;
        let ratio = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_pair = Some((z, w));
        }
    }
    HoelderReport { passed: worst_ratio <= 1.0 + 1e-9, worst_ratio, worst_pair }
}
