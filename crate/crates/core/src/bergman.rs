//! The L2-Bergman space of sections of `O(p)` under a singular weight, its
//! orthonormal basis, kernel, Kodaira map and Fubini-Study current.
//!
//! Membership in the L2 space is decided analytically, not by quadrature:
//! `|s|^2 dist^(-2 p lambda)` is area-integrable iff the vanishing order k
//! along the pole satisfies `2k - 2 p lambda > -2`, so the space is the span
//! of monomials surviving the order cut (in coordinates aligned with the
//! singular locus). The cut is realised uniformly as the nullspace of exact
//! linear constraints: for a pole along the unit form `l`, rotate by the
//! unitary sending `l` to the coordinate form `w0` and require the first
//! `k_min` groups of rotated coefficients to vanish. Reduced row echelon
//! form of the constraints names the surviving (standard) monomials, which
//! is the `admissible` list.
//!
//! Gram matrices are assembled in the FS-orthonormal (square-root
//! multinomial) scaling, where the full space has Gram proportional to the
//! identity; orthonormalization is by Hermitian eigendecomposition with a
//! relative eigenvalue floor of 1e-12, below which the build refuses to
//! emit sections.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::forms::PreparedForm;
use crate::metrics::{curvature_pair, weight_at, MetricError, MetricWeight};
use crate::num::{self, Complex64};
use crate::polynomials::{
    exponents, monomial_count, monomial_values, multinomial_sqrt, HomogeneousPolynomial,
};
use crate::projective::{unitary_with_first_column, ProjectivePoint, QuadratureGrid};

pub const GRAM_CONDITION_LIMIT: f64 = 1e10;
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone)]
pub enum BergmanError {
    #[error("no admissible monomials: the L2 space is empty")]
    EmptySpace,
    #[error("Gram matrix condition {condition:e} exceeds {limit:e} (quadrature under-resolved near the singular locus)")]
    IllConditionedGram { condition: f64, limit: f64 },
    #[error("point lies in the base locus of the L2 space")]
    BaseLocusPoint,
    #[error("grid dimension {grid} does not match metric dimension {metric}")]
    GridMismatch { grid: usize, metric: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Required vanishing orders along each singular locus: the smallest integer
/// `k > p lambda - 1` (so `k = p lambda` exactly at the integer edge).
pub fn min_vanishing_orders(p: usize, h: &MetricWeight) -> Vec<(Vec<Complex64>, u32)> {
    h.singular
        .iter()
        .map(|t| {
            let t_val = p as f64 * t.lambda;
            let k = if (t_val - t_val.round()).abs() < 1e-9 {
                t_val.round() as u32
            } else {
                t_val.floor() as u32
            };
            (t.form.clone(), k)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BergmanBasis {
    pub p: usize,
    pub metric: MetricWeight,
    /// surviving (standard) monomial indices of the order cut
    pub admissible: Vec<usize>,
    /// orthonormal section coefficients over plain monomials, one column per
    /// section
    pub sections: DMatrix<Complex64>,
    pub gram_condition: f64,
    /// loci carrying a positive vanishing order, with that order
    pub base_locus: Vec<(Vec<Complex64>, u32)>,
    pub grid_resolution: usize,
}

impl BergmanBasis {
    pub fn dim(&self) -> usize {
        self.sections.ncols()
    }

    pub fn d_kp(&self) -> usize {
        self.dim() - 1
    }

    pub fn n(&self) -> usize {
        self.metric.n
    }

    /// Dimension sandwich `p^n / c <= d_kp <= c p^n`.
    pub fn dimension_bounds_hold(&self, c: f64) -> bool {
        let pn = (self.p as f64).powi(self.n() as i32);
        let d = self.d_kp() as f64;
        pn / c <= d && d <= c * pn
    }

    /// Plain values of all orthonormal sections at a unit representative.
    pub fn section_values_at(&self, x: &ProjectivePoint) -> Vec<Complex64> {
        let vals = monomial_values(self.n(), self.p, x.coords());
        let dim = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (alpha, v) in vals.iter().enumerate() {
            if v.norm() == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.sections[(alpha, j)] * v;
            }
        }
        out
    }

    /// The section with coefficients `c` in the orthonormal basis, as a
    /// polynomial in plain monomial coordinates.
    pub fn section_from_coeffs(&self, c: &[Complex64]) -> HomogeneousPolynomial {
        debug_assert_eq!(c.len(), self.dim());
        let rows = self.sections.nrows();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); rows];
        for (j, cj) in c.iter().enumerate() {
            if cj.norm() == 0.0 {
                continue;
            }
            for (alpha, out) in coeffs.iter_mut().enumerate() {
                *out += self.sections[(alpha, j)] * cj;
            }
        }
        HomogeneousPolynomial { n: self.n(), degree: self.p, coeffs }
    }
}

/// Constraint rows forcing vanishing order `k` along the zero set of the
/// unit form `l`: rows of the degree-p representation matrix of the unitary
/// aligning `l` with the coordinate `w0`, at monomials with `alpha_0 < k`.
fn order_constraints(n: usize, p: usize, form: &[Complex64], k: u32) -> Vec<Vec<Complex64>> {
    if k == 0 {
        return Vec::new();
    }
    let v0: Vec<Complex64> = form.iter().map(|l| l.conj()).collect();
    let v = unitary_with_first_column(&v0);
    let exps = exponents(n, p);
    let count = monomial_count(n, p);
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    let mut row_index = Vec::new();
    for (i, a) in exps.iter().enumerate() {
        if a[0] < k as usize {
            row_index.push(i);
            rows.push(vec![Complex64::new(0.0, 0.0); count]);
        }
    }
    for col in 0..count {
        let mut mono = HomogeneousPolynomial::zero(n, p);
        mono.coeffs[col] = Complex64::new(1.0, 0.0);
        let rotated = mono.compose_linear(&v);
        for (r, &beta) in row_index.iter().enumerate() {
            rows[r][col] = rotated.coeffs[beta];
        }
    }
    rows
}

/// Reduced row echelon nullspace over the complex numbers: returns the
/// standard (non-pivot) column indices and a kernel basis with those columns
/// as free variables.
fn rref_nullspace(mut rows: Vec<Vec<Complex64>>, dim: usize) -> (Vec<usize>, DMatrix<Complex64>) {
    let tol = 1e-10;
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut r = 0usize;
    for col in 0..dim {
        if r >= rows.len() {
            break;
        }
        let (imax, vmax) = (r..rows.len())
            .map(|i| (i, rows[i][col].norm()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap_or((r, 0.0));
        if vmax <= tol {
            continue;
        }
        rows.swap(r, imax);
        let piv = rows[r][col];
        for v in rows[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..rows.len() {
            if i != r {
                let factor = rows[i][col];
                if factor.norm() > 0.0 {
                    let (row_i, row_r) = if i < r {
                        let (a, b) = rows.split_at_mut(r);
                        (&mut a[i], &b[0])
                    } else {
                        let (a, b) = rows.split_at_mut(i);
                        (&mut b[0], &a[r])
                    };
                    for (x, y) in row_i.iter_mut().zip(row_r.iter()) {
                        *x -= factor * y;
                    }
                }
            }
        }
        pivots.push((r, col));
        r += 1;
    }
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let standard: Vec<usize> = (0..dim).filter(|c| !pivot_cols.contains(c)).collect();
    let mut kernel = DMatrix::<Complex64>::zeros(dim, standard.len());
    for (j, &s) in standard.iter().enumerate() {
        kernel[(s, j)] = Complex64::new(1.0, 0.0);
        for &(pr, pc) in &pivots {
            kernel[(pc, j)] = -rows[pr][s];
        }
    }
    (standard, kernel)
}

/// Builds the orthonormal L2 basis at level `p` by quadrature Gram assembly
/// on `grid` followed by Hermitian eigendecomposition.
pub fn build_basis(
    p: usize,
    h: &MetricWeight,
    grid: &QuadratureGrid,
) -> Result<BergmanBasis, BergmanError> {
    if grid.n != h.n {
        return Err(BergmanError::GridMismatch { grid: grid.n, metric: h.n });
    }
    let n = h.n;
    let count = monomial_count(n, p);
    let orders = min_vanishing_orders(p, h);
    let base_locus: Vec<(Vec<Complex64>, u32)> =
        orders.iter().filter(|(_, k)| *k > 0).cloned().collect();

    let mut constraints: Vec<Vec<Complex64>> = Vec::new();
    for (form, k) in &orders {
        constraints.extend(order_constraints(n, p, form, *k));
    }
    let (admissible, kernel) = if constraints.is_empty() {
        ((0..count).collect(), DMatrix::<Complex64>::identity(count, count))
    } else {
        rref_nullspace(constraints, count)
    };
    let dim = admissible.len();
    if dim == 0 {
        return Err(BergmanError::EmptySpace);
    }

    // move to the FS-orthonormal monomial scaling and pre-orthonormalize the
    // kernel columns there (exact linear algebra; for aligned loci the
    // kernel is already a monomial selection and this is a no-op)
    let scale = multinomial_sqrt(n, p);
    let mut khat = kernel;
    for alpha in 0..count {
        for j in 0..dim {
            khat[(alpha, j)] /= scale[alpha];
        }
    }
    let khat = gram_schmidt_columns(khat);
    let selection: Option<Vec<usize>> = monomial_selection(&khat);

    // Gram assembly with weight e^{-2 p phi_g}
    let mut gram = DMatrix::<Complex64>::zeros(dim, dim);
    let singular = !h.singular.is_empty();
    let mut values = vec![Complex64::new(0.0, 0.0); dim];
    for (x, w) in grid.points().iter().zip(grid.weights()) {
        let vals = monomial_values(n, p, x.coords());
        match &selection {
            Some(sel) => {
                for (j, &alpha) in sel.iter().enumerate() {
                    values[j] = vals[alpha] * scale[alpha];
                }
            }
            None => {
                for (j, v) in values.iter_mut().enumerate() {
                    *v = Complex64::new(0.0, 0.0);
                    for alpha in 0..count {
                        let kc = khat[(alpha, j)];
                        if kc.norm() > 0.0 {
                            *v += kc * vals[alpha] * scale[alpha];
                        }
                    }
                }
            }
        }
        let weight = if singular {
            // rescale before exponentiating: the weight alone can overflow
            // next to a pole even though the products stay in range
            let phi = weight_at(h, x);
            let m = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if m == 0.0 {
                continue;
            }
            let amp = ((-(p as f64)) * phi + m.ln()).exp();
            for v in values.iter_mut() {
                *v = (*v / m) * amp;
            }
            *w
        } else {
            let phi = h.smooth.eval(x);
            ((-2.0 * p as f64) * phi).exp() * *w
        };
        for i in 0..dim {
            let vi = values[i];
            for j in i..dim {
                gram[(i, j)] += vi * values[j].conj() * weight;
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)].conj();
        }
    }

    let eig = nalgebra::linalg::SymmetricEigen::new(gram);
    let lmax = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if !(lmin > EIGENVALUE_FLOOR * lmax) || condition > GRAM_CONDITION_LIMIT {
        return Err(BergmanError::IllConditionedGram { condition, limit: GRAM_CONDITION_LIMIT });
    }

    let mut mix = eig.eigenvectors;
    for j in 0..dim {
        let inv = 1.0 / eig.eigenvalues[j].sqrt();
        for i in 0..dim {
            mix[(i, j)] *= inv;
        }
    }
    let mut sections = khat * mix;
    for alpha in 0..count {
        for j in 0..dim {
            sections[(alpha, j)] *= scale[alpha];
        }
    }

    Ok(BergmanBasis {
        p,
        metric: h.clone(),
        admissible,
        sections,
        gram_condition: condition,
        base_locus,
        grid_resolution: grid.resolution,
    })
}

fn gram_schmidt_columns(mut m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (rows, cols) = m.shape();
    for j in 0..cols {
        for k in 0..j {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in 0..rows {
                dot += m[(i, j)] * m[(i, k)].conj();
            }
            for i in 0..rows {
                let sub = dot * m[(i, k)];
                m[(i, j)] -= sub;
            }
        }
        let nrm: f64 = (0..rows).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..rows {
            m[(i, j)] /= nrm;
        }
    }
    m
}

/// Detects a pure monomial selection (each column a single unit entry), the
/// fast path for coordinate-aligned loci.
fn monomial_selection(m: &DMatrix<Complex64>) -> Option<Vec<usize>> {
    let (rows, cols) = m.shape();
    let mut sel = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut found = None;
        for i in 0..rows {
            let v = m[(i, j)].norm();
            if v > 1e-14 {
                if found.is_some() || (v - 1.0).abs() > 1e-12 {
                    return None;
                }
                found = Some(i);
            }
        }
        sel.push(found?);
    }
    Some(sel)
}

/// log of the Bergman kernel `P(x) = sum_j |S_j(x)|^2 e^(-2 p phi_g(x))`,
/// computed in the log domain so poles and base loci stay in range;
/// `-inf` exactly on the base locus.
pub fn ln_bergman_kernel_at(b: &BergmanBasis, x: &ProjectivePoint) -> f64 {
    let phi = weight_at(&b.metric, x);
    if phi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let vals = b.section_values_at(x);
    let m = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if m == 0.0 {
        return f64::NEG_INFINITY;
    }
    let s: f64 = vals.iter().map(|v| (v / m).norm_sqr()).sum();
    2.0 * (m.ln() - (b.p as f64) * phi) + s.ln()
}

pub fn bergman_kernel_at(b: &BergmanBasis, x: &ProjectivePoint) -> f64 {
    let l = ln_bergman_kernel_at(b, x);
    if l == f64::NEG_INFINITY {
        0.0
    } else {
        l.exp()
    }
}

/// `<gamma_p, u> = p <c_1(L,h), u> + 1/2 int log P dd^c u`, the pairing of
/// the Fubini-Study current of the basis against a C2 form.
pub fn fs_current_pair(
    b: &BergmanBasis,
    u: &PreparedForm,
    grid: &QuadratureGrid,
) -> Result<f64, BergmanError> {
    let base = (b.p as f64) * curvature_pair(&b.metric, u, grid)?;
    if u.form.is_constant {
        // dd^c of a constant vanishes identically; the mass is p
        return Ok(base);
    }
    let mut corr = 0.0;
    for ((x, w), du) in grid.points().iter().zip(grid.weights()).zip(u.ddc_density.iter()) {
        if *du == 0.0 {
            continue;
        }
        corr += ln_bergman_kernel_at(b, x) * du * w;
    }
    Ok(base + 0.5 * corr)
}

/// The Kodaira map `x -> [s_0(x) : ... : s_d(x)]` in `P^(d_kp)`.
pub fn kodaira_map(b: &BergmanBasis, x: &ProjectivePoint) -> Result<ProjectivePoint, BergmanError> {
    for (form, _) in &b.base_locus {
        if crate::metrics::form_value(form, x.coords()).norm() == 0.0 {
            return Err(BergmanError::BaseLocusPoint);
        }
    }
    let vals = b.section_values_at(x);
    if num::norm_sqr(&vals) < 1e-280 {
        return Err(BergmanError::BaseLocusPoint);
    }
    ProjectivePoint::new(vals).map_err(|_| BergmanError::BaseLocusPoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::TestForm;
    use crate::projective::{build_quadrature, build_quadrature_adapted, fs_distance};
    use crate::rng::{substream, Purpose};

    fn z0_form() -> Vec<Complex64> {
        // z0 vanishes at [0:1]
        vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
    }

    fn grid_for(h: &MetricWeight, p: usize) -> QuadratureGrid {
        let res = 32.max(p + 8);
        build_quadrature_adapted(h.n, res, Some(&h.grid_adaptation())).unwrap()
    }

    #[test]
    fn vanishing_order_rule() {
        let h25 = MetricWeight::log_pole(1, z0_form(), 0.25).unwrap();
        assert_eq!(min_vanishing_orders(10, &h25)[0].1, 2); // p lambda = 2.5
        let h30 = MetricWeight::log_pole(1, z0_form(), 0.3).unwrap();
        assert_eq!(min_vanishing_orders(10, &h30)[0].1, 3); // integer edge
        let tiny = MetricWeight::log_pole(1, z0_form(), 0.05).unwrap();
        assert_eq!(min_vanishing_orders(10, &tiny)[0].1, 0); // no constraint
    }

    #[test]
    fn fs_basis_dimensions() {
        let h = MetricWeight::fs_baseline(1);
        let grid = grid_for(&h, 2);
        let b = build_basis(2, &h, &grid).unwrap();
        assert_eq!(b.dim(), 3);
        assert_eq!(b.d_kp(), 2);
        assert!(b.base_locus.is_empty());
        assert!(b.dimension_bounds_hold(2.0));
    }

    #[test]
    fn singular_dimension_law() {
        // dim = p + 1 - k_min, integer-exact; base locus is the declared pole
        for (lambda, expect_dim) in [(0.25, 9usize), (0.3, 8)] {
            let h = MetricWeight::log_pole(1, z0_form(), lambda).unwrap();
            let grid = grid_for(&h, 10);
            let b = build_basis(10, &h, &grid).unwrap();
            assert_eq!(b.dim(), expect_dim, "lambda = {lambda}");
            assert_eq!(b.base_locus.len(), 1);
            // admissible monomials vanish at [0:1] to the required order:
            // z0^(p-k) z1^k vanishes there to order p - k
            let k_min = 11 - expect_dim;
            for &idx in &b.admissible {
                assert!(10 - idx >= k_min, "admissible idx {idx}");
            }
        }
    }

    #[test]
    fn empty_space_detected() {
        let e1 = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let h = MetricWeight::new(
            1,
            crate::metrics::SmoothPart::Zero,
            vec![(z0_form(), 0.9), (e1, 0.9)],
            0.05,
            crate::metrics::HoelderParams { c: 4.0, nu: 1.0, delta: 1.0 },
        )
        .unwrap();
        let grid = grid_for(&h, 10);
        assert!(matches!(build_basis(10, &h, &grid), Err(BergmanError::EmptySpace)));
    }

    #[test]
    fn fs_kernel_is_constant_p_plus_one() {
        for p in [2usize, 5, 10] {
            let h = MetricWeight::fs_baseline(1);
            let grid = grid_for(&h, p);
            let b = build_basis(p, &h, &grid).unwrap();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for x in grid.points().iter().step_by(7) {
                let v = bergman_kernel_at(&b, x);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            assert!((hi / lo - 1.0).abs() < 1e-5, "p={p}: ratio {}", hi / lo);
            assert!((hi - (p as f64 + 1.0)).abs() < 1e-5, "p={p}: {hi}");
        }
    }

    #[test]
    fn kernel_trace_equals_dimension() {
        let cases =
            [MetricWeight::fs_baseline(1), MetricWeight::log_pole(1, z0_form(), 0.25).unwrap()];
        for h in cases {
            let grid = grid_for(&h, 10);
            let b = build_basis(10, &h, &grid).unwrap();
            let trace: f64 = grid
                .points()
                .iter()
                .zip(grid.weights())
                .map(|(x, w)| bergman_kernel_at(&b, x) * w)
                .sum();
            assert!((trace - b.dim() as f64).abs() < 1e-4, "trace {trace} vs dim {}", b.dim());
        }
    }

    fn orthonormality_residual(b: &BergmanBasis, grid: &QuadratureGrid) -> f64 {
        let dim = b.dim();
        let p = b.p as f64;
        let mut gram = DMatrix::<Complex64>::zeros(dim, dim);
        for (x, w) in grid.points().iter().zip(grid.weights()) {
            let phi = weight_at(&b.metric, x);
            if phi == f64::NEG_INFINITY {
                continue;
            }
            let vals = b.section_values_at(x);
            let weight = (-2.0 * p * phi).exp() * w;
            for i in 0..dim {
                for j in 0..dim {
                    gram[(i, j)] += vals[i] * vals[j].conj() * weight;
                }
            }
        }
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - Complex64::new(expect, 0.0)).norm());
            }
        }
        worst
    }

    #[test]
    fn orthonormality_on_build_and_finer_grid() {
        let cases = [
            MetricWeight::fs_baseline(1),
            MetricWeight::log_pole(1, z0_form(), 0.25).unwrap(),
            MetricWeight::log_pole(1, z0_form(), 0.3).unwrap(),
        ];
        for h in cases {
            let grid = grid_for(&h, 10);
            let b = build_basis(10, &h, &grid).unwrap();
            let r_build = orthonormality_residual(&b, &grid);
            assert!(r_build < 1e-6, "build residual {r_build}");
            let finer =
                build_quadrature_adapted(1, 2 * grid.resolution, Some(&h.grid_adaptation()))
                    .unwrap();
            let r_fine = orthonormality_residual(&b, &finer);
            assert!(r_fine < 1e-4, "finer-grid residual {r_fine}");
        }
    }

    #[test]
    fn kernel_invariant_under_basis_rotation() {
        let h = MetricWeight::log_pole(1, z0_form(), 0.25).unwrap();
        let grid = grid_for(&h, 8);
        let b = build_basis(8, &h, &grid).unwrap();
        let mut rng = substream(9, Purpose::Test, 8, 3);
        let u = crate::projective::random_unitary(b.dim(), &mut rng);
        let mut rotated = b.clone();
        rotated.sections = &b.sections * &u;
        for x in grid.points().iter().step_by(101) {
            let a = bergman_kernel_at(&b, x);
            let c = bergman_kernel_at(&rotated, x);
            assert!((a - c).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {c}");
        }
    }

    #[test]
    fn base_locus_behaviour() {
        let h = MetricWeight::log_pole(1, z0_form(), 0.25).unwrap();
        let grid = grid_for(&h, 10);
        let b = build_basis(10, &h, &grid).unwrap();
        let pole =
            ProjectivePoint::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        assert_eq!(bergman_kernel_at(&b, &pole), 0.0);
        assert!(matches!(kodaira_map(&b, &pole), Err(BergmanError::BaseLocusPoint)));
        // off the base locus the map recovers P(x) as the squared norm
        let x = ProjectivePoint::new(vec![Complex64::new(0.8, 0.1), Complex64::new(0.5, -0.2)])
            .unwrap();
        let vals = b.section_values_at(&x);
        let phi = weight_at(&b.metric, &x);
        let norm2: f64 = vals.iter().map(|v| v.norm_sqr()).sum::<f64>() * (-2.0 * 10.0 * phi).exp();
        assert!((norm2 - bergman_kernel_at(&b, &x)).abs() < 1e-8 * norm2);
        assert!(kodaira_map(&b, &x).is_ok());
    }

    #[test]
    fn kodaira_degree_one_is_injective() {
        let h = MetricWeight::fs_baseline(1);
        let grid = grid_for(&h, 1);
        let b = build_basis(1, &h, &grid).unwrap();
        let mut rng = substream(17, Purpose::Test, 1, 4);
        use rand_distr::{Distribution, StandardNormal};
        let mut draw = || {
            let coords: Vec<Complex64> = (0..2)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im)
                })
                .collect();
            ProjectivePoint::new(coords).unwrap()
        };
        for _ in 0..50 {
            let x = draw();
            let y = draw();
            let dxy = fs_distance(&x, &y).unwrap();
            if dxy < 1e-3 {
                continue;
            }
            let fx = kodaira_map(&b, &x).unwrap();
            let fy = kodaira_map(&b, &y).unwrap();
            assert!(fs_distance(&fx, &fy).unwrap() > 0.0);
        }
    }

    #[test]
    fn fs_current_pair_examples() {
        let h = MetricWeight::fs_baseline(1);
        let grid = grid_for(&h, 10);
        let b = build_basis(10, &h, &grid).unwrap();
        let p = 10.0;
        // mass: u = 1 pairs to p exactly
        let one = TestForm::constant_one().prepare(&grid);
        assert_eq!(fs_current_pair(&b, &one, &grid).unwrap(), p);
        // FS baseline: log P constant kills the correction term
        for form in crate::forms::dictionary_v1(1) {
            let u = form.prepare(&grid);
            let got = fs_current_pair(&b, &u, &grid).unwrap();
            let expect = p * u.integral(&grid);
            assert!((got - expect).abs() < 2e-3 * p, "{}: {got} vs {expect}", form.name);
        }
    }

    #[test]
    fn p2_fs_basis_dimension() {
        let h = MetricWeight::fs_baseline(2);
        let grid = build_quadrature(2, 10).unwrap();
        let b = build_basis(4, &h, &grid).unwrap();
        assert_eq!(b.dim(), 15); // binom(6,2)
        let r = orthonormality_residual(&b, &grid);
        assert!(r < 1e-6, "residual {r}");
    }
}
