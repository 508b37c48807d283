//! Unitary-adapted affine charts and central finite differences.
//!
//! At a point `x` of `P^n` we work in the holomorphic chart
//! `w -> [x + w_1 b_1 + ... + w_n b_n]` where `(x, b_1, .., b_n)` is a
//! unitary frame. In this chart the Fubini-Study potential is
//! `1/2 log(1 + |w|^2)` exactly, so the FS metric tensor at the center is
//! `G = I/2` and every pointwise curvature quantity reduces to plain
//! Hessian algebra:
//!
//! * `dd^c u` paired against `omega^(n-1)` has density `(2/n) tr H(u)`,
//! * the wedge density of two (1,1)-forms on `P^2` is the mixed-determinant
//!   ratio `M(A,B)/M(G,G)` with `M(A,B) = A00 B11 + A11 B00 - A01 B10 - A10 B01`,
//! * generalized eigenvalues against `omega` are eigenvalues of `2A`.
//!
//! Hessians use central differences of step [`FD_STEP`].

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::num::Complex64;
use crate::projective::{unitary_with_first_column, ProjectivePoint};

pub const FD_STEP: f64 = 1e-4;

pub struct ChartFrame {
    center: Vec<Complex64>,
    basis: Vec<Vec<Complex64>>,
}

impl ChartFrame {
    pub fn at(x: &ProjectivePoint) -> Self {
        let u = unitary_with_first_column(x.coords());
        let n = x.dim();
        let basis = (1..=n).map(|j| (0..=n).map(|i| u[(i, j)]).collect()).collect();
        Self { center: x.coords().to_vec(), basis }
    }

    pub fn n(&self) -> usize {
        self.basis.len()
    }

    /// The projective point at chart coordinates `w`.
    pub fn point(&self, w: &[Complex64]) -> ProjectivePoint {
        let mut c = self.center.clone();
        self.write_point(w, &mut c);
        ProjectivePoint { coords: c }
    }

    fn write_point(&self, w: &[Complex64], out: &mut [Complex64]) {
        out.copy_from_slice(&self.center);
        for (wj, bj) in w.iter().zip(self.basis.iter()) {
            if wj.norm_sqr() == 0.0 {
                continue;
            }
            for (ci, bi) in out.iter_mut().zip(bj.iter()) {
                *ci += wj * bi;
            }
        }
        crate::num::normalize(out);
    }
}

/// Value, real gradient components and complex Hessian of a function on
/// `P^n` at a chart center.
pub struct ChartJet {
    pub value: f64,
    /// partial derivatives along the 2n real chart directions
    pub grad: Vec<f64>,
    /// Hermitian matrix `H_jk = d^2 f / dw_j dw_k-bar`
    pub hess: DMatrix<Complex64>,
}

pub fn chart_jet(
    f: &mut dyn FnMut(&ProjectivePoint) -> f64,
    x: &ProjectivePoint,
    step: f64,
) -> ChartJet {
    let frame = ChartFrame::at(x);
    let n = frame.n();
    // reusable buffers: this runs at every node of every grid
    let mut scratch = ProjectivePoint { coords: x.coords().to_vec() };
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut eval = |w: &[Complex64], scratch: &mut ProjectivePoint| {
        frame.write_point(w, &mut scratch.coords);
        f(scratch)
    };
    let f0 = eval(&w, &mut scratch);

    let mut grad = Vec::with_capacity(2 * n);
    let mut hess = DMatrix::<Complex64>::zeros(n, n);
    let h = step;
    for j in 0..n {
        let mut at1 = |re: f64, im: f64| {
            w[j] = Complex64::new(re, im);
            let v = eval(&w, &mut scratch);
            w[j] = Complex64::new(0.0, 0.0);
            v
        };
        let fpx = at1(h, 0.0);
        let fmx = at1(-h, 0.0);
        let fpy = at1(0.0, h);
        let fmy = at1(0.0, -h);
        grad.push((fpx - fmx) / (2.0 * h));
        grad.push((fpy - fmy) / (2.0 * h));
        // d^2/dw dw-bar = (f_xx + f_yy)/4
        let fxx = (fpx - 2.0 * f0 + fmx) / (h * h);
        let fyy = (fpy - 2.0 * f0 + fmy) / (h * h);
        hess[(j, j)] = Complex64::new(0.25 * (fxx + fyy), 0.0);
    }
    // d^2/dw_j dw_k-bar = [ (f_{xj xk} + f_{yj yk}) + i (f_{xj yk} - f_{yj xk}) ]/4
    for j in 0..n {
        for k in (j + 1)..n {
            let mut cross = |jr: bool, kr: bool| -> f64 {
                let mut at = |sj: f64, sk: f64| {
                    w[j] = if jr { Complex64::new(sj, 0.0) } else { Complex64::new(0.0, sj) };
                    w[k] = if kr { Complex64::new(sk, 0.0) } else { Complex64::new(0.0, sk) };
                    let v = eval(&w, &mut scratch);
                    w[j] = Complex64::new(0.0, 0.0);
                    w[k] = Complex64::new(0.0, 0.0);
                    v
                };
                (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
            };
            let xx = cross(true, true);
            let yy = cross(false, false);
            let xy = cross(true, false);
            let yx = cross(false, true);
            let v = Complex64::new(0.25 * (xx + yy), 0.25 * (xy - yx));
            hess[(j, k)] = v;
            hess[(k, j)] = v.conj();
        }
    }
    ChartJet { value: f0, grad, hess }
}

/// Density of `dd^c u` wedged with `omega^(n-1)` against `omega^n`:
/// `(2/n) tr H(u)` at the chart center.
pub fn ddc_trace_density(jet: &ChartJet) -> f64 {
    let n = jet.hess.nrows();
    let tr: f64 = (0..n).map(|j| jet.hess[(j, j)].re).sum();
    2.0 * tr / n as f64
}

/// Mixed-determinant pairing of two Hermitian 2x2 matrices; the FS tensor
/// `G = I/2` has `M(G,G) = 1/2`.
pub fn mixed_form_2x2(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a[(0, 0)] * b[(1, 1)] + a[(1, 1)] * b[(0, 0)] - a[(0, 1)] * b[(1, 0)] - a[(1, 0)] * b[(0, 1)])
        .re
}

/// Minimal eigenvalue of a Hermitian matrix relative to the FS tensor
/// `G = I/2`, i.e. the smallest eigenvalue of `2A` (sizes 1 and 2).
pub fn relative_eigen_min(a: &DMatrix<Complex64>) -> f64 {
    match a.nrows() {
        1 => 2.0 * a[(0, 0)].re,
        2 => {
            let t = a[(0, 0)].re + a[(1, 1)].re;
            let d = a[(0, 0)].re * a[(1, 1)].re - a[(0, 1)].norm_sqr();
            let disc = (t * t - 4.0 * d).max(0.0).sqrt();
            t - disc
        }
        _ => unreachable!("ambient dimension is 1 or 2"),
    }
}

/// C2-norm style bound carried by a jet: max of |u|, gradient components and
/// Hessian entries.
pub fn jet_c2_bound(jet: &ChartJet) -> f64 {
    let g = jet.grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut hmax = 0.0f64;
    for i in 0..jet.hess.nrows() {
        for j in 0..jet.hess.ncols() {
            hmax = hmax.max(jet.hess[(i, j)].norm());
        }
    }
    jet.value.abs().max(g).max(hmax)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projective::build_quadrature;

    fn e0(n: usize) -> ProjectivePoint {
        let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
        c[0] = Complex64::new(1.0, 0.0);
        ProjectivePoint::new(c).unwrap()
    }

    #[test]
    fn hessian_of_coherent_bump_at_peak() {
        // u = |<z, e0>|^2/|z|^2 reads 1/(1+|w|^2) in the chart at e0, so the
        // Hessian at the center is -I
        for n in [1usize, 2] {
            let x = e0(n);
            let mut f = |p: &ProjectivePoint| p.coords()[0].norm_sqr();
            let jet = chart_jet(&mut f, &x, FD_STEP);
            assert!((jet.value - 1.0).abs() < 1e-12);
            for g in &jet.grad {
                assert!(g.abs() < 1e-8, "grad = {:?}", jet.grad);
            }
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { -1.0 } else { 0.0 };
                    assert!(
                        (jet.hess[(i, j)] - Complex64::new(expect, 0.0)).norm() < 1e-6,
                        "H[{i}{j}] = {}",
                        jet.hess[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn ddc_integrates_to_zero() {
        // dd^c u is exact, so its total mass vanishes
        let g = build_quadrature(1, 32).unwrap();
        let mut f = |p: &ProjectivePoint| p.coords()[1].norm_sqr();
        let total: f64 = g
            .points()
            .iter()
            .zip(g.weights())
            .map(|(x, w)| ddc_trace_density(&chart_jet(&mut f, x, FD_STEP)) * w)
            .sum();
        assert!(total.abs() < 1e-6, "total = {total}");
    }

    #[test]
    fn relative_eigen_closed_forms() {
        let a = DMatrix::<Complex64>::identity(2, 2) * Complex64::new(0.5, 0.0);
        assert!((relative_eigen_min(&a) - 1.0).abs() < 1e-14);
        let b = DMatrix::<Complex64>::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.5, 0.0),
                Complex64::new(0.0, 0.25),
                Complex64::new(0.0, -0.25),
                Complex64::new(0.5, 0.0),
            ],
        );
        // eigenvalues of 2B are 1 +/- 0.5
        assert!((relative_eigen_min(&b) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn mixed_form_normalization() {
        let g = DMatrix::<Complex64>::identity(2, 2) * Complex64::new(0.5, 0.0);
        assert!((mixed_form_2x2(&g, &g) - 0.5).abs() < 1e-15);
    }
}
