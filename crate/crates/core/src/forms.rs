//! C2 test forms and their grid caches.
//!
//! A [`TestForm`] is a smooth function on `P^n` (the `(n-m, n-m) = (0,0)`
//! case of the convergence statements: all experiments here pair currents of
//! full codimension against functions). Preparing a form on a grid caches
//! its values, the density of `dd^c u` wedged with `omega^(n-1)`, and a C2
//! norm estimate (max over grid nodes of |u|, gradient and Hessian entries
//! in unitary chart coordinates).
//!
//! The builtin dictionary is fixed and versioned: discrepancy statistics are
//! a max over this finite set, a sound lower bound for the sup over the unit
//! C2 ball that is reproducible across runs.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::charts::{chart_jet, ddc_trace_density, jet_c2_bound, FD_STEP};
use crate::num::{self, Complex64};
use crate::projective::{ProjectivePoint, QuadratureGrid};

pub const DICTIONARY_VERSION: &str = "dict-v1";

#[derive(Clone)]
pub struct TestForm {
    pub name: String,
    eval: Arc<dyn Fn(&ProjectivePoint) -> f64 + Send + Sync>,
    /// constant forms pair exactly: the mass of `c_1(O(1),h)^m` is
    /// cohomological and the dd^c term vanishes identically
    pub is_constant: bool,
}

impl core::fmt::Debug for TestForm {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("TestForm")
            .field("name", &self.name)
            .field("is_constant", &self.is_constant)
            .finish()
    }
}

impl TestForm {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(&ProjectivePoint) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), eval: Arc::new(eval), is_constant: false }
    }

    pub fn constant_one() -> Self {
        Self {
            name: String::from("one"),
            eval: Arc::new(|_| 1.0),
            is_constant: true,
        }
    }

    pub fn eval(&self, x: &ProjectivePoint) -> f64 {
        (self.eval)(x)
    }

    pub fn prepare(&self, grid: &QuadratureGrid) -> PreparedForm {
        if self.is_constant {
            let v = self.eval(&grid.points()[0]);
            return PreparedForm {
                form: self.clone(),
                values: grid.points().iter().map(|_| v).collect(),
                ddc_density: grid.points().iter().map(|_| 0.0).collect(),
                c2_norm: v.abs().max(1e-300),
                grid_tag: grid.tag(),
            };
        }
        let mut values = Vec::with_capacity(grid.len());
        let mut ddc = Vec::with_capacity(grid.len());
        let mut c2: f64 = 0.0;
        let mut f = |x: &ProjectivePoint| self.eval(x);
        for x in grid.points() {
            let jet = chart_jet(&mut f, x, FD_STEP);
            values.push(jet.value);
            ddc.push(ddc_trace_density(&jet));
            c2 = c2.max(jet_c2_bound(&jet));
        }
        PreparedForm { form: self.clone(), values, ddc_density: ddc, c2_norm: c2, grid_tag: grid.tag() }
    }
}

/// A test form with its caches on one specific grid.
pub struct PreparedForm {
    pub form: TestForm,
    pub values: Vec<f64>,
    pub ddc_density: Vec<f64>,
    pub c2_norm: f64,
    pub grid_tag: u64,
}

impl PreparedForm {
    pub fn integral(&self, grid: &QuadratureGrid) -> f64 {
        debug_assert_eq!(self.grid_tag, grid.tag());
        self.values.iter().zip(grid.weights()).map(|(v, w)| v * w).sum()
    }
}

fn chordal_to(center: Vec<Complex64>) -> impl Fn(&ProjectivePoint) -> f64 + Send + Sync {
    move |x: &ProjectivePoint| num::chordal(x.coords(), &center)
}

fn unit(coords: Vec<(f64, f64)>) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = coords.into_iter().map(|(r, i)| Complex64::new(r, i)).collect();
    num::normalize(&mut v);
    v
}

/// The versioned test-function dictionary (`dict-v1`).
///
/// The Gaussian bump widths are graded from coarse to fine so the
/// discrepancy max stays sensitive across the desk-scale range of p: a bump
/// of width w resolves zero-set structure at scale w, and the zero process
/// decorrelates at scale 1/sqrt(p).
pub fn dictionary_v1(n: usize) -> Vec<TestForm> {
    let gauss = |name: &str, center: Vec<Complex64>, w: f64| {
        let d = chordal_to(center);
        TestForm::new(name, move |x| {
            let t = d(x);
            (-t * t / (w * w)).exp()
        })
    };
    let rational = |name: &str, center: Vec<Complex64>, w: f64| {
        let d = chordal_to(center);
        TestForm::new(name, move |x| {
            let t = d(x) / w;
            1.0 / (1.0 + t.powi(4))
        })
    };
    let mut dict = alloc::vec![TestForm::constant_one()];
    match n {
        1 => {
            for k in 0..2usize {
                dict.push(TestForm::new(format!("coord{k}"), move |x| x.coords()[k].norm_sqr()));
            }
            dict.push(TestForm::new("cross-re", |x| {
                (x.coords()[0] * x.coords()[1].conj()).re
            }));
            dict.push(TestForm::new("cross-im", |x| {
                (x.coords()[0] * x.coords()[1].conj()).im
            }));
            dict.push(gauss("gauss-e0-w45", unit(alloc::vec![(1.0, 0.0), (0.0, 0.0)]), 0.45));
            dict.push(gauss("gauss-e1-w35", unit(alloc::vec![(0.0, 0.0), (1.0, 0.0)]), 0.35));
            dict.push(gauss("gauss-diag-w30", unit(alloc::vec![(1.0, 0.0), (1.0, 0.0)]), 0.30));
            dict.push(gauss("gauss-idiag-w25", unit(alloc::vec![(1.0, 0.0), (0.0, 1.0)]), 0.25));
            dict.push(rational("rational-antidiag-w40", unit(alloc::vec![(1.0, 0.0), (-1.0, 0.0)]), 0.40));
        }
        2 => {
            for k in 0..3usize {
                dict.push(TestForm::new(format!("coord{k}"), move |x| x.coords()[k].norm_sqr()));
            }
            dict.push(TestForm::new("cross01-re", |x| {
                (x.coords()[0] * x.coords()[1].conj()).re
            }));
            dict.push(TestForm::new("cross12-im", |x| {
                (x.coords()[1] * x.coords()[2].conj()).im
            }));
            dict.push(gauss(
                "gauss-e0-w50",
                unit(alloc::vec![(1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]),
                0.50,
            ));
            dict.push(gauss(
                "gauss-diag-w40",
                unit(alloc::vec![(1.0, 0.0), (1.0, 0.0), (1.0, 0.0)]),
                0.40,
            ));
            dict.push(gauss(
                "gauss-anti12-w35",
                unit(alloc::vec![(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0)]),
                0.35,
            ));
            dict.push(rational(
                "rational-i01-w40",
                unit(alloc::vec![(1.0, 0.0), (0.0, 1.0), (0.0, 0.0)]),
                0.40,
            ));
        }
        _ => panic!("unsupported ambient dimension"),
    }
    dict
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projective::build_quadrature;

    #[test]
    fn prepared_constant_is_exact() {
        let g = build_quadrature(1, 16).unwrap();
        let one = TestForm::constant_one().prepare(&g);
        assert!(one.ddc_density.iter().all(|&d| d == 0.0));
        assert_eq!(one.c2_norm, 1.0);
    }

    #[test]
    fn c2_norm_dominates_values() {
        let g = build_quadrature(1, 16).unwrap();
        for form in dictionary_v1(1) {
            let p = form.prepare(&g);
            let vmax = p.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(p.c2_norm >= vmax - 1e-12, "{}: c2 {} < vmax {}", form.name, p.c2_norm, vmax);
        }
    }

    #[test]
    fn coordinate_bump_means() {
        // int |z_k|^2/|z|^2 = 1/(n+1) by exchangeability
        for (n, res, tol) in [(1usize, 48usize, 1e-6), (2, 10, 1e-4)] {
            let g = build_quadrature(n, res).unwrap();
            let dict = dictionary_v1(n);
            let coord0 = dict.iter().find(|f| f.name == "coord0").unwrap().prepare(&g);
            let expect = 1.0 / (n as f64 + 1.0);
            assert!((coord0.integral(&g) - expect).abs() < tol);
        }
    }

    #[test]
    fn dictionary_has_ten_members() {
        assert_eq!(dictionary_v1(1).len(), 10);
        assert_eq!(dictionary_v1(2).len(), 10);
    }
}
