//! The experiment engine: discrepancies of normalized zero currents against
//! curvature targets, exceptional-set statistics, and the intermediate-degree
//! constants of the Kodaira meromorphic transforms.
//!
//! A sample's discrepancy is the max over a fixed versioned dictionary of
//! test functions of `|<p^-m [S_p=0] - wedge c_1(L_k,h_k), u>| / ||u||_C2`:
//! a per-form bound is what the convergence-speed theorem provides, so a
//! finite dictionary gives a sound, reproducible lower bound for the
//! sup-discrepancy. Solver failures (general-position breakdowns have
//! measure zero) are never silently dropped: they are excluded and counted.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::bergman::{build_basis, BergmanBasis, BergmanError};
use crate::charts::{chart_jet, mixed_form_2x2, FD_STEP};
use crate::forms::{PreparedForm, TestForm};
use crate::measures::{sample_sigma_p, MeasureError, MeasureSpec, SectionSample};
use crate::metrics::{curvature_pair, MetricError, MetricWeight};
use crate::num::{self, Complex64};
use crate::polynomials::{common_zeros_p2_rotated, roots_p1, PolyError, ZeroSet};
use crate::projective::{build_quadrature_adapted, GridAdaptation, ProjectivePoint, QuadratureGrid};
use crate::rng::{substream, Purpose};

#[derive(Debug, Error, Clone)]
pub enum EquidistError {
    #[error("zero set is incomplete: {deficit} of {expected} multiplicities missing")]
    IncompleteZeroSet { deficit: u64, expected: u64 },
    #[error("wedge targets with singular weights are unsupported on P^2")]
    UnsupportedSingularWedge,
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Bergman(#[from] BergmanError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

// ---------------------------------------------------------------------------
// Pairings
// ---------------------------------------------------------------------------

/// `p^-m sum mult u(x)` over the zero set. In strict mode an incomplete
/// Bezout count is an error rather than a biased value.
pub fn zero_current_pair(
    z: &ZeroSet,
    u: &TestForm,
    p: usize,
    m: usize,
    strict: bool,
) -> Result<f64, EquidistError> {
    if strict && !z.is_complete() {
        return Err(EquidistError::IncompleteZeroSet {
            deficit: z.deficit(),
            expected: z.expected_total,
        });
    }
    let scale = (p as f64).powi(m as i32);
    if u.is_constant {
        // pure mass count: exact integer arithmetic
        return Ok(u.eval(&z.points[0].0) * z.total_multiplicity() as f64 / scale);
    }
    let mut acc = 0.0;
    for (x, mult) in &z.points {
        acc += *mult as f64 * u.eval(x);
    }
    Ok(acc / scale)
}

/// `<wedge_k c_1(L_k,h_k), u>`: one factor delegates to the curvature
/// pairing; two factors on P^2 (smooth weights) integrate the pointwise
/// mixed-determinant wedge density. Constant forms pair exactly to the
/// cohomological mass.
pub fn curvature_target(
    metrics: &[MetricWeight],
    u: &PreparedForm,
    grid: &QuadratureGrid,
) -> Result<f64, EquidistError> {
    if u.form.is_constant {
        return Ok(u.values[0]);
    }
    match metrics.len() {
        1 => Ok(curvature_pair(&metrics[0], u, grid)?),
        2 => {
            if metrics.iter().any(|h| !h.singular.is_empty()) {
                return Err(EquidistError::UnsupportedSingularWedge);
            }
            let mut acc = 0.0;
            for ((x, w), uv) in grid.points().iter().zip(grid.weights()).zip(u.values.iter()) {
                let density = wedge_density_at(&metrics[0], &metrics[1], x);
                acc += uv * density * w;
            }
            Ok(acc)
        }
        m => Err(EquidistError::UnsupportedConfiguration(alloc::format!(
            "wedge of {m} curvature currents"
        ))),
    }
}

/// Pointwise density of `c_1(h_1) wedge c_1(h_2)` against `omega^2` on P^2:
/// with chart matrices `A_k = G + H(smooth_k)` and `M(G,G) = 1/2`, the ratio
/// is `2 M(A_1, A_2)`.
fn wedge_density_at(h1: &MetricWeight, h2: &MetricWeight, x: &ProjectivePoint) -> f64 {
    let g_half = Complex64::new(0.5, 0.0);
    let mut mats = Vec::with_capacity(2);
    for h in [h1, h2] {
        let mut m = if h.smooth.is_zero() {
            nalgebra::DMatrix::<Complex64>::zeros(2, 2)
        } else {
            let mut f = |p: &ProjectivePoint| h.smooth.eval(p);
            chart_jet(&mut f, x, FD_STEP).hess
        };
        for i in 0..2 {
            m[(i, i)] += g_half;
        }
        mats.push(m);
    }
    2.0 * mixed_form_2x2(&mats[0], &mats[1])
}

// ---------------------------------------------------------------------------
// Dictionary preparation and per-sample discrepancy
// ---------------------------------------------------------------------------

/// A dictionary prepared on a grid together with its curvature targets.
pub struct PreparedDictionary {
    pub forms: Vec<TestForm>,
    pub prepared: Vec<PreparedForm>,
    pub targets: Vec<f64>,
}

pub fn prepare_dictionary(
    dict: &[TestForm],
    metrics: &[MetricWeight],
    grid: &QuadratureGrid,
) -> Result<PreparedDictionary, EquidistError> {
    let prepared: Vec<PreparedForm> = dict.iter().map(|f| f.prepare(grid)).collect();
    let targets: Vec<f64> = prepared
        .iter()
        .map(|u| curvature_target(metrics, u, grid))
        .collect::<Result<_, _>>()?;
    Ok(PreparedDictionary { forms: dict.to_vec(), prepared, targets })
}

/// Solves the common zeros of a sampled section tuple.
pub fn solve_sample_zeros(
    sample: &SectionSample,
    bases: &[BergmanBasis],
    solver_tol: f64,
    rotation_seed: u64,
) -> Result<ZeroSet, PolyError> {
    match bases.len() {
        1 => {
            let f = bases[0].section_from_coeffs(&sample.tuple[0]);
            roots_p1(&f)
        }
        2 => {
            let f = bases[0].section_from_coeffs(&sample.tuple[0]);
            let g = bases[1].section_from_coeffs(&sample.tuple[1]);
            common_zeros_p2_rotated(&f, &g, solver_tol, rotation_seed)
        }
        _ => Err(PolyError::WrongAmbient { got: bases.len(), expect: 2 }),
    }
}

/// Max over the dictionary of the normalized deviation of the sample's zero
/// current from the curvature target.
pub fn discrepancy(
    sample: &SectionSample,
    bases: &[BergmanBasis],
    dict: &PreparedDictionary,
    solver_tol: f64,
    rotation_seed: u64,
) -> Result<f64, EquidistError> {
    let zeros = solve_sample_zeros(sample, bases, solver_tol, rotation_seed)
        .map_err(|e| EquidistError::UnsupportedConfiguration(alloc::format!("solver: {e}")))?;
    if !zeros.is_complete() {
        return Err(EquidistError::IncompleteZeroSet {
            deficit: zeros.deficit(),
            expected: zeros.expected_total,
        });
    }
    let p = bases[0].p;
    let m = bases.len();
    let mut worst = 0.0f64;
    for ((form, prepared), target) in
        dict.forms.iter().zip(dict.prepared.iter()).zip(dict.targets.iter())
    {
        let zcp = zero_current_pair(&zeros, form, p, m, false)?;
        let dev = (zcp - target).abs() / prepared.c2_norm;
        worst = worst.max(dev);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Dinh-Sibony constants
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ConstantsReport {
    pub p: usize,
    pub m: usize,
    pub d_kp: Vec<usize>,
    pub d_0p: usize,
    pub c_0p: f64,
    pub d_p: f64,
    pub delta_p: f64,
    /// Kaehler-constant bound max_k d_0p / d_kp for the multi-projective space
    pub r_bound: f64,
    pub r_hat: f64,
    pub eta: f64,
    pub epsilon: f64,
    /// hypothesis diagnostics (recorded, not enforced):
    /// r log(d_0p) / min d_kp and (rho/4)^(min d_kp) * d_0p
    pub ratio_r_log: f64,
    pub ratio_rho_pow: f64,
}

impl ConstantsReport {
    /// The defining identity of c_0p in log form, for verification.
    pub fn c0p_identity_residual(&self) -> f64 {
        let lhs = -(self.d_0p as f64) * self.c_0p.ln();
        let mut rhs = num::ln_factorial(self.d_0p as u64);
        for d in &self.d_kp {
            rhs -= num::ln_factorial(*d as u64);
        }
        (lhs - rhs).abs()
    }
}

/// Evaluates the intermediate degrees and capacity bookkeeping of the
/// product Kodaira transform at level p:
/// `d_p = p^m |wedge c_1|`, `delta_p = (p^(m-1)/c_0p) sum_k (d_kp/d_0p) |wedge_{l!=k} c_1|`,
/// `c_0p` from the multinomial volume normalization, and
/// `eta = eps d_p / delta_p - 3 R`.
pub fn dinh_sibony_constants(
    p: usize,
    bases: &[BergmanBasis],
    metrics: &[MetricWeight],
    epsilon: f64,
    grid: &QuadratureGrid,
    r_hat: f64,
    rho: f64,
) -> Result<ConstantsReport, EquidistError> {
    let m = bases.len();
    let d_kp: Vec<usize> = bases.iter().map(|b| b.d_kp()).collect();
    let d_0p: usize = d_kp.iter().sum();
    let ln_c0p = -(num::ln_factorial(d_0p as u64)
        - d_kp.iter().map(|&d| num::ln_factorial(d as u64)).sum::<f64>())
        / d_0p as f64;
    let c_0p = ln_c0p.exp();

    let one = TestForm::constant_one().prepare(grid);
    let full_mass = curvature_target(metrics, &one, grid)?;
    let d_p = (p as f64).powi(m as i32) * full_mass;

    let mut delta_sum = 0.0;
    for k in 0..m {
        let others: Vec<MetricWeight> =
            metrics.iter().enumerate().filter(|(l, _)| *l != k).map(|(_, h)| h.clone()).collect();
        let mass = if others.is_empty() { 1.0 } else { curvature_target(&others, &one, grid)? };
        delta_sum += (d_kp[k] as f64 / d_0p as f64) * mass;
    }
    let delta_p = (p as f64).powi(m as i32 - 1) / c_0p * delta_sum;

    let r_bound =
        d_kp.iter().map(|&d| d_0p as f64 / d as f64).fold(1.0f64, f64::max);
    let eta = epsilon * d_p / delta_p - 3.0 * r_hat;
    let min_d = *d_kp.iter().min().unwrap() as f64;
    Ok(ConstantsReport {
        p,
        m,
        d_kp,
        d_0p,
        c_0p,
        d_p,
        delta_p,
        r_bound,
        r_hat,
        eta,
        epsilon,
        ratio_r_log: r_bound * (d_0p as f64).ln() / min_d,
        ratio_rho_pow: (rho / 4.0).powf(min_d) * d_0p as f64,
    })
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

/// Window rules for the exceptional-set thresholds `C lambda_p / p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// `lambda_p = a log p`
    LogMultiple { a: f64 },
    /// `lambda_p = p^b`, `b < n`
    Power { b: f64 },
}

impl LambdaRule {
    pub fn lambda(&self, p: usize) -> f64 {
        match self {
            LambdaRule::LogMultiple { a } => a * (p as f64).ln(),
            LambdaRule::Power { b } => (p as f64).powf(*b),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub n: usize,
    pub m: usize,
    pub p_list: Vec<usize>,
    pub metrics: Vec<MetricWeight>,
    pub measure: MeasureSpec,
    pub dictionary: Vec<TestForm>,
    pub nsamples: usize,
    pub lambda_rule: LambdaRule,
    /// free constant C of the threshold C lambda_p / p
    pub exceptional_constant: f64,
    pub seed: u64,
    pub resolution_override: Option<usize>,
    pub solver_tol: f64,
}

impl ExperimentPlan {
    pub fn grid_resolution(&self, p_max: usize) -> usize {
        self.resolution_override.unwrap_or(match self.n {
            1 => 32.max(p_max + 8),
            _ => 12.max(p_max + 4),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub p: usize,
    pub nsamples: usize,
    pub discrepancies: Vec<f64>,
    pub weights: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q25: f64,
    pub q75: f64,
    pub q90: f64,
    pub exceptional_fraction: f64,
    pub lambda_p: f64,
    pub threshold: f64,
    pub solver_failures: usize,
    pub seed: u64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone)]
pub enum SampleOutcome {
    Ok { discrepancy: f64, weight: f64 },
    SolverFailure { reason: String },
}

/// Everything fixed across samples: grid, bases per level, prepared
/// dictionary with targets. Per-sample evaluation is pure and seeded, so
/// driving it serially or in parallel gives identical records.
pub struct ExperimentEngine {
    pub plan: ExperimentPlan,
    pub grid: QuadratureGrid,
    pub bases: Vec<(usize, Vec<BergmanBasis>)>,
    pub dictionary: PreparedDictionary,
}

impl ExperimentEngine {
    pub fn new(plan: ExperimentPlan) -> Result<Self, EquidistError> {
        if plan.n != plan.m {
            return Err(EquidistError::UnsupportedConfiguration(String::from(
                "zero-dimensional experiments need m = n",
            )));
        }
        if plan.metrics.len() != plan.m {
            return Err(EquidistError::UnsupportedConfiguration(String::from(
                "one metric per bundle slot required",
            )));
        }
        let p_max = *plan.p_list.iter().max().unwrap_or(&2);
        let mut adaptation = GridAdaptation::default();
        for h in &plan.metrics {
            adaptation.singular_forms.extend(h.grid_adaptation().singular_forms);
        }
        let grid = build_quadrature_adapted(plan.n, plan.grid_resolution(p_max), Some(&adaptation))
            .map_err(|e| EquidistError::UnsupportedConfiguration(alloc::format!("grid: {e}")))?;
        let mut bases = Vec::with_capacity(plan.p_list.len());
        for &p in &plan.p_list {
            let per_slot: Vec<BergmanBasis> = plan
                .metrics
                .iter()
                .map(|h| build_basis(p, h, &grid))
                .collect::<Result<_, _>>()?;
            bases.push((p, per_slot));
        }
        let dictionary = prepare_dictionary(&plan.dictionary, &plan.metrics, &grid)?;
        Ok(Self { plan, grid, bases, dictionary })
    }

    pub fn bases_at(&self, p: usize) -> Option<&[BergmanBasis]> {
        self.bases.iter().find(|(q, _)| *q == p).map(|(_, b)| b.as_slice())
    }

    /// One seeded sample at level p: stream `(p, sample_idx)` of the master
    /// seed, independent of evaluation order.
    pub fn evaluate_sample(&self, p: usize, sample_idx: u32) -> SampleOutcome {
        let bases = self.bases_at(p).expect("level p was built");
        let mut rng = substream(self.plan.seed, Purpose::SectionSampling, p as u32, sample_idx);
        let sample = match sample_sigma_p(bases, &self.plan.measure, &mut rng) {
            Ok(s) => s,
            Err(e) => return SampleOutcome::SolverFailure { reason: alloc::format!("measure: {e}") },
        };
        match discrepancy(&sample, bases, &self.dictionary, self.plan.solver_tol, self.plan.seed) {
            Ok(d) => SampleOutcome::Ok { discrepancy: d, weight: sample.importance_weight },
            Err(e) => SampleOutcome::SolverFailure { reason: alloc::format!("{e}") },
        }
    }

    /// Aggregates per-sample outcomes into the record for level p.
    pub fn aggregate(&self, p: usize, outcomes: Vec<SampleOutcome>, wall_time_secs: f64) -> ExperimentRecord {
        let lambda_p = self.plan.lambda_rule.lambda(p);
        let threshold = self.plan.exceptional_constant * lambda_p / p as f64;
        let mut discrepancies = Vec::new();
        let mut weights = Vec::new();
        let mut failures = 0usize;
        for o in outcomes {
            match o {
                SampleOutcome::Ok { discrepancy, weight } => {
                    discrepancies.push(discrepancy);
                    weights.push(weight);
                }
                SampleOutcome::SolverFailure { .. } => failures += 1,
            }
        }
        let wsum: f64 = weights.iter().sum();
        let mean = if wsum > 0.0 {
            discrepancies.iter().zip(weights.iter()).map(|(d, w)| d * w).sum::<f64>() / wsum
        } else {
            f64::NAN
        };
        let q = |qq: f64| num::weighted_quantile(&discrepancies, &weights, qq);
        let exceptional = if wsum > 0.0 {
            discrepancies
                .iter()
                .zip(weights.iter())
                .filter(|(d, _)| **d > threshold)
                .map(|(_, w)| w)
                .sum::<f64>()
                / wsum
        } else {
            f64::NAN
        };
        ExperimentRecord {
            p,
            nsamples: self.plan.nsamples,
            median: q(0.5),
            q10: q(0.1),
            q25: q(0.25),
            q75: q(0.75),
            q90: q(0.9),
            discrepancies,
            weights,
            mean,
            exceptional_fraction: exceptional,
            lambda_p,
            threshold,
            solver_failures: failures,
            seed: self.plan.seed,
            wall_time_secs,
        }
    }

    /// Serial driver; the CLI parallelizes over `evaluate_sample` with the
    /// same substreams and reduces in index order, which yields bit-identical
    /// records.
    pub fn run(&self) -> Vec<ExperimentRecord> {
        let mut records = Vec::with_capacity(self.plan.p_list.len());
        for &p in &self.plan.p_list {
            #[cfg(feature = "std")]
            let t0 = std::time::Instant::now();
            let outcomes: Vec<SampleOutcome> =
                (0..self.plan.nsamples as u32).map(|i| self.evaluate_sample(p, i)).collect();
            #[cfg(feature = "std")]
            let wall = t0.elapsed().as_secs_f64();
            #[cfg(not(feature = "std"))]
            let wall = 0.0;
            records.push(self.aggregate(p, outcomes, wall));
        }
        records
    }
}

pub fn run_experiment(plan: ExperimentPlan) -> Result<Vec<ExperimentRecord>, EquidistError> {
    Ok(ExperimentEngine::new(plan)?.run())
}
