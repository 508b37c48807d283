//! Sampling from the Fubini-Study and perturbed (moderate) measures on
//! section projective spaces, Monte Carlo moderate-integral estimation, and
//! the capacity constants R, S, Delta.
//!
//! Perturbed measures are top wedge powers `(omega_FS + dd^c u)^N` on `P^N`.
//! With one perturbation shared across the factors the density against
//! `omega_FS^N` at a point is the determinant `det(I + G^-1 H(u))` in a
//! unitary chart; up to three distinct perturbation groups are supported via
//! the mixed determinant, extracted exactly as a coefficient of
//! `det(x A + y B + z C)` by discrete Fourier interpolation. Sampling is by
//! importance against the FS measure (unbiased weights, no burn-in): the
//! perturbation moduli in play keep the weights within a factor
//! `(1 +/- c_p)^N` of one, so effective sample sizes stay near the nominal
//! count.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::bergman::BergmanBasis;
use crate::charts::{chart_jet, FD_STEP};
use crate::num::{self, Complex64};
use crate::projective::ProjectivePoint;
use crate::rng::{substream, Purpose};

pub const PROBE_FAMILY_VERSION: &str = "probes-v1";

#[derive(Debug, Error, Clone)]
pub enum MeasureError {
    #[error("perturbed density {value} is not positive: the perturbation violates its p.s.h. modulus")]
    NonPositiveDensity { value: f64 },
    #[error("invalid measure specification: {0}")]
    InvalidSpec(String),
}

// ---------------------------------------------------------------------------
// Measure specification
// ---------------------------------------------------------------------------

/// Builtin smooth perturbations of the FS measure on a section space `P^N`.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    Zero,
    /// `amplitude * |<v, e_axis>|^2 / |v|^2`; its dd^c is bounded below by
    /// `-2 amplitude omega_FS`, so the declared modulus is `2 amplitude`
    CoordinateBump { axis: usize, amplitude: f64 },
}

impl Perturbation {
    pub fn eval(&self, v: &ProjectivePoint) -> f64 {
        match self {
            Perturbation::Zero => 0.0,
            Perturbation::CoordinateBump { axis, amplitude } => {
                let k = (*axis).min(v.coords().len() - 1);
                amplitude * v.coords()[k].norm_sqr()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Perturbation::Zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureMode {
    FubiniStudy,
    Perturbed,
}

/// Specification of the per-slot sampling measure: FS, or the perturbed
/// wedge power with a `(c_p, rho)` perturbation family. `groups` assigns
/// perturbations to fractions of the wedge factors; one shared group is the
/// primary (exact-determinant) configuration and at most three are allowed.
#[derive(Debug, Clone)]
pub struct MeasureSpec {
    pub mode: MeasureMode,
    pub groups: Vec<(Perturbation, f64)>,
    pub c_p: f64,
    pub rho: f64,
}

impl MeasureSpec {
    pub fn fubini_study() -> Self {
        Self { mode: MeasureMode::FubiniStudy, groups: Vec::new(), c_p: 0.0, rho: 0.5 }
    }

    /// Single coordinate-bump perturbation of modulus `c_p` shared across
    /// all wedge factors (bump amplitude `c_p/2` keeps `dd^c u >= -c_p omega`).
    pub fn perturbed_bump(c_p: f64, rho: f64, axis: usize) -> Result<Self, MeasureError> {
        Self::perturbed(
            vec![(Perturbation::CoordinateBump { axis, amplitude: c_p / 2.0 }, 1.0)],
            c_p,
            rho,
        )
    }

    pub fn perturbed(
        groups: Vec<(Perturbation, f64)>,
        c_p: f64,
        rho: f64,
    ) -> Result<Self, MeasureError> {
        if !(c_p > 0.0 && c_p <= 1.0) {
            return Err(MeasureError::InvalidSpec(String::from("c_p must lie in (0, 1]")));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(MeasureError::InvalidSpec(String::from("rho must lie in (0, 1)")));
        }
        if groups.is_empty() || groups.len() > 3 {
            return Err(MeasureError::InvalidSpec(String::from(
                "between 1 and 3 perturbation groups are supported",
            )));
        }
        let total: f64 = groups.iter().map(|(_, f)| *f).sum();
        if (total - 1.0).abs() > 1e-9 || groups.iter().any(|(_, f)| *f < 0.0) {
            return Err(MeasureError::InvalidSpec(String::from(
                "group fractions must be nonnegative and sum to 1",
            )));
        }
        Ok(Self { mode: MeasureMode::Perturbed, groups, c_p, rho })
    }

    /// Wedge-factor counts per group for a space with `n_factors` factors,
    /// largest-remainder rounding.
    fn group_counts(&self, n_factors: usize) -> Vec<usize> {
        let mut counts: Vec<usize> =
            self.groups.iter().map(|(_, f)| (f * n_factors as f64).floor() as usize).collect();
        let mut rem: Vec<(usize, f64)> = self
            .groups
            .iter()
            .enumerate()
            .map(|(i, (_, f))| (i, f * n_factors as f64 - counts[i] as f64))
            .collect();
        rem.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let mut deficit = n_factors - counts.iter().sum::<usize>();
        for (i, _) in rem {
            if deficit == 0 {
                break;
            }
            counts[i] += 1;
            deficit -= 1;
        }
        counts
    }
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// One draw from the product measure: a tuple of unit coefficient vectors
/// and its importance weight against the FS proposal (exactly 1 in FS mode).
#[derive(Debug, Clone)]
pub struct SectionSample {
    pub tuple: Vec<Vec<Complex64>>,
    pub importance_weight: f64,
    pub log_density_diag: f64,
}

/// Standard complex Gaussian on `C^(d+1)`, normalized: the FS volume on `P^d`.
pub fn sample_fs_section(d: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    loop {
        let mut v: Vec<Complex64> = (0..=d)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im)
            })
            .collect();
        if num::normalize(&mut v) {
            return v;
        }
    }
}

/// Density of `(omega_FS + dd^c u)^N` against `omega_FS^N` at `[v]`, via the
/// (mixed) determinant of `I + 2 H(u)` in the unitary chart at `v`.
pub fn perturbation_weight(spec: &MeasureSpec, v: &[Complex64]) -> Result<f64, MeasureError> {
    if spec.mode == MeasureMode::FubiniStudy {
        return Ok(1.0);
    }
    if spec.groups.iter().all(|(u, _)| u.is_zero()) {
        return Ok(1.0);
    }
    let x = ProjectivePoint::new(v.to_vec()).map_err(|_| {
        MeasureError::InvalidSpec(String::from("coefficient vector does not define a point"))
    })?;
    let n_factors = v.len() - 1;
    let counts = spec.group_counts(n_factors);
    let mut relative: Vec<(DMatrix<Complex64>, usize)> = Vec::new();
    for ((u, _), count) in spec.groups.iter().zip(counts.iter()) {
        if *count == 0 {
            continue;
        }
        let mut f = |p: &ProjectivePoint| u.eval(p);
        let jet = chart_jet(&mut f, &x, FD_STEP);
        // relative matrix I + G^-1 H with G = I/2
        let mut m = jet.hess * Complex64::new(2.0, 0.0);
        for i in 0..n_factors {
            m[(i, i)] += Complex64::new(1.0, 0.0);
        }
        relative.push((m, *count));
    }
    let det = mixed_determinant(&relative, n_factors);
    if det <= 0.0 {
        return Err(MeasureError::NonPositiveDensity { value: det });
    }
    Ok(det)
}

/// Normalized mixed determinant `D(A_1^(n_1), ..., A_g^(n_g))` with
/// `D(A,..,A) = det A`, by DFT coefficient extraction from
/// `det(x_1 A_1 + ... + x_g A_g)`.
fn mixed_determinant(groups: &[(DMatrix<Complex64>, usize)], n: usize) -> f64 {
    debug_assert!(groups.iter().map(|(_, c)| *c).sum::<usize>() == n);
    match groups.len() {
        0 => 1.0,
        1 => det_re(&groups[0].0),
        2 => {
            // coefficient of x^(n1) in det(x A + B), degree <= n
            let (a, n1) = (&groups[0].0, groups[0].1);
            let b = &groups[1].0;
            let m = n + 1;
            let mut vals = Vec::with_capacity(m);
            for s in 0..m {
                let x =
                    Complex64::from_polar(1.0, 2.0 * core::f64::consts::PI * s as f64 / m as f64);
                let mut mat = b.clone();
                mat += a * x;
                vals.push(mat.lu().determinant());
            }
            let coeff = dft_coefficient(&vals, n1);
            (coeff / multinomial2(n, n1)).re
        }
        _ => {
            let (a, n1) = (&groups[0].0, groups[0].1);
            let (b, n2) = (&groups[1].0, groups[1].1);
            let c = &groups[2].0;
            let m = n + 1;
            // 2-D DFT over (x, y) with the third weight fixed at 1
            let mut coeff_rows = Vec::with_capacity(m);
            for s in 0..m {
                let x =
                    Complex64::from_polar(1.0, 2.0 * core::f64::consts::PI * s as f64 / m as f64);
                let mut vals = Vec::with_capacity(m);
                for t in 0..m {
                    let y = Complex64::from_polar(
                        1.0,
                        2.0 * core::f64::consts::PI * t as f64 / m as f64,
                    );
                    let mut mat = c.clone();
                    mat += a * x;
                    mat += b * y;
                    vals.push(mat.lu().determinant());
                }
                coeff_rows.push(dft_coefficient(&vals, n2));
            }
            let coeff = dft_coefficient(&coeff_rows, n1);
            let multi = multinomial2(n, n1) * multinomial2(n - n1, n2);
            (coeff / multi).re
        }
    }
}

fn det_re(m: &DMatrix<Complex64>) -> f64 {
    m.clone().lu().determinant().re
}

fn dft_coefficient(vals: &[Complex64], k: usize) -> Complex64 {
    let m = vals.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (s, v) in vals.iter().enumerate() {
        let th = -2.0 * core::f64::consts::PI * ((k * s) % m) as f64 / m as f64;
        acc += v * Complex64::from_polar(1.0, th);
    }
    acc / m as f64
}

fn multinomial2(n: usize, k: usize) -> f64 {
    (num::ln_factorial(n as u64) - num::ln_factorial(k as u64)
        - num::ln_factorial((n - k) as u64))
    .exp()
}

/// Independent per-slot draws with the product importance weight
/// (self-normalized importance sampling against sigma_p).
pub fn sample_sigma_p(
    bases: &[BergmanBasis],
    spec: &MeasureSpec,
    rng: &mut ChaCha8Rng,
) -> Result<SectionSample, MeasureError> {
    let mut tuple = Vec::with_capacity(bases.len());
    let mut weight = 1.0;
    let mut log_diag = 0.0;
    for b in bases {
        let v = sample_fs_section(b.d_kp(), rng);
        let w = perturbation_weight(spec, &v)?;
        weight *= w;
        log_diag += w.ln();
        tuple.push(v);
    }
    Ok(SectionSample { tuple, importance_weight: weight, log_density_diag: log_diag })
}

// ---------------------------------------------------------------------------
// Measure samplers (shared by moderate integrals, capacity, experiments)
// ---------------------------------------------------------------------------

pub trait MeasureSampler {
    /// dimension N of the projective space the samples live on
    fn ambient_dim(&self) -> usize;
    /// one draw: unit coordinates and importance weight against the target
    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<(Vec<Complex64>, f64), MeasureError>;
}

pub struct FsSampler {
    pub dim: usize,
}

impl MeasureSampler for FsSampler {
    fn ambient_dim(&self) -> usize {
        self.dim
    }
    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<(Vec<Complex64>, f64), MeasureError> {
        Ok((sample_fs_section(self.dim, rng), 1.0))
    }
}

pub struct PerturbedSampler {
    pub dim: usize,
    pub spec: MeasureSpec,
}

impl MeasureSampler for PerturbedSampler {
    fn ambient_dim(&self) -> usize {
        self.dim
    }
    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<(Vec<Complex64>, f64), MeasureError> {
        let v = sample_fs_section(self.dim, rng);
        let w = perturbation_weight(&self.spec, &v)?;
        Ok((v, w))
    }
}

// ---------------------------------------------------------------------------
// q.p.s.h. probes
// ---------------------------------------------------------------------------

/// Linear forms available on every `P^N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormSpec {
    Coordinate(usize),
    /// `(e_i + e_j)/sqrt(2)`
    PairSum(usize, usize),
}

impl FormSpec {
    fn eval_mag(&self, v: &[Complex64]) -> f64 {
        match self {
            FormSpec::Coordinate(i) => v[(*i).min(v.len() - 1)].norm(),
            FormSpec::PairSum(i, j) => {
                let i = (*i).min(v.len() - 1);
                let j = (*j).min(v.len() - 1);
                if i == j {
                    v[i].norm()
                } else {
                    ((v[i] + v[j]) * core::f64::consts::FRAC_1_SQRT_2).norm()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeTerm {
    /// `log(|l(v)|/|v|)` for a unit form
    LogForm(FormSpec),
    /// `amplitude (|v_axis|^2/|v|^2 - 1)`; amplitude <= 1/2 keeps dd^c >= -omega
    Bump { axis: usize, amplitude: f64 },
    /// constant floor truncating the max
    Floor(f64),
}

/// A member of the class F on `P^N`: a max of finitely many log terms,
/// shallow smooth bumps and floors, with `dd^c phi >= -omega_FS` and
/// `max phi = 0` by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct QpshProbe {
    pub name: String,
    pub terms: Vec<ProbeTerm>,
}

impl QpshProbe {
    pub fn eval(&self, v: &[Complex64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for term in &self.terms {
            let val = match term {
                ProbeTerm::LogForm(f) => {
                    let m = f.eval_mag(v);
                    if m == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        m.ln()
                    }
                }
                ProbeTerm::Bump { axis, amplitude } => {
                    let k = (*axis).min(v.len() - 1);
                    amplitude * (v[k].norm_sqr() - 1.0)
                }
                ProbeTerm::Floor(c) => *c,
            };
            best = best.max(val);
        }
        best
    }
}

/// The fixed, versioned probe family (`probes-v1`), parameterized by the
/// ambient dimension so the same names exist on every section space.
pub fn probe_family_v1(dim: usize) -> Vec<QpshProbe> {
    let j = 1.min(dim);
    vec![
        QpshProbe {
            name: String::from("log-z0"),
            terms: vec![ProbeTerm::LogForm(FormSpec::Coordinate(0))],
        },
        QpshProbe {
            name: String::from("log-pair"),
            terms: vec![ProbeTerm::LogForm(FormSpec::PairSum(0, j))],
        },
        QpshProbe {
            name: String::from("max-log-01"),
            terms: vec![
                ProbeTerm::LogForm(FormSpec::Coordinate(0)),
                ProbeTerm::LogForm(FormSpec::Coordinate(j)),
            ],
        },
        QpshProbe {
            name: String::from("log-floor-1"),
            terms: vec![ProbeTerm::LogForm(FormSpec::Coordinate(0)), ProbeTerm::Floor(-1.0)],
        },
        QpshProbe {
            name: String::from("bump-04"),
            terms: vec![ProbeTerm::Bump { axis: 0, amplitude: 0.4 }],
        },
        QpshProbe {
            name: String::from("log-bump-mix"),
            terms: vec![
                ProbeTerm::LogForm(FormSpec::Coordinate(0)),
                ProbeTerm::Bump { axis: j, amplitude: 0.3 },
            ],
        },
    ]
}

// ---------------------------------------------------------------------------
// Moderate integrals
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ModerateEstimate {
    pub value: f64,
    pub stderr: f64,
    pub nsamples: usize,
    /// heavy-tail diagnostic: the running estimate does not stabilize
    pub diverged: bool,
    /// share of the total carried by the largest single term
    pub max_share: f64,
    /// share carried by the ten largest terms
    pub top10_share: f64,
}

/// Self-normalized importance estimate of `int exp(-alpha phi) d sigma` with
/// a delta-method standard error. The divergence flag fires when a few
/// samples dominate the sum, the signature of `exp(-alpha phi)` leaving L1.
pub fn moderate_integral(
    sampler: &dyn MeasureSampler,
    probe: &QpshProbe,
    alpha: f64,
    nsamples: usize,
    seed: u64,
) -> Result<ModerateEstimate, MeasureError> {
    let mut rng = substream(seed, Purpose::Measure, 0, 0);
    let mut terms: Vec<f64> = Vec::with_capacity(nsamples);
    let mut wsum = 0.0;
    let mut xsum = 0.0;
    for _ in 0..nsamples {
        let (v, w) = sampler.draw(&mut rng)?;
        let phi = probe.eval(&v);
        let x = if alpha == 0.0 { 1.0 } else { (-alpha * phi).exp() };
        terms.push(w * x);
        wsum += w;
        xsum += w * x;
    }
    let value = xsum / wsum;
    let mut var = 0.0;
    let wbar = wsum / nsamples as f64;
    for t in &terms {
        let d = t - value * wbar;
        var += d * d;
    }
    let stderr = var.sqrt() / wsum;
    let mut sorted = terms;
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let max_share = sorted[0] / xsum;
    let top10: f64 = sorted.iter().take(10).sum();
    let top10_share = top10 / xsum;
    let diverged = max_share > 0.02 || top10_share > 0.05;
    Ok(ModerateEstimate { value, stderr, nsamples, diverged, max_share, top10_share })
}

// ---------------------------------------------------------------------------
// Capacity constants
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ProbeStats {
    pub name: String,
    pub mean_sigma: f64,
    pub stderr: f64,
    pub mean_fs: f64,
}

#[derive(Debug, Clone)]
pub struct CapacityReport {
    /// max over probes of -int phi d sigma (a lower bound for R)
    pub r_hat: f64,
    pub r_hat_stderr: f64,
    /// max over volume-centered probes of |int phi d sigma|
    pub s_hat: f64,
    /// per threshold t: max over mean-centered probes of sigma(phi < -t)
    pub delta_hat: Vec<(f64, f64)>,
    pub per_probe: Vec<ProbeStats>,
    pub nsamples: usize,
}

/// Monte Carlo estimates of the capacity constants over a fixed probe
/// family. R uses the `max phi = 0` form, S centers by the FS volume, and
/// Delta(t) centers each probe at its sigma-mean.
pub fn estimate_capacity_constants(
    sampler: &dyn MeasureSampler,
    probes: &[QpshProbe],
    t_list: &[f64],
    nsamples: usize,
    seed: u64,
) -> Result<CapacityReport, MeasureError> {
    assert!(!probes.is_empty(), "probe family must be nonempty");
    let mut rng = substream(seed, Purpose::Capacity, 0, 0);
    let mut draws: Vec<(Vec<Complex64>, f64)> = Vec::with_capacity(nsamples);
    for _ in 0..nsamples {
        draws.push(sampler.draw(&mut rng)?);
    }
    // independent FS pass for the volume-centering of S
    let fs = FsSampler { dim: sampler.ambient_dim() };
    let mut rng_fs = substream(seed, Purpose::Capacity, 0, 1);
    let mut fs_draws: Vec<Vec<Complex64>> = Vec::with_capacity(nsamples);
    for _ in 0..nsamples {
        fs_draws.push(fs.draw(&mut rng_fs)?.0);
    }

    let wsum: f64 = draws.iter().map(|(_, w)| w).sum();
    let mut per_probe = Vec::with_capacity(probes.len());
    let mut r_hat = f64::NEG_INFINITY;
    let mut r_hat_stderr = 0.0;
    let mut s_hat: f64 = 0.0;
    let mut delta_hat: Vec<(f64, f64)> = t_list.iter().map(|&t| (t, 0.0)).collect();
    for probe in probes {
        let vals: Vec<f64> = draws.iter().map(|(v, _)| probe.eval(v)).collect();
        let mean_sigma: f64 =
            draws.iter().zip(vals.iter()).map(|((_, w), p)| w * p).sum::<f64>() / wsum;
        let mut var = 0.0;
        for ((_, w), p) in draws.iter().zip(vals.iter()) {
            let d = w * (p - mean_sigma);
            var += d * d;
        }
        let stderr = var.sqrt() / wsum;
        let mean_fs: f64 = fs_draws.iter().map(|v| probe.eval(v)).sum::<f64>() / nsamples as f64;
        if -mean_sigma > r_hat {
            r_hat = -mean_sigma;
            r_hat_stderr = stderr;
        }
        s_hat = s_hat.max((mean_sigma - mean_fs).abs());
        for (t, frac) in delta_hat.iter_mut() {
            let mass: f64 = draws
                .iter()
                .zip(vals.iter())
                .filter(|(_, p)| **p - mean_sigma < -*t)
                .map(|((_, w), _)| w)
                .sum();
            *frac = frac.max(mass / wsum);
        }
        per_probe.push(ProbeStats { name: probe.name.clone(), mean_sigma, stderr, mean_fs });
    }
    Ok(CapacityReport { r_hat, r_hat_stderr, s_hat, delta_hat, per_probe, nsamples })
}
