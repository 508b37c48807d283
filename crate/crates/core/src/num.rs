//! Small shared numeric helpers used across the crate.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

pub type Complex64 = num_complex::Complex<f64>;

/// Hermitian inner product `<a, b> = sum a_i * conj(b_i)`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        s += x * y.conj();
    }
    s
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// Scales `a` to unit Euclidean norm. Returns `false` for the zero vector.
pub fn normalize(a: &mut [Complex64]) -> bool {
    let n = norm(a);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    for x in a.iter_mut() {
        *x /= n;
    }
    true
}

/// Chordal distance between the projective classes of two unit vectors:
/// `sqrt(1 - |<a,b>|^2)`, the sine of the Fubini-Study angle.
pub fn chordal(a: &[Complex64], b: &[Complex64]) -> f64 {
    let c = inner(a, b).norm_sqr();
    (1.0 - c.min(1.0)).max(0.0).sqrt()
}

/// ln(k!) by direct summation; exact to ~1e-14 relative for the desk-scale
/// arguments used here (k up to a few hundred).
pub fn ln_factorial(k: u64) -> f64 {
    let mut s = 0.0;
    for j in 2..=k {
        s += (j as f64).ln();
    }
    s
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
    }
    acc as u64
}

/// Unweighted quantile of a sorted slice by linear interpolation.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Weighted quantile: smallest value whose cumulative weight share reaches `q`.
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap_or(core::cmp::Ordering::Equal));
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return f64::NAN;
    }
    let target = q.clamp(0.0, 1.0) * total;
    let mut acc = 0.0;
    for &i in &idx {
        acc += weights[i];
        if acc >= target {
            return values[i];
        }
    }
    values[*idx.last().unwrap()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_matches_exact() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        let exact = (2.0f64 * 3.0 * 4.0 * 5.0 * 6.0).ln();
        assert!((ln_factorial(6) - exact).abs() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(64, 32), 1832624140942590534);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn weighted_quantile_basics() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let w = [1.0, 1.0, 1.0, 1.0];
        assert_eq!(weighted_quantile(&v, &w, 0.5), 2.0);
        let w2 = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(weighted_quantile(&v, &w2, 0.25), 3.0);
    }
}
