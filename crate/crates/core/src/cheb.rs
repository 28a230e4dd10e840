//! Chebyshev collocation primitives: Gauss–Lobatto nodes, value-to-coefficient
//! transforms, Clenshaw evaluation and spectral differentiation.

use crate::geom::Interval;
use serde::{Deserialize, Serialize};

/// Chebyshev–Gauss–Lobatto nodes on `[-1, 1]`, ascending, `n + 1` points.
pub fn lobatto_nodes(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![0.0];
    }
    (0..=n)
        .map(|j| -(std::f64::consts::PI * j as f64 / n as f64).cos())
        .collect()
}

/// Coefficients of the degree-`n` interpolant through values at Lobatto nodes.
///
/// `values[j]` is the sample at the ascending node `-cos(pi j / n)`.
pub fn transform(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    if n == 0 {
        return vec![values[0]];
    }
    // Reorder to the classical descending nodes cos(pi j / n).
    let v: Vec<f64> = (0..=n).map(|j| values[n - j]).collect();
    let mut coeffs = vec![0.0; n + 1];
    let pi_n = std::f64::consts::PI / n as f64;
    for (k, c) in coeffs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &vj) in v.iter().enumerate() {
            let w = if j == 0 || j == n { 0.5 } else { 1.0 };
            acc += w * vj * (pi_n * (j * k) as f64).cos();
        }
        let pk = if k == 0 || k == n { 2.0 } else { 1.0 };
        *c = 2.0 * acc / (pk * n as f64);
    }
    coeffs
}

/// Clenshaw evaluation of a Chebyshev series at `s` in `[-1, 1]`.
pub fn clenshaw(coeffs: &[f64], s: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * s * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    coeffs[0] + s * b1 - b2
}

/// Coefficients of the derivative series (with respect to the unit variable).
pub fn differentiate(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    if n <= 1 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n - 1];
    let mut prev2 = 0.0; // d_{k+2}
    let mut prev1 = 0.0; // d_{k+1}
    for k in (0..n - 1).rev() {
        let dk = prev2 + 2.0 * (k as f64 + 1.0) * coeffs[k + 1];
        prev2 = prev1;
        prev1 = dk;
        d[k] = dk;
    }
    d[0] *= 0.5;
    d
}

/// Drop trailing coefficients below `tol` relative to the largest magnitude.
pub fn trim(coeffs: &[f64], tol: f64) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1e-300);
    let mut last = 0;
    for (k, c) in coeffs.iter().enumerate() {
        if c.abs() > tol * scale {
            last = k;
        }
    }
    coeffs[..=last].to_vec()
}

/// Univariate Chebyshev interpolant on an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cheb1 {
    pub interval: Interval,
    pub coeffs: Vec<f64>,
}

impl Cheb1 {
    pub fn constant(interval: Interval, value: f64) -> Self {
        Cheb1 {
            interval,
            coeffs: vec![value],
        }
    }

    pub fn fit(interval: Interval, degree: usize, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = lobatto_nodes(degree)
            .into_iter()
            .map(|s| f(interval.from_unit(s)))
            .collect();
        Cheb1 {
            interval,
            coeffs: trim(&transform(&values), 1e-14),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        clenshaw(&self.coeffs, self.interval.to_unit(x))
    }

    pub fn deriv(&self) -> Cheb1 {
        let mut coeffs = differentiate(&self.coeffs);
        let scale = 2.0 / self.interval.len();
        for c in &mut coeffs {
            *c *= scale;
        }
        Cheb1 {
            interval: self.interval,
            coeffs,
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Range of the interpolant over its interval, estimated on a dense grid.
    pub fn range(&self, samples: usize) -> Interval {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=samples {
            let x = self.interval.lo + self.interval.len() * i as f64 / samples as f64;
            let v = self.eval(x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Interval::new(lo, hi)
    }
}
