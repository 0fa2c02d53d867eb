//! Real special functions: both real Lambert-W branches, the exponential
//! integral `E1`, and the weighted-exponential (hypoexponential) mixture.

use std::f64::consts::E;

use crate::{Error, Result};

const INV_E: f64 = 1.0 / E;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const MAX_ITER: usize = 64;

/// Relative separation under which two mixture weights count as equal.
pub const CLUSTER_TOL: f64 = 1e-7;
/// Spacing, relative to the largest weight, used to split a cluster.
pub const CLUSTER_SPLIT: f64 = 1e-6;

fn lambert_residual_ok(w: f64, y: f64) -> bool {
    (w * w.exp() - y).abs() <= 1e-12 * y.abs().max(1.0)
}

/// Halley iteration on `w e^w = y` from `w0`. Returns `None` on stagnation.
fn halley(mut w: f64, y: f64) -> Option<f64> {
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - y;
        if lambert_residual_ok(w, y) {
            return Some(w);
        }
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            return None;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            return None;
        }
        let next = w - f / denom;
        if !next.is_finite() {
            return None;
        }
        if (next - w).abs() <= 4.0 * f64::EPSILON * w.abs().max(1.0) {
            w = next;
            return lambert_residual_ok(w, y).then_some(w);
        }
        w = next;
    }
    lambert_residual_ok(w, y).then_some(w)
}

/// Bisection on `w e^w - y` over `[lo, hi]`, monotone on either branch.
fn bisect(mut lo: f64, mut hi: f64, y: f64) -> f64 {
    let g = |w: f64| w * w.exp() - y;
    let increasing = g(hi) > g(lo);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let v = g(mid);
        if (v > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Series for either branch around the branch point, in `p = +-sqrt(2(e y + 1))`.
fn branch_point_series(p: f64) -> f64 {
    -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
}

/// Principal branch `W_0(y)`, `y >= -1/e`, returning `x >= -1` with `x e^x = y`.
pub fn lambert_w0(y: f64) -> Result<f64> {
    if y.is_nan() || y < -INV_E - 1e-15 {
        return Err(Error::domain("lambert_w0", format!("argument {y} below -1/e")));
    }
    if y == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let q = E * y + 1.0;
    if q <= 1e-15 {
        return Ok(-1.0);
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let w0 = if q < 0.3 {
        branch_point_series((2.0 * q).sqrt())
    } else if y < 3.0 {
        // Pade-like start, accurate to a few digits on [-0.25, 3].
        let l = (1.0 + y).ln();
        l * (1.0 - l.ln_1p() / (2.0 + l))
    } else {
        let l1 = y.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    if let Some(w) = halley(w0, y) {
        return Ok(w.max(-1.0));
    }
    let hi = if y <= E { 1.0 } else { y.ln() };
    Ok(bisect(-1.0, hi, y))
}

/// Lower branch `W_{-1}(y)`, `-1/e <= y < 0`, returning `x <= -1`.
pub fn lambert_wm1(y: f64) -> Result<f64> {
    if y.is_nan() || y < -INV_E - 1e-15 || y >= 0.0 {
        return Err(Error::domain("lambert_wm1", format!("argument {y} outside [-1/e, 0)")));
    }
    let q = E * y + 1.0;
    if q <= 1e-15 {
        return Ok(-1.0);
    }
    let w0 = if q < 0.3 {
        branch_point_series(-(2.0 * q).sqrt())
    } else {
        let l1 = (-y).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };
    if let Some(w) = halley(w0, y) {
        return Ok(w.min(-1.0));
    }
    // For y in [-1/e, 0) the root lies in [ln(-y) - 2 ln(-ln(-y)) - 5, -1].
    let l1 = (-y).ln();
    let lo = (l1 - 2.0 * (-l1).max(1.0).ln() - 5.0).min(-1.0 - 1e-9).min(2.0 * l1);
    Ok(bisect(lo, -1.0, y))
}

/// `E1(x)` for `x > 0` via its power series (`x <= 1`) or a Lentz continued
/// fraction (`x > 1`). Underflows to 0 for `x` beyond ~745; use
/// [`exp_scaled_e1`] for the scaled form.
pub fn exp_e1(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::domain("exp_e1", format!("argument {x} must be positive")));
    }
    if x <= 1.0 {
        Ok(e1_series(x))
    } else {
        Ok((-x).exp() * e1_scaled_cf(x))
    }
}

/// `e^x E1(x)` for `x > 0`, computed without underflow for large `x`.
pub fn exp_scaled_e1(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::domain("exp_scaled_e1", format!("argument {x} must be positive")));
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if x <= 1.0 {
        Ok(x.exp() * e1_series(x))
    } else {
        Ok(e1_scaled_cf(x))
    }
}

fn e1_series(x: f64) -> f64 {
    // E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// `e^x E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...)))`, modified Lentz.
fn e1_scaled_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Weights `lambda_i` and coefficients `a_i` of the density
/// `sum_i a_i exp(-x / lambda_i)` of `sum_i lambda_i E_i` with `E_i` i.i.d.
/// unit exponentials.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpMixture {
    pub lambdas: Vec<f64>,
    pub coeffs: Vec<f64>,
}

impl ExpMixture {
    /// `sum_i a_i lambda_i`, which equals one for a valid mixture.
    pub fn normalization(&self) -> f64 {
        self.lambdas.iter().zip(&self.coeffs).map(|(l, a)| l * a).sum()
    }

    /// `sum_i |a_i lambda_i|`: magnification of rounding error in the CDF sum.
    pub fn condition(&self) -> f64 {
        self.lambdas.iter().zip(&self.coeffs).map(|(l, a)| (l * a).abs()).sum()
    }
}

/// Split weights closer than `CLUSTER_TOL * max` apart by spacing cluster
/// members `CLUSTER_SPLIT * max` apart. Returns the weights sorted ascending.
pub fn separate_weights(lambdas: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = lambdas.to_vec();
    out.sort_by(f64::total_cmp);
    let max = *out.last().unwrap_or(&0.0);
    let tol = CLUSTER_TOL * max;
    let step = CLUSTER_SPLIT * max;
    for _ in 0..8 {
        let mut changed = false;
        let mut i = 0;
        while i < out.len() {
            let mut j = i + 1;
            while j < out.len() && out[j] - out[j - 1] <= tol {
                j += 1;
            }
            if j - i > 1 {
                let base = out[i];
                for (k, v) in out[i..j].iter_mut().enumerate() {
                    *v = base + k as f64 * step;
                }
                changed = true;
            }
            i = j;
        }
        out.sort_by(f64::total_cmp);
        if !changed {
            break;
        }
    }
    out
}

/// Mixture coefficients `a_i = lambda_i^{L-2} / prod_{j != i}(lambda_i - lambda_j)`
/// (`a = 1/lambda` when `L = 1`). Near-equal weights are split first with
/// [`separate_weights`].
pub fn exp_mix_coeffs(lambdas: &[f64]) -> Result<ExpMixture> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty weight list".into()));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::InvalidArgument(format!("weights must be positive, got {bad}")));
    }
    let lambdas = separate_weights(lambdas);
    let l = lambdas.len();
    if l == 1 {
        return Ok(ExpMixture { coeffs: vec![1.0 / lambdas[0]], lambdas });
    }
    let coeffs = (0..l)
        .map(|i| {
            let li = lambdas[i];
            let denom: f64 = (0..l).filter(|&j| j != i).map(|j| li - lambdas[j]).product();
            li.powi(l as i32 - 2) / denom
        })
        .collect();
    Ok(ExpMixture { lambdas, coeffs })
}

/// Above this `sum |a_i lambda_i|` the alternating closed-form sum loses more
/// than ~1e-9 to cancellation.
const CANCELLATION_LIMIT: f64 = 1e6;

/// `1 - e_1^T exp(T t) 1` for the bidiagonal phase-type generator `T` with
/// rates `1/lambda_i`; equal to the mixture CDF and free of cancellation.
fn phase_type_cdf(lambdas: &[f64], t: f64) -> f64 {
    let l = lambdas.len();
    let mut gen = nalgebra::DMatrix::<f64>::zeros(l, l);
    for (i, lam) in lambdas.iter().enumerate() {
        gen[(i, i)] = -t / lam;
        if i + 1 < l {
            gen[(i, i + 1)] = t / lam;
        }
    }
    let e = gen.exp();
    1.0 - e.row(0).sum()
}

/// `P(sum_i lambda_i E_i <= t) = sum_i a_i lambda_i (1 - exp(-t/lambda_i))`,
/// clamped to `[0, 1]`.
pub fn exp_mix_cdf(mix: &ExpMixture, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("cdf argument must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    if t == f64::INFINITY {
        return Ok(1.0);
    }
    if mix.lambdas.len() == 1 {
        return Ok(-(-t / mix.lambdas[0]).exp_m1());
    }
    if mix.condition() > CANCELLATION_LIMIT {
        return Ok(phase_type_cdf(&mix.lambdas, t).clamp(0.0, 1.0));
    }
    let v: f64 = mix
        .lambdas
        .iter()
        .zip(&mix.coeffs)
        .map(|(l, a)| a * l * -(-t / l).exp_m1())
        .sum();
    Ok(v.clamp(0.0, 1.0))
}
