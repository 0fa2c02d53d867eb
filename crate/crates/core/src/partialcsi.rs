//! Partial-CSI design: the BS knows its loopback channel and the MS its own
//! loopback gain, but only spatial covariances of the data channels are
//! known at the transmitters.
//!
//! The MS rate is optimized in the ergodic sense and the BS rate is held to
//! an outage target `rho`. The exact outage is a hypoexponential CDF in the
//! eigenvalues of `Phi`; the optimizer works with its Chernoff bound, which
//! turns the constraint into a determinant-root cone for fixed `(alpha, beta)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conic::{self, DetRootConstraint, HermitianSdp, SdpStatus, Sense};
use crate::linalg::{hermitian_eigen, outer, psd_sqrt, quad_form, trace_prod};
use crate::model::{
    cscg, isotropic_harvest_gain, ms_transmit_power, BeamformerSolution, CovarianceModel, MethodTag,
    SystemParams,
};
use crate::specfun::{exp_mix_cdf, exp_mix_coeffs, exp_scaled_e1};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Eigenvalues of `Phi` below this fraction of the largest are treated as
/// zero; their exponential components carry no probability mass at the
/// thresholds of interest.
pub const SPECTRUM_FLOOR: f64 = 1e-12;

/// Default number of log-spaced nonzero `beta` grid points.
pub const DEFAULT_BETA_POINTS: usize = 64;

/// Decades covered by the log-spaced `beta` grid below `L / gamma_bar`.
pub const BETA_DECADES: f64 = 6.0;

/// Default `alpha` grid step.
pub const DEFAULT_ALPHA_STEP: f64 = 0.01;

/// Tolerance on the Chernoff bound when re-verifying an extracted beamformer.
const BOUND_TOL: f64 = 1e-6;

const RANDOMIZATION_SEED: u64 = 0xbeef;

/// One link realization under partial CSI.
#[derive(Debug, Clone)]
pub struct PartialCsiInstance {
    pub cov: CovarianceModel,
    /// Loopback matrix `H_B` (`N_r x N_t`), known at the BS.
    pub h_li_bs: CMatrix,
    /// Loopback gain `h_m`, known at the MS.
    pub h_li_ms: C64,
    pub params: SystemParams,
    /// `E[tr(H_BM H_BM^H)] / N_t`.
    pub harvest_gain: f64,
}

impl PartialCsiInstance {
    pub fn new(cov: CovarianceModel, h_li_bs: CMatrix, h_li_ms: C64, params: SystemParams) -> Result<Self> {
        params.validate()?;
        let (nt, nr) = (params.n_tx, params.n_rx());
        if cov.cov_b.shape() != (nt, nt) || cov.cov_m.shape() != (nr, nr) {
            return Err(Error::Dimension(format!(
                "covariances are {:?} and {:?}, expected {nt}x{nt} and {nr}x{nr}",
                cov.cov_b.shape(),
                cov.cov_m.shape()
            )));
        }
        if h_li_bs.shape() != (nr, nt) {
            return Err(Error::Dimension(format!("H_B is {:?}, expected {nr}x{nt}", h_li_bs.shape())));
        }
        let harvest_gain = isotropic_harvest_gain(&params);
        if !(harvest_gain > 0.0) {
            return Err(Error::InvalidArgument("harvest gain must be positive".into()));
        }
        Ok(PartialCsiInstance { cov, h_li_bs, h_li_ms, params, harvest_gain })
    }

    /// Draw the loopback channels with the configured residual variances.
    pub fn sample<R: Rng + ?Sized>(cov: &CovarianceModel, params: &SystemParams, rng: &mut R) -> Result<Self> {
        let h_li_bs = CMatrix::from_fn(params.n_rx(), params.n_tx, |_, _| cscg(rng, params.sigma2_li_bs));
        let h_li_ms = cscg(rng, params.sigma2_li_ms);
        Self::new(cov.clone(), h_li_bs, h_li_ms, params.clone())
    }

    pub fn ms_power(&self, alpha: f64) -> Result<f64> {
        ms_transmit_power(alpha, &self.params, self.harvest_gain)
    }

    /// Outage threshold `gamma_bar = (2^{gamma_B/(1-alpha)} - 1) / p_m` on
    /// `h_M^H (sigma2_b I + a a^H)^{-1} h_M`; infinite when `p_m = 0` and
    /// `gamma_B > 0`.
    pub fn gamma_bar(&self, alpha: f64) -> Result<f64> {
        let p_m = self.ms_power(alpha)?;
        let num = (self.params.gamma_b / (1.0 - alpha)).exp2() - 1.0;
        if num == 0.0 {
            return Ok(0.0);
        }
        Ok(if p_m > 0.0 { num / p_m } else { f64::INFINITY })
    }

    /// Number of positive eigenvalues of `Cov_M`, which is also the rank of
    /// `Phi` for every beamformer.
    pub fn outage_order(&self) -> usize {
        let v = hermitian_eigen(&self.cov.cov_m).values;
        let top = v[0].max(0.0);
        v.iter().filter(|&&l| l > SPECTRUM_FLOOR * top).count()
    }
}

/// Spectrum of the BS outage event for one beamformer and time split.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageSpectrum {
    pub phi: CMatrix,
    /// Positive eigenvalues of `phi`, descending.
    pub lambdas: Vec<f64>,
    pub gamma_bar: f64,
}

impl OutageSpectrum {
    pub fn from_phi(phi: CMatrix, gamma_bar: f64) -> Self {
        let v = hermitian_eigen(&phi).values;
        let top = v[0].max(0.0);
        let lambdas = v.into_iter().filter(|&l| l > SPECTRUM_FLOOR * top).collect();
        OutageSpectrum { phi, lambdas, gamma_bar }
    }

    pub fn order(&self) -> usize {
        self.lambdas.len()
    }
}

/// `e^x E1(x) (1 - alpha) / ln 2` with `x = (sigma2_m + p_m |h_m|^2) / gain`.
pub fn ergodic_rate_for_gain(inst: &PartialCsiInstance, gain: f64, alpha: f64) -> Result<f64> {
    if !(gain > 0.0) {
        return Err(Error::InvalidArgument(format!("beamformer gain must be positive, got {gain}")));
    }
    let p_m = inst.ms_power(alpha)?;
    let x = (inst.params.sigma2_m + p_m * inst.h_li_ms.norm_sqr()) / gain;
    Ok((1.0 - alpha) * exp_scaled_e1(x)? / std::f64::consts::LN_2)
}

/// Ergodic MS rate of beamformer `w` under Rayleigh `h_B ~ CN(0, Cov_B)`.
pub fn ergodic_ms_rate(inst: &PartialCsiInstance, w: &CVector, alpha: f64) -> Result<f64> {
    ergodic_rate_for_gain(inst, quad_form(&inst.cov.cov_b, w), alpha)
}

/// `Phi = Cov_M^{1/2} (sigma2_b I + a a^H)^{-1} Cov_M^{1/2}` with `a = H_B w`,
/// through the rank-one inverse update. The part of the update along `a` is
/// kept separate from its complement so a tiny `sigma2_b` does not cancel.
pub fn phi_matrix(inst: &PartialCsiInstance, w: &CVector) -> CMatrix {
    let r = psd_sqrt(&inst.cov.cov_m, 0.0);
    phi_with_root(&r, &(&inst.h_li_bs * w), inst.params.sigma2_b)
}

fn phi_with_root(r: &CMatrix, a: &CVector, s2: f64) -> CMatrix {
    let n = a.len();
    let a2 = a.norm_squared();
    let inner = if a2 == 0.0 {
        CMatrix::identity(n, n)
    } else {
        let p = outer(a) / C64::from(a2);
        CMatrix::identity(n, n) - &p + p * C64::from(s2 / (s2 + a2))
    };
    r * inner * r / C64::from(s2)
}

/// [`phi_matrix`] through a dense inverse; only accurate when the leakage is
/// not many orders above the noise floor.
pub fn phi_matrix_direct(inst: &PartialCsiInstance, w: &CVector) -> Result<CMatrix> {
    let r = psd_sqrt(&inst.cov.cov_m, 0.0);
    let a = &inst.h_li_bs * w;
    let n = a.len();
    let m = CMatrix::identity(n, n) * C64::from(inst.params.sigma2_b) + outer(&a);
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("singular BS interference covariance".into()))?;
    Ok(&r * inv * &r)
}

pub fn outage_spectrum(inst: &PartialCsiInstance, w: &CVector, alpha: f64) -> Result<OutageSpectrum> {
    Ok(OutageSpectrum::from_phi(phi_matrix(inst, w), inst.gamma_bar(alpha)?))
}

/// Exact BS outage `P(sum_i lambda_i E_i < gamma_bar)`.
pub fn outage_exact(spec: &OutageSpectrum) -> Result<f64> {
    if spec.gamma_bar == 0.0 {
        return Ok(0.0);
    }
    if spec.lambdas.is_empty() || spec.gamma_bar == f64::INFINITY {
        return Ok(1.0);
    }
    exp_mix_cdf(&exp_mix_coeffs(&spec.lambdas)?, spec.gamma_bar)
}

/// Chernoff bound `e^{beta gamma_bar} / det(I + beta Phi)` on the outage.
pub fn chernoff_bound(spec: &OutageSpectrum, beta: f64) -> f64 {
    if beta == 0.0 {
        return 1.0;
    }
    let log: f64 = beta * spec.gamma_bar - spec.lambdas.iter().map(|l| (beta * l).ln_1p()).sum::<f64>();
    log.exp()
}

/// Minimizer of [`chernoff_bound`] over `beta` in `[0, L / gamma_bar]`.
///
/// The log-bound is convex in `beta` with derivative
/// `gamma_bar - sum_i lambda_i / (1 + beta lambda_i)`, positive at the right
/// end of the interval, so the minimizer is `0` when the derivative at zero
/// is nonnegative and the unique root otherwise.
pub fn chernoff_optimal_beta(spec: &OutageSpectrum) -> Result<f64> {
    let g = spec.gamma_bar;
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma_bar must be positive and finite, got {g}")));
    }
    let slope = |b: f64| g - spec.lambdas.iter().map(|l| l / (1.0 + b * l)).sum::<f64>();
    if slope(0.0) >= 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, spec.order() as f64 / g);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `beta = 0` followed by `n_points` log-spaced values ending at `L / gamma_bar`.
pub fn beta_grid(order: usize, gamma_bar: f64, n_points: usize) -> Vec<f64> {
    let mut grid = vec![0.0];
    if !(gamma_bar > 0.0 && gamma_bar.is_finite()) || n_points == 0 || order == 0 {
        return grid;
    }
    let top = order as f64 / gamma_bar;
    for k in 0..n_points {
        let t = if n_points == 1 { 1.0 } else { k as f64 / (n_points - 1) as f64 };
        grid.push(top * 10f64.powf(-BETA_DECADES * (1.0 - t)));
    }
    grid
}

/// `alpha = 0, step, 2 step, ...` below one.
pub fn alpha_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha step must lie in (0, 1), got {step}")));
    }
    Ok((0..).map(|k| k as f64 * step).take_while(|&a| a < 1.0 - 1e-12).collect())
}

/// Result of the beamforming problem for a fixed `(alpha, beta)`.
#[derive(Debug, Clone)]
pub struct OutageSdrSolution {
    /// Lifted solution `W`, in watts.
    pub w_lifted: CMatrix,
    pub w: CVector,
    /// `w^H Cov_B w`.
    pub gain: f64,
    pub rank_ratio: f64,
    pub feasible: bool,
}

impl OutageSdrSolution {
    fn infeasible(nt: usize) -> Self {
        OutageSdrSolution {
            w_lifted: CMatrix::zeros(nt, nt),
            w: CVector::zeros(nt),
            gain: 0.0,
            rank_ratio: 0.0,
            feasible: false,
        }
    }
}

/// Chernoff ceiling test for many beamformers at one `(alpha, beta)`.
///
/// With `A = sigma2_b I + beta Cov_M` and `a = H_B w`,
/// `det(I + beta Phi) = det(A) (1 + a^H A^{-1} a) / (sigma2_b^{N_r} (1 + ||a||^2 / sigma2_b))`,
/// and `A` is diagonal in the eigenbasis of `Cov_M`, so each test costs one
/// matrix-vector product and every term stays positive.
struct BoundCheck {
    /// `U^H H_B`, with `Cov_M = U diag(mu) U^H`.
    proj: CMatrix,
    /// `1 / (sigma2_b + beta mu_i)`.
    inv_a: Vec<f64>,
    /// `beta gamma_bar - sum_i ln(1 + beta mu_i / sigma2_b) - ln rho`.
    offset: f64,
    sigma2_b: f64,
    h_li_bs: CMatrix,
}

impl BoundCheck {
    fn new(inst: &PartialCsiInstance, gamma_bar: f64, beta: f64) -> Self {
        let s2 = inst.params.sigma2_b;
        let eig = hermitian_eigen(&inst.cov.cov_m);
        let mu: Vec<f64> = eig.values.iter().map(|m| m.max(0.0)).collect();
        BoundCheck {
            proj: eig.vectors.adjoint() * &inst.h_li_bs,
            inv_a: mu.iter().map(|m| 1.0 / (s2 + beta * m)).collect(),
            // At beta = 0 the bound is one whatever gamma_bar is (possibly infinite).
            offset: if beta == 0.0 { 0.0 } else { beta * gamma_bar - mu.iter().map(|m| (beta * m / s2).ln_1p()).sum::<f64>() }
                - inst.params.rho.ln(),
            sigma2_b: s2,
            h_li_bs: inst.h_li_bs.clone(),
        }
    }

    /// `ln(bound / rho)`.
    fn log_ratio(&self, w: &CVector) -> f64 {
        let pa = &self.proj * w;
        let q: f64 = pa.iter().zip(&self.inv_a).map(|(x, d)| x.norm_sqr() * d).sum();
        let a2 = (&self.h_li_bs * w).norm_squared();
        self.offset - q.ln_1p() + (a2 / self.sigma2_b).ln_1p()
    }

    fn holds(&self, w: &CVector) -> bool {
        self.log_ratio(w) <= BOUND_TOL.ln_1p()
    }
}

/// Maximize `tr(Cov_B W)` subject to the Chernoff outage ceiling written as
///
/// ```text
/// det((I + (beta/sigma2_b) Cov_M) s(W) - (beta/sigma2_b) Cov_M^{1/2} H_B W H_B^H Cov_M^{1/2})^{1/N_r}
///     >= rho^{-1/N_r} e^{beta gamma_bar / N_r} s(W),
/// s(W) = sigma2_b + tr(W H_B^H H_B),   tr W <= P,   W >= 0.
/// ```
///
/// When the dominant eigenvector of `Cov_B` at full power already meets the
/// ceiling it is returned without a solve, and `(alpha, beta)` pairs where
/// even zero leakage misses the ceiling are rejected up front.
pub fn solve_outage_sdr(inst: &PartialCsiInstance, alpha: f64, beta: f64) -> Result<OutageSdrSolution> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be nonnegative, got {beta}")));
    }
    let params = &inst.params;
    let (nt, nr) = (params.n_tx, params.n_rx());
    let gamma_bar = inst.gamma_bar(alpha)?;
    let s2 = params.sigma2_b;
    let p = params.p_bs;
    let cov_m = &inst.cov.cov_m;
    let root = psd_sqrt(cov_m, 0.0);

    // Zero leakage maximizes det(I + beta Phi).
    let log_best = beta * gamma_bar
        - hermitian_eigen(cov_m).values.iter().map(|l| (beta * l.max(0.0) / s2).ln_1p()).sum::<f64>();
    if beta > 0.0 && !(log_best <= params.rho.ln() + BOUND_TOL) {
        return Ok(OutageSdrSolution::infeasible(nt));
    }
    if beta == 0.0 && params.rho < 1.0 {
        return Ok(OutageSdrSolution::infeasible(nt));
    }

    let check = BoundCheck::new(inst, gamma_bar, beta);
    let eig_b = hermitian_eigen(&inst.cov.cov_b);
    let top: CVector = eig_b.vectors.column(0).into_owned() * C64::from(p.sqrt());
    if check.holds(&top) {
        return Ok(OutageSdrSolution {
            w_lifted: outer(&top),
            gain: eig_b.values[0] * p,
            w: top,
            rank_ratio: 0.0,
            feasible: true,
        });
    }

    // W = P W'; both sides of the cone are divided by kappa.
    let g = inst.h_li_bs.adjoint() * &inst.h_li_bs;
    let kappa = s2 + p * hermitian_eigen(&g).values[0].max(0.0);
    let m_scale = CMatrix::identity(nr, nr) + cov_m * C64::from(beta / s2);
    let hl = &root * &inst.h_li_bs;
    let m_const = &m_scale * C64::from(s2 / kappa);
    let lin = {
        let (m_scale, g, hl) = (m_scale.clone(), g.clone(), hl.clone());
        move |v: &CMatrix| {
            &m_scale * C64::from(p / kappa * trace_prod(v, &g))
                - &hl * v * hl.adjoint() * C64::from(beta * p / (s2 * kappa))
        }
    };
    let c = (beta * gamma_bar / nr as f64 - params.rho.ln() / nr as f64).exp();
    let detroot = DetRootConstraint::new(nt, m_const, lin, s2 / kappa, &g * C64::from(p / kappa), c);

    let cb_norm = eig_b.values[0];
    let mut sdp = HermitianSdp::new(&inst.cov.cov_b / C64::from(cb_norm), Sense::Maximize);
    sdp.ineq_constraints.push((CMatrix::identity(nt, nt), 1.0));
    sdp.detroot_constraint = Some(detroot);
    let sol = conic::solve(&sdp)?;
    if sol.status != SdpStatus::Optimal {
        return Ok(OutageSdrSolution::infeasible(nt));
    }
    let v = &sol.v * C64::from(p);
    let budget = v.trace().re.max(0.0);
    if !(budget > 0.0) {
        return Ok(OutageSdrSolution::infeasible(nt));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(RANDOMIZATION_SEED);
    let scorer = |w: &CVector| check.holds(w).then(|| quad_form(&inst.cov.cov_b, w));
    let (w, rank_ratio) = conic::extract_rank_one(&v, budget, scorer, &mut rng)?;
    if !check.holds(&w) {
        return Ok(OutageSdrSolution { rank_ratio, ..OutageSdrSolution::infeasible(nt) });
    }
    Ok(OutageSdrSolution { gain: quad_form(&inst.cov.cov_b, &w), w_lifted: v, w, rank_ratio, feasible: true })
}

/// Best design for one outage target.
#[derive(Debug, Clone, Serialize)]
pub struct PartialCsiSolution {
    #[serde(skip)]
    pub solution: BeamformerSolution,
    pub rho: f64,
    pub ms_rate: f64,
    pub alpha: f64,
    pub beta: f64,
    pub chernoff_bound: f64,
    pub exact_outage: f64,
    pub feasible: bool,
}

/// Search the `(alpha, beta)` grid for the largest ergodic MS rate whose
/// Chernoff bound stays below `rho`. For each `alpha` the `beta` grid is
/// `0` plus `beta_points` log-spaced values on `(0, L / gamma_bar]`.
///
/// For fixed gain the rate falls with `alpha`, so the full-power dominant
/// eigenvector gives an upper bound per `alpha` and the scan stops once that
/// bound drops below the best rate found.
pub fn joint_partial_csi(
    inst: &PartialCsiInstance,
    alpha_grid: &[f64],
    beta_points: usize,
) -> Result<PartialCsiSolution> {
    if alpha_grid.is_empty() {
        return Err(Error::InvalidArgument("empty alpha grid".into()));
    }
    let params = &inst.params;
    let order = inst.outage_order();
    let max_gain = hermitian_eigen(&inst.cov.cov_b).values[0] * params.p_bs;

    let mut alphas = alpha_grid.to_vec();
    alphas.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64, f64, OutageSdrSolution)> = None;
    for &alpha in &alphas {
        let upper = ergodic_rate_for_gain(inst, max_gain, alpha)?;
        if best.as_ref().is_some_and(|b| b.0 >= upper) {
            break;
        }
        let gamma_bar = inst.gamma_bar(alpha)?;
        for beta in beta_grid(order, gamma_bar, beta_points) {
            let sol = solve_outage_sdr(inst, alpha, beta)?;
            if !sol.feasible {
                continue;
            }
            let rate = ergodic_rate_for_gain(inst, sol.gain, alpha)?;
            if best.as_ref().is_none_or(|b| rate > b.0) {
                best = Some((rate, alpha, beta, sol));
            }
            if rate >= upper * (1.0 - 1e-12) {
                break;
            }
        }
    }
    let Some((rate, alpha, beta, sol)) = best else {
        return Ok(PartialCsiSolution {
            solution: BeamformerSolution::infeasible(MethodTag::PartialCsi, f64::NAN, params.gamma_b),
            rho: params.rho,
            ms_rate: 0.0,
            alpha: f64::NAN,
            beta: f64::NAN,
            chernoff_bound: f64::NAN,
            exact_outage: f64::NAN,
            feasible: false,
        });
    };
    let spec = outage_spectrum(inst, &sol.w, alpha)?;
    Ok(PartialCsiSolution {
        solution: BeamformerSolution {
            w: sol.w,
            alpha,
            ms_rate: rate,
            bs_rate_or_target: params.gamma_b,
            rank_ratio: sol.rank_ratio,
            feasible: true,
            method_tag: MethodTag::PartialCsi,
        },
        rho: params.rho,
        ms_rate: rate,
        alpha,
        beta,
        chernoff_bound: chernoff_bound(&spec, beta),
        exact_outage: outage_exact(&spec)?,
        feasible: true,
    })
}

/// One [`joint_partial_csi`] point per outage target, in the order given.
pub fn tradeoff_sweep(
    inst: &PartialCsiInstance,
    rho_grid: &[f64],
    alpha_grid: &[f64],
    beta_points: usize,
) -> Result<Vec<PartialCsiSolution>> {
    rho_grid
        .iter()
        .map(|&rho| {
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(Error::InvalidArgument(format!("rho must lie in (0, 1], got {rho}")));
            }
            let mut local = inst.clone();
            local.params.rho = rho;
            joint_partial_csi(&local, alpha_grid, beta_points)
        })
        .collect()
}

/// Smallest exact outage among the feasible points of one curve.
pub fn min_exact_outage(points: &[PartialCsiSolution]) -> Option<f64> {
    points.iter().filter(|p| p.feasible).map(|p| p.exact_outage).min_by(f64::total_cmp)
}

/// Ergodic rate at a given exact outage, by linear interpolation along one
/// curve's feasible points ordered by exact outage. `None` when the target is
/// outside the achieved outage range.
pub fn rate_at_exact_outage(points: &[PartialCsiSolution], target: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> =
        points.iter().filter(|p| p.feasible).map(|p| (p.exact_outage, p.ms_rate)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (first, last) = (pts.first()?, pts.last()?);
    if target < first.0 || target > last.0 {
        return None;
    }
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if target <= x1 {
            if x1 == x0 {
                return Some(y0.max(y1));
            }
            return Some(y0 + (y1 - y0) * (target - x0) / (x1 - x0));
        }
    }
    Some(last.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig_instance(n_tx: usize, dbm: f64, gamma_b: f64, seed: u64) -> PartialCsiInstance {
        let mut params = SystemParams::reference(n_tx, dbm);
        params.gamma_b = gamma_b;
        let d = std::f64::consts::PI / 180.0;
        let cov = CovarianceModel::new(&params, 5.0 * d, 15.0 * d, 10.0 * d, 10.0 * d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PartialCsiInstance::sample(&cov, &params, &mut rng).unwrap()
    }

    #[test]
    fn ergodic_rate_at_unit_argument() {
        let inst = fig_instance(2, 10.0, 3.0, 1);
        let alpha = 0.2;
        let p_m = inst.ms_power(alpha).unwrap();
        let gain = inst.params.sigma2_m + p_m * inst.h_li_ms.norm_sqr();
        let rate = ergodic_rate_for_gain(&inst, gain, alpha).unwrap();
        // e E1(1) from tabulated E1(1) = 0.21938393439552029.
        let expect = 0.8 * std::f64::consts::E * 0.219_383_934_395_520_3 / std::f64::consts::LN_2;
        assert!((rate - expect).abs() < 1e-12);
        assert!(ergodic_rate_for_gain(&inst, 2.0 * gain, alpha).unwrap() > rate);
        assert!(ergodic_rate_for_gain(&inst, 0.0, alpha).is_err());
    }

    #[test]
    fn fast_bound_matches_spectrum() {
        let mut inst = fig_instance(2, 10.0, 3.0, 4);
        inst.params.rho = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for alpha in [0.05, 0.2, 0.6] {
            let gb = inst.gamma_bar(alpha).unwrap();
            for beta in beta_grid(inst.outage_order(), gb, 8) {
                let check = BoundCheck::new(&inst, gb, beta);
                for _ in 0..5 {
                    let w = CVector::from_fn(2, |_, _| cscg(&mut rng, 1.0)) * C64::from(inst.params.p_bs.sqrt());
                    let spec = outage_spectrum(&inst, &w, alpha).unwrap();
                    let direct = chernoff_bound(&spec, beta).ln() - inst.params.rho.ln();
                    let fast = check.log_ratio(&w);
                    assert!((fast - direct).abs() <= 1e-9 * direct.abs().max(1.0), "{fast} vs {direct}");
                }
            }
        }
    }

    #[test]
    fn loose_ceiling_allows_no_harvest() {
        let mut inst = fig_instance(2, 10.0, 3.0, 5);
        inst.params.rho = 1.0;
        let sol = solve_outage_sdr(&inst, 0.0, 0.0).unwrap();
        assert!(sol.feasible);
        let best = joint_partial_csi(&inst, &alpha_grid(0.1).unwrap(), 8).unwrap();
        assert_eq!(best.alpha, 0.0);
        assert_eq!(best.exact_outage, 1.0);
    }

    #[test]
    fn phi_without_leakage() {
        let inst = fig_instance(3, 0.0, 1.0, 2);
        let phi = phi_matrix(&inst, &CVector::zeros(3));
        let expect = &inst.cov.cov_m / C64::from(inst.params.sigma2_b);
        assert!(crate::linalg::fro_norm(&(phi - &expect)) <= 1e-10 * crate::linalg::fro_norm(&expect));
    }

    #[test]
    fn phi_paths_agree_when_well_conditioned() {
        let mut inst = fig_instance(2, 0.0, 1.0, 3);
        inst.params.sigma2_b = 1.0;
        inst.h_li_bs /= C64::from(inst.params.p_bs.sqrt());
        let w = CVector::from_vec(vec![C64::new(0.02, 0.01), C64::new(-0.01, 0.015)]);
        let a = phi_matrix(&inst, &w);
        let b = phi_matrix_direct(&inst, &w).unwrap();
        assert!(crate::linalg::fro_norm(&(&a - &b)) <= 1e-10 * crate::linalg::fro_norm(&b));
    }

    #[test]
    fn single_eigenvalue_outage_and_bound() {
        let spec = OutageSpectrum { phi: CMatrix::identity(1, 1), lambdas: vec![1.0], gamma_bar: 0.5 };
        let exact = outage_exact(&spec).unwrap();
        assert!((exact - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert_eq!(chernoff_bound(&spec, 0.0), 1.0);
        let beta = chernoff_optimal_beta(&spec).unwrap();
        assert!((beta - 1.0).abs() < 1e-12);
        assert!(chernoff_bound(&spec, beta) >= exact);
        let zero = OutageSpectrum { gamma_bar: 0.0, ..spec.clone() };
        assert_eq!(outage_exact(&zero).unwrap(), 0.0);
        let loose = OutageSpectrum { gamma_bar: 2.0, ..spec };
        assert_eq!(chernoff_optimal_beta(&loose).unwrap(), 0.0);
    }

    #[test]
    fn beta_grid_shape() {
        let g = beta_grid(4, 2.0, 64);
        assert_eq!(g.len(), 65);
        assert_eq!(g[0], 0.0);
        assert!((g[64] - 2.0).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(beta_grid(4, f64::INFINITY, 64), vec![0.0]);
    }

    #[test]
    fn vacuous_ceiling_gives_dominant_eigenvector() {
        let mut inst = fig_instance(3, 10.0, 3.0, 4);
        inst.params.rho = 1.0;
        let sol = solve_outage_sdr(&inst, 0.1, 0.0).unwrap();
        assert!(sol.feasible);
        let top = hermitian_eigen(&inst.cov.cov_b).values[0] * inst.params.p_bs;
        assert!((sol.gain - top).abs() <= 1e-12 * top);
    }

    #[test]
    fn impossible_ceiling_is_infeasible() {
        let mut inst = fig_instance(2, 0.0, 1.0, 5);
        inst.params.rho = 1e-12;
        let gb = inst.gamma_bar(0.05).unwrap();
        for beta in beta_grid(inst.outage_order(), gb, 8) {
            assert!(!solve_outage_sdr(&inst, 0.05, beta).unwrap().feasible);
        }
    }

    #[test]
    fn solver_meets_binding_ceiling() {
        let mut inst = fig_instance(3, 10.0, 3.0, 6);
        inst.params.rho = 0.1;
        let alpha = 0.3;
        let gb = inst.gamma_bar(alpha).unwrap();
        let mut found = false;
        for beta in beta_grid(inst.outage_order(), gb, 16) {
            let sol = solve_outage_sdr(&inst, alpha, beta).unwrap();
            if !sol.feasible {
                continue;
            }
            found = true;
            let spec = outage_spectrum(&inst, &sol.w, alpha).unwrap();
            let bound = chernoff_bound(&spec, beta);
            assert!(bound <= 0.1 * (1.0 + 1e-6), "bound {bound}");
            assert!(outage_exact(&spec).unwrap() <= bound);
            assert!(sol.w.norm_squared() <= inst.params.p_bs * (1.0 + 1e-6));
        }
        assert!(found);
    }

    #[test]
    fn tighter_target_never_raises_rate() {
        let inst = fig_instance(2, 10.0, 3.0, 7);
        let grid = alpha_grid(0.02).unwrap();
        let pts = tradeoff_sweep(&inst, &[0.01, 0.1, 0.5, 1.0], &grid, 16).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].ms_rate >= w[0].ms_rate - 1e-9, "{} then {}", w[0].ms_rate, w[1].ms_rate);
        }
        for p in pts.iter().filter(|p| p.feasible) {
            assert!(p.exact_outage <= p.chernoff_bound * (1.0 + 1e-9));
            assert!(p.chernoff_bound <= p.rho * (1.0 + 1e-6));
        }
    }
}
