//! Full-CSI design: rate evaluation, the SDR beamformer for a fixed time
//! split, the grid search over `alpha`, the zero-forcing design with its
//! Lambert-W time split, the maximum BS rate and half-duplex baselines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conic::{self, HermitianSdp, SdpStatus, Sense};
use crate::linalg::{hermitian_eigen, inv_rank_one_form, outer, quad_form};
use crate::model::{ms_transmit_power, BeamformerSolution, ChannelRealization, MethodTag, SystemParams};
use crate::specfun::{lambert_w0, lambert_wm1};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Default step of the `alpha` grid searched by [`algorithm1_joint`].
pub const DEFAULT_ALPHA_STEP: f64 = 1e-3;

/// Seed of the randomization fallback in [`solve_w_given_alpha`]; only used
/// when the lifted solution is not numerically rank one.
const RANDOMIZATION_SEED: u64 = 0x5eed;

/// One point of a rate region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub r_b_target: f64,
    pub ms_rate: f64,
    pub alpha: f64,
    pub method_tag: MethodTag,
    pub feasible: bool,
}

/// Rate-region boundary traced by one method, ordered by `r_b_target`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffCurve {
    pub method: MethodTag,
    pub points: Vec<RatePoint>,
}

/// Half-duplex baseline variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdVariant {
    /// Antenna-conserved: all antennas on each side, twice the RF chains.
    Ac,
    /// RF-chain-conserved: same antenna split as the full-duplex link.
    Rfc,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    Ok(())
}

/// MMSE receive combiner `(sigma2_b I + a a^H)^{-1} h_M`, normalized, where
/// `a = H_B w` is the loopback leakage.
pub fn receive_beamformer(h_li_w: &CVector, h_m_ch: &CVector, sigma2_b: f64) -> Result<CVector> {
    if h_li_w.len() != h_m_ch.len() {
        return Err(Error::Dimension(format!(
            "leakage has length {}, channel {}",
            h_li_w.len(),
            h_m_ch.len()
        )));
    }
    if h_m_ch.norm() == 0.0 {
        return Err(Error::InvalidArgument("zero MS-to-BS channel".into()));
    }
    let coef = h_li_w.dotc(h_m_ch) / C64::from(sigma2_b + h_li_w.norm_squared());
    let r = h_m_ch - h_li_w * coef;
    Ok(r.normalize())
}

/// BS SINR `p_m |r^H h_M|^2 / (sigma2_b ||r||^2 + |r^H a|^2)` of an arbitrary
/// combiner `r`.
pub fn bs_sinr(r: &CVector, h_li_w: &CVector, h_m_ch: &CVector, p_m: f64, sigma2_b: f64) -> f64 {
    p_m * r.dotc(h_m_ch).norm_sqr() / (sigma2_b * r.norm_squared() + r.dotc(h_li_w).norm_sqr())
}

/// `(1 - alpha) log2(1 + (p_m/sigma2_b)(||h_M||^2 - |h_M^H H_B w|^2 / (sigma2_b + ||H_B w||^2)))`.
pub fn bs_rate(real: &ChannelRealization, w: &CVector, alpha: f64, params: &SystemParams) -> Result<f64> {
    check_alpha(alpha)?;
    let p_m = ms_transmit_power(alpha, params, real.harvest_gain())?;
    let a = &real.h_li_bs * w;
    let eff = inv_rank_one_form(&real.h_m, &a, params.sigma2_b);
    Ok((1.0 - alpha) * (p_m / params.sigma2_b * eff).ln_1p() / std::f64::consts::LN_2)
}

/// [`bs_rate`] through the explicit inverse `h_M^H (sigma2_b I + a a^H)^{-1} h_M`.
pub fn bs_rate_direct(
    real: &ChannelRealization,
    w: &CVector,
    alpha: f64,
    params: &SystemParams,
) -> Result<f64> {
    check_alpha(alpha)?;
    let p_m = ms_transmit_power(alpha, params, real.harvest_gain())?;
    let a = &real.h_li_bs * w;
    let n = a.len();
    let m = CMatrix::identity(n, n) * C64::from(params.sigma2_b) + outer(&a);
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("singular BS interference covariance".into()))?;
    let sinr = p_m * quad_form(&inv, &real.h_m);
    Ok((1.0 - alpha) * sinr.ln_1p() / std::f64::consts::LN_2)
}

/// `(1 - alpha) log2(1 + |h_B^H w|^2 / (sigma2_m + p_m |h_m|^2))`.
pub fn ms_rate(real: &ChannelRealization, w: &CVector, alpha: f64, params: &SystemParams) -> Result<f64> {
    check_alpha(alpha)?;
    let p_m = ms_transmit_power(alpha, params, real.harvest_gain())?;
    Ok(ms_rate_with_power(real, w, alpha, p_m, params))
}

fn ms_rate_with_power(
    real: &ChannelRealization,
    w: &CVector,
    alpha: f64,
    p_m: f64,
    params: &SystemParams,
) -> f64 {
    let sig = real.h_b.dotc(w).norm_sqr();
    let den = params.sigma2_m + p_m * real.h_li_ms.norm_sqr();
    (1.0 - alpha) * (sig / den).ln_1p() / std::f64::consts::LN_2
}

/// Allowed normalized leakage `Gamma_B = ||h_M||^2 - (sigma2_b/p_m)(2^{R_B/(1-alpha)} - 1)`.
/// Returns `-inf` when `p_m = 0` and the target is positive.
pub fn gamma_b(r_b_target: f64, alpha: f64, p_m: f64, h_m_ch: &CVector, sigma2_b: f64) -> f64 {
    let norm2 = h_m_ch.norm_squared();
    if r_b_target == 0.0 {
        return norm2;
    }
    if p_m <= 0.0 {
        return f64::NEG_INFINITY;
    }
    norm2 - sigma2_b / p_m * ((r_b_target / (1.0 - alpha)).exp2() - 1.0)
}

/// Maximum-ratio transmission `sqrt(P) h_B / ||h_B||`.
pub fn mrt_beamformer(real: &ChannelRealization, params: &SystemParams) -> CVector {
    real.h_b.normalize() * C64::from(params.p_bs.sqrt())
}

fn mrt_solution(real: &ChannelRealization, alpha: f64, params: &SystemParams) -> Result<BeamformerSolution> {
    let w = mrt_beamformer(real, params);
    Ok(BeamformerSolution {
        ms_rate: ms_rate(real, &w, alpha, params)?,
        bs_rate_or_target: bs_rate(real, &w, alpha, params)?,
        w,
        alpha,
        rank_ratio: 0.0,
        feasible: true,
        method_tag: MethodTag::Optimum,
    })
}

/// Leakage matrix `Q = H_B^H (h_M h_M^H - Gamma I) H_B` of the SDR equality
/// `tr(V Q) = Gamma sigma2_b`.
fn leakage_matrix(real: &ChannelRealization, gamma: f64) -> CMatrix {
    let hh = real.h_li_bs.adjoint() * &real.h_m;
    outer(&hh) - real.h_li_bs.adjoint() * &real.h_li_bs * C64::from(gamma)
}

/// Optimal beamformer for a fixed `alpha` through the semidefinite
/// relaxation
///
/// ```text
/// max tr(V h_B h_B^H)  s.t.  tr(V Q) = Gamma_B sigma2_b,  tr V = P,  V >= 0.
/// ```
///
/// A zero target returns maximum-ratio transmission. Negative `Gamma_B` and
/// right-hand sides outside the eigenvalue range of `P Q` are rejected before
/// any solve.
pub fn solve_w_given_alpha(
    real: &ChannelRealization,
    alpha: f64,
    r_b_target: f64,
    params: &SystemParams,
) -> Result<BeamformerSolution> {
    real.check_dims(params)?;
    check_alpha(alpha)?;
    if r_b_target < 0.0 {
        return Err(Error::InvalidArgument(format!("negative BS rate target {r_b_target}")));
    }
    if r_b_target == 0.0 {
        return mrt_solution(real, alpha, params);
    }
    let infeasible = BeamformerSolution::infeasible(MethodTag::Optimum, alpha, r_b_target);
    let p_m = ms_transmit_power(alpha, params, real.harvest_gain())?;
    let gamma = gamma_b(r_b_target, alpha, p_m, &real.h_m, params.sigma2_b);
    if !(gamma >= 0.0) {
        return Ok(infeasible);
    }
    let q = leakage_matrix(real, gamma);
    // Work with V / P so the variable has unit trace.
    let rhs = gamma * params.sigma2_b / params.p_bs;
    let eig = hermitian_eigen(&q);
    let (lmax, lmin) = (eig.values[0], *eig.values.last().expect("nonempty"));
    let slack = 1e-12 * lmax.abs().max(lmin.abs()).max(rhs.abs());
    if rhs > lmax + slack || rhs < lmin - slack {
        return Ok(infeasible);
    }

    let nt = params.n_tx;
    let hb2 = real.h_b.norm_squared();
    let mut sdp = HermitianSdp::new(outer(&real.h_b) / C64::from(hb2), Sense::Maximize);
    sdp.eq_constraints.push((CMatrix::identity(nt, nt), 1.0));
    sdp.eq_constraints.push((q, rhs));
    let sol = conic::solve(&sdp)?;
    if sol.status != SdpStatus::Optimal {
        return Ok(infeasible);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(RANDOMIZATION_SEED);
    let scorer = |w: &CVector| {
        let rb = bs_rate(real, w, alpha, params).ok()?;
        (rb >= r_b_target * (1.0 - 1e-9)).then(|| real.h_b.dotc(w).norm_sqr())
    };
    let (w, rank_ratio) = conic::extract_rank_one(&sol.v, params.p_bs, scorer, &mut rng)?;
    Ok(BeamformerSolution {
        ms_rate: ms_rate_with_power(real, &w, alpha, p_m, params),
        bs_rate_or_target: bs_rate(real, &w, alpha, params)?,
        w,
        alpha,
        rank_ratio,
        feasible: true,
        method_tag: MethodTag::Optimum,
    })
}

/// Scan `alpha = 0, step, 2 step, ...` and return the SDR solution at the
/// first grid point where it is feasible.
pub fn algorithm1_joint(
    real: &ChannelRealization,
    r_b_target: f64,
    params: &SystemParams,
    alpha_step: f64,
) -> Result<BeamformerSolution> {
    if !(alpha_step > 0.0 && alpha_step <= 0.1) {
        return Err(Error::InvalidArgument(format!("alpha_step must lie in (0, 0.1], got {alpha_step}")));
    }
    if r_b_target == 0.0 {
        return solve_w_given_alpha(real, 0.0, 0.0, params);
    }
    // Above the zero-forcing maximum no alpha can work.
    let b_tilde = harvest_slope(real, params) * snr_gain(real, params);
    if r_b_target > rb_max(b_tilde)?.1 {
        return Ok(BeamformerSolution::infeasible(MethodTag::Optimum, f64::NAN, r_b_target));
    }
    let mut k = 0usize;
    loop {
        let alpha = k as f64 * alpha_step;
        if alpha >= 1.0 {
            break;
        }
        let sol = solve_w_given_alpha(real, alpha, r_b_target, params)?;
        if sol.feasible {
            return Ok(sol);
        }
        k += 1;
    }
    Ok(BeamformerSolution::infeasible(MethodTag::Optimum, f64::NAN, r_b_target))
}

/// Joint optimum over `alpha` and `w` for a BS rate target.
///
/// The SDR is only feasible once the allowed leakage `Gamma_B` is
/// nonnegative, which happens exactly at the zero-forcing time split
/// `alpha_min`, where the SDR reduces to zero forcing. The feasible set grows
/// with `alpha` while the MS rate penalty grows too, so the MS rate peaks a
/// little above `alpha_min`. The peak is bracketed on offsets
/// `alpha_step 2^-j` above `alpha_min` and then on whole steps, refined by
/// golden-section search, and compared against the zero-forcing point.
pub fn optimum_joint(
    real: &ChannelRealization,
    r_b_target: f64,
    params: &SystemParams,
    alpha_step: f64,
) -> Result<BeamformerSolution> {
    if !(alpha_step > 0.0 && alpha_step <= 0.1) {
        return Err(Error::InvalidArgument(format!("alpha_step must lie in (0, 0.1], got {alpha_step}")));
    }
    if r_b_target == 0.0 {
        return solve_w_given_alpha(real, 0.0, 0.0, params);
    }
    let infeasible = BeamformerSolution::infeasible(MethodTag::Optimum, f64::NAN, r_b_target);
    let Some(alpha_min) = zf_alpha_opt(r_b_target, harvest_slope(real, params), snr_gain(real, params))? else {
        return Ok(infeasible);
    };
    let mut best = match zf_joint(real, r_b_target, params) {
        Ok(z) if z.feasible => BeamformerSolution { method_tag: MethodTag::Optimum, ..z },
        _ => infeasible,
    };
    let eval = |alpha: f64| -> Result<Option<BeamformerSolution>> {
        if alpha >= 1.0 {
            return Ok(None);
        }
        let sol = solve_w_given_alpha(real, alpha, r_b_target, params)?;
        Ok(sol.feasible.then_some(sol))
    };
    let score = |s: &Option<BeamformerSolution>| s.as_ref().map_or(f64::NEG_INFINITY, |s| s.ms_rate);

    let mut offsets: Vec<f64> = (0..=12).rev().map(|j| alpha_step * 0.5f64.powi(j)).collect();
    let mut trial: Vec<(f64, f64)> = Vec::new();
    let consider = |sol: Option<BeamformerSolution>, best: &mut BeamformerSolution| {
        if let Some(s) = sol {
            if !best.feasible || s.ms_rate > best.ms_rate {
                *best = s;
            }
        }
    };
    let mut k = 1usize;
    let mut declines = 0;
    loop {
        let off = if let Some(o) = offsets.first().copied() {
            offsets.remove(0);
            o
        } else {
            k += 1;
            alpha_step * k as f64
        };
        let alpha = alpha_min + off;
        if alpha >= 1.0 {
            break;
        }
        let sol = eval(alpha)?;
        let v = score(&sol);
        if let Some(&(_, last)) = trial.last() {
            declines = if v < last { declines + 1 } else { 0 };
        }
        trial.push((alpha, v));
        consider(sol, &mut best);
        if offsets.is_empty() && declines >= 2 {
            break;
        }
    }
    // Golden-section refinement around the best bracketed trial.
    if let Some(i) = (0..trial.len()).max_by(|&a, &b| trial[a].1.total_cmp(&trial[b].1)) {
        if trial[i].1.is_finite() {
            let mut lo = if i == 0 { alpha_min } else { trial[i - 1].0 };
            let mut hi = trial.get(i + 1).map_or(trial[i].0, |t| t.0);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut x1 = hi - g * (hi - lo);
            let mut x2 = lo + g * (hi - lo);
            let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
            for _ in 0..40 {
                if hi - lo <= 1e-9 * alpha_step.max(alpha_min) {
                    break;
                }
                if score(&f1) >= score(&f2) {
                    hi = x2;
                    x2 = x1;
                    consider(f2.take(), &mut best);
                    f2 = f1;
                    x1 = hi - g * (hi - lo);
                    f1 = eval(x1)?;
                } else {
                    lo = x1;
                    x1 = x2;
                    consider(f1.take(), &mut best);
                    f1 = f2;
                    x2 = lo + g * (hi - lo);
                    f2 = eval(x2)?;
                }
            }
            consider(f1, &mut best);
            consider(f2, &mut best);
        }
    }
    Ok(best)
}

/// `b = eta P lambda_max(H_BM H_BM^H)`.
pub fn harvest_slope(real: &ChannelRealization, params: &SystemParams) -> f64 {
    params.eta * params.p_bs * real.harvest_gain()
}

/// `gamma = ||h_M||^2 / sigma2_b`.
pub fn snr_gain(real: &ChannelRealization, params: &SystemParams) -> f64 {
    real.h_m.norm_squared() / params.sigma2_b
}

/// Projection `B = I - H_B^H h_M h_M^H H_B / ||H_B^H h_M||^2`.
pub fn zf_projection(real: &ChannelRealization) -> Result<CMatrix> {
    let g = real.h_li_bs.adjoint() * &real.h_m;
    let g2 = g.norm_squared();
    if g2 == 0.0 {
        return Err(Error::InvalidArgument("H_B^H h_M vanishes; nothing to null".into()));
    }
    let n = g.len();
    Ok(CMatrix::identity(n, n) - outer(&g) / C64::from(g2))
}

/// Zero-forcing beamformer `sqrt(P) B h_B / ||B h_B||`.
pub fn zf_beamformer(real: &ChannelRealization, params: &SystemParams) -> Result<CVector> {
    let b = zf_projection(real)?;
    let bh = &b * &real.h_b;
    let norm = bh.norm();
    if norm <= 1e-14 * real.h_b.norm() {
        return Err(Error::InvalidArgument("h_B lies in the nulled direction".into()));
    }
    Ok(bh * C64::from(params.p_bs.sqrt() / norm))
}

/// `(1 - alpha) log2(1 + alpha b_tilde / (1 - alpha))`, the zero-forcing BS
/// rate as a function of the time split.
pub fn zf_rate_curve(alpha: f64, b_tilde: f64) -> f64 {
    (1.0 - alpha) * (alpha * b_tilde / (1.0 - alpha)).ln_1p() / std::f64::consts::LN_2
}

/// Smallest `alpha` with `(1 - alpha) log2(1 + alpha b gamma / (1 - alpha)) = R_B`,
/// from the Lambert-W closed form evaluated on both real branches.
/// `Ok(None)` when the target exceeds the maximum.
pub fn zf_alpha_opt(r_b_target: f64, b: f64, gamma: f64) -> Result<Option<f64>> {
    if !(r_b_target >= 0.0) || !(b > 0.0) || !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need R_B >= 0 and b, gamma > 0; got {r_b_target}, {b}, {gamma}"
        )));
    }
    if r_b_target == 0.0 {
        return Ok(Some(0.0));
    }
    let bg = b * gamma;
    let rbar = r_b_target * std::f64::consts::LN_2;
    // y = -(R/bg) e^{R (1 - 1/bg)}, evaluated in logs to survive large R.
    let log_mag = (rbar / bg).ln() + rbar * (1.0 - 1.0 / bg);
    let y = -log_mag.exp();
    let inv_e = -(-1.0f64).exp();
    if y < inv_e - 1e-15 || !y.is_finite() {
        return Ok(None);
    }
    let y = y.max(inv_e);
    let mut best: Option<f64> = None;
    for w in [lambert_w0(y), lambert_wm1(y)].into_iter().flatten() {
        let u = -w / rbar - 1.0 / bg;
        let alpha = polish_zf_root(u / (1.0 + u), r_b_target, bg);
        if !(alpha > 0.0 && alpha < 1.0) {
            continue;
        }
        let resid = (zf_rate_curve(alpha, bg) - r_b_target).abs();
        if resid > 1e-6 * r_b_target.max(1e-12) {
            continue;
        }
        best = Some(best.map_or(alpha, |a: f64| a.min(alpha)));
    }
    Ok(best)
}

// The closed form loses digits to cancellation when alpha is tiny, so finish
// with a few Newton steps on the rate curve. A step is kept only if it
// shrinks the residual.
fn polish_zf_root(mut alpha: f64, r_b_target: f64, bg: f64) -> f64 {
    if !(alpha > 0.0 && alpha < 1.0) {
        return alpha;
    }
    let mut resid = zf_rate_curve(alpha, bg) - r_b_target;
    for _ in 0..4 {
        let x = alpha / (1.0 - alpha);
        let deriv = (bg / ((1.0 + bg * x) * (1.0 - alpha)) - (bg * x).ln_1p()) / std::f64::consts::LN_2;
        if !(deriv.abs() > 0.0) {
            break;
        }
        let next = alpha - resid / deriv;
        if !(next > 0.0 && next < 1.0) {
            break;
        }
        let next_resid = zf_rate_curve(next, bg) - r_b_target;
        if next_resid.abs() >= resid.abs() {
            break;
        }
        alpha = next;
        resid = next_resid;
    }
    alpha
}

/// Maximizer and maximum of [`zf_rate_curve`] over `alpha` in `(0, 1)`:
/// `z = e^{W((b_tilde - 1)/e) + 1}`, `alpha = (z - 1)/(b_tilde + z - 1)`.
pub fn rb_max(b_tilde: f64) -> Result<(f64, f64)> {
    if !(b_tilde > 0.0) {
        return Err(Error::InvalidArgument(format!("b_tilde must be positive, got {b_tilde}")));
    }
    let w = lambert_w0((b_tilde - 1.0) / std::f64::consts::E)?;
    let z = (w + 1.0).exp();
    let alpha = (z - 1.0) / (b_tilde + z - 1.0);
    Ok((alpha, zf_rate_curve(alpha, b_tilde)))
}

/// Largest BS rate of the realization, reached by the zero-forcing design.
pub fn realization_rb_max(real: &ChannelRealization, params: &SystemParams) -> Result<f64> {
    Ok(rb_max(harvest_slope(real, params) * snr_gain(real, params))?.1)
}

/// Zero-forcing design for a BS rate target.
pub fn zf_joint(
    real: &ChannelRealization,
    r_b_target: f64,
    params: &SystemParams,
) -> Result<BeamformerSolution> {
    let w = zf_beamformer(real, params)?;
    let b = harvest_slope(real, params);
    let Some(alpha) = zf_alpha_opt(r_b_target, b, snr_gain(real, params))? else {
        return Ok(BeamformerSolution::infeasible(MethodTag::Zf, f64::NAN, r_b_target));
    };
    Ok(BeamformerSolution {
        ms_rate: ms_rate(real, &w, alpha, params)?,
        bs_rate_or_target: bs_rate(real, &w, alpha, params)?,
        w,
        alpha,
        rank_ratio: 0.0,
        feasible: true,
        method_tag: MethodTag::Zf,
    })
}

/// Half-duplex `(bs_rate, ms_rate)` at time split `alpha`. Both links share
/// the `1 - alpha` data time equally.
pub fn hd_rates(
    real: &ChannelRealization,
    alpha: f64,
    params: &SystemParams,
    variant: HdVariant,
) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let (k_b, k_m) = hd_gains(real, params, variant);
    let half = (1.0 - alpha) / 2.0 / std::f64::consts::LN_2;
    let bs = half * (alpha / (1.0 - alpha) * k_b).ln_1p();
    let ms = half * k_m.ln_1p();
    Ok((bs, ms))
}

/// SNR slopes `(k_B, k_M)` of the half-duplex rates:
/// AC uses `eta P lambda^2 / sigma2_b` and `P lambda / sigma2_m` with
/// `lambda = lambda_max(H_BM H_BM^H)`; RFC uses `eta P lambda ||h_M||^2 / sigma2_b`
/// and `P ||h_B||^2 / sigma2_m`. In both the uplink SNR is `p_m` times the
/// receive gain, and `p_m` carries the harvest gain `lambda`.
pub fn hd_gains(real: &ChannelRealization, params: &SystemParams, variant: HdVariant) -> (f64, f64) {
    let p = params.p_bs;
    let lam = real.harvest_gain();
    match variant {
        HdVariant::Ac => (params.eta * p * lam * lam / params.sigma2_b, p * lam / params.sigma2_m),
        HdVariant::Rfc => (
            params.eta * p * lam * real.h_m.norm_squared() / params.sigma2_b,
            p * real.h_b.norm_squared() / params.sigma2_m,
        ),
    }
}

/// Smallest half-duplex time split that reaches the BS rate target, if any.
pub fn hd_alpha_for_target(
    real: &ChannelRealization,
    r_b_target: f64,
    params: &SystemParams,
    variant: HdVariant,
) -> Result<Option<f64>> {
    let (k_b, _) = hd_gains(real, params, variant);
    // ((1-a)/2) log2(1 + a k/(1-a)) = R  <=>  zero-forcing curve at 2R.
    zf_alpha_opt(2.0 * r_b_target, k_b, 1.0)
}

/// Trace the rate region of one realization for every method. All curves
/// share the BS-rate grid `t R_B^max`, `t` evenly spaced on `[0, 1]`, with
/// `R_B^max` the zero-forcing maximum of the realization.
pub fn rate_region_sweep(
    real: &ChannelRealization,
    params: &SystemParams,
    n_points: usize,
    alpha_step: f64,
) -> Result<Vec<TradeoffCurve>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 grid points, got {n_points}")));
    }
    let rmax = realization_rb_max(real, params)?;
    let grid: Vec<f64> = (0..n_points).map(|i| rmax * i as f64 / (n_points - 1) as f64).collect();

    let point = |r: f64, sol: &BeamformerSolution, tag| RatePoint {
        r_b_target: r,
        ms_rate: if sol.feasible { sol.ms_rate } else { 0.0 },
        alpha: sol.alpha,
        method_tag: tag,
        feasible: sol.feasible,
    };
    let mut optimum = Vec::with_capacity(n_points);
    let mut zf = Vec::with_capacity(n_points);
    for &r in &grid {
        optimum.push(point(r, &optimum_joint(real, r, params, alpha_step)?, MethodTag::Optimum));
        zf.push(point(r, &zf_joint(real, r, params)?, MethodTag::Zf));
    }
    let mut curves = vec![
        TradeoffCurve { method: MethodTag::Optimum, points: optimum },
        TradeoffCurve { method: MethodTag::Zf, points: zf },
    ];
    for (variant, tag) in [(HdVariant::Ac, MethodTag::HdAc), (HdVariant::Rfc, MethodTag::HdRfc)] {
        let mut pts = Vec::with_capacity(n_points);
        for &r in &grid {
            let p = match hd_alpha_for_target(real, r, params, variant)? {
                Some(alpha) => RatePoint {
                    r_b_target: r,
                    ms_rate: hd_rates(real, alpha, params, variant)?.1,
                    alpha,
                    method_tag: tag,
                    feasible: true,
                },
                None => RatePoint { r_b_target: r, ms_rate: 0.0, alpha: f64::NAN, method_tag: tag, feasible: false },
            };
            pts.push(p);
        }
        curves.push(TradeoffCurve { method: tag, points: pts });
    }
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_realization;

    fn instance(seed: u64, n_tx: usize) -> (ChannelRealization, SystemParams) {
        let params = SystemParams::reference(n_tx, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (sample_realization(&params, &mut rng), params)
    }

    #[test]
    fn rb_max_unit_slope() {
        let (a, r) = rb_max(1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((a - (e - 1.0) / e).abs() < 1e-12);
        assert!((r - std::f64::consts::LOG2_E / e).abs() < 1e-12);
        assert!(rb_max(1e-9).unwrap().1 < 1e-8);
    }

    #[test]
    fn zf_alpha_small_cases() {
        assert_eq!(zf_alpha_opt(0.0, 2.0, 3.0).unwrap(), Some(0.0));
        let (a_star, r_star) = rb_max(1.0).unwrap();
        let a = zf_alpha_opt(r_star, 1.0, 1.0).unwrap().unwrap();
        assert!((a - a_star).abs() < 1e-6, "{a} vs {a_star}");
        assert_eq!(zf_alpha_opt(0.6, 1.0, 1.0).unwrap(), None);
        let a = zf_alpha_opt(0.3, 1.0, 1.0).unwrap().unwrap();
        assert!((zf_rate_curve(a, 1.0) - 0.3).abs() < 1e-12);
        assert!(a < a_star);
    }

    #[test]
    fn gamma_limits() {
        let h = CVector::from_vec(vec![C64::new(1.0, 1.0), C64::new(0.5, 0.0)]);
        assert_eq!(gamma_b(0.0, 0.3, 1.0, &h, 1.0), h.norm_squared());
        assert_eq!(gamma_b(1.0, 0.0, 0.0, &h, 1.0), f64::NEG_INFINITY);
        assert!(gamma_b(1.0, 1e-6, 1e-9, &h, 1.0) < -1e6);
    }

    #[test]
    fn rate_forms_agree_when_well_conditioned() {
        let (mut real, mut params) = instance(11, 3);
        // Leakage comparable to the noise floor keeps the dense inverse accurate.
        params.sigma2_b = 1.0;
        real.h_li_bs /= C64::from(params.p_bs.sqrt());
        let w = mrt_beamformer(&real, &params);
        for alpha in [0.0, 0.1, 0.5] {
            let a = bs_rate(&real, &w, alpha, &params).unwrap();
            let b = bs_rate_direct(&real, &w, alpha, &params).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300), "{a} vs {b}");
        }
        assert_eq!(bs_rate(&real, &w, 0.0, &params).unwrap(), 0.0);
    }

    #[test]
    fn rate_matches_mmse_combiner_with_strong_leakage() {
        let (real, params) = instance(11, 3);
        let w = mrt_beamformer(&real, &params);
        let alpha = 0.3;
        let p_m = ms_transmit_power(alpha, &params, real.harvest_gain()).unwrap();
        let a = &real.h_li_bs * &w;
        let r = receive_beamformer(&a, &real.h_m, params.sigma2_b).unwrap();
        let sinr = bs_sinr(&r, &a, &real.h_m, p_m, params.sigma2_b);
        let expect = (1.0 - alpha) * sinr.ln_1p() / std::f64::consts::LN_2;
        let got = bs_rate(&real, &w, alpha, &params).unwrap();
        assert!((got - expect).abs() <= 1e-9 * expect, "{got} vs {expect}");
    }

    #[test]
    fn zero_target_is_mrt() {
        let (real, params) = instance(12, 4);
        let sol = algorithm1_joint(&real, 0.0, &params, 1e-3).unwrap();
        assert_eq!(sol.alpha, 0.0);
        let mrt = mrt_beamformer(&real, &params);
        assert!((&sol.w - mrt).norm() < 1e-12);
    }

    #[test]
    fn sdr_solution_is_rank_one_and_meets_target() {
        let (real, params) = instance(13, 4);
        let rmax = realization_rb_max(&real, &params).unwrap();
        let target = 0.5 * rmax;
        let sol = algorithm1_joint(&real, target, &params, 1e-3).unwrap();
        assert!(sol.feasible);
        assert!(sol.rank_ratio <= 1e-6, "rank ratio {}", sol.rank_ratio);
        assert!((sol.w.norm_squared() - params.p_bs).abs() < 1e-8 * params.p_bs);
        assert!((sol.bs_rate_or_target - target).abs() < 1e-6 * target);
        let zf = zf_joint(&real, target, &params).unwrap();
        assert!(sol.ms_rate >= zf.ms_rate - 1e-9, "{} vs {}", sol.ms_rate, zf.ms_rate);
    }

    #[test]
    fn no_leakage_channel_blocks_positive_gamma() {
        let (mut real, params) = instance(14, 2);
        real.h_li_bs.fill(C64::from(0.0));
        let sol = solve_w_given_alpha(&real, 0.5, 0.1, &params).unwrap();
        assert!(!sol.feasible);
    }

    #[test]
    fn hd_zero_alpha() {
        let (real, params) = instance(15, 3);
        for v in [HdVariant::Ac, HdVariant::Rfc] {
            assert_eq!(hd_rates(&real, 0.0, &params, v).unwrap().0, 0.0);
        }
        let (_, ms) = hd_rates(&real, 0.2, &params, HdVariant::Rfc).unwrap();
        let expect = 0.4 * (1.0 + params.p_bs * real.h_b.norm_squared() / params.sigma2_m).log2();
        assert!((ms - expect).abs() < 1e-12);
    }

    #[test]
    fn hd_uplink_uses_harvested_power() {
        let (real, params) = instance(16, 4);
        let alpha = 0.3;
        let p_m = ms_transmit_power(alpha, &params, real.harvest_gain()).unwrap();
        let (bs, _) = hd_rates(&real, alpha, &params, HdVariant::Rfc).unwrap();
        let expect = 0.35 * (1.0 + p_m * real.h_m.norm_squared() / params.sigma2_b).log2();
        assert!((bs - expect).abs() < 1e-12 * expect);
        let (bs, _) = hd_rates(&real, alpha, &params, HdVariant::Ac).unwrap();
        let expect = 0.35 * (1.0 + p_m * real.harvest_gain() / params.sigma2_b).log2();
        assert!((bs - expect).abs() < 1e-12 * expect);
    }
}
