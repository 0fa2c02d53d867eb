//! Link parameters, channel draws and spatial covariance matrices.
//!
//! All quantities are held in watts and natural units; dBm only appears at the
//! scenario-file boundary through [`dbm_to_watts`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{clip_psd, hermitian_asymmetry, hermitian_eigen, fro_norm};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Number of MS antennas. One transmits and one receives in the data phase;
/// both harvest in the energy phase.
pub const MS_ANTENNAS: usize = 2;

/// Relative eigenvalue floor below which covariance eigenvalues are zeroed.
pub const COVARIANCE_CLIP: f64 = 1e-10;

/// Scalar description of the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// BS transmit power `P` in watts, used in both phases.
    pub p_bs: f64,
    /// RF-to-DC conversion efficiency at the MS.
    pub eta: f64,
    /// Total BS antennas `N`.
    pub n_total: usize,
    /// BS transmit antennas `N_t`; the remaining `N - N_t` receive.
    pub n_tx: usize,
    /// BS receiver noise variance (W).
    pub sigma2_b: f64,
    /// MS receiver noise variance (W).
    pub sigma2_m: f64,
    /// Variance of each entry of the residual loopback channel at the BS.
    pub sigma2_li_bs: f64,
    /// Variance of the residual loopback channel at the MS.
    pub sigma2_li_ms: f64,
    /// BS-MS distance in meters.
    pub d: f64,
    /// Path-loss exponent.
    pub tau: f64,
    /// BS rate threshold for the outage event (bits per channel use).
    pub gamma_b: f64,
    /// Outage ceiling.
    pub rho: f64,
}

impl SystemParams {
    /// Parameters of the reference scenario: `N = 6`, `eta = 0.5`, `d = 10 m`,
    /// `tau = 3`, loopback variances 30 dBm and noise -70 dBm.
    pub fn reference(n_tx: usize, power_dbm: f64) -> Self {
        SystemParams {
            p_bs: dbm_to_watts(power_dbm),
            eta: 0.5,
            n_total: 6,
            n_tx,
            sigma2_b: dbm_to_watts(-70.0),
            sigma2_m: dbm_to_watts(-70.0),
            sigma2_li_bs: dbm_to_watts(30.0),
            sigma2_li_ms: dbm_to_watts(30.0),
            d: 10.0,
            tau: 3.0,
            gamma_b: 3.0,
            rho: 0.1,
        }
    }

    /// Number of BS receive antennas `N - N_t`.
    pub fn n_rx(&self) -> usize {
        self.n_total - self.n_tx
    }

    /// Large-scale power gain `1 / d^tau`.
    pub fn path_gain(&self) -> f64 {
        self.d.powf(-self.tau)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_tx == 0 || self.n_tx >= self.n_total {
            return bad(format!(
                "need 0 < n_tx < n_total, got n_tx={} n_total={}",
                self.n_tx, self.n_total
            ));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        for (name, v) in [
            ("p_bs", self.p_bs),
            ("sigma2_b", self.sigma2_b),
            ("sigma2_m", self.sigma2_m),
            ("sigma2_li_bs", self.sigma2_li_bs),
            ("sigma2_li_ms", self.sigma2_li_ms),
            ("d", self.d),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.tau >= 2.0 && self.tau.is_finite()) {
            return bad(format!("tau must be >= 2, got {}", self.tau));
        }
        if !(self.gamma_b >= 0.0 && self.gamma_b.is_finite()) {
            return bad(format!("gamma_b must be >= 0, got {}", self.gamma_b));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        Ok(())
    }
}

/// One draw of every channel in the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Energy-phase channel, `2 x N`.
    pub h_bm: CMatrix,
    /// BS-to-MS data channel, length `N_t`; the MS receives `h_b^H w`.
    pub h_b: CVector,
    /// MS-to-BS data channel, length `N - N_t`.
    pub h_m: CVector,
    /// Residual loopback channel at the BS, `(N - N_t) x N_t`.
    pub h_li_bs: CMatrix,
    /// Residual loopback channel at the MS.
    pub h_li_ms: C64,
}

impl ChannelRealization {
    pub fn check_dims(&self, params: &SystemParams) -> Result<()> {
        let (nt, nr, n) = (params.n_tx, params.n_rx(), params.n_total);
        let ok = self.h_bm.shape() == (MS_ANTENNAS, n)
            && self.h_b.len() == nt
            && self.h_m.len() == nr
            && self.h_li_bs.shape() == (nr, nt);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "realization does not match N={n}, N_t={nt}"
            )))
        }
    }

    /// Largest eigenvalue of `H_BM H_BM^H`: the gain of the optimal energy
    /// beamformer.
    pub fn harvest_gain(&self) -> f64 {
        let g = &self.h_bm * self.h_bm.adjoint();
        hermitian_eigen(&g).values[0].max(0.0)
    }
}

/// Transmit- and receive-side spatial covariances of the BS data channels.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    /// Covariance of `h_b` (`N_t x N_t`).
    pub cov_b: CMatrix,
    /// Covariance of `h_m` (`(N - N_t) x (N - N_t)`).
    pub cov_m: CMatrix,
    pub theta_b: f64,
    pub theta_m: f64,
    pub sigma_theta_b: f64,
    pub sigma_theta_m: f64,
}

impl CovarianceModel {
    /// Build both covariances for `params` from central angles and angular
    /// spreads given in radians.
    pub fn new(
        params: &SystemParams,
        theta_b: f64,
        theta_m: f64,
        sigma_theta_b: f64,
        sigma_theta_m: f64,
    ) -> Self {
        CovarianceModel {
            cov_b: build_covariance(params.n_tx, theta_b, sigma_theta_b, params.d, params.tau),
            cov_m: build_covariance(params.n_rx(), theta_m, sigma_theta_m, params.d, params.tau),
            theta_b,
            theta_m,
            sigma_theta_b,
            sigma_theta_m,
        }
    }
}

/// Which design produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    Optimum,
    Zf,
    HdAc,
    HdRfc,
    PartialCsi,
}

impl MethodTag {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::Optimum => "optimum",
            MethodTag::Zf => "zf",
            MethodTag::HdAc => "hd_ac",
            MethodTag::HdRfc => "hd_rfc",
            MethodTag::PartialCsi => "partial_csi",
        }
    }
}

impl std::fmt::Display for MethodTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A designed transmit beamformer and time split with the rates it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSolution {
    /// BS transmit beamformer (empty when infeasible).
    pub w: CVector,
    pub alpha: f64,
    pub ms_rate: f64,
    /// BS rate target (full CSI) or achieved BS rate.
    pub bs_rate_or_target: f64,
    /// `lambda_2 / lambda_1` of the lifted matrix; 0 for closed-form designs.
    pub rank_ratio: f64,
    pub feasible: bool,
    pub method_tag: MethodTag,
}

impl BeamformerSolution {
    pub fn infeasible(method_tag: MethodTag, alpha: f64, target: f64) -> Self {
        BeamformerSolution {
            w: CVector::zeros(0),
            alpha,
            ms_rate: 0.0,
            bs_rate_or_target: target,
            rank_ratio: 0.0,
            feasible: false,
            method_tag,
        }
    }
}

/// `10^((x - 30) / 10)`.
pub fn dbm_to_watts(x: f64) -> f64 {
    10f64.powf((x - 30.0) / 10.0)
}

/// Inverse of [`dbm_to_watts`].
pub fn watts_to_dbm(p: f64) -> f64 {
    10.0 * p.log10() + 30.0
}

/// Zero-mean circularly-symmetric complex Gaussian sample with the given
/// variance.
pub fn cscg<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Draw every channel independently: path-loss channels have entry variance
/// `1/d^tau`, loopback channels have the configured residual variances.
pub fn sample_realization<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> ChannelRealization {
    let (nt, nr, n) = (params.n_tx, params.n_rx(), params.n_total);
    let g = params.path_gain();
    let h_bm = CMatrix::from_fn(MS_ANTENNAS, n, |_, _| cscg(rng, g));
    let h_b = CVector::from_fn(nt, |_, _| cscg(rng, g));
    let h_m = CVector::from_fn(nr, |_, _| cscg(rng, g));
    let h_li_bs = CMatrix::from_fn(nr, nt, |_, _| cscg(rng, params.sigma2_li_bs));
    let h_li_ms = cscg(rng, params.sigma2_li_ms);
    ChannelRealization { h_bm, h_b, h_m, h_li_bs, h_li_ms }
}

/// Uniform-linear-array covariance with a Gaussian angular spread:
/// `[R]_{m,n} = exp(j pi (m-n) sin theta) exp(-(pi (m-n) sigma cos theta)^2 / 2) / d^tau`.
///
/// Eigenvalues below `COVARIANCE_CLIP` times the largest are zeroed so the
/// result is a valid PSD matrix.
pub fn build_covariance(n: usize, theta: f64, sigma_theta: f64, d: f64, tau: f64) -> CMatrix {
    let scale = d.powf(-tau);
    let (s, c) = theta.sin_cos();
    let raw = CMatrix::from_fn(n, n, |i, j| {
        let k = i as f64 - j as f64;
        let phase = C64::from_polar(1.0, std::f64::consts::PI * k * s);
        let spread = (-(std::f64::consts::PI * k * sigma_theta * c).powi(2) / 2.0).exp();
        phase * (spread * scale)
    });
    let eig = hermitian_eigen(&raw);
    let floor = COVARIANCE_CLIP * eig.values[0].max(0.0);
    if eig.values[n - 1] >= floor {
        return raw;
    }
    let mut clipped = clip_psd(&raw, floor);
    // Keep exact Hermitian symmetry after the rebuild.
    clipped = crate::linalg::hermitian_part(&clipped);
    clipped
}

/// Largest eigenvalue of a Hermitian matrix and a unit eigenvector for it.
pub fn max_eig_pair(a: &CMatrix) -> Result<(f64, CVector)> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::Dimension(format!("expected a nonempty square matrix, got {:?}", a.shape())));
    }
    let norm = fro_norm(a);
    if hermitian_asymmetry(a) > 1e-8 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument("matrix is not Hermitian".into()));
    }
    let eig = hermitian_eigen(a);
    let v = eig.vectors.column(0).into_owned();
    Ok((eig.values[0], v))
}

/// Harvest-funded MS transmit power `alpha eta P gain / (1 - alpha)`.
///
/// `harvest_gain` is the energy-beamforming gain: the largest eigenvalue of
/// `H_BM H_BM^H` with full CSI, or `E[tr(H_BM H_BM^H)] / N_t` for isotropic
/// energy transmission.
pub fn ms_transmit_power(alpha: f64, params: &SystemParams, harvest_gain: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    Ok(alpha * params.eta * params.p_bs * harvest_gain / (1.0 - alpha))
}

/// `E[tr(H_BM H_BM^H)] / N_t = 2 N / (d^tau N_t)` under unit-variance fading.
pub fn isotropic_harvest_gain(params: &SystemParams) -> f64 {
    (MS_ANTENNAS * params.n_total) as f64 * params.path_gain() / params.n_tx as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(10.0) - 0.01).abs() < 1e-17);
        assert!((watts_to_dbm(dbm_to_watts(-70.0)) + 70.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_realization() {
        let p = SystemParams::reference(4, 0.0);
        let a = sample_realization(&p, &mut ChaCha8Rng::seed_from_u64(7));
        let b = sample_realization(&p, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
        a.check_dims(&p).unwrap();
    }

    #[test]
    fn covariance_edge_cases() {
        let r = build_covariance(1, 0.3, 0.1, 10.0, 3.0);
        assert_eq!(r.shape(), (1, 1));
        assert!((r[(0, 0)].re - 1e-3).abs() < 1e-18);

        let r = build_covariance(5, 0.4, 0.0, 10.0, 3.0);
        for i in 0..5 {
            assert!((r[(i, i)].re - 1e-3).abs() < 1e-15);
        }
        let eig = hermitian_eigen(&r);
        assert!(eig.values[1].abs() / eig.values[0] < 1e-12);
    }

    #[test]
    fn max_eig_small_cases() {
        let (l, _) = max_eig_pair(&CMatrix::identity(3, 3)).unwrap();
        assert!((l - 1.0).abs() < 1e-14);
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(3.0, 0.0)]));
        let (l, v) = max_eig_pair(&d).unwrap();
        assert!((l - 3.0).abs() < 1e-14);
        assert!(v[0].norm() < 1e-14 && (v[1].norm() - 1.0).abs() < 1e-14);

        let mut bad = CMatrix::identity(2, 2);
        bad[(0, 1)] = C64::new(1.0, 0.0);
        assert!(max_eig_pair(&bad).is_err());
    }

    #[test]
    fn ms_power_cases() {
        let mut p = SystemParams::reference(4, 30.0);
        p.eta = 0.5;
        assert_eq!(ms_transmit_power(0.0, &p, 2.0).unwrap(), 0.0);
        assert!((ms_transmit_power(0.5, &p, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(ms_transmit_power(0.9, &p, 2.0).unwrap() > ms_transmit_power(0.1, &p, 2.0).unwrap());
        assert!(ms_transmit_power(1.0, &p, 2.0).is_err());
    }

    #[test]
    fn validate_rejects_no_receive_antennas() {
        let mut p = SystemParams::reference(4, 0.0);
        p.validate().unwrap();
        p.n_tx = 6;
        assert!(p.validate().is_err());
    }
}
