//! Monte Carlo estimators for the partial-CSI closed forms.
//!
//! Samples are drawn in fixed-size chunks. Chunk `k` uses a ChaCha8 stream
//! seeded with the master seed and stream id `k`, and chunk sums are reduced
//! in chunk order, so estimates do not depend on the number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{inv_rank_one_form, psd_sqrt};
use crate::model::{cscg, dbm_to_watts, CovarianceModel, SystemParams};
use crate::partialcsi::{ergodic_ms_rate, outage_exact, outage_spectrum, PartialCsiInstance};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Samples per independently seeded chunk.
pub const CHUNK: usize = 8192;

/// Smallest accepted sample count.
pub const MIN_SAMPLES: usize = 1000;

/// Default sample counts for rate and outage estimates.
pub const DEFAULT_RATE_SAMPLES: usize = 100_000;
pub const DEFAULT_OUTAGE_SAMPLES: usize = 1_000_000;

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Mean and standard error of `f` over `n` draws of a `CN(0, R)` vector
/// `R^{1/2} g`.
fn estimate(n: usize, seed: u64, root: &CMatrix, f: impl Fn(&CVector) -> f64 + Sync) -> Result<Estimate> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    let dim = root.nrows();
    let chunks = n.div_ceil(CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = chunk_rng(seed, k);
            let len = CHUNK.min(n - k * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let g = CVector::from_fn(dim, |_, _| cscg(&mut rng, 1.0));
                let v = f(&(root * g));
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let nf = n as f64;
    let mean = s / nf;
    let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok(Estimate { mean, stderr: (var / nf).sqrt() })
}

/// Monte Carlo ergodic MS rate of `w` over `h_B ~ CN(0, Cov_B)`.
pub fn mc_ergodic_rate(
    inst: &PartialCsiInstance,
    w: &CVector,
    alpha: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    let p_m = inst.ms_power(alpha)?;
    let den = inst.params.sigma2_m + p_m * inst.h_li_ms.norm_sqr();
    let root = psd_sqrt(&inst.cov.cov_b, 0.0);
    estimate(n_samples, seed, &root, |h| {
        (1.0 - alpha) * (h.dotc(w).norm_sqr() / den).ln_1p() / std::f64::consts::LN_2
    })
}

/// Monte Carlo probability that the BS rate with `h_M ~ CN(0, Cov_M)` is at
/// most `gamma_B`.
pub fn mc_outage(
    inst: &PartialCsiInstance,
    w: &CVector,
    alpha: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    let p_m = inst.ms_power(alpha)?;
    let s2 = inst.params.sigma2_b;
    let a = &inst.h_li_bs * w;
    let gamma_b = inst.params.gamma_b;
    let root = psd_sqrt(&inst.cov.cov_m, 0.0);
    let est = estimate(n_samples, seed, &root, |h| {
        let sinr = p_m / s2 * inv_rank_one_form(h, &a, s2);
        let rate = (1.0 - alpha) * sinr.ln_1p() / std::f64::consts::LN_2;
        if rate <= gamma_b { 1.0 } else { 0.0 }
    })?;
    // Binomial standard error from the estimate itself.
    let p = est.mean;
    Ok(Estimate { mean: p, stderr: (p * (1.0 - p) / n_samples as f64).sqrt() })
}

/// Setup of the closed-form validation sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSetup {
    /// Base parameters; `p_bs`, `gamma_b` and `sigma2_li_ms` are overridden
    /// along the sweeps.
    pub params: SystemParams,
    /// Angles in radians.
    pub theta_b: f64,
    pub theta_m: f64,
    pub sigma_theta: f64,
    pub alpha: f64,
    /// BS powers of the outage sweep (dBm) and its rate threshold.
    pub outage_powers_dbm: Vec<f64>,
    pub outage_gamma_b: f64,
    /// MS loopback variances of the rate sweep (dBm).
    pub rate_li_ms_dbm: Vec<f64>,
    pub outage_samples: usize,
    pub rate_samples: usize,
    pub seed: u64,
    /// Multiplies both tolerances; `0` demands exact agreement.
    pub tolerance_scale: f64,
}

impl ValidationSetup {
    /// Reference sweeps: `N = 6`, `N_t = 2`, `alpha = 0.1`, angles 5/15
    /// degrees with 10 degree spread; outage at `gamma_B = 10` bpcu over
    /// 20..40 dBm, rate at 10 dBm over MS loopback -10..40 dBm.
    pub fn reference(seed: u64) -> Self {
        let deg = std::f64::consts::PI / 180.0;
        ValidationSetup {
            params: SystemParams::reference(2, 10.0),
            theta_b: 5.0 * deg,
            theta_m: 15.0 * deg,
            sigma_theta: 10.0 * deg,
            alpha: 0.1,
            outage_powers_dbm: vec![20.0, 24.0, 28.0, 32.0, 36.0, 40.0],
            outage_gamma_b: 10.0,
            rate_li_ms_dbm: vec![-10.0, 0.0, 10.0, 20.0, 30.0, 40.0],
            outage_samples: DEFAULT_OUTAGE_SAMPLES,
            rate_samples: DEFAULT_RATE_SAMPLES,
            seed,
            tolerance_scale: 1.0,
        }
    }
}

/// Which closed form a validation row checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationKind {
    Outage,
    ErgodicRate,
}

/// One analytic-versus-simulated comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub kind: ValidationKind,
    /// Swept quantity in dBm: BS power for outage rows, MS loopback variance
    /// for rate rows.
    pub sweep_dbm: f64,
    pub analytic: f64,
    pub monte_carlo: f64,
    pub stderr: f64,
    /// Allowed absolute difference.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Seeded unit-norm direction.
pub fn random_unit_beamformer(n: usize, seed: u64) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CVector::from_fn(n, |_, _| cscg(&mut rng, 1.0)).normalize()
}

/// Compare the closed-form outage and ergodic rate with simulation along
/// the power and MS-loopback sweeps, using one seeded loopback realization
/// and the beamformer `sqrt(P) u` with a seeded random unit vector `u`.
/// Outage rows pass when `|analytic - mc| <= max(0.003, 3 stderr)`, rate
/// rows when the relative gap is at most `max(1%, 3 stderr / rate)`; both
/// tolerances are multiplied by `tolerance_scale`.
pub fn validate_figures(setup: &ValidationSetup) -> Result<ValidationReport> {
    let base = &setup.params;
    base.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let h_li_bs = CMatrix::from_fn(base.n_rx(), base.n_tx, |_, _| cscg(&mut rng, 1.0));
    let z_ms = cscg(&mut rng, 1.0);
    let u = random_unit_beamformer(base.n_tx, setup.seed.wrapping_add(1));

    let instance = |params: SystemParams| -> Result<PartialCsiInstance> {
        let cov = CovarianceModel::new(&params, setup.theta_b, setup.theta_m, setup.sigma_theta, setup.sigma_theta);
        let h_b = &h_li_bs * C64::from(params.sigma2_li_bs.sqrt());
        let h_m = z_ms * params.sigma2_li_ms.sqrt();
        PartialCsiInstance::new(cov, h_b, h_m, params)
    };

    let mut rows = Vec::new();
    for (k, &dbm) in setup.outage_powers_dbm.iter().enumerate() {
        let mut params = base.clone();
        params.p_bs = dbm_to_watts(dbm);
        params.gamma_b = setup.outage_gamma_b;
        let inst = instance(params)?;
        let w = &u * C64::from(inst.params.p_bs.sqrt());
        let analytic = outage_exact(&outage_spectrum(&inst, &w, setup.alpha)?)?;
        let mc = mc_outage(&inst, &w, setup.alpha, setup.outage_samples, setup.seed ^ (0x100 + k as u64))?;
        let tolerance = setup.tolerance_scale * 0.003f64.max(3.0 * mc.stderr);
        rows.push(ValidationRow {
            kind: ValidationKind::Outage,
            sweep_dbm: dbm,
            analytic,
            monte_carlo: mc.mean,
            stderr: mc.stderr,
            tolerance,
            pass: (analytic - mc.mean).abs() <= tolerance,
        });
    }
    for (k, &dbm) in setup.rate_li_ms_dbm.iter().enumerate() {
        let mut params = base.clone();
        params.sigma2_li_ms = dbm_to_watts(dbm);
        let inst = instance(params)?;
        let w = &u * C64::from(inst.params.p_bs.sqrt());
        let analytic = ergodic_ms_rate(&inst, &w, setup.alpha)?;
        let mc = mc_ergodic_rate(&inst, &w, setup.alpha, setup.rate_samples, setup.seed ^ (0x200 + k as u64))?;
        let tolerance = setup.tolerance_scale * (0.01 * analytic).max(3.0 * mc.stderr);
        rows.push(ValidationRow {
            kind: ValidationKind::ErgodicRate,
            sweep_dbm: dbm,
            analytic,
            monte_carlo: mc.mean,
            stderr: mc.stderr,
            tolerance,
            pass: (analytic - mc.mean).abs() <= tolerance,
        });
    }
    Ok(ValidationReport { rows })
}
