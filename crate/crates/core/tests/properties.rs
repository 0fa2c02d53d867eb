//! Property tests over random channels, spectra and scalar arguments.

use fdwp::fullcsi::{
    algorithm1_joint, bs_rate, bs_rate_direct, harvest_slope, optimum_joint, rb_max, snr_gain,
    solve_w_given_alpha, zf_alpha_opt, zf_beamformer, zf_joint, zf_rate_curve,
};
use fdwp::mc::mc_outage;
use fdwp::model::{cscg, dbm_to_watts, ms_transmit_power, sample_realization, CovarianceModel, SystemParams};
use fdwp::partialcsi::{
    chernoff_bound, chernoff_optimal_beta, ergodic_rate_for_gain, outage_exact, OutageSpectrum, PartialCsiInstance,
};
use fdwp::specfun::{exp_mix_cdf, exp_mix_coeffs, exp_scaled_e1, lambert_w0, lambert_wm1};
use fdwp::{CMatrix, CVector, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn realization(seed: u64, n_tx: usize, extra_rx: usize, power_dbm: f64) -> (fdwp::ChannelRealization, SystemParams) {
    let mut params = SystemParams::reference(n_tx, power_dbm);
    params.n_total = n_tx + extra_rx;
    let real = sample_realization(&params, &mut ChaCha8Rng::seed_from_u64(seed));
    (real, params)
}

fn unit(seed: u64, n: usize) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CVector::from_fn(n, |_, _| cscg(&mut rng, 1.0)).normalize()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    // With leakage near the noise floor both rate forms are well conditioned.
    #[test]
    fn rate_forms_agree(seed in any::<u64>(), n_tx in 1usize..5, extra in 1usize..4, alpha in 0.01f64..0.95) {
        let (mut real, mut params) = realization(seed, n_tx, extra, 0.0);
        params.sigma2_b = 1.0;
        real.h_li_bs /= C64::from(params.p_bs.sqrt());
        let w = unit(seed ^ 1, n_tx) * C64::from(params.p_bs.sqrt());
        let a = bs_rate(&real, &w, alpha, &params).unwrap();
        let b = bs_rate_direct(&real, &w, alpha, &params).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300), "{a} vs {b}");
    }

    #[test]
    fn lambert_branches_invert(y in -0.36787944117144233f64..0.0) {
        let w0 = lambert_w0(y).unwrap();
        let wm = lambert_wm1(y).unwrap();
        prop_assert!(w0 >= -1.0 && wm <= -1.0);
        prop_assert!((w0 * w0.exp() - y).abs() <= 1e-12);
        prop_assert!((wm * wm.exp() - y).abs() <= 1e-12);
    }

    #[test]
    fn hypoexp_cdf_is_a_cdf(lams in prop::collection::vec(1e-2f64..1e2, 1..6), t1 in 0f64..50.0, dt in 0f64..50.0) {
        let mix = exp_mix_coeffs(&lams).unwrap();
        let a = exp_mix_cdf(&mix, t1).unwrap();
        let b = exp_mix_cdf(&mix, t1 + dt).unwrap();
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(b >= a - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ms_power_grows_with_alpha(a1 in 0f64..0.98, da in 1e-6f64..0.01, gain in 1e-6f64..1.0) {
        let params = SystemParams::reference(2, 0.0);
        let a2 = (a1 + da).min(0.999);
        prop_assert!(ms_transmit_power(a2, &params, gain).unwrap() > ms_transmit_power(a1, &params, gain).unwrap());
    }

    #[test]
    fn zf_nulls_the_loopback(seed in any::<u64>(), n_tx in 2usize..6, extra in 1usize..4) {
        let (real, params) = realization(seed, n_tx, extra, 0.0);
        let w = zf_beamformer(&real, &params).unwrap();
        let leak = real.h_m.dotc(&(&real.h_li_bs * &w)).norm();
        let scale = params.p_bs.sqrt() * real.h_li_bs.norm() * real.h_m.norm();
        prop_assert!(leak <= 1e-10 * scale, "{leak} vs {scale}");
        prop_assert!((w.norm_squared() - params.p_bs).abs() <= 1e-12 * params.p_bs);
    }

    #[test]
    fn zf_alpha_reproduces_target(log_bt in -2f64..7.0, frac in 0.01f64..0.99) {
        let bt = 10f64.powf(log_bt);
        let (_, rmax) = rb_max(bt).unwrap();
        let target = frac * rmax;
        let alpha = zf_alpha_opt(target, bt, 1.0).unwrap().unwrap();
        prop_assert!((zf_rate_curve(alpha, bt) - target).abs() <= 1e-9 * target);
        prop_assert!(zf_alpha_opt(rmax * 1.001, bt, 1.0).unwrap().is_none());
    }

    #[test]
    fn chernoff_bounds_exact_outage(seed in any::<u64>(), l in 1usize..5, scale in -2f64..1.0, beta_frac in 0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(l, l, |_, _| cscg(&mut rng, 1.0));
        let phi = &a * a.adjoint();
        let gbar = phi.trace().re * 10f64.powf(scale);
        let spec = OutageSpectrum::from_phi(phi, gbar);
        let exact = outage_exact(&spec).unwrap();
        let beta = beta_frac * spec.order() as f64 / gbar;
        prop_assert!(chernoff_bound(&spec, beta) >= exact * (1.0 - 1e-12));
        let best = chernoff_optimal_beta(&spec).unwrap();
        prop_assert!(best <= spec.order() as f64 / gbar);
        prop_assert!(chernoff_bound(&spec, best) <= chernoff_bound(&spec, beta) * (1.0 + 1e-9));
    }

    #[test]
    fn ergodic_rate_grows_with_gain(seed in any::<u64>(), gain in 1e-9f64..1e-3, alpha in 0f64..0.9) {
        let params = SystemParams::reference(2, 10.0);
        let cov = CovarianceModel::new(&params, 0.1, 0.3, 0.17, 0.17);
        let inst = PartialCsiInstance::sample(&cov, &params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let r1 = ergodic_rate_for_gain(&inst, gain, alpha).unwrap();
        let r2 = ergodic_rate_for_gain(&inst, 2.0 * gain, alpha).unwrap();
        prop_assert!(r2 > r1);
    }

    #[test]
    fn scaled_e1_decreases(x in 1e-4f64..1e3, dx in 1e-3f64..1.0) {
        prop_assert!(exp_scaled_e1(x * (1.0 + dx)).unwrap() < exp_scaled_e1(x).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // The zero-forcing point lies in the joint feasible set, so the joint
    // optimum can never fall below it.
    #[test]
    fn optimum_dominates_zero_forcing(seed in any::<u64>(), n_tx in 2usize..5, frac in 0.05f64..0.95) {
        let (real, params) = realization(seed, n_tx, 2, 0.0);
        let rmax = rb_max(harvest_slope(&real, &params) * snr_gain(&real, &params)).unwrap().1;
        let target = frac * rmax;
        let opt = optimum_joint(&real, target, &params, 1e-3).unwrap();
        let zf = zf_joint(&real, target, &params).unwrap();
        prop_assert!(opt.feasible && zf.feasible);
        prop_assert!(opt.ms_rate >= zf.ms_rate, "{} < {}", opt.ms_rate, zf.ms_rate);
        // The SDR meets its equality constraint to interior-point accuracy.
        prop_assert!(bs_rate(&real, &opt.w, opt.alpha, &params).unwrap() >= target * (1.0 - 1e-6));
    }

    // The grid scan stops at the first feasible grid point.
    #[test]
    fn algorithm1_returns_first_feasible_grid_point(seed in any::<u64>(), frac in 0.1f64..0.9) {
        let (real, params) = realization(seed, 3, 2, 0.0);
        let rmax = rb_max(harvest_slope(&real, &params) * snr_gain(&real, &params)).unwrap().1;
        let target = frac * rmax;
        let step = 0.01;
        let sol = algorithm1_joint(&real, target, &params, step).unwrap();
        prop_assert!(sol.feasible);
        let k = (sol.alpha / step).round();
        prop_assert!((sol.alpha - k * step).abs() < 1e-12);
        if k >= 1.0 {
            let before = solve_w_given_alpha(&real, (k - 1.0) * step, target, &params).unwrap();
            prop_assert!(!before.feasible);
        }
        // Nothing below the zero-forcing split is feasible.
        let a_zf = zf_alpha_opt(target, harvest_slope(&real, &params), snr_gain(&real, &params)).unwrap().unwrap();
        prop_assert!(sol.alpha >= a_zf);
    }
}

#[test]
fn outage_estimate_ignores_thread_count() {
    let params = SystemParams::reference(2, 30.0);
    let deg = std::f64::consts::PI / 180.0;
    let cov = CovarianceModel::new(&params, 5.0 * deg, 15.0 * deg, 10.0 * deg, 10.0 * deg);
    let inst = PartialCsiInstance::sample(&cov, &params, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let w = unit(3, 2) * C64::from(dbm_to_watts(30.0).sqrt());
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| mc_outage(&inst, &w, 0.1, 50_000, 21).unwrap())
    };
    assert_eq!(run(1), run(3));
}
