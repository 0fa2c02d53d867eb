//! Experiment drivers behind the `fdwp` binary: rate regions with full CSI,
//! rate-versus-outage sweeps with partial CSI, and the closed-form
//! validation sweeps. Each driver returns its results and writes CSV files.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{load_scenario, Scenario};

use crate::fullcsi::{self, RatePoint, TradeoffCurve};
use crate::mc::{self, ValidationKind, ValidationReport, ValidationSetup};
use crate::model::{sample_realization, CovarianceModel, MethodTag};
use crate::partialcsi::{self, PartialCsiInstance, PartialCsiSolution};
use crate::{Error, Result};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

/// Exit code for an error returned by a driver.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Json(_) | Error::InvalidArgument(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Twelve significant digits, `.` decimal separator.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

/// Write `contents` to `dir/name` through a temporary file and a rename.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Independent generator for realization `k`.
fn realization_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// Rate regions of every realization plus their average.
#[derive(Debug, Clone)]
pub struct RateRegionOutput {
    /// One entry per realization, each holding the four method curves.
    pub curves: Vec<Vec<TradeoffCurve>>,
    pub average: Vec<AveragePoint>,
}

/// Average over realizations at one normalized grid index.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragePoint {
    pub grid_index: usize,
    pub method: MethodTag,
    pub r_b_target: f64,
    /// Infeasible points count as zero MS rate.
    pub ms_rate: f64,
    pub feasible_fraction: f64,
}

fn average_curves(curves: &[Vec<TradeoffCurve>]) -> Vec<AveragePoint> {
    let Some(first) = curves.first() else { return Vec::new() };
    let n = curves.len() as f64;
    let mut out = Vec::new();
    for (m, curve) in first.iter().enumerate() {
        for i in 0..curve.points.len() {
            let pts: Vec<&RatePoint> = curves.iter().map(|c| &c[m].points[i]).collect();
            out.push(AveragePoint {
                grid_index: i,
                method: curve.method,
                r_b_target: pts.iter().map(|p| p.r_b_target).sum::<f64>() / n,
                ms_rate: pts.iter().map(|p| if p.feasible { p.ms_rate } else { 0.0 }).sum::<f64>() / n,
                feasible_fraction: pts.iter().filter(|p| p.feasible).count() as f64 / n,
            });
        }
    }
    out
}

/// Full-CSI rate regions over `realizations` channel draws. Writes
/// `rate_region.csv` and `rate_region_avg.csv` when `out_dir` is given.
pub fn run_rate_region(scenario: &Scenario, out_dir: Option<&Path>) -> Result<RateRegionOutput> {
    let params = &scenario.params;
    let step = scenario.alpha_step.unwrap_or(fullcsi::DEFAULT_ALPHA_STEP);
    let curves = (0..scenario.realizations)
        .into_par_iter()
        .map(|k| {
            let real = sample_realization(params, &mut realization_rng(scenario.seed, k));
            fullcsi::rate_region_sweep(&real, params, scenario.rb_grid_points, step)
        })
        .collect::<Result<Vec<_>>>()?;
    let average = average_curves(&curves);

    if let Some(dir) = out_dir {
        let mut csv = String::from("realization_id,r_b_target_bpcu,method,alpha,ms_rate_bpcu,feasible\n");
        for (k, region) in curves.iter().enumerate() {
            for curve in region {
                for p in &curve.points {
                    let _ = writeln!(
                        csv,
                        "{k},{},{},{},{},{}",
                        fmt_num(p.r_b_target),
                        p.method_tag.as_str(),
                        fmt_num(p.alpha),
                        fmt_num(p.ms_rate),
                        p.feasible
                    );
                }
            }
        }
        write_atomic(dir, "rate_region.csv", &csv)?;
        let mut avg = String::from("grid_index,r_b_target_bpcu,method,ms_rate_bpcu,feasible_fraction\n");
        for p in &average {
            let _ = writeln!(
                avg,
                "{},{},{},{},{}",
                p.grid_index,
                fmt_num(p.r_b_target),
                p.method.as_str(),
                fmt_num(p.ms_rate),
                fmt_num(p.feasible_fraction)
            );
        }
        write_atomic(dir, "rate_region_avg.csv", &avg)?;
    }
    Ok(RateRegionOutput { curves, average })
}

/// One row of `partial_csi.csv`: means over the realizations that are
/// feasible at this `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialCsiRow {
    pub rho: f64,
    pub alpha_opt: f64,
    pub beta_opt: f64,
    pub ergodic_rate_bpcu: f64,
    pub outage_bound: f64,
    pub outage_exact: f64,
    pub outage_mc: f64,
    pub feasible_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct PartialCsiOutput {
    /// Per realization, one solution per `rho` in grid order.
    pub runs: Vec<Vec<PartialCsiSolution>>,
    /// Per realization and `rho`, the simulated outage (`nan` if infeasible).
    pub outage_mc: Vec<Vec<f64>>,
    pub rows: Vec<PartialCsiRow>,
}

impl PartialCsiOutput {
    /// Mean over realizations of the smallest achieved exact outage.
    pub fn mean_min_exact_outage(&self) -> Option<f64> {
        let v: Vec<f64> = self.runs.iter().filter_map(|r| partialcsi::min_exact_outage(r)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Mean over realizations of the rate read off each curve at the given
    /// exact outage, and the number of realizations that reach it.
    pub fn mean_rate_at_outage(&self, target: f64) -> (Option<f64>, usize) {
        let v: Vec<f64> = self.runs.iter().filter_map(|r| partialcsi::rate_at_exact_outage(r, target)).collect();
        let n = v.len();
        ((n > 0).then(|| v.iter().sum::<f64>() / n as f64), n)
    }
}

/// Partial-CSI rate-versus-outage sweep. The simulated outage of each
/// design uses `mc_samples / realizations` draws (at least the minimum), so
/// the averaged column has the precision of a single `mc_samples` run.
/// Writes `partial_csi.csv` and the per-realization `partial_csi_runs.csv`.
pub fn run_partial_csi(scenario: &Scenario, out_dir: Option<&Path>) -> Result<PartialCsiOutput> {
    let params = &scenario.params;
    let cov = CovarianceModel::new(params, scenario.theta_b, scenario.theta_m, scenario.sigma_theta, scenario.sigma_theta);
    let alphas = partialcsi::alpha_grid(scenario.alpha_step.unwrap_or(partialcsi::DEFAULT_ALPHA_STEP))?;
    let mc_n = (scenario.mc_samples / scenario.realizations).max(mc::MIN_SAMPLES);
    let results = (0..scenario.realizations)
        .into_par_iter()
        .map(|k| -> Result<(Vec<PartialCsiSolution>, Vec<f64>)> {
            let mut rng = realization_rng(scenario.seed, k);
            let inst = PartialCsiInstance::sample(&cov, params, &mut rng)?;
            let sols = partialcsi::tradeoff_sweep(&inst, &scenario.rho_grid, &alphas, partialcsi::DEFAULT_BETA_POINTS)?;
            let mut sims = Vec::with_capacity(sols.len());
            for (j, s) in sols.iter().enumerate() {
                if !s.feasible {
                    sims.push(f64::NAN);
                    continue;
                }
                let seed = scenario.seed ^ ((k as u64) << 20) ^ (j as u64 + 1);
                sims.push(mc::mc_outage(&inst, &s.solution.w, s.alpha, mc_n, seed)?.mean);
            }
            Ok((sols, sims))
        })
        .collect::<Result<Vec<_>>>()?;
    let (runs, outage_mc): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let mut rows = Vec::with_capacity(scenario.rho_grid.len());
    for (j, &rho) in scenario.rho_grid.iter().enumerate() {
        let idx: Vec<usize> = (0..runs.len()).filter(|&k| runs[k][j].feasible).collect();
        let n = idx.len() as f64;
        let mean = |f: &dyn Fn(usize) -> f64| if idx.is_empty() { f64::NAN } else { idx.iter().map(|&k| f(k)).sum::<f64>() / n };
        rows.push(PartialCsiRow {
            rho,
            alpha_opt: mean(&|k| runs[k][j].alpha),
            beta_opt: mean(&|k| runs[k][j].beta),
            ergodic_rate_bpcu: mean(&|k| runs[k][j].ms_rate),
            outage_bound: mean(&|k| runs[k][j].chernoff_bound),
            outage_exact: mean(&|k| runs[k][j].exact_outage),
            outage_mc: mean(&|k| outage_mc[k][j]),
            feasible_fraction: n / runs.len() as f64,
        });
    }

    if let Some(dir) = out_dir {
        let mut csv = String::from("rho,alpha_opt,beta_opt,ergodic_rate_bpcu,outage_bound,outage_exact,outage_mc\n");
        for r in &rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                fmt_num(r.rho),
                fmt_num(r.alpha_opt),
                fmt_num(r.beta_opt),
                fmt_num(r.ergodic_rate_bpcu),
                fmt_num(r.outage_bound),
                fmt_num(r.outage_exact),
                fmt_num(r.outage_mc)
            );
        }
        write_atomic(dir, "partial_csi.csv", &csv)?;
        let mut per = String::from(
            "realization_id,rho,feasible,alpha_opt,beta_opt,ergodic_rate_bpcu,outage_bound,outage_exact,outage_mc\n",
        );
        for (k, run) in runs.iter().enumerate() {
            for (j, s) in run.iter().enumerate() {
                let _ = writeln!(
                    per,
                    "{k},{},{},{},{},{},{},{},{}",
                    fmt_num(s.rho),
                    s.feasible,
                    fmt_num(s.alpha),
                    fmt_num(s.beta),
                    fmt_num(s.ms_rate),
                    fmt_num(s.chernoff_bound),
                    fmt_num(s.exact_outage),
                    fmt_num(outage_mc[k][j])
                );
            }
        }
        write_atomic(dir, "partial_csi_runs.csv", &per)?;
    }
    Ok(PartialCsiOutput { runs, outage_mc, rows })
}

/// Validation sweeps for the scenario's link parameters. `mc_samples` sets
/// the outage sample count; rate rows use a tenth of it (at least the
/// minimum). Writes `validation.csv`.
pub fn run_validate(scenario: &Scenario, out_dir: Option<&Path>) -> Result<ValidationReport> {
    let mut setup = ValidationSetup::reference(scenario.seed);
    setup.params = scenario.params.clone();
    setup.theta_b = scenario.theta_b;
    setup.theta_m = scenario.theta_m;
    setup.sigma_theta = scenario.sigma_theta;
    setup.outage_samples = scenario.mc_samples;
    setup.rate_samples = (scenario.mc_samples / 10).max(mc::MIN_SAMPLES);
    setup.tolerance_scale = scenario.tolerance_scale;
    let report = mc::validate_figures(&setup)?;
    if let Some(dir) = out_dir {
        let mut csv = String::from("kind,sweep_dbm,analytic,monte_carlo,stderr,tolerance,pass\n");
        for r in &report.rows {
            let kind = match r.kind {
                ValidationKind::Outage => "outage",
                ValidationKind::ErgodicRate => "ergodic_rate",
            };
            let _ = writeln!(
                csv,
                "{kind},{},{},{},{},{},{}",
                fmt_num(r.sweep_dbm),
                fmt_num(r.analytic),
                fmt_num(r.monte_carlo),
                fmt_num(r.stderr),
                fmt_num(r.tolerance),
                r.pass
            );
        }
        write_atomic(dir, "validation.csv", &csv)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.001), "1.00000000000e-3");
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(fmt_num(1.0 / 3.0).len(), "3.33333333333e-1".len());
    }

    #[test]
    fn config_errors_map_to_exit_two() {
        let err = Scenario::from_json(r#"{"n_tx": 9}"#).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_CONFIG);
    }
}
