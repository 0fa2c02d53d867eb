//! Scenario files: a flat JSON object. Missing keys take the reference
//! values; unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use crate::model::{dbm_to_watts, SystemParams};
use crate::{Error, Result};

/// A dBm quantity written either as a number or as a string such as `"0 dBm"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Dbm {
    Number(f64),
    Text(String),
}

impl Dbm {
    fn value(&self, key: &'static str) -> Result<f64> {
        let v = match self {
            Dbm::Number(v) => *v,
            Dbm::Text(s) => {
                let t = s.trim();
                let t = t
                    .strip_suffix("dBm")
                    .or_else(|| t.strip_suffix("dbm"))
                    .or_else(|| t.strip_suffix("DBM"))
                    .unwrap_or(t);
                t.trim().parse::<f64>().map_err(|_| Error::config(key, format!("cannot parse {s:?} as dBm")))?
            }
        };
        if !v.is_finite() {
            return Err(Error::config(key, "must be finite"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    n_total: Option<usize>,
    n_tx: Option<usize>,
    power_dbm: Option<Dbm>,
    eta: Option<f64>,
    distance_m: Option<f64>,
    pathloss_exp: Option<f64>,
    noise_bs_dbm: Option<Dbm>,
    noise_ms_dbm: Option<Dbm>,
    li_bs_dbm: Option<Dbm>,
    li_ms_dbm: Option<Dbm>,
    gamma_b_bpcu: Option<f64>,
    rho_grid: Option<Vec<f64>>,
    theta_b_deg: Option<f64>,
    theta_m_deg: Option<f64>,
    sigma_theta_deg: Option<f64>,
    alpha_step: Option<f64>,
    rb_grid_points: Option<usize>,
    realizations: Option<usize>,
    mc_samples: Option<usize>,
    seed: Option<u64>,
    tolerance_scale: Option<f64>,
}

/// Validated scenario with SI units and angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: SystemParams,
    pub power_dbm: f64,
    pub rho_grid: Vec<f64>,
    pub theta_b: f64,
    pub theta_m: f64,
    pub sigma_theta: f64,
    /// `None` lets each experiment use its own default step.
    pub alpha_step: Option<f64>,
    pub rb_grid_points: usize,
    pub realizations: usize,
    pub mc_samples: usize,
    pub seed: u64,
    /// Multiplies every validation tolerance.
    pub tolerance_scale: f64,
}

/// Default outage targets of the partial-CSI sweep.
pub const DEFAULT_RHO_GRID: [f64; 16] =
    [0.002, 0.005, 0.01, 0.02, 0.03, 0.05, 0.1, 0.2, 0.3, 0.47, 0.6, 0.8, 0.9, 0.95, 0.99, 1.0];

fn check(key: &'static str, ok: bool, msg: &str) -> Result<()> {
    if ok { Ok(()) } else { Err(Error::config(key, msg.to_string())) }
}

fn finite(key: &'static str, v: f64) -> Result<f64> {
    check(key, v.is_finite(), "must be finite")?;
    Ok(v)
}

impl Scenario {
    /// Reference scenario: `N = 6`, `N_t = 4`, 0 dBm, every other key at
    /// its default.
    pub fn reference() -> Self {
        Self::from_raw(RawScenario::default()).expect("defaults are valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawScenario = serde_json::from_str(text)?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawScenario) -> Result<Self> {
        let n_total = raw.n_total.unwrap_or(6);
        let n_tx = raw.n_tx.unwrap_or(4);
        check("n_total", n_total >= 2, "must be at least 2")?;
        check("n_tx", n_tx >= 1, "must be at least 1")?;
        check("n_tx", n_tx < n_total, "must be below n_total so the BS keeps receive antennas")?;

        let dbm = |v: &Option<Dbm>, key: &'static str, default: f64| v.as_ref().map_or(Ok(default), |d| d.value(key));
        let power_dbm = dbm(&raw.power_dbm, "power_dbm", 0.0)?;
        let noise_bs = dbm(&raw.noise_bs_dbm, "noise_bs_dbm", -70.0)?;
        let noise_ms = dbm(&raw.noise_ms_dbm, "noise_ms_dbm", -70.0)?;
        let li_bs = dbm(&raw.li_bs_dbm, "li_bs_dbm", 30.0)?;
        let li_ms = dbm(&raw.li_ms_dbm, "li_ms_dbm", 30.0)?;

        let eta = finite("eta", raw.eta.unwrap_or(0.5))?;
        check("eta", eta > 0.0 && eta <= 1.0, "must lie in (0, 1]")?;
        let d = finite("distance_m", raw.distance_m.unwrap_or(10.0))?;
        check("distance_m", d > 0.0, "must be positive")?;
        let tau = finite("pathloss_exp", raw.pathloss_exp.unwrap_or(3.0))?;
        check("pathloss_exp", tau >= 2.0, "must be at least 2")?;
        let gamma_b = finite("gamma_b_bpcu", raw.gamma_b_bpcu.unwrap_or(3.0))?;
        check("gamma_b_bpcu", gamma_b >= 0.0, "must be nonnegative")?;

        let rho_grid = raw.rho_grid.unwrap_or_else(|| DEFAULT_RHO_GRID.to_vec());
        check("rho_grid", !rho_grid.is_empty(), "must not be empty")?;
        check("rho_grid", rho_grid.iter().all(|r| *r > 0.0 && *r <= 1.0), "entries must lie in (0, 1]")?;

        let deg = std::f64::consts::PI / 180.0;
        let theta_b = finite("theta_b_deg", raw.theta_b_deg.unwrap_or(5.0))? * deg;
        let theta_m = finite("theta_m_deg", raw.theta_m_deg.unwrap_or(15.0))? * deg;
        let sigma_theta = finite("sigma_theta_deg", raw.sigma_theta_deg.unwrap_or(10.0))?;
        check("sigma_theta_deg", sigma_theta >= 0.0, "must be nonnegative")?;

        if let Some(step) = raw.alpha_step {
            check("alpha_step", step > 0.0 && step <= 0.1, "must lie in (0, 0.1]")?;
        }
        let rb_grid_points = raw.rb_grid_points.unwrap_or(20);
        check("rb_grid_points", rb_grid_points >= 2, "must be at least 2")?;
        let realizations = raw.realizations.unwrap_or(100);
        check("realizations", realizations >= 1, "must be at least 1")?;
        let mc_samples = raw.mc_samples.unwrap_or(crate::mc::DEFAULT_OUTAGE_SAMPLES);
        check("mc_samples", mc_samples >= crate::mc::MIN_SAMPLES, "must be at least 1000")?;
        let tolerance_scale = finite("tolerance_scale", raw.tolerance_scale.unwrap_or(1.0))?;
        check("tolerance_scale", tolerance_scale >= 0.0, "must be nonnegative")?;

        let params = SystemParams {
            p_bs: dbm_to_watts(power_dbm),
            eta,
            n_total,
            n_tx,
            sigma2_b: dbm_to_watts(noise_bs),
            sigma2_m: dbm_to_watts(noise_ms),
            sigma2_li_bs: dbm_to_watts(li_bs),
            sigma2_li_ms: dbm_to_watts(li_ms),
            d,
            tau,
            gamma_b,
            rho: rho_grid.iter().copied().fold(0.0, f64::max),
        };
        params.validate()?;
        Ok(Scenario {
            params,
            power_dbm,
            rho_grid,
            theta_b,
            theta_m,
            sigma_theta: sigma_theta * deg,
            alpha_step: raw.alpha_step,
            rb_grid_points,
            realizations,
            mc_samples,
            seed: raw.seed.unwrap_or(1),
            tolerance_scale,
        })
    }
}

/// Read and validate a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_file_parses() {
        let s = Scenario::from_json(
            r#"{"n_total": 6, "n_tx": 2, "power_dbm": 10, "eta": 0.5, "distance_m": 10,
                "pathloss_exp": 3, "li_bs_dbm": 30, "li_ms_dbm": 30,
                "noise_bs_dbm": -70, "noise_ms_dbm": -70}"#,
        )
        .unwrap();
        assert_eq!(s.params.n_rx(), 4);
        assert!((s.params.p_bs - 0.01).abs() < 1e-15);
    }

    #[test]
    fn dbm_strings_convert() {
        let s = Scenario::from_json(r#"{"power_dbm": "0 dBm"}"#).unwrap();
        assert!((s.params.p_bs - 0.001).abs() < 1e-18);
    }

    #[test]
    fn no_receive_antennas_rejected() {
        let err = Scenario::from_json(r#"{"n_total": 6, "n_tx": 6}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "n_tx"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(Scenario::from_json(r#"{"power_dmb": 0}"#).is_err());
    }

    #[test]
    fn bad_rho_names_key() {
        let err = Scenario::from_json(r#"{"rho_grid": [0.5, 1.5]}"#).unwrap_err();
        assert!(err.to_string().contains("rho_grid"), "{err}");
    }
}
