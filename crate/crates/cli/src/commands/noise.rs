//! `noise`: spin-noise emission probability `p = -K/|w0|` and amplitude
//! ratio `sqrt(|p|)`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use spinsim::propagators::spin_noise_estimate;
use spinsim::spincore::PhysicalConstants;

use crate::config::{load, CliError};
use crate::output::OutputDir;
use crate::CommonArgs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Scalar kinetic energy; `null` means a free proton, `hbar^2 / 2m`.
    #[serde(rename = "kprime_J")]
    pub kprime_j: Option<f64>,
    pub omega0_rad_s: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { kprime_j: None, omega0_rad_s: 3e8 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseReport {
    #[serde(rename = "kprime_J")]
    pub kprime_j: f64,
    pub omega0_rad_s: f64,
    pub k_rad_s: f64,
    pub probability: f64,
    pub amplitude_ratio: f64,
    pub sign: &'static str,
}

pub fn compute(cfg: &NoiseConfig, c: &PhysicalConstants) -> Result<NoiseReport, CliError> {
    let kprime = cfg.kprime_j.unwrap_or_else(|| c.free_proton_kinetic_energy());
    if !(kprime.is_finite() && kprime >= 0.0) {
        return Err(CliError::Config(format!("kprime_J must be >= 0, got {kprime}")));
    }
    let est = spin_noise_estimate(kprime, cfg.omega0_rad_s, c)?;
    let sign = if est.probability < 0.0 {
        "negative"
    } else if est.probability > 0.0 {
        "positive"
    } else {
        "zero"
    };
    Ok(NoiseReport {
        kprime_j: kprime,
        omega0_rad_s: cfg.omega0_rad_s,
        k_rad_s: est.k_rad_s,
        probability: est.probability,
        amplitude_ratio: est.amplitude_ratio,
        sign,
    })
}

pub fn execute(args: &CommonArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg: NoiseConfig = load(&NoiseConfig::default(), args.config.as_deref(), &args.overrides)?;
    let report = compute(&cfg, &PhysicalConstants::default())?;
    let dir = OutputDir::create(&args.output_dir, &cfg)?;
    dir.write_json("noise_report.json", &report)?;
    writeln!(out, "K               {:.6e} rad/s", report.k_rad_s)?;
    writeln!(out, "probability p   {:.6e} ({})", report.probability, report.sign)?;
    writeln!(out, "amplitude ratio {:.6e}", report.amplitude_ratio)?;
    Ok(())
}
