//! `spin`: integrate one spin with RK4 and compare with the closed form.

use std::io::Write;

use serde::{Deserialize, Serialize};
use spinsim::oracle::{max_deviation, Trajectory};
use spinsim::spincore::{make_spinor, FieldConfig, PhysicalConstants, Spinor};
use spinsim::verify::{
    case_trajectory, closed_form_state, oracle_span, random_field, rng, OracleCase, ORACLE_PERIODS,
    ORACLE_STEPS_PER_PERIOD,
};

use crate::config::{load, CliError};
use crate::output::OutputDir;
use crate::CommonArgs;

/// Rows written per trajectory CSV at most; deviations use every step.
pub const MAX_CSV_ROWS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinCase {
    Static,
    Rf,
    Kinetic,
    General,
}

impl SpinCase {
    fn oracle_case(self) -> OracleCase {
        match self {
            SpinCase::Static => OracleCase::Static,
            SpinCase::Rf => OracleCase::RfOffResonance,
            SpinCase::Kinetic => OracleCase::Kinetic,
            SpinCase::General => OracleCase::General,
        }
    }
}

/// Defaults use weak fields (about 270 rad/s Larmor) so ten periods of RK4
/// stay fast; the dynamics depend only on frequency ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinConfig {
    pub case: SpinCase,
    #[serde(rename = "b0_T")]
    pub b0_t: f64,
    #[serde(rename = "b1_T")]
    pub b1_t: f64,
    /// RF carrier; `null` means on resonance.
    pub omega_rf_rad_s: Option<f64>,
    #[serde(rename = "kprime_J")]
    pub kprime_j: f64,
    #[serde(rename = "bx_T")]
    pub bx_t: f64,
    #[serde(rename = "by_T")]
    pub by_t: f64,
    #[serde(rename = "bz_offset_T")]
    pub bz_offset_t: f64,
    /// `[r1, phi1, r2, phi2]`: ground and excited amplitude and phase.
    pub initial: [f64; 4],
    pub periods: f64,
    /// Overrides `periods` when set.
    pub t_end_s: Option<f64>,
    pub steps_per_period: f64,
    /// Draw fields from `seed` instead of the values above.
    pub randomize_fields: bool,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for SpinConfig {
    fn default() -> Self {
        Self {
            case: SpinCase::Static,
            b0_t: 1e-6,
            b1_t: 1e-7,
            omega_rf_rad_s: None,
            kprime_j: 5e-33,
            bx_t: 2e-7,
            by_t: -1e-7,
            bz_offset_t: 5e-7,
            initial: [0.6, 0.0, 0.8, 0.0],
            periods: ORACLE_PERIODS,
            t_end_s: None,
            steps_per_period: ORACLE_STEPS_PER_PERIOD,
            randomize_fields: false,
            seed: 0,
            tolerance: 1e-8,
        }
    }
}

impl SpinConfig {
    pub fn field(&self, c: &PhysicalConstants) -> FieldConfig {
        let case = self.case.oracle_case();
        if self.randomize_fields {
            return random_field(case, &mut rng(self.seed), c);
        }
        let mut fc = FieldConfig::static_field(self.b0_t);
        match self.case {
            SpinCase::Static => {}
            SpinCase::Rf => {
                fc.b1 = self.b1_t;
                fc.omega_rf = self.omega_rf_rad_s.unwrap_or_else(|| fc.omega0(c));
            }
            SpinCase::Kinetic => fc.kprime = self.kprime_j,
            SpinCase::General => {
                fc.kprime = self.kprime_j;
                fc.bx = self.bx_t;
                fc.by = self.by_t;
                fc.bz_offset = self.bz_offset_t;
            }
        }
        fc
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Probabilities {
    pub p_ground: f64,
    pub p_excited: f64,
}

impl From<&Spinor> for Probabilities {
    fn from(s: &Spinor) -> Self {
        let (p1, p2) = s.probabilities();
        Self { p_ground: p1, p_excited: p2 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpinReport {
    pub case: SpinCase,
    pub field: FieldConfig,
    pub t_end_s: f64,
    pub dt_s: f64,
    pub steps: usize,
    pub max_deviation: f64,
    pub max_norm_drift: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub final_oracle: Probabilities,
    pub final_closed_form: Probabilities,
}

fn every_nth(traj: &Trajectory, stride: usize) -> Trajectory {
    let last = traj.len() - 1;
    let keep: Vec<usize> = (0..traj.len()).filter(|i| i % stride == 0 || *i == last).collect();
    Trajectory {
        times: keep.iter().map(|&i| traj.times[i]).collect(),
        states: keep.iter().map(|&i| traj.states[i]).collect(),
    }
}

pub fn simulate(cfg: &SpinConfig, c: &PhysicalConstants) -> Result<(SpinReport, Trajectory, Trajectory), CliError> {
    let case = cfg.case.oracle_case();
    let fc = cfg.field(c);
    fc.validate()?;
    let [r1, phi1, r2, phi2] = cfg.initial;
    let x0 = make_spinor(r1, phi1, r2, phi2)?;
    if !(cfg.steps_per_period > 0.0 && cfg.periods > 0.0) {
        return Err(CliError::Config("periods and steps_per_period must be > 0".into()));
    }
    let (span, dt0) = oracle_span(case, &fc, c);
    let t_end = cfg.t_end_s.unwrap_or(span / ORACLE_PERIODS * cfg.periods);
    let dt = dt0 * ORACLE_STEPS_PER_PERIOD / cfg.steps_per_period;
    if !(t_end.is_finite() && dt.is_finite()) {
        return Err(CliError::Config("field configuration has no finite period".into()));
    }

    let traj = case_trajectory(case, &fc, &x0, t_end, dt.min(t_end), c)?;
    let closed = |t: f64| closed_form_state(case, &fc, &x0, t, c).expect("closed form checked by the integrator");
    let dev = max_deviation(&traj, closed, false);
    let (_, last) = traj.last().expect("at least one step");
    let closed_last = closed(t_end);

    let stride = traj.len().div_ceil(MAX_CSV_ROWS).max(1);
    let sampled = every_nth(&traj, stride);
    let closed_traj = Trajectory {
        times: sampled.times.clone(),
        states: sampled.times.iter().map(|&t| closed(t)).collect(),
    };
    let report = SpinReport {
        case: cfg.case,
        field: fc,
        t_end_s: t_end,
        dt_s: t_end / (traj.len() - 1) as f64,
        steps: traj.len() - 1,
        max_deviation: dev,
        max_norm_drift: traj.max_norm_drift(),
        tolerance: cfg.tolerance,
        passed: dev <= cfg.tolerance,
        final_oracle: (&last).into(),
        final_closed_form: (&closed_last).into(),
    };
    Ok((report, sampled, closed_traj))
}

pub fn execute(args: &CommonArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg: SpinConfig = load(&SpinConfig::default(), args.config.as_deref(), &args.overrides)?;
    let c = PhysicalConstants::default();
    let (report, oracle, closed) = simulate(&cfg, &c)?;
    let dir = OutputDir::create(&args.output_dir, &cfg)?;
    let comment = dir.comment();
    dir.write("trajectory_oracle.csv", |w| oracle.write_csv(w, &comment))?;
    dir.write("trajectory_closed_form.csv", |w| closed.write_csv(w, &comment))?;
    dir.write_json("deviation_report.json", &report)?;
    writeln!(out, "case            {:?}", report.case)?;
    writeln!(out, "steps           {}", report.steps)?;
    writeln!(out, "max deviation   {:.3e} (tolerance {:.1e})", report.max_deviation, report.tolerance)?;
    writeln!(out, "max norm drift  {:.3e}", report.max_norm_drift)?;
    writeln!(
        out,
        "final p_ground  {:.12} oracle, {:.12} closed form",
        report.final_oracle.p_ground, report.final_closed_form.p_ground
    )?;
    if !report.passed {
        return Err(CliError::Verification(format!(
            "oracle deviation {:.3e} exceeds {:.1e}",
            report.max_deviation, report.tolerance
        )));
    }
    Ok(())
}
