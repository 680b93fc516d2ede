//! `sequence`: generate and validate the gradient-echo scan.

use std::io::Write;

use serde::Serialize;
use spinsim::sequence::{
    gradient_echo, total_acquisition_time, validate, write_events_csv, GradientAxis, PulseSequence, SequenceConfig,
    Violation,
};
use spinsim::spincore::PhysicalConstants;

use crate::config::{load, CliError};
use crate::output::OutputDir;
use crate::CommonArgs;

#[derive(Debug, Clone, Serialize)]
pub struct SequenceReport {
    pub config: SequenceConfig,
    pub steps: usize,
    pub total_acquisition_time_s: f64,
    pub dwell_s: f64,
    /// Largest `|read moment|` over steps between the dephase start and the
    /// echo sample (T s / m).
    pub max_echo_read_moment: f64,
    pub violations: Vec<Violation>,
    pub sequences: Vec<PulseSequence>,
}

pub fn echo_read_moment(seq: &PulseSequence) -> f64 {
    let start = seq
        .gradients
        .iter()
        .filter(|g| g.axis == GradientAxis::X)
        .map(|g| g.start)
        .fold(f64::INFINITY, f64::min);
    if !start.is_finite() {
        return 0.0;
    }
    let echo = seq.acquisition.midpoint();
    seq.gradient_moment(GradientAxis::X, echo) - seq.gradient_moment(GradientAxis::X, start)
}

pub fn build(cfg: &SequenceConfig, c: &PhysicalConstants) -> Result<SequenceReport, CliError> {
    let seqs = gradient_echo(cfg, c)?;
    Ok(SequenceReport {
        config: cfg.clone(),
        steps: seqs.len(),
        total_acquisition_time_s: total_acquisition_time(&seqs),
        dwell_s: seqs.first().map_or(0.0, |s| s.acquisition.dwell),
        max_echo_read_moment: seqs.iter().map(|s| echo_read_moment(s).abs()).fold(0.0, f64::max),
        violations: seqs.iter().flat_map(validate).collect(),
        sequences: seqs,
    })
}

pub fn execute(args: &CommonArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let c = PhysicalConstants::default();
    let cfg: SequenceConfig = load(&SequenceConfig::reference(&c), args.config.as_deref(), &args.overrides)?;
    let report = build(&cfg, &c)?;
    let dir = OutputDir::create(&args.output_dir, &cfg)?;
    let comment = dir.comment();
    dir.write("events.csv", |w| write_events_csv(&report.sequences, w, &comment))?;
    dir.write_json("sequence.json", &report)?;
    writeln!(out, "phase steps           {}", report.steps)?;
    writeln!(out, "total acquisition     {:.6} s", report.total_acquisition_time_s)?;
    writeln!(out, "dwell                 {:.6e} s", report.dwell_s)?;
    writeln!(out, "echo read moment      {:.3e} T s/m", report.max_echo_read_moment)?;
    writeln!(out, "violations            {}", report.violations.len())?;
    if let Some(v) = report.violations.first() {
        return Err(CliError::Verification(format!("{:?} in {}: {}", v.kind, v.event, v.detail)));
    }
    Ok(())
}
