//! Pulse-sequence data model and the 2D gradient-echo sequence.
//!
//! Times are in seconds from the start of each repetition. Gradient lobes
//! are rectangular with instantaneous ramps (slew rate is not modeled), so
//! gradient moments are integrated exactly.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::spincore::PhysicalConstants;

/// Duration of the excitation pulse.
pub const RF_DURATION_S: f64 = 1.0e-3;
/// Time-bandwidth product of the Gaussian pulse, used to size the slice
/// gradient (slice selection itself is not simulated).
pub const RF_TIME_BANDWIDTH: f64 = 2.7;
/// Phase-encode lobe duration as a fraction of TE.
pub const PHASE_ENCODE_FRACTION: f64 = 0.25;
/// Reference calibration: 15 mW of RF power gives a 5 degree flip.
pub const REFERENCE_POWER_W: f64 = 15.0e-3;
pub const REFERENCE_FLIP_RAD: f64 = 5.0 * PI / 180.0;

/// Flip angle for an RF power, scaling the reference calibration with
/// `B1 ~ sqrt(P)`.
pub fn flip_angle_from_power(power_w: f64) -> f64 {
    REFERENCE_FLIP_RAD * (power_w.max(0.0) / REFERENCE_POWER_W).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RfShape {
    Gaussian,
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfPulseEvent {
    pub start: f64,
    pub duration: f64,
    pub shape: RfShape,
    pub flip_angle: f64,
    /// rad/s
    pub carrier: f64,
    pub phase: f64,
}

impl RfPulseEvent {
    pub fn center(&self) -> f64 {
        self.start + 0.5 * self.duration
    }

    fn end(&self) -> f64 {
        self.start + self.duration
    }

    /// Envelope normalized to unit peak. Gaussians are truncated at
    /// +/- 3 sigma with `sigma = duration / 6`.
    pub fn envelope(&self, t: f64) -> f64 {
        if t < self.start || t > self.end() {
            return 0.0;
        }
        match self.shape {
            RfShape::Rect => 1.0,
            RfShape::Gaussian => {
                let sigma = self.duration / 6.0;
                let x = (t - self.center()) / sigma;
                (-0.5 * x * x).exp()
            }
        }
    }

    /// Time integral of the unit-peak envelope (s).
    pub fn envelope_area(&self) -> f64 {
        match self.shape {
            RfShape::Rect => self.duration,
            RfShape::Gaussian => {
                let sigma = self.duration / 6.0;
                sigma * (2.0 * PI).sqrt() * erf(3.0 / 2f64.sqrt())
            }
        }
    }

    /// Peak B1 (T) that produces `flip_angle`.
    pub fn peak_b1(&self, gamma: f64) -> f64 {
        self.flip_angle / (gamma * self.envelope_area())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GradientAxis {
    /// Read direction.
    X,
    /// Phase-encode direction.
    Y,
    /// Slice direction.
    Z,
}

impl GradientAxis {
    fn index(self) -> usize {
        match self {
            GradientAxis::X => 0,
            GradientAxis::Y => 1,
            GradientAxis::Z => 2,
        }
    }
}

impl fmt::Display for GradientAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GradientAxis::X => "X",
            GradientAxis::Y => "Y",
            GradientAxis::Z => "Z",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientEvent {
    pub axis: GradientAxis,
    pub start: f64,
    pub duration: f64,
    /// T/m
    pub amplitude: f64,
}

impl GradientEvent {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    fn is_active(&self, t: f64) -> bool {
        t >= self.start && t < self.end()
    }

    /// Zeroth moment accrued from the lobe start up to `t` (T s / m).
    fn moment_until(&self, t: f64) -> f64 {
        self.amplitude * (t.min(self.end()) - self.start).clamp(0.0, self.duration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionWindow {
    pub start: f64,
    pub dwell: f64,
    pub samples: usize,
}

impl AcquisitionWindow {
    pub fn sample_time(&self, n: usize) -> f64 {
        self.start + n as f64 * self.dwell
    }

    pub fn end(&self) -> f64 {
        self.start + self.samples as f64 * self.dwell
    }

    /// Echo sample time, `start + (samples / 2) dwell`.
    pub fn midpoint(&self) -> f64 {
        self.start + 0.5 * self.samples as f64 * self.dwell
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub rf: Vec<RfPulseEvent>,
    pub gradients: Vec<GradientEvent>,
    pub acquisition: AcquisitionWindow,
    pub tr: f64,
    pub te: f64,
    pub reference_frequency: f64,
    /// Time TE is measured from: the RF center, or where the RF center would
    /// be when the pulse is omitted.
    pub excitation_center: f64,
    pub phase_step: usize,
}

impl PulseSequence {
    pub fn echo_time_abs(&self) -> f64 {
        self.excitation_center + self.te
    }

    /// Gradient moment on `axis` accrued over `[0, t]` (T s / m).
    pub fn gradient_moment(&self, axis: GradientAxis, t: f64) -> f64 {
        self.gradients.iter().filter(|g| g.axis == axis).map(|g| g.moment_until(t)).sum()
    }

    /// Gradient amplitudes `(Gx, Gy, Gz)` active at `t`.
    pub fn gradients_at(&self, t: f64) -> [f64; 3] {
        let mut g = [0.0; 3];
        for ev in self.gradients.iter().filter(|ev| ev.is_active(t)) {
            g[ev.axis.index()] += ev.amplitude;
        }
        g
    }
}

/// Sequence parameters. `matrix` is `[read samples, phase-encode steps]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub fov_m: f64,
    pub matrix: [usize; 2],
    pub te_s: f64,
    pub tr_s: f64,
    pub flip_rad: f64,
    pub slice_thickness_m: f64,
    #[serde(rename = "read_gradient_T_per_m")]
    pub read_gradient_t_per_m: f64,
    pub with_rf: bool,
    pub reference_frequency_rad_s: f64,
}

impl SequenceConfig {
    /// 7 T small-animal protocol: 58 mm FOV, 128x128, TE 3.9 ms, TR 8 ms,
    /// 5 degree flip, 1.16 mm slice, 20 mT/m read gradient.
    pub fn reference(c: &PhysicalConstants) -> Self {
        Self {
            fov_m: 0.058,
            matrix: [128, 128],
            te_s: 3.9e-3,
            tr_s: 8.0e-3,
            flip_rad: REFERENCE_FLIP_RAD,
            slice_thickness_m: 1.16e-3,
            read_gradient_t_per_m: 2.0e-2,
            with_rf: true,
            reference_frequency_rad_s: -c.gamma() * 7.0,
        }
    }
}

fn check(cond: bool, err: impl FnOnce() -> Error) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(err())
    }
}

/// Read dwell time giving one FOV per k-space step, `2 pi / (gamma G fov)`.
pub fn read_dwell(cfg: &SequenceConfig, gamma: f64) -> f64 {
    2.0 * PI / (gamma * cfg.read_gradient_t_per_m * cfg.fov_m)
}

/// One gradient-echo repetition per phase-encode step.
///
/// Phase-encode moments step through `m / fov` for
/// `m = -N/2 .. N/2 - 1` (the Cartesian FFT ladder). The read dephase lobe
/// carries minus half the read-lobe moment so the X moment is zero at the
/// echo sample. Without RF the gradients are identical and the RF list is
/// empty.
pub fn gradient_echo(cfg: &SequenceConfig, c: &PhysicalConstants) -> Result<Vec<PulseSequence>> {
    let [n_read, n_phase] = cfg.matrix;
    for n in [n_read, n_phase] {
        check(n >= 2 && n.is_power_of_two(), || {
            Error::InvalidParameter(format!("matrix size {n} is not a power of two >= 2"))
        })?;
    }
    for (name, v) in [
        ("fov_m", cfg.fov_m),
        ("slice_thickness_m", cfg.slice_thickness_m),
        ("read_gradient_T_per_m", cfg.read_gradient_t_per_m),
    ] {
        check(v.is_finite() && v > 0.0, || Error::InvalidParameter(format!("{name} must be > 0, got {v}")))?;
    }
    check(cfg.flip_rad.is_finite() && cfg.flip_rad >= 0.0, || {
        Error::InvalidParameter(format!("flip_rad must be >= 0, got {}", cfg.flip_rad))
    })?;
    check(cfg.reference_frequency_rad_s.is_finite(), || {
        Error::InvalidParameter("reference_frequency_rad_s is not finite".into())
    })?;
    check(cfg.te_s > 0.0 && cfg.te_s < cfg.tr_s, || {
        Error::InvalidTiming(format!("need 0 < te < tr, got te = {} s, tr = {} s", cfg.te_s, cfg.tr_s))
    })?;

    let gamma = c.gamma();
    let dwell = read_dwell(cfg, gamma);
    let read_len = n_read as f64 * dwell;
    let excitation_center = 0.5 * RF_DURATION_S;
    let echo = excitation_center + cfg.te_s;
    let acq_start = echo - 0.5 * read_len;
    let dephase_start = acq_start - 0.5 * read_len;
    let pe_len = PHASE_ENCODE_FRACTION * cfg.te_s;
    let pe_start = acq_start - pe_len;

    check(dephase_start >= RF_DURATION_S && pe_start >= RF_DURATION_S, || {
        Error::InvalidTiming(format!(
            "te = {} s too short: encoding lobes would overlap the RF pulse",
            cfg.te_s
        ))
    })?;
    check(acq_start + read_len <= cfg.tr_s, || {
        Error::InvalidTiming(format!("acquisition ends at {} s, after tr = {} s", acq_start + read_len, cfg.tr_s))
    })?;
    check(1.5 * RF_DURATION_S <= cfg.tr_s, || Error::InvalidTiming("tr shorter than the slice lobes".into()))?;

    let slice_amp = 2.0 * PI * (RF_TIME_BANDWIDTH / RF_DURATION_S) / (gamma * cfg.slice_thickness_m);
    let g_read = cfg.read_gradient_t_per_m;
    let acquisition = AcquisitionWindow { start: acq_start, dwell, samples: n_read };

    let rf = if cfg.with_rf {
        vec![RfPulseEvent {
            start: 0.0,
            duration: RF_DURATION_S,
            shape: RfShape::Gaussian,
            flip_angle: cfg.flip_rad,
            carrier: cfg.reference_frequency_rad_s,
            phase: 0.0,
        }]
    } else {
        Vec::new()
    };

    let seqs = (0..n_phase)
        .map(|step| {
            let m = step as f64 - 0.5 * n_phase as f64;
            let pe_amp = 2.0 * PI * m / (gamma * pe_len * cfg.fov_m);
            let gradients = vec![
                GradientEvent { axis: GradientAxis::Z, start: 0.0, duration: RF_DURATION_S, amplitude: slice_amp },
                GradientEvent {
                    axis: GradientAxis::Z,
                    start: RF_DURATION_S,
                    duration: 0.5 * RF_DURATION_S,
                    amplitude: -slice_amp,
                },
                GradientEvent { axis: GradientAxis::Y, start: pe_start, duration: pe_len, amplitude: pe_amp },
                GradientEvent { axis: GradientAxis::X, start: dephase_start, duration: 0.5 * read_len, amplitude: -g_read },
                GradientEvent { axis: GradientAxis::X, start: acq_start, duration: read_len, amplitude: g_read },
            ];
            PulseSequence {
                rf: rf.clone(),
                gradients,
                acquisition,
                tr: cfg.tr_s,
                te: cfg.te_s,
                reference_frequency: cfg.reference_frequency_rad_s,
                excitation_center,
                phase_step: step,
            }
        })
        .collect();
    Ok(seqs)
}

/// Scan time, one TR per sequence.
pub fn total_acquisition_time(seqs: &[PulseSequence]) -> f64 {
    seqs.iter().map(|s| s.tr).sum()
}

/// Off-resonance `w_z(r, t) = -gamma sum_a G_a(t) r_a` (rad/s) relative to
/// the reference frequency.
pub fn local_frequency_offset(seq: &PulseSequence, position: [f64; 3], t: f64, gamma: f64) -> f64 {
    let g = seq.gradients_at(t);
    -gamma * (g[0] * position[0] + g[1] * position[1] + g[2] * position[2])
}

/// Phase accrued over `[0, t]`, the integral of [`local_frequency_offset`].
pub fn accrued_phase(seq: &PulseSequence, position: [f64; 3], t: f64, gamma: f64) -> f64 {
    -gamma
        * [GradientAxis::X, GradientAxis::Y, GradientAxis::Z]
            .iter()
            .zip(position)
            .map(|(&a, r)| seq.gradient_moment(a, t) * r)
            .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    InvalidTiming,
    WindowOverrun,
    EventOutOfRange,
    EchoMisaligned,
    NonPositiveDuration,
    NegativeFlip,
    NonFiniteValue,
    EmptyAcquisition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub event: String,
    pub detail: String,
}

/// Checks every sequence invariant; an empty list means the sequence is valid.
pub fn validate(seq: &PulseSequence) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, event: &str, detail: String| {
        out.push(Violation { kind, event: event.to_string(), detail })
    };
    let tol = 1e-12 * seq.tr.abs().max(1.0);

    if !(seq.te > 0.0 && seq.te < seq.tr) {
        push(ViolationKind::InvalidTiming, "sequence", format!("te = {} s, tr = {} s", seq.te, seq.tr));
    }
    for (name, v) in [("tr", seq.tr), ("te", seq.te), ("reference_frequency", seq.reference_frequency)] {
        if !v.is_finite() {
            push(ViolationKind::NonFiniteValue, "sequence", format!("{name} is not finite"));
        }
    }

    let in_range = |start: f64, end: f64| start >= -tol && end <= seq.tr + tol;
    for (i, rf) in seq.rf.iter().enumerate() {
        let name = format!("rf[{i}]");
        if !(rf.duration > 0.0) {
            push(ViolationKind::NonPositiveDuration, &name, format!("duration = {}", rf.duration));
        }
        if !(rf.flip_angle >= 0.0) {
            push(ViolationKind::NegativeFlip, &name, format!("flip_angle = {}", rf.flip_angle));
        }
        if !in_range(rf.start, rf.end()) {
            push(ViolationKind::EventOutOfRange, &name, format!("[{}, {}] outside [0, tr]", rf.start, rf.end()));
        }
    }
    for (i, g) in seq.gradients.iter().enumerate() {
        let name = format!("gradient[{i}] {}", g.axis);
        if !(g.duration > 0.0) {
            push(ViolationKind::NonPositiveDuration, &name, format!("duration = {}", g.duration));
        }
        if !g.amplitude.is_finite() {
            push(ViolationKind::NonFiniteValue, &name, "amplitude is not finite".into());
        }
        if !in_range(g.start, g.end()) {
            push(ViolationKind::EventOutOfRange, &name, format!("[{}, {}] outside [0, tr]", g.start, g.end()));
        }
    }

    let acq = &seq.acquisition;
    if acq.samples == 0 || !(acq.dwell > 0.0) {
        push(
            ViolationKind::EmptyAcquisition,
            "acquisition",
            format!("samples = {}, dwell = {}", acq.samples, acq.dwell),
        );
    } else {
        if acq.start < -tol {
            push(ViolationKind::EventOutOfRange, "acquisition", format!("starts at {} s", acq.start));
        }
        if acq.end() > seq.tr + tol {
            push(
                ViolationKind::WindowOverrun,
                "acquisition",
                format!("ends at {} s, after tr = {} s", acq.end(), seq.tr),
            );
        }
        let reference = match seq.rf.first() {
            Some(rf) => rf.center(),
            None => seq.excitation_center,
        };
        if (acq.midpoint() - (reference + seq.te)).abs() > 1e-9 * seq.te.abs().max(1e-3) {
            push(
                ViolationKind::EchoMisaligned,
                "acquisition",
                format!("echo at {} s, expected {} s", acq.midpoint(), reference + seq.te),
            );
        }
    }
    out
}

/// Event stream of a whole scan as CSV
/// (`event_type,axis,start_s,duration_s,amplitude`). Start times are
/// absolute: repetition `k` is offset by the sum of the preceding TRs.
/// Amplitudes are the flip angle (rad) for RF, T/m for gradients and the
/// sample count for acquisitions.
pub fn write_events_csv<W: Write>(seqs: &[PulseSequence], mut w: W, comment: &[String]) -> io::Result<()> {
    for line in comment {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "event_type,axis,start_s,duration_s,amplitude")?;
    let mut offset = 0.0;
    for seq in seqs {
        for rf in &seq.rf {
            writeln!(w, "rf,-,{:.16e},{:.16e},{:.16e}", offset + rf.start, rf.duration, rf.flip_angle)?;
        }
        for g in &seq.gradients {
            writeln!(w, "gradient,{},{:.16e},{:.16e},{:.16e}", g.axis, offset + g.start, g.duration, g.amplitude)?;
        }
        let acq = &seq.acquisition;
        writeln!(
            w,
            "acquisition,-,{:.16e},{:.16e},{}",
            offset + acq.start,
            acq.samples as f64 * acq.dwell,
            acq.samples
        )?;
        offset += seq.tr;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn reference_protocol_timing() {
        let c = consts();
        let seqs = gradient_echo(&SequenceConfig::reference(&c), &c).unwrap();
        assert_eq!(seqs.len(), 128);
        assert_relative_eq!(total_acquisition_time(&seqs), 1.024, max_relative = 1e-12);
        for s in &seqs {
            assert!(validate(s).is_empty(), "{:?}", validate(s));
        }
    }

    #[test]
    fn without_rf_same_gradients() {
        let c = consts();
        let cfg = SequenceConfig::reference(&c);
        let with = gradient_echo(&cfg, &c).unwrap();
        let without = gradient_echo(&SequenceConfig { with_rf: false, ..cfg }, &c).unwrap();
        for (a, b) in with.iter().zip(&without) {
            assert_eq!(a.rf.len(), 1);
            assert!(b.rf.is_empty());
            assert_eq!(a.gradients, b.gradients);
            assert!(validate(b).is_empty());
        }
    }

    #[test]
    fn read_moment_nulls_at_echo() {
        let c = consts();
        let seqs = gradient_echo(&SequenceConfig::reference(&c), &c).unwrap();
        for s in &seqs {
            let dephase_start = s.gradients.iter().find(|g| g.axis == GradientAxis::X).unwrap().start;
            let echo = s.acquisition.midpoint();
            let m = s.gradient_moment(GradientAxis::X, echo) - s.gradient_moment(GradientAxis::X, dephase_start);
            assert!(m.abs() < 1e-12, "moment {m}");
            assert_relative_eq!(echo, s.echo_time_abs(), max_relative = 1e-12);
        }
    }

    #[test]
    fn phase_ladder_is_linear_and_symmetric() {
        let c = consts();
        let seqs = gradient_echo(&SequenceConfig::reference(&c), &c).unwrap();
        let amps: Vec<f64> = seqs
            .iter()
            .map(|s| s.gradients.iter().find(|g| g.axis == GradientAxis::Y).unwrap().amplitude)
            .collect();
        let step = amps[1] - amps[0];
        assert!(amps.windows(2).all(|w| ((w[1] - w[0]) - step).abs() < 1e-12 * step.abs()));
        assert_eq!(amps[64], 0.0);
        // every +m has a matching -m; only the -N/2 step is unpaired
        let paired: f64 = amps[1..].iter().sum();
        assert!(paired.abs() < 1e-9 * step.abs());
    }

    #[test]
    fn frequency_offset_examples() {
        let c = consts();
        let seqs = gradient_echo(&SequenceConfig::reference(&c), &c).unwrap();
        let s = &seqs[10];
        let echo = s.echo_time_abs();
        assert_eq!(local_frequency_offset(s, [0.0; 3], echo, c.gamma()), 0.0);
        let w = local_frequency_offset(s, [0.029, 0.0, 0.0], echo, c.gamma());
        assert_relative_eq!(w, -c.gamma() * 5.8e-4, max_relative = 1e-12);
        assert_relative_eq!(w, -1.552e5, max_relative = 1e-3);
        // after the acquisition nothing is switched on
        assert_eq!(local_frequency_offset(s, [0.01, 0.02, 0.0], s.acquisition.end() + 1e-4, c.gamma()), 0.0);
    }

    #[test]
    fn validation_reports() {
        let c = consts();
        let mut s = gradient_echo(&SequenceConfig::reference(&c), &c).unwrap().remove(0);
        s.te = 9e-3;
        let v = validate(&s);
        assert!(v.iter().any(|x| x.kind == ViolationKind::InvalidTiming));

        let mut s = gradient_echo(&SequenceConfig::reference(&c), &c).unwrap().remove(0);
        // window ends exactly on tr: valid; one dwell later: overrun
        s.acquisition.start = s.tr - s.acquisition.samples as f64 * s.acquisition.dwell;
        assert!(!validate(&s).iter().any(|x| x.kind == ViolationKind::WindowOverrun));
        s.acquisition.start += s.acquisition.dwell;
        let v = validate(&s);
        assert!(v.iter().any(|x| x.kind == ViolationKind::WindowOverrun && x.event == "acquisition"));
    }

    #[test]
    fn generation_errors() {
        let c = consts();
        let base = SequenceConfig::reference(&c);
        let bad_te = SequenceConfig { te_s: 9e-3, ..base.clone() };
        assert!(matches!(gradient_echo(&bad_te, &c), Err(Error::InvalidTiming(_))));
        let short_te = SequenceConfig { te_s: 1e-3, ..base.clone() };
        assert!(matches!(gradient_echo(&short_te, &c), Err(Error::InvalidTiming(_))));
        let odd = SequenceConfig { matrix: [100, 128], ..base.clone() };
        assert!(matches!(gradient_echo(&odd, &c), Err(Error::InvalidParameter(_))));
        let neg_fov = SequenceConfig { fov_m: -1.0, ..base };
        assert!(matches!(gradient_echo(&neg_fov, &c), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn rf_calibration() {
        assert_relative_eq!(flip_angle_from_power(REFERENCE_POWER_W), REFERENCE_FLIP_RAD);
        assert!(flip_angle_from_power(1e-9) < 1e-3 * REFERENCE_FLIP_RAD);
        let rf = RfPulseEvent {
            start: 0.0,
            duration: 1e-3,
            shape: RfShape::Gaussian,
            flip_angle: REFERENCE_FLIP_RAD,
            carrier: 0.0,
            phase: 0.0,
        };
        // numerical quadrature of the envelope
        let n = 20_000;
        let h = rf.duration / n as f64;
        let area: f64 = (0..n).map(|i| rf.envelope((i as f64 + 0.5) * h) * h).sum();
        assert_relative_eq!(area, rf.envelope_area(), max_relative = 1e-6);
        assert_relative_eq!(rf.peak_b1(consts().gamma()), 7.83e-7, max_relative = 1e-3);
    }

    #[test]
    fn events_csv() {
        let c = consts();
        let seqs = gradient_echo(&SequenceConfig { matrix: [64, 4], ..SequenceConfig::reference(&c) }, &c).unwrap();
        let mut buf = Vec::new();
        write_events_csv(&seqs, &mut buf, &["config_hash=x".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# config_hash=x"));
        assert_eq!(lines.next(), Some("event_type,axis,start_s,duration_s,amplitude"));
        assert_eq!(lines.count(), 4 * 7);
    }

    #[test]
    fn config_json_field_names() {
        let c = consts();
        let v = serde_json::to_value(SequenceConfig::reference(&c)).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "flip_rad",
                "fov_m",
                "matrix",
                "read_gradient_T_per_m",
                "reference_frequency_rad_s",
                "slice_thickness_m",
                "te_s",
                "tr_s",
                "with_rf"
            ]
        );
        let unknown = r#"{"fov_m":1,"matrix":[2,2],"te_s":1,"tr_s":2,"flip_rad":0,"slice_thickness_m":1,
            "read_gradient_T_per_m":1,"with_rf":true,"reference_frequency_rad_s":1,"extra":1}"#;
        assert!(serde_json::from_str::<SequenceConfig>(unknown).is_err());
    }

    proptest! {
        #[test]
        fn sequence_json_round_trip(fov in 0.04..0.2f64, te in 3.0e-3..5.0e-3f64, flip in 0.0..3.0f64,
                                    g in 2e-2..5e-2f64, with_rf: bool, step in 0usize..8) {
            let c = consts();
            let cfg = SequenceConfig {
                fov_m: fov, matrix: [32, 8], te_s: te, tr_s: 12e-3, flip_rad: flip,
                slice_thickness_m: 1e-3, read_gradient_t_per_m: g, with_rf,
                reference_frequency_rad_s: -c.gamma() * 7.0,
            };
            let seq = gradient_echo(&cfg, &c).unwrap().remove(step);
            prop_assert!(validate(&seq).is_empty());
            let text = serde_json::to_string(&seq).unwrap();
            let back: PulseSequence = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, seq);
            let cfg_back: SequenceConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
            prop_assert_eq!(cfg_back, cfg);
        }
    }
}
