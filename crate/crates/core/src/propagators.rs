//! Closed-form propagators for one spin-1/2 in static, RF, kinetic and
//! general constant fields, with occupation probabilities and the
//! spin-noise estimate.
//!
//! Every rotation is evaluated from the half-angle forms `cos(Delta t / 2)`
//! and `sin(Delta t / 2)` directly rather than through a matrix exponential,
//! so the numerical oracle in [`crate::oracle`] checks the formulas and not a
//! second exponentiation.

use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spincore::{re, FieldConfig, Mat2, PhysicalConstants, Spinor, C64, I};

/// Below this the effective frequency is treated as zero (trivial dynamics).
fn delta_is_degenerate(delta: f64, omega_big: f64, omega1: f64) -> bool {
    delta < 1e-12 * omega_big.abs().max(omega1.abs()).max(1.0)
}

/// A 2x2 unitary acting on [`Spinor`]s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    m: Mat2,
}

impl Propagator {
    pub fn from_matrix(m: Mat2) -> Self {
        Self { m }
    }

    pub fn identity() -> Self {
        Self { m: Mat2::identity() }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    pub fn apply(&self, s: &Spinor) -> Spinor {
        Spinor::from_vector(&(self.m * s.to_vector()))
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    pub fn determinant(&self) -> C64 {
        self.m.determinant()
    }

    /// `max |U U^dagger - I|` over entries.
    pub fn unitarity_error(&self) -> f64 {
        max_abs(&(self.m * self.m.adjoint() - Mat2::identity()))
    }

    /// Largest entry-wise difference.
    pub fn max_diff(&self, other: &Propagator) -> f64 {
        max_abs(&(self.m - other.m))
    }
}

impl Mul for Propagator {
    type Output = Propagator;

    fn mul(self, rhs: Propagator) -> Propagator {
        Propagator { m: self.m * rhs.m }
    }
}

pub(crate) fn max_abs(m: &Mat2) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `Omega`, the effective transverse frequency and `Delta = sqrt(Omega^2 + w1^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub omega_big: f64,
    pub omega1_eff: f64,
    pub delta: f64,
}

impl SpectralParams {
    pub fn new(omega_big: f64, omega1_eff: f64) -> Self {
        Self { omega_big, omega1_eff, delta: omega_big.hypot(omega1_eff) }
    }

    /// Roots `i (Omega +/- Delta) / 2` of the characteristic equation.
    pub fn lambdas(&self) -> (C64, C64) {
        (
            I * (0.5 * (self.omega_big + self.delta)),
            I * (0.5 * (self.omega_big - self.delta)),
        )
    }

    /// Period of the occupation probabilities, `4 pi / Delta`.
    pub fn probability_period(&self) -> f64 {
        4.0 * std::f64::consts::PI / self.delta
    }
}

/// Coefficients of the RF solution
/// `x2 = e^{-i w t/2}(C1 e^{i D t/2} + C2 e^{-i D t/2})`,
/// `x1 = e^{ i w t/2}(C3 e^{i D t/2} + C4 e^{-i D t/2})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RFCoefficients {
    pub c1: C64,
    pub c2: C64,
    pub c3: C64,
    pub c4: C64,
    pub spectral: SpectralParams,
}

impl RFCoefficients {
    /// State at time `t` for an RF field at angular velocity `omega`.
    pub fn state_at(&self, omega: f64, t: f64) -> Spinor {
        let half = 0.5 * self.spectral.delta * t;
        let (ep, em) = (C64::from_polar(1.0, half), C64::from_polar(1.0, -half));
        let frame = 0.5 * omega * t;
        Spinor::new(
            C64::from_polar(1.0, -frame) * (self.c1 * ep + self.c2 * em),
            C64::from_polar(1.0, frame) * (self.c3 * ep + self.c4 * em),
        )
    }

    /// Residuals of the four linear constraints the coefficients satisfy.
    pub fn constraint_residuals(&self, x0: &Spinor) -> [f64; 4] {
        let SpectralParams { omega_big, omega1_eff, delta } = self.spectral;
        [
            (self.c1 + self.c2 - x0.x2).norm(),
            (self.c3 + self.c4 - x0.x1).norm(),
            (self.c1 * (delta + omega_big) + self.c3 * omega1_eff).norm(),
            (self.c2 * (delta - omega_big) - self.c4 * omega1_eff).norm(),
        ]
    }
}

/// Free precession `E(w0, t) = diag(e^{-i w0 t/2}, e^{i w0 t/2})`.
pub fn free_evolution(omega0: f64, t: f64) -> Propagator {
    let ph = 0.5 * omega0 * t;
    Propagator {
        m: Mat2::new(C64::from_polar(1.0, -ph), re(0.0), re(0.0), C64::from_polar(1.0, ph)),
    }
}

/// Spin-1/2 rotation by `theta` about the unit axis `(ux, uy, uz)`.
pub fn rotation_operator(ux: f64, uy: f64, uz: f64, theta: f64) -> Result<Propagator> {
    let n2 = ux * ux + uy * uy + uz * uz;
    if !((n2 - 1.0).abs() <= 1e-9) {
        return Err(Error::NonUnitAxis(n2));
    }
    Ok(rotation_unchecked(ux, uy, uz, theta))
}

fn rotation_unchecked(ux: f64, uy: f64, uz: f64, theta: f64) -> Propagator {
    let (s, c) = (0.5 * theta).sin_cos();
    Propagator {
        m: Mat2::new(
            C64::new(c, -uz * s),
            C64::new(-uy * s, -ux * s),
            C64::new(uy * s, -ux * s),
            C64::new(c, uz * s),
        ),
    }
}

/// `[[a, b], [b, conj(a)]]` with `a = cos(Dt/2) - i (W/D) sin(Dt/2)`,
/// `b = -i (w1/D) sin(Dt/2)`. This is the rotation by `D t` about
/// `(w1/D, 0, W/D)`.
fn nutation(sp: &SpectralParams, t: f64) -> Mat2 {
    let (s, c) = (0.5 * sp.delta * t).sin_cos();
    let a = C64::new(c, -sp.omega_big / sp.delta * s);
    let b = C64::new(0.0, -sp.omega1_eff / sp.delta * s);
    Mat2::new(a, b, b, a.conj())
}

/// Closed-form constants of the RF solution for detuning `omega_big` and RF
/// frequency `omega1`.
pub fn rf_coefficients(omega_big: f64, omega1: f64, x0: &Spinor) -> Result<RFCoefficients> {
    let sp = SpectralParams::new(omega_big, omega1);
    if sp.delta == 0.0 || !sp.delta.is_finite() {
        return Err(Error::DegenerateDelta);
    }
    let w = omega_big / sp.delta;
    let u = omega1 / sp.delta;
    let (x2, x1) = (x0.x2, x0.x1);
    Ok(RFCoefficients {
        c1: (x2 * (1.0 - w) - x1 * u) * 0.5,
        c2: (x2 * (1.0 + w) + x1 * u) * 0.5,
        c3: (x2 * (-u) + x1 * (1.0 + w)) * 0.5,
        c4: (x2 * u + x1 * (1.0 - w)) * 0.5,
        spectral: sp,
    })
}

/// The RF evolution matrix `A(w, w0, w1, t)`.
pub fn rf_propagator(omega: f64, omega0: f64, omega1: f64, t: f64) -> Result<Propagator> {
    if omega1 == 0.0 {
        return Err(Error::NoRFField);
    }
    let sp = SpectralParams::new(omega0 - omega, omega1);
    let n = nutation(&sp, t);
    let (em, ep) = (C64::from_polar(1.0, -0.5 * omega * t), C64::from_polar(1.0, 0.5 * omega * t));
    Ok(Propagator {
        m: Mat2::new(em * n[(0, 0)], em * n[(0, 1)], ep * n[(1, 0)], ep * n[(1, 1)]),
    })
}

/// Splits `A = E(w, t) R` where `R` rotates by `D t` about
/// `u = (w1/D, 0, (w0 - w)/D)`. Order matters: `R E != A` off resonance.
pub fn rf_factorize(omega: f64, omega0: f64, omega1: f64, t: f64) -> Result<(Propagator, Propagator)> {
    if omega1 == 0.0 {
        return Err(Error::NoRFField);
    }
    let sp = SpectralParams::new(omega0 - omega, omega1);
    let (ux, uz) = rf_rotation_axis(&sp);
    Ok((free_evolution(omega, t), rotation_unchecked(ux, 0.0, uz, sp.delta * t)))
}

/// `(u_x, u_z)` of the rotation axis; `u_y = 0`.
pub fn rf_rotation_axis(sp: &SpectralParams) -> (f64, f64) {
    (sp.omega1_eff / sp.delta, sp.omega_big / sp.delta)
}

/// On-resonance RF evolution `A0 = E(w0, t) R_{(1,0,0), w1 t}`.
pub fn resonance_propagator(omega0: f64, omega1: f64, t: f64) -> Propagator {
    let (s, c) = (0.5 * omega1 * t).sin_cos();
    let r = Mat2::new(re(c), C64::new(0.0, -s), C64::new(0.0, -s), re(c));
    Propagator { m: free_evolution(omega0, t).m * r }
}

/// Static field plus the scalar kinetic term: `E_T R` with
/// `E_T = e^{-i K t/2} I` and `R` the rotation by `sqrt(w0^2 + K^2) t`
/// about `(K/D, 0, w0/D)`.
pub fn kinetic_propagator(omega0: f64, k: f64, t: f64) -> Propagator {
    let sp = SpectralParams::new(omega0, k);
    let et = C64::from_polar(1.0, -0.5 * k * t);
    if delta_is_degenerate(sp.delta, omega0, k) {
        return Propagator { m: Mat2::identity() * et };
    }
    Propagator { m: nutation(&sp, t) * et }
}

/// Constant general field in matrix form:
/// `e^{-iKt/2} [cos(Dt/2) I - i sin(Dt/2) (n . sigma)/D]` with
/// `n = (w_x + K, w_y, w_z)`.
pub fn general_propagator(omega_x: f64, omega_y: f64, omega_z: f64, k: f64, t: f64) -> Propagator {
    let (nx, ny, nz) = (omega_x + k, omega_y, omega_z);
    let delta = (nx * nx + ny * ny + nz * nz).sqrt();
    let et = C64::from_polar(1.0, -0.5 * k * t);
    if delta_is_degenerate(delta, nz, nx.hypot(ny)) {
        return Propagator { m: Mat2::identity() * et };
    }
    let r = rotation_unchecked(nx / delta, ny / delta, nz / delta, delta * t);
    Propagator { m: r.m * et }
}

/// General-case frequencies: `w_z`, `w1^2 = w_x^2 + w_y^2 + K^2 + 2 K w_x`,
/// `Delta`, and the phase `beta` of the transverse coupling
/// `(w_x + K) - i w_y = w1 e^{-i beta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralSpectrum {
    pub spectral: SpectralParams,
    pub k: f64,
    pub beta: f64,
}

impl GeneralSpectrum {
    pub fn new(fc: &FieldConfig, c: &PhysicalConstants) -> Self {
        let (wx, wy, wz, k) = (fc.omega_x(c), fc.omega_y(c), fc.omega_z(c), fc.k(c));
        let w1_sq = (wx * wx + wy * wy + k * k + 2.0 * k * wx).max(0.0);
        Self {
            spectral: SpectralParams::new(wz, w1_sq.sqrt()),
            k,
            beta: wy.atan2(wx + k),
        }
    }

    fn degenerate(&self) -> bool {
        let sp = &self.spectral;
        delta_is_degenerate(sp.delta, sp.omega_big, sp.omega1_eff)
    }
}

/// Explicit constant-field solution `(x2(t), x1(t))` in the frame of the
/// reference Larmor frequency (see
/// [`hamiltonian_general_offset`](crate::spincore::hamiltonian_general_offset)).
///
/// The transverse coupling phase `beta` enters by shifting the partner
/// phase: `phi1 -> phi1 - beta` in `x2`, `phi2 -> phi2 + beta` in `x1`.
/// For `w_y = 0` and `w_x + K >= 0`, `beta = 0`.
pub fn general_solution(fc: &FieldConfig, x0: &Spinor, t: f64, c: &PhysicalConstants) -> Result<Spinor> {
    let g = GeneralSpectrum::new(fc, c);
    if g.degenerate() {
        return Ok(x0.scale(C64::from_polar(1.0, -0.5 * g.k * t)));
    }
    let (r1, phi1, r2, phi2) = x0.polar();
    let sp = g.spectral;
    let (s, co) = (0.5 * sp.delta * t).sin_cos();
    let wz = sp.omega_big / sp.delta;
    let w1 = sp.omega1_eff / sp.delta;
    let kt = 0.5 * g.k * t;

    // x2: own phase a2, partner phase b1
    let a2 = -kt + phi2;
    let b1 = -kt + phi1 - g.beta;
    let x2 = C64::new(
        r2 * (co * a2.cos() - wz * s * (kt - phi2).sin()) + r1 * w1 * s * b1.sin(),
        -(r1 * w1 * s * b1.cos() + r2 * wz * s * (kt - phi2).cos()) + r2 * co * a2.sin(),
    );

    // x1: own phase a1, partner phase b2
    let a1 = -kt + phi1;
    let b2 = kt - phi2 - g.beta;
    let x1 = C64::new(
        r1 * (co * a1.cos() - wz * s * a1.sin()) - r2 * w1 * s * b2.sin(),
        r1 * (wz * s * a1.cos() + co * a1.sin()) - r2 * w1 * s * b2.cos(),
    );
    Ok(Spinor::new(x2, x1))
}

/// Occupation probabilities `(p1, p2) = (|x1|^2, |x2|^2)` of the general
/// constant-field solution, from the closed-form expression periodic in
/// `4 pi / Delta`.
pub fn state_probabilities(fc: &FieldConfig, x0: &Spinor, t: f64, c: &PhysicalConstants) -> Result<(f64, f64)> {
    let (r1, phi1, r2, phi2) = x0.polar();
    let g = GeneralSpectrum::new(fc, c);
    if g.degenerate() {
        return Ok((r1 * r1, r2 * r2));
    }
    let sp = g.spectral;
    let (s, co) = (0.5 * sp.delta * t).sin_cos();
    let wz = sp.omega_big / sp.delta;
    let w1 = sp.omega1_eff / sp.delta;
    let dphi = phi1 - phi2 - g.beta;

    let a = s * (wz * wz - 1.0);
    let b = co * dphi.sin() + wz * s * dphi.cos();
    let p2 = r2 * r2 + s * (r2 * r2 * a + r1 * r1 * w1 * w1 * s + 2.0 * w1 * r1 * r2 * b);
    let p1 = r1 * r1 + s * (r1 * r1 * a + r2 * r2 * w1 * w1 * s - 2.0 * w1 * r1 * r2 * b);
    Ok((p1, p2))
}

/// Probability that a free spin emits a photon, `-K / |w0|`. The sign marks
/// the negative deviation from the initial populations.
pub fn emission_probability(k: f64, omega0_mag: f64) -> Result<f64> {
    if omega0_mag == 0.0 || !omega0_mag.is_finite() {
        return Err(Error::ZeroFrequency);
    }
    Ok(-k / omega0_mag.abs())
}

/// Fluctuation ratio at the amplitude level, `sqrt(|p|)`.
pub fn noise_amplitude_ratio(p: f64) -> f64 {
    p.abs().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinNoiseEstimate {
    pub k_rad_s: f64,
    pub probability: f64,
    pub amplitude_ratio: f64,
}

/// Spin-noise numbers for a scalar kinetic energy `kprime` (J) and a Larmor
/// frequency magnitude `omega0_mag` given in plain s^-1.
pub fn spin_noise_estimate(kprime: f64, omega0_mag: f64, c: &PhysicalConstants) -> Result<SpinNoiseEstimate> {
    let k = 2.0 * kprime / c.hbar();
    let p = emission_probability(k, omega0_mag)?;
    Ok(SpinNoiseEstimate { k_rad_s: k, probability: p, amplitude_ratio: noise_amplitude_ratio(p) })
}

/// How the kinetic/transverse cross term enters `Delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CrossTerm {
    /// `2 K w_x`, consistent with the general Schrodinger equation.
    #[default]
    TwoKOmegaX,
    /// `K w_x`, kept only so the difference can be measured.
    KOmegaX,
}

/// Effective frequency used by the imaging model. With RF the rotating term
/// `2 K w_RF cos(w t)` is evaluated at `cos(w t) = 1`.
pub fn delta_effective(fc: &FieldConfig, with_rf: bool, c: &PhysicalConstants) -> f64 {
    delta_effective_with(fc, with_rf, c, CrossTerm::TwoKOmegaX)
}

pub fn delta_effective_with(fc: &FieldConfig, with_rf: bool, c: &PhysicalConstants, cross: CrossTerm) -> f64 {
    let (wx, wy, wz, k) = (fc.omega_x(c), fc.omega_y(c), fc.omega_z(c), fc.k(c));
    let factor = match cross {
        CrossTerm::TwoKOmegaX => 2.0,
        CrossTerm::KOmegaX => 1.0,
    };
    let mut sq = wz * wz + wx * wx + wy * wy + k * k + factor * k * wx;
    if with_rf {
        let wrf = fc.omega1(c);
        sq += factor * k * wrf + wrf * wrf;
    }
    sq.max(0.0).sqrt()
}
