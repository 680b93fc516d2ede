//! Physical constants, the single-spin state, field configurations and the
//! single-spin Hamiltonians.
//!
//! Spinors are stored as the column `(x2, x1)`: the excited level `|+>` on
//! top and the ground level `|->` at the bottom. Index 1 is the ground level.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub(crate) fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Physical constants in SI units. Defaults are CODATA values for the proton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// J s
    hbar: f64,
    /// kg
    proton_mass: f64,
    /// rad s^-1 T^-1
    gamma_proton: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.054_571_817e-34,
            proton_mass: 1.672_621_92e-27,
            gamma_proton: 2.675_221_874_4e8,
        }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, proton_mass: f64, gamma_proton: f64) -> Result<Self> {
        for (name, v) in [("hbar", hbar), ("proton_mass", proton_mass), ("gamma", gamma_proton)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidField(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { hbar, proton_mass, gamma_proton })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn proton_mass(&self) -> f64 {
        self.proton_mass
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_proton
    }

    /// The scalar kinetic energy `hbar^2 / (2 m)` used for the spin-noise
    /// estimate. No length scale is applied: the value is taken literally in
    /// joules.
    pub fn free_proton_kinetic_energy(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.proton_mass)
    }
}

/// State of one spin-1/2: `x2` is the excited amplitude, `x1` the ground one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spinor {
    pub x2: C64,
    pub x1: C64,
}

impl Spinor {
    pub const fn new(x2: C64, x1: C64) -> Self {
        Self { x2, x1 }
    }

    pub fn ground() -> Self {
        Self::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0))
    }

    pub fn excited() -> Self {
        Self::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x1.norm_sqr() + self.x2.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Populations `(|x1|^2, |x2|^2)`.
    pub fn probabilities(&self) -> (f64, f64) {
        (self.x1.norm_sqr(), self.x2.norm_sqr())
    }

    /// Polar form `(r1, phi1, r2, phi2)`.
    pub fn polar(&self) -> (f64, f64, f64, f64) {
        let (r1, p1) = self.x1.to_polar();
        let (r2, p2) = self.x2.to_polar();
        (r1, p1, r2, p2)
    }

    pub fn scale(&self, z: C64) -> Self {
        Self::new(self.x2 * z, self.x1 * z)
    }

    pub fn to_vector(&self) -> Vector2<C64> {
        Vector2::new(self.x2, self.x1)
    }

    pub fn from_vector(v: &Vector2<C64>) -> Self {
        Self::new(v[0], v[1])
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Spinor) -> C64 {
        self.x2.conj() * other.x2 + self.x1.conj() * other.x1
    }

    pub fn distance(&self, other: &Spinor) -> f64 {
        ((self.x2 - other.x2).norm_sqr() + (self.x1 - other.x1).norm_sqr()).sqrt()
    }
}

/// Builds `r2 e^{i phi2} |+> + r1 e^{i phi1} |->`, renormalized to unit norm.
pub fn make_spinor(r1: f64, phi1: f64, r2: f64, phi2: f64) -> Result<Spinor> {
    for r in [r1, r2] {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidAmplitude(r));
        }
    }
    let n = r1.hypot(r2);
    if n == 0.0 {
        return Err(Error::ZeroState);
    }
    Ok(Spinor::new(
        C64::from_polar(r2 / n, phi2),
        C64::from_polar(r1 / n, phi1),
    ))
}

/// Static field, optional RF, kinetic term and general-case field components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Static field along Oz (T).
    pub b0: f64,
    /// RF amplitude (T); zero when there is no RF.
    pub b1: f64,
    /// RF angular velocity (rad/s).
    pub omega_rf: f64,
    /// Scalar kinetic energy K' (J).
    pub kprime: f64,
    /// Transverse field components (T).
    pub bx: f64,
    pub by: f64,
    /// z field relative to `b0` (T).
    pub bz_offset: f64,
}

impl FieldConfig {
    pub fn static_field(b0: f64) -> Self {
        Self { b0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("b0", self.b0),
            ("b1", self.b1),
            ("omega_rf", self.omega_rf),
            ("kprime", self.kprime),
            ("bx", self.bx),
            ("by", self.by),
            ("bz_offset", self.bz_offset),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidField(format!("{name} is not finite")));
        }
        if self.b0 <= 0.0 {
            return Err(Error::InvalidField(format!("b0 must be > 0, got {}", self.b0)));
        }
        if self.b1 < 0.0 {
            return Err(Error::InvalidField(format!("b1 must be >= 0, got {}", self.b1)));
        }
        if self.kprime < 0.0 {
            return Err(Error::InvalidField(format!("kprime must be >= 0, got {}", self.kprime)));
        }
        Ok(())
    }

    /// Larmor frequency `-gamma B0`.
    pub fn omega0(&self, c: &PhysicalConstants) -> f64 {
        -c.gamma() * self.b0
    }

    /// RF nutation frequency `-gamma B1`.
    pub fn omega1(&self, c: &PhysicalConstants) -> f64 {
        -c.gamma() * self.b1
    }

    /// `K = 2 K' / hbar`.
    pub fn k(&self, c: &PhysicalConstants) -> f64 {
        2.0 * self.kprime / c.hbar()
    }

    pub fn omega_x(&self, c: &PhysicalConstants) -> f64 {
        -c.gamma() * self.bx
    }

    pub fn omega_y(&self, c: &PhysicalConstants) -> f64 {
        -c.gamma() * self.by
    }

    /// z frequency measured from the reference Larmor frequency.
    pub fn omega_z(&self, c: &PhysicalConstants) -> f64 {
        -c.gamma() * self.bz_offset
    }
}

/// A 2x2 Hermitian matrix in joules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hamiltonian2 {
    m: Mat2,
}

impl Hamiltonian2 {
    pub fn new(m: Mat2) -> Result<Self> {
        if !is_hermitian(&m, 1e-15) {
            return Err(Error::InvalidField("matrix is not Hermitian".into()));
        }
        Ok(Self { m })
    }

    /// Builds `(hbar/2) [[d, off], [conj(off), -d]] + (hbar/2) k * ones`
    /// which is Hermitian by construction.
    fn from_frequencies(hbar: f64, d: f64, off: C64, k: f64) -> Self {
        let h = 0.5 * hbar;
        let m = Mat2::new(
            re(h * (d + k)),
            (off + k) * h,
            (off.conj() + k) * h,
            re(h * (-d + k)),
        );
        Self { m }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let a = self.m[(0, 0)].re;
        let d = self.m[(1, 1)].re;
        let b = self.m[(0, 1)].norm();
        let mean = 0.5 * (a + d);
        let r = (0.5 * (a - d)).hypot(b);
        (mean - r, mean + r)
    }

    /// Spectral norm (largest |eigenvalue|).
    pub fn spectral_norm(&self) -> f64 {
        let (lo, hi) = self.eigenvalues();
        lo.abs().max(hi.abs())
    }
}

pub(crate) fn is_hermitian(m: &Mat2, rel_tol: f64) -> bool {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !scale.is_finite() {
        return false;
    }
    let dev = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    dev <= rel_tol * scale
}

/// `-(1/2) gamma hbar diag(B0, -B0)`.
pub fn hamiltonian_static(fc: &FieldConfig, c: &PhysicalConstants) -> Hamiltonian2 {
    Hamiltonian2::from_frequencies(c.hbar(), fc.omega0(c), C64::new(0.0, 0.0), 0.0)
}

/// Lab-frame Hamiltonian with a B1 field rotating at `omega_rf`, at time `t`.
pub fn hamiltonian_rf(fc: &FieldConfig, t: f64, c: &PhysicalConstants) -> Result<Hamiltonian2> {
    if fc.b1 == 0.0 {
        return Err(Error::NoRFField);
    }
    let off = C64::from_polar(fc.omega1(c), -fc.omega_rf * t);
    Ok(Hamiltonian2::from_frequencies(c.hbar(), fc.omega0(c), off, 0.0))
}

/// `K' * ones - mu.B0`, i.e. `(hbar/2) [[w0 + K, K], [K, -w0 + K]]`.
pub fn hamiltonian_kinetic(fc: &FieldConfig, c: &PhysicalConstants) -> Hamiltonian2 {
    Hamiltonian2::from_frequencies(c.hbar(), fc.omega0(c), C64::new(0.0, 0.0), fc.k(c))
}

/// Lab-frame general Hamiltonian: static field plus constant transverse
/// components, a z offset and the kinetic term.
pub fn hamiltonian_general(fc: &FieldConfig, c: &PhysicalConstants) -> Hamiltonian2 {
    let wz = fc.omega0(c) + fc.omega_z(c);
    let off = C64::new(fc.omega_x(c), -fc.omega_y(c));
    Hamiltonian2::from_frequencies(c.hbar(), wz, off, fc.k(c))
}

/// General Hamiltonian with the z frequency measured from the reference
/// Larmor frequency; this is the equation solved by
/// [`general_solution`](crate::propagators::general_solution).
pub fn hamiltonian_general_offset(fc: &FieldConfig, c: &PhysicalConstants) -> Hamiltonian2 {
    let off = C64::new(fc.omega_x(c), -fc.omega_y(c));
    Hamiltonian2::from_frequencies(c.hbar(), fc.omega_z(c), off, fc.k(c))
}
