//! Fixed-step RK4 integrator for `i hbar dx/dt = H(t) x`.
//!
//! This module is the ground truth for the closed forms and deliberately
//! does not use anything from [`crate::propagators`]. States are never
//! renormalized; the norm drift is reported instead.

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::spincore::{is_hermitian, Mat2, PhysicalConstants, Spinor, C64};

/// A time-dependent Hamiltonian sampled as a raw 2x2 matrix (J).
pub trait HamiltonianFunction {
    fn sample(&self, t: f64) -> Mat2;
}

impl<F: Fn(f64) -> Mat2> HamiltonianFunction for F {
    fn sample(&self, t: f64) -> Mat2 {
        self(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Spinor>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, Spinor)> {
        Some((*self.times.last()?, *self.states.last()?))
    }

    /// `max |norm - 1|` over the trajectory.
    pub fn max_norm_drift(&self) -> f64 {
        self.states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// CSV with columns `t,re_x2,im_x2,re_x1,im_x1,norm` at 17 significant
    /// digits. `comment` lines are written first, prefixed with `#`.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: &[String]) -> io::Result<()> {
        for line in comment {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "t,re_x2,im_x2,re_x1,im_x1,norm")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                t,
                s.x2.re,
                s.x2.im,
                s.x1.re,
                s.x1.im,
                s.norm()
            )?;
        }
        Ok(())
    }
}

fn spectral_norm(m: &Mat2) -> f64 {
    // Hermitian 2x2: eigenvalues are mean +/- radius
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let mean = 0.5 * (a + d);
    let r = (0.5 * (a - d)).hypot(m[(0, 1)].norm());
    mean.abs() + r
}

struct Rhs<'a, H: HamiltonianFunction + ?Sized> {
    h: &'a H,
    hbar: f64,
    dt: f64,
}

impl<H: HamiltonianFunction + ?Sized> Rhs<'_, H> {
    fn eval(&self, t: f64, x: &[C64; 2]) -> Result<[C64; 2]> {
        let m = self.h.sample(t);
        if !is_hermitian(&m, 1e-12) {
            return Err(Error::NonHermitianSample(t));
        }
        let stiffness = self.dt * spectral_norm(&m) / self.hbar;
        if stiffness > 0.1 {
            return Err(Error::StepTooLarge(stiffness));
        }
        let f = C64::new(0.0, -1.0 / self.hbar);
        Ok([
            f * (m[(0, 0)] * x[0] + m[(0, 1)] * x[1]),
            f * (m[(1, 0)] * x[0] + m[(1, 1)] * x[1]),
        ])
    }
}

fn axpy(x: &[C64; 2], a: f64, k: &[C64; 2]) -> [C64; 2] {
    [x[0] + k[0] * a, x[1] + k[1] * a]
}

/// Classical RK4 from `0` to `t_end`. The step is adjusted down to
/// `t_end / round(t_end / dt)` so the last sample lands on `t_end`.
pub fn integrate<H: HamiltonianFunction + ?Sized>(
    h: &H,
    x0: &Spinor,
    t_end: f64,
    dt: f64,
    c: &PhysicalConstants,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidStep(format!("dt must be > 0, got {dt}")));
    }
    if !(t_end >= dt && t_end.is_finite()) {
        return Err(Error::InvalidStep(format!("dt = {dt} exceeds t_end = {t_end}")));
    }
    let steps = (t_end / dt).round().max(1.0) as usize;
    let h_step = t_end / steps as f64;
    let rhs = Rhs { h, hbar: c.hbar(), dt: h_step };

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = [x0.x2, x0.x1];
    times.push(0.0);
    states.push(*x0);
    for i in 0..steps {
        let t = i as f64 * h_step;
        let k1 = rhs.eval(t, &x)?;
        let k2 = rhs.eval(t + 0.5 * h_step, &axpy(&x, 0.5 * h_step, &k1))?;
        let k3 = rhs.eval(t + 0.5 * h_step, &axpy(&x, 0.5 * h_step, &k2))?;
        let k4 = rhs.eval(t + h_step, &axpy(&x, h_step, &k3))?;
        for j in 0..2 {
            x[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h_step / 6.0);
        }
        times.push((i + 1) as f64 * h_step);
        states.push(Spinor::new(x[0], x[1]));
    }
    Ok(Trajectory { times, states })
}

/// 1/1000 of the shortest period `2 pi / |w|` among the non-zero
/// frequencies given.
pub fn default_step(frequencies: &[f64]) -> Option<f64> {
    frequencies
        .iter()
        .map(|w| w.abs())
        .filter(|w| *w > 0.0 && w.is_finite())
        .map(|w| 2.0 * PI / w / 1000.0)
        .min_by(f64::total_cmp)
}

/// Largest `||traj(t) - closed_form(t)||_2` over the sample times. With
/// `phase_align`, one global phase (least-squares optimal over the whole
/// trajectory) is applied to the closed form first.
pub fn max_deviation<F: Fn(f64) -> Spinor>(traj: &Trajectory, closed_form: F, phase_align: bool) -> f64 {
    let reference: Vec<Spinor> = traj.times.iter().map(|&t| closed_form(t)).collect();
    let phase = if phase_align {
        let overlap: C64 = reference.iter().zip(&traj.states).map(|(r, s)| r.inner(s)).sum();
        if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            C64::new(1.0, 0.0)
        }
    } else {
        C64::new(1.0, 0.0)
    };
    reference
        .iter()
        .zip(&traj.states)
        .map(|(r, s)| s.distance(&r.scale(phase)))
        .fold(0.0, f64::max)
}
