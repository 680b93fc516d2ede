//! Randomized invariant checks shared by the `verify` command and the test
//! suites. Every check returns the worst value it saw; the caller compares
//! against a tolerance.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{reconstruct, Grid};
use crate::multispin::{eigenvalue_sums, full_space_propagator, n_spin_hamiltonian, product_state, product_state_evolution};
use crate::oracle::{integrate, max_deviation, Trajectory};
use crate::propagators::{
    delta_effective_with, free_evolution, general_propagator, general_solution, kinetic_propagator, rf_coefficients,
    rf_factorize, rf_propagator, rotation_operator, state_probabilities, CrossTerm, GeneralSpectrum, Propagator,
    SpectralParams,
};
use crate::spincore::{
    hamiltonian_general, hamiltonian_general_offset, hamiltonian_kinetic, hamiltonian_rf, hamiltonian_static,
    make_spinor, FieldConfig, Mat2, PhysicalConstants, Spinor, C64,
};

/// RK4 steps per shortest oscillation period in oracle comparisons.
pub const ORACLE_STEPS_PER_PERIOD: f64 = 2000.0;
/// Periods integrated per oracle comparison.
pub const ORACLE_PERIODS: f64 = 10.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_spinor<R: Rng>(r: &mut R) -> Spinor {
    let (r1, r2) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0));
    make_spinor(r1 + 1e-3, r.random_range(-PI..PI), r2, r.random_range(-PI..PI)).expect("r1 > 0")
}

fn rf_params<R: Rng>(r: &mut R) -> (f64, f64, f64, f64) {
    let omega = r.random_range(-1e3..1e3);
    let omega0 = r.random_range(-1e3..1e3);
    let mut omega1 = r.random_range(-1e2..1e2);
    if omega1 == 0.0 {
        omega1 = 1.0;
    }
    (omega, omega0, omega1, r.random_range(0.0..1.0))
}

/// Worst `max(||U^H U - I||, ||det U| - 1|)` over random RF, kinetic and
/// general propagators.
pub fn unitarity(n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let (w, w0, w1, t) = rf_params(&mut r);
        let k = r.random_range(0.0..1e2);
        let us = [
            rf_propagator(w, w0, w1, t).expect("w1 != 0"),
            kinetic_propagator(w0, k, t),
            general_propagator(r.random_range(-1e2..1e2), r.random_range(-1e2..1e2), w0, k, t),
        ];
        for u in us {
            worst = worst.max(u.unitarity_error()).max((u.determinant().norm() - 1.0).abs());
        }
    }
    worst
}

/// Worst `||E R - A||_max`.
pub fn factorization(n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let (w, w0, w1, t) = rf_params(&mut r);
            let (e, rot) = rf_factorize(w, w0, w1, t).expect("w1 != 0");
            (e * rot).max_diff(&rf_propagator(w, w0, w1, t).expect("w1 != 0"))
        })
        .fold(0.0, f64::max)
}

/// At `w = w0` the rotation factor is `R_{(1,0,0), w1 t}`: worst entry
/// difference.
pub fn resonance_reduction(n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let (_, w0, w1, t) = rf_params(&mut r);
            let (_, rot) = rf_factorize(w0, w0, w1, t).expect("w1 != 0");
            rot.max_diff(&rotation_operator(1.0, 0.0, 0.0, w1 * t).expect("unit axis"))
        })
        .fold(0.0, f64::max)
}

/// Kinetic and general propagators collapse to free evolution when the
/// extra terms vanish, and the general form equals the kinetic one for a
/// purely longitudinal field.
pub fn kinetic_reduction(n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let (w0, t, k) = (r.random_range(-1e3..1e3), r.random_range(0.0..1.0), r.random_range(0.0..1e2));
            let free = free_evolution(w0, t);
            kinetic_propagator(w0, 0.0, t)
                .max_diff(&free)
                .max(general_propagator(0.0, 0.0, w0, 0.0, t).max_diff(&free))
                .max(general_propagator(0.0, 0.0, w0, k, t).max_diff(&kinetic_propagator(w0, k, t)))
        })
        .fold(0.0, f64::max)
}

/// Worst residual of the four initial-condition constraints on the RF
/// solution constants.
pub fn rf_constraints(n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let (w, w0, w1, _) = rf_params(&mut r);
            let x0 = random_spinor(&mut r);
            let cf = rf_coefficients(w0 - w, w1, &x0).expect("w1 != 0");
            cf.constraint_residuals(&x0).into_iter().fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleCase {
    Static,
    RfOnResonance,
    RfOffResonance,
    Kinetic,
    General,
}

impl OracleCase {
    pub const ALL: [OracleCase; 5] = [
        OracleCase::Static,
        OracleCase::RfOnResonance,
        OracleCase::RfOffResonance,
        OracleCase::Kinetic,
        OracleCase::General,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OracleCase::Static => "static",
            OracleCase::RfOnResonance => "rf_on_resonance",
            OracleCase::RfOffResonance => "rf_off_resonance",
            OracleCase::Kinetic => "kinetic",
            OracleCase::General => "general",
        }
    }
}

/// Random field for an oracle case. Frequencies are O(1) rad/s so ten
/// periods stay cheap; the dynamics only depend on frequency ratios.
pub fn random_field<R: Rng>(case: OracleCase, r: &mut R, c: &PhysicalConstants) -> FieldConfig {
    let g = c.gamma();
    let mut fc = FieldConfig::static_field(r.random_range(0.5..2.0) / g);
    match case {
        OracleCase::Static => {}
        OracleCase::RfOnResonance | OracleCase::RfOffResonance => {
            fc.b1 = r.random_range(0.5..1.5) / g;
            fc.omega_rf = fc.omega0(c);
            if case == OracleCase::RfOffResonance {
                fc.omega_rf += r.random_range(-1.0..1.0);
            }
        }
        OracleCase::Kinetic => fc.kprime = 0.5 * c.hbar() * r.random_range(0.1..2.0),
        OracleCase::General => {
            fc.bx = r.random_range(-1.0..1.0) / g;
            fc.by = r.random_range(-1.0..1.0) / g;
            fc.bz_offset = r.random_range(-2.0..2.0) / g;
            fc.kprime = 0.5 * c.hbar() * r.random_range(0.0..1.0);
        }
    }
    fc
}

/// Integration span and step for a case: ten periods of `4 pi / Delta`
/// (ten Larmor periods for the static case), with
/// [`ORACLE_STEPS_PER_PERIOD`] steps on the fastest frequency.
pub fn oracle_span(case: OracleCase, fc: &FieldConfig, c: &PhysicalConstants) -> (f64, f64) {
    let w0 = fc.omega0(c);
    let (period, freqs) = match case {
        OracleCase::Static => (2.0 * PI / w0.abs(), vec![w0]),
        OracleCase::RfOnResonance | OracleCase::RfOffResonance => {
            let sp = SpectralParams::new(w0 - fc.omega_rf, fc.omega1(c));
            (sp.probability_period(), vec![w0, fc.omega_rf, sp.delta])
        }
        OracleCase::Kinetic => {
            let sp = SpectralParams::new(w0, fc.k(c));
            (sp.probability_period(), vec![w0, fc.k(c), sp.delta])
        }
        OracleCase::General => {
            let g = GeneralSpectrum::new(fc, c);
            (g.spectral.probability_period(), vec![g.spectral.delta, g.k])
        }
    };
    let fastest = freqs.iter().map(|f| f.abs()).fold(0.0, f64::max);
    (ORACLE_PERIODS * period, 2.0 * PI / fastest / ORACLE_STEPS_PER_PERIOD)
}

/// Hamiltonian (J) of a case at time `t`. The general case uses the frame
/// of the reference Larmor frequency, matching [`general_solution`].
pub fn case_hamiltonian(case: OracleCase, fc: &FieldConfig, t: f64, c: &PhysicalConstants) -> Result<Mat2> {
    Ok(match case {
        OracleCase::Static => *hamiltonian_static(fc, c).matrix(),
        OracleCase::RfOnResonance | OracleCase::RfOffResonance => *hamiltonian_rf(fc, t, c)?.matrix(),
        OracleCase::Kinetic => *hamiltonian_kinetic(fc, c).matrix(),
        OracleCase::General => *hamiltonian_general_offset(fc, c).matrix(),
    })
}

/// Closed-form state of a case at time `t`.
pub fn closed_form_state(case: OracleCase, fc: &FieldConfig, x0: &Spinor, t: f64, c: &PhysicalConstants) -> Result<Spinor> {
    let (w0, w1, k) = (fc.omega0(c), fc.omega1(c), fc.k(c));
    Ok(match case {
        OracleCase::Static => free_evolution(w0, t).apply(x0),
        OracleCase::RfOnResonance | OracleCase::RfOffResonance => rf_propagator(fc.omega_rf, w0, w1, t)?.apply(x0),
        OracleCase::Kinetic => kinetic_propagator(w0, k, t).apply(x0),
        OracleCase::General => general_solution(fc, x0, t, c)?,
    })
}

/// RK4 trajectory of a case over `[0, t_end]`.
pub fn case_trajectory(
    case: OracleCase,
    fc: &FieldConfig,
    x0: &Spinor,
    t_end: f64,
    dt: f64,
    c: &PhysicalConstants,
) -> Result<Trajectory> {
    // fail early on configurations without a Hamiltonian (e.g. zero RF)
    case_hamiltonian(case, fc, 0.0, c)?;
    closed_form_state(case, fc, x0, 0.0, c)?;
    let h = |t: f64| case_hamiltonian(case, fc, t, c).expect("checked at t = 0");
    integrate(&h, x0, t_end, dt, c)
}

/// Max deviation between RK4 and the closed form for one random instance.
pub fn oracle_deviation(case: OracleCase, fc: &FieldConfig, x0: &Spinor, c: &PhysicalConstants) -> Result<f64> {
    let (t_end, dt) = oracle_span(case, fc, c);
    let traj = case_trajectory(case, fc, x0, t_end, dt, c)?;
    Ok(max_deviation(&traj, |t| closed_form_state(case, fc, x0, t, c).expect("checked at t = 0"), false))
}

/// Worst oracle deviation over `n` random instances of `case`. Instances
/// are drawn sequentially and integrated in parallel.
pub fn oracle_equivalence(case: OracleCase, n: usize, seed: u64, c: &PhysicalConstants) -> Result<f64> {
    let mut r = rng(seed);
    let cases: Vec<(FieldConfig, Spinor)> =
        (0..n).map(|_| (random_field(case, &mut r, c), random_spinor(&mut r))).collect();
    let devs: Result<Vec<f64>> = cases.par_iter().map(|(fc, x0)| oracle_deviation(case, fc, x0, c)).collect();
    Ok(devs?.into_iter().fold(0.0, f64::max))
}

fn random_general_field<R: Rng>(r: &mut R, c: &PhysicalConstants) -> FieldConfig {
    let g = c.gamma();
    FieldConfig {
        b0: r.random_range(0.5..3.0) / g,
        bx: r.random_range(-1.0..1.0) / g,
        by: r.random_range(-1.0..1.0) / g,
        bz_offset: r.random_range(-1.0..1.0) / g,
        kprime: 0.5 * c.hbar() * r.random_range(0.0..1.0),
        ..FieldConfig::default()
    }
}

/// For each spin count, worst relative eigenvalue error of the Kronecker
/// sum against the sorted single-spin sums, and worst difference between
/// product-state and full-space evolution. Returns `(eigen, evolution)`.
pub fn kronecker_additivity(spin_counts: &[usize], trials: usize, seed: u64, c: &PhysicalConstants) -> Result<(f64, f64)> {
    let mut r = rng(seed);
    let (mut eig_worst, mut evo_worst): (f64, f64) = (0.0, 0.0);
    for &n in spin_counts {
        for _ in 0..trials {
            let fields: Vec<FieldConfig> = (0..n).map(|_| random_general_field(&mut r, c)).collect();
            let hs: Vec<_> = fields.iter().map(|f| hamiltonian_general(f, c)).collect();
            let h = n_spin_hamiltonian(&hs)?;
            let ev = h.eigenvalues();
            let sums = eigenvalue_sums(&hs);
            let scale = sums.iter().map(|x| x.abs()).fold(0.0, f64::max);
            for (a, b) in ev.iter().zip(&sums) {
                eig_worst = eig_worst.max((a - b).abs() / scale);
            }

            let t = r.random_range(0.0..5.0);
            let states: Vec<Spinor> = (0..n).map(|_| random_spinor(&mut r)).collect();
            let props: Vec<Propagator> = fields
                .iter()
                .map(|f| general_propagator(f.omega_x(c), f.omega_y(c), f.omega0(c) + f.omega_z(c), f.k(c), t))
                .collect();
            let sep = product_state_evolution(&states, &props)?;
            let full = full_space_propagator(&h, t, c) * product_state(&states);
            evo_worst = evo_worst.max((sep - full).camax());
        }
    }
    Ok((eig_worst, evo_worst))
}

/// Worst difference of `(p1, p2)` between `t` and `t + 4 pi / Delta` over
/// random general configurations.
pub fn periodicity(n: usize, seed: u64, c: &PhysicalConstants) -> Result<f64> {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let fc = random_general_field(&mut r, c);
        let x0 = random_spinor(&mut r);
        let delta = GeneralSpectrum::new(&fc, c).spectral.delta;
        let period = 4.0 * PI / delta;
        let t = r.random_range(0.0..3.0) * period;
        let (a1, a2) = state_probabilities(&fc, &x0, t, c)?;
        let (b1, b2) = state_probabilities(&fc, &x0, t + period, c)?;
        worst = worst.max((a1 - b1).abs()).max((a2 - b2).abs());
    }
    Ok(worst)
}

/// Worst relative Parseval error `| ||img||^2 - ||k||^2 / (N M) |` on
/// random complex k-space grids.
pub fn parseval(n: usize, seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let shapes = [(8, 8), (16, 32), (64, 64), (32, 16)];
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let (rows, cols) = shapes[i % shapes.len()];
        let data = (0..rows * cols)
            .map(|_| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
            .collect();
        let ks = Grid::from_vec(rows, cols, data)?;
        let e_k: f64 = ks.as_slice().iter().map(|z| z.norm_sqr()).sum();
        let e_i: f64 = reconstruct(&ks, 1.0).magnitude.as_slice().iter().map(|v| v * v).sum();
        let expect = e_k / (rows * cols) as f64;
        worst = worst.max((e_i - expect).abs() / expect);
    }
    Ok(worst)
}

/// Largest relative change in `Delta` between the `2 K w_x` and `K w_x`
/// cross terms over random general fields. Reported, not checked.
pub fn cross_term_sensitivity(n: usize, seed: u64, c: &PhysicalConstants) -> f64 {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let fc = random_general_field(&mut r, c);
            let a = delta_effective_with(&fc, false, c, CrossTerm::TwoKOmegaX);
            let b = delta_effective_with(&fc, false, c, CrossTerm::KOmegaX);
            (a - b).abs() / a.max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
    pub samples: usize,
    /// Reported only; never fails the suite.
    pub informational: bool,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.informational || self.worst <= self.tolerance
    }
}

/// Properties checked by [`run_suite`], in order.
pub const PROPERTIES: [&str; 12] = [
    "unitarity",
    "factorization",
    "resonance_reduction",
    "kinetic_reduction",
    "rf_constraints",
    "oracle_static",
    "oracle_rf",
    "oracle_kinetic",
    "oracle_general",
    "kronecker_eigenvalues",
    "kronecker_evolution",
    "periodicity",
];

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Replaces the measured value of the named property with a failing one.
    pub inject_fault: Option<String>,
}

/// Runs every invariant check plus the Parseval identity and the
/// informational cross-term row.
pub fn run_suite(opts: &SuiteOptions, c: &PhysicalConstants) -> Result<Vec<Check>> {
    if let Some(f) = &opts.inject_fault {
        if !PROPERTIES.contains(&f.as_str()) && f != "parseval" {
            return Err(Error::InvalidParameter(format!("unknown property {f}")));
        }
    }
    let s = opts.seed;
    let oracle_rf = oracle_equivalence(OracleCase::RfOnResonance, 10, s + 6, c)?
        .max(oracle_equivalence(OracleCase::RfOffResonance, 10, s + 7, c)?);
    let (eig, evo) = kronecker_additivity(&[2, 3, 4], 10, s + 10, c)?;
    let mut checks = vec![
        Check { name: "unitarity", worst: unitarity(1000, s + 1), tolerance: 1e-12, samples: 1000, informational: false },
        Check { name: "factorization", worst: factorization(10_000, s + 2), tolerance: 1e-12, samples: 10_000, informational: false },
        Check { name: "resonance_reduction", worst: resonance_reduction(1000, s + 3), tolerance: 1e-12, samples: 1000, informational: false },
        Check { name: "kinetic_reduction", worst: kinetic_reduction(1000, s + 4), tolerance: 1e-12, samples: 1000, informational: false },
        Check { name: "rf_constraints", worst: rf_constraints(1000, s + 5), tolerance: 1e-12, samples: 1000, informational: false },
        Check { name: "oracle_static", worst: oracle_equivalence(OracleCase::Static, 10, s + 8, c)?, tolerance: 1e-8, samples: 10, informational: false },
        Check { name: "oracle_rf", worst: oracle_rf, tolerance: 1e-8, samples: 20, informational: false },
        Check { name: "oracle_kinetic", worst: oracle_equivalence(OracleCase::Kinetic, 10, s + 9, c)?, tolerance: 1e-8, samples: 10, informational: false },
        Check { name: "oracle_general", worst: oracle_equivalence(OracleCase::General, 10, s + 11, c)?, tolerance: 1e-8, samples: 10, informational: false },
        Check { name: "kronecker_eigenvalues", worst: eig, tolerance: 1e-10, samples: 30, informational: false },
        Check { name: "kronecker_evolution", worst: evo, tolerance: 1e-9, samples: 30, informational: false },
        Check { name: "periodicity", worst: periodicity(1000, s + 12, c)?, tolerance: 1e-10, samples: 1000, informational: false },
        Check { name: "parseval", worst: parseval(20, s + 13)?, tolerance: 1e-9, samples: 20, informational: false },
        Check {
            name: "cross_term_delta_change",
            worst: cross_term_sensitivity(1000, s + 14, c),
            tolerance: f64::INFINITY,
            samples: 1000,
            informational: true,
        },
    ];
    if let Some(f) = &opts.inject_fault {
        for ch in checks.iter_mut().filter(|ch| ch.name == f.as_str()) {
            ch.worst = ch.tolerance * 1e3 + 1.0;
        }
    }
    Ok(checks)
}
