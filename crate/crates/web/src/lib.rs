//! wasm-bindgen exports for the browser demo in `www/`.

use spinsim::imaging::{
    make_lego_phantom, normalized_correlation, reconstruct, snr, synthesize_kspace, Grid, ImagingConfig,
};
use spinsim::oracle::integrate;
use spinsim::propagators::{rf_propagator, spin_noise_estimate};
use spinsim::sequence::gradient_echo;
use spinsim::spincore::{hamiltonian_rf, FieldConfig, PhysicalConstants, Spinor};
use wasm_bindgen::prelude::*;

/// Larmor frequency of the nutation demo (rad/s). Kept low so the RK4
/// overlay stays cheap.
const DEMO_OMEGA0: f64 = 100.0;
const RK4_STEPS_PER_PERIOD: f64 = 200.0;

fn js_err(e: spinsim::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Excited-state population under RF starting from the ground state.
/// Returns `[t, p_closed, p_rk4]` triples, flattened.
#[wasm_bindgen]
pub fn nutation(omega1: f64, detuning: f64, periods: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    if !(omega1 > 0.0 && periods > 0.0 && samples >= 2) {
        return Err(JsError::new("need omega1 > 0, periods > 0, samples >= 2"));
    }
    let c = PhysicalConstants::default();
    let g = c.gamma();
    let mut fc = FieldConfig::static_field(DEMO_OMEGA0 / g);
    fc.b1 = omega1 / g;
    fc.omega_rf = fc.omega0(&c) - detuning;
    let (w0, w) = (fc.omega0(&c), fc.omega_rf);
    let delta = detuning.hypot(omega1);
    let t_end = periods * 2.0 * std::f64::consts::PI / delta;
    let fastest = w0.abs().max(w.abs()).max(delta);
    let dt = 2.0 * std::f64::consts::PI / fastest / RK4_STEPS_PER_PERIOD;

    let x0 = Spinor::ground();
    hamiltonian_rf(&fc, 0.0, &c).map_err(js_err)?;
    let h = |t: f64| *hamiltonian_rf(&fc, t, &c).expect("checked at t = 0").matrix();
    let traj = integrate(&h, &x0, t_end, dt.min(t_end), &c).map_err(js_err)?;

    let mut out = Vec::with_capacity(3 * samples);
    for i in 0..samples {
        let idx = i * (traj.len() - 1) / (samples - 1);
        let t = traj.times[idx];
        let closed = rf_propagator(w, w0, fc.omega1(&c), t).map_err(js_err)?.apply(&x0);
        out.extend([t, closed.x2.norm_sqr(), traj.states[idx].x2.norm_sqr()]);
    }
    Ok(out)
}

/// Free-spin emission probability and amplitude ratio `[p, sqrt|p|]` for a
/// proton at Larmor frequency `omega0`, with the kinetic constant scaled by
/// `kprime_scale`.
#[wasm_bindgen]
pub fn spin_noise(omega0: f64, kprime_scale: f64) -> Result<Vec<f64>, JsError> {
    let c = PhysicalConstants::default();
    let kprime = kprime_scale * c.hbar() * c.hbar() / (2.0 * c.proton_mass());
    let e = spin_noise_estimate(kprime, omega0.abs(), &c).map_err(js_err)?;
    Ok(vec![e.probability, e.amplitude_ratio])
}

fn to_rgba(g: &Grid<f64>) -> Vec<u8> {
    let peak = g.as_slice().iter().copied().fold(0.0, f64::max);
    let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
    g.as_slice()
        .iter()
        .flat_map(|v| {
            let p = (v * scale).round().clamp(0.0, 255.0) as u8;
            [p, p, p, 255]
        })
        .collect()
}

/// Phantom and reconstructions with and without RF, as RGBA pixels.
#[wasm_bindgen]
pub struct ImagingDemo {
    size: usize,
    phantom: Vec<u8>,
    with_rf: Vec<u8>,
    without_rf: Vec<u8>,
    snr_with: f64,
    snr_without: f64,
    correlation_with: f64,
    correlation_without: f64,
}

#[wasm_bindgen]
impl ImagingDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, noise_sigma: f64, seed: u32) -> Result<ImagingDemo, JsError> {
        let c = PhysicalConstants::default();
        let cfg = ImagingConfig { matrix: [size, size], noise_sigma, seed: seed.into(), ..ImagingConfig::reference(&c) };
        let ph = make_lego_phantom(size).map_err(js_err)?;
        let ph = spinsim::imaging::Phantom::new(ph.density().clone(), cfg.fov_m)
            .and_then(|p| p.with_mask(ph.mask().expect("lego mask").clone()))
            .map_err(js_err)?;
        let mask = ph.mask().expect("lego mask");
        let run = |with_rf: bool| -> spinsim::Result<_> {
            let seqs = gradient_echo(&cfg.sequence(with_rf), &c)?;
            let img = reconstruct(&synthesize_kspace(&ph, &seqs, &cfg.synthesis(with_rf), &c)?, cfg.fov_m);
            let s = snr(&img, &mask.signal_roi(), &mask.noise_roi()).unwrap_or(f64::NAN);
            let r = normalized_correlation(img.magnitude.as_slice(), ph.density().as_slice())?;
            Ok((to_rgba(&img.magnitude), s, r))
        };
        let (with_rf, snr_with, correlation_with) = run(true).map_err(js_err)?;
        let (without_rf, snr_without, correlation_without) = run(false).map_err(js_err)?;
        Ok(ImagingDemo {
            size,
            phantom: to_rgba(ph.density()),
            with_rf,
            without_rf,
            snr_with,
            snr_without,
            correlation_with,
            correlation_without,
        })
    }

    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn phantom(&self) -> Vec<u8> {
        self.phantom.clone()
    }

    pub fn with_rf(&self) -> Vec<u8> {
        self.with_rf.clone()
    }

    pub fn without_rf(&self) -> Vec<u8> {
        self.without_rf.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn snr_with(&self) -> f64 {
        self.snr_with
    }

    #[wasm_bindgen(getter)]
    pub fn snr_without(&self) -> f64 {
        self.snr_without
    }

    #[wasm_bindgen(getter)]
    pub fn correlation_with(&self) -> f64 {
        self.correlation_with
    }

    #[wasm_bindgen(getter)]
    pub fn correlation_without(&self) -> f64 {
        self.correlation_without
    }
}
