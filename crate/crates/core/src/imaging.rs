//! 2D gradient-echo forward model: phantom, k-space synthesis with and
//! without RF excitation, FFT reconstruction and SNR measurement.
//!
//! Grids are row-major with rows along the phase-encode axis (y) and
//! columns along the read axis (x). Voxel `(i, j)` sits at
//! `x = (j - N/2) fov / N`, `y = (i - M/2) fov / M`, so the sample grid
//! and the centered DFT coincide exactly.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagators::delta_effective;
use crate::sequence::{GradientAxis, PulseSequence, SequenceConfig, REFERENCE_FLIP_RAD};
use crate::spincore::{FieldConfig, PhysicalConstants, C64};

/// Per-component k-space noise that gives a with-RF SNR of about 18 on the
/// 64x64 Lego phantom under [`ImagingConfig::reference`]. Derived with
/// [`calibrate_noise_sigma`].
pub const DEFAULT_NOISE_SIGMA: f64 = 0.473012;
/// Calibration target for [`DEFAULT_NOISE_SIGMA`].
pub const TARGET_SNR: f64 = 18.0;
/// Field of view of the Lego phantom (m).
pub const LEGO_FOV_M: f64 = 0.058;
/// Disc radius of the phantom as a fraction of the FOV.
pub const DISC_RADIUS: f64 = 0.45;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }
}

impl<T> Grid<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let data = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!("{} values for a {rows}x{cols} grid", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Air,
    Water,
    Lego,
}

pub type FeatureMask = Grid<Feature>;

impl FeatureMask {
    pub fn region(&self, f: Feature) -> Vec<bool> {
        self.data.iter().map(|&x| x == f).collect()
    }

    /// Water voxels.
    pub fn signal_roi(&self) -> Vec<bool> {
        self.region(Feature::Water)
    }

    /// Air outside the phantom.
    pub fn noise_roi(&self) -> Vec<bool> {
        self.region(Feature::Air)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    density: Grid<f64>,
    fov: f64,
    mask: Option<FeatureMask>,
}

impl Phantom {
    pub fn new(density: Grid<f64>, fov: f64) -> Result<Self> {
        if let Some(d) = density.as_slice().iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::InvalidParameter(format!("density must be finite and >= 0, got {d}")));
        }
        if !(fov.is_finite() && fov > 0.0) {
            return Err(Error::InvalidParameter(format!("fov must be > 0, got {fov}")));
        }
        Ok(Self { density, fov, mask: None })
    }

    pub fn with_mask(mut self, mask: FeatureMask) -> Result<Self> {
        if (mask.rows, mask.cols) != (self.density.rows, self.density.cols) {
            return Err(Error::DimensionMismatch("feature mask shape differs from density".into()));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    /// Density 1 over the whole grid.
    pub fn uniform(n: usize, fov: f64) -> Result<Self> {
        Self::new(Grid::filled(n, n, 1.0), fov)
    }

    /// Water disc of the Lego phantom without the bricks.
    pub fn uniform_disc(n: usize, fov: f64) -> Result<Self> {
        check_size(n)?;
        let mask = Grid::from_fn(n, n, |i, j| {
            if in_disc(n, i, j) {
                Feature::Water
            } else {
                Feature::Air
            }
        });
        let density = mask.map(|f| if *f == Feature::Water { 1.0 } else { 0.0 });
        Self::new(density, fov)?.with_mask(mask)
    }

    pub fn zeros(n: usize, fov: f64) -> Result<Self> {
        let p = Self::new(Grid::filled(n, n, 0.0), fov)?;
        let mask = Grid::filled(n, n, Feature::Air);
        p.with_mask(mask)
    }

    pub fn density(&self) -> &Grid<f64> {
        &self.density
    }

    pub fn fov(&self) -> f64 {
        self.fov
    }

    pub fn mask(&self) -> Option<&FeatureMask> {
        self.mask.as_ref()
    }

    pub fn scaled(&self, a: f64) -> Result<Self> {
        let mut p = Self::new(self.density.map(|d| a * d), self.fov)?;
        p.mask = self.mask.clone();
        Ok(p)
    }

    pub fn total_mass(&self) -> f64 {
        self.density.as_slice().iter().sum()
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < 32 || !n.is_power_of_two() {
        Err(Error::BadSize(n))
    } else {
        Ok(())
    }
}

/// Pixel-center coordinate in units of the FOV, in (-0.5, 0.5). Exact
/// mirror images map to exact negatives.
fn unit_coord(n: usize, j: usize) -> f64 {
    (2.0 * j as f64 + 1.0 - n as f64) / (2.0 * n as f64)
}

fn in_disc(n: usize, i: usize, j: usize) -> bool {
    let (u, v) = (unit_coord(n, j), unit_coord(n, i));
    u * u + v * v <= DISC_RADIUS * DISC_RADIUS
}

/// Brick body and studs for the brick at `u > 0`, in units of the FOV.
/// `v` grows downwards; studs sit on the top face.
const BRICK_BODY: [f64; 4] = [0.08, 0.32, -0.10, 0.14];
const STUD_CENTERS: [f64; 2] = [0.14, 0.26];
const STUD_HALF_WIDTH: f64 = 0.025;
const STUD_HEIGHT: f64 = 0.04;

fn in_lego(n: usize, i: usize, j: usize) -> bool {
    let (au, v) = (unit_coord(n, j).abs(), unit_coord(n, i));
    let [u0, u1, v0, v1] = BRICK_BODY;
    let body = (u0..=u1).contains(&au) && (v0..=v1).contains(&v);
    let stud = (v0 - STUD_HEIGHT..v0).contains(&v)
        && STUD_CENTERS.iter().any(|c| (au - c).abs() <= STUD_HALF_WIDTH);
    body || stud
}

/// Two Lego bricks (density 0) in a water disc (density 1) spanning 90% of
/// the FOV, surrounded by air. The geometry is mirror-symmetric about the
/// vertical center line (`j -> n - 1 - j`).
pub fn make_lego_phantom(n: usize) -> Result<Phantom> {
    check_size(n)?;
    let mask = Grid::from_fn(n, n, |i, j| {
        if !in_disc(n, i, j) {
            Feature::Air
        } else if in_lego(n, i, j) {
            Feature::Lego
        } else {
            Feature::Water
        }
    });
    let density = mask.map(|f| if *f == Feature::Water { 1.0 } else { 0.0 });
    Phantom::new(density, LEGO_FOV_M)?.with_mask(mask)
}

/// Complex k-space samples, rows = phase-encode steps, columns = read samples.
pub type KSpace = Grid<C64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub magnitude: Grid<f64>,
    pub fov: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmpModel {
    /// `sqrt(Delta / |w0|)`
    #[default]
    Sqrt,
    /// `Delta / |w0|`
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub with_rf: bool,
    pub noise_sigma: f64,
    pub seed: u64,
    pub amp_model: AmpModel,
}

/// Relative emission amplitude of a voxel without RF. The field at the
/// voxel is the reference field plus the gradient field at the echo;
/// `Delta` includes the kinetic term of a free proton.
pub fn no_rf_amplitude(bz_offset: f64, reference_frequency: f64, model: AmpModel, c: &PhysicalConstants) -> f64 {
    let w0 = reference_frequency.abs();
    let fc = FieldConfig {
        b0: w0 / c.gamma(),
        kprime: c.free_proton_kinetic_energy(),
        bz_offset,
        ..FieldConfig::default()
    };
    let ratio = delta_effective(&fc, false, c) / w0;
    match model {
        AmpModel::Sqrt => ratio.sqrt(),
        AmpModel::Linear => ratio,
    }
}

fn voxel_positions(n: usize, fov: f64) -> Vec<f64> {
    (0..n).map(|j| (j as f64 - 0.5 * n as f64) * fov / n as f64).collect()
}

/// Signal amplitude of every voxel for the given sequence.
pub fn amplitude_map(
    ph: &Phantom,
    seq: &PulseSequence,
    with_rf: bool,
    model: AmpModel,
    c: &PhysicalConstants,
) -> Result<Grid<f64>> {
    let d = &ph.density;
    if with_rf {
        let rf = seq
            .rf
            .first()
            .ok_or_else(|| Error::InvalidParameter("with_rf requested but the sequence has no RF pulse".into()))?;
        let s = rf.flip_angle.sin();
        return Ok(d.map(|v| v * s));
    }
    if seq.reference_frequency == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let g = seq.gradients_at(seq.echo_time_abs());
    let xs = voxel_positions(d.cols, ph.fov);
    let ys = voxel_positions(d.rows, ph.fov);
    Ok(Grid::from_fn(d.rows, d.cols, |i, j| {
        let rho = *d.get(i, j);
        if rho == 0.0 {
            return 0.0;
        }
        let bz = g[0] * xs[j] + g[1] * ys[i];
        rho * no_rf_amplitude(bz, seq.reference_frequency, model, c)
    }))
}

/// `exp(-i gamma m r)` for every read sample (rows) and voxel coordinate.
fn phase_table(moments: &[f64], positions: &[f64], gamma: f64) -> Vec<Vec<C64>> {
    moments
        .iter()
        .map(|m| positions.iter().map(|r| C64::from_polar(1.0, -gamma * m * r)).collect())
        .collect()
}

/// `s(ky, t_n) = sum_r amp(r) exp(i phi(r, t_n)) + noise`, with `phi` the
/// accrued gradient phase of each voxel at each read sample. The sum is
/// separable in x and y; rows are computed in parallel with a fixed
/// summation order, and noise is drawn sequentially in row-major order
/// afterwards, so the result is bit-identical for any thread count.
pub fn synthesize_kspace(
    ph: &Phantom,
    seqs: &[PulseSequence],
    opts: &SynthesisOptions,
    c: &PhysicalConstants,
) -> Result<KSpace> {
    let (rows, cols) = (ph.density.rows, ph.density.cols);
    if seqs.len() != rows {
        return Err(Error::DimensionMismatch(format!("{} sequences for {rows} phantom rows", seqs.len())));
    }
    if let Some(s) = seqs.iter().find(|s| s.acquisition.samples != cols) {
        return Err(Error::DimensionMismatch(format!(
            "{} read samples for {cols} phantom columns",
            s.acquisition.samples
        )));
    }
    if !(opts.noise_sigma.is_finite() && opts.noise_sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise_sigma must be >= 0, got {}", opts.noise_sigma)));
    }
    let Some(first) = seqs.first() else {
        return Grid::from_vec(0, cols, Vec::new());
    };
    let amp = amplitude_map(ph, first, opts.with_rf, opts.amp_model, c)?;
    let gamma = c.gamma();
    let xs = voxel_positions(cols, ph.fov);
    let ys = voxel_positions(rows, ph.fov);

    let moments = |s: &PulseSequence, axis| -> Vec<f64> {
        (0..cols).map(|n| s.gradient_moment(axis, s.acquisition.sample_time(n))).collect()
    };
    let mx: Vec<Vec<f64>> = seqs.iter().map(|s| moments(s, GradientAxis::X)).collect();

    // Read-direction partial sums depend only on the X moments, which are
    // usually shared by all steps.
    let mut read_key = Vec::with_capacity(rows);
    let mut unique: Vec<usize> = Vec::new();
    for (step, m) in mx.iter().enumerate() {
        match unique.iter().position(|&u| mx[u] == *m) {
            Some(k) => read_key.push(k),
            None => {
                read_key.push(unique.len());
                unique.push(step);
            }
        }
    }
    let partial: Vec<Vec<Vec<C64>>> = unique
        .par_iter()
        .map(|&u| {
            let ex = phase_table(&mx[u], &xs, gamma);
            (0..rows)
                .map(|i| {
                    let a = amp.row(i);
                    ex.iter().map(|e| a.iter().zip(e).map(|(v, z)| z * *v).sum()).collect()
                })
                .collect()
        })
        .collect();

    let data: Vec<C64> = seqs
        .par_iter()
        .enumerate()
        .flat_map_iter(|(step, s)| {
            let ey = phase_table(&moments(s, GradientAxis::Y), &ys, gamma);
            let t = &partial[read_key[step]];
            (0..cols).map(move |n| (0..rows).map(|i| ey[n][i] * t[i][n]).sum::<C64>()).collect::<Vec<_>>()
        })
        .collect();
    let mut ks = Grid::from_vec(rows, cols, data)?;

    if opts.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, opts.noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for z in ks.data.iter_mut() {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *z += C64::new(re, im);
        }
    }
    Ok(ks)
}

fn ifft_lines(data: &mut [C64], len: usize, planner: &mut FftPlanner<f64>) {
    let fft = planner.plan_fft_inverse(len);
    for line in data.chunks_mut(len) {
        line.rotate_left(len / 2);
        fft.process(line);
        line.rotate_left(len / 2);
    }
}

fn transpose(data: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); data.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = data[i * cols + j];
        }
    }
    out
}

/// Centered 2D inverse DFT with `1/(N M)` normalization.
pub fn inverse_dft_centered(ks: &KSpace) -> Grid<C64> {
    let (rows, cols) = (ks.rows, ks.cols);
    if rows == 0 || cols == 0 {
        return ks.clone();
    }
    let mut planner = FftPlanner::new();
    let mut buf = ks.data.clone();
    ifft_lines(&mut buf, cols, &mut planner);
    let mut t = transpose(&buf, rows, cols);
    ifft_lines(&mut t, rows, &mut planner);
    let scale = 1.0 / (rows * cols) as f64;
    let data = transpose(&t, cols, rows).into_iter().map(|z| z * scale).collect();
    Grid { rows, cols, data }
}

/// Magnitude of the centered inverse DFT.
pub fn reconstruct(ks: &KSpace, fov: f64) -> Image {
    Image { magnitude: inverse_dft_centered(ks).map(|z| z.norm()), fov }
}

fn check_rois(len: usize, signal: &[bool], noise: &[bool]) -> Result<()> {
    if signal.len() != len || noise.len() != len {
        return Err(Error::DimensionMismatch("ROI mask length differs from image".into()));
    }
    if !signal.iter().any(|&b| b) || !noise.iter().any(|&b| b) {
        return Err(Error::EmptyROI);
    }
    if signal.iter().zip(noise).any(|(&a, &b)| a && b) {
        return Err(Error::OverlappingROI);
    }
    Ok(())
}

fn masked(values: &[f64], mask: &[bool]) -> Vec<f64> {
    values.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| *v).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (`n - 1` normalization); zero for one value.
fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// `mean(signal ROI) / std(noise ROI)`. A noise spread at rounding level
/// (relative to the image maximum) is reported as [`Error::NoNoise`].
pub fn snr(img: &Image, signal_roi: &[bool], noise_roi: &[bool]) -> Result<f64> {
    let v = img.magnitude.as_slice();
    check_rois(v.len(), signal_roi, noise_roi)?;
    let s = mean(&masked(v, signal_roi));
    let sd = std_dev(&masked(v, noise_roi));
    let peak = v.iter().copied().fold(0.0, f64::max);
    if sd <= 1e-12 * peak || sd == 0.0 {
        return Err(Error::NoNoise);
    }
    Ok(s / sd)
}

/// Pearson correlation; zero when either input is constant.
pub fn normalized_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} values", a.len(), b.len())));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Fraction of k-space energy inside the `(2h+1)^2` block around DC.
pub fn center_energy_fraction(ks: &KSpace, half_width: usize) -> f64 {
    let (r0, c0) = (ks.rows / 2, ks.cols / 2);
    let total: f64 = ks.data.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut center = 0.0;
    for i in r0.saturating_sub(half_width)..(r0 + half_width + 1).min(ks.rows) {
        for j in c0.saturating_sub(half_width)..(c0 + half_width + 1).min(ks.cols) {
            center += ks.get(i, j).norm_sqr();
        }
    }
    center / total
}

/// Noise sigma giving `target_snr` for the with-RF image of `ph`. Uses the
/// noiseless signal mean and the Rayleigh spread of pure-noise magnitude,
/// `sigma_img sqrt((4 - pi) / 2)` with `sigma_img = sigma / sqrt(N M)`.
pub fn calibrate_noise_sigma(
    ph: &Phantom,
    seqs: &[PulseSequence],
    target_snr: f64,
    c: &PhysicalConstants,
) -> Result<f64> {
    let mask = ph.mask().ok_or(Error::EmptyROI)?;
    let opts = SynthesisOptions { with_rf: true, noise_sigma: 0.0, seed: 0, amp_model: AmpModel::Sqrt };
    let img = reconstruct(&synthesize_kspace(ph, seqs, &opts, c)?, ph.fov);
    let roi = mask.signal_roi();
    if !roi.iter().any(|&b| b) {
        return Err(Error::EmptyROI);
    }
    let signal = mean(&masked(img.magnitude.as_slice(), &roi));
    let n = (ph.density.rows * ph.density.cols) as f64;
    Ok(signal * n.sqrt() / (target_snr * ((4.0 - PI) / 2.0).sqrt()))
}

/// Sequence parameters plus synthesis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagingConfig {
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
    pub noise_sigma: f64,
    pub seed: u64,
    pub amp_model: AmpModel,
}

impl ImagingConfig {
    /// 7 T protocol timing on a 64x64 matrix with calibrated noise.
    pub fn reference(c: &PhysicalConstants) -> Self {
        Self {
            fov_m: LEGO_FOV_M,
            matrix: [64, 64],
            te_s: 3.9e-3,
            tr_s: 8.0e-3,
            flip_rad: REFERENCE_FLIP_RAD,
            slice_thickness_m: 1.16e-3,
            read_gradient_t_per_m: 2.0e-2,
            with_rf: true,
            reference_frequency_rad_s: -c.gamma() * 7.0,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            seed: 0,
            amp_model: AmpModel::Sqrt,
        }
    }

    pub fn sequence(&self, with_rf: bool) -> SequenceConfig {
        SequenceConfig {
            fov_m: self.fov_m,
            matrix: self.matrix,
            te_s: self.te_s,
            tr_s: self.tr_s,
            flip_rad: self.flip_rad,
            slice_thickness_m: self.slice_thickness_m,
            read_gradient_t_per_m: self.read_gradient_t_per_m,
            with_rf,
            reference_frequency_rad_s: self.reference_frequency_rad_s,
        }
    }

    pub fn synthesis(&self, with_rf: bool) -> SynthesisOptions {
        SynthesisOptions { with_rf, noise_sigma: self.noise_sigma, seed: self.seed, amp_model: self.amp_model }
    }
}

/// 16-bit PGM (P2 ASCII or P5 binary). Values are scaled so the grid
/// maximum maps to 65535; an all-zero grid stays zero.
pub fn write_pgm<W: Write>(grid: &Grid<f64>, mut w: W, binary: bool, comment: &[String]) -> io::Result<()> {
    let peak = grid.data.iter().copied().fold(0.0, f64::max);
    let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
    let px: Vec<u16> = grid.data.iter().map(|v| (v.max(0.0) * scale).round().min(65535.0) as u16).collect();
    writeln!(w, "{}", if binary { "P5" } else { "P2" })?;
    for line in comment {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{} {}", grid.cols, grid.rows)?;
    writeln!(w, "65535")?;
    if binary {
        let bytes: Vec<u8> = px.iter().flat_map(|p| p.to_be_bytes()).collect();
        w.write_all(&bytes)?;
    } else {
        for row in px.chunks(grid.cols.max(1)) {
            let line: Vec<String> = row.iter().map(u16::to_string).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    Ok(())
}

/// `ky_index,kx_index,re,im`, indices counted from the first sample.
pub fn write_kspace_csv<W: Write>(ks: &KSpace, mut w: W, comment: &[String]) -> io::Result<()> {
    for line in comment {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "ky_index,kx_index,re,im")?;
    for i in 0..ks.rows {
        for j in 0..ks.cols {
            let z = ks.get(i, j);
            writeln!(w, "{i},{j},{:.16e},{:.16e}", z.re, z.im)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::gradient_echo;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn setup(n: usize, with_rf: bool) -> (ImagingConfig, Vec<PulseSequence>) {
        let c = consts();
        let cfg = ImagingConfig { matrix: [n, n], ..ImagingConfig::reference(&c) };
        let seqs = gradient_echo(&cfg.sequence(with_rf), &c).unwrap();
        (cfg, seqs)
    }

    fn noiseless(with_rf: bool) -> SynthesisOptions {
        SynthesisOptions { with_rf, noise_sigma: 0.0, seed: 0, amp_model: AmpModel::Sqrt }
    }

    /// Direct centered DFT, `s(k) = sum_r a(r) exp(-2 pi i k.r / N)`.
    fn brute_force_dft(a: &Grid<f64>) -> Vec<C64> {
        let (rows, cols) = (a.rows(), a.cols());
        let mut out = Vec::with_capacity(rows * cols);
        for ky in 0..rows {
            for kx in 0..cols {
                let mut s = C64::new(0.0, 0.0);
                for i in 0..rows {
                    for j in 0..cols {
                        let ph = (ky as f64 - rows as f64 / 2.0) * (i as f64 - rows as f64 / 2.0) / rows as f64
                            + (kx as f64 - cols as f64 / 2.0) * (j as f64 - cols as f64 / 2.0) / cols as f64;
                        s += C64::from_polar(*a.get(i, j), -2.0 * PI * ph);
                    }
                }
                out.push(s);
            }
        }
        out
    }

    #[test]
    fn phantom_sizes() {
        assert_eq!(make_lego_phantom(16), Err(Error::BadSize(16)));
        assert_eq!(make_lego_phantom(48), Err(Error::BadSize(48)));
        let p = make_lego_phantom(64).unwrap();
        assert!(p.total_mass() > 0.0);
        let mask = p.mask().unwrap();
        for f in [Feature::Air, Feature::Water, Feature::Lego] {
            assert!(mask.region(f).iter().any(|&b| b));
        }
        assert!(Phantom::new(Grid::filled(2, 2, -1.0), 1.0).is_err());
    }

    #[test]
    fn phantom_mirror_symmetry() {
        for n in [32, 64, 128] {
            let p = make_lego_phantom(n).unwrap();
            let m = p.mask().unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(m.get(i, j), m.get(i, n - 1 - j));
                }
            }
        }
    }

    #[test]
    fn zero_phantom_zero_kspace() {
        let (cfg, seqs) = setup(32, true);
        let p = Phantom::zeros(32, cfg.fov_m).unwrap();
        let ks = synthesize_kspace(&p, &seqs, &noiseless(true), &consts()).unwrap();
        assert!(ks.as_slice().iter().all(|z| *z == C64::new(0.0, 0.0)));
        let img = reconstruct(&ks, cfg.fov_m);
        assert!(img.magnitude.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn synthesis_matches_direct_dft() {
        let c = consts();
        let (cfg, seqs) = setup(32, true);
        let p = make_lego_phantom(32).unwrap();
        let ks = synthesize_kspace(&p, &seqs, &noiseless(true), &c).unwrap();
        let amp = p.density().map(|d| d * cfg.flip_rad.sin());
        let direct = brute_force_dft(&amp);
        let scale = direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (a, b) in ks.as_slice().iter().zip(&direct) {
            assert!((a - b).norm() < 1e-10 * scale);
        }
    }

    #[test]
    fn uniform_energy_at_dc() {
        let c = consts();
        let (cfg, seqs) = setup(32, true);
        let full = Phantom::uniform(32, cfg.fov_m).unwrap();
        let ks = synthesize_kspace(&full, &seqs, &noiseless(true), &c).unwrap();
        assert!(center_energy_fraction(&ks, 1) > 0.95);

        let disc = Phantom::uniform_disc(32, cfg.fov_m).unwrap();
        let amp = disc.density().map(|d| d * cfg.flip_rad.sin());
        let direct = brute_force_dft(&amp);
        let total: f64 = direct.iter().map(|z| z.norm_sqr()).sum();
        let center: f64 = (15..18)
            .flat_map(|i| (15..18).map(move |j| i * 32 + j))
            .map(|k| direct[k].norm_sqr())
            .sum();
        let ks = synthesize_kspace(&disc, &seqs, &noiseless(true), &c).unwrap();
        let frac = center_energy_fraction(&ks, 1);
        assert_relative_eq!(frac, center / total, max_relative = 1e-10);
        assert_relative_eq!(frac, DISC_CENTER_ENERGY_32, max_relative = 1e-6);
    }

    const DISC_CENTER_ENERGY_32: f64 = 0.836_917_657_667_320_8;

    #[test]
    fn isocenter_without_rf_is_kinetic() {
        let c = consts();
        let w0 = c.gamma() * 7.0;
        let k = 2.0 * c.free_proton_kinetic_energy() / c.hbar();
        assert_relative_eq!(no_rf_amplitude(0.0, -w0, AmpModel::Sqrt, &c), (k / w0).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(no_rf_amplitude(0.0, -w0, AmpModel::Linear, &c), k / w0, max_relative = 1e-12);
        // away from isocenter the gradient offset dominates
        let a = no_rf_amplitude(2e-2 * 0.029, -w0, AmpModel::Sqrt, &c);
        assert_relative_eq!(a, (c.gamma() * 5.8e-4 / w0).sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn determinism_and_thread_independence() {
        let c = consts();
        let (cfg, seqs) = setup(64, false);
        let p = make_lego_phantom(64).unwrap();
        let opts = cfg.synthesis(false);
        let a = synthesize_kspace(&p, &seqs, &opts, &c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| synthesize_kspace(&p, &seqs, &opts, &c).unwrap());
        assert_eq!(a, b);
        let other = SynthesisOptions { seed: 1, ..opts };
        assert_ne!(a, synthesize_kspace(&p, &seqs, &other, &c).unwrap());
    }

    #[test]
    fn parseval_random_kspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (r, cl) in [(32, 32), (16, 64), (8, 8)] {
            let data: Vec<C64> = (0..r * cl).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let ks = Grid::from_vec(r, cl, data).unwrap();
            let img = reconstruct(&ks, 1.0);
            let e_img: f64 = img.magnitude.as_slice().iter().map(|v| v * v).sum();
            let e_k: f64 = ks.as_slice().iter().map(|z| z.norm_sqr()).sum();
            assert_relative_eq!(e_img, e_k / (r * cl) as f64, max_relative = 1e-9);
        }
    }

    #[test]
    fn dc_only_gives_flat_image() {
        let mut ks = Grid::filled(16, 16, C64::new(0.0, 0.0));
        ks.data[8 * 16 + 8] = C64::new(3.0, 4.0);
        let img = reconstruct(&ks, 1.0);
        for v in img.magnitude.as_slice() {
            assert_relative_eq!(*v, 5.0 / 256.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn noiseless_reconstruction_recovers_phantom() {
        let c = consts();
        let (cfg, seqs) = setup(64, true);
        let p = make_lego_phantom(64).unwrap();
        let img = reconstruct(&synthesize_kspace(&p, &seqs, &noiseless(true), &c).unwrap(), cfg.fov_m);
        let r = normalized_correlation(img.magnitude.as_slice(), p.density().as_slice()).unwrap();
        assert!(r >= 0.95, "{r}");
        assert!(matches!(snr(&img, &p.mask().unwrap().signal_roi(), &p.mask().unwrap().noise_roi()), Err(Error::NoNoise)));
    }

    #[test]
    fn snr_definitions() {
        let vals = vec![10.0, 10.0, 1.0, 3.0, 5.0];
        let img = Image { magnitude: Grid::from_vec(1, 5, vals).unwrap(), fov: 1.0 };
        let sig = [true, true, false, false, false];
        let noise = [false, false, true, true, true];
        assert_relative_eq!(snr(&img, &sig, &noise).unwrap(), 5.0, max_relative = 1e-15);
        assert_eq!(snr(&img, &[false; 5], &noise), Err(Error::EmptyROI));
        assert_eq!(snr(&img, &sig, &[true, false, true, false, false]), Err(Error::OverlappingROI));
        let flat = Image { magnitude: Grid::filled(1, 5, 2.0), fov: 1.0 };
        assert_eq!(snr(&flat, &sig, &noise), Err(Error::NoNoise));
    }

    #[test]
    fn calibrated_sigma_is_frozen() {
        let c = consts();
        let (_, seqs) = setup(64, true);
        let p = make_lego_phantom(64).unwrap();
        let sigma = calibrate_noise_sigma(&p, &seqs, TARGET_SNR, &c).unwrap();
        assert_relative_eq!(sigma, DEFAULT_NOISE_SIGMA, max_relative = 1e-4);
    }

    #[test]
    fn calibrated_snr_near_target() {
        let c = consts();
        let (cfg, seqs) = setup(64, true);
        let p = make_lego_phantom(64).unwrap();
        let m = p.mask().unwrap();
        let snrs: Vec<f64> = (0..8)
            .map(|seed| {
                let opts = SynthesisOptions { seed, ..cfg.synthesis(true) };
                snr(&reconstruct(&synthesize_kspace(&p, &seqs, &opts, &c).unwrap(), cfg.fov_m), &m.signal_roi(), &m.noise_roi())
                    .unwrap()
            })
            .collect();
        let avg = mean(&snrs);
        assert!((avg - TARGET_SNR).abs() < 0.1 * TARGET_SNR, "{snrs:?}");
    }

    #[test]
    fn pgm_and_csv_writers() {
        let g = Grid::from_vec(2, 3, vec![0.0, 1.0, 2.0, 0.5, 0.25, 4.0]).unwrap();
        let mut ascii = Vec::new();
        write_pgm(&g, &mut ascii, false, &["h".into()]).unwrap();
        assert_eq!(String::from_utf8(ascii).unwrap(), "P2\n# h\n3 2\n65535\n0 16384 32768\n8192 4096 65535\n");
        let mut bin = Vec::new();
        write_pgm(&g, &mut bin, true, &[]).unwrap();
        assert_eq!(&bin[bin.len() - 12..], &[0, 0, 64, 0, 128, 0, 32, 0, 16, 0, 255, 255]);
        let mut zero = Vec::new();
        write_pgm(&Grid::filled(1, 2, 0.0), &mut zero, false, &[]).unwrap();
        assert!(String::from_utf8(zero).unwrap().ends_with("0 0\n"));

        let ks = Grid::from_vec(1, 2, vec![C64::new(1.0, -0.5), C64::new(0.0, 2.0)]).unwrap();
        let mut csv = Vec::new();
        write_kspace_csv(&ks, &mut csv, &[]).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next(), Some("ky_index,kx_index,re,im"));
        assert_eq!(text.lines().nth(2), Some("0,1,0.0000000000000000e0,2.0000000000000000e0"));
    }

    #[test]
    fn config_json() {
        let c = consts();
        let cfg = ImagingConfig::reference(&c);
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"amp_model\":\"sqrt\""));
        assert_eq!(serde_json::from_str::<ImagingConfig>(&text).unwrap(), cfg);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn synthesis_is_linear(a in 0.01..100.0f64) {
            let c = consts();
            let (_, seqs) = setup(32, true);
            let p = make_lego_phantom(32).unwrap();
            let base = synthesize_kspace(&p, &seqs, &noiseless(true), &c).unwrap();
            let scaled = synthesize_kspace(&p.scaled(a).unwrap(), &seqs, &noiseless(true), &c).unwrap();
            let peak = base.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);
            for (x, y) in base.as_slice().iter().zip(scaled.as_slice()) {
                prop_assert!((x * a - y).norm() <= 1e-12 * a * peak);
            }
        }
    }
}
