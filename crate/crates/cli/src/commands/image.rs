//! `image`: phantom imaging with and without RF excitation.

use std::io::Write;

use serde::{Deserialize, Serialize};
use spinsim::imaging::{
    make_lego_phantom, normalized_correlation, reconstruct, snr, synthesize_kspace, write_kspace_csv, write_pgm,
    AmpModel, Image, ImagingConfig, KSpace, Phantom, SynthesisOptions, DEFAULT_NOISE_SIGMA,
};
use spinsim::sequence::{gradient_echo, REFERENCE_FLIP_RAD};
use spinsim::spincore::PhysicalConstants;
use spinsim::Error;

use crate::config::{load, CliError};
use crate::output::OutputDir;
use crate::CommonArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhantomKind {
    /// Two bricks in a water disc.
    Lego,
    /// The water disc alone.
    Uniform,
    /// Lego geometry with zero density.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Both,
    WithRf,
    WithoutRf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PgmFormat {
    P2,
    P5,
}

/// Sequence and synthesis parameters; `mode` selects which acquisitions run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageConfig {
    pub fov_m: f64,
    pub matrix: [usize; 2],
    pub te_s: f64,
    pub tr_s: f64,
    pub flip_rad: f64,
    pub slice_thickness_m: f64,
    #[serde(rename = "read_gradient_T_per_m")]
    pub read_gradient_t_per_m: f64,
    pub reference_frequency_rad_s: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub amp_model: AmpModel,
    pub phantom: PhantomKind,
    pub mode: RunMode,
    pub pgm_format: PgmFormat,
}

impl ImageConfig {
    pub fn reference(c: &PhysicalConstants) -> Self {
        let r = ImagingConfig::reference(c);
        Self {
            fov_m: r.fov_m,
            matrix: r.matrix,
            te_s: r.te_s,
            tr_s: r.tr_s,
            flip_rad: REFERENCE_FLIP_RAD,
            slice_thickness_m: r.slice_thickness_m,
            read_gradient_t_per_m: r.read_gradient_t_per_m,
            reference_frequency_rad_s: r.reference_frequency_rad_s,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            seed: 0,
            amp_model: AmpModel::Sqrt,
            phantom: PhantomKind::Lego,
            mode: RunMode::Both,
            pgm_format: PgmFormat::P5,
        }
    }

    pub fn imaging(&self, with_rf: bool) -> ImagingConfig {
        ImagingConfig {
            fov_m: self.fov_m,
            matrix: self.matrix,
            te_s: self.te_s,
            tr_s: self.tr_s,
            flip_rad: self.flip_rad,
            slice_thickness_m: self.slice_thickness_m,
            read_gradient_t_per_m: self.read_gradient_t_per_m,
            with_rf,
            reference_frequency_rad_s: self.reference_frequency_rad_s,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
            amp_model: self.amp_model,
        }
    }
}

pub fn make_phantom(cfg: &ImageConfig) -> Result<Phantom, CliError> {
    let [n, m] = cfg.matrix;
    if n != m {
        return Err(CliError::Config(format!("phantoms are square; matrix is {n}x{m}")));
    }
    let lego = make_lego_phantom(n)?;
    let mask = lego.mask().expect("lego phantom has a mask").clone();
    let p = match cfg.phantom {
        PhantomKind::Lego => Phantom::new(lego.density().clone(), cfg.fov_m)?.with_mask(mask)?,
        PhantomKind::Uniform => Phantom::uniform_disc(n, cfg.fov_m)?,
        PhantomKind::Zero => Phantom::new(lego.density().map(|_| 0.0), cfg.fov_m)?.with_mask(mask)?,
    };
    Ok(p)
}

#[derive(Debug, Clone, Serialize)]
pub struct SnrEntry {
    pub snr: Option<f64>,
    pub status: String,
}

impl From<Result<f64, Error>> for SnrEntry {
    fn from(r: Result<f64, Error>) -> Self {
        match r {
            Ok(v) => Self { snr: Some(v), status: "ok".into() },
            Err(e) => Self { snr: None, status: format!("{e:?}") },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub amp_model: AmpModel,
    pub snr: SnrEntry,
    /// Pearson correlation of the image magnitude with the density.
    pub correlation: f64,
    pub correlation_noiseless: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageReport {
    pub phantom: PhantomKind,
    pub matrix: [usize; 2],
    pub noise_sigma: f64,
    pub seed: u64,
    pub with_rf: Option<RunReport>,
    /// Configured model first, then the alternative model for comparison.
    pub without_rf: Vec<RunReport>,
    pub snr_with_exceeds_without: Option<bool>,
}

pub struct Acquisition {
    pub kspace: KSpace,
    pub image: Image,
    pub report: RunReport,
}

pub fn acquire(
    ph: &Phantom,
    cfg: &ImageConfig,
    with_rf: bool,
    amp_model: AmpModel,
    c: &PhysicalConstants,
) -> Result<Acquisition, CliError> {
    let icfg = cfg.imaging(with_rf);
    let seqs = gradient_echo(&icfg.sequence(with_rf), c)?;
    let opts = SynthesisOptions { amp_model, ..icfg.synthesis(with_rf) };
    let kspace = synthesize_kspace(ph, &seqs, &opts, c)?;
    let image = reconstruct(&kspace, cfg.fov_m);
    let clean = reconstruct(&synthesize_kspace(ph, &seqs, &SynthesisOptions { noise_sigma: 0.0, ..opts }, c)?, cfg.fov_m);
    let density = ph.density().as_slice();
    let mask = ph.mask().ok_or_else(|| CliError::Config("phantom has no feature mask".into()))?;
    let report = RunReport {
        amp_model,
        snr: snr(&image, &mask.signal_roi(), &mask.noise_roi()).into(),
        correlation: normalized_correlation(image.magnitude.as_slice(), density)?,
        correlation_noiseless: normalized_correlation(clean.magnitude.as_slice(), density)?,
    };
    Ok(Acquisition { kspace, image, report })
}

fn other_model(m: AmpModel) -> AmpModel {
    match m {
        AmpModel::Sqrt => AmpModel::Linear,
        AmpModel::Linear => AmpModel::Sqrt,
    }
}

pub fn execute(args: &CommonArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let c = PhysicalConstants::default();
    let cfg: ImageConfig = load(&ImageConfig::reference(&c), args.config.as_deref(), &args.overrides)?;
    let ph = make_phantom(&cfg)?;
    let dir = OutputDir::create(&args.output_dir, &cfg)?;
    let comment = dir.comment();
    let binary = cfg.pgm_format == PgmFormat::P5;
    dir.write("phantom.pgm", |w| write_pgm(ph.density(), w, binary, &comment))?;

    let mut report = ImageReport {
        phantom: cfg.phantom,
        matrix: cfg.matrix,
        noise_sigma: cfg.noise_sigma,
        seed: cfg.seed,
        with_rf: None,
        without_rf: Vec::new(),
        snr_with_exceeds_without: None,
    };
    if cfg.mode != RunMode::WithoutRf {
        let a = acquire(&ph, &cfg, true, cfg.amp_model, &c)?;
        dir.write("image_with_rf.pgm", |w| write_pgm(&a.image.magnitude, w, binary, &comment))?;
        dir.write("kspace_with_rf.csv", |w| write_kspace_csv(&a.kspace, w, &comment))?;
        report.with_rf = Some(a.report);
    }
    if cfg.mode != RunMode::WithRf {
        let a = acquire(&ph, &cfg, false, cfg.amp_model, &c)?;
        dir.write("image_without_rf.pgm", |w| write_pgm(&a.image.magnitude, w, binary, &comment))?;
        dir.write("kspace_without_rf.csv", |w| write_kspace_csv(&a.kspace, w, &comment))?;
        let alt = acquire(&ph, &cfg, false, other_model(cfg.amp_model), &c)?;
        report.without_rf = vec![a.report, alt.report];
    }
    if let (Some(w), Some(wo)) = (&report.with_rf, report.without_rf.first()) {
        if let (Some(a), Some(b)) = (w.snr.snr, wo.snr.snr) {
            report.snr_with_exceeds_without = Some(a > b);
        }
    }
    dir.write_json("image_report.json", &report)?;

    let fmt_snr = |s: &SnrEntry| s.snr.map_or_else(|| s.status.clone(), |v| format!("{v:.3}"));
    if let Some(r) = &report.with_rf {
        writeln!(out, "with RF      SNR {:>10}  correlation {:.4}  noiseless {:.4}", fmt_snr(&r.snr), r.correlation, r.correlation_noiseless)?;
    }
    for r in &report.without_rf {
        writeln!(
            out,
            "without RF   SNR {:>10}  correlation {:.4}  noiseless {:.4}  ({:?})",
            fmt_snr(&r.snr),
            r.correlation,
            r.correlation_noiseless,
            r.amp_model
        )?;
    }
    Ok(())
}
