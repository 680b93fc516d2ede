use spinsim::imaging::*;
use spinsim::sequence::{gradient_echo, validate, SequenceConfig};
use spinsim::spincore::PhysicalConstants;

#[test]
fn with_rf_beats_without_rf_for_twenty_seeds() {
    let c = PhysicalConstants::default();
    let cfg = ImagingConfig::reference(&c);
    let p = make_lego_phantom(64).unwrap();
    let mask = p.mask().unwrap();
    let (sig, noise) = (mask.signal_roi(), mask.noise_roi());
    let with = gradient_echo(&cfg.sequence(true), &c).unwrap();
    let without = gradient_echo(&cfg.sequence(false), &c).unwrap();
    for seed in 0..20 {
        let cfg = ImagingConfig { seed, ..cfg.clone() };
        let a = reconstruct(&synthesize_kspace(&p, &with, &cfg.synthesis(true), &c).unwrap(), cfg.fov_m);
        let b = reconstruct(&synthesize_kspace(&p, &without, &cfg.synthesis(false), &c).unwrap(), cfg.fov_m);
        let (sa, sb) = (snr(&a, &sig, &noise).unwrap(), snr(&b, &sig, &noise).unwrap());
        assert!(sa > sb && sb > 1.0, "seed {seed}: {sa} {sb}");
    }
}

#[test]
fn reference_sequence_is_valid_and_json_stable() {
    let c = PhysicalConstants::default();
    let seqs = gradient_echo(&SequenceConfig::reference(&c), &c).unwrap();
    assert!(seqs.iter().all(|s| validate(s).is_empty()));
    let text = serde_json::to_string(&seqs).unwrap();
    let back: Vec<spinsim::sequence::PulseSequence> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, seqs);
}
