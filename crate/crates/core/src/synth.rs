//! Synthetic three-class recordings: band-limited sinusoid mixtures around a
//! class-specific centre frequency plus Gaussian noise.
//!
//! Class `k` draws its sinusoids from `SIGNATURE_HZ[k] ± half_band_hz[k]`.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{sidecar_path, write_record, ClassLabel, RecordFormat, Signal};
use crate::error::{Error, Result};
use crate::io::{derive_seed, write_atomic};

/// Band centres in `ClassLabel` order.
pub const SIGNATURE_HZ: [f64; 3] = [3.0, 10.0, 25.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub per_class: usize,
    pub fs: f64,
    pub length: usize,
    /// Sinusoids per record.
    pub components: usize,
    /// Band half-widths, one per class.
    pub half_band_hz: [f64; 3],
    pub noise_std: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            per_class: 20,
            fs: 128.0,
            length: 65_536,
            components: 32,
            half_band_hz: [2.9, 4.0, 0.3],
            noise_std: 0.3,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_class == 0 || self.length == 0 || self.components == 0 {
            return Err(Error::Config(
                "synth needs per_class, length and components >= 1".into(),
            ));
        }
        for (&centre, &hb) in SIGNATURE_HZ.iter().zip(&self.half_band_hz) {
            if !(0.0..centre).contains(&hb) {
                return Err(Error::Config(format!("half band {hb} Hz must be in [0, {centre})")));
            }
            if self.fs.is_nan() || self.fs <= 0.0 || centre + hb >= self.fs / 2.0 {
                return Err(Error::Config(format!(
                    "sampling rate {} Hz too low for the signature",
                    self.fs
                )));
            }
        }
        if self.noise_std.is_nan() || self.noise_std < 0.0 {
            return Err(Error::Config("noise_std must be >= 0".into()));
        }
        Ok(())
    }
}

/// Record `index` of `class`; depends only on the arguments.
pub fn generate(class: ClassLabel, index: usize, cfg: &SynthConfig, seed: u64) -> Result<Signal> {
    let id = format!("{}_{index:03}", class.name().to_lowercase());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &id, 0));
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let centre = SIGNATURE_HZ[class.index()];
    let half = cfg.half_band_hz[class.index()];
    let comps: Vec<(f64, f64, f64)> = (0..cfg.components)
        .map(|_| {
            let f = centre + half * rng.gen_range(-1.0..=1.0);
            let a = rng.gen_range(0.5..1.0);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            (f, a, phase)
        })
        .collect();
    let samples = (0..cfg.length)
        .map(|i| {
            let t = i as f64 / cfg.fs;
            let clean: f64 = comps
                .iter()
                .map(|&(f, a, ph)| a * (std::f64::consts::TAU * f * t + ph).sin())
                .sum();
            clean + noise.sample(&mut rng)
        })
        .collect();
    Ok(Signal::new(id, samples, cfg.fs)?.with_label(class))
}

/// Writes `<root>/<CLASS>/<id>.f64` with a `.fs` sidecar for every record; returns the paths.
pub fn write_dataset(root: &Path, cfg: &SynthConfig, seed: u64) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let mut paths = Vec::new();
    for class in ClassLabel::ALL {
        for i in 0..cfg.per_class {
            let s = generate(class, i, cfg, seed)?;
            let path = root.join(class.name()).join(format!("{}.f64", s.record_id));
            write_record(&path, &s, RecordFormat::RawBinaryF64)?;
            write_atomic(&sidecar_path(&path), format!("{}\n", cfg.fs).as_bytes())?;
            paths.push(path);
        }
    }
    Ok(paths)
}
