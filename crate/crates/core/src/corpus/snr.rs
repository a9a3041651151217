//! Synthetic noisy-signal battery relating SNR to compressibility.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{compute_compression_ratio, Gzip};
use crate::error::{Error, Result};

pub const BATTERY_SAMPLE_RATE: u32 = 16_000;

const BATTERY_AMPLITUDE: f64 = 0.25;
const BATTERY_SECONDS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    /// `None` for clean signals.
    pub snr_db: Option<f64>,
}

impl SyntheticSignal {
    /// Sum of sinusoids, each given as `(frequency_hz, amplitude)`.
    pub fn tones(partials: &[(f64, f64)], sample_rate: u32, seconds: f64) -> Self {
        let len = (seconds * f64::from(sample_rate)).round() as usize;
        let samples = (0..len)
            .map(|n| {
                let t = n as f64 / f64::from(sample_rate);
                partials
                    .iter()
                    .map(|&(f, a)| a * (std::f64::consts::TAU * f * t).sin())
                    .sum()
            })
            .collect();
        SyntheticSignal {
            samples,
            sample_rate,
            snr_db: None,
        }
    }

    pub fn power(&self) -> f64 {
        mean_square(&self.samples)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::InvalidSignal("no samples".into()));
        }
        if let Some(x) = self.samples.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(*x));
        }
        Ok(())
    }

    /// Little-endian 16-bit PCM, full scale at |x| = 1, clipped.
    pub fn to_pcm16(&self) -> Vec<u8> {
        self.samples
            .iter()
            .flat_map(|&x| {
                let q = (x.clamp(-1.0, 1.0) * f64::from(i16::MAX)).round() as i16;
                q.to_le_bytes()
            })
            .collect()
    }
}

fn mean_square(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64
}

/// Adds Gaussian noise rescaled so that its empirical power hits the target
/// SNR exactly.
pub fn synthesize_noisy_signal(clean: &SyntheticSignal, snr_db: f64, seed: u64) -> Result<SyntheticSignal> {
    clean.validate()?;
    if !snr_db.is_finite() {
        return Err(Error::NonFinite(snr_db));
    }
    let signal_power = clean.power();
    if signal_power <= 0.0 {
        return Err(Error::ZeroPowerSignal);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise: Vec<f64> = (0..clean.samples.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let target = signal_power / 10f64.powf(snr_db / 10.0);
    let measured = mean_square(&noise);
    let scale = if measured > 0.0 { (target / measured).sqrt() } else { 0.0 };
    for n in &mut noise {
        *n *= scale;
    }

    let samples = clean.samples.iter().zip(&noise).map(|(s, n)| s + n).collect();
    Ok(SyntheticSignal {
        samples,
        sample_rate: clean.sample_rate,
        snr_db: Some(snr_db),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint {
    pub snr_db: f64,
    pub mean_cr: f64,
}

fn battery() -> Vec<SyntheticSignal> {
    let a = BATTERY_AMPLITUDE;
    let sr = BATTERY_SAMPLE_RATE;
    let s = BATTERY_SECONDS;
    vec![
        SyntheticSignal::tones(&[(220.0, a)], sr, s),
        SyntheticSignal::tones(&[(440.0, a)], sr, s),
        SyntheticSignal::tones(&[(1000.0, a)], sr, s),
        SyntheticSignal::tones(&[(300.0, a * 0.6), (1250.0, a * 0.4)], sr, s),
    ]
}

/// Mean compression ratio of the noisy battery at each requested SNR.
///
/// The noise seed of signal `j` at entry `i` is derived from `(seed, i, j)`,
/// so repeated SNR values in the list get independent noise.
pub fn snr_study(snr_values: &[f64], seed: u64) -> Result<Vec<SnrPoint>> {
    if snr_values.is_empty() {
        return Err(Error::Config("snr list is empty".into()));
    }
    let clean = battery();
    let compressor = Gzip::default();
    snr_values
        .iter()
        .enumerate()
        .map(|(i, &snr_db)| {
            let mut total = 0.0;
            for (j, signal) in clean.iter().enumerate() {
                let noisy = synthesize_noisy_signal(signal, snr_db, derive_seed(seed, i, j))?;
                total += compute_compression_ratio(&noisy.to_pcm16(), &compressor)?;
            }
            Ok(SnrPoint {
                snr_db,
                mean_cr: total / clean.len() as f64,
            })
        })
        .collect()
}

fn derive_seed(seed: u64, entry: usize, signal: usize) -> u64 {
    // splitmix64 finalizer over the packed coordinates
    let mut z = seed
        .wrapping_add((entry as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((signal as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
