//! Synthetic source generation and the mixture-construction protocol:
//! pick classes per pairing rule, generate unit-RMS segments, draw an SNR
//! uniformly from the configured range and mix. Every example derives its
//! own RNG stream from (seed, epoch, batch_index, example_index), so batch
//! content is reproducible and generation can run in parallel.

use crate::real::Real;
use crate::signal::{SignalError, SourceSet, Waveform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MixGenError {
    #[error("wav pool directory contains no usable files: {0}")]
    EmptyWavPool(PathBuf),
    #[error("{path}: sample rate {found} does not match configured {expected}")]
    SampleRateMismatch { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: {reason}")]
    MalformedWav { path: PathBuf, reason: String },
    #[error("source has zero energy and cannot be mixed")]
    ZeroEnergySource,
    #[error("pairing rule needs {needed} classes but the bank has {available}")]
    NotEnoughClasses { needed: usize, available: usize },
    #[error("unknown class id {0}")]
    UnknownClass(u32),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How a source class synthesizes audio.
#[derive(Debug, Clone)]
pub enum Generator {
    /// Harmonic stack with 1/h amplitude rolloff and random phases.
    Tonal { harmonics: usize, f0_hz: (f64, f64) },
    /// Sum of random sinusoids confined to [low, high] Hz.
    NoiseBand { low_hz: f64, high_hz: f64 },
    /// Linear frequency sweep from a random f0 to a random f1.
    Chirp { f0_hz: (f64, f64), f1_hz: (f64, f64) },
    /// Amplitude-modulated carrier.
    AmMod { carrier_hz: (f64, f64), mod_rate_hz: (f64, f64) },
    /// Random crops from mono 16-bit PCM WAV files in a directory.
    WavPool { dir: PathBuf, files: Vec<PathBuf> },
}

#[derive(Debug, Clone)]
pub struct SourceClass {
    pub id: u32,
    pub name: String,
    pub generator: Generator,
}

/// Read-only collection of source classes.
#[derive(Debug, Clone)]
pub struct ClassBank {
    pub classes: Vec<SourceClass>,
}

impl ClassBank {
    pub fn new(classes: Vec<SourceClass>) -> Self {
        Self { classes }
    }

    pub fn by_id(&self, id: u32) -> Result<&SourceClass, MixGenError> {
        self.classes
            .iter()
            .find(|c| c.id == id)
            .ok_or(MixGenError::UnknownClass(id))
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// The four default synthetic classes.
    pub fn default_bank() -> Self {
        Self::new(vec![
            SourceClass {
                id: 0,
                name: "tonal".into(),
                generator: Generator::Tonal { harmonics: 4, f0_hz: (120.0, 400.0) },
            },
            SourceClass {
                id: 1,
                name: "noiseband".into(),
                generator: Generator::NoiseBand { low_hz: 1000.0, high_hz: 2600.0 },
            },
            SourceClass {
                id: 2,
                name: "chirp".into(),
                generator: Generator::Chirp { f0_hz: (200.0, 600.0), f1_hz: (1200.0, 3000.0) },
            },
            SourceClass {
                id: 3,
                name: "ammod".into(),
                generator: Generator::AmMod {
                    carrier_hz: (500.0, 1500.0),
                    mod_rate_hz: (2.0, 12.0),
                },
            },
        ])
    }
}

/// Class-selection rule for the slots of one mixture.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassPairing {
    /// All slots draw different classes.
    DistinctClasses,
    /// Slot 0 is always class A, slot 1 class B (two-slot mixtures).
    FixedPair(u32, u32),
    /// Independent draws; repeats allowed.
    AnyClasses,
}

#[derive(Debug, Clone)]
pub struct MixSpec {
    pub n_slots: usize,
    pub segment_len: usize,
    pub snr_range_db: (f64, f64),
    pub class_pairing: ClassPairing,
    pub sample_rate: u32,
}

impl Default for MixSpec {
    fn default() -> Self {
        Self {
            n_slots: 2,
            segment_len: 2048,
            snr_range_db: (-30.0, 30.0),
            class_pairing: ClassPairing::DistinctClasses,
            sample_rate: 8000,
        }
    }
}

/// One generated mixture with its references and class labels.
#[derive(Debug, Clone)]
pub struct MixExample<T: Real> {
    pub mixture: Waveform<T>,
    pub sources: SourceSet<T>,
    pub classes: Vec<u32>,
}

/// A batch of generated examples.
#[derive(Debug, Clone)]
pub struct WaveformBatch<T: Real> {
    pub examples: Vec<MixExample<T>>,
}

impl<T: Real> WaveformBatch<T> {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Derives an independent, reproducible RNG stream from the run seed and
/// the (epoch, batch, example) coordinates.
pub fn example_rng(seed: u64, epoch: u64, batch_index: u64, example_index: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for (slot, v) in [seed, epoch, batch_index, example_index, 0x6d69786765_u64]
        .iter()
        .enumerate()
    {
        state = splitmix64(state ^ v.wrapping_mul(0x9e3779b97f4a7c15));
        key[slot * 6..slot * 6 + 6].copy_from_slice(&state.to_le_bytes()[..6]);
    }
    key[30..32].copy_from_slice(&splitmix64(state).to_le_bytes()[..2]);
    ChaCha8Rng::from_seed(key)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    rng.gen_range(range.0..=range.1)
}

fn normalize_rms(samples: &mut [f64]) -> Result<(), MixGenError> {
    let energy: f64 = samples.iter().map(|&s| s * s).sum();
    let rms = (energy / samples.len() as f64).sqrt();
    if rms < 1e-12 {
        return Err(MixGenError::ZeroEnergySource);
    }
    for s in samples.iter_mut() {
        *s /= rms;
    }
    Ok(())
}

/// Synthesize a unit-RMS segment for a class. Deterministic given the RNG
/// stream.
pub fn generate_source<T: Real>(
    class: &SourceClass,
    length: usize,
    sample_rate: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Waveform<T>, MixGenError> {
    assert!(length > 0, "segment length must be positive");
    let sr = sample_rate as f64;
    let mut samples = vec![0.0f64; length];
    match &class.generator {
        Generator::Tonal { harmonics, f0_hz } => {
            let f0 = uniform(rng, *f0_hz);
            for h in 1..=*harmonics {
                let phase = uniform(rng, (0.0, TAU));
                let amp = 1.0 / h as f64;
                let w = TAU * f0 * h as f64 / sr;
                for (t, s) in samples.iter_mut().enumerate() {
                    *s += amp * (w * t as f64 + phase).sin();
                }
            }
        }
        Generator::NoiseBand { low_hz, high_hz } => {
            // 64 random in-band sinusoids approximate band-limited noise
            // while keeping all spectral energy inside the band.
            for _ in 0..64 {
                let f = uniform(rng, (*low_hz, *high_hz));
                let phase = uniform(rng, (0.0, TAU));
                let w = TAU * f / sr;
                for (t, s) in samples.iter_mut().enumerate() {
                    *s += (w * t as f64 + phase).sin();
                }
            }
        }
        Generator::Chirp { f0_hz, f1_hz } => {
            let f0 = uniform(rng, *f0_hz);
            let f1 = uniform(rng, *f1_hz);
            let phase = uniform(rng, (0.0, TAU));
            let dur = length as f64 / sr;
            for (t, s) in samples.iter_mut().enumerate() {
                let tt = t as f64 / sr;
                *s = (TAU * (f0 * tt + (f1 - f0) * tt * tt / (2.0 * dur)) + phase).sin();
            }
        }
        Generator::AmMod { carrier_hz, mod_rate_hz } => {
            let fc = uniform(rng, *carrier_hz);
            let fm = uniform(rng, *mod_rate_hz);
            let phase = uniform(rng, (0.0, TAU));
            for (t, s) in samples.iter_mut().enumerate() {
                let tt = t as f64 / sr;
                *s = (1.0 + 0.8 * (TAU * fm * tt).sin()) * (TAU * fc * tt + phase).sin();
            }
        }
        Generator::WavPool { dir, files } => {
            if files.is_empty() {
                return Err(MixGenError::EmptyWavPool(dir.clone()));
            }
            let idx = rng.gen_range(0..files.len());
            let raw = read_wav_mono16(&files[idx], sample_rate)?;
            // Tile short files, then take a uniformly random crop.
            let mut tiled = raw.clone();
            while tiled.len() < length {
                tiled.extend_from_slice(&raw);
            }
            let offset = rng.gen_range(0..=tiled.len() - length);
            samples.copy_from_slice(&tiled[offset..offset + length]);
        }
    }
    normalize_rms(&mut samples)?;
    let converted = samples.into_iter().map(T::from_f64c).collect();
    Ok(Waveform::new(converted, sample_rate)?)
}

/// Scale `s2` so the energy ratio to `s1` equals `snr_db`, and mix.
/// Returns `(mixture, scaled_s2, gain)`.
pub fn mix_at_snr<T: Real>(
    s1: &Waveform<T>,
    s2: &Waveform<T>,
    snr_db: f64,
) -> Result<(Waveform<T>, Waveform<T>, T), MixGenError> {
    if s1.len() != s2.len() {
        return Err(SignalError::LengthMismatch(s1.len(), s2.len()).into());
    }
    let e1 = s1.energy();
    let e2 = s2.energy();
    if e1 <= T::zero() || e2 <= T::zero() {
        return Err(MixGenError::ZeroEnergySource);
    }
    let gain = (e1 / e2).sqrt() * T::from_f64c(10f64.powf(-snr_db / 20.0));
    let scaled: Vec<T> = s2.samples.iter().map(|&s| gain * s).collect();
    let mixture: Vec<T> = s1
        .samples
        .iter()
        .zip(&scaled)
        .map(|(&a, &b)| a + b)
        .collect();
    Ok((
        Waveform { samples: mixture, sample_rate: s1.sample_rate },
        Waveform { samples: scaled, sample_rate: s1.sample_rate },
        gain,
    ))
}

fn pick_classes(
    spec: &MixSpec,
    bank: &ClassBank,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<u32>, MixGenError> {
    match &spec.class_pairing {
        ClassPairing::FixedPair(a, b) => {
            bank.by_id(*a)?;
            bank.by_id(*b)?;
            Ok(vec![*a, *b])
        }
        ClassPairing::DistinctClasses => {
            if bank.len() < spec.n_slots {
                return Err(MixGenError::NotEnoughClasses {
                    needed: spec.n_slots,
                    available: bank.len(),
                });
            }
            let mut pool: Vec<u32> = bank.classes.iter().map(|c| c.id).collect();
            let mut out = Vec::with_capacity(spec.n_slots);
            for _ in 0..spec.n_slots {
                let i = rng.gen_range(0..pool.len());
                out.push(pool.swap_remove(i));
            }
            Ok(out)
        }
        ClassPairing::AnyClasses => {
            if bank.is_empty() {
                return Err(MixGenError::NotEnoughClasses { needed: 1, available: 0 });
            }
            Ok((0..spec.n_slots)
                .map(|_| bank.classes[rng.gen_range(0..bank.len())].id)
                .collect())
        }
    }
}

fn make_example<T: Real>(
    spec: &MixSpec,
    bank: &ClassBank,
    rng: &mut ChaCha8Rng,
) -> Result<MixExample<T>, MixGenError> {
    let classes = pick_classes(spec, bank, rng)?;
    let mut sources = Vec::with_capacity(classes.len());
    for &cid in &classes {
        let class = bank.by_id(cid)?;
        sources.push(generate_source::<T>(class, spec.segment_len, spec.sample_rate, rng)?);
    }
    // Slot 0 is the level reference; every other slot gets its own SNR
    // drawn against it. Mixture is the exact sum of the stored sources.
    let mut scaled = vec![sources[0].clone()];
    for s in &sources[1..] {
        let snr = uniform(rng, spec.snr_range_db);
        let (_, s_scaled, _) = mix_at_snr(&sources[0], s, snr)?;
        scaled.push(s_scaled);
    }
    let mut mix = vec![T::zero(); spec.segment_len];
    for s in &scaled {
        for (m, &x) in mix.iter_mut().zip(&s.samples) {
            *m += x;
        }
    }
    Ok(MixExample {
        mixture: Waveform { samples: mix, sample_rate: spec.sample_rate },
        sources: SourceSet::all_active(scaled)?,
        classes,
    })
}

/// Generate a reproducible batch. Content is a pure function of
/// `(spec, bank, batch_size, epoch, batch_index, seed)`.
pub fn make_batch<T: Real>(
    spec: &MixSpec,
    bank: &ClassBank,
    batch_size: usize,
    epoch: u64,
    batch_index: u64,
    seed: u64,
) -> Result<WaveformBatch<T>, MixGenError> {
    let examples = (0..batch_size)
        .map(|i| {
            let mut rng = example_rng(seed, epoch, batch_index, i as u64);
            make_example(spec, bank, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(WaveformBatch { examples })
}

/// Index a directory of mono 16-bit PCM WAV files as a source class.
pub fn load_wav_pool(
    id: u32,
    name: &str,
    dir: &Path,
    sample_rate: u32,
) -> Result<SourceClass, MixGenError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .map(|ext| ext.eq_ignore_ascii_case("wav"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(MixGenError::EmptyWavPool(dir.to_path_buf()));
    }
    // Validate headers up front so errors surface at load time.
    for f in &files {
        read_wav_mono16(f, sample_rate)?;
    }
    Ok(SourceClass {
        id,
        name: name.into(),
        generator: Generator::WavPool { dir: dir.to_path_buf(), files },
    })
}

/// Minimal RIFF/WAVE reader: PCM, 16-bit, mono, little-endian. Samples are
/// scaled to [-1, 1].
fn read_wav_mono16(path: &Path, expected_rate: u32) -> Result<Vec<f64>, MixGenError> {
    let bytes = std::fs::read(path)?;
    let malformed = |reason: &str| MixGenError::MalformedWav {
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("not a RIFF/WAVE file"));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let chunk_id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = pos + 8 + size;
        if body_end > bytes.len() {
            return Err(malformed("truncated chunk"));
        }
        let body = &bytes[pos + 8..body_end];
        match chunk_id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(malformed("fmt chunk too short"));
                }
                fmt = Some((
                    u16::from_le_bytes(body[0..2].try_into().unwrap()),
                    u16::from_le_bytes(body[2..4].try_into().unwrap()),
                    u32::from_le_bytes(body[4..8].try_into().unwrap()),
                    u16::from_le_bytes(body[14..16].try_into().unwrap()),
                ));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_end + (size & 1); // chunks are word-aligned
    }
    let (format, channels, rate, bits) = fmt.ok_or_else(|| malformed("missing fmt chunk"))?;
    if format != 1 {
        return Err(malformed("not PCM"));
    }
    if channels != 1 {
        return Err(malformed("not mono"));
    }
    if bits != 16 {
        return Err(malformed("not 16-bit"));
    }
    if rate != expected_rate {
        return Err(MixGenError::SampleRateMismatch {
            path: path.to_path_buf(),
            found: rate,
            expected: expected_rate,
        });
    }
    let data = data.ok_or_else(|| malformed("missing data chunk"))?;
    if data.is_empty() {
        return Err(malformed("empty data chunk"));
    }
    Ok(data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
        .collect())
}
