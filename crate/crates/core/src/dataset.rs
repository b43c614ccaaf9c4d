//! Training pairs `(Lambda G R u, c) -> Lambda F u` and their on-disk format.
//!
//! File layout, little-endian: magic `PWDS`, version `u32`, record count
//! `u64`, coarse size `u32`, fine size `u32`, `dt_star` `f64`, seed `u64`,
//! fine `dt` `f64`, coarse `dt` `f64`, one `u64` byte offset per record, then
//! the records. A record is the medium id `u64`, the `4 x nc x nc` input and
//! the `3 x nf x nf` target, all `f64`, channel-major.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{energy_norm, wave_energy, EnergyField};
use crate::error::{Error, Result};
use crate::grid::WaveField;
use crate::io::Reader;
use crate::jnet::{input_tensor, target_tensor, INPUT_CHANNELS, OUTPUT_CHANNELS};
use crate::media::{random_crop, synthetic_layered_raster, PulseSampler, Raster};
use crate::parareal::{parareal, PararealConfig, Variant, BLOWUP_FACTOR};
use crate::solver::{Discretization, Medium};
use crate::spectral;

const MAGIC: &[u8; 4] = b"PWDS";
const VERSION: u32 = 1;
const HEADER_FIXED: usize = 56;

/// One input/target pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub medium_id: u64,
    /// `(qx, qy, p, c)` on the coarse grid.
    pub x: Vec<f64>,
    /// `(qx, qy, p)` on the fine grid.
    pub y: Vec<f64>,
}

/// Records plus the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dt_star: f64,
    pub seed: u64,
    pub disc: Discretization,
    pub records: Vec<TrainingExample>,
}

fn pair(disc: &Discretization, m: &Medium, u: &WaveField, dt_star: f64, medium_id: u64) -> Result<TrainingExample> {
    let g = disc.coarse_propagate(&u.restricted()?, m, dt_star)?;
    let f = disc.fine_propagate(u, m, dt_star)?;
    Ok(TrainingExample { medium_id, x: input_tensor(&g, m.coarse())?, y: target_tensor(&f, m.fine())? })
}

fn check_energy(w: &WaveField, m: &Medium, e0: f64, what: &str) -> Result<()> {
    let e = wave_energy(w, m.fine())?;
    if !e.is_finite() || e > BLOWUP_FACTOR * e0.max(f64::MIN_POSITIVE) {
        return Err(Error::BlowUp(format!("{what}: energy grew from {e0:e} to {e:e}")));
    }
    Ok(())
}

/// Pairs along the fine trajectory `w[n+1] = F w[n]`, `n = 0..n_steps-1`.
pub fn gen_trajectory_pairs(
    disc: &Discretization,
    m: &Medium,
    w0: &WaveField,
    n_steps: usize,
    dt_star: f64,
    medium_id: u64,
) -> Result<Vec<TrainingExample>> {
    let e0 = wave_energy(w0, m.fine())?;
    let mut w = w0.clone();
    let mut out = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let next = disc.fine_propagate(&w, m, dt_star)?;
        check_energy(&next, m, e0, &format!("trajectory step {n}"))?;
        let g = disc.coarse_propagate(&w.restricted()?, m, dt_star)?;
        out.push(TrainingExample { medium_id, x: input_tensor(&g, m.coarse())?, y: target_tensor(&next, m.fine())? });
        w = next;
    }
    Ok(out)
}

/// Pairs at every Procrustes parareal iterate `u[k][n]`, `k <= k_max`,
/// `n = 0..=n_steps`. Repeated iterates are kept.
pub fn gen_procrustes_pairs(
    disc: &Discretization,
    m: &Medium,
    w0: &WaveField,
    n_steps: usize,
    k_max: usize,
    dt_star: f64,
    medium_id: u64,
) -> Result<Vec<TrainingExample>> {
    let cfg = PararealConfig { disc: *disc, ..PararealConfig::new(dt_star, n_steps, k_max) };
    let run = parareal(w0, m, Variant::Procrustes, &cfg)?;
    if let Some(k) = run.blowup {
        return Err(Error::BlowUp(format!("Procrustes iteration {k} diverged")));
    }
    let e0 = wave_energy(w0, m.fine())?;
    let snapshots: Vec<&WaveField> = run.snapshots.iter().flatten().collect();
    snapshots
        .par_iter()
        .map(|u| {
            check_energy(u, m, e0, "Procrustes snapshot")?;
            pair(disc, m, u, dt_star, medium_id)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetVariant {
    /// Fine trajectories.
    T,
    /// Procrustes parareal iterates.
    Tp,
}

/// Recipe for a dataset of random media and pulses.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub disc: Discretization,
    pub dt_star: f64,
    pub n_media: usize,
    pub n_steps: usize,
    pub k_max: usize,
    pub variant: DatasetVariant,
    pub seed: u64,
    pub sampler: PulseSampler,
    /// Velocity model to crop; a synthetic layered model is used when absent.
    pub raster: Option<Raster>,
}

impl GenConfig {
    pub fn new(dt_star: f64, n_media: usize, seed: u64) -> Self {
        Self {
            disc: Discretization::default(),
            dt_star,
            n_media,
            n_steps: 8,
            k_max: 4,
            variant: DatasetVariant::T,
            seed,
            sampler: PulseSampler::default(),
            raster: None,
        }
    }
}

/// Width and height of the synthetic model cropped when no raster is given.
pub const SYNTHETIC_RASTER_SIZE: (usize, usize) = (460, 150);

/// Medium and pulse for sample `index`, drawn from its own random stream.
pub fn sample_medium_and_pulse(cfg: &GenConfig, raster: &Raster, index: u64) -> Result<(Medium, WaveField)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index + 1);
    let crop = random_crop(raster, &cfg.disc, &mut rng)?;
    let pulse = cfg.sampler.draw(&mut rng)?;
    Ok((crop.medium, pulse.field(cfg.disc.fine_grid())))
}

/// Generates the dataset, one independent random stream per medium.
pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    cfg.disc.validate()?;
    if cfg.n_media == 0 || cfg.n_steps == 0 {
        return Err(Error::Parameter("a dataset needs at least one medium and one step".into()));
    }
    let synthetic;
    let raster = match &cfg.raster {
        Some(r) => r,
        None => {
            let (w, h) = SYNTHETIC_RASTER_SIZE;
            synthetic = synthetic_layered_raster(w, h, cfg.seed)?;
            &synthetic
        }
    };
    let chunks: Vec<Vec<TrainingExample>> = (0..cfg.n_media as u64)
        .into_par_iter()
        .map(|i| {
            let (m, w0) = sample_medium_and_pulse(cfg, raster, i)?;
            match cfg.variant {
                DatasetVariant::T => gen_trajectory_pairs(&cfg.disc, &m, &w0, cfg.n_steps, cfg.dt_star, i),
                DatasetVariant::Tp => gen_procrustes_pairs(&cfg.disc, &m, &w0, cfg.n_steps, cfg.k_max, cfg.dt_star, i),
            }
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        dt_star: cfg.dt_star,
        seed: cfg.seed,
        disc: cfg.disc,
        records: chunks.into_iter().flatten().collect(),
    })
}

/// Share of the energy of a fine target carried by modes with `|m_x| > cutoff`
/// or `|m_y| > cutoff`.
pub fn high_frequency_fraction(y: &[f64], n: usize, cutoff: usize) -> Result<f64> {
    let grid = crate::grid::GridSpec::square(n)?;
    let e = EnergyField::from_flat(grid, y)?;
    let (mut high, mut total) = (0.0, 0.0);
    for ch in e.channels() {
        for (idx, z) in spectral::forward(ch).iter().enumerate() {
            let mx = spectral::signed_mode(idx % n, n).unsigned_abs() as usize;
            let my = spectral::signed_mode(idx / n, n).unsigned_abs() as usize;
            let p = z.norm_sqr();
            total += p;
            if mx > cutoff || my > cutoff {
                high += p;
            }
        }
    }
    Ok(if total > 0.0 { high / total } else { 0.0 })
}

impl Dataset {
    fn coarse_len(&self) -> usize {
        INPUT_CHANNELS * self.disc.coarse_n * self.disc.coarse_n
    }

    fn fine_len(&self) -> usize {
        OUTPUT_CHANNELS * self.disc.fine_n * self.disc.fine_n
    }

    fn header_len(&self) -> usize {
        HEADER_FIXED + 8 * self.records.len()
    }

    fn record_len(&self) -> usize {
        8 + 8 * (self.coarse_len() + self.fine_len())
    }

    /// Byte offset of every record in the serialized form.
    pub fn offsets(&self) -> Vec<u64> {
        let (h, r) = (self.header_len(), self.record_len());
        (0..self.records.len()).map(|i| (h + i * r) as u64).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, rec) in self.records.iter().enumerate() {
            if rec.x.len() != self.coarse_len() || rec.y.len() != self.fine_len() {
                return Err(Error::Shape(format!("record {i} has the wrong tensor sizes")));
            }
            if rec.x.iter().chain(&rec.y).any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("record {i} contains non-finite values")));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.header_len() + self.records.len() * self.record_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.disc.coarse_n as u32).to_le_bytes());
        out.extend_from_slice(&(self.disc.fine_n as u32).to_le_bytes());
        out.extend_from_slice(&self.dt_star.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.disc.fine_dt.to_le_bytes());
        out.extend_from_slice(&self.disc.coarse_dt.to_le_bytes());
        for off in self.offsets() {
            out.extend_from_slice(&off.to_le_bytes());
        }
        for rec in &self.records {
            out.extend_from_slice(&rec.medium_id.to_le_bytes());
            for v in rec.x.iter().chain(&rec.y) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not a dataset file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let count = r.u64()? as usize;
        let coarse_n = r.u32()? as usize;
        let fine_n = r.u32()? as usize;
        let dt_star = r.f64()?;
        let seed = r.u64()?;
        let fine_dt = r.f64()?;
        let coarse_dt = r.f64()?;
        let disc = Discretization { fine_n, fine_dt, coarse_n, coarse_dt };
        disc.validate().map_err(|e| Error::Format(format!("dataset header: {e}")))?;
        let mut ds = Dataset { dt_star, seed, disc, records: Vec::new() };
        let rec_len = ds.record_len();
        let expected = count.checked_mul(rec_len + 8).and_then(|v| v.checked_add(HEADER_FIXED));
        if expected != Some(bytes.len()) {
            return Err(Error::Format(format!(
                "file holds {} bytes but the header describes {count} records ({} bytes)",
                bytes.len(),
                expected.map_or("overflowing".to_string(), |v| v.to_string())
            )));
        }
        let header_len = HEADER_FIXED + 8 * count;
        for i in 0..count {
            let off = r.u64()? as usize;
            if off != header_len + i * rec_len {
                return Err(Error::Format(format!(
                    "record {i} has offset {off}, expected {}",
                    header_len + i * rec_len
                )));
            }
        }
        let (cl, fl) = (ds.coarse_len(), ds.fine_len());
        ds.records.reserve(count);
        for _ in 0..count {
            let medium_id = r.u64()?;
            let x = r.f64s(cl)?;
            let y = r.f64s(fl)?;
            ds.records.push(TrainingExample { medium_id, x, y });
        }
        Ok(ds)
    }
}

pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    fs::write(path, ds.to_bytes()?)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    Dataset::from_bytes(&fs::read(path)?)
}

/// Energy norm of the fine target relative to that of the input field, used
/// to screen records for leaked instabilities.
pub fn target_to_input_energy_ratio(rec: &TrainingExample, disc: &Discretization) -> Result<f64> {
    let coarse = EnergyField::from_flat(disc.coarse_grid(), &rec.x[..3 * disc.coarse_grid().len()])?;
    let fine = EnergyField::from_flat(disc.fine_grid(), &rec.y)?;
    let ec = energy_norm(&coarse);
    let ef = energy_norm(&fine);
    Ok(if ec > 0.0 {
        ef / ec
    } else if ef == 0.0 {
        1.0
    } else {
        f64::INFINITY
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarField;
    use crate::media::PulseSpec;
    use rand::Rng;

    fn small_disc() -> Discretization {
        Discretization { fine_n: 32, fine_dt: 1.0 / 320.0, coarse_n: 16, coarse_dt: 1.0 / 40.0 }
    }

    fn random_dataset(count: usize) -> Dataset {
        let disc = small_disc();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let records = (0..count)
            .map(|i| TrainingExample {
                medium_id: i as u64 * 7,
                x: (0..4 * 256).map(|_| rng.random_range(-1.0..1.0)).collect(),
                y: (0..3 * 1024).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect();
        Dataset { dt_star: 0.2, seed: 99, disc, records }
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let ds = random_dataset(3);
        let bytes = ds.to_bytes().unwrap();
        let back = Dataset::from_bytes(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn truncation_and_count_mismatch_are_format_errors() {
        let bytes = random_dataset(3).to_bytes().unwrap();
        assert!(matches!(Dataset::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        let mut wrong = bytes.clone();
        wrong[8..16].copy_from_slice(&4u64.to_le_bytes());
        assert!(matches!(Dataset::from_bytes(&wrong), Err(Error::Format(_))));
        let mut magic = bytes;
        magic[0] = b'Q';
        assert!(matches!(Dataset::from_bytes(&magic), Err(Error::Format(_))));
    }

    #[test]
    fn zero_field_gives_zero_pairs() {
        let disc = small_disc();
        let m = Medium::constant(disc.fine_grid(), 1.0).unwrap();
        let recs = gen_trajectory_pairs(&disc, &m, &WaveField::zeros(disc.fine_grid()), 2, 0.2, 0).unwrap();
        assert_eq!(recs.len(), 2);
        for r in &recs {
            assert!(r.x[..3 * 256].iter().all(|&v| v == 0.0));
            assert!(r.x[3 * 256..].iter().all(|&v| v == 1.0));
            assert!(r.y.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_step_pair_matches_the_fine_solver() {
        let disc = small_disc();
        let g = disc.fine_grid();
        let m = Medium::new(ScalarField::from_fn(g, |x, _| 0.8 + 0.1 * x)).unwrap();
        let w0 = PulseSpec::new((0.1, -0.2), 30.0).unwrap().field(g);
        let recs = gen_trajectory_pairs(&disc, &m, &w0, 1, 0.2, 5).unwrap();
        assert_eq!(recs.len(), 1);
        let f = disc.fine_propagate(&w0, &m, 0.2).unwrap();
        assert_eq!(recs[0].y, target_tensor(&f, m.fine()).unwrap());
        assert_eq!(&recs[0].x[3 * 256..], m.coarse().values());
        assert_eq!(recs[0].medium_id, 5);
    }

    #[test]
    fn procrustes_pair_count() {
        let disc = small_disc();
        let g = disc.fine_grid();
        let m = Medium::constant(g, 0.9).unwrap();
        let w0 = PulseSpec::new((0.0, 0.0), 30.0).unwrap().field(g);
        for (n, k) in [(3, 0), (2, 2)] {
            let recs = gen_procrustes_pairs(&disc, &m, &w0, n, k, 0.2, 1).unwrap();
            assert_eq!(recs.len(), (k + 1) * (n + 1));
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let mut cfg = GenConfig::new(0.2, 2, 17);
        cfg.disc = small_disc();
        cfg.n_steps = 2;
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.records.len(), 4);
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
        cfg.seed = 18;
        assert_ne!(generate(&cfg).unwrap().records[0].y, a.records[0].y);
    }

    #[test]
    fn high_frequency_fraction_of_pure_modes() {
        let g = crate::grid::GridSpec::square(16).unwrap();
        let low = ScalarField::from_fn(g, |x, _| (std::f64::consts::PI * x).sin());
        let high = ScalarField::from_fn(g, |x, _| (7.0 * std::f64::consts::PI * x).sin());
        let z = ScalarField::zeros(g);
        let flat = |f: &ScalarField| [f.values(), z.values(), z.values()].concat();
        assert!(high_frequency_fraction(&flat(&low), 16, 4).unwrap() < 1e-20);
        assert!((high_frequency_fraction(&flat(&high), 16, 4).unwrap() - 1.0).abs() < 1e-12);
    }
}
