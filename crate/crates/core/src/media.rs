//! Wave-speed models and random initial pulses.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, WaveField};
use crate::io::FieldFile;
use crate::solver::{Discretization, Medium};

/// `c(x, y) = 0.7 - 0.3 cos(pi x)`.
pub fn waveguide_speed(x: f64, _y: f64) -> f64 {
    0.7 - 0.3 * (PI * x).cos()
}

/// `c(x, y) = 0.7 + 0.05 y + 0.1` inside the box `0.2 < x < 0.6, 0.4 < y < 0.6`.
pub fn inclusion_speed(x: f64, y: f64) -> f64 {
    let inside = x > 0.2 && x < 0.6 && y > 0.4 && y < 0.6;
    0.7 + 0.05 * y + if inside { 0.1 } else { 0.0 }
}

pub fn synth_waveguide_on(grid: GridSpec) -> Result<Medium> {
    Medium::new(ScalarField::from_fn(grid, waveguide_speed))
}

pub fn synth_inclusion_on(grid: GridSpec) -> Result<Medium> {
    Medium::new(ScalarField::from_fn(grid, inclusion_speed))
}

/// Waveguide medium on the default fine grid.
pub fn synth_waveguide() -> Medium {
    synth_waveguide_on(Discretization::default().fine_grid()).expect("waveguide speed is positive")
}

/// Inclusion medium on the default fine grid.
pub fn synth_inclusion() -> Medium {
    synth_inclusion_on(Discretization::default().fine_grid()).expect("inclusion speed is positive")
}

/// Rectangular velocity model; pixel `(col, row)` is stored at `row * width + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 || values.len() != width * height {
            return Err(Error::Shape(format!("{} values for a {width}x{height} raster", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Domain(format!("raster speeds must be positive, found {v}")));
        }
        Ok(Self { width, height, values })
    }

    pub fn constant(width: usize, height: usize, c: f64) -> Result<Self> {
        Self::new(width, height, vec![c; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pixel(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Bilinear interpolation at fractional pixel coordinates.
    pub fn sample(&self, px: f64, py: f64) -> f64 {
        let i0 = (px.floor().max(0.0) as usize).min(self.width - 2);
        let j0 = (py.floor().max(0.0) as usize).min(self.height - 2);
        let (fx, fy) = (px - i0 as f64, py - j0 as f64);
        let a = self.pixel(i0, j0) * (1.0 - fx) + self.pixel(i0 + 1, j0) * fx;
        let b = self.pixel(i0, j0 + 1) * (1.0 - fx) + self.pixel(i0 + 1, j0 + 1) * fx;
        a * (1.0 - fy) + b * fy
    }

    pub fn from_field_file(f: &FieldFile) -> Result<Self> {
        if f.channels != 1 || f.shape.len() != 2 {
            return Err(Error::Format(format!(
                "raster needs one channel of rank 2, got {} channel(s) of shape {:?}",
                f.channels, f.shape
            )));
        }
        Self::new(f.shape[0], f.shape[1], f.data.clone())
    }

    pub fn to_field_file(&self) -> FieldFile {
        FieldFile::new(1, vec![self.width, self.height], self.values.clone()).expect("consistent raster")
    }
}

/// Layered, faulted velocity model used in place of field-survey rasters.
///
/// Speeds grow with depth from about 1.5 to 5.5 through wavy layers, a few
/// slanted normal faults offset the layering, and some fast lenses are mixed in.
pub fn synthetic_layered_raster(width: usize, height: usize, seed: u64) -> Result<Raster> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_layers = rng.random_range(10..18);
    let mut tops: Vec<f64> = (0..n_layers).map(|_| rng.random_range(0.0..1.0)).collect();
    tops.sort_by(f64::total_cmp);
    let speeds: Vec<f64> =
        (0..=n_layers).map(|l| 1.5 + 3.6 * l as f64 / n_layers as f64 + rng.random_range(-0.25..0.25)).collect();
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.random_range(0.01..0.05), rng.random_range(1.0..6.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    // (x position at top, slope dx/dz, vertical throw)
    let faults: Vec<(f64, f64, f64)> = (0..rng.random_range(2..5))
        .map(|_| (rng.random_range(0.1..0.9), rng.random_range(-0.6..0.6), rng.random_range(0.03..0.12)))
        .collect();
    let lenses: Vec<(f64, f64, f64, f64, f64)> = (0..rng.random_range(2..6))
        .map(|_| {
            (
                rng.random_range(0.0..1.0),
                rng.random_range(0.3..0.95),
                rng.random_range(0.04..0.15),
                rng.random_range(0.01..0.04),
                rng.random_range(0.3..1.0),
            )
        })
        .collect();
    let mut values = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let x = col as f64 / (width - 1) as f64;
            let z = row as f64 / (height - 1) as f64;
            let mut depth = z + waves.iter().map(|&(a, k, ph)| a * (2.0 * PI * k * x + ph).sin()).sum::<f64>();
            for &(x0, slope, throw) in &faults {
                if x > x0 + slope * z {
                    depth -= throw;
                }
            }
            let layer = tops.iter().filter(|&&t| depth > t).count();
            let mut c = speeds[layer];
            for &(lx, lz, rx, rz, dc) in &lenses {
                let r2 = ((x - lx) / rx).powi(2) + ((z - lz) / rz).powi(2);
                if r2 < 1.0 {
                    c += dc * (1.0 - r2);
                }
            }
            values.push(c.clamp(1.2, 5.8));
        }
    }
    Raster::new(width, height, values)
}

/// Rotated square window of a raster, in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropSpec {
    pub center: (f64, f64),
    pub side: f64,
    pub angle: f64,
}

impl CropSpec {
    fn corners(&self) -> [(f64, f64); 4] {
        let (s, c) = self.angle.sin_cos();
        let r = self.side / 2.0;
        [(-r, -r), (r, -r), (r, r), (-r, r)]
            .map(|(a, b)| (self.center.0 + c * a - s * b, self.center.1 + s * a + c * b))
    }

    fn fits(&self, raster: &Raster) -> bool {
        let tol = 1e-9;
        self.side > 0.0
            && self.corners().iter().all(|&(x, y)| {
                x >= -tol && y >= -tol && x <= (raster.width - 1) as f64 + tol && y <= (raster.height - 1) as f64 + tol
            })
    }
}

/// Result of cropping: the medium and the divisor that was applied.
#[derive(Debug, Clone)]
pub struct Crop {
    pub medium: Medium,
    pub spec: CropSpec,
    pub divisor: u32,
}

/// Smallest positive integer `d` such that `c_max / d` satisfies both CFL bounds.
pub fn stability_divisor(c_max: f64, disc: &Discretization) -> u32 {
    let limit = disc.max_stable_speed();
    (c_max / limit).ceil().max(1.0) as u32
}

/// Resamples the rotated square onto the fine grid and rescales it by the
/// minimal stabilizing integer.
pub fn crop_medium(raster: &Raster, spec: CropSpec, disc: &Discretization) -> Result<Crop> {
    if !spec.fits(raster) {
        return Err(Error::Region(format!("crop {spec:?} leaves the {}x{} raster", raster.width, raster.height)));
    }
    let grid = disc.fine_grid();
    let (s, c) = spec.angle.sin_cos();
    let half = spec.side / 2.0;
    let field = ScalarField::from_fn(grid, |x, y| {
        let (a, b) = (x * half, y * half);
        raster.sample(spec.center.0 + c * a - s * b, spec.center.1 + s * a + c * b)
    });
    let divisor = stability_divisor(field.max(), disc);
    let medium = Medium::new(field.scaled(1.0 / divisor as f64))?;
    Ok(Crop { medium, spec, divisor })
}

/// Draws a random window (side between 20% and 60% of the shorter raster
/// edge, any rotation) and crops it.
pub fn random_crop<R: Rng + ?Sized>(raster: &Raster, disc: &Discretization, rng: &mut R) -> Result<Crop> {
    let short = raster.width.min(raster.height) as f64 - 1.0;
    let side = rng.random_range(0.2..0.6) * short;
    let angle = rng.random_range(0.0..2.0 * PI);
    let extent = 0.5 * side * (angle.cos().abs() + angle.sin().abs());
    let cx = rng.random_range(extent..(raster.width as f64 - 1.0 - extent));
    let cy = rng.random_range(extent..(raster.height as f64 - 1.0 - extent));
    crop_medium(raster, CropSpec { center: (cx, cy), side, angle }, disc)
}

/// Which wave-speed model to build.
#[derive(Debug, Clone, PartialEq)]
pub enum MediumKind {
    Waveguide,
    Inclusion,
    Raster(Raster),
}

/// Recipe for a medium: a model plus a minimum integer divisor.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumSource {
    pub kind: MediumKind,
    pub scale_divisor: u32,
}

impl MediumSource {
    pub fn new(kind: MediumKind, scale_divisor: u32) -> Result<Self> {
        if scale_divisor == 0 {
            return Err(Error::Parameter("scale divisor must be a positive integer".into()));
        }
        Ok(Self { kind, scale_divisor })
    }

    /// Builds a medium on the fine grid; raster sources draw a random crop.
    pub fn build<R: Rng + ?Sized>(&self, disc: &Discretization, rng: &mut R) -> Result<Medium> {
        let c = match &self.kind {
            MediumKind::Waveguide => ScalarField::from_fn(disc.fine_grid(), waveguide_speed),
            MediumKind::Inclusion => ScalarField::from_fn(disc.fine_grid(), inclusion_speed),
            MediumKind::Raster(r) => random_crop(r, disc, rng)?.medium.fine().clone(),
        };
        Medium::new(c.scaled(1.0 / self.scale_divisor as f64))
    }
}

/// Gaussian pulse `exp(-|x - center|^2 / sigma^2)` at rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub center: (f64, f64),
    pub inv_sigma_sq: f64,
}

impl PulseSpec {
    pub fn new(center: (f64, f64), inv_sigma_sq: f64) -> Result<Self> {
        if !(inv_sigma_sq > 0.0 && inv_sigma_sq.is_finite()) {
            return Err(Error::Parameter(format!("1/sigma^2 must be positive, got {inv_sigma_sq}")));
        }
        if !(center.0.is_finite() && center.1.is_finite()) {
            return Err(Error::Parameter("pulse center must be finite".into()));
        }
        Ok(Self { center, inv_sigma_sq })
    }

    /// Pulse with width given as `1/sigma`.
    pub fn with_inv_sigma(center: (f64, f64), inv_sigma: f64) -> Result<Self> {
        Self::new(center, inv_sigma * inv_sigma)
    }

    /// Samples the pulse with periodic wrap; `v` is zero.
    pub fn field(&self, grid: GridSpec) -> WaveField {
        let wrap = |d: f64| d - 2.0 * ((d + 1.0) / 2.0).floor();
        let (cx, cy) = self.center;
        let u = if grid.dims() == 1 {
            ScalarField::from_fn(grid, |x, _| (-wrap(x - cx).powi(2) * self.inv_sigma_sq).exp())
        } else {
            ScalarField::from_fn(grid, |x, y| {
                (-(wrap(x - cx).powi(2) + wrap(y - cy).powi(2)) * self.inv_sigma_sq).exp()
            })
        };
        WaveField { u, v: ScalarField::zeros(grid) }
    }
}

/// Distribution of training pulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSampler {
    pub mean: f64,
    pub std_dev: f64,
    pub bounds: (f64, f64),
    /// Half-width of the square the center is drawn from; 0 pins it to the origin.
    pub center_radius: f64,
}

impl Default for PulseSampler {
    fn default() -> Self {
        Self { mean: 250.0, std_dev: 10.0, bounds: (200.0, 300.0), center_radius: 0.5 }
    }
}

impl PulseSampler {
    pub fn origin_centered() -> Self {
        Self { center_radius: 0.0, ..Self::default() }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PulseSpec> {
        let normal = Normal::new(self.mean, self.std_dev)
            .map_err(|e| Error::Parameter(format!("pulse width distribution: {e}")))?;
        let (lo, hi) = self.bounds;
        if !(lo < hi && self.mean > lo - 10.0 * self.std_dev && self.mean < hi + 10.0 * self.std_dev) {
            return Err(Error::Parameter("pulse width bounds exclude the distribution".into()));
        }
        let inv_sigma_sq = loop {
            let s = normal.sample(rng);
            if (lo..=hi).contains(&s) {
                break s;
            }
        };
        let r = self.center_radius;
        let center = if r > 0.0 { (rng.random_range(-r..r), rng.random_range(-r..r)) } else { (0.0, 0.0) };
        PulseSpec::new(center, inv_sigma_sq)
    }
}

/// Draws a training pulse on the default fine grid.
pub fn sample_pulse<R: Rng + ?Sized>(rng: &mut R) -> (WaveField, PulseSpec) {
    let spec = PulseSampler::default().draw(rng).expect("default sampler is valid");
    (spec.field(Discretization::default().fine_grid()), spec)
}
