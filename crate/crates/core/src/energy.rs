//! Energy components `Lambda: (u, u_t) -> (grad u, u_t / c)`, the spectral
//! pseudo-inverse, and the discrete energy semi-norm.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, WaveField};
use crate::spectral::{self, derivative_wavenumber};

/// `(d/dx u, d/dy u, u_t / c)` on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyField {
    pub qx: ScalarField,
    pub qy: ScalarField,
    pub p: ScalarField,
}

impl EnergyField {
    pub fn new(qx: ScalarField, qy: ScalarField, p: ScalarField) -> Result<Self> {
        qx.check_same_grid(&qy)?;
        qx.check_same_grid(&p)?;
        Ok(Self { qx, qy, p })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { qx: ScalarField::zeros(grid), qy: ScalarField::zeros(grid), p: ScalarField::zeros(grid) }
    }

    pub fn grid(&self) -> GridSpec {
        self.qx.grid()
    }

    pub fn channels(&self) -> [&ScalarField; 3] {
        [&self.qx, &self.qy, &self.p]
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self { qx: self.qx.sub(&other.qx)?, qy: self.qy.sub(&other.qy)?, p: self.p.sub(&other.p)? })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { qx: self.qx.scaled(alpha), qy: self.qy.scaled(alpha), p: self.p.scaled(alpha) }
    }

    /// Channels concatenated in the order `(qx, qy, p)`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.grid().len());
        for ch in self.channels() {
            out.extend_from_slice(ch.values());
        }
        out
    }

    pub fn from_flat(grid: GridSpec, data: &[f64]) -> Result<Self> {
        let len = grid.len();
        if data.len() != 3 * len {
            return Err(Error::Shape(format!("expected {} values, got {}", 3 * len, data.len())));
        }
        Ok(Self {
            qx: ScalarField::from_raw(grid, data[..len].to_vec()),
            qy: ScalarField::from_raw(grid, data[len..2 * len].to_vec()),
            p: ScalarField::from_raw(grid, data[2 * len..].to_vec()),
        })
    }

    /// Spectral curl `d/dx qy - d/dy qx`.
    pub fn curl(&self) -> Result<ScalarField> {
        let (_, dqx_dy) = spectral::spectral_grad(&self.qx)?;
        let (dqy_dx, _) = spectral::spectral_grad(&self.qy)?;
        dqy_dx.sub(&dqx_dy)
    }
}

fn check_speed(c: &ScalarField) -> Result<()> {
    if let Some(bad) = c.values().iter().find(|v| v.is_nan() || **v <= 0.0) {
        return Err(Error::Domain(format!("wave speed must be positive, found {bad}")));
    }
    Ok(())
}

/// `Lambda_h w = (grad_h u, v / c)` with the spectral gradient.
pub fn lambda_map(w: &WaveField, c: &ScalarField) -> Result<EnergyField> {
    w.u.check_same_grid(c)?;
    check_speed(c)?;
    let (qx, qy) = spectral::spectral_grad(&w.u)?;
    let p = w.v.zip_map(c, |v, c| v / c)?;
    Ok(EnergyField { qx, qy, p })
}

/// Pseudo-inverse of [`lambda_map`].
///
/// `u` is recovered in Fourier space as `-i (xi . q) / |xi|^2` with the zero
/// mode set so that the samples of `u` sum to `c0`; `v = c p`. Modes whose
/// differentiation wavenumber vanishes (the mean and the unmatched Nyquist
/// modes) carry no gradient information and come back as zero, except the mean.
pub fn lambda_pinv(e: &EnergyField, c: &ScalarField, c0: f64) -> Result<WaveField> {
    let grid = e.grid();
    e.qx.check_same_grid(c)?;
    let n = grid.n();
    let qx = spectral::forward(&e.qx);
    let qy = spectral::forward(&e.qy);
    let spec: Vec<Complex64> = (0..grid.len())
        .map(|idx| {
            if idx == 0 {
                return Complex64::new(c0, 0.0);
            }
            let xi_x = derivative_wavenumber(idx % n, n);
            let xi_y = derivative_wavenumber(idx / n, n);
            let norm2 = xi_x * xi_x + xi_y * xi_y;
            if norm2 == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let dot = qx[idx] * xi_x + qy[idx] * xi_y;
            Complex64::new(0.0, -1.0) * dot / norm2
        })
        .collect();
    let u = spectral::inverse(spec, grid);
    let v = e.p.zip_map(c, |p, c| p * c)?;
    Ok(WaveField { u, v })
}

/// `sum (qx^2 + qy^2 + p^2) h^2`.
pub fn energy_norm(e: &EnergyField) -> f64 {
    let h = e.grid().h();
    let sq: f64 = e.channels().iter().map(|ch| ch.values().iter().map(|v| v * v).sum::<f64>()).sum();
    sq * h * h
}

/// Energy of a wave field, `energy_norm(lambda_map(w, c))`.
pub fn wave_energy(w: &WaveField, c: &ScalarField) -> Result<f64> {
    Ok(energy_norm(&lambda_map(w, c)?))
}

/// `E[Lambda(u - reference)] / E[Lambda reference]`.
pub fn rel_energy_error(u: &WaveField, reference: &WaveField, c: &ScalarField) -> Result<f64> {
    let denom = wave_energy(reference, c)?;
    if denom <= 0.0 {
        return Err(Error::Numeric("reference field has zero energy".into()));
    }
    Ok(wave_energy(&u.sub(reference)?, c)? / denom)
}

/// Same ratio computed directly on energy components.
pub fn rel_energy_error_components(e: &EnergyField, reference: &EnergyField) -> Result<f64> {
    let denom = energy_norm(reference);
    if denom <= 0.0 {
        return Err(Error::Numeric("reference field has zero energy".into()));
    }
    Ok(energy_norm(&e.sub(reference)?) / denom)
}
