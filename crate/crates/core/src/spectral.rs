//! FFT helpers on periodic grids.
//!
//! Transforms are unnormalized in the forward direction, so the zero mode of
//! a field equals the discrete sum of its samples.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_lines(data: &mut [Complex64], n: usize, inverse: bool) {
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    plan.process(data);
}

fn transpose(data: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..n {
            out[i * n + j] = data[j * n + i];
        }
    }
    out
}

fn transform(mut data: Vec<Complex64>, grid: GridSpec, inverse: bool) -> Vec<Complex64> {
    let n = grid.n();
    fft_lines(&mut data, n, inverse);
    if grid.dims() == 2 {
        let mut t = transpose(&data, n);
        fft_lines(&mut t, n, inverse);
        data = transpose(&t, n);
    }
    data
}

/// Forward transform of a real grid function (same indexing as the field).
pub fn forward(f: &ScalarField) -> Vec<Complex64> {
    let data = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(data, f.grid(), false)
}

/// Inverse transform, normalized; returns the real part and the largest
/// imaginary residue that was discarded.
pub fn inverse_with_residue(spec: Vec<Complex64>, grid: GridSpec) -> (ScalarField, f64) {
    let scale = 1.0 / grid.len() as f64;
    let data = transform(spec, grid, true);
    let mut residue = 0.0f64;
    let values = data
        .iter()
        .map(|z| {
            residue = residue.max((z.im * scale).abs());
            z.re * scale
        })
        .collect();
    (ScalarField::from_raw(grid, values), residue)
}

pub fn inverse(spec: Vec<Complex64>, grid: GridSpec) -> ScalarField {
    inverse_with_residue(spec, grid).0
}

/// Signed mode index for storage index `m` on an `n`-point axis.
pub fn signed_mode(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Angular wavenumber of storage index `m` (domain length 2, so `xi = pi * m`).
pub fn wavenumber(m: usize, n: usize) -> f64 {
    PI * signed_mode(m, n) as f64
}

/// Wavenumber used for differentiation: the unmatched Nyquist mode gets 0.
pub fn derivative_wavenumber(m: usize, n: usize) -> f64 {
    if n.is_multiple_of(2) && m == n / 2 {
        0.0
    } else {
        wavenumber(m, n)
    }
}

/// Fourier derivative along the given axis (0 = x, 1 = y).
fn derivative(f: &ScalarField, spec: &[Complex64], axis: usize) -> (ScalarField, f64) {
    let grid = f.grid();
    let n = grid.n();
    let out: Vec<Complex64> = spec
        .iter()
        .enumerate()
        .map(|(idx, z)| {
            let m = if axis == 0 { idx % n } else { idx / n };
            z * Complex64::new(0.0, derivative_wavenumber(m, n))
        })
        .collect();
    inverse_with_residue(out, grid)
}

/// Spectral gradient `(d/dx f, d/dy f)` of a 2D field.
pub fn spectral_grad(f: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    if f.grid().dims() != 2 {
        return Err(Error::Shape("spectral_grad expects a 2D field".into()));
    }
    let spec = forward(f);
    let (dx, _) = derivative(f, &spec, 0);
    let (dy, _) = derivative(f, &spec, 1);
    Ok((dx, dy))
}

/// Same as [`spectral_grad`] but also reports the largest discarded imaginary part.
pub fn spectral_grad_with_residue(f: &ScalarField) -> Result<(ScalarField, ScalarField, f64)> {
    if f.grid().dims() != 2 {
        return Err(Error::Shape("spectral_grad expects a 2D field".into()));
    }
    let spec = forward(f);
    let (dx, rx) = derivative(f, &spec, 0);
    let (dy, ry) = derivative(f, &spec, 1);
    Ok((dx, dy, rx.max(ry)))
}

/// Spectral derivative of a 1D field.
pub fn spectral_derivative_1d(f: &ScalarField) -> Result<ScalarField> {
    if f.grid().dims() != 1 {
        return Err(Error::Shape("spectral_derivative_1d expects a 1D field".into()));
    }
    let spec = forward(f);
    Ok(derivative(f, &spec, 0).0)
}
