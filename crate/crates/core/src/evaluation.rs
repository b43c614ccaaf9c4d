//! One-step error sweeps over constant media and Gaussian pulses.

use serde::Serialize;

use crate::energy::{rel_energy_error, wave_energy, EnergyField};
use crate::error::Result;
use crate::grid::WaveField;
use crate::jnet::{enhanced_step_with, JNet, INPUT_CHANNELS};
use crate::media::PulseSpec;
use crate::solver::{Discretization, Medium};

/// Which coarse-to-fine step is being judged.
#[derive(Debug, Clone, Copy)]
pub enum Stepper<'a> {
    /// Cubic interpolation of the coarse solution.
    Interpolation,
    Enhanced(&'a JNet),
}

/// One coarse-to-fine step of `w` under `stepper`.
pub fn coarse_to_fine(
    disc: &Discretization,
    stepper: Stepper<'_>,
    w: &WaveField,
    m: &Medium,
    dt_star: f64,
) -> Result<WaveField> {
    match stepper {
        Stepper::Interpolation => disc.coarse_propagate(&w.restricted()?, m, dt_star)?.prolonged(),
        Stepper::Enhanced(net) => enhanced_step_with(disc, w, m, net, dt_star),
    }
}

/// Relative energy error after one step against the fine solver.
pub fn one_step_error(
    disc: &Discretization,
    stepper: Stepper<'_>,
    w: &WaveField,
    m: &Medium,
    dt_star: f64,
) -> Result<f64> {
    let reference = disc.fine_propagate(w, m, dt_star)?;
    rel_energy_error(&coarse_to_fine(disc, stepper, w, m, dt_star)?, &reference, m.fine())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    pub c: f64,
    pub inv_sigma: f64,
    pub error: f64,
}

/// Error of one step for a centered pulse `exp(-(inv_sigma r)^2)` in the
/// constant medium `c`, for every pair in the two lists.
pub fn error_table(
    disc: &Discretization,
    stepper: Stepper<'_>,
    speeds: &[f64],
    inv_sigmas: &[f64],
    dt_star: f64,
) -> Result<Vec<ErrorRow>> {
    let mut rows = Vec::with_capacity(speeds.len() * inv_sigmas.len());
    for &c in speeds {
        let m = Medium::constant(disc.fine_grid(), c)?;
        for &inv_sigma in inv_sigmas {
            let w = PulseSpec::with_inv_sigma((0.0, 0.0), inv_sigma)?.field(disc.fine_grid());
            rows.push(ErrorRow { c, inv_sigma, error: one_step_error(disc, stepper, &w, &m, dt_star)? });
        }
    }
    Ok(rows)
}

/// Energy the network produces from a zero wave field in the constant
/// medium `c`.
pub fn phantom_energy(disc: &Discretization, net: &JNet, c: f64) -> Result<f64> {
    let m = Medium::constant(disc.fine_grid(), c)?;
    let n = disc.coarse_n;
    let mut x = vec![0.0; INPUT_CHANNELS * n * n];
    x[3 * n * n..].fill(c);
    let e = EnergyField::from_flat(disc.fine_grid(), &net.forward(&x)?)?;
    wave_energy(&crate::energy::lambda_pinv(&e, m.fine(), 0.0)?, m.fine())
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}
