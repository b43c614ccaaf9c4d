//! One-dimensional constant-medium dispersion analysis of the central
//! stencil, and the exact per-mode correction that maps the semi-discrete
//! (space-discrete, time-exact) evolution of energy components onto the
//! exact one.
//!
//! Per Fourier mode the energy components are carried in the real basis
//! `(q_hat, i p_hat)`, where the exact evolution is the rotation
//! `[[cos wt, sin wt], [-sin wt, cos wt]]` with `w = c k`. Using the signed
//! wavenumber covers both propagation directions: `w` is odd in `k`.

use std::f64::consts::PI;
use std::ops::Mul;

use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::spectral;

/// Parameters of one dispersion evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionQuery {
    pub c: f64,
    pub k: f64,
    pub dx: f64,
    pub t: f64,
}

impl DispersionQuery {
    pub fn new(c: f64, k: f64, dx: f64, t: f64) -> Result<Self> {
        if !(c > 0.0 && dx > 0.0 && t >= 0.0) {
            return Err(Error::Parameter(format!("need c > 0, dx > 0, t >= 0 (c={c}, dx={dx}, t={t})")));
        }
        check_resolved(k, dx)?;
        Ok(Self { c, k, dx, t })
    }

    pub fn symbol(&self) -> Result<Mat2> {
        correction_symbol(self.c, self.k, self.dx, self.t)
    }
}

/// Real 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    /// `[[cos a, sin a], [-sin a, cos a]]`.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Mat2([[c, s], [-s, c]])
    }

    pub fn det(&self) -> f64 {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn transpose(&self) -> Self {
        let m = self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn inverse(&self) -> Result<Self> {
        let d = self.det();
        if d.abs() < 1e-300 || !d.is_finite() {
            return Err(Error::Numeric(format!("singular 2x2 matrix (det = {d})")));
        }
        let m = self.0;
        Ok(Mat2([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut e = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                e = e.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        e
    }

    pub fn apply(&self, a: Complex64, b: Complex64) -> (Complex64, Complex64) {
        let m = self.0;
        (a * m[0][0] + b * m[0][1], a * m[1][0] + b * m[1][1])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

fn check_resolved(k: f64, dx: f64) -> Result<()> {
    if k.is_nan() || k.abs() * dx >= PI {
        return Err(Error::Domain(format!("wavenumber {k} is aliased at dx = {dx} (|k| dx >= pi)")));
    }
    Ok(())
}

/// `w(c, k) = c k`.
pub fn omega_exact(c: f64, k: f64) -> f64 {
    c * k
}

/// Semi-discrete frequency `(2c/dx) sin(k dx / 2)` of the central stencil.
pub fn omega_semidiscrete(c: f64, k: f64, dx: f64) -> Result<f64> {
    check_resolved(k, dx)?;
    Ok(2.0 * c / dx * (0.5 * k * dx).sin())
}

/// Truncated expansion `c k (1 - (k dx)^2/24 + (k dx)^4/1920)`.
pub fn omega_semidiscrete_series(c: f64, k: f64, dx: f64) -> f64 {
    let kd2 = (k * dx).powi(2);
    c * k * (1.0 - kd2 / 24.0 + kd2 * kd2 / 1920.0)
}

/// Absolute phase-rate error `c k - w_dx(c, k)`.
pub fn dispersion_error(c: f64, k: f64, dx: f64) -> Result<f64> {
    Ok(omega_exact(c, k) - omega_semidiscrete(c, k, dx)?)
}

/// Relative error `1 - w_dx / w`, defined as 0 at `k = 0`.
pub fn relative_dispersion_error(c: f64, k: f64, dx: f64) -> Result<f64> {
    let w_dx = omega_semidiscrete(c, k, dx)?;
    if k == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - w_dx / omega_exact(c, k))
}

/// Exact evolution of `(q_hat, i p_hat)`: rotation by `c k t`.
pub fn exact_evolution(c: f64, k: f64, t: f64) -> Mat2 {
    Mat2::rotation(omega_exact(c, k) * t)
}

/// Semi-discrete evolution of `(q_hat, i p_hat)` with the relative error `eps`:
/// `[[cos, sin/(1-eps)], [-(1-eps) sin, cos]]` at angle `w_dx t`.
pub fn semidiscrete_evolution(c: f64, k: f64, dx: f64, t: f64) -> Result<Mat2> {
    let eps = relative_dispersion_error(c, k, dx)?;
    let (s, co) = (omega_semidiscrete(c, k, dx)? * t).sin_cos();
    Ok(Mat2([[co, s / (1.0 - eps)], [-(1.0 - eps) * s, co]]))
}

/// Ideal correction `R(w t) M^{-1}` taking semi-discrete to exact evolution.
pub fn correction_symbol(c: f64, k: f64, dx: f64, t: f64) -> Result<Mat2> {
    let m = semidiscrete_evolution(c, k, dx, t)?;
    Ok(exact_evolution(c, k, t) * m.inverse()?)
}

fn apply_symbol_1d(
    q: &ScalarField,
    p: &ScalarField,
    symbol: impl Fn(f64) -> Result<Mat2>,
) -> Result<(ScalarField, ScalarField)> {
    let grid = q.grid();
    if grid.dims() != 1 {
        return Err(Error::Shape("expected 1D energy components".into()));
    }
    q.check_same_grid(p)?;
    let n = grid.n();
    let q_hat = spectral::forward(q);
    let p_hat = spectral::forward(p);
    let i = Complex64::new(0.0, 1.0);
    let mut q_out = vec![Complex64::new(0.0, 0.0); n];
    let mut p_out = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..n {
        let k = spectral::derivative_wavenumber(m, n);
        if m == n / 2 {
            // unmatched Nyquist mode is not resolved; pass through
            q_out[m] = q_hat[m];
            p_out[m] = p_hat[m];
            continue;
        }
        let sym = symbol(k)?;
        let (a, b) = sym.apply(q_hat[m], i * p_hat[m]);
        q_out[m] = a;
        p_out[m] = -i * b;
    }
    Ok((spectral::inverse(q_out, grid), spectral::inverse(p_out, grid)))
}

/// Corrects coarse semi-discrete energy components `(q, p)` evolved over `t`
/// in a constant medium by applying the correction symbol mode by mode.
pub fn correct_coarse_1d(q: &ScalarField, p: &ScalarField, c: f64, t: f64) -> Result<(ScalarField, ScalarField)> {
    let dx = q.grid().h();
    apply_symbol_1d(q, p, |k| correction_symbol(c, k, dx, t))
}

/// Closed-form exact evolution of 1D energy components.
pub fn evolve_exact_1d(q: &ScalarField, p: &ScalarField, c: f64, t: f64) -> Result<(ScalarField, ScalarField)> {
    apply_symbol_1d(q, p, |k| Ok(exact_evolution(c, k, t)))
}

/// Closed-form semi-discrete evolution of 1D energy components.
pub fn evolve_semidiscrete_1d(q: &ScalarField, p: &ScalarField, c: f64, t: f64) -> Result<(ScalarField, ScalarField)> {
    let dx = q.grid().h();
    apply_symbol_1d(q, p, |k| semidiscrete_evolution(c, k, dx, t))
}

/// One row of the dispersion report.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DispersionRow {
    pub k: f64,
    pub omega_exact: f64,
    pub omega_semidiscrete: f64,
    pub epsilon: f64,
    pub s00: f64,
    pub s01: f64,
    pub s10: f64,
    pub s11: f64,
}

/// Samples `k = j * pi / (dx * samples)` for `j = 0..samples`.
pub fn dispersion_table(c: f64, dx: f64, t: f64, samples: usize) -> Result<Vec<DispersionRow>> {
    (0..samples)
        .map(|j| {
            let k = j as f64 * PI / (dx * samples as f64);
            let s = correction_symbol(c, k, dx, t)?.0;
            Ok(DispersionRow {
                k,
                omega_exact: omega_exact(c, k),
                omega_semidiscrete: omega_semidiscrete(c, k, dx)?,
                epsilon: dispersion_error(c, k, dx)?,
                s00: s[0][0],
                s01: s[0][1],
                s10: s[1][0],
                s11: s[1][1],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    const DX: f64 = 2.0 / 64.0;

    #[test]
    fn exact_frequency() {
        assert_eq!(omega_exact(1.0, 0.0), 0.0);
        assert!((omega_exact(2.0, PI) - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn semidiscrete_converges_to_exact_at_second_order() {
        assert_eq!(omega_semidiscrete(1.0, 0.0, DX).unwrap(), 0.0);
        let (c, k) = (1.3, 7.0);
        let e1 = (omega_exact(c, k) - omega_semidiscrete(c, k, 0.02).unwrap()).abs();
        let e2 = (omega_exact(c, k) - omega_semidiscrete(c, k, 0.01).unwrap()).abs();
        assert!((e1 / e2 - 4.0).abs() < 0.01, "ratio {}", e1 / e2);
        assert!((omega_semidiscrete(c, k, 1e-6).unwrap() - c * k).abs() < 1e-9);
    }

    #[test]
    fn closed_form_matches_truncated_series() {
        let (c, k) = (1.0, PI);
        let diff = (omega_semidiscrete(c, k, DX).unwrap() - omega_semidiscrete_series(c, k, DX)).abs();
        assert!(diff <= c * k * (k * DX).powi(6));
    }

    #[test]
    fn aliased_wavenumber_is_rejected() {
        assert!(matches!(omega_semidiscrete(1.0, PI / DX, DX), Err(Error::Domain(_))));
        assert!(dispersion_error(1.0, -PI / DX * 1.01, DX).is_err());
    }

    #[test]
    fn dispersion_error_leading_term_and_monotonicity() {
        assert_eq!(dispersion_error(1.0, 0.0, DX).unwrap(), 0.0);
        let (c, k) = (0.8, 1e-2);
        let ratio = dispersion_error(c, k, DX).unwrap() / (c * k.powi(3) * DX * DX);
        assert!((ratio - 1.0 / 24.0).abs() < 1e-6, "ratio {ratio}");
        let mut prev = 0.0;
        for j in 1..200 {
            let k = j as f64 / 200.0 * PI / DX * 0.999;
            let e = dispersion_error(1.0, k, DX).unwrap();
            assert!(e > prev);
            prev = e;
        }
    }

    #[test]
    fn symbol_is_identity_without_dispersion_or_time() {
        assert!(correction_symbol(1.0, 4.0 * PI, DX, 0.0).unwrap().max_abs_diff(&Mat2::IDENTITY) < 1e-15);
        assert!(correction_symbol(1.0, 4.0 * PI, 1e-7, 0.3).unwrap().max_abs_diff(&Mat2::IDENTITY) < 1e-9);
    }

    #[test]
    fn symbol_matches_direct_two_by_two_algebra() {
        let (c, k, t) = (1.0, 4.0 * PI, 0.1);
        // oracle: explicit cofactor inverse of the coarse matrix written out by hand
        let eps = 1.0 - (2.0 / DX * (k * DX / 2.0).sin()) / k;
        let a = 2.0 / DX * (k * DX / 2.0).sin() * t;
        let m = [[a.cos(), a.sin() / (1.0 - eps)], [-(1.0 - eps) * a.sin(), a.cos()]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let minv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        let w = c * k * t;
        let r = [[w.cos(), w.sin()], [-w.sin(), w.cos()]];
        let mut expected = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                expected[i][j] = r[i][0] * minv[0][j] + r[i][1] * minv[1][j];
            }
        }
        let sym = correction_symbol(c, k, DX, t).unwrap();
        assert!(sym.max_abs_diff(&Mat2(expected)) < 1e-14);
        // leading behaviour: rotation by (w - w_dx) t plus O(eps)
        let lead = Mat2::rotation(dispersion_error(c, k, DX).unwrap() * t);
        assert!(sym.max_abs_diff(&lead) <= 2.0 * eps);
    }

    #[test]
    fn expansion_remainder_is_first_order_in_eps() {
        let (c, k, t) = (1.0, 4.0 * PI, 0.1);
        let remainder = |dx: f64| {
            let sym = correction_symbol(c, k, dx, t).unwrap();
            let lead = Mat2::rotation(dispersion_error(c, k, dx).unwrap() * t);
            sym.max_abs_diff(&lead) / relative_dispersion_error(c, k, dx).unwrap()
        };
        let (r1, r2) = (remainder(DX), remainder(DX / 4.0));
        assert!(r1 < 1.0 && r2 < 1.0);
        assert!((r1 - r2).abs() < 0.1);
    }

    #[test]
    fn matrix_identities_hold_over_a_sweep() {
        for i in 0..10 {
            for j in 0..10 {
                let c = 0.2 + 0.3 * i as f64;
                let k = -90.0 + 20.0 * j as f64;
                let t = 0.05 * (i + j) as f64;
                let r = exact_evolution(c, k, t);
                let m = semidiscrete_evolution(c, k, DX, t).unwrap();
                let sym = correction_symbol(c, k, DX, t).unwrap();
                assert!((sym * m).max_abs_diff(&r) < 1e-12);
                assert!((r.transpose() * r).max_abs_diff(&Mat2::IDENTITY) < 1e-12);
                assert!((m.det() - 1.0).abs() < 1e-12);
                assert!(relative_dispersion_error(c, k.abs(), DX).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let g = GridSpec::line(64).unwrap();
        let z = ScalarField::zeros(g);
        let (q, p) = correct_coarse_1d(&z, &z, 1.0, 0.5).unwrap();
        assert_eq!(q.max_abs(), 0.0);
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn single_mode_is_fully_repaired() {
        let g = GridSpec::line(64).unwrap();
        let (c, t, kw) = (1.0, 0.5, 9.0 * PI);
        let w_dx = omega_semidiscrete(c, kw, g.h()).unwrap();
        // u = cos(k x) cos(w t), v = -w cos(k x) sin(w t); q = u_x, p = v / c
        let q = ScalarField::from_fn(g, |x, _| -kw * (kw * x).sin() * (w_dx * t).cos());
        let p = ScalarField::from_fn(g, |x, _| -w_dx * (kw * x).cos() * (w_dx * t).sin() / c);
        let w = c * kw;
        let q_exact = ScalarField::from_fn(g, |x, _| -kw * (kw * x).sin() * (w * t).cos());
        let p_exact = ScalarField::from_fn(g, |x, _| -w * (kw * x).cos() * (w * t).sin() / c);
        let (qc, pc) = correct_coarse_1d(&q, &p, c, t).unwrap();
        assert!(qc.max_abs_diff(&q_exact) < 1e-8);
        assert!(pc.max_abs_diff(&p_exact) < 1e-8);
        assert!(q.max_abs_diff(&q_exact) > 1.0);
    }

    #[test]
    fn closed_form_propagators_match_physical_space_formulas() {
        let g = GridSpec::line(64).unwrap();
        let (c, t, kw) = (0.7, 0.3, -5.0 * PI);
        let q0 = ScalarField::from_fn(g, |x, _| -kw * (kw * x).sin());
        let p0 = ScalarField::zeros(g);
        let (q, p) = evolve_semidiscrete_1d(&q0, &p0, c, t).unwrap();
        let w_dx = omega_semidiscrete(c, kw, g.h()).unwrap();
        let q_ref = ScalarField::from_fn(g, |x, _| -kw * (kw * x).sin() * (w_dx * t).cos());
        let p_ref = ScalarField::from_fn(g, |x, _| -w_dx * (kw * x).cos() * (w_dx * t).sin() / c);
        assert!(q.max_abs_diff(&q_ref) < 1e-10);
        assert!(p.max_abs_diff(&p_ref) < 1e-10);
        let (qe, _) = evolve_exact_1d(&q0, &p0, c, t).unwrap();
        let q_ex = ScalarField::from_fn(g, |x, _| -kw * (kw * x).sin() * (c * kw * t).cos());
        assert!(qe.max_abs_diff(&q_ex) < 1e-10);
    }

    #[test]
    fn table_has_requested_rows() {
        let rows = dispersion_table(1.0, DX, 0.1, 16).unwrap();
        assert_eq!(rows.len(), 16);
        assert_eq!(rows[0].epsilon, 0.0);
        for r in &rows {
            let eps = dispersion_error(1.0, r.k, DX).unwrap();
            assert!((r.epsilon - eps).abs() < 1e-12);
        }
    }
}
