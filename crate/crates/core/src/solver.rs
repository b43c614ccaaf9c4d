//! Central-in-space / central-in-time scheme in velocity-Verlet form and the
//! fine and coarse propagators built from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{restrict, GridSpec, ScalarField, WaveField};

/// Spatial step, time step, and number of substeps for one propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub h: f64,
    pub k: f64,
    pub substeps: usize,
}

impl StepParams {
    pub fn new(h: f64, k: f64, substeps: usize) -> Result<Self> {
        if !(h > 0.0 && k > 0.0 && h.is_finite() && k.is_finite()) {
            return Err(Error::Parameter(format!("need h > 0 and k > 0, got h={h}, k={k}")));
        }
        if substeps == 0 {
            return Err(Error::Parameter("substeps must be >= 1".into()));
        }
        Ok(Self { h, k, substeps })
    }
}

/// Stability bound on `c_max k / h` for the leapfrog scheme in `dims` dimensions.
pub fn cfl_bound(dims: usize) -> f64 {
    1.0 / (dims as f64).sqrt()
}

/// `1/sqrt(2) - c_max k / h`; negative means the 2D scheme is unstable.
pub fn cfl_margin(c_max: f64, p: &StepParams) -> f64 {
    cfl_bound(2) - c_max * p.k / p.h
}

/// Wave speed on the fine grid together with its restriction to the coarse grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Medium {
    c: ScalarField,
    c_coarse: ScalarField,
}

impl Medium {
    pub fn new(c: ScalarField) -> Result<Self> {
        if let Some(bad) = c.values().iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Domain(format!("wave speed must be positive and finite, found {bad}")));
        }
        let c_coarse = restrict(&c)?;
        Ok(Self { c, c_coarse })
    }

    pub fn constant(grid: GridSpec, c: f64) -> Result<Self> {
        Self::new(ScalarField::constant(grid, c))
    }

    pub fn fine(&self) -> &ScalarField {
        &self.c
    }

    pub fn coarse(&self) -> &ScalarField {
        &self.c_coarse
    }

    pub fn c_max(&self) -> f64 {
        self.c.max()
    }

    /// Speed sampled on `grid`, which must be either the fine or the coarse grid.
    pub fn on_grid(&self, grid: GridSpec) -> Result<&ScalarField> {
        if grid == self.c.grid() {
            Ok(&self.c)
        } else if grid == self.c_coarse.grid() {
            Ok(&self.c_coarse)
        } else {
            Err(Error::Shape(format!("medium is not defined on {grid:?}")))
        }
    }
}

/// Fine and coarse discretization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub fine_n: usize,
    pub fine_dt: f64,
    pub coarse_n: usize,
    pub coarse_dt: f64,
}

impl Default for Discretization {
    /// `dx = 2/128, dt = 1/1280` (fine) and `Dx = 2/64, Dt = 1/160` (coarse).
    fn default() -> Self {
        Self { fine_n: 128, fine_dt: 1.0 / 1280.0, coarse_n: 64, coarse_dt: 1.0 / 160.0 }
    }
}

impl Discretization {
    pub fn fine_grid(&self) -> GridSpec {
        GridSpec::square(self.fine_n).expect("fine grid size is a power of two")
    }

    pub fn coarse_grid(&self) -> GridSpec {
        GridSpec::square(self.coarse_n).expect("coarse grid size is a power of two")
    }

    pub fn fine_params(&self, dt_star: f64) -> Result<StepParams> {
        StepParams::new(self.fine_grid().h(), self.fine_dt, substeps_for(dt_star, self.fine_dt)?.max(1))
    }

    pub fn coarse_params(&self, dt_star: f64) -> Result<StepParams> {
        StepParams::new(self.coarse_grid().h(), self.coarse_dt, substeps_for(dt_star, self.coarse_dt)?.max(1))
    }

    /// Largest wave speed both solvers accept.
    pub fn max_stable_speed(&self) -> f64 {
        let fine = (cfl_bound(2) - 1e-12) * self.fine_grid().h() / self.fine_dt;
        let coarse = (cfl_bound(2) - 1e-12) * self.coarse_grid().h() / self.coarse_dt;
        fine.min(coarse)
    }

    pub fn validate(&self) -> Result<()> {
        GridSpec::square(self.fine_n)?;
        GridSpec::square(self.coarse_n)?;
        if self.fine_n != 2 * self.coarse_n {
            return Err(Error::Parameter("fine grid must have twice the coarse resolution".into()));
        }
        if !(self.fine_dt > 0.0 && self.coarse_dt > 0.0) {
            return Err(Error::Parameter("time steps must be positive".into()));
        }
        Ok(())
    }

    /// `F_{dt*}`: fine-grid Verlet steps of size `fine_dt` covering `dt_star`.
    pub fn fine_propagate(&self, w: &WaveField, medium: &Medium, dt_star: f64) -> Result<WaveField> {
        let steps = substeps_for(dt_star, self.fine_dt)?;
        let p = StepParams { h: self.fine_grid().h(), k: self.fine_dt, substeps: steps.max(1) };
        Propagator::new(medium.fine(), p)?.advance(w, steps)
    }

    /// `G_{dt*}`: coarse-grid Verlet steps of size `coarse_dt` covering `dt_star`.
    pub fn coarse_propagate(&self, w: &WaveField, medium: &Medium, dt_star: f64) -> Result<WaveField> {
        let steps = substeps_for(dt_star, self.coarse_dt)?;
        let p = StepParams { h: self.coarse_grid().h(), k: self.coarse_dt, substeps: steps.max(1) };
        Propagator::new(medium.coarse(), p)?.advance(w, steps)
    }
}

/// Number of steps of size `dt` that make up `dt_star`; errors when not an integer.
pub fn substeps_for(dt_star: f64, dt: f64) -> Result<usize> {
    if !(dt_star >= 0.0 && dt_star.is_finite()) {
        return Err(Error::Parameter(format!("time interval must be >= 0, got {dt_star}")));
    }
    let ratio = dt_star / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::Parameter(format!("interval {dt_star} is not an integer multiple of the step {dt}")));
    }
    Ok(steps as usize)
}

/// Unscaled five-point (2D) or three-point (1D) periodic Laplacian.
fn laplacian(grid: GridSpec, u: &[f64], out: &mut [f64]) {
    let n = grid.n();
    if grid.dims() == 1 {
        for i in 0..n {
            let l = u[(i + n - 1) % n];
            let r = u[(i + 1) % n];
            out[i] = l - 2.0 * u[i] + r;
        }
        return;
    }
    for j in 0..n {
        let row = &u[j * n..(j + 1) * n];
        let up = &u[((j + n - 1) % n) * n..((j + n - 1) % n + 1) * n];
        let down = &u[((j + 1) % n) * n..((j + 1) % n + 1) * n];
        let dst = &mut out[j * n..(j + 1) * n];
        for i in 0..n {
            let l = if i == 0 { row[n - 1] } else { row[i - 1] };
            let r = if i + 1 == n { row[0] } else { row[i + 1] };
            dst[i] = l + r + up[i] + down[i] - 4.0 * row[i];
        }
    }
}

/// `S_{h,k}` bound to one wave-speed field.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: GridSpec,
    k: f64,
    /// `c^2 / h^2` per node.
    coef: Vec<f64>,
}

impl Propagator {
    /// Checks the CFL condition against `c`.
    pub fn new(c: &ScalarField, p: StepParams) -> Result<Self> {
        let ratio = c.max() * p.k / p.h;
        let bound = cfl_bound(c.grid().dims()) - 1e-12;
        if ratio > bound {
            return Err(Error::Stability(format!("CFL number c_max k / h = {ratio:.6} exceeds {bound:.6}")));
        }
        Ok(Self::new_unchecked(c, p))
    }

    /// Skips the CFL check, for deliberate instability experiments.
    pub fn new_unchecked(c: &ScalarField, p: StepParams) -> Self {
        let inv_h2 = 1.0 / (p.h * p.h);
        Self { grid: c.grid(), k: p.k, coef: c.values().iter().map(|c| c * c * inv_h2).collect() }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Applies `steps` Verlet steps.
    pub fn advance(&self, w: &WaveField, steps: usize) -> Result<WaveField> {
        if w.grid() != self.grid {
            return Err(Error::Shape(format!("field on {:?} but propagator on {:?}", w.grid(), self.grid)));
        }
        let mut u = w.u.values().to_vec();
        let mut v = w.v.values().to_vec();
        if steps == 0 {
            return Ok(w.clone());
        }
        let len = u.len();
        let (k, half_k2, half_k) = (self.k, 0.5 * self.k * self.k, 0.5 * self.k);
        let mut lap = vec![0.0; len];
        let mut lap_next = vec![0.0; len];
        laplacian(self.grid, &u, &mut lap);
        for _ in 0..steps {
            for i in 0..len {
                u[i] += k * v[i] + half_k2 * self.coef[i] * lap[i];
            }
            laplacian(self.grid, &u, &mut lap_next);
            for i in 0..len {
                v[i] += half_k * self.coef[i] * (lap[i] + lap_next[i]);
            }
            std::mem::swap(&mut lap, &mut lap_next);
        }
        Ok(WaveField { u: ScalarField::from_raw(self.grid, u), v: ScalarField::from_raw(self.grid, v) })
    }
}

/// One step of `S_{h,k}`:
/// `u+ = u + k v + (k^2/2) c^2 D2 u / h^2`,
/// `v+ = v + (k/2) c^2 (D2 u + D2 u+) / h^2`.
pub fn verlet_step(w: &WaveField, c: &ScalarField, p: &StepParams) -> Result<WaveField> {
    if c.grid() != w.grid() {
        return Err(Error::Shape("wave field and speed live on different grids".into()));
    }
    Propagator::new(c, *p)?.advance(w, 1)
}

/// Fine propagation with the default discretization.
pub fn fine_propagate(w: &WaveField, medium: &Medium, dt_star: f64) -> Result<WaveField> {
    Discretization::default().fine_propagate(w, medium, dt_star)
}

/// Coarse propagation with the default discretization.
pub fn coarse_propagate(w: &WaveField, medium: &Medium, dt_star: f64) -> Result<WaveField> {
    Discretization::default().coarse_propagate(w, medium, dt_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_wave(grid: GridSpec, seed: u64) -> WaveField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = ScalarField::from_fn(grid, |_, _| rng.random_range(-1.0..1.0));
        let v = ScalarField::from_fn(grid, |_, _| rng.random_range(-1.0..1.0));
        WaveField::new(u, v).unwrap()
    }

    fn smooth_wave(grid: GridSpec) -> WaveField {
        let u = ScalarField::from_fn(grid, |x, y| (-(x * x + y * y) * 20.0).exp());
        WaveField::new(u, ScalarField::zeros(grid)).unwrap()
    }

    #[test]
    fn constant_state_is_stationary() {
        let g = GridSpec::square(16).unwrap();
        let w = WaveField::new(ScalarField::constant(g, 2.0), ScalarField::zeros(g)).unwrap();
        let c = ScalarField::from_fn(g, |x, _| 1.0 + 0.2 * x.cos());
        let p = StepParams::new(g.h(), 0.2 * g.h(), 1).unwrap();
        let out = verlet_step(&w, &c, &p).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn verlet_matches_naive_double_loop() {
        let g = GridSpec::square(16).unwrap();
        let w = random_wave(g, 4);
        let (h, k) = (g.h(), 0.3 * g.h());
        let p = StepParams::new(h, k, 1).unwrap();
        let c = ScalarField::constant(g, 1.0);
        let out = verlet_step(&w, &c, &p).unwrap();

        let n = 16usize;
        let lap = |f: &ScalarField, i: usize, j: usize| {
            let (i, j) = (i as isize, j as isize);
            f.at(i + 1, j) + f.at(i - 1, j) + f.at(i, j + 1) + f.at(i, j - 1) - 4.0 * f.at(i, j)
        };
        let mut up = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                up[j * n + i] = w.u.at(i as isize, j as isize)
                    + k * w.v.at(i as isize, j as isize)
                    + 0.5 * k * k * lap(&w.u, i, j) / (h * h);
            }
        }
        let up = ScalarField::from_vec(g, up).unwrap();
        for j in 0..n {
            for i in 0..n {
                let vp = w.v.at(i as isize, j as isize) + 0.5 * k * (lap(&w.u, i, j) + lap(&up, i, j)) / (h * h);
                assert!((vp - out.v.values()[j * n + i]).abs() < 1e-14);
                assert!((up.values()[j * n + i] - out.u.values()[j * n + i]).abs() < 1e-14);
            }
        }
    }

    /// Per-mode amplification matrix of the scheme for a plane wave along x.
    fn amplification(c: f64, kx: f64, h: f64, k: f64) -> [[f64; 2]; 2] {
        let lam = c * c * 4.0 * (kx * h / 2.0).sin().powi(2) / (h * h);
        let a = 1.0 - 0.5 * k * k * lam;
        [[a, k], [-k * lam * (1.0 - 0.25 * k * k * lam), a]]
    }

    fn matmul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        out
    }

    #[test]
    fn plane_wave_follows_amplification_matrix() {
        let g = GridSpec::square(64).unwrap();
        let (h, k, c) = (g.h(), 0.25 * g.h(), 1.0);
        let kx = 5.0 * PI;
        // amplification matrix has unit determinant and its eigen-angle is the
        // fully discrete phase 2 asin(c k sin(kx h / 2) / h)
        let a = amplification(c, kx, h, k);
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        assert!((det - 1.0).abs() < 1e-13);
        let phase = (0.5 * (a[0][0] + a[1][1])).acos();
        let expected = 2.0 * (c * k * (kx * h / 2.0).sin() / h).asin();
        assert!((phase - expected).abs() < 1e-12);

        let omega = 2.0 * (kx * h / 2.0).sin() / h;
        let u0 = ScalarField::from_fn(g, |x, _| (kx * x).cos());
        let v0 = ScalarField::from_fn(g, |x, _| omega * (kx * x).sin());
        let w = WaveField::new(u0, v0).unwrap();
        let steps = 7;
        let out = Propagator::new(&ScalarField::constant(g, c), StepParams::new(h, k, steps).unwrap())
            .unwrap()
            .advance(&w, steps)
            .unwrap();
        let mut m = [[1.0, 0.0], [0.0, 1.0]];
        for _ in 0..steps {
            m = matmul(a, m);
        }
        // cos and sin components evolve independently with the same matrix
        let cos_u = m[0][0];
        let sin_u = m[0][1] * omega;
        let cos_v = m[1][0];
        let sin_v = m[1][1] * omega;
        let eu = ScalarField::from_fn(g, |x, _| cos_u * (kx * x).cos() + sin_u * (kx * x).sin());
        let ev = ScalarField::from_fn(g, |x, _| cos_v * (kx * x).cos() + sin_v * (kx * x).sin());
        assert!(out.u.max_abs_diff(&eu) < 1e-12);
        assert!(out.v.max_abs_diff(&ev) < 1e-11);
    }

    #[test]
    fn propagation_counts_substeps() {
        assert_eq!(substeps_for(0.1, 1.0 / 160.0).unwrap(), 16);
        assert_eq!(substeps_for(0.2, 1.0 / 1280.0).unwrap(), 256);
        assert_eq!(substeps_for(0.25, 1.0 / 160.0).unwrap(), 40);
        assert_eq!(substeps_for(0.0, 1.0 / 160.0).unwrap(), 0);
        assert!(matches!(substeps_for(0.1003, 1.0 / 160.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn zero_interval_is_identity_and_composition_holds() {
        let disc = Discretization::default();
        let medium = Medium::constant(disc.fine_grid(), 1.0).unwrap();
        let w = smooth_wave(disc.fine_grid());
        assert_eq!(disc.fine_propagate(&w, &medium, 0.0).unwrap(), w);
        let two = disc.fine_propagate(&w, &medium, 2.0 * disc.fine_dt).unwrap();
        let p = StepParams::new(disc.fine_grid().h(), disc.fine_dt, 1).unwrap();
        let once = verlet_step(&w, medium.fine(), &p).unwrap();
        let twice = verlet_step(&once, medium.fine(), &p).unwrap();
        assert_eq!(two, twice);

        let wc = w.restricted().unwrap();
        assert_eq!(disc.coarse_propagate(&wc, &medium, 0.0).unwrap(), wc);
    }

    #[test]
    fn coarse_propagation_is_time_reversible() {
        let disc = Discretization::default();
        let medium =
            Medium::new(ScalarField::from_fn(disc.fine_grid(), |x, y| 0.8 + 0.3 * (PI * x).sin() * (PI * y).cos()))
                .unwrap();
        let w = random_wave(disc.coarse_grid(), 8);
        let fwd = disc.coarse_propagate(&w, &medium, 0.1).unwrap();
        let back = disc.coarse_propagate(&fwd.reversed(), &medium, 0.1).unwrap().reversed();
        assert!(back.max_abs_diff(&w) < 1e-12, "{}", back.max_abs_diff(&w));
    }

    #[test]
    fn propagation_is_linear() {
        let g = GridSpec::square(32).unwrap();
        let c = ScalarField::from_fn(g, |x, _| 1.0 + 0.5 * x * x);
        let p = StepParams::new(g.h(), 0.2 * g.h(), 10).unwrap();
        let prop = Propagator::new(&c, p).unwrap();
        let (a, b) = (random_wave(g, 1), random_wave(g, 2));
        let lhs = prop.advance(&a.scaled(2.0).add(&b.scaled(-0.5)).unwrap(), 10).unwrap();
        let rhs = prop.advance(&a, 10).unwrap().scaled(2.0).add(&prop.advance(&b, 10).unwrap().scaled(-0.5)).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let g = GridSpec::square(16).unwrap();
        let c = ScalarField::constant(g, 2.0);
        let p = StepParams::new(g.h(), g.h(), 1).unwrap();
        let w = WaveField::zeros(g);
        assert!(matches!(verlet_step(&w, &c, &p), Err(Error::Stability(_))));
        assert!(Propagator::new_unchecked(&c, p).advance(&w, 1).is_ok());
    }

    #[test]
    fn grid_mismatch_is_a_shape_error() {
        let c = ScalarField::constant(GridSpec::square(16).unwrap(), 1.0);
        let w = WaveField::zeros(GridSpec::square(8).unwrap());
        let p = StepParams::new(0.1, 0.01, 1).unwrap();
        assert!(matches!(verlet_step(&w, &c, &p), Err(Error::Shape(_))));
    }

    #[test]
    fn cfl_margin_values() {
        let p = StepParams::new(0.1, 0.05, 1).unwrap();
        assert!((cfl_margin(1.0, &p) - (1.0 / 2f64.sqrt() - 0.5)).abs() < 1e-15);
        let p = StepParams::new(0.1, 0.1, 1).unwrap();
        assert!(cfl_margin(2.0, &p) < 0.0);
        let p = StepParams::new(2.0 / 128.0, 1.0 / 1280.0, 1).unwrap();
        let margin = cfl_margin(3.0, &p);
        assert!((margin - (1.0 / 2f64.sqrt() - 3.0 * 64.0 / 1280.0)).abs() < 1e-15);
        assert!(margin > 0.0);
    }

    #[test]
    fn second_order_convergence() {
        let c_fn = |x: f64, y: f64| 1.0 + 0.25 * (PI * x).sin() * (PI * y).sin();
        let init = |x: f64, y: f64| (PI * x).sin() * (PI * y).cos() + 0.5 * (2.0 * PI * y).sin();
        let t_end = 0.25;
        let run = |n: usize| {
            let g = GridSpec::square(n).unwrap();
            let k = 0.25 * g.h();
            let steps = substeps_for(t_end, k).unwrap();
            let c = ScalarField::from_fn(g, c_fn);
            let w = WaveField::new(ScalarField::from_fn(g, init), ScalarField::zeros(g)).unwrap();
            Propagator::new(&c, StepParams::new(g.h(), k, steps).unwrap()).unwrap().advance(&w, steps).unwrap()
        };
        let reference = run(256);
        let err = |n: usize| {
            let sol = run(n);
            let stride = 256 / n;
            let mut e = 0.0f64;
            for j in 0..n {
                for i in 0..n {
                    let r = reference.u.values()[(j * stride) * 256 + i * stride];
                    e = e.max((sol.u.values()[j * n + i] - r).abs());
                }
            }
            e
        };
        let order = (err(32) / err(64)).log2();
        assert!(order >= 1.8, "observed order {order}");
    }
}
