//! Parareal iterations on the fine grid.
//!
//! All variants share the update
//! `u[k+1][n+1] = C_k(u[k+1][n]) + F(u[k][n]) - C_k(u[k][n])`
//! with `u[k][0]` pinned to the initial condition. They differ in the coarse
//! operator `C_k`: the interpolated coarse solver, the network-enhanced step,
//! or the interpolated coarse solver followed by an orthogonal correction of
//! its energy components fitted to the previous iterate.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::energy::{lambda_map, lambda_pinv, rel_energy_error, wave_energy, EnergyField};
use crate::error::{Error, Result};
use crate::grid::WaveField;
use crate::jnet::{enhanced_step_with, JNet};
use crate::solver::{Discretization, Medium};

/// Energy growth factor beyond which an iteration is declared unstable.
pub const BLOWUP_FACTOR: f64 = 1e6;

/// `I G R`: coarse propagation of the restricted field, prolonged back.
pub fn coarse_tilde_with(disc: &Discretization, w: &WaveField, m: &Medium, dt_star: f64) -> Result<WaveField> {
    disc.coarse_propagate(&w.restricted()?, m, dt_star)?.prolonged()
}

/// [`coarse_tilde_with`] on the default discretization.
pub fn coarse_tilde(w: &WaveField, m: &Medium, dt_star: f64) -> Result<WaveField> {
    coarse_tilde_with(&Discretization::default(), w, m, dt_star)
}

/// Orthogonal map `I + Q (W - I) Q^T` where `Q` has orthonormal columns and
/// `W` is a small orthogonal matrix; it acts as the identity off `span Q`.
#[derive(Debug, Clone)]
pub struct OrthogonalMap {
    dim: usize,
    basis: Vec<Vec<f64>>,
    core: DMatrix<f64>,
}

impl OrthogonalMap {
    pub fn identity(dim: usize) -> Self {
        Self { dim, basis: Vec::new(), core: DMatrix::zeros(0, 0) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the subspace on which the map may differ from the identity.
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn core(&self) -> &DMatrix<f64> {
        &self.core
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|q| dot(q, x)).collect()
    }

    fn apply_core(&self, x: &[f64], core: &DMatrix<f64>) -> Vec<f64> {
        let c = self.project(x);
        let mut out = x.to_vec();
        for (i, q) in self.basis.iter().enumerate() {
            let coef: f64 = (0..c.len()).map(|j| core[(i, j)] * c[j]).sum::<f64>() - c[i];
            axpy(&mut out, coef, q);
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "vector length does not match the map");
        self.apply_core(x, &self.core)
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "vector length does not match the map");
        self.apply_core(x, &self.core.transpose())
    }

    /// Dense `dim x dim` matrix; only sensible for small dimensions.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for j in 0..self.dim {
            let mut e = vec![0.0; self.dim];
            e[j] = 1.0;
            for (i, v) in self.apply(&e).into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `||Omega G - F||_F^2`.
    pub fn objective(&self, g: &[Vec<f64>], f: &[Vec<f64>]) -> f64 {
        g.iter().zip(f).map(|(gc, fc)| sq_dist(&self.apply(gc), fc)).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Orthonormal basis of the span of `cols` by modified Gram-Schmidt with
/// one reorthogonalization pass; directions below `1e-12` of the largest
/// column norm are dropped.
fn orthonormal_basis(cols: &[&[f64]]) -> Vec<Vec<f64>> {
    let scale = cols.iter().map(|c| dot(c, c).sqrt()).fold(0.0f64, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    if scale == 0.0 {
        return basis;
    }
    for c in cols {
        let mut v = c.to_vec();
        for _ in 0..2 {
            for q in &basis {
                let a = dot(q, &v);
                axpy(&mut v, -a, q);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-12 * scale {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Minimizes `||Omega G - F||_F` over orthogonal `Omega`, where the columns of
/// `G` and `F` are given as vectors. The solution acts as `U V^T` (from the
/// SVD of `F G^T` on the joint column space) and as the identity elsewhere.
/// Where the data leave the rotation undetermined, the completion closest to
/// the identity is chosen, preferring proper rotations.
pub fn procrustes_solve(g: &[Vec<f64>], f: &[Vec<f64>]) -> Result<OrthogonalMap> {
    if g.len() != f.len() {
        return Err(Error::Shape(format!("{} coarse columns but {} fine columns", g.len(), f.len())));
    }
    let dim = g.first().map_or(0, |c| c.len());
    if g.iter().chain(f).any(|c| c.len() != dim) {
        return Err(Error::Shape("columns have different lengths".into()));
    }
    if g.iter().chain(f).flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite Procrustes data".into()));
    }
    let cols: Vec<&[f64]> = g.iter().chain(f).map(|c| c.as_slice()).collect();
    let basis = orthonormal_basis(&cols);
    let r = basis.len();
    if r == 0 {
        return Ok(OrthogonalMap::identity(dim));
    }
    let m = g.len();
    let gp = DMatrix::from_fn(r, m, |i, j| dot(&basis[i], &g[j]));
    let fp = DMatrix::from_fn(r, m, |i, j| dot(&basis[i], &f[j]));
    let cross = &fp * gp.transpose();
    let svd = cross
        .clone()
        .try_svd(true, true, 1e-15, 10_000)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let u = svd.u.ok_or_else(|| Error::Numeric("SVD returned no U".into()))?;
    let vt = svd.v_t.ok_or_else(|| Error::Numeric("SVD returned no V".into()))?;
    let sigma = svd.singular_values;
    let tol = 1e-12 * sigma.max().max(f64::MIN_POSITIVE);
    let determined: Vec<usize> = (0..r).filter(|&i| sigma[i] > tol).collect();
    let free: Vec<usize> = (0..r).filter(|&i| sigma[i] <= tol).collect();
    let mut core = DMatrix::zeros(r, r);
    for &i in &determined {
        core += u.column(i) * vt.row(i);
    }
    if !free.is_empty() {
        let u0 = DMatrix::from_fn(r, free.len(), |i, j| u[(i, free[j])]);
        let v0 = DMatrix::from_fn(r, free.len(), |i, j| vt[(free[j], i)]);
        // maximize tr(U0 W V0^T) = tr(W V0^T U0) over orthogonal W
        let a = v0.transpose() * &u0;
        let asvd = a.svd(true, true);
        let (p, rt) = (asvd.u.unwrap(), asvd.v_t.unwrap());
        let mut rmat = rt.transpose();
        let mut w = &rmat * p.transpose();
        let candidate = &core + &u0 * &w * v0.transpose();
        let smallest = asvd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        if candidate.determinant() < 0.0 && smallest < 1e-9 {
            // flipping the weakest direction costs nothing when it is degenerate
            let (idx, _) =
                asvd.singular_values
                    .iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
            let col = -rmat.column(idx);
            rmat.set_column(idx, &col);
            w = &rmat * p.transpose();
        }
        core += &u0 * w * v0.transpose();
    }
    Ok(OrthogonalMap { dim, basis, core })
}

/// Which coarse operator drives the iteration.
#[derive(Clone, Copy)]
pub enum Variant<'a> {
    /// `I G R`.
    Plain,
    /// The network-enhanced coarse step.
    Enhanced(&'a JNet),
    /// `I G R` followed by an orthogonal correction fitted at each iteration.
    Procrustes,
}

impl Variant<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Enhanced(_) => "enhanced",
            Variant::Procrustes => "procrustes",
        }
    }
}

type CoarseHook<'a> = &'a (dyn Fn(&WaveField) -> Result<WaveField> + Sync);

/// Time-window layout and iteration count.
#[derive(Clone, Copy)]
pub struct PararealConfig<'a> {
    pub disc: Discretization,
    pub dt_star: f64,
    pub windows: usize,
    pub iterations: usize,
    /// Replaces `I G R` everywhere it appears (testing hook).
    pub coarse_override: Option<CoarseHook<'a>>,
}

impl<'a> PararealConfig<'a> {
    pub fn new(dt_star: f64, windows: usize, iterations: usize) -> Self {
        Self { disc: Discretization::default(), dt_star, windows, iterations, coarse_override: None }
    }

    fn validate(&self) -> Result<()> {
        if self.windows == 0 {
            return Err(Error::Parameter("need at least one time window".into()));
        }
        if self.dt_star.is_nan() || self.dt_star <= 0.0 {
            return Err(Error::Parameter(format!("dt_star must be positive, got {}", self.dt_star)));
        }
        self.disc.validate()?;
        self.disc.fine_params(self.dt_star)?;
        self.disc.coarse_params(self.dt_star)?;
        Ok(())
    }
}

/// All iterates, the serial fine reference, and their energy errors.
#[derive(Debug, Clone)]
pub struct PararealRun {
    pub variant: String,
    pub dt_star: f64,
    pub windows: usize,
    /// `snapshots[k][n]` is `u[k][n]`.
    pub snapshots: Vec<Vec<WaveField>>,
    pub reference: Vec<WaveField>,
    /// `errors[k][n]`: relative energy error of `u[k][n]` against the reference.
    pub errors: Vec<Vec<f64>>,
    /// First iteration whose energy exceeded the blow-up threshold.
    pub blowup: Option<usize>,
    pub fine_applications: usize,
}

impl PararealRun {
    pub fn iterations(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn is_stable(&self) -> bool {
        self.blowup.is_none()
    }

    /// Largest error over `n` at iteration `k`.
    pub fn max_error(&self, k: usize) -> f64 {
        self.errors[k].iter().cloned().fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "k,n,rel_energy_error")?;
        for (k, row) in self.errors.iter().enumerate() {
            for (n, e) in row.iter().enumerate() {
                writeln!(out, "{k},{n},{e:.17e}")?;
            }
        }
        Ok(())
    }
}

fn energy_vec(w: &WaveField, m: &Medium) -> Result<Vec<f64>> {
    Ok(lambda_map(w, m.fine())?.to_flat())
}

/// Error of `u` against `reference`, relative when the reference carries energy.
fn error_against(u: &WaveField, reference: &WaveField, m: &Medium) -> Result<f64> {
    if wave_energy(reference, m.fine())? > 0.0 {
        rel_energy_error(u, reference, m.fine())
    } else {
        wave_energy(&u.sub(reference)?, m.fine())
    }
}

/// Runs `iterations` parareal corrections of the chosen variant.
pub fn parareal(w0: &WaveField, m: &Medium, variant: Variant<'_>, cfg: &PararealConfig<'_>) -> Result<PararealRun> {
    cfg.validate()?;
    let disc = &cfg.disc;
    if w0.grid() != disc.fine_grid() {
        return Err(Error::Shape("initial field must live on the fine grid".into()));
    }
    let dt = cfg.dt_star;
    let n_win = cfg.windows;
    let fine = |w: &WaveField| disc.fine_propagate(w, m, dt);
    let tilde = |w: &WaveField| match cfg.coarse_override {
        Some(hook) => hook(w),
        None => coarse_tilde_with(disc, w, m, dt),
    };

    let mut reference = vec![w0.clone()];
    for n in 0..n_win {
        reference.push(fine(&reference[n])?);
    }
    let e0 = wave_energy(w0, m.fine())?;
    let limit = BLOWUP_FACTOR * e0.max(f64::MIN_POSITIVE);
    let blew_up = |row: &[WaveField]| -> Result<bool> {
        for w in row {
            if !w.is_finite() || wave_energy(w, m.fine())? > limit {
                return Ok(true);
            }
        }
        Ok(false)
    };

    let initial = |w: &WaveField| match variant {
        Variant::Enhanced(net) if cfg.coarse_override.is_none() => enhanced_step_with(disc, w, m, net, dt),
        _ => tilde(w),
    };
    let mut current = vec![w0.clone()];
    for n in 0..n_win {
        current.push(initial(&current[n])?);
    }
    let mut snapshots = vec![current];
    let mut blowup = blew_up(&snapshots[0])?.then_some(0);
    let mut fine_applications = 0;

    for k in 0..cfg.iterations {
        if blowup.is_some() {
            break;
        }
        let prev = &snapshots[k];
        let count = if matches!(variant, Variant::Procrustes) { n_win + 1 } else { n_win };
        let fine_prev: Vec<WaveField> = (0..count).into_par_iter().map(|n| fine(&prev[n])).collect::<Result<_>>()?;
        fine_applications += count;

        let omega = match variant {
            Variant::Procrustes => {
                let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..=n_win)
                    .into_par_iter()
                    .map(|n| Ok((energy_vec(&tilde(&prev[n])?, m)?, energy_vec(&fine_prev[n], m)?)))
                    .collect::<Result<_>>()?;
                let (gs, fs): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
                Some(procrustes_solve(&gs, &fs)?)
            }
            _ => None,
        };
        let coarse = |w: &WaveField| -> Result<WaveField> {
            match (&variant, &omega) {
                (Variant::Procrustes, Some(omega)) => {
                    let g = tilde(w)?;
                    let e = omega.apply(&energy_vec(&g, m)?);
                    lambda_pinv(&EnergyField::from_flat(g.grid(), &e)?, m.fine(), g.u.sum())
                }
                (Variant::Enhanced(net), _) if cfg.coarse_override.is_none() => enhanced_step_with(disc, w, m, net, dt),
                _ => tilde(w),
            }
        };
        let coarse_prev: Vec<WaveField> =
            (0..n_win).into_par_iter().map(|n| coarse(&prev[n])).collect::<Result<_>>()?;

        let mut next = vec![w0.clone()];
        for n in 0..n_win {
            let jump = fine_prev[n].sub(&coarse_prev[n])?;
            next.push(coarse(&next[n])?.add(&jump)?);
        }
        if blew_up(&next)? {
            blowup = Some(k + 1);
        }
        snapshots.push(next);
    }

    let errors = snapshots
        .iter()
        .map(|row| row.iter().zip(&reference).map(|(u, r)| error_against(u, r, m)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(PararealRun {
        variant: variant.name().to_string(),
        dt_star: dt,
        windows: n_win,
        snapshots,
        reference,
        errors,
        blowup,
        fine_applications,
    })
}

pub fn parareal_plain(
    w0: &WaveField,
    m: &Medium,
    dt_star: f64,
    windows: usize,
    iterations: usize,
) -> Result<PararealRun> {
    parareal(w0, m, Variant::Plain, &PararealConfig::new(dt_star, windows, iterations))
}

pub fn parareal_enhanced(
    w0: &WaveField,
    m: &Medium,
    dt_star: f64,
    windows: usize,
    iterations: usize,
    net: &JNet,
) -> Result<PararealRun> {
    parareal(w0, m, Variant::Enhanced(net), &PararealConfig::new(dt_star, windows, iterations))
}

pub fn parareal_procrustes(
    w0: &WaveField,
    m: &Medium,
    dt_star: f64,
    windows: usize,
    iterations: usize,
) -> Result<PararealRun> {
    parareal(w0, m, Variant::Procrustes, &PararealConfig::new(dt_star, windows, iterations))
}
