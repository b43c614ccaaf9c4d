//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use pwave::dataset::{generate, GenConfig};
use pwave::dispersion::{
    correct_coarse_1d, correction_symbol, evolve_exact_1d, evolve_semidiscrete_1d, exact_evolution, omega_semidiscrete,
    omega_semidiscrete_series, semidiscrete_evolution,
};
use pwave::energy::{energy_norm, lambda_map, lambda_pinv, wave_energy};
use pwave::evaluation::{one_step_error, Stepper};
use pwave::grid::{GridSpec, ScalarField, WaveField};
use pwave::jnet::{Batch, JNet, JNetConfig};
use pwave::media::{synth_inclusion, synth_waveguide, PulseSpec};
use pwave::parareal::{parareal, procrustes_solve, PararealConfig, Variant};
use pwave::solver::{Discretization, Medium};
use pwave::spectral;
use pwave::training::{train_from, TrainConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn pulse() -> WaveField {
    PulseSpec::new((0.0, 0.0), 250.0).unwrap().field(Discretization::default().fine_grid())
}

fn parareal_exactness() -> Outcome {
    let m = synth_waveguide();
    let w0 = pulse();
    let net =
        JNet::init(JNetConfig { base_channels: 4, ..JNetConfig::default() }, 0.2, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
    let cfg = PararealConfig::new(0.2, 5, 5);
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for variant in [Variant::Plain, Variant::Enhanced(&net), Variant::Procrustes] {
        let t = Instant::now();
        let run = parareal(&w0, &m, variant, &cfg).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        worst = worst.max(run.max_error(5));
    }
    outcome(worst <= 1e-10 && slowest <= 120.0, format!("max error at K=N {worst:.2e}, slowest variant {slowest:.1}s"))
}

fn reversibility_and_energy() -> Outcome {
    let disc = Discretization::default();
    let w0 = pulse();
    let mut roundtrip: f64 = 0.0;
    let mut drift: f64 = 0.0;
    let mut sharp: f64 = 0.0;
    // widest pulse of the evaluation range, resolved on both grids
    let smooth = PulseSpec::new((0.0, 0.0), 25.0).unwrap().field(disc.fine_grid());
    for m in [synth_waveguide(), synth_inclusion()] {
        let fwd = disc.fine_propagate(&w0, &m, 1.0).unwrap();
        let back = disc.fine_propagate(&fwd.reversed(), &m, 1.0).unwrap().reversed();
        roundtrip = roundtrip.max(back.max_abs_diff(&w0) / w0.u.max_abs());
        let wc = w0.restricted().unwrap();
        let fwd_c = disc.coarse_propagate(&wc, &m, 1.0).unwrap();
        let back_c = disc.coarse_propagate(&fwd_c.reversed(), &m, 1.0).unwrap().reversed();
        roundtrip = roundtrip.max(back_c.max_abs_diff(&wc) / wc.u.max_abs());
        drift = drift.max(max_drift(&disc, &m, &smooth));
        sharp = sharp.max(max_drift(&disc, &m, &w0));
    }
    outcome(
        roundtrip <= 1e-11 && drift <= 1e-2,
        format!("roundtrip {roundtrip:.2e}, energy drift {drift:.2e} (sigma^-2 = 250 pulse: {sharp:.2e})"),
    )
}

/// Largest relative energy change over T = 1 on either grid, sampled every 0.2.
fn max_drift(disc: &Discretization, m: &Medium, w0: &WaveField) -> f64 {
    let wc = w0.restricted().unwrap();
    let e0 = wave_energy(w0, m.fine()).unwrap();
    let ec0 = wave_energy(&wc, m.coarse()).unwrap();
    let (mut w, mut c) = (w0.clone(), wc);
    let mut drift: f64 = 0.0;
    for _ in 0..5 {
        w = disc.fine_propagate(&w, m, 0.2).unwrap();
        c = disc.coarse_propagate(&c, m, 0.2).unwrap();
        drift = drift.max((wave_energy(&w, m.fine()).unwrap() / e0 - 1.0).abs());
        drift = drift.max((wave_energy(&c, m.coarse()).unwrap() / ec0 - 1.0).abs());
    }
    drift
}

fn dispersion_oracle() -> Outcome {
    let dx = 2.0 / 64.0;
    let mut series_ok = true;
    for c in [0.5, 1.0, 2.0] {
        for j in 1..=100 {
            let k = j as f64 / 100.0 / dx;
            let closed = 2.0 * c / dx * (k * dx / 2.0).sin();
            let bound = c * k * (k * dx).powi(6);
            series_ok &= (closed - omega_semidiscrete_series(c, k, dx)).abs() <= bound;
            series_ok &= (closed - omega_semidiscrete(c, k, dx).unwrap()).abs() <= 1e-12 * closed;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut symbol_err: f64 = 0.0;
    for _ in 0..100 {
        let c = rng.random_range(0.1..3.0);
        let k = rng.random_range(-0.95..0.95) * PI / dx;
        let t = rng.random_range(0.0..1.0);
        let omega = correction_symbol(c, k, dx, t).unwrap();
        let m = semidiscrete_evolution(c, k, dx, t).unwrap();
        symbol_err = symbol_err.max((omega * m).max_abs_diff(&exact_evolution(c, k, t)));
    }
    let g = GridSpec::line(64).unwrap();
    let u = ScalarField::from_fn(g, |x, _| (-(10.0 * x).powi(2)).exp());
    let q = spectral::spectral_derivative_1d(&u).unwrap();
    let p = ScalarField::zeros(g);
    let (qe, pe) = evolve_exact_1d(&q, &p, 1.0, 0.5).unwrap();
    let (qs, ps) = evolve_semidiscrete_1d(&q, &p, 1.0, 0.5).unwrap();
    let (qc, pc) = correct_coarse_1d(&qs, &ps, 1.0, 0.5).unwrap();
    let err =
        |a: &ScalarField, b: &ScalarField| a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let norm: f64 = qe.values().iter().chain(pe.values()).map(|v| v * v).sum();
    let before = (err(&qs, &qe) + err(&ps, &pe)) / norm;
    let after = (err(&qc, &qe) + err(&pc, &pe)) / norm;
    outcome(
        series_ok && symbol_err <= 1e-12 && after * 10.0 <= before,
        format!("series bound {series_ok}, symbol residual {symbol_err:.1e}, 1D error {before:.2e} -> {after:.2e}"),
    )
}

fn random_gradient_visible(grid: GridSpec, rng: &mut ChaCha8Rng) -> ScalarField {
    let raw = ScalarField::from_fn(grid, |_, _| rng.random_range(-1.0..1.0));
    let n = grid.n();
    let mut spec = spectral::forward(&raw);
    for (mx, my) in [(n / 2, 0), (0, n / 2), (n / 2, n / 2)] {
        spec[my * n + mx] = Complex64::new(0.0, 0.0);
    }
    spectral::inverse(spec, grid)
}

fn lambda_roundtrip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut norm_err: f64 = 0.0;
    for i in 0..100 {
        let g = GridSpec::square([16, 32, 64][i % 3]).unwrap();
        let u = random_gradient_visible(g, &mut rng);
        let v = ScalarField::from_fn(g, |_, _| rng.random_range(-1.0..1.0));
        let c = ScalarField::from_fn(g, |_, _| rng.random_range(0.3..2.0));
        let w = WaveField::new(u, v).unwrap();
        let e = lambda_map(&w, &c).unwrap();
        let back = lambda_pinv(&e, &c, w.u.sum()).unwrap();
        worst = worst.max(back.max_abs_diff(&w) / w.u.max_abs().max(w.v.max_abs()));
        let h = g.h();
        let mut brute = 0.0;
        for ch in e.channels() {
            for &val in ch.values() {
                brute += val * val * h * h;
            }
        }
        norm_err = norm_err.max((energy_norm(&e) - brute).abs() / brute);
    }
    outcome(worst <= 1e-10 && norm_err <= 1e-12, format!("roundtrip {worst:.2e}, energy norm {norm_err:.1e}"))
}

fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    a.qr().q()
}

fn frobenius_objective(o: &DMatrix<f64>, g: &[Vec<f64>], f: &[Vec<f64>]) -> f64 {
    g.iter()
        .zip(f)
        .map(|(gi, fi)| {
            let og = o * DMatrix::from_column_slice(gi.len(), 1, gi);
            og.iter().zip(fi).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        })
        .sum()
}

fn procrustes_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut orth_err, mut beaten) = (0.0f64, 0usize);
    for _ in 0..10 {
        let g: Vec<Vec<f64>> = (0..3).map(|_| (0..6).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let f: Vec<Vec<f64>> = (0..3).map(|_| (0..6).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let map = procrustes_solve(&g, &f).unwrap();
        let dense = map.to_dense();
        orth_err = orth_err.max((dense.transpose() * &dense - DMatrix::identity(6, 6)).abs().max());
        let best = frobenius_objective(&dense, &g, &f);
        let mut rivals = vec![DMatrix::identity(6, 6)];
        rivals.extend((0..1000).map(|_| random_orthogonal(6, &mut rng)));
        beaten += rivals.iter().filter(|r| frobenius_objective(r, &g, &f) < best - 1e-12).count();
    }
    let theta: f64 = 0.7;
    let rot = DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
    let g = vec![vec![1.0, 0.3], vec![-0.4, 2.0]];
    let f: Vec<Vec<f64>> =
        g.iter().map(|v| (&rot * DMatrix::from_column_slice(2, 1, v)).iter().copied().collect()).collect();
    let rot_err = (procrustes_solve(&g, &f).unwrap().to_dense() - rot).abs().max();
    outcome(
        orth_err <= 1e-10 && beaten == 0 && rot_err <= 1e-8,
        format!("orthogonality {orth_err:.1e}, better candidates {beaten}, rotation error {rot_err:.1e}"),
    )
}

fn gradient_fidelity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (i, base) in [JNetConfig::relu(3, 2), JNetConfig::linear(3, 2)].into_iter().enumerate() {
        let cfg = JNetConfig { input_n: 16, ..base };
        let mut rng = ChaCha8Rng::seed_from_u64(60 + i as u64);
        let mut net = JNet::init(cfg, 0.2, &mut rng).unwrap();
        net.params_mut().iter_mut().for_each(|p| *p += rng.random_range(-0.1..0.1));
        let x = Batch { b: 2, c: 4, n: 16, data: (0..2 * 4 * 256).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let y = Batch { b: 2, c: 3, n: 32, data: (0..2 * 3 * 1024).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let grads = net.loss_and_grad(&x, &y).unwrap().grads;
        let gmax = grads.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        let h = 1e-5;
        for _ in 0..120 {
            let j = rng.random_range(0..net.param_count());
            let orig = net.params()[j];
            net.params_mut()[j] = orig + h;
            let lp = net.loss_and_grad(&x, &y).unwrap().loss;
            net.params_mut()[j] = orig - h;
            let lm = net.loss_and_grad(&x, &y).unwrap().loss;
            net.params_mut()[j] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let denom = fd.abs().max(grads[j].abs()).max(1e-3 * gmax);
            worst = worst.max((fd - grads[j]).abs() / denom);
            checked += 1;
        }
    }
    outcome(worst <= 1e-4, format!("{checked} parameters, worst relative error {worst:.2e}"))
}

fn linear_algebra() -> Outcome {
    let cfg = JNetConfig { input_n: 16, ..JNetConfig::linear(3, 4) };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut net = JNet::init(cfg, 0.2, &mut rng).unwrap();
    net.params_mut().iter_mut().for_each(|p| *p += rng.random_range(-0.2..0.2));
    let len = 4 * 16 * 16;
    let a: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (alpha, beta) = (1.7, -0.6);
    let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
    let (fa, fb, fm) = (net.forward(&a).unwrap(), net.forward(&b).unwrap(), net.forward(&mix).unwrap());
    let scale = fm.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let superposition =
        fm.iter().zip(fa.iter().zip(&fb)).fold(0.0f64, |s, (m, (x, y))| s.max((m - alpha * x - beta * y).abs()))
            / scale;
    let zero = net.forward(&vec![0.0; len]).unwrap().iter().fold(0.0f64, |s, v| s.max(v.abs()));
    outcome(superposition <= 1e-10 && zero == 0.0, format!("superposition {superposition:.1e}, |f(0)| {zero:e}"))
}

fn learning_efficacy() -> Outcome {
    let start = Instant::now();
    let disc = Discretization::default();
    let ds = generate(&GenConfig::new(0.2, 200, 2024)).unwrap();
    let gen_time = start.elapsed().as_secs_f64();
    let net_cfg = JNetConfig { base_channels: 8, ..JNetConfig::default() };
    let cfg = TrainConfig { batch_size: 32, lr_schedule: vec![(0, 1e-2)], ..TrainConfig::desk_scale(2024) };
    let net = JNet::init(net_cfg, 0.2, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
    let (net, report) = train_from(&ds, net, &cfg, |_, _, _| Ok(())).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut base, mut enhanced) = (0.0, 0.0);
    for _ in 0..20 {
        let c = rng.random_range(0.5..1.5);
        let inv_sigma = rng.random_range(5.0..15.0);
        let center = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let m = Medium::constant(disc.fine_grid(), c).unwrap();
        let w = PulseSpec::with_inv_sigma(center, inv_sigma).unwrap().field(disc.fine_grid());
        base += one_step_error(&disc, Stepper::Interpolation, &w, &m, 0.2).unwrap() / 20.0;
        enhanced += one_step_error(&disc, Stepper::Enhanced(&net), &w, &m, 0.2).unwrap() / 20.0;
    }
    let reduction = 1.0 - enhanced / base;
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    outcome(
        reduction >= 0.3 && minutes <= 60.0,
        format!(
            "{} records (gen {gen_time:.0}s), loss {:.3e} -> {:.3e} ({:.2}x), test loss {:.3e}, held-out error {base:.3e} -> {enhanced:.3e} ({:.0}% lower), {minutes:.1} min",
            ds.records.len(),
            report.initial_loss,
            report.final_train_loss,
            report.final_train_loss / report.initial_loss,
            report.test_loss.unwrap_or(f64::NAN),
            100.0 * reduction
        ),
    )
}

fn procrustes_stability() -> Outcome {
    let run = parareal(&pulse(), &synth_waveguide(), Variant::Procrustes, &PararealConfig::new(0.2, 5, 8)).unwrap();
    let (e0, e4) = (run.max_error(0), run.max_error(4));
    let finite = run.errors.iter().flatten().all(|e| e.is_finite());
    outcome(
        e4 < e0 && run.blowup.is_none() && finite && run.iterations() == 8,
        format!("max error k=0 {e0:.2e}, k=4 {e4:.2e}, k=8 {:.2e}, blow-up {:?}", run.max_error(8), run.blowup),
    )
}

fn determinism() -> Outcome {
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut gen = GenConfig::new(0.2, 3, 77);
            gen.n_steps = 2;
            let ds = generate(&gen).unwrap();
            let cfg =
                TrainConfig { batch_size: 2, epochs: 1, lr_schedule: vec![(0, 1e-2)], ..TrainConfig::desk_scale(5) };
            let net = JNet::init(JNetConfig::relu(3, 2), 0.2, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
            let (net, _) = train_from(&ds, net, &cfg, |_, _, _| Ok(())).unwrap();
            (ds.to_bytes().unwrap(), net.to_bytes())
        })
    };
    let (d1, n1) = run(1);
    let (d3, n3) = run(3);
    let (d1b, n1b) = run(1);
    outcome(
        d1 == d3 && n1 == n3 && d1 == d1b && n1 == n1b,
        format!("dataset {} bytes, checkpoint {} bytes, 1 vs 3 workers and repeat run", d1.len(), n1.len()),
    )
}

fn main() -> ExitCode {
    // comma-separated criterion numbers to run; all when unset
    let only: Option<Vec<usize>> = std::env::var("PWAVE_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [Criterion; 10] = [
        ("parareal exactness at K=N", parareal_exactness),
        ("solver reversibility and energy drift", reversibility_and_energy),
        ("dispersion oracle and correction", dispersion_oracle),
        ("energy map roundtrip", lambda_roundtrip),
        ("Procrustes optimality", procrustes_optimality),
        ("gradient fidelity", gradient_fidelity),
        ("linear network algebra", linear_algebra),
        ("desk-scale learning efficacy", learning_efficacy),
        ("Procrustes parareal stability", procrustes_stability),
        ("determinism across worker counts", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let t = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag}: {name}: {} [{:.1}s]", i + 1, o.detail, t.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
