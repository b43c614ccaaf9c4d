//! Command-line front end.
//!
//! Every command that writes an output also writes `<out>.manifest.json`
//! holding the fully resolved command, which `pwave replay` runs again.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, DatasetVariant, GenConfig, SYNTHETIC_RASTER_SIZE};
use crate::dispersion::dispersion_table;
use crate::energy::wave_energy;
use crate::error::{Error, Result};
use crate::evaluation::{error_table, linspace, phantom_energy, Stepper};
use crate::grid::WaveField;
use crate::io::{read_field_file, write_field_file, FieldFile};
use crate::jnet::{read_checkpoint, write_checkpoint, Activation, JNet, JNetConfig, SkipMode};
use crate::media::{self, PulseSpec, Raster};
use crate::parareal::{parareal, PararealConfig, Variant};
use crate::solver::{Discretization, Medium};
use crate::training::{train_from, TrainConfig};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_IO: i32 = 5;

/// Environment variable read for the worker count when `--threads` is absent.
pub const THREADS_ENV: &str = "PWAVE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "pwave", version, about = "Wave propagation with coarse solvers, learned corrections and parareal")]
pub struct Cli {
    /// Worker threads (overrides PWAVE_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "command")]
pub enum Command {
    /// Write a wave-speed model as a field file.
    Medium(MediumArgs),
    /// Generate training pairs.
    Dataset(DatasetArgs),
    /// Train a correction network.
    Train(TrainArgs),
    /// Propagate a pulse with the fine, coarse or enhanced solver.
    Propagate(PropagateArgs),
    /// Run parareal and tabulate errors per iteration.
    Parareal(PararealArgs),
    /// Tabulate the 1D dispersion relation and correction symbol.
    Dispersion(DispersionArgs),
    /// Sweep one-step errors (or phantom energy) over constant media.
    Eval(EvalArgs),
    /// Describe a file, or print a field as plot-ready columns.
    Dump(DumpArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediumChoice {
    Waveguide,
    Inclusion,
    Crop,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MediumArgs {
    #[arg(long, value_enum)]
    pub kind: MediumChoice,
    #[arg(long)]
    pub out: PathBuf,
    /// Velocity raster to crop from (single-channel field file, width x height).
    #[arg(long)]
    pub raster: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantChoice {
    T,
    Tp,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DatasetArgs {
    #[arg(long, default_value_t = 0.2)]
    pub dt_star: f64,
    #[arg(long, default_value_t = 200)]
    pub n_media: usize,
    #[arg(long, default_value_t = 8)]
    pub n_steps: usize,
    #[arg(long, value_enum, default_value_t = VariantChoice::T)]
    pub variant: VariantChoice,
    #[arg(long, default_value_t = 4)]
    pub k_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub raster: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationChoice {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkipChoice {
    Add,
    Concat,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct NetArgs {
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value_t = 16)]
    pub base_channels: usize,
    #[arg(long, default_value_t = 3)]
    pub kernel: usize,
    #[arg(long, value_enum, default_value_t = ActivationChoice::Relu)]
    pub activation: ActivationChoice,
    #[arg(long, value_enum, default_value_t = SkipChoice::Add)]
    pub skip: SkipChoice,
    #[arg(long)]
    pub no_bias: bool,
    #[arg(long)]
    pub no_batchnorm: bool,
}

impl NetArgs {
    pub fn config(&self, input_n: usize) -> JNetConfig {
        let linear = self.activation == ActivationChoice::Identity;
        JNetConfig {
            levels: self.levels,
            base_channels: self.base_channels,
            kernel: self.kernel,
            activation: if linear { Activation::Identity } else { Activation::Relu },
            use_bias: !self.no_bias && !linear,
            use_batchnorm: !self.no_batchnorm && !linear,
            skip: match self.skip {
                SkipChoice::Add => SkipMode::Add,
                SkipChoice::Concat => SkipMode::Concat,
            },
            input_n,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub net: NetArgs,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    /// Comma-separated `epoch:rate` pairs.
    #[arg(long, default_value = "0:1e-3,1000:5e-4")]
    pub lr: String,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
    /// Rewrite the checkpoint every this many epochs (0: only at the end).
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    /// Per-epoch loss CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PulseArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub pulse_x: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub pulse_y: f64,
    /// Pulse is `exp(-inv_sigma_sq r^2)`.
    #[arg(long, default_value_t = 250.0)]
    pub inv_sigma_sq: f64,
    /// Initial wave field file; replaces the pulse.
    #[arg(long)]
    pub init: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Fine,
    Coarse,
    Enhanced,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PropagateArgs {
    /// `waveguide`, `inclusion`, or a medium field file.
    #[arg(long, default_value = "waveguide")]
    pub medium: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub pulse: PulseArgs,
    #[arg(long, value_enum, default_value_t = SolverChoice::Fine)]
    pub solver: SolverChoice,
    #[arg(long)]
    pub net: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub dt_star: f64,
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    /// Final wave field.
    #[arg(long)]
    pub out: PathBuf,
    /// Energy per step.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PararealChoice {
    Plain,
    Enhanced,
    Procrustes,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PararealArgs {
    #[arg(long, default_value = "waveguide")]
    pub medium: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub pulse: PulseArgs,
    #[arg(long, value_enum, default_value_t = PararealChoice::Plain)]
    pub variant: PararealChoice,
    #[arg(long)]
    pub net: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub dt_star: f64,
    #[arg(long, default_value_t = 5)]
    pub windows: usize,
    #[arg(long, default_value_t = 5)]
    pub iterations: usize,
    /// Error table `k,n,rel_energy_error`.
    #[arg(long)]
    pub out: PathBuf,
    /// Last iterate at the final time.
    #[arg(long)]
    pub final_field: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DispersionArgs {
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 2.0 / 64.0)]
    pub dx: f64,
    #[arg(long, default_value_t = 0.2)]
    pub t: f64,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Trained network; omit with --baseline.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Use the untrained identity network (output = interpolated input).
    #[arg(long)]
    pub baseline: bool,
    /// Tabulate phantom energy instead of errors.
    #[arg(long)]
    pub phantom: bool,
    #[arg(long, default_value_t = 0.2)]
    pub dt_star: f64,
    #[arg(long, default_value_t = 0.1)]
    pub c_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub c_max: f64,
    #[arg(long, default_value_t = 6)]
    pub c_count: usize,
    #[arg(long, default_value_t = 5.0)]
    pub inv_sigma_min: f64,
    #[arg(long, default_value_t = 20.0)]
    pub inv_sigma_max: f64,
    #[arg(long, default_value_t = 4)]
    pub inv_sigma_count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DumpArgs {
    pub file: PathBuf,
    /// Print `x y value...` rows of a field file.
    #[arg(long)]
    pub columns: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    #[serde(flatten)]
    command: Command,
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Numeric(_) | Error::BlowUp(_) | Error::Diverged { .. } => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

/// Worker count from the flag, else the environment, else rayon's default.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Parameter(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match resolve_threads(cli.threads)? {
        Some(0) => Err(Error::Parameter("thread count must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
            pool.install(|| execute(&cli.command))
        }
        None => execute(&cli.command),
    }
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Medium(a) => cmd_medium(a),
        Command::Dataset(a) => cmd_dataset(a),
        Command::Train(a) => cmd_train(a),
        Command::Propagate(a) => cmd_propagate(a),
        Command::Parareal(a) => cmd_parareal(a),
        Command::Dispersion(a) => cmd_dispersion(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Dump(a) => cmd_dump(a),
        Command::Replay(a) => {
            let text = fs::read_to_string(&a.manifest)?;
            let m: Manifest =
                serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", a.manifest.display())))?;
            if let Command::Replay(_) = m.command {
                return Err(Error::Format("a manifest cannot replay another manifest".into()));
            }
            execute(&m.command)
        }
    }
}

/// Path of the manifest written next to `out`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_manifest(out: &Path, cmd: Command) -> Result<()> {
    let m = Manifest { tool: "pwave".into(), version: env!("CARGO_PKG_VERSION").into(), command: cmd };
    let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(manifest_path(out), text + "\n")?;
    Ok(())
}

fn write_csv<T>(path: &Path, header: &str, rows: &[T], fields: impl Fn(&T) -> Vec<f64>) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{header}")?;
    for r in rows {
        let line: Vec<String> = fields(r).iter().map(|v| format!("{v:e}")).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    f.flush()?;
    Ok(())
}

fn load_raster(path: Option<&Path>, seed: u64) -> Result<Raster> {
    match path {
        Some(p) => Raster::from_field_file(&read_field_file(p)?),
        None => {
            let (w, h) = SYNTHETIC_RASTER_SIZE;
            media::synthetic_layered_raster(w, h, seed)
        }
    }
}

/// `waveguide`, `inclusion`, or a path to a medium field file.
pub fn load_medium(spec: &str, disc: &Discretization) -> Result<Medium> {
    match spec {
        "waveguide" => media::synth_waveguide_on(disc.fine_grid()),
        "inclusion" => media::synth_inclusion_on(disc.fine_grid()),
        path => {
            let c = read_field_file(path)?.to_scalar()?;
            if c.grid() != disc.fine_grid() {
                return Err(Error::Config(format!(
                    "medium {path} is {0}x{0}, the fine grid is {1}x{1}",
                    c.grid().n(),
                    disc.fine_n
                )));
            }
            Medium::new(c)
        }
    }
}

fn initial_field(p: &PulseArgs, disc: &Discretization) -> Result<WaveField> {
    match &p.init {
        Some(path) => {
            let w = read_field_file(path)?.to_wave()?;
            if w.grid() != disc.fine_grid() {
                return Err(Error::Config(format!("initial field {} is not on the fine grid", path.display())));
            }
            Ok(w)
        }
        None => Ok(PulseSpec::new((p.pulse_x, p.pulse_y), p.inv_sigma_sq)?.field(disc.fine_grid())),
    }
}

fn load_net(path: Option<&Path>, dt_star: f64, what: &str) -> Result<JNet> {
    let path = path.ok_or_else(|| Error::Parameter(format!("{what} needs --net")))?;
    let net = read_checkpoint(path)?;
    if (net.dt_star() - dt_star).abs() > 1e-12 * dt_star.max(1.0) {
        return Err(Error::Config(format!(
            "{} was trained for dt* = {}, requested {dt_star}",
            path.display(),
            net.dt_star()
        )));
    }
    Ok(net)
}

fn cmd_medium(a: &MediumArgs) -> Result<()> {
    let disc = Discretization::default();
    let c = match a.kind {
        MediumChoice::Waveguide => media::synth_waveguide_on(disc.fine_grid())?,
        MediumChoice::Inclusion => media::synth_inclusion_on(disc.fine_grid())?,
        MediumChoice::Crop => {
            let raster = load_raster(a.raster.as_deref(), a.seed)?;
            media::random_crop(&raster, &disc, &mut ChaCha8Rng::seed_from_u64(a.seed))?.medium
        }
    };
    write_field_file(&a.out, &FieldFile::from_scalars(&[c.fine()])?)?;
    write_manifest(&a.out, Command::Medium(a.clone()))
}

fn cmd_dataset(a: &DatasetArgs) -> Result<()> {
    let mut cfg = GenConfig::new(a.dt_star, a.n_media, a.seed);
    cfg.n_steps = a.n_steps;
    cfg.k_max = a.k_max;
    cfg.variant = match a.variant {
        VariantChoice::T => DatasetVariant::T,
        VariantChoice::Tp => DatasetVariant::Tp,
    };
    if let Some(p) = &a.raster {
        cfg.raster = Some(load_raster(Some(p), a.seed)?);
    }
    let mut partial = a.out.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    let result = dataset::generate(&cfg).and_then(|ds| dataset::write_dataset(&partial, &ds));
    if let Err(e) = result {
        let _ = fs::remove_file(&partial);
        return Err(e);
    }
    fs::rename(&partial, &a.out)?;
    write_manifest(&a.out, Command::Dataset(a.clone()))
}

/// Parses `epoch:rate[,epoch:rate...]`.
pub fn parse_schedule(s: &str) -> Result<Vec<(usize, f64)>> {
    s.split(',')
        .map(|part| {
            let (e, r) = part
                .split_once(':')
                .ok_or_else(|| Error::Parameter(format!("schedule entry {part:?} is not epoch:rate")))?;
            let e = e.trim().parse().map_err(|_| Error::Parameter(format!("bad epoch in {part:?}")))?;
            let r = r.trim().parse().map_err(|_| Error::Parameter(format!("bad rate in {part:?}")))?;
            Ok((e, r))
        })
        .collect()
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let ds = dataset::read_dataset(&a.data)?;
    let cfg = TrainConfig {
        batch_size: a.batch_size,
        lr_schedule: parse_schedule(&a.lr)?,
        momentum: a.momentum,
        epochs: a.epochs,
        seed: a.seed,
        test_fraction: a.test_fraction,
    };
    cfg.validate()?;
    let net_cfg = a.net.config(ds.disc.coarse_n);
    let net = JNet::init(net_cfg, ds.dt_star, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
    let result = train_from(&ds, net, &cfg, |epoch, net, rec| {
        eprintln!("epoch {epoch:>5}  loss {:.6e}  lr {:e}", rec.loss, rec.lr);
        if a.checkpoint_every > 0 && (epoch + 1) % a.checkpoint_every == 0 {
            write_checkpoint(&a.out, net)?;
        }
        Ok(())
    });
    let (net, report) = match result {
        Ok(v) => v,
        Err(Error::Diverged { epoch, reason, last_good }) => {
            write_checkpoint(&a.out, &last_good)?;
            return Err(Error::Diverged { epoch, reason, last_good });
        }
        Err(e) => return Err(e),
    };
    write_checkpoint(&a.out, &net)?;
    if let Some(log) = &a.log {
        report.write_csv(log)?;
    }
    eprintln!(
        "initial loss {:.6e}, final {:.6e}, test {}",
        report.initial_loss,
        report.final_train_loss,
        report.test_loss.map_or("n/a".to_string(), |v| format!("{v:.6e}"))
    );
    write_manifest(&a.out, Command::Train(a.clone()))
}

fn cmd_propagate(a: &PropagateArgs) -> Result<()> {
    let disc = Discretization::default();
    let m = load_medium(&a.medium, &disc)?;
    let mut w = initial_field(&a.pulse, &disc)?;
    let net = match a.solver {
        SolverChoice::Enhanced => Some(load_net(a.net.as_deref(), a.dt_star, "the enhanced solver")?),
        _ => None,
    };
    let mut energies = vec![(0.0, wave_energy(&w, m.fine())?)];
    for step in 1..=a.steps {
        w = match a.solver {
            SolverChoice::Fine => disc.fine_propagate(&w, &m, a.dt_star)?,
            SolverChoice::Coarse => disc.coarse_propagate(&w.restricted()?, &m, a.dt_star)?.prolonged()?,
            SolverChoice::Enhanced => crate::jnet::enhanced_step_with(&disc, &w, &m, net.as_ref().unwrap(), a.dt_star)?,
        };
        if !w.is_finite() {
            return Err(Error::Numeric(format!("non-finite field after step {step}")));
        }
        energies.push((step as f64 * a.dt_star, wave_energy(&w, m.fine())?));
    }
    write_field_file(&a.out, &FieldFile::from_wave(&w)?)?;
    if let Some(csv) = &a.csv {
        write_csv(csv, "time,energy", &energies, |&(t, e)| vec![t, e])?;
    }
    write_manifest(&a.out, Command::Propagate(a.clone()))
}

fn cmd_parareal(a: &PararealArgs) -> Result<()> {
    let disc = Discretization::default();
    let m = load_medium(&a.medium, &disc)?;
    let w0 = initial_field(&a.pulse, &disc)?;
    let net;
    let variant = match a.variant {
        PararealChoice::Plain => Variant::Plain,
        PararealChoice::Procrustes => Variant::Procrustes,
        PararealChoice::Enhanced => {
            net = load_net(a.net.as_deref(), a.dt_star, "enhanced parareal")?;
            Variant::Enhanced(&net)
        }
    };
    let cfg = PararealConfig { disc, ..PararealConfig::new(a.dt_star, a.windows, a.iterations) };
    let run = parareal(&w0, &m, variant, &cfg)?;
    run.write_csv(&a.out)?;
    if let Some(p) = &a.final_field {
        let last = run.snapshots.last().and_then(|row| row.last()).expect("at least one iterate");
        write_field_file(p, &FieldFile::from_wave(last)?)?;
    }
    if let Some(k) = run.blowup {
        eprintln!("iteration {k} blew up; later iterations were not run");
    }
    write_manifest(&a.out, Command::Parareal(a.clone()))
}

fn cmd_dispersion(a: &DispersionArgs) -> Result<()> {
    let rows = dispersion_table(a.c, a.dx, a.t, a.samples)?;
    write_csv(&a.out, "k,omega_exact,omega_semidiscrete,epsilon,s00,s01,s10,s11", &rows, |r| {
        vec![r.k, r.omega_exact, r.omega_semidiscrete, r.epsilon, r.s00, r.s01, r.s10, r.s11]
    })?;
    write_manifest(&a.out, Command::Dispersion(a.clone()))
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let disc = Discretization::default();
    let net = match (&a.net, a.baseline) {
        (Some(_), true) => return Err(Error::Parameter("--net and --baseline are exclusive".into())),
        (None, true) => {
            JNet::zeros(JNetConfig { base_channels: 1, input_n: disc.coarse_n, ..JNetConfig::relu(2, 1) }, a.dt_star)?
        }
        (p, false) => load_net(p.as_deref(), a.dt_star, "eval")?,
    };
    let speeds = linspace(a.c_min, a.c_max, a.c_count);
    if a.phantom {
        let rows = speeds.iter().map(|&c| Ok((c, phantom_energy(&disc, &net, c)?))).collect::<Result<Vec<_>>>()?;
        write_csv(&a.out, "c,phantom_energy", &rows, |&(c, e)| vec![c, e])?;
    } else {
        let sigmas = linspace(a.inv_sigma_min, a.inv_sigma_max, a.inv_sigma_count);
        let rows = error_table(&disc, Stepper::Enhanced(&net), &speeds, &sigmas, a.dt_star)?;
        write_csv(&a.out, "c,inv_sigma,error", &rows, |r| vec![r.c, r.inv_sigma, r.error])?;
    }
    write_manifest(&a.out, Command::Eval(a.clone()))
}

fn cmd_dump(a: &DumpArgs) -> Result<()> {
    let bytes = fs::read(&a.file)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match bytes.get(..4) {
        Some(b"PWF2") => {
            let f = FieldFile::from_bytes(&bytes)?;
            if a.columns {
                if f.shape.len() != 2 {
                    return Err(Error::Format("columns need a 2D field".into()));
                }
                let (nx, ny) = (f.shape[0], f.shape[1]);
                for j in 0..ny {
                    for i in 0..nx {
                        let vals: Vec<String> =
                            (0..f.channels).map(|c| format!("{:e}", f.channel(c)[j * nx + i])).collect();
                        writeln!(
                            out,
                            "{} {} {}",
                            -1.0 + 2.0 * i as f64 / nx as f64,
                            -1.0 + 2.0 * j as f64 / ny as f64,
                            vals.join(" ")
                        )?;
                    }
                    writeln!(out)?;
                }
            } else {
                let min = f.data.iter().copied().fold(f64::INFINITY, f64::min);
                let max = f.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                writeln!(out, "field file: {} channel(s), shape {:?}, min {min:e}, max {max:e}", f.channels, f.shape)?;
            }
        }
        Some(b"PWDS") => {
            let ds = dataset::Dataset::from_bytes(&bytes)?;
            let media: std::collections::BTreeSet<u64> = ds.records.iter().map(|r| r.medium_id).collect();
            writeln!(
                out,
                "dataset: {} records from {} media, dt* {}, seed {}, grids {} / {}",
                ds.records.len(),
                media.len(),
                ds.dt_star,
                ds.seed,
                ds.disc.coarse_n,
                ds.disc.fine_n
            )?;
        }
        Some(b"PWNN") => {
            let net = JNet::from_bytes(&bytes)?;
            writeln!(out, "network: {:?}, dt* {}, {} parameters", net.config(), net.dt_star(), net.param_count())?;
        }
        _ => return Err(Error::Format(format!("{} has an unknown format", a.file.display()))),
    }
    Ok(())
}
