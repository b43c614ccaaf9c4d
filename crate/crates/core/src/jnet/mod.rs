//! Encoder-decoder correction network mapping coarse energy components and
//! wave speed to fine energy components, with exact reverse-mode gradients.
//!
//! Each convolution block is `conv (periodic) -> activation -> batch norm`.
//! The encoder applies two blocks per level and average-pools between
//! levels; the decoder upsamples, applies a block, merges the matching
//! encoder output, and applies another block. A final upsampling block
//! lifts the result to twice the input resolution and a 1x1 convolution
//! produces the three output channels, to which the interpolated input
//! energy channels are added.

mod checkpoint;
mod ops;

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{lambda_map, lambda_pinv, EnergyField};
use crate::error::{Error, Result};
use crate::grid::{prolong, GridSpec, ScalarField, WaveField};
use crate::solver::{Discretization, Medium};

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use ops::Batch;

/// Input channels: `(qx, qy, p, c)` on the coarse grid.
pub const INPUT_CHANNELS: usize = 4;
/// Output channels: `(qx, qy, p)` on the fine grid.
pub const OUTPUT_CHANNELS: usize = 3;

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkipMode {
    Add,
    Concat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JNetConfig {
    pub levels: usize,
    pub base_channels: usize,
    pub kernel: usize,
    pub activation: Activation,
    pub use_bias: bool,
    pub use_batchnorm: bool,
    pub skip: SkipMode,
    pub input_n: usize,
}

impl Default for JNetConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            base_channels: 16,
            kernel: 3,
            activation: Activation::Relu,
            use_bias: true,
            use_batchnorm: true,
            skip: SkipMode::Add,
            input_n: 64,
        }
    }
}

impl JNetConfig {
    /// ReLU network with biases and batch norm.
    pub fn relu(levels: usize, base_channels: usize) -> Self {
        Self { levels, base_channels, ..Self::default() }
    }

    /// Identity activations, no biases, no batch norm.
    pub fn linear(levels: usize, base_channels: usize) -> Self {
        Self {
            levels,
            base_channels,
            activation: Activation::Identity,
            use_bias: false,
            use_batchnorm: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::Config(format!("need at least 2 levels, got {}", self.levels)));
        }
        if self.base_channels == 0 {
            return Err(Error::Config("base_channels must be positive".into()));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel size must be odd, got {}", self.kernel)));
        }
        if self.activation == Activation::Identity && (self.use_bias || self.use_batchnorm) {
            return Err(Error::Config("linear networks carry neither biases nor batch norm".into()));
        }
        GridSpec::square(self.input_n).map_err(|e| Error::Config(e.to_string()))?;
        let floor = 1usize << (self.levels - 1);
        if !self.input_n.is_multiple_of(floor) || self.input_n / floor < 1 {
            return Err(Error::Config(format!(
                "input size {} is not divisible by 2^{}",
                self.input_n,
                self.levels - 1
            )));
        }
        Ok(())
    }

    /// Channel width at each level, doubling up to eight times the base.
    pub fn widths(&self) -> Vec<usize> {
        (0..self.levels).map(|l| (self.base_channels << l).min(8 * self.base_channels)).collect()
    }

    pub fn output_n(&self) -> usize {
        2 * self.input_n
    }
}

/// Named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamTensor {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl ParamTensor {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone)]
struct BnSpec {
    gamma: usize,
    beta: usize,
    mean: usize,
    var: usize,
}

#[derive(Debug, Clone)]
struct ConvSpec {
    cin: usize,
    cout: usize,
    k: usize,
    weight: usize,
    bias: Option<usize>,
    bn: Option<BnSpec>,
    relu: bool,
}

#[derive(Debug, Clone)]
struct Arch {
    convs: Vec<ConvSpec>,
    enc: Vec<[usize; 2]>,
    dec: Vec<[usize; 2]>,
    tail: usize,
    out: usize,
    tensors: Vec<ParamTensor>,
    n_params: usize,
    n_buffers: usize,
}

struct ArchBuilder {
    cfg: JNetConfig,
    arch: Arch,
}

impl ArchBuilder {
    fn tensor(&mut self, name: String, shape: Vec<usize>) -> usize {
        let offset = self.arch.n_params;
        self.arch.n_params += shape.iter().product::<usize>();
        self.arch.tensors.push(ParamTensor { name, offset, shape });
        offset
    }

    fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize, block: bool) -> usize {
        let weight = self.tensor(format!("{name}.weight"), vec![cout, cin, k, k]);
        let bias = self.cfg.use_bias.then(|| self.tensor(format!("{name}.bias"), vec![cout]));
        let bn = (block && self.cfg.use_batchnorm).then(|| {
            let gamma = self.tensor(format!("{name}.bn.gamma"), vec![cout]);
            let beta = self.tensor(format!("{name}.bn.beta"), vec![cout]);
            let mean = self.arch.n_buffers;
            self.arch.n_buffers += 2 * cout;
            BnSpec { gamma, beta, mean, var: mean + cout }
        });
        let relu = block && self.cfg.activation == Activation::Relu;
        self.arch.convs.push(ConvSpec { cin, cout, k, weight, bias, bn, relu });
        self.arch.convs.len() - 1
    }
}

impl Arch {
    fn build(cfg: &JNetConfig) -> Self {
        let mut b = ArchBuilder {
            cfg: *cfg,
            arch: Arch {
                convs: Vec::new(),
                enc: Vec::new(),
                dec: Vec::new(),
                tail: 0,
                out: 0,
                tensors: Vec::new(),
                n_params: 0,
                n_buffers: 0,
            },
        };
        let w = cfg.widths();
        let k = cfg.kernel;
        for l in 0..cfg.levels {
            let cin = if l == 0 { INPUT_CHANNELS } else { w[l - 1] };
            let a = b.conv(&format!("enc{l}.0"), cin, w[l], k, true);
            let c = b.conv(&format!("enc{l}.1"), w[l], w[l], k, true);
            b.arch.enc.push([a, c]);
        }
        let mut dec = vec![[0, 0]; cfg.levels - 1];
        for l in (0..cfg.levels - 1).rev() {
            let up = b.conv(&format!("dec{l}.up"), w[l + 1], w[l], k, true);
            let merge_in = if cfg.skip == SkipMode::Concat { 2 * w[l] } else { w[l] };
            let merge = b.conv(&format!("dec{l}.merge"), merge_in, w[l], k, true);
            dec[l] = [up, merge];
        }
        b.arch.dec = dec;
        b.arch.tail = b.conv("tail", w[0], w[0], k, true);
        b.arch.out = b.conv("out", w[0], OUTPUT_CHANNELS, 1, false);
        b.arch
    }
}

/// Whether batch norm uses batch statistics or running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-channel batch statistics of one batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStats {
    pub conv: usize,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: usize,
}

enum Op {
    Input,
    Conv { conv: usize, input: usize },
    Bn { conv: usize, input: usize, mean: Vec<f64>, inv_std: Vec<f64> },
    Pool { input: usize },
    Up { input: usize },
    Add { a: usize, b: usize },
    Concat { a: usize, b: usize },
}

struct Tape {
    ops: Vec<Op>,
    values: Vec<Batch>,
}

impl Tape {
    fn push(&mut self, op: Op, value: Batch) -> usize {
        self.ops.push(op);
        self.values.push(value);
        self.values.len() - 1
    }
}

/// Loss value, its gradient with respect to the parameters, and the batch
/// statistics observed by each batch-norm layer.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub loss: f64,
    pub grads: Vec<f64>,
    pub stats: Vec<BnStats>,
}

/// The correction network together with the time step it was trained for.
#[derive(Debug, Clone)]
pub struct JNet {
    config: JNetConfig,
    dt_star: f64,
    params: Vec<f64>,
    buffers: Vec<f64>,
    arch: Arch,
}

impl PartialEq for JNet {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.dt_star.to_bits() == other.dt_star.to_bits()
            && self.params == other.params
            && self.buffers == other.buffers
    }
}

impl JNet {
    /// Network with all parameters zero except batch-norm scales (1) and
    /// running variances (1). Its output is the interpolated input.
    pub fn zeros(config: JNetConfig, dt_star: f64) -> Result<Self> {
        config.validate()?;
        if !(dt_star > 0.0 && dt_star.is_finite()) {
            return Err(Error::Config(format!("dt_star must be positive, got {dt_star}")));
        }
        let arch = Arch::build(&config);
        let mut net =
            Self { config, dt_star, params: vec![0.0; arch.n_params], buffers: vec![0.0; arch.n_buffers], arch };
        for conv in &net.arch.convs {
            if let Some(bn) = &conv.bn {
                net.params[bn.gamma..bn.gamma + conv.cout].fill(1.0);
                net.buffers[bn.var..bn.var + conv.cout].fill(1.0);
            }
        }
        Ok(net)
    }

    /// Fan-in uniform initialization: kernels and biases drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, batch-norm scale 1 and shift 0.
    /// The output layer starts at zero, so an untrained network returns the
    /// interpolated input.
    pub fn init<R: Rng + ?Sized>(config: JNetConfig, dt_star: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(config, dt_star)?;
        for conv in net.arch.convs.clone() {
            let bound = 1.0 / ((conv.cin * conv.k * conv.k) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let nw = conv.cout * conv.cin * conv.k * conv.k;
            for v in &mut net.params[conv.weight..conv.weight + nw] {
                *v = dist.sample(rng);
            }
            if let Some(b) = conv.bias {
                for v in &mut net.params[b..b + conv.cout] {
                    *v = dist.sample(rng);
                }
            }
        }
        for t in net.arch.tensors.iter().filter(|t| t.name.starts_with("out.")) {
            net.params[t.range()].fill(0.0);
        }
        Ok(net)
    }

    pub fn config(&self) -> &JNetConfig {
        &self.config
    }

    pub fn dt_star(&self) -> f64 {
        self.dt_star
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Running batch-norm means and variances.
    pub fn buffers(&self) -> &[f64] {
        &self.buffers
    }

    pub fn buffers_mut(&mut self) -> &mut [f64] {
        &mut self.buffers
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Layout of the flat parameter vector, in declaration order.
    pub fn param_layout(&self) -> &[ParamTensor] {
        &self.arch.tensors
    }

    pub fn param(&self, name: &str) -> Option<&[f64]> {
        self.arch.tensors.iter().find(|t| t.name == name).map(|t| &self.params[t.range()])
    }

    /// Running `(mean, var)` of the batch norm attached to the named convolution.
    pub fn running_stats(&self, conv_name: &str) -> Option<(&[f64], &[f64])> {
        let idx = self.arch.tensors.iter().find(|t| t.name == format!("{conv_name}.weight"))?;
        let conv = self.arch.convs.iter().find(|c| c.weight == idx.offset)?;
        let bn = conv.bn.as_ref()?;
        Some((&self.buffers[bn.mean..bn.mean + conv.cout], &self.buffers[bn.var..bn.var + conv.cout]))
    }

    pub(crate) fn from_parts(config: JNetConfig, dt_star: f64, params: Vec<f64>, buffers: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(config, dt_star)?;
        if params.len() != net.params.len() || buffers.len() != net.buffers.len() {
            return Err(Error::Format(format!(
                "expected {} parameters and {} buffers, got {} and {}",
                net.params.len(),
                net.buffers.len(),
                params.len(),
                buffers.len()
            )));
        }
        net.params = params;
        net.buffers = buffers;
        Ok(net)
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.params.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite network parameter at index {i}")));
        }
        if let Some(i) = self.buffers.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite batch-norm statistic at index {i}")));
        }
        Ok(())
    }

    fn check_input(&self, x: &Batch) -> Result<()> {
        if x.b == 0 || x.c != INPUT_CHANNELS || x.n != self.config.input_n || x.data.len() != x.b * x.example_len() {
            return Err(Error::Shape(format!(
                "network expects a batch of {INPUT_CHANNELS}x{n}x{n} inputs, got {}x{}x{}x{}",
                x.b,
                x.c,
                x.n,
                x.n,
                n = self.config.input_n
            )));
        }
        if x.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite network input".into()));
        }
        self.check_finite()
    }

    fn block(&self, tape: &mut Tape, conv: usize, input: usize, mode: Mode, stats: &mut Vec<BnStats>) -> usize {
        let spec = &self.arch.convs[conv];
        let nw = spec.cout * spec.cin * spec.k * spec.k;
        let weight = &self.params[spec.weight..spec.weight + nw];
        let bias = spec.bias.map(|b| &self.params[b..b + spec.cout]);
        let z = ops::conv_forward(&tape.values[input], weight, bias, spec.cout, spec.k, spec.relu);
        let mut id = tape.push(Op::Conv { conv, input }, z);
        if let Some(bn) = &spec.bn {
            let c = spec.cout;
            let x = &tape.values[id];
            let (mean, var) = match mode {
                Mode::Train => {
                    let (m, v) = ops::channel_stats(x);
                    stats.push(BnStats { conv, mean: m.clone(), var: v.clone(), count: x.b * x.n * x.n });
                    (m, v)
                }
                Mode::Eval => (self.buffers[bn.mean..bn.mean + c].to_vec(), self.buffers[bn.var..bn.var + c].to_vec()),
            };
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
            let y = ops::affine_normalize(
                x,
                &mean,
                &inv_std,
                &self.params[bn.gamma..bn.gamma + c],
                &self.params[bn.beta..bn.beta + c],
            );
            id = tape.push(Op::Bn { conv, input: id, mean, inv_std }, y);
        }
        id
    }

    fn run(&self, x: &Batch, mode: Mode) -> (Tape, Vec<BnStats>) {
        let mut tape = Tape { ops: vec![Op::Input], values: vec![x.clone()] };
        let mut stats = Vec::new();
        let mut h = 0;
        let mut skips = Vec::with_capacity(self.config.levels);
        for l in 0..self.config.levels {
            if l > 0 {
                let pooled = ops::avgpool(&tape.values[h]);
                h = tape.push(Op::Pool { input: h }, pooled);
            }
            for &conv in &self.arch.enc[l] {
                h = self.block(&mut tape, conv, h, mode, &mut stats);
            }
            skips.push(h);
        }
        for l in (0..self.config.levels - 1).rev() {
            let up = ops::upsample(&tape.values[h]);
            h = tape.push(Op::Up { input: h }, up);
            h = self.block(&mut tape, self.arch.dec[l][0], h, mode, &mut stats);
            let s = skips[l];
            h = match self.config.skip {
                SkipMode::Add => {
                    let mut sum = tape.values[h].clone();
                    ops::add_into(&mut sum, &tape.values[s]);
                    tape.push(Op::Add { a: h, b: s }, sum)
                }
                SkipMode::Concat => {
                    let cat = ops::concat(&tape.values[h], &tape.values[s]);
                    tape.push(Op::Concat { a: h, b: s }, cat)
                }
            };
            h = self.block(&mut tape, self.arch.dec[l][1], h, mode, &mut stats);
        }
        let up = ops::upsample(&tape.values[h]);
        h = tape.push(Op::Up { input: h }, up);
        h = self.block(&mut tape, self.arch.tail, h, mode, &mut stats);
        self.block(&mut tape, self.arch.out, h, mode, &mut stats);
        (tape, stats)
    }

    /// Interpolated `(qx, qy, p)` input channels added to the network output.
    fn global_skip(&self, x: &Batch) -> Batch {
        let grid = GridSpec::square(x.n).expect("validated input size");
        let out_n = 2 * x.n;
        let mut out = Batch::zeros(x.b, OUTPUT_CHANNELS, out_n);
        let nn = x.n * x.n;
        for e in 0..x.b {
            for ch in 0..OUTPUT_CHANNELS {
                let f = ScalarField::from_raw(grid, x.example(e)[ch * nn..(ch + 1) * nn].to_vec());
                let up = prolong(&f).expect("validated input size");
                out.data[(e * OUTPUT_CHANNELS + ch) * out_n * out_n..][..out_n * out_n].copy_from_slice(up.values());
            }
        }
        out
    }

    /// Batched forward pass.
    pub fn forward_batch(&self, x: &Batch, mode: Mode) -> Result<Batch> {
        self.check_input(x)?;
        let (mut tape, _) = self.run(x, mode);
        let mut out = tape.values.pop().expect("nonempty tape");
        ops::add_into(&mut out, &self.global_skip(x));
        Ok(out)
    }

    /// Inference on one `4 x n x n` input, returning `3 x 2n x 2n` values.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.config.input_n;
        let batch = Batch { b: 1, c: INPUT_CHANNELS, n, data: x.to_vec() };
        if x.len() != INPUT_CHANNELS * n * n {
            return Err(Error::Shape(format!("expected {} input values, got {}", INPUT_CHANNELS * n * n, x.len())));
        }
        Ok(self.forward_batch(&batch, Mode::Eval)?.data)
    }

    /// Weight of the squared error: the fine-grid cell area, so that the loss
    /// of one example is the discrete energy of its error.
    pub fn loss_weight(&self) -> f64 {
        let h = 2.0 / self.config.output_n() as f64;
        h * h
    }

    /// Training-mode loss `weight * mean_b |forward(x_b) - y_b|^2` and its gradient.
    pub fn loss_and_grad(&self, x: &Batch, y: &Batch) -> Result<Gradient> {
        self.check_input(x)?;
        let out_n = self.config.output_n();
        if y.b != x.b || y.c != OUTPUT_CHANNELS || y.n != out_n || y.data.len() != y.b * y.example_len() {
            return Err(Error::Shape(format!(
                "targets must be {} x {OUTPUT_CHANNELS} x {out_n} x {out_n}, got {} x {} x {} x {}",
                x.b, y.b, y.c, y.n, y.n
            )));
        }
        let (tape, stats) = self.run(x, Mode::Train);
        let skip = self.global_skip(x);
        let last = tape.values.len() - 1;
        let scale = self.loss_weight() / x.b as f64;
        let mut loss = 0.0;
        let mut d_out = tape.values[last].same_shape();
        for (((d, &o), &s), &t) in d_out.data.iter_mut().zip(&tape.values[last].data).zip(&skip.data).zip(&y.data) {
            let r = o + s - t;
            loss += r * r;
            *d = 2.0 * scale * r;
        }
        loss *= scale;
        let grads = self.backprop(tape, d_out);
        Ok(Gradient { loss, grads, stats })
    }

    fn backprop(&self, tape: Tape, d_out: Batch) -> Vec<f64> {
        let mut grads = vec![0.0; self.params.len()];
        let Tape { ops, values } = tape;
        let mut adj: Vec<Option<Batch>> = (0..values.len()).map(|_| None).collect();
        let accumulate = |adj: &mut Vec<Option<Batch>>, id: usize, g: Batch| match &mut adj[id] {
            Some(acc) => ops::add_into(acc, &g),
            slot @ None => *slot = Some(g),
        };
        adj[values.len() - 1] = Some(d_out);
        for id in (0..ops.len()).rev() {
            let Some(mut dy) = adj[id].take() else { continue };
            match &ops[id] {
                Op::Input => {}
                Op::Conv { conv, input } => {
                    let spec = &self.arch.convs[*conv];
                    if spec.relu {
                        ops::relu_mask(&mut dy, &values[id]);
                    }
                    let nw = spec.cout * spec.cin * spec.k * spec.k;
                    let weight = &self.params[spec.weight..spec.weight + nw];
                    let want_dx = !matches!(ops[*input], Op::Input);
                    let (dx, dw, db) = ops::conv_backward(&values[*input], &dy, weight, spec.k, want_dx);
                    grads[spec.weight..spec.weight + nw].iter_mut().zip(&dw).for_each(|(a, b)| *a += b);
                    if let Some(b) = spec.bias {
                        grads[b..b + spec.cout].iter_mut().zip(&db).for_each(|(a, b)| *a += b);
                    }
                    if let Some(dx) = dx {
                        accumulate(&mut adj, *input, dx);
                    }
                }
                Op::Bn { conv, input, mean, inv_std } => {
                    let spec = &self.arch.convs[*conv];
                    let bn = spec.bn.as_ref().expect("batch-norm op on a layer without batch norm");
                    let c = spec.cout;
                    let gamma = &self.params[bn.gamma..bn.gamma + c];
                    let (dx, dg, db) = ops::batchnorm_backward(&values[*input], &dy, mean, inv_std, gamma);
                    grads[bn.gamma..bn.gamma + c].iter_mut().zip(&dg).for_each(|(a, b)| *a += b);
                    grads[bn.beta..bn.beta + c].iter_mut().zip(&db).for_each(|(a, b)| *a += b);
                    accumulate(&mut adj, *input, dx);
                }
                Op::Pool { input } => accumulate(&mut adj, *input, ops::avgpool_backward(&dy)),
                Op::Up { input } => accumulate(&mut adj, *input, ops::upsample_backward(&dy)),
                Op::Add { a, b } => {
                    accumulate(&mut adj, *b, dy.clone());
                    accumulate(&mut adj, *a, dy);
                }
                Op::Concat { a, b } => {
                    let ca = values[*a].c;
                    let (da, db) = ops::split(&dy, ca);
                    accumulate(&mut adj, *b, db);
                    accumulate(&mut adj, *a, da);
                }
            }
        }
        grads
    }

    /// Folds one batch's statistics into the running averages (momentum 0.1,
    /// unbiased variance).
    pub fn update_running_stats(&mut self, stats: &[BnStats]) {
        for s in stats {
            let spec = &self.arch.convs[s.conv];
            let Some(bn) = &spec.bn else { continue };
            let unbias = if s.count > 1 { s.count as f64 / (s.count - 1) as f64 } else { 1.0 };
            for ch in 0..spec.cout {
                let m = &mut self.buffers[bn.mean + ch];
                *m = (1.0 - BN_MOMENTUM) * *m + BN_MOMENTUM * s.mean[ch];
                let v = &mut self.buffers[bn.var + ch];
                *v = (1.0 - BN_MOMENTUM) * *v + BN_MOMENTUM * s.var[ch] * unbias;
            }
        }
    }
}

/// Network input `(Lambda g, c)` for a coarse wave field `g`.
pub fn input_tensor(g: &WaveField, c_coarse: &ScalarField) -> Result<Vec<f64>> {
    let mut x = lambda_map(g, c_coarse)?.to_flat();
    x.extend_from_slice(c_coarse.values());
    Ok(x)
}

/// Network target `Lambda w` for a fine wave field `w`.
pub fn target_tensor(w: &WaveField, c_fine: &ScalarField) -> Result<Vec<f64>> {
    Ok(lambda_map(w, c_fine)?.to_flat())
}

/// Enhanced coarse step: coarse propagation of the restricted field, the
/// network correction, and reconstruction on the fine grid. The mean of `u`
/// is carried over from the coarse solution.
pub fn enhanced_step_with(
    disc: &Discretization,
    w: &WaveField,
    medium: &Medium,
    net: &JNet,
    dt_star: f64,
) -> Result<WaveField> {
    if (net.dt_star() - dt_star).abs() > 1e-12 * dt_star.max(1.0) {
        return Err(Error::Config(format!("network was trained for dt* = {}, requested {dt_star}", net.dt_star())));
    }
    if net.config().input_n != disc.coarse_n {
        return Err(Error::Config(format!(
            "network input size {} does not match the coarse grid {}",
            net.config().input_n,
            disc.coarse_n
        )));
    }
    let g = disc.coarse_propagate(&w.restricted()?, medium, dt_star)?;
    let x = input_tensor(&g, medium.coarse())?;
    let y = net.forward(&x)?;
    let e = EnergyField::from_flat(disc.fine_grid(), &y)?;
    let ratio = (disc.fine_grid().len() / disc.coarse_grid().len()) as f64;
    lambda_pinv(&e, medium.fine(), ratio * g.u.sum())
}

/// [`enhanced_step_with`] on the default discretization.
pub fn enhanced_step(w: &WaveField, medium: &Medium, net: &JNet, dt_star: f64) -> Result<WaveField> {
    enhanced_step_with(&Discretization::default(), w, medium, net, dt_star)
}
