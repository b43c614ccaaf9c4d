//! Network checkpoints.
//!
//! Layout, little-endian: magic `PWNN`, version `u32`, then the config as
//! `u32` fields (levels, base channels, kernel, activation, bias flag,
//! batch-norm flag, skip mode, input size), `dt_star` as `f64`, the
//! parameter count `u64` and parameters, the buffer count `u64` and buffers.

use std::fs;
use std::path::Path;

use super::{Activation, JNet, JNetConfig, SkipMode};
use crate::error::{Error, Result};
use crate::io::Reader;

const MAGIC: &[u8; 4] = b"PWNN";
const VERSION: u32 = 1;

impl JNet {
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::with_capacity(64 + 8 * (self.params.len() + self.buffers.len()));
        out.extend_from_slice(MAGIC);
        let fields = [
            VERSION,
            c.levels as u32,
            c.base_channels as u32,
            c.kernel as u32,
            match c.activation {
                Activation::Relu => 0,
                Activation::Identity => 1,
            },
            c.use_bias as u32,
            c.use_batchnorm as u32,
            match c.skip {
                SkipMode::Add => 0,
                SkipMode::Concat => 1,
            },
            c.input_n as u32,
        ];
        for f in fields {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out.extend_from_slice(&self.dt_star.to_le_bytes());
        for block in [&self.params, &self.buffers] {
            out.extend_from_slice(&(block.len() as u64).to_le_bytes());
            for v in block.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not a network checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let mut next = || r.u32().map(|v| v as usize);
        let levels = next()?;
        let base_channels = next()?;
        let kernel = next()?;
        let activation = match next()? {
            0 => Activation::Relu,
            1 => Activation::Identity,
            other => return Err(Error::Format(format!("unknown activation code {other}"))),
        };
        let use_bias = next()? != 0;
        let use_batchnorm = next()? != 0;
        let skip = match next()? {
            0 => SkipMode::Add,
            1 => SkipMode::Concat,
            other => return Err(Error::Format(format!("unknown skip code {other}"))),
        };
        let input_n = next()?;
        let config = JNetConfig { levels, base_channels, kernel, activation, use_bias, use_batchnorm, skip, input_n };
        config.validate().map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
        let dt_star = r.f64()?;
        let n_params = r.u64()? as usize;
        let params = r.f64s(n_params)?;
        let n_buffers = r.u64()? as usize;
        let buffers = r.f64s(n_buffers)?;
        if r.remaining() != 0 {
            return Err(Error::Format(format!("{} trailing bytes in checkpoint", r.remaining())));
        }
        JNet::from_parts(config, dt_star, params, buffers)
    }
}

pub fn write_checkpoint(path: impl AsRef<Path>, net: &JNet) -> Result<()> {
    fs::write(path, net.to_bytes())?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<JNet> {
    JNet::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for cfg in [
            JNetConfig::relu(3, 2),
            JNetConfig::linear(2, 3),
            JNetConfig { skip: SkipMode::Concat, ..JNetConfig::relu(2, 2) },
        ] {
            let mut net = JNet::init(cfg, 0.25, &mut rng).unwrap();
            net.buffers_mut().iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 * 0.1);
            let bytes = net.to_bytes();
            let back = JNet::from_bytes(&bytes).unwrap();
            assert_eq!(back, net);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let net = JNet::zeros(JNetConfig::relu(2, 2), 0.1).unwrap();
        let bytes = net.to_bytes();
        assert!(matches!(JNet::from_bytes(&bytes[..bytes.len() - 8]), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"NOPE");
        assert!(matches!(JNet::from_bytes(&bad), Err(Error::Format(_))));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(JNet::from_bytes(&extra), Err(Error::Format(_))));
    }
}
