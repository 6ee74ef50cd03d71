//! The `SDCM` model file.
//!
//! Layout (integers little-endian):
//!
//! ```text
//! "SDCM" | version: u32 = 1 | layer count: u32
//! per layer: kind tag u8, then its hyperparameters as u32
//!     1 dense    fan_in fan_out
//!     2 conv2d   in_channels out_channels kernel_h kernel_w stride pad
//!     3 relu   4 maxpool2   5 flatten   6 softmax
//! input rank: u32, input dims: u32 each
//! for each weight-bearing layer in order: weights then biases, f32 row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::layer::LayerSpec;
use super::network::{LayerParams, Network};

pub const MAGIC: &[u8; 4] = b"SDCM";
pub const VERSION: u32 = 1;

fn tag(layer: &LayerSpec) -> u8 {
    match layer {
        LayerSpec::Dense { .. } => 1,
        LayerSpec::Conv2d { .. } => 2,
        LayerSpec::Relu => 3,
        LayerSpec::Maxpool2 => 4,
        LayerSpec::Flatten => 5,
        LayerSpec::Softmax => 6,
    }
}

fn dim(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::dim(format!("dimension {v} does not fit in u32")))
}

pub fn encode_model(net: &Network<f32>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim(net.layers().len())?.to_le_bytes());
    for layer in net.layers() {
        out.push(tag(layer));
        let hyper: Vec<usize> = match *layer {
            LayerSpec::Dense { fan_in, fan_out } => vec![fan_in, fan_out],
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel_h,
                kernel_w,
                stride,
                pad,
            } => vec![in_channels, out_channels, kernel_h, kernel_w, stride, pad],
            _ => vec![],
        };
        for h in hyper {
            out.extend_from_slice(&dim(h)?.to_le_bytes());
        }
    }
    out.extend_from_slice(&dim(net.input_shape().len())?.to_le_bytes());
    for &d in net.input_shape() {
        out.extend_from_slice(&dim(d)?.to_le_bytes());
    }
    for p in net.params() {
        for v in p.weight.data().iter().chain(p.bias.data()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.pos as u64,
                format!("truncated model file while reading {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        self.u32(what).map(|v| v as usize)
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let at = self.pos as u64;
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::format(at, "size overflow"))?, what)?;
        let vals: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(at + 4 * i as u64, format!("non-finite value in {what}")));
        }
        Ok(vals)
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<Network<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(0, "bad magic, expected \"SDCM\""));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let count = r.usize("layer count")?;
    let mut layers = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        let at = r.pos as u64;
        let layer = match r.u8("layer tag")? {
            1 => LayerSpec::Dense {
                fan_in: r.usize("fan_in")?,
                fan_out: r.usize("fan_out")?,
            },
            2 => LayerSpec::Conv2d {
                in_channels: r.usize("in_channels")?,
                out_channels: r.usize("out_channels")?,
                kernel_h: r.usize("kernel_h")?,
                kernel_w: r.usize("kernel_w")?,
                stride: r.usize("stride")?,
                pad: r.usize("pad")?,
            },
            3 => LayerSpec::Relu,
            4 => LayerSpec::Maxpool2,
            5 => LayerSpec::Flatten,
            6 => LayerSpec::Softmax,
            t => return Err(Error::format(at, format!("unknown kind tag {t} for layer {i}"))),
        };
        layers.push(layer);
    }
    let rank = r.usize("input rank")?;
    if rank == 0 || rank > 8 {
        return Err(Error::format(r.pos as u64 - 4, format!("implausible input rank {rank}")));
    }
    let input_shape = (0..rank).map(|_| r.usize("input dim")).collect::<Result<Vec<_>>>()?;
    let mut params = vec![];
    for layer in layers.iter().filter(|l| l.is_weight_bearing()) {
        let ws = layer.weight_shape().unwrap();
        let units = layer.output_units().unwrap();
        let w = r.f32s(ws.iter().product(), "weights")?;
        let b = r.f32s(units, "biases")?;
        params.push(LayerParams {
            weight: Tensor::new(ws, w)?,
            bias: Tensor::new(vec![units], b)?,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::format(r.pos as u64, "trailing bytes after model"));
    }
    Network::new(input_shape, layers, params)
}

pub fn save_model(net: &Network<f32>, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_model(net)?;
    crate::results::ensure_parent(path.as_ref())?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network<f32>> {
    let mut bytes = vec![];
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_model(&bytes)
}
