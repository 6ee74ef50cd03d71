use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{conv_out_dim, ConvGeometry};

/// One layer of a feed-forward network. Shapes are per sample (no batch axis).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// `y = x · W + b` with `W` stored as `[fan_in × fan_out]`.
    Dense { fan_in: usize, fan_out: usize },
    /// Cross-correlation with kernels stored as `[out × in × kh × kw]`.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        pad: usize,
    },
    Relu,
    /// 2×2 max pooling with stride 2.
    Maxpool2,
    Flatten,
    Softmax,
}

impl LayerSpec {
    pub fn is_weight_bearing(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Relu => "relu",
            LayerSpec::Maxpool2 => "maxpool2",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Softmax => "softmax",
        }
    }

    pub fn weight_shape(&self) -> Option<Vec<usize>> {
        match *self {
            LayerSpec::Dense { fan_in, fan_out } => Some(vec![fan_in, fan_out]),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel_h,
                kernel_w,
                ..
            } => Some(vec![out_channels, in_channels, kernel_h, kernel_w]),
            _ => None,
        }
    }

    /// Number of output neurons (dense) or channels (conv); the bias length
    /// and the length of a dropout mask.
    pub fn output_units(&self) -> Option<usize> {
        match *self {
            LayerSpec::Dense { fan_out, .. } => Some(fan_out),
            LayerSpec::Conv2d { out_channels, .. } => Some(out_channels),
            _ => None,
        }
    }

    pub(crate) fn conv_geometry(&self, input: &[usize]) -> Option<ConvGeometry> {
        match (*self, input) {
            (
                LayerSpec::Conv2d {
                    in_channels,
                    kernel_h,
                    kernel_w,
                    stride,
                    pad,
                    ..
                },
                &[_, h, w],
            ) => Some(ConvGeometry {
                in_channels,
                height: h,
                width: w,
                kernel_h,
                kernel_w,
                stride,
                pad,
            }),
            _ => None,
        }
    }

    /// Per-sample output shape for the given per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |want: &str| {
            Error::dim(format!(
                "{} layer expects {want} input, got shape {input:?}",
                self.name()
            ))
        };
        match *self {
            LayerSpec::Dense { fan_in, fan_out } => {
                if input != [fan_in] {
                    return Err(mismatch(&format!("[{fan_in}]")));
                }
                if fan_out == 0 {
                    return Err(Error::dim("dense fan_out must be positive"));
                }
                Ok(vec![fan_out])
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel_h,
                kernel_w,
                stride,
                pad,
            } => {
                let &[c, h, w] = input else {
                    return Err(mismatch("C×H×W"));
                };
                if c != in_channels {
                    return Err(mismatch(&format!("{in_channels} channels")));
                }
                if out_channels == 0 {
                    return Err(Error::dim("conv2d out_channels must be positive"));
                }
                let oh = conv_out_dim(h, kernel_h, stride, pad)?;
                let ow = conv_out_dim(w, kernel_w, stride, pad)?;
                Ok(vec![out_channels, oh, ow])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Maxpool2 => match *input {
                [c, h, w] if h >= 2 && w >= 2 => Ok(vec![c, h / 2, w / 2]),
                _ => Err(mismatch("C×H×W with H, W ≥ 2")),
            },
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Softmax => match input {
                [_] => Ok(input.to_vec()),
                _ => Err(mismatch("a vector")),
            },
        }
    }
}

/// Elementwise nonlinearity applied after a weight-bearing layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

/// Layer declaration with input sizes left to shape inference; the form used
/// by experiment configuration files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerDecl {
    Dense {
        units: usize,
    },
    Conv2d {
        filters: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        pad: usize,
    },
    Relu,
    Maxpool2,
    Flatten,
    Softmax,
}

fn one() -> usize {
    1
}

/// Resolve declarations into concrete layer specs by propagating shapes.
pub fn resolve_layers(input_shape: &[usize], decls: &[LayerDecl]) -> Result<Vec<LayerSpec>> {
    let mut shape = input_shape.to_vec();
    let mut layers = Vec::with_capacity(decls.len());
    for decl in decls {
        let spec = match *decl {
            LayerDecl::Dense { units } => match shape.as_slice() {
                &[fan_in] => LayerSpec::Dense {
                    fan_in,
                    fan_out: units,
                },
                s => {
                    return Err(Error::config(format!(
                        "dense layer needs a flat input, got {s:?} (insert a flatten layer)"
                    )))
                }
            },
            LayerDecl::Conv2d {
                filters,
                kernel,
                stride,
                pad,
            } => match shape.as_slice() {
                &[c, _, _] => LayerSpec::Conv2d {
                    in_channels: c,
                    out_channels: filters,
                    kernel_h: kernel,
                    kernel_w: kernel,
                    stride,
                    pad,
                },
                s => return Err(Error::config(format!("conv2d needs C×H×W input, got {s:?}"))),
            },
            LayerDecl::Relu => LayerSpec::Relu,
            LayerDecl::Maxpool2 => LayerSpec::Maxpool2,
            LayerDecl::Flatten => LayerSpec::Flatten,
            LayerDecl::Softmax => LayerSpec::Softmax,
        };
        shape = spec.output_shape(&shape)?;
        layers.push(spec);
    }
    Ok(layers)
}

/// The desk-scale CNN: conv(16,3×3) / relu / pool / conv(32,3×3) / relu /
/// pool / flatten / dense(128) / relu / dense(classes) / softmax.
pub fn default_cnn_decls(n_classes: usize) -> Vec<LayerDecl> {
    vec![
        LayerDecl::Conv2d {
            filters: 16,
            kernel: 3,
            stride: 1,
            pad: 0,
        },
        LayerDecl::Relu,
        LayerDecl::Maxpool2,
        LayerDecl::Conv2d {
            filters: 32,
            kernel: 3,
            stride: 1,
            pad: 0,
        },
        LayerDecl::Relu,
        LayerDecl::Maxpool2,
        LayerDecl::Flatten,
        LayerDecl::Dense { units: 128 },
        LayerDecl::Relu,
        LayerDecl::Dense { units: n_classes },
        LayerDecl::Softmax,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_cnn_shapes_on_28x28() {
        let layers = resolve_layers(&[1, 28, 28], &default_cnn_decls(10)).unwrap();
        let mut shape = vec![1, 28, 28];
        let mut shapes = vec![];
        for l in &layers {
            shape = l.output_shape(&shape).unwrap();
            shapes.push(shape.clone());
        }
        assert_eq!(shapes[0], vec![16, 26, 26]);
        assert_eq!(shapes[2], vec![16, 13, 13]);
        assert_eq!(shapes[3], vec![32, 11, 11]);
        assert_eq!(shapes[5], vec![32, 5, 5]);
        assert_eq!(shapes[6], vec![800]);
        assert_eq!(layers[7], LayerSpec::Dense { fan_in: 800, fan_out: 128 });
        assert_eq!(layers.iter().filter(|l| l.is_weight_bearing()).count(), 4);
    }

    #[test]
    fn dense_without_flatten_is_a_config_error() {
        let err = resolve_layers(&[1, 4, 4], &[LayerDecl::Dense { units: 3 }]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn layer_decl_json_rejects_unknown_keys() {
        let ok: LayerDecl = serde_json::from_str(r#"{"kind":"conv2d","filters":4,"kernel":3}"#).unwrap();
        assert_eq!(
            ok,
            LayerDecl::Conv2d {
                filters: 4,
                kernel: 3,
                stride: 1,
                pad: 0
            }
        );
        assert!(serde_json::from_str::<LayerDecl>(r#"{"kind":"dense","units":3,"x":1}"#).is_err());
    }
}
