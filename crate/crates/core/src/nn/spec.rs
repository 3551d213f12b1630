use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::LABEL_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Mlp,
    Cnn,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Mlp => "mlp",
            Architecture::Cnn => "cnn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Zero padding that keeps the sequence length; the extra tap of an even
    /// kernel goes on the right.
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Dense { width: usize },
    Conv1d { filters: usize, kernel: usize, padding: Padding },
    Relu,
    Dropout { rate: f64 },
    /// Batch normalization with learnable scale and shift.
    Normalization,
    Flatten,
    /// Dense layer without activation, initialized for a linear output.
    Linear { width: usize },
}

/// Per-sample activation shape: `len` positions of `ch` channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub len: usize,
    pub ch: usize,
}

impl Shape {
    pub fn size(self) -> usize {
        self.len * self.ch
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub depth: usize,
    pub input_width: usize,
    pub output_width: usize,
    pub layers: Vec<LayerSpec>,
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

fn hidden_block(layer: LayerSpec, dropout: f64) -> [LayerSpec; 4] {
    [layer, LayerSpec::Relu, LayerSpec::Dropout { rate: dropout }, LayerSpec::Normalization]
}

impl ModelSpec {
    /// `depth` blocks of dense -> ReLU -> dropout -> normalization, then a linear head.
    pub fn mlp(input_width: usize, width: usize, depth: usize, dropout: f64) -> Self {
        let mut layers: Vec<LayerSpec> = (0..depth)
            .flat_map(|_| hidden_block(LayerSpec::Dense { width }, dropout))
            .collect();
        layers.push(LayerSpec::Linear { width: LABEL_DIM });
        ModelSpec {
            architecture: Architecture::Mlp,
            depth,
            input_width,
            output_width: LABEL_DIM,
            layers,
        }
    }

    /// `depth` blocks of same-padded conv -> ReLU -> dropout -> normalization,
    /// flattened into a linear head.
    pub fn cnn(input_width: usize, filters: usize, kernel: usize, depth: usize, dropout: f64) -> Self {
        let conv = LayerSpec::Conv1d {
            filters,
            kernel,
            padding: Padding::Same,
        };
        let mut layers: Vec<LayerSpec> = (0..depth).flat_map(|_| hidden_block(conv, dropout)).collect();
        layers.push(LayerSpec::Flatten);
        layers.push(LayerSpec::Linear { width: LABEL_DIM });
        ModelSpec {
            architecture: Architecture::Cnn,
            depth,
            input_width,
            output_width: LABEL_DIM,
            layers,
        }
    }

    /// Default network of each kind: width 256 or 64 filters of size 16, depth 4, dropout 0.2.
    pub fn default_for(architecture: Architecture, input_width: usize) -> Self {
        match architecture {
            Architecture::Mlp => Self::mlp(input_width, 256, 4, 0.2),
            Architecture::Cnn => Self::cnn(input_width, 64, 16, 4, 0.2),
        }
    }

    /// A dense network sees one position of `input_width` channels, a
    /// convolutional one `input_width` positions of one channel.
    pub fn input_shape(&self) -> Shape {
        match self.architecture {
            Architecture::Mlp => Shape {
                len: 1,
                ch: self.input_width,
            },
            Architecture::Cnn => Shape {
                len: self.input_width,
                ch: 1,
            },
        }
    }

    /// Output shape of every layer, checking widths, rates and kernels.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let mut s = self.input_shape();
        if s.size() == 0 {
            return Err(Error::Config("network input width must be positive".into()));
        }
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let bad = |what: &str| Error::Config(format!("layer {i}: {what}"));
            s = match *l {
                LayerSpec::Dense { width } | LayerSpec::Linear { width } => {
                    if width == 0 {
                        return Err(bad("width must be positive"));
                    }
                    Shape { len: 1, ch: width }
                }
                LayerSpec::Conv1d {
                    filters,
                    kernel,
                    padding,
                } => {
                    if filters == 0 || kernel == 0 {
                        return Err(bad("filters and kernel must be positive"));
                    }
                    let len = match padding {
                        Padding::Same => s.len,
                        Padding::Valid if kernel <= s.len => s.len - kernel + 1,
                        Padding::Valid => return Err(bad("kernel longer than input")),
                    };
                    Shape { len, ch: filters }
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(bad("dropout rate must be in [0, 1)"));
                    }
                    s
                }
                LayerSpec::Relu | LayerSpec::Normalization => s,
                LayerSpec::Flatten => Shape { len: 1, ch: s.size() },
            };
            out.push(s);
        }
        if s.size() != self.output_width {
            return Err(Error::shape(self.output_width, s.size()));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    /// Weights, biases and normalization scale/shift.
    pub fn trainable_parameters(&self) -> Result<usize> {
        let shapes = self.shapes()?;
        let mut prev = self.input_shape();
        let mut total = 0;
        for (l, s) in self.layers.iter().zip(&shapes) {
            total += match *l {
                LayerSpec::Dense { width } | LayerSpec::Linear { width } => prev.size() * width + width,
                LayerSpec::Conv1d { filters, kernel, .. } => kernel * prev.ch * filters + filters,
                LayerSpec::Normalization => 2 * s.ch,
                _ => 0,
            };
            prev = *s;
        }
        Ok(total)
    }

    /// Normalization running means and variances.
    pub fn state_parameters(&self) -> Result<usize> {
        let shapes = self.shapes()?;
        Ok(self
            .layers
            .iter()
            .zip(&shapes)
            .map(|(l, s)| if matches!(l, LayerSpec::Normalization) { 2 * s.ch } else { 0 })
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parameter_counts() {
        let cnn = ModelSpec::default_for(Architecture::Cnn, 16);
        let hidden_conv = 16 * 64 + 64 + 3 * (64 * 16 * 64 + 64);
        let bn = 4 * 2 * 64;
        let head = 16 * 64 * 6 + 6;
        assert_eq!(cnn.trainable_parameters().unwrap(), hidden_conv + bn + head);
        assert_eq!(cnn.trainable_parameters().unwrap(), 204_550);
        let total = cnn.trainable_parameters().unwrap() + cnn.state_parameters().unwrap();
        assert_eq!(total, 205_062);

        let mlp = ModelSpec::default_for(Architecture::Mlp, 16);
        assert_eq!(mlp.trainable_parameters().unwrap(), 205_318);
        let total = mlp.trainable_parameters().unwrap() + mlp.state_parameters().unwrap();
        assert_eq!(total, 207_366);
        // within 1% of the tabulated 207,36x
        assert!((total as f64 / 207_360.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn shapes_and_validation() {
        let cnn = ModelSpec::default_for(Architecture::Cnn, 16);
        let shapes = cnn.shapes().unwrap();
        assert_eq!(shapes[0], Shape { len: 16, ch: 64 });
        assert_eq!(shapes[shapes.len() - 2], Shape { len: 1, ch: 1024 });

        let mut bad = cnn.clone();
        bad.layers.pop();
        assert!(bad.validate().is_err());
        let mut bad = cnn.clone();
        bad.layers[2] = LayerSpec::Dropout { rate: 1.0 };
        assert!(bad.validate().is_err());
        let mut bad = cnn;
        bad.layers[0] = LayerSpec::Conv1d {
            filters: 4,
            kernel: 20,
            padding: Padding::Valid,
        };
        assert!(bad.validate().is_err());
    }
}
