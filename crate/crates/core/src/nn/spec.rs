use crate::error::{Error, Result};

/// One layer of a feed-forward network.
///
/// Convolutions use stride 1 and no padding. A `Dense` layer following a
/// spatial layer flattens its input per example in (channel, row, column)
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Conv {
        out_channels: usize,
        kernel: usize,
        relu: bool,
    },
    MaxPool {
        size: usize,
        stride: usize,
    },
    Dense {
        units: usize,
        relu: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl InputShape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        InputShape {
            channels,
            height,
            width,
        }
    }

    pub fn volume(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Layer list plus input shape. The final layer is a linear `Dense` layer
/// whose width is the class count; softmax is applied by the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    input: InputShape,
    layers: Vec<Layer>,
    plan: Plan,
}

impl ModelSpec {
    pub fn new(input: InputShape, layers: Vec<Layer>) -> Result<Self> {
        let plan = Plan::build(input, &layers)?;
        Ok(ModelSpec {
            input,
            layers,
            plan,
        })
    }

    /// The two-conv CNN used for all experiments: conv 5x5/16, pool 2x2,
    /// conv 5x5/32, pool 2x2, dense 512, dense `classes`.
    pub fn default_cnn(input: InputShape, classes: usize) -> Result<Self> {
        ModelSpec::new(
            input,
            vec![
                Layer::Conv {
                    out_channels: 16,
                    kernel: 5,
                    relu: true,
                },
                Layer::MaxPool { size: 2, stride: 2 },
                Layer::Conv {
                    out_channels: 32,
                    kernel: 5,
                    relu: true,
                },
                Layer::MaxPool { size: 2, stride: 2 },
                Layer::Dense {
                    units: 512,
                    relu: true,
                },
                Layer::Dense {
                    units: classes,
                    relu: false,
                },
            ],
        )
    }

    pub fn input(&self) -> InputShape {
        self.input
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn classes(&self) -> usize {
        self.plan.classes
    }

    pub fn param_count(&self) -> usize {
        self.plan.param_count
    }

    pub(crate) fn plan(&self) -> &Plan {
        &self.plan
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LayerPlan {
    Conv {
        in_c: usize,
        in_h: usize,
        in_w: usize,
        out_c: usize,
        k: usize,
        out_h: usize,
        out_w: usize,
        relu: bool,
        w_off: usize,
        b_off: usize,
    },
    Pool {
        c: usize,
        in_h: usize,
        in_w: usize,
        size: usize,
        stride: usize,
        out_h: usize,
        out_w: usize,
    },
    Dense {
        inputs: usize,
        units: usize,
        relu: bool,
        /// Input arrives as (channels, batch, height, width) and must be
        /// flattened per example first.
        from_spatial: Option<(usize, usize)>,
        w_off: usize,
        b_off: usize,
    },
}

/// Shapes and parameter offsets derived from a [`ModelSpec`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct Plan {
    pub layers: Vec<LayerPlan>,
    pub param_count: usize,
    pub classes: usize,
}

impl Plan {
    fn build(input: InputShape, layers: &[Layer]) -> Result<Plan> {
        if input.volume() == 0 {
            return Err(Error::config("input shape has a zero dimension"));
        }
        let mut out = Vec::with_capacity(layers.len());
        // Either Some((c, h, w)) while spatial, or None once flattened.
        let mut spatial = Some((input.channels, input.height, input.width));
        let mut flat = input.volume();
        let mut offset = 0;

        for (i, layer) in layers.iter().enumerate() {
            match *layer {
                Layer::Conv {
                    out_channels,
                    kernel,
                    relu,
                } => {
                    let (c, h, w) = spatial.ok_or_else(|| {
                        Error::config(format!("layer {i}: convolution after a dense layer"))
                    })?;
                    if kernel == 0 || out_channels == 0 || kernel > h || kernel > w {
                        return Err(Error::config(format!(
                            "layer {i}: kernel {kernel} does not fit input {h}x{w}"
                        )));
                    }
                    let (oh, ow) = (h - kernel + 1, w - kernel + 1);
                    let w_off = offset;
                    let b_off = w_off + out_channels * c * kernel * kernel;
                    offset = b_off + out_channels;
                    out.push(LayerPlan::Conv {
                        in_c: c,
                        in_h: h,
                        in_w: w,
                        out_c: out_channels,
                        k: kernel,
                        out_h: oh,
                        out_w: ow,
                        relu,
                        w_off,
                        b_off,
                    });
                    spatial = Some((out_channels, oh, ow));
                    flat = out_channels * oh * ow;
                }
                Layer::MaxPool { size, stride } => {
                    let (c, h, w) = spatial.ok_or_else(|| {
                        Error::config(format!("layer {i}: pooling after a dense layer"))
                    })?;
                    if size == 0 || stride == 0 || size > h || size > w {
                        return Err(Error::config(format!(
                            "layer {i}: pool {size}/{stride} does not fit input {h}x{w}"
                        )));
                    }
                    let (oh, ow) = ((h - size) / stride + 1, (w - size) / stride + 1);
                    out.push(LayerPlan::Pool {
                        c,
                        in_h: h,
                        in_w: w,
                        size,
                        stride,
                        out_h: oh,
                        out_w: ow,
                    });
                    spatial = Some((c, oh, ow));
                    flat = c * oh * ow;
                }
                Layer::Dense { units, relu } => {
                    if units == 0 {
                        return Err(Error::config(format!("layer {i}: dense layer with 0 units")));
                    }
                    let from_spatial = spatial.map(|(c, h, w)| (c, h * w));
                    let w_off = offset;
                    let b_off = w_off + units * flat;
                    offset = b_off + units;
                    out.push(LayerPlan::Dense {
                        inputs: flat,
                        units,
                        relu,
                        from_spatial,
                        w_off,
                        b_off,
                    });
                    spatial = None;
                    flat = units;
                }
            }
        }

        match out.last() {
            Some(LayerPlan::Dense { relu: false, units, .. }) => Ok(Plan {
                classes: *units,
                layers: out,
                param_count: offset,
            }),
            _ => Err(Error::config(
                "the last layer must be a dense layer without activation",
            )),
        }
    }
}
