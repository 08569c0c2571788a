//! Minimal CNN inference runtime with reverse-mode gradients of a class
//! score with respect to a designated convolutional layer's activations.
//!
//! The runtime supports exactly the layer kinds the evaluation needs:
//! square conv2d, ReLU, 2x2 max pooling, global average pooling and a fully
//! connected head. Models are immutable after construction and safe to share
//! across threads; forward and gradient passes allocate per-call state only.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Layer hyperparameters. Conv kernels are square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LayerKind {
    #[serde(rename = "conv2d")]
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    #[serde(rename = "relu")]
    Relu,
    #[serde(rename = "maxpool2x2")]
    MaxPool2x2,
    #[serde(rename = "global_avg_pool")]
    GlobalAvgPool,
    #[serde(rename = "fully_connected")]
    FullyConnected { in_dim: usize, out_dim: usize },
}

impl LayerKind {
    pub fn is_parametric(&self) -> bool {
        matches!(
            self,
            LayerKind::Conv2d { .. } | LayerKind::FullyConnected { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
}

/// Weight and bias of a parametric layer.
///
/// Conv weight is `[out, in, kh, kw]` with bias `[out]`; fully connected
/// weight is `[out, in]` with bias `[out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Activations of the target conv layer: `N_l` channels of `H_l x W_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationStack {
    maps: Tensor,
}

impl ActivationStack {
    pub fn new(maps: Tensor) -> Result<Self> {
        if maps.rank() != 3 || maps.shape().contains(&0) {
            return Err(Error::ShapeMismatch(format!(
                "activation stack expects non-empty [N,H,W], got {:?}",
                maps.shape()
            )));
        }
        Ok(ActivationStack { maps })
    }

    pub fn channels(&self) -> usize {
        self.maps.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.maps.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.maps.shape()[2]
    }

    pub fn maps(&self) -> &Tensor {
        &self.maps
    }

    /// One channel as a flat slice of `H_l * W_l` values.
    pub fn channel(&self, k: usize) -> &[f64] {
        let plane = self.height() * self.width();
        &self.maps.data()[k * plane..(k + 1) * plane]
    }
}

/// Result of a forward pass: pre-softmax scores, probabilities, and the
/// cached target-layer activations.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub scores: Tensor,
    pub probs: Tensor,
    pub activations: ActivationStack,
}

/// Intermediate value flowing between layers.
#[derive(Debug, Clone)]
enum Value {
    Feat(Tensor),
    Flat(Tensor),
}

impl Value {
    fn feat(&self) -> &Tensor {
        match self {
            Value::Feat(t) => t,
            Value::Flat(_) => unreachable!("expected feature map"),
        }
    }

    fn flat(&self) -> &Tensor {
        match self {
            Value::Flat(t) => t,
            Value::Feat(_) => unreachable!("expected flat vector"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ValueShape {
    Feat(usize, usize, usize),
    Flat(usize),
}

/// An immutable CNN: ordered layers, weights, and the designated target
/// conv layer whose activations feed the CAM methods.
#[derive(Debug, Clone)]
pub struct Model {
    layers: Vec<LayerSpec>,
    params: Vec<Option<LayerParams>>,
    target_layer: String,
    target_index: usize,
    num_classes: usize,
    input_shape: [usize; 3],
}

impl Model {
    pub fn new(
        layers: Vec<LayerSpec>,
        params: Vec<Option<LayerParams>>,
        target_layer: String,
        num_classes: usize,
        input_shape: [usize; 3],
    ) -> Result<Self> {
        if layers.len() != params.len() {
            return Err(Error::Contract(format!(
                "{} layers but {} parameter slots",
                layers.len(),
                params.len()
            )));
        }
        if layers.is_empty() {
            return Err(Error::Contract("model needs at least one layer".into()));
        }
        for (i, spec) in layers.iter().enumerate() {
            if layers[..i].iter().any(|s| s.name == spec.name) {
                return Err(Error::Contract(format!(
                    "duplicate layer name '{}'",
                    spec.name
                )));
            }
        }
        let target_index = layers
            .iter()
            .position(|s| s.name == target_layer)
            .ok_or_else(|| Error::Contract(format!("target layer '{target_layer}' not found")))?;
        if !matches!(layers[target_index].kind, LayerKind::Conv2d { .. }) {
            return Err(Error::Contract(format!(
                "target layer '{target_layer}' is not conv2d"
            )));
        }

        // Walk shapes through the stack and validate parameter tensors.
        let mut shape = ValueShape::Feat(input_shape[0], input_shape[1], input_shape[2]);
        for (spec, param) in layers.iter().zip(&params) {
            if spec.kind.is_parametric() != param.is_some() {
                return Err(Error::Contract(format!(
                    "layer '{}' parameter presence does not match its kind",
                    spec.name
                )));
            }
            shape = infer_output_shape(&spec.name, &spec.kind, shape)?;
            if let (
                LayerKind::Conv2d {
                    in_ch,
                    out_ch,
                    kernel,
                    ..
                },
                Some(p),
            ) = (&spec.kind, param)
            {
                let want = [*out_ch, *in_ch, *kernel, *kernel];
                if p.weight.shape() != want || p.bias.shape() != [*out_ch] {
                    return Err(Error::Contract(format!(
                        "layer '{}' weight/bias shapes do not match its hyperparameters",
                        spec.name
                    )));
                }
            }
            if let (LayerKind::FullyConnected { in_dim, out_dim }, Some(p)) = (&spec.kind, param) {
                if p.weight.shape() != [*out_dim, *in_dim] || p.bias.shape() != [*out_dim] {
                    return Err(Error::Contract(format!(
                        "layer '{}' weight/bias shapes do not match its hyperparameters",
                        spec.name
                    )));
                }
            }
        }
        match shape {
            ValueShape::Flat(d) if d == num_classes => {}
            other => {
                return Err(Error::Contract(format!(
                    "model output is {other:?}, expected {num_classes} class scores"
                )))
            }
        }

        Ok(Model {
            layers,
            params,
            target_layer,
            target_index,
            num_classes,
            input_shape,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self, index: usize) -> Option<&LayerParams> {
        self.params[index].as_ref()
    }

    pub fn target_layer(&self) -> &str {
        &self.target_layer
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    /// True when everything above the target layer is `[ReLU]? -> GAP -> FC`,
    /// the family where the original CAM weighting is defined.
    pub fn head_is_gap_fc(&self) -> bool {
        let rest: Vec<&LayerKind> = self.layers[self.target_index + 1..]
            .iter()
            .map(|s| &s.kind)
            .collect();
        matches!(
            rest.as_slice(),
            [LayerKind::GlobalAvgPool, LayerKind::FullyConnected { .. }]
                | [
                    LayerKind::Relu,
                    LayerKind::GlobalAvgPool,
                    LayerKind::FullyConnected { .. }
                ]
        )
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let want = [
            self.input_shape[0],
            self.input_shape[1],
            self.input_shape[2],
        ];
        if x.shape() != want {
            return Err(Error::ShapeMismatch(format!(
                "input shape {:?}, model expects {:?}",
                x.shape(),
                want
            )));
        }
        Ok(())
    }

    /// Full forward pass; caches the target layer's activations.
    pub fn forward(&self, x: &Tensor) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let (inputs, last) = self.run_layers(x)?;
        // The target layer's output is the next layer's input; a conv target
        // is never the final layer (the head ends in scores).
        let activations = ActivationStack::new(inputs[self.target_index + 1].feat().clone())?;
        let scores = last.flat().clone();
        let probs = softmax(&scores);
        Ok(ForwardTrace {
            scores,
            probs,
            activations,
        })
    }

    /// Probability of class `c` on input `x`. Leaner than [`Model::forward`]:
    /// no intermediate values are retained, which matters for the
    /// thousands of forward passes the curve metrics make.
    pub fn score_on(&self, x: &Tensor, c: usize) -> Result<f64> {
        self.check_input(x)?;
        self.check_class(c)?;
        let mut current = Value::Feat(x.clone());
        for i in 0..self.layers.len() {
            current = self.apply_layer(i, &current)?;
        }
        Ok(softmax(current.flat()).data()[c])
    }

    /// Re-runs only the layers above the target, substituting `acts` for the
    /// target layer's output. Returns pre-softmax scores.
    pub fn forward_from_target(&self, acts: &Tensor) -> Result<Tensor> {
        let mut value = Value::Feat(acts.clone());
        for i in self.target_index + 1..self.layers.len() {
            value = self.apply_layer(i, &value)?;
        }
        Ok(value.flat().clone())
    }

    /// Gradient of the pre-softmax score for class `c` with respect to the
    /// target layer's activations, `[N_l, H_l, W_l]`.
    pub fn grad_activations(&self, x: &Tensor, c: usize) -> Result<Tensor> {
        self.check_input(x)?;
        self.check_class(c)?;
        let (inputs, _) = self.run_layers(x)?;

        // Seed: d s_c / d scores = one-hot at c.
        let mut grad = {
            let mut g = Tensor::zeros(vec![self.num_classes]);
            g.data_mut()[c] = 1.0;
            Value::Flat(g)
        };
        for i in (self.target_index + 1..self.layers.len()).rev() {
            grad = self.backward_layer(i, &inputs[i], &grad)?;
        }
        match grad {
            Value::Feat(t) => Ok(t),
            Value::Flat(_) => Err(Error::Contract(
                "gradient did not reduce to a feature map at the target layer".into(),
            )),
        }
    }

    fn check_class(&self, c: usize) -> Result<()> {
        if c >= self.num_classes {
            return Err(Error::Contract(format!(
                "class index {c} out of range for {} classes",
                self.num_classes
            )));
        }
        Ok(())
    }

    /// Runs all layers, returning each layer's input plus the final output.
    fn run_layers(&self, x: &Tensor) -> Result<(Vec<Value>, Value)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = Value::Feat(x.clone());
        for i in 0..self.layers.len() {
            let next = self.apply_layer(i, &current)?;
            inputs.push(current);
            current = next;
        }
        Ok((inputs, current))
    }

    fn apply_layer(&self, index: usize, input: &Value) -> Result<Value> {
        let spec = &self.layers[index];
        match &spec.kind {
            LayerKind::Conv2d {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
            } => {
                let p = self.params[index].as_ref().unwrap();
                let out = conv2d_forward(
                    input.feat(),
                    &p.weight,
                    &p.bias,
                    *in_ch,
                    *out_ch,
                    *kernel,
                    *stride,
                    *padding,
                )?;
                Ok(Value::Feat(out))
            }
            LayerKind::Relu => Ok(match input {
                Value::Feat(t) => Value::Feat(relu(t)),
                Value::Flat(t) => Value::Flat(relu(t)),
            }),
            LayerKind::MaxPool2x2 => Ok(Value::Feat(maxpool2x2_forward(input.feat()))),
            LayerKind::GlobalAvgPool => Ok(Value::Flat(gap_forward(input.feat()))),
            LayerKind::FullyConnected { .. } => {
                let p = self.params[index].as_ref().unwrap();
                Ok(Value::Flat(fc_forward(input.flat(), &p.weight, &p.bias)))
            }
        }
    }

    fn backward_layer(&self, index: usize, input: &Value, grad_out: &Value) -> Result<Value> {
        let spec = &self.layers[index];
        match &spec.kind {
            LayerKind::Conv2d {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
            } => {
                let p = self.params[index].as_ref().unwrap();
                let g = conv2d_backward_input(
                    input.feat().shape(),
                    &p.weight,
                    grad_out.feat(),
                    *in_ch,
                    *out_ch,
                    *kernel,
                    *stride,
                    *padding,
                );
                Ok(Value::Feat(g))
            }
            LayerKind::Relu => Ok(match (input, grad_out) {
                (Value::Feat(x), Value::Feat(g)) => Value::Feat(relu_backward(x, g)),
                (Value::Flat(x), Value::Flat(g)) => Value::Flat(relu_backward(x, g)),
                _ => unreachable!("relu input/gradient kinds must agree"),
            }),
            LayerKind::MaxPool2x2 => Ok(Value::Feat(maxpool2x2_backward(
                input.feat(),
                grad_out.feat(),
            ))),
            LayerKind::GlobalAvgPool => Ok(Value::Feat(gap_backward(
                input.feat().shape(),
                grad_out.flat(),
            ))),
            LayerKind::FullyConnected { .. } => {
                let p = self.params[index].as_ref().unwrap();
                Ok(Value::Flat(fc_backward_input(&p.weight, grad_out.flat())))
            }
        }
    }
}

fn infer_output_shape(name: &str, kind: &LayerKind, input: ValueShape) -> Result<ValueShape> {
    let err = |msg: String| Err(Error::Contract(format!("layer '{name}': {msg}")));
    match kind {
        LayerKind::Conv2d {
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
        } => match input {
            ValueShape::Feat(c, h, w) => {
                if c != *in_ch {
                    return err(format!("expects {in_ch} input channels, got {c}"));
                }
                if *kernel == 0 || *stride == 0 || *out_ch == 0 {
                    return err("kernel, stride and out_ch must be positive".into());
                }
                let eh = h + 2 * padding;
                let ew = w + 2 * padding;
                if eh < *kernel || ew < *kernel {
                    return err(format!(
                        "kernel {kernel} larger than padded input {eh}x{ew}"
                    ));
                }
                Ok(ValueShape::Feat(
                    *out_ch,
                    (eh - kernel) / stride + 1,
                    (ew - kernel) / stride + 1,
                ))
            }
            ValueShape::Flat(_) => err("conv2d needs a feature map input".into()),
        },
        LayerKind::Relu => Ok(input),
        LayerKind::MaxPool2x2 => match input {
            ValueShape::Feat(c, h, w) => {
                if h < 2 || w < 2 {
                    return err(format!("maxpool2x2 needs at least 2x2 input, got {h}x{w}"));
                }
                Ok(ValueShape::Feat(c, h / 2, w / 2))
            }
            ValueShape::Flat(_) => err("maxpool2x2 needs a feature map input".into()),
        },
        LayerKind::GlobalAvgPool => match input {
            ValueShape::Feat(c, _, _) => Ok(ValueShape::Flat(c)),
            ValueShape::Flat(_) => err("global_avg_pool needs a feature map input".into()),
        },
        LayerKind::FullyConnected { in_dim, out_dim } => match input {
            ValueShape::Flat(d) => {
                if d != *in_dim {
                    return err(format!("expects {in_dim} inputs, got {d}"));
                }
                Ok(ValueShape::Flat(*out_dim))
            }
            ValueShape::Feat(..) => err("fully_connected needs a flat input".into()),
        },
    }
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(scores: &Tensor) -> Tensor {
    let max = scores.max();
    let exps: Vec<f64> = scores.data().iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Tensor::new(
        scores.shape().to_vec(),
        exps.into_iter().map(|e| e / sum).collect(),
    )
    .expect("softmax output is finite by construction")
}

fn relu(t: &Tensor) -> Tensor {
    Tensor::new(
        t.shape().to_vec(),
        t.data().iter().map(|&v| v.max(0.0)).collect(),
    )
    .unwrap()
}

fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(input.shape().to_vec(), data).unwrap()
}

#[allow(clippy::too_many_arguments)]
fn conv2d_forward(
    x: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    debug_assert_eq!(c, in_ch);
    let out_h = (h + 2 * padding - kernel) / stride + 1;
    let out_w = (w + 2 * padding - kernel) / stride + 1;
    let mut out = vec![0.0; out_ch * out_h * out_w];
    let wd = weight.data();
    let xd = x.data();
    // Tap-major accumulation over contiguous rows. Per output pixel the
    // additions still happen in (i, ky, kx) order, so results are
    // bit-identical to the naive pixel-major loop.
    for o in 0..out_ch {
        let plane = &mut out[o * out_h * out_w..(o + 1) * out_h * out_w];
        plane.fill(bias.data()[o]);
        for i in 0..in_ch {
            let xplane = &xd[i * h * w..(i + 1) * h * w];
            for ky in 0..kernel {
                for kx in 0..kernel {
                    let wv = wd[((o * in_ch + i) * kernel + ky) * kernel + kx];
                    for oy in 0..out_h {
                        let iy = (oy * stride + ky) as i64 - padding as i64;
                        if iy < 0 || iy >= h as i64 {
                            continue;
                        }
                        let xrow = &xplane[iy as usize * w..iy as usize * w + w];
                        let orow = &mut plane[oy * out_w..(oy + 1) * out_w];
                        if stride == 1 {
                            let shift = kx as i64 - padding as i64;
                            let ox_start = (-shift).max(0) as usize;
                            let ox_end = ((w as i64 - shift).clamp(0, out_w as i64)) as usize;
                            for ox in ox_start..ox_end {
                                orow[ox] += wv * xrow[(ox as i64 + shift) as usize];
                            }
                        } else {
                            for (ox, ov) in orow.iter_mut().enumerate() {
                                let ix = (ox * stride + kx) as i64 - padding as i64;
                                if ix >= 0 && ix < w as i64 {
                                    *ov += wv * xrow[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![out_ch, out_h, out_w], out)
}

#[allow(clippy::too_many_arguments)]
fn conv2d_backward_input(
    in_shape: &[usize],
    weight: &Tensor,
    grad_out: &Tensor,
    in_ch: usize,
    _out_ch: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Tensor {
    let (h, w) = (in_shape[1], in_shape[2]);
    let (go_c, go_h, go_w) = (
        grad_out.shape()[0],
        grad_out.shape()[1],
        grad_out.shape()[2],
    );
    let mut grad_in = Tensor::zeros(vec![in_ch, h, w]);
    let wd = weight.data();
    for o in 0..go_c {
        for oy in 0..go_h {
            for ox in 0..go_w {
                let g = grad_out.at3(o, oy, ox);
                if g == 0.0 {
                    continue;
                }
                for i in 0..in_ch {
                    for ky in 0..kernel {
                        let iy = (oy * stride + ky) as i64 - padding as i64;
                        if iy < 0 || iy >= h as i64 {
                            continue;
                        }
                        for kx in 0..kernel {
                            let ix = (ox * stride + kx) as i64 - padding as i64;
                            if ix < 0 || ix >= w as i64 {
                                continue;
                            }
                            let wv = wd[((o * in_ch + i) * kernel + ky) * kernel + kx];
                            let idx = (i * h + iy as usize) * w + ix as usize;
                            grad_in.data_mut()[idx] += wv * g;
                        }
                    }
                }
            }
        }
    }
    grad_in
}

fn maxpool2x2_forward(x: &Tensor) -> Tensor {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(vec![c, oh, ow]);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        best = best.max(x.at3(ch, 2 * oy + dy, 2 * ox + dx));
                    }
                }
                out.set3(ch, oy, ox, best);
            }
        }
    }
    out
}

/// Gradient routes to the first (row-major) argmax of each window.
fn maxpool2x2_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (oh, ow) = (grad_out.shape()[1], grad_out.shape()[2]);
    let mut grad_in = Tensor::zeros(vec![c, h, w]);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_pos = (0, 0);
                for dy in 0..2 {
                    for dx in 0..2 {
                        let v = input.at3(ch, 2 * oy + dy, 2 * ox + dx);
                        if v > best {
                            best = v;
                            best_pos = (2 * oy + dy, 2 * ox + dx);
                        }
                    }
                }
                let idx = (ch * h + best_pos.0) * w + best_pos.1;
                grad_in.data_mut()[idx] += grad_out.at3(ch, oy, ox);
            }
        }
    }
    grad_in
}

fn gap_forward(x: &Tensor) -> Tensor {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let plane = (h * w) as f64;
    let mut out = Tensor::zeros(vec![c]);
    for ch in 0..c {
        let mut acc = 0.0;
        for y in 0..h {
            for x_ in 0..w {
                acc += x.at3(ch, y, x_);
            }
        }
        out.data_mut()[ch] = acc / plane;
    }
    out
}

fn gap_backward(in_shape: &[usize], grad_out: &Tensor) -> Tensor {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let plane = (h * w) as f64;
    let mut grad_in = Tensor::zeros(vec![c, h, w]);
    for ch in 0..c {
        let g = grad_out.data()[ch] / plane;
        for y in 0..h {
            for x_ in 0..w {
                grad_in.set3(ch, y, x_, g);
            }
        }
    }
    grad_in
}

fn fc_forward(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Tensor {
    let out_dim = weight.shape()[0];
    let in_dim = weight.shape()[1];
    let mut out = Tensor::zeros(vec![out_dim]);
    for o in 0..out_dim {
        let mut acc = bias.data()[o];
        for i in 0..in_dim {
            acc += weight.data()[o * in_dim + i] * x.data()[i];
        }
        out.data_mut()[o] = acc;
    }
    out
}

fn fc_backward_input(weight: &Tensor, grad_out: &Tensor) -> Tensor {
    let out_dim = weight.shape()[0];
    let in_dim = weight.shape()[1];
    let mut grad_in = Tensor::zeros(vec![in_dim]);
    for o in 0..out_dim {
        let g = grad_out.data()[o];
        for i in 0..in_dim {
            grad_in.data_mut()[i] += weight.data()[o * in_dim + i] * g;
        }
    }
    grad_in
}

/// Seeded uniform weights in [-0.5, 0.5], quantized to f32 so that model
/// files round-trip bit-exactly. Sampling order: layer declaration order,
/// weight before bias, row-major.
pub fn seeded_params(layers: &[LayerSpec], seed: u64) -> Vec<Option<LayerParams>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| (rng.random::<f64>() - 0.5) as f32 as f64)
            .collect()
    };
    layers
        .iter()
        .map(|spec| match &spec.kind {
            LayerKind::Conv2d {
                in_ch,
                out_ch,
                kernel,
                ..
            } => Some(LayerParams {
                weight: Tensor::new(
                    vec![*out_ch, *in_ch, *kernel, *kernel],
                    draw(out_ch * in_ch * kernel * kernel),
                )
                .unwrap(),
                bias: Tensor::new(vec![*out_ch], draw(*out_ch)).unwrap(),
            }),
            LayerKind::FullyConnected { in_dim, out_dim } => Some(LayerParams {
                weight: Tensor::new(vec![*out_dim, *in_dim], draw(out_dim * in_dim)).unwrap(),
                bias: Tensor::new(vec![*out_dim], draw(*out_dim)).unwrap(),
            }),
            _ => None,
        })
        .collect()
}

/// Reference desk backbone: conv(3->8)/ReLU/maxpool -> conv(8->16)/ReLU
/// (target layer) -> GAP -> fc.
pub fn tinygap_layers(num_classes: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec {
            name: "conv1".into(),
            kind: LayerKind::Conv2d {
                in_ch: 3,
                out_ch: 8,
                kernel: 3,
                stride: 1,
                padding: 1,
            },
        },
        LayerSpec {
            name: "relu1".into(),
            kind: LayerKind::Relu,
        },
        LayerSpec {
            name: "pool1".into(),
            kind: LayerKind::MaxPool2x2,
        },
        LayerSpec {
            name: "conv2".into(),
            kind: LayerKind::Conv2d {
                in_ch: 8,
                out_ch: 16,
                kernel: 3,
                stride: 1,
                padding: 1,
            },
        },
        LayerSpec {
            name: "relu2".into(),
            kind: LayerKind::Relu,
        },
        LayerSpec {
            name: "gap".into(),
            kind: LayerKind::GlobalAvgPool,
        },
        LayerSpec {
            name: "fc".into(),
            kind: LayerKind::FullyConnected {
                in_dim: 16,
                out_dim: num_classes,
            },
        },
    ]
}

/// Seeded TinyGAP model for a `3 x size x size` input.
pub fn tinygap(num_classes: usize, size: usize, seed: u64) -> Model {
    let layers = tinygap_layers(num_classes);
    let params = seeded_params(&layers, seed);
    Model::new(layers, params, "conv2".into(), num_classes, [3, size, size])
        .expect("tinygap layout is statically valid")
}
