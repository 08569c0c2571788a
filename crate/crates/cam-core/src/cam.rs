//! The attribution methods. All seven funnel through one assembler that
//! rectifies a weighted combination of the target layer's activation
//! channels, upsamples it to input resolution, and normalizes it into
//! [0, 1].

use crate::error::{Error, Result};
use crate::nn::{ActivationStack, Model};
use crate::tensor::{bilinear_upsample, normalize_max, Map2D, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Channel weights: one scalar per channel or one full spatial matrix per
/// channel.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightMap {
    Scalar(Tensor),
    Matrix(Tensor),
}

impl WeightMap {
    fn channels(&self) -> usize {
        match self {
            WeightMap::Scalar(t) => t.shape()[0],
            WeightMap::Matrix(t) => t.shape()[0],
        }
    }
}

/// A normalized, input-resolution saliency map.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub map: Map2D,
    /// Set when the rectified combination was numerically all-zero.
    pub degenerate: bool,
}

/// The input masked by its saliency map, channel by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationMap {
    pub masked_input: Tensor,
}

/// Method identifiers, stable CLI strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodId {
    #[serde(rename = "gap-cam")]
    GapCam,
    #[serde(rename = "grad-cam")]
    GradCam,
    #[serde(rename = "xgrad-cam")]
    XGradCam,
    #[serde(rename = "grad-cam++")]
    GradCamPp,
    #[serde(rename = "smooth-grad-cam++")]
    SmoothGradCamPp,
    #[serde(rename = "score-cam")]
    ScoreCam,
    #[serde(rename = "fake-cam")]
    FakeCam,
}

impl MethodId {
    pub const ALL: [MethodId; 7] = [
        MethodId::GapCam,
        MethodId::GradCam,
        MethodId::XGradCam,
        MethodId::GradCamPp,
        MethodId::SmoothGradCamPp,
        MethodId::ScoreCam,
        MethodId::FakeCam,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MethodId::GapCam => "gap-cam",
            MethodId::GradCam => "grad-cam",
            MethodId::XGradCam => "xgrad-cam",
            MethodId::GradCamPp => "grad-cam++",
            MethodId::SmoothGradCamPp => "smooth-grad-cam++",
            MethodId::ScoreCam => "score-cam",
            MethodId::FakeCam => "fake-cam",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method id '{s}'")))
    }
}

/// Per-method knobs the protocol leaves open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    /// Noisy samples averaged by smooth-grad-cam++.
    pub smooth_samples: usize,
    /// Noise std dev as a fraction of the input value range.
    pub smooth_sigma_frac: f64,
    /// Use pre-softmax scores instead of probabilities for score-cam's
    /// channel increases.
    pub scorecam_logits: bool,
    /// Seed for the smoothing noise.
    pub seed: u64,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            smooth_samples: 16,
            smooth_sigma_frac: 0.15,
            scorecam_logits: false,
            seed: 0,
        }
    }
}

/// Rectified linear combination of activation channels, upsampled to
/// `(out_h, out_w)` and max-normalized. Matrix weights multiply pointwise.
pub fn assemble_cam(
    acts: &ActivationStack,
    weights: &WeightMap,
    out_h: usize,
    out_w: usize,
) -> Result<SaliencyMap> {
    if weights.channels() != acts.channels() {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for {} channels",
            weights.channels(),
            acts.channels()
        )));
    }
    if let WeightMap::Matrix(m) = weights {
        if m.shape() != acts.maps().shape() {
            return Err(Error::ShapeMismatch(format!(
                "matrix weights {:?} vs activations {:?}",
                m.shape(),
                acts.maps().shape()
            )));
        }
    }
    let (h, w) = (acts.height(), acts.width());
    let plane = h * w;
    let mut combined = vec![0.0; plane];
    for k in 0..acts.channels() {
        let channel = acts.channel(k);
        match weights {
            WeightMap::Scalar(alpha) => {
                let a = alpha.data()[k];
                for (c, &v) in combined.iter_mut().zip(channel) {
                    *c += a * v;
                }
            }
            WeightMap::Matrix(m) => {
                let mw = &m.data()[k * plane..(k + 1) * plane];
                for i in 0..plane {
                    combined[i] += mw[i] * channel[i];
                }
            }
        }
    }
    for v in &mut combined {
        *v = v.max(0.0);
    }
    let rectified = Map2D::from_vec(h, w, combined)?;
    let upsampled = bilinear_upsample(&rectified, out_h, out_w)?;
    let normalized = normalize_max(&upsampled)?;
    Ok(SaliencyMap {
        map: normalized.map,
        degenerate: normalized.degenerate,
    })
}

/// Masks every channel of `x` by the saliency map.
pub fn explanation_map(x: &Tensor, s: &SaliencyMap) -> Result<ExplanationMap> {
    if x.rank() != 3 || x.shape()[1] != s.map.height() || x.shape()[2] != s.map.width() {
        return Err(Error::ShapeMismatch(format!(
            "input {:?} vs saliency {}x{}",
            x.shape(),
            s.map.height(),
            s.map.width()
        )));
    }
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut out = Tensor::zeros(vec![c, h, w]);
    for ch in 0..c {
        for y in 0..h {
            for x_ in 0..w {
                out.set3(ch, y, x_, x.at3(ch, y, x_) * s.map.get(y, x_));
            }
        }
    }
    Ok(ExplanationMap { masked_input: out })
}

fn input_hw(model: &Model) -> (usize, usize) {
    let [_, h, w] = model.input_shape();
    (h, w)
}

/// Original CAM: channel weights are the classifier's weights. Requires the
/// head above the target layer to be `[ReLU]? -> GAP -> FC`.
pub fn gap_cam(model: &Model, x: &Tensor, class: usize) -> Result<SaliencyMap> {
    if !model.head_is_gap_fc() {
        return Err(Error::UnsupportedArchitecture(
            "gap-cam requires a [ReLU] -> GAP -> FC head above the target layer".into(),
        ));
    }
    let trace = model.forward(x)?;
    if class >= model.num_classes() {
        return Err(Error::Contract(format!("class index {class} out of range")));
    }
    let fc_index = model.layers().len() - 1;
    let fc = model.params(fc_index).expect("head fc is parametric");
    let n = trace.activations.channels();
    let weights: Vec<f64> = (0..n).map(|k| fc.weight.data()[class * n + k]).collect();
    let (h, w) = input_hw(model);
    assemble_cam(
        &trace.activations,
        &WeightMap::Scalar(Tensor::new(vec![n], weights)?),
        h,
        w,
    )
}

/// Grad-CAM channel weights: the spatial mean of the score gradient.
pub fn grad_cam_weights(model: &Model, x: &Tensor, class: usize) -> Result<Tensor> {
    let grads = model.grad_activations(x, class)?;
    let (n, plane) = (grads.shape()[0], grads.shape()[1] * grads.shape()[2]);
    let weights: Vec<f64> = (0..n)
        .map(|k| {
            let g = &grads.data()[k * plane..(k + 1) * plane];
            g.iter().sum::<f64>() / plane as f64
        })
        .collect();
    Tensor::new(vec![n], weights)
}

/// Grad-CAM: channel weight is the spatial mean of the score gradient.
pub fn grad_cam(model: &Model, x: &Tensor, class: usize) -> Result<SaliencyMap> {
    let trace = model.forward(x)?;
    let weights = grad_cam_weights(model, x, class)?;
    let (h, w) = input_hw(model);
    assemble_cam(&trace.activations, &WeightMap::Scalar(weights), h, w)
}

const XGRAD_SUM_EPS: f64 = 1e-12;

/// XGrad-CAM channel weights: gradient weighted by the activation's share
/// of its channel mass. Channels whose activation sum is numerically zero
/// contribute nothing.
pub fn xgrad_cam_weights(model: &Model, x: &Tensor, class: usize) -> Result<Tensor> {
    let trace = model.forward(x)?;
    let grads = model.grad_activations(x, class)?;
    let acts = &trace.activations;
    let plane = acts.height() * acts.width();
    let n = acts.channels();
    let mut weights = Vec::with_capacity(n);
    for k in 0..n {
        let a = acts.channel(k);
        let g = &grads.data()[k * plane..(k + 1) * plane];
        let sum_a: f64 = a.iter().sum();
        if sum_a.abs() < XGRAD_SUM_EPS {
            weights.push(0.0);
            continue;
        }
        let alpha: f64 = a.iter().zip(g).map(|(&av, &gv)| av / sum_a * gv).sum();
        weights.push(alpha);
    }
    Tensor::new(vec![n], weights)
}

pub fn xgrad_cam(model: &Model, x: &Tensor, class: usize) -> Result<SaliencyMap> {
    let trace = model.forward(x)?;
    let weights = xgrad_cam_weights(model, x, class)?;
    let (h, w) = input_hw(model);
    assemble_cam(&trace.activations, &WeightMap::Scalar(weights), h, w)
}

const GCPP_DENOM_EPS: f64 = 1e-12;

/// Grad-CAM++ weights from activation sums and the first three gradient
/// powers. Shared by the plain and the smoothed variant.
fn gcpp_weights(acts: &Tensor, g1: &Tensor, g2: &Tensor, g3: &Tensor) -> Tensor {
    let (n, h, w) = (acts.shape()[0], acts.shape()[1], acts.shape()[2]);
    let plane = h * w;
    let mut weights = Tensor::zeros(vec![n]);
    for k in 0..n {
        let a = &acts.data()[k * plane..(k + 1) * plane];
        let sum_a: f64 = a.iter().sum();
        let mut alpha = 0.0;
        for i in 0..plane {
            let idx = k * plane + i;
            let denom = 2.0 * g2.data()[idx] + sum_a * g3.data()[idx];
            if denom.abs() < GCPP_DENOM_EPS {
                continue;
            }
            let beta = g2.data()[idx] / denom;
            alpha += beta * g1.data()[idx].max(0.0);
        }
        weights.data_mut()[k] = alpha;
    }
    weights
}

fn gcpp_from_parts(
    acts: Tensor,
    g1: &Tensor,
    g2: &Tensor,
    g3: &Tensor,
    out_h: usize,
    out_w: usize,
) -> Result<SaliencyMap> {
    let weights = gcpp_weights(&acts, g1, g2, g3);
    assemble_cam(
        &ActivationStack::new(acts)?,
        &WeightMap::Scalar(weights),
        out_h,
        out_w,
    )
}

/// Grad-CAM++ channel weights under the exponential-score reduction.
pub fn grad_cam_pp_weights(model: &Model, x: &Tensor, class: usize) -> Result<Tensor> {
    let trace = model.forward(x)?;
    let g1 = model.grad_activations(x, class)?;
    let g2 = g1.map(|v| v * v)?;
    let g3 = g1.map(|v| v * v * v)?;
    Ok(gcpp_weights(trace.activations.maps(), &g1, &g2, &g3))
}

/// Grad-CAM++ with the exponential-score reduction: second and third
/// derivatives collapse to the gradient's square and cube.
pub fn grad_cam_pp(model: &Model, x: &Tensor, class: usize) -> Result<SaliencyMap> {
    let trace = model.forward(x)?;
    let g1 = model.grad_activations(x, class)?;
    let g2 = g1.map(|v| v * v)?;
    let g3 = g1.map(|v| v * v * v)?;
    let (h, w) = input_hw(model);
    gcpp_from_parts(trace.activations.maps().clone(), &g1, &g2, &g3, h, w)
}

/// Smooth Grad-CAM++: the gradient powers (and the activations) entering the
/// Grad-CAM++ formulas are averaged over noisy copies of the input.
///
/// Noise is Normal(0, (sigma_frac * value_range)^2), seeded; samples are
/// drawn element by element in row-major order, one input after another.
pub fn smooth_grad_cam_pp(
    model: &Model,
    x: &Tensor,
    class: usize,
    cfg: &MethodConfig,
) -> Result<SaliencyMap> {
    if cfg.smooth_samples == 0 {
        return Err(Error::Contract(
            "smooth-grad-cam++ needs at least one sample".into(),
        ));
    }
    let sigma = cfg.smooth_sigma_frac * (x.max() - x.min());
    if sigma <= 0.0 {
        // Zero noise: every sample equals x, so this is plain grad-cam++.
        return grad_cam_pp(model, x, class);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::Contract(format!("invalid noise distribution: {e}")))?;

    let n = cfg.smooth_samples;
    let mut sum_acts: Option<Tensor> = None;
    let mut sum_g1: Option<Tensor> = None;
    let mut sum_g2: Option<Tensor> = None;
    let mut sum_g3: Option<Tensor> = None;
    for _ in 0..n {
        let noisy_data: Vec<f64> = x
            .data()
            .iter()
            .map(|&v| v + normal.sample(&mut rng))
            .collect();
        let noisy = Tensor::new(x.shape().to_vec(), noisy_data)?;
        let trace = model.forward(&noisy)?;
        let g1 = model.grad_activations(&noisy, class)?;
        accumulate(&mut sum_acts, trace.activations.maps());
        accumulate(&mut sum_g2, &g1.map(|v| v * v)?);
        accumulate(&mut sum_g3, &g1.map(|v| v * v * v)?);
        accumulate(&mut sum_g1, &g1);
    }
    let inv = 1.0 / n as f64;
    let mean_acts = sum_acts.unwrap().map(|v| v * inv)?;
    let mean_g1 = sum_g1.unwrap().map(|v| v * inv)?;
    let mean_g2 = sum_g2.unwrap().map(|v| v * inv)?;
    let mean_g3 = sum_g3.unwrap().map(|v| v * inv)?;
    let (h, w) = input_hw(model);
    gcpp_from_parts(mean_acts, &mean_g1, &mean_g2, &mean_g3, h, w)
}

fn accumulate(slot: &mut Option<Tensor>, t: &Tensor) {
    match slot {
        None => *slot = Some(t.clone()),
        Some(acc) => {
            for (a, &v) in acc.data_mut().iter_mut().zip(t.data()) {
                *a += v;
            }
        }
    }
}

/// Score-CAM channel weights: the softmax over channels of the confidence
/// increase of the channel-masked input over the baseline.
pub fn score_cam_weights(
    model: &Model,
    x: &Tensor,
    class: usize,
    cfg: &MethodConfig,
) -> Result<Tensor> {
    if class >= model.num_classes() {
        return Err(Error::Contract(format!("class index {class} out of range")));
    }
    let trace = model.forward(x)?;
    let acts = &trace.activations;
    let (h, w) = input_hw(model);
    let baseline = Tensor::zeros(x.shape().to_vec());
    let confidence = |input: &Tensor| -> Result<f64> {
        let t = model.forward(input)?;
        Ok(if cfg.scorecam_logits {
            t.scores.data()[class]
        } else {
            t.probs.data()[class]
        })
    };
    let base_conf = confidence(&baseline)?;
    let n = acts.channels();
    let mut increases = Vec::with_capacity(n);
    for k in 0..n {
        let channel = Map2D::from_vec(acts.height(), acts.width(), acts.channel(k).to_vec())?;
        let up = bilinear_upsample(&channel, h, w)?;
        // Activations are pre-ReLU and may be negative; rectify before the
        // max normalization so the mask stays in [0, 1].
        let rectified = Map2D::from_vec(h, w, up.data().iter().map(|v| v.max(0.0)).collect())?;
        let mask = normalize_max(&rectified)?;
        let masked = explanation_map(
            x,
            &SaliencyMap {
                map: mask.map,
                degenerate: mask.degenerate,
            },
        )?;
        increases.push(confidence(&masked.masked_input)? - base_conf);
    }
    Ok(crate::nn::softmax(&Tensor::new(vec![n], increases)?))
}

/// Score-CAM: gradient-free. Each channel is upsampled, rectified and
/// max-normalized into a mask; its weight is the softmax over channels of
/// the confidence increase of the masked input over the baseline.
pub fn score_cam(
    model: &Model,
    x: &Tensor,
    class: usize,
    cfg: &MethodConfig,
) -> Result<SaliencyMap> {
    let trace = model.forward(x)?;
    let alpha = score_cam_weights(model, x, class, cfg)?;
    let (h, w) = input_hw(model);
    assemble_cam(&trace.activations, &WeightMap::Scalar(alpha), h, w)
}

/// The adversarial baseline: 1 everywhere except a zeroed top-left pixel,
/// regardless of the activations or the model.
pub fn fake_cam(_acts: &ActivationStack, out_h: usize, out_w: usize) -> SaliencyMap {
    fake_cam_map(out_h, out_w)
}

/// Direct construction of the fake CAM at output resolution.
pub fn fake_cam_map(out_h: usize, out_w: usize) -> SaliencyMap {
    let mut data = vec![1.0; out_h * out_w];
    data[0] = 0.0;
    SaliencyMap {
        map: Map2D::from_vec(out_h, out_w, data).expect("static shape"),
        degenerate: false,
    }
}

/// Runs the method identified by `id` over one input.
pub fn apply_method(
    id: MethodId,
    model: &Model,
    x: &Tensor,
    class: usize,
    cfg: &MethodConfig,
) -> Result<SaliencyMap> {
    match id {
        MethodId::GapCam => gap_cam(model, x, class),
        MethodId::GradCam => grad_cam(model, x, class),
        MethodId::XGradCam => xgrad_cam(model, x, class),
        MethodId::GradCamPp => grad_cam_pp(model, x, class),
        MethodId::SmoothGradCamPp => smooth_grad_cam_pp(model, x, class, cfg),
        MethodId::ScoreCam => score_cam(model, x, class, cfg),
        MethodId::FakeCam => {
            let [_, h, w] = model.input_shape();
            Ok(fake_cam_map(h, w))
        }
    }
}
