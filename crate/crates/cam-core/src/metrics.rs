//! Per-image evaluation metrics for saliency maps: Average Drop, Average
//! Increase, Insertion/Deletion AUCs, Coherency, Complexity, and the
//! combined ADCC score (harmonic mean of coherency, 1-complexity and
//! 1-drop).
//!
//! Percentages are carried as f64 in [0, 100]; curve AUCs live in [0, 1].

use crate::cam::{explanation_map, SaliencyMap};
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::tensor::{gaussian_blur, mean_l1, pearson_detailed, Map2D, Tensor};
use serde::{Deserialize, Serialize};

/// Target-class confidence with the full image (`full`) and with the
/// explanation map (`explained`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidencePair {
    pub full: f64,
    pub explained: f64,
}

impl ConfidencePair {
    pub fn new(full: f64, explained: f64) -> Result<Self> {
        for v in [full, explained] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Contract(format!("confidence {v} outside [0,1]")));
            }
        }
        Ok(ConfidencePair { full, explained })
    }
}

/// Average Drop of one image, plus whether the y_c division guard fired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropOutcome {
    pub value: f64,
    pub guarded: bool,
}

const YC_EPS: f64 = 1e-12;

/// Percentage drop in confidence under the explanation map:
/// `max(0, y_c - o_c) / y_c * 100`. A numerically zero `y_c` is recorded as
/// drop 0 with the guard flag set.
pub fn average_drop(p: ConfidencePair) -> DropOutcome {
    if p.full < YC_EPS {
        return DropOutcome {
            value: 0.0,
            guarded: true,
        };
    }
    DropOutcome {
        value: (p.full - p.explained).max(0.0) / p.full * 100.0,
        guarded: false,
    }
}

/// 100 when the explanation map strictly increases confidence, else 0.
pub fn average_increase(p: ConfidencePair) -> f64 {
    if p.full < p.explained {
        100.0
    } else {
        0.0
    }
}

/// One point of an insertion or deletion curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub fraction: f64,
    pub confidence: f64,
}

/// A full curve with its trapezoidal area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub samples: Vec<CurveSample>,
    pub auc: f64,
}

/// Pixel indices sorted by saliency descending, ties broken by row-major
/// index ascending.
fn saliency_order(map: &Map2D) -> Vec<usize> {
    let data = map.data();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| {
        data[b]
            .partial_cmp(&data[a])
            .expect("saliency values are finite")
            .then(a.cmp(&b))
    });
    order
}

fn trapezoid_auc(samples: &[CurveSample]) -> f64 {
    let mut auc = 0.0;
    for pair in samples.windows(2) {
        auc +=
            (pair[1].fraction - pair[0].fraction) * (pair[0].confidence + pair[1].confidence) / 2.0;
    }
    auc
}

/// Shared machinery for the two causal curves. `start` is the image the
/// sweep begins from; at each step the top-ranked pixels take their values
/// from `target`.
fn pixel_sweep_curve(
    model: &Model,
    start: Tensor,
    target: &dyn Fn(usize, usize) -> Vec<f64>,
    order: &[usize],
    class: usize,
    steps: usize,
    width: usize,
) -> Result<Curve> {
    let pixels = order.len();
    // More steps than pixels degrades to one pixel per step.
    let steps = steps.min(pixels).max(1);
    let mut samples = Vec::with_capacity(steps + 1);
    let mut work = start;
    samples.push(CurveSample {
        fraction: 0.0,
        confidence: model.score_on(&work, class)?,
    });
    let mut done = 0usize;
    for i in 1..=steps {
        let upto = i * pixels / steps;
        for &pix in &order[done..upto] {
            let (y, x) = (pix / width, pix % width);
            let vals = target(y, x);
            for (c, &v) in vals.iter().enumerate() {
                work.set3(c, y, x, v);
            }
        }
        done = upto;
        samples.push(CurveSample {
            fraction: i as f64 / steps as f64,
            confidence: model.score_on(&work, class)?,
        });
    }
    let auc = trapezoid_auc(&samples);
    Ok(Curve { samples, auc })
}

/// Deletion: confidence as the most salient pixels are replaced by the
/// per-channel baseline (zero by default, the dataset mean after input
/// normalization). Trapezoidal AUC over the fraction axis.
pub fn deletion_curve(
    model: &Model,
    x: &Tensor,
    class: usize,
    s: &SaliencyMap,
    steps: usize,
) -> Result<Curve> {
    let channels = x.shape()[0];
    deletion_curve_with_baseline(model, x, class, s, steps, &vec![0.0; channels])
}

pub fn deletion_curve_with_baseline(
    model: &Model,
    x: &Tensor,
    class: usize,
    s: &SaliencyMap,
    steps: usize,
    baseline: &[f64],
) -> Result<Curve> {
    if steps == 0 {
        return Err(Error::Contract("curve needs steps >= 1".into()));
    }
    let (channels, width) = (x.shape()[0], x.shape()[2]);
    if baseline.len() != channels {
        return Err(Error::Contract(format!(
            "baseline has {} channels, input has {channels}",
            baseline.len()
        )));
    }
    let order = saliency_order(&s.map);
    let baseline = baseline.to_vec();
    pixel_sweep_curve(
        model,
        x.clone(),
        &move |_, _| baseline.clone(),
        &order,
        class,
        steps,
        width,
    )
}

/// Insertion: start from a blurred copy (`sigma = H/8`) and reveal original
/// pixels in saliency order.
pub fn insertion_curve(
    model: &Model,
    x: &Tensor,
    class: usize,
    s: &SaliencyMap,
    steps: usize,
) -> Result<Curve> {
    if steps == 0 {
        return Err(Error::Contract("curve needs steps >= 1".into()));
    }
    let (channels, height, width) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let sigma = height as f64 / 8.0;
    let start = if sigma > 0.0 && (height > 1 || width > 1) {
        gaussian_blur(x, sigma)?
    } else {
        x.clone()
    };
    let order = saliency_order(&s.map);
    let original = x.clone();
    pixel_sweep_curve(
        model,
        start,
        &move |y, px| (0..channels).map(|c| original.at3(c, y, px)).collect(),
        &order,
        class,
        steps,
        width,
    )
}

/// Coherency of one method on one image, plus whether the degenerate
/// Pearson fallback decided it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherencyOutcome {
    pub value: f64,
    pub degenerate: bool,
}

/// Runs the full method pipeline twice (on `x` and on `x` masked by its own
/// CAM) and maps their Pearson correlation into [0, 100].
///
/// When either map is constant the correlation is undefined; the outcome is
/// then 100 for pointwise-equal maps and 0 otherwise, flagged degenerate.
pub fn coherency<F>(mut cam: F, x: &Tensor) -> Result<CoherencyOutcome>
where
    F: FnMut(&Tensor) -> Result<SaliencyMap>,
{
    let s1 = cam(x)?;
    let masked = explanation_map(x, &s1)?;
    let s2 = cam(&masked.masked_input)?;
    coherency_from_maps(&s1, &s2)
}

/// Coherency of an already-computed CAM pair: `s1` on the image, `s2` on
/// the image masked by `s1`.
pub fn coherency_from_maps(s1: &SaliencyMap, s2: &SaliencyMap) -> Result<CoherencyOutcome> {
    let corr = pearson_detailed(&s2.map, &s1.map)?;
    if corr.degenerate {
        Ok(CoherencyOutcome {
            value: corr.value * 100.0,
            degenerate: true,
        })
    } else {
        Ok(CoherencyOutcome {
            value: (corr.value + 1.0) / 2.0 * 100.0,
            degenerate: false,
        })
    }
}

/// Mean L1 mass of the normalized map, as a percentage of the image.
pub fn complexity(s: &SaliencyMap) -> Result<f64> {
    Ok(mean_l1(&s.map)? * 100.0)
}

const ADCC_TERM_EPS: f64 = 1e-12;

/// Harmonic mean of coherency, (100 - complexity) and (100 - drop), all as
/// fractions, returned as a percentage. Returns 0 when any term vanishes.
pub fn adcc(drop_pct: f64, coherency_pct: f64, complexity_pct: f64) -> Result<f64> {
    for v in [drop_pct, coherency_pct, complexity_pct] {
        if !(0.0..=100.0).contains(&v) {
            return Err(Error::Contract(format!(
                "adcc inputs must be percentages in [0,100], got {v}"
            )));
        }
    }
    let coh = coherency_pct / 100.0;
    let inv_cx = 1.0 - complexity_pct / 100.0;
    let inv_drop = 1.0 - drop_pct / 100.0;
    if coh < ADCC_TERM_EPS || inv_cx < ADCC_TERM_EPS || inv_drop < ADCC_TERM_EPS {
        return Ok(0.0);
    }
    Ok(3.0 / (1.0 / coh + 1.0 / inv_cx + 1.0 / inv_drop) * 100.0)
}

/// Per-image metric tuple. Fields are `None` when a metric was not selected
/// for the run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricRecord {
    pub avg_drop: Option<f64>,
    pub avg_increase: Option<f64>,
    pub insertion_auc: Option<f64>,
    pub deletion_auc: Option<f64>,
    pub coherency: Option<f64>,
    pub complexity: Option<f64>,
    pub adcc: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cam::fake_cam_map;
    use crate::nn::{LayerKind, LayerParams, LayerSpec};

    fn pair(y: f64, o: f64) -> ConfidencePair {
        ConfidencePair::new(y, o).unwrap()
    }

    #[test]
    fn average_drop_analytic_cases() {
        assert_eq!(average_drop(pair(0.8, 0.8)).value, 0.0);
        assert!((average_drop(pair(0.8, 0.4)).value - 50.0).abs() < 1e-12);
        assert_eq!(average_drop(pair(0.5, 0.9)).value, 0.0);
        assert!(!average_drop(pair(0.5, 0.9)).guarded);
    }

    #[test]
    fn average_drop_guards_zero_confidence() {
        let d = average_drop(pair(0.0, 0.4));
        assert_eq!(d.value, 0.0);
        assert!(d.guarded);
    }

    #[test]
    fn average_increase_is_strict_indicator() {
        assert_eq!(average_increase(pair(0.5, 0.9)), 100.0);
        assert_eq!(average_increase(pair(0.9, 0.5)), 0.0);
        assert_eq!(average_increase(pair(0.5, 0.5)), 0.0);
    }

    #[test]
    fn confidence_pair_rejects_out_of_range() {
        assert!(ConfidencePair::new(1.2, 0.5).is_err());
        assert!(ConfidencePair::new(0.5, -0.1).is_err());
    }

    #[test]
    fn adcc_reproduces_reported_triples() {
        // (drop, coherency, complexity) -> expected ADCC.
        let cases = [
            (26.13, 93.83, 20.27, 81.66, 0.05),
            (66.42, 69.20, 15.65, 53.52, 0.10),
            (38.51, 96.79, 9.91, 79.59, 0.05),
            (0.00, 97.39, 18.57, 92.17, 0.05),
        ];
        for (drop, coh, cx, want, tol) in cases {
            let got = adcc(drop, coh, cx).unwrap();
            assert!(
                (got - want).abs() <= tol,
                "adcc({drop}, {coh}, {cx}) = {got}, want {want} +- {tol}"
            );
        }
    }

    #[test]
    fn adcc_endpoints() {
        assert_eq!(adcc(0.0, 100.0, 0.0).unwrap(), 100.0);
        assert_eq!(adcc(12.0, 88.0, 100.0).unwrap(), 0.0);
        assert_eq!(adcc(100.0, 88.0, 10.0).unwrap(), 0.0);
        assert_eq!(adcc(10.0, 0.0, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn adcc_rejects_out_of_range() {
        assert!(adcc(-1.0, 50.0, 50.0).is_err());
        assert!(adcc(50.0, 101.0, 50.0).is_err());
    }

    #[test]
    fn adcc_lies_between_min_and_three_min() {
        // Harmonic mean of three terms: min <= HM <= max, and any vanishing
        // term caps it at three times that term.
        let triples = [
            (10.0, 90.0, 30.0),
            (55.5, 42.0, 61.0),
            (0.1, 99.0, 0.5),
            (80.0, 20.0, 80.0),
            (26.13, 93.83, 20.27),
        ];
        for (d, coh, cx) in triples {
            let v = adcc(d, coh, cx).unwrap();
            let min = coh.min(100.0 - cx).min(100.0 - d);
            let max = coh.max(100.0 - cx).max(100.0 - d);
            assert!(
                v + 1e-9 >= min,
                "adcc({d},{coh},{cx}) = {v} below min {min}"
            );
            assert!(
                v <= max + 1e-9,
                "adcc({d},{coh},{cx}) = {v} above max {max}"
            );
            assert!(
                v <= 3.0 * min + 1e-9,
                "adcc({d},{coh},{cx}) = {v} above 3*min"
            );
        }
    }

    #[test]
    fn complexity_analytic_cases() {
        let ones = SaliencyMap {
            map: Map2D::from_vec(2, 2, vec![1.0; 4]).unwrap(),
            degenerate: false,
        };
        assert_eq!(complexity(&ones).unwrap(), 100.0);
        let zeros = SaliencyMap {
            map: Map2D::zeros(2, 2),
            degenerate: true,
        };
        assert_eq!(complexity(&zeros).unwrap(), 0.0);
    }

    #[test]
    fn complexity_of_fake_cam_at_imagenet_scale() {
        let cx = complexity(&fake_cam_map(224, 224)).unwrap();
        assert_eq!(format!("{cx:.2}"), "100.00");
        assert!((cx - 100.0 * 50175.0 / 50176.0).abs() < 1e-9);
    }

    /// Model whose probability is 0.5 for class 0 on any input: conv to one
    /// channel with zero weights, then two zero fc outputs.
    fn constant_half_model(size: usize) -> Model {
        let layers = vec![
            LayerSpec {
                name: "c".into(),
                kind: LayerKind::Conv2d {
                    in_ch: 1,
                    out_ch: 1,
                    kernel: 1,
                    stride: 1,
                    padding: 0,
                },
            },
            LayerSpec {
                name: "gap".into(),
                kind: LayerKind::GlobalAvgPool,
            },
            LayerSpec {
                name: "fc".into(),
                kind: LayerKind::FullyConnected {
                    in_dim: 1,
                    out_dim: 2,
                },
            },
        ];
        let params = vec![
            Some(LayerParams {
                weight: Tensor::zeros(vec![1, 1, 1, 1]),
                bias: Tensor::zeros(vec![1]),
            }),
            None,
            Some(LayerParams {
                weight: Tensor::zeros(vec![2, 1]),
                bias: Tensor::zeros(vec![2]),
            }),
        ];
        Model::new(layers, params, "c".into(), 2, [1, size, size]).unwrap()
    }

    fn ramp_saliency(h: usize, w: usize) -> SaliencyMap {
        let n = h * w;
        let data: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        SaliencyMap {
            map: Map2D::from_vec(h, w, data).unwrap(),
            degenerate: false,
        }
    }

    #[test]
    fn constant_model_curves_have_constant_auc() {
        let model = constant_half_model(4);
        let x = Tensor::full(vec![1, 4, 4], 0.3).unwrap();
        let s = ramp_saliency(4, 4);
        let del = deletion_curve(&model, &x, 0, &s, 4).unwrap();
        assert!((del.auc - 0.5).abs() < 1e-12);
        assert!(del
            .samples
            .iter()
            .all(|s| (s.confidence - 0.5).abs() < 1e-12));
        let ins = insertion_curve(&model, &x, 0, &s, 4).unwrap();
        assert!((ins.auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_step_deletion_is_one_trapezoid() {
        let model = crate::nn::tinygap(3, 8, 13);
        let x = Tensor::new(
            vec![3, 8, 8],
            (0..192).map(|i| ((i * 11 % 13) as f64) / 13.0).collect(),
        )
        .unwrap();
        let s = ramp_saliency(8, 8);
        let del = deletion_curve(&model, &x, 1, &s, 1).unwrap();
        assert_eq!(del.samples.len(), 2);
        let p_full = model.score_on(&x, 1).unwrap();
        let p_zero = model.score_on(&Tensor::zeros(vec![3, 8, 8]), 1).unwrap();
        assert!((del.samples[0].confidence - p_full).abs() < 1e-15);
        assert!((del.samples[1].confidence - p_zero).abs() < 1e-15);
        assert!((del.auc - (p_full + p_zero) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn curve_fractions_cover_zero_to_one() {
        let model = constant_half_model(4);
        let x = Tensor::full(vec![1, 4, 4], 0.7).unwrap();
        let s = ramp_saliency(4, 4);
        for steps in [1, 3, 16, 40] {
            let c = deletion_curve(&model, &x, 0, &s, steps).unwrap();
            let expect = steps.min(16);
            assert_eq!(c.samples.len(), expect + 1);
            assert_eq!(c.samples[0].fraction, 0.0);
            assert_eq!(c.samples[expect].fraction, 1.0);
            for w in c.samples.windows(2) {
                assert!(w[1].fraction > w[0].fraction);
            }
            assert!((0.0..=1.0).contains(&c.auc));
        }
    }

    #[test]
    fn curve_rejects_zero_steps() {
        let model = constant_half_model(4);
        let x = Tensor::full(vec![1, 4, 4], 0.7).unwrap();
        let s = ramp_saliency(4, 4);
        assert!(deletion_curve(&model, &x, 0, &s, 0).is_err());
        assert!(insertion_curve(&model, &x, 0, &s, 0).is_err());
    }

    #[test]
    fn coherency_of_idempotent_constant_method_is_100() {
        let x = Tensor::full(vec![1, 3, 3], 0.4).unwrap();
        let all_ones = |_: &Tensor| -> Result<SaliencyMap> {
            Ok(SaliencyMap {
                map: Map2D::from_vec(3, 3, vec![1.0; 9]).unwrap(),
                degenerate: false,
            })
        };
        let out = coherency(all_ones, &x).unwrap();
        // Identical constant maps: degenerate Pearson, equality fallback.
        assert!(out.degenerate);
        assert_eq!(out.value, 100.0);
    }

    #[test]
    fn coherency_of_anticorrelated_method_is_0() {
        let x = Tensor::full(vec![1, 2, 2], 1.0).unwrap();
        let m: Vec<f64> = vec![0.0, 0.25, 0.75, 1.0];
        let m_inv: Vec<f64> = m.iter().map(|v| 1.0 - v).collect();
        let mut first = true;
        let flip = move |_: &Tensor| -> Result<SaliencyMap> {
            let data = if first { m.clone() } else { m_inv.clone() };
            first = false;
            Ok(SaliencyMap {
                map: Map2D::from_vec(2, 2, data).unwrap(),
                degenerate: false,
            })
        };
        let out = coherency(flip, &x).unwrap();
        assert!(!out.degenerate);
        assert!(out.value.abs() < 1e-9);
    }
}
