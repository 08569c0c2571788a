//! Framework-independent engine for computing Class Activation Mapping
//! explanations over a small built-in CNN runtime, and for scoring them
//! with confidence-, causality- and coherency-based metrics, including the
//! combined ADCC score.
//!
//! The crate is organized along the pipeline:
//!
//! - [`tensor`]: dense f64 tensors and the map primitives (normalization,
//!   bilinear resampling, Gaussian blur, Pearson correlation, mean L1).
//! - [`nn`]: the micro CNN runtime: forward passes and reverse-mode
//!   gradients of a class score w.r.t. a designated conv layer.
//! - [`cam`]: the seven attribution methods, all built on one assembler.
//! - [`metrics`]: Average Drop/Increase, Insertion/Deletion AUC, Coherency,
//!   Complexity, ADCC.
//! - [`io`]: `CTF1` tensor files, `MCN1` model files, binary PPM, and the
//!   resize/crop/standardize preprocessing pipeline.
//! - [`eval`]: batch orchestration, aggregation, machine-readable reports,
//!   SVG curve figures, and the Fake-CAM sanity check.

pub mod cam;
pub mod error;
pub mod eval;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod tensor;

pub use cam::{
    apply_method, assemble_cam, explanation_map, fake_cam, fake_cam_map, gap_cam, grad_cam,
    grad_cam_pp, grad_cam_pp_weights, grad_cam_weights, score_cam, score_cam_weights,
    smooth_grad_cam_pp, xgrad_cam, xgrad_cam_weights, ExplanationMap, MethodConfig, MethodId,
    SaliencyMap, WeightMap,
};
pub use error::{Error, Result};
pub use eval::{
    aggregate, emit_curves_svg, emit_report, fake_check, run_eval, run_eval_with_model,
    AggregateRow, ClassPolicy, CurveKind, CurveSet, EvalConfig, EvalOutcome, EvalReport, EvalRow,
    FakeCheck, ImageSource, MetricId, Provenance,
};
pub use io::{
    preprocess, read_model, read_ppm, read_tensor, write_model, write_tensor, ImageRecord,
};
pub use metrics::{
    adcc, average_drop, average_increase, coherency, coherency_from_maps, complexity,
    deletion_curve, insertion_curve, ConfidencePair, Curve, CurveSample, MetricRecord,
};
pub use nn::{
    seeded_params, tinygap, tinygap_layers, ActivationStack, ForwardTrace, LayerKind, LayerParams,
    LayerSpec, Model,
};
pub use tensor::{
    bilinear_upsample, gaussian_blur, mean_l1, normalize_max, pearson, pearson_detailed, Map2D,
    Tensor,
};
