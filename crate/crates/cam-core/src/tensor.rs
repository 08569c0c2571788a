//! Dense row-major tensors and the map-level primitives the rest of the
//! crate builds on: max normalization, bilinear upsampling, Gaussian blur,
//! mean-L1 mass, and Pearson correlation.
//!
//! Everything here is pure and operates on owned `f64` buffers. Public
//! operations keep the finiteness invariant: no NaN or infinity ever leaves
//! a constructor or an op.

use crate::error::{Error, Result};

/// Dense row-major nd-array with an explicit shape.
///
/// Invariants: `shape.iter().product() == data.len()` and every stored value
/// is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite tensor value {v}")));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn full(shape: Vec<usize>, value: f64) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![value; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Value at `[i, j]` of a rank-2 tensor.
    pub fn at2(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.rank(), 2);
        self.data[i * self.shape[1] + j]
    }

    /// Value at `[c, i, j]` of a rank-3 tensor.
    pub fn at3(&self, c: usize, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.rank(), 3);
        self.data[(c * self.shape[1] + i) * self.shape[2] + j]
    }

    pub(crate) fn set3(&mut self, c: usize, i: usize, j: usize, v: f64) {
        debug_assert_eq!(self.rank(), 3);
        let w = self.shape[2];
        let h = self.shape[1];
        self.data[(c * h + i) * w + j] = v;
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Elementwise map; rejects results that leave the finite domain.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Tensor> {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        Tensor::new(self.shape.clone(), data)
    }
}

/// Single-channel spatial map, `[H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Map2D {
    values: Tensor,
}

impl Map2D {
    pub fn new(values: Tensor) -> Result<Self> {
        if values.rank() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "Map2D expects rank 2, got shape {:?}",
                values.shape()
            )));
        }
        Ok(Map2D { values })
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        Map2D::new(Tensor::new(vec![height, width], data)?)
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Map2D {
            values: Tensor::zeros(vec![height, width]),
        }
    }

    pub fn height(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn pixels(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.at2(i, j)
    }

    pub fn data(&self) -> &[f64] {
        self.values.data()
    }

    pub fn tensor(&self) -> &Tensor {
        &self.values
    }
}

/// Pearson correlation plus whether the degenerate fallback fired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub value: f64,
    /// True when one of the maps was (numerically) constant and the
    /// equality-test fallback decided the value.
    pub degenerate: bool,
}

const SIGMA_EPS: f64 = 1e-12;
const EQUALITY_EPS: f64 = 1e-9;

/// Pearson correlation of two equally shaped maps, population-normalized.
///
/// Degenerate rule: when either map is numerically constant (std dev below
/// `1e-12`) the correlation is undefined; we return 1.0 if the maps are
/// pointwise equal within `1e-9`, else 0.0.
pub fn pearson(a: &Map2D, b: &Map2D) -> Result<f64> {
    pearson_detailed(a, b).map(|c| c.value)
}

/// As [`pearson`] but reports whether the degenerate fallback was used.
pub fn pearson_detailed(a: &Map2D, b: &Map2D) -> Result<Correlation> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::ShapeMismatch(format!(
            "pearson: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let n = a.pixels();
    if n < 2 {
        return Err(Error::Contract(
            "pearson requires at least 2 elements".into(),
        ));
    }
    let nf = n as f64;
    let (da, db) = (a.data(), b.data());
    let mean_a = da.iter().sum::<f64>() / nf;
    let mean_b = db.iter().sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for i in 0..n {
        let xa = da[i] - mean_a;
        let xb = db[i] - mean_b;
        cov += xa * xb;
        var_a += xa * xa;
        var_b += xb * xb;
    }
    cov /= nf;
    let sigma_a = (var_a / nf).sqrt();
    let sigma_b = (var_b / nf).sqrt();
    if sigma_a < SIGMA_EPS || sigma_b < SIGMA_EPS {
        let max_diff = da
            .iter()
            .zip(db)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let value = if max_diff < EQUALITY_EPS { 1.0 } else { 0.0 };
        return Ok(Correlation {
            value,
            degenerate: true,
        });
    }
    let value = (cov / (sigma_a * sigma_b)).clamp(-1.0, 1.0);
    Ok(Correlation {
        value,
        degenerate: false,
    })
}

/// A map normalized into `[0, 1]`, flagged when the source was all-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub map: Map2D,
    pub degenerate: bool,
}

const MAX_EPS: f64 = 1e-12;

/// Divides a non-negative map by its maximum. An (numerically) all-zero map
/// is returned unchanged and flagged degenerate.
pub fn normalize_max(m: &Map2D) -> Result<Normalized> {
    if let Some(v) = m.data().iter().find(|&&v| v < 0.0) {
        return Err(Error::Contract(format!(
            "normalize_max expects non-negative entries, found {v}"
        )));
    }
    let max = m.data().iter().copied().fold(0.0, f64::max);
    if max < MAX_EPS {
        return Ok(Normalized {
            map: Map2D::zeros(m.height(), m.width()),
            degenerate: true,
        });
    }
    let data = m.data().iter().map(|&v| v / max).collect();
    Ok(Normalized {
        map: Map2D::from_vec(m.height(), m.width(), data)?,
        degenerate: false,
    })
}

/// Bilinear resampling with half-pixel source centers and border clamping.
///
/// Source coordinate of output pixel `d` along an axis is
/// `(d + 0.5) * (in / out) - 0.5`, clamped into the valid range. Works for
/// both up- and downscaling; same-size resampling is the exact identity and
/// constant maps stay constant bit-for-bit (lerp is anchored on the first
/// tap).
pub fn bilinear_upsample(m: &Map2D, out_h: usize, out_w: usize) -> Result<Map2D> {
    if m.pixels() == 0 {
        return Err(Error::Contract("bilinear_upsample of empty map".into()));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::Contract(
            "bilinear_upsample target must be at least 1x1".into(),
        ));
    }
    let (in_h, in_w) = (m.height(), m.width());
    let scale_y = in_h as f64 / out_h as f64;
    let scale_x = in_w as f64 / out_w as f64;
    let mut out = vec![0.0; out_h * out_w];
    for dy in 0..out_h {
        let sy = ((dy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (in_h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(in_h - 1);
        let fy = sy - y0 as f64;
        for dx in 0..out_w {
            let sx = ((dx as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (in_w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(in_w - 1);
            let fx = sx - x0 as f64;
            let v00 = m.get(y0, x0);
            let v01 = m.get(y0, x1);
            let v10 = m.get(y1, x0);
            let v11 = m.get(y1, x1);
            let top = v00 + fx * (v01 - v00);
            let bot = v10 + fx * (v11 - v10);
            out[dy * out_w + dx] = top + fy * (bot - top);
        }
    }
    Map2D::from_vec(out_h, out_w, out)
}

/// Separable Gaussian blur of a `[C, H, W]` tensor.
///
/// Kernel radius is `ceil(3 * sigma)`; borders are handled by edge
/// replication. The accumulation is anchored on the center tap so constant
/// channels pass through untouched.
pub fn gaussian_blur(img: &Tensor, sigma: f64) -> Result<Tensor> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::Contract(format!(
            "gaussian_blur requires sigma > 0, got {sigma}"
        )));
    }
    if img.rank() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "gaussian_blur expects [C,H,W], got {:?}",
            img.shape()
        )));
    }
    let (c, h, w) = (img.shape()[0], img.shape()[1], img.shape()[2]);
    let radius = (3.0 * sigma).ceil() as i64;
    let mut weights = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        weights.push((-((i * i) as f64) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = weights.iter().sum();
    for wgt in &mut weights {
        *wgt /= sum;
    }

    let clamp = |i: i64, n: usize| i.clamp(0, n as i64 - 1) as usize;
    // Anchored 1D pass: out = center + sum w_i * (tap_i - center).
    let pass = |line: &[f64], out: &mut [f64]| {
        let n = line.len();
        for (j, out_v) in out.iter_mut().enumerate() {
            let center = line[j];
            let mut acc = 0.0;
            for (t, wgt) in weights.iter().enumerate() {
                let src = clamp(j as i64 + t as i64 - radius, n);
                acc += wgt * (line[src] - center);
            }
            *out_v = center + acc;
        }
    };

    let mut out = img.clone();
    let mut row_buf = vec![0.0; w];
    let mut col_in = vec![0.0; h];
    let mut col_buf = vec![0.0; h];
    for ch in 0..c {
        // horizontal
        for y in 0..h {
            let row: Vec<f64> = (0..w).map(|x| img.at3(ch, y, x)).collect();
            pass(&row, &mut row_buf);
            for (x, &v) in row_buf.iter().enumerate() {
                out.set3(ch, y, x, v);
            }
        }
        // vertical
        for x in 0..w {
            for (y, v) in col_in.iter_mut().enumerate() {
                *v = out.at3(ch, y, x);
            }
            pass(&col_in, &mut col_buf);
            for (y, &v) in col_buf.iter().enumerate() {
                out.set3(ch, y, x, v);
            }
        }
    }
    Ok(out)
}

/// Mean absolute mass of a `[0, 1]` map: `(1/P) * sum |m_ij|`.
pub fn mean_l1(m: &Map2D) -> Result<f64> {
    if let Some(v) = m.data().iter().find(|&&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Contract(format!(
            "mean_l1 expects entries in [0,1], found {v}"
        )));
    }
    if m.pixels() == 0 {
        return Err(Error::Contract("mean_l1 of empty map".into()));
    }
    Ok(m.data().iter().map(|v| v.abs()).sum::<f64>() / m.pixels() as f64)
}
