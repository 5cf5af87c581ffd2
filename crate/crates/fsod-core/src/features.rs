//! Dense feature containers and the elementary kernels the attention modules
//! compose: flattening, row softmax, global pooling, layer normalization and
//! MLP application.
//!
//! All values are `f64`. A [`FeatureMap`] is stored row-major over
//! (channel, row, column); a [`FlatFeatures`] matrix is stored row-major over
//! (row, column). Flattening maps spatial position `p = row * width + column`
//! to matrix row `p` and channel to matrix column, so the layout is bit-exact
//! and reversible.

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense activation volume with `channels * height * width` finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    /// Builds a map from channel-major data (`data[c*h*w + r*w + col]`).
    ///
    /// Rejects zero dimensions, length mismatches and non-finite values.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::arg("feature map dimensions must be positive"));
        }
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "feature map data length {} != {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("feature map data".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(channels, height, width, vec![value; channels * height * width])
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Spatial position count `height * width`.
    pub fn positions(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[channel * self.height * self.width + row * self.width + col]
    }
}

/// Dense row-major matrix. Rows are spatial positions and columns are
/// channels when the matrix holds flattened features; the same container is
/// used for plain weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatFeatures {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FlatFeatures {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "matrix data length {} != {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("matrix data".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("matrix rows"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows in matrix literal"));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    // Internal constructor for values already known finite.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// `self * other`, shapes (n x k) * (k x m) -> (n x m).
    pub fn matmul(&self, other: &FlatFeatures) -> Result<FlatFeatures> {
        if self.cols != other.rows {
            return Err(Error::shape(format!(
                "matmul {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let lhs = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(lhs) {
                    *d += a * b;
                }
            }
        }
        Ok(FlatFeatures::from_raw(self.rows, other.cols, out))
    }

    /// `self * other^T`, shapes (n x d) * (m x d)^T -> (n x m).
    pub fn matmul_transposed(&self, other: &FlatFeatures) -> Result<FlatFeatures> {
        if self.cols != other.cols {
            return Err(Error::shape(format!(
                "matmul_transposed {}x{} * ({}x{})^T",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = vec![0.0; self.rows * other.rows];
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                let b = other.row(j);
                let mut acc = 0.0;
                for (x, y) in a.iter().zip(b) {
                    acc += x * y;
                }
                out[i * other.rows + j] = acc;
            }
        }
        Ok(FlatFeatures::from_raw(self.rows, other.rows, out))
    }

    pub fn transpose(&self) -> FlatFeatures {
        let mut out = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        FlatFeatures::from_raw(self.cols, self.rows, out)
    }

    pub fn add(&self, other: &FlatFeatures) -> Result<FlatFeatures> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &FlatFeatures) -> Result<FlatFeatures> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Element-wise product.
    pub fn hadamard(&self, other: &FlatFeatures) -> Result<FlatFeatures> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> FlatFeatures {
        FlatFeatures::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }

    /// Column-wise concatenation `[self, other]`, rows must match.
    pub fn concat_cols(&self, other: &FlatFeatures) -> Result<FlatFeatures> {
        if self.rows != other.rows {
            return Err(Error::shape(format!(
                "concat_cols row mismatch {} vs {}",
                self.rows, other.rows
            )));
        }
        let cols = self.cols + other.cols;
        let mut out = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            out.extend_from_slice(self.row(i));
            out.extend_from_slice(other.row(i));
        }
        Ok(FlatFeatures::from_raw(self.rows, cols, out))
    }

    /// Copy of `len` consecutive rows starting at `start`.
    pub fn row_slice(&self, start: usize, len: usize) -> FlatFeatures {
        assert!(start + len <= self.rows, "row slice out of range");
        FlatFeatures::from_raw(
            len,
            self.cols,
            self.data[start * self.cols..(start + len) * self.cols].to_vec(),
        )
    }

    /// Per-column maximum over all rows.
    pub fn column_max(&self) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.cols];
        for i in 0..self.rows {
            for (m, &v) in out.iter_mut().zip(self.row(i)) {
                if v > *m {
                    *m = v;
                }
            }
        }
        out
    }

    /// Per-column mean over all rows.
    pub fn column_mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (m, &v) in out.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        let n = self.rows as f64;
        for m in &mut out {
            *m /= n;
        }
        out
    }

    fn zip_with(&self, other: &FlatFeatures, f: impl Fn(f64, f64) -> f64) -> Result<FlatFeatures> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(format!(
                "element-wise op on {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(FlatFeatures::from_raw(self.rows, self.cols, data))
    }
}

// JSON form is a nested array of rows, e.g. [[1.0, 2.0], [3.0, 4.0]].
impl Serialize for FlatFeatures {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.rows))?;
        for i in 0..self.rows {
            seq.serialize_element(self.row(i))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for FlatFeatures {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct RowsVisitor;
        impl<'de> Visitor<'de> for RowsVisitor {
            type Value = FlatFeatures;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("a non-empty nested array of numbers")
            }

            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut rows: Vec<Vec<f64>> = Vec::new();
                while let Some(row) = seq.next_element::<Vec<f64>>()? {
                    rows.push(row);
                }
                FlatFeatures::from_rows(&rows).map_err(de::Error::custom)
            }
        }
        deserializer.deserialize_seq(RowsVisitor)
    }
}

/// Multi-level stack of feature maps sharing one channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidFeatures {
    levels: Vec<FeatureMap>,
}

impl PyramidFeatures {
    pub fn new(levels: Vec<FeatureMap>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::EmptyInput("pyramid levels"));
        }
        let d = levels[0].channels();
        for level in &levels[1..] {
            if level.channels() != d {
                return Err(Error::ChannelMismatch {
                    left: d,
                    right: level.channels(),
                });
            }
        }
        Ok(Self { levels })
    }

    pub fn single(level: FeatureMap) -> Self {
        Self { levels: vec![level] }
    }

    pub fn levels(&self) -> &[FeatureMap] {
        &self.levels
    }

    pub fn channels(&self) -> usize {
        self.levels[0].channels()
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// True when both pyramids have the same level count and per-level shape.
    pub fn same_shape(&self, other: &PyramidFeatures) -> bool {
        self.levels.len() == other.levels.len()
            && self.levels.iter().zip(&other.levels).all(|(a, b)| {
                a.channels() == b.channels() && a.height() == b.height() && a.width() == b.width()
            })
    }

    /// Element-wise mean of several same-shaped pyramids.
    pub fn mean(pyramids: &[PyramidFeatures]) -> Result<PyramidFeatures> {
        let first = pyramids.first().ok_or(Error::EmptyInput("pyramids to average"))?;
        if pyramids.len() == 1 {
            return Ok(first.clone());
        }
        for p in &pyramids[1..] {
            if !first.same_shape(p) {
                return Err(Error::shape("averaging pyramids of different shapes"));
            }
        }
        let inv = 1.0 / pyramids.len() as f64;
        let levels = (0..first.levels.len())
            .map(|l| {
                let template = &first.levels[l];
                let mut data = vec![0.0; template.data().len()];
                for p in pyramids {
                    for (acc, &v) in data.iter_mut().zip(p.levels[l].data()) {
                        *acc += v;
                    }
                }
                for v in &mut data {
                    *v *= inv;
                }
                FeatureMap::new(template.channels(), template.height(), template.width(), data)
            })
            .collect::<Result<Vec<_>>>()?;
        PyramidFeatures::new(levels)
    }
}

/// Per-channel scale/shift applied after row normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub epsilon: f64,
}

impl LayerNormParams {
    /// gamma = 1, beta = 0, epsilon = 1e-5.
    pub fn identity(dim: usize) -> Self {
        Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            epsilon: 1e-5,
        }
    }

    fn validate(&self, cols: usize) -> Result<()> {
        if self.gamma.len() != cols || self.beta.len() != cols {
            return Err(Error::shape(format!(
                "layer norm params of length {}/{} applied to {} columns",
                self.gamma.len(),
                self.beta.len(),
                cols
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::arg("layer norm epsilon must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// max(0, x)
    #[default]
    Rectifier,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Rectifier => x.max(0.0),
            Activation::Identity => x,
        }
    }
}

/// Two-layer perceptron weights: `activation(x*w1 + b1)*w2 + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub w1: FlatFeatures,
    pub b1: Vec<f64>,
    pub w2: FlatFeatures,
    pub b2: Vec<f64>,
    pub activation: Activation,
}

impl MlpWeights {
    pub fn new(
        w1: FlatFeatures,
        b1: Vec<f64>,
        w2: FlatFeatures,
        b2: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if b1.len() != w1.cols() || w2.rows() != w1.cols() || b2.len() != w2.cols() {
            return Err(Error::shape(format!(
                "inconsistent MLP shapes: w1 {}x{}, b1 {}, w2 {}x{}, b2 {}",
                w1.rows(),
                w1.cols(),
                b1.len(),
                w2.rows(),
                w2.cols(),
                b2.len()
            )));
        }
        Ok(Self {
            w1,
            b1,
            w2,
            b2,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.cols()
    }
}

/// Reshapes a feature map into a (positions x channels) matrix.
///
/// Row index is `row * width + column`, column index is the channel.
pub fn flatten_spatial(map: &FeatureMap) -> FlatFeatures {
    let n = map.positions();
    let d = map.channels();
    let mut data = vec![0.0; n * d];
    for c in 0..d {
        let plane = &map.data()[c * n..(c + 1) * n];
        for (p, &v) in plane.iter().enumerate() {
            data[p * d + c] = v;
        }
    }
    FlatFeatures::from_raw(n, d, data)
}

/// Inverse of [`flatten_spatial`] for the given spatial shape.
pub fn unflatten_spatial(flat: &FlatFeatures, height: usize, width: usize) -> Result<FeatureMap> {
    if flat.rows() != height * width {
        return Err(Error::shape(format!(
            "cannot unflatten {} rows into {}x{}",
            flat.rows(),
            height,
            width
        )));
    }
    let n = flat.rows();
    let d = flat.cols();
    let mut data = vec![0.0; n * d];
    for p in 0..n {
        for c in 0..d {
            data[c * n + p] = flat.get(p, c);
        }
    }
    FeatureMap::new(d, height, width, data)
}

/// Softmax over each row after dividing logits by `temperature`.
///
/// Uses max-subtraction so large logits cannot overflow.
pub fn row_softmax(m: &FlatFeatures, temperature: f64) -> Result<FlatFeatures> {
    if !(temperature > 0.0) {
        return Err(Error::arg("softmax temperature must be positive"));
    }
    if !m.data().iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let mut data = vec![0.0; m.rows() * m.cols()];
    for i in 0..m.rows() {
        let row = m.row(i);
        let max = row
            .iter()
            .map(|v| v / temperature)
            .fold(f64::NEG_INFINITY, f64::max);
        let out = &mut data[i * m.cols()..(i + 1) * m.cols()];
        let mut sum = 0.0;
        for (o, &v) in out.iter_mut().zip(row) {
            let e = (v / temperature - max).exp();
            *o = e;
            sum += e;
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
    }
    Ok(FlatFeatures::from_raw(m.rows(), m.cols(), data))
}

/// Per-channel maximum over every spatial position.
pub fn global_max_pool(map: &FeatureMap) -> Vec<f64> {
    let n = map.positions();
    (0..map.channels())
        .map(|c| {
            map.data()[c * n..(c + 1) * n]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Normalizes each row to zero mean and unit population variance, then
/// applies the affine `gamma * x + beta`.
pub fn layer_norm(x: &FlatFeatures, params: &LayerNormParams) -> Result<FlatFeatures> {
    params.validate(x.cols())?;
    let d = x.cols() as f64;
    let mut data = vec![0.0; x.rows() * x.cols()];
    for i in 0..x.rows() {
        let row = x.row(i);
        let mean = row.iter().sum::<f64>() / d;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let inv = 1.0 / (var + params.epsilon).sqrt();
        let out = &mut data[i * x.cols()..(i + 1) * x.cols()];
        for (c, (o, &v)) in out.iter_mut().zip(row).enumerate() {
            *o = params.gamma[c] * (v - mean) * inv + params.beta[c];
        }
    }
    Ok(FlatFeatures::from_raw(x.rows(), x.cols(), data))
}

/// Applies the two-layer perceptron row-wise: `act(x*w1 + b1)*w2 + b2`.
pub fn mlp_forward(x: &FlatFeatures, w: &MlpWeights) -> Result<FlatFeatures> {
    if x.cols() != w.w1.rows() {
        return Err(Error::shape(format!(
            "MLP input has {} columns, w1 expects {}",
            x.cols(),
            w.w1.rows()
        )));
    }
    let hidden = x.matmul(&w.w1)?;
    let mut hdata = hidden.data().to_vec();
    for i in 0..hidden.rows() {
        for (j, v) in hdata[i * hidden.cols()..(i + 1) * hidden.cols()]
            .iter_mut()
            .enumerate()
        {
            *v = w.activation.apply(*v + w.b1[j]);
        }
    }
    let hidden = FlatFeatures::from_raw(hidden.rows(), hidden.cols(), hdata);
    let out = hidden.matmul(&w.w2)?;
    let mut odata = out.data().to_vec();
    for i in 0..out.rows() {
        for (j, v) in odata[i * out.cols()..(i + 1) * out.cols()]
            .iter_mut()
            .enumerate()
        {
            *v += w.b2[j];
        }
    }
    Ok(FlatFeatures::from_raw(out.rows(), out.cols(), odata))
}
