//! Loss-adaptive top-k sparsification with residual error feedback.
//!
//! The keep fraction for each matrix kind decays from `k_max` toward its
//! `k_min` as the global loss falls below the initial loss:
//!
//! `k = k_min + (k_max - k_min) · exp(-gamma · (L0 - L_prev))`
//!
//! Whatever top-k withholds is parked in a per-client residual and added to
//! the next delta before selection, so nothing is lost, only delayed.

use serde::{Deserialize, Serialize};

use crate::model::{MatrixKind, TensorSpan};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SparsitySchedule {
    pub k_max: f64,
    pub k_min_a: f64,
    pub k_min_b: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    /// Global loss before any training; recorded once after round 0.
    #[serde(skip)]
    pub initial_loss: Option<f64>,
}

impl Default for SparsitySchedule {
    fn default() -> Self {
        Self {
            k_max: 0.95,
            k_min_a: 0.6,
            k_min_b: 0.5,
            gamma_a: 1.0,
            gamma_b: 2.0,
            initial_loss: None,
        }
    }
}

impl SparsitySchedule {
    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be in (0, 1], got {v}")))
            }
        };
        frac("k_max", self.k_max)?;
        frac("k_min_a", self.k_min_a)?;
        frac("k_min_b", self.k_min_b)?;
        if self.k_min_a > self.k_max || self.k_min_b > self.k_max {
            return Err(Error::InvalidConfig("k_min_a and k_min_b must not exceed k_max".into()));
        }
        for (name, g) in [("gamma_a", self.gamma_a), ("gamma_b", self.gamma_b)] {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    fn params(&self, kind: MatrixKind) -> (f64, f64) {
        match kind {
            MatrixKind::A => (self.k_min_a, self.gamma_a),
            MatrixKind::B => (self.k_min_b, self.gamma_b),
        }
    }

    /// Keep fraction for `kind` given the previous round's global loss.
    /// Before the initial loss is known this is `k_max`. A loss above the
    /// initial one clamps to `k_max`.
    pub fn adaptive_k(&self, kind: MatrixKind, prev_loss: f64) -> f64 {
        let Some(l0) = self.initial_loss else {
            return self.k_max;
        };
        let (k_min, gamma) = self.params(kind);
        let k = k_min + (self.k_max - k_min) * (-gamma * (l0 - prev_loss)).exp();
        if k.is_nan() {
            return self.k_max;
        }
        k.clamp(k_min, self.k_max)
    }
}

/// Error-feedback accumulator, one scalar per trainable parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual(Vec<f32>);

impl Residual {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Sparse form of one tensor (or one slice of a tensor).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseTensor {
    pub id: u16,
    pub dense_len: u32,
    /// Strictly increasing, each `< dense_len`.
    pub positions: Vec<u32>,
    pub values: Vec<f32>,
}

impl SparseTensor {
    pub fn nnz(&self) -> usize {
        self.positions.len()
    }

    pub fn densify(&self) -> Vec<f32> {
        let mut out = vec![0.0; self.dense_len as usize];
        self.scatter_into(&mut out);
        out
    }

    pub fn scatter_into(&self, out: &mut [f32]) {
        for (&p, &v) in self.positions.iter().zip(&self.values) {
            out[p as usize] = v;
        }
    }

    /// Checks the structural invariants a decoder or caller relies on.
    pub fn validate(&self) -> Result<()> {
        if self.positions.len() != self.values.len() {
            return Err(Error::ContractViolation(format!(
                "tensor {}: {} positions but {} values",
                self.id,
                self.positions.len(),
                self.values.len()
            )));
        }
        if self.positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::ContractViolation(format!(
                "tensor {}: positions not strictly increasing",
                self.id
            )));
        }
        if self.positions.last().is_some_and(|&p| p >= self.dense_len) {
            return Err(Error::ContractViolation(format!(
                "tensor {}: position beyond dense length {}",
                self.id, self.dense_len
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseUpdate {
    pub tensors: Vec<SparseTensor>,
}

impl SparseUpdate {
    pub fn nnz(&self) -> usize {
        self.tensors.iter().map(SparseTensor::nnz).sum()
    }

    pub fn dense_len(&self) -> usize {
        self.tensors.iter().map(|t| t.dense_len as usize).sum()
    }

    /// Concatenation of every tensor's dense form, in order.
    pub fn densify(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.dense_len());
        for t in &self.tensors {
            out.extend(t.densify());
        }
        out
    }
}

/// Number of entries kept out of `len` at fraction `k`: `ceil(k·len)`, at
/// least one for a non-empty tensor.
pub fn kept_count(len: usize, k: f64) -> usize {
    if len == 0 {
        return 0;
    }
    // guard against 0.6 * 10 = 6.000000000000001 style overshoot
    let raw = k * len as f64;
    let rounded = raw.round();
    let c = if (raw - rounded).abs() < 1e-9 {
        rounded
    } else {
        raw.ceil()
    };
    (c as usize).clamp(1, len)
}

/// Indices of the `count` largest-magnitude entries, ascending. Ties go to
/// the lower index.
pub fn top_k_indices(values: &[f32], count: usize) -> Vec<u32> {
    let count = count.min(values.len());
    let mut idx: Vec<u32> = (0..values.len() as u32).collect();
    if count < values.len() {
        let by_mag = |a: &u32, b: &u32| {
            values[*b as usize]
                .abs()
                .total_cmp(&values[*a as usize].abs())
                .then(a.cmp(b))
        };
        if count > 0 {
            idx.select_nth_unstable_by(count - 1, by_mag);
        }
        idx.truncate(count);
    }
    idx.sort_unstable();
    idx
}

/// Top-k of `delta + residual` with the given quantizer applied to kept
/// values. The residual becomes `delta + residual - densify(kept)`.
pub fn sparsify_quantized(
    id: u16,
    delta: &[f32],
    residual: &mut [f32],
    k: f64,
    quantize: impl Fn(f32) -> f32,
) -> Result<SparseTensor> {
    if delta.len() != residual.len() {
        return Err(Error::ContractViolation(format!(
            "delta has {} scalars but residual has {}",
            delta.len(),
            residual.len()
        )));
    }
    if !(k > 0.0 && k <= 1.0) {
        return Err(Error::InvalidArgument(format!("keep fraction must be in (0, 1], got {k}")));
    }
    let dense_len = u32::try_from(delta.len())
        .map_err(|_| Error::MessageTooLarge(format!("tensor of {} scalars", delta.len())))?;
    for (r, d) in residual.iter_mut().zip(delta) {
        *r += d;
    }
    let positions = top_k_indices(residual, kept_count(delta.len(), k));
    let values = positions
        .iter()
        .map(|&p| {
            let s = residual[p as usize];
            let q = quantize(s);
            residual[p as usize] = s - q;
            q
        })
        .collect();
    Ok(SparseTensor {
        id,
        dense_len,
        positions,
        values,
    })
}

/// Top-k of `delta + residual`; see [`sparsify_quantized`].
pub fn sparsify_with_residual(
    id: u16,
    delta: &[f32],
    residual: &mut [f32],
    k: f64,
) -> Result<SparseTensor> {
    sparsify_quantized(id, delta, residual, k, |v| v)
}

/// A slice of one tensor, positioned within a flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorPiece {
    pub id: u16,
    pub kind: MatrixKind,
    /// Offset into the flat parameter vector.
    pub offset: usize,
    pub len: usize,
}

impl TensorPiece {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

impl From<&TensorSpan> for TensorPiece {
    fn from(s: &TensorSpan) -> Self {
        Self {
            id: s.id,
            kind: s.kind,
            offset: s.offset,
            len: s.len,
        }
    }
}

/// Sparsifies each piece of a flat delta independently, with the keep
/// fraction chosen by matrix kind.
pub fn sparsify_pieces(
    pieces: &[TensorPiece],
    delta: &[f32],
    residual: &mut Residual,
    k_of: impl Fn(MatrixKind) -> f64,
    quantize: impl Fn(f32) -> f32 + Copy,
) -> Result<SparseUpdate> {
    if delta.len() != residual.len() {
        return Err(Error::ContractViolation(format!(
            "delta has {} scalars but residual has {}",
            delta.len(),
            residual.len()
        )));
    }
    let mut tensors = Vec::with_capacity(pieces.len());
    for p in pieces {
        let r = p.range();
        if r.end > delta.len() {
            return Err(Error::ContractViolation(format!(
                "tensor piece {} ends at {} beyond {}",
                p.id,
                r.end,
                delta.len()
            )));
        }
        tensors.push(sparsify_quantized(
            p.id,
            &delta[r.clone()],
            &mut residual.as_mut_slice()[r],
            k_of(p.kind),
            quantize,
        )?);
    }
    Ok(SparseUpdate { tensors })
}
