//! Toy frozen-base network whose only trainable parameters are LoRA factors.
//!
//! Each layer computes `z = W·x + (alpha/r)·B·(A·x)` with a frozen `W`
//! (`m×n`), `A` (`r×n`) and `B` (`m×r`). Hidden layers apply `tanh`; the last
//! layer feeds softmax cross-entropy (class targets) or half squared error
//! (vector targets).
//!
//! Trainable scalars live in one flat vector. The order is fixed for a run:
//! layer 0 `A` row-major, layer 0 `B` row-major, layer 1 `A`, and so on.

use std::sync::Arc;

use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{ClientDataset, SampleSet, TargetRef};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatrixKind {
    A,
    B,
}

/// `rows = m` outputs, `cols = n` inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
}

impl LayerShape {
    pub fn a_len(&self) -> usize {
        self.rank * self.cols
    }

    pub fn b_len(&self) -> usize {
        self.rows * self.rank
    }
}

/// One trainable matrix inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorSpan {
    pub id: u16,
    pub layer: usize,
    pub kind: MatrixKind,
    pub offset: usize,
    pub len: usize,
}

impl TensorSpan {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    shapes: Vec<LayerShape>,
    spans: Vec<TensorSpan>,
    total_len: usize,
}

impl ParamLayout {
    pub fn new(shapes: Vec<LayerShape>) -> Result<Self> {
        if shapes.is_empty() {
            return Err(Error::InvalidConfig("model needs at least one layer".into()));
        }
        if shapes.len() * 2 > u16::MAX as usize {
            return Err(Error::InvalidConfig("too many layers for u16 tensor ids".into()));
        }
        let mut spans = Vec::with_capacity(shapes.len() * 2);
        let mut offset = 0;
        for (layer, s) in shapes.iter().enumerate() {
            if s.rows == 0 || s.cols == 0 || s.rank == 0 {
                return Err(Error::InvalidConfig(format!(
                    "layer {layer}: dimensions and rank must be positive"
                )));
            }
            if s.rank > s.rows.min(s.cols) {
                return Err(Error::InvalidConfig(format!(
                    "layer {layer}: rank {} exceeds min({}, {})",
                    s.rank, s.rows, s.cols
                )));
            }
            for (kind, len) in [(MatrixKind::A, s.a_len()), (MatrixKind::B, s.b_len())] {
                spans.push(TensorSpan {
                    id: spans.len() as u16,
                    layer,
                    kind,
                    offset,
                    len,
                });
                offset += len;
            }
        }
        Ok(Self {
            shapes,
            spans,
            total_len: offset,
        })
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn spans(&self) -> &[TensorSpan] {
        &self.spans
    }

    pub fn total_len(&self) -> usize {
        self.total_len
    }
}

/// Borrowed view of one layer's factor pair.
#[derive(Clone, Copy, Debug)]
pub struct LoraLayer<'a> {
    pub shape: LayerShape,
    pub a: &'a [f32],
    pub b: &'a [f32],
}

/// All LoRA factors of a model, stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct LoraParams {
    layout: Arc<ParamLayout>,
    values: Vec<f32>,
}

impl LoraParams {
    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        let values = vec![0.0; layout.total_len()];
        Self { layout, values }
    }

    /// Rebuilds parameters from a flat vector in layout order.
    pub fn from_flat(layout: Arc<ParamLayout>, values: Vec<f32>) -> Result<Self> {
        if values.len() != layout.total_len() {
            return Err(Error::ContractViolation(format!(
                "flat vector has {} scalars, layout expects {}",
                values.len(),
                layout.total_len()
            )));
        }
        Ok(Self { layout, values })
    }

    pub fn flatten(&self) -> Vec<f32> {
        self.values.clone()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn into_flat(self) -> Vec<f32> {
        self.values
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn total_len(&self) -> usize {
        self.values.len()
    }

    pub fn num_layers(&self) -> usize {
        self.layout.shapes.len()
    }

    pub fn layer(&self, l: usize) -> LoraLayer<'_> {
        let a = self.layout.spans[2 * l];
        let b = self.layout.spans[2 * l + 1];
        LoraLayer {
            shape: self.layout.shapes[l],
            a: &self.values[a.range()],
            b: &self.values[b.range()],
        }
    }

    /// Concatenation of every tensor of the given kind, in layer order.
    pub fn gather(&self, kind: MatrixKind) -> Vec<f32> {
        self.layout
            .spans
            .iter()
            .filter(|s| s.kind == kind)
            .flat_map(|s| self.values[s.range()].iter().copied())
            .collect()
    }
}

/// Frozen base weights plus the LoRA scaling factor.
#[derive(Debug)]
pub struct FrozenModel {
    layout: Arc<ParamLayout>,
    bases: Vec<Vec<f32>>,
    alpha: f32,
}

impl FrozenModel {
    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn base(&self, layer: usize) -> &[f32] {
        &self.bases[layer]
    }

    pub fn alpha(&self) -> f32 {
        self.alpha
    }

    /// Effective weight `W + (alpha/r)·B·A` of one layer, row-major `m×n`.
    pub fn effective_weight(&self, params: &LoraParams, layer: usize) -> Vec<f32> {
        let l = params.layer(layer);
        let s = self.alpha / l.shape.rank as f32;
        let (m, n, r) = (l.shape.rows, l.shape.cols, l.shape.rank);
        let mut w = self.bases[layer].clone();
        for i in 0..m {
            for j in 0..n {
                let ba: f32 = (0..r).map(|q| l.b[i * r + q] * l.a[q * n + j]).sum();
                w[i * n + j] += s * ba;
            }
        }
        w
    }

    fn check(&self, params: &LoraParams) -> Result<()> {
        if **params.layout() != *self.layout {
            return Err(Error::ContractViolation(
                "parameters were built for a different model layout".into(),
            ));
        }
        Ok(())
    }

    fn net<'a, T: Float>(&'a self, bases: &'a [Vec<T>], params: &'a [T]) -> Net<'a, T> {
        Net {
            layout: &self.layout,
            bases,
            params,
            alpha: T::from(self.alpha).expect("alpha representable"),
        }
    }

    /// Mean loss over a sample set, accumulated in f64.
    pub fn mean_loss(&self, params: &LoraParams, samples: &SampleSet) -> Result<f64> {
        self.check(params)?;
        if samples.is_empty() {
            return Err(Error::ContractViolation("loss over an empty sample set".into()));
        }
        let net = self.net(&self.bases, params.as_slice());
        let total: f64 = (0..samples.len())
            .map(|i| net.sample(samples.x(i), samples.target(i), None) as f64)
            .sum();
        Ok(total / samples.len() as f64)
    }

    /// Mean loss and its gradient over a subset of rows.
    pub fn loss_and_grad(
        &self,
        params: &LoraParams,
        samples: &SampleSet,
        rows: &[usize],
    ) -> Result<(f32, Vec<f32>)> {
        self.check(params)?;
        let net = self.net(&self.bases, params.as_slice());
        let mut grad = vec![0.0f32; params.total_len()];
        let mut loss = 0.0f32;
        for &i in rows {
            loss += net.sample(samples.x(i), samples.target(i), Some(&mut grad));
        }
        let inv = 1.0 / rows.len().max(1) as f32;
        grad.iter_mut().for_each(|g| *g *= inv);
        Ok((loss * inv, grad))
    }

    /// Single-sample loss evaluated entirely in f64. Reference path for
    /// gradient checks.
    pub fn sample_loss_f64(&self, params: &[f64], x: &[f32], target: TargetRef<'_>) -> f64 {
        let bases = self.bases_f64();
        let xs: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        self.net(&bases, params).sample(&xs, target, None)
    }

    /// Single-sample loss and analytic gradient in f64.
    pub fn sample_grad_f64(
        &self,
        params: &[f64],
        x: &[f32],
        target: TargetRef<'_>,
    ) -> (f64, Vec<f64>) {
        let bases = self.bases_f64();
        let xs: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let mut grad = vec![0.0; params.len()];
        let loss = self.net(&bases, params).sample(&xs, target, Some(&mut grad));
        (loss, grad)
    }

    fn bases_f64(&self) -> Vec<Vec<f64>> {
        self.bases
            .iter()
            .map(|w| w.iter().map(|&v| v as f64).collect())
            .collect()
    }
}

/// Builds frozen bases and freshly initialised LoRA factors. `dims` lists
/// `(m, n)` per layer; consecutive layers must chain (`n[l+1] == m[l]`).
///
/// `A` is uniform in `[-1/sqrt(n), 1/sqrt(n)]`, `B` is zero, and `W` is
/// normal with standard deviation `1/sqrt(n)`.
pub fn build_toy_model(
    dims: &[(usize, usize)],
    rank: usize,
    alpha: f32,
    seed: u64,
) -> Result<(LoraParams, FrozenModel)> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("lora scaling must be positive, got {alpha}")));
    }
    for (l, w) in dims.windows(2).enumerate() {
        if w[1].1 != w[0].0 {
            return Err(Error::InvalidConfig(format!(
                "layer {} expects {} inputs but layer {l} produces {}",
                l + 1,
                w[1].1,
                w[0].0
            )));
        }
    }
    let shapes = dims
        .iter()
        .map(|&(rows, cols)| LayerShape { rows, cols, rank })
        .collect();
    let layout = Arc::new(ParamLayout::new(shapes)?);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bases = Vec::with_capacity(dims.len());
    let mut params = LoraParams::zeros(layout.clone());
    for (l, s) in layout.shapes().iter().enumerate() {
        let bound = 1.0 / (s.cols as f32).sqrt();
        let normal = Normal::new(0.0, bound).expect("positive std");
        bases.push((0..s.rows * s.cols).map(|_| normal.sample(&mut rng)).collect());
        let uniform = Uniform::new_inclusive(-bound, bound).expect("valid bounds");
        let span = layout.spans()[2 * l];
        for v in &mut params.as_mut_slice()[span.range()] {
            *v = uniform.sample(&mut rng);
        }
    }
    let model = FrozenModel {
        layout,
        bases,
        alpha,
    };
    Ok((params, model))
}

struct Net<'a, T> {
    layout: &'a ParamLayout,
    bases: &'a [Vec<T>],
    params: &'a [T],
    alpha: T,
}

impl<T: Float> Net<'_, T> {
    /// Forward pass for one sample; accumulates the gradient when `grad` is
    /// given and returns the loss.
    fn sample(&self, x: &[T], target: TargetRef<'_>, grad: Option<&mut [T]>) -> T {
        let shapes = self.layout.shapes();
        let depth = shapes.len();
        // inputs[l] is the input to layer l; us[l] = A_l · inputs[l]
        let mut inputs: Vec<Vec<T>> = Vec::with_capacity(depth);
        let mut us: Vec<Vec<T>> = Vec::with_capacity(depth);
        let mut current = x.to_vec();
        let mut z = Vec::new();
        for (l, s) in shapes.iter().enumerate() {
            let (a, b) = self.factors(l);
            let scale = self.alpha / T::from(s.rank).unwrap();
            let u = matvec(a, &current, s.rank, s.cols);
            let mut out = matvec(&self.bases[l], &current, s.rows, s.cols);
            let bu = matvec(b, &u, s.rows, s.rank);
            for (o, v) in out.iter_mut().zip(&bu) {
                *o = *o + scale * *v;
            }
            inputs.push(current);
            us.push(u);
            if l + 1 < depth {
                current = out.iter().map(|v| v.tanh()).collect();
            } else {
                current = Vec::new();
                z = out;
            }
        }

        let (loss, mut g) = head_loss(&z, target);
        let Some(grad) = grad else {
            return loss;
        };

        for l in (0..depth).rev() {
            let s = shapes[l];
            let (a, b) = self.factors(l);
            let scale = self.alpha / T::from(s.rank).unwrap();
            let spans = &self.layout.spans()[2 * l..2 * l + 2];
            let x_l = &inputs[l];
            let u = &us[l];

            // dB = scale · g uᵀ
            let gb = &mut grad[spans[1].range()];
            for i in 0..s.rows {
                for q in 0..s.rank {
                    gb[i * s.rank + q] = gb[i * s.rank + q] + scale * g[i] * u[q];
                }
            }
            // btg = Bᵀ g ; dA = scale · btg xᵀ
            let btg = matvec_t(b, &g, s.rows, s.rank);
            let ga = &mut grad[spans[0].range()];
            for q in 0..s.rank {
                for j in 0..s.cols {
                    ga[q * s.cols + j] = ga[q * s.cols + j] + scale * btg[q] * x_l[j];
                }
            }
            if l == 0 {
                break;
            }
            // dx = Wᵀ g + scale · Aᵀ btg, then through tanh of the previous layer
            let mut dx = matvec_t(&self.bases[l], &g, s.rows, s.cols);
            let atb = matvec_t(a, &btg, s.rank, s.cols);
            for ((d, v), h) in dx.iter_mut().zip(&atb).zip(x_l) {
                *d = (*d + scale * *v) * (T::one() - *h * *h);
            }
            g = dx;
        }
        loss
    }

    fn factors(&self, l: usize) -> (&[T], &[T]) {
        let spans = &self.layout.spans()[2 * l..2 * l + 2];
        (&self.params[spans[0].range()], &self.params[spans[1].range()])
    }
}

fn head_loss<T: Float>(z: &[T], target: TargetRef<'_>) -> (T, Vec<T>) {
    match target {
        TargetRef::Class(c) => {
            let max = z.iter().copied().fold(T::neg_infinity(), T::max);
            let exps: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
            let sum = exps.iter().copied().fold(T::zero(), |a, b| a + b);
            let loss = sum.ln() + max - z[c];
            let mut g: Vec<T> = exps.into_iter().map(|e| e / sum).collect();
            g[c] = g[c] - T::one();
            (loss, g)
        }
        TargetRef::Values(y) => {
            let g: Vec<T> = z
                .iter()
                .zip(y)
                .map(|(&p, &t)| p - T::from(t).unwrap())
                .collect();
            let half = T::from(0.5).unwrap();
            let loss = g.iter().fold(T::zero(), |a, &d| a + d * d) * half;
            (loss, g)
        }
    }
}

fn matvec<T: Float>(m: &[T], v: &[T], rows: usize, cols: usize) -> Vec<T> {
    (0..rows)
        .map(|i| {
            m[i * cols..(i + 1) * cols]
                .iter()
                .zip(v)
                .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
        })
        .collect()
}

fn matvec_t<T: Float>(m: &[T], v: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); cols];
    for i in 0..rows {
        let row = &m[i * cols..(i + 1) * cols];
        for (o, &a) in out.iter_mut().zip(row) {
            *o = *o + a * v[i];
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f32,
    pub batch_size: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub trained: LoraParams,
    /// `trained - start`, in layout order.
    pub delta: Vec<f32>,
    /// Mean local loss at the starting parameters.
    pub start_loss: f64,
    /// Mean local loss after the last epoch.
    pub final_loss: f64,
}

/// Mini-batch SGD over the client's rows in their stored order. Only the
/// LoRA factors move; the frozen bases are never touched.
pub fn local_train(
    model: &FrozenModel,
    start: &LoraParams,
    data: &ClientDataset,
    opts: &TrainOptions,
    round: u32,
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::ContractViolation(format!(
            "client {} holds no samples",
            data.client_id
        )));
    }
    let diverged = |loss: f64| Error::DivergedTraining {
        round,
        client: data.client_id,
        loss,
    };
    let start_loss = model.mean_loss(start, &data.samples)?;
    if !start_loss.is_finite() {
        return Err(diverged(start_loss));
    }
    let batch = opts.batch_size.max(1);
    let rows: Vec<usize> = (0..data.len()).collect();
    let mut params = start.clone();
    for _ in 0..opts.epochs {
        for chunk in rows.chunks(batch) {
            let (loss, grad) = model.loss_and_grad(&params, &data.samples, chunk)?;
            if !loss.is_finite() {
                return Err(diverged(loss as f64));
            }
            for (p, g) in params.as_mut_slice().iter_mut().zip(&grad) {
                *p -= opts.lr * g;
            }
        }
    }
    let final_loss = if opts.epochs == 0 {
        start_loss
    } else {
        model.mean_loss(&params, &data.samples)?
    };
    if !final_loss.is_finite() {
        return Err(diverged(final_loss));
    }
    let delta = params
        .as_slice()
        .iter()
        .zip(start.as_slice())
        .map(|(t, s)| t - s)
        .collect();
    Ok(TrainOutcome {
        trained: params,
        delta,
        start_loss,
        final_loss,
    })
}

/// `(1/N) Σ_i n_i · mean_loss_i` over all clients.
pub fn evaluate_global_loss<'a>(
    model: &FrozenModel,
    params: &LoraParams,
    clients: impl IntoIterator<Item = &'a ClientDataset>,
) -> Result<f64> {
    let mut weighted = 0.0;
    let mut total = 0usize;
    for c in clients {
        let loss = model.mean_loss(params, &c.samples)?;
        if !loss.is_finite() {
            return Err(Error::DivergedTraining {
                round: u32::MAX,
                client: c.client_id,
                loss,
            });
        }
        weighted += c.len() as f64 * loss;
        total += c.len();
    }
    if total == 0 {
        return Err(Error::ContractViolation("global loss over zero samples".into()));
    }
    Ok(weighted / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Targets;

    fn toy_set(dim: usize, n: usize, classes: usize) -> SampleSet {
        let features = (0..n * dim).map(|i| ((i * 37 % 11) as f32 - 5.0) / 5.0).collect();
        let targets = Targets::Classes((0..n).map(|i| i % classes).collect());
        SampleSet::new(dim, features, targets).unwrap()
    }

    fn client(samples: SampleSet) -> ClientDataset {
        ClientDataset {
            client_id: 3,
            sample_ids: (0..samples.len()).collect(),
            samples,
        }
    }

    #[test]
    fn zero_b_means_effective_weight_is_base() {
        let (p, m) = build_toy_model(&[(8, 8)], 2, 4.0, 0).unwrap();
        assert!(p.layer(0).b.iter().all(|&v| v == 0.0));
        assert!(p.layer(0).a.iter().any(|&v| v != 0.0));
        assert_eq!(m.effective_weight(&p, 0), m.base(0));
    }

    #[test]
    fn total_len_from_shapes() {
        let (p, _) = build_toy_model(&[(4, 6), (2, 4)], 2, 1.0, 0).unwrap();
        assert_eq!(p.total_len(), (2 * 6 + 4 * 2) + (2 * 4 + 2 * 2));
    }

    #[test]
    fn same_seed_same_bits() {
        let (p1, m1) = build_toy_model(&[(6, 5), (3, 6)], 2, 2.0, 9).unwrap();
        let (p2, m2) = build_toy_model(&[(6, 5), (3, 6)], 2, 2.0, 9).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(m1.bases, m2.bases);
        let (p3, _) = build_toy_model(&[(6, 5), (3, 6)], 2, 2.0, 10).unwrap();
        assert_ne!(p1, p3);
    }

    #[test]
    fn rank_too_large_rejected() {
        assert!(matches!(
            build_toy_model(&[(4, 3)], 4, 1.0, 0),
            Err(Error::InvalidConfig(_))
        ));
        assert!(build_toy_model(&[(4, 3), (2, 5)], 1, 1.0, 0).is_err());
    }

    #[test]
    fn a_init_within_bounds() {
        let (p, _) = build_toy_model(&[(16, 9)], 3, 1.0, 1).unwrap();
        assert!(p.layer(0).a.iter().all(|v| v.abs() <= 1.0 / 3.0));
    }

    #[test]
    fn layout_order_is_a_then_b_per_layer() {
        let (p, _) = build_toy_model(&[(4, 6), (2, 4)], 2, 1.0, 0).unwrap();
        let spans = p.layout().spans();
        let kinds: Vec<_> = spans.iter().map(|s| (s.layer, s.kind, s.offset, s.len)).collect();
        assert_eq!(
            kinds,
            vec![
                (0, MatrixKind::A, 0, 12),
                (0, MatrixKind::B, 12, 8),
                (1, MatrixKind::A, 20, 8),
                (1, MatrixKind::B, 28, 4),
            ]
        );
    }

    #[test]
    fn zero_epochs_is_identity() {
        let (p, m) = build_toy_model(&[(3, 4)], 2, 2.0, 0).unwrap();
        let c = client(toy_set(4, 5, 3));
        let opts = TrainOptions {
            epochs: 0,
            lr: 0.1,
            batch_size: 2,
        };
        let out = local_train(&m, &p, &c, &opts, 0).unwrap();
        assert!(out.delta.iter().all(|&d| d == 0.0));
        assert_eq!(out.final_loss, m.mean_loss(&p, &c.samples).unwrap());
        assert_eq!(out.start_loss, out.final_loss);
    }

    #[test]
    fn training_reduces_loss_and_leaves_base_alone() {
        let (p, m) = build_toy_model(&[(6, 4), (3, 6)], 2, 4.0, 2).unwrap();
        let before: Vec<Vec<f32>> = m.bases.clone();
        let c = client(toy_set(4, 30, 3));
        let opts = TrainOptions {
            epochs: 30,
            lr: 0.05,
            batch_size: 5,
        };
        let out = local_train(&m, &p, &c, &opts, 0).unwrap();
        assert!(out.final_loss < out.start_loss);
        assert_eq!(m.bases, before);
    }

    #[test]
    fn divergence_is_reported_with_context() {
        let (p, m) = build_toy_model(&[(3, 4)], 2, 2.0, 0).unwrap();
        let c = client(toy_set(4, 5, 3));
        let opts = TrainOptions {
            epochs: 50,
            lr: 1e30,
            batch_size: 1,
        };
        match local_train(&m, &p, &c, &opts, 17) {
            Err(Error::DivergedTraining { round, client, .. }) => {
                assert_eq!((round, client), (17, 3));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn weighted_global_loss() {
        let (p, m) = build_toy_model(&[(3, 4)], 2, 2.0, 0).unwrap();
        let set = toy_set(4, 6, 3);
        let clients = vec![client(set.clone()), client(set.clone())];
        let g = evaluate_global_loss(&m, &p, &clients).unwrap();
        let one = m.mean_loss(&p, &set).unwrap();
        assert!((g - one).abs() < 1e-12);
    }

    #[test]
    fn foreign_layout_rejected() {
        let (p, _) = build_toy_model(&[(3, 4)], 2, 2.0, 0).unwrap();
        let (_, m) = build_toy_model(&[(3, 5)], 2, 2.0, 0).unwrap();
        assert!(m.mean_loss(&p, &toy_set(5, 2, 3)).is_err());
    }
}
