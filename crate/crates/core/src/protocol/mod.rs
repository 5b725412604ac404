//! Round-robin segment sharing.
//!
//! The flat LoRA vector is cut into `N_s` contiguous, near-equal segments.
//! In round `t` the participant in slot `i` uploads segment
//! `(i + t) mod N_s`, so with `N_s <= N_t` every segment arrives at least
//! once per round. The server averages each segment over its uploaders,
//! weighted by sample count; a client entering a round blends the fresh
//! global model with its own last local model, discounting the latter by
//! `e^(-beta·(t - tau))`.

mod round;

use std::ops::Range;

use crate::model::ParamLayout;
use crate::sparsifier::TensorPiece;
use crate::{Error, Result};

pub use round::{
    run_round, ClientState, ProtocolConfig, ServerState, SparsifyMode, BROADCAST_CLIENT_ID,
    BROADCAST_SEGMENT_ID,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentPartition {
    boundaries: Vec<usize>,
}

impl SegmentPartition {
    pub fn num_segments(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn total_len(&self) -> usize {
        *self.boundaries.last().expect("non-empty boundaries")
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn range(&self, segment: usize) -> Range<usize> {
        self.boundaries[segment]..self.boundaries[segment + 1]
    }

    pub fn size(&self, segment: usize) -> usize {
        self.boundaries[segment + 1] - self.boundaries[segment]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Parts of the layout's tensors that fall inside `segment`, in order.
    /// Offsets stay absolute (into the full flat vector).
    pub fn pieces(&self, segment: usize, layout: &ParamLayout) -> Vec<TensorPiece> {
        let seg = self.range(segment);
        layout
            .spans()
            .iter()
            .filter_map(|s| {
                let start = s.offset.max(seg.start);
                let end = (s.offset + s.len).min(seg.end);
                (start < end).then(|| TensorPiece {
                    id: s.id,
                    kind: s.kind,
                    offset: start,
                    len: end - start,
                })
            })
            .collect()
    }
}

/// Splits `total_len` scalars into `segments` contiguous parts; the first
/// `total_len % segments` parts get one extra scalar.
pub fn partition(total_len: usize, segments: usize) -> Result<SegmentPartition> {
    if segments == 0 {
        return Err(Error::InvalidConfig("segment count must be >= 1".into()));
    }
    if segments > total_len {
        return Err(Error::InvalidConfig(format!(
            "{segments} segments for only {total_len} parameters"
        )));
    }
    let base = total_len / segments;
    let extra = total_len % segments;
    let mut boundaries = Vec::with_capacity(segments + 1);
    let mut at = 0;
    boundaries.push(0);
    for s in 0..segments {
        at += base + usize::from(s < extra);
        boundaries.push(at);
    }
    Ok(SegmentPartition { boundaries })
}

/// Segment uploaded by participant `slot` in round `round`.
pub fn assign_segment(slot: usize, round: u32, segments: usize) -> usize {
    (slot % segments + round as usize % segments) % segments
}

/// One participant's dense values for one segment.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentUpload {
    pub client_id: u32,
    pub weight: u64,
    pub segment: usize,
    pub values: Vec<f32>,
}

/// Weighted average of each segment over its uploaders, reassembled into a
/// full flat vector. Sums run in f64 in client-id order.
pub fn aggregate_segments(
    partition: &SegmentPartition,
    uploads: &[SegmentUpload],
) -> Result<Vec<f32>> {
    let mut order: Vec<&SegmentUpload> = uploads.iter().collect();
    order.sort_by_key(|u| u.client_id);

    let mut sums = vec![0.0f64; partition.total_len()];
    let mut weights = vec![0.0f64; partition.num_segments()];
    for u in order {
        if u.segment >= partition.num_segments() {
            return Err(Error::ContractViolation(format!(
                "client {} uploaded segment {} of {}",
                u.client_id,
                u.segment,
                partition.num_segments()
            )));
        }
        let range = partition.range(u.segment);
        if u.values.len() != range.len() {
            return Err(Error::ContractViolation(format!(
                "client {} sent {} scalars for segment {} of size {}",
                u.client_id,
                u.values.len(),
                u.segment,
                range.len()
            )));
        }
        if u.weight == 0 {
            return Err(Error::ContractViolation(format!(
                "client {} has zero aggregation weight",
                u.client_id
            )));
        }
        let w = u.weight as f64;
        for (s, &v) in sums[range].iter_mut().zip(&u.values) {
            *s += w * v as f64;
        }
        weights[u.segment] += w;
    }

    let mut out = vec![0.0f32; partition.total_len()];
    for (seg, &total) in weights.iter().enumerate() {
        if total == 0.0 {
            return Err(Error::MissingSegment { segment: seg });
        }
        let range = partition.range(seg);
        for (o, &s) in out[range.clone()].iter_mut().zip(&sums[range]) {
            *o = (s / total) as f32;
        }
    }
    Ok(out)
}

/// Weight on the local model when a client last active in `tau` rejoins in
/// round `round`. Clients that never participated take the global model.
pub fn mix_weight(round: u32, tau: Option<u32>, beta: f64) -> f64 {
    match tau {
        Some(tau) if tau < round => (-beta * (round - tau) as f64).exp(),
        _ => 0.0,
    }
}

/// `(1 - w)·global + w·local` element-wise with `w = mix_weight(..)`.
pub fn mix_vectors(global: &[f32], local: &[f32], w: f64) -> Vec<f32> {
    if w == 0.0 {
        return global.to_vec();
    }
    global
        .iter()
        .zip(local)
        .map(|(&g, &l)| ((1.0 - w) * g as f64 + w * l as f64) as f32)
        .collect()
}
