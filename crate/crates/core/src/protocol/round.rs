use std::time::Instant;

use rayon::prelude::*;

use super::{
    aggregate_segments, assign_segment, mix_vectors, mix_weight, partition, SegmentPartition,
    SegmentUpload,
};
use crate::analysis::gini;
use crate::codec::{decode_message, encode_message, MessageHeader, WireFormat};
use crate::data::ClientDataset;
use crate::model::{evaluate_global_loss, local_train, FrozenModel, LoraParams, MatrixKind, TrainOptions};
use crate::netsim::{round_time, NetworkScenario};
use crate::report::{ClientRecord, RoundReport};
use crate::sparsifier::{sparsify_pieces, Residual, SparseUpdate, SparsitySchedule, TensorPiece};
use crate::{Error, Result};

/// Client id carried by server broadcasts.
pub const BROADCAST_CLIENT_ID: u32 = u32::MAX;
/// Segment id carried by server broadcasts (the whole model).
pub const BROADCAST_SEGMENT_ID: u16 = u16::MAX;

#[derive(Clone, Debug, PartialEq)]
pub enum SparsifyMode {
    /// Dense transmission, no error feedback.
    Off,
    /// Loss-driven keep fraction per matrix kind.
    Adaptive,
    /// One keep fraction for every tensor and round.
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    /// `N_s`; 1 disables segment sharing.
    pub segments: usize,
    pub sparsify: SparsifyMode,
    pub wire: WireFormat,
    /// Staleness decay; `f64::INFINITY` always adopts the global model.
    pub beta: f64,
    pub train: TrainOptions,
    pub scenario: NetworkScenario,
    /// Fixed per-client compute time; measured wall time when `None`.
    pub compute_s: Option<f64>,
    /// Evaluate the broadcast model on every client after each round.
    pub evaluate: bool,
}

#[derive(Clone, Debug)]
pub struct ClientState {
    pub data: ClientDataset,
    /// Post-training local model from the last round this client joined.
    pub local: Option<LoraParams>,
    /// Last participation round; `None` before the first one.
    pub tau: Option<u32>,
    pub residual: Residual,
}

impl ClientState {
    pub fn new(data: ClientDataset, total_len: usize) -> Self {
        Self {
            data,
            local: None,
            tau: None,
            residual: Residual::zeros(total_len),
        }
    }

    pub fn id(&self) -> u32 {
        self.data.client_id
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Download {
    bytes: u64,
    scalars: u64,
    dense_scalars: u64,
}

#[derive(Clone, Debug)]
pub struct ServerState {
    /// Global model as every client holds it after the last broadcast.
    pub global: LoraParams,
    pub schedule: SparsitySchedule,
    /// Participant loss of the previous round.
    pub prev_loss: Option<f64>,
    residual: Residual,
    partition: SegmentPartition,
    pending: Download,
}

impl ServerState {
    pub fn new(global: LoraParams, schedule: SparsitySchedule, segments: usize) -> Result<Self> {
        if segments >= BROADCAST_SEGMENT_ID as usize {
            return Err(Error::InvalidConfig(format!(
                "{segments} segments do not fit the u16 segment id"
            )));
        }
        let partition = partition(global.total_len(), segments)?;
        Ok(Self {
            residual: Residual::zeros(global.total_len()),
            global,
            schedule,
            prev_loss: None,
            partition,
            pending: Download::default(),
        })
    }

    pub fn partition(&self) -> &SegmentPartition {
        &self.partition
    }

    fn keep_fractions(&self, mode: &SparsifyMode) -> (f64, f64) {
        match mode {
            SparsifyMode::Off => (1.0, 1.0),
            SparsifyMode::Fixed(k) => (*k, *k),
            SparsifyMode::Adaptive => match self.prev_loss {
                None => (self.schedule.k_max, self.schedule.k_max),
                Some(l) => (
                    self.schedule.adaptive_k(MatrixKind::A, l),
                    self.schedule.adaptive_k(MatrixKind::B, l),
                ),
            },
        }
    }
}

struct ClientOutput {
    record: ClientRecord,
    message: Vec<u8>,
}

fn sparsify_for_wire(
    mode: &SparsifyMode,
    pieces: &[TensorPiece],
    delta: &[f32],
    residual: &mut Residual,
    (k_a, k_b): (f64, f64),
    wire: WireFormat,
) -> Result<SparseUpdate> {
    let quantize = move |v| wire.values.quantize(v);
    if *mode == SparsifyMode::Off {
        let mut scratch = Residual::zeros(delta.len());
        return sparsify_pieces(pieces, delta, &mut scratch, |_| 1.0, quantize);
    }
    let k_of = |kind| match kind {
        MatrixKind::A => k_a,
        MatrixKind::B => k_b,
    };
    sparsify_pieces(pieces, delta, residual, k_of, quantize)
}

fn selection_ops(len: usize) -> u64 {
    let log = (usize::BITS - len.max(1).leading_zeros()) as u64;
    len as u64 * log
}

/// Runs one round: mix, train, sparsify and encode one segment per
/// participant, decode and aggregate on the server, then broadcast the
/// compressed global update. `sampled` holds client ids; slots follow
/// ascending id order.
pub fn run_round(
    model: &FrozenModel,
    server: &mut ServerState,
    clients: &mut [ClientState],
    sampled: &[u32],
    round: u32,
    cfg: &ProtocolConfig,
) -> Result<RoundReport> {
    let mut ids = sampled.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != sampled.len() {
        return Err(Error::ContractViolation("sampled client ids repeat".into()));
    }
    let segments = server.partition.num_segments();
    if segments > ids.len() {
        return Err(Error::InvalidConfig(format!(
            "{segments} segments but only {} participants",
            ids.len()
        )));
    }

    let mut participants: Vec<&mut ClientState> = clients
        .iter_mut()
        .filter(|c| ids.binary_search(&c.id()).is_ok())
        .collect();
    participants.sort_by_key(|c| c.id());
    if participants.len() != ids.len() {
        return Err(Error::ContractViolation("sampled a client id that does not exist".into()));
    }

    let ks = server.keep_fractions(&cfg.sparsify);
    let download = server.pending;
    let layout = server.global.layout().clone();
    let total_len = layout.total_len();
    let global = &server.global;
    let part = &server.partition;

    let outputs: Vec<ClientOutput> = participants
        .par_iter_mut()
        .enumerate()
        .map(|(slot, client)| -> Result<ClientOutput> {
            let w = mix_weight(round, client.tau, cfg.beta);
            let mixed = match &client.local {
                Some(local) if w > 0.0 => LoraParams::from_flat(
                    layout.clone(),
                    mix_vectors(global.as_slice(), local.as_slice(), w),
                )?,
                _ => global.clone(),
            };

            let started = Instant::now();
            let outcome = local_train(model, &mixed, &client.data, &cfg.train, round)?;
            let compute_s = cfg.compute_s.unwrap_or_else(|| started.elapsed().as_secs_f64());

            // uploads are relative to the broadcast model both sides share
            let delta: Vec<f32> = outcome
                .trained
                .as_slice()
                .iter()
                .zip(global.as_slice())
                .map(|(t, g)| t - g)
                .collect();
            let segment = assign_segment(slot, round, segments);
            let pieces = part.pieces(segment, &layout);
            let update = sparsify_for_wire(
                &cfg.sparsify,
                &pieces,
                &delta,
                &mut client.residual,
                ks,
                cfg.wire,
            )?;
            let header = MessageHeader {
                round,
                client_id: client.id(),
                segment_id: segment as u16,
            };
            let message = encode_message(&update, header, cfg.wire)?;

            let seg_len = part.size(segment);
            let nnz = update.nnz() as u64;
            let mix_ops = if w > 0.0 { 2 * total_len as u64 } else { 0 };
            let overhead_ops = mix_ops + selection_ops(seg_len) + seg_len as u64 + 2 * nnz;

            client.local = Some(outcome.trained);
            client.tau = Some(round);

            Ok(ClientOutput {
                record: ClientRecord {
                    client_id: client.id(),
                    slot,
                    segment,
                    samples: client.data.len(),
                    upload_bytes: message.len() as u64,
                    upload_scalars: nnz,
                    upload_dense_scalars: seg_len as u64,
                    download_bytes: download.bytes,
                    download_scalars: download.scalars,
                    download_dense_scalars: download.dense_scalars,
                    start_loss: outcome.start_loss,
                    final_loss: outcome.final_loss,
                    compute_s,
                    overhead_ops,
                },
                message,
            })
        })
        .collect::<Result<_>>()?;
    drop(participants);

    // server side: decode every upload and rebuild the uploaded segments
    let mut uploads = Vec::with_capacity(outputs.len());
    for out in &outputs {
        let r = &out.record;
        let msg = decode_message(&out.message)?;
        let expected = MessageHeader {
            round,
            client_id: r.client_id,
            segment_id: r.segment as u16,
        };
        if msg.header != expected {
            return Err(Error::ContractViolation(format!(
                "upload header {:?} does not match {:?}",
                msg.header, expected
            )));
        }
        let seg = server.partition.range(r.segment);
        let pieces = server.partition.pieces(r.segment, &layout);
        if msg.update.tensors.len() != pieces.len() {
            return Err(Error::ContractViolation(format!(
                "client {} sent {} tensors for a segment with {}",
                r.client_id,
                msg.update.tensors.len(),
                pieces.len()
            )));
        }
        let mut values = server.global.as_slice()[seg.clone()].to_vec();
        for (t, p) in msg.update.tensors.iter().zip(&pieces) {
            if t.id != p.id || t.dense_len as usize != p.len {
                return Err(Error::ContractViolation(format!(
                    "client {} tensor {} does not match segment piece {}",
                    r.client_id, t.id, p.id
                )));
            }
            let base = p.offset - seg.start;
            for (&pos, &v) in t.positions.iter().zip(&t.values) {
                values[base + pos as usize] += v;
            }
        }
        uploads.push(SegmentUpload {
            client_id: r.client_id,
            weight: r.samples as u64,
            segment: r.segment,
            values,
        });
    }
    let target = aggregate_segments(&server.partition, &uploads)?;

    // downlink: compressed delta against the model clients already hold
    let delta: Vec<f32> = target
        .iter()
        .zip(server.global.as_slice())
        .map(|(t, g)| t - g)
        .collect();
    let spans: Vec<TensorPiece> = layout.spans().iter().map(TensorPiece::from).collect();
    let update = sparsify_for_wire(&cfg.sparsify, &spans, &delta, &mut server.residual, ks, cfg.wire)?;
    let header = MessageHeader {
        round,
        client_id: BROADCAST_CLIENT_ID,
        segment_id: BROADCAST_SEGMENT_ID,
    };
    let message = encode_message(&update, header, cfg.wire)?;
    let received = decode_message(&message)?;
    let global = server.global.as_mut_slice();
    for (t, span) in received.update.tensors.iter().zip(layout.spans()) {
        for (&pos, &v) in t.positions.iter().zip(&t.values) {
            global[span.offset + pos as usize] += v;
        }
    }
    server.pending = Download {
        bytes: message.len() as u64,
        scalars: update.nnz() as u64,
        dense_scalars: total_len as u64,
    };

    let records: Vec<ClientRecord> = outputs.into_iter().map(|o| o.record).collect();
    let weight: f64 = records.iter().map(|r| r.samples as f64).sum();
    let loss = records.iter().map(|r| r.samples as f64 * r.final_loss).sum::<f64>() / weight;
    if server.schedule.initial_loss.is_none() {
        let start = records.iter().map(|r| r.samples as f64 * r.start_loss).sum::<f64>() / weight;
        server.schedule.initial_loss = Some(start);
    }
    server.prev_loss = Some(loss);

    let eval_loss = if cfg.evaluate {
        Some(evaluate_global_loss(
            model,
            &server.global,
            clients.iter().map(|c| &c.data),
        )?)
    } else {
        None
    };

    let traffic: Vec<_> = records.iter().map(ClientRecord::traffic).collect();
    Ok(RoundReport {
        round,
        loss,
        eval_loss,
        k_a: ks.0,
        k_b: ks.1,
        time: round_time(&traffic, &cfg.scenario),
        clients: records,
        broadcast_bytes: message.len() as u64,
        broadcast_scalars: update.nnz() as u64,
        gini_a: gini(&server.global.gather(MatrixKind::A)),
        gini_b: gini(&server.global.gather(MatrixKind::B)),
    })
}
