//! Per-round metrics.

use serde::{Deserialize, Serialize};

use crate::netsim::{ClientTraffic, TimeBreakdown};

/// What one participant did in one round. Scalar counts follow the
/// parameter-count convention: `*_scalars` is the number of values actually
/// sent, `*_dense_scalars` the length of the region they describe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientRecord {
    pub client_id: u32,
    pub slot: usize,
    pub segment: usize,
    pub samples: usize,
    pub upload_bytes: u64,
    pub upload_scalars: u64,
    pub upload_dense_scalars: u64,
    pub download_bytes: u64,
    pub download_scalars: u64,
    pub download_dense_scalars: u64,
    pub start_loss: f64,
    pub final_loss: f64,
    pub compute_s: f64,
    /// Element operations spent on mixing, selection, residual update and
    /// gap coding.
    pub overhead_ops: u64,
}

impl ClientRecord {
    pub fn traffic(&self) -> ClientTraffic {
        ClientTraffic {
            upload_bytes: self.upload_bytes,
            download_bytes: self.download_bytes,
            compute_s: self.compute_s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u32,
    /// Sample-weighted mean of the participants' final local losses; drives
    /// the sparsity schedule of the next round.
    pub loss: f64,
    /// Sample-weighted loss of the broadcast global model over every client.
    pub eval_loss: Option<f64>,
    pub k_a: f64,
    pub k_b: f64,
    pub clients: Vec<ClientRecord>,
    /// Encoded size of the global update produced at the end of this round.
    pub broadcast_bytes: u64,
    pub broadcast_scalars: u64,
    pub time: TimeBreakdown,
    pub gini_a: f64,
    pub gini_b: f64,
}

impl RoundReport {
    pub fn upload_bytes(&self) -> u64 {
        self.clients.iter().map(|c| c.upload_bytes).sum()
    }

    pub fn upload_scalars(&self) -> u64 {
        self.clients.iter().map(|c| c.upload_scalars).sum()
    }

    pub fn upload_dense_scalars(&self) -> u64 {
        self.clients.iter().map(|c| c.upload_dense_scalars).sum()
    }

    pub fn download_bytes(&self) -> u64 {
        self.clients.iter().map(|c| c.download_bytes).sum()
    }

    pub fn download_scalars(&self) -> u64 {
        self.clients.iter().map(|c| c.download_scalars).sum()
    }

    pub fn download_dense_scalars(&self) -> u64 {
        self.clients.iter().map(|c| c.download_dense_scalars).sum()
    }

    pub fn overhead_ops(&self) -> u64 {
        self.clients.iter().map(|c| c.overhead_ops).sum()
    }

    pub fn traffic(&self) -> Vec<ClientTraffic> {
        self.clients.iter().map(ClientRecord::traffic).collect()
    }

    /// `client:segment` pairs in slot order.
    pub fn assignment(&self) -> Vec<(u32, usize)> {
        self.clients.iter().map(|c| (c.client_id, c.segment)).collect()
    }
}
