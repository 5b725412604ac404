//! Run configuration, loaded from a TOML file.
//!
//! Every section and field is optional; omitted values take the defaults
//! below. Unknown keys are rejected.
//!
//! ```toml
//! seed = 1
//!
//! [model]
//! hidden = [32]        # hidden widths; input and output follow the data
//! rank = 4
//! alpha = 8.0          # LoRA scaling numerator (scale = alpha / rank)
//!
//! [data]
//! task = "classification"   # or "regression"
//! classes = 10
//! dim = 32
//! samples = 5000
//! noise = 2.0
//! seed = 7
//! dirichlet_alpha = 0.5
//!
//! [fl]
//! num_clients = 100
//! clients_per_round = 10
//! rounds = 40
//! local_epochs = 2
//! lr = 0.05
//! batch_size = 10
//! evaluate = true      # global loss over all clients after every round
//!
//! [ecolora]
//! segments = 5
//! k_max = 0.95
//! k_min_a = 0.6
//! k_min_b = 0.5
//! gamma_a = 1.0
//! gamma_b = 2.0
//! beta = 1.0           # `inf` always adopts the global model
//! segment_sharing = true
//! sparsify = true
//! fixed_k = 0.3        # optional: replaces the adaptive schedule
//! encode = true        # false sends absolute 32-bit positions
//! rice = false         # power-of-two divisors only
//! values = "f16"       # or "f32"
//!
//! [network]
//! scenario = "1/5"     # "0.2/1", "1/5", "2/10", "5/25"
//! compute_seconds = 2.0    # optional: fixed per-client compute time
//! # custom = { name = "lab", uplink_bps = 3e6, downlink_bps = 2e7, latency_s = 0.02 }
//!
//! [output]
//! dir = "results"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::{PositionCoding, ValueFormat, WireFormat};
use crate::data::{SyntheticSpec, Task};
use crate::model::TrainOptions;
use crate::netsim::NetworkScenario;
use crate::protocol::{ProtocolConfig, SparsifyMode};
use crate::sparsifier::SparsitySchedule;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub rank: usize,
    pub alpha: f32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            rank: 4,
            alpha: 8.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub task: Task,
    pub classes: usize,
    pub dim: usize,
    pub samples: usize,
    pub noise: f32,
    pub seed: u64,
    pub dirichlet_alpha: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        Self {
            task: s.task,
            classes: s.classes,
            dim: s.dim,
            samples: s.samples,
            noise: s.noise,
            seed: s.seed,
            dirichlet_alpha: 0.5,
        }
    }
}

impl DataConfig {
    pub fn output_dim(&self) -> usize {
        self.classes
    }

    pub fn synthetic(&self) -> SyntheticSpec {
        SyntheticSpec {
            task: self.task,
            classes: self.classes,
            dim: self.dim,
            samples: self.samples,
            noise: self.noise,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlConfig {
    pub num_clients: usize,
    pub clients_per_round: usize,
    pub rounds: u32,
    pub local_epochs: usize,
    pub lr: f32,
    pub batch_size: usize,
    pub evaluate: bool,
}

impl Default for FlConfig {
    fn default() -> Self {
        Self {
            num_clients: 100,
            clients_per_round: 10,
            rounds: 40,
            local_epochs: 2,
            lr: 0.05,
            batch_size: 10,
            evaluate: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EcoConfig {
    pub segments: usize,
    pub k_max: f64,
    pub k_min_a: f64,
    pub k_min_b: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub beta: f64,
    pub segment_sharing: bool,
    pub sparsify: bool,
    pub fixed_k: Option<f64>,
    pub encode: bool,
    pub rice: bool,
    pub values: ValueFormat,
}

impl Default for EcoConfig {
    fn default() -> Self {
        let s = SparsitySchedule::default();
        Self {
            segments: 5,
            k_max: s.k_max,
            k_min_a: s.k_min_a,
            k_min_b: s.k_min_b,
            gamma_a: s.gamma_a,
            gamma_b: s.gamma_b,
            beta: 1.0,
            segment_sharing: true,
            sparsify: true,
            fixed_k: None,
            encode: true,
            rice: false,
            values: ValueFormat::F16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub scenario: String,
    pub custom: Option<NetworkScenario>,
    pub compute_seconds: Option<f64>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            scenario: "1/5".into(),
            custom: None,
            compute_seconds: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed for model init, partitioning and client sampling.
    pub seed: u64,
    pub model: ModelConfig,
    pub data: DataConfig,
    pub fl: FlConfig,
    pub ecolora: EcoConfig,
    pub network: NetworkConfig,
    pub output: OutputConfig,
}

fn invalid(field: &str, why: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("{field}: {why}"))
}

fn fraction(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(invalid(field, format_args!("must be in (0, 1], got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format {
            path: PathBuf::from("<string>"),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.rank == 0 {
            return Err(invalid("model.rank", "must be >= 1"));
        }
        if m.hidden.contains(&0) {
            return Err(invalid("model.hidden", "widths must be >= 1"));
        }
        let min_width = m
            .hidden
            .iter()
            .copied()
            .chain([self.data.dim, self.data.output_dim()])
            .min()
            .unwrap_or(0);
        if m.rank > min_width {
            return Err(invalid(
                "model.rank",
                format_args!("{} exceeds the narrowest layer width {min_width}", m.rank),
            ));
        }
        if !(m.alpha.is_finite() && m.alpha > 0.0) {
            return Err(invalid("model.alpha", "must be positive and finite"));
        }

        let d = &self.data;
        if d.classes == 0 {
            return Err(invalid("data.classes", "must be >= 1"));
        }
        if d.task == Task::Classification && d.classes < 2 {
            return Err(invalid("data.classes", "classification needs at least 2 classes"));
        }
        if d.dim == 0 {
            return Err(invalid("data.dim", "must be >= 1"));
        }
        if d.samples == 0 {
            return Err(invalid("data.samples", "must be >= 1"));
        }
        if !(d.noise.is_finite() && d.noise >= 0.0) {
            return Err(invalid("data.noise", "must be finite and >= 0"));
        }
        if !(d.dirichlet_alpha.is_finite() && d.dirichlet_alpha > 0.0) {
            return Err(invalid("data.dirichlet_alpha", "must be positive and finite"));
        }

        let f = &self.fl;
        if f.num_clients == 0 {
            return Err(invalid("fl.num_clients", "must be >= 1"));
        }
        if f.num_clients > d.samples {
            return Err(invalid(
                "fl.num_clients",
                format_args!("{} exceeds data.samples {}", f.num_clients, d.samples),
            ));
        }
        if f.num_clients > u32::MAX as usize - 1 {
            return Err(invalid("fl.num_clients", "does not fit a u32 client id"));
        }
        if f.clients_per_round == 0 || f.clients_per_round > f.num_clients {
            return Err(invalid(
                "fl.clients_per_round",
                format_args!("must be in [1, num_clients = {}], got {}", f.num_clients, f.clients_per_round),
            ));
        }
        if !(f.lr.is_finite() && f.lr > 0.0) {
            return Err(invalid("fl.lr", "must be positive and finite"));
        }
        if f.batch_size == 0 {
            return Err(invalid("fl.batch_size", "must be >= 1"));
        }

        let e = &self.ecolora;
        if e.segments == 0 {
            return Err(invalid("ecolora.segments", "must be >= 1"));
        }
        if e.segment_sharing && e.segments > f.clients_per_round {
            return Err(invalid(
                "ecolora.segments",
                format_args!(
                    "{} exceeds fl.clients_per_round {}; some segment would go missing",
                    e.segments, f.clients_per_round
                ),
            ));
        }
        fraction("ecolora.k_max", e.k_max)?;
        fraction("ecolora.k_min_a", e.k_min_a)?;
        fraction("ecolora.k_min_b", e.k_min_b)?;
        if e.k_min_a > e.k_max {
            return Err(invalid("ecolora.k_min_a", "must not exceed k_max"));
        }
        if e.k_min_b > e.k_max {
            return Err(invalid("ecolora.k_min_b", "must not exceed k_max"));
        }
        for (field, g) in [("ecolora.gamma_a", e.gamma_a), ("ecolora.gamma_b", e.gamma_b)] {
            if !(g.is_finite() && g >= 0.0) {
                return Err(invalid(field, "must be finite and >= 0"));
            }
        }
        if !(e.beta > 0.0) {
            return Err(invalid("ecolora.beta", format_args!("must be > 0 (inf allowed), got {}", e.beta)));
        }
        if let Some(k) = e.fixed_k {
            fraction("ecolora.fixed_k", k)?;
        }

        let n = &self.network;
        if let Some(c) = &n.custom {
            c.validate().map_err(|err| invalid("network.custom", err))?;
        } else {
            NetworkScenario::preset(&n.scenario).map_err(|err| invalid("network.scenario", err))?;
        }
        if let Some(s) = n.compute_seconds {
            if !(s.is_finite() && s >= 0.0) {
                return Err(invalid("network.compute_seconds", "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Layer shapes `(out, in)` from input through the hidden widths to the
    /// output head.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let widths: Vec<usize> = std::iter::once(self.data.dim)
            .chain(self.model.hidden.iter().copied())
            .chain(std::iter::once(self.data.output_dim()))
            .collect();
        widths.windows(2).map(|w| (w[1], w[0])).collect()
    }

    pub fn scenario(&self) -> Result<NetworkScenario> {
        match &self.network.custom {
            Some(c) => Ok(c.clone()),
            None => NetworkScenario::preset(&self.network.scenario),
        }
    }

    pub fn schedule(&self) -> SparsitySchedule {
        let e = &self.ecolora;
        SparsitySchedule {
            k_max: e.k_max,
            k_min_a: e.k_min_a,
            k_min_b: e.k_min_b,
            gamma_a: e.gamma_a,
            gamma_b: e.gamma_b,
            initial_loss: None,
        }
    }

    pub fn effective_segments(&self) -> usize {
        if self.ecolora.segment_sharing {
            self.ecolora.segments
        } else {
            1
        }
    }

    pub fn protocol(&self) -> Result<ProtocolConfig> {
        let e = &self.ecolora;
        let sparsify = match (e.sparsify, e.fixed_k) {
            (false, _) => SparsifyMode::Off,
            (true, Some(k)) => SparsifyMode::Fixed(k),
            (true, None) => SparsifyMode::Adaptive,
        };
        let positions = match (e.encode, e.rice) {
            (false, _) => PositionCoding::Fixed,
            (true, true) => PositionCoding::Rice,
            (true, false) => PositionCoding::Golomb,
        };
        Ok(ProtocolConfig {
            segments: self.effective_segments(),
            sparsify,
            wire: WireFormat {
                positions,
                values: e.values,
            },
            beta: e.beta,
            train: TrainOptions {
                epochs: self.fl.local_epochs,
                lr: self.fl.lr,
                batch_size: self.fl.batch_size,
            },
            scenario: self.scenario()?,
            compute_s: self.network.compute_seconds,
            evaluate: self.fl.evaluate,
        })
    }

    /// Plain federated averaging: whole model every round, dense 32-bit
    /// values, no staleness memory.
    pub fn fedavg_baseline(&self) -> Self {
        let mut cfg = self.clone();
        let e = &mut cfg.ecolora;
        e.segment_sharing = false;
        e.sparsify = false;
        e.fixed_k = None;
        e.encode = false;
        e.values = ValueFormat::F32;
        e.beta = f64::INFINITY;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.layer_dims(), vec![(32, 32), (10, 32)]);
        assert_eq!(cfg.ecolora.segments, 5);
        assert_eq!(cfg.fl.num_clients, 100);
        assert_eq!(cfg.fl.clients_per_round, 10);
        assert_eq!(cfg.fl.rounds, 40);
        assert_eq!(cfg.data.dirichlet_alpha, 0.5);
    }

    #[test]
    fn empty_file_means_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let cfg = RunConfig::from_toml_str(
            "seed = 3\n[fl]\nrounds = 7\n[ecolora]\nbeta = inf\nfixed_k = 0.25\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.fl.rounds, 7);
        assert_eq!(cfg.fl.num_clients, 100);
        assert!(cfg.ecolora.beta.is_infinite());
        assert_eq!(cfg.protocol().unwrap().sparsify, SparsifyMode::Fixed(0.25));
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.network.compute_seconds = Some(1.5);
        cfg.ecolora.values = ValueFormat::F32;
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    fn field_of(text: &str) -> String {
        match RunConfig::from_toml_str(text) {
            Err(Error::InvalidConfig(msg)) => msg,
            other => panic!("expected invalid config, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        assert!(field_of("[fl]\nclients_per_round = 101").starts_with("fl.clients_per_round"));
        assert!(field_of("[ecolora]\nsegments = 11").starts_with("ecolora.segments"));
        assert!(field_of("[ecolora]\nk_min_b = 1.5").starts_with("ecolora.k_min_b"));
        assert!(field_of("[ecolora]\nk_max = 0.5").starts_with("ecolora.k_min_a"));
        assert!(field_of("[ecolora]\nbeta = 0.0").starts_with("ecolora.beta"));
        assert!(field_of("[model]\nrank = 40").starts_with("model.rank"));
        assert!(field_of("[network]\nscenario = \"3/3\"").starts_with("network.scenario"));
        assert!(field_of("[fl]\nnum_clients = 6000").starts_with("fl.num_clients"));
    }

    #[test]
    fn segments_may_exceed_participants_when_sharing_is_off() {
        let cfg = RunConfig::from_toml_str("[ecolora]\nsegments = 50\nsegment_sharing = false").unwrap();
        assert_eq!(cfg.effective_segments(), 1);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            RunConfig::from_toml_str("[fl]\nroundz = 3"),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn baseline_switches_everything_off() {
        let p = RunConfig::default().fedavg_baseline().protocol().unwrap();
        assert_eq!(p.segments, 1);
        assert_eq!(p.sparsify, SparsifyMode::Off);
        assert_eq!(p.wire.positions, PositionCoding::Fixed);
        assert_eq!(p.wire.values, ValueFormat::F32);
        assert!(p.beta.is_infinite());
    }
}
