//! Experiment loop, summaries and the ablation suite.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::{dirichlet_partition, generate, ClientDataset};
use crate::model::{build_toy_model, evaluate_global_loss, FrozenModel, LoraParams, ParamLayout};
use crate::netsim::{round_time, NetworkScenario};
use crate::protocol::{assign_segment, partition, run_round, ClientState, ServerState};
use crate::report::RoundReport;
use crate::sparsifier::kept_count;
use crate::Result;

const PARTITION_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
const SAMPLING_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// `per_round` distinct client ids drawn uniformly without replacement,
/// ascending. Every round has its own stream of the master seed.
pub fn sample_clients(seed: u64, round: u32, num_clients: usize, per_round: usize) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SAMPLING_SALT);
    rng.set_stream(round as u64);
    let mut ids: Vec<u32> = index::sample(&mut rng, num_clients, per_round)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    ids.sort_unstable();
    ids
}

/// Data, partition and initial model for one config; shared by every
/// protocol variant run on top of it.
#[derive(Debug)]
pub struct Experiment {
    pub config: RunConfig,
    pub model: FrozenModel,
    pub init: LoraParams,
    pub clients: Vec<ClientDataset>,
}

impl Experiment {
    pub fn build(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let data = generate(&config.data.synthetic())?;
        let clients = dirichlet_partition(
            &data,
            config.fl.num_clients,
            config.data.dirichlet_alpha,
            config.data.classes,
            config.seed ^ PARTITION_SALT,
        )?;
        let (init, model) = build_toy_model(
            &config.layer_dims(),
            config.model.rank,
            config.model.alpha,
            config.seed,
        )?;
        Ok(Self {
            config: config.clone(),
            model,
            init,
            clients,
        })
    }

    pub fn total_params(&self) -> usize {
        self.init.total_len()
    }

    pub fn initial_loss(&self) -> Result<f64> {
        evaluate_global_loss(&self.model, &self.init, &self.clients)
    }

    /// Runs the protocol described by `variant` (only its `ecolora`,
    /// `fl` training and `network` settings are read) on this experiment's
    /// data and model.
    pub fn run(&self, variant: &RunConfig) -> Result<(Vec<RoundReport>, Summary)> {
        variant.validate()?;
        let protocol = variant.protocol()?;
        let total_len = self.init.total_len();
        let mut server = ServerState::new(self.init.clone(), variant.schedule(), protocol.segments)?;
        let mut clients: Vec<ClientState> = self
            .clients
            .iter()
            .map(|c| ClientState::new(c.clone(), total_len))
            .collect();

        let mut reports = Vec::with_capacity(variant.fl.rounds as usize);
        for t in 0..variant.fl.rounds {
            let sampled = sample_clients(
                self.config.seed,
                t,
                self.clients.len(),
                variant.fl.clients_per_round,
            );
            reports.push(run_round(&self.model, &mut server, &mut clients, &sampled, t, &protocol)?);
        }
        let initial_loss = self.initial_loss()?;
        let final_loss = match reports.last() {
            None => initial_loss,
            Some(r) => match r.eval_loss {
                Some(l) => l,
                None => evaluate_global_loss(&self.model, &server.global, &self.clients)?,
            },
        };
        let summary = Summary::from_reports(
            &reports,
            initial_loss,
            final_loss,
            total_len,
            &protocol.scenario,
        );
        Ok((reports, summary))
    }
}

pub fn run_experiment(config: &RunConfig) -> Result<(Vec<RoundReport>, Summary)> {
    Experiment::build(config)?.run(config)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTime {
    pub scenario: String,
    pub total_s: f64,
    /// Sum over rounds of the slowest client's upload time.
    pub upload_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rounds: u32,
    pub total_params: usize,
    pub initial_loss: f64,
    /// Global loss of the final broadcast model over every client.
    pub final_loss: f64,
    /// Dense-equivalent scalars of the uploaded regions.
    pub upload_params: u64,
    pub download_params: u64,
    /// `upload_params + download_params`.
    pub total_comm_params: u64,
    /// Scalars actually put on the wire after sparsification.
    pub upload_sent: u64,
    pub download_sent: u64,
    pub upload_bytes: u64,
    pub download_bytes: u64,
    pub overhead_ops: u64,
    /// Configured scenario first, then every preset.
    pub times: Vec<ScenarioTime>,
}

impl Summary {
    pub fn from_reports(
        reports: &[RoundReport],
        initial_loss: f64,
        final_loss: f64,
        total_params: usize,
        scenario: &NetworkScenario,
    ) -> Self {
        let sum = |f: fn(&RoundReport) -> u64| reports.iter().map(f).sum::<u64>();
        let upload_params = sum(RoundReport::upload_dense_scalars);
        let download_params = sum(RoundReport::download_dense_scalars);

        let mut scenarios = vec![scenario.clone()];
        scenarios.extend(NetworkScenario::presets().into_iter().filter(|p| p != scenario));
        let times = scenarios
            .iter()
            .map(|s| {
                let (mut total_s, mut upload_s) = (0.0, 0.0);
                for r in reports {
                    let t = round_time(&r.traffic(), s);
                    total_s += t.round_total_s;
                    upload_s += t.clients.iter().map(|c| c.upload_s).fold(0.0, f64::max);
                }
                ScenarioTime {
                    scenario: s.name.clone(),
                    total_s,
                    upload_s,
                }
            })
            .collect();

        Self {
            rounds: reports.len() as u32,
            total_params,
            initial_loss,
            final_loss,
            upload_params,
            download_params,
            total_comm_params: upload_params + download_params,
            upload_sent: sum(RoundReport::upload_scalars),
            download_sent: sum(RoundReport::download_scalars),
            upload_bytes: sum(RoundReport::upload_bytes),
            download_bytes: sum(RoundReport::download_bytes),
            overhead_ops: sum(RoundReport::overhead_ops),
            times,
        }
    }

    /// Time entry for the scenario the run was configured with.
    pub fn configured_time(&self) -> &ScenarioTime {
        &self.times[0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub final_loss: f64,
    pub upload_sent: u64,
    pub upload_params: u64,
    pub upload_bytes: u64,
    pub total_bytes: u64,
    pub upload_time_s: f64,
    pub total_time_s: f64,
    /// Keep fraction of the fixed-k variant.
    pub fixed_k: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct AblationResult {
    pub rows: Vec<AblationRow>,
    pub reports: Vec<Vec<RoundReport>>,
    pub summaries: Vec<Summary>,
}

pub const ABLATION_VARIANTS: [&str; 5] = [
    "Full",
    "w/o R.R. Segment",
    "w/o Sparsification",
    "w/ Fixed Sparsification",
    "w/o Encoding",
];

/// Scalars a fixed-`k` run would send up and down, counted without training.
pub fn fixed_k_budget(config: &RunConfig, layout: &ParamLayout, k: f64) -> Result<u64> {
    let segments = config.effective_segments();
    let part = partition(layout.total_len(), segments)?;
    let per_segment: Vec<u64> = (0..segments)
        .map(|s| {
            part.pieces(s, layout)
                .iter()
                .map(|p| kept_count(p.len, k) as u64)
                .sum()
        })
        .collect();
    let broadcast: u64 = layout.spans().iter().map(|s| kept_count(s.len, k) as u64).sum();
    let per_round = config.fl.clients_per_round;
    let mut total = 0u64;
    for t in 0..config.fl.rounds {
        for slot in 0..per_round {
            total += per_segment[assign_segment(slot, t, segments)];
        }
        // participants of every round after the first download the previous broadcast
        if t > 0 {
            total += broadcast * per_round as u64;
        }
    }
    Ok(total)
}

/// Fixed keep fraction whose dry-run budget is closest to `target`.
pub fn match_fixed_k(config: &RunConfig, layout: &ParamLayout, target: u64) -> Result<f64> {
    let (mut lo, mut hi) = (1e-6f64, 1.0f64);
    let budget = |k| fixed_k_budget(config, layout, k);
    if budget(hi)? <= target {
        return Ok(hi);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if budget(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (blo, bhi) = (budget(lo)?, budget(hi)?);
    Ok(if target.abs_diff(blo) <= bhi.abs_diff(target) { lo } else { hi })
}

/// Full protocol plus the four single-feature ablations on shared data.
/// The fixed-k variant is matched to the full run's total sent scalars.
pub fn ablation_suite(config: &RunConfig) -> Result<AblationResult> {
    let exp = Experiment::build(config)?;
    let mut full = config.clone();
    full.ecolora.segment_sharing = true;
    full.ecolora.sparsify = true;
    full.ecolora.fixed_k = None;
    full.ecolora.encode = true;

    let (full_reports, full_summary) = exp.run(&full)?;
    let target = full_summary.upload_sent + full_summary.download_sent;
    let k = match_fixed_k(&full, exp.init.layout(), target)?;

    let mut variants = Vec::with_capacity(ABLATION_VARIANTS.len());
    let mut v = full.clone();
    v.ecolora.segment_sharing = false;
    variants.push(v);
    let mut v = full.clone();
    v.ecolora.sparsify = false;
    variants.push(v);
    let mut v = full.clone();
    v.ecolora.fixed_k = Some(k);
    variants.push(v);
    let mut v = full.clone();
    v.ecolora.encode = false;
    variants.push(v);

    let mut reports = vec![full_reports];
    let mut summaries = vec![full_summary];
    for v in &variants {
        let (r, s) = exp.run(v)?;
        reports.push(r);
        summaries.push(s);
    }
    let rows = ABLATION_VARIANTS
        .iter()
        .zip(&summaries)
        .enumerate()
        .map(|(i, (name, s))| AblationRow {
            variant: name.to_string(),
            final_loss: s.final_loss,
            upload_sent: s.upload_sent,
            upload_params: s.upload_params,
            upload_bytes: s.upload_bytes,
            total_bytes: s.upload_bytes + s.download_bytes,
            upload_time_s: s.configured_time().upload_s,
            total_time_s: s.configured_time().total_s,
            fixed_k: (i == 3).then_some(k),
        })
        .collect();
    Ok(AblationResult {
        rows,
        reports,
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.data.samples = 600;
        cfg.fl.num_clients = 20;
        cfg.fl.clients_per_round = 5;
        cfg.fl.rounds = 4;
        cfg.network.compute_seconds = Some(1.0);
        cfg
    }

    #[test]
    fn sampling_is_distinct_sorted_and_seeded() {
        let a = sample_clients(1, 3, 100, 10);
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a, sample_clients(1, 3, 100, 10));
        assert_ne!(a, sample_clients(1, 4, 100, 10));
        assert_ne!(a, sample_clients(2, 3, 100, 10));
        assert_eq!(sample_clients(0, 0, 5, 5), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn zero_rounds_echo_initial_loss() {
        let mut cfg = small();
        cfg.fl.rounds = 0;
        let (reports, s) = run_experiment(&cfg).unwrap();
        assert!(reports.is_empty());
        assert_eq!(s.final_loss, s.initial_loss);
        assert_eq!(s.upload_params, 0);
        assert!(s.times.iter().all(|t| t.total_s == 0.0));
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = small();
        let (a, sa) = run_experiment(&cfg).unwrap();
        let (b, sb) = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }

    #[test]
    fn summary_totals_match_reports() {
        let (reports, s) = run_experiment(&small()).unwrap();
        let up: u64 = reports
            .iter()
            .flat_map(|r| &r.clients)
            .map(|c| c.upload_dense_scalars)
            .sum();
        assert_eq!(s.upload_params, up);
        assert_eq!(s.total_comm_params, s.upload_params + s.download_params);
        assert_eq!(s.times[0].scenario, "1/5");
        assert_eq!(s.times.len(), 4);
    }

    #[test]
    fn first_round_downloads_nothing() {
        let (reports, _) = run_experiment(&small()).unwrap();
        assert_eq!(reports[0].download_bytes(), 0);
        let prev = reports[0].broadcast_bytes;
        assert!(reports[1].clients.iter().all(|c| c.download_bytes == prev));
    }

    #[test]
    fn dry_budget_matches_a_real_fixed_run() {
        let mut cfg = small();
        cfg.ecolora.fixed_k = Some(0.3);
        let exp = Experiment::build(&cfg).unwrap();
        let (_, s) = exp.run(&cfg).unwrap();
        let dry = fixed_k_budget(&cfg, exp.init.layout(), 0.3).unwrap();
        assert_eq!(dry, s.upload_sent + s.download_sent);
    }
}
