use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ecolora::analysis::{convergence_constants, ConvergenceConfig};
use ecolora::codec::{
    dump_annotated, encode_message, golomb_param_for, measure_position_cost, rice_param_for,
    MessageHeader, WireFormat,
};
use ecolora::config::RunConfig;
use ecolora::metrics::{write_ablation, write_metrics};
use ecolora::orchestrator::{ablation_suite, run_experiment, Summary};
use ecolora::sparsifier::{SparseTensor, SparseUpdate};

#[derive(Parser)]
#[command(name = "ecolora", version, about = "Compressed federated LoRA simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write rounds.csv and summary.json.
    Run {
        #[command(flatten)]
        run: RunArgs,
        /// Plain FedAvg: no segments, no sparsification, dense f32 values.
        #[arg(long)]
        baseline: bool,
    },
    /// Run the full protocol and its four single-feature ablations.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Measure Golomb position cost on synthetic geometric gaps.
    CodecBench {
        /// Keep fractions to measure.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.05, 0.1, 0.25, 0.5])]
        k: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the convergence constants for a parameter set.
    Constants(ConstantArgs),
    /// Annotated hex view of an encoded message.
    DumpWire {
        /// Message file; omit with --example.
        file: Option<PathBuf>,
        /// Dump a small built-in message instead of a file.
        #[arg(long, conflicts_with = "file")]
        example: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Network preset: 0.2/1, 1/5, 2/10 or 5/25.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    rounds: Option<u32>,
    /// Upload the whole model instead of one segment.
    #[arg(long)]
    no_segments: bool,
    /// Send dense updates.
    #[arg(long)]
    no_sparsify: bool,
    /// Send absolute 32-bit positions instead of Golomb-coded gaps.
    #[arg(long)]
    no_encode: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(s) = &self.scenario {
            cfg.network.scenario = s.clone();
            cfg.network.custom = None;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if let Some(r) = self.rounds {
            cfg.fl.rounds = r;
        }
        if self.no_segments {
            cfg.ecolora.segment_sharing = false;
        }
        if self.no_sparsify {
            cfg.ecolora.sparsify = false;
        }
        if self.no_encode {
            cfg.ecolora.encode = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ConstantArgs {
    /// TOML file with the fields below; flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    eta: f64,
    #[arg(long, default_value_t = 4.0)]
    smoothness: f64,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 5)]
    segments: u32,
    #[arg(long, default_value_t = 1.0)]
    grad_bound: f64,
    #[arg(long, default_value_t = 100)]
    rounds: u64,
    #[arg(long, default_value_t = 10.0)]
    gap: f64,
}

fn print_summary(s: &Summary) {
    println!("initial loss       {:.6}", s.initial_loss);
    println!("final loss         {:.6}", s.final_loss);
    println!("model params       {}", s.total_params);
    println!("upload params      {} (sent {})", s.upload_params, s.upload_sent);
    println!("download params    {} (sent {})", s.download_params, s.download_sent);
    println!("upload bytes       {}", s.upload_bytes);
    println!("download bytes     {}", s.download_bytes);
    for t in &s.times {
        println!(
            "time {:<8} total {:>10.3} s  upload {:>10.3} s",
            t.scenario, t.total_s, t.upload_s
        );
    }
}

fn run(args: &RunArgs, baseline: bool) -> Result<()> {
    let mut cfg = args.config()?;
    if baseline {
        cfg = cfg.fedavg_baseline();
    }
    let (reports, summary) = run_experiment(&cfg)?;
    for r in &reports {
        println!(
            "round {:>3}  loss {:.5}  eval {}  k_a {:.3}  k_b {:.3}  up {:>8} B  down {:>8} B  time {:.3} s",
            r.round,
            r.loss,
            r.eval_loss.map_or("-".into(), |l| format!("{l:.5}")),
            r.k_a,
            r.k_b,
            r.upload_bytes(),
            r.download_bytes(),
            r.time.round_total_s
        );
    }
    print_summary(&summary);
    let (csv, json) = write_metrics(&cfg.output.dir, &reports, &summary)?;
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn ablate(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let result = ablation_suite(&cfg)?;
    println!(
        "{:<24} {:>10} {:>12} {:>12} {:>12} {:>12}",
        "variant", "loss", "upload B", "total B", "upload s", "total s"
    );
    for r in &result.rows {
        let name = match r.fixed_k {
            Some(k) => format!("{} (k={k:.3})", r.variant),
            None => r.variant.clone(),
        };
        println!(
            "{:<24} {:>10.5} {:>12} {:>12} {:>12.3} {:>12.3}",
            name, r.final_loss, r.upload_bytes, r.total_bytes, r.upload_time_s, r.total_time_s
        );
    }
    let path = write_ablation(&cfg.output.dir, &result.rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn codec_bench(ks: &[f64], samples: usize, seed: u64) -> Result<()> {
    println!("{:>8} {:>6} {:>6} {:>12} {:>10}", "k", "M", "rice", "bits/pos", "vs 16 bit");
    for &k in ks {
        let m = golomb_param_for(k)?;
        let rice = rice_param_for(k)?;
        let bits = measure_position_cost(k, samples, seed)?;
        println!(
            "{k:>8} {:>6} {:>6} {bits:>12.4} {:>9.3}x",
            m.get(),
            rice.get(),
            16.0 / bits
        );
    }
    Ok(())
}

fn constants(a: &ConstantArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<ConvergenceConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ConvergenceConfig {
            eta: a.eta,
            smoothness: a.smoothness,
            delta: a.delta,
            beta: a.beta,
            segments: a.segments,
            grad_bound: a.grad_bound,
            rounds: a.rounds,
            initial_gap: a.gap,
        },
    };
    let c = convergence_constants(&cfg)?;
    println!("mu              {}", c.mu);
    println!("staleness term  {}", c.staleness_term);
    println!("eta interval    ({}, {})", c.eta_lo, c.eta_hi);
    println!("bound           {}", c.bound);
    println!("valid           {}", c.valid);
    Ok(())
}

fn example_message() -> Result<Vec<u8>> {
    let update = SparseUpdate {
        tensors: vec![
            SparseTensor {
                id: 0,
                dense_len: 20,
                positions: vec![1, 4, 5, 13],
                values: vec![0.5, -1.25, 2.0, 0.1],
            },
            SparseTensor {
                id: 1,
                dense_len: 8,
                positions: vec![0, 7],
                values: vec![-0.75, 3.5],
            },
        ],
    };
    let header = MessageHeader {
        round: 3,
        client_id: 42,
        segment_id: 1,
    };
    Ok(encode_message(&update, header, WireFormat::default())?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { run: args, baseline } => run(&args, baseline),
        Command::Ablate { run: args } => ablate(&args),
        Command::CodecBench { k, samples, seed } => codec_bench(&k, samples, seed),
        Command::Constants(a) => constants(&a),
        Command::DumpWire { file, example } => {
            let bytes = match (file, example) {
                (Some(p), _) => std::fs::read(&p).with_context(|| format!("reading {}", p.display()))?,
                (None, true) => example_message()?,
                (None, false) => bail!("give a message file or --example"),
            };
            print!("{}", dump_annotated(&bytes)?);
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ecolora::netsim::NetworkScenario;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn preset_names_parse() {
        for p in NetworkScenario::presets() {
            assert_eq!(p.name.parse::<NetworkScenario>().unwrap(), p);
        }
    }
}
