//! Command-line front end for the dynamic-network embedding toolkit.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime failure,
//! 3 infeasible protocol.

use clap::{Parser, Subcommand};
use dynembed::connectome::{build_dynamic_graph, generate_synthetic_corpus, io as cio,
    ClassRegime, RegimeDescriptor, WindowSpec};
use dynembed::encoder::EncoderConfig;
use dynembed::evalkit::{join_with_phenotype, run_cv, EvalConfig, Protocol};
use dynembed::pipeline::{
    connectome_code, emit_report, eval_code, run_pipeline, train_code, walk_code, ErrorCode,
    PipelineConfig, PipelineError, StageContext,
};
use dynembed::tempwalk::{io as wio, sample_corpus, StartTimePolicy, WalkConfig};
use dynembed::trainer::{self, extract_embeddings, train, TrainConfig, WalkCorpus};
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "dynembed",
    about = "Dynamic-network embeddings from time-series: connectomes, temporal walks, \
             Transformer training, and classification evaluation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-class time-series corpus plus phenotype.csv.
    Synth {
        #[arg(long, default_value = "synth-data")]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        subjects: usize,
        #[arg(long, default_value_t = 20)]
        regions: usize,
        #[arg(long, default_value_t = 200)]
        timepoints: usize,
        #[arg(long, default_value_t = 4)]
        sites: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Time points between block-partition shifts for class 1 (0 = static).
        #[arg(long, default_value_t = 25)]
        rotation_period: usize,
        /// Ring positions the class-1 partition advances per period.
        #[arg(long, default_value_t = 3)]
        rotation_step: usize,
        /// Per-region noise level on top of the unit-variance block factor.
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
        /// Number of ring blocks (latent factors) per subject.
        #[arg(long, default_value_t = 2)]
        blocks: usize,
        /// Give every subject a random initial block-partition offset.
        #[arg(long, default_value_t = false)]
        random_phase: bool,
        /// Make both classes identical (degenerate corpus for null tests).
        #[arg(long, default_value_t = false)]
        degenerate: bool,
    },
    /// Convert per-subject time-series CSVs into dynamic-graph files.
    BuildConnectome {
        #[arg(long)]
        input_dir: PathBuf,
        #[arg(long, default_value_t = 50)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        stride: usize,
        #[arg(long, default_value_t = 80.0)]
        percentile: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample temporal random walks from a directory of graph files.
    SampleWalks {
        #[arg(long)]
        graphs: PathBuf,
        #[arg(long, default_value_t = 20)]
        walk_length: usize,
        #[arg(long, default_value_t = 30)]
        walks_per_node: usize,
        #[arg(long, default_value_t = 2)]
        min_length: usize,
        #[arg(long, value_enum, default_value_t = StartPolicyArg::Earliest)]
        start_policy: StartPolicyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the encoder and heads on a walks file; writes a checkpoint and
    /// a loss trace.
    Train {
        #[arg(long)]
        walks: PathBuf,
        #[arg(long, default_value_t = 252)]
        dim: usize,
        #[arg(long, default_value_t = 4)]
        heads: usize,
        #[arg(long, default_value_t = 6)]
        layers: usize,
        /// Feed-forward width; defaults to 4*dim.
        #[arg(long)]
        d_ff: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        lambda1: f64,
        #[arg(long, default_value_t = 5.0)]
        lambda2: f64,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-4)]
        learning_rate: f64,
        #[arg(long, default_value_t = 0.15)]
        mask_fraction: f64,
        #[arg(long, default_value_t = 0.0)]
        dropout: f64,
        /// Node vocabulary size R; inferred from the walks file when omitted.
        #[arg(long)]
        regions: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for model.ckpt and loss_trace.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract per-graph embeddings from a checkpoint into a CSV.
    Embed {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate embeddings with a logistic classifier under a CV protocol.
    Evaluate {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        phenotype: PathBuf,
        /// stratified<k> or leave-one-site-out (loso).
        #[arg(long, default_value = "stratified10")]
        protocol: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        regularization: f64,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Disable per-dimension z-scoring from training-fold statistics.
        #[arg(long, default_value_t = false)]
        no_normalize: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render report.json into a text table and plaintext charts.
    Report {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        loss_trace: Option<PathBuf>,
        /// Output directory; prints the summary to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage from a TOML config; stages are skipped when their
    /// recorded inputs and outputs are unchanged.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's input_dir.
        #[arg(long)]
        input_dir: Option<PathBuf>,
        /// Override the config's out_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's global seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StartPolicyArg {
    Earliest,
    UniformIncident,
}

impl From<StartPolicyArg> for StartTimePolicy {
    fn from(value: StartPolicyArg) -> Self {
        match value {
            StartPolicyArg::Earliest => StartTimePolicy::Earliest,
            StartPolicyArg::UniformIncident => StartTimePolicy::UniformIncident,
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn io_err(stage: &str, e: std::io::Error) -> PipelineError {
    PipelineError::new(stage, ErrorCode::Runtime, e.to_string())
}

fn dispatch(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Synth {
            out,
            subjects,
            regions,
            timepoints,
            sites,
            seed,
            rotation_period,
            rotation_step,
            noise,
            blocks,
            random_phase,
            degenerate,
        } => {
            let stage = "synth";
            let class0 = ClassRegime {
                noise_level: noise,
                block_count: blocks,
                random_phase,
                ..ClassRegime::static_blocks()
            };
            let class1 = if degenerate {
                class0
            } else {
                ClassRegime {
                    rotation_period,
                    rotation_step,
                    noise_level: noise,
                    block_count: blocks,
                    random_phase,
                    ..ClassRegime::rotating_blocks()
                }
            };
            let regimes = RegimeDescriptor {
                class0,
                class1,
                site_count: sites,
            };
            let corpus = generate_synthetic_corpus(subjects, regions, timepoints, &regimes, seed)
                .in_stage(stage, connectome_code)?;
            fs::create_dir_all(&out).map_err(|e| io_err(stage, e))?;
            let mut phenotype = cio::Phenotype::new();
            for subject in &corpus.subjects {
                let path = out.join(format!("{}.csv", subject.ts.subject_id()));
                cio::write_timeseries_csv(&path, &subject.ts).in_stage(stage, connectome_code)?;
                phenotype.insert(
                    subject.ts.subject_id().to_string(),
                    cio::PhenotypeRecord {
                        label: subject.label,
                        site: subject.site.clone(),
                    },
                );
            }
            cio::write_phenotype_csv(&out.join("phenotype.csv"), &phenotype)
                .in_stage(stage, connectome_code)?;
            if corpus.degenerate_regimes {
                eprintln!("[{stage}] warning: both classes share one regime; labels carry no signal");
            }
            eprintln!(
                "[{stage}] wrote {} subjects ({}x{}) to {}",
                subjects,
                timepoints,
                regions,
                out.display()
            );
            Ok(())
        }
        Command::BuildConnectome {
            input_dir,
            window,
            stride,
            percentile,
            out,
        } => {
            let stage = "build-connectome";
            let spec = WindowSpec {
                window_length: window,
                stride,
                threshold_percentile: percentile,
            };
            spec.validate().in_stage(stage, connectome_code)?;
            let subjects = cio::read_timeseries_dir(&input_dir).in_stage(stage, connectome_code)?;
            if subjects.is_empty() {
                return Err(PipelineError::new(
                    stage,
                    ErrorCode::Validation,
                    format!("no time-series CSVs in {}", input_dir.display()),
                ));
            }
            fs::create_dir_all(&out).map_err(|e| io_err(stage, e))?;
            let mut degenerate = 0;
            for ts in &subjects {
                let (graph, stats) = build_dynamic_graph(ts, &spec).in_stage(stage, connectome_code)?;
                degenerate += stats.degenerate_pairs;
                let path = out.join(format!("{}.graph", ts.subject_id()));
                cio::write_graph(&path, &graph).in_stage(stage, connectome_code)?;
            }
            if degenerate > 0 {
                eprintln!("[{stage}] warning: {degenerate} zero-variance pairs set to correlation 0");
            }
            eprintln!("[{stage}] wrote {} graphs to {}", subjects.len(), out.display());
            Ok(())
        }
        Command::SampleWalks {
            graphs,
            walk_length,
            walks_per_node,
            min_length,
            start_policy,
            seed,
            out,
        } => {
            let stage = "sample-walks";
            let cfg = WalkConfig {
                l_max: walk_length,
                walks_per_node,
                min_length,
                start_time_policy: start_policy.into(),
                seed,
            };
            let graph_list = cio::read_graph_dir(&graphs).in_stage(stage, connectome_code)?;
            if graph_list.is_empty() {
                return Err(PipelineError::new(
                    stage,
                    ErrorCode::Validation,
                    format!("no .graph files in {}", graphs.display()),
                ));
            }
            let (walks, stats) = sample_corpus(&graph_list, &cfg).in_stage(stage, walk_code)?;
            wio::write_walks(&out, &walks).in_stage(stage, walk_code)?;
            for id in &stats.empty_graphs {
                eprintln!("[{stage}] warning: graph {id} has no edges; zero walks emitted");
            }
            eprintln!(
                "[{stage}] {} walks from {} graphs ({} attempts, {} rejected) -> {}",
                stats.emitted,
                graph_list.len(),
                stats.attempts,
                stats.rejected_no_edges + stats.rejected_too_short,
                out.display()
            );
            Ok(())
        }
        Command::Train {
            walks,
            dim,
            heads,
            layers,
            d_ff,
            lambda1,
            lambda2,
            epochs,
            batch_size,
            learning_rate,
            mask_fraction,
            dropout,
            regions,
            seed,
            out,
        } => {
            let stage = "train";
            let walk_list = wio::read_walks(&walks).in_stage(stage, walk_code)?;
            let corpus = WalkCorpus::from_walks(walk_list);
            if corpus.walks.is_empty() {
                return Err(PipelineError::new(
                    stage,
                    ErrorCode::Validation,
                    format!("no walks in {}", walks.display()),
                ));
            }
            let regions = match regions {
                Some(r) => r,
                None => {
                    let inferred = corpus.min_regions();
                    eprintln!(
                        "[{stage}] note: --regions omitted; inferring R = {inferred} from the walks"
                    );
                    inferred
                }
            };
            let enc_cfg = EncoderConfig {
                dim,
                heads,
                layers,
                d_ff: d_ff.unwrap_or(4 * dim),
                max_seq: corpus.max_walk_len() + 1,
            };
            let train_cfg = TrainConfig {
                lambda1,
                lambda2,
                batch_size,
                epochs,
                learning_rate,
                seed,
                mask_fraction,
                dropout,
                ..TrainConfig::default()
            };
            let output = train(&corpus, regions, &enc_cfg, &train_cfg).in_stage(stage, train_code)?;
            fs::create_dir_all(&out).map_err(|e| io_err(stage, e))?;
            trainer::save_checkpoint(
                &out.join("model.ckpt"),
                &trainer::Checkpoint {
                    state: output.state,
                    heads: output.heads,
                    graph_ids: output.graph_ids,
                },
            )
            .in_stage(stage, train_code)?;
            trainer::write_loss_trace(&out.join("loss_trace.csv"), &output.trace)
                .in_stage(stage, train_code)?;
            let first = output.trace.first().expect("trace has epoch 0");
            let last = output.trace.last().expect("trace has final epoch");
            eprintln!(
                "[{stage}] L_total {:.4} -> {:.4} over {} epochs; checkpoint in {}",
                first.l_total,
                last.l_total,
                epochs,
                out.display()
            );
            Ok(())
        }
        Command::Embed { ckpt, out } => {
            let stage = "embed";
            let checkpoint = trainer::load_checkpoint(&ckpt).in_stage(stage, train_code)?;
            let emb = extract_embeddings(&checkpoint.heads, &checkpoint.graph_ids)
                .in_stage(stage, train_code)?;
            trainer::embeddings::write_embeddings(&out, &checkpoint.graph_ids, &emb)
                .in_stage(stage, train_code)?;
            eprintln!(
                "[{stage}] {} embeddings of dimension {} -> {}",
                emb.rows(),
                emb.cols(),
                out.display()
            );
            Ok(())
        }
        Command::Evaluate {
            embeddings,
            phenotype,
            protocol,
            seed,
            regularization,
            threshold,
            no_normalize,
            out,
        } => {
            let stage = "evaluate";
            let cfg = EvalConfig {
                protocol: Protocol::parse(&protocol).in_stage(stage, eval_code)?,
                seed,
                regularization,
                threshold,
                normalize: !no_normalize,
            };
            let (ids, emb) =
                trainer::embeddings::read_embeddings(&embeddings).in_stage(stage, train_code)?;
            let table = cio::read_phenotype_csv(&phenotype).in_stage(stage, connectome_code)?;
            let items = join_with_phenotype(&ids, &emb, &table).in_stage(stage, eval_code)?;
            let report = run_cv(&items, &cfg).in_stage(stage, eval_code)?;
            fs::write(
                &out,
                serde_json::to_string_pretty(&report).expect("report serializes"),
            )
            .map_err(|e| io_err(stage, e))?;
            if let Some(acc) = &report.aggregate.accuracy {
                eprintln!(
                    "[{stage}] accuracy {:.4} ± {:.4}, AUC {} over {} folds -> {}",
                    acc.mean,
                    acc.std,
                    report
                        .aggregate
                        .auc
                        .map(|a| format!("{:.4} ± {:.4}", a.mean, a.std))
                        .unwrap_or_else(|| "n/a".into()),
                    report.folds.len(),
                    out.display()
                );
            }
            Ok(())
        }
        Command::Report {
            report,
            loss_trace,
            out,
        } => match out {
            Some(dir) => {
                let written = emit_report(&report, loss_trace.as_deref(), &dir)?;
                eprintln!(
                    "[report] wrote {}",
                    written
                        .iter()
                        .map(|p| p.display().to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                );
                Ok(())
            }
            None => {
                let text = fs::read_to_string(&report)
                    .map_err(|e| PipelineError::new("report", ErrorCode::Validation, e.to_string()))?;
                let parsed: dynembed::evalkit::EvalReport = serde_json::from_str(&text)
                    .map_err(|e| PipelineError::new("report", ErrorCode::Validation, e.to_string()))?;
                print!("{}", dynembed::pipeline::render_report_text(&parsed));
                Ok(())
            }
        },
        Command::Pipeline {
            config,
            input_dir,
            out,
            seed,
        } => {
            let mut cfg = PipelineConfig::from_toml_file(&config)?;
            if let Some(dir) = input_dir {
                cfg.input_dir = dir;
            }
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let artifacts = run_pipeline(&cfg)?;
            let skipped: Vec<&str> = artifacts
                .outcomes
                .iter()
                .filter(|o| o.skipped)
                .map(|o| o.name)
                .collect();
            if !skipped.is_empty() {
                eprintln!("[pipeline] skipped up-to-date stages: {}", skipped.join(", "));
            }
            eprintln!(
                "[pipeline] done; report at {}",
                artifacts.report_json.display()
            );
            Ok(())
        }
    }
}
