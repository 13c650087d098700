//! The pipeline stages: build-connectome → sample-walks → train → embed →
//! evaluate → report. Stages are resumable: each records content hashes of
//! its inputs and outputs in `manifest.json` and is skipped when nothing
//! changed.

use super::manifest::{bytes_sha256, input_hashes, Manifest};
use super::{connectome_code, eval_code, train_code, walk_code, ErrorCode, PipelineConfig,
    PipelineError, StageContext};
use crate::connectome::{build_dynamic_graph, io as cio};
use crate::encoder::EncoderConfig;
use crate::evalkit::{join_with_phenotype, run_cv};
use crate::tempwalk::{io as wio, sample_corpus};
use crate::trainer::{self, embeddings, extract_embeddings, train, WalkCorpus};
use rayon::prelude::*;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub name: &'static str,
    pub skipped: bool,
}

/// Paths of everything the pipeline produced.
#[derive(Debug, Clone)]
pub struct PipelineArtifacts {
    pub out_dir: PathBuf,
    pub graphs_dir: PathBuf,
    pub walks_file: PathBuf,
    pub checkpoint_file: PathBuf,
    pub loss_trace_file: PathBuf,
    pub embeddings_file: PathBuf,
    pub report_json: PathBuf,
    pub report_text: PathBuf,
    pub outcomes: Vec<StageOutcome>,
}

fn sorted_files(dir: &Path, extension: &str, stage: &str) -> Result<Vec<PathBuf>, PipelineError> {
    let entries = fs::read_dir(dir).map_err(|e| {
        PipelineError::new(
            stage,
            ErrorCode::Validation,
            format!("cannot read {}: {e}", dir.display()),
        )
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == extension).unwrap_or(false))
        .collect();
    paths.sort();
    Ok(paths)
}

fn fingerprint<T: serde::Serialize>(value: &T) -> String {
    bytes_sha256(&serde_json::to_vec(value).expect("config serializes"))
}

struct StageRunner<'a> {
    cfg: &'a PipelineConfig,
    manifest: Manifest,
    manifest_path: PathBuf,
    outcomes: Vec<StageOutcome>,
}

impl<'a> StageRunner<'a> {
    fn new(cfg: &'a PipelineConfig) -> Self {
        let manifest_path = cfg.out_dir.join("manifest.json");
        StageRunner {
            cfg,
            manifest: Manifest::load(&manifest_path),
            manifest_path,
            outcomes: Vec::new(),
        }
    }

    /// Run `body` unless the manifest proves the stage is current.
    fn run_stage(
        &mut self,
        name: &'static str,
        input_files: &[PathBuf],
        config_fingerprint: &str,
        outputs: &[PathBuf],
        body: impl FnOnce() -> Result<(), PipelineError>,
    ) -> Result<(), PipelineError> {
        let inputs = input_hashes(&self.cfg.out_dir, input_files, config_fingerprint)
            .map_err(|e| PipelineError::new(name, ErrorCode::Runtime, e.to_string()))?;
        if self.manifest.stage_current(name, &inputs, &self.cfg.out_dir) {
            eprintln!("[{name}] up to date, skipped");
            self.outcomes.push(StageOutcome { name, skipped: true });
            return Ok(());
        }
        body()?;
        self.manifest
            .record_stage(name, inputs, outputs, &self.cfg.out_dir)
            .map_err(|e| PipelineError::new(name, ErrorCode::Runtime, e.to_string()))?;
        self.manifest
            .save(&self.manifest_path)
            .map_err(|e| PipelineError::new(name, ErrorCode::Runtime, e.to_string()))?;
        self.outcomes.push(StageOutcome { name, skipped: false });
        Ok(())
    }
}

/// Execute every stage. Artifacts land under
/// `out/{graphs,walks,ckpt,embeddings,reports}` next to `manifest.json` and
/// a `config_echo.toml` holding the fully resolved configuration.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineArtifacts, PipelineError> {
    cfg.validate()?;
    for sub in ["graphs", "walks", "ckpt", "embeddings", "reports"] {
        fs::create_dir_all(cfg.out_dir.join(sub))
            .map_err(|e| PipelineError::new("setup", ErrorCode::Runtime, e.to_string()))?;
    }
    let echo = toml::to_string_pretty(cfg)
        .map_err(|e| PipelineError::new("setup", ErrorCode::Runtime, e.to_string()))?;
    fs::write(cfg.out_dir.join("config_echo.toml"), echo)
        .map_err(|e| PipelineError::new("setup", ErrorCode::Runtime, e.to_string()))?;
    let graphs_dir = cfg.out_dir.join("graphs");
    let walks_file = cfg.out_dir.join("walks").join("walks.txt");
    let stats_file = cfg.out_dir.join("walks").join("sampler_stats.json");
    let checkpoint_file = cfg.out_dir.join("ckpt").join("model.ckpt");
    let loss_trace_file = cfg.out_dir.join("ckpt").join("loss_trace.csv");
    let embeddings_file = cfg.out_dir.join("embeddings").join("embeddings.csv");
    let report_json = cfg.out_dir.join("reports").join("report.json");
    let report_text = cfg.out_dir.join("reports").join("report.txt");

    let mut runner = StageRunner::new(cfg);

    // Stage 1: time-series -> dynamic graphs.
    let ts_inputs = sorted_files(&cfg.input_dir, "csv", "build-connectome")?
        .into_iter()
        .filter(|p| p.file_name().map(|n| n != "phenotype.csv").unwrap_or(true))
        .collect::<Vec<_>>();
    if ts_inputs.is_empty() {
        return Err(PipelineError::new(
            "build-connectome",
            ErrorCode::Validation,
            format!("no time-series CSVs in {}", cfg.input_dir.display()),
        ));
    }
    let graph_outputs: Vec<PathBuf> = ts_inputs
        .iter()
        .map(|p| graphs_dir.join(format!("{}.graph", p.file_stem().unwrap().to_string_lossy())))
        .collect();
    {
        let outputs = graph_outputs.clone();
        let inputs = ts_inputs.clone();
        let spec = cfg.window.to_spec();
        runner.run_stage(
            "build-connectome",
            &ts_inputs,
            &fingerprint(&cfg.window),
            &outputs,
            || build_stage(&inputs, &outputs, &spec),
        )?;
    }

    // Stage 2: graphs -> temporal walks.
    {
        let walk_cfg = cfg.walk.to_config(cfg.stage_seed("walks"));
        let graph_inputs = graph_outputs.clone();
        let walks_out = walks_file.clone();
        let stats_out = stats_file.clone();
        runner.run_stage(
            "sample-walks",
            &graph_inputs,
            &fingerprint(&(&cfg.walk, cfg.stage_seed("walks"))),
            &[walks_file.clone(), stats_file.clone()],
            || walks_stage(&graph_inputs, &walks_out, &stats_out, &walk_cfg),
        )?;
    }

    // Stage 3: walks -> checkpoint.
    {
        let enc_cfg = cfg.encoder.to_config(cfg.walk.max_length);
        let train_cfg = cfg.train.to_config(cfg.stage_seed("train"));
        let regions = regions_from_graphs(&graph_outputs)?;
        let walks_in = walks_file.clone();
        let ckpt_out = checkpoint_file.clone();
        let trace_out = loss_trace_file.clone();
        runner.run_stage(
            "train",
            std::slice::from_ref(&walks_file),
            &fingerprint(&(&cfg.encoder, &cfg.train, cfg.stage_seed("train"), regions)),
            &[checkpoint_file.clone(), loss_trace_file.clone()],
            || train_stage(&walks_in, &ckpt_out, &trace_out, regions, &enc_cfg, &train_cfg),
        )?;
    }

    // Stage 4: checkpoint -> embeddings CSV.
    {
        let ckpt_in = checkpoint_file.clone();
        let emb_out = embeddings_file.clone();
        runner.run_stage(
            "embed",
            std::slice::from_ref(&checkpoint_file),
            "embed-v1",
            std::slice::from_ref(&embeddings_file),
            || embed_stage(&ckpt_in, &emb_out),
        )?;
    }

    // Stage 5: embeddings + phenotype -> report.json.
    let phenotype_file = cfg.input_dir.join("phenotype.csv");
    {
        if !phenotype_file.is_file() {
            return Err(PipelineError::new(
                "evaluate",
                ErrorCode::Validation,
                format!("missing {}", phenotype_file.display()),
            ));
        }
        let eval_cfg = cfg
            .eval
            .to_config(cfg.stage_seed("eval"))
            .in_stage("evaluate", eval_code)?;
        let emb_in = embeddings_file.clone();
        let phen_in = phenotype_file.clone();
        let json_out = report_json.clone();
        runner.run_stage(
            "evaluate",
            &[embeddings_file.clone(), phenotype_file.clone()],
            &fingerprint(&(&cfg.eval, cfg.stage_seed("eval"))),
            std::slice::from_ref(&report_json),
            || evaluate_stage(&emb_in, &phen_in, &json_out, &eval_cfg),
        )?;
    }

    // Stage 6: report.json -> human-readable summary and plaintext charts.
    {
        let json_in = report_json.clone();
        let trace_in = loss_trace_file.clone();
        let reports_dir = cfg.out_dir.join("reports");
        let outputs = vec![
            report_text.clone(),
            reports_dir.join("loss_plot.txt"),
            reports_dir.join("folds_plot.txt"),
        ];
        runner.run_stage(
            "report",
            &[report_json.clone(), loss_trace_file.clone()],
            "report-v1",
            &outputs,
            || super::emit_report(&json_in, Some(&trace_in), &reports_dir).map(|_| ()),
        )?;
    }

    Ok(PipelineArtifacts {
        out_dir: cfg.out_dir.clone(),
        graphs_dir,
        walks_file,
        checkpoint_file,
        loss_trace_file,
        embeddings_file,
        report_json,
        report_text,
        outcomes: runner.outcomes,
    })
}

fn build_stage(
    inputs: &[PathBuf],
    outputs: &[PathBuf],
    spec: &crate::connectome::WindowSpec,
) -> Result<(), PipelineError> {
    let stage = "build-connectome";
    let results: Vec<Result<(usize, usize), PipelineError>> = inputs
        .par_iter()
        .zip(outputs)
        .map(|(input, output)| {
            let ts = cio::read_timeseries_csv(input).in_stage(stage, connectome_code)?;
            let (graph, stats) = build_dynamic_graph(&ts, spec).in_stage(stage, connectome_code)?;
            cio::write_graph(output, &graph).in_stage(stage, connectome_code)?;
            Ok((graph.node_count(), stats.degenerate_pairs))
        })
        .collect();
    let mut regions = None;
    let mut degenerate = 0usize;
    for r in results {
        let (r_nodes, deg) = r?;
        degenerate += deg;
        match regions {
            None => regions = Some(r_nodes),
            Some(prev) if prev != r_nodes => {
                return Err(PipelineError::new(
                    stage,
                    ErrorCode::Validation,
                    format!("subjects disagree on region count: {prev} vs {r_nodes}"),
                ));
            }
            Some(_) => {}
        }
    }
    if degenerate > 0 {
        eprintln!("[{stage}] warning: {degenerate} zero-variance pairs treated as correlation 0");
    }
    Ok(())
}

fn walks_stage(
    graph_files: &[PathBuf],
    walks_out: &Path,
    stats_out: &Path,
    walk_cfg: &crate::tempwalk::WalkConfig,
) -> Result<(), PipelineError> {
    let stage = "sample-walks";
    let mut graphs = Vec::with_capacity(graph_files.len());
    for path in graph_files {
        graphs.push(cio::read_graph(path).in_stage(stage, connectome_code)?);
    }
    let (walks, stats) = sample_corpus(&graphs, walk_cfg).in_stage(stage, walk_code)?;
    if !stats.empty_graphs.is_empty() {
        eprintln!(
            "[{stage}] warning: {} graph(s) had zero edges: {}",
            stats.empty_graphs.len(),
            stats.empty_graphs.join(", ")
        );
    }
    wio::write_walks(walks_out, &walks).in_stage(stage, walk_code)?;
    fs::write(stats_out, serde_json::to_string_pretty(&stats).expect("stats serialize"))
        .map_err(|e| PipelineError::new(stage, ErrorCode::Runtime, e.to_string()))?;
    eprintln!(
        "[{stage}] emitted {} walks ({} attempts, {} rejected)",
        stats.emitted,
        stats.attempts,
        stats.rejected_no_edges + stats.rejected_too_short
    );
    Ok(())
}

fn regions_from_graphs(graph_files: &[PathBuf]) -> Result<usize, PipelineError> {
    let first = graph_files.first().ok_or_else(|| {
        PipelineError::new("train", ErrorCode::Validation, "no graph files present")
    })?;
    let graph = cio::read_graph(first).in_stage("train", connectome_code)?;
    Ok(graph.node_count())
}

fn train_stage(
    walks_in: &Path,
    ckpt_out: &Path,
    trace_out: &Path,
    regions: usize,
    enc_cfg: &EncoderConfig,
    train_cfg: &crate::trainer::TrainConfig,
) -> Result<(), PipelineError> {
    let stage = "train";
    let walks = wio::read_walks(walks_in).in_stage(stage, walk_code)?;
    let corpus = WalkCorpus::from_walks(walks);
    let output = train(&corpus, regions, enc_cfg, train_cfg).in_stage(stage, train_code)?;
    trainer::save_checkpoint(
        ckpt_out,
        &trainer::Checkpoint {
            state: output.state,
            heads: output.heads,
            graph_ids: output.graph_ids,
        },
    )
    .in_stage(stage, train_code)?;
    trainer::write_loss_trace(trace_out, &output.trace).in_stage(stage, train_code)?;
    if let (Some(first), Some(last)) = (output.trace.first(), output.trace.last()) {
        eprintln!(
            "[{stage}] L_total {:.4} -> {:.4} over {} epochs",
            first.l_total,
            last.l_total,
            output.trace.len() - 1
        );
    }
    Ok(())
}

fn embed_stage(ckpt_in: &Path, emb_out: &Path) -> Result<(), PipelineError> {
    let stage = "embed";
    let ckpt = trainer::load_checkpoint(ckpt_in).in_stage(stage, train_code)?;
    let emb = extract_embeddings(&ckpt.heads, &ckpt.graph_ids).in_stage(stage, train_code)?;
    embeddings::write_embeddings(emb_out, &ckpt.graph_ids, &emb).in_stage(stage, train_code)?;
    Ok(())
}

fn evaluate_stage(
    emb_in: &Path,
    phenotype_in: &Path,
    json_out: &Path,
    eval_cfg: &crate::evalkit::EvalConfig,
) -> Result<(), PipelineError> {
    let stage = "evaluate";
    let (ids, emb) = embeddings::read_embeddings(emb_in).in_stage(stage, train_code)?;
    let phenotype = cio::read_phenotype_csv(phenotype_in).in_stage(stage, connectome_code)?;
    let items = join_with_phenotype(&ids, &emb, &phenotype).in_stage(stage, eval_code)?;
    let report = run_cv(&items, eval_cfg).in_stage(stage, eval_code)?;
    fs::write(
        json_out,
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )
    .map_err(|e| PipelineError::new(stage, ErrorCode::Runtime, e.to_string()))?;
    if let Some(acc) = &report.aggregate.accuracy {
        eprintln!(
            "[{stage}] accuracy {:.4} ± {:.4} over {} folds",
            acc.mean, acc.std, acc.folds
        );
    }
    Ok(())
}
