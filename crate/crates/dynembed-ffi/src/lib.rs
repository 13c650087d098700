//! C ABI for the dynembed toolkit.
//!
//! Every function returns a [`DynembedStatus`]; on failure the thread-local
//! error message is readable via [`dynembed_last_error`]. Embedding tables
//! are exposed through an opaque handle with explicit free. All string
//! arguments are NUL-terminated UTF-8 paths.

use dynembed::evalkit::{join_with_phenotype, run_cv, EvalConfig, Protocol};
use dynembed::pipeline::{run_pipeline, ErrorCode, PipelineConfig, PipelineError};
use dynembed::tempwalk::{io as wio, sample_corpus, StartTimePolicy, WalkConfig};
use dynembed::trainer::{self, embeddings, extract_embeddings, train, TrainConfig, WalkCorpus};
use dynembed::{connectome, encoder};
use libc::{c_char, c_double, size_t};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};

/// Status codes mirroring the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynembedStatus {
    Ok = 0,
    /// Bad inputs or configuration.
    Validation = 1,
    /// I/O or numerical failure at run time.
    Runtime = 2,
    /// The requested protocol cannot be satisfied by the data.
    Infeasible = 3,
    /// A required pointer argument was NULL.
    NullArgument = 4,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &PipelineError) -> DynembedStatus {
    match err.code {
        ErrorCode::Validation => DynembedStatus::Validation,
        ErrorCode::Runtime => DynembedStatus::Runtime,
        ErrorCode::Infeasible => DynembedStatus::Infeasible,
    }
}

fn fail(err: &PipelineError) -> DynembedStatus {
    set_error(&err.to_string());
    status_of(err)
}

/// # Safety
/// `ptr` must be NULL or a valid NUL-terminated string.
unsafe fn path_arg(ptr: *const c_char, what: &str) -> Result<PathBuf, DynembedStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} is NULL"));
        return Err(DynembedStatus::NullArgument);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error(&format!("{what} is not valid UTF-8"));
            Err(DynembedStatus::InvalidUtf8)
        }
    }
}

fn require_exists(path: &Path, what: &str, stage: &str) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::new(
            stage,
            ErrorCode::Validation,
            format!("{what} {} does not exist", path.display()),
        ))
    }
}

/// Copy the last error message into `buf` (NUL-terminated, truncated to
/// `cap`). Returns the full message length in bytes, excluding the NUL.
/// A NULL `buf` or zero `cap` just reports the length.
///
/// # Safety
/// `buf` must be NULL or point to at least `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dynembed_last_error(buf: *mut c_char, cap: size_t) -> size_t {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Generate a synthetic two-class corpus (time-series CSVs plus
/// phenotype.csv) under `out_dir`.
///
/// # Safety
/// `out_dir` must be NULL or a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dynembed_synth(
    out_dir: *const c_char,
    subjects: size_t,
    regions: size_t,
    timepoints: size_t,
    sites: size_t,
    seed: u64,
) -> DynembedStatus {
    let out = match path_arg(out_dir, "out_dir") {
        Ok(p) => p,
        Err(code) => return code,
    };
    let regimes = connectome::RegimeDescriptor {
        site_count: sites.max(1),
        ..connectome::RegimeDescriptor::default()
    };
    let run = || -> Result<(), PipelineError> {
        let corpus =
            connectome::generate_synthetic_corpus(subjects, regions, timepoints, &regimes, seed)
                .map_err(|e| PipelineError::new("synth", ErrorCode::Validation, e.to_string()))?;
        std::fs::create_dir_all(&out)
            .map_err(|e| PipelineError::new("synth", ErrorCode::Runtime, e.to_string()))?;
        let mut phenotype = connectome::io::Phenotype::new();
        for subject in &corpus.subjects {
            let path = out.join(format!("{}.csv", subject.ts.subject_id()));
            connectome::io::write_timeseries_csv(&path, &subject.ts)
                .map_err(|e| PipelineError::new("synth", ErrorCode::Runtime, e.to_string()))?;
            phenotype.insert(
                subject.ts.subject_id().to_string(),
                connectome::io::PhenotypeRecord {
                    label: subject.label,
                    site: subject.site.clone(),
                },
            );
        }
        connectome::io::write_phenotype_csv(&out.join("phenotype.csv"), &phenotype)
            .map_err(|e| PipelineError::new("synth", ErrorCode::Runtime, e.to_string()))
    };
    match run() {
        Ok(()) => DynembedStatus::Ok,
        Err(e) => fail(&e),
    }
}

/// Convert every time-series CSV in `input_dir` into a `.graph` file in
/// `out_dir`.
///
/// # Safety
/// String arguments must be NULL or valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn dynembed_build_connectome(
    input_dir: *const c_char,
    out_dir: *const c_char,
    window_length: size_t,
    stride: size_t,
    percentile: c_double,
) -> DynembedStatus {
    let (input, out) = match (path_arg(input_dir, "input_dir"), path_arg(out_dir, "out_dir")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(c), _) | (_, Err(c)) => return c,
    };
    let spec = connectome::WindowSpec {
        window_length,
        stride,
        threshold_percentile: percentile,
    };
    let run = || -> Result<(), PipelineError> {
        let to_err = |e: connectome::ConnectomeError| {
            PipelineError::new(
                "build-connectome",
                dynembed::pipeline::connectome_code(&e),
                e.to_string(),
            )
        };
        spec.validate().map_err(to_err)?;
        require_exists(&input, "input_dir", "build-connectome")?;
        let subjects = connectome::io::read_timeseries_dir(&input).map_err(to_err)?;
        if subjects.is_empty() {
            return Err(PipelineError::new(
                "build-connectome",
                ErrorCode::Validation,
                format!("no time-series CSVs in {}", input.display()),
            ));
        }
        std::fs::create_dir_all(&out).map_err(|e| {
            PipelineError::new("build-connectome", ErrorCode::Runtime, e.to_string())
        })?;
        for ts in &subjects {
            let (graph, _) = connectome::build_dynamic_graph(ts, &spec).map_err(to_err)?;
            connectome::io::write_graph(&out.join(format!("{}.graph", ts.subject_id())), &graph)
                .map_err(to_err)?;
        }
        Ok(())
    };
    match run() {
        Ok(()) => DynembedStatus::Ok,
        Err(e) => fail(&e),
    }
}

/// Sample temporal walks from every `.graph` file in `graphs_dir` into a
/// walks file. `uniform_start` selects the uniform-incident start-time
/// policy instead of earliest.
///
/// # Safety
/// String arguments must be NULL or valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn dynembed_sample_walks(
    graphs_dir: *const c_char,
    out_file: *const c_char,
    max_length: size_t,
    walks_per_node: size_t,
    min_length: size_t,
    uniform_start: bool,
    seed: u64,
) -> DynembedStatus {
    let (graphs, out) = match (path_arg(graphs_dir, "graphs_dir"), path_arg(out_file, "out_file"))
    {
        (Ok(a), Ok(b)) => (a, b),
        (Err(c), _) | (_, Err(c)) => return c,
    };
    let cfg = WalkConfig {
        l_max: max_length,
        walks_per_node,
        min_length,
        start_time_policy: if uniform_start {
            StartTimePolicy::UniformIncident
        } else {
            StartTimePolicy::Earliest
        },
        seed,
    };
    let run = || -> Result<(), PipelineError> {
        require_exists(&graphs, "graphs_dir", "sample-walks")?;
        let graph_list = connectome::io::read_graph_dir(&graphs).map_err(|e| {
            PipelineError::new(
                "sample-walks",
                dynembed::pipeline::connectome_code(&e),
                e.to_string(),
            )
        })?;
        if graph_list.is_empty() {
            return Err(PipelineError::new(
                "sample-walks",
                ErrorCode::Validation,
                format!("no .graph files in {}", graphs.display()),
            ));
        }
        let to_err = |e: dynembed::tempwalk::WalkError| {
            PipelineError::new("sample-walks", dynembed::pipeline::walk_code(&e), e.to_string())
        };
        let (walks, _) = sample_corpus(&graph_list, &cfg).map_err(to_err)?;
        wio::write_walks(&out, &walks).map_err(to_err)
    };
    match run() {
        Ok(()) => DynembedStatus::Ok,
        Err(e) => fail(&e),
    }
}

/// Training options; take the defaults then override. `d_ff == 0` selects
/// the conventional `4*dim`, `regions == 0` infers the vocabulary from the
/// walks file.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DynembedTrainOptions {
    pub dim: size_t,
    pub heads: size_t,
    pub layers: size_t,
    pub d_ff: size_t,
    pub regions: size_t,
    pub lambda1: c_double,
    pub lambda2: c_double,
    pub batch_size: size_t,
    pub epochs: size_t,
    pub learning_rate: c_double,
    pub mask_fraction: c_double,
    pub dropout: c_double,
    pub seed: u64,
}

/// Default training options (d = 252, h = 4, 6 layers, lambda1 = 1,
/// lambda2 = 5, 15% masking).
#[no_mangle]
pub extern "C" fn dynembed_train_options_default() -> DynembedTrainOptions {
    let t = TrainConfig::default();
    DynembedTrainOptions {
        dim: 252,
        heads: 4,
        layers: 6,
        d_ff: 0,
        regions: 0,
        lambda1: t.lambda1,
        lambda2: t.lambda2,
        batch_size: t.batch_size,
        epochs: t.epochs,
        learning_rate: t.learning_rate,
        mask_fraction: t.mask_fraction,
        dropout: t.dropout,
        seed: t.seed,
    }
}

/// Train on a walks file; writes `model.ckpt` and `loss_trace.csv` into
/// `out_dir`.
///
/// # Safety
/// String arguments must be NULL or valid NUL-terminated strings; `options`
/// must be NULL or point to a valid options struct.
#[no_mangle]
pub unsafe extern "C" fn dynembed_train(
    walks_file: *const c_char,
    out_dir: *const c_char,
    options: *const DynembedTrainOptions,
) -> DynembedStatus {
    let (walks_path, out) =
        match (path_arg(walks_file, "walks_file"), path_arg(out_dir, "out_dir")) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(c), _) | (_, Err(c)) => return c,
        };
    if options.is_null() {
        set_error("options is NULL");
        return DynembedStatus::NullArgument;
    }
    let opts = *options;
    let run = || -> Result<(), PipelineError> {
        let to_err = |e: trainer::TrainError| {
            PipelineError::new("train", dynembed::pipeline::train_code(&e), e.to_string())
        };
        require_exists(&walks_path, "walks_file", "train")?;
        let walks = wio::read_walks(&walks_path).map_err(|e| {
            PipelineError::new("train", dynembed::pipeline::walk_code(&e), e.to_string())
        })?;
        let corpus = WalkCorpus::from_walks(walks);
        if corpus.walks.is_empty() {
            return Err(PipelineError::new(
                "train",
                ErrorCode::Validation,
                "walks file is empty",
            ));
        }
        let regions = if opts.regions == 0 {
            corpus.min_regions()
        } else {
            opts.regions
        };
        let enc_cfg = encoder::EncoderConfig {
            dim: opts.dim,
            heads: opts.heads,
            layers: opts.layers,
            d_ff: if opts.d_ff == 0 { 4 * opts.dim } else { opts.d_ff },
            max_seq: corpus.max_walk_len() + 1,
        };
        let train_cfg = TrainConfig {
            lambda1: opts.lambda1,
            lambda2: opts.lambda2,
            batch_size: opts.batch_size,
            epochs: opts.epochs,
            learning_rate: opts.learning_rate,
            seed: opts.seed,
            mask_fraction: opts.mask_fraction,
            dropout: opts.dropout,
            ..TrainConfig::default()
        };
        let output = train(&corpus, regions, &enc_cfg, &train_cfg).map_err(to_err)?;
        std::fs::create_dir_all(&out)
            .map_err(|e| PipelineError::new("train", ErrorCode::Runtime, e.to_string()))?;
        trainer::save_checkpoint(
            &out.join("model.ckpt"),
            &trainer::Checkpoint {
                state: output.state,
                heads: output.heads,
                graph_ids: output.graph_ids,
            },
        )
        .map_err(to_err)?;
        trainer::write_loss_trace(&out.join("loss_trace.csv"), &output.trace).map_err(to_err)
    };
    match run() {
        Ok(()) => DynembedStatus::Ok,
        Err(e) => fail(&e),
    }
}

/// Extract per-graph embeddings from a checkpoint into a CSV.
///
/// # Safety
/// String arguments must be NULL or valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn dynembed_embed(
    checkpoint_file: *const c_char,
    out_csv: *const c_char,
) -> DynembedStatus {
    let (ckpt, out) = match (
        path_arg(checkpoint_file, "checkpoint_file"),
        path_arg(out_csv, "out_csv"),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(c), _) | (_, Err(c)) => return c,
    };
    let run = || -> Result<(), PipelineError> {
        let to_err = |e: trainer::TrainError| {
            PipelineError::new("embed", dynembed::pipeline::train_code(&e), e.to_string())
        };
        require_exists(&ckpt, "checkpoint_file", "embed")?;
        let checkpoint = trainer::load_checkpoint(&ckpt).map_err(to_err)?;
        let emb = extract_embeddings(&checkpoint.heads, &checkpoint.graph_ids).map_err(to_err)?;
        embeddings::write_embeddings(&out, &checkpoint.graph_ids, &emb).map_err(to_err)
    };
    match run() {
        Ok(()) => DynembedStatus::Ok,
        Err(e) => fail(&e),
    }
}

/// Evaluate embeddings against a phenotype table; writes report.json.
/// `protocol` accepts `stratified<k>` or `leave-one-site-out`.
///
/// # Safety
/// String arguments must be NULL or valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn dynembed_evaluate(
    embeddings_csv: *const c_char,
    phenotype_csv: *const c_char,
    protocol: *const c_char,
    seed: u64,
    out_json: *const c_char,
) -> DynembedStatus {
    let paths = (
        path_arg(embeddings_csv, "embeddings_csv"),
        path_arg(phenotype_csv, "phenotype_csv"),
        path_arg(protocol, "protocol"),
        path_arg(out_json, "out_json"),
    );
    let (emb_path, phen_path, protocol, out) = match paths {
        (Ok(a), Ok(b), Ok(c), Ok(d)) => (a, b, c, d),
        (Err(c), ..) | (_, Err(c), ..) | (_, _, Err(c), _) | (_, _, _, Err(c)) => return c,
    };
    let run = || -> Result<(), PipelineError> {
        let eval_err = |e: dynembed::evalkit::EvalError| {
            PipelineError::new("evaluate", dynembed::pipeline::eval_code(&e), e.to_string())
        };
        let cfg = EvalConfig {
            protocol: Protocol::parse(&protocol.to_string_lossy()).map_err(eval_err)?,
            seed,
            ..EvalConfig::default()
        };
        require_exists(&emb_path, "embeddings_csv", "evaluate")?;
        require_exists(&phen_path, "phenotype_csv", "evaluate")?;
        let (ids, emb) = embeddings::read_embeddings(&emb_path).map_err(|e| {
            PipelineError::new("evaluate", dynembed::pipeline::train_code(&e), e.to_string())
        })?;
        let table = connectome::io::read_phenotype_csv(&phen_path).map_err(|e| {
            PipelineError::new(
                "evaluate",
                dynembed::pipeline::connectome_code(&e),
                e.to_string(),
            )
        })?;
        let items = join_with_phenotype(&ids, &emb, &table).map_err(eval_err)?;
        let report = run_cv(&items, &cfg).map_err(eval_err)?;
        std::fs::write(
            &out,
            serde_json::to_string_pretty(&report).expect("report serializes"),
        )
        .map_err(|e| PipelineError::new("evaluate", ErrorCode::Runtime, e.to_string()))
    };
    match run() {
        Ok(()) => DynembedStatus::Ok,
        Err(e) => fail(&e),
    }
}

/// Run the whole pipeline from a TOML config file.
///
/// # Safety
/// `config_toml` must be NULL or a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dynembed_pipeline_run(config_toml: *const c_char) -> DynembedStatus {
    let config = match path_arg(config_toml, "config_toml") {
        Ok(p) => p,
        Err(code) => return code,
    };
    let run = || -> Result<(), PipelineError> {
        let cfg = PipelineConfig::from_toml_file(&config)?;
        run_pipeline(&cfg).map(|_| ())
    };
    match run() {
        Ok(()) => DynembedStatus::Ok,
        Err(e) => fail(&e),
    }
}

/// Opaque embedding table loaded from an embeddings CSV.
pub struct DynembedEmbeddings {
    ids: Vec<CString>,
    matrix: dynembed::linalg::Mat,
}

/// Load an embeddings CSV. Returns NULL on failure (see
/// `dynembed_last_error`). Free with [`dynembed_embeddings_free`].
///
/// # Safety
/// `embeddings_csv` must be NULL or a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dynembed_embeddings_open(
    embeddings_csv: *const c_char,
) -> *mut DynembedEmbeddings {
    let path = match path_arg(embeddings_csv, "embeddings_csv") {
        Ok(p) => p,
        Err(_) => return std::ptr::null_mut(),
    };
    match embeddings::read_embeddings(Path::new(&path)) {
        Ok((ids, matrix)) => {
            let ids = ids
                .into_iter()
                .map(|s| CString::new(s).unwrap_or_default())
                .collect();
            Box::into_raw(Box::new(DynembedEmbeddings { ids, matrix }))
        }
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Number of embedded graphs; 0 for NULL.
///
/// # Safety
/// `handle` must be NULL or a pointer from [`dynembed_embeddings_open`].
#[no_mangle]
pub unsafe extern "C" fn dynembed_embeddings_count(handle: *const DynembedEmbeddings) -> size_t {
    handle.as_ref().map_or(0, |h| h.matrix.rows())
}

/// Embedding dimension; 0 for NULL.
///
/// # Safety
/// `handle` must be NULL or a pointer from [`dynembed_embeddings_open`].
#[no_mangle]
pub unsafe extern "C" fn dynembed_embeddings_dim(handle: *const DynembedEmbeddings) -> size_t {
    handle.as_ref().map_or(0, |h| h.matrix.cols())
}

/// Graph id of row `index` as a borrowed pointer, valid until the handle is
/// freed. NULL when out of range.
///
/// # Safety
/// `handle` must be NULL or a pointer from [`dynembed_embeddings_open`].
#[no_mangle]
pub unsafe extern "C" fn dynembed_embeddings_graph_id(
    handle: *const DynembedEmbeddings,
    index: size_t,
) -> *const c_char {
    match handle.as_ref().and_then(|h| h.ids.get(index)) {
        Some(id) => id.as_ptr(),
        None => std::ptr::null(),
    }
}

/// Copy row `index` into `out` (capacity `cap` doubles). Fails with
/// Validation when out of range or the buffer is too small.
///
/// # Safety
/// `handle` must be NULL or a pointer from [`dynembed_embeddings_open`];
/// `out` must be NULL or point to at least `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dynembed_embeddings_vector(
    handle: *const DynembedEmbeddings,
    index: size_t,
    out: *mut c_double,
    cap: size_t,
) -> DynembedStatus {
    let Some(h) = handle.as_ref() else {
        set_error("handle is NULL");
        return DynembedStatus::NullArgument;
    };
    if out.is_null() {
        set_error("out is NULL");
        return DynembedStatus::NullArgument;
    }
    if index >= h.matrix.rows() {
        set_error(&format!("row {index} out of range ({} rows)", h.matrix.rows()));
        return DynembedStatus::Validation;
    }
    if cap < h.matrix.cols() {
        set_error(&format!("buffer holds {cap} values, need {}", h.matrix.cols()));
        return DynembedStatus::Validation;
    }
    let row = h.matrix.row(index);
    std::ptr::copy_nonoverlapping(row.as_ptr(), out, row.len());
    DynembedStatus::Ok
}

/// Free an embeddings handle; NULL is a no-op.
///
/// # Safety
/// `handle` must be NULL or an owned pointer from
/// [`dynembed_embeddings_open`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dynembed_embeddings_free(handle: *mut DynembedEmbeddings) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn cpath(p: &Path) -> CString {
        CString::new(p.to_str().unwrap()).unwrap()
    }

    fn last_error() -> String {
        let mut buf = vec![0u8; 512];
        let n = unsafe { dynembed_last_error(buf.as_mut_ptr().cast(), buf.len()) };
        String::from_utf8_lossy(&buf[..n.min(511)]).to_string()
    }

    #[test]
    fn full_stage_chain_through_the_c_abi() {
        let dir = tempfile::tempdir().unwrap();
        let data = cpath(&dir.path().join("data"));
        let graphs = cpath(&dir.path().join("graphs"));
        let walks = cpath(&dir.path().join("walks.txt"));
        let ckpt_dir = cpath(&dir.path().join("ckpt"));
        let ckpt_file = cpath(&dir.path().join("ckpt/model.ckpt"));
        let emb = cpath(&dir.path().join("emb.csv"));
        let phen = cpath(&dir.path().join("data/phenotype.csv"));
        let report = cpath(&dir.path().join("report.json"));

        unsafe {
            assert_eq!(dynembed_synth(data.as_ptr(), 8, 8, 60, 2, 3), DynembedStatus::Ok);
            assert_eq!(
                dynembed_build_connectome(data.as_ptr(), graphs.as_ptr(), 20, 10, 80.0),
                DynembedStatus::Ok
            );
            assert_eq!(
                dynembed_sample_walks(graphs.as_ptr(), walks.as_ptr(), 8, 3, 2, true, 5),
                DynembedStatus::Ok
            );
            let mut opts = dynembed_train_options_default();
            opts.dim = 8;
            opts.heads = 2;
            opts.layers = 1;
            opts.epochs = 2;
            opts.batch_size = 16;
            opts.learning_rate = 2e-3;
            assert_eq!(
                dynembed_train(walks.as_ptr(), ckpt_dir.as_ptr(), &opts),
                DynembedStatus::Ok
            );
            assert_eq!(dynembed_embed(ckpt_file.as_ptr(), emb.as_ptr()), DynembedStatus::Ok);
            let protocol = c("stratified4");
            assert_eq!(
                dynembed_evaluate(emb.as_ptr(), phen.as_ptr(), protocol.as_ptr(), 1, report.as_ptr()),
                DynembedStatus::Ok
            );

            let handle = dynembed_embeddings_open(emb.as_ptr());
            assert!(!handle.is_null());
            assert_eq!(dynembed_embeddings_count(handle), 8);
            assert_eq!(dynembed_embeddings_dim(handle), 8);
            let id = dynembed_embeddings_graph_id(handle, 0);
            assert!(!id.is_null());
            assert_eq!(CStr::from_ptr(id).to_str().unwrap(), "sub0000");
            let mut row = vec![0.0f64; 8];
            assert_eq!(
                dynembed_embeddings_vector(handle, 0, row.as_mut_ptr(), row.len()),
                DynembedStatus::Ok
            );
            assert!(row.iter().any(|v| *v != 0.0));
            assert_eq!(
                dynembed_embeddings_vector(handle, 99, row.as_mut_ptr(), row.len()),
                DynembedStatus::Validation
            );
            dynembed_embeddings_free(handle);
        }
    }

    #[test]
    fn null_arguments_and_errors_are_reported() {
        unsafe {
            assert_eq!(
                dynembed_build_connectome(std::ptr::null(), std::ptr::null(), 10, 5, 80.0),
                DynembedStatus::NullArgument
            );
            assert!(last_error().contains("NULL"));

            let missing = c("/nonexistent/nowhere");
            let out = c("/tmp/dynembed-ffi-unused-out");
            let status = dynembed_build_connectome(missing.as_ptr(), out.as_ptr(), 10, 5, 80.0);
            assert_eq!(status, DynembedStatus::Validation);
            assert!(last_error().contains("nonexistent"));

            // Invalid percentile fails validation before any I/O.
            let status = dynembed_build_connectome(missing.as_ptr(), out.as_ptr(), 10, 5, 101.0);
            assert_eq!(status, DynembedStatus::Validation);
            assert!(last_error().contains("percentile"));

            let handle = dynembed_embeddings_open(missing.as_ptr());
            assert!(handle.is_null());
        }
    }
}
