//! Compile and run a small C client against the generated header and the
//! static library, exercising the stage chain and the embeddings handle
//! from outside Rust.

use std::path::PathBuf;
use std::process::Command;

const C_PROGRAM: &str = r#"
#define _XOPEN_SOURCE 700
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include "dynembed.h"

static void path_in(char *buf, size_t cap, const char *dir, const char *leaf) {
    snprintf(buf, cap, "%s/%s", dir, leaf);
}

int main(void) {
    char tmpl[] = "/tmp/dynembed-c-smoke-XXXXXX";
    char *dir = mkdtemp(tmpl);
    if (!dir) return 10;

    char data[512], graphs[512], walks[512], ckpt_dir[512], ckpt[512];
    char emb[512], phen[512], report[512];
    path_in(data, sizeof data, dir, "data");
    path_in(graphs, sizeof graphs, dir, "graphs");
    path_in(walks, sizeof walks, dir, "walks.txt");
    path_in(ckpt_dir, sizeof ckpt_dir, dir, "ckpt");
    path_in(ckpt, sizeof ckpt, dir, "ckpt/model.ckpt");
    path_in(emb, sizeof emb, dir, "emb.csv");
    path_in(phen, sizeof phen, dir, "data/phenotype.csv");
    path_in(report, sizeof report, dir, "report.json");

    if (dynembed_synth(data, 6, 8, 60, 2, 3) != DYNEMBED_STATUS_OK) return 1;
    if (dynembed_build_connectome(data, graphs, 20, 10, 80.0) != DYNEMBED_STATUS_OK) return 2;
    if (dynembed_sample_walks(graphs, walks, 8, 3, 2, true, 5) != DYNEMBED_STATUS_OK) return 3;

    struct DynembedTrainOptions opts = dynembed_train_options_default();
    opts.dim = 8;
    opts.heads = 2;
    opts.layers = 1;
    opts.epochs = 2;
    opts.batch_size = 16;
    opts.learning_rate = 2e-3;
    if (dynembed_train(walks, ckpt_dir, &opts) != DYNEMBED_STATUS_OK) return 4;
    if (dynembed_embed(ckpt, emb) != DYNEMBED_STATUS_OK) return 5;
    if (dynembed_evaluate(emb, phen, "stratified3", 1, report) != DYNEMBED_STATUS_OK) return 6;

    DynembedEmbeddings *handle = dynembed_embeddings_open(emb);
    if (!handle) return 7;
    if (dynembed_embeddings_count(handle) != 6) return 8;
    if (dynembed_embeddings_dim(handle) != 8) return 9;
    const char *id = dynembed_embeddings_graph_id(handle, 0);
    if (!id || strcmp(id, "sub0000") != 0) return 11;
    double row[8];
    if (dynembed_embeddings_vector(handle, 0, row, 8) != DYNEMBED_STATUS_OK) return 12;
    if (dynembed_embeddings_vector(handle, 99, row, 8) != DYNEMBED_STATUS_VALIDATION) return 13;
    dynembed_embeddings_free(handle);

    if (dynembed_build_connectome(NULL, NULL, 10, 5, 80.0) != DYNEMBED_STATUS_NULL_ARGUMENT) {
        return 14;
    }
    char msg[256];
    size_t len = dynembed_last_error(msg, sizeof msg);
    if (len == 0 || strstr(msg, "NULL") == NULL) return 15;

    printf("c-abi smoke ok\n");
    return 0;
}
"#;

#[test]
fn c_client_compiles_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include_dir = manifest.join("include");
    assert!(
        include_dir.join("dynembed.h").is_file(),
        "generated header missing"
    );

    // The test binary sits in target/<profile>/deps; the static library is
    // written there during test builds and into target/<profile> on plain
    // builds.
    let exe = std::env::current_exe().unwrap();
    let deps_dir = exe.parent().expect("deps dir").to_path_buf();
    let profile_dir = deps_dir.parent().expect("target profile dir").to_path_buf();
    let static_lib = [deps_dir.join("libdynembed_ffi.a"), profile_dir.join("libdynembed_ffi.a")]
        .into_iter()
        .find(|p| p.is_file())
        .expect("static library was built alongside the tests");

    let work = tempfile::tempdir().unwrap();
    let source = work.path().join("smoke.c");
    std::fs::write(&source, C_PROGRAM).unwrap();
    let binary = work.path().join("smoke");

    let compile = Command::new("cc")
        .arg(&source)
        .arg("-o")
        .arg(&binary)
        .arg("-I")
        .arg(&include_dir)
        .arg(&static_lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .expect("cc is available");
    assert!(
        compile.status.success(),
        "compile failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&binary).output().expect("smoke binary runs");
    assert!(
        run.status.success(),
        "smoke exited with {:?}:\n{}\n{}",
        run.status.code(),
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).contains("c-abi smoke ok"));
}
