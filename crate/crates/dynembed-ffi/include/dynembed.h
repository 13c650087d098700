#ifndef DYNEMBED_H
#define DYNEMBED_H

/* Generated by cbindgen from dynembed-ffi; do not edit by hand. */

#include <stdint.h>
#include <stddef.h>
#include <stdbool.h>

// Status codes mirroring the CLI exit codes.
typedef enum DynembedStatus {
  DYNEMBED_STATUS_OK = 0,
  // Bad inputs or configuration.
  DYNEMBED_STATUS_VALIDATION = 1,
  // I/O or numerical failure at run time.
  DYNEMBED_STATUS_RUNTIME = 2,
  // The requested protocol cannot be satisfied by the data.
  DYNEMBED_STATUS_INFEASIBLE = 3,
  // A required pointer argument was NULL.
  DYNEMBED_STATUS_NULL_ARGUMENT = 4,
  // A string argument was not valid UTF-8.
  DYNEMBED_STATUS_INVALID_UTF8 = 5,
} DynembedStatus;

// Opaque embedding table loaded from an embeddings CSV.
typedef struct DynembedEmbeddings DynembedEmbeddings;

// Training options; take the defaults then override. `d_ff == 0` selects
// the conventional `4*dim`, `regions == 0` infers the vocabulary from the
// walks file.
typedef struct DynembedTrainOptions {
  size_t dim;
  size_t heads;
  size_t layers;
  size_t d_ff;
  size_t regions;
  double lambda1;
  double lambda2;
  size_t batch_size;
  size_t epochs;
  double learning_rate;
  double mask_fraction;
  double dropout;
  uint64_t seed;
} DynembedTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message into `buf` (NUL-terminated, truncated to
// `cap`). Returns the full message length in bytes, excluding the NUL.
// A NULL `buf` or zero `cap` just reports the length.
//
// # Safety
// `buf` must be NULL or point to at least `cap` writable bytes.
size_t dynembed_last_error(char *buf, size_t cap);

// Generate a synthetic two-class corpus (time-series CSVs plus
// phenotype.csv) under `out_dir`.
//
// # Safety
// `out_dir` must be NULL or a valid NUL-terminated string.
enum DynembedStatus dynembed_synth(const char *out_dir,
                                   size_t subjects,
                                   size_t regions,
                                   size_t timepoints,
                                   size_t sites,
                                   uint64_t seed);

// Convert every time-series CSV in `input_dir` into a `.graph` file in
// `out_dir`.
//
// # Safety
// String arguments must be NULL or valid NUL-terminated strings.
enum DynembedStatus dynembed_build_connectome(const char *input_dir,
                                              const char *out_dir,
                                              size_t window_length,
                                              size_t stride,
                                              double percentile);

// Sample temporal walks from every `.graph` file in `graphs_dir` into a
// walks file. `uniform_start` selects the uniform-incident start-time
// policy instead of earliest.
//
// # Safety
// String arguments must be NULL or valid NUL-terminated strings.
enum DynembedStatus dynembed_sample_walks(const char *graphs_dir,
                                          const char *out_file,
                                          size_t max_length,
                                          size_t walks_per_node,
                                          size_t min_length,
                                          bool uniform_start,
                                          uint64_t seed);

// Default training options (d = 252, h = 4, 6 layers, lambda1 = 1,
// lambda2 = 5, 15% masking).
struct DynembedTrainOptions dynembed_train_options_default(void);

// Train on a walks file; writes `model.ckpt` and `loss_trace.csv` into
// `out_dir`.
//
// # Safety
// String arguments must be NULL or valid NUL-terminated strings; `options`
// must be NULL or point to a valid options struct.
enum DynembedStatus dynembed_train(const char *walks_file,
                                   const char *out_dir,
                                   const struct DynembedTrainOptions *options);

// Extract per-graph embeddings from a checkpoint into a CSV.
//
// # Safety
// String arguments must be NULL or valid NUL-terminated strings.
enum DynembedStatus dynembed_embed(const char *checkpoint_file, const char *out_csv);

// Evaluate embeddings against a phenotype table; writes report.json.
// `protocol` accepts `stratified<k>` or `leave-one-site-out`.
//
// # Safety
// String arguments must be NULL or valid NUL-terminated strings.
enum DynembedStatus dynembed_evaluate(const char *embeddings_csv,
                                      const char *phenotype_csv,
                                      const char *protocol,
                                      uint64_t seed,
                                      const char *out_json);

// Run the whole pipeline from a TOML config file.
//
// # Safety
// `config_toml` must be NULL or a valid NUL-terminated string.
enum DynembedStatus dynembed_pipeline_run(const char *config_toml);

// Load an embeddings CSV. Returns NULL on failure (see
// `dynembed_last_error`). Free with [`dynembed_embeddings_free`].
//
// # Safety
// `embeddings_csv` must be NULL or a valid NUL-terminated string.
struct DynembedEmbeddings *dynembed_embeddings_open(const char *embeddings_csv);

// Number of embedded graphs; 0 for NULL.
//
// # Safety
// `handle` must be NULL or a pointer from [`dynembed_embeddings_open`].
size_t dynembed_embeddings_count(const struct DynembedEmbeddings *handle);

// Embedding dimension; 0 for NULL.
//
// # Safety
// `handle` must be NULL or a pointer from [`dynembed_embeddings_open`].
size_t dynembed_embeddings_dim(const struct DynembedEmbeddings *handle);

// Graph id of row `index` as a borrowed pointer, valid until the handle is
// freed. NULL when out of range.
//
// # Safety
// `handle` must be NULL or a pointer from [`dynembed_embeddings_open`].
const char *dynembed_embeddings_graph_id(const struct DynembedEmbeddings *handle, size_t index);

// Copy row `index` into `out` (capacity `cap` doubles). Fails with
// Validation when out of range or the buffer is too small.
//
// # Safety
// `handle` must be NULL or a pointer from [`dynembed_embeddings_open`];
// `out` must be NULL or point to at least `cap` writable doubles.
enum DynembedStatus dynembed_embeddings_vector(const struct DynembedEmbeddings *handle,
                                               size_t index,
                                               double *out,
                                               size_t cap);

// Free an embeddings handle; NULL is a no-op.
//
// # Safety
// `handle` must be NULL or an owned pointer from
// [`dynembed_embeddings_open`], not yet freed.
void dynembed_embeddings_free(struct DynembedEmbeddings *handle);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DYNEMBED_H */
