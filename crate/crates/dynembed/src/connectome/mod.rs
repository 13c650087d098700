//! Dynamic-graph construction from per-subject time-series.
//!
//! A subject's `T × R` signal matrix is swept by a sliding window; within
//! each window all pairwise Pearson correlations are computed and the pairs
//! whose correlation strictly exceeds the window's percentile threshold
//! become the edges of that snapshot. Thresholds are signed (raw
//! correlations, not absolute values) and computed per window, so every
//! snapshot keeps a constant edge density.

mod synth;

pub mod io;

pub use synth::{generate_synthetic_corpus, ClassRegime, RegimeDescriptor, SyntheticCorpus, SyntheticSubject};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConnectomeError {
    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 points for a correlation, got {0}")]
    TooFewPoints(usize),
    #[error("non-finite value at row {row}, column {col} of subject {subject}")]
    NonFinite {
        subject: String,
        row: usize,
        col: usize,
    },
    #[error("time-series too short: {t} rows < window length {window}")]
    TooShortSeries { t: usize, window: usize },
    #[error("invalid window spec: {0}")]
    InvalidSpec(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid synthetic-corpus request: {0}")]
    InvalidSynthRequest(String),
    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-subject signal matrix: `T` time points by `R` regions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesMatrix {
    subject_id: String,
    time_points: usize,
    regions: usize,
    values: Vec<f64>,
}

impl TimeSeriesMatrix {
    pub fn new(
        subject_id: impl Into<String>,
        time_points: usize,
        regions: usize,
        values: Vec<f64>,
    ) -> Result<Self, ConnectomeError> {
        let subject_id = subject_id.into();
        if time_points == 0 || regions == 0 {
            return Err(ConnectomeError::InvalidSpec(format!(
                "empty time-series for subject {subject_id}: {time_points}x{regions}"
            )));
        }
        if values.len() != time_points * regions {
            return Err(ConnectomeError::InvalidSpec(format!(
                "subject {subject_id}: {} values do not fill {time_points}x{regions}",
                values.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(ConnectomeError::NonFinite {
                subject: subject_id,
                row: idx / regions,
                col: idx % regions,
            });
        }
        Ok(TimeSeriesMatrix {
            subject_id,
            time_points,
            regions,
            values,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn time_points(&self) -> usize {
        self.time_points
    }

    pub fn regions(&self) -> usize {
        self.regions
    }

    #[inline]
    pub fn value(&self, t: usize, r: usize) -> f64 {
        self.values[t * self.regions + r]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Sliding-window parameters plus the percentile threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window_length: usize,
    pub stride: usize,
    pub threshold_percentile: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            window_length: 50,
            stride: 5,
            threshold_percentile: 80.0,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<(), ConnectomeError> {
        if self.window_length < 2 {
            return Err(ConnectomeError::InvalidSpec(format!(
                "window length must be >= 2, got {}",
                self.window_length
            )));
        }
        if self.stride == 0 {
            return Err(ConnectomeError::InvalidSpec("stride must be >= 1".into()));
        }
        if !(self.threshold_percentile > 0.0 && self.threshold_percentile < 100.0) {
            return Err(ConnectomeError::InvalidSpec(format!(
                "threshold percentile must lie in (0, 100), got {}",
                self.threshold_percentile
            )));
        }
        Ok(())
    }

    /// Number of window positions over a series of `t` rows.
    pub fn snapshots(&self, t: usize) -> Result<usize, ConnectomeError> {
        self.validate()?;
        if t < self.window_length {
            return Err(ConnectomeError::TooShortSeries {
                t,
                window: self.window_length,
            });
        }
        Ok((t - self.window_length) / self.stride + 1)
    }
}

/// Undirected temporal edge: `u < v`, `t` is the snapshot index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TemporalEdge {
    pub u: u32,
    pub v: u32,
    pub t: u32,
}

/// Set of timestamped undirected edges over a shared node vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicGraph {
    graph_id: String,
    node_count: usize,
    snapshots: usize,
    edges: Vec<TemporalEdge>,
}

impl DynamicGraph {
    /// Validating constructor; edges are sorted by `(t, u, v)` and must be
    /// unique, self-loop free, and within range.
    pub fn new(
        graph_id: impl Into<String>,
        node_count: usize,
        snapshots: usize,
        mut edges: Vec<TemporalEdge>,
    ) -> Result<Self, ConnectomeError> {
        let graph_id = graph_id.into();
        if node_count == 0 || snapshots == 0 {
            return Err(ConnectomeError::InvalidGraph(format!(
                "graph {graph_id} has {node_count} nodes over {snapshots} snapshots"
            )));
        }
        edges.sort_unstable();
        for pair in edges.windows(2) {
            if pair[0] == pair[1] {
                return Err(ConnectomeError::InvalidGraph(format!(
                    "duplicate edge ({}, {}, {}) in graph {graph_id}",
                    pair[0].u, pair[0].v, pair[0].t
                )));
            }
        }
        for e in &edges {
            if e.u >= e.v {
                return Err(ConnectomeError::InvalidGraph(format!(
                    "edge ({}, {}) violates u < v in graph {graph_id}",
                    e.u, e.v
                )));
            }
            if e.v as usize >= node_count {
                return Err(ConnectomeError::InvalidGraph(format!(
                    "node {} out of range (R = {node_count}) in graph {graph_id}",
                    e.v
                )));
            }
            if e.t as usize >= snapshots {
                return Err(ConnectomeError::InvalidGraph(format!(
                    "snapshot {} out of range (S = {snapshots}) in graph {graph_id}",
                    e.t
                )));
            }
        }
        Ok(DynamicGraph {
            graph_id,
            node_count,
            snapshots,
            edges,
        })
    }

    pub fn graph_id(&self) -> &str {
        &self.graph_id
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    /// Edges sorted by `(t, u, v)`.
    pub fn edges(&self) -> &[TemporalEdge] {
        &self.edges
    }

    pub fn has_edge(&self, u: u32, v: u32, t: u32) -> bool {
        let (u, v) = if u < v { (u, v) } else { (v, u) };
        self.edges.binary_search(&TemporalEdge { u, v, t }).is_ok()
    }
}

/// Counters recorded while building one dynamic graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    /// Zero-variance pairs whose correlation was defined as 0.
    pub degenerate_pairs: usize,
}

/// Sample Pearson coefficient plus a degeneracy flag; a zero-variance input
/// yields `(0.0, true)` instead of NaN.
pub fn pearson_flagged(x: &[f64], y: &[f64]) -> Result<(f64, bool), ConnectomeError> {
    if x.len() != y.len() {
        return Err(ConnectomeError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(ConnectomeError::TooFewPoints(x.len()));
    }
    // One-pass co-moment accumulation (Welford style). The cross term is
    // symmetrized so pearson(x, y) == pearson(y, x) holds bit-exactly.
    let mut mean_x = 0.0;
    let mut mean_y = 0.0;
    let mut m2x = 0.0;
    let mut m2y = 0.0;
    let mut cxy = 0.0;
    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        let n = (i + 1) as f64;
        let dx = a - mean_x;
        mean_x += dx / n;
        let dx_new = a - mean_x;
        let dy = b - mean_y;
        mean_y += dy / n;
        let dy_new = b - mean_y;
        m2x += dx * dx_new;
        m2y += dy * dy_new;
        cxy += 0.5 * (dx * dy_new + dy * dx_new);
    }
    if m2x <= 0.0 || m2y <= 0.0 {
        return Ok((0.0, true));
    }
    let r = cxy / (m2x.sqrt() * m2y.sqrt());
    Ok((r.clamp(-1.0, 1.0), false))
}

/// Sample Pearson coefficient in `[-1, 1]`; zero-variance inputs map to 0.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, ConnectomeError> {
    pearson_flagged(x, y).map(|(r, _)| r)
}

/// Linear-interpolation quantile of pre-sorted values, `p` in (0, 100).
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let m = sorted.len();
    let h = (m - 1) as f64 * (p / 100.0);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= m {
        sorted[m - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Convert one subject's time-series into a dynamic graph.
///
/// For each window position the full set of `R·(R−1)/2` pairwise
/// correlations is computed over the window's rows; the window's threshold
/// is the `threshold_percentile` quantile of those raw values, and an edge
/// `(u, v, t)` is emitted iff its correlation strictly exceeds it.
pub fn build_dynamic_graph(
    ts: &TimeSeriesMatrix,
    spec: &WindowSpec,
) -> Result<(DynamicGraph, BuildStats), ConnectomeError> {
    let snapshots = spec.snapshots(ts.time_points())?;
    let r = ts.regions();
    if r < 2 {
        return Err(ConnectomeError::InvalidSpec(format!(
            "need at least 2 regions to form edges, got {r}"
        )));
    }

    // Region-major copy so each window reads contiguous slices.
    let mut by_region = vec![0.0; r * ts.time_points()];
    for t in 0..ts.time_points() {
        for reg in 0..r {
            by_region[reg * ts.time_points() + t] = ts.value(t, reg);
        }
    }
    let series = |reg: usize, start: usize, len: usize| -> &[f64] {
        &by_region[reg * ts.time_points() + start..reg * ts.time_points() + start + len]
    };

    let mut edges = Vec::new();
    let mut stats = BuildStats::default();
    let mut corrs = Vec::with_capacity(r * (r - 1) / 2);
    for w in 0..snapshots {
        let start = w * spec.stride;
        corrs.clear();
        for u in 0..r {
            for v in (u + 1)..r {
                let (c, degenerate) = pearson_flagged(
                    series(u, start, spec.window_length),
                    series(v, start, spec.window_length),
                )?;
                if degenerate {
                    stats.degenerate_pairs += 1;
                }
                corrs.push((u as u32, v as u32, c));
            }
        }
        let mut sorted: Vec<f64> = corrs.iter().map(|&(_, _, c)| c).collect();
        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("correlations are finite"));
        let threshold = percentile_sorted(&sorted, spec.threshold_percentile);
        for &(u, v, c) in &corrs {
            if c > threshold {
                edges.push(TemporalEdge { u, v, t: w as u32 });
            }
        }
    }

    let graph = DynamicGraph::new(ts.subject_id(), r, snapshots, edges)?;
    Ok((graph, stats))
}
