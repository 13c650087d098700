//! File formats for the connectome stage.
//!
//! - time-series: one CSV per subject, `T` rows by `R` columns, header
//!   optional; the file stem is the subject id.
//! - phenotype: CSV with columns `subject_id,label,site`.
//! - dynamic graph: header line `#<graph_id> nodes=<R> snapshots=<S>`, then
//!   one edge per line as `u<TAB>v<TAB>t`. UTF-8, LF line endings.

use super::{ConnectomeError, DynamicGraph, TemporalEdge, TimeSeriesMatrix};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

fn format_err(path: &Path, line: usize, msg: impl Into<String>) -> ConnectomeError {
    ConnectomeError::Format {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Read one subject's time-series CSV; the subject id is the file stem.
/// A first line containing any non-numeric field is treated as a header.
pub fn read_timeseries_csv(path: &Path) -> Result<TimeSeriesMatrix, ConnectomeError> {
    let subject_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("subject")
        .to_string();
    let reader = BufReader::new(fs::File::open(path)?);
    let mut values = Vec::new();
    let mut regions = None;
    let mut rows = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Err(_) if rows == 0 => continue, // optional header line
            Err(_) => {
                return Err(format_err(path, idx + 1, "non-numeric field"));
            }
            Ok(nums) => {
                match regions {
                    None => regions = Some(nums.len()),
                    Some(r) if r != nums.len() => {
                        return Err(format_err(
                            path,
                            idx + 1,
                            format!("expected {r} columns, found {}", nums.len()),
                        ));
                    }
                    Some(_) => {}
                }
                values.extend(nums);
                rows += 1;
            }
        }
    }
    let regions = regions.ok_or_else(|| format_err(path, 1, "no data rows"))?;
    TimeSeriesMatrix::new(subject_id, rows, regions, values)
}

pub fn write_timeseries_csv(path: &Path, ts: &TimeSeriesMatrix) -> Result<(), ConnectomeError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for t in 0..ts.time_points() {
        let row: Vec<String> = (0..ts.regions()).map(|r| ts.value(t, r).to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Label and acquisition site of one subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhenotypeRecord {
    pub label: u8,
    pub site: String,
}

/// Phenotype table keyed by subject id; ordered for deterministic output.
pub type Phenotype = BTreeMap<String, PhenotypeRecord>;

pub fn read_phenotype_csv(path: &Path) -> Result<Phenotype, ConnectomeError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((idx, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break (idx, line);
            }
            None => return Err(format_err(path, 1, "empty phenotype file")),
        }
    };
    let cols: Vec<String> = header
        .1
        .trim()
        .split(',')
        .map(|c| c.trim().to_string())
        .collect();
    let col = |name: &str| -> Result<usize, ConnectomeError> {
        cols.iter()
            .position(|c| c == name)
            .ok_or_else(|| format_err(path, header.0 + 1, format!("missing column {name}")))
    };
    let id_col = col("subject_id")?;
    let label_col = col("label")?;
    let site_col = col("site")?;
    let mut table = Phenotype::new();
    for (idx, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(format_err(
                path,
                idx + 1,
                format!("expected {} fields, found {}", cols.len(), fields.len()),
            ));
        }
        let label: u8 = fields[label_col]
            .parse()
            .ok()
            .filter(|l| *l <= 1)
            .ok_or_else(|| format_err(path, idx + 1, "label must be 0 or 1"))?;
        let prev = table.insert(
            fields[id_col].to_string(),
            PhenotypeRecord {
                label,
                site: fields[site_col].to_string(),
            },
        );
        if prev.is_some() {
            return Err(format_err(
                path,
                idx + 1,
                format!("duplicate subject_id {}", fields[id_col]),
            ));
        }
    }
    Ok(table)
}

pub fn write_phenotype_csv(path: &Path, table: &Phenotype) -> Result<(), ConnectomeError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "subject_id,label,site")?;
    for (id, rec) in table {
        writeln!(out, "{},{},{}", id, rec.label, rec.site)?;
    }
    out.flush()?;
    Ok(())
}

/// Write a dynamic graph in the tab-separated edge-list format.
pub fn write_graph(path: &Path, graph: &DynamicGraph) -> Result<(), ConnectomeError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(
        out,
        "#{} nodes={} snapshots={}",
        graph.graph_id(),
        graph.node_count(),
        graph.snapshots()
    )?;
    for e in graph.edges() {
        writeln!(out, "{}\t{}\t{}", e.u, e.v, e.t)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_graph(path: &Path) -> Result<DynamicGraph, ConnectomeError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| format_err(path, 1, "empty graph file"))?;
    let header = header?;
    let rest = header
        .strip_prefix('#')
        .ok_or_else(|| format_err(path, 1, "missing '#' header line"))?;
    let mut parts = rest.split_whitespace();
    let graph_id = parts
        .next()
        .ok_or_else(|| format_err(path, 1, "missing graph id"))?
        .to_string();
    let mut nodes = None;
    let mut snapshots = None;
    for part in parts {
        if let Some(v) = part.strip_prefix("nodes=") {
            nodes = v.parse::<usize>().ok();
        } else if let Some(v) = part.strip_prefix("snapshots=") {
            snapshots = v.parse::<usize>().ok();
        }
    }
    let nodes = nodes.ok_or_else(|| format_err(path, 1, "missing or bad nodes= field"))?;
    let snapshots =
        snapshots.ok_or_else(|| format_err(path, 1, "missing or bad snapshots= field"))?;
    let mut edges = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 3 {
            return Err(format_err(path, idx + 1, "expected u<TAB>v<TAB>t"));
        }
        let parse = |s: &str, what: &str| -> Result<u32, ConnectomeError> {
            s.parse::<u32>()
                .map_err(|_| format_err(path, idx + 1, format!("bad {what}: {s}")))
        };
        edges.push(TemporalEdge {
            u: parse(fields[0], "node index")?,
            v: parse(fields[1], "node index")?,
            t: parse(fields[2], "snapshot index")?,
        });
    }
    DynamicGraph::new(graph_id, nodes, snapshots, edges)
}

/// All `.graph` files of a directory, sorted by file name.
pub fn read_graph_dir(dir: &Path) -> Result<Vec<DynamicGraph>, ConnectomeError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "graph").unwrap_or(false))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_graph(p)).collect()
}

/// All `.csv` time-series of a directory (phenotype.csv excluded), sorted.
pub fn read_timeseries_dir(dir: &Path) -> Result<Vec<TimeSeriesMatrix>, ConnectomeError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().map(|e| e == "csv").unwrap_or(false)
                && p.file_name().map(|n| n != "phenotype.csv").unwrap_or(false)
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| read_timeseries_csv(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectome::{build_dynamic_graph, WindowSpec};
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn timeseries_roundtrip_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let ts = TimeSeriesMatrix::new("abc", 3, 2, vec![1.0, 2.5, -0.25, 4.0, 5.0, 6.0]).unwrap();
        let plain = dir.path().join("abc.csv");
        write_timeseries_csv(&plain, &ts).unwrap();
        assert_eq!(read_timeseries_csv(&plain).unwrap(), ts);

        let with_header = dir.path().join("abc2.csv");
        let mut body = String::from("roi_1,roi_2\n");
        body.push_str(&fs::read_to_string(&plain).unwrap());
        fs::write(&with_header, body).unwrap();
        let parsed = read_timeseries_csv(&with_header).unwrap();
        assert_eq!(parsed.values(), ts.values());
        assert_eq!(parsed.subject_id(), "abc2");
    }

    #[test]
    fn ragged_csv_is_rejected_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "1,2\n3,4,5\n").unwrap();
        match read_timeseries_csv(&path).unwrap_err() {
            ConnectomeError::Format { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn phenotype_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phenotype.csv");
        let mut table = Phenotype::new();
        table.insert("s1".into(), PhenotypeRecord { label: 0, site: "A".into() });
        table.insert("s2".into(), PhenotypeRecord { label: 1, site: "B".into() });
        write_phenotype_csv(&path, &table).unwrap();
        assert_eq!(read_phenotype_csv(&path).unwrap(), table);

        fs::write(&path, "subject_id,label,site\ns1,2,A\n").unwrap();
        assert!(matches!(
            read_phenotype_csv(&path),
            Err(ConnectomeError::Format { line: 2, .. })
        ));
    }

    #[test]
    fn graph_file_roundtrip_is_exact() {
        let mut rng = stream_rng(21, &[0]);
        let values: Vec<f64> = (0..50 * 8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ts = TimeSeriesMatrix::new("g1", 50, 8, values).unwrap();
        let spec = WindowSpec {
            window_length: 20,
            stride: 10,
            threshold_percentile: 80.0,
        };
        let (graph, _) = build_dynamic_graph(&ts, &spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g1.graph");
        write_graph(&path, &graph).unwrap();
        assert_eq!(read_graph(&path).unwrap(), graph);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("#g1 nodes=8 snapshots=4\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn malformed_graph_lines_name_the_offender() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.graph");
        fs::write(&path, "#g nodes=4 snapshots=2\n0\t1\t0\n0 2 1\n").unwrap();
        match read_graph(&path).unwrap_err() {
            ConnectomeError::Format { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error: {other}"),
        }
    }
}
