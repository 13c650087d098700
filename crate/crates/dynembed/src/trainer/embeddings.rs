//! Embeddings CSV: header `graph_id,e0,...,e{d-1}`, one row per graph.

use super::TrainError;
use crate::linalg::Mat;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub fn write_embeddings(path: &Path, graph_ids: &[String], emb: &Mat) -> Result<(), TrainError> {
    assert_eq!(graph_ids.len(), emb.rows());
    let mut out = BufWriter::new(fs::File::create(path)?);
    let header: Vec<String> = (0..emb.cols()).map(|j| format!("e{j}")).collect();
    writeln!(out, "graph_id,{}", header.join(","))?;
    for (i, id) in graph_ids.iter().enumerate() {
        let row: Vec<String> = emb.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{}", id, row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_embeddings(path: &Path) -> Result<(Vec<String>, Mat), TrainError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if idx == 0 || trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let id = fields
            .next()
            .ok_or_else(|| bad_line(path, idx + 1, "empty row"))?;
        let values: Result<Vec<f64>, _> = fields.map(|f| f.parse::<f64>()).collect();
        let values = values.map_err(|_| bad_line(path, idx + 1, "non-numeric field"))?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(bad_line(path, idx + 1, "inconsistent dimension"));
            }
            Some(_) => {}
        }
        ids.push(id.to_string());
        data.extend(values);
    }
    let dim = dim.ok_or_else(|| bad_line(path, 1, "no embedding rows"))?;
    if dim == 0 {
        return Err(bad_line(path, 2, "zero-dimensional embeddings"));
    }
    Ok((ids.clone(), Mat::from_vec(ids.len(), dim, data)))
}

fn bad_line(path: &Path, line: usize, msg: &str) -> TrainError {
    TrainError::Checkpoint(format!("{}:{line}: {msg}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_values_exactly() {
        let emb = Mat::from_vec(
            2,
            3,
            vec![0.1, -2.5e-7, 3.0, 1.0 / 3.0, f64::MIN_POSITIVE, -0.0],
        );
        let ids = vec!["a".to_string(), "b".to_string()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.csv");
        write_embeddings(&path, &ids, &emb).unwrap();
        let (ids2, emb2) = read_embeddings(&path).unwrap();
        assert_eq!(ids, ids2);
        // Shortest-roundtrip float formatting parses back bit-exactly.
        assert_eq!(emb.data(), emb2.data());
    }

    #[test]
    fn dimension_mismatch_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.csv");
        fs::write(&path, "graph_id,e0,e1\na,1.0,2.0\nb,3.0\n").unwrap();
        assert!(read_embeddings(&path).is_err());
    }
}
