//! Versioned binary checkpoint: encoder config, vocabulary, graph ids, and
//! every tensor (encoder plus both heads). Round-trips are bit-exact.
//!
//! Layout: 8-byte magic, u64 little-endian JSON-header length, the JSON
//! header, then all tensors as raw little-endian f64 in canonical order.

use super::{Heads, TrainError};
use crate::encoder::{EncoderConfig, EncoderState, Vocabulary};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"DYNEMB01";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub state: EncoderState,
    pub heads: Heads,
    pub graph_ids: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    encoder: EncoderConfig,
    regions: usize,
    graph_ids: Vec<String>,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), TrainError> {
    let header = Header {
        encoder: ckpt.state.config,
        regions: ckpt.state.vocab.regions(),
        graph_ids: ckpt.graph_ids.clone(),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| TrainError::Checkpoint(format!("header encode: {e}")))?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    out.write_all(&header_bytes)?;
    for tensor in ckpt.state.tensors().into_iter().chain(ckpt.heads.tensors()) {
        for v in tensor {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, TrainError> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(TrainError::Checkpoint(format!(
            "bad magic {:?} in {}",
            magic,
            path.display()
        )));
    }
    let mut len_bytes = [0u8; 8];
    reader.read_exact(&mut len_bytes)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    reader.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| TrainError::Checkpoint(format!("header decode: {e}")))?;
    header.encoder.validate()?;

    let vocab = Vocabulary::new(header.regions);
    // Build zero-shaped state/heads, then fill tensors in canonical order.
    let mut state = zeroed_state(header.encoder, vocab);
    let mut heads = Heads::zeros(
        header.encoder.dim,
        vocab.size(),
        header.graph_ids.len(),
    );
    {
        let mut tensors = state.tensors_mut();
        tensors.extend(heads.tensors_mut());
        let mut buf = [0u8; 8];
        for tensor in &mut tensors {
            for v in tensor.iter_mut() {
                reader.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
        }
        let mut trailing = [0u8; 1];
        if reader.read(&mut trailing)? != 0 {
            return Err(TrainError::Checkpoint("trailing bytes after tensors".into()));
        }
    }
    Ok(Checkpoint {
        state,
        heads,
        graph_ids: header.graph_ids,
    })
}

fn zeroed_state(config: EncoderConfig, vocab: Vocabulary) -> EncoderState {
    use crate::encoder::LayerParams;
    use crate::linalg::Mat;
    EncoderState {
        config,
        vocab,
        embedding: Mat::zeros(vocab.size(), config.dim),
        layers: (0..config.layers).map(|_| LayerParams::zeros(&config)).collect(),
    }
}
