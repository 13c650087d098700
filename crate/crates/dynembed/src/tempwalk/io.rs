//! Walks file format.
//!
//! One walk per line:
//!
//! ```text
//! graph_id<TAB>v0:t0 v1:t1 ... v_{k-1}:t_{k-1}
//! ```
//!
//! `t_i` is the timestamp of the edge leaving `v_i`; the last node carries
//! the final edge time. UTF-8, LF line endings.

use super::{TemporalWalk, WalkError};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub fn write_walks(path: &Path, walks: &[TemporalWalk]) -> Result<(), WalkError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for walk in walks {
        write_walk_line(&mut out, walk)?;
    }
    out.flush()?;
    Ok(())
}

fn write_walk_line<W: Write>(out: &mut W, walk: &TemporalWalk) -> Result<(), WalkError> {
    debug_assert_eq!(walk.times.len() + 1, walk.nodes.len());
    let mut tokens = Vec::with_capacity(walk.nodes.len());
    for (i, node) in walk.nodes.iter().enumerate() {
        let t = walk.times[i.min(walk.times.len() - 1)];
        tokens.push(format!("{node}:{t}"));
    }
    writeln!(out, "{}\t{}", walk.graph_id, tokens.join(" "))?;
    Ok(())
}

pub fn read_walks(path: &Path) -> Result<Vec<TemporalWalk>, WalkError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut walks = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        walks.push(parse_walk_line(path, idx + 1, &line)?);
    }
    Ok(walks)
}

fn parse_walk_line(path: &Path, line_no: usize, line: &str) -> Result<TemporalWalk, WalkError> {
    let err = |msg: String| WalkError::Format {
        path: path.display().to_string(),
        line: line_no,
        msg,
    };
    let (graph_id, rest) = line
        .split_once('\t')
        .ok_or_else(|| err("missing TAB between graph id and walk".into()))?;
    if graph_id.is_empty() {
        return Err(err("empty graph id".into()));
    }
    let mut nodes = Vec::new();
    let mut times = Vec::new();
    for token in rest.split(' ').filter(|t| !t.is_empty()) {
        let (v, t) = token
            .split_once(':')
            .ok_or_else(|| err(format!("token `{token}` is not v:t")))?;
        let v: u32 = v
            .parse()
            .map_err(|_| err(format!("bad node index `{v}`")))?;
        let t: u32 = t
            .parse()
            .map_err(|_| err(format!("bad timestamp `{t}`")))?;
        nodes.push(v);
        times.push(t);
    }
    if nodes.len() < 2 {
        return Err(err(format!("walk has {} node(s), need at least 2", nodes.len())));
    }
    // The final node repeats the last edge time; drop it to recover the
    // per-transition vector.
    let last = times.pop().unwrap();
    if *times.last().unwrap() != last {
        return Err(err("last node must carry the final edge time".into()));
    }
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(err("timestamps decrease along the walk".into()));
    }
    Ok(TemporalWalk {
        graph_id: graph_id.to_string(),
        nodes,
        times,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_walks() {
        let walks = vec![
            TemporalWalk {
                graph_id: "gA".into(),
                nodes: vec![0, 3, 2, 2],
                times: vec![0, 1, 1],
            },
            TemporalWalk {
                graph_id: "gB".into(),
                nodes: vec![5, 1],
                times: vec![4],
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("walks.txt");
        write_walks(&path, &walks).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "gA\t0:0 3:1 2:1 2:1\ngB\t5:4 1:4\n");
        assert_eq!(read_walks(&path).unwrap(), walks);
    }

    #[test]
    fn corrupted_lines_are_reported_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("walks.txt");
        fs::write(&path, "gA\t0:0 1:0 1:0\ngA\t0:0 oops 1:0\n").unwrap();
        match read_walks(&path).unwrap_err() {
            WalkError::Format { line, msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("oops"));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn non_monotone_times_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("walks.txt");
        fs::write(&path, "g\t0:3 1:1 2:1\n").unwrap();
        assert!(matches!(
            read_walks(&path),
            Err(WalkError::Format { line: 1, .. })
        ));
    }
}
