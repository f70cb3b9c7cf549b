//! LIBSVM text loader: `label idx:val ...` with 1-based indices.

use std::path::Path;

use crate::error::{Error, Result};
use crate::glm::Sample;

/// Reads a LIBSVM file into dense samples of the given dimension;
/// unspecified indices are zero.
pub fn load_libsvm(path: &Path, dim: usize) -> Result<Vec<Sample>> {
    if dim == 0 {
        return Err(Error::invalid("dim", "must be >= 1"));
    }
    let content =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let bad = |line: usize, why: String| Error::LibsvmFormat {
        path: path.display().to_string(),
        line,
        why,
    };

    let mut samples = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label: f64 = tokens
            .next()
            .unwrap()
            .parse()
            .map_err(|_| bad(line_no, "unparseable label".into()))?;
        let mut features = vec![0.0; dim];
        for tok in tokens {
            let (idx_str, val_str) = tok
                .split_once(':')
                .ok_or_else(|| bad(line_no, format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx_str
                .parse()
                .map_err(|_| bad(line_no, format!("bad feature index {idx_str:?}")))?;
            if idx == 0 || idx > dim {
                return Err(bad(line_no, format!("feature index {idx} out of range 1..={dim}")));
            }
            let val: f64 = val_str
                .parse()
                .map_err(|_| bad(line_no, format!("bad feature value {val_str:?}")))?;
            features[idx - 1] = val;
        }
        samples.push(Sample::new(features, label));
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_sparse_lines_densely() {
        let f = write_tmp("+1 1:0.5\n-1 2:1.5 3:-2\n");
        let samples = load_libsvm(f.path(), 3).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].label, 1.0);
        assert_eq!(samples[0].features, vec![0.5, 0.0, 0.0]);
        assert_eq!(samples[1].features, vec![0.0, 1.5, -2.0]);
    }

    #[test]
    fn empty_file_gives_empty_list() {
        let f = write_tmp("");
        assert!(load_libsvm(f.path(), 4).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_index_errors_with_line_number() {
        let f = write_tmp("+1 1:0.5\n+1 9:1\n");
        match load_libsvm(f.path(), 3).unwrap_err() {
            Error::LibsvmFormat { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_pair_errors() {
        let f = write_tmp("+1 nonsense\n");
        assert!(matches!(
            load_libsvm(f.path(), 3).unwrap_err(),
            Error::LibsvmFormat { line: 1, .. }
        ));
    }
}
