//! Binary blob and CSV helpers.
//!
//! Arrays persist as raw little-endian f64 blobs next to a JSON manifest that
//! records shapes and provenance. Layout is row-major with the slowest index
//! first, e.g. `[pair][time][dof]` for trajectory blobs. CSV output follows
//! RFC 4180 quoting.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Write a f64 slice as a little-endian binary blob.
pub fn write_f64_blob(path: &Path, data: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a little-endian f64 blob, checking the expected element count.
pub fn read_f64_blob(path: &Path, expected_len: usize) -> Result<Vec<f64>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != expected_len * 8 {
        return Err(Error::invalid(format!(
            "blob {} has {} bytes, expected {}",
            path.display(),
            bytes.len(),
            expected_len * 8
        )));
    }
    let mut out = Vec::with_capacity(expected_len);
    for chunk in bytes.chunks_exact(8) {
        out.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    Ok(out)
}

/// FNV-1a 64-bit hash, used to key derived artifacts to their source blobs.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// Hash a f64 slice through its little-endian byte representation.
pub fn hash_f64(data: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in data {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
    }
    h
}

/// Quote a CSV field per RFC 4180 when it contains a comma, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Write rows of already-formatted fields as a CSV file.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "{}",
        header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(",")
    )?;
    for row in rows {
        writeln!(
            w,
            "{}",
            row.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",")
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Format a float for CSV with full round-trip precision.
pub fn fmt_g(v: f64) -> String {
    // Shortest representation that round-trips in f64.
    let s = format!("{v}");
    if s.parse::<f64>().map(|p| p == v).unwrap_or(false) {
        s
    } else {
        format!("{v:.17e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_roundtrip() {
        let dir = std::env::temp_dir().join("odyn_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("x.f64le");
        let data = vec![1.0, -2.5, 3.25e-8, f64::MAX];
        write_f64_blob(&path, &data).unwrap();
        let back = read_f64_blob(&path, 4).unwrap();
        assert_eq!(data, back);
        assert!(read_f64_blob(&path, 5).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(fnv1a64(b"odyn"), fnv1a64(b"odyn"));
        assert_ne!(fnv1a64(b"odyn"), fnv1a64(b"odin"));
        let h1 = hash_f64(&[1.0, 2.0]);
        let h2 = hash_f64(&[1.0, 2.0]);
        let h3 = hash_f64(&[2.0, 1.0]);
        assert_eq!(h1, h2);
        assert_ne!(h1, h3);
    }

    #[test]
    fn float_format_roundtrips() {
        for v in [0.1, 1.0 / 3.0, 2.5e-300, 123456789.123456789] {
            assert_eq!(fmt_g(v).parse::<f64>().unwrap(), v);
        }
    }
}
