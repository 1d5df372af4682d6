//! Binary PGM (P5) output for saliency heatmaps.

use std::path::Path;

use crate::error::Result;

/// Writes a [0, 1] grid as an 8-bit binary PGM, row 0 at the top.
pub fn write_pgm(path: &Path, grid: &[Vec<f64>]) -> Result<()> {
    let height = grid.len();
    let width = grid.first().map(|r| r.len()).unwrap_or(0);
    assert!(width > 0 && height > 0, "heatmap must be non-empty");
    assert!(grid.iter().all(|r| r.len() == width), "ragged heatmap rows");

    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    for row in grid {
        for &v in row {
            bytes.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_payload() {
        let f = tempfile::NamedTempFile::new().unwrap();
        write_pgm(f.path(), &[vec![0.0, 1.0], vec![0.5, 0.25]]).unwrap();
        let bytes = std::fs::read(f.path()).unwrap();
        assert!(bytes.starts_with(b"P5\n2 2\n255\n"));
        let payload = &bytes[bytes.len() - 4..];
        assert_eq!(payload, &[0u8, 255, 128, 64]);
    }

    #[test]
    fn deterministic_output() {
        let grid = vec![vec![0.1, 0.9, 0.3]];
        let a = tempfile::NamedTempFile::new().unwrap();
        let b = tempfile::NamedTempFile::new().unwrap();
        write_pgm(a.path(), &grid).unwrap();
        write_pgm(b.path(), &grid).unwrap();
        assert_eq!(std::fs::read(a.path()).unwrap(), std::fs::read(b.path()).unwrap());
    }
}
