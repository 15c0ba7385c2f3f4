//! Analytic Euler-beam modes and mode-shape tables.

use ndarray::Array2;
use std::path::Path;

use crate::error::{Error, Result};

/// Mode-shape samples at spatial points.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeShapeTable {
    /// Spatial coordinates, m.
    pub points: Vec<f64>,
    /// `n_points x n_modes` mode-shape values.
    pub values: Array2<f64>,
    /// `analytic` or `discrete`.
    pub provenance: String,
}

/// Mass-normalized modes of a simply supported Euler beam:
/// `Z_k(x) = sqrt(2 / (m_r l)) sin(k pi x / l)`.
pub fn euler_beam_modes(m_r: f64, l: f64, k_max: usize, x: &[f64]) -> Result<ModeShapeTable> {
    if m_r <= 0.0 || l <= 0.0 {
        return Err(Error::invalid("euler_beam_modes requires m_r > 0 and l > 0"));
    }
    if k_max == 0 {
        return Err(Error::invalid("need at least one mode"));
    }
    for &xi in x {
        if !(0.0..=l).contains(&xi) {
            return Err(Error::invalid(format!(
                "coordinate {xi} outside beam span [0, {l}]"
            )));
        }
    }
    let amp = (2.0 / (m_r * l)).sqrt();
    let mut values = Array2::<f64>::zeros((x.len(), k_max));
    for (i, &xi) in x.iter().enumerate() {
        for k in 1..=k_max {
            values[[i, k - 1]] = amp * (k as f64 * std::f64::consts::PI * xi / l).sin();
        }
    }
    Ok(ModeShapeTable {
        points: x.to_vec(),
        values,
        provenance: "analytic".to_string(),
    })
}

impl ModeShapeTable {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_modes(&self) -> usize {
        self.values.ncols()
    }

    /// Read from CSV with columns `x, mode_1, ..., mode_n`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty mode shape table"))?;
        let n_modes = header.split(',').count().saturating_sub(1);
        if n_modes == 0 {
            return Err(Error::invalid("mode shape table needs mode columns"));
        }
        let mut points = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (li, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n_modes + 1 {
                return Err(Error::invalid(format!(
                    "mode shape row {} has {} fields, expected {}",
                    li + 2,
                    fields.len(),
                    n_modes + 1
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                let v: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad number '{s}'")))?;
                if !v.is_finite() {
                    return Err(Error::NonFinite("mode shape table".into()));
                }
                Ok(v)
            };
            points.push(parse(fields[0])?);
            rows.push(fields[1..].iter().map(|s| parse(s)).collect::<Result<_>>()?);
        }
        let mut values = Array2::<f64>::zeros((points.len(), n_modes));
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                values[[i, j]] = *v;
            }
        }
        Ok(ModeShapeTable {
            points,
            values,
            provenance: "discrete".to_string(),
        })
    }

    /// Write as CSV with columns `x, mode_1, ..., mode_n`.
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["x".to_string()];
        for k in 1..=self.n_modes() {
            header.push(format!("mode_{k}"));
        }
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let rows: Vec<Vec<String>> = (0..self.n_points())
            .map(|i| {
                let mut row = vec![crate::io::fmt_g(self.points[i])];
                for j in 0..self.n_modes() {
                    row.push(crate::io::fmt_g(self.values[[i, j]]));
                }
                row
            })
            .collect();
        crate::io::write_csv(path, &header_refs, &rows)
    }
}
