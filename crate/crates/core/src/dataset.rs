//! Sample containers and their CSV form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

/// Row-major `n x d` matrix of sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            data: vec![0.0; n * d],
        }
    }

    pub fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return shape_err(format!("{} values cannot fill a {n}x{d} matrix", data.len()));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return shape_err("rows have unequal lengths");
        }
        Ok(Self {
            n: rows.len(),
            d,
            data: rows.concat(),
        })
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d.max(1)).take(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for r in self.rows() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        let n = self.n as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.data)
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n: idx.len(),
            d: self.d,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Provenance of a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: Option<u64>,
    pub description: String,
}

/// Samples, optional regression responses, and (for synthetic data) which
/// rows were corrupted.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Points,
    pub responses: Option<Vec<f64>>,
    pub corrupted_mask: Option<Vec<bool>>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(points: Points) -> Result<Self> {
        let ds = Self {
            points,
            responses: None,
            corrupted_mask: None,
            meta: DatasetMeta::default(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_responses(points: Points, responses: Vec<f64>) -> Result<Self> {
        let ds = Self {
            points,
            responses: Some(responses),
            corrupted_mask: None,
            meta: DatasetMeta::default(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Points::from_rows(rows)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.nrows() == 0 || self.points.ncols() == 0 {
            return shape_err(format!(
                "dataset must have n >= 1 and d >= 1, got {}x{}",
                self.points.nrows(),
                self.points.ncols()
            ));
        }
        if let Some(y) = &self.responses {
            if y.len() != self.n() {
                return shape_err(format!("{} responses for {} points", y.len(), self.n()));
            }
        }
        if let Some(m) = &self.corrupted_mask {
            if m.len() != self.n() {
                return shape_err(format!("mask of length {} for {} points", m.len(), self.n()));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_regression(&self) -> bool {
        self.responses.is_some()
    }

    pub fn response(&self, i: usize) -> f64 {
        self.responses.as_ref().map_or(0.0, |y| y[i])
    }

    pub fn is_finite(&self) -> bool {
        self.points.is_finite() && self.responses.as_ref().is_none_or(|y| y.iter().all(|v| v.is_finite()))
    }

    pub fn corrupted_count(&self) -> usize {
        self.corrupted_mask.as_ref().map_or(0, |m| m.iter().filter(|&&b| b).count())
    }

    pub fn design(&self) -> DMatrix<f64> {
        self.points.to_matrix()
    }

    pub fn response_vector(&self) -> Option<DVector<f64>> {
        self.responses.as_ref().map(|y| DVector::from_column_slice(y))
    }

    /// Rows `idx` in order, carrying responses and mask along.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            points: self.points.select(idx),
            responses: self.responses.as_ref().map(|y| idx.iter().map(|&i| y[i]).collect()),
            corrupted_mask: self.corrupted_mask.as_ref().map(|m| idx.iter().map(|&i| m[i]).collect()),
            meta: self.meta.clone(),
        }
    }

    /// Adds `shift` to every point.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.d() {
            return shape_err("shift dimension does not match the dataset");
        }
        let mut out = self.clone();
        for i in 0..out.n() {
            for (v, s) in out.points.row_mut(i).iter_mut().zip(shift) {
                *v += s;
            }
        }
        Ok(out)
    }

    /// Sidecar path holding the corruption mask for a CSV written at `path`.
    pub fn mask_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".mask");
        PathBuf::from(s)
    }

    /// Writes one row per sample (`x0..x{d-1}` then `y` for regression) and,
    /// when a mask is present, a sidecar `<path>.mask` with one `0`/`1` per
    /// line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.d()).map(|j| format!("x{j}")).collect();
        if self.is_regression() {
            header.push("y".into());
        }
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.points.row(i).iter().map(|v| format!("{v:?}")).collect();
            if let Some(y) = &self.responses {
                rec.push(format!("{:?}", y[i]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        if let Some(mask) = &self.corrupted_mask {
            let mut f = BufWriter::new(File::create(Self::mask_path(path))?);
            for &b in mask {
                writeln!(f, "{}", u8::from(b))?;
            }
            f.flush()?;
        }
        Ok(())
    }

    /// Reads the format written by [`Dataset::write_csv`]. A trailing `y`
    /// column marks a regression dataset.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let has_y = header.iter().last() == Some("y");
        let d = header.len() - usize::from(has_y);
        let mut data = Vec::new();
        let mut y = Vec::new();
        let mut n = 0;
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != header.len() {
                return shape_err(format!("row {n} has {} fields, expected {}", rec.len(), header.len()));
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("row {n}: cannot parse {field:?}")))?;
                if has_y && j == d {
                    y.push(v);
                } else {
                    data.push(v);
                }
            }
            n += 1;
        }
        let points = Points::from_flat(n, d, data)?;
        let mut ds = if has_y {
            Self::with_responses(points, y)?
        } else {
            Self::new(points)?
        };
        let mpath = Self::mask_path(path);
        if mpath.exists() {
            let mask = BufReader::new(File::open(mpath)?)
                .lines()
                .map(|l| l.map(|s| s.trim() == "1"))
                .collect::<std::io::Result<Vec<bool>>>()?;
            ds.corrupted_mask = Some(mask);
            ds.validate()?;
        }
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_validation() {
        assert!(Dataset::new(Points::zeros(0, 3)).is_err());
        assert!(Dataset::new(Points::zeros(3, 0)).is_err());
        assert!(Dataset::with_responses(Points::zeros(3, 2), vec![1.0]).is_err());
        assert!(Points::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn csv_round_trip_with_mask() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut ds = Dataset::with_responses(
            Points::from_rows(&[vec![0.1, -2.5], vec![1e-17, 3.0]]).unwrap(),
            vec![0.3, -1.0 / 3.0],
        )
        .unwrap();
        ds.corrupted_mask = Some(vec![false, true]);
        ds.write_csv(&path).unwrap();
        let back = Dataset::read_csv(&path).unwrap();
        assert_eq!(back.points, ds.points);
        assert_eq!(back.responses, ds.responses);
        assert_eq!(back.corrupted_mask, ds.corrupted_mask);
    }
}
