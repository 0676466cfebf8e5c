//! Compressed sparse row matrices, just enough for the PDE problems and the
//! matrix-free pADMM solves.

use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut t = triplets.to_vec();
        if let Some(&(r, c, _)) = t.iter().find(|(r, c, _)| *r >= rows || *c >= cols) {
            return Err(invalid(format!("entry ({r}, {c}) outside {rows}x{cols}")));
        }
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        let mut m = Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        };
        m.prune();
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, v)| (i, i, *v)).collect();
        Self::from_triplets(d.len(), d.len(), &t).expect("diagonal entries are in range")
    }

    fn prune(&mut self) {
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != 0.0 {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.indptr[r]..self.indptr[r + 1];
        match self.indices[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// `(col, value)` pairs of one row, in column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[r]..self.indptr[r + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    /// `out = self * x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            let mut s = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *o = s;
        }
    }

    /// `out = self^T (self x)` in one pass over the rows.
    pub fn gram_mul_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.rows {
            let range = self.indptr[r]..self.indptr[r + 1];
            let idx = &self.indices[range.clone()];
            let val = &self.values[range];
            let s: f64 = idx.iter().zip(val).map(|(&j, &a)| a * x[j]).sum();
            if s != 0.0 {
                for (&j, &a) in idx.iter().zip(val) {
                    out[j] += a * s;
                }
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `out = self^T * y`.
    pub fn mul_transpose_vec_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, yr) in y.iter().enumerate() {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out[self.indices[k]] += self.values[k] * yr;
            }
        }
    }

    pub fn mul_transpose_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.mul_transpose_vec_into(y, &mut out);
        out
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.cols, self.rows, &t).expect("transposed entries are in range")
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    /// Squared Euclidean norm of every column.
    pub fn column_norms_sq(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (k, &c) in self.indices.iter().enumerate() {
            out[c] += self.values[k] * self.values[k];
        }
        out
    }

    /// Largest `sum_j |a_ij|` over rows, diagonal excluded.
    pub fn max_offdiag_row_sum(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).filter(|(c, _)| *c != r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Copy with the diagonal removed.
    pub fn off_diagonal(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().filter(|(r, c, _)| r != c).collect();
        Self::from_triplets(self.rows, self.cols, &t).expect("entries are in range")
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().iter().all(|(r, c, _)| r == c)
    }

    /// `max |a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .iter()
            .map(|&(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Coordinate text: header `rows cols nnz`, then one `row col value` line
    /// per stored entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v:e}")?;
        }
        Ok(())
    }

    pub fn read_coo<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse().map_err(|e| Error::Parse(format!("header {s:?}: {e}"))))
            .collect::<Result<_>>()?;
        let [rows, cols, nnz] = dims[..] else {
            return Err(Error::Parse(format!("bad header {header:?}")));
        };
        let mut t = Vec::with_capacity(nnz);
        for line in lines {
            let line = line?;
            let p: Vec<&str> = line.split_whitespace().collect();
            if p.is_empty() {
                continue;
            }
            let [r, c, v] = p[..] else {
                return Err(Error::Parse(format!("bad entry {line:?}")));
            };
            let bad = |e: &dyn std::fmt::Display| Error::Parse(format!("{line:?}: {e}"));
            t.push((
                r.parse().map_err(|e| bad(&e))?,
                c.parse().map_err(|e| bad(&e))?,
                v.parse().map_err(|e| bad(&e))?,
            ));
        }
        if t.len() != nnz {
            return Err(Error::Parse(format!("expected {nnz} entries, found {}", t.len())));
        }
        Self::from_triplets(rows, cols, &t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        CsrMatrix::from_triplets(
            2,
            3,
            &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0), (0, 0, 0.5), (1, 0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn duplicates_summed_and_zeros_dropped() {
        let m = sample();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 0), 1.5);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn products() {
        let m = sample();
        assert_eq!(m.mul_vec(&[1.0, 2.0, 3.0]), vec![7.5, -2.0]);
        assert_eq!(m.mul_transpose_vec(&[1.0, 1.0]), vec![1.5, -1.0, 2.0]);
        assert_eq!(m.transpose().mul_vec(&[1.0, 1.0]), vec![1.5, -1.0, 2.0]);
        assert_eq!(m.column_norms_sq(), vec![2.25, 1.0, 4.0]);
    }

    #[test]
    fn structure_queries() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -3.0)]).unwrap();
        assert_eq!(m.max_offdiag_row_sum(), 3.0);
        assert_eq!(m.asymmetry(), 2.0);
        assert!(!m.is_diagonal());
        assert!(m.off_diagonal().diag().iter().all(|v| *v == 0.0));
        assert!(CsrMatrix::identity(3).is_diagonal());
        assert!(CsrMatrix::from_triplets(1, 1, &[(1, 0, 1.0)]).is_err());
    }

    #[test]
    fn coo_round_trip() {
        let m = sample();
        let mut buf = Vec::new();
        m.write_coo(&mut buf).unwrap();
        assert_eq!(CsrMatrix::read_coo(buf.as_slice()).unwrap(), m);
        assert!(CsrMatrix::read_coo("2 2 1\n".as_bytes()).is_err());
    }
}
