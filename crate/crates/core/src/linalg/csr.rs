use std::io::{self, Write};

use crate::error::{Error, Result};

/// Square matrix in compressed sparse row form. Columns are sorted within each row and every
/// row stores its diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if row_ptr.len() != n + 1 || row_ptr[0] != 0 || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(Error::InvalidInput("row offsets inconsistent with column array".into()));
        }
        if values.len() != col_idx.len() {
            return Err(Error::InvalidInput("value and column arrays differ in length".into()));
        }
        for i in 0..n {
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!("row {i}: columns not strictly increasing")));
            }
            if cols.iter().any(|&c| c >= n) {
                return Err(Error::InvalidInput(format!("row {i}: column out of range")));
            }
            if cols.binary_search(&i).is_err() {
                return Err(Error::InvalidInput(format!("row {i}: structural diagonal missing")));
            }
        }
        Ok(CsrMatrix { n, row_ptr, col_idx, values })
    }

    pub(crate) fn from_parts_unchecked(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert!(Self::new(n, row_ptr.clone(), col_idx.clone(), values.clone()).is_ok());
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    /// Sums duplicate entries; missing diagonals are stored as explicit zeros.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, 0.0)]).collect();
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!("entry ({i}, {j}) outside {n}×{n}")));
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::new(n, row_ptr, col_idx, values)
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Result<Self> {
        let n = a.len();
        let trip: Vec<_> = (0..n).flat_map(|i| (0..n).filter(move |&j| a[i][j] != 0.0 || i == j).map(move |j| (i, j, a[i][j]))).collect();
        Self::from_triplets(n, &trip)
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix { n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        CsrMatrix { n: self.n, row_ptr: self.row_ptr.clone(), col_idx: self.col_idx.clone(), values }
    }

    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.values[s])
    }

    pub fn diag_slots(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.slot(i, i).expect("structural diagonal")).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.diag_slots().into_iter().map(|s| self.values[s]).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_range(i) {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n {
            for k in self.row_range(i) {
                let c = self.col_idx[k];
                let dst = next[c];
                col_idx[dst] = i;
                values[dst] = self.values[k];
                next[c] += 1;
            }
        }
        CsrMatrix { n: self.n, row_ptr, col_idx, values }
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row_range(i).all(|k| self.slot(self.col_idx[k], i).is_some()))
    }

    /// Numeric symmetry within `tol` relative to the largest entry.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        (0..self.n).all(|i| {
            self.row_range(i).all(|k| {
                let j = self.col_idx[k];
                (self.values[k] - self.get(j, i)).abs() <= tol * scale
            })
        })
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for (i, row) in a.iter_mut().enumerate() {
            for k in self.row_range(i) {
                row[self.col_idx[k]] += self.values[k];
            }
        }
        a
    }

    /// Writes `row col value` per stored entry, zero-based.
    pub fn write_coo(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "# {} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            for k in self.row_range(i) {
                writeln!(w, "{} {} {:.17e}", i, self.col_idx[k], self.values[k])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_add_diagonal() {
        let m = CsrMatrix::from_triplets(3, &[(0, 1, 2.0), (0, 1, 1.0), (2, 0, -1.0)]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert!(m.slot(1, 1).is_some());
        assert_eq!(m.nnz(), 5);
    }

    #[test]
    fn transpose_twice_is_identity() {
        let m = CsrMatrix::from_triplets(4, &[(0, 3, 2.0), (1, 0, 1.5), (3, 2, -1.0), (2, 2, 4.0)]).unwrap();
        let t = m.transpose();
        assert_eq!(t.get(3, 0), 2.0);
        assert_eq!(t.transpose(), m);
    }

    #[test]
    fn missing_diagonal_rejected() {
        assert!(CsrMatrix::new(2, vec![0, 1, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn coo_dump_lists_entries() {
        let m = CsrMatrix::identity(2);
        let mut out = Vec::new();
        m.write_coo(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("1 1 1.0"));
    }
}
