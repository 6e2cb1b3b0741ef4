//! Packed column-major storage for upper-triangular matrices.
//!
//! Column `j` holds rows `0..=j` contiguously, so the column recursion of the
//! accumulation kernel only ever touches contiguous memory.

#[derive(Clone, Debug, PartialEq)]
pub struct UpperTriangular {
    n: usize,
    data: Vec<f64>,
}

#[inline]
fn column_offset(j: usize) -> usize {
    j * (j + 1) / 2
}

impl UpperTriangular {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; column_offset(n)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entry `(i, j)`; zero below the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "index ({i}, {j}) out of bounds for n = {}", self.n);
        if i > j {
            0.0
        } else {
            self.data[column_offset(j) + i]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i <= j && j < self.n, "({i}, {j}) is not an upper-triangular index for n = {}", self.n);
        self.data[column_offset(j) + i] = value;
    }

    /// Rows `0..=j` of column `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        let start = column_offset(j);
        &self.data[start..start + j + 1]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        let start = column_offset(j);
        &mut self.data[start..start + j + 1]
    }

    /// Splits storage into columns `0..j` (read-only) and column `j` (mutable).
    pub(crate) fn split_at_column(&mut self, j: usize) -> (&[f64], &mut [f64]) {
        let start = column_offset(j);
        let (head, tail) = self.data.split_at_mut(start);
        (head, &mut tail[..j + 1])
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.column(j).iter().sum()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for j in 0..self.n {
            for (s, v) in sums.iter_mut().zip(self.column(j)) {
                *s += v;
            }
        }
        sums
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }
}

/// Read-only view of column `k` inside the head slice returned by `split_at_column`.
#[inline]
pub(crate) fn head_column(head: &[f64], k: usize) -> &[f64] {
    let start = column_offset(k);
    &head[start..start + k + 1]
}
