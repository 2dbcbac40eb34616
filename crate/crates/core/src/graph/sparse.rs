use ndarray::{Array2, ArrayView2};

/// Row-compressed sparse matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds from per-row entry lists. Each row is sorted by column and
    /// duplicate columns are summed in their given order.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows.iter().cloned() {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                assert!(c < cols, "column {c} out of range {cols}");
                if indices.len() > *indptr.last().unwrap() && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: rows.len(),
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        match self.indices[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// `self * rhs`.
    pub fn mul_dense(&self, rhs: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(self.cols, rhs.nrows(), "sparse-dense inner dimension");
        let mut out = Array2::zeros((self.rows, rhs.ncols()));
        for i in 0..self.rows {
            let mut dst = out.row_mut(i);
            for (j, v) in self.row(i) {
                dst.scaled_add(v, &rhs.row(j));
            }
        }
        out
    }

    /// `self^T * rhs`, without materializing the transpose.
    pub fn transpose_mul_dense(&self, rhs: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(self.rows, rhs.nrows(), "sparse-dense inner dimension");
        let mut out = Array2::zeros((self.cols, rhs.ncols()));
        for i in 0..self.rows {
            let src = rhs.row(i);
            for (j, v) in self.row(i) {
                out.row_mut(j).scaled_add(v, &src);
            }
        }
        out
    }

    /// Principal submatrix on `nodes` (in the given order).
    pub fn restrict(&self, nodes: &[usize]) -> CsrMatrix {
        let mut local = vec![usize::MAX; self.cols];
        for (k, &n) in nodes.iter().enumerate() {
            local[n] = k;
        }
        let rows = nodes
            .iter()
            .map(|&n| {
                self.row(n)
                    .filter(|&(j, _)| local[j] != usize::MAX)
                    .map(|(j, v)| (local[j], v))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(nodes.len(), rows)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| self.row(i).all(|(j, v)| (self.get(j, i) - v).abs() <= tol))
    }
}
