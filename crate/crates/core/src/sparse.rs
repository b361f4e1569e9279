//! Column-compressed sparse matrices and a no-pivot banded LU.
//!
//! Columns matter more than rows here: column `j` of a transition matrix is
//! the outgoing distribution of state `j`, which is what both the
//! matrix-vector product and the particle sampler walk over.

/// Square sparse matrix stored column by column.
///
/// Entries within a column keep their insertion order. Explicit zeros are
/// kept so that the structure does not depend on parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumns {
    dim: usize,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseColumns {
    /// Builds from per-column `(row, value)` lists.
    ///
    /// Panics if a row index is out of range or repeated within a column.
    pub fn from_columns(columns: Vec<Vec<(usize, f64)>>) -> Self {
        let dim = columns.len();
        let mut col_ptr = Vec::with_capacity(dim + 1);
        let mut rows = Vec::new();
        let mut vals = Vec::new();
        col_ptr.push(0);
        for (j, col) in columns.into_iter().enumerate() {
            let start = rows.len();
            for (i, v) in col {
                assert!(i < dim, "row {i} out of range in column {j}");
                assert!(
                    !rows[start..].contains(&i),
                    "row {i} repeated in column {j}"
                );
                rows.push(i);
                vals.push(v);
            }
            col_ptr.push(rows.len());
        }
        Self {
            dim,
            col_ptr,
            rows,
            vals,
        }
    }

    /// Builds from a dense row-major matrix, keeping nonzeros only.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let columns = (0..n)
            .map(|j| {
                (0..n)
                    .filter(|&i| rows[i][j] != 0.0)
                    .map(|i| (i, rows[i][j]))
                    .collect()
            })
            .collect();
        Self::from_columns(columns)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_columns((0..dim).map(|j| vec![(j, 1.0)]).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored entries, including explicit zeros.
    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.rows[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.column(j)
            .find(|&(row, _)| row == i)
            .map_or(0.0, |(_, v)| v)
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        self.column(j).map(|(_, v)| v).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |j| self.column(j).map(move |(i, v)| (i, j, v)))
    }

    /// `y = A·x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        y.fill(0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.rows[k]] += self.vals[k] * xj;
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.dim]; self.dim];
        for (i, j, v) in self.entries() {
            out[i][j] = v;
        }
        out
    }
}

/// Banded square matrix with `lower` sub- and `upper` super-diagonals.
#[derive(Debug, Clone)]
pub struct Banded {
    dim: usize,
    lower: usize,
    upper: usize,
    // row i holds columns i-lower ..= i+upper
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(dim: usize, lower: usize, upper: usize) -> Self {
        Self {
            dim,
            lower,
            upper,
            data: vec![0.0; dim * (lower + upper + 1)],
        }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.lower >= i && j <= i + self.upper);
        i * (self.lower + self.upper + 1) + (j + self.lower - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.lower < i || j > i + self.upper {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.lower >= i && j <= i + self.upper,
            "({i}, {j}) outside band"
        );
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// Solves `A·x = rhs` in place by LU without pivoting.
    ///
    /// Only sound for matrices whose elimination never needs pivoting, such as
    /// nonsingular M-matrices. Returns the index of the first pivot with
    /// magnitude `<= pivot_tol`.
    pub fn solve_in_place(mut self, rhs: &mut [f64], pivot_tol: f64) -> Result<(), usize> {
        let n = self.dim;
        assert_eq!(rhs.len(), n);
        for k in 0..n {
            let pivot = self.get(k, k);
            if pivot.abs() <= pivot_tol || !pivot.is_finite() {
                return Err(k);
            }
            let row_end = (k + self.upper).min(n - 1);
            for i in k + 1..=(k + self.lower).min(n - 1) {
                let a_ik = self.get(i, k);
                if a_ik == 0.0 {
                    continue;
                }
                let m = a_ik / pivot;
                let s = self.slot(i, k);
                self.data[s] = 0.0;
                for j in k + 1..=row_end {
                    let u = self.get(k, j);
                    if u != 0.0 {
                        // fill-in stays inside row i's band since j <= k + upper <= i + upper
                        let s = self.slot(i, j);
                        self.data[s] -= m * u;
                    }
                }
                rhs[i] -= m * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let mut acc = rhs[k];
            for j in k + 1..=(k + self.upper).min(n - 1) {
                acc -= self.get(k, j) * rhs[j];
            }
            rhs[k] = acc / self.get(k, k);
        }
        Ok(())
    }
}
