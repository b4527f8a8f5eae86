//! Compressed sparse row storage, block assembly, and a block sparse
//! Cholesky factorization for symmetric positive definite systems.

mod cholesky;

pub use cholesky::BlockCholesky;

use std::collections::BTreeMap;
use std::io::{self, Write};

use nalgebra::DMatrix;

/// General compressed sparse row matrix.
///
/// `block_size` records the dense block granularity the matrix was assembled
/// with; the Cholesky factorization eliminates whole blocks at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    block_size: usize,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n_rows];
        for &(r, c, v) in triplets {
            *rows[r].entry(c).or_insert(0.0) += v;
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
            block_size: 1,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != 0.0 {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &t)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Same matrix tagged with a different block granularity.
    pub fn with_block_size(mut self, block_size: usize) -> Self {
        assert_eq!(self.n_rows % block_size, 0);
        self.block_size = block_size;
        self
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

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().cloned().zip(self.values[range].iter().cloned())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n_rows {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = s;
        }
    }

    /// `M x` with compensated products and sums (accurate as if computed in
    /// twice the working precision), together with `|M| |x|`.
    pub fn matvec_accurate(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut y = vec![0.0; self.n_rows];
        let mut abs = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            let mut s = 0.0;
            let mut c = 0.0;
            let mut a = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.values[k];
                let xv = x[self.col_idx[k]];
                let p = v * xv;
                let (t, e) = two_sum(s, p);
                c += v.mul_add(xv, -p) + e;
                s = t;
                a += (v * xv).abs();
            }
            y[r] = s + c;
            abs[r] = a;
        }
        (y, abs)
    }

    /// `xᵀ M y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let my = self.matvec(y);
        x.iter().zip(&my).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |M_ij - M_ji|`
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Entrywise `alpha * self + beta * other`; both must share dimensions.
    pub fn linear_combination(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(col_idx.capacity());
        row_ptr.push(0);
        // rows are sorted by column: merge them
        for r in 0..self.n_rows {
            let mut p = self.row(r).peekable();
            let mut q = other.row(r).peekable();
            loop {
                let (c, v) = match (p.peek(), q.peek()) {
                    (Some(&(i, x)), Some(&(j, y))) if i == j => {
                        p.next();
                        q.next();
                        (i, alpha * x + beta * y)
                    }
                    (Some(&(i, x)), Some(&(j, _))) if i < j => {
                        p.next();
                        (i, alpha * x)
                    }
                    (_, Some(&(j, y))) => {
                        q.next();
                        (j, beta * y)
                    }
                    (Some(&(i, x)), None) => {
                        p.next();
                        (i, alpha * x)
                    }
                    (None, None) => break,
                };
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
            block_size: self.block_size,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Coordinate text dump, one `i j value` line per stored entry (0-based).
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                writeln!(w, "{r} {c} {v:e}")?;
            }
        }
        Ok(())
    }
}

/// Accumulates dense `block_size × block_size` blocks at block coordinates and
/// finalizes them into a [`CsrMatrix`].
#[derive(Debug, Clone)]
pub struct BlockAssembler {
    n_blocks: usize,
    block_size: usize,
    blocks: BTreeMap<(usize, usize), Vec<f64>>,
}

impl BlockAssembler {
    pub fn new(n_blocks: usize, block_size: usize) -> Self {
        Self {
            n_blocks,
            block_size,
            blocks: BTreeMap::new(),
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Adds a row-major dense block at block position `(row, col)`.
    pub fn add_block(&mut self, row: usize, col: usize, block: &[f64]) {
        let bs = self.block_size;
        debug_assert_eq!(block.len(), bs * bs);
        let entry = self.blocks.entry((row, col)).or_insert_with(|| vec![0.0; bs * bs]);
        for (e, v) in entry.iter_mut().zip(block) {
            *e += v;
        }
    }

    /// Adds entry `(r, c)` of a block at block position `(row, col)`.
    pub fn add_entry(&mut self, row: usize, col: usize, r: usize, c: usize, value: f64) {
        let bs = self.block_size;
        let entry = self.blocks.entry((row, col)).or_insert_with(|| vec![0.0; bs * bs]);
        entry[r * bs + c] += value;
    }

    pub fn into_csr(self) -> CsrMatrix {
        let bs = self.block_size;
        let n = self.n_blocks * bs;
        let mut per_row: Vec<Vec<(usize, &Vec<f64>)>> = vec![Vec::new(); self.n_blocks];
        for ((br, bc), block) in &self.blocks {
            per_row[*br].push((*bc, block));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(self.blocks.len() * bs * bs);
        let mut values = Vec::with_capacity(self.blocks.len() * bs * bs);
        row_ptr.push(0);
        for row_blocks in &per_row {
            for r in 0..bs {
                for (bc, block) in row_blocks {
                    for c in 0..bs {
                        col_idx.push(bc * bs + c);
                        values.push(block[r * bs + c]);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr,
            col_idx,
            values,
            block_size: bs,
        }
    }
}

/// Error-free transformation `a + b = s + e`.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Compensated dot product.
pub fn dot_accurate(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for (x, y) in a.iter().zip(b) {
        let p = x * y;
        let (t, e) = two_sum(s, p);
        c += x.mul_add(*y, -p) + e;
        s = t;
    }
    s + c
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
