//! Block sparse Cholesky factorization `P A Pᵀ = L Lᵀ`.
//!
//! The matrix is viewed as a graph of dense `bs × bs` blocks (one per DG
//! cell, or one per node for conforming spaces). A minimum-degree ordering
//! on that graph is computed together with the symbolic factorization: when
//! a block is eliminated its remaining neighbours are exactly the nonzero
//! row blocks of its column in `L`. The numeric phase is right-looking with
//! dense block kernels.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;

use super::CsrMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct BlockCholesky {
    n: usize,
    bs: usize,
    /// `perm[new] = old` block index.
    perm: Vec<usize>,
    /// Lower-triangular diagonal factor blocks, row-major.
    diag: Vec<Vec<f64>>,
    /// Row blocks (new numbering, ascending, all greater than the column).
    rows: Vec<Vec<usize>>,
    /// Off-diagonal blocks of each column, concatenated in `rows` order.
    blocks: Vec<Vec<f64>>,
}

impl BlockCholesky {
    /// Factors a symmetric positive definite matrix using its block size.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let bs = a.block_size();
        let n = a.n_rows();
        assert_eq!(n, a.n_cols(), "Cholesky needs a square matrix");
        assert_eq!(n % bs, 0);
        let nb = n / bs;

        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); nb];
        for r in 0..n {
            let br = r / bs;
            for (c, _) in a.row(r) {
                let bc = c / bs;
                if bc != br {
                    adjacency[br].push(bc);
                }
            }
        }
        for adj in adjacency.iter_mut() {
            adj.sort_unstable();
            adj.dedup();
        }
        // Symmetrize the pattern in case of explicit zeros on one side only.
        let mut sym = adjacency.clone();
        for (i, adj) in adjacency.iter().enumerate() {
            for &j in adj {
                if sym[j].binary_search(&i).is_err() {
                    let pos = sym[j].binary_search(&i).unwrap_err();
                    sym[j].insert(pos, i);
                }
            }
        }

        let (perm, old_patterns) = minimum_degree(sym);
        let mut inverse = vec![0; nb];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nb];
        for (old, pattern) in old_patterns.into_iter().enumerate() {
            let mut r: Vec<usize> = pattern.into_iter().map(|o| inverse[o]).collect();
            r.sort_unstable();
            rows[inverse[old]] = r;
        }

        let mut diag = vec![vec![0.0; bs * bs]; nb];
        let mut blocks: Vec<Vec<f64>> = rows.iter().map(|r| vec![0.0; r.len() * bs * bs]).collect();
        for r in 0..n {
            let bi = inverse[r / bs];
            let lr = r % bs;
            for (c, v) in a.row(r) {
                let bj = inverse[c / bs];
                let lc = c % bs;
                if bi == bj {
                    diag[bi][lr * bs + lc] = v;
                } else if bi > bj {
                    let pos = rows[bj].binary_search(&bi).expect("symbolic pattern covers A");
                    blocks[bj][pos * bs * bs + lr * bs + lc] = v;
                }
            }
        }

        let mut factor = Self {
            n,
            bs,
            perm,
            diag,
            rows,
            blocks,
        };
        factor.numeric()?;
        Ok(factor)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of `L` (diagonal blocks counted in full).
    pub fn factor_entries(&self) -> usize {
        self.diag.len() * self.bs * self.bs + self.blocks.iter().map(|b| b.len()).sum::<usize>()
    }

    fn numeric(&mut self) -> Result<()> {
        let bs = self.bs;
        let bb = bs * bs;
        let nb = self.diag.len();
        for j in 0..nb {
            dense_cholesky(&mut self.diag[j], bs).map_err(|_| Error::FactorizationFailed { block: self.perm[j] })?;

            let mut col = std::mem::take(&mut self.blocks[j]);
            let ljj = &self.diag[j];
            for block in col.chunks_mut(bb) {
                solve_right_lower_transpose(block, ljj, bs);
            }

            let rows_j = std::mem::take(&mut self.rows[j]);
            let m = rows_j.len() * bs;
            if m > 0 {
                // Schur update: block column b of C Cᵀ, with C stacking the
                // off-diagonal blocks, is one product per target column.
                let c = DMatrix::from_fn(m, bs, |r, k| col[(r / bs) * bb + (r % bs) * bs + k]);
                for (b, &k) in rows_j.iter().enumerate() {
                    let u = c.rows(b * bs, m - b * bs) * c.rows(b * bs, bs).transpose();
                    let target = &mut self.diag[k];
                    for r in 0..bs {
                        for q in 0..bs {
                            target[r * bs + q] -= u[(r, q)];
                        }
                    }
                    // rows of column j after k form a subset of the pattern of column k
                    let target_rows = &self.rows[k];
                    let target = &mut self.blocks[k];
                    let mut pos = 0;
                    for (a, &i) in rows_j.iter().enumerate().skip(b + 1) {
                        while target_rows[pos] != i {
                            pos += 1;
                        }
                        let t = &mut target[pos * bb..(pos + 1) * bb];
                        let off = (a - b) * bs;
                        for r in 0..bs {
                            for q in 0..bs {
                                t[r * bs + q] -= u[(off + r, q)];
                            }
                        }
                    }
                }
            }
            self.rows[j] = rows_j;
            self.blocks[j] = col;
        }
        Ok(())
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let bs = self.bs;
        let bb = bs * bs;
        let nb = self.diag.len();
        let mut y = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            y[new * bs..(new + 1) * bs].copy_from_slice(&b[old * bs..(old + 1) * bs]);
        }
        // L z = y
        for j in 0..nb {
            let (head, tail) = y.split_at_mut((j + 1) * bs);
            let yj = &mut head[j * bs..];
            forward_lower(&self.diag[j], yj, bs);
            for (a, &i) in self.rows[j].iter().enumerate() {
                let block = &self.blocks[j][a * bb..(a + 1) * bb];
                let yi = &mut tail[(i - j - 1) * bs..(i - j) * bs];
                for r in 0..bs {
                    let row = &block[r * bs..(r + 1) * bs];
                    yi[r] -= row.iter().zip(yj.iter()).map(|(l, v)| l * v).sum::<f64>();
                }
            }
        }
        // Lᵀ x = z
        for j in (0..nb).rev() {
            let (head, tail) = y.split_at_mut((j + 1) * bs);
            let yj = &mut head[j * bs..];
            for (a, &i) in self.rows[j].iter().enumerate() {
                let block = &self.blocks[j][a * bb..(a + 1) * bb];
                let yi = &tail[(i - j - 1) * bs..(i - j) * bs];
                for r in 0..bs {
                    let yr = yi[r];
                    for (c, v) in yj.iter_mut().enumerate() {
                        *v -= block[r * bs + c] * yr;
                    }
                }
            }
            backward_lower_transpose(&self.diag[j], yj, bs);
        }
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old * bs..(old + 1) * bs].copy_from_slice(&y[new * bs..(new + 1) * bs]);
        }
        x
    }
}

/// Minimum-degree elimination on an explicit elimination graph. Returns the
/// order (`perm[new] = old`) and, per old node, its neighbours at the time of
/// elimination.
fn minimum_degree(mut adj: Vec<Vec<usize>>) -> (Vec<usize>, Vec<Vec<usize>>) {
    let n = adj.len();
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut order = Vec::with_capacity(n);
    let mut patterns = vec![Vec::new(); n];
    let mut merged = Vec::new();
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let nbrs = std::mem::take(&mut adj[v]);
        for &u in &nbrs {
            merged.clear();
            let (mut p, mut q) = (0, 0);
            let au = &adj[u];
            while p < au.len() || q < nbrs.len() {
                let next = match (au.get(p), nbrs.get(q)) {
                    (Some(&x), Some(&y)) if x < y => {
                        p += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if x > y => {
                        q += 1;
                        y
                    }
                    (Some(&x), Some(_)) => {
                        p += 1;
                        q += 1;
                        x
                    }
                    (Some(&x), None) => {
                        p += 1;
                        x
                    }
                    (None, Some(&y)) => {
                        q += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if next != v && next != u {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
            heap.push(Reverse((adj[u].len(), u)));
        }
        patterns[v] = nbrs;
    }
    (order, patterns)
}

/// In-place lower Cholesky of a row-major dense block; the strict upper
/// triangle is zeroed.
fn dense_cholesky(a: &mut [f64], n: usize) -> std::result::Result<(), ()> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(());
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for c in j + 1..n {
            a[j * n + c] = 0.0;
        }
    }
    Ok(())
}

/// `X ← X L⁻ᵀ` for each row of `X`.
fn solve_right_lower_transpose(x: &mut [f64], l: &[f64], n: usize) {
    for row in x.chunks_mut(n) {
        for c in 0..n {
            let mut s = row[c];
            for m in 0..c {
                s -= row[m] * l[c * n + m];
            }
            row[c] = s / l[c * n + c];
        }
    }
}

fn forward_lower(l: &[f64], y: &mut [f64], n: usize) {
    for r in 0..n {
        let mut s = y[r];
        for c in 0..r {
            s -= l[r * n + c] * y[c];
        }
        y[r] = s / l[r * n + r];
    }
}

fn backward_lower_transpose(l: &[f64], y: &mut [f64], n: usize) {
    for r in (0..n).rev() {
        let mut s = y[r];
        for c in r + 1..n {
            s -= l[c * n + r] * y[c];
        }
        y[r] = s / l[r * n + r];
    }
}
