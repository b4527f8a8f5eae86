//! Smallest finite eigenvalues of the pencil `A x = ρ B x` with `A` SPD and
//! `B` positive semidefinite.
//!
//! `A` is factored once and the iteration runs on `OP = A⁻¹B`, which is
//! self-adjoint in the `B` inner product and positive definite on its own
//! range. Eigenvalues `ν` of `OP` map to `ρ = 1/ν`; the `B`-null directions
//! (infinite `ρ`) are never in the range of `OP` and so never produced.
//!
//! The iteration is a block Krylov method with Rayleigh–Ritz extraction and
//! thick restarts: each expansion block consists of the residuals
//! `OP y − ν y` of the leading unconverged Ritz pairs.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sparse::{dot, dot_accurate, norm2, BlockCholesky, CsrMatrix};
use crate::{Error, Result};

/// Rigid-body mode identification tolerance on `|ρ - 1|`.
pub const RIGID_TOL: f64 = 1e-6;

/// Multiple of the per-pair roundoff floor tolerated on top of `tol`.
pub const ROUNDOFF_FACTOR: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRequest {
    /// Wanted pairs beyond the rigid modes.
    pub nev: usize,
    /// Expected count of `ρ = 1` pairs; they are computed in addition to `nev`.
    pub rigid_modes: usize,
    /// Bound on `‖Ax − ρBx‖₂ / ‖Ax‖₂`.
    pub tol: f64,
    /// Maximum number of block expansions.
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for SpectrumRequest {
    fn default() -> Self {
        Self {
            nev: 7,
            rigid_modes: 0,
            tol: 1e-9,
            max_iterations: 2000,
            seed: 0,
        }
    }
}

impl SpectrumRequest {
    /// `nev` Steklov pairs plus the `d(d+1)/2` rigid modes of dimension `dim`.
    pub fn for_dim(nev: usize, dim: usize) -> Self {
        Self {
            nev,
            rigid_modes: rigid_mode_count(dim),
            ..Self::default()
        }
    }

    pub fn wanted(&self) -> usize {
        self.nev + self.rigid_modes
    }
}

pub fn rigid_mode_count(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub rho: f64,
    /// `ρ − 1`
    pub omega: f64,
    /// `B`-normalized: `xᵀBx = 1`.
    pub vector: Vec<f64>,
    /// `‖Ax − ρBx‖₂ / ‖Ax‖₂`
    pub residual: f64,
}

impl EigenPair {
    /// Builds a pair from an approximate eigenvector: `B`-normalizes it and
    /// evaluates the Rayleigh quotient and residual with compensated
    /// arithmetic. Also returns the roundoff floor of the residual,
    /// `ε ‖|A||x| + ρ|B||x|‖₂ / ‖Ax‖₂`.
    fn new(a: &CsrMatrix, b: &CsrMatrix, mut x: Vec<f64>) -> (Self, f64) {
        let (bx, _) = b.matvec_accurate(&x);
        let s = dot_accurate(&x, &bx).sqrt();
        x.iter_mut().for_each(|v| *v /= s);
        let (ax, abs_ax) = a.matvec_accurate(&x);
        let (bx, abs_bx) = b.matvec_accurate(&x);
        let rho = dot_accurate(&x, &ax) / dot_accurate(&x, &bx);
        let r: Vec<f64> = ax.iter().zip(&bx).map(|(p, q)| p - rho * q).collect();
        let ax_norm = norm2(&ax);
        let scale: Vec<f64> = abs_ax.iter().zip(&abs_bx).map(|(p, q)| p + rho * q).collect();
        let floor = f64::EPSILON * norm2(&scale) / ax_norm;
        let pair = Self {
            rho,
            omega: rho - 1.0,
            residual: norm2(&r) / ax_norm,
            vector: x,
        };
        (pair, floor)
    }
}

/// Iterative solve; pairs ascending in `ρ`. At least `req.wanted()` pairs are
/// returned unless the pencil has fewer finite eigenvalues, in which case all
/// of them are.
///
/// A pair is accepted when its residual is below `req.tol` plus
/// [`ROUNDOFF_FACTOR`] times its roundoff floor: for very stiff `A`
/// (large λ) no double-precision vector reaches `1e−9` relative residual.
pub fn solve_pencil(a: &CsrMatrix, b: &CsrMatrix, req: &SpectrumRequest) -> Result<Vec<EigenPair>> {
    check_shapes(a, b)?;
    if req.nev == 0 {
        return Err(Error::InvalidParameter("nev must be at least 1".into()));
    }
    let chol = BlockCholesky::factor(a)?;
    let mut solver = Krylov::new(&chol, b, req);
    let ritz = solver.run()?;
    let checked: Vec<(EigenPair, f64)> = ritz.into_iter().map(|x| EigenPair::new(a, b, x)).collect();
    let accepted = checked
        .iter()
        .filter(|(p, floor)| p.residual <= req.tol + ROUNDOFF_FACTOR * floor)
        .count();
    if accepted < checked.len() {
        return Err(Error::NotConverged {
            iterations: req.max_iterations,
            converged: accepted,
            wanted: checked.len(),
        });
    }
    let mut pairs: Vec<EigenPair> = checked.into_iter().map(|(p, _)| p).collect();
    pairs.sort_by(|p, q| p.rho.total_cmp(&q.rho));
    Ok(pairs)
}

/// Dense reference: `A = LLᵀ`, eigenvalues `μ` of `L⁻¹BL⁻ᵀ`, `ρ = 1/μ` for
/// `μ` above roundoff. All finite pairs, ascending.
pub fn solve_pencil_dense(a: &CsrMatrix, b: &CsrMatrix) -> Result<Vec<EigenPair>> {
    check_shapes(a, b)?;
    let l = a
        .to_dense()
        .cholesky()
        .ok_or(Error::FactorizationFailed { block: 0 })?
        .l();
    let li = l.clone().try_inverse().ok_or(Error::FactorizationFailed { block: 0 })?;
    let c = &li * b.to_dense() * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mu_max = eig.eigenvalues.amax();
    let lt_inv = li.transpose();
    let mut pairs: Vec<EigenPair> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > 1e-12 * mu_max)
        .map(|i| {
            let x = &lt_inv * eig.eigenvectors.column(i);
            EigenPair::new(a, b, x.iter().copied().collect()).0
        })
        .collect();
    pairs.sort_by(|p, q| p.rho.total_cmp(&q.rho));
    Ok(pairs)
}

/// Drops the `d(d+1)/2` rigid-body pairs (`|ρ − 1| ≤ 1e−6`); fails if their
/// count differs.
pub fn filter_rigid(pairs: Vec<EigenPair>, dim: usize) -> Result<Vec<EigenPair>> {
    let expected = rigid_mode_count(dim);
    let found = pairs.iter().filter(|p| (p.rho - 1.0).abs() <= RIGID_TOL).count();
    if found != expected {
        return Err(Error::RigidModeCount { expected, found });
    }
    Ok(pairs.into_iter().filter(|p| (p.rho - 1.0).abs() > RIGID_TOL).collect())
}

fn check_shapes(a: &CsrMatrix, b: &CsrMatrix) -> Result<()> {
    let n = a.n_rows();
    if a.n_cols() != n || b.n_rows() != n || b.n_cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, B is {}x{}",
            a.n_rows(),
            a.n_cols(),
            b.n_rows(),
            b.n_cols()
        )));
    }
    Ok(())
}

struct Krylov<'a> {
    chol: &'a BlockCholesky,
    b: &'a CsrMatrix,
    n: usize,
    want: usize,
    block: usize,
    max_basis: usize,
    tol: f64,
    max_iterations: usize,
    seed: u64,
    /// `B`-orthonormal basis, its image under `B`, and under `OP`.
    v: Vec<Vec<f64>>,
    bv: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    /// Projected operator `Vᵀ B OP V`.
    h: DMatrix<f64>,
}

impl<'a> Krylov<'a> {
    fn new(chol: &'a BlockCholesky, b: &'a CsrMatrix, req: &SpectrumRequest) -> Self {
        let n = b.n_rows();
        let want = req.wanted();
        let block = (req.rigid_modes + 2).max(3);
        Self {
            chol,
            b,
            n,
            want,
            block,
            max_basis: (2 * want + 2 * block).max(want + 4 * block),
            tol: req.tol,
            max_iterations: req.max_iterations,
            seed: req.seed,
            v: Vec::new(),
            bv: Vec::new(),
            w: Vec::new(),
            h: DMatrix::zeros(0, 0),
        }
    }

    fn op(&self, x: &[f64]) -> Vec<f64> {
        self.chol.solve(&self.b.matvec(x))
    }

    /// Orthogonalizes candidates against the basis (twice) and appends the
    /// survivors. Returns how many were added.
    fn extend(&mut self, candidates: Vec<Vec<f64>>) -> usize {
        let mut added = 0;
        for mut c in candidates {
            let bc0 = self.b.matvec(&c);
            let norm0 = dot(&c, &bc0).max(0.0).sqrt();
            if norm0 == 0.0 {
                continue;
            }
            for _ in 0..2 {
                let coeffs: Vec<f64> = self.bv.iter().map(|bv| dot(bv, &c)).collect();
                for (vk, ck) in self.v.iter().zip(&coeffs) {
                    c.iter_mut().zip(vk).for_each(|(x, y)| *x -= ck * y);
                }
            }
            let bc = self.b.matvec(&c);
            let norm = dot(&c, &bc).max(0.0).sqrt();
            if norm <= 1e-10 * norm0 {
                continue;
            }
            c.iter_mut().for_each(|x| *x /= norm);
            let bc: Vec<f64> = bc.iter().map(|x| x / norm).collect();
            let wc = self.chol.solve(&bc);
            self.v.push(c);
            self.bv.push(bc);
            self.w.push(wc);
            added += 1;
        }
        if added > 0 {
            let k = self.v.len();
            let old = self.h.nrows();
            let mut h = DMatrix::zeros(k, k);
            h.view_mut((0, 0), (old, old)).copy_from(&self.h);
            for j in old..k {
                for i in 0..k {
                    let x = dot(&self.bv[i], &self.w[j]);
                    h[(i, j)] = x;
                    h[(j, i)] = x;
                }
            }
            // Symmetrize the new rows/columns against each other.
            for i in old..k {
                for j in old..i {
                    let s = 0.5 * (h[(i, j)] + h[(j, i)]);
                    h[(i, j)] = s;
                    h[(j, i)] = s;
                }
            }
            self.h = h;
        }
        added
    }

    /// Ritz values (descending `ν`) and coefficient vectors.
    fn rayleigh_ritz(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.h.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let nu = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let s = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
        (nu, s)
    }

    fn combine(basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; basis[0].len()];
        for (col, &c) in basis.iter().zip(coeffs) {
            if c != 0.0 {
                x.iter_mut().zip(col).for_each(|(a, b)| *a += c * b);
            }
        }
        x
    }

    fn restart(&mut self, s: &DMatrix<f64>, nu: &[f64], keep: usize) {
        let cols: Vec<Vec<f64>> = (0..keep).map(|j| s.column(j).iter().copied().collect()).collect();
        self.v = cols.iter().map(|c| Self::combine(&self.v, c)).collect();
        self.bv = cols.iter().map(|c| Self::combine(&self.bv, c)).collect();
        self.w = cols.iter().map(|c| Self::combine(&self.w, c)).collect();
        self.h = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&nu[..keep]));
    }

    /// Returns purified Ritz vectors `OP y / ν` of the wanted pairs.
    fn run(&mut self) -> Result<Vec<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let start: Vec<Vec<f64>> = (0..self.block.min(self.n))
            .map(|_| {
                let x: Vec<f64> = (0..self.n).map(|_| rng.random_range(-1.0..1.0)).collect();
                self.op(&x)
            })
            .collect();
        if self.extend(start) == 0 {
            return Ok(Vec::new());
        }

        let mut converged = 0;
        for _ in 0..self.max_iterations {
            let (nu, s) = self.rayleigh_ritz();
            let nu_max = nu[0];
            let finite = nu.iter().take_while(|&&x| x > 1e-12 * nu_max).count();
            let want = self.want.min(finite);

            let mut candidates = Vec::new();
            converged = 0;
            for j in 0..want {
                let coeffs: Vec<f64> = s.column(j).iter().copied().collect();
                let x = Self::combine(&self.v, &coeffs);
                let opx = Self::combine(&self.w, &coeffs);
                let r: Vec<f64> = opx.iter().zip(&x).map(|(p, q)| p - nu[j] * q).collect();
                // For x' = OP x / ν: ‖Ax' − ρBx'‖ / ‖Ax'‖ = ρ ‖B r‖ / ‖B x‖.
                let estimate = norm2(&self.b.matvec(&r)) / (nu[j] * norm2(&self.b.matvec(&x)));
                if estimate <= 0.1 * self.tol {
                    if candidates.is_empty() {
                        converged += 1;
                    }
                } else if candidates.len() < self.block {
                    candidates.push(r);
                }
            }
            if candidates.is_empty() {
                return Ok(self.vectors(&s, &nu, want));
            }

            if self.v.len() + candidates.len() > self.max_basis {
                let keep = (self.want + self.block).min(self.v.len());
                self.restart(&s, &nu, keep);
            }
            // Residuals lie in span(V, OP V), so this is a block Krylov step.
            if self.extend(candidates) == 0 {
                // Invariant subspace: every finite pair is already resolved.
                let (nu, s) = self.rayleigh_ritz();
                let finite = nu.iter().take_while(|&&x| x > 1e-12 * nu[0]).count();
                return Ok(self.vectors(&s, &nu, finite));
            }
        }
        Err(Error::NotConverged {
            iterations: self.max_iterations,
            converged,
            wanted: self.want,
        })
    }

    fn vectors(&self, s: &DMatrix<f64>, nu: &[f64], count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|j| {
                let coeffs: Vec<f64> = s.column(j).iter().copied().collect();
                let mut x = Self::combine(&self.w, &coeffs);
                x.iter_mut().for_each(|v| *v /= nu[j]);
                x
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg_assembly::{assemble_forms, MaterialParams, PenaltyParams};
    use crate::fe_basis::DgSpace;
    use crate::mesh::{generate, Domain};

    fn pair(rho: f64) -> EigenPair {
        EigenPair {
            rho,
            omega: rho - 1.0,
            vector: Vec::new(),
            residual: 0.0,
        }
    }

    #[test]
    fn two_by_two_pencil_has_one_finite_pair() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 3.0)]);
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]);
        let pairs = solve_pencil(&a, &b, &SpectrumRequest::default()).unwrap();
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].rho - 2.0).abs() < 1e-14);
        assert!(pairs[0].vector[1].abs() < 1e-14);
        let dense = solve_pencil_dense(&a, &b).unwrap();
        assert_eq!(dense.len(), 1);
        assert!((dense[0].rho - 2.0).abs() < 1e-14);
    }

    #[test]
    fn filter_rigid_examples() {
        let out = filter_rigid([1.0, 1.0, 1.0, 1.83, 2.4].map(pair).to_vec(), 2).unwrap();
        assert_eq!(out.iter().map(|p| p.rho).collect::<Vec<_>>(), vec![1.83, 2.4]);
        let out = filter_rigid([1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.2].map(pair).to_vec(), 3).unwrap();
        assert_eq!(out.len(), 1);
        assert!(matches!(
            filter_rigid([1.0, 1.0, 1.5].map(pair).to_vec(), 2),
            Err(Error::RigidModeCount { expected: 3, found: 2 })
        ));
    }

    fn forms(domain: Domain, level: usize, k: usize, lambda: f64) -> (CsrMatrix, CsrMatrix, usize) {
        let mesh = generate(domain, level);
        let space = DgSpace::new(&mesh, k).unwrap();
        let f = assemble_forms(&space, &MaterialParams::new(1.0, lambda).unwrap(), &PenaltyParams::default());
        (f.a, f.b, mesh.dim())
    }

    #[test]
    fn square_has_three_rigid_modes() {
        let (a, b, dim) = forms(Domain::Square, 2, 1, 1.0);
        let pairs = solve_pencil(&a, &b, &SpectrumRequest::for_dim(7, dim)).unwrap();
        assert!(pairs.len() >= 10);
        assert!(pairs[..3].iter().all(|p| (p.rho - 1.0).abs() <= 1e-8));
        assert!(pairs[3].rho > 1.0 + 1e-3);
        for (i, p) in pairs.iter().enumerate() {
            assert!(p.residual <= 1e-9);
            for q in &pairs[i + 1..] {
                assert!(b.bilinear(&p.vector, &q.vector).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn cube_has_six_rigid_modes() {
        let (a, b, dim) = forms(Domain::Cube, 1, 1, 1.0);
        let pairs = solve_pencil(&a, &b, &SpectrumRequest::for_dim(7, dim)).unwrap();
        assert!(pairs[..6].iter().all(|p| (p.rho - 1.0).abs() <= 1e-8));
        assert!(pairs[6].rho > 1.0 + 1e-3);
        assert_eq!(filter_rigid(pairs, 3).unwrap().len(), 7);
    }

    #[test]
    fn rigid_modes_persist_at_large_lambda() {
        let (a, b, dim) = forms(Domain::Square, 1, 2, 1e6);
        let pairs = solve_pencil(&a, &b, &SpectrumRequest::for_dim(7, dim)).unwrap();
        let rest = filter_rigid(pairs, dim).unwrap();
        assert!(rest[0].omega > 0.0);
    }

    #[test]
    fn iterative_matches_dense() {
        let (a, b, dim) = forms(Domain::Square, 1, 1, 1.0);
        let it = solve_pencil(&a, &b, &SpectrumRequest::for_dim(7, dim)).unwrap();
        let de = solve_pencil_dense(&a, &b).unwrap();
        for (p, q) in it.iter().zip(&de).take(10) {
            assert!((p.rho - q.rho).abs() <= 1e-8 * q.rho, "{} vs {}", p.rho, q.rho);
        }
    }
}
