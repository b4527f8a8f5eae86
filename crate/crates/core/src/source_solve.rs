//! Discrete source problem `a_h(w_h, v) = b_h(f, v)` and a catalog of exact
//! solutions of the traction-plus-mass boundary problem with no volume load.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dg_assembly::{assemble_load, assemble_sipg, norm_terms, MaterialParams, PenaltyParams, VectorField};
use crate::fe_basis::DgSpace;
use crate::geometry::{Point, Tensor};
use crate::sparse::{norm2, BlockCholesky, CsrMatrix};
use crate::{Error, Result};

/// Closed-form displacements with `div σ(w) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ManufacturedCase {
    /// `w = e₁`
    RigidTranslation,
    /// `w = (−y, x)`, 2D only.
    RigidRotation,
    /// `w = x`
    LinearDilation,
    /// `w = (∂ψ/∂y, −∂ψ/∂x)` with `ψ = Re((x + iy)^m)`, 2D only.
    HarmonicPair(u32),
    /// `w = (∂φ/∂y, −∂φ/∂x, 0)` with `φ = x² − y²`, 3D only.
    CurlHarmonic,
}

impl ManufacturedCase {
    pub fn name(&self) -> String {
        match self {
            Self::RigidTranslation => "RIGID_TRANSLATION".into(),
            Self::RigidRotation => "RIGID_ROTATION".into(),
            Self::LinearDilation => "LINEAR_DILATION".into(),
            Self::HarmonicPair(m) => format!("HARMONIC_PAIR_{m}"),
            Self::CurlHarmonic => "CURL_HARMONIC".into(),
        }
    }

    pub fn supports(&self, dim: usize) -> bool {
        match self {
            Self::RigidTranslation | Self::LinearDilation => dim == 2 || dim == 3,
            Self::RigidRotation | Self::HarmonicPair(_) => dim == 2,
            Self::CurlHarmonic => dim == 3,
        }
    }
}

impl fmt::Display for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ManufacturedCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        Ok(match up.as_str() {
            "RIGID_TRANSLATION" => Self::RigidTranslation,
            "RIGID_ROTATION" => Self::RigidRotation,
            "LINEAR_DILATION" => Self::LinearDilation,
            "HARMONIC_PAIR_3" => Self::HarmonicPair(3),
            "HARMONIC_PAIR_4" => Self::HarmonicPair(4),
            "CURL_HARMONIC" => Self::CurlHarmonic,
            _ => return Err(Error::Config(format!("unknown manufactured case '{s}'"))),
        })
    }
}

impl TryFrom<String> for ManufacturedCase {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ManufacturedCase> for String {
    fn from(c: ManufacturedCase) -> String {
        c.name()
    }
}

/// An exact solution bound to a dimension and material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub case: ManufacturedCase,
    pub dim: usize,
    pub mat: MaterialParams,
}

pub fn manufactured(case: ManufacturedCase, dim: usize, mat: MaterialParams) -> Result<ManufacturedSolution> {
    if !case.supports(dim) {
        return Err(Error::UnknownCase { case: case.name(), dim });
    }
    Ok(ManufacturedSolution { case, dim, mat })
}

/// `m z^{m−1}` and `m (m−1) z^{m−2}` as `(re, im)` pairs.
fn power_derivatives(m: u32, x: f64, y: f64) -> ((f64, f64), (f64, f64)) {
    let pow = |k: u32| -> (f64, f64) {
        let (mut re, mut im) = (1.0, 0.0);
        for _ in 0..k {
            (re, im) = (re * x - im * y, re * y + im * x);
        }
        (re, im)
    };
    let m_f = m as f64;
    let (a, b) = pow(m - 1);
    let (c, d) = if m >= 2 { pow(m - 2) } else { (0.0, 0.0) };
    ((m_f * a, m_f * b), (m_f * (m_f - 1.0) * c, m_f * (m_f - 1.0) * d))
}

impl ManufacturedSolution {
    /// Polynomial degree of `w`; every catalog entry is polynomial.
    pub fn polynomial_degree(&self) -> usize {
        match self.case {
            ManufacturedCase::RigidTranslation => 0,
            ManufacturedCase::RigidRotation | ManufacturedCase::LinearDilation | ManufacturedCase::CurlHarmonic => 1,
            ManufacturedCase::HarmonicPair(m) => m as usize - 1,
        }
    }

    pub fn divergence_free(&self) -> bool {
        !matches!(self.case, ManufacturedCase::LinearDilation)
    }

    pub fn divergence(&self, x: &Point) -> f64 {
        let g = self.gradient(x);
        (0..self.dim).map(|i| g[i][i]).sum()
    }

    /// `σ(w) = 2μ ε(w) + λ (div w) I`
    pub fn stress(&self, x: &Point) -> Tensor {
        let g = self.gradient(x);
        let div = self.divergence(x);
        let mut s = [[0.0; 3]; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                s[i][j] = self.mat.mu * (g[i][j] + g[j][i]);
            }
            s[i][i] += self.mat.lambda * div;
        }
        s
    }

    /// `f = σ(w) n + w`
    pub fn boundary_datum(&self, x: &Point, n: &Point) -> Point {
        let s = self.stress(x);
        let w = self.value(x);
        let mut f = [0.0; 3];
        for i in 0..self.dim {
            f[i] = w[i] + (0..self.dim).map(|j| s[i][j] * n[j]).sum::<f64>();
        }
        f
    }
}

impl VectorField for ManufacturedSolution {
    fn value(&self, x: &Point) -> Point {
        match self.case {
            ManufacturedCase::RigidTranslation => [1.0, 0.0, 0.0],
            ManufacturedCase::RigidRotation => [-x[1], x[0], 0.0],
            ManufacturedCase::LinearDilation => {
                let mut w = *x;
                if self.dim == 2 {
                    w[2] = 0.0;
                }
                w
            }
            ManufacturedCase::HarmonicPair(m) => {
                let ((p, q), _) = power_derivatives(m, x[0], x[1]);
                [-q, -p, 0.0]
            }
            ManufacturedCase::CurlHarmonic => [-2.0 * x[1], -2.0 * x[0], 0.0],
        }
    }

    fn gradient(&self, x: &Point) -> Tensor {
        let mut g = [[0.0; 3]; 3];
        match self.case {
            ManufacturedCase::RigidTranslation => {}
            ManufacturedCase::RigidRotation => {
                g[0][1] = -1.0;
                g[1][0] = 1.0;
            }
            ManufacturedCase::LinearDilation => {
                for (i, row) in g.iter_mut().enumerate().take(self.dim) {
                    row[i] = 1.0;
                }
            }
            ManufacturedCase::HarmonicPair(m) => {
                // With m z^{m−1} = P + iQ and its derivative p + iq, the
                // Cauchy–Riemann equations give ∇P = (p, −q), ∇Q = (q, p).
                let (_, (p, q)) = power_derivatives(m, x[0], x[1]);
                g[0] = [-q, -p, 0.0];
                g[1] = [-p, q, 0.0];
            }
            ManufacturedCase::CurlHarmonic => {
                g[0][1] = -2.0;
                g[1][0] = -2.0;
            }
        }
        g
    }
}

/// `(‖w − w_h‖_dG, ‖w − w_h‖_h, ‖w − w_h‖_{0,∂Ω})`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub dg: f64,
    pub energy: f64,
    pub boundary: f64,
}

pub fn error_norms(
    space: &DgSpace,
    w_h: &[f64],
    exact: &dyn VectorField,
    mat: &MaterialParams,
    pen: &PenaltyParams,
) -> ErrorNorms {
    let t = norm_terms(space, w_h, Some(exact), pen);
    ErrorNorms {
        dg: t.dg_squared(mat).sqrt(),
        energy: t.energy_squared(mat).sqrt(),
        boundary: t.boundary.sqrt(),
    }
}

/// Solves `A w_h = r` with `r` the load of the boundary datum `f(x, n)`.
pub fn solve_source(
    space: &DgSpace,
    mat: &MaterialParams,
    pen: &PenaltyParams,
    f: impl Fn(&Point, &Point) -> Point,
) -> Result<Vec<f64>> {
    let a = assemble_sipg(space, mat, pen);
    let r = assemble_load(space, f);
    let chol = BlockCholesky::factor(&a)?;
    Ok(solve_refined(&a, &chol, &r))
}

/// Direct solve followed by a few steps of iterative refinement.
pub fn solve_refined(a: &CsrMatrix, chol: &BlockCholesky, r: &[f64]) -> Vec<f64> {
    let r_norm = norm2(r);
    let mut x = chol.solve(r);
    if r_norm == 0.0 {
        return x;
    }
    let mut best = relative_residual(a, &x, r);
    for _ in 0..3 {
        if best <= 1e-12 {
            break;
        }
        let ax = a.matvec(&x);
        let res: Vec<f64> = r.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let dx = chol.solve(&res);
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(p, q)| p + q).collect();
        let rel = relative_residual(a, &candidate, r);
        if rel >= best {
            break;
        }
        x = candidate;
        best = rel;
    }
    x
}

/// `‖A x − r‖₂ / ‖r‖₂`
pub fn relative_residual(a: &CsrMatrix, x: &[f64], r: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let res: Vec<f64> = r.iter().zip(&ax).map(|(p, q)| p - q).collect();
    norm2(&res) / norm2(r)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mesh::{generate, Domain};

    fn unit() -> MaterialParams {
        MaterialParams::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn dilation_datum_on_right_edge() {
        let w = manufactured(ManufacturedCase::LinearDilation, 2, unit()).unwrap();
        let f = w.boundary_datum(&[1.0, 0.5, 0.0], &[1.0, 0.0, 0.0]);
        assert_eq!(f, [5.0, 0.5, 0.0]);
    }

    #[test]
    fn translation_datum_is_the_field() {
        let w = manufactured(ManufacturedCase::RigidTranslation, 2, unit()).unwrap();
        for n in [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0]] {
            assert_eq!(w.boundary_datum(&[0.3, 0.0, 0.0], &n), w.value(&[0.3, 0.0, 0.0]));
        }
    }

    #[test]
    fn harmonic_pair_is_divergence_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in [3, 4] {
            let w = manufactured(ManufacturedCase::HarmonicPair(m), 2, unit()).unwrap();
            for _ in 0..20 {
                let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0];
                assert!(w.divergence(&x).abs() <= 1e-12);
            }
        }
        // m = 3: ψ = x³ − 3xy², w = (−6xy, 3y² − 3x²)
        let w = manufactured(ManufacturedCase::HarmonicPair(3), 2, unit()).unwrap();
        let v = w.value(&[0.5, 2.0, 0.0]);
        assert!((v[0] + 6.0).abs() < 1e-14 && (v[1] - (12.0 - 0.75)).abs() < 1e-14);
    }

    fn fd_gradient(w: &ManufacturedSolution, x: &Point) -> Tensor {
        let h = 1e-6;
        let mut g = [[0.0; 3]; 3];
        for j in 0..w.dim {
            let mut xp = *x;
            let mut xm = *x;
            xp[j] += h;
            xm[j] -= h;
            let (p, m) = (w.value(&xp), w.value(&xm));
            for i in 0..w.dim {
                g[i][j] = (p[i] - m[i]) / (2.0 * h);
            }
        }
        g
    }

    #[test]
    fn catalog_gradients_and_equilibrium() {
        let mat = MaterialParams::new(1.3, 4.0).unwrap();
        let cases = [
            (ManufacturedCase::RigidTranslation, 2),
            (ManufacturedCase::RigidRotation, 2),
            (ManufacturedCase::LinearDilation, 2),
            (ManufacturedCase::HarmonicPair(3), 2),
            (ManufacturedCase::HarmonicPair(4), 2),
            (ManufacturedCase::RigidTranslation, 3),
            (ManufacturedCase::LinearDilation, 3),
            (ManufacturedCase::CurlHarmonic, 3),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (case, dim) in cases {
            let w = manufactured(case, dim, mat).unwrap();
            for _ in 0..10 {
                let mut x = [0.0; 3];
                for xi in x.iter_mut().take(dim) {
                    *xi = rng.random_range(-1.0..1.0);
                }
                let g = w.gradient(&x);
                let fd = fd_gradient(&w, &x);
                for i in 0..dim {
                    for j in 0..dim {
                        assert!((g[i][j] - fd[i][j]).abs() <= 1e-6, "{case} ∇w");
                    }
                }
                // div σ by central differences of the exact stress
                let h = 1e-4;
                for i in 0..dim {
                    let mut div = 0.0;
                    for j in 0..dim {
                        let mut xp = x;
                        let mut xm = x;
                        xp[j] += h;
                        xm[j] -= h;
                        div += (w.stress(&xp)[i][j] - w.stress(&xm)[i][j]) / (2.0 * h);
                    }
                    assert!(div.abs() <= 1e-6, "{case}: div σ = {div}");
                }
            }
            assert_eq!(w.divergence_free(), case != ManufacturedCase::LinearDilation);
        }
    }

    #[test]
    fn unsupported_dimension_is_rejected() {
        assert!(matches!(
            manufactured(ManufacturedCase::HarmonicPair(3), 3, unit()),
            Err(Error::UnknownCase { .. })
        ));
        assert!(manufactured(ManufacturedCase::CurlHarmonic, 2, unit()).is_err());
        assert!("NOPE".parse::<ManufacturedCase>().is_err());
        assert_eq!("harmonic_pair_4".parse::<ManufacturedCase>().unwrap(), ManufacturedCase::HarmonicPair(4));
    }

    #[test]
    fn zero_datum_gives_zero_solution() {
        let mesh = generate(Domain::Square, 1);
        let space = DgSpace::new(&mesh, 2).unwrap();
        let w = solve_source(&space, &unit(), &PenaltyParams::default(), |_, _| [0.0; 3]).unwrap();
        assert!(w.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn translation_is_reproduced() {
        let mesh = generate(Domain::Square, 2);
        let mat = unit();
        let pen = PenaltyParams::default();
        for k in 1..=3 {
            let space = DgSpace::new(&mesh, k).unwrap();
            let w = manufactured(ManufacturedCase::RigidTranslation, 2, mat).unwrap();
            let wh = solve_source(&space, &mat, &pen, |x, n| w.boundary_datum(x, n)).unwrap();
            assert!(error_norms(&space, &wh, &w, &mat, &pen).dg <= 1e-9);
        }
    }

    #[test]
    fn dilation_is_reproduced_at_every_lambda() {
        let pen = PenaltyParams::default();
        let mesh = generate(Domain::Square, 2);
        for k in 1..=2 {
            let space = DgSpace::new(&mesh, k).unwrap();
            for lambda in [1.0, 1e3, 1e6] {
                let mat = MaterialParams::new(1.0, lambda).unwrap();
                let w = manufactured(ManufacturedCase::LinearDilation, 2, mat).unwrap();
                let wh = solve_source(&space, &mat, &pen, |x, n| w.boundary_datum(x, n)).unwrap();
                let e = error_norms(&space, &wh, &w, &mat, &pen);
                let scale = crate::dg_assembly::dg_norm(&space, &space.interpolate(|x| w.value(x)), &mat, &pen);
                assert!(e.dg <= 1e-8 * scale, "k={k} λ={lambda}: {} vs {scale}", e.dg);
            }
        }
    }

    #[test]
    fn interpolant_error_and_zero_field() {
        let mesh = generate(Domain::Square, 1);
        let space = DgSpace::new(&mesh, 2).unwrap();
        let mat = unit();
        let pen = PenaltyParams::default();
        let w = manufactured(ManufacturedCase::HarmonicPair(3), 2, mat).unwrap();
        let e = error_norms(&space, &space.interpolate(|x| w.value(x)), &w, &mat, &pen);
        assert!(e.dg <= 1e-9 && e.energy <= 1e-9 && e.boundary <= 1e-9);
        let t = manufactured(ManufacturedCase::RigidTranslation, 2, mat).unwrap();
        let e = error_norms(&space, &vec![0.0; space.n_dofs()], &t, &mat, &pen);
        assert!((e.boundary - 2.0).abs() < 1e-12);
    }

    #[test]
    fn galerkin_residual_is_small() {
        let mesh = generate(Domain::LShape, 1);
        let space = DgSpace::new(&mesh, 2).unwrap();
        let mat = unit();
        let pen = PenaltyParams::default();
        let w = manufactured(ManufacturedCase::HarmonicPair(4), 2, mat).unwrap();
        let a = assemble_sipg(&space, &mat, &pen);
        let r = assemble_load(&space, |x, n| w.boundary_datum(x, n));
        let chol = BlockCholesky::factor(&a).unwrap();
        let wh = solve_refined(&a, &chol, &r);
        assert!(relative_residual(&a, &wh, &r) <= 1e-10);
    }

    /// The error of a divergence-free field stays bounded as `λ → ∞` and
    /// saturates; it is not the same as at `λ = 1`, where the discrete
    /// solution need not be divergence-free.
    #[test]
    fn divergence_free_error_saturates_in_lambda() {
        let mesh = generate(Domain::Square, 3);
        let space = DgSpace::new(&mesh, 1).unwrap();
        let pen = PenaltyParams::default();
        let e_dg = |lambda: f64| {
            let mat = MaterialParams::new(1.0, lambda).unwrap();
            let w = manufactured(ManufacturedCase::HarmonicPair(3), 2, mat).unwrap();
            let wh = solve_source(&space, &mat, &pen, |x, n| w.boundary_datum(x, n)).unwrap();
            error_norms(&space, &wh, &w, &mat, &pen).dg
        };
        let (e1, e3, e6) = (e_dg(1.0), e_dg(1e3), e_dg(1e6));
        assert!((e6 - e3).abs() <= 0.01 * e3, "{e3} vs {e6}");
        assert!(e6 / e1 < 3.0 && e1 / e6 < 3.0, "{e1} vs {e6}");
    }
}
