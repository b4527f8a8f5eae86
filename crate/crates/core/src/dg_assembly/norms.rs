//! Squared contributions to the dG norm and the energy-like norm, evaluated
//! by quadrature for a discrete field or for the error against an exact one.

use crate::fe_basis::{cell_quadrature, face_quadrature, DgSpace, MAX_DEGREE};
use crate::geometry::{Point, Tensor};

use super::{MaterialParams, PenaltyParams};

/// A smooth vector field with its gradient (`grad[i][j] = ∂w_i/∂x_j`).
pub trait VectorField {
    fn value(&self, x: &Point) -> Point;
    fn gradient(&self, x: &Point) -> Tensor;
}

/// Unweighted pieces of the norms; all are sums of squared `L²` norms.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormTerms {
    /// `Σ_K ‖ε(u)‖²`
    pub strain: f64,
    /// `Σ_K ‖div u‖²`
    pub divergence: f64,
    /// `Σ_{e interior} γ_μ/h_e ‖[[u]]‖²`
    pub jump: f64,
    /// `Σ_{e interior} γ_λ/h_e ‖[[u·n]]‖²`
    pub normal_jump: f64,
    /// `‖u‖²_{∂Ω}`
    pub boundary: f64,
    /// `Σ_{e interior} h_e ‖{ε(u)n}‖²`
    pub traction_average: f64,
    /// `Σ_{e interior} h_e ‖{div u}‖²`
    pub divergence_average: f64,
}

impl NormTerms {
    pub fn dg_squared(&self, mat: &MaterialParams) -> f64 {
        2.0 * mat.mu * (self.strain + self.jump) + mat.lambda * (self.divergence + self.normal_jump) + self.boundary
    }

    pub fn energy_squared(&self, mat: &MaterialParams) -> f64 {
        self.dg_squared(mat) + 2.0 * mat.mu * self.traction_average + mat.lambda * self.divergence_average
    }
}

pub fn dg_norm(space: &DgSpace, coeffs: &[f64], mat: &MaterialParams, pen: &PenaltyParams) -> f64 {
    norm_terms(space, coeffs, None, pen).dg_squared(mat).sqrt()
}

pub fn energy_norm(space: &DgSpace, coeffs: &[f64], mat: &MaterialParams, pen: &PenaltyParams) -> f64 {
    norm_terms(space, coeffs, None, pen).energy_squared(mat).sqrt()
}

/// Norm pieces of `u_h` (when `exact` is `None`) or of the error `w - u_h`.
///
/// The exact field is continuous, so jump terms only see `u_h`; averages and
/// cell terms use the exact gradient.
pub fn norm_terms(space: &DgSpace, coeffs: &[f64], exact: Option<&dyn VectorField>, pen: &PenaltyParams) -> NormTerms {
    let mesh = space.mesh();
    let dim = space.dim();
    let degree = (2 * space.degree() + 2).min(MAX_DEGREE);
    let cell_rule = cell_quadrature(dim, degree).expect("cell rule");
    let face_rule = face_quadrature(dim - 1, degree).expect("face rule");
    let mut t = NormTerms::default();

    let error_at = |cell: usize, x: &Point| -> (Point, Tensor) {
        let (mut u, mut g) = space.evaluate(coeffs, cell, x);
        if let Some(w) = exact {
            let wv = w.value(x);
            let wg = w.gradient(x);
            for i in 0..3 {
                u[i] = wv[i] - u[i];
                for j in 0..3 {
                    g[i][j] = wg[i][j] - g[i][j];
                }
            }
        }
        (u, g)
    };

    for cell in 0..mesh.n_cells() {
        let map = space.map(cell);
        for (xi, w) in cell_rule.points.iter().zip(&cell_rule.weights) {
            let x = map.to_physical(xi);
            let (_, g) = error_at(cell, &x);
            let w = w * map.det.abs();
            let eps = sym(&g, dim);
            t.strain += w * frob2(&eps, dim);
            t.divergence += w * trace(&g, dim).powi(2);
        }
    }

    for face in mesh.interior_faces() {
        for (x, w) in space.face_points(&face.vertices, &face_rule) {
            let (up, _) = space.evaluate(coeffs, face.plus, &x);
            let (um, _) = space.evaluate(coeffs, face.minus, &x);
            let n = &face.normal;
            let mut jump2 = 0.0;
            let mut njump = 0.0;
            for i in 0..dim {
                let j = up[i] - um[i];
                jump2 += j * j;
                njump += j * n[i];
            }
            t.jump += w * pen.gamma_mu / face.diameter * jump2;
            t.normal_jump += w * pen.gamma_lambda / face.diameter * njump * njump;

            let (_, ep) = error_at(face.plus, &x);
            let (_, em) = error_at(face.minus, &x);
            let sp = sym(&ep, dim);
            let sm = sym(&em, dim);
            let mut traction2 = 0.0;
            for i in 0..dim {
                let mut s = 0.0;
                for j in 0..dim {
                    s += 0.5 * (sp[i][j] + sm[i][j]) * n[j];
                }
                traction2 += s * s;
            }
            let avg_div = 0.5 * (trace(&ep, dim) + trace(&em, dim));
            t.traction_average += w * face.diameter * traction2;
            t.divergence_average += w * face.diameter * avg_div * avg_div;
        }
    }

    for face in mesh.boundary_faces() {
        for (x, w) in space.face_points(&face.vertices, &face_rule) {
            let (u, _) = error_at(face.cell, &x);
            t.boundary += w * (0..dim).map(|i| u[i] * u[i]).sum::<f64>();
        }
    }
    t
}

fn sym(g: &Tensor, dim: usize) -> Tensor {
    let mut e = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            e[i][j] = 0.5 * (g[i][j] + g[j][i]);
        }
    }
    e
}

fn frob2(e: &Tensor, dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            s += e[i][j] * e[i][j];
        }
    }
    s
}

fn trace(g: &Tensor, dim: usize) -> f64 {
    (0..dim).map(|i| g[i][i]).sum()
}

/// `(a_h(u,u), b_h(u,u))` evaluated by quadrature from the coefficients.
///
/// Agrees with `uᵀAu` and `uᵀBu` in exact arithmetic but avoids the rounding
/// of the assembled entries: every term is built from pointwise strains,
/// divergences and jumps of `u`, so for a (near-)rigid or divergence-free
/// field the large `λ` terms stay small instead of carrying `ε·λ` noise.
pub fn sipg_quadratic(space: &DgSpace, coeffs: &[f64], mat: &MaterialParams, pen: &PenaltyParams) -> (f64, f64) {
    let mesh = space.mesh();
    let dim = space.dim();
    let degree = 2 * space.degree();
    let cell_rule = cell_quadrature(dim, degree).expect("cell rule");
    let face_rule = face_quadrature(dim - 1, degree).expect("face rule");
    let (mut strain, mut divergence) = (0.0, 0.0);
    for cell in 0..mesh.n_cells() {
        let map = space.map(cell);
        for (xi, w) in cell_rule.points.iter().zip(&cell_rule.weights) {
            let (_, g) = space.evaluate(coeffs, cell, &map.to_physical(xi));
            let w = w * map.det.abs();
            strain += w * frob2(&sym(&g, dim), dim);
            divergence += w * trace(&g, dim).powi(2);
        }
    }
    for face in mesh.interior_faces() {
        let n = &face.normal;
        for (x, w) in space.face_points(&face.vertices, &face_rule) {
            let (up, gp) = space.evaluate(coeffs, face.plus, &x);
            let (um, gm) = space.evaluate(coeffs, face.minus, &x);
            let (sp, sm) = (sym(&gp, dim), sym(&gm, dim));
            let avg_div = 0.5 * (trace(&gp, dim) + trace(&gm, dim));
            let (mut jj, mut nj, mut flux) = (0.0, 0.0, 0.0);
            for i in 0..dim {
                let j = up[i] - um[i];
                jj += j * j;
                nj += j * n[i];
                let t: f64 = (0..dim).map(|c| 0.5 * (sp[i][c] + sm[i][c]) * n[c]).sum();
                flux += t * j;
            }
            strain += w * (pen.gamma_mu / face.diameter * jj - 2.0 * flux);
            divergence += w * (pen.gamma_lambda / face.diameter * nj * nj - 2.0 * avg_div * nj);
        }
    }
    let mut boundary = 0.0;
    for face in mesh.boundary_faces() {
        for (x, w) in space.face_points(&face.vertices, &face_rule) {
            let (u, _) = space.evaluate(coeffs, face.cell, &x);
            boundary += w * (0..dim).map(|i| u[i] * u[i]).sum::<f64>();
        }
    }
    (2.0 * mat.mu * strain + mat.lambda * divergence + boundary, boundary)
}
