//! SIPG stiffness, boundary mass, boundary load, and the dG/energy norms.
//!
//! The stiffness splits as `A = 2μ·A_μ + λ·A_λ + A_b`: `A_μ` holds the strain
//! terms with their interior-face consistency and `γ_μ` penalty terms, `A_λ`
//! the divergence terms with the `γ_λ` normal-jump penalty, and `A_b` the
//! boundary mass (equal to `B`). Boundary faces carry only the mass term.

mod conforming;
mod norms;

pub use conforming::{assemble_conforming, ConformingForms, ConformingSpace};
pub use norms::{dg_norm, energy_norm, norm_terms, sipg_quadratic, NormTerms, VectorField};

use serde::{Deserialize, Serialize};

use crate::fe_basis::{cell_quadrature, face_quadrature, DgSpace, QuadratureRule, ReferenceElement, Tabulation};
use crate::geometry::{AffineMap, Point};
use crate::sparse::{BlockAssembler, CsrMatrix};
use crate::{Error, Result};

/// Lamé parameters; the boundary density is fixed to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub mu: f64,
    pub lambda: f64,
}

impl MaterialParams {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0 && lambda > 0.0 && mu.is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("Lamé parameters must be positive (mu={mu}, lambda={lambda})")));
        }
        Ok(Self { mu, lambda })
    }
}

/// Interior penalty parameters `γ_μ`, `γ_λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub gamma_mu: f64,
    pub gamma_lambda: f64,
}

impl PenaltyParams {
    pub fn new(gamma_mu: f64, gamma_lambda: f64) -> Result<Self> {
        if !(gamma_mu > 0.0 && gamma_lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "penalties must be positive (gamma_mu={gamma_mu}, gamma_lambda={gamma_lambda})"
            )));
        }
        Ok(Self { gamma_mu, gamma_lambda })
    }

    pub fn uniform(gamma: f64) -> Result<Self> {
        Self::new(gamma, gamma)
    }
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self {
            gamma_mu: 40.0,
            gamma_lambda: 40.0,
        }
    }
}

/// Material-independent pieces of the stiffness.
#[derive(Debug, Clone)]
pub struct SipgParts {
    pub strain: CsrMatrix,
    pub dilation: CsrMatrix,
    pub boundary: CsrMatrix,
}

impl SipgParts {
    /// `2μ·A_μ + λ·A_λ + A_b`
    pub fn combine(&self, mat: &MaterialParams) -> CsrMatrix {
        self.strain
            .linear_combination(2.0 * mat.mu, &self.dilation, mat.lambda)
            .linear_combination(1.0, &self.boundary, 1.0)
    }
}

/// Stiffness `A` (from `a_h`) and boundary mass `B` (from `b_h`).
#[derive(Debug, Clone)]
pub struct FormPair {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
}

pub fn assemble_sipg_parts(space: &DgSpace, pen: &PenaltyParams) -> SipgParts {
    assemble_parts(space, pen, true)
}

pub fn assemble_sipg(space: &DgSpace, mat: &MaterialParams, pen: &PenaltyParams) -> CsrMatrix {
    assemble_sipg_parts(space, pen).combine(mat)
}

pub fn assemble_boundary_mass(space: &DgSpace) -> CsrMatrix {
    let dpc = space.dofs_per_cell();
    let mesh = space.mesh();
    let rule = face_quadrature(space.dim() - 1, 2 * space.degree() + 1).expect("face rule");
    let mut asm = BlockAssembler::new(mesh.n_cells(), dpc);
    for face in mesh.boundary_faces() {
        let block = boundary_mass_kernel(space.element(), space.map(face.cell), &space.face_points(&face.vertices, &rule));
        asm.add_block(face.cell, face.cell, &block);
    }
    asm.into_csr()
}

pub fn assemble_forms(space: &DgSpace, mat: &MaterialParams, pen: &PenaltyParams) -> FormPair {
    let parts = assemble_sipg_parts(space, pen);
    FormPair {
        a: parts.combine(mat),
        b: parts.boundary,
    }
}

/// Gram matrix of the squared dG norm: `cᵀ G c = ‖u_h‖²_dG`.
pub fn assemble_dg_gram(space: &DgSpace, mat: &MaterialParams, pen: &PenaltyParams) -> CsrMatrix {
    assemble_parts(space, pen, false).combine(mat)
}

/// Load vector `r_i = ∫_{∂Ω} f · φ_i ds` for a boundary datum `f(x, n)`.
pub fn assemble_load(space: &DgSpace, f: impl Fn(&Point, &Point) -> Point) -> Vec<f64> {
    let mesh = space.mesh();
    let nb = space.n_basis();
    let degree = (2 * space.degree() + 2).min(crate::fe_basis::MAX_DEGREE);
    let rule = face_quadrature(space.dim() - 1, degree).expect("face rule");
    let mut r = vec![0.0; space.n_dofs()];
    let mut values = vec![0.0; nb];
    let mut grads = vec![[0.0; 3]; nb];
    for face in mesh.boundary_faces() {
        let map = space.map(face.cell);
        for (x, w) in space.face_points(&face.vertices, &rule) {
            let fx = f(&x, &face.normal);
            space.element().eval_into(&map.to_reference(&x), &mut values, &mut grads);
            for c in 0..space.dim() {
                for i in 0..nb {
                    r[space.dof(face.cell, c, i)] += w * fx[c] * values[i];
                }
            }
        }
    }
    r
}

fn assemble_parts(space: &DgSpace, pen: &PenaltyParams, consistency: bool) -> SipgParts {
    let mesh = space.mesh();
    let dim = space.dim();
    let k = space.degree();
    let dpc = space.dofs_per_cell();
    let n_cells = mesh.n_cells();
    let mut strain = BlockAssembler::new(n_cells, dpc);
    let mut dilation = BlockAssembler::new(n_cells, dpc);
    let mut boundary = BlockAssembler::new(n_cells, dpc);

    let cell_rule = cell_quadrature(dim, 2 * k).expect("cell rule");
    let face_rule = face_quadrature(dim - 1, 2 * k + 1).expect("face rule");
    let tab = space.element().tabulate(&cell_rule.points);

    for cell in 0..n_cells {
        let (s, d) = cell_kernel(space.element(), &tab, &cell_rule, space.map(cell));
        strain.add_block(cell, cell, &s);
        dilation.add_block(cell, cell, &d);
    }

    for face in mesh.interior_faces() {
        let pts = space.face_points(&face.vertices, &face_rule);
        let fk = interior_face_kernel(space, face.plus, face.minus, &face.normal, face.diameter, &pts, pen, consistency);
        let cells = [face.plus, face.minus];
        for (si, &ci) in cells.iter().enumerate() {
            for (sj, &cj) in cells.iter().enumerate() {
                strain.add_block(ci, cj, &fk.sub_block(&fk.strain, si, sj));
                dilation.add_block(ci, cj, &fk.sub_block(&fk.dilation, si, sj));
            }
        }
    }

    for face in mesh.boundary_faces() {
        let block = boundary_mass_kernel(space.element(), space.map(face.cell), &space.face_points(&face.vertices, &face_rule));
        boundary.add_block(face.cell, face.cell, &block);
    }

    SipgParts {
        strain: strain.into_csr(),
        dilation: dilation.into_csr(),
        boundary: boundary.into_csr(),
    }
}

/// Cell integrals `∫ ε(u):ε(v)` and `∫ div u div v` in component-major local
/// ordering (`comp * n_basis + i`). Row = test function, column = trial.
pub(crate) fn cell_kernel(
    element: &ReferenceElement,
    tab: &Tabulation,
    rule: &QuadratureRule,
    map: &AffineMap,
) -> (Vec<f64>, Vec<f64>) {
    let dim = element.dim();
    let nb = element.n_basis();
    let n = dim * nb;
    let mut strain = vec![0.0; n * n];
    let mut div = vec![0.0; n * n];
    let mut g = vec![[0.0; 3]; nb];
    for (q, w) in rule.weights.iter().enumerate() {
        let w = w * map.det.abs();
        for i in 0..nb {
            g[i] = map.push_gradient(tab.grad(q, i));
        }
        for b in 0..dim {
            for i in 0..nb {
                let row = b * nb + i;
                for a in 0..dim {
                    for j in 0..nb {
                        let col = a * nb + j;
                        let mut s = g[i][a] * g[j][b];
                        if a == b {
                            s += g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2];
                        }
                        strain[row * n + col] += 0.5 * w * s;
                        div[row * n + col] += w * g[j][a] * g[i][b];
                    }
                }
            }
        }
    }
    (strain, div)
}

/// `∫_e u·v ds` on one side of a face.
pub(crate) fn boundary_mass_kernel(element: &ReferenceElement, map: &AffineMap, pts: &[(Point, f64)]) -> Vec<f64> {
    let dim = element.dim();
    let nb = element.n_basis();
    let n = dim * nb;
    let mut m = vec![0.0; n * n];
    let mut values = vec![0.0; nb];
    let mut grads = vec![[0.0; 3]; nb];
    for (x, w) in pts {
        element.eval_into(&map.to_reference(x), &mut values, &mut grads);
        for c in 0..dim {
            for i in 0..nb {
                for j in 0..nb {
                    m[(c * nb + i) * n + c * nb + j] += w * values[i] * values[j];
                }
            }
        }
    }
    m
}

/// Face matrices over the stacked dofs `[plus; minus]` (size `2·dpc`).
struct FaceKernel {
    dpc: usize,
    strain: Vec<f64>,
    dilation: Vec<f64>,
}

impl FaceKernel {
    fn sub_block(&self, m: &[f64], si: usize, sj: usize) -> Vec<f64> {
        let n = 2 * self.dpc;
        let mut out = Vec::with_capacity(self.dpc * self.dpc);
        for r in 0..self.dpc {
            let row = (si * self.dpc + r) * n + sj * self.dpc;
            out.extend_from_slice(&m[row..row + self.dpc]);
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
fn interior_face_kernel(
    space: &DgSpace,
    plus: usize,
    minus: usize,
    normal: &Point,
    h_e: f64,
    pts: &[(Point, f64)],
    pen: &PenaltyParams,
    consistency: bool,
) -> FaceKernel {
    let dim = space.dim();
    let nb = space.n_basis();
    let dpc = dim * nb;
    let n = 2 * dpc;
    let mut strain = vec![0.0; n * n];
    let mut dilation = vec![0.0; n * n];

    let mut values = vec![0.0; nb];
    let mut grads = vec![[0.0; 3]; nb];
    // per stacked dof: jump vector, average traction ε(φ)n, normal jump, average divergence
    let mut jump = vec![[0.0; 3]; n];
    let mut flux = vec![[0.0; 3]; n];
    let mut njump = vec![0.0; n];
    let mut adiv = vec![0.0; n];

    let c = if consistency { 1.0 } else { 0.0 };
    let pen_mu = pen.gamma_mu / h_e;
    let pen_lambda = pen.gamma_lambda / h_e;

    for (x, w) in pts {
        for (side, (cell, sign)) in [(plus, 1.0), (minus, -1.0)].into_iter().enumerate() {
            let map = space.map(cell);
            space.element().eval_into(&map.to_reference(x), &mut values, &mut grads);
            for i in 0..nb {
                let g = map.push_gradient(&grads[i]);
                let gn = g[0] * normal[0] + g[1] * normal[1] + g[2] * normal[2];
                for a in 0..dim {
                    let l = side * dpc + a * nb + i;
                    let mut jv = [0.0; 3];
                    jv[a] = sign * values[i];
                    jump[l] = jv;
                    // ½ · ε(φ e_a) n = ¼ (e_a (∇φ·n) + ∇φ n_a)
                    let mut fv = [0.0; 3];
                    for r in 0..dim {
                        fv[r] = 0.25 * g[r] * normal[a];
                    }
                    fv[a] += 0.25 * gn;
                    flux[l] = fv;
                    njump[l] = sign * values[i] * normal[a];
                    adiv[l] = 0.5 * g[a];
                }
            }
        }
        for r in 0..n {
            let jr = &jump[r];
            let fr = &flux[r];
            for col in 0..n {
                let jc = &jump[col];
                let fc = &flux[col];
                let jj = jr[0] * jc[0] + jr[1] * jc[1] + jr[2] * jc[2];
                let fj = fc[0] * jr[0] + fc[1] * jr[1] + fc[2] * jr[2] + fr[0] * jc[0] + fr[1] * jc[1] + fr[2] * jc[2];
                strain[r * n + col] += w * (pen_mu * jj - c * fj);
                dilation[r * n + col] +=
                    w * (pen_lambda * njump[r] * njump[col] - c * (adiv[col] * njump[r] + adiv[r] * njump[col]));
            }
        }
    }
    FaceKernel { dpc, strain, dilation }
}
