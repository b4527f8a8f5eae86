//! Lagrange shape functions on the reference simplex, quadrature, and the
//! broken (fully discontinuous) vector-valued `P_k` space.

mod quadrature;

pub use quadrature::{cell_quadrature, face_quadrature, QuadratureRule, MAX_DEGREE};

use crate::geometry::{AffineMap, Point, Tensor};
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Nodal Lagrange element of degree `k` on the reference simplex with
/// vertices `0, e_1, .., e_d`.
///
/// Nodes are the lattice points `α / k` for multi-indices `|α| = k` over the
/// barycentric coordinates; basis functions use Silvester's product formula.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    dim: usize,
    degree: usize,
    multi_indices: Vec<[usize; 4]>,
    nodes: Vec<Point>,
}

/// Values and reference gradients of all basis functions at a set of points,
/// stored point-major.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub n_points: usize,
    pub n_basis: usize,
    pub values: Vec<f64>,
    pub grads: Vec<Point>,
}

impl Tabulation {
    #[inline]
    pub fn value(&self, point: usize, basis: usize) -> f64 {
        self.values[point * self.n_basis + basis]
    }

    #[inline]
    pub fn grad(&self, point: usize, basis: usize) -> &Point {
        &self.grads[point * self.n_basis + basis]
    }
}

impl ReferenceElement {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        if !(1..=3).contains(&degree) {
            return Err(Error::UnsupportedDegree(degree));
        }
        if !(2..=3).contains(&dim) {
            return Err(Error::DimensionMismatch(format!("reference element of dimension {dim}")));
        }
        let mut multi_indices = Vec::new();
        let mut nodes = Vec::new();
        let k = degree;
        for a1 in 0..=k {
            for a2 in 0..=k - a1 {
                let a3_max = if dim == 3 { k - a1 - a2 } else { 0 };
                for a3 in 0..=a3_max {
                    let a0 = k - a1 - a2 - a3;
                    multi_indices.push([a0, a1, a2, a3]);
                    nodes.push([a1 as f64 / k as f64, a2 as f64 / k as f64, a3 as f64 / k as f64]);
                }
            }
        }
        Ok(Self {
            dim,
            degree,
            multi_indices,
            nodes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `binom(k + d, d)`
    pub fn n_basis(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// Barycentric multi-index `(α_0, .., α_d)` of each node.
    pub fn multi_indices(&self) -> &[[usize; 4]] {
        &self.multi_indices
    }

    /// Evaluates all basis functions and their reference gradients at `xi`.
    pub fn eval_into(&self, xi: &Point, values: &mut [f64], grads: &mut [Point]) {
        let d = self.dim;
        let k = self.degree as f64;
        let mut bary = [0.0; 4];
        bary[0] = 1.0 - xi[..d].iter().sum::<f64>();
        bary[1..=d].copy_from_slice(&xi[..d]);

        for (b, alpha) in self.multi_indices.iter().enumerate() {
            let mut factors = [0.0; 4];
            let mut derivs = [0.0; 4];
            for i in 0..=d {
                let (p, dp) = silvester(alpha[i], k, bary[i]);
                factors[i] = p;
                derivs[i] = dp;
            }
            values[b] = factors[..=d].iter().product();
            // dφ/dλ_i
            let mut dphi = [0.0; 4];
            for i in 0..=d {
                let mut prod = derivs[i];
                for j in 0..=d {
                    if j != i {
                        prod *= factors[j];
                    }
                }
                dphi[i] = prod;
            }
            let mut g = [0.0; 3];
            for c in 0..d {
                g[c] = dphi[c + 1] - dphi[0];
            }
            grads[b] = g;
        }
    }

    pub fn tabulate(&self, points: &[Point]) -> Tabulation {
        let nb = self.n_basis();
        let mut values = vec![0.0; points.len() * nb];
        let mut grads = vec![[0.0; 3]; points.len() * nb];
        for (q, p) in points.iter().enumerate() {
            self.eval_into(p, &mut values[q * nb..(q + 1) * nb], &mut grads[q * nb..(q + 1) * nb]);
        }
        Tabulation {
            n_points: points.len(),
            n_basis: nb,
            values,
            grads,
        }
    }
}

/// `P_m(t) = Π_{j<m} (k t - j) / (j + 1)` and its derivative.
fn silvester(m: usize, k: f64, t: f64) -> (f64, f64) {
    let mut p = 1.0;
    let mut dp = 0.0;
    for j in 0..m {
        let jf = j as f64;
        let f = (k * t - jf) / (jf + 1.0);
        dp = dp * f + p * k / (jf + 1.0);
        p *= f;
    }
    (p, dp)
}

/// Broken vector-valued space `S^h = { v : v|_K ∈ P_k(K)^d }`.
///
/// Degrees of freedom are block-contiguous per cell; inside a cell they are
/// ordered component-major: `cell * dofs_per_cell + comp * n_basis + i`.
#[derive(Debug, Clone)]
pub struct DgSpace<'m> {
    mesh: &'m Mesh,
    element: ReferenceElement,
    maps: Vec<AffineMap>,
}

impl<'m> DgSpace<'m> {
    pub fn new(mesh: &'m Mesh, degree: usize) -> Result<Self> {
        let element = ReferenceElement::new(mesh.dim(), degree)?;
        let maps = (0..mesh.n_cells()).map(|k| AffineMap::new(&mesh.cell_points(k))).collect();
        Ok(Self { mesh, element, maps })
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn element(&self) -> &ReferenceElement {
        &self.element
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn n_basis(&self) -> usize {
        self.element.n_basis()
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.dim() * self.n_basis()
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_cells() * self.dofs_per_cell()
    }

    pub fn map(&self, cell: usize) -> &AffineMap {
        &self.maps[cell]
    }

    #[inline]
    pub fn dof(&self, cell: usize, comp: usize, basis: usize) -> usize {
        cell * self.dofs_per_cell() + comp * self.n_basis() + basis
    }

    /// Nodal interpolant of a vector field.
    pub fn interpolate(&self, f: impl Fn(&Point) -> Point) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.n_dofs()];
        for cell in 0..self.mesh.n_cells() {
            for (i, node) in self.element.nodes().iter().enumerate() {
                let value = f(&self.maps[cell].to_physical(node));
                for c in 0..self.dim() {
                    coeffs[self.dof(cell, c, i)] = value[c];
                }
            }
        }
        coeffs
    }

    /// Value and gradient (`grad[i][j] = ∂u_i/∂x_j`) of the discrete field
    /// with coefficients `coeffs` at physical point `x` of `cell`.
    pub fn evaluate(&self, coeffs: &[f64], cell: usize, x: &Point) -> (Point, Tensor) {
        let nb = self.n_basis();
        let map = &self.maps[cell];
        let xi = map.to_reference(x);
        let mut values = vec![0.0; nb];
        let mut grads = vec![[0.0; 3]; nb];
        self.element.eval_into(&xi, &mut values, &mut grads);
        let mut u = [0.0; 3];
        let mut grad = [[0.0; 3]; 3];
        for i in 0..nb {
            let g = map.push_gradient(&grads[i]);
            for c in 0..self.dim() {
                let coef = coeffs[self.dof(cell, c, i)];
                u[c] += coef * values[i];
                for j in 0..self.dim() {
                    grad[c][j] += coef * g[j];
                }
            }
        }
        (u, grad)
    }

    /// Physical quadrature points and weights on a face given by its vertices.
    pub fn face_points(&self, vertices: &[usize], rule: &QuadratureRule) -> Vec<(Point, f64)> {
        let pts: Vec<Point> = vertices.iter().map(|&v| self.mesh.vertices()[v]).collect();
        let measure = crate::geometry::simplex_measure(&pts);
        let ref_measure = if vertices.len() == 2 { 1.0 } else { 0.5 };
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(xi, w)| {
                let mut x = pts[0];
                for c in 1..pts.len() {
                    for r in 0..3 {
                        x[r] += xi[c - 1] * (pts[c][r] - pts[0][r]);
                    }
                }
                (x, w * measure / ref_measure)
            })
            .collect()
    }
}
