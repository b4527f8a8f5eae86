//! Continuous Lagrange discretization of the shifted weak form: cell strain
//! and divergence terms plus the boundary mass, no face terms.

use std::collections::HashMap;

use crate::fe_basis::{cell_quadrature, face_quadrature, DgSpace, ReferenceElement};
use crate::geometry::{AffineMap, Point};
use crate::mesh::Mesh;
use crate::sparse::{BlockAssembler, CsrMatrix};
use crate::{Error, Result};

use super::{boundary_mass_kernel, cell_kernel, MaterialParams};

/// Globally continuous vector-valued `P_k` space. Dofs are node-interleaved:
/// `node * dim + comp`.
#[derive(Debug, Clone)]
pub struct ConformingSpace<'m> {
    mesh: &'m Mesh,
    element: ReferenceElement,
    maps: Vec<AffineMap>,
    cell_nodes: Vec<usize>,
    n_nodes: usize,
}

impl<'m> ConformingSpace<'m> {
    pub fn new(mesh: &'m Mesh, degree: usize) -> Result<Self> {
        if !(1..=2).contains(&degree) {
            return Err(Error::UnsupportedDegree(degree));
        }
        let element = ReferenceElement::new(mesh.dim(), degree)?;
        let maps = (0..mesh.n_cells()).map(|k| AffineMap::new(&mesh.cell_points(k))).collect();
        // A Lagrange node is identified by the multiset of vertices weighted
        // by its barycentric multi-index.
        let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut cell_nodes = Vec::with_capacity(mesh.n_cells() * element.n_basis());
        for k in 0..mesh.n_cells() {
            let verts = mesh.cell(k);
            for alpha in element.multi_indices() {
                let mut key = Vec::with_capacity(degree);
                for (i, &v) in verts.iter().enumerate() {
                    key.extend(std::iter::repeat_n(v, alpha[i]));
                }
                key.sort_unstable();
                let next = ids.len();
                cell_nodes.push(*ids.entry(key).or_insert(next));
            }
        }
        Ok(Self {
            mesh,
            element,
            maps,
            cell_nodes,
            n_nodes: ids.len(),
        })
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes * self.mesh.dim()
    }

    pub fn node(&self, cell: usize, basis: usize) -> usize {
        self.cell_nodes[cell * self.element.n_basis() + basis]
    }

    pub fn interpolate(&self, f: impl Fn(&Point) -> Point) -> Vec<f64> {
        let dim = self.mesh.dim();
        let mut c = vec![0.0; self.n_dofs()];
        for k in 0..self.mesh.n_cells() {
            for (i, node) in self.element.nodes().iter().enumerate() {
                let v = f(&self.maps[k].to_physical(node));
                let g = self.node(k, i);
                c[g * dim..(g + 1) * dim].copy_from_slice(&v[..dim]);
            }
        }
        c
    }

    /// Coefficients of the same function in a DG space of equal degree on
    /// the same mesh.
    pub fn to_dg(&self, coeffs: &[f64], dg: &DgSpace) -> Vec<f64> {
        assert_eq!(dg.degree(), self.degree());
        let dim = self.mesh.dim();
        let mut out = vec![0.0; dg.n_dofs()];
        for k in 0..self.mesh.n_cells() {
            for i in 0..self.element.n_basis() {
                let g = self.node(k, i);
                for c in 0..dim {
                    out[dg.dof(k, c, i)] = coeffs[g * dim + c];
                }
            }
        }
        out
    }
}

/// Conforming stiffness and boundary mass with their space.
#[derive(Debug, Clone)]
pub struct ConformingForms<'m> {
    pub space: ConformingSpace<'m>,
    pub a: CsrMatrix,
    pub b: CsrMatrix,
}

/// Assembles `a(u,v) = 2μ(ε(u),ε(v)) + λ(div u, div v) + (u,v)_{∂Ω}` and
/// `b(u,v) = (u,v)_{∂Ω}` over continuous `P_k`, `k ∈ {1, 2}`.
pub fn assemble_conforming<'m>(mesh: &'m Mesh, degree: usize, mat: &MaterialParams) -> Result<ConformingForms<'m>> {
    let space = ConformingSpace::new(mesh, degree)?;
    let dim = mesh.dim();
    let nb = space.element.n_basis();
    let n = dim * nb;
    let mut a = BlockAssembler::new(space.n_nodes, dim);
    let mut b = BlockAssembler::new(space.n_nodes, dim);

    let rule = cell_quadrature(dim, 2 * degree).expect("cell rule");
    let tab = space.element.tabulate(&rule.points);
    let scatter = |asm: &mut BlockAssembler, cell: usize, local: &[f64], scale: f64| {
        for bc in 0..dim {
            for i in 0..nb {
                let ni = space.node(cell, i);
                for ac in 0..dim {
                    for j in 0..nb {
                        let v = local[(bc * nb + i) * n + ac * nb + j];
                        if v != 0.0 {
                            asm.add_entry(ni, space.node(cell, j), bc, ac, scale * v);
                        }
                    }
                }
            }
        }
    };
    for k in 0..mesh.n_cells() {
        let (strain, div) = cell_kernel(&space.element, &tab, &rule, &space.maps[k]);
        scatter(&mut a, k, &strain, 2.0 * mat.mu);
        scatter(&mut a, k, &div, mat.lambda);
    }

    let face_rule = face_quadrature(dim - 1, 2 * degree + 1).expect("face rule");
    let dg = DgSpace::new(mesh, degree)?;
    for face in mesh.boundary_faces() {
        let pts = dg.face_points(&face.vertices, &face_rule);
        let m = boundary_mass_kernel(&space.element, &space.maps[face.cell], &pts);
        scatter(&mut a, face.cell, &m, 1.0);
        scatter(&mut b, face.cell, &m, 1.0);
    }

    Ok(ConformingForms {
        a: a.into_csr(),
        b: b.into_csr(),
        space,
    })
}
