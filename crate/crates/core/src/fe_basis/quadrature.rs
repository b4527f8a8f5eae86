//! Quadrature on the reference segment, triangle and tetrahedron.
//!
//! Simplex rules are collapsed (conical) products of Gauss–Jacobi rules, so
//! every weight is positive and any degree can be generated. Nodes are
//! computed with the Golub–Welsch algorithm.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::geometry::Point;
use crate::{Error, Result};

/// Highest polynomial degree a rule can be requested for.
pub const MAX_DEGREE: usize = 8;

/// Points (reference coordinates) and positive weights summing to the
/// reference measure: 1 (segment), 1/2 (triangle), 1/6 (tetrahedron).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: usize,
    pub degree: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

/// Rule on the reference cell of dimension `dim` (2 or 3), exact up to `degree`.
pub fn cell_quadrature(dim: usize, degree: usize) -> Result<QuadratureRule> {
    if !(2..=3).contains(&dim) {
        return Err(Error::UnsupportedQuadrature { dim, degree });
    }
    simplex_rule(dim, degree)
}

/// Rule on the reference face of dimension `dim` (1: segment `[0,1]`,
/// 2: triangle), exact up to `degree`.
pub fn face_quadrature(dim: usize, degree: usize) -> Result<QuadratureRule> {
    if !(1..=2).contains(&dim) {
        return Err(Error::UnsupportedQuadrature { dim, degree });
    }
    simplex_rule(dim, degree)
}

fn simplex_rule(dim: usize, degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadrature { dim, degree });
    }
    let n = degree / 2 + 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            for (s, w) in gauss_jacobi_unit(n, 0) {
                points.push([s, 0.0, 0.0]);
                weights.push(w);
            }
        }
        2 => {
            // x = s, y = (1 - s) t, Jacobian (1 - s)
            let outer = gauss_jacobi_unit(n, 1);
            let inner = gauss_jacobi_unit(n, 0);
            for &(s, ws) in &outer {
                for &(t, wt) in &inner {
                    points.push([s, (1.0 - s) * t, 0.0]);
                    weights.push(ws * wt);
                }
            }
        }
        3 => {
            // x = s, y = (1 - s) t, z = (1 - s)(1 - t) u, Jacobian (1 - s)^2 (1 - t)
            let r0 = gauss_jacobi_unit(n, 2);
            let r1 = gauss_jacobi_unit(n, 1);
            let r2 = gauss_jacobi_unit(n, 0);
            for &(s, ws) in &r0 {
                for &(t, wt) in &r1 {
                    for &(u, wu) in &r2 {
                        points.push([s, (1.0 - s) * t, (1.0 - s) * (1.0 - t) * u]);
                        weights.push(ws * wt * wu);
                    }
                }
            }
        }
        _ => return Err(Error::UnsupportedQuadrature { dim, degree }),
    }
    Ok(QuadratureRule {
        dim,
        degree,
        points,
        weights,
    })
}

/// `n`-point Gauss rule for `∫_0^1 (1 - s)^alpha g(s) ds`.
fn gauss_jacobi_unit(n: usize, alpha: u32) -> Vec<(f64, f64)> {
    let a = alpha as f64;
    // Monic Jacobi recurrence with beta = 0 on [-1, 1].
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let jf = j as f64;
        jacobi[(j, j)] = if j == 0 {
            -a / (a + 2.0)
        } else {
            -a * a / ((2.0 * jf + a) * (2.0 * jf + a + 2.0))
        };
        if j > 0 {
            let s = 2.0 * jf + a;
            let b = 4.0 * jf * (jf + a) * jf * (jf + a) / (s * s * (s + 1.0) * (s - 1.0));
            jacobi[(j, j - 1)] = b.sqrt();
            jacobi[(j - 1, j)] = b.sqrt();
        }
    }
    let mu0 = 2f64.powi(alpha as i32 + 1) / (a + 1.0);
    let eig = SymmetricEigen::new(jacobi);
    let scale = 0.5f64.powi(alpha as i32 + 1);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (1.0 + x), mu0 * v0 * v0 * scale)
        })
        .collect();
    rule.sort_by(|p, q| p.0.total_cmp(&q.0));
    rule
}
