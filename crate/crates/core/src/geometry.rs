//! Small fixed-size vector helpers and affine simplex maps.
//!
//! Points are stored as `[f64; 3]` in both 2D and 3D; in 2D the third
//! coordinate is always zero.

pub type Point = [f64; 3];
pub type Tensor = [[f64; 3]; 3];

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn distance(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

pub fn midpoint(a: &Point, b: &Point) -> Point {
    scale(&add(a, b), 0.5)
}

pub fn centroid(points: &[Point]) -> Point {
    let mut c = [0.0; 3];
    for p in points {
        c = add(&c, p);
    }
    scale(&c, 1.0 / points.len() as f64)
}

/// Longest pairwise distance among the given vertices.
pub fn diameter(points: &[Point]) -> f64 {
    let mut h: f64 = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            h = h.max(distance(&points[i], &points[j]));
        }
    }
    h
}

/// Measure (length, area, volume) of a simplex with `points.len() - 1`
/// intrinsic dimensions, embedded in 3D.
pub fn simplex_measure(points: &[Point]) -> f64 {
    match points.len() {
        2 => distance(&points[0], &points[1]),
        3 => 0.5 * norm(&cross(&sub(&points[1], &points[0]), &sub(&points[2], &points[0]))),
        4 => {
            let a = sub(&points[1], &points[0]);
            let b = sub(&points[2], &points[0]);
            let c = sub(&points[3], &points[0]);
            dot(&a, &cross(&b, &c)).abs() / 6.0
        }
        n => panic!("simplex_measure: unsupported vertex count {n}"),
    }
}

/// Affine map `x = origin + J ξ` from the reference simplex with vertices
/// `0, e_1, .., e_d` onto a physical cell.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub dim: usize,
    pub origin: Point,
    pub jacobian: Tensor,
    pub inverse: Tensor,
    pub det: f64,
}

impl AffineMap {
    pub fn new(vertices: &[Point]) -> Self {
        let dim = vertices.len() - 1;
        let origin = vertices[0];
        let mut jacobian = [[0.0; 3]; 3];
        for c in 0..dim {
            let e = sub(&vertices[c + 1], &origin);
            for r in 0..dim {
                jacobian[r][c] = e[r];
            }
        }
        let (det, inverse) = invert(&jacobian, dim);
        Self {
            dim,
            origin,
            jacobian,
            inverse,
            det,
        }
    }

    pub fn to_physical(&self, xi: &Point) -> Point {
        let mut x = self.origin;
        for r in 0..self.dim {
            for c in 0..self.dim {
                x[r] += self.jacobian[r][c] * xi[c];
            }
        }
        x
    }

    pub fn to_reference(&self, x: &Point) -> Point {
        let d = sub(x, &self.origin);
        let mut xi = [0.0; 3];
        for r in 0..self.dim {
            for c in 0..self.dim {
                xi[r] += self.inverse[r][c] * d[c];
            }
        }
        xi
    }

    /// Maps a reference gradient to the physical one: `∇φ = J^{-T} ∇_ξ φ`.
    #[inline]
    pub fn push_gradient(&self, g: &Point) -> Point {
        let mut out = [0.0; 3];
        for r in 0..self.dim {
            for c in 0..self.dim {
                out[r] += self.inverse[c][r] * g[c];
            }
        }
        out
    }
}

fn invert(m: &Tensor, dim: usize) -> (f64, Tensor) {
    let mut inv = [[0.0; 3]; 3];
    match dim {
        1 => {
            inv[0][0] = 1.0 / m[0][0];
            (m[0][0], inv)
        }
        2 => {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            inv[0][0] = m[1][1] / det;
            inv[0][1] = -m[0][1] / det;
            inv[1][0] = -m[1][0] / det;
            inv[1][1] = m[0][0] / det;
            (det, inv)
        }
        3 => {
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            for r in 0..3 {
                for c in 0..3 {
                    // cofactor transpose
                    let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
                    let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
                    inv[r][c] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
                }
            }
            (det, inv)
        }
        _ => panic!("AffineMap: unsupported dimension {dim}"),
    }
}
