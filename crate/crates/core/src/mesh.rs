//! Simplicial meshes of the four test domains, uniform red refinement and
//! face topology (interior/boundary faces with normals and diameters).

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{self, Point};
use crate::Error;

/// One of the four test domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// `(0,1)^2`
    Square,
    /// Unit disk centred at the origin, approximated by straight-sided triangles.
    Disk,
    /// `(-1,1)^2 \ [0,1)^2`
    #[serde(rename = "lshape")]
    LShape,
    /// `(0,1)^3`
    Cube,
}

impl Domain {
    pub const ALL: [Domain; 4] = [Domain::Square, Domain::Disk, Domain::LShape, Domain::Cube];

    pub fn dim(self) -> usize {
        match self {
            Domain::Cube => 3,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Square => "square",
            Domain::Disk => "disk",
            Domain::LShape => "lshape",
            Domain::Cube => "cube",
        }
    }

    /// Exact boundary measure of the (polygonal) domain; `None` for the disk,
    /// whose discrete boundary only approaches `2π`.
    pub fn boundary_measure(self) -> Option<f64> {
        match self {
            Domain::Square => Some(4.0),
            Domain::LShape => Some(8.0),
            Domain::Cube => Some(6.0),
            Domain::Disk => None,
        }
    }

    pub fn measure(self) -> Option<f64> {
        match self {
            Domain::Square | Domain::Cube => Some(1.0),
            Domain::LShape => Some(3.0),
            Domain::Disk => None,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "square" => Ok(Domain::Square),
            "disk" => Ok(Domain::Disk),
            "lshape" | "l-shape" => Ok(Domain::LShape),
            "cube" => Ok(Domain::Cube),
            other => Err(Error::Config(format!("unknown domain '{other}'"))),
        }
    }
}

/// A face shared by two cells. The normal points from `plus` to `minus` and
/// `plus < minus`.
#[derive(Debug, Clone)]
pub struct InteriorFace {
    pub plus: usize,
    pub plus_local: usize,
    pub minus: usize,
    pub minus_local: usize,
    pub vertices: Vec<usize>,
    pub normal: Point,
    pub diameter: f64,
    pub measure: f64,
}

/// A face on `∂Ω` with the outward unit normal.
#[derive(Debug, Clone)]
pub struct BoundaryFace {
    pub cell: usize,
    pub local: usize,
    pub vertices: Vec<usize>,
    pub normal: Point,
    pub diameter: f64,
    pub measure: f64,
}

/// Conforming simplicial mesh. Local face `i` of a cell is the face opposite
/// its local vertex `i`.
#[derive(Debug, Clone)]
pub struct Mesh {
    domain: Domain,
    dim: usize,
    level: usize,
    vertices: Vec<Point>,
    cells: Vec<usize>,
    pub(crate) interior_faces: Vec<InteriorFace>,
    pub(crate) boundary_faces: Vec<BoundaryFace>,
    cell_diameters: Vec<f64>,
}

/// Base mesh of `domain` refined `level` times.
pub fn generate(domain: Domain, level: usize) -> Mesh {
    let mut mesh = base_mesh(domain);
    for _ in 0..level {
        mesh = refine(&mesh);
    }
    mesh
}

fn base_mesh(domain: Domain) -> Mesh {
    let p2 = |x: f64, y: f64| [x, y, 0.0];
    let (vertices, cells): (Vec<Point>, Vec<usize>) = match domain {
        Domain::Square => (
            vec![p2(0.0, 0.0), p2(1.0, 0.0), p2(1.0, 1.0), p2(0.0, 1.0)],
            vec![0, 1, 2, 0, 2, 3],
        ),
        Domain::LShape => (
            vec![
                p2(-1.0, -1.0),
                p2(0.0, -1.0),
                p2(1.0, -1.0),
                p2(-1.0, 0.0),
                p2(0.0, 0.0),
                p2(1.0, 0.0),
                p2(-1.0, 1.0),
                p2(0.0, 1.0),
            ],
            vec![
                0, 1, 4, 0, 4, 3, // [-1,0]x[-1,0]
                1, 2, 5, 1, 5, 4, // [0,1]x[-1,0]
                3, 4, 7, 3, 7, 6, // [-1,0]x[0,1]
            ],
        ),
        Domain::Disk => {
            let mut v = vec![p2(0.0, 0.0)];
            for i in 0..6 {
                let t = std::f64::consts::PI * i as f64 / 3.0;
                v.push(p2(t.cos(), t.sin()));
            }
            let mut c = Vec::new();
            for i in 0..6 {
                c.extend_from_slice(&[0, 1 + i, 1 + (i + 1) % 6]);
            }
            (v, c)
        }
        Domain::Cube => {
            let mut v = Vec::new();
            for z in 0..2 {
                for y in 0..2 {
                    for x in 0..2 {
                        v.push([x as f64, y as f64, z as f64]);
                    }
                }
            }
            let id = |x: usize, y: usize, z: usize| x + 2 * y + 4 * z;
            let mut c = Vec::new();
            // Kuhn simplices: walk from (0,0,0) to (1,1,1) along each axis permutation.
            for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                let mut p = [0usize; 3];
                c.push(id(p[0], p[1], p[2]));
                for axis in perm {
                    p[axis] = 1;
                    c.push(id(p[0], p[1], p[2]));
                }
            }
            (v, c)
        }
    };
    Mesh::from_parts(domain, 0, vertices, cells)
}

/// Uniform red refinement. Triangles split into four congruent children and
/// tetrahedra into eight (Bey's ordering, which keeps Kuhn simplices similar).
/// On the disk, new boundary vertices are projected onto the unit circle.
pub fn refine(mesh: &Mesh) -> Mesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            vertices.push(geometry::midpoint(&vertices[a], &vertices[b]));
            vertices.len() - 1
        })
    };

    let nv = mesh.dim + 1;
    let mut cells = Vec::with_capacity(mesh.cells.len() * if mesh.dim == 2 { 4 } else { 8 });
    for c in mesh.cells.chunks(nv) {
        if mesh.dim == 2 {
            let (a, b, d) = (c[0], c[1], c[2]);
            let ab = mid(a, b, &mut vertices);
            let bd = mid(b, d, &mut vertices);
            let da = mid(d, a, &mut vertices);
            cells.extend_from_slice(&[a, ab, da, ab, b, bd, da, bd, d, ab, bd, da]);
        } else {
            let (x0, x1, x2, x3) = (c[0], c[1], c[2], c[3]);
            let x01 = mid(x0, x1, &mut vertices);
            let x02 = mid(x0, x2, &mut vertices);
            let x03 = mid(x0, x3, &mut vertices);
            let x12 = mid(x1, x2, &mut vertices);
            let x13 = mid(x1, x3, &mut vertices);
            let x23 = mid(x2, x3, &mut vertices);
            cells.extend_from_slice(&[
                x0, x01, x02, x03, //
                x01, x1, x12, x13, //
                x02, x12, x2, x23, //
                x03, x13, x23, x3, //
                x01, x02, x03, x13, //
                x01, x02, x12, x13, //
                x02, x03, x13, x23, //
                x02, x12, x13, x23,
            ]);
        }
    }

    if mesh.domain == Domain::Disk {
        for face in &mesh.boundary_faces {
            let key = (face.vertices[0].min(face.vertices[1]), face.vertices[0].max(face.vertices[1]));
            let m = midpoints[&key];
            let r = geometry::norm(&vertices[m]);
            vertices[m] = geometry::scale(&vertices[m], 1.0 / r);
        }
    }

    Mesh::from_parts(mesh.domain, mesh.level + 1, vertices, cells)
}

impl Mesh {
    fn from_parts(domain: Domain, level: usize, vertices: Vec<Point>, cells: Vec<usize>) -> Self {
        let dim = domain.dim();
        let mut mesh = Mesh {
            domain,
            dim,
            level,
            vertices,
            cells,
            interior_faces: Vec::new(),
            boundary_faces: Vec::new(),
            cell_diameters: Vec::new(),
        };
        mesh.cell_diameters = (0..mesh.n_cells())
            .map(|k| geometry::diameter(&mesh.cell_points(k)))
            .collect();
        mesh.build_faces();
        mesh
    }

    fn build_faces(&mut self) {
        let nv = self.dim + 1;
        let mut incidences: HashMap<Vec<usize>, Vec<(usize, usize)>> = HashMap::new();
        for k in 0..self.n_cells() {
            for local in 0..nv {
                incidences.entry(self.face_key(k, local)).or_default().push((k, local));
            }
        }
        let mut entries: Vec<_> = incidences.into_iter().collect();
        for (_, inc) in entries.iter_mut() {
            inc.sort_unstable();
        }
        entries.sort_by_key(|(_, inc)| inc[0]);

        for (key, inc) in entries {
            let points: Vec<Point> = key.iter().map(|&v| self.vertices[v]).collect();
            let diameter = geometry::diameter(&points);
            let measure = geometry::simplex_measure(&points);
            let (plus, plus_local) = inc[0];
            let normal = self.outward_normal(plus, plus_local);
            match inc.len() {
                1 => self.boundary_faces.push(BoundaryFace {
                    cell: plus,
                    local: plus_local,
                    vertices: key,
                    normal,
                    diameter,
                    measure,
                }),
                2 => {
                    let (minus, minus_local) = inc[1];
                    self.interior_faces.push(InteriorFace {
                        plus,
                        plus_local,
                        minus,
                        minus_local,
                        vertices: key,
                        normal,
                        diameter,
                        measure,
                    })
                }
                n => panic!("non-manifold mesh: face shared by {n} cells"),
            }
        }
    }

    /// Sorted global vertex ids of local face `local` of `cell`.
    fn face_key(&self, cell: usize, local: usize) -> Vec<usize> {
        let mut key: Vec<usize> = self
            .cell(cell)
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != local)
            .map(|(_, &v)| v)
            .collect();
        key.sort_unstable();
        key
    }

    /// Unit outward normal of local face `local` of `cell`, from geometry.
    pub fn outward_normal(&self, cell: usize, local: usize) -> Point {
        let verts = self.cell(cell);
        let face: Vec<Point> = (0..=self.dim)
            .filter(|&i| i != local)
            .map(|i| self.vertices[verts[i]])
            .collect();
        let mut n = if self.dim == 2 {
            let t = geometry::sub(&face[1], &face[0]);
            [t[1], -t[0], 0.0]
        } else {
            geometry::cross(&geometry::sub(&face[1], &face[0]), &geometry::sub(&face[2], &face[0]))
        };
        let len = geometry::norm(&n);
        n = geometry::scale(&n, 1.0 / len);
        let opposite = self.vertices[verts[local]];
        if geometry::dot(&n, &geometry::sub(&geometry::centroid(&face), &opposite)) < 0.0 {
            n = geometry::scale(&n, -1.0);
        }
        n
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn cell(&self, k: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cells[k * nv..(k + 1) * nv]
    }

    pub fn cell_points(&self, k: usize) -> Vec<Point> {
        self.cell(k).iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn interior_faces(&self) -> &[InteriorFace] {
        &self.interior_faces
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn cell_diameters(&self) -> &[f64] {
        &self.cell_diameters
    }

    /// Maximum cell diameter `h`.
    pub fn h(&self) -> f64 {
        self.cell_diameters.iter().cloned().fold(0.0, f64::max)
    }

    pub fn cell_measure(&self, k: usize) -> f64 {
        geometry::simplex_measure(&self.cell_points(k))
    }

    pub fn total_measure(&self) -> f64 {
        (0..self.n_cells()).map(|k| self.cell_measure(k)).sum()
    }

    pub fn boundary_measure(&self) -> f64 {
        self.boundary_faces.iter().map(|f| f.measure).sum()
    }

    /// Smallest ratio inradius / diameter over all cells.
    pub fn min_shape_quality(&self) -> f64 {
        (0..self.n_cells())
            .map(|k| {
                let pts = self.cell_points(k);
                let vol = geometry::simplex_measure(&pts);
                let surface: f64 = (0..=self.dim)
                    .map(|skip| {
                        let f: Vec<Point> = (0..=self.dim).filter(|&i| i != skip).map(|i| pts[i]).collect();
                        geometry::simplex_measure(&f)
                    })
                    .sum();
                self.dim as f64 * vol / surface / self.cell_diameters[k]
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Plain-text dump: `v x y [z]` lines followed by `c i j k [l]` lines.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        for p in &self.vertices {
            if self.dim == 2 {
                writeln!(w, "v {:e} {:e}", p[0], p[1])?;
            } else {
                writeln!(w, "v {:e} {:e} {:e}", p[0], p[1], p[2])?;
            }
        }
        for k in 0..self.n_cells() {
            let ids: Vec<String> = self.cell(k).iter().map(|v| v.to_string()).collect();
            writeln!(w, "c {}", ids.join(" "))?;
        }
        Ok(())
    }

    /// Checks every structural invariant of the mesh and returns the list of
    /// violations (empty when the mesh is valid).
    pub fn face_topology_check(&self) -> TopologyReport {
        let mut violations = Vec::new();
        let nv = self.dim + 1;
        let tol = 1e-12;

        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for k in 0..self.n_cells() {
            if self.cell_measure(k) <= 0.0 {
                violations.push(format!("cell {k} is degenerate"));
            }
            let h = geometry::diameter(&self.cell_points(k));
            if (h - self.cell_diameters[k]).abs() > tol * h.max(1.0) {
                violations.push(format!("cell {k}: stored diameter {} != {h}", self.cell_diameters[k]));
            }
            for local in 0..nv {
                *counts.entry(self.face_key(k, local)).or_default() += 1;
            }
        }
        let shared = counts.values().filter(|&&c| c == 2).count();
        let single = counts.values().filter(|&&c| c == 1).count();
        let other = counts.values().filter(|&&c| c > 2).count();
        if other > 0 {
            violations.push(format!("{other} faces shared by more than two cells"));
        }
        if shared != self.interior_faces.len() {
            violations.push(format!(
                "{} interior faces recorded, {shared} faces shared by two cells",
                self.interior_faces.len()
            ));
        }
        if single != self.boundary_faces.len() {
            violations.push(format!(
                "{} boundary faces recorded, {single} faces owned by one cell",
                self.boundary_faces.len()
            ));
        }

        for (i, f) in self.interior_faces.iter().enumerate() {
            if f.plus >= f.minus {
                violations.push(format!("interior face {i}: plus cell {} not below minus cell {}", f.plus, f.minus));
            }
            if self.face_key(f.plus, f.plus_local) != f.vertices
                || self.face_key(f.minus, f.minus_local) != f.vertices
            {
                violations.push(format!("interior face {i}: adjacent cells do not contain the face"));
                continue;
            }
            if (geometry::norm(&f.normal) - 1.0).abs() > tol {
                violations.push(format!("interior face {i}: normal is not unit length"));
            }
            let out_plus = self.outward_normal(f.plus, f.plus_local);
            let out_minus = self.outward_normal(f.minus, f.minus_local);
            let agree = geometry::norm(&geometry::sub(&f.normal, &out_plus)) <= 1e-10
                && geometry::norm(&geometry::add(&f.normal, &out_minus)) <= 1e-10;
            if !agree {
                violations.push(format!("interior face {i}: normal is not oriented from cell {} to cell {}", f.plus, f.minus));
            }
            for c in [f.plus, f.minus] {
                if f.diameter > self.cell_diameters[c] * (1.0 + tol) {
                    violations.push(format!("interior face {i}: h_e exceeds h_K of cell {c}"));
                }
            }
        }

        for (i, f) in self.boundary_faces.iter().enumerate() {
            if self.face_key(f.cell, f.local) != f.vertices {
                violations.push(format!("boundary face {i}: cell does not contain the face"));
                continue;
            }
            if (geometry::norm(&f.normal) - 1.0).abs() > tol {
                violations.push(format!("boundary face {i}: normal is not unit length"));
            }
            let out = self.outward_normal(f.cell, f.local);
            if geometry::norm(&geometry::sub(&f.normal, &out)) > 1e-10 {
                violations.push(format!("boundary face {i}: normal is not outward"));
            }
            if f.diameter > self.cell_diameters[f.cell] * (1.0 + tol) {
                violations.push(format!("boundary face {i}: h_e exceeds h_K"));
            }
        }

        let perimeter = self.boundary_measure();
        match self.domain.boundary_measure() {
            Some(exact) if (perimeter - exact).abs() > tol * exact => {
                violations.push(format!("boundary measure {perimeter} differs from {exact}"));
            }
            None if perimeter > 2.0 * std::f64::consts::PI => {
                violations.push(format!("disk boundary measure {perimeter} exceeds 2π"));
            }
            _ => {}
        }

        TopologyReport { violations }
    }
}

/// Result of [`Mesh::face_topology_check`].
#[derive(Debug, Clone, Default)]
pub struct TopologyReport {
    pub violations: Vec<String>,
}

impl TopologyReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_mesh_counts() {
        let sq = generate(Domain::Square, 0);
        assert_eq!((sq.n_vertices(), sq.n_cells()), (4, 2));
        assert_eq!(sq.interior_faces().len(), 1);
        assert_eq!(sq.boundary_faces().len(), 4);

        let l = generate(Domain::LShape, 0);
        assert_eq!((l.n_vertices(), l.n_cells()), (8, 6));

        let cube = generate(Domain::Cube, 0);
        assert_eq!((cube.n_vertices(), cube.n_cells()), (8, 6));

        let disk = generate(Domain::Disk, 0);
        assert_eq!((disk.n_vertices(), disk.n_cells()), (7, 6));
    }

    #[test]
    fn refinement_multiplies_cells() {
        assert_eq!(refine(&generate(Domain::Square, 0)).n_cells(), 8);
        assert_eq!(refine(&generate(Domain::Cube, 0)).n_cells(), 48);
        for d in Domain::ALL {
            let base = generate(d, 0).n_cells();
            let factor: usize = if d.dim() == 2 { 4 } else { 8 };
            for level in 0..3 {
                assert_eq!(generate(d, level).n_cells(), base * factor.pow(level as u32));
            }
        }
    }

    #[test]
    fn disk_boundary_vertices_on_circle() {
        let mesh = generate(Domain::Disk, 3);
        for f in mesh.boundary_faces() {
            for &v in &f.vertices {
                assert!((geometry::norm(&mesh.vertices()[v]) - 1.0).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn generated_meshes_pass_check() {
        for d in Domain::ALL {
            for level in 0..3 {
                let report = generate(d, level).face_topology_check();
                assert!(report.is_ok(), "{d} level {level}: {:?}", report.violations);
            }
        }
    }

    #[test]
    fn flipped_normal_is_reported_once() {
        let mut mesh = generate(Domain::Square, 2);
        let n = mesh.interior_faces[3].normal;
        mesh.interior_faces[3].normal = geometry::scale(&n, -1.0);
        let report = mesh.face_topology_check();
        assert_eq!(report.violations.len(), 1, "{:?}", report.violations);
    }

    #[test]
    fn square_level3_perimeter() {
        let mesh = generate(Domain::Square, 3);
        assert!((mesh.boundary_measure() - 4.0).abs() <= 1e-12);
    }

    #[test]
    fn exact_domain_measures() {
        for (d, m) in [(Domain::Square, 1.0), (Domain::LShape, 3.0), (Domain::Cube, 1.0)] {
            for level in 0..3 {
                assert!((generate(d, level).total_measure() - m).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn shape_quality_is_preserved() {
        for d in [Domain::Square, Domain::LShape, Domain::Cube] {
            let q0 = generate(d, 0).min_shape_quality();
            for level in 1..3 {
                let q = generate(d, level).min_shape_quality();
                assert!((q - q0).abs() <= 1e-12, "{d}: {q} vs {q0}");
            }
        }
    }

    #[test]
    fn disk_area_increases_towards_pi() {
        let mut prev = 0.0;
        for level in 0..5 {
            let a = generate(Domain::Disk, level).total_measure();
            assert!(a > prev && a < std::f64::consts::PI);
            prev = a;
        }
        assert!(std::f64::consts::PI - prev < 0.01);
    }

    #[test]
    fn interior_normals_point_from_lower_to_higher_cell() {
        let mesh = generate(Domain::Cube, 1);
        for f in mesh.interior_faces() {
            assert!(f.plus < f.minus);
            let out = mesh.outward_normal(f.minus, f.minus_local);
            assert!(geometry::norm(&geometry::add(&f.normal, &out)) < 1e-12);
        }
    }

    #[test]
    fn text_dump_format() {
        let mesh = generate(Domain::Square, 0);
        let mut buf = Vec::new();
        mesh.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].starts_with("v "));
        assert_eq!(lines[4], "c 0 1 2");
    }

    #[test]
    fn domain_parsing() {
        assert_eq!("lshape".parse::<Domain>().unwrap(), Domain::LShape);
        assert!("torus".parse::<Domain>().is_err());
    }
}
