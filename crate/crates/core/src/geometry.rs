//! Simplicial meshes in one and two dimensions.
//!
//! Facets are derived from the cell list: every facet is keyed by its sorted
//! global vertex tuple, and the "plus" side is the incident cell with the
//! smaller id. Local facet `l` of a cell is the sub-simplex opposite local
//! vertex `l`.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid interval bounds [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
    #[error("cell count must be positive")]
    NoCells,
    #[error("invalid rectangle extent: {0}")]
    BadExtent(String),
    #[error("perturbation {0} outside [0, 0.3)")]
    BadPerturbation(f64),
    #[error("degenerate cell {cell}: signed volume {volume:e}")]
    Degenerate { cell: usize, volume: f64 },
    #[error("unsupported mesh dimension {0}")]
    BadDimension(usize),
    #[error("cell {cell} has {found} vertices, expected {expected}")]
    CellArity { cell: usize, found: usize, expected: usize },
    #[error("vertex index out of range: cell {cell} references vertex {vertex} of {count}")]
    VertexOutOfRange { cell: usize, vertex: usize, count: usize },
    #[error("vertex {0} has wrong coordinate count or non-finite coordinates")]
    BadVertex(usize),
    #[error("facet {0:?} is shared by more than two cells")]
    NonManifold(Vec<usize>),
    #[error("malformed mesh document: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// One incidence of a facet on a cell boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetSide {
    pub cell: usize,
    pub local: usize,
    /// Outward unit normal with respect to `cell`.
    pub normal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Global vertex ids, ascending. This order fixes the facet parametrization.
    pub vertices: Vec<usize>,
    /// Length in 2-D; counting measure (1) for the point facets of 1-D meshes.
    pub measure: f64,
    pub plus: FacetSide,
    pub minus: Option<FacetSide>,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }

    pub fn sides(&self) -> impl Iterator<Item = &FacetSide> {
        std::iter::once(&self.plus).chain(self.minus.iter())
    }
}

/// Immutable simplicial mesh.
#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<[f64; 2]>,
    cells: Vec<Vec<usize>>,
    facets: Vec<Facet>,
    cell_facets: Vec<Vec<usize>>,
    boundary_facets: Vec<usize>,
}

impl Mesh {
    /// Build a mesh from vertex coordinates and positively oriented cells.
    ///
    /// For `dim == 1` the second coordinate of every vertex is ignored.
    pub fn new(dim: usize, vertices: Vec<[f64; 2]>, cells: Vec<Vec<usize>>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(GeometryError::BadDimension(dim));
        }
        if cells.is_empty() {
            return Err(GeometryError::NoCells);
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v[..dim].iter().all(|c| c.is_finite()) {
                return Err(GeometryError::BadVertex(i));
            }
        }
        let mut vertices = vertices;
        if dim == 1 {
            for v in &mut vertices {
                v[1] = 0.0;
            }
        }
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() != dim + 1 {
                return Err(GeometryError::CellArity { cell: c, found: cell.len(), expected: dim + 1 });
            }
            for &v in cell {
                if v >= vertices.len() {
                    return Err(GeometryError::VertexOutOfRange { cell: c, vertex: v, count: vertices.len() });
                }
            }
            let vol = signed_volume(dim, &vertices, cell);
            if !(vol > 0.0) {
                return Err(GeometryError::Degenerate { cell: c, volume: vol });
            }
        }

        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut facets: Vec<Facet> = Vec::new();
        let mut cell_facets = vec![vec![usize::MAX; dim + 1]; cells.len()];
        for (c, cell) in cells.iter().enumerate() {
            for l in 0..=dim {
                let mut key: Vec<usize> =
                    cell.iter().enumerate().filter(|&(k, _)| k != l).map(|(_, &v)| v).collect();
                key.sort_unstable();
                let side = FacetSide { cell: c, local: l, normal: outward_normal(dim, &vertices, cell, l) };
                match index.get(&key) {
                    Some(&f) => {
                        if facets[f].minus.is_some() {
                            return Err(GeometryError::NonManifold(key));
                        }
                        facets[f].minus = Some(side);
                        cell_facets[c][l] = f;
                    }
                    None => {
                        let measure = match dim {
                            1 => 1.0,
                            _ => dist(&vertices[key[0]], &vertices[key[1]]),
                        };
                        index.insert(key.clone(), facets.len());
                        cell_facets[c][l] = facets.len();
                        facets.push(Facet { vertices: key, measure, plus: side, minus: None });
                    }
                }
            }
        }
        let boundary_facets = facets.iter().enumerate().filter(|(_, f)| f.is_boundary()).map(|(i, _)| i).collect();
        Ok(Mesh { dim, vertices, cells, facets, cell_facets, boundary_facets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet(&self, id: usize) -> &Facet {
        &self.facets[id]
    }

    /// Facet id of local facet `local` of `cell`.
    pub fn cell_facet(&self, cell: usize, local: usize) -> usize {
        self.cell_facets[cell][local]
    }

    pub fn cell_facets(&self, cell: usize) -> &[usize] {
        &self.cell_facets[cell]
    }

    pub fn boundary_facet_ids(&self) -> &[usize] {
        &self.boundary_facets
    }

    pub fn num_internal_facets(&self) -> usize {
        self.facets.len() - self.boundary_facets.len()
    }

    pub fn cell_volume(&self, cell: usize) -> f64 {
        signed_volume(self.dim, &self.vertices, &self.cells[cell])
    }

    pub fn cell_centroid(&self, cell: usize) -> [f64; 2] {
        let c = &self.cells[cell];
        let k = c.len() as f64;
        let mut p = [0.0; 2];
        for &v in c {
            p[0] += self.vertices[v][0] / k;
            p[1] += self.vertices[v][1] / k;
        }
        p
    }

    /// Cells sharing a facet with `cell`.
    pub fn neighbors(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        self.cell_facets[cell].iter().filter_map(move |&f| {
            let facet = &self.facets[f];
            facet.sides().map(|s| s.cell).find(|&c| c != cell)
        })
    }

    /// Physical coordinates of the point with parameter `t` on a facet
    /// (`t` runs from the first to the second facet vertex; ignored in 1-D).
    pub fn facet_point(&self, facet: usize, t: f64) -> [f64; 2] {
        let f = &self.facets[facet];
        match self.dim {
            1 => self.vertices[f.vertices[0]],
            _ => {
                let a = self.vertices[f.vertices[0]];
                let b = self.vertices[f.vertices[1]];
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
            }
        }
    }

    pub fn to_document(&self) -> MeshDocument {
        MeshDocument {
            dim: self.dim,
            vertices: self.vertices.iter().map(|v| v[..self.dim].to_vec()).collect(),
            cells: self.cells.clone(),
        }
    }

    pub fn from_document(doc: &MeshDocument) -> Result<Self> {
        if doc.dim != 1 && doc.dim != 2 {
            return Err(GeometryError::BadDimension(doc.dim));
        }
        let mut verts = Vec::with_capacity(doc.vertices.len());
        for (i, v) in doc.vertices.iter().enumerate() {
            if v.len() != doc.dim {
                return Err(GeometryError::BadVertex(i));
            }
            verts.push([v[0], if doc.dim == 2 { v[1] } else { 0.0 }]);
        }
        Mesh::new(doc.dim, verts, doc.cells.clone())
    }

    /// Serialize to the mesh document format (floats at 17 significant digits).
    pub fn to_json(&self) -> String {
        crate::json::to_string(&self.to_document(), false).expect("mesh document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MeshDocument =
            serde_json::from_str(text).map_err(|e| GeometryError::Malformed(e.to_string()))?;
        Mesh::from_document(&doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Mesh::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk mesh layout: `{"dim": m, "vertices": [[x, (y)], ...], "cells": [[i0, ...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeshDocument {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub cells: Vec<Vec<usize>>,
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn signed_volume(dim: usize, vertices: &[[f64; 2]], cell: &[usize]) -> f64 {
    match dim {
        1 => vertices[cell[1]][0] - vertices[cell[0]][0],
        _ => {
            let a = vertices[cell[0]];
            let b = vertices[cell[1]];
            let c = vertices[cell[2]];
            0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
        }
    }
}

fn outward_normal(dim: usize, vertices: &[[f64; 2]], cell: &[usize], local: usize) -> [f64; 2] {
    let opposite = vertices[cell[local]];
    match dim {
        1 => {
            let other = vertices[cell[1 - local]];
            [if other[0] > opposite[0] { 1.0 } else { -1.0 }, 0.0]
        }
        _ => {
            let idx: Vec<usize> = (0..3).filter(|&k| k != local).collect();
            let a = vertices[cell[idx[0]]];
            let b = vertices[cell[idx[1]]];
            let t = [b[0] - a[0], b[1] - a[1]];
            let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
            let mut n = [t[1] / len, -t[0] / len];
            let to_opp = [opposite[0] - a[0], opposite[1] - a[1]];
            if n[0] * to_opp[0] + n[1] * to_opp[1] > 0.0 {
                n = [-n[0], -n[1]];
            }
            n
        }
    }
}

/// Uniform partition of `[a, b]` into `n_cells` intervals.
pub fn build_interval_mesh(a: f64, b: f64, n_cells: usize) -> Result<Mesh> {
    if !a.is_finite() || !b.is_finite() || a >= b {
        return Err(GeometryError::BadInterval { a, b });
    }
    if n_cells == 0 {
        return Err(GeometryError::NoCells);
    }
    let h = (b - a) / n_cells as f64;
    let vertices = (0..=n_cells)
        .map(|i| [if i == n_cells { b } else { a + i as f64 * h }, 0.0])
        .collect();
    let cells = (0..n_cells).map(|i| vec![i, i + 1]).collect();
    Mesh::new(1, vertices, cells)
}

/// 64-bit linear congruential generator (Knuth's MMIX constants).
///
/// Output is the top 53 bits of the state scaled to `[0, 1)`. Used only for
/// mesh perturbation so that meshes are bit-identical across platforms.
#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        let mut g = Lcg64 { state: seed ^ 0x9E37_79B9_7F4A_7C15 };
        g.next_u64();
        g
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.state
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Triangulated rectangle: each grid square is split along its
/// lower-left/upper-right diagonal. Interior vertices are displaced by at most
/// `perturb * min(hx, hy)`; boundary vertices stay on the grid.
pub fn build_rect_tri_mesh(
    x_extent: (f64, f64),
    y_extent: (f64, f64),
    nx: usize,
    ny: usize,
    perturb: f64,
    seed: u64,
) -> Result<Mesh> {
    let (x0, x1) = x_extent;
    let (y0, y1) = y_extent;
    if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) || x1 <= x0 || y1 <= y0 {
        return Err(GeometryError::BadExtent(format!("x {x0}..{x1}, y {y0}..{y1}")));
    }
    if nx == 0 || ny == 0 {
        return Err(GeometryError::NoCells);
    }
    if !(0.0..0.3).contains(&perturb) {
        return Err(GeometryError::BadPerturbation(perturb));
    }
    let hx = (x1 - x0) / nx as f64;
    let hy = (y1 - y0) / ny as f64;
    let h = hx.min(hy);
    let mut rng = Lcg64::new(seed);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx { x1 } else { x0 + i as f64 * hx };
            let y = if j == ny { y1 } else { y0 + j as f64 * hy };
            let interior = i > 0 && i < nx && j > 0 && j < ny;
            if interior && perturb > 0.0 {
                let s = perturb * h / std::f64::consts::SQRT_2;
                let dx = s * (2.0 * rng.next_f64() - 1.0);
                let dy = s * (2.0 * rng.next_f64() - 1.0);
                vertices.push([x + dx, y + dy]);
            } else {
                vertices.push([x, y]);
            }
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            cells.push(vec![a, b, d]);
            cells.push(vec![a, d, c]);
        }
    }
    Mesh::new(2, vertices, cells)
}

/// Two equilateral triangles of side √2 sharing the edge {u₂, u₃}.
///
/// Vertex order: u₁ (left), u₂ (bottom), u₃ (top), u₄ (right).
pub fn build_two_equilateral_mesh() -> Mesh {
    let s = (1.5f64).sqrt();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let vertices = vec![[-s, 0.0], [0.0, -h], [0.0, h], [s, 0.0]];
    Mesh::new(2, vertices, vec![vec![0, 1, 2], vec![1, 3, 2]]).expect("fixed mesh is valid")
}

/// The left triangle of [`build_two_equilateral_mesh`] on its own.
pub fn build_equilateral_triangle() -> Mesh {
    let s = (1.5f64).sqrt();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Mesh::new(2, vec![[-s, 0.0], [0.0, -h], [0.0, h]], vec![vec![0, 1, 2]]).expect("fixed mesh is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_edges(mesh: &Mesh) -> (usize, usize) {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for c in mesh.cells() {
            for (a, b) in [(c[0], c[1]), (c[1], c[2]), (c[0], c[2])] {
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let internal = count.values().filter(|&&k| k == 2).count();
        (count.len(), internal)
    }

    #[test]
    fn interval_single_cell() {
        let m = build_interval_mesh(0.0, 1.0, 1).unwrap();
        assert_eq!(m.num_cells(), 1);
        assert_eq!(m.facets().len(), 2);
        assert!(m.facets().iter().all(|f| f.is_boundary()));
    }

    #[test]
    fn interval_counts_and_orientation() {
        let m = build_interval_mesh(0.0, 1.0, 4).unwrap();
        assert_eq!((m.num_cells(), m.facets().len(), m.num_internal_facets()), (4, 5, 3));
        let m = build_interval_mesh(0.0, 2.0, 2).unwrap();
        let f = m.facets().iter().find(|f| !f.is_boundary()).unwrap();
        assert_eq!(m.vertices()[f.vertices[0]][0], 1.0);
        let np = f.plus.normal[0];
        let nm = f.minus.unwrap().normal[0];
        assert_eq!((np, nm), (1.0, -1.0));
    }

    #[test]
    fn interval_errors() {
        assert!(build_interval_mesh(1.0, 0.0, 3).is_err());
        assert!(build_interval_mesh(0.0, f64::NAN, 3).is_err());
        assert!(build_interval_mesh(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn rect_counts() {
        let m = build_rect_tri_mesh((0.0, 1.0), (0.0, 1.0), 1, 1, 0.0, 0).unwrap();
        assert_eq!((m.num_cells(), m.facets().len(), m.num_internal_facets()), (2, 5, 1));
        let m = build_rect_tri_mesh((0.0, 1.0), (0.0, 1.0), 2, 2, 0.0, 0).unwrap();
        assert_eq!(brute_force_edges(&m), (16, 8));
        assert_eq!((m.num_cells(), m.facets().len(), m.num_internal_facets()), (8, 16, 8));
    }

    #[test]
    fn perturbed_rect_partitions_area() {
        let m = build_rect_tri_mesh((0.0, 1.0), (0.0, 1.0), 4, 4, 0.2, 7).unwrap();
        assert_eq!(m.num_cells(), 32);
        let total: f64 = (0..32).map(|c| m.cell_volume(c)).inspect(|&v| assert!(v > 0.0)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let perim: f64 = m.boundary_facet_ids().iter().map(|&f| m.facet(f).measure).sum();
        assert!((perim - 4.0).abs() < 1e-12);
        // Boundary vertices untouched.
        for v in m.vertices() {
            let on_bdry = v[0] == 0.0 || v[0] == 1.0 || v[1] == 0.0 || v[1] == 1.0;
            let grid = |t: f64| ((t * 4.0).round() - t * 4.0).abs() < 1e-15;
            if on_bdry {
                assert!(grid(v[0]) && grid(v[1]));
            }
        }
    }

    #[test]
    fn perturbation_is_deterministic() {
        let a = build_rect_tri_mesh((0.0, 1.0), (0.0, 1.0), 4, 4, 0.2, 7).unwrap();
        let b = build_rect_tri_mesh((0.0, 1.0), (0.0, 1.0), 4, 4, 0.2, 7).unwrap();
        let c = build_rect_tri_mesh((0.0, 1.0), (0.0, 1.0), 4, 4, 0.2, 8).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert_ne!(a.vertices(), c.vertices());
    }

    #[test]
    fn two_equilateral_layout() {
        let m = build_two_equilateral_mesh();
        assert_eq!(m.vertices().len(), 4);
        assert_eq!(m.facets().len(), 5);
        for c in 0..2 {
            assert!((m.cell_volume(c) - 3f64.sqrt() / 2.0).abs() < 1e-14);
        }
        for f in m.facets() {
            assert!((f.measure - std::f64::consts::SQRT_2).abs() < 1e-14);
        }
        let internal: Vec<_> = m.facets().iter().filter(|f| !f.is_boundary()).collect();
        assert_eq!(internal.len(), 1);
        assert_eq!(internal[0].vertices, vec![1, 2]);
    }

    #[test]
    fn internal_normals_cancel_and_cells_close() {
        let meshes = [
            build_rect_tri_mesh((0.0, 1.0), (0.0, 1.0), 4, 4, 0.25, 3).unwrap(),
            build_rect_tri_mesh((-1.0, 2.0), (0.0, 0.5), 3, 5, 0.1, 11).unwrap(),
            build_two_equilateral_mesh(),
        ];
        for m in &meshes {
            for f in m.facets() {
                if let Some(minus) = f.minus {
                    let s = [f.plus.normal[0] + minus.normal[0], f.plus.normal[1] + minus.normal[1]];
                    assert!(s[0].abs().max(s[1].abs()) <= 1e-14);
                    assert!(f.plus.cell < minus.cell);
                }
            }
            for c in 0..m.num_cells() {
                let mut acc = [0.0; 2];
                let mut perim = 0.0;
                for &f in m.cell_facets(c) {
                    let facet = m.facet(f);
                    let side = facet.sides().find(|s| s.cell == c).unwrap();
                    acc[0] += side.normal[0] * facet.measure;
                    acc[1] += side.normal[1] * facet.measure;
                    perim += facet.measure;
                }
                assert!(acc[0].abs().max(acc[1].abs()) <= 1e-12 * perim);
            }
        }
    }

    #[test]
    fn measures_match_brute_force() {
        let m = build_rect_tri_mesh((0.0, 1.0), (0.0, 1.0), 3, 3, 0.2, 5).unwrap();
        for (c, cell) in m.cells().iter().enumerate() {
            let p: Vec<[f64; 2]> = cell.iter().map(|&v| m.vertices()[v]).collect();
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            assert!((m.cell_volume(c) - det / 2.0).abs() <= 1e-14);
        }
        for f in m.facets() {
            let a = m.vertices()[f.vertices[0]];
            let b = m.vertices()[f.vertices[1]];
            assert!((f.measure - ((a[0] - b[0]).hypot(a[1] - b[1]))).abs() <= 1e-14);
        }
    }

    #[test]
    fn inverted_cell_rejected() {
        let err = Mesh::new(2, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![vec![0, 2, 1]]).unwrap_err();
        assert!(matches!(err, GeometryError::Degenerate { cell: 0, .. }));
    }

    #[test]
    fn document_round_trip() {
        let m = build_two_equilateral_mesh();
        let text = m.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["dim"], 2);
        assert_eq!(v["vertices"].as_array().unwrap().len(), 4);
        assert_eq!(v["cells"].as_array().unwrap().len(), 2);

        let p = build_rect_tri_mesh((0.0, 1.0), (0.0, 1.0), 4, 4, 0.2, 7).unwrap();
        let back = Mesh::from_json(&p.to_json()).unwrap();
        assert_eq!(back.vertices(), p.vertices());
        assert_eq!(back.cells(), p.cells());
        assert_eq!(back.to_json(), p.to_json());
    }

    #[test]
    fn load_rejects_bad_index() {
        let text = r#"{"dim":2,"vertices":[[0,0],[1,0],[0,1],[1,1]],"cells":[[0,1,99]]}"#;
        let err = Mesh::from_json(text).unwrap_err();
        assert!(err.to_string().contains("vertex index out of range"), "{err}");
        assert!(Mesh::from_json("{\"dim\":2}").is_err());
        let inverted = r#"{"dim":2,"vertices":[[0,0],[1,0],[0,1]],"cells":[[0,2,1]]}"#;
        assert!(Mesh::from_json(inverted).is_err());
    }
}
