//! Indexed triangle mesh with incrementally maintained adjacency.
//!
//! Faces are stored as vertex-index triples, counter-clockwise seen from
//! outside. Two adjacency tables are kept in sync with the face list by
//! every topology edit: the faces incident to each vertex, and the faces
//! bordering each undirected edge. [`Mesh::adjacency_matches_rebuild`]
//! recomputes both from scratch and compares, which is how the tests check
//! the incremental bookkeeping.

use std::fmt;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::geom::{self, Vec3};

/// Faces with an area at or below this are treated as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Allowed deviation of a growth direction from unit length.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("vertex index {index} out of range (mesh has {len} vertices)")]
    VertexOutOfRange { index: usize, len: usize },
    #[error("face index {index} out of range (mesh has {len} faces)")]
    FaceOutOfRange { index: usize, len: usize },
    #[error("face {0} is degenerate and has no defined normal")]
    DegenerateFace(usize),
    #[error("edge ({0}, {1}) does not exist")]
    NoSuchEdge(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub position: Vec3,
    /// Unit direction along which the growth rule displaces this vertex.
    pub growth_dir: Vec3,
}

/// Undirected edge key, smaller index first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge(pub usize, pub usize);

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        if a < b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }
}

/// Thresholds for [`Mesh::try_flip_edge`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipRules {
    /// Minimum cosine between the two face normals.
    pub min_normal_cos: f64,
    /// Both endpoints of the old diagonal need at least this many faces.
    pub min_valence: usize,
}

impl Default for FlipRules {
    fn default() -> Self {
        FlipRules {
            min_normal_cos: 40f64.to_radians().cos(),
            min_valence: 5,
        }
    }
}

/// One broken mesh invariant, as reported by [`Mesh::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RepeatedFaceIndex { face: usize },
    NonManifoldEdge { edge: Edge, faces: usize },
    DuplicateFace { face: usize, first: usize },
    NonFinitePosition { vertex: usize },
    NonUnitGrowthDir { vertex: usize, length: f64 },
    OrphanVertex { vertex: usize },
    StaleAdjacency,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RepeatedFaceIndex { face } => {
                write!(f, "face {face} repeats a vertex index")
            }
            Violation::NonManifoldEdge { edge, faces } => {
                write!(f, "edge ({}, {}) borders {faces} faces", edge.0, edge.1)
            }
            Violation::DuplicateFace { face, first } => {
                write!(f, "face {face} duplicates the vertex set of face {first}")
            }
            Violation::NonFinitePosition { vertex } => {
                write!(f, "vertex {vertex} has a non-finite position")
            }
            Violation::NonUnitGrowthDir { vertex, length } => {
                write!(f, "vertex {vertex} growth direction has length {length}")
            }
            Violation::OrphanVertex { vertex } => {
                write!(f, "vertex {vertex} belongs to no face")
            }
            Violation::StaleAdjacency => write!(f, "adjacency does not match the face list"),
        }
    }
}

/// Neighbor lists of every vertex in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl NeighborTable {
    /// Neighbors of vertex `i`, ascending.
    pub fn get(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Default)]
pub struct Mesh {
    vertices: Vec<Vertex>,
    faces: Vec<[usize; 3]>,
    vertex_faces: Vec<Vec<usize>>,
    edge_faces: FxHashMap<Edge, Vec<usize>>,
}

impl PartialEq for Mesh {
    /// Meshes are equal when their vertex and face lists are.
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.faces == other.faces
    }
}

type Adjacency = (Vec<Vec<usize>>, FxHashMap<Edge, Vec<usize>>);

fn build_adjacency(n_vertices: usize, faces: &[[usize; 3]]) -> Adjacency {
    let mut vertex_faces = vec![Vec::new(); n_vertices];
    let mut edge_faces: FxHashMap<Edge, Vec<usize>> = FxHashMap::default();
    edge_faces.reserve(faces.len() * 3 / 2);
    for (fi, face) in faces.iter().enumerate() {
        for k in 0..3 {
            let v = face[k];
            if !vertex_faces[v].contains(&fi) {
                vertex_faces[v].push(fi);
            }
            let e = Edge::new(face[k], face[(k + 1) % 3]);
            if e.0 != e.1 {
                edge_faces.entry(e).or_default().push(fi);
            }
        }
    }
    (vertex_faces, edge_faces)
}

impl Mesh {
    /// Builds a mesh from raw parts. Only index ranges are checked here;
    /// everything else is reported by [`Mesh::validate`].
    pub fn from_parts(vertices: Vec<Vertex>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let len = vertices.len();
        for face in &faces {
            if let Some(&index) = face.iter().find(|&&v| v >= len) {
                return Err(MeshError::VertexOutOfRange { index, len });
            }
        }
        let (vertex_faces, edge_faces) = build_adjacency(len, &faces);
        Ok(Mesh {
            vertices,
            faces,
            vertex_faces,
            edge_faces,
        })
    }

    /// Regular icosahedron of circumradius 1 with one vertex pointing
    /// straight down and resting on z = 0. Growth directions point radially
    /// away from the center at (0, 0, 1).
    pub fn icosahedron() -> Self {
        let center = [0.0, 0.0, 1.0];
        let ring_z = 1.0 / 5f64.sqrt();
        let ring_r = 2.0 / 5f64.sqrt();
        let step = std::f64::consts::TAU / 5.0;

        let mut unit = Vec::with_capacity(12);
        unit.push([0.0, 0.0, 1.0]);
        for k in 0..5 {
            let a = step * k as f64;
            unit.push([ring_r * a.cos(), ring_r * a.sin(), ring_z]);
        }
        for k in 0..5 {
            let a = step * k as f64 + step / 2.0;
            unit.push([ring_r * a.cos(), ring_r * a.sin(), -ring_z]);
        }
        unit.push([0.0, 0.0, -1.0]);

        let upper = |k: usize| 1 + k % 5;
        let lower = |k: usize| 6 + k % 5;
        let mut faces = Vec::with_capacity(20);
        for k in 0..5 {
            faces.push([0, upper(k), upper(k + 1)]);
            faces.push([upper(k), lower(k), upper(k + 1)]);
            faces.push([upper(k + 1), lower(k), lower(k + 1)]);
            faces.push([11, lower(k + 1), lower(k)]);
        }
        // orient every face outward
        for face in &mut faces {
            let [a, b, c] = face.map(|i| unit[i]);
            let n = geom::cross(geom::sub(b, a), geom::sub(c, a));
            let centroid = geom::scale(geom::add(geom::add(a, b), c), 1.0 / 3.0);
            if geom::dot(n, centroid) < 0.0 {
                face.swap(1, 2);
            }
        }

        let vertices = unit
            .iter()
            .map(|&u| Vertex {
                position: geom::add(u, center),
                growth_dir: geom::normalize(u, 0.0).expect("nonzero radius"),
            })
            .collect();
        Mesh::from_parts(vertices, faces).expect("icosahedron indices are in range")
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_faces.len()
    }

    /// V − E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.face_count() as i64
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &Vertex {
        &self.vertices[i]
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> [usize; 3] {
        self.faces[f]
    }

    /// Moves vertex `i` by `delta`. Topology is unaffected.
    pub fn displace(&mut self, i: usize, delta: Vec3) {
        let v = &mut self.vertices[i];
        v.position = geom::add(v.position, delta);
    }

    /// Number of faces incident to vertex `i`.
    pub fn valence(&self, i: usize) -> usize {
        self.vertex_faces[i].len()
    }

    /// Faces bordering `edge`, or `None` if no face uses it.
    pub fn edge_faces(&self, edge: Edge) -> Option<&[usize]> {
        self.edge_faces.get(&edge).map(Vec::as_slice)
    }

    /// All edges, sorted by endpoint pair.
    pub fn sorted_edges(&self) -> Vec<Edge> {
        let mut edges: Vec<Edge> = self.edge_faces.keys().copied().collect();
        edges.sort_unstable();
        edges
    }

    /// Every vertex sharing a face with `i`, ascending.
    pub fn neighbors(&self, i: usize) -> Result<Vec<usize>, MeshError> {
        if i >= self.vertices.len() {
            return Err(MeshError::VertexOutOfRange {
                index: i,
                len: self.vertices.len(),
            });
        }
        Ok(self.neighbors_unchecked(i))
    }

    fn neighbors_unchecked(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.vertex_faces[i]
            .iter()
            .flat_map(|&f| self.faces[f])
            .filter(|&v| v != i)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Neighbor lists for every vertex, as returned by [`Mesh::neighbors`].
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let table = self.neighbor_table();
        (0..self.vertices.len())
            .map(|i| table.get(i).to_vec())
            .collect()
    }

    /// Same lists as [`Mesh::neighbor_lists`], packed into one buffer.
    pub fn neighbor_table(&self) -> NeighborTable {
        let mut offsets = Vec::with_capacity(self.vertices.len() + 1);
        let mut indices = Vec::with_capacity(6 * self.vertices.len());
        offsets.push(0);
        for (i, incident) in self.vertex_faces.iter().enumerate() {
            let start = indices.len();
            for &f in incident {
                indices.extend(self.faces[f].iter().filter(|&&v| v != i));
            }
            let row = &mut indices[start..];
            row.sort_unstable();
            let mut kept = 0;
            for k in 0..row.len() {
                if kept == 0 || row[k] != row[kept - 1] {
                    row[kept] = row[k];
                    kept += 1;
                }
            }
            indices.truncate(start + kept);
            offsets.push(indices.len());
        }
        NeighborTable { offsets, indices }
    }

    fn corners(&self, f: usize) -> [Vec3; 3] {
        self.faces[f].map(|v| self.vertices[v].position)
    }

    fn raw_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.corners(f);
        geom::cross(geom::sub(b, a), geom::sub(c, a))
    }

    pub fn face_area(&self, f: usize) -> Result<f64, MeshError> {
        self.check_face(f)?;
        Ok(0.5 * geom::norm(self.raw_normal(f)))
    }

    pub fn face_normal(&self, f: usize) -> Result<Vec3, MeshError> {
        self.check_face(f)?;
        let n = self.raw_normal(f);
        if 0.5 * geom::norm(n) <= DEGENERATE_AREA {
            return Err(MeshError::DegenerateFace(f));
        }
        geom::normalize(n, 0.0).ok_or(MeshError::DegenerateFace(f))
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.corners(f);
        geom::scale(geom::add(geom::add(a, b), c), 1.0 / 3.0)
    }

    fn check_face(&self, f: usize) -> Result<(), MeshError> {
        if f >= self.faces.len() {
            Err(MeshError::FaceOutOfRange {
                index: f,
                len: self.faces.len(),
            })
        } else {
            Ok(())
        }
    }

    fn replace_edge_face(&mut self, edge: Edge, old: usize, new: usize) {
        let list = self.edge_faces.get_mut(&edge).expect("edge present");
        let slot = list.iter_mut().find(|f| **f == old).expect("face on edge");
        *slot = new;
    }

    fn replace_vertex_face(&mut self, v: usize, old: usize, new: usize) {
        let slot = self.vertex_faces[v]
            .iter_mut()
            .find(|f| **f == old)
            .expect("face on vertex");
        *slot = new;
    }

    fn remove_vertex_face(&mut self, v: usize, face: usize) {
        self.vertex_faces[v].retain(|&f| f != face);
    }

    /// Splits face `f` at its centroid. The face ABC becomes ABM (kept in
    /// slot `f`), BCM and CAM (appended). Returns the index of M.
    pub fn split_face(&mut self, f: usize, growth_dir: Vec3) -> Result<usize, MeshError> {
        if self.face_area(f)? <= DEGENERATE_AREA {
            return Err(MeshError::DegenerateFace(f));
        }
        let [a, b, c] = self.faces[f];
        let m = self.vertices.len();
        self.vertices.push(Vertex {
            position: self.face_centroid(f),
            growth_dir,
        });
        let f1 = self.faces.len();
        let f2 = f1 + 1;
        self.faces[f] = [a, b, m];
        self.faces.push([b, c, m]);
        self.faces.push([c, a, m]);

        self.replace_edge_face(Edge::new(b, c), f, f1);
        self.replace_edge_face(Edge::new(c, a), f, f2);
        self.edge_faces.insert(Edge::new(a, m), vec![f, f2]);
        self.edge_faces.insert(Edge::new(b, m), vec![f, f1]);
        self.edge_faces.insert(Edge::new(c, m), vec![f1, f2]);

        self.vertex_faces[a].push(f2);
        self.vertex_faces[b].push(f1);
        self.replace_vertex_face(c, f, f1);
        self.vertex_faces[c].push(f2);
        self.vertex_faces.push(vec![f, f1, f2]);
        Ok(m)
    }

    /// Rotates `face` so that it starts with the directed edge p→q, returning
    /// the apex, or `None` if the face does not contain p→q in that order.
    fn apex_after(face: [usize; 3], p: usize, q: usize) -> Option<usize> {
        (0..3)
            .find(|&k| face[k] == p && face[(k + 1) % 3] == q)
            .map(|k| face[(k + 2) % 3])
    }

    /// Replaces the diagonal BD shared by faces ABD and BCD with AC when
    /// the new diagonal is strictly shorter, the faces are close to
    /// coplanar, B and D keep enough faces, and AC is not already an edge.
    ///
    /// Returns whether the flip happened. Faces keep their slots and their
    /// orientation; vertex positions are never touched.
    pub fn try_flip_edge(&mut self, edge: Edge, rules: &FlipRules) -> Result<bool, MeshError> {
        let faces = self
            .edge_faces
            .get(&edge)
            .ok_or(MeshError::NoSuchEdge(edge.0, edge.1))?;
        let [fa, fb] = match faces.as_slice() {
            &[fa, fb] => [fa, fb],
            _ => return Ok(false),
        };
        // orient so that fa runs B→D and fb runs D→B
        let (b, d) = if Self::apex_after(self.faces[fa], edge.0, edge.1).is_some() {
            (edge.0, edge.1)
        } else {
            (edge.1, edge.0)
        };
        let (Some(a), Some(c)) = (
            Self::apex_after(self.faces[fa], b, d),
            Self::apex_after(self.faces[fb], d, b),
        ) else {
            // inconsistently oriented pair
            return Ok(false);
        };
        if a == c {
            return Ok(false);
        }

        let pos = |v: usize| self.vertices[v].position;
        if geom::distance(pos(a), pos(c)) >= geom::distance(pos(b), pos(d)) {
            return Ok(false);
        }
        let (Ok(na), Ok(nb)) = (self.face_normal(fa), self.face_normal(fb)) else {
            return Ok(false);
        };
        if geom::dot(na, nb) <= rules.min_normal_cos {
            return Ok(false);
        }
        if self.valence(b) < rules.min_valence || self.valence(d) < rules.min_valence {
            return Ok(false);
        }
        if self.edge_faces.contains_key(&Edge::new(a, c)) {
            return Ok(false);
        }

        self.faces[fa] = [a, b, c];
        self.faces[fb] = [a, c, d];

        self.edge_faces.remove(&Edge::new(b, d));
        self.edge_faces.insert(Edge::new(a, c), vec![fa, fb]);
        self.replace_edge_face(Edge::new(b, c), fb, fa);
        self.replace_edge_face(Edge::new(d, a), fa, fb);

        self.remove_vertex_face(b, fb);
        self.remove_vertex_face(d, fa);
        self.vertex_faces[a].push(fb);
        self.vertex_faces[c].push(fa);
        Ok(true)
    }

    /// Whether the incrementally maintained adjacency equals a fresh rebuild.
    pub fn adjacency_matches_rebuild(&self) -> bool {
        let (vf, ef) = build_adjacency(self.vertices.len(), &self.faces);
        if vf.len() != self.vertex_faces.len() || ef.len() != self.edge_faces.len() {
            return false;
        }
        let sorted = |l: &[usize]| {
            let mut l = l.to_vec();
            l.sort_unstable();
            l
        };
        vf.iter()
            .zip(&self.vertex_faces)
            .all(|(a, b)| a.len() == b.len() && sorted(a) == sorted(b))
            && ef.iter().all(|(e, a)| {
                self.edge_faces
                    .get(e)
                    .is_some_and(|b| a.len() == b.len() && sorted(a) == sorted(b))
            })
    }

    /// Every broken invariant, in a deterministic order. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();

        for (fi, face) in self.faces.iter().enumerate() {
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                out.push(Violation::RepeatedFaceIndex { face: fi });
            }
        }

        let mut bad_edges: Vec<(Edge, usize)> = self
            .edge_faces
            .iter()
            .filter(|(_, f)| f.len() > 2)
            .map(|(e, f)| (*e, f.len()))
            .collect();
        bad_edges.sort_unstable();
        out.extend(
            bad_edges
                .into_iter()
                .map(|(edge, faces)| Violation::NonManifoldEdge { edge, faces }),
        );

        let mut keyed: Vec<([usize; 3], usize)> = self
            .faces
            .iter()
            .enumerate()
            .map(|(fi, face)| {
                let mut key = *face;
                key.sort_unstable();
                (key, fi)
            })
            .collect();
        keyed.sort_unstable();
        let mut duplicates: Vec<(usize, usize)> = keyed
            .chunk_by(|x, y| x.0 == y.0)
            .flat_map(|run| run[1..].iter().map(move |&(_, fi)| (fi, run[0].1)))
            .collect();
        duplicates.sort_unstable();
        out.extend(
            duplicates
                .into_iter()
                .map(|(face, first)| Violation::DuplicateFace { face, first }),
        );

        for (vi, v) in self.vertices.iter().enumerate() {
            if !geom::is_finite(v.position) {
                out.push(Violation::NonFinitePosition { vertex: vi });
            }
            let length = geom::norm(v.growth_dir);
            if !((length - 1.0).abs() <= UNIT_TOLERANCE) {
                out.push(Violation::NonUnitGrowthDir { vertex: vi, length });
            }
        }

        let mut used = vec![false; self.vertices.len()];
        self.faces.iter().flatten().for_each(|&v| used[v] = true);
        out.extend(
            (0..self.vertices.len())
                .filter(|&v| !used[v])
                .map(|vertex| Violation::OrphanVertex { vertex }),
        );

        if !self.adjacency_matches_rebuild() {
            out.push(Violation::StaleAdjacency);
        }
        out
    }

    /// Relabels vertices so that old vertex `i` becomes `perm[i]`.
    /// Face order is kept.
    pub fn permute_vertices(&self, perm: &[usize]) -> Mesh {
        assert_eq!(perm.len(), self.vertices.len());
        let mut vertices = self.vertices.clone();
        for (old, &new) in perm.iter().enumerate() {
            vertices[new] = self.vertices[old];
        }
        let faces = self.faces.iter().map(|f| f.map(|v| perm[v])).collect();
        Mesh::from_parts(vertices, faces).expect("permutation keeps indices in range")
    }
}
