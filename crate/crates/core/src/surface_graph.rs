//! Bipartite surface graphs, their oriented duals and the 4-mutation.
//!
//! A graph is stored combinatorial-map style: every face keeps its
//! counter-clockwise boundary walk as parallel lists of vertices and edges,
//! where `edges[i]` runs from `vertices[i]` to `vertices[i + 1]`. The dual is
//! derived from the walks. On the torus every edge also carries a lattice
//! translation (`shift`) so that geometric data can be lifted to the
//! universal cover.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FaceId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for FaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

/// A translation in the period lattice, in units of the two periods.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lift(pub i32, pub i32);

impl Lift {
    pub const ZERO: Lift = Lift(0, 0);
}

impl Add for Lift {
    type Output = Lift;
    fn add(self, o: Lift) -> Lift {
        Lift(self.0 + o.0, self.1 + o.1)
    }
}

impl Sub for Lift {
    type Output = Lift;
    fn sub(self, o: Lift) -> Lift {
        Lift(self.0 - o.0, self.1 - o.1)
    }
}

impl Neg for Lift {
    type Output = Lift;
    fn neg(self) -> Lift {
        Lift(-self.0, -self.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Color {
    Plus,
    Minus,
}

impl Color {
    pub fn opposite(self) -> Color {
        match self {
            Color::Plus => Color::Minus,
            Color::Minus => Color::Plus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Surface {
    Sphere,
    Torus,
    PlanePatch,
}

impl Surface {
    pub fn euler_characteristic(self) -> i64 {
        match self {
            Surface::Sphere => 2,
            Surface::Torus => 0,
            Surface::PlanePatch => 1,
        }
    }
}

/// An edge joins its `minus` endpoint to its `plus` endpoint; `shift` is the
/// lift of `plus` relative to `minus`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub minus: VertexId,
    pub plus: VertexId,
    pub shift: Lift,
}

impl Edge {
    pub fn new(minus: VertexId, plus: VertexId) -> Self {
        Edge { minus, plus, shift: Lift::ZERO }
    }

    pub fn other(&self, v: VertexId) -> VertexId {
        if v == self.minus {
            self.plus
        } else {
            self.minus
        }
    }

    /// Lift of the far endpoint when leaving `from` along this edge.
    pub fn step_from(&self, from: VertexId) -> Lift {
        if from == self.minus {
            self.shift
        } else {
            -self.shift
        }
    }
}

/// A face and its counter-clockwise boundary walk. `anchor` is the lift of
/// `vertices[0]` in the face's own frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Face {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
    pub anchor: Lift,
}

impl Face {
    pub fn degree(&self) -> usize {
        self.edges.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Incoming,
    Outgoing,
}

/// One side of a face: the primal edge, the face across it and the
/// orientation of the dual edge as seen from the face.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DualSlot {
    pub edge: EdgeId,
    pub neighbor: Option<FaceId>,
    pub neighbor_slot: usize,
    pub direction: Direction,
    /// Lift that carries the neighbour's frame into this face's frame.
    pub translation: Lift,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphError {
    UnknownVertex(VertexId),
    UnknownEdge(EdgeId),
    UnknownFace(FaceId),
    BrokenWalk(FaceId),
    AmbiguousWalk(FaceId),
    NotAValidQuad { face: FaceId, reason: &'static str },
    BoundaryAdjacent(FaceId),
    ResultNotInObs { vertex: VertexId, degree: usize },
    OddDimensions { rows: usize, cols: usize },
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::UnknownVertex(v) => write!(f, "unknown vertex {v}"),
            GraphError::UnknownEdge(e) => write!(f, "unknown edge {e}"),
            GraphError::UnknownFace(x) => write!(f, "unknown face {x}"),
            GraphError::BrokenWalk(x) => write!(f, "boundary walk of {x} is not a closed edge path"),
            GraphError::AmbiguousWalk(x) => {
                write!(f, "boundary walk of {x} needs an explicit vertex cycle")
            }
            GraphError::NotAValidQuad { face, reason } => {
                write!(f, "{face} is not a valid quadrilateral: {reason}")
            }
            GraphError::BoundaryAdjacent(x) => write!(f, "{x} touches the patch boundary"),
            GraphError::ResultNotInObs { vertex, degree } => {
                write!(f, "mutation would leave {vertex} with degree {degree}")
            }
            GraphError::OddDimensions { rows, cols } => {
                write!(f, "grid dimensions {rows}x{cols} must be even and at least 2")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NotBipartite { edge: EdgeId },
    VertexDegree { vertex: VertexId, degree: usize },
    FaceDegree { face: FaceId, degree: usize },
    EdgeUsage { edge: EdgeId, uses: usize },
    DualOrientation { edge: EdgeId },
    VertexLink { vertex: VertexId },
    FaceMonodromy { face: FaceId },
    EulerCharacteristic { expected: i64, found: i64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotBipartite { edge } => write!(f, "{edge} does not join a - vertex to a + vertex"),
            Violation::VertexDegree { vertex, degree } => write!(f, "{vertex} has degree {degree} < 3"),
            Violation::FaceDegree { face, degree } => write!(f, "{face} has degree {degree} < 2"),
            Violation::EdgeUsage { edge, uses } => write!(f, "{edge} appears {uses} times in face walks"),
            Violation::DualOrientation { edge } => {
                write!(f, "both faces at {edge} traverse it in the same direction")
            }
            Violation::VertexLink { vertex } => write!(f, "faces around {vertex} do not form a single disk"),
            Violation::FaceMonodromy { face } => write!(f, "walk of {face} does not close in the cover"),
            Violation::EulerCharacteristic { expected, found } => {
                write!(f, "Euler characteristic {found}, expected {expected}")
            }
        }
    }
}

/// Per corner of the mutated face: the vertex that left and the one that
/// took its place, with the new corner's lift in the face frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CornerChange {
    pub old: VertexId,
    pub new: VertexId,
    /// True when `new` was inserted; false when `old` was deleted.
    pub inserted: bool,
    pub old_offset: Lift,
    pub new_offset: Lift,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MutationRecord {
    pub face: FaceId,
    /// Indexed by the corners of the face before mutation.
    pub corners: [CornerChange; 4],
}

/// The local data of a quadrilateral face that can be mutated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadInfo {
    pub face: FaceId,
    pub corners: [VertexId; 4],
    pub edges: [EdgeId; 4],
    /// `neighbors[i]` lies across `edges[i]`, which joins corners `i` and `i + 1`.
    pub neighbors: [FaceId; 4],
    pub neighbor_slots: [usize; 4],
    pub translations: [Lift; 4],
    pub offsets: [Lift; 4],
    pub directions: [Direction; 4],
}

type CornerKey = (FaceId, EdgeId, EdgeId);

#[derive(Clone, Debug)]
pub struct SurfaceGraph {
    surface: Surface,
    vertices: BTreeMap<VertexId, Color>,
    edges: BTreeMap<EdgeId, Edge>,
    faces: BTreeMap<FaceId, Face>,
    // Identifiers removed by a mutation, keyed by the face and its two edges
    // at the corner, so that mutating back restores them exactly.
    retired: BTreeMap<CornerKey, Vec<(VertexId, EdgeId)>>,
    slots: BTreeMap<EdgeId, Vec<(FaceId, usize)>>,
    degrees: BTreeMap<VertexId, usize>,
}

impl PartialEq for SurfaceGraph {
    fn eq(&self, other: &Self) -> bool {
        self.surface == other.surface
            && self.vertices == other.vertices
            && self.edges == other.edges
            && self.faces == other.faces
    }
}

#[derive(Clone, Copy, Debug)]
struct Dart {
    edge: EdgeId,
    from: VertexId,
    offset: Lift,
}

impl SurfaceGraph {
    /// Builds a graph from explicit walks. Walks are checked for structural
    /// consistency only; use [`validate_surface_graph`] for the class checks.
    pub fn from_parts(
        surface: Surface,
        vertices: BTreeMap<VertexId, Color>,
        edges: BTreeMap<EdgeId, Edge>,
        faces: BTreeMap<FaceId, Face>,
    ) -> Result<Self, GraphError> {
        for e in edges.values() {
            for v in [e.minus, e.plus] {
                if !vertices.contains_key(&v) {
                    return Err(GraphError::UnknownVertex(v));
                }
            }
        }
        for (&id, face) in &faces {
            let n = face.edges.len();
            if n == 0 || face.vertices.len() != n {
                return Err(GraphError::BrokenWalk(id));
            }
            for i in 0..n {
                let e = edges.get(&face.edges[i]).ok_or(GraphError::UnknownEdge(face.edges[i]))?;
                let (u, v) = (face.vertices[i], face.vertices[(i + 1) % n]);
                if !((e.minus == u && e.plus == v) || (e.minus == v && e.plus == u)) {
                    return Err(GraphError::BrokenWalk(id));
                }
            }
        }
        let mut g = SurfaceGraph {
            surface,
            vertices,
            edges,
            faces,
            retired: BTreeMap::new(),
            slots: BTreeMap::new(),
            degrees: BTreeMap::new(),
        };
        g.canonicalize();
        Ok(g)
    }

    /// Builds a graph from faces given as edge cycles, deriving the vertex
    /// walks. A face may name its first vertex to disambiguate digons.
    pub fn from_edge_cycles(
        surface: Surface,
        vertices: BTreeMap<VertexId, Color>,
        edges: BTreeMap<EdgeId, Edge>,
        faces: BTreeMap<FaceId, (Vec<EdgeId>, Option<VertexId>, Lift)>,
    ) -> Result<Self, GraphError> {
        let mut built = BTreeMap::new();
        for (id, (cycle, start, anchor)) in faces {
            let walk = walk_from_edges(id, &cycle, start, &edges)?;
            built.insert(id, Face { vertices: walk, edges: cycle, anchor });
        }
        SurfaceGraph::from_parts(surface, vertices, edges, built)
    }

    /// Builds a simple graph (no parallel edges) from vertex cycles; edges
    /// are numbered in order of first appearance.
    pub fn from_vertex_cycles(
        surface: Surface,
        colors: &[(VertexId, Color)],
        cycles: &[(FaceId, Vec<VertexId>)],
    ) -> Result<Self, GraphError> {
        let vertices: BTreeMap<_, _> = colors.iter().copied().collect();
        let mut edges = BTreeMap::new();
        let mut by_pair: BTreeMap<(VertexId, VertexId), EdgeId> = BTreeMap::new();
        let mut faces = BTreeMap::new();
        for (fid, cycle) in cycles {
            let n = cycle.len();
            let mut face_edges = Vec::with_capacity(n);
            for i in 0..n {
                let (u, v) = (cycle[i], cycle[(i + 1) % n]);
                let key = if u < v { (u, v) } else { (v, u) };
                let next = EdgeId(by_pair.len() as u32);
                let id = *by_pair.entry(key).or_insert(next);
                if id == next {
                    let cu = *vertices.get(&u).ok_or(GraphError::UnknownVertex(u))?;
                    let edge = if cu == Color::Minus { Edge::new(u, v) } else { Edge::new(v, u) };
                    edges.insert(id, edge);
                }
                face_edges.push(id);
            }
            faces.insert(*fid, Face { vertices: cycle.clone(), edges: face_edges, anchor: Lift::ZERO });
        }
        SurfaceGraph::from_parts(surface, vertices, edges, faces)
    }

    pub fn surface(&self) -> Surface {
        self.surface
    }

    pub fn vertices(&self) -> &BTreeMap<VertexId, Color> {
        &self.vertices
    }

    pub fn edges(&self) -> &BTreeMap<EdgeId, Edge> {
        &self.edges
    }

    pub fn faces(&self) -> &BTreeMap<FaceId, Face> {
        &self.faces
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices.keys().copied()
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.keys().copied()
    }

    pub fn face_ids(&self) -> impl Iterator<Item = FaceId> + '_ {
        self.faces.keys().copied()
    }

    pub fn color(&self, v: VertexId) -> Option<Color> {
        self.vertices.get(&v).copied()
    }

    pub fn edge(&self, e: EdgeId) -> Option<&Edge> {
        self.edges.get(&e)
    }

    pub fn face(&self, f: FaceId) -> Option<&Face> {
        self.faces.get(&f)
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.degrees.get(&v).copied().unwrap_or(0)
    }

    /// Retired identifiers kept for exact restoration by a reverse mutation.
    /// Each corner key holds a stack, so that nested mutations unwind in order.
    pub fn retired(&self) -> &BTreeMap<(FaceId, EdgeId, EdgeId), Vec<(VertexId, EdgeId)>> {
        &self.retired
    }

    pub fn set_retired(&mut self, retired: BTreeMap<(FaceId, EdgeId, EdgeId), Vec<(VertexId, EdgeId)>>) {
        self.retired = retired;
        self.retired.retain(|_, stack| !stack.is_empty());
    }

    /// Faces (and positions in their walks) that use an edge.
    pub fn edge_faces(&self, e: EdgeId) -> &[(FaceId, usize)] {
        self.slots.get(&e).map(|s| s.as_slice()).unwrap_or(&[])
    }

    /// Rim edges of a plane patch have a single incident face.
    pub fn is_rim_edge(&self, e: EdgeId) -> bool {
        self.edge_faces(e).len() < 2
    }

    /// Boundary faces of a plane patch touch the rim; they are never moved.
    pub fn is_boundary_face(&self, f: FaceId) -> bool {
        self.faces.get(&f).map(|face| face.edges.iter().any(|&e| self.is_rim_edge(e))).unwrap_or(false)
    }

    pub fn is_rim_vertex(&self, v: VertexId) -> bool {
        self.edges.iter().any(|(&id, e)| (e.minus == v || e.plus == v) && self.is_rim_edge(id))
    }

    /// Lifts of the walk vertices of `f` in the frame of `f`.
    pub fn face_offsets(&self, f: FaceId) -> Option<Vec<Lift>> {
        let face = self.faces.get(&f)?;
        let n = face.degree();
        let mut out = Vec::with_capacity(n);
        let mut o = face.anchor;
        for i in 0..n {
            out.push(o);
            o = o + self.edges[&face.edges[i]].step_from(face.vertices[i]);
        }
        Some(out)
    }

    /// The dual slots of `f` in walk order.
    pub fn dual_slots(&self, f: FaceId) -> Option<Vec<DualSlot>> {
        let face = self.faces.get(&f)?;
        let offsets = self.face_offsets(f)?;
        let n = face.degree();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let e = face.edges[i];
            let edge = &self.edges[&e];
            let direction = if face.vertices[i] == edge.minus { Direction::Outgoing } else { Direction::Incoming };
            let other = self.edge_faces(e).iter().copied().find(|&(g, j)| !(g == f && j == i));
            let (neighbor, neighbor_slot, translation) = match other {
                Some((g, j)) => {
                    let gface = &self.faces[&g];
                    let goff = self.face_offsets(g)?;
                    let pos = (j + 1) % gface.degree();
                    (Some(g), j, offsets[i] - goff[pos])
                }
                None => (None, 0, Lift::ZERO),
            };
            out.push(DualSlot { edge: e, neighbor, neighbor_slot, direction, translation });
        }
        Some(out)
    }

    /// Oriented dual edges `(primal edge, from, to)`.
    pub fn dual_edges(&self) -> Vec<(EdgeId, FaceId, FaceId)> {
        let mut out = Vec::new();
        for (&e, slots) in &self.slots {
            if slots.len() != 2 {
                continue;
            }
            let edge = &self.edges[&e];
            let (f, i) = slots[0];
            let (g, _) = slots[1];
            if self.faces[&f].vertices[i] == edge.minus {
                out.push((e, f, g));
            } else {
                out.push((e, g, f));
            }
        }
        out
    }

    /// Checks that `f` is a quadrilateral on which the 4-mutation is defined.
    pub fn quad_info(&self, f: FaceId) -> Result<QuadInfo, GraphError> {
        let bad = |reason| GraphError::NotAValidQuad { face: f, reason };
        let face = self.faces.get(&f).ok_or(GraphError::UnknownFace(f))?;
        if face.degree() != 4 {
            return Err(bad("face degree is not 4"));
        }
        let slots = self.dual_slots(f).ok_or(GraphError::UnknownFace(f))?;
        let offsets = self.face_offsets(f).ok_or(GraphError::UnknownFace(f))?;
        let mut neighbors = [FaceId(0); 4];
        let mut neighbor_slots = [0; 4];
        let mut translations = [Lift::ZERO; 4];
        let mut directions = [Direction::Incoming; 4];
        for i in 0..4 {
            let s = slots[i];
            let g = s.neighbor.ok_or(GraphError::BoundaryAdjacent(f))?;
            if g == f {
                return Err(bad("face is its own neighbour"));
            }
            if self.is_boundary_face(g) || self.is_boundary_face(f) {
                return Err(GraphError::BoundaryAdjacent(f));
            }
            neighbors[i] = g;
            neighbor_slots[i] = s.neighbor_slot;
            translations[i] = s.translation;
            directions[i] = s.direction;
        }
        for i in 0..4 {
            if neighbors[i] == neighbors[(i + 1) % 4] {
                return Err(bad("consecutive neighbours coincide"));
            }
            for j in (i + 1)..4 {
                if face.edges[i] == face.edges[j] {
                    return Err(bad("an edge occurs twice on the face"));
                }
                if face.vertices[i] == face.vertices[j] {
                    return Err(bad("a vertex occurs twice on the face"));
                }
            }
        }
        let arr = |v: &[VertexId]| [v[0], v[1], v[2], v[3]];
        Ok(QuadInfo {
            face: f,
            corners: arr(&face.vertices),
            edges: [face.edges[0], face.edges[1], face.edges[2], face.edges[3]],
            neighbors,
            neighbor_slots,
            translations,
            offsets: [offsets[0], offsets[1], offsets[2], offsets[3]],
            directions,
        })
    }

    fn next_vertex_id(&self) -> u32 {
        let live = self.vertices.keys().map(|v| v.0 + 1).max().unwrap_or(0);
        let retired = self.retired.values().flatten().map(|(v, _)| v.0 + 1).max().unwrap_or(0);
        live.max(retired)
    }

    fn next_edge_id(&self) -> u32 {
        let live = self.edges.keys().map(|e| e.0 + 1).max().unwrap_or(0);
        let retired = self.retired.values().flatten().map(|(_, e)| e.0 + 1).max().unwrap_or(0);
        live.max(retired)
    }

    fn darts(&self, f: FaceId) -> Vec<Dart> {
        let face = &self.faces[&f];
        let offsets = self.face_offsets(f).unwrap_or_default();
        (0..face.degree()).map(|i| Dart { edge: face.edges[i], from: face.vertices[i], offset: offsets[i] }).collect()
    }

    fn set_walk(&mut self, f: FaceId, darts: &[Dart]) {
        let face = Face {
            vertices: darts.iter().map(|d| d.from).collect(),
            edges: darts.iter().map(|d| d.edge).collect(),
            anchor: darts[0].offset,
        };
        self.faces.insert(f, face);
    }

    /// The 4-mutation at `f`, together with the per-corner vertex changes.
    pub fn mutate_with_record(&self, f: FaceId) -> Result<(SurfaceGraph, MutationRecord), GraphError> {
        let q = self.quad_info(f)?;
        let mut next = self.clone();
        let mut next_vertex = self.next_vertex_id();
        let mut next_edge = self.next_edge_id();

        // Per corner: either a leg to an existing vertex b (degree 3, the
        // corner is deleted) or a new vertex w joined to the corner.
        struct Corner {
            old: VertexId,
            new: VertexId,
            leg: EdgeId,
            delete: bool,
            new_offset: Lift,
        }
        let mut corners: Vec<Corner> = Vec::with_capacity(4);
        for i in 0..4 {
            let a = q.corners[i];
            let (g_prev, g_next) = (q.edges[(i + 3) % 4], q.edges[i]);
            let key = (f, g_prev, g_next);
            if self.degree(a) == 3 {
                let leg = self
                    .edges
                    .iter()
                    .find(|(&id, e)| id != g_prev && id != g_next && (e.minus == a || e.plus == a))
                    .map(|(&id, _)| id)
                    .ok_or(GraphError::NotAValidQuad { face: f, reason: "corner leg missing" })?;
                let edge = self.edges[&leg];
                let b = edge.other(a);
                if q.corners.contains(&b) {
                    return Err(GraphError::ResultNotInObs { vertex: b, degree: self.degree(b) });
                }
                corners.push(Corner {
                    old: a,
                    new: b,
                    leg,
                    delete: true,
                    new_offset: q.offsets[i] + edge.step_from(a),
                });
                next.retired.entry(key).or_default().push((a, leg));
            } else {
                let stashed = self.retired.get(&key).and_then(|s| s.last()).copied();
                let (w, leg) = match stashed {
                    Some((w, leg)) if !self.vertices.contains_key(&w) && !self.edges.contains_key(&leg) => {
                        let stack = next.retired.get_mut(&key).unwrap();
                        stack.pop();
                        if stack.is_empty() {
                            next.retired.remove(&key);
                        }
                        (w, leg)
                    }
                    _ => {
                        let ids = (VertexId(next_vertex), EdgeId(next_edge));
                        next_vertex += 1;
                        next_edge += 1;
                        ids
                    }
                };
                corners.push(Corner { old: a, new: w, leg, delete: false, new_offset: q.offsets[i] });
            }
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                if corners[i].new == corners[j].new {
                    return Err(GraphError::ResultNotInObs {
                        vertex: corners[i].new,
                        degree: self.degree(corners[i].new),
                    });
                }
            }
        }

        // Vertices and legs.
        for c in &corners {
            let color_a = self.vertices[&c.old];
            if c.delete {
                next.vertices.remove(&c.old);
                next.edges.remove(&c.leg);
            } else {
                next.vertices.insert(c.new, color_a.opposite());
                let edge = if color_a == Color::Minus { Edge::new(c.old, c.new) } else { Edge::new(c.new, c.old) };
                next.edges.insert(c.leg, edge);
            }
        }
        // The face edges keep their identifiers but join the new corners.
        for i in 0..4 {
            let (u, v) = (&corners[i], &corners[(i + 1) % 4]);
            let color_u = self.vertices[&u.old].opposite();
            let edge = if color_u == Color::Minus {
                Edge { minus: u.new, plus: v.new, shift: v.new_offset - u.new_offset }
            } else {
                Edge { minus: v.new, plus: u.new, shift: u.new_offset - v.new_offset }
            };
            next.edges.insert(q.edges[i], edge);
        }

        // New walk of f.
        let f_darts: Vec<Dart> =
            (0..4).map(|i| Dart { edge: q.edges[i], from: corners[i].new, offset: corners[i].new_offset }).collect();
        next.set_walk(f, &f_darts);

        // Neighbour walks: replace [leg(i+1)?, g_i, leg(i)?] by
        // [leg(i+1)?, g_i reversed, leg(i)?] with the roles of the legs swapped.
        // Working copies of the original walks; a neighbour may occur twice.
        let mut walks: BTreeMap<FaceId, Vec<Dart>> = BTreeMap::new();
        for &n in &q.neighbors {
            walks.entry(n).or_insert_with(|| self.darts(n));
        }
        for i in 0..4 {
            let n = q.neighbors[i];
            let t = q.translations[i];
            let (ci, cj) = (&corners[i], &corners[(i + 1) % 4]);
            let darts = walks.get_mut(&n).unwrap();
            let p =
                darts.iter().position(|d| d.edge == q.edges[i] && d.from == cj.old).ok_or(GraphError::BrokenWalk(n))?;
            let len = darts.len();
            darts.rotate_left(p);
            // Now darts[0] is g_i; locate the segment boundaries.
            let mut start_extra = 0;
            if cj.delete {
                if darts[len - 1].edge != cj.leg {
                    return Err(GraphError::BrokenWalk(n));
                }
                start_extra = 1;
            }
            let mut end = 1;
            if ci.delete {
                if darts.get(1).map(|d| d.edge) != Some(ci.leg) {
                    return Err(GraphError::BrokenWalk(n));
                }
                end = 2;
            }
            let mut replacement = Vec::new();
            if !cj.delete {
                replacement.push(Dart { edge: cj.leg, from: cj.old, offset: cj.new_offset - t });
            }
            replacement.push(Dart { edge: q.edges[i], from: cj.new, offset: cj.new_offset - t });
            if !ci.delete {
                replacement.push(Dart { edge: ci.leg, from: ci.new, offset: ci.new_offset - t });
            }
            replacement.extend_from_slice(&darts[end..len - start_extra]);
            *darts = replacement;
        }
        for (n, darts) in &walks {
            next.set_walk(*n, darts);
        }
        next.canonicalize();

        for c in &corners {
            let v = if c.delete { c.new } else { c.old };
            let d = next.degree(v);
            if d < 3 && !next.is_rim_vertex(v) {
                return Err(GraphError::ResultNotInObs { vertex: v, degree: d });
            }
        }
        let record = MutationRecord {
            face: f,
            corners: [0, 1, 2, 3].map(|i| CornerChange {
                old: corners[i].old,
                new: corners[i].new,
                inserted: !corners[i].delete,
                old_offset: q.offsets[i],
                new_offset: corners[i].new_offset,
            }),
        };
        Ok((next, record))
    }

    /// The 4-mutation at `f`.
    pub fn mutate_at_face(&self, f: FaceId) -> Result<SurfaceGraph, GraphError> {
        self.mutate_with_record(f).map(|(g, _)| g)
    }

    /// Renames a vertex everywhere; retired entries naming `to` are dropped.
    pub fn rename_vertex(&mut self, from: VertexId, to: VertexId) {
        if from == to {
            return;
        }
        if let Some(c) = self.vertices.remove(&from) {
            self.vertices.insert(to, c);
        }
        for e in self.edges.values_mut() {
            if e.minus == from {
                e.minus = to;
            }
            if e.plus == from {
                e.plus = to;
            }
        }
        for face in self.faces.values_mut() {
            for v in face.vertices.iter_mut() {
                if *v == from {
                    *v = to;
                }
            }
        }
        for stack in self.retired.values_mut() {
            stack.retain(|(v, _)| *v != to);
        }
        self.retired.retain(|_, stack| !stack.is_empty());
        self.reindex();
    }

    fn canonicalize(&mut self) {
        let ids: Vec<FaceId> = self.faces.keys().copied().collect();
        for f in ids {
            let offsets = match self.face_offsets(f) {
                Some(o) => o,
                None => continue,
            };
            let face = self.faces.get_mut(&f).unwrap();
            let k = (0..face.edges.len()).min_by_key(|&i| face.edges[i]).unwrap_or(0);
            face.edges.rotate_left(k);
            face.vertices.rotate_left(k);
            face.anchor = offsets[k];
        }
        self.reindex();
    }

    fn reindex(&mut self) {
        self.slots.clear();
        for (&f, face) in &self.faces {
            for (i, &e) in face.edges.iter().enumerate() {
                self.slots.entry(e).or_default().push((f, i));
            }
        }
        self.degrees.clear();
        for v in self.vertices.keys() {
            self.degrees.insert(*v, 0);
        }
        for e in self.edges.values() {
            *self.degrees.entry(e.minus).or_insert(0) += 1;
            *self.degrees.entry(e.plus).or_insert(0) += 1;
        }
    }
}

fn walk_from_edges(
    face: FaceId,
    cycle: &[EdgeId],
    start: Option<VertexId>,
    edges: &BTreeMap<EdgeId, Edge>,
) -> Result<Vec<VertexId>, GraphError> {
    let n = cycle.len();
    if n == 0 {
        return Err(GraphError::BrokenWalk(face));
    }
    let get = |e: EdgeId| edges.get(&e).copied().ok_or(GraphError::UnknownEdge(e));
    let e0 = get(cycle[0])?;
    let first = match start {
        Some(v) => v,
        None => {
            let e1 = get(cycle[1 % n])?;
            let in_e1 = |v: VertexId| v == e1.minus || v == e1.plus;
            match (in_e1(e0.minus), in_e1(e0.plus)) {
                (false, true) => e0.minus,
                (true, false) => e0.plus,
                _ => return Err(GraphError::AmbiguousWalk(face)),
            }
        }
    };
    let mut walk = Vec::with_capacity(n);
    let mut v = first;
    for &e in cycle {
        let edge = get(e)?;
        if edge.minus != v && edge.plus != v {
            return Err(GraphError::BrokenWalk(face));
        }
        walk.push(v);
        v = edge.other(v);
    }
    if v != first {
        return Err(GraphError::BrokenWalk(face));
    }
    Ok(walk)
}

/// Class checks: bipartiteness, degree bounds, dual orientation, disk links
/// and Euler characteristic. Rim elements of plane patches are exempt from
/// the local closure checks.
pub fn validate_surface_graph(g: &SurfaceGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let patch = g.surface == Surface::PlanePatch;
    for (&id, e) in &g.edges {
        if g.vertices.get(&e.minus) != Some(&Color::Minus) || g.vertices.get(&e.plus) != Some(&Color::Plus) {
            out.push(Violation::NotBipartite { edge: id });
        }
    }
    for &v in g.vertices.keys() {
        let d = g.degree(v);
        if d < 3 && !(patch && g.is_rim_vertex(v)) {
            out.push(Violation::VertexDegree { vertex: v, degree: d });
        }
    }
    for (&f, face) in &g.faces {
        if face.degree() < 2 {
            out.push(Violation::FaceDegree { face: f, degree: face.degree() });
        }
        let closes = g.face_offsets(f).map(|o| {
            let last = face.degree() - 1;
            o[last] + g.edges[&face.edges[last]].step_from(face.vertices[last]) == face.anchor
        });
        if closes != Some(true) {
            out.push(Violation::FaceMonodromy { face: f });
        }
    }
    for &e in g.edges.keys() {
        let slots = g.edge_faces(e);
        let uses = slots.len();
        if uses > 2 || uses == 0 || (uses == 1 && !patch) {
            out.push(Violation::EdgeUsage { edge: e, uses });
            continue;
        }
        if uses == 2 {
            let (f1, i1) = slots[0];
            let (f2, i2) = slots[1];
            if g.faces[&f1].vertices[i1] == g.faces[&f2].vertices[i2] {
                out.push(Violation::DualOrientation { edge: e });
            }
        }
    }
    if out.iter().all(|v| !matches!(v, Violation::EdgeUsage { .. } | Violation::DualOrientation { .. })) {
        for &v in g.vertices.keys() {
            if patch && g.is_rim_vertex(v) {
                continue;
            }
            if !link_is_cycle(g, v) {
                out.push(Violation::VertexLink { vertex: v });
            }
        }
    }
    let chi = g.vertices.len() as i64 - g.edges.len() as i64 + g.faces.len() as i64;
    let expected = g.surface.euler_characteristic();
    if chi != expected {
        out.push(Violation::EulerCharacteristic { expected, found: chi });
    }
    out
}

fn link_is_cycle(g: &SurfaceGraph, v: VertexId) -> bool {
    let corners: Vec<(FaceId, usize)> = g
        .faces
        .iter()
        .flat_map(|(&f, face)| face.vertices.iter().enumerate().filter(move |(_, &u)| u == v).map(move |(i, _)| (f, i)))
        .collect();
    if corners.is_empty() {
        return false;
    }
    // Corner (f, i) leaves v along edges[i]; the face across that edge turns
    // around v at the position after the shared edge.
    let step = |(f, i): (FaceId, usize)| -> Option<(FaceId, usize)> {
        let e = g.faces[&f].edges[i];
        let (h, j) = g.edge_faces(e).iter().copied().find(|&s| s != (f, i))?;
        Some((h, (j + 1) % g.faces[&h].degree()))
    };
    let mut seen = BTreeSet::new();
    let mut cur = corners[0];
    loop {
        if !seen.insert(cur) {
            break;
        }
        match step(cur) {
            Some(n) => cur = n,
            None => return false,
        }
    }
    cur == corners[0] && seen.len() == corners.len()
}

/// Edges incident only to `f` and its four neighbours.
pub fn edge_neighbourhood(g: &SurfaceGraph, f: FaceId) -> Result<BTreeSet<EdgeId>, GraphError> {
    let q = g.quad_info(f)?;
    let mut local: BTreeSet<FaceId> = q.neighbors.iter().copied().collect();
    local.insert(f);
    Ok(g.edges
        .keys()
        .copied()
        .filter(|&e| {
            let s = g.edge_faces(e);
            !s.is_empty() && s.iter().all(|(h, _)| local.contains(h))
        })
        .collect())
}

/// Free-function form of [`SurfaceGraph::mutate_at_face`].
pub fn mutate_at_face(g: &SurfaceGraph, f: FaceId) -> Result<SurfaceGraph, GraphError> {
    g.mutate_at_face(f)
}

/// Index helpers for square grids: vertex `(i, j)` sits at the lower-left
/// corner of face `(i, j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SquareGrid {
    pub rows: usize,
    pub cols: usize,
    pub periodic: bool,
}

impl SquareGrid {
    fn vertex_cols(&self) -> usize {
        if self.periodic {
            self.cols
        } else {
            self.cols + 1
        }
    }

    fn vertex_rows(&self) -> usize {
        if self.periodic {
            self.rows
        } else {
            self.rows + 1
        }
    }

    pub fn vertex(&self, i: usize, j: usize) -> VertexId {
        let (vc, vr) = (self.vertex_cols(), self.vertex_rows());
        VertexId(((j % vr) * vc + (i % vc)) as u32)
    }

    pub fn face(&self, i: usize, j: usize) -> FaceId {
        FaceId((j * self.cols + i) as u32)
    }

    /// Grid coordinates of a face.
    pub fn face_coords(&self, f: FaceId) -> (usize, usize) {
        let k = f.0 as usize;
        (k % self.cols, k / self.cols)
    }

    pub fn vertex_coords(&self, v: VertexId) -> (usize, usize) {
        let k = v.0 as usize;
        (k % self.vertex_cols(), k / self.vertex_cols())
    }

    /// Horizontal edge leaving vertex `(i, j)` to the right.
    pub fn horizontal(&self, i: usize, j: usize) -> EdgeId {
        let (vc, vr) = (self.vertex_cols(), self.vertex_rows());
        EdgeId((2 * ((j % vr) * vc + (i % vc))) as u32)
    }

    /// Vertical edge leaving vertex `(i, j)` upwards.
    pub fn vertical(&self, i: usize, j: usize) -> EdgeId {
        let (vc, vr) = (self.vertex_cols(), self.vertex_rows());
        EdgeId((2 * ((j % vr) * vc + (i % vc)) + 1) as u32)
    }

    pub fn color(&self, i: usize, j: usize) -> Color {
        if (i + j) % 2 == 0 {
            Color::Plus
        } else {
            Color::Minus
        }
    }

    /// Parity class of a face: `(i + j) mod 2`.
    pub fn face_parity(&self, f: FaceId) -> usize {
        let (i, j) = self.face_coords(f);
        (i + j) % 2
    }
}

fn grid_lift(grid: &SquareGrid, i: usize, j: usize) -> Lift {
    if grid.periodic {
        Lift((i / grid.cols) as i32, (j / grid.rows) as i32)
    } else {
        Lift::ZERO
    }
}

fn build_grid(grid: SquareGrid) -> Result<SurfaceGraph, GraphError> {
    let (vc, vr) = (grid.vertex_cols(), grid.vertex_rows());
    let mut vertices = BTreeMap::new();
    for j in 0..vr {
        for i in 0..vc {
            vertices.insert(grid.vertex(i, j), grid.color(i, j));
        }
    }
    let mut edges = BTreeMap::new();
    let mut add = |id: EdgeId, (i0, j0): (usize, usize), (i1, j1): (usize, usize)| {
        let (u, v) = (grid.vertex(i0, j0), grid.vertex(i1, j1));
        let lift = grid_lift(&grid, i1, j1) - grid_lift(&grid, i0, j0);
        let edge = if grid.color(i0, j0) == Color::Minus {
            Edge { minus: u, plus: v, shift: lift }
        } else {
            Edge { minus: v, plus: u, shift: -lift }
        };
        edges.insert(id, edge);
    };
    for j in 0..vr {
        for i in 0..vc {
            if grid.periodic || i < grid.cols {
                add(grid.horizontal(i, j), (i, j), (i + 1, j));
            }
            if grid.periodic || j < grid.rows {
                add(grid.vertical(i, j), (i, j), (i, j + 1));
            }
        }
    }
    let mut faces = BTreeMap::new();
    for j in 0..grid.rows {
        for i in 0..grid.cols {
            let face = Face {
                vertices: vec![
                    grid.vertex(i, j),
                    grid.vertex(i + 1, j),
                    grid.vertex(i + 1, j + 1),
                    grid.vertex(i, j + 1),
                ],
                edges: vec![
                    grid.horizontal(i, j),
                    grid.vertical(i + 1, j),
                    grid.horizontal(i, j + 1),
                    grid.vertical(i, j),
                ],
                anchor: Lift::ZERO,
            };
            faces.insert(grid.face(i, j), face);
        }
    }
    let surface = if grid.periodic { Surface::Torus } else { Surface::PlanePatch };
    SurfaceGraph::from_parts(surface, vertices, edges, faces)
}

/// The checkerboard-colored square grid on a `rows x cols` torus, with
/// periods `cols` and `rows * i`.
pub fn build_square_grid_torus(rows: usize, cols: usize) -> Result<SurfaceGraph, GraphError> {
    if rows < 2 || cols < 2 || rows % 2 != 0 || cols % 2 != 0 {
        return Err(GraphError::OddDimensions { rows, cols });
    }
    build_grid(SquareGrid { rows, cols, periodic: true })
}

/// A `rows x cols` window of the square grid as a plane patch.
pub fn build_square_grid_patch(rows: usize, cols: usize) -> Result<SurfaceGraph, GraphError> {
    if rows == 0 || cols == 0 {
        return Err(GraphError::OddDimensions { rows, cols });
    }
    build_grid(SquareGrid { rows, cols, periodic: false })
}

/// The cube on the sphere: every vertex has degree 3, every face is a quad.
/// Vertex `k` sits at the corner with coordinates given by the bits of `k`
/// (x = bit 0, y = bit 1, z = bit 2).
pub fn build_cube() -> SurfaceGraph {
    let v = |x: u32, y: u32, z: u32| VertexId(x | (y << 1) | (z << 2));
    let colors: Vec<(VertexId, Color)> =
        (0..8u32).map(|k| (VertexId(k), if k.count_ones() % 2 == 0 { Color::Plus } else { Color::Minus })).collect();
    // Counter-clockwise as seen from outside.
    let cycles = vec![
        (FaceId(0), vec![v(0, 0, 0), v(0, 1, 0), v(1, 1, 0), v(1, 0, 0)]),
        (FaceId(1), vec![v(0, 0, 1), v(1, 0, 1), v(1, 1, 1), v(0, 1, 1)]),
        (FaceId(2), vec![v(0, 0, 0), v(1, 0, 0), v(1, 0, 1), v(0, 0, 1)]),
        (FaceId(3), vec![v(1, 1, 0), v(0, 1, 0), v(0, 1, 1), v(1, 1, 1)]),
        (FaceId(4), vec![v(0, 1, 0), v(0, 0, 0), v(0, 0, 1), v(0, 1, 1)]),
        (FaceId(5), vec![v(1, 0, 0), v(1, 1, 0), v(1, 1, 1), v(1, 0, 1)]),
    ];
    SurfaceGraph::from_vertex_cycles(Surface::Sphere, &colors, &cycles).expect("cube walks are consistent")
}

/// A 4-cycle drawn on the sphere: two quadrilateral faces glued along it.
pub fn build_four_cycle() -> SurfaceGraph {
    let colors = [
        (VertexId(0), Color::Plus),
        (VertexId(1), Color::Minus),
        (VertexId(2), Color::Plus),
        (VertexId(3), Color::Minus),
    ];
    let cycles = vec![
        (FaceId(0), vec![VertexId(0), VertexId(1), VertexId(2), VertexId(3)]),
        (FaceId(1), vec![VertexId(3), VertexId(2), VertexId(1), VertexId(0)]),
    ];
    SurfaceGraph::from_vertex_cycles(Surface::Sphere, &colors, &cycles).expect("4-cycle walks are consistent")
}

/// Every face whose quad data admits a mutation.
pub fn mutable_faces(g: &SurfaceGraph) -> Vec<FaceId> {
    g.face_ids().filter(|&f| g.quad_info(f).is_ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triangle() -> SurfaceGraph {
        let colors = [(VertexId(0), Color::Plus), (VertexId(1), Color::Minus), (VertexId(2), Color::Plus)];
        let cycles = vec![
            (FaceId(0), vec![VertexId(0), VertexId(1), VertexId(2)]),
            (FaceId(1), vec![VertexId(2), VertexId(1), VertexId(0)]),
        ];
        SurfaceGraph::from_vertex_cycles(Surface::Sphere, &colors, &cycles).unwrap()
    }

    fn test_graphs() -> Vec<SurfaceGraph> {
        vec![
            build_cube(),
            build_square_grid_torus(2, 2).unwrap(),
            build_square_grid_torus(4, 4).unwrap(),
            build_square_grid_torus(2, 4).unwrap(),
            build_square_grid_torus(6, 4).unwrap(),
            build_square_grid_patch(5, 5).unwrap(),
        ]
    }

    #[test]
    fn grid_torus_counts() {
        let g = build_square_grid_torus(2, 2).unwrap();
        assert_eq!((g.vertices().len(), g.edges().len(), g.faces().len()), (4, 8, 4));
        assert_eq!(validate_surface_graph(&g), vec![]);
        let g = build_square_grid_torus(4, 4).unwrap();
        assert_eq!((g.vertices().len(), g.edges().len(), g.faces().len()), (16, 32, 16));
        assert_eq!(validate_surface_graph(&g), vec![]);
        assert_eq!(build_square_grid_torus(3, 3), Err(GraphError::OddDimensions { rows: 3, cols: 3 }));
    }

    #[test]
    fn cube_and_patch_are_valid() {
        assert_eq!(validate_surface_graph(&build_cube()), vec![]);
        assert_eq!(validate_surface_graph(&build_square_grid_patch(3, 4).unwrap()), vec![]);
    }

    #[test]
    fn four_cycle_has_degree_two_vertices() {
        let g = build_four_cycle();
        let v = validate_surface_graph(&g);
        assert_eq!(v.len(), 4);
        assert!(v.iter().all(|x| matches!(x, Violation::VertexDegree { degree: 2, .. })));
    }

    #[test]
    fn triangle_violations() {
        let v = validate_surface_graph(&triangle());
        assert!(v.iter().any(|x| matches!(x, Violation::NotBipartite { .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::VertexDegree { degree: 2, .. })));
    }

    #[test]
    fn broken_orientation_is_reported() {
        let mut faces = build_cube().faces().clone();
        let f = faces.get_mut(&FaceId(0)).unwrap();
        f.vertices.reverse();
        f.edges.reverse();
        f.edges.rotate_left(1);
        let g = SurfaceGraph::from_parts(
            Surface::Sphere,
            build_cube().vertices().clone(),
            build_cube().edges().clone(),
            faces,
        )
        .unwrap();
        assert!(validate_surface_graph(&g).iter().any(|x| matches!(x, Violation::DualOrientation { .. })));
    }

    #[test]
    fn dual_edges_turn_counterclockwise_around_plus_vertices() {
        // Around the + vertex (0,0) of the 4x4 torus the faces in
        // counter-clockwise order are (0,0), (3,0), (3,3), (0,3).
        let grid = SquareGrid { rows: 4, cols: 4, periodic: true };
        let g = build_square_grid_torus(4, 4).unwrap();
        let v = grid.vertex(0, 0);
        assert_eq!(g.color(v), Some(Color::Plus));
        let ring = [grid.face(0, 0), grid.face(3, 0), grid.face(3, 3), grid.face(0, 3)];
        let dual = g.dual_edges();
        for k in 0..4 {
            let (a, b) = (ring[k], ring[(k + 1) % 4]);
            let e = dual
                .iter()
                .find(|(e, x, y)| {
                    let edge = g.edge(*e).unwrap();
                    (edge.minus == v || edge.plus == v) && ((*x == a && *y == b) || (*x == b && *y == a))
                })
                .unwrap();
            assert_eq!((e.1, e.2), (a, b));
        }
    }

    #[test]
    fn edge_neighbourhood_of_grid_face() {
        let g = build_square_grid_torus(4, 4).unwrap();
        let grid = SquareGrid { rows: 4, cols: 4, periodic: true };
        let f = grid.face(1, 1);
        let n = edge_neighbourhood(&g, f).unwrap();
        let own: BTreeSet<EdgeId> = g.face(f).unwrap().edges.iter().copied().collect();
        assert_eq!(n, own);
        assert!(matches!(edge_neighbourhood(&build_four_cycle(), FaceId(0)), Err(GraphError::NotAValidQuad { .. })));
    }

    #[test]
    fn grid_mutation_inserts_four_vertices() {
        let g = build_square_grid_torus(4, 4).unwrap();
        let f = FaceId(5);
        let (h, rec) = g.mutate_with_record(f).unwrap();
        assert_eq!(validate_surface_graph(&h), vec![]);
        assert_eq!(h.vertices().len(), 20);
        assert_eq!(h.edges().len(), 36);
        assert_eq!(h.face(f).unwrap().degree(), 4);
        assert!(rec.corners.iter().all(|c| c.inserted));
        // The old corners now have degree 3 and every neighbour is a hexagon.
        for c in &rec.corners {
            assert_eq!(h.degree(c.old), 3);
            assert_eq!(h.degree(c.new), 3);
        }
        for s in g.dual_slots(f).unwrap() {
            assert_eq!(h.face(s.neighbor.unwrap()).unwrap().degree(), 6);
        }
        // Every dual edge at f flips.
        let before = g.dual_slots(f).unwrap();
        let after = h.dual_slots(f).unwrap();
        for s in &before {
            let t = after.iter().find(|t| t.edge == s.edge).unwrap();
            assert_ne!(s.direction, t.direction);
            assert_eq!(s.neighbor, t.neighbor);
        }
    }

    #[test]
    fn cube_mutation_creates_digons() {
        let g = build_cube();
        let (h, rec) = g.mutate_with_record(FaceId(0)).unwrap();
        assert_eq!(validate_surface_graph(&h), vec![]);
        assert_eq!((h.vertices().len(), h.edges().len(), h.faces().len()), (4, 8, 6));
        assert!(rec.corners.iter().all(|c| !c.inserted));
        for f in [2, 3, 4, 5] {
            assert_eq!(h.face(FaceId(f)).unwrap().degree(), 2);
        }
        // The moved face now shares its vertices with the opposite face.
        let mut a = h.face(FaceId(0)).unwrap().vertices.clone();
        let mut b = h.face(FaceId(1)).unwrap().vertices.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn mutation_is_local() {
        for g in test_graphs() {
            for f in mutable_faces(&g) {
                let n = edge_neighbourhood(&g, f).unwrap();
                let h = g.mutate_at_face(f).unwrap();
                let n2 = edge_neighbourhood(&h, f).unwrap();
                for (&e, edge) in g.edges() {
                    if !n.contains(&e) {
                        assert_eq!(h.edge(e), Some(edge));
                        let mut s1: Vec<FaceId> = g.edge_faces(e).iter().map(|s| s.0).collect();
                        let mut s2: Vec<FaceId> = h.edge_faces(e).iter().map(|s| s.0).collect();
                        s1.sort();
                        s2.sort();
                        assert_eq!(s1, s2);
                        assert!(!n2.contains(&e));
                    }
                }
                let changed: BTreeSet<EdgeId> =
                    g.edge_ids().chain(h.edge_ids()).filter(|&e| g.edge(e) != h.edge(e)).collect();
                assert!(changed.iter().all(|e| n.contains(e) || n2.contains(e)));
            }
        }
    }

    #[test]
    fn mutation_is_an_involution_on_all_quads() {
        for g in test_graphs() {
            let faces = mutable_faces(&g);
            assert!(!faces.is_empty());
            for f in faces {
                let h = g.mutate_at_face(f).unwrap();
                assert_eq!(validate_surface_graph(&h), vec![], "face {f}");
                let ids: Vec<FaceId> = h.face_ids().collect();
                assert_eq!(ids, g.face_ids().collect::<Vec<_>>());
                assert_eq!(h.mutate_at_face(f).unwrap(), g, "face {f}");
            }
        }
    }

    #[test]
    fn patch_boundary_faces_are_frozen() {
        let g = build_square_grid_patch(5, 5).unwrap();
        let grid = SquareGrid { rows: 5, cols: 5, periodic: false };
        assert!(matches!(g.quad_info(grid.face(0, 2)), Err(GraphError::BoundaryAdjacent(_))));
        assert!(matches!(g.quad_info(grid.face(1, 2)), Err(GraphError::BoundaryAdjacent(_))));
        assert!(g.quad_info(grid.face(2, 2)).is_ok());
    }

    #[test]
    fn rename_vertex_keeps_structure() {
        let g = build_square_grid_torus(2, 2).unwrap();
        let mut h = g.clone();
        h.rename_vertex(VertexId(0), VertexId(99));
        assert_eq!(validate_surface_graph(&h), vec![]);
        h.rename_vertex(VertexId(99), VertexId(0));
        assert_eq!(h, g);
    }

    #[test]
    fn edge_cycles_round_trip() {
        let g = build_square_grid_torus(4, 4).unwrap().mutate_at_face(FaceId(5)).unwrap();
        let faces =
            g.faces().iter().map(|(&f, face)| (f, (face.edges.clone(), Some(face.vertices[0]), face.anchor))).collect();
        let h = SurfaceGraph::from_edge_cycles(Surface::Torus, g.vertices().clone(), g.edges().clone(), faces).unwrap();
        assert_eq!(h, g);
    }

    proptest! {
        #[test]
        fn random_mutation_sequences_undo(seq in proptest::collection::vec(0u32..16, 1..12)) {
            let g0 = build_square_grid_torus(4, 4).unwrap();
            let mut g = g0.clone();
            let mut done = Vec::new();
            for f in seq {
                if let Ok(h) = g.mutate_at_face(FaceId(f)) {
                    prop_assert_eq!(validate_surface_graph(&h), vec![]);
                    g = h;
                    done.push(FaceId(f));
                }
            }
            for f in done.into_iter().rev() {
                g = g.mutate_at_face(f).unwrap();
            }
            prop_assert_eq!(g, g0);
        }
    }
}
