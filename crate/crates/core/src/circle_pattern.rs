//! Circle patterns on bipartite quad graphs and their center drawings.
//!
//! A [`CirclePattern`] assigns a point to every vertex and a circle center to
//! every face so that the vertices of each face are concyclic. On the torus
//! the drawing lives on the universal cover: each vertex stores one
//! representative, and a vertex with lift `l` in a face frame sits at
//! `z(v) + l.0 * p0 + l.1 * p1` for the periods `p0, p1`.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;
use core::fmt;

use crate::clifford::{build_c4, CliffordError, Subset};
use crate::geometry::{
    apply_mobius, circle_center_of, circumcircle, intersect_circles, mobius_mutation, reflect_in_line, star_ratio,
    star_ratio_general, Circle, Complex, ExtendedComplex, GeometryError, Intersection,
};
use crate::surface_graph::{
    build_square_grid_patch, build_square_grid_torus, Direction, DualSlot, EdgeId, FaceId, GraphError, Lift,
    MutationRecord, SquareGrid, Surface, SurfaceGraph, VertexId,
};

/// Relative tolerance for concyclicity and the reality of star-ratios.
pub const PATTERN_TOL: f64 = 1e-9;
/// Closure tolerance for propagation around faces, relative to the radius.
pub const CLOSURE_TOL: f64 = 1e-8;
/// A Miquel construction whose fourth point misses the circle through the
/// other three by more than this (relative to the radius) is rejected.
pub const MIQUEL_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum PatternError {
    Geometry(GeometryError),
    Graph(GraphError),
    Clifford(CliffordError),
    MissingPoint(VertexId),
    MissingCenter(FaceId),
    InvalidFace { face: FaceId, reason: &'static str },
    CollinearCenters(FaceId),
    NumericalTangencyAmbiguity { face: FaceId, corner: usize },
    MiquelFailure { face: FaceId, residual: f64 },
    NonRealStarRatios(FaceId),
    MonodromyFailure { face: FaceId, residual: f64 },
    DegenerateReflectionLine(EdgeId),
    DegenerateSeed(EdgeId),
    InfiniteCenter(FaceId),
    ConcyclicDegenerate(FaceId),
    ConstructionFailure { face: FaceId, residual: f64 },
    Disconnected(VertexId),
}

impl fmt::Display for PatternError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternError::Geometry(e) => write!(f, "{e}"),
            PatternError::Graph(e) => write!(f, "{e}"),
            PatternError::Clifford(e) => write!(f, "{e}"),
            PatternError::MissingPoint(v) => write!(f, "vertex {v} has no point"),
            PatternError::MissingCenter(face) => write!(f, "face {face} has no center"),
            PatternError::InvalidFace { face, reason } => write!(f, "face {face} cannot be moved: {reason}"),
            PatternError::CollinearCenters(face) => {
                write!(f, "face {face} and its four neighbours have collinear centers")
            }
            PatternError::NumericalTangencyAmbiguity { face, corner } => {
                write!(f, "circles at corner {corner} of face {face} do not meet")
            }
            PatternError::MiquelFailure { face, residual } => {
                write!(f, "Miquel points of face {face} are not concyclic (residual {residual:.3e})")
            }
            PatternError::NonRealStarRatios(face) => write!(f, "star-ratio at face {face} is not real"),
            PatternError::MonodromyFailure { face, residual } => {
                write!(f, "propagation does not close at face {face} (residual {residual:.3e})")
            }
            PatternError::DegenerateReflectionLine(e) => {
                write!(f, "the faces on both sides of edge {e} have the same center")
            }
            PatternError::DegenerateSeed(e) => write!(f, "seed puts both ends of edge {e} on one point"),
            PatternError::InfiniteCenter(face) => write!(f, "face {face} has its center at infinity"),
            PatternError::ConcyclicDegenerate(face) => {
                write!(f, "face {face} and its neighbours are concyclic")
            }
            PatternError::ConstructionFailure { face, residual } => {
                write!(f, "Clifford circles at face {face} do not concur (residual {residual:.3e})")
            }
            PatternError::Disconnected(v) => write!(f, "vertex {v} is not reachable from the seed"),
        }
    }
}

impl From<GeometryError> for PatternError {
    fn from(e: GeometryError) -> Self {
        PatternError::Geometry(e)
    }
}

impl From<GraphError> for PatternError {
    fn from(e: GraphError) -> Self {
        PatternError::Graph(e)
    }
}

impl From<CliffordError> for PatternError {
    fn from(e: CliffordError) -> Self {
        PatternError::Clifford(e)
    }
}

fn lift_vector(periods: Option<[Complex; 2]>, l: Lift) -> Complex {
    match periods {
        Some([p, q]) => p * l.0 as f64 + q * l.1 as f64,
        None => Complex::new(0.0, 0.0),
    }
}

fn distance(a: ExtendedComplex, b: ExtendedComplex) -> f64 {
    match (a, b) {
        (ExtendedComplex::Finite(x), ExtendedComplex::Finite(y)) => (x - y).norm(),
        (ExtendedComplex::Infinity, ExtendedComplex::Infinity) => 0.0,
        _ => f64::INFINITY,
    }
}

/// A point per face: the centers `z*` of a pattern, or any face drawing.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceDrawing {
    pub graph: SurfaceGraph,
    pub points: BTreeMap<FaceId, ExtendedComplex>,
    /// Translations of the torus cover; `None` on the sphere and on patches.
    pub periods: Option<[Complex; 2]>,
}

impl FaceDrawing {
    pub fn new(graph: SurfaceGraph, points: BTreeMap<FaceId, ExtendedComplex>, periods: Option<[Complex; 2]>) -> Self {
        FaceDrawing { graph, points, periods }
    }

    pub fn lift(&self, l: Lift) -> Complex {
        lift_vector(self.periods, l)
    }

    pub fn point(&self, f: FaceId) -> Result<ExtendedComplex, PatternError> {
        self.points.get(&f).copied().ok_or(PatternError::MissingCenter(f))
    }

    /// The neighbours of `f` with their points carried into the frame of `f`.
    pub fn neighbours(&self, f: FaceId) -> Result<Vec<(DualSlot, Option<ExtendedComplex>)>, PatternError> {
        let slots = self.graph.dual_slots(f).ok_or(GraphError::UnknownFace(f))?;
        slots
            .into_iter()
            .map(|s| match s.neighbor {
                Some(g) => Ok((s, Some(self.point(g)?.translate(self.lift(s.translation))))),
                None => Ok((s, None)),
            })
            .collect()
    }

    /// Star-ratio at an interior face: incoming dual neighbours in the
    /// numerator, outgoing ones in the denominator. `None` for boundary faces.
    pub fn star_ratio_at(&self, f: FaceId) -> Result<Option<ExtendedComplex>, PatternError> {
        let y = self.point(f)?;
        let mut num = Vec::new();
        let mut den = Vec::new();
        for (slot, p) in self.neighbours(f)? {
            let Some(p) = p else { return Ok(None) };
            match slot.direction {
                Direction::Incoming => num.push(p),
                Direction::Outgoing => den.push(p),
            }
        }
        Ok(Some(star_ratio_general(y, &num, &den)?))
    }

    /// Faces whose point coincides with the point of a face across an edge.
    pub fn coincident_edges(&self) -> Vec<EdgeId> {
        let mut out = Vec::new();
        for (e, from, to) in self.graph.dual_edges() {
            let (Some(&a), Ok(slots)) = (self.points.get(&from), self.neighbours(from)) else { continue };
            for (slot, p) in slots {
                if slot.edge == e && slot.neighbor == Some(to) {
                    if let Some(p) = p {
                        if a.coincides(&p) {
                            out.push(e);
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StarRatioClass {
    Generic,
    Real,
    RealPositive,
}

impl StarRatioClass {
    pub fn of(value: ExtendedComplex) -> Self {
        match value {
            ExtendedComplex::Infinity => StarRatioClass::Real,
            ExtendedComplex::Finite(z) => {
                if z.im.abs() > PATTERN_TOL * z.norm() {
                    StarRatioClass::Generic
                } else if z.re > 0.0 {
                    StarRatioClass::RealPositive
                } else {
                    StarRatioClass::Real
                }
            }
        }
    }

    pub fn is_real(self) -> bool {
        self != StarRatioClass::Generic
    }
}

/// Star-ratios of a face drawing at its interior faces.
#[derive(Clone, Debug, PartialEq)]
pub struct StarRatioField {
    pub values: BTreeMap<FaceId, ExtendedComplex>,
    pub classes: BTreeMap<FaceId, StarRatioClass>,
}

impl StarRatioField {
    pub fn is_real(&self) -> bool {
        self.classes.values().all(|c| c.is_real())
    }

    /// All star-ratios real and positive.
    pub fn is_kasteleyn(&self) -> bool {
        self.classes.values().all(|&c| c == StarRatioClass::RealPositive)
    }

    pub fn first_non_real(&self) -> Option<FaceId> {
        self.classes.iter().find(|(_, c)| !c.is_real()).map(|(&f, _)| f)
    }
}

pub fn pattern_star_ratios(d: &FaceDrawing) -> Result<StarRatioField, PatternError> {
    let mut values = BTreeMap::new();
    let mut classes = BTreeMap::new();
    for f in d.graph.face_ids() {
        if let Some(sr) = d.star_ratio_at(f)? {
            values.insert(f, sr);
            classes.insert(f, StarRatioClass::of(sr));
        }
    }
    Ok(StarRatioField { values, classes })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CirclePattern {
    pub vertex_points: BTreeMap<VertexId, ExtendedComplex>,
    pub centers: FaceDrawing,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PatternViolation {
    MissingPoint(VertexId),
    MissingCenter(FaceId),
    NotConcyclic { face: FaceId, residual: f64 },
    VertexDrawing(EdgeId),
    FaceDrawing(EdgeId),
    NonRealStarRatio { face: FaceId, value: ExtendedComplex },
    IndeterminateStarRatio(FaceId),
}

impl fmt::Display for PatternViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternViolation::MissingPoint(v) => write!(f, "vertex {v} has no point"),
            PatternViolation::MissingCenter(face) => write!(f, "face {face} has no center"),
            PatternViolation::NotConcyclic { face, residual } => {
                write!(f, "vertices of face {face} are off its circle (residual {residual:.3e})")
            }
            PatternViolation::VertexDrawing(e) => write!(f, "both ends of edge {e} are drawn at one point"),
            PatternViolation::FaceDrawing(e) => write!(f, "the faces across edge {e} share their center"),
            PatternViolation::NonRealStarRatio { face, value } => {
                write!(f, "star-ratio {value} at face {face} is not real")
            }
            PatternViolation::IndeterminateStarRatio(face) => write!(f, "star-ratio at face {face} is undefined"),
        }
    }
}

/// Residual of `points` lying on a common circle about `center`: relative
/// to the mean radius, or for `center = ∞` the relative distance from the
/// line through the two farthest points.
pub fn concyclicity_residual(center: ExtendedComplex, points: &[ExtendedComplex]) -> f64 {
    match center {
        ExtendedComplex::Finite(c) => {
            let mut radii = Vec::with_capacity(points.len());
            for p in points {
                match p.finite() {
                    Some(z) => radii.push((z - c).norm()),
                    None => return f64::INFINITY,
                }
            }
            if radii.is_empty() {
                return 0.0;
            }
            let r = radii.iter().sum::<f64>() / radii.len() as f64;
            if r == 0.0 {
                return f64::INFINITY;
            }
            radii.iter().map(|x| (x - r).abs()).fold(0.0, f64::max) / r
        }
        ExtendedComplex::Infinity => collinearity_residual(points),
    }
}

/// Largest distance from the line through the two farthest finite points,
/// relative to their distance.
fn collinearity_residual(points: &[ExtendedComplex]) -> f64 {
    let finite: Vec<Complex> = points.iter().filter_map(|p| p.finite()).collect();
    let mut best = (0.0, 0, 0);
    for i in 0..finite.len() {
        for j in (i + 1)..finite.len() {
            let d = (finite[i] - finite[j]).norm();
            if d > best.0 {
                best = (d, i, j);
            }
        }
    }
    if best.0 == 0.0 {
        return 0.0;
    }
    let (a, dir) = (finite[best.1], (finite[best.2] - finite[best.1]) / best.0);
    finite.iter().map(|&z| ((z - a) * dir.conj()).im.abs()).fold(0.0, f64::max) / best.0
}

impl CirclePattern {
    pub fn new(vertex_points: BTreeMap<VertexId, ExtendedComplex>, centers: FaceDrawing) -> Self {
        CirclePattern { vertex_points, centers }
    }

    pub fn graph(&self) -> &SurfaceGraph {
        &self.centers.graph
    }

    pub fn periods(&self) -> Option<[Complex; 2]> {
        self.centers.periods
    }

    pub fn point(&self, v: VertexId) -> Result<ExtendedComplex, PatternError> {
        self.vertex_points.get(&v).copied().ok_or(PatternError::MissingPoint(v))
    }

    /// The walk vertices of `f`, drawn in the frame of `f`.
    pub fn face_points(&self, f: FaceId) -> Result<Vec<ExtendedComplex>, PatternError> {
        let face = self.graph().face(f).ok_or(GraphError::UnknownFace(f))?;
        let offsets = self.graph().face_offsets(f).ok_or(GraphError::UnknownFace(f))?;
        face.vertices.iter().zip(offsets).map(|(&v, o)| Ok(self.point(v)?.translate(self.centers.lift(o)))).collect()
    }

    /// The circle of face `f` in its own frame.
    pub fn circle(&self, f: FaceId) -> Result<Circle, PatternError> {
        let pts = self.face_points(f)?;
        let center = self.centers.point(f)?;
        match center {
            ExtendedComplex::Finite(c) => {
                let finite: Vec<Complex> = pts.iter().filter_map(|p| p.finite()).collect();
                if finite.is_empty() {
                    return Err(PatternError::MissingPoint(self.graph().face(f).unwrap().vertices[0]));
                }
                let r = finite.iter().map(|z| (z - c).norm()).sum::<f64>() / finite.len() as f64;
                Ok(Circle::round(c, r))
            }
            ExtendedComplex::Infinity => {
                let finite: Vec<Complex> = pts.iter().filter_map(|p| p.finite()).collect();
                if finite.len() < 2 {
                    return Err(PatternError::InfiniteCenter(f));
                }
                Ok(Circle::line(finite[0], finite[1]))
            }
        }
    }

    /// The largest concyclicity residual over all faces.
    pub fn max_concyclicity_residual(&self) -> f64 {
        self.graph()
            .face_ids()
            .map(|f| match (self.centers.point(f), self.face_points(f)) {
                (Ok(c), Ok(pts)) => concyclicity_residual(c, &pts),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}

pub fn validate_pattern(p: &CirclePattern) -> Vec<PatternViolation> {
    let mut out = Vec::new();
    let g = p.graph();
    for v in g.vertex_ids() {
        if !p.vertex_points.contains_key(&v) {
            out.push(PatternViolation::MissingPoint(v));
        }
    }
    for f in g.face_ids() {
        if !p.centers.points.contains_key(&f) {
            out.push(PatternViolation::MissingCenter(f));
        }
    }
    if !out.is_empty() {
        return out;
    }
    for f in g.face_ids() {
        let pts = p.face_points(f).expect("points checked above");
        let residual = concyclicity_residual(p.centers.points[&f], &pts);
        if residual > PATTERN_TOL {
            out.push(PatternViolation::NotConcyclic { face: f, residual });
        }
        let face = g.face(f).unwrap();
        for i in 0..face.degree() {
            let e = face.edges[i];
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            if a.coincides(&b) && !out.contains(&PatternViolation::VertexDrawing(e)) {
                out.push(PatternViolation::VertexDrawing(e));
            }
        }
    }
    for e in p.centers.coincident_edges() {
        out.push(PatternViolation::FaceDrawing(e));
    }
    for f in g.face_ids() {
        match p.centers.star_ratio_at(f) {
            Ok(Some(value)) if !StarRatioClass::of(value).is_real() => {
                out.push(PatternViolation::NonRealStarRatio { face: f, value })
            }
            Ok(_) => {}
            Err(_) => out.push(PatternViolation::IndeterminateStarRatio(f)),
        }
    }
    out
}

/// Rebuilds the vertex points from the centers by reflecting across the
/// lines that join the centers of adjacent faces, breadth-first from the
/// seed. Corners of a plane patch that no reflection reaches are placed
/// diametrically opposite the far corner of their face.
pub fn propagate_from_centers(
    d: &FaceDrawing,
    seed_vertex: VertexId,
    seed_point: ExtendedComplex,
) -> Result<CirclePattern, PatternError> {
    let g = &d.graph;
    if g.color(seed_vertex).is_none() {
        return Err(GraphError::UnknownVertex(seed_vertex).into());
    }
    let mut centers = BTreeMap::new();
    for f in g.face_ids() {
        let c = d.point(f)?.finite().ok_or(PatternError::InfiniteCenter(f))?;
        centers.insert(f, c);
    }
    let field = pattern_star_ratios(d)?;
    if let Some(f) = field.first_non_real() {
        return Err(PatternError::NonRealStarRatios(f));
    }
    let seed = seed_point.finite().ok_or(PatternError::MissingPoint(seed_vertex))?;

    // Incidences: vertex -> (face, walk position).
    let mut incidences: BTreeMap<VertexId, Vec<(FaceId, usize)>> = BTreeMap::new();
    let mut offsets = BTreeMap::new();
    let mut slots = BTreeMap::new();
    for (&f, face) in g.faces() {
        for (i, &v) in face.vertices.iter().enumerate() {
            incidences.entry(v).or_default().push((f, i));
        }
        offsets.insert(f, g.face_offsets(f).unwrap());
        slots.insert(f, g.dual_slots(f).unwrap());
    }
    // Reflection across edge k of f maps corner k to corner k + 1 and back.
    let reflect = |f: FaceId, k: usize, z: Complex| -> Result<Option<Complex>, PatternError> {
        let slot = slots[&f][k];
        let Some(n) = slot.neighbor else { return Ok(None) };
        let a = centers[&f];
        let b = centers[&n] + d.lift(slot.translation);
        if ExtendedComplex::from(a).coincides(&b.into()) {
            return Err(PatternError::DegenerateReflectionLine(slot.edge));
        }
        Ok(reflect_in_line(z.into(), a.into(), b.into())?.finite())
    };

    let mut known: BTreeMap<VertexId, Complex> = BTreeMap::new();
    known.insert(seed_vertex, seed);
    let mut queue = VecDeque::from([seed_vertex]);
    loop {
        while let Some(v) = queue.pop_front() {
            for &(f, i) in incidences.get(&v).into_iter().flatten() {
                let face = g.face(f).unwrap();
                let n = face.degree();
                let off = &offsets[&f];
                let here = known[&v] + d.lift(off[i]);
                for (k, j) in [(i, (i + 1) % n), ((i + n - 1) % n, (i + n - 1) % n)] {
                    let w = face.vertices[j];
                    if known.contains_key(&w) {
                        continue;
                    }
                    if let Some(img) = reflect(f, k, here)? {
                        known.insert(w, img - d.lift(off[j]));
                        queue.push_back(w);
                    }
                }
            }
        }
        if known.len() == g.vertices().len() {
            break;
        }
        // Corners reached by no reflection: opposite the far corner of the
        // face if that is known, else opposite any known corner.
        let mut placed = None;
        'passes: for diagonal_only in [true, false] {
            for (&f, face) in g.faces() {
                let n = face.degree();
                let off = &offsets[&f];
                for i in 0..n {
                    let v = face.vertices[i];
                    if known.contains_key(&v) {
                        continue;
                    }
                    let far = if diagonal_only {
                        Some((i + n / 2) % n).filter(|&j| known.contains_key(&face.vertices[j]))
                    } else {
                        (0..n).find(|&j| known.contains_key(&face.vertices[j]))
                    };
                    if let Some(j) = far {
                        let there = known[&face.vertices[j]] + d.lift(off[j]);
                        placed = Some((v, centers[&f] * 2.0 - there - d.lift(off[i])));
                        break 'passes;
                    }
                }
            }
        }
        match placed {
            Some((v, z)) => {
                known.insert(v, z);
                queue.push_back(v);
            }
            None => {
                let missing = g.vertex_ids().find(|v| !known.contains_key(v)).unwrap();
                return Err(PatternError::Disconnected(missing));
            }
        }
    }

    // Every reflection must close up.
    for (&f, face) in g.faces() {
        let n = face.degree();
        let off = &offsets[&f];
        let pos = |j: usize| known[&face.vertices[j]] + d.lift(off[j]);
        let radius = (pos(0) - centers[&f]).norm().max(f64::MIN_POSITIVE);
        for k in 0..n {
            if let Some(img) = reflect(f, k, pos(k))? {
                let residual = (img - pos((k + 1) % n)).norm() / radius;
                if residual > CLOSURE_TOL {
                    return Err(PatternError::MonodromyFailure { face: f, residual });
                }
            }
            if ExtendedComplex::from(pos(k)).coincides(&pos((k + 1) % n).into()) {
                return Err(PatternError::DegenerateSeed(face.edges[k]));
            }
        }
        let pts: Vec<ExtendedComplex> = (0..n).map(|j| pos(j).into()).collect();
        let residual = concyclicity_residual(centers[&f].into(), &pts);
        if residual > CLOSURE_TOL {
            return Err(PatternError::MonodromyFailure { face: f, residual });
        }
    }
    let vertex_points = known.into_iter().map(|(v, z)| (v, z.into())).collect();
    Ok(CirclePattern { vertex_points, centers: d.clone() })
}

/// Result of the local Miquel construction at one face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MiquelOutcome {
    /// New corner points; corner `k` lies on the neighbour circles `k - 1` and `k`.
    pub points: [ExtendedComplex; 4],
    pub circle: Circle,
    pub center: ExtendedComplex,
    /// Distance of the fourth point from the circle through the other three,
    /// relative to its radius.
    pub residual: f64,
}

/// Miquel's construction at a face with center `center`, corners
/// `corners[k]` and neighbour `k` across the side from corner `k` to `k + 1`
/// with center `neighbor_centers[k]`. Corners given in `fixed` are taken
/// as known second intersections.
pub fn miquel_construction(
    face: FaceId,
    center: ExtendedComplex,
    corners: [ExtendedComplex; 4],
    neighbor_centers: [ExtendedComplex; 4],
    fixed: [Option<ExtendedComplex>; 4],
) -> Result<MiquelOutcome, PatternError> {
    let mut five = Vec::from(neighbor_centers);
    five.push(center);
    if collinearity_residual(&five) <= PATTERN_TOL {
        return Err(PatternError::CollinearCenters(face));
    }
    let invalid = |reason| PatternError::InvalidFace { face, reason };
    for k in 0..4 {
        if neighbor_centers[k].coincides(&neighbor_centers[(k + 1) % 4]) {
            return Err(invalid("consecutive neighbour centers coincide"));
        }
    }
    let mut circles = [Circle::line(Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)); 4];
    for k in 0..4 {
        let (p, q) = (corners[k], corners[(k + 1) % 4]);
        circles[k] = match (neighbor_centers[k], p, q) {
            (ExtendedComplex::Infinity, ExtendedComplex::Finite(a), ExtendedComplex::Finite(b)) => Circle::line(a, b),
            (ExtendedComplex::Finite(c), ExtendedComplex::Finite(a), ExtendedComplex::Finite(b)) => {
                Circle::round(c, ((a - c).norm() + (b - c).norm()) / 2.0)
            }
            _ => return Err(invalid("corner at infinity")),
        };
    }
    let mut points = [ExtendedComplex::ZERO; 4];
    for k in 0..4 {
        if let Some(p) = fixed[k] {
            points[k] = p;
            continue;
        }
        // The second intersection mirrors the corner in the line of centers.
        let axis = |k: usize| -> Option<(Complex, Complex)> {
            match (neighbor_centers[k], circles[k]) {
                (ExtendedComplex::Finite(c), _) => Some((c, Complex::new(0.0, 0.0))),
                (_, Circle::Line { a, b }) => Some((Complex::new(0.0, 0.0), (b - a) * Complex::new(0.0, 1.0))),
                _ => None,
            }
        };
        let (prev, next) = ((k + 3) % 4, k);
        let corner = corners[k];
        if corner.is_infinite() {
            return Err(PatternError::NumericalTangencyAmbiguity { face, corner: k });
        }
        points[k] = match (
            axis(prev),
            neighbor_centers[prev].is_infinite(),
            axis(next),
            neighbor_centers[next].is_infinite(),
        ) {
            (Some((a, _)), false, Some((b, _)), false) => reflect_in_line(corner, a.into(), b.into())?,
            (Some((a, _)), false, Some((_, dir)), true) | (Some((_, dir)), true, Some((a, _)), false) => {
                reflect_in_line(corner, a.into(), (a + dir).into())?
            }
            _ => match intersect_circles(&circles[prev], &circles[next]) {
                Ok(Intersection::Pair(a, b)) => {
                    if distance(a, corner) >= distance(b, corner) {
                        a
                    } else {
                        b
                    }
                }
                Ok(_) => corner,
                Err(_) => return Err(invalid("adjacent neighbour circles coincide")),
            },
        };
        if points[k].coincides(&corner) {
            points[k] = corner;
        }
    }
    // Circle through the best separated three, checked on the fourth.
    let mut best: Option<(f64, usize)> = None;
    for skip in 0..4 {
        let idx: Vec<usize> = (0..4).filter(|&j| j != skip).collect();
        let sep = [(0, 1), (1, 2), (0, 2)]
            .iter()
            .map(|&(a, b)| distance(points[idx[a]], points[idx[b]]))
            .fold(f64::INFINITY, f64::min);
        if best.map_or(true, |(s, _)| sep > s) {
            best = Some((sep, skip));
        }
    }
    let (_, skip) = best.unwrap();
    let idx: Vec<usize> = (0..4).filter(|&j| j != skip).collect();
    let circle = circumcircle(points[idx[0]], points[idx[1]], points[idx[2]])
        .map_err(|_| PatternError::MiquelFailure { face, residual: f64::INFINITY })?;
    let residual = circle.residual(points[skip]);
    if !(residual <= MIQUEL_TOL) {
        return Err(PatternError::MiquelFailure { face, residual });
    }
    Ok(MiquelOutcome { points, circle, center: circle_center_of(&circle), residual })
}

/// Local data of a movable face: corner points and neighbour centers in
/// the frame of the face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalConfiguration {
    pub center: ExtendedComplex,
    pub corners: [ExtendedComplex; 4],
    pub neighbor_centers: [ExtendedComplex; 4],
}

impl CirclePattern {
    pub fn local_configuration(&self, f: FaceId) -> Result<LocalConfiguration, PatternError> {
        let q = self.graph().quad_info(f)?;
        let pts = self.face_points(f)?;
        let mut neighbor_centers = [ExtendedComplex::ZERO; 4];
        for k in 0..4 {
            neighbor_centers[k] = self.centers.point(q.neighbors[k])?.translate(self.centers.lift(q.translations[k]));
        }
        Ok(LocalConfiguration {
            center: self.centers.point(f)?,
            corners: [pts[0], pts[1], pts[2], pts[3]],
            neighbor_centers,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiquelMove {
    pub pattern: CirclePattern,
    pub record: MutationRecord,
    pub outcome: MiquelOutcome,
}

/// The Miquel move with its bookkeeping.
pub fn miquel_move_detailed(p: &CirclePattern, f: FaceId) -> Result<MiquelMove, PatternError> {
    let local = p.local_configuration(f)?;
    let (graph, record) = p.graph().mutate_with_record(f)?;
    let lift = |l: Lift| p.centers.lift(l);
    let mut fixed = [None; 4];
    for (k, c) in record.corners.iter().enumerate() {
        if !c.inserted {
            fixed[k] = Some(p.point(c.new)?.translate(lift(c.new_offset)));
        }
    }
    let outcome = miquel_construction(f, local.center, local.corners, local.neighbor_centers, fixed)?;
    let mut vertex_points = p.vertex_points.clone();
    for (k, c) in record.corners.iter().enumerate() {
        if c.inserted {
            vertex_points.insert(c.new, outcome.points[k].translate(-lift(c.new_offset)));
        } else {
            vertex_points.remove(&c.old);
        }
    }
    let mut points = p.centers.points.clone();
    points.insert(f, outcome.center);
    let pattern = CirclePattern { vertex_points, centers: FaceDrawing { graph, points, periods: p.periods() } };
    Ok(MiquelMove { pattern, record, outcome })
}

pub fn miquel_move(p: &CirclePattern, f: FaceId) -> Result<CirclePattern, PatternError> {
    miquel_move_detailed(p, f).map(|m| m.pattern)
}

/// Neighbour points of a quad face in its frame, in walk order.
pub fn quad_neighbours(d: &FaceDrawing, f: FaceId) -> Result<[ExtendedComplex; 4], PatternError> {
    let q = d.graph.quad_info(f)?;
    let mut out = [ExtendedComplex::ZERO; 4];
    for k in 0..4 {
        out[k] = d.point(q.neighbors[k])?.translate(d.lift(q.translations[k]));
    }
    Ok(out)
}

/// The image of `d(f)` under the mutation map of its four neighbours.
pub fn mobius_mutation_point(d: &FaceDrawing, f: FaceId) -> Result<ExtendedComplex, PatternError> {
    let n = quad_neighbours(d, f)?;
    let m = mobius_mutation(n[0], n[1], n[2], n[3])?;
    Ok(apply_mobius(&m, d.point(f)?))
}

pub fn mobius_mutation_move(d: &FaceDrawing, f: FaceId) -> Result<FaceDrawing, PatternError> {
    let z = mobius_mutation_point(d, f)?;
    let graph = d.graph.mutate_at_face(f)?;
    let mut points = d.points.clone();
    points.insert(f, z);
    Ok(FaceDrawing { graph, points, periods: d.periods })
}

/// The Clifford point of `d(f)` and its neighbours, built from circles as a
/// check on the closed form.
pub fn clifford_point_geometric(d: &FaceDrawing, f: FaceId) -> Result<ExtendedComplex, PatternError> {
    let j = quad_neighbours(d, f)?;
    let i = d.point(f)?;
    let through = |a: ExtendedComplex, b: ExtendedComplex| circumcircle(i, a, b);
    let first = through(j[0], j[1])?;
    if j.iter().all(|&p| first.residual(p) <= PATTERN_TOL) {
        return Err(PatternError::ConcyclicDegenerate(f));
    }
    let circles = [through(j[3], j[0])?, first, through(j[1], j[2])?, through(j[2], j[3])?];
    let cfg = build_c4(i, circles).map_err(|e| match e {
        CliffordError::ConcurrenceFailure { residual } => PatternError::ConstructionFailure { face: f, residual },
        other => PatternError::Clifford(other),
    })?;
    const TOP: Subset = 0b1111;
    Ok(cfg.point(TOP))
}

/// A drawing of the faces of a square grid from a coordinate function.
pub fn grid_drawing(
    graph: SurfaceGraph,
    grid: SquareGrid,
    periods: Option<[Complex; 2]>,
    mut at: impl FnMut(usize, usize) -> ExtendedComplex,
) -> FaceDrawing {
    let points = graph
        .face_ids()
        .map(|f| {
            let (i, j) = grid.face_coords(f);
            (f, at(i, j))
        })
        .collect();
    FaceDrawing { graph, points, periods }
}

/// Periods of the square grid torus with `rows x cols` unit faces.
pub fn grid_periods(rows: usize, cols: usize) -> [Complex; 2] {
    [Complex::new(cols as f64, 0.0), Complex::new(0.0, rows as f64)]
}

/// Centers on the integer lattice over the grid torus.
pub fn regular_centers(rows: usize, cols: usize) -> Result<FaceDrawing, PatternError> {
    let graph = build_square_grid_torus(rows, cols)?;
    let grid = SquareGrid { rows, cols, periodic: true };
    Ok(grid_drawing(graph, grid, Some(grid_periods(rows, cols)), |i, j| ExtendedComplex::new(i as f64, j as f64)))
}

/// The isoradial pattern: centers on `Z^2`, vertices at half-integer points.
pub fn regular_pattern(rows: usize, cols: usize) -> Result<CirclePattern, PatternError> {
    let centers = regular_centers(rows, cols)?;
    let grid = SquareGrid { rows, cols, periodic: true };
    Ok(CirclePattern { vertex_points: half_integer_vertices(&centers.graph, grid), centers })
}

/// The isoradial pattern on a plane patch of the grid.
pub fn regular_patch_pattern(rows: usize, cols: usize) -> Result<CirclePattern, PatternError> {
    let graph = build_square_grid_patch(rows, cols)?;
    let grid = SquareGrid { rows, cols, periodic: false };
    let vertex_points = half_integer_vertices(&graph, grid);
    let centers = grid_drawing(graph, grid, None, |i, j| ExtendedComplex::new(i as f64, j as f64));
    Ok(CirclePattern { vertex_points, centers })
}

fn half_integer_vertices(graph: &SurfaceGraph, grid: SquareGrid) -> BTreeMap<VertexId, ExtendedComplex> {
    graph
        .vertex_ids()
        .map(|v| {
            let (i, j) = grid.vertex_coords(v);
            (v, ExtendedComplex::new(i as f64 - 0.5, j as f64 - 0.5))
        })
        .collect()
}

/// Vertices of a face drawing that are not shared by two faces with distinct
/// points; used to report which faces are adjacent to a given face.
pub fn neighbour_faces(g: &SurfaceGraph, f: FaceId) -> BTreeSet<FaceId> {
    g.dual_slots(f).into_iter().flatten().filter_map(|s| s.neighbor).collect()
}

/// True when the surface admits propagation without a monodromy check.
pub fn is_simply_connected(s: Surface) -> bool {
    s != Surface::Torus
}

/// Star-ratio of the five centers of a local configuration.
pub fn local_star_ratio(
    center: ExtendedComplex,
    neighbours: [ExtendedComplex; 4],
) -> Result<ExtendedComplex, PatternError> {
    Ok(star_ratio(center, neighbours)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_graph::{build_cube, validate_surface_graph};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> ExtendedComplex {
        ExtendedComplex::new(re, im)
    }

    /// A random Miquel configuration: corners on a circle, neighbour
    /// centers on the perpendicular bisectors of the sides.
    fn random_local(rng: &mut ChaCha8Rng) -> LocalConfiguration {
        loop {
            let center = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let r = rng.gen_range(0.5..2.0);
            let mut angles: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..core::f64::consts::TAU)).collect();
            angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let corners = [0, 1, 2, 3].map(|k| center + Complex::from_polar(r, angles[k]));
            let neighbor_centers = [0, 1, 2, 3].map(|k| {
                let (a, b) = (corners[k], corners[(k + 1) % 4]);
                let mid = (a + b) / 2.0;
                let normal = (b - a) * Complex::new(0.0, -1.0);
                ExtendedComplex::from(mid + normal * rng.gen_range(-1.5..1.5))
            });
            let gaps_ok = (0..4).all(|k| {
                let next = if k == 3 { angles[0] + core::f64::consts::TAU } else { angles[k + 1] };
                next - angles[k] > 0.2
            });
            if gaps_ok {
                return LocalConfiguration {
                    center: center.into(),
                    corners: corners.map(ExtendedComplex::from),
                    neighbor_centers,
                };
            }
        }
    }

    fn closed_form(l: &LocalConfiguration) -> ExtendedComplex {
        let n = l.neighbor_centers;
        apply_mobius(&mobius_mutation(n[0], n[1], n[2], n[3]).unwrap(), l.center)
    }

    #[test]
    fn regular_star_ratios_are_one() {
        let d = regular_centers(4, 4).unwrap();
        let field = pattern_star_ratios(&d).unwrap();
        assert_eq!(field.values.len(), 16);
        for v in field.values.values() {
            assert!(v.approx_eq(&c(1.0, 0.0), 1e-12), "{v}");
        }
        assert!(field.is_kasteleyn());
    }

    #[test]
    fn stretched_lattice_star_ratios() {
        let graph = build_square_grid_torus(4, 4).unwrap();
        let grid = SquareGrid { rows: 4, cols: 4, periodic: true };
        let periods = [Complex::new(8.0, 0.0), Complex::new(0.0, 4.0)];
        let d = grid_drawing(graph, grid, Some(periods), |i, j| c(2.0 * i as f64, j as f64));
        let field = pattern_star_ratios(&d).unwrap();
        for (&f, v) in &field.values {
            let expected = if grid.face_parity(f) == 0 { 0.25 } else { 4.0 };
            assert!(v.approx_eq(&c(expected, 0.0), 1e-12), "{f}: {v}");
        }
    }

    #[test]
    fn regular_pattern_is_valid() {
        let p = regular_pattern(4, 4).unwrap();
        assert!(validate_pattern(&p).is_empty());
        assert!(p.max_concyclicity_residual() < 1e-15);
        let patch = regular_patch_pattern(3, 4).unwrap();
        assert!(validate_pattern(&patch).is_empty());
    }

    #[test]
    fn perturbed_vertex_breaks_concyclicity() {
        let mut p = regular_pattern(4, 4).unwrap();
        let v = VertexId(5);
        let z = p.vertex_points[&v];
        p.vertex_points.insert(v, z.translate(Complex::new(0.1, 0.0)));
        let bad: BTreeSet<FaceId> = validate_pattern(&p)
            .into_iter()
            .filter_map(|x| match x {
                PatternViolation::NotConcyclic { face, .. } => Some(face),
                _ => None,
            })
            .collect();
        let incident: BTreeSet<FaceId> =
            p.graph().faces().iter().filter(|(_, f)| f.vertices.contains(&v)).map(|(&id, _)| id).collect();
        assert_eq!(bad, incident);
    }

    #[test]
    fn collinear_face_is_a_line() {
        // One face of the cube pattern sent through a point of its circle.
        let p = cube_pattern();
        let f = FaceId(2);
        let circle = p.circle(f).unwrap();
        let on = circle.sample_points()[0];
        let m = crate::geometry::MobiusMap::new(
            Complex::new(0.0, 0.0),
            Complex::new(1.0, 0.0),
            Complex::new(1.0, 0.0),
            -on.finite().unwrap(),
        );
        let q = map_pattern(&p, &m);
        assert!(q.centers.points[&f].is_infinite());
        let violations = validate_pattern(&q);
        assert!(violations.is_empty(), "{violations:?}");
    }

    /// Applies a Möbius map to a sphere pattern, recomputing centers.
    fn map_pattern(p: &CirclePattern, m: &crate::geometry::MobiusMap) -> CirclePattern {
        let vertex_points: BTreeMap<_, _> = p.vertex_points.iter().map(|(&v, &z)| (v, m.apply(z))).collect();
        let moved = CirclePattern { vertex_points: vertex_points.clone(), centers: p.centers.clone() };
        let mut points = BTreeMap::new();
        for f in p.graph().face_ids() {
            let pts = moved.face_points(f).unwrap();
            points.insert(f, circle_center_of(&circumcircle(pts[0], pts[1], pts[2]).unwrap()));
        }
        CirclePattern { vertex_points, centers: FaceDrawing { points, ..p.centers.clone() } }
    }

    /// The cube inscribed in the unit sphere, stereographically projected.
    fn cube_pattern() -> CirclePattern {
        let graph = build_cube();
        let s = 1.0 / 3.0f64.sqrt();
        let vertex_points: BTreeMap<_, _> = graph
            .vertex_ids()
            .map(|v| {
                let bit = |k: u32| if v.0 & (1 << k) != 0 { s } else { -s };
                let (x, y, z) = (bit(0), bit(1), bit(2));
                // Conjugated so that walks seen from outside stay counter-clockwise.
                (v, ExtendedComplex::new(x / (1.0 - z), -y / (1.0 - z)))
            })
            .collect();
        let mut points = BTreeMap::new();
        let tmp = CirclePattern {
            vertex_points: vertex_points.clone(),
            centers: FaceDrawing { graph: graph.clone(), points: BTreeMap::new(), periods: None },
        };
        for f in graph.face_ids() {
            let pts = tmp.face_points(f).unwrap();
            points.insert(f, circle_center_of(&circumcircle(pts[0], pts[1], pts[2]).unwrap()));
        }
        CirclePattern { vertex_points, centers: FaceDrawing { graph, points, periods: None } }
    }

    #[test]
    fn cube_pattern_has_real_star_ratios() {
        let p = cube_pattern();
        assert!(validate_surface_graph(p.graph()).is_empty());
        assert!(validate_pattern(&p).is_empty(), "{:?}", validate_pattern(&p));
        let field = pattern_star_ratios(&p.centers).unwrap();
        assert_eq!(field.values.len(), 6);
        assert!(field.is_real());
    }

    #[test]
    fn cube_miquel_move_lands_on_opposite_face() {
        let p = cube_pattern();
        for (f, opposite) in [(0, 1), (1, 0), (2, 3), (3, 2), (4, 5), (5, 4)] {
            let (f, opposite) = (FaceId(f), FaceId(opposite));
            let moved = miquel_move_detailed(&p, f).unwrap();
            assert!(moved.record.corners.iter().all(|c| !c.inserted));
            let target = p.centers.points[&opposite];
            assert!(moved.outcome.center.approx_eq(&target, 1e-9));
            let oracle = mobius_mutation_point(&p.centers, f).unwrap();
            assert!(moved.outcome.center.approx_eq(&oracle, 1e-9));
        }
    }

    #[test]
    fn propagation_reproduces_regular_pattern() {
        let d = regular_centers(4, 4).unwrap();
        let p = propagate_from_centers(&d, VertexId(0), c(-0.5, -0.5)).unwrap();
        assert_eq!(p, regular_pattern(4, 4).unwrap().clone_with_points(&p));
        let expected = regular_pattern(4, 4).unwrap();
        for (v, z) in &p.vertex_points {
            assert!(z.approx_eq(&expected.vertex_points[v], 1e-12), "{v}: {z}");
        }
    }

    impl CirclePattern {
        fn clone_with_points(&self, other: &CirclePattern) -> CirclePattern {
            CirclePattern { vertex_points: other.vertex_points.clone(), centers: self.centers.clone() }
        }
    }

    #[test]
    fn propagation_with_another_seed() {
        let d = regular_centers(4, 4).unwrap();
        let p = propagate_from_centers(&d, VertexId(0), c(-0.7, -0.5)).unwrap();
        assert!(validate_pattern(&p).is_empty());
        assert_eq!(p.centers, d);
        assert!(p.vertex_points[&VertexId(0)].approx_eq(&c(-0.7, -0.5), 1e-15));
    }

    #[test]
    fn propagation_on_a_patch_and_sphere() {
        let patch = regular_patch_pattern(4, 5).unwrap();
        let p = propagate_from_centers(&patch.centers, VertexId(0), c(-0.5, -0.5)).unwrap();
        for (v, z) in &p.vertex_points {
            assert!(z.approx_eq(&patch.vertex_points[v], 1e-12), "{v}: {z}");
        }
        let cube = cube_pattern();
        let v = VertexId(3);
        let rebuilt = propagate_from_centers(&cube.centers, v, cube.vertex_points[&v]).unwrap();
        for (v, z) in &rebuilt.vertex_points {
            assert!(z.approx_eq(&cube.vertex_points[v], 1e-9), "{v}: {z}");
        }
    }

    #[test]
    fn non_real_centers_are_rejected() {
        let mut d = regular_centers(4, 4).unwrap();
        d.points.insert(FaceId(5), c(1.1, 1.2));
        assert!(matches!(
            propagate_from_centers(&d, VertexId(0), c(-0.5, -0.5)),
            Err(PatternError::NonRealStarRatios(_))
        ));
    }

    #[test]
    fn torus_monodromy_is_detected() {
        // Real star-ratios everywhere but a shear that cannot close up.
        let graph = build_square_grid_torus(2, 2).unwrap();
        let grid = SquareGrid { rows: 2, cols: 2, periodic: true };
        let periods = [Complex::new(2.0, 0.0), Complex::new(0.0, 2.0)];
        let d = grid_drawing(graph, grid, Some(periods), |i, j| {
            c(i as f64 + if (i + j) % 2 == 0 { 0.0 } else { 0.3 }, j as f64)
        });
        match propagate_from_centers(&d, VertexId(0), c(-0.5, -0.5)) {
            Err(PatternError::MonodromyFailure { .. }) | Err(PatternError::NonRealStarRatios(_)) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn miquel_move_fixes_regular_pattern() {
        let p = regular_pattern(4, 4).unwrap();
        for f in p.graph().face_ids() {
            let moved = miquel_move_detailed(&p, f).unwrap();
            assert!(moved.outcome.center.approx_eq(&p.centers.points[&f], 1e-12));
            for k in 0..4 {
                let corner = p.face_points(f).unwrap()[k];
                assert!(moved.outcome.points[k].approx_eq(&corner, 1e-12));
            }
            assert!(mobius_mutation_point(&p.centers, f).unwrap().approx_eq(&p.centers.points[&f], 1e-12));
            // Tangent neighbours leave the inserted vertices on top of the
            // old corners, so only the new legs are degenerate.
            let legs: BTreeSet<EdgeId> = moved
                .record
                .corners
                .iter()
                .map(|ch| {
                    let g = moved.pattern.graph();
                    g.edges()
                        .iter()
                        .find(|(_, e)| {
                            (e.minus == ch.old && e.plus == ch.new) || (e.minus == ch.new && e.plus == ch.old)
                        })
                        .map(|(&id, _)| id)
                        .unwrap()
                })
                .collect();
            for violation in validate_pattern(&moved.pattern) {
                match violation {
                    PatternViolation::VertexDrawing(e) => assert!(legs.contains(&e)),
                    other => panic!("{other}"),
                }
            }
        }
    }

    #[test]
    fn miquel_equals_mobius_locally() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let l = random_local(&mut rng);
            let out = miquel_construction(FaceId(0), l.center, l.corners, l.neighbor_centers, [None; 4]).unwrap();
            assert!(out.residual <= 1e-8, "{}", out.residual);
            let oracle = closed_form(&l);
            let scale = 1.0f64.max(oracle.abs());
            assert!(crate::geometry::relative_residual(out.center, oracle) * scale <= 1e-8 * scale);
        }
    }

    #[test]
    fn miquel_preserves_local_star_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..200 {
            let l = random_local(&mut rng);
            let out = miquel_construction(FaceId(0), l.center, l.corners, l.neighbor_centers, [None; 4]).unwrap();
            let before = local_star_ratio(l.center, l.neighbor_centers).unwrap();
            let after = local_star_ratio(out.center, l.neighbor_centers).unwrap();
            assert!(before.approx_eq(&after, 1e-8), "{before} {after}");
            assert!(StarRatioClass::of(before).is_real());
        }
    }

    #[test]
    fn new_center_is_independent_of_the_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let l = random_local(&mut rng);
            let reference =
                miquel_construction(FaceId(0), l.center, l.corners, l.neighbor_centers, [None; 4]).unwrap().center;
            for _ in 0..10 {
                let corners = reseeded(&l, &mut rng);
                let out = miquel_construction(FaceId(0), l.center, corners, l.neighbor_centers, [None; 4]).unwrap();
                assert!(crate::geometry::relative_residual(out.center, reference) <= 1e-8);
            }
        }
    }

    /// Corners realizing the same five centers from a new first corner.
    fn reseeded(l: &LocalConfiguration, rng: &mut ChaCha8Rng) -> [ExtendedComplex; 4] {
        let c0 = l.center.finite().unwrap();
        let start = c0 + Complex::from_polar(rng.gen_range(0.3..3.0), rng.gen_range(0.0..core::f64::consts::TAU));
        let mut corners = [ExtendedComplex::from(start); 4];
        for k in 1..4 {
            corners[k] = reflect_in_line(corners[k - 1], l.center, l.neighbor_centers[k - 1]).unwrap();
        }
        corners
    }

    #[test]
    fn menelaus_degenerate_case() {
        // The face center on the line through its first two neighbour centers:
        // both reflections agree, so corners 0 and 2 coincide.
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let tau = core::f64::consts::TAU;
        let mut checked = 0;
        while checked < 20 {
            let center = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let dir = Complex::from_polar(1.0, rng.gen_range(0.0..tau));
            let c0 = center + dir * rng.gen_range(0.5..2.0);
            let c1 = center - dir * rng.gen_range(0.5..2.0);
            let r = rng.gen_range(0.5..2.0);
            let i0 = center + Complex::from_polar(r, rng.gen_range(0.0..tau));
            let i1 = reflect_in_line(i0.into(), center.into(), c0.into()).unwrap().finite().unwrap();
            let i3 = center + Complex::from_polar(r, rng.gen_range(0.0..tau));
            let bisector_point = |a: Complex, b: Complex, t: f64| (a + b) / 2.0 + (b - a) * Complex::new(0.0, -t);
            let c2 = bisector_point(i0, i3, rng.gen_range(-1.5..1.5));
            let c3 = bisector_point(i3, i0, rng.gen_range(-1.5..1.5));
            if (i1 - i0).norm() < 0.1 || (i3 - i0).norm() < 0.1 || (i3 - i1).norm() < 0.1 {
                continue;
            }
            let l = LocalConfiguration {
                center: center.into(),
                corners: [i0, i1, i0, i3].map(ExtendedComplex::from),
                neighbor_centers: [c0, c1, c2, c3].map(ExtendedComplex::from),
            };
            let Ok(out) = miquel_construction(FaceId(0), l.center, l.corners, l.neighbor_centers, [None; 4]) else {
                continue;
            };
            let before = local_star_ratio(l.center, l.neighbor_centers).unwrap();
            let after = local_star_ratio(out.center, l.neighbor_centers).unwrap();
            assert!(before.approx_eq(&after, 1e-8), "{before} {after}");
            assert!(crate::geometry::relative_residual(out.center, closed_form(&l)) <= 1e-8);
            checked += 1;
        }
    }

    #[test]
    fn collinear_centers_are_rejected() {
        let l = LocalConfiguration {
            center: c(0.0, 0.0),
            corners: [c(0.0, -1.0), c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)],
            neighbor_centers: [c(1.0, 0.0), c(2.0, 0.0), c(-1.0, 0.0), c(-2.0, 0.0)],
        };
        assert!(matches!(
            miquel_construction(FaceId(3), l.center, l.corners, l.neighbor_centers, [None; 4]),
            Err(PatternError::CollinearCenters(FaceId(3)))
        ));
    }

    #[test]
    fn mobius_move_examples() {
        let mut d = regular_centers(4, 4).unwrap();
        let f = FaceId(5);
        let moved = mobius_mutation_move(&d, f).unwrap();
        assert!(moved.points[&f].approx_eq(&c(1.0, 1.0), 1e-12));
        d.points.insert(f, c(1.2, 1.0));
        let moved = mobius_mutation_move(&d, f).unwrap();
        assert!(moved.points[&f].approx_eq(&c(0.8, 1.0), 1e-12));
    }

    #[test]
    fn clifford_point_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let mut d = regular_centers(4, 4).unwrap();
        let f = FaceId(5);
        let mut checked = 0;
        while checked < 200 {
            for g in d.graph.face_ids().collect::<Vec<_>>() {
                let (i, j) = SquareGrid { rows: 4, cols: 4, periodic: true }.face_coords(g);
                let jitter = Complex::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
                d.points.insert(g, ExtendedComplex::from(Complex::new(i as f64, j as f64) + jitter));
            }
            let Ok(geometric) = clifford_point_geometric(&d, f) else { continue };
            let closed = mobius_mutation_point(&d, f).unwrap();
            assert!(crate::geometry::relative_residual(geometric, closed) <= 1e-8, "{geometric} {closed}");
            checked += 1;
        }
    }

    #[test]
    fn concyclic_neighbours_are_degenerate() {
        let d = regular_centers(4, 4).unwrap();
        let mut d2 = d.clone();
        // Put the face point on the circle through its four neighbours.
        d2.points.insert(FaceId(5), c(1.0 + 1.0, 1.0));
        let f = FaceId(5);
        let n = quad_neighbours(&d2, f).unwrap();
        let circle = circumcircle(n[0], n[1], n[2]).unwrap();
        let on = circle.sample_points()[1];
        d2.points.insert(f, on);
        assert!(matches!(clifford_point_geometric(&d2, f), Err(PatternError::ConcyclicDegenerate(_))));
    }

    #[test]
    fn clifford_point_of_a_c4() {
        let circles =
            [c(1., 0.), c(0.3, 1.), c(-1., 0.2), c(0.1, -1.)].map(|m| Circle::round(m.finite().unwrap(), m.abs()));
        let cfg = build_c4(ExtendedComplex::ZERO, circles).unwrap();
        // A drawing whose face 5 sits at V and whose neighbours are V12..V14.
        let mut d = regular_centers(4, 4).unwrap();
        let f = FaceId(5);
        let q = d.graph.quad_info(f).unwrap();
        let ring = [0b0011u8, 0b0110, 0b1100, 0b1001];
        d.points.insert(f, cfg.point(0));
        for k in 0..4 {
            let shift = d.lift(q.translations[k]);
            d.points.insert(q.neighbors[k], cfg.point(ring[k]).translate(-shift));
        }
        let p = clifford_point_geometric(&d, f).unwrap();
        assert!(p.approx_eq(&cfg.point(0b1111), 1e-9));
    }

    #[test]
    fn mobius_move_star_ratio_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let grid = SquareGrid { rows: 4, cols: 4, periodic: true };
        let f = grid.face(1, 1);
        for _ in 0..50 {
            let graph = build_square_grid_torus(4, 4).unwrap();
            let d = grid_drawing(graph, grid, Some(grid_periods(4, 4)), |i, j| {
                ExtendedComplex::from(
                    Complex::new(i as f64, j as f64) + Complex::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)),
                )
            });
            let before = pattern_star_ratios(&d).unwrap().values;
            let moved = mobius_mutation_move(&d, f).unwrap();
            let after = pattern_star_ratios(&moved).unwrap().values;
            let tau_f = before[&f].finite().unwrap();
            assert!(after[&f].approx_eq(&(1.0 / tau_f).into(), 1e-9));
            let slots = d.graph.dual_slots(f).unwrap();
            for s in slots {
                let g = s.neighbor.unwrap();
                let tau = before[&g].finite().unwrap();
                // The dual edge f -> g enters g when it leaves f.
                let expected = match s.direction {
                    Direction::Outgoing => tau * (1.0 + tau_f),
                    Direction::Incoming => tau / (1.0 + 1.0 / tau_f),
                };
                assert!(after[&g].approx_eq(&expected.into(), 1e-9), "{g}: {} vs {expected}", after[&g]);
            }
            for g in d.graph.face_ids() {
                if g != f && !neighbour_faces(&d.graph, f).contains(&g) {
                    assert!(after[&g].approx_eq(&before[&g], 1e-12));
                }
            }
        }
    }

    #[test]
    fn miquel_double_move_restores() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for _ in 0..20 {
            let l = random_local(&mut rng);
            let first = miquel_construction(FaceId(0), l.center, l.corners, l.neighbor_centers, [None; 4]).unwrap();
            let back =
                miquel_construction(FaceId(0), first.center, first.points, l.neighbor_centers, [None; 4]).unwrap();
            assert!(crate::geometry::relative_residual(back.center, l.center) <= 1e-7);
            for k in 0..4 {
                assert!(crate::geometry::relative_residual(back.points[k], l.corners[k]) <= 1e-7);
            }
        }
    }

    proptest! {
        #[test]
        fn propagated_patterns_have_real_star_ratios(x in -0.45f64..0.45, y in -0.45f64..0.45, s in 0.5f64..2.0) {
            let graph = build_square_grid_torus(4, 4).unwrap();
            let grid = SquareGrid { rows: 4, cols: 4, periodic: true };
            let periods = [Complex::new(4.0 * s, 0.0), Complex::new(0.0, 4.0)];
            let d = grid_drawing(graph, grid, Some(periods), |i, j| c(s * i as f64, j as f64));
            let p = propagate_from_centers(&d, VertexId(0), c(x * s - 0.5 * s, y - 0.5)).unwrap();
            prop_assert!(validate_pattern(&p).is_empty());
            for v in pattern_star_ratios(&p.centers).unwrap().values.values() {
                let z = v.finite().unwrap();
                prop_assert!(z.im.abs() <= 1e-9 * z.norm());
            }
        }
    }
}
