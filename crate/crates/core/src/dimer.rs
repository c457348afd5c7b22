//! Dimer statistics on small graphs by exhaustive enumeration.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::circle_pattern::CirclePattern;
use crate::geometry::ExtendedComplex;
use crate::surface_graph::{edge_neighbourhood, Direction, EdgeId, FaceId, GraphError, SurfaceGraph, VertexId};

/// Default bound on the number of vertices for enumeration.
pub const DEFAULT_MAX_VERTICES: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub enum DimerError {
    TooLarge { vertices: usize, limit: usize },
    MissingWeight(EdgeId),
    NonPositiveWeight { edge: EdgeId, value: f64 },
    CoincidentCenters(EdgeId),
    InfiniteCenter(FaceId),
    InvalidFace(GraphError),
    WeightMismatchOutsideN { edge: EdgeId, before: f64, after: f64 },
    MissingFaceWeight(FaceId),
}

impl fmt::Display for DimerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DimerError::TooLarge { vertices, limit } => {
                write!(f, "graph has {vertices} vertices; enumeration limit is {limit}")
            }
            DimerError::MissingWeight(e) => write!(f, "edge {e} has no weight"),
            DimerError::NonPositiveWeight { edge, value } => write!(f, "edge {edge} has non-positive weight {value}"),
            DimerError::CoincidentCenters(e) => write!(f, "the faces across edge {e} have the same center"),
            DimerError::InfiniteCenter(face) => write!(f, "face {face} has its center at infinity"),
            DimerError::InvalidFace(e) => write!(f, "{e}"),
            DimerError::WeightMismatchOutsideN { edge, before, after } => {
                write!(f, "weight of edge {edge} changes from {before} to {after} outside the neighbourhood")
            }
            DimerError::MissingFaceWeight(face) => write!(f, "face {face} has no weight"),
        }
    }
}

impl From<GraphError> for DimerError {
    fn from(e: GraphError) -> Self {
        DimerError::InvalidFace(e)
    }
}

/// Positive edge weights.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeights {
    pub values: BTreeMap<EdgeId, f64>,
}

impl EdgeWeights {
    pub fn new(values: BTreeMap<EdgeId, f64>) -> Result<Self, DimerError> {
        for (&edge, &value) in &values {
            if !(value > 0.0) || !value.is_finite() {
                return Err(DimerError::NonPositiveWeight { edge, value });
            }
        }
        Ok(EdgeWeights { values })
    }

    pub fn uniform(g: &SurfaceGraph, value: f64) -> Self {
        EdgeWeights { values: g.edge_ids().map(|e| (e, value)).collect() }
    }

    pub fn get(&self, e: EdgeId) -> Result<f64, DimerError> {
        self.values.get(&e).copied().ok_or(DimerError::MissingWeight(e))
    }

    fn covering(&self, g: &SurfaceGraph) -> Result<(), DimerError> {
        for e in g.edge_ids() {
            let w = self.get(e)?;
            if !(w > 0.0) {
                return Err(DimerError::NonPositiveWeight { edge: e, value: w });
            }
        }
        Ok(())
    }
}

/// A perfect matching as its sorted edge list.
pub type Matching = Vec<EdgeId>;

#[derive(Clone, Debug, PartialEq)]
pub struct MatchingEnsemble {
    pub matchings: Vec<Matching>,
    pub weights: Vec<f64>,
    pub z: f64,
    /// Empty when there are no matchings.
    pub probabilities: Vec<f64>,
}

/// All perfect matchings, in lexicographic order of their sorted edge lists.
pub fn enumerate_matchings(g: &SurfaceGraph) -> Result<Vec<Matching>, DimerError> {
    enumerate_matchings_bounded(g, DEFAULT_MAX_VERTICES)
}

pub fn enumerate_matchings_bounded(g: &SurfaceGraph, limit: usize) -> Result<Vec<Matching>, DimerError> {
    let n = g.vertices().len();
    if n > limit {
        return Err(DimerError::TooLarge { vertices: n, limit });
    }
    let mut out = Vec::new();
    if n % 2 == 1 {
        return Ok(out);
    }
    let mut incident: BTreeMap<VertexId, Vec<(EdgeId, VertexId)>> = g.vertex_ids().map(|v| (v, Vec::new())).collect();
    for (&id, e) in g.edges() {
        if e.minus == e.plus {
            continue;
        }
        incident.get_mut(&e.minus).unwrap().push((id, e.plus));
        incident.get_mut(&e.plus).unwrap().push((id, e.minus));
    }
    let mut covered = BTreeSet::new();
    let mut current = Vec::new();
    extend(&incident, &mut covered, &mut current, &mut out);
    for m in &mut out {
        m.sort();
    }
    out.sort();
    Ok(out)
}

fn extend(
    incident: &BTreeMap<VertexId, Vec<(EdgeId, VertexId)>>,
    covered: &mut BTreeSet<VertexId>,
    current: &mut Vec<EdgeId>,
    out: &mut Vec<Matching>,
) {
    let Some((&v, edges)) = incident.iter().find(|(v, _)| !covered.contains(*v)) else {
        out.push(current.clone());
        return;
    };
    covered.insert(v);
    for &(e, w) in edges {
        if covered.contains(&w) {
            continue;
        }
        covered.insert(w);
        current.push(e);
        extend(incident, covered, current, out);
        current.pop();
        covered.remove(&w);
    }
    covered.remove(&v);
}

pub fn dimer_statistics(g: &SurfaceGraph, w: &EdgeWeights) -> Result<MatchingEnsemble, DimerError> {
    dimer_statistics_bounded(g, w, DEFAULT_MAX_VERTICES)
}

pub fn dimer_statistics_bounded(
    g: &SurfaceGraph,
    w: &EdgeWeights,
    limit: usize,
) -> Result<MatchingEnsemble, DimerError> {
    w.covering(g)?;
    let matchings = enumerate_matchings_bounded(g, limit)?;
    let weights: Vec<f64> = matchings.iter().map(|m| m.iter().map(|e| w.values[e]).product()).collect();
    let z: f64 = weights.iter().sum();
    let probabilities = if z > 0.0 { weights.iter().map(|x| x / z).collect() } else { Vec::new() };
    Ok(MatchingEnsemble { matchings, weights, z, probabilities })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaceWeights {
    pub values: BTreeMap<FaceId, f64>,
}

impl FaceWeights {
    pub fn product(&self) -> f64 {
        self.values.values().product()
    }
}

/// Alternating ratio of the edge weights around each face: edges whose
/// dual edge enters the face on top, the others below.
pub fn face_weights(g: &SurfaceGraph, w: &EdgeWeights) -> Result<FaceWeights, DimerError> {
    let mut values = BTreeMap::new();
    for f in g.face_ids() {
        let mut tau = 1.0;
        for slot in g.dual_slots(f).ok_or(GraphError::UnknownFace(f))? {
            let x = w.get(slot.edge)?;
            match slot.direction {
                Direction::Incoming => tau *= x,
                Direction::Outgoing => tau /= x,
            }
        }
        values.insert(f, tau);
    }
    Ok(FaceWeights { values })
}

/// `ψ(e) = |z*(f) - z*(f')|` for the faces on both sides of `e`. Rim edges
/// of a plane patch have no dual edge and get weight 1.
pub fn weights_from_pattern(p: &CirclePattern) -> Result<EdgeWeights, DimerError> {
    let d = &p.centers;
    let mut values = BTreeMap::new();
    for f in d.graph.face_ids() {
        let here = match d.points.get(&f) {
            Some(ExtendedComplex::Finite(z)) => *z,
            _ => return Err(DimerError::InfiniteCenter(f)),
        };
        for slot in d.graph.dual_slots(f).ok_or(GraphError::UnknownFace(f))? {
            let Some(n) = slot.neighbor else {
                values.insert(slot.edge, 1.0);
                continue;
            };
            let there = match d.points.get(&n) {
                Some(ExtendedComplex::Finite(z)) => *z + d.lift(slot.translation),
                _ => return Err(DimerError::InfiniteCenter(n)),
            };
            let length = (here - there).norm();
            if ExtendedComplex::from(here).coincides(&there.into()) {
                return Err(DimerError::CoincidentCenters(slot.edge));
            }
            values.insert(slot.edge, length);
        }
    }
    Ok(EdgeWeights { values })
}

/// Face weights after mutating at `f`: `τ_f` inverts; a neighbour `g`
/// with dual edge `f -> g` is multiplied by `1 + τ_f` and one with dual
/// edge `g -> f` by `(1 + 1/τ_f)^-1`, once per dual edge.
pub fn face_weight_update(t: &FaceWeights, g: &SurfaceGraph, f: FaceId) -> Result<FaceWeights, DimerError> {
    let q = g.quad_info(f)?;
    let tau_f = *t.values.get(&f).ok_or(DimerError::MissingFaceWeight(f))?;
    let mut values = t.values.clone();
    for k in 0..4 {
        let n = q.neighbors[k];
        let x = values.get_mut(&n).ok_or(DimerError::MissingFaceWeight(n))?;
        match q.directions[k] {
            Direction::Outgoing => *x *= 1.0 + tau_f,
            Direction::Incoming => *x /= 1.0 + 1.0 / tau_f,
        }
    }
    values.insert(f, 1.0 / tau_f);
    Ok(FaceWeights { values })
}

/// Probability sums of one matching class before and after the move.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassSum {
    /// Edges of the class outside the neighbourhood of the face.
    pub key: Vec<EdgeId>,
    pub before: f64,
    pub after: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UrbanRenewalReport {
    pub face: FaceId,
    pub classes: Vec<ClassSum>,
    /// `None` when either partition function vanishes.
    pub max_discrepancy: Option<f64>,
    pub tol: f64,
}

impl UrbanRenewalReport {
    pub fn passed(&self) -> bool {
        self.max_discrepancy.map_or(false, |d| d <= self.tol)
    }
}

/// Compares class probabilities of `(g, w)` and `(g2, w2)`, where `g2` is
/// the mutation of `g` at `f` and classes are keyed by the matched edges
/// outside the edge neighbourhood of `f`.
pub fn urban_renewal_check(
    g: &SurfaceGraph,
    w: &EdgeWeights,
    f: FaceId,
    g2: &SurfaceGraph,
    w2: &EdgeWeights,
    tol: f64,
) -> Result<UrbanRenewalReport, DimerError> {
    let local: BTreeSet<EdgeId> = edge_neighbourhood(g, f)?.into_iter().chain(edge_neighbourhood(g2, f)?).collect();
    let outside: BTreeSet<EdgeId> = g.edge_ids().filter(|e| !local.contains(e) && g2.edge(*e).is_some()).collect();
    for &e in &outside {
        let (a, b) = (w.get(e)?, w2.get(e)?);
        if (a - b).abs() > tol * a.abs().max(b.abs()) {
            return Err(DimerError::WeightMismatchOutsideN { edge: e, before: a, after: b });
        }
    }
    let before = dimer_statistics(g, w)?;
    let after = dimer_statistics(g2, w2)?;
    let mut sums: BTreeMap<Vec<EdgeId>, (f64, f64)> = BTreeMap::new();
    let key = |m: &Matching| m.iter().copied().filter(|e| outside.contains(e)).collect::<Vec<_>>();
    for (m, p) in before.matchings.iter().zip(&before.probabilities) {
        sums.entry(key(m)).or_default().0 += p;
    }
    for (m, p) in after.matchings.iter().zip(&after.probabilities) {
        sums.entry(key(m)).or_default().1 += p;
    }
    let classes: Vec<ClassSum> =
        sums.into_iter().map(|(key, (before, after))| ClassSum { key, before, after }).collect();
    let max_discrepancy = (before.z > 0.0 && after.z > 0.0)
        .then(|| classes.iter().map(|c| (c.before - c.after).abs()).fold(0.0, f64::max));
    Ok(UrbanRenewalReport { face: f, classes, max_discrepancy, tol })
}
