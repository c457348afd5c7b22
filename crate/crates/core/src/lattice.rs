//! The octahedral lattice equation and Miquel dynamics on the torus.
//!
//! Lattice points `(x, y, t)` with `x + y + t` even carry values; level `t`
//! holds the points with that third coordinate. Face `(i, j)` of the square
//! grid sits at `(i, j, 0)` or `(i, j, 1)` by the parity of `i + j`, so the
//! two lowest levels are the centers of a square grid pattern and each
//! further level is one half step of Miquel dynamics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circle_pattern::{
    grid_periods, miquel_move_detailed, pattern_star_ratios, validate_pattern, CirclePattern, FaceDrawing, PatternError,
};
use crate::geometry::{
    apply_mobius, circle_center_of, circumcircle, cross_ratio, mobius_mutation, star_ratio, Complex, ExtendedComplex,
    GeometryError,
};
use crate::surface_graph::{
    build_square_grid_patch, build_square_grid_torus, Edge, FaceId, GraphError, SquareGrid, Surface, SurfaceGraph,
    VertexId,
};

pub type LatticePoint = (i32, i32, i32);

#[derive(Clone, Debug, PartialEq)]
pub enum LatticeError {
    Pattern(PatternError),
    Graph(GraphError),
    StencilDegenerate(LatticePoint),
    WindowExhausted { level: i32 },
    MissingCauchyData { level: i32 },
    OddParity(LatticePoint),
    DegenerateRow { attempts: usize },
    NotAGrid,
    BadOrder,
}

impl fmt::Display for LatticeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeError::Pattern(e) => write!(f, "{e}"),
            LatticeError::Graph(e) => write!(f, "{e}"),
            LatticeError::StencilDegenerate((x, y, t)) => {
                write!(f, "consecutive stencil values coincide below ({x}, {y}, {t})")
            }
            LatticeError::WindowExhausted { level } => write!(f, "no point of level {level} fits in the window"),
            LatticeError::MissingCauchyData { level } => write!(f, "level {level} of the Cauchy data is missing"),
            LatticeError::OddParity((x, y, t)) => write!(f, "({x}, {y}, {t}) has odd parity"),
            LatticeError::DegenerateRow { attempts } => {
                write!(f, "no admissible Cauchy data after {attempts} attempts")
            }
            LatticeError::NotAGrid => write!(f, "pattern combinatorics is not the square grid"),
            LatticeError::BadOrder => write!(f, "move order is not a permutation of the face class"),
        }
    }
}

impl From<PatternError> for LatticeError {
    fn from(e: PatternError) -> Self {
        LatticeError::Pattern(e)
    }
}

impl From<GraphError> for LatticeError {
    fn from(e: GraphError) -> Self {
        LatticeError::Graph(e)
    }
}

fn is_even((x, y, t): LatticePoint) -> bool {
    (x + y + t).rem_euclid(2) == 0
}

/// Values on the even points of an integer box.
#[derive(Clone, Debug, PartialEq)]
pub struct OctahedralPatch {
    /// Inclusive ranges of `x` and `y`.
    pub x: (i32, i32),
    pub y: (i32, i32),
    pub values: BTreeMap<LatticePoint, ExtendedComplex>,
}

impl OctahedralPatch {
    pub fn new(x: (i32, i32), y: (i32, i32)) -> Self {
        OctahedralPatch { x, y, values: BTreeMap::new() }
    }

    pub fn insert(&mut self, p: LatticePoint, z: ExtendedComplex) -> Result<(), LatticeError> {
        if !is_even(p) {
            return Err(LatticeError::OddParity(p));
        }
        self.values.insert(p, z);
        Ok(())
    }

    pub fn get(&self, p: LatticePoint) -> Option<ExtendedComplex> {
        self.values.get(&p).copied()
    }

    pub fn levels(&self) -> BTreeSet<i32> {
        self.values.keys().map(|p| p.2).collect()
    }

    pub fn level(&self, t: i32) -> BTreeMap<(i32, i32), ExtendedComplex> {
        self.values.iter().filter(|(p, _)| p.2 == t).map(|(p, &z)| ((p.0, p.1), z)).collect()
    }

    /// The six values around an odd point: below, above, east, west,
    /// north, south.
    pub fn octahedron(&self, (x, y, t): LatticePoint) -> Option<[ExtendedComplex; 6]> {
        Some([
            self.get((x, y, t - 1))?,
            self.get((x, y, t + 1))?,
            self.get((x + 1, y, t))?,
            self.get((x - 1, y, t))?,
            self.get((x, y + 1, t))?,
            self.get((x, y - 1, t))?,
        ])
    }

    /// Star-ratio at an even point against its four neighbours one level up
    /// (`up = true`) or down, with the south-north pair on top when `x + y`
    /// is even, the grid convention for face drawings.
    pub fn star_ratio_at(&self, (x, y, t): LatticePoint, up: bool) -> Option<Result<ExtendedComplex, GeometryError>> {
        let s = if up { t + 1 } else { t - 1 };
        let [e, n, w, so] = [(x + 1, y), (x, y + 1), (x - 1, y), (x, y - 1)].map(|(a, b)| self.get((a, b, s)));
        let ring = [so?, e?, n?, w?];
        let ring = if (x + y).rem_euclid(2) == 0 { ring } else { [ring[1], ring[2], ring[3], ring[0]] };
        Some(star_ratio(self.get((x, y, t))?, ring))
    }
}

/// One application of the lattice equation at `(x, y, t + 1)`.
pub fn octahedral_stencil(
    east: ExtendedComplex,
    north: ExtendedComplex,
    west: ExtendedComplex,
    south: ExtendedComplex,
    below: ExtendedComplex,
) -> Result<ExtendedComplex, GeometryError> {
    Ok(apply_mobius(&mobius_mutation(east, north, west, south)?, below))
}

/// Fills all levels above the top one up to `target_level`, each on the
/// points whose whole stencil is known.
pub fn propagate_octahedral(patch: &OctahedralPatch, target_level: i32) -> Result<OctahedralPatch, LatticeError> {
    let levels = patch.levels();
    let top = *levels.iter().next_back().ok_or(LatticeError::MissingCauchyData { level: 0 })?;
    if !levels.contains(&(top - 1)) {
        return Err(LatticeError::MissingCauchyData { level: top - 1 });
    }
    let mut out = patch.clone();
    for t in (top + 1)..=target_level {
        let mut filled = 0;
        for x in patch.x.0..=patch.x.1 {
            for y in patch.y.0..=patch.y.1 {
                if !is_even((x, y, t)) {
                    continue;
                }
                let stencil = (
                    out.get((x + 1, y, t - 1)),
                    out.get((x, y + 1, t - 1)),
                    out.get((x - 1, y, t - 1)),
                    out.get((x, y - 1, t - 1)),
                    out.get((x, y, t - 2)),
                );
                if let (Some(e), Some(n), Some(w), Some(s), Some(b)) = stencil {
                    let z =
                        octahedral_stencil(e, n, w, s, b).map_err(|_| LatticeError::StencilDegenerate((x, y, t)))?;
                    out.values.insert((x, y, t), z);
                    filled += 1;
                }
            }
        }
        if filled == 0 {
            return Err(LatticeError::WindowExhausted { level: t });
        }
    }
    Ok(out)
}

/// Levels 0 and 1 over a window of the universal cover of a grid torus
/// drawing with `rows x cols` faces.
pub fn cauchy_patch(
    d: &FaceDrawing,
    rows: usize,
    cols: usize,
    x: (i32, i32),
    y: (i32, i32),
) -> Result<OctahedralPatch, LatticeError> {
    let grid = SquareGrid { rows, cols, periodic: true };
    let periods = d.periods.unwrap_or_else(|| grid_periods(rows, cols));
    let mut patch = OctahedralPatch::new(x, y);
    for i in x.0..=x.1 {
        for j in y.0..=y.1 {
            let (qi, ri) = (i.div_euclid(cols as i32), i.rem_euclid(cols as i32));
            let (qj, rj) = (j.div_euclid(rows as i32), j.rem_euclid(rows as i32));
            let f = grid.face(ri as usize, rj as usize);
            let shift = periods[0] * qi as f64 + periods[1] * qj as f64;
            let z = d.point(f)?.translate(shift);
            patch.insert((i, j, (i + j).rem_euclid(2)), z)?;
        }
    }
    Ok(patch)
}

/// Star-ratios of the three axes of an octahedron `[p1, p̄1, p2, p̄2, p3, p̄3]`
/// whose values satisfy the lattice equation `p̄1 = mob(p2, p3, p̄2, p̄3)(p1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionStarRatios {
    pub sr1: ExtendedComplex,
    pub sr2: ExtendedComplex,
    pub sr3: ExtendedComplex,
}

impl DirectionStarRatios {
    /// Largest relative deviation from `sr2 = -(1 + sr1)^-1`,
    /// `sr3 = -(1 + sr1^-1)` and `sr1 sr2 sr3 = 1`.
    pub fn relation_residual(&self) -> f64 {
        let (Some(a), Some(b), Some(c)) = (self.sr1.finite(), self.sr2.finite(), self.sr3.finite()) else {
            return f64::INFINITY;
        };
        let one = Complex::new(1.0, 0.0);
        let r2 = (b + one / (one + a)).norm() / b.norm().max(1.0);
        let r3 = (c + one + one / a).norm() / c.norm().max(1.0);
        let rp = (a * b * c - one).norm();
        r2.max(r3).max(rp)
    }
}

/// `sr_k = sr(p_k; p_{k+2}, p_{k+1}, p̄_{k+2}, p̄_{k+1})`, indices mod 3.
pub fn direction_star_ratios(oct: [ExtendedComplex; 6]) -> Result<DirectionStarRatios, GeometryError> {
    let p = |k: usize| oct[2 * (k % 3)];
    let q = |k: usize| oct[2 * (k % 3) + 1];
    let sr = |k: usize| star_ratio(p(k), [p(k + 2), p(k + 1), q(k + 2), q(k + 1)]);
    Ok(DirectionStarRatios { sr1: sr(0)?, sr2: sr(1)?, sr3: sr(2)? })
}

/// Miquel dynamics on a grid torus pattern. `parity` is the class
/// `(i + j) mod 2` of the faces that move next.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPatternState {
    pub pattern: CirclePattern,
    pub rows: usize,
    pub cols: usize,
    pub parity: usize,
}

/// The grid torus with every vertex color swapped, which is the combinatorics
/// after an odd number of dynamics steps.
pub fn recolored_grid_torus(rows: usize, cols: usize) -> Result<SurfaceGraph, GraphError> {
    let g = build_square_grid_torus(rows, cols)?;
    let vertices = g.vertices().iter().map(|(&v, c)| (v, c.opposite())).collect();
    let edges = g.edges().iter().map(|(&id, e)| (id, Edge { minus: e.plus, plus: e.minus, shift: -e.shift })).collect();
    SurfaceGraph::from_parts(Surface::Torus, vertices, edges, g.faces().clone())
}

fn grid_coloring(g: &SurfaceGraph, rows: usize, cols: usize) -> Result<bool, LatticeError> {
    if *g == build_square_grid_torus(rows, cols)? {
        Ok(false)
    } else if *g == recolored_grid_torus(rows, cols)? {
        Ok(true)
    } else {
        Err(LatticeError::NotAGrid)
    }
}

impl TorusPatternState {
    pub fn new(pattern: CirclePattern, rows: usize, cols: usize, parity: usize) -> Result<Self, LatticeError> {
        grid_coloring(pattern.graph(), rows, cols)?;
        Ok(TorusPatternState { pattern, rows, cols, parity: parity % 2 })
    }

    pub fn grid(&self) -> SquareGrid {
        SquareGrid { rows: self.rows, cols: self.cols, periodic: true }
    }

    /// Faces that move in the next step, in increasing order.
    pub fn moving_faces(&self) -> Vec<FaceId> {
        let grid = self.grid();
        self.pattern.graph().face_ids().filter(|&f| grid.face_parity(f) == self.parity).collect()
    }
}

pub fn miquel_dynamics_step(s: &TorusPatternState) -> Result<TorusPatternState, LatticeError> {
    miquel_dynamics_step_ordered(s, &s.moving_faces())
}

/// One step with the moves applied in the given order. Each vertex is
/// first replaced by an inserted copy and later deleted; the copy then
/// takes over the old identifier.
pub fn miquel_dynamics_step_ordered(
    s: &TorusPatternState,
    order: &[FaceId],
) -> Result<TorusPatternState, LatticeError> {
    let expected: BTreeSet<FaceId> = s.moving_faces().into_iter().collect();
    let given: BTreeSet<FaceId> = order.iter().copied().collect();
    if given != expected || order.len() != expected.len() {
        return Err(LatticeError::BadOrder);
    }
    let mut pattern = s.pattern.clone();
    let mut copies: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    for &f in order {
        let moved = miquel_move_detailed(&pattern, f)?;
        for c in &moved.record.corners {
            if c.inserted {
                copies.insert(c.new, c.old);
            }
        }
        pattern = moved.pattern;
    }
    let mut graph = pattern.centers.graph.clone();
    for (&copy, &original) in &copies {
        if graph.color(original).is_none() {
            graph.rename_vertex(copy, original);
            if let Some(z) = pattern.vertex_points.remove(&copy) {
                pattern.vertex_points.insert(original, z);
            }
        }
    }
    graph.set_retired(BTreeMap::new());
    pattern.centers.graph = graph;
    grid_coloring(pattern.graph(), s.rows, s.cols)?;
    Ok(TorusPatternState { pattern, rows: s.rows, cols: s.cols, parity: 1 - s.parity })
}

/// Options for [`generate_kasteleyn_cauchy_data`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CauchyOptions {
    /// Vertices start at most this far (per coordinate) from the regular
    /// pattern; zero gives the regular pattern.
    pub amplitude: f64,
    pub attempts: usize,
    pub surface: Surface,
    /// Reject draws whose star-ratios are not all positive; otherwise any
    /// real field is accepted.
    pub kasteleyn: bool,
}

impl Default for CauchyOptions {
    fn default() -> Self {
        CauchyOptions { amplitude: 0.12, attempts: 20, surface: Surface::Torus, kasteleyn: true }
    }
}

/// A random Kasteleyn pattern on the `rows x cols` grid (torus or plane
/// patch), deterministic in `seed`.
///
/// Vertices of the regular pattern are jittered and then projected back onto
/// the variety of patterns by minimum-norm Newton steps on the angles of the
/// face cross-ratios. Draws whose star-ratios are not all positive are
/// rejected.
pub fn generate_kasteleyn_cauchy_data(
    rows: usize,
    cols: usize,
    seed: u64,
    options: &CauchyOptions,
) -> Result<CirclePattern, LatticeError> {
    let periodic = options.surface == Surface::Torus;
    let graph = if periodic { build_square_grid_torus(rows, cols)? } else { build_square_grid_patch(rows, cols)? };
    let grid = SquareGrid { rows, cols, periodic };
    let periods = periodic.then(|| grid_periods(rows, cols));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<VertexId> = graph.vertex_ids().collect();
    let index: BTreeMap<VertexId, usize> = ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let faces: Vec<(FaceId, [usize; 4], [Complex; 4])> = graph
        .faces()
        .iter()
        .map(|(&f, face)| {
            let offsets = graph.face_offsets(f).unwrap();
            let lift = |k: usize| match periods {
                Some([p, q]) => p * offsets[k].0 as f64 + q * offsets[k].1 as f64,
                None => Complex::new(0.0, 0.0),
            };
            (f, [0, 1, 2, 3].map(|k| index[&face.vertices[k]]), [0, 1, 2, 3].map(lift))
        })
        .collect();
    for _ in 0..options.attempts {
        let mut z: Vec<Complex> = ids
            .iter()
            .map(|&v| {
                let (i, j) = grid.vertex_coords(v);
                let mut jitter =
                    || if options.amplitude > 0.0 { rng.gen_range(-options.amplitude..options.amplitude) } else { 0.0 };
                Complex::new(i as f64 - 0.5 + jitter(), j as f64 - 0.5 + jitter())
            })
            .collect();
        if !project_to_patterns(&mut z, &faces) {
            continue;
        }
        let vertex_points: BTreeMap<VertexId, ExtendedComplex> =
            ids.iter().zip(&z).map(|(&v, &p)| (v, ExtendedComplex::from(p))).collect();
        let mut centers = BTreeMap::new();
        for (f, idx, lifts) in &faces {
            let p = [0, 1, 2].map(|k| ExtendedComplex::from(z[idx[k]] + lifts[k]));
            match circumcircle(p[0], p[1], p[2]) {
                Ok(c) => centers.insert(*f, circle_center_of(&c)),
                Err(_) => break,
            };
        }
        if centers.len() != faces.len() {
            continue;
        }
        let pattern =
            CirclePattern { vertex_points, centers: FaceDrawing { graph: graph.clone(), points: centers, periods } };
        if !validate_pattern(&pattern).is_empty() {
            continue;
        }
        let field = pattern_star_ratios(&pattern.centers)?;
        let wanted = if options.kasteleyn { field.is_kasteleyn() } else { field.is_real() };
        if wanted {
            return Ok(pattern);
        }
    }
    Err(LatticeError::DegenerateRow { attempts: options.attempts })
}

fn concyclicity_angles(z: &[Complex], faces: &[(FaceId, [usize; 4], [Complex; 4])]) -> Option<DVector<f64>> {
    let mut h = DVector::zeros(faces.len());
    for (r, (_, idx, lifts)) in faces.iter().enumerate() {
        let p = [0, 1, 2, 3].map(|k| ExtendedComplex::from(z[idx[k]] + lifts[k]));
        let cro = cross_ratio(p[0], p[1], p[2], p[3]).ok()?.finite()?;
        h[r] = (-cro).arg();
    }
    Some(h)
}

/// Newton iteration for `arg(-cro) = 0` on every face; true on convergence.
fn project_to_patterns(z: &mut [Complex], faces: &[(FaceId, [usize; 4], [Complex; 4])]) -> bool {
    let n = z.len();
    for _ in 0..60 {
        let Some(h) = concyclicity_angles(z, faces) else { return false };
        if h.amax() <= 1e-14 {
            return true;
        }
        let mut jac = DMatrix::<f64>::zeros(faces.len(), 2 * n);
        for (r, (_, idx, lifts)) in faces.iter().enumerate() {
            let p = [0, 1, 2, 3].map(|k| z[idx[k]] + lifts[k]);
            let (ab, bc, cd, da) = (p[0] - p[1], p[1] - p[2], p[2] - p[3], p[3] - p[0]);
            let one = Complex::new(1.0, 0.0);
            // Derivatives of log cro(a, b, c, d) in each point.
            let grads = [one / ab + one / da, -one / ab - one / bc, one / cd + one / bc, -one / cd - one / da];
            for k in 0..4 {
                jac[(r, 2 * idx[k])] += grads[k].im;
                jac[(r, 2 * idx[k] + 1)] += grads[k].re;
            }
        }
        let jjt = &jac * jac.transpose();
        let damping = 1e-12 * jjt.trace() / faces.len() as f64;
        let system = jjt + DMatrix::identity(faces.len(), faces.len()) * damping;
        let Some(chol) = system.cholesky() else { return false };
        let step = jac.transpose() * chol.solve(&h);
        for k in 0..n {
            z[k] -= Complex::new(step[2 * k], step[2 * k + 1]);
        }
    }
    false
}
