//! Clifford configurations on the 3- and 4-cube.
//!
//! Vertices of the cube are subsets of `{1, .., n}`, stored as bitmasks
//! (bit `k - 1` for index `k`). Even subsets carry points `V_I`, odd subsets
//! carry circles `c_I` with centers `M_I`, and `V_I` lies on `c_J` whenever
//! `I` and `J` differ in one index. The empty set labels the common point of
//! the initial pencil.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{
    circle_center_of, circumcircle, cross_ratio, intersect_circles, mobius_mutation, multi_ratio, relative_residual,
    star_ratio, Circle, ExtendedComplex, GeometryError, Intersection,
};

pub type Subset = u8;

/// Bitmask of a subset given by its (1-based) elements.
pub fn subset(indices: &[u8]) -> Subset {
    indices.iter().fold(0, |acc, &k| acc | (1 << (k - 1)))
}

/// Digits of a subset in increasing order; the empty set is `""`.
pub fn subset_label(s: Subset) -> String {
    (1..=8u8).filter(|k| s & (1 << (k - 1)) != 0).map(|k| (b'0' + k) as char).collect()
}

/// Inverse of [`subset_label`].
pub fn parse_subset_label(label: &str) -> Option<Subset> {
    let mut s = 0;
    for ch in label.chars() {
        let k = ch.to_digit(10)? as u8;
        if k == 0 || k > 8 {
            return None;
        }
        s |= 1 << (k - 1);
    }
    Some(s)
}

fn is_even(s: Subset) -> bool {
    s.count_ones() % 2 == 0
}

/// Concurrence tolerance for Clifford's theorem, relative to the
/// configuration diameter.
pub const CONCURRENCE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum CliffordError {
    WrongSize(usize),
    BaseNotOnCircle {
        circle: Subset,
        residual: f64,
    },
    /// Second intersections coincide, so the circles through them are undefined.
    TangentAtBase {
        circles: Subset,
    },
    ConcurrenceFailure {
        residual: f64,
    },
    Geometry(GeometryError),
}

impl fmt::Display for CliffordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliffordError::WrongSize(n) => write!(f, "Clifford configurations need 3 or 4 circles, got {n}"),
            CliffordError::BaseNotOnCircle { circle, residual } => {
                write!(f, "base point is off circle c{} (residual {residual:.3e})", subset_label(*circle))
            }
            CliffordError::TangentAtBase { circles } => {
                write!(f, "circles {} meet only at the base point; configuration is degenerate", subset_label(*circles))
            }
            CliffordError::ConcurrenceFailure { residual } => {
                write!(f, "circles fail to concur (residual {residual:.3e})")
            }
            CliffordError::Geometry(e) => write!(f, "{e}"),
        }
    }
}

impl From<GeometryError> for CliffordError {
    fn from(e: GeometryError) -> Self {
        CliffordError::Geometry(e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliffordConfiguration {
    pub n: u8,
    pub points: BTreeMap<Subset, ExtendedComplex>,
    pub circles: BTreeMap<Subset, Circle>,
    pub centers: BTreeMap<Subset, ExtendedComplex>,
    /// Spread of the candidate top points relative to the configuration
    /// diameter (zero for `n = 3`).
    pub concurrence_residual: f64,
}

impl CliffordConfiguration {
    pub fn point(&self, s: Subset) -> ExtendedComplex {
        self.points[&s]
    }

    pub fn center(&self, s: Subset) -> ExtendedComplex {
        self.centers[&s]
    }

    /// `X_I`: the point for even subsets, the circle center for odd ones.
    pub fn label(&self, s: Subset) -> ExtendedComplex {
        if is_even(s) {
            self.points[&s]
        } else {
            self.centers[&s]
        }
    }

    /// Largest distance between two finite points of the configuration.
    pub fn scale(&self) -> f64 {
        let finite: Vec<_> = self.points.values().filter_map(|p| p.finite()).collect();
        let mut d: f64 = 0.0;
        for (i, a) in finite.iter().enumerate() {
            for b in &finite[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Smallest distance between two points relative to [`Self::scale`];
    /// small values signal an ill-conditioned configuration.
    pub fn separation(&self) -> f64 {
        let finite: Vec<_> = self.points.values().filter_map(|p| p.finite()).collect();
        let mut d = f64::INFINITY;
        for (i, a) in finite.iter().enumerate() {
            for b in &finite[i + 1..] {
                d = d.min((a - b).norm());
            }
        }
        d / self.scale().max(f64::MIN_POSITIVE)
    }

    /// Largest incidence residual of a point on an adjacent circle.
    pub fn incidence_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (&s, &p) in &self.points {
            for k in 0..self.n {
                if let Some(c) = self.circles.get(&(s ^ (1 << k))) {
                    worst = worst.max(c.residual(p));
                }
            }
        }
        worst
    }
}

fn distance(a: ExtendedComplex, b: ExtendedComplex) -> f64 {
    match (a, b) {
        (ExtendedComplex::Finite(x), ExtendedComplex::Finite(y)) => (x - y).norm(),
        (ExtendedComplex::Infinity, ExtendedComplex::Infinity) => 0.0,
        _ => f64::INFINITY,
    }
}

/// The intersection point of two circles other than `known`.
fn second_point(c1: &Circle, c2: &Circle, known: ExtendedComplex) -> Option<ExtendedComplex> {
    match intersect_circles(c1, c2).ok()? {
        Intersection::Empty => None,
        Intersection::Tangent(p) => Some(p),
        Intersection::Pair(p, q) => Some(if distance(p, known) >= distance(q, known) { p } else { q }),
    }
}

/// Clifford configuration from circles through a common point.
pub fn build_configuration(base: ExtendedComplex, circles: &[Circle]) -> Result<CliffordConfiguration, CliffordError> {
    let n = circles.len();
    if n != 3 && n != 4 {
        return Err(CliffordError::WrongSize(n));
    }
    let mut points = BTreeMap::new();
    let mut cs = BTreeMap::new();
    points.insert(0, base);
    for (k, c) in circles.iter().enumerate() {
        let residual = c.residual(base);
        if residual > 1e-9 {
            return Err(CliffordError::BaseNotOnCircle { circle: 1 << k, residual });
        }
        cs.insert(1u8 << k, *c);
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let label = (1u8 << j) | (1 << k);
            let p =
                second_point(&circles[j], &circles[k], base).ok_or(CliffordError::TangentAtBase { circles: label })?;
            points.insert(label, p);
        }
    }
    for t in 0u8..(1 << n) {
        if t.count_ones() != 3 {
            continue;
        }
        let pairs: Vec<Subset> = (0..n).filter(|k| t & (1 << k) != 0).map(|k| t & !(1 << k)).collect();
        let c = circumcircle(points[&pairs[0]], points[&pairs[1]], points[&pairs[2]])
            .map_err(|_| CliffordError::TangentAtBase { circles: t })?;
        cs.insert(t, c);
    }
    let mut concurrence_residual = 0.0;
    if n == 4 {
        let triples: Vec<Subset> = cs.keys().copied().filter(|t| t.count_ones() == 3).collect();
        let mut candidates = Vec::new();
        for (i, &a) in triples.iter().enumerate() {
            for &b in &triples[i + 1..] {
                let shared = points[&(a & b)];
                if let Some(p) = second_point(&cs[&a], &cs[&b], shared) {
                    candidates.push(p);
                }
            }
        }
        if candidates.is_empty() {
            return Err(CliffordError::ConcurrenceFailure { residual: f64::INFINITY });
        }
        let top = if candidates.iter().all(|p| p.is_infinite()) {
            ExtendedComplex::Infinity
        } else if candidates.iter().any(|p| p.is_infinite()) {
            return Err(CliffordError::ConcurrenceFailure { residual: f64::INFINITY });
        } else {
            let sum = candidates.iter().filter_map(|p| p.finite()).sum::<crate::geometry::Complex>();
            ExtendedComplex::from(sum / candidates.len() as f64)
        };
        let spread = candidates.iter().map(|&p| distance(p, top)).fold(0.0, f64::max);
        points.insert(0b1111, top);
        let mut cfg = CliffordConfiguration {
            n: n as u8,
            points: points.clone(),
            circles: cs.clone(),
            centers: BTreeMap::new(),
            concurrence_residual: 0.0,
        };
        let scale = cfg.scale();
        concurrence_residual = if spread == 0.0 { 0.0 } else { spread / scale.max(f64::MIN_POSITIVE) };
        if concurrence_residual > CONCURRENCE_TOL {
            return Err(CliffordError::ConcurrenceFailure { residual: concurrence_residual });
        }
        cfg.points.clear();
    }
    let centers = cs.iter().map(|(&s, c)| (s, circle_center_of(c))).collect();
    Ok(CliffordConfiguration { n: n as u8, points, circles: cs, centers, concurrence_residual })
}

pub fn build_c3(base: ExtendedComplex, circles: [Circle; 3]) -> Result<CliffordConfiguration, CliffordError> {
    build_configuration(base, &circles)
}

pub fn build_c4(base: ExtendedComplex, circles: [Circle; 4]) -> Result<CliffordConfiguration, CliffordError> {
    build_configuration(base, &circles)
}

/// Maximal relative residuals of the shift identities of a `C4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftReport {
    /// `mob(V12, V23, V34, V14)(V_I) = V_{I Δ 1234}`.
    pub point_shift: f64,
    /// The same map carries `c_I` onto `c_{I Δ 1234}`.
    pub circle_shift: f64,
    /// `sr(V; V12, V23, V34, V14) = sr(V1234; V12, V23, V34, V14)`.
    pub vertex_star_ratio: f64,
    /// The dual statement for centers over all odd origins.
    pub center_star_ratio: f64,
}

impl ShiftReport {
    pub fn max(&self) -> f64 {
        self.point_shift.max(self.circle_shift).max(self.vertex_star_ratio).max(self.center_star_ratio)
    }
}

const FULL: Subset = 0b1111;
const RING: [Subset; 4] = [0b0011, 0b0110, 0b1100, 0b1001];

fn star_residual<F: Fn(Subset) -> ExtendedComplex>(origin: Subset, value: F) -> f64 {
    let ring = RING.map(|r| value(origin ^ r));
    let lhs = star_ratio(value(origin), ring);
    let rhs = star_ratio(value(origin ^ FULL), ring);
    match (lhs, rhs) {
        (Ok(a), Ok(b)) => relative_residual(a, b),
        _ => f64::INFINITY,
    }
}

/// The star-ratio of the centers around the circle `origin`.
pub fn center_star_ratio(cfg: &CliffordConfiguration, origin: Subset) -> Result<ExtendedComplex, GeometryError> {
    star_ratio(cfg.center(origin), RING.map(|r| cfg.center(origin ^ r)))
}

pub fn verify_shift_identities(cfg: &CliffordConfiguration) -> ShiftReport {
    let mut report =
        ShiftReport { point_shift: 0.0, circle_shift: 0.0, vertex_star_ratio: 0.0, center_star_ratio: 0.0 };
    if cfg.n != 4 {
        let inf = f64::INFINITY;
        return ShiftReport { point_shift: inf, circle_shift: inf, vertex_star_ratio: inf, center_star_ratio: inf };
    }
    let m = match mobius_mutation(cfg.point(0b0011), cfg.point(0b0110), cfg.point(0b1100), cfg.point(0b1001)) {
        Ok(m) => m,
        Err(_) => {
            report.point_shift = f64::INFINITY;
            report.circle_shift = f64::INFINITY;
            return report;
        }
    };
    let scale = cfg.scale().max(f64::MIN_POSITIVE);
    for (&s, &p) in &cfg.points {
        let (image, target) = (m.apply(p), cfg.point(s ^ FULL));
        let residual = match (image, target) {
            (ExtendedComplex::Finite(x), ExtendedComplex::Finite(y)) => {
                (x - y).norm() / scale.max(x.norm()).max(y.norm())
            }
            _ => relative_residual(image, target),
        };
        report.point_shift = report.point_shift.max(residual);
    }
    for (&s, c) in &cfg.circles {
        let target = &cfg.circles[&(s ^ FULL)];
        for q in c.sample_points() {
            report.circle_shift = report.circle_shift.max(target.residual(m.apply(q)));
        }
    }
    report.vertex_star_ratio = star_residual(0, |t| cfg.point(t));
    for s in (0..16u8).filter(|&s| !is_even(s)) {
        report.center_star_ratio = report.center_star_ratio.max(star_residual(s, |t| cfg.center(t)));
    }
    report
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossRatioReport {
    /// Largest residual between cross ratios on opposite 2-faces of a 3-cube.
    pub opposite_faces: f64,
    /// Largest residual of the tetrahedron identity (`n = 4` only).
    pub tetrahedra: Option<f64>,
}

fn cro_of(cfg: &CliffordConfiguration, s: [Subset; 4]) -> Result<ExtendedComplex, GeometryError> {
    cross_ratio(cfg.label(s[0]), cfg.label(s[1]), cfg.label(s[2]), cfg.label(s[3]))
}

fn pair_residual(a: Result<ExtendedComplex, GeometryError>, b: Result<ExtendedComplex, GeometryError>) -> f64 {
    match (a, b) {
        (Ok(x), Ok(y)) => relative_residual(x, y),
        _ => f64::INFINITY,
    }
}

/// Checks that points and centers form an integrable cross-ratio system
/// and, for `n = 4`, the tetrahedron identity for every choice of axis.
pub fn verify_cross_ratio_system(cfg: &CliffordConfiguration) -> CrossRatioReport {
    let n = cfg.n as usize;
    let mut opposite: f64 = 0.0;
    for axes in 0u8..(1 << n) {
        if axes.count_ones() != 3 {
            continue;
        }
        let ax: Vec<Subset> = (0..n).filter(|k| axes & (1 << k) != 0).map(|k| 1u8 << k).collect();
        for base in 0u8..(1 << n) {
            if base & axes != 0 {
                continue;
            }
            for z in 0..3 {
                let (x, y) = (ax[(z + 1) % 3], ax[(z + 2) % 3]);
                let face = |b: Subset| [b, b ^ x, b ^ x ^ y, b ^ y];
                let lower = cro_of(cfg, face(base));
                let upper = cro_of(cfg, face(base ^ ax[z]));
                opposite = opposite.max(pair_residual(lower, upper));
            }
        }
    }
    let tetrahedra = (n == 4).then(|| {
        let mut worst: f64 = 0.0;
        for k in 0..4 {
            let others: Vec<Subset> = (0..4).filter(|&j| j != k).map(|j| 1u8 << j).collect();
            let (a, b, c) = (others[0], others[1], others[2]);
            for i in (0..16u8).filter(|&s| is_even(s)) {
                let tetra = |t: Subset| [t, t ^ a ^ b, t ^ b ^ c, t ^ a ^ c];
                let lhs = cro_of(cfg, tetra(i));
                let rhs = cro_of(cfg, tetra(i ^ (1 << k)));
                worst = worst.max(pair_residual(lhs, rhs));
            }
        }
        worst
    });
    CrossRatioReport { opposite_faces: opposite, tetrahedra }
}

/// The two Menelaus multi-ratios of a `C4`; both equal `-1`.
pub fn menelaus_multi_ratios(cfg: &CliffordConfiguration) -> Result<(ExtendedComplex, ExtendedComplex), GeometryError> {
    let v = |s: Subset| cfg.point(s);
    let m1 = multi_ratio([v(0b1100), v(0b1001), v(FULL), v(0b0011), v(0b0110), v(0)])?;
    let m2 = multi_ratio([v(0b1001), v(0b1100), v(FULL), v(0b0110), v(0b0011), v(0)])?;
    Ok((m1, m2))
}
