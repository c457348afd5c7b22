//! Points, circles and ratios on the extended complex plane.

use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

pub type Complex = num_complex::Complex64;

/// Two finite points closer than this (relative to their magnitude, floored at 1) coincide.
pub const POINT_TOL: f64 = 1e-12;
/// Relative tolerance for ratio comparisons and concyclicity.
pub const RATIO_TOL: f64 = 1e-9;
/// Relative tolerance for tangency of two circles.
pub const TANGENCY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeometryError {
    IndeterminateRatio,
    ConsecutiveCoincidence,
    DegenerateMap,
    CoincidentPoints,
    IdenticalCircles,
    CoincidentAnchors,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            GeometryError::IndeterminateRatio => "ratio is an indeterminate 0/0 limit",
            GeometryError::ConsecutiveCoincidence => "consecutive points coincide",
            GeometryError::DegenerateMap => "mobius map has vanishing determinant",
            GeometryError::CoincidentPoints => "points defining a circle coincide",
            GeometryError::IdenticalCircles => "circles are identical as point sets",
            GeometryError::CoincidentAnchors => "reflection line anchors coincide or are infinite",
        };
        f.write_str(msg)
    }
}

/// A point of the Riemann sphere.
///
/// `PartialEq` is exact; use [`ExtendedComplex::coincides`] or
/// [`ExtendedComplex::approx_eq`] for tolerant comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedComplex {
    Finite(Complex),
    Infinity,
}

pub use ExtendedComplex::Infinity as INFINITY;

impl ExtendedComplex {
    pub const ZERO: ExtendedComplex = ExtendedComplex::Finite(Complex::new(0.0, 0.0));

    /// Finite point from coordinates. Non-finite coordinates map to infinity.
    pub fn new(re: f64, im: f64) -> Self {
        if re.is_finite() && im.is_finite() {
            ExtendedComplex::Finite(Complex::new(re, im))
        } else {
            ExtendedComplex::Infinity
        }
    }

    pub fn from_complex(z: Complex) -> Self {
        Self::new(z.re, z.im)
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedComplex::Infinity)
    }

    pub fn finite(&self) -> Option<Complex> {
        match *self {
            ExtendedComplex::Finite(z) => Some(z),
            ExtendedComplex::Infinity => None,
        }
    }

    /// Modulus; infinite for the point at infinity.
    pub fn abs(&self) -> f64 {
        match self {
            ExtendedComplex::Finite(z) => z.norm(),
            ExtendedComplex::Infinity => f64::INFINITY,
        }
    }

    /// Point coincidence: `|a - b| <= POINT_TOL * max(1, |a|, |b|)`.
    pub fn coincides(&self, other: &Self) -> bool {
        self.approx_eq(other, POINT_TOL)
    }

    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        match (self, other) {
            (ExtendedComplex::Infinity, ExtendedComplex::Infinity) => true,
            (ExtendedComplex::Finite(a), ExtendedComplex::Finite(b)) => {
                (a - b).norm() <= rel_tol * 1.0f64.max(a.norm()).max(b.norm())
            }
            _ => false,
        }
    }

    /// Translate a finite point; infinity is fixed.
    pub fn translate(&self, by: Complex) -> Self {
        match self {
            ExtendedComplex::Finite(z) => ExtendedComplex::Finite(z + by),
            ExtendedComplex::Infinity => ExtendedComplex::Infinity,
        }
    }

    pub fn conj(&self) -> Self {
        match self {
            ExtendedComplex::Finite(z) => ExtendedComplex::Finite(z.conj()),
            ExtendedComplex::Infinity => ExtendedComplex::Infinity,
        }
    }
}

impl From<Complex> for ExtendedComplex {
    fn from(z: Complex) -> Self {
        ExtendedComplex::from_complex(z)
    }
}

impl From<f64> for ExtendedComplex {
    fn from(x: f64) -> Self {
        ExtendedComplex::new(x, 0.0)
    }
}

impl fmt::Display for ExtendedComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedComplex::Finite(z) => write!(f, "{}{:+}i", z.re, z.im),
            ExtendedComplex::Infinity => f.write_str("inf"),
        }
    }
}

/// Relative distance between two extended values: 0 for two infinities,
/// +inf when exactly one is infinite.
pub fn relative_residual(a: ExtendedComplex, b: ExtendedComplex) -> f64 {
    match (a, b) {
        (ExtendedComplex::Infinity, ExtendedComplex::Infinity) => 0.0,
        (ExtendedComplex::Finite(x), ExtendedComplex::Finite(y)) => {
            let scale = x.norm().max(y.norm());
            if scale == 0.0 {
                0.0
            } else {
                (x - y).norm() / scale
            }
        }
        _ => f64::INFINITY,
    }
}

// One factor (a - b) of a ratio, classified for limit evaluation.
enum Factor {
    Zero,
    Pole(f64),
    Value(Complex),
}

fn difference(a: ExtendedComplex, b: ExtendedComplex) -> Factor {
    match (a, b) {
        (ExtendedComplex::Infinity, ExtendedComplex::Infinity) => Factor::Zero,
        (ExtendedComplex::Infinity, _) => Factor::Pole(1.0),
        (_, ExtendedComplex::Infinity) => Factor::Pole(-1.0),
        (ExtendedComplex::Finite(x), ExtendedComplex::Finite(y)) => {
            if a.coincides(&b) {
                Factor::Zero
            } else {
                Factor::Value(x - y)
            }
        }
    }
}

/// Evaluates `prod(num) / prod(den)` where each factor is a difference
/// `a - b`, with infinities and coincidences resolved as limits.
fn ratio_of_differences(
    num: &[(ExtendedComplex, ExtendedComplex)],
    den: &[(ExtendedComplex, ExtendedComplex)],
) -> Result<ExtendedComplex, GeometryError> {
    let mut value = Complex::new(1.0, 0.0);
    let (mut zeros_num, mut zeros_den, mut order) = (0i32, 0i32, 0i32);
    for &(a, b) in num {
        match difference(a, b) {
            Factor::Zero => {
                zeros_num += 1;
                order -= 1;
            }
            Factor::Pole(s) => {
                value *= s;
                order += 1;
            }
            Factor::Value(d) => value *= d,
        }
    }
    for &(a, b) in den {
        match difference(a, b) {
            Factor::Zero => {
                zeros_den += 1;
                order += 1;
            }
            Factor::Pole(s) => {
                value /= s;
                order -= 1;
            }
            Factor::Value(d) => value /= d,
        }
    }
    if zeros_num > 0 && zeros_den > 0 {
        return Err(GeometryError::IndeterminateRatio);
    }
    if order > 0 {
        Ok(ExtendedComplex::Infinity)
    } else if order < 0 {
        Ok(ExtendedComplex::ZERO)
    } else if zeros_num + zeros_den > 0 {
        Err(GeometryError::IndeterminateRatio)
    } else {
        Ok(ExtendedComplex::from_complex(value))
    }
}

/// `cro(a,b,c,d) = (a-b)(c-d) / ((b-c)(d-a))`.
pub fn cross_ratio(
    a: ExtendedComplex,
    b: ExtendedComplex,
    c: ExtendedComplex,
    d: ExtendedComplex,
) -> Result<ExtendedComplex, GeometryError> {
    ratio_of_differences(&[(a, b), (c, d)], &[(b, c), (d, a)])
}

/// `((p1-p2)/(p2-p3)) ((p3-p4)/(p4-p5)) ((p5-p6)/(p6-p1))`.
pub fn multi_ratio(p: [ExtendedComplex; 6]) -> Result<ExtendedComplex, GeometryError> {
    ratio_of_differences(&[(p[0], p[1]), (p[2], p[3]), (p[4], p[5])], &[(p[1], p[2]), (p[3], p[4]), (p[5], p[0])])
}

fn negate(z: ExtendedComplex) -> ExtendedComplex {
    match z {
        ExtendedComplex::Finite(w) => ExtendedComplex::Finite(-w),
        inf => inf,
    }
}

/// `sr(y; y1, y2, y3, y4) = -((y1-y)(y3-y)) / ((y2-y)(y4-y))`.
pub fn star_ratio(y: ExtendedComplex, ys: [ExtendedComplex; 4]) -> Result<ExtendedComplex, GeometryError> {
    star_ratio_general(y, &[ys[0], ys[2]], &[ys[1], ys[3]])
}

/// Star-ratio of `y` against arbitrary numerator and denominator neighbours:
/// `-prod(n - y) / prod(d - y)`.
pub fn star_ratio_general(
    y: ExtendedComplex,
    numerator: &[ExtendedComplex],
    denominator: &[ExtendedComplex],
) -> Result<ExtendedComplex, GeometryError> {
    let num: alloc::vec::Vec<_> = numerator.iter().map(|&n| (n, y)).collect();
    let den: alloc::vec::Vec<_> = denominator.iter().map(|&d| (d, y)).collect();
    ratio_of_differences(&num, &den).map(negate)
}

/// `z -> (a z + b) / (c z + d)`, coefficients kept unnormalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobiusMap {
    pub a: Complex,
    pub b: Complex,
    pub c: Complex,
    pub d: Complex,
}

impl MobiusMap {
    pub fn new(a: Complex, b: Complex, c: Complex, d: Complex) -> Self {
        MobiusMap { a, b, c, d }
    }

    pub fn identity() -> Self {
        let one = Complex::new(1.0, 0.0);
        let zero = Complex::new(0.0, 0.0);
        MobiusMap::new(one, zero, zero, one)
    }

    pub fn det(&self) -> Complex {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> Complex {
        self.a + self.d
    }

    fn scale(&self) -> f64 {
        self.a.norm().max(self.b.norm()).max(self.c.norm()).max(self.d.norm())
    }

    pub fn is_degenerate(&self) -> bool {
        let s = self.scale();
        s == 0.0 || self.det().norm() <= 1e-14 * s * s
    }

    pub fn apply(&self, z: ExtendedComplex) -> ExtendedComplex {
        match z {
            ExtendedComplex::Infinity => {
                if self.c.norm() <= 1e-15 * self.scale() {
                    ExtendedComplex::Infinity
                } else {
                    ExtendedComplex::from_complex(self.a / self.c)
                }
            }
            ExtendedComplex::Finite(w) => {
                let num = self.a * w + self.b;
                let den = self.c * w + self.d;
                let den_scale = self.c.norm() * w.norm() + self.d.norm();
                if den.norm() <= 1e-15 * den_scale {
                    ExtendedComplex::Infinity
                } else {
                    ExtendedComplex::from_complex(num / den)
                }
            }
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        MobiusMap::new(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )
    }

    pub fn inverse(&self) -> MobiusMap {
        MobiusMap::new(self.d, -self.b, -self.c, self.a)
    }

    /// Compares two maps up to complex scale via the 2x2 minors of the
    /// coefficient vectors.
    pub fn approx_eq_projective(&self, other: &MobiusMap, rel_tol: f64) -> bool {
        let u = [self.a, self.b, self.c, self.d];
        let v = [other.a, other.b, other.c, other.d];
        let nu = self.scale();
        let nv = other.scale();
        for i in 0..4 {
            for j in (i + 1)..4 {
                if (u[i] * v[j] - u[j] * v[i]).norm() > rel_tol * nu * nv {
                    return false;
                }
            }
        }
        true
    }
}

/// Standard fractional-linear evaluation on the sphere.
pub fn apply_mobius(m: &MobiusMap, z: ExtendedComplex) -> ExtendedComplex {
    m.apply(z)
}

fn homogeneous(z: ExtendedComplex) -> (Complex, Complex) {
    match z {
        ExtendedComplex::Finite(w) => (w, Complex::new(1.0, 0.0)),
        ExtendedComplex::Infinity => (Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)),
    }
}

/// The trace-free involution `z -> (z C2 + C3) / (z C1 - C2)` attached to a
/// cyclic quadruple. It swaps opposite points and preserves star-ratios.
pub fn mobius_mutation(
    z1: ExtendedComplex,
    z2: ExtendedComplex,
    z3: ExtendedComplex,
    z4: ExtendedComplex,
) -> Result<MobiusMap, GeometryError> {
    let zs = [z1, z2, z3, z4];
    for k in 0..4 {
        if zs[k].coincides(&zs[(k + 1) % 4]) {
            return Err(GeometryError::ConsecutiveCoincidence);
        }
    }
    let (x1, w1) = homogeneous(z1);
    let (x2, w2) = homogeneous(z2);
    let (x3, w3) = homogeneous(z3);
    let (x4, w4) = homogeneous(z4);
    let c1 = x1 * w2 * w3 * w4 - w1 * x2 * w3 * w4 + w1 * w2 * x3 * w4 - w1 * w2 * w3 * x4;
    let c2 = x1 * x3 * w2 * w4 - x2 * x4 * w1 * w3;
    let c3 = w1 * x2 * x3 * x4 - x1 * w2 * x3 * x4 + x1 * x2 * w3 * x4 - x1 * x2 * x3 * w4;
    let m = MobiusMap::new(c2, c3, c1, -c2);
    if m.is_degenerate() {
        return Err(GeometryError::DegenerateMap);
    }
    Ok(m)
}

/// A generalized circle: a round circle or a straight line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Circle {
    Round { center: Complex, radius: f64 },
    Line { a: Complex, b: Complex },
}

impl Circle {
    pub fn round(center: Complex, radius: f64) -> Self {
        Circle::Round { center, radius }
    }

    pub fn line(a: Complex, b: Complex) -> Self {
        Circle::Line { a, b }
    }

    pub fn center(&self) -> ExtendedComplex {
        circle_center_of(self)
    }

    /// Distance of `p` from the circle relative to its radius (lines:
    /// perpendicular distance relative to `max(1, |a|, |b|, |a - b|)`).
    /// Infinity lies on every line and on no round circle.
    pub fn residual(&self, p: ExtendedComplex) -> f64 {
        match (self, p) {
            (Circle::Round { .. }, ExtendedComplex::Infinity) => f64::INFINITY,
            (Circle::Line { .. }, ExtendedComplex::Infinity) => 0.0,
            (Circle::Round { center, radius }, ExtendedComplex::Finite(z)) => {
                ((z - center).norm() - radius).abs() / radius
            }
            (Circle::Line { a, b }, ExtendedComplex::Finite(z)) => {
                let dir = b - a;
                let dist = ((z - a) * dir.conj()).im.abs() / dir.norm();
                dist / 1.0f64.max(a.norm()).max(b.norm()).max(dir.norm())
            }
        }
    }

    pub fn contains(&self, p: ExtendedComplex, rel_tol: f64) -> bool {
        self.residual(p) <= rel_tol
    }

    /// Three distinct points on the circle, for mapping it through a Möbius map.
    pub fn sample_points(&self) -> [ExtendedComplex; 3] {
        match *self {
            Circle::Round { center, radius } => {
                let s = 3.0f64.sqrt() / 2.0;
                [
                    (center + Complex::new(radius, 0.0)).into(),
                    (center + Complex::new(-0.5 * radius, s * radius)).into(),
                    (center + Complex::new(-0.5 * radius, -s * radius)).into(),
                ]
            }
            Circle::Line { a, b } => [a.into(), b.into(), ExtendedComplex::Infinity],
        }
    }
}

impl fmt::Display for Circle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Circle::Round { center, radius } => {
                write!(f, "circle(center {}, radius {})", ExtendedComplex::from(*center), radius)
            }
            Circle::Line { a, b } => {
                write!(f, "line({}, {})", ExtendedComplex::from(*a), ExtendedComplex::from(*b))
            }
        }
    }
}

/// The generalized circle through three distinct points.
pub fn circumcircle(p: ExtendedComplex, q: ExtendedComplex, r: ExtendedComplex) -> Result<Circle, GeometryError> {
    if p.coincides(&q) || q.coincides(&r) || r.coincides(&p) {
        return Err(GeometryError::CoincidentPoints);
    }
    match (p, q, r) {
        (ExtendedComplex::Finite(a), ExtendedComplex::Finite(b), ExtendedComplex::Finite(c)) => {
            let (u, v) = (b - a, c - a);
            let cross = (u.conj() * v).im;
            if cross.abs() <= POINT_TOL * u.norm() * v.norm() {
                return Ok(Circle::line(a, b));
            }
            // Center relative to a solves |z|^2 = 2 Re(z conj(w)) for w in {u, v}.
            let (uu, vv) = (u.norm_sqr(), v.norm_sqr());
            let num = Complex::new(0.0, 1.0) * (u * vv - v * uu);
            let center_rel = num / (2.0 * cross);
            let center = a + center_rel;
            let radius = ((a - center).norm() + (b - center).norm() + (c - center).norm()) / 3.0;
            Ok(Circle::round(center, radius))
        }
        (ExtendedComplex::Infinity, ExtendedComplex::Finite(a), ExtendedComplex::Finite(b))
        | (ExtendedComplex::Finite(a), ExtendedComplex::Infinity, ExtendedComplex::Finite(b))
        | (ExtendedComplex::Finite(a), ExtendedComplex::Finite(b), ExtendedComplex::Infinity) => Ok(Circle::line(a, b)),
        _ => Err(GeometryError::CoincidentPoints),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Intersection {
    Empty,
    Tangent(ExtendedComplex),
    Pair(ExtendedComplex, ExtendedComplex),
}

impl Intersection {
    pub fn points(&self) -> alloc::vec::Vec<ExtendedComplex> {
        match *self {
            Intersection::Empty => alloc::vec![],
            Intersection::Tangent(p) => alloc::vec![p],
            Intersection::Pair(p, q) => alloc::vec![p, q],
        }
    }

    pub fn is_tangent(&self) -> bool {
        matches!(self, Intersection::Tangent(_))
    }
}

fn line_foot(z: Complex, a: Complex, b: Complex) -> Complex {
    let dir = b - a;
    let t = ((z - a) * dir.conj()).re / dir.norm_sqr();
    a + dir * t
}

/// Intersection of two generalized circles. Two crossing lines meet at a
/// finite point and at infinity; parallel lines touch at infinity.
pub fn intersect_circles(c1: &Circle, c2: &Circle) -> Result<Intersection, GeometryError> {
    match (*c1, *c2) {
        (Circle::Round { center: m1, radius: r1 }, Circle::Round { center: m2, radius: r2 }) => {
            let delta = m2 - m1;
            let d = delta.norm();
            let rmax = r1.max(r2);
            if d <= POINT_TOL * 1.0f64.max(m1.norm()).max(m2.norm()) {
                return if (r1 - r2).abs() <= TANGENCY_TOL * rmax {
                    Err(GeometryError::IdenticalCircles)
                } else {
                    Ok(Intersection::Empty)
                };
            }
            let u = delta / d;
            if (d - (r1 + r2)).abs() <= TANGENCY_TOL * rmax {
                return Ok(Intersection::Tangent((m1 + u * r1).into()));
            }
            if (d - (r1 - r2).abs()).abs() <= TANGENCY_TOL * rmax {
                let p = if r1 >= r2 { m1 + u * r1 } else { m1 - u * r1 };
                return Ok(Intersection::Tangent(p.into()));
            }
            if d > r1 + r2 || d < (r1 - r2).abs() {
                return Ok(Intersection::Empty);
            }
            let along = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
            let h = (r1 * r1 - along * along).max(0.0).sqrt();
            let base = m1 + u * along;
            let off = u * Complex::new(0.0, h);
            Ok(Intersection::Pair((base + off).into(), (base - off).into()))
        }
        (Circle::Round { center, radius }, Circle::Line { a, b })
        | (Circle::Line { a, b }, Circle::Round { center, radius }) => {
            let foot = line_foot(center, a, b);
            let dist = (foot - center).norm();
            if (dist - radius).abs() <= TANGENCY_TOL * radius {
                return Ok(Intersection::Tangent(foot.into()));
            }
            if dist > radius {
                return Ok(Intersection::Empty);
            }
            let dir = (b - a) / (b - a).norm();
            let h = (radius * radius - dist * dist).max(0.0).sqrt();
            Ok(Intersection::Pair((foot + dir * h).into(), (foot - dir * h).into()))
        }
        (Circle::Line { a: a1, b: b1 }, Circle::Line { a: a2, b: b2 }) => {
            let (d1, d2) = (b1 - a1, b2 - a2);
            let cross = (d1.conj() * d2).im;
            if cross.abs() <= POINT_TOL * d1.norm() * d2.norm() {
                let off = ((a2 - a1) * d1.conj()).im.abs() / d1.norm();
                let scale = 1.0f64.max(a1.norm()).max(a2.norm()).max(d1.norm());
                return if off <= POINT_TOL * scale {
                    Err(GeometryError::IdenticalCircles)
                } else {
                    Ok(Intersection::Tangent(ExtendedComplex::Infinity))
                };
            }
            // a1 + t d1 = a2 + s d2
            let t = ((a2 - a1).conj() * d2).im / cross;
            Ok(Intersection::Pair((a1 + d1 * t).into(), ExtendedComplex::Infinity))
        }
    }
}

/// Euclidean reflection of `p` across the line through `a` and `b`.
pub fn reflect_in_line(
    p: ExtendedComplex,
    a: ExtendedComplex,
    b: ExtendedComplex,
) -> Result<ExtendedComplex, GeometryError> {
    let (a, b) = match (a.finite(), b.finite()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(GeometryError::CoincidentAnchors),
    };
    if ExtendedComplex::from(a).coincides(&b.into()) {
        return Err(GeometryError::CoincidentAnchors);
    }
    Ok(match p {
        ExtendedComplex::Infinity => ExtendedComplex::Infinity,
        ExtendedComplex::Finite(z) => {
            let d = b - a;
            (a + d * ((z - a) / d).conj()).into()
        }
    })
}

/// Center of a generalized circle: infinity for lines.
pub fn circle_center_of(c: &Circle) -> ExtendedComplex {
    match *c {
        Circle::Round { center, .. } => center.into(),
        Circle::Line { .. } => ExtendedComplex::Infinity,
    }
}
