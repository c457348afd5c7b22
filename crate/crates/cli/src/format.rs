//! JSON files: points, circles, graphs, patterns, lattice patches and
//! Clifford configurations.

use std::collections::BTreeMap;
use std::fmt;

use miquel_core::circle_pattern::{CirclePattern, FaceDrawing};
use miquel_core::clifford::{subset_label, CliffordConfiguration};
use miquel_core::lattice::OctahedralPatch;
use miquel_core::surface_graph::{validate_surface_graph, Color, Edge, Lift, Surface, Violation};
use miquel_core::{Circle, Complex, EdgeId, ExtendedComplex, FaceId, SurfaceGraph, VertexId};
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct FormatError(pub String);

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for FormatError {}

fn err(msg: impl Into<String>) -> FormatError {
    FormatError(msg.into())
}

/// An extended complex number, `[re, im]` or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point(pub ExtendedComplex);

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            ExtendedComplex::Finite(z) => [z.re, z.im].serialize(s),
            ExtendedComplex::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Pair([f64; 2]),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Pair([re, im]) => Ok(Point(ExtendedComplex::new(re, im))),
            Repr::Text(t) if t == "inf" => Ok(Point(ExtendedComplex::Infinity)),
            Repr::Text(t) => Err(de::Error::custom(format!("expected [re, im] or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CircleJson {
    Circle { center: [f64; 2], radius: f64 },
    Line { a: [f64; 2], b: [f64; 2] },
}

impl From<&Circle> for CircleJson {
    fn from(c: &Circle) -> Self {
        match *c {
            Circle::Round { center, radius } => CircleJson::Circle { center: [center.re, center.im], radius },
            Circle::Line { a, b } => CircleJson::Line { a: [a.re, a.im], b: [b.re, b.im] },
        }
    }
}

impl From<&CircleJson> for Circle {
    fn from(c: &CircleJson) -> Self {
        match *c {
            CircleJson::Circle { center, radius } => Circle::round(Complex::new(center[0], center[1]), radius),
            CircleJson::Line { a, b } => Circle::line(Complex::new(a[0], a[1]), Complex::new(b[0], b[1])),
        }
    }
}

fn is_zero(l: &[i32; 2]) -> bool {
    *l == [0, 0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexJson {
    pub id: u32,
    pub color: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub id: u32,
    pub minus: u32,
    pub plus: u32,
    /// Period lift of `plus` relative to `minus` on the torus.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub shift: [i32; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceJson {
    pub id: u32,
    pub edge_cycle: Vec<u32>,
    /// First vertex of the walk.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<u32>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub anchor: [i32; 2],
}

/// Identifiers set aside by a mutation so that mutating back restores them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetiredJson {
    pub face: u32,
    pub edges: [u32; 2],
    pub stack: Vec<[u32; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub surface: String,
    pub vertices: Vec<VertexJson>,
    pub edges: Vec<EdgeJson>,
    pub faces: Vec<FaceJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retired: Vec<RetiredJson>,
}

fn surface_name(s: Surface) -> &'static str {
    match s {
        Surface::Sphere => "sphere",
        Surface::Torus => "torus",
        Surface::PlanePatch => "plane-patch",
    }
}

pub fn parse_surface(s: &str) -> Result<Surface, FormatError> {
    match s {
        "sphere" => Ok(Surface::Sphere),
        "torus" => Ok(Surface::Torus),
        "plane-patch" => Ok(Surface::PlanePatch),
        other => Err(err(format!("unknown surface {other:?}"))),
    }
}

impl From<&SurfaceGraph> for GraphJson {
    fn from(g: &SurfaceGraph) -> Self {
        GraphJson {
            surface: surface_name(g.surface()).into(),
            vertices: g
                .vertices()
                .iter()
                .map(|(v, c)| VertexJson { id: v.0, color: if *c == Color::Plus { "+" } else { "-" }.into() })
                .collect(),
            edges: g
                .edges()
                .iter()
                .map(|(e, x)| EdgeJson { id: e.0, minus: x.minus.0, plus: x.plus.0, shift: [x.shift.0, x.shift.1] })
                .collect(),
            faces: g
                .faces()
                .iter()
                .map(|(f, x)| FaceJson {
                    id: f.0,
                    edge_cycle: x.edges.iter().map(|e| e.0).collect(),
                    start: x.vertices.first().map(|v| v.0),
                    anchor: [x.anchor.0, x.anchor.1],
                })
                .collect(),
            retired: g
                .retired()
                .iter()
                .map(|(&(f, a, b), stack)| RetiredJson {
                    face: f.0,
                    edges: [a.0, b.0],
                    stack: stack.iter().map(|(v, e)| [v.0, e.0]).collect(),
                })
                .collect(),
        }
    }
}

impl GraphJson {
    /// Rebuilds the graph. The dual orientation is derived from the walks
    /// and checked; other class violations are left to `validate`.
    pub fn to_graph(&self) -> Result<SurfaceGraph, FormatError> {
        let surface = parse_surface(&self.surface)?;
        let mut vertices = BTreeMap::new();
        for v in &self.vertices {
            let color = match v.color.as_str() {
                "+" | "plus" => Color::Plus,
                "-" | "minus" => Color::Minus,
                other => return Err(err(format!("vertex {}: unknown color {other:?}", v.id))),
            };
            vertices.insert(VertexId(v.id), color);
        }
        let edges = self
            .edges
            .iter()
            .map(|e| {
                (
                    EdgeId(e.id),
                    Edge { minus: VertexId(e.minus), plus: VertexId(e.plus), shift: Lift(e.shift[0], e.shift[1]) },
                )
            })
            .collect();
        let faces = self
            .faces
            .iter()
            .map(|f| {
                let cycle = f.edge_cycle.iter().map(|&e| EdgeId(e)).collect();
                (FaceId(f.id), (cycle, f.start.map(VertexId), Lift(f.anchor[0], f.anchor[1])))
            })
            .collect();
        let mut g = SurfaceGraph::from_edge_cycles(surface, vertices, edges, faces).map_err(|e| err(e.to_string()))?;
        let retired = self
            .retired
            .iter()
            .map(|r| {
                let stack = r.stack.iter().map(|[v, e]| (VertexId(*v), EdgeId(*e))).collect();
                ((FaceId(r.face), EdgeId(r.edges[0]), EdgeId(r.edges[1])), stack)
            })
            .collect();
        g.set_retired(retired);
        if let Some(v) = validate_surface_graph(&g).iter().find(|v| matches!(v, Violation::DualOrientation { .. })) {
            return Err(err(format!("invalid graph: {v}")));
        }
        Ok(g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternJson {
    pub graph: GraphJson,
    /// Absent for a drawing of centers only.
    #[serde(default)]
    pub vertices: BTreeMap<u32, Point>,
    pub centers: BTreeMap<u32, Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<[[f64; 2]; 2]>,
}

impl From<&CirclePattern> for PatternJson {
    fn from(p: &CirclePattern) -> Self {
        let mut out = PatternJson::from(&p.centers);
        out.vertices = p.vertex_points.iter().map(|(v, &z)| (v.0, Point(z))).collect();
        out
    }
}

impl From<&FaceDrawing> for PatternJson {
    fn from(d: &FaceDrawing) -> Self {
        PatternJson {
            graph: GraphJson::from(&d.graph),
            vertices: BTreeMap::new(),
            centers: d.points.iter().map(|(f, &z)| (f.0, Point(z))).collect(),
            periods: d.periods.map(|[p, q]| [[p.re, p.im], [q.re, q.im]]),
        }
    }
}

impl PatternJson {
    pub fn to_drawing(&self) -> Result<FaceDrawing, FormatError> {
        let graph = self.graph.to_graph()?;
        let points = self.centers.iter().map(|(&f, p)| (FaceId(f), p.0)).collect();
        let periods = self.periods.map(|[p, q]| [Complex::new(p[0], p[1]), Complex::new(q[0], q[1])]);
        if graph.surface() == Surface::Torus && periods.is_none() {
            return Err(err("torus pattern without periods"));
        }
        Ok(FaceDrawing::new(graph, points, periods))
    }

    pub fn to_pattern(&self) -> Result<CirclePattern, FormatError> {
        let centers = self.to_drawing()?;
        if self.vertices.is_empty() {
            return Err(err("pattern file has no vertex points"));
        }
        let vertex_points = self.vertices.iter().map(|(&v, p)| (VertexId(v), p.0)).collect();
        Ok(CirclePattern::new(vertex_points, centers))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchJson {
    /// `[[x0, x1], [y0, y1]]`, inclusive.
    pub window: [[i32; 2]; 2],
    /// Keyed by `"x,y,t"`.
    pub values: BTreeMap<String, Point>,
}

impl From<&OctahedralPatch> for PatchJson {
    fn from(p: &OctahedralPatch) -> Self {
        PatchJson {
            window: [[p.x.0, p.x.1], [p.y.0, p.y.1]],
            values: p.values.iter().map(|(&(x, y, t), &z)| (format!("{x},{y},{t}"), Point(z))).collect(),
        }
    }
}

impl PatchJson {
    pub fn to_patch(&self) -> Result<OctahedralPatch, FormatError> {
        let mut patch =
            OctahedralPatch::new((self.window[0][0], self.window[0][1]), (self.window[1][0], self.window[1][1]));
        for (key, z) in &self.values {
            let coords: Vec<i32> = key
                .split(',')
                .map(|c| c.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|_| err(format!("bad lattice point {key:?}")))?;
            let [x, y, t] = coords[..] else { return Err(err(format!("bad lattice point {key:?}"))) };
            patch.insert((x, y, t), z.0).map_err(|e| err(e.to_string()))?;
        }
        Ok(patch)
    }
}

/// A Clifford configuration keyed by subset labels such as `"134"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliffordJson {
    pub n: usize,
    pub points: BTreeMap<String, Point>,
    pub circles: BTreeMap<String, CircleJson>,
    pub centers: BTreeMap<String, Point>,
    pub concurrence_residual: f64,
}

fn label(s: u8) -> String {
    let l = subset_label(s);
    if l.is_empty() {
        "0".into()
    } else {
        l
    }
}

impl From<&CliffordConfiguration> for CliffordJson {
    fn from(c: &CliffordConfiguration) -> Self {
        CliffordJson {
            n: c.n as usize,
            points: c.points.iter().map(|(&s, &z)| (label(s), Point(z))).collect(),
            circles: c.circles.iter().map(|(&s, x)| (label(s), CircleJson::from(x))).collect(),
            centers: c.centers.iter().map(|(&s, &z)| (label(s), Point(z))).collect(),
            concurrence_residual: c.concurrence_residual,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, FormatError> {
    serde_json::from_str(text).map_err(|e| err(e.to_string()))
}
