//! SVG rendering of circle patterns.

use std::fmt::Write;

use miquel_core::circle_pattern::CirclePattern;
use miquel_core::surface_graph::Direction;
use miquel_core::{Circle, Complex, ExtendedComplex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Layer {
    Circles,
    Centers,
    Edges,
    Dual,
}

impl Layer {
    pub fn parse(s: &str) -> Option<Layer> {
        match s.trim() {
            "circles" => Some(Layer::Circles),
            "centers" => Some(Layer::Centers),
            "edges" => Some(Layer::Edges),
            "dual" => Some(Layer::Dual),
            _ => None,
        }
    }
}

pub const DEFAULT_LAYERS: [Layer; 3] = [Layer::Circles, Layer::Centers, Layer::Edges];

fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

/// Plane coordinates to SVG user space (y axis pointing down).
fn xy(z: Complex) -> (String, String) {
    (num(z.re), num(-z.im))
}

struct Bounds {
    min: Complex,
    max: Complex,
}

impl Bounds {
    fn of(points: impl Iterator<Item = Complex>) -> Bounds {
        let mut b = Bounds {
            min: Complex::new(f64::INFINITY, f64::INFINITY),
            max: Complex::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        };
        for p in points {
            b.min = Complex::new(b.min.re.min(p.re), b.min.im.min(p.im));
            b.max = Complex::new(b.max.re.max(p.re), b.max.im.max(p.im));
        }
        if !b.min.re.is_finite() {
            b = Bounds { min: Complex::new(-1.0, -1.0), max: Complex::new(1.0, 1.0) };
        }
        b
    }

    fn diagonal(&self) -> f64 {
        (self.max - self.min).norm().max(1e-9)
    }
}

pub fn render(p: &CirclePattern, layers: &[Layer]) -> String {
    let d = &p.centers;
    let g = p.graph();
    let finite = |z: &ExtendedComplex| z.finite();
    let mut bounds =
        Bounds::of(p.vertex_points.values().filter_map(finite).chain(d.points.values().filter_map(finite)));
    let margin = 0.05 * bounds.diagonal() + 0.5;
    bounds.min -= Complex::new(margin, margin);
    bounds.max += Complex::new(margin, margin);
    let size = bounds.max - bounds.min;
    let stroke = 0.004 * bounds.diagonal();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="800" height="{}">"#,
        num(bounds.min.re),
        num(-bounds.max.im),
        num(size.re),
        num(size.im),
        (800.0 * size.im / size.re).round()
    );
    if layers.contains(&Layer::Dual) {
        let _ = writeln!(
            out,
            r##"<defs><marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="#d62728"/></marker></defs>"##
        );
    }
    let mut sorted: Vec<Layer> = layers.to_vec();
    sorted.sort();
    sorted.dedup();
    for layer in sorted {
        match layer {
            Layer::Circles => {
                let _ =
                    writeln!(out, r##"<g id="circles" fill="none" stroke="#1f77b4" stroke-width="{}">"##, num(stroke));
                for f in g.face_ids() {
                    match p.circle(f) {
                        Ok(Circle::Round { center, radius }) => {
                            let (x, y) = xy(center);
                            let _ = writeln!(out, r#"<circle class="circle" cx="{x}" cy="{y}" r="{}"/>"#, num(radius));
                        }
                        Ok(Circle::Line { a, b }) => {
                            let dir = (b - a) / (b - a).norm();
                            let reach = 2.0 * bounds.diagonal();
                            let mid = (bounds.min + bounds.max) / 2.0;
                            let foot = a + dir * ((mid - a) * dir.conj()).re;
                            let ((x1, y1), (x2, y2)) = (xy(foot - dir * reach), xy(foot + dir * reach));
                            let _ = writeln!(out, r#"<line class="circle" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}"/>"#);
                        }
                        Err(_) => {}
                    }
                }
                out.push_str("</g>\n");
            }
            Layer::Centers => {
                let _ = writeln!(out, r##"<g id="centers" fill="#2ca02c">"##);
                for z in d.points.values().filter_map(finite) {
                    let (x, y) = xy(z);
                    let _ = writeln!(out, r#"<circle class="center" cx="{x}" cy="{y}" r="{}"/>"#, num(3.0 * stroke));
                }
                out.push_str("</g>\n");
            }
            Layer::Edges => {
                let _ = writeln!(out, r##"<g id="edges" stroke="#333333" stroke-width="{}">"##, num(stroke));
                for e in g.edges().values() {
                    let (Some(a), Some(b)) =
                        (p.vertex_points.get(&e.minus).and_then(finite), p.vertex_points.get(&e.plus).and_then(finite))
                    else {
                        continue;
                    };
                    let b = b + d.lift(e.shift);
                    let ((x1, y1), (x2, y2)) = (xy(a), xy(b));
                    let _ = writeln!(out, r#"<line class="edge" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}"/>"#);
                }
                out.push_str("</g>\n");
            }
            Layer::Dual => {
                let _ = writeln!(
                    out,
                    r##"<g id="dual" stroke="#d62728" stroke-width="{}" marker-end="url(#arrow)">"##,
                    num(stroke)
                );
                for f in g.face_ids() {
                    let (Ok(from), Ok(slots)) = (d.point(f), d.neighbours(f)) else { continue };
                    let Some(from) = from.finite() else { continue };
                    for (slot, to) in slots {
                        if slot.direction != Direction::Outgoing {
                            continue;
                        }
                        let Some(to) = to.and_then(|z| z.finite()) else { continue };
                        let ((x1, y1), (x2, y2)) = (xy(from), xy(to));
                        let _ = writeln!(out, r#"<line class="dual" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}"/>"#);
                    }
                }
                out.push_str("</g>\n");
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
