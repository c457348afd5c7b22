//! The `miquel` command line: generation, dynamics, verification and export
//! of circle patterns on surface graphs.
//!
//! Exit codes: 0 when every requested check passes, 1 on a failed check,
//! 2 on a numerical degeneracy, 64 on bad usage or unreadable input.

pub mod format;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use miquel_core::circle_pattern::{
    clifford_point_geometric, miquel_move_detailed, mobius_mutation_move, mobius_mutation_point, pattern_star_ratios,
    regular_patch_pattern, regular_pattern, validate_pattern, CirclePattern, FaceDrawing, PatternError,
    PatternViolation, StarRatioClass,
};
use miquel_core::clifford::{
    build_configuration, menelaus_multi_ratios, verify_cross_ratio_system, verify_shift_identities,
    CliffordConfiguration,
};
use miquel_core::dimer::{urban_renewal_check, weights_from_pattern, DimerError};
use miquel_core::geometry::relative_residual;
use miquel_core::lattice::{
    cauchy_patch, generate_kasteleyn_cauchy_data, miquel_dynamics_step, propagate_octahedral, CauchyOptions,
    LatticeError, TorusPatternState,
};
use miquel_core::surface_graph::{validate_surface_graph, GraphError, Surface};
use miquel_core::{Circle, Complex, ExtendedComplex, FaceId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use format::{from_json, to_json, CliffordJson, PatchJson, PatternJson, Point};
use svg::Layer;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED_CHECK: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub report: String,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Check(String),
    Degenerate(String),
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<PatternError> for Failure {
    fn from(e: PatternError) -> Self {
        match e {
            PatternError::Graph(g) => g.into(),
            other => Failure::Degenerate(other.to_string()),
        }
    }
}

impl From<LatticeError> for Failure {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::Pattern(p) => p.into(),
            LatticeError::Graph(g) => g.into(),
            LatticeError::NotAGrid => Failure::Usage(e.to_string()),
            other => Failure::Degenerate(other.to_string()),
        }
    }
}

impl From<DimerError> for Failure {
    fn from(e: DimerError) -> Self {
        match e {
            DimerError::InvalidFace(g) => g.into(),
            other => Failure::Degenerate(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "miquel", version, about = "Circle patterns, Miquel dynamics and dimer checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that a pattern file is a circle pattern with real star-ratios.
    Validate {
        pattern: PathBuf,
        /// Largest accepted concyclicity residual, relative to the radius.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Generate a square grid pattern.
    GenPattern {
        /// Faces as ROWSxCOLS, both even.
        #[arg(long, value_parser = parse_size)]
        size: (usize, usize),
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Require all star-ratios positive.
        #[arg(long)]
        kasteleyn: bool,
        /// The regular pattern with unit squares.
        #[arg(long, conflicts_with = "kasteleyn")]
        regular: bool,
        /// A plane patch instead of a torus.
        #[arg(long)]
        patch: bool,
        /// Maximal displacement of the vertices before projection.
        #[arg(long, default_value_t = 0.12)]
        amplitude: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the star-ratio of every face.
    StarRatios {
        pattern: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Replace one circle by its Miquel circle.
    MiquelMove {
        pattern: PathBuf,
        #[arg(long)]
        face: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Move one center by the mutation map and compare with the Clifford point.
    CliffordMove {
        pattern: PathBuf,
        #[arg(long)]
        face: u32,
        /// Writes the moved drawing of centers.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Run Miquel dynamics on a torus pattern and compare with the lattice equation.
    Dynamics {
        /// Number of half steps; each moves one color class of faces.
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_size, default_value = "4x4")]
        size: (usize, usize),
        /// Start from this pattern instead of generated Kasteleyn data.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Directory for the step files and `trace.json`.
        #[arg(long)]
        out: PathBuf,
        /// Also write the propagated lattice patch.
        #[arg(long)]
        patch: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Check that a Miquel move at a face acts on the dimer model as urban renewal.
    CheckUrbanRenewal {
        pattern: PathBuf,
        #[arg(long)]
        face: u32,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Build a four-circle Clifford configuration and report its incidences.
    CliffordConfig {
        /// Random circles through a random base point.
        #[arg(long, conflicts_with_all = ["base", "circle"])]
        seed: Option<u64>,
        /// Base point as RE,IM.
        #[arg(long, requires = "circle", allow_hyphen_values = true)]
        base: Option<String>,
        /// A circle through the base as CX,CY,R; repeat four times.
        #[arg(long, allow_hyphen_values = true)]
        circle: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Draw a pattern as SVG.
    ExportSvg {
        pattern: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma separated: circles, centers, edges, dual.
        #[arg(long, value_delimiter = ',')]
        layers: Option<Vec<String>>,
    },
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
    let r: usize = r.trim().parse().map_err(|_| format!("bad row count {r:?}"))?;
    let c: usize = c.trim().parse().map_err(|_| format!("bad column count {c:?}"))?;
    if r == 0 || c == 0 || r % 2 == 1 || c % 2 == 1 {
        return Err(format!("sizes must be even and positive, got {r}x{c}"));
    }
    Ok((r, c))
}

fn parse_numbers<const N: usize>(s: &str) -> Result<[f64; N], Failure> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("expected {N} comma separated numbers, got {s:?}")))?;
    parts.try_into().map_err(|_| Failure::Usage(format!("expected {N} comma separated numbers, got {s:?}")))
}

/// Runs one command line (`argv[0]` is the program name).
pub fn run_command<I, T>(argv: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            return CommandResult { exit_code: code, report: e.to_string() };
        }
    };
    match execute(cli.command) {
        Ok(report) => CommandResult { exit_code: EXIT_OK, report },
        Err(Failure::Check(report)) => CommandResult { exit_code: EXIT_FAILED_CHECK, report },
        Err(Failure::Degenerate(msg)) => {
            CommandResult { exit_code: EXIT_DEGENERATE, report: format!("error: {msg}\n") }
        }
        Err(Failure::Usage(msg)) => CommandResult { exit_code: EXIT_USAGE, report: format!("error: {msg}\n") },
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_json(path: &Path) -> Result<PatternJson, Failure> {
    from_json(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_pattern(path: &Path) -> Result<CirclePattern, Failure> {
    load_json(path)?.to_pattern().map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_drawing(path: &Path) -> Result<FaceDrawing, Failure> {
    load_json(path)?.to_drawing().map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory and renames it.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let fail = |e: std::io::Error| Failure::Usage(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().ok_or_else(|| Failure::Usage(format!("{}: not a file name", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents).map_err(fail)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        fail(e)
    })
}

fn write_pattern(path: &Path, p: &CirclePattern) -> Result<(), Failure> {
    write_atomic(path, &to_json(&PatternJson::from(p)))
}

fn point_json(z: ExtendedComplex) -> Value {
    serde_json::to_value(Point(z)).expect("serializable")
}

fn render(json: bool, value: Value, text: String) -> String {
    if json {
        let mut s = serde_json::to_string_pretty(&value).expect("serializable");
        s.push('\n');
        s
    } else {
        text
    }
}

fn execute(command: Command) -> Result<String, Failure> {
    match command {
        Command::Validate { pattern, tol, json } => validate(&pattern, tol, json),
        Command::GenPattern { size, seed, kasteleyn, regular, patch, amplitude, out } => {
            gen_pattern(size, seed, kasteleyn, regular, patch, amplitude, &out)
        }
        Command::StarRatios { pattern, json } => star_ratios(&pattern, json),
        Command::MiquelMove { pattern, face, out, json } => miquel_move(&pattern, FaceId(face), &out, json),
        Command::CliffordMove { pattern, face, out, tol, json } => {
            clifford_move(&pattern, FaceId(face), out.as_deref(), tol, json)
        }
        Command::Dynamics { steps, seed, size, input, out, patch, tol, json } => {
            dynamics(steps, seed, size, input.as_deref(), &out, patch.as_deref(), tol, json)
        }
        Command::CheckUrbanRenewal { pattern, face, tol, json } => urban_renewal(&pattern, FaceId(face), tol, json),
        Command::CliffordConfig { seed, base, circle, out, tol, json } => {
            clifford_config(seed, base.as_deref(), &circle, out.as_deref(), tol, json)
        }
        Command::ExportSvg { pattern, out, layers } => export_svg(&pattern, &out, layers),
    }
}

fn validate(path: &Path, tol: f64, json: bool) -> Result<String, Failure> {
    let p = load_pattern(path)?;
    let graph: Vec<String> = validate_surface_graph(p.graph()).iter().map(|v| v.to_string()).collect();
    let pattern: Vec<String> = validate_pattern(&p)
        .into_iter()
        .filter(|v| !matches!(v, PatternViolation::NotConcyclic { residual, .. } if *residual <= tol))
        .map(|v| v.to_string())
        .collect();
    let residual = p.max_concyclicity_residual();
    let ok = graph.is_empty() && pattern.is_empty() && residual <= tol;
    let mut text = format!(
        "{}: {} vertices, {} faces, max concyclicity residual {residual:.3e}\n",
        path.display(),
        p.vertex_points.len(),
        p.centers.points.len()
    );
    for v in graph.iter().chain(&pattern) {
        text.push_str(&format!("  {v}\n"));
    }
    text.push_str(if ok { "valid\n" } else { "invalid\n" });
    let report = render(
        json,
        json!({"valid": ok, "max_concyclicity_residual": residual, "graph_violations": graph, "pattern_violations": pattern}),
        text,
    );
    if ok {
        Ok(report)
    } else {
        Err(Failure::Check(report))
    }
}

fn gen_pattern(
    (rows, cols): (usize, usize),
    seed: u64,
    kasteleyn: bool,
    regular: bool,
    patch: bool,
    amplitude: f64,
    out: &Path,
) -> Result<String, Failure> {
    let p = if regular {
        if patch {
            regular_patch_pattern(rows, cols)?
        } else {
            regular_pattern(rows, cols)?
        }
    } else {
        let surface = if patch { Surface::PlanePatch } else { Surface::Torus };
        let options = CauchyOptions { amplitude, surface, kasteleyn, ..CauchyOptions::default() };
        generate_kasteleyn_cauchy_data(rows, cols, seed, &options)?
    };
    write_pattern(out, &p)?;
    Ok(format!("wrote {} ({rows}x{cols}, {} faces)\n", out.display(), p.centers.points.len()))
}

fn class_name(c: StarRatioClass) -> &'static str {
    match c {
        StarRatioClass::Generic => "generic",
        StarRatioClass::Real => "real",
        StarRatioClass::RealPositive => "positive",
    }
}

fn star_ratios(path: &Path, json: bool) -> Result<String, Failure> {
    let d = load_drawing(path)?;
    let field = pattern_star_ratios(&d)?;
    let mut text = String::new();
    let mut rows = Vec::new();
    for (f, z) in &field.values {
        let class = class_name(field.classes[f]);
        text.push_str(&format!("{f} {z} {class}\n"));
        rows.push(json!({"face": f.0, "value": point_json(*z), "class": class}));
    }
    text.push_str(&format!("real: {}, kasteleyn: {}\n", field.is_real(), field.is_kasteleyn()));
    Ok(render(json, json!({"faces": rows, "real": field.is_real(), "kasteleyn": field.is_kasteleyn()}), text))
}

fn miquel_move(path: &Path, f: FaceId, out: &Path, json: bool) -> Result<String, Failure> {
    let p = load_pattern(path)?;
    let moved = miquel_move_detailed(&p, f)?;
    write_pattern(out, &moved.pattern)?;
    let inserted = moved.record.corners.iter().filter(|c| c.inserted).count();
    let text = format!(
        "{f}: new center {}, concyclicity residual {:.3e}, {inserted} vertices inserted, {} deleted\nwrote {}\n",
        moved.outcome.center,
        moved.outcome.residual,
        4 - inserted,
        out.display()
    );
    Ok(render(
        json,
        json!({"face": f.0, "center": point_json(moved.outcome.center), "residual": moved.outcome.residual, "inserted": inserted}),
        text,
    ))
}

fn clifford_move(path: &Path, f: FaceId, out: Option<&Path>, tol: f64, json: bool) -> Result<String, Failure> {
    let d = load_drawing(path)?;
    let closed = mobius_mutation_point(&d, f)?;
    let geometric = clifford_point_geometric(&d, f)?;
    let residual = relative_residual(closed, geometric);
    if let Some(out) = out {
        write_atomic(out, &to_json(&PatternJson::from(&mobius_mutation_move(&d, f)?)))?;
    }
    let ok = residual <= tol;
    let text = format!("{f}: mutation map {closed}, Clifford point {geometric}, relative difference {residual:.3e}\n");
    let report = render(
        json,
        json!({"face": f.0, "mutation_point": point_json(closed), "clifford_point": point_json(geometric), "residual": residual, "passed": ok}),
        text,
    );
    if ok {
        Ok(report)
    } else {
        Err(Failure::Check(report))
    }
}

/// Largest distance between the centers after `k` half steps and the
/// lattice values at the levels they should occupy.
fn lattice_deviation(
    lattice: &miquel_core::lattice::OctahedralPatch,
    d: &FaceDrawing,
    rows: usize,
    cols: usize,
    k: i32,
) -> Result<f64, Failure> {
    let now = cauchy_patch(d, rows, cols, (0, cols as i32 - 1), (0, rows as i32 - 1))?;
    let mut worst: f64 = 0.0;
    for (&(x, y, t), z) in &now.values {
        let level = if t == 0 { 2 * ((k + 1) / 2) } else { 1 + 2 * (k / 2) };
        let expected = lattice.get((x, y, level)).ok_or(LatticeError::WindowExhausted { level })?;
        worst = worst.max(relative_residual(*z, expected));
    }
    Ok(worst)
}

#[allow(clippy::too_many_arguments)]
fn dynamics(
    steps: usize,
    seed: u64,
    (rows, cols): (usize, usize),
    input: Option<&Path>,
    out: &Path,
    patch_out: Option<&Path>,
    tol: f64,
    json: bool,
) -> Result<String, Failure> {
    let start = match input {
        Some(path) => load_pattern(path)?,
        None => generate_kasteleyn_cauchy_data(rows, cols, seed, &CauchyOptions::default())?,
    };
    fs::create_dir_all(out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
    let margin = steps as i32 + 2;
    let window = ((-margin, cols as i32 - 1 + margin), (-margin, rows as i32 - 1 + margin));
    let lattice =
        propagate_octahedral(&cauchy_patch(&start.centers, rows, cols, window.0, window.1)?, steps as i32 + 1)?;
    let mut state = TorusPatternState::new(start, rows, cols, 0)?;
    let mut files = Vec::new();
    let mut deviations = Vec::new();
    for k in 0..=steps {
        if k > 0 {
            state = miquel_dynamics_step(&state)?;
        }
        let name = format!("step_{k:04}.json");
        write_pattern(&out.join(&name), &state.pattern)?;
        files.push(name);
        deviations.push(lattice_deviation(&lattice, &state.pattern.centers, rows, cols, k as i32)?);
    }
    write_atomic(&out.join("trace.json"), &to_json(&files))?;
    if let Some(path) = patch_out {
        write_atomic(path, &to_json(&PatchJson::from(&lattice)))?;
    }
    let worst = deviations.iter().copied().fold(0.0, f64::max);
    let ok = worst <= tol;
    let mut text = String::new();
    for (k, dev) in deviations.iter().enumerate() {
        text.push_str(&format!("step {k}: lattice deviation {dev:.3e}\n"));
    }
    text.push_str(&format!("wrote {} patterns to {}\n", files.len(), out.display()));
    let report = render(json, json!({"files": files, "lattice_deviation": deviations, "passed": ok}), text);
    if ok {
        Ok(report)
    } else {
        Err(Failure::Check(report))
    }
}

fn urban_renewal(path: &Path, f: FaceId, tol: f64, json: bool) -> Result<String, Failure> {
    let p = load_pattern(path)?;
    let moved = miquel_move_detailed(&p, f)?.pattern;
    let w = weights_from_pattern(&p)?;
    let w2 = weights_from_pattern(&moved)?;
    let report = urban_renewal_check(p.graph(), &w, f, moved.graph(), &w2, tol)?;
    let ok = report.passed();
    let discrepancy = report.max_discrepancy.unwrap_or(f64::INFINITY);
    let text = format!(
        "{f}: {} classes, max probability discrepancy {discrepancy:.3e} (tolerance {tol:e})\n{}\n",
        report.classes.len(),
        if ok { "urban renewal holds" } else { "urban renewal fails" }
    );
    let classes: Vec<Value> = report
        .classes
        .iter()
        .map(|c| json!({"key": c.key.iter().map(|e| e.0).collect::<Vec<_>>(), "before": c.before, "after": c.after}))
        .collect();
    let out = render(
        json,
        json!({"face": f.0, "classes": classes, "max_discrepancy": report.max_discrepancy, "tol": tol, "passed": ok}),
        text,
    );
    if ok {
        Ok(out)
    } else {
        Err(Failure::Check(out))
    }
}

fn random_configuration(seed: u64) -> Result<CliffordConfiguration, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let base = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let circles: Vec<Circle> = (0..4)
            .map(|_| {
                let center = Complex::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                Circle::round(center, (center - base).norm())
            })
            .collect();
        if let Ok(cfg) = build_configuration(base.into(), &circles) {
            if cfg.separation() >= 1e-3 {
                return Ok(cfg);
            }
        }
    }
    Err(Failure::Degenerate("no well separated configuration in 100 draws".into()))
}

fn clifford_config(
    seed: Option<u64>,
    base: Option<&str>,
    circles: &[String],
    out: Option<&Path>,
    tol: f64,
    json: bool,
) -> Result<String, Failure> {
    let cfg = match (seed, base) {
        (_, Some(base)) => {
            let [x, y] = parse_numbers::<2>(base)?;
            if circles.len() != 4 {
                return Err(Failure::Usage(format!("expected four --circle values, got {}", circles.len())));
            }
            let circles: Vec<Circle> = circles
                .iter()
                .map(|c| parse_numbers::<3>(c).map(|[cx, cy, r]| Circle::round(Complex::new(cx, cy), r)))
                .collect::<Result<_, _>>()?;
            build_configuration(ExtendedComplex::new(x, y), &circles).map_err(|e| Failure::Degenerate(e.to_string()))?
        }
        (seed, None) => random_configuration(seed.unwrap_or(0))?,
    };
    if let Some(out) = out {
        write_atomic(out, &to_json(&CliffordJson::from(&cfg)))?;
    }
    let shift = verify_shift_identities(&cfg);
    let cross = verify_cross_ratio_system(&cfg);
    let menelaus = menelaus_multi_ratios(&cfg).ok();
    let menelaus_residual = menelaus.map_or(f64::INFINITY, |(a, b)| {
        let minus_one = ExtendedComplex::new(-1.0, 0.0);
        relative_residual(a, minus_one).max(relative_residual(b, minus_one))
    });
    let checks = [
        ("incidence", cfg.incidence_residual()),
        ("concurrence", cfg.concurrence_residual),
        ("point shift", shift.point_shift),
        ("circle shift", shift.circle_shift),
        ("vertex star-ratio shift", shift.vertex_star_ratio),
        ("center star-ratio shift", shift.center_star_ratio),
        ("opposite face cross-ratios", cross.opposite_faces),
        ("tetrahedron cross-ratios", cross.tetrahedra.unwrap_or(f64::INFINITY)),
        ("Menelaus multi-ratios", menelaus_residual),
    ];
    let ok = checks.iter().all(|(_, r)| *r <= tol);
    let mut text = String::new();
    for (name, r) in &checks {
        text.push_str(&format!("{name}: {r:.3e}\n"));
    }
    text.push_str(&format!("top point V1234 = {}\n", cfg.point(0b1111)));
    let value = json!({
        "configuration": serde_json::to_value(CliffordJson::from(&cfg)).expect("serializable"),
        "residuals": checks.iter().map(|(n, r)| (n.to_string(), json!(r))).collect::<serde_json::Map<_, _>>(),
        "passed": ok,
    });
    let report = render(json, value, text);
    if ok {
        Ok(report)
    } else {
        Err(Failure::Check(report))
    }
}

fn export_svg(path: &Path, out: &Path, layers: Option<Vec<String>>) -> Result<String, Failure> {
    let p = load_pattern(path)?;
    let layers: Vec<Layer> = match layers {
        None => svg::DEFAULT_LAYERS.to_vec(),
        Some(names) => names
            .iter()
            .map(|n| Layer::parse(n).ok_or_else(|| Failure::Usage(format!("unknown layer {n:?}"))))
            .collect::<Result<_, _>>()?,
    };
    let violations = validate_pattern(&p);
    if let Some(v) = violations.first() {
        return Err(Failure::Check(format!("{}: not a valid pattern: {v}\n", path.display())));
    }
    write_atomic(out, &svg::render(&p, &layers))?;
    Ok(format!("wrote {}\n", out.display()))
}
