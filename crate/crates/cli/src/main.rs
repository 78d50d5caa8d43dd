//! `nsl`: command-line driver for the laboratory.
//!
//! Exit status: 0 success, 1 invalid input or domain error (also a failed
//! `check`), 2 solver non-convergence, 3 I/O error, 64 usage error.

mod check;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nsl_core::cutting::{self, CutDensity, OptimizeOptions};
use nsl_core::density::{hperp_basis, maly_martio, orthogonality_residual};
use nsl_core::experiments::{
    self, Coefficient, DomainSequence, SequenceKind, StabilityProblem,
};
use nsl_core::mesh::{refine, slit, triangulate};
use nsl_core::solver::{parse_problem, solve};
use nsl_core::{CrackMesh, Error, NodalField, PixelDomain, Result};

#[derive(Parser)]
#[command(name = "nsl", version, about = "Neumann stability laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a pixel domain: the full box or a member of a sequence.
    Domain(DomainArgs),
    /// Triangulate a domain file, optionally refining and slitting.
    Mesh(MeshArgs),
    /// Solve a Neumann problem on a mesh.
    Solve(SolveArgs),
    /// Stability experiment along a domain sequence.
    Stability(StabilityArgs),
    /// Mosco recovery and weak-limit probes along a domain sequence.
    Mosco(MoscoArgs),
    /// Membrane cut energy and optimization.
    Cut {
        #[command(subcommand)]
        action: CutCommand,
    },
    /// Sample orthogonal-complement elements on a domain and test them.
    Density(DensityArgs),
    /// Staged Malý–Martio construction.
    Maly(MalyArgs),
    /// Run the built-in invariant suite.
    Check,
}

#[derive(Args)]
struct SeqArgs {
    /// Sequence kind (shrinking_hole, fixed_crack_opening, fattening_obstacle,
    /// moving_hole, maly_martio_stagewise).
    #[arg(long)]
    seq: Option<SequenceKind>,
    /// Sequence config file (`key = value` lines); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    w0: Option<f64>,
    #[arg(long)]
    m0: Option<f64>,
}

impl SeqArgs {
    fn sequence(&self) -> Result<Option<DomainSequence>> {
        let mut seq = match (&self.config, self.seq) {
            (Some(path), _) => DomainSequence::from_config(&read(path)?, &path.display().to_string())?,
            (None, Some(kind)) => DomainSequence::new(kind, 6, 64),
            (None, None) => return Ok(None),
        };
        if self.seq.is_some_and(|k| k != seq.kind) {
            return Err(Error::InvalidArgument("--seq disagrees with the kind in --config".into()));
        }
        if let Some(v) = self.stages {
            seq.stages = v;
        }
        if let Some(v) = self.resolution {
            seq.resolution = v;
        }
        if let Some(v) = self.r0 {
            seq.r0 = v;
        }
        if let Some(v) = self.w0 {
            seq.w0 = v;
        }
        if let Some(v) = self.m0 {
            seq.m0 = v;
        }
        seq.validate()?;
        Ok(Some(seq))
    }

    fn required(&self) -> Result<DomainSequence> {
        self.sequence()?
            .ok_or_else(|| Error::InvalidArgument("a sequence is required (--seq or --config)".into()))
    }
}

#[derive(Args)]
struct DomainArgs {
    #[command(flatten)]
    seq: SeqArgs,
    /// Member index (default: the limit).
    #[arg(long)]
    index: Option<usize>,
    /// Box resolution when no sequence is given.
    #[arg(long, default_value_t = 32)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long, default_value_t = 0)]
    refine: usize,
    /// Cut file to slit along (edge ids of the refined mesh).
    #[arg(long)]
    cut: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Position-dependent data given as `c` or `c cx cy`.
#[derive(Args)]
struct CoefficientArgs {
    #[arg(long, default_value_t = 1.5)]
    p: f64,
    #[arg(long, num_args = 1..=3, allow_negative_numbers = true, default_values_t = [1.0])]
    b: Vec<f64>,
    #[arg(long, num_args = 1..=3, allow_negative_numbers = true, default_values_t = [0.0, 1.0, 0.0])]
    f: Vec<f64>,
    #[arg(long, num_args = 1..=3, allow_negative_numbers = true, default_values_t = [0.0])]
    g: Vec<f64>,
    /// Set `b = 0` on the rectangle `x0 y0 x1 y1`.
    #[arg(long, num_args = 4, allow_negative_numbers = true)]
    b_zero_rect: Option<Vec<f64>>,
}

fn coefficient(v: &[f64], name: &str) -> Result<Coefficient> {
    match *v {
        [c] => Ok(Coefficient::Constant(c)),
        [c, cx, cy] => Ok(Coefficient::Affine([c, cx, cy])),
        _ => Err(Error::InvalidArgument(format!("--{name} takes 1 or 3 numbers"))),
    }
}

impl CoefficientArgs {
    fn problem(&self) -> Result<StabilityProblem> {
        let mut pr = StabilityProblem::new(self.p);
        pr.b = coefficient(&self.b, "b")?;
        if let Some(r) = &self.b_zero_rect {
            let outside = match pr.b {
                Coefficient::Constant(c) => c,
                _ => return Err(Error::InvalidArgument("--b-zero-rect needs a constant --b".into())),
            };
            pr.b = Coefficient::Rect {
                rect: [r[0], r[1], r[2], r[3]],
                inside: 0.0,
                outside,
            };
        }
        pr.f = coefficient(&self.f, "f")?;
        pr.g = coefficient(&self.g, "g")?;
        Ok(pr)
    }
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    seq: SeqArgs,
    #[command(flatten)]
    data: CoefficientArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MoscoArgs {
    #[command(flatten)]
    seq: SeqArgs,
    #[arg(long, default_value_t = 1.5)]
    p: f64,
    /// Coarse block side in cells (default: resolution / 8).
    #[arg(long)]
    block: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CutDataArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
    /// Boundary datum `c` or `c cx cy`.
    #[arg(long, num_args = 1..=3, allow_negative_numbers = true, default_values_t = [0.0, 1.0, 0.0])]
    g: Vec<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum CutCommand {
    /// Search for the cut of largest energy through two points.
    Optimize {
        #[command(flatten)]
        data: CutDataArgs,
        #[arg(long, num_args = 4, allow_negative_numbers = true, value_names = ["X1", "Y1", "X2", "Y2"])]
        terminals: Vec<f64>,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_edges: Option<usize>,
    },
    /// Energy of a given cut.
    Energy {
        #[command(flatten)]
        data: CutDataArgs,
        #[arg(long)]
        cut: PathBuf,
    },
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long, default_value_t = 4)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.5)]
    p: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MalyArgs {
    #[arg(long, default_value_t = 5)]
    stages: usize,
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[arg(long)]
    out: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn read_domain(path: &Path) -> Result<PixelDomain> {
    PixelDomain::from_text(&read(path)?, &path.display().to_string())
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn affine_field(mesh: &CrackMesh, v: &[f64], name: &str) -> Result<NodalField> {
    let c = coefficient(v, name)?;
    Ok(NodalField::interpolate(mesh, |x, y| c.eval([x, y])))
}

fn run_domain(a: &DomainArgs) -> Result<()> {
    let d = match a.seq.sequence()? {
        Some(seq) => match a.index {
            Some(k) => experiments::generate(&seq, k)?,
            None => experiments::limit(&seq)?,
        },
        None => PixelDomain::full(a.n, nsl_core::BoundingBox::unit())?,
    };
    fs::write(&a.out, d.to_text()).map_err(|e| Error::io(&a.out, e))
}

fn run_mesh(a: &MeshArgs) -> Result<()> {
    let mut mesh = triangulate(&read_domain(&a.domain)?)?;
    for _ in 0..a.refine {
        mesh = refine(&mesh);
    }
    if let Some(path) = &a.cut {
        let cut = cutting::cut_from_text(&read(path)?, &path.display().to_string())?;
        mesh = slit(&mesh, &cut)?;
    }
    fs::write(&a.out, mesh.to_text()).map_err(|e| Error::io(&a.out, e))
}

fn run_solve(a: &SolveArgs) -> Result<()> {
    let mesh = CrackMesh::from_text(&read(&a.mesh)?, &a.mesh.display().to_string())?;
    let base = a.problem.parent().map(Path::to_path_buf).unwrap_or_default();
    let loader = |name: &str| read(&base.join(name));
    let spec = parse_problem(&read(&a.problem)?, &a.problem.display().to_string(), &mesh, &loader)?;
    let report = solve(&mesh, &spec)?;
    out_dir(&a.out)?;
    write(&a.out, "u.csv", &report.solution.to_csv(&file_name(&a.mesh)))?;
    write(&a.out, "report.txt", &report.to_text())
}

fn run_stability(a: &StabilityArgs) -> Result<()> {
    let seq = a.seq.required()?;
    let report = experiments::run_stability(&seq, &a.data.problem()?)?;
    out_dir(&a.out)?;
    write(&a.out, "stability.csv", &report.to_csv())?;
    write(&a.out, "verdict.txt", &format!("{}\n", report.verdict))?;
    println!("{}", report.verdict);
    Ok(())
}

fn run_mosco(a: &MoscoArgs) -> Result<()> {
    let seq = a.seq.required()?;
    let lim = experiments::limit(&seq)?;
    let members = experiments::members(&seq)?;
    let linear = |d: &PixelDomain| -> Result<NodalField> {
        Ok(NodalField::interpolate(&triangulate(d)?, |x, _| x))
    };
    let u = linear(&lim)?;
    let mut m1 = String::from("index,m1\n");
    for (k, m) in members.iter().enumerate() {
        let v = experiments::mosco_m1_probe(m, &lim, &u, a.p)?;
        m1.push_str(&format!("{},{v:e}\n", k + 1));
    }
    let fields = members
        .into_iter()
        .enumerate()
        .map(|(k, m)| Ok((k + 1, m.clone(), linear(&m)?)))
        .collect::<Result<Vec<_>>>()?;
    let block = a.block.unwrap_or((seq.resolution / 8).max(1));
    let m2 = experiments::mosco_m2_probe(&fields, &lim, block)?;
    let mut m2csv = String::from("index,phi_outside,flux_outside,interior_defect\n");
    for r in &m2.rows {
        m2csv.push_str(&format!("{},{:e},{:e},{:e}\n", r.index, r.phi_outside, r.flux_outside, r.interior_defect));
    }
    out_dir(&a.out)?;
    write(&a.out, "mosco_m1.csv", &m1)?;
    write(&a.out, "mosco_m2.csv", &m2csv)
}

/// Nearest mesh vertex to `p`; points farther than half a cell diagonal
/// from every vertex lie outside the closed domain.
fn snap(mesh: &CrackMesh, omega: &PixelDomain, p: [f64; 2]) -> Result<usize> {
    let (v, d) = mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, q)| (i, (q[0] - p[0]).hypot(q[1] - p[1])))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("mesh has vertices");
    if d > omega.cell_side() * std::f64::consts::FRAC_1_SQRT_2 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "terminal ({}, {}) lies outside the closed domain",
            p[0], p[1]
        )));
    }
    Ok(v)
}

fn run_cut(c: &CutCommand) -> Result<()> {
    match c {
        CutCommand::Optimize {
            data,
            terminals,
            budget,
            seed,
            max_edges,
        } => {
            let omega = read_domain(&data.domain)?;
            let mesh = triangulate(&omega)?;
            let t = [
                snap(&mesh, &omega, [terminals[0], terminals[1]])?,
                snap(&mesh, &omega, [terminals[2], terminals[3]])?,
            ];
            if t[0] == t[1] {
                return Err(Error::InvalidArgument("terminals snap to the same vertex".into()));
            }
            let g = affine_field(&mesh, &data.g, "g")?;
            let mut opts = OptimizeOptions::new(*budget, *seed);
            opts.max_edges = *max_edges;
            let res = cutting::optimize_cut(&mesh, t, &CutDensity::new(data.p, data.epsilon), &g, &opts)?;
            out_dir(&data.out)?;
            write(&data.out, "cut.txt", &cutting::cut_to_text(&res.cut))?;
            write(&data.out, "cut_trace.csv", &cutting::trace_to_csv(&res.trace))?;
            write(&data.out, "cut_report.txt", &cut_report(res.report.energy, res.report.el_residual, res.cut.edges.len()))?;
            println!("{:.12e}", res.report.energy);
        }
        CutCommand::Energy { data, cut } => {
            let omega = read_domain(&data.domain)?;
            let mesh = triangulate(&omega)?;
            let k = cutting::cut_from_text(&read(cut)?, &cut.display().to_string())?;
            let g = affine_field(&mesh, &data.g, "g")?;
            let rep = cutting::cut_energy(&mesh, &k, &CutDensity::new(data.p, data.epsilon), &g)?;
            out_dir(&data.out)?;
            write(&data.out, "u.csv", &rep.solution.to_csv("slit"))?;
            write(&data.out, "cut_report.txt", &cut_report(rep.energy, rep.el_residual, k.edges.len()))?;
            println!("{:.12e}", rep.energy);
        }
    }
    Ok(())
}

fn cut_report(energy: f64, el: f64, edges: usize) -> String {
    format!("energy = {energy:.17e}\nel_residual = {el:.17e}\nedges = {edges}\n")
}

fn run_density(a: &DensityArgs) -> Result<()> {
    let omega = read_domain(&a.domain)?;
    let box_mesh = triangulate(&PixelDomain::full(omega.resolution(), omega.bbox())?)?;
    let om = triangulate(&omega)?;
    let basis = hperp_basis(&omega, &box_mesh, a.count, a.seed)?;
    out_dir(&a.out)?;
    let mut table = String::from("element,test,residual\n");
    for (k, e) in basis.iter().enumerate() {
        write(&a.out, &format!("hperp_{k}_potential.csv"), &e.potential.to_csv("box"))?;
        write(&a.out, &format!("hperp_{k}_components.csv"), &e.component_values_csv())?;
        for j in 0..3 {
            let s = j as f64;
            let u = NodalField::interpolate(&om, |x, y| (3.0 * x + 1.3 * s).sin() * (2.0 * y - 0.7 * s).cos() + s * x * y);
            let r = orthogonality_residual(&om, &u, e, a.p)?;
            table.push_str(&format!("{k},{j},{r:e}\n"));
        }
    }
    write(&a.out, "orthogonality.csv", &table)
}

fn run_maly(a: &MalyArgs) -> Result<()> {
    let out = maly_martio(a.stages, None, a.resolution)?;
    out_dir(&a.out)?;
    for st in &out.stages {
        write(&a.out, &format!("stage_{}.csv", st.index), &st.field.to_csv("box"))?;
    }
    write(&a.out, "domain.txt", &out.domain.to_text())?;
    write(&a.out, "coverage.csv", &out.coverage_csv())?;
    if out.truncated {
        println!("truncated: balls below two cells from some stage on");
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Domain(a) => run_domain(a)?,
        Command::Mesh(a) => run_mesh(a)?,
        Command::Solve(a) => run_solve(a)?,
        Command::Stability(a) => run_stability(a)?,
        Command::Mosco(a) => run_mosco(a)?,
        Command::Cut { action } => run_cut(action)?,
        Command::Density(a) => run_density(a)?,
        Command::Maly(a) => run_maly(a)?,
        Command::Check => return Ok(check::run()),
    }
    Ok(true)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Parse { .. } => 1,
        Error::NonConvergence { .. } | Error::Linear(_) => 2,
        Error::Io { .. } => 3,
    }
}

fn configure_workers() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var("NSL_WORKERS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("NSL_WORKERS must be an integer >= 1, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 64 } else { 0 });
        }
    };
    if let Err(msg) = configure_workers() {
        eprintln!("error: {msg}");
        return ExitCode::from(64);
    }
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
