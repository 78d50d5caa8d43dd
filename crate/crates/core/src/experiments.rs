//! Domain sequences converging in the Hausdorff complementary sense, and
//! the stability and Mosco probes evaluated along them.
//!
//! Every member and the limit are rasterized on the same pixel grid, so
//! solutions can be compared slot by slot after zero extension.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::density::maly_martio;
use crate::error::{Error, Result};
use crate::fem::{extend_by_zero, extend_flux_by_zero, gradient, GridField, NodalField};
use crate::geometry::{complement_components, complementary_distance, BoundingBox, PixelDomain};
use crate::linalg::SymmetricBuilder;
use crate::mesh::{triangulate, CrackMesh};
use crate::solver::{solve, Operator, ProblemSpec, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SequenceKind {
    ShrinkingHole,
    FixedCrackOpening,
    FatteningObstacle,
    MovingHole,
    MalyMartioStagewise,
}

impl SequenceKind {
    pub const ALL: [SequenceKind; 5] = [
        SequenceKind::ShrinkingHole,
        SequenceKind::FixedCrackOpening,
        SequenceKind::FatteningObstacle,
        SequenceKind::MovingHole,
        SequenceKind::MalyMartioStagewise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SequenceKind::ShrinkingHole => "shrinking_hole",
            SequenceKind::FixedCrackOpening => "fixed_crack_opening",
            SequenceKind::FatteningObstacle => "fattening_obstacle",
            SequenceKind::MovingHole => "moving_hole",
            SequenceKind::MalyMartioStagewise => "maly_martio_stagewise",
        }
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SequenceKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown sequence kind `{s}`")))
    }
}

/// A family of pixel domains indexed by `1..=stages`, plus its limit.
///
/// Parameter meaning depends on the kind (lengths are in box units):
///
/// | kind | `r0` | `w0` | `m0` |
/// |---|---|---|---|
/// | `shrinking_hole` | hole radius at index 0 | | |
/// | `fixed_crack_opening` | | opening at index 0 | |
/// | `fattening_obstacle` | | comb width | measure between the teeth |
/// | `moving_hole` | hole radius | shift at index 0 | |
/// | `maly_martio_stagewise` | | | |
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSequence {
    pub kind: SequenceKind,
    pub stages: usize,
    pub resolution: usize,
    pub bbox: BoundingBox,
    pub r0: f64,
    pub w0: f64,
    pub m0: f64,
}

impl DomainSequence {
    /// Default parameters for `kind`.
    pub fn new(kind: SequenceKind, stages: usize, resolution: usize) -> Self {
        let bbox = match kind {
            SequenceKind::MalyMartioStagewise => BoundingBox {
                x0: -2.0,
                y0: -2.0,
                side: 4.0,
            },
            _ => BoundingBox::unit(),
        };
        let (r0, w0) = match kind {
            SequenceKind::ShrinkingHole => (0.52, 0.0),
            SequenceKind::MovingHole => (0.1, 0.25),
            _ => (0.0, 0.25),
        };
        Self {
            kind,
            stages,
            resolution,
            bbox,
            r0,
            w0,
            m0: 0.05,
        }
    }

    /// Parses `key = value` lines (`#` starts a comment). Keys: `kind`,
    /// `stages`, `resolution`, `r0`, `w0`, `m0`.
    pub fn from_config(text: &str, origin: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut entries = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(ln + 1, format!("expected `key = value`, got `{line}`")))?;
            entries.push((ln + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let kind = entries
            .iter()
            .find(|(_, k, _)| k == "kind")
            .ok_or_else(|| parse_err(0, "missing `kind`".into()))?;
        let kind: SequenceKind = kind.2.parse().map_err(|e: Error| parse_err(kind.0, e.to_string()))?;
        let mut seq = DomainSequence::new(kind, 6, 64);
        for (ln, k, v) in &entries {
            let num = || v.parse::<f64>().map_err(|_| parse_err(*ln, format!("`{k}` expects a number, got `{v}`")));
            let int = || v.parse::<usize>().map_err(|_| parse_err(*ln, format!("`{k}` expects an integer, got `{v}`")));
            match k.as_str() {
                "kind" => {}
                "stages" => seq.stages = int()?,
                "resolution" => seq.resolution = int()?,
                "r0" => seq.r0 = num()?,
                "w0" => seq.w0 = num()?,
                "m0" => seq.m0 = num()?,
                _ => return Err(parse_err(*ln, format!("unknown key `{k}`"))),
            }
        }
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::invalid("a sequence needs at least one stage"));
        }
        if self.resolution < 4 {
            return Err(Error::invalid("resolution must be at least 4"));
        }
        if self.kind == SequenceKind::FatteningObstacle {
            let w = self.comb_columns();
            if w < 2 || w > self.resolution {
                return Err(Error::invalid("comb width must span between 2 cells and the box"));
            }
            if w >> (self.stages - 1) < 2 {
                return Err(Error::invalid(format!(
                    "{} stages need teeth thinner than one cell at comb width {w}",
                    self.stages
                )));
            }
            if self.comb_rows() >= self.resolution {
                return Err(Error::invalid("comb measure m0 does not fit in the box"));
            }
        }
        Ok(())
    }

    /// Upper bound `l` on the number of complement components (the exterior
    /// of the box included).
    pub fn component_bound(&self) -> usize {
        match self.kind {
            SequenceKind::FatteningObstacle => 1,
            SequenceKind::MalyMartioStagewise => (1usize << (self.stages - 1).min(62)) + 1,
            _ => 2,
        }
    }

    fn h(&self) -> f64 {
        self.bbox.side / self.resolution as f64
    }

    fn center(&self) -> [f64; 2] {
        let c = (self.resolution / 2) as f64 + 0.5;
        [self.bbox.x0 + c * self.h(), self.bbox.y0 + c * self.h()]
    }

    fn comb_columns(&self) -> usize {
        (self.w0 * self.resolution as f64).round() as usize
    }

    fn comb_rows(&self) -> usize {
        let h = self.h();
        let per_row = 0.5 * self.comb_columns() as f64 * h * h;
        (self.m0 / per_row).ceil().max(1.0) as usize
    }

    fn full(&self) -> Result<PixelDomain> {
        PixelDomain::full(self.resolution, self.bbox)
    }

    fn crack(&self, rows: usize) -> Result<PixelDomain> {
        let n = self.resolution;
        let mut d = self.full()?;
        for j in n / 2..(n / 2 + rows).min(n) {
            for i in n / 4..3 * n / 4 {
                d.set(i, j, false);
            }
        }
        Ok(d)
    }

    /// Comb with tooth period `period` cells; `period == 0` fills the whole
    /// rectangle.
    fn comb(&self, period: usize) -> Result<PixelDomain> {
        let n = self.resolution;
        let w = self.comb_columns();
        let c0 = (n - w) / 2;
        let mut d = self.full()?;
        for j in 0..self.comb_rows() {
            for c in 0..w {
                if period == 0 || c % period < period / 2 {
                    d.set(c0 + c, j, false);
                }
            }
        }
        Ok(d)
    }

    fn maly(&self, stage: usize) -> Result<PixelDomain> {
        let out = maly_martio(stage, None, self.resolution)?;
        let last = out.stages.last().expect("at least one stage");
        let mut d = self.full()?;
        for c in &last.centers {
            d.remove_disc(*c, last.radius);
        }
        Ok(d)
    }

    fn check_components(&self, d: PixelDomain) -> Result<PixelDomain> {
        let count = complement_components(&d).count();
        if count > self.component_bound() {
            return Err(Error::invalid(format!(
                "{} member has {count} complement components, above the bound {}",
                self.kind,
                self.component_bound()
            )));
        }
        Ok(d)
    }
}

/// Member `index` of the sequence (`1 ≤ index ≤ stages`).
pub fn generate(seq: &DomainSequence, index: usize) -> Result<PixelDomain> {
    seq.validate()?;
    if index == 0 || index > seq.stages {
        return Err(Error::invalid(format!("index {index} outside 1..={}", seq.stages)));
    }
    let scale = 0.5f64.powi(index as i32);
    let d = match seq.kind {
        SequenceKind::ShrinkingHole => {
            let mut d = seq.full()?;
            d.remove_disc(seq.center(), seq.r0 * scale);
            d
        }
        SequenceKind::FixedCrackOpening => {
            let rows = (seq.w0 * scale / seq.h()).round().max(1.0) as usize;
            seq.crack(rows)?
        }
        SequenceKind::FatteningObstacle => seq.comb(seq.comb_columns() >> (index - 1))?,
        SequenceKind::MovingHole => {
            let mut d = seq.full()?;
            let c = seq.center();
            d.remove_disc([c[0] + seq.w0 * scale, c[1]], seq.r0);
            d
        }
        SequenceKind::MalyMartioStagewise => seq.maly(index)?,
    };
    seq.check_components(d)
}

/// Hausdorff complementary limit of the sequence on the same grid.
pub fn limit(seq: &DomainSequence) -> Result<PixelDomain> {
    seq.validate()?;
    let d = match seq.kind {
        SequenceKind::ShrinkingHole => {
            let n = seq.resolution;
            let mut d = seq.full()?;
            d.set(n / 2, n / 2, false);
            d
        }
        SequenceKind::FixedCrackOpening => seq.crack(1)?,
        SequenceKind::FatteningObstacle => seq.comb(0)?,
        SequenceKind::MovingHole => {
            let mut d = seq.full()?;
            d.remove_disc(seq.center(), seq.r0);
            d
        }
        SequenceKind::MalyMartioStagewise => seq.maly(seq.stages)?,
    };
    seq.check_components(d)
}

/// All members in index order.
pub fn members(seq: &DomainSequence) -> Result<Vec<PixelDomain>> {
    (1..=seq.stages).map(|k| generate(seq, k)).collect()
}

/// Scalar coefficient given as a function of position.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    /// `c + cx x + cy y`.
    Affine([f64; 3]),
    /// `inside` on the rectangle `[x0, x1] × [y0, y1]`, `outside` elsewhere.
    Rect {
        rect: [f64; 4],
        inside: f64,
        outside: f64,
    },
}

impl Coefficient {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match *self {
            Coefficient::Constant(c) => c,
            Coefficient::Affine([c, cx, cy]) => c + cx * p[0] + cy * p[1],
            Coefficient::Rect { rect, inside, outside } => {
                if p[0] >= rect[0] && p[0] <= rect[2] && p[1] >= rect[1] && p[1] <= rect[3] {
                    inside
                } else {
                    outside
                }
            }
        }
    }

    /// Values at the triangle centroids.
    pub fn on_triangles(&self, mesh: &CrackMesh) -> Vec<f64> {
        (0..mesh.triangle_count()).map(|t| self.eval(mesh.centroid(t))).collect()
    }

    /// Values at the cell centers of `omega`'s grid.
    pub fn on_cells(&self, omega: &PixelDomain) -> Vec<f64> {
        let n = omega.resolution();
        (0..n * n).map(|c| self.eval(omega.cell_center(c))).collect()
    }
}

/// Position-dependent problem data, instantiated on every member mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityProblem {
    pub p: f64,
    pub a: Coefficient,
    pub b: Coefficient,
    pub f: Coefficient,
    pub g: Coefficient,
    pub options: SolverOptions,
}

impl StabilityProblem {
    /// `a ≡ 1`, `b ≡ 1`, `f ≡ 1`, `g ≡ 0`.
    pub fn new(p: f64) -> Self {
        Self {
            p,
            a: Coefficient::Constant(1.0),
            b: Coefficient::Constant(1.0),
            f: Coefficient::Constant(1.0),
            g: Coefficient::Constant(0.0),
            options: SolverOptions::default(),
        }
    }

    pub fn spec(&self, mesh: &CrackMesh) -> ProblemSpec {
        let operator = match self.a {
            Coefficient::Constant(c) if c == 1.0 => Operator::PLaplacian,
            _ => Operator::Scaled(self.a.on_triangles(mesh)),
        };
        ProblemSpec {
            p: self.p,
            operator,
            b: self.b.on_triangles(mesh),
            f: self.f.on_triangles(mesh),
            g_load: self.g.on_triangles(mesh),
            dirichlet: None,
            options: self.options.clone(),
        }
    }

    /// `meas(Ω ∩ {b > 0})`.
    pub fn positive_weight_measure(&self, mesh: &CrackMesh) -> f64 {
        (0..mesh.triangle_count())
            .filter(|&t| self.b.eval(mesh.centroid(t)) > 0.0)
            .map(|t| mesh.area(t))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub index: usize,
    pub dh_complement: f64,
    pub meas: f64,
    pub meas_bpos: f64,
    pub grad_gap: f64,
    pub field_gap: f64,
    /// Solver failure on this member; the gaps are then NaN.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub limit_meas: f64,
    pub limit_meas_bpos: f64,
    pub verdict: Verdict,
}

impl StabilityReport {
    pub fn grad_gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.grad_gap).collect()
    }

    /// `stability.csv` contents.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,dH_complement,meas,meas_bpos,grad_gap,field_gap\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e}\n",
                r.index, r.dh_complement, r.meas, r.meas_bpos, r.grad_gap, r.field_gap
            ));
        }
        s
    }
}

/// Verdict on finite traces.
///
/// * `stable`: no failed member, final gradient gap below a tenth of the
///   first, strictly decreasing over the final half of the trace, and the
///   final `meas(Ω_n ∩ {b>0})` gap at most a tenth of the first one (or
///   below `1e-12`).
/// * `unstable`: final gradient gap at least half of the maximum.
/// * `inconclusive` otherwise, and for traces that vanish identically.
pub fn verdict(rows: &[StabilityRow], limit_meas_bpos: f64) -> Verdict {
    if rows.is_empty() || rows.iter().any(|r| r.failure.is_some()) {
        return Verdict::Inconclusive;
    }
    let g: Vec<f64> = rows.iter().map(|r| r.grad_gap).collect();
    let first = g[0];
    let last = *g.last().unwrap();
    let max = g.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Verdict::Inconclusive;
    }
    let half = g.len() / 2;
    let decreasing = g[half.saturating_sub(1)..].windows(2).all(|w| w[1] < w[0]);
    let mgap: Vec<f64> = rows.iter().map(|r| (r.meas_bpos - limit_meas_bpos).abs()).collect();
    let meas_converged = *mgap.last().unwrap() <= (0.1 * mgap[0]).max(1e-12);
    if g.len() >= 2 && last < 0.1 * first && decreasing && meas_converged {
        Verdict::Stable
    } else if last >= 0.5 * max {
        Verdict::Unstable
    } else {
        Verdict::Inconclusive
    }
}

struct Solved {
    mesh: CrackMesh,
    grad: GridField,
    value: GridField,
    meas_bpos: f64,
}

/// Solves whose unregularized residual ends above `RESIDUAL_SLACK · el_tol`
/// count as failures.
const RESIDUAL_SLACK: f64 = 100.0;

fn solve_on(omega: &PixelDomain, problem: &StabilityProblem) -> Result<Solved> {
    let mesh = triangulate(omega)?;
    let report = solve(&mesh, &problem.spec(&mesh))?;
    if report.el_residual > RESIDUAL_SLACK * problem.options.el_tol {
        return Err(Error::NonConvergence {
            message: format!("residual stalled at ε = {:.3e}", report.final_epsilon()),
            residual: report.el_residual,
            iterations: report.newton_iters,
            energy_trace: report.energy_trace,
        });
    }
    let u = &report.solution;
    Ok(Solved {
        grad: extend_flux_by_zero(&mesh, &gradient(&mesh, u), omega)?,
        value: extend_by_zero(&mesh, u, omega)?,
        meas_bpos: problem.positive_weight_measure(&mesh),
        mesh,
    })
}

/// Solves on every member and on the limit, and compares the zero
/// extensions. Members are solved in parallel; rows keep the given order.
pub fn run_stability_on(
    members: &[(usize, PixelDomain)],
    limit: &PixelDomain,
    problem: &StabilityProblem,
) -> Result<StabilityReport> {
    for (_, m) in members {
        m.check_same_grid(limit)?;
    }
    let reference = solve_on(limit, problem)?;
    let weight = problem.b.on_cells(limit);
    let rows = members
        .par_iter()
        .map(|(index, omega)| -> Result<StabilityRow> {
            let dh_complement = complementary_distance(omega, limit)?;
            let meas = omega.inside_count() as f64 * omega.cell_area();
            let mut row = StabilityRow {
                index: *index,
                dh_complement,
                meas,
                meas_bpos: f64::NAN,
                grad_gap: f64::NAN,
                field_gap: f64::NAN,
                failure: None,
            };
            match solve_on(omega, problem) {
                Ok(s) => {
                    row.meas_bpos = s.meas_bpos;
                    row.grad_gap = s.grad.sub(&reference.grad)?.lp_norm(problem.p, None);
                    row.field_gap = s.value.sub(&reference.value)?.lp_norm(problem.p, Some(&weight));
                }
                Err(e) => row.failure = Some(e.to_string()),
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let limit_meas_bpos = reference.meas_bpos;
    Ok(StabilityReport {
        verdict: verdict(&rows, limit_meas_bpos),
        limit_meas: reference.mesh.total_area(),
        limit_meas_bpos,
        rows,
    })
}

/// [`run_stability_on`] over the members `1..=stages` of `seq`.
pub fn run_stability(seq: &DomainSequence, problem: &StabilityProblem) -> Result<StabilityReport> {
    let ms = members(seq)?;
    let indexed: Vec<(usize, PixelDomain)> = ms.into_iter().enumerate().map(|(k, d)| (k + 1, d)).collect();
    run_stability_on(&indexed, &limit(seq)?, problem)
}

/// Stability reports at two resolutions of the same sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionSweep {
    pub fine: StabilityReport,
    pub coarse: StabilityReport,
    /// Both resolutions reach the same verdict.
    pub consistent: bool,
}

pub fn resolution_sweep(seq: &DomainSequence, coarse_resolution: usize, problem: &StabilityProblem) -> Result<ResolutionSweep> {
    let fine = run_stability(seq, problem)?;
    let coarse_seq = DomainSequence {
        resolution: coarse_resolution,
        ..seq.clone()
    };
    let coarse = run_stability(&coarse_seq, problem)?;
    Ok(ResolutionSweep {
        consistent: fine.verdict == coarse.verdict,
        fine,
        coarse,
    })
}

/// Recovery-sequence deficiency of `u ∈ W^{1,p}(Ω)` along `Ω_n`.
///
/// The candidate `u_n` on `Ω_n` is the least-squares fit of the zero
/// extensions in the `W^{1,2}` inner product (centroid quadrature for the
/// values); the returned number is
/// `‖∇u_n 1_{Ω_n} − ∇u 1_Ω‖_p + ‖u_n 1_{Ω_n} − u 1_Ω‖_p`.
/// `u` lives on `triangulate(omega)`.
pub fn mosco_m1_probe(omega_n: &PixelDomain, omega: &PixelDomain, u: &NodalField, p: f64) -> Result<f64> {
    omega_n.check_same_grid(omega)?;
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("exponent must be at least 1, got {p}")));
    }
    let mesh = triangulate(omega)?;
    u.check(&mesh)?;
    let target_grad = extend_flux_by_zero(&mesh, &gradient(&mesh, u), omega)?;
    let target_value = extend_by_zero(&mesh, u, omega)?;

    let mesh_n = triangulate(omega_n)?;
    let nv = mesh_n.vertex_count();
    let mut k = SymmetricBuilder::with_capacity(nv, 9 * mesh_n.triangle_count());
    let mut rhs = vec![0.0; nv];
    for t in 0..mesh_n.triangle_count() {
        let g = mesh_n.geometry(t);
        let tri = mesh_n.triangles()[t];
        let s = mesh_n.slots()[t];
        let tg = [target_grad.values[2 * s], target_grad.values[2 * s + 1]];
        let tv = target_value.values[s];
        for a in 0..3 {
            rhs[tri[a]] += g.area * (g.grads[a][0] * tg[0] + g.grads[a][1] * tg[1] + tv / 3.0);
            for b in 0..3 {
                let stiff = g.grads[a][0] * g.grads[b][0] + g.grads[a][1] * g.grads[b][1];
                k.add(tri[a], tri[b], g.area * (stiff + 1.0 / 9.0));
            }
        }
    }
    let un = NodalField::new(k.solve(&rhs)?);
    let grad = extend_flux_by_zero(&mesh_n, &gradient(&mesh_n, &un), omega_n)?;
    let value = extend_by_zero(&mesh_n, &un, omega_n)?;
    Ok(grad.sub(&target_grad)?.lp_norm(p, None) + value.sub(&target_value)?.lp_norm(p, None))
}

/// Weak-limit surrogate of one member field.
#[derive(Debug, Clone, PartialEq)]
pub struct M2Row {
    pub index: usize,
    /// `Σ_B |∫_{B∖Ω} u_n 1_{Ω_n}|` over coarse blocks `B`.
    pub phi_outside: f64,
    /// `Σ_B |∫_{B∖Ω} ∇u_n 1_{Ω_n}|`.
    pub flux_outside: f64,
    /// Largest mismatch between the difference quotient of block averages
    /// of `u_n` and the mean of the block averages of `∂u_n`, over adjacent
    /// blocks lying inside Ω.
    pub interior_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct M2Report {
    /// Cells per coarse block side.
    pub block: usize,
    pub rows: Vec<M2Row>,
}

impl M2Report {
    /// Largest of the three defects on the last member.
    pub fn max_defect(&self) -> f64 {
        self.rows
            .last()
            .map_or(0.0, |r| r.phi_outside.max(r.flux_outside).max(r.interior_defect))
    }
}

/// Coarse-grid averages of the zero extensions of `u_n` and `∇u_n`,
/// checked against the limit domain: both vanish off Ω and the averaged
/// gradient matches the averaged values inside. Each field lives on
/// `triangulate` of its member.
pub fn mosco_m2_probe(members: &[(usize, PixelDomain, NodalField)], omega: &PixelDomain, block: usize) -> Result<M2Report> {
    let n = omega.resolution();
    if block == 0 || n % block != 0 {
        return Err(Error::invalid(format!("block size {block} does not divide the resolution {n}")));
    }
    let nb = n / block;
    let bh = block as f64 * omega.cell_side();
    let cell_area = omega.cell_area();
    let rows = members
        .par_iter()
        .map(|(index, omega_n, u)| -> Result<M2Row> {
            omega_n.check_same_grid(omega)?;
            let mesh = triangulate(omega_n)?;
            let value = extend_by_zero(&mesh, u, omega_n)?.cell_average();
            let grad = extend_flux_by_zero(&mesh, &gradient(&mesh, u), omega_n)?.cell_average();
            let mut phi_in = vec![0.0; nb * nb];
            let mut flux_in = vec![[0.0; 2]; nb * nb];
            let mut phi_out = vec![0.0; nb * nb];
            let mut flux_out = vec![[0.0; 2]; nb * nb];
            let mut interior = vec![true; nb * nb];
            for c in 0..n * n {
                let b = (c / n / block) * nb + (c % n) / block;
                let (phi, flux) = if omega.mask()[c] {
                    (&mut phi_in, &mut flux_in)
                } else {
                    interior[b] = false;
                    (&mut phi_out, &mut flux_out)
                };
                phi[b] += cell_area * value[c];
                flux[b][0] += cell_area * grad[2 * c];
                flux[b][1] += cell_area * grad[2 * c + 1];
            }
            let phi_outside = phi_out.iter().map(|v| v.abs()).sum();
            let flux_outside = flux_out.iter().map(|v| v[0].hypot(v[1])).sum();
            let area = bh * bh;
            let mut interior_defect: f64 = 0.0;
            for bj in 0..nb {
                for bi in 0..nb {
                    let b = bj * nb + bi;
                    for (d, nbr) in [(0, (bi + 1 < nb).then(|| b + 1)), (1, (bj + 1 < nb).then(|| b + nb))] {
                        let Some(o) = nbr else { continue };
                        if !(interior[b] && interior[o]) {
                            continue;
                        }
                        let quotient = (phi_in[o] - phi_in[b]) / area / bh;
                        let mean = 0.5 * (flux_in[b][d] + flux_in[o][d]) / area;
                        interior_defect = interior_defect.max((quotient - mean).abs());
                    }
                }
            }
            Ok(M2Row {
                index: *index,
                phi_outside,
                flux_outside,
                interior_defect,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(M2Report { block, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(kind: SequenceKind, stages: usize, n: usize) -> DomainSequence {
        DomainSequence::new(kind, stages, n)
    }

    #[test]
    fn complementary_distance_to_limit_is_monotone() {
        for kind in SequenceKind::ALL {
            let stages = if kind == SequenceKind::MalyMartioStagewise { 3 } else { 4 };
            let s = seq(kind, stages, 64);
            let lim = limit(&s).unwrap();
            let d: Vec<f64> = members(&s)
                .unwrap()
                .iter()
                .map(|m| complementary_distance(m, &lim).unwrap())
                .collect();
            assert!(d.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{kind}: {d:?}");
            if kind != SequenceKind::FatteningObstacle {
                assert!(*d.last().unwrap() <= d[0], "{kind}");
            }
        }
    }

    #[test]
    fn shrinking_hole_measure_increases_to_limit() {
        let s = seq(SequenceKind::ShrinkingHole, 6, 64);
        let lim = limit(&s).unwrap();
        let meas: Vec<usize> = members(&s).unwrap().iter().map(|m| m.inside_count()).collect();
        assert!(meas.windows(2).all(|w| w[1] > w[0]), "{meas:?}");
        assert!(meas[5] < lim.inside_count());
        assert_eq!(lim.inside_count(), 64 * 64 - 1);
        assert_eq!(meas[5], 64 * 64 - 5);
    }

    #[test]
    fn comb_keeps_measure_away_from_limit() {
        let s = seq(SequenceKind::FatteningObstacle, 4, 64);
        let lim = limit(&s).unwrap();
        let slots = 16 * 26 / 2;
        for m in members(&s).unwrap() {
            assert_eq!(m.inside_count() - lim.inside_count(), slots);
            assert_eq!(complement_components(&m).count(), 1);
        }
        let lost = slots as f64 / 4096.0;
        assert!(lost >= 0.05 && lost < 0.051);
        assert!(generate(&s, 5).is_err());
        assert!(DomainSequence::new(SequenceKind::FatteningObstacle, 5, 64).validate().is_err());
    }

    #[test]
    fn crack_opening_reaches_limit() {
        let s = seq(SequenceKind::FixedCrackOpening, 5, 32);
        let lim = limit(&s).unwrap();
        let last = generate(&s, 5).unwrap();
        assert_eq!(complementary_distance(&last, &lim).unwrap(), 0.0);
        assert!(complementary_distance(&generate(&s, 1).unwrap(), &lim).unwrap() > 0.0);
    }

    #[test]
    fn config_round_trip() {
        let s = DomainSequence::from_config("kind = fattening_obstacle\nstages = 3 # comment\nresolution = 32\nm0 = 0.02\n", "c").unwrap();
        assert_eq!(s.kind, SequenceKind::FatteningObstacle);
        assert_eq!((s.stages, s.resolution, s.m0), (3, 32, 0.02));
        assert!(matches!(
            DomainSequence::from_config("kind = spiral\n", "c"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(DomainSequence::from_config("stages = 3\n", "c").is_err());
        assert!(DomainSequence::from_config("kind = moving_hole\nfoo = 1\n", "c").is_err());
    }

    fn rows(gaps: &[f64], meas_gap: f64) -> Vec<StabilityRow> {
        gaps.iter()
            .enumerate()
            .map(|(i, &g)| StabilityRow {
                index: i + 1,
                dh_complement: 0.0,
                meas: 1.0,
                meas_bpos: 1.0 + meas_gap,
                grad_gap: g,
                field_gap: 0.0,
                failure: None,
            })
            .collect()
    }

    #[test]
    fn verdict_rule() {
        assert_eq!(verdict(&rows(&[1.0, 0.5, 0.2, 0.05], 0.0), 1.0), Verdict::Stable);
        assert_eq!(verdict(&rows(&[1.0, 0.5, 0.2, 0.05], 0.3), 1.0), Verdict::Inconclusive);
        assert_eq!(verdict(&rows(&[1.0, 0.9, 0.8, 0.7], 0.3), 1.0), Verdict::Unstable);
        assert_eq!(verdict(&rows(&[1.0, 0.5, 0.04, 0.05], 0.0), 1.0), Verdict::Inconclusive);
        assert_eq!(verdict(&rows(&[0.0, 0.0, 0.0], 0.0), 1.0), Verdict::Inconclusive);
        let mut r = rows(&[1.0, 0.5, 0.2, 0.05], 0.0);
        r[1].failure = Some("boom".into());
        assert_eq!(verdict(&r, 1.0), Verdict::Inconclusive);
    }

    #[test]
    fn identical_members_give_zero_gaps() {
        let s = seq(SequenceKind::MovingHole, 2, 16);
        let lim = limit(&s).unwrap();
        let ms = vec![(1, lim.clone()), (2, lim.clone())];
        let mut problem = StabilityProblem::new(1.5);
        problem.f = Coefficient::Affine([0.0, 1.0, 0.0]);
        let r = run_stability_on(&ms, &lim, &problem).unwrap();
        for row in &r.rows {
            assert!(row.grad_gap < 1e-12 && row.field_gap < 1e-12, "{row:?}");
            assert_eq!(row.dh_complement, 0.0);
        }
        assert!(r.to_csv().starts_with("index,dH_complement,meas,meas_bpos,grad_gap,field_gap\n"));
    }

    #[test]
    fn m1_probe_recovers_identical_domain() {
        let s = seq(SequenceKind::ShrinkingHole, 2, 16);
        let lim = limit(&s).unwrap();
        let u = NodalField::interpolate(&triangulate(&lim).unwrap(), |x, y| x * x - y);
        assert!(mosco_m1_probe(&lim, &lim, &u, 1.5).unwrap() < 1e-10);
        let m = generate(&s, 1).unwrap();
        assert!(mosco_m1_probe(&m, &lim, &u, 1.5).unwrap() > 1e-3);
    }

    #[test]
    fn m2_probe_constant_and_linear_fields() {
        let s = seq(SequenceKind::ShrinkingHole, 3, 32);
        let lim = limit(&s).unwrap();
        let ms: Vec<_> = members(&s)
            .unwrap()
            .into_iter()
            .enumerate()
            .map(|(k, m)| {
                let u = NodalField::constant(&triangulate(&m).unwrap(), 1.0);
                (k + 1, m, u)
            })
            .collect();
        let mut ms = ms;
        ms.push((4, lim.clone(), NodalField::constant(&triangulate(&lim).unwrap(), 1.0)));
        let r = mosco_m2_probe(&ms, &lim, 4).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.rows.iter().all(|row| row.phi_outside == 0.0 && row.flux_outside == 0.0));
        assert!(r.rows.windows(2).all(|w| w[1].interior_defect < w[0].interior_defect), "{r:?}");
        assert!(r.max_defect() < 1e-12, "{r:?}");

        let c = seq(SequenceKind::FatteningObstacle, 2, 32);
        let climit = limit(&c).unwrap();
        let ms: Vec<_> = members(&c)
            .unwrap()
            .into_iter()
            .enumerate()
            .map(|(k, m)| {
                let u = NodalField::interpolate(&triangulate(&m).unwrap(), |x, _| x);
                (k + 1, m, u)
            })
            .collect();
        let r = mosco_m2_probe(&ms, &climit, 4).unwrap();
        let lost = (ms[0].1.inside_count() - climit.inside_count()) as f64 * climit.cell_area();
        for row in &r.rows {
            assert!((row.flux_outside - lost).abs() < 1e-12, "{row:?} vs {lost}");
            assert!(row.interior_defect < 1e-10);
        }
    }
}
