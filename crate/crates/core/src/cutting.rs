//! Optimal membrane cuts: energy of a slit membrane with prescribed outer
//! boundary values, its maximization over connected edge paths, and the
//! behaviour of minimizers along converging cut sequences.
//!
//! The energy of a cut `K` is
//!
//! ```text
//! 𝓔(K) = min { ∫_{Ω∖K} a [(|∇u|² + ε²)^{p/2} − ε^p] : u = g on ∂Ω∖K }
//! ```
//!
//! which is antitone in `K`: a larger cut frees more of the membrane.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{gradient, NodalField};
use crate::geometry::{hausdorff_distance, CompactSet};
use crate::mesh::{slit, CrackMesh};
use crate::solver::{solve, Assembly, Dirichlet, Operator, ProblemSpec, SolverOptions};

pub use crate::mesh::CutPath;

/// Energy density `a(x) (|ξ|² + ε²)^{p/2}`, shifted so that `f(x, 0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutDensity {
    pub p: f64,
    pub epsilon: f64,
    /// Per triangle of the unslit mesh; `None` means `a ≡ 1`.
    pub a: Option<Vec<f64>>,
}

impl CutDensity {
    pub fn new(p: f64, epsilon: f64) -> Self {
        Self { p, epsilon, a: None }
    }

    fn validate(&self, mesh: &CrackMesh) -> Result<()> {
        if !(self.p > 1.0 && self.p <= 2.0) {
            return Err(Error::invalid(format!("p must lie in (1, 2], got {}", self.p)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if let Some(a) = &self.a {
            if a.len() != mesh.triangle_count() || a.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::invalid("coefficient a must be positive on every triangle"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutEnergyReport {
    pub energy: f64,
    /// Minimizer on the slit mesh.
    pub solution: NodalField,
    pub slit_mesh: CrackMesh,
    /// Relative residual of the regularized system at the final `ε`.
    pub el_residual: f64,
}

/// Maps every vertex of a mesh slit from `base` to its base vertex.
fn base_vertex_map(base: &CrackMesh, slit_mesh: &CrackMesh) -> Vec<usize> {
    let mut by_origin: HashMap<usize, usize> = HashMap::new();
    for v in 0..base.vertex_count() {
        by_origin.entry(base.origin()[v]).or_insert(v);
    }
    (0..slit_mesh.vertex_count())
        .map(|v| if v < base.vertex_count() { v } else { by_origin[&slit_mesh.origin()[v]] })
        .collect()
}

fn cut_solver_options(density: &CutDensity) -> SolverOptions {
    let eps = density.epsilon;
    SolverOptions {
        epsilon0: if density.p == 2.0 { eps } else { eps.max(1e-2) },
        epsilon_min: eps,
        stop_on_unregularized: false,
        ..SolverOptions::default()
    }
}

/// Energy of `cut` on the unslit mesh `mesh`; `g` holds boundary values on
/// its vertices.
pub fn cut_energy(mesh: &CrackMesh, cut: &CutPath, density: &CutDensity, g: &NodalField) -> Result<CutEnergyReport> {
    density.validate(mesh)?;
    g.check(mesh)?;
    if let Some(t) = cut.terminals {
        if t.iter().any(|&v| v >= mesh.vertex_count()) {
            return Err(Error::invalid("cut terminals lie outside the domain"));
        }
    }
    let slit_mesh = slit(mesh, cut)?;
    let base_of = base_vertex_map(mesh, &slit_mesh);
    let on_cut: HashSet<usize> = cut.vertices(mesh)?.into_iter().collect();
    let fixed: Vec<usize> = slit_mesh
        .outer_boundary_vertices()
        .into_iter()
        .filter(|&v| !on_cut.contains(&base_of[v]))
        .collect();
    let values = fixed.iter().map(|&v| g.values[base_of[v]]).collect();
    let nt = slit_mesh.triangle_count();
    let spec = ProblemSpec {
        p: density.p,
        operator: density.a.clone().map_or(Operator::PLaplacian, Operator::Scaled),
        b: vec![0.0; nt],
        f: vec![0.0; nt],
        g_load: vec![0.0; nt],
        dirichlet: Some(Dirichlet { vertices: fixed, values }),
        options: cut_solver_options(density),
    };
    let rep = solve(&slit_mesh, &spec)?;
    let asm = Assembly::new(&slit_mesh, &spec);
    let energy = asm.membrane_energy(&rep.solution.values, density.epsilon).max(0.0);
    let el_residual = residual_norm(&slit_mesh, &spec, &rep.solution, density.epsilon);
    Ok(CutEnergyReport {
        energy,
        solution: rep.solution,
        slit_mesh,
        el_residual,
    })
}

fn residual_norm(mesh: &CrackMesh, spec: &ProblemSpec, u: &NodalField, eps: f64) -> f64 {
    let r = crate::solver::residual(mesh, spec, u, eps);
    let fixed: HashSet<usize> = spec.dirichlet.as_ref().map_or(HashSet::new(), |d| d.vertices.iter().copied().collect());
    r.iter()
        .enumerate()
        .filter(|(v, _)| !fixed.contains(v))
        .map(|(_, x)| x * x)
        .sum::<f64>()
        .sqrt()
}

/// One row of the annealing trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchStep {
    pub step: usize,
    pub energy: f64,
    pub accepted: bool,
    pub temperature: f64,
}

pub fn trace_to_csv(trace: &[SearchStep]) -> String {
    let mut s = String::from("step,energy,accepted,temperature\n");
    for r in trace {
        s.push_str(&format!("{},{:.17e},{},{:.17e}\n", r.step, r.energy, r.accepted as u8, r.temperature));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    /// Number of annealing proposals.
    pub budget: usize,
    pub seed: u64,
    /// Upper bound on the number of cut edges, if any.
    pub max_edges: Option<usize>,
    pub cooling: f64,
    /// Random moves used to estimate the initial temperature.
    pub probe_moves: usize,
}

impl OptimizeOptions {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            seed,
            max_edges: None,
            cooling: 0.95,
            probe_moves: 20,
        }
    }
}

/// Relative tolerance under which two energies count as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Strict preference order: higher energy, then fewer edges, then
/// lexicographically smaller edge ids.
pub fn prefer(a: (f64, &[usize]), b: (f64, &[usize])) -> bool {
    let tol = TIE_TOLERANCE * a.0.abs().max(b.0.abs()).max(1.0);
    if a.0 > b.0 + tol {
        return true;
    }
    if b.0 > a.0 + tol {
        return false;
    }
    (a.1.len(), a.1) < (b.1.len(), b.1)
}

/// Vertex adjacency of a mesh, neighbours sorted.
fn adjacency(mesh: &CrackMesh) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); mesh.vertex_count()];
    for [a, b] in mesh.edge_list() {
        adj[a].push(b);
        adj[b].push(a);
    }
    for l in &mut adj {
        l.sort_unstable();
    }
    adj
}

/// Fewest-edge path between two vertices (deterministic BFS).
fn shortest_path(adj: &[Vec<usize>], from: usize, to: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; adj.len()];
    prev[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = prev[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &w in &adj[v] {
            if prev[w] == usize::MAX {
                prev[w] = v;
                queue.push_back(w);
            }
        }
    }
    None
}

fn path_edges(mesh: &CrackMesh, path: &[usize]) -> Vec<usize> {
    let mut e: Vec<usize> = path.windows(2).map(|w| mesh.edge_id(w[0], w[1]).unwrap()).collect();
    e.sort_unstable();
    e
}

/// A random local deformation of a simple vertex path: insert or remove a
/// detour vertex, or extend or retract an end.
fn propose(
    path: &[usize],
    adj: &[Vec<usize>],
    terminals: [usize; 2],
    max_edges: usize,
    rng: &mut impl Rng,
) -> Option<Vec<usize>> {
    let on: HashSet<usize> = path.iter().copied().collect();
    let is_terminal = |v: usize| terminals.contains(&v);
    let edges = path.len() - 1;
    for _ in 0..32 {
        match rng.random_range(0..4) {
            0 if edges < max_edges => {
                let i = rng.random_range(0..edges);
                let (u, v) = (path[i], path[i + 1]);
                let cands: Vec<usize> = adj[u]
                    .iter()
                    .copied()
                    .filter(|w| !on.contains(w) && adj[v].binary_search(w).is_ok())
                    .collect();
                if cands.is_empty() {
                    continue;
                }
                let w = cands[rng.random_range(0..cands.len())];
                let mut out = path.to_vec();
                out.insert(i + 1, w);
                return Some(out);
            }
            1 if path.len() > 2 => {
                let i = rng.random_range(1..path.len() - 1);
                if is_terminal(path[i]) || adj[path[i - 1]].binary_search(&path[i + 1]).is_err() {
                    continue;
                }
                let mut out = path.to_vec();
                out.remove(i);
                return Some(out);
            }
            2 if edges < max_edges => {
                let front = rng.random_bool(0.5);
                let end = if front { path[0] } else { path[path.len() - 1] };
                let cands: Vec<usize> = adj[end].iter().copied().filter(|w| !on.contains(w)).collect();
                if cands.is_empty() {
                    continue;
                }
                let w = cands[rng.random_range(0..cands.len())];
                let mut out = path.to_vec();
                if front {
                    out.insert(0, w);
                } else {
                    out.push(w);
                }
                return Some(out);
            }
            3 if edges > 1 => {
                let front = rng.random_bool(0.5);
                let end = if front { path[0] } else { path[path.len() - 1] };
                if is_terminal(end) {
                    continue;
                }
                let mut out = path.to_vec();
                if front {
                    out.remove(0);
                } else {
                    out.pop();
                }
                return Some(out);
            }
            _ => continue,
        }
    }
    None
}

/// Outcome of [`optimize_cut`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub cut: CutPath,
    pub report: CutEnergyReport,
    pub trace: Vec<SearchStep>,
}

/// Maximizes the cut energy over simple edge paths through both terminals by
/// simulated annealing from the fewest-edge path.
pub fn optimize_cut(
    mesh: &CrackMesh,
    terminals: [usize; 2],
    density: &CutDensity,
    g: &NodalField,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    if opts.budget == 0 {
        return Err(Error::invalid("budget must be positive"));
    }
    let nv = mesh.vertex_count();
    if terminals.iter().any(|&v| v >= nv) {
        return Err(Error::invalid("terminals lie outside the domain"));
    }
    if terminals[0] == terminals[1] {
        return Err(Error::invalid("terminals must be distinct"));
    }
    density.validate(mesh)?;
    g.check(mesh)?;
    let adj = adjacency(mesh);
    let init = shortest_path(&adj, terminals[0], terminals[1])
        .ok_or_else(|| Error::invalid("terminals are not connected in the mesh"))?;
    let max_edges = opts.max_edges.unwrap_or(usize::MAX);
    if init.len() - 1 > max_edges {
        return Err(Error::invalid("no admissible cut within the edge limit"));
    }
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let eval = |edges: &[usize]| -> Result<f64> {
        Ok(cut_energy(mesh, &CutPath::new(edges.to_vec(), Some(terminals)), density, g)?.energy)
    };
    let mut rng = crate::rng::stream(opts.seed, "optimize_cut", 0);

    let mut cur = init.clone();
    let mut cur_edges = path_edges(mesh, &cur);
    let mut cur_e = eval(&cur_edges)?;
    cache.insert(cur_edges.clone(), cur_e);

    // initial temperature from the spread of energies over random moves
    let probes: Vec<Vec<usize>> = (0..opts.probe_moves)
        .filter_map(|_| propose(&cur, &adj, terminals, max_edges, &mut rng))
        .map(|p| path_edges(mesh, &p))
        .collect();
    let probe_e: Vec<Result<f64>> = probes.par_iter().map(|e| eval(e)).collect();
    let (mut lo, mut hi) = (cur_e, cur_e);
    for (e, val) in probes.into_iter().zip(probe_e) {
        let val = val?;
        lo = lo.min(val);
        hi = hi.max(val);
        cache.insert(e, val);
    }
    let t0 = hi - lo;

    let mut best = (cur_edges.clone(), cur_e);
    let mut trace = vec![SearchStep {
        step: 0,
        energy: cur_e,
        accepted: true,
        temperature: t0,
    }];
    let mut temp = t0;
    for step in 1..=opts.budget {
        let Some(cand) = propose(&cur, &adj, terminals, max_edges, &mut rng) else {
            break;
        };
        let cand_edges = path_edges(mesh, &cand);
        let e = match cache.get(&cand_edges) {
            Some(&e) => e,
            None => {
                let e = eval(&cand_edges)?;
                cache.insert(cand_edges.clone(), e);
                e
            }
        };
        let delta = e - cur_e;
        let u: f64 = rng.random();
        let accepted = delta >= 0.0 || (temp > 0.0 && u < (delta / temp).exp());
        if accepted {
            cur = cand;
            cur_edges = cand_edges;
            cur_e = e;
            if prefer((cur_e, &cur_edges), (best.1, &best.0)) {
                best = (cur_edges.clone(), cur_e);
            }
        }
        trace.push(SearchStep {
            step,
            energy: e,
            accepted,
            temperature: temp,
        });
        temp *= opts.cooling;
    }
    let cut = CutPath::new(best.0, Some(terminals));
    let report = cut_energy(mesh, &cut, density, g)?;
    Ok(OptimizeResult { cut, report, trace })
}

/// All simple edge paths with at most `max_edges` edges whose vertex set
/// contains both terminals, as sorted edge-id lists (deduplicated).
pub fn enumerate_paths(mesh: &CrackMesh, terminals: [usize; 2], max_edges: usize) -> Vec<Vec<usize>> {
    let adj = adjacency(mesh);
    let mut found: HashSet<Vec<usize>> = HashSet::new();
    let mut stack = Vec::new();
    fn extend(
        v: usize,
        adj: &[Vec<usize>],
        mesh: &CrackMesh,
        path: &mut Vec<usize>,
        terminals: [usize; 2],
        max_edges: usize,
        found: &mut HashSet<Vec<usize>>,
    ) {
        if path.len() >= 2 && terminals.iter().all(|t| path.contains(t)) {
            found.insert(path_edges(mesh, path));
        }
        if path.len() > max_edges {
            return;
        }
        for &w in &adj[v] {
            if !path.contains(&w) {
                path.push(w);
                extend(w, adj, mesh, path, terminals, max_edges, found);
                path.pop();
            }
        }
    }
    for start in 0..mesh.vertex_count() {
        stack.clear();
        stack.push(start);
        extend(start, &adj, mesh, &mut stack, terminals, max_edges, &mut found);
    }
    let mut out: Vec<Vec<usize>> = found.into_iter().collect();
    out.sort_unstable();
    out
}

/// Exhaustive maximizer over [`enumerate_paths`], with the tie-break of
/// [`prefer`].
pub fn exhaustive_optimum(
    mesh: &CrackMesh,
    terminals: [usize; 2],
    density: &CutDensity,
    g: &NodalField,
    max_edges: usize,
) -> Result<(CutPath, f64)> {
    let paths = enumerate_paths(mesh, terminals, max_edges);
    let energies: Vec<Result<f64>> = paths
        .par_iter()
        .map(|e| Ok(cut_energy(mesh, &CutPath::new(e.clone(), Some(terminals)), density, g)?.energy))
        .collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for (e, val) in paths.into_iter().zip(energies) {
        let val = val?;
        let better = match &best {
            None => true,
            Some((be, bv)) => prefer((val, &e), (*bv, be)),
        };
        if better {
            best = Some((e, val));
        }
    }
    let (edges, val) = best.ok_or_else(|| Error::invalid("no admissible path"))?;
    Ok((CutPath::new(edges, Some(terminals)), val))
}

/// Points sampled on the edges of a cut (endpoints and `k` interior points).
pub fn cut_points(mesh: &CrackMesh, cut: &CutPath, k: usize) -> Result<CompactSet> {
    let mut pts = Vec::new();
    for [a, b] in cut.edge_pairs(mesh)? {
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        for s in 0..=k + 1 {
            let t = s as f64 / (k + 1) as f64;
            pts.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
        }
    }
    Ok(if pts.is_empty() { CompactSet::Empty } else { CompactSet::Points(pts) })
}

/// One member of a cut sequence with its limit, both on the same mesh.
#[derive(Debug, Clone)]
pub struct CutPair {
    pub mesh: CrackMesh,
    pub g: NodalField,
    pub cut: CutPath,
    pub limit: CutPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutStabilityRow {
    pub index: usize,
    pub hausdorff: f64,
    pub gradient_gap: f64,
    pub energy: f64,
    pub limit_energy: f64,
}

/// Gradient gaps `‖∇u_n 1_{Ω∖K_n} − ∇u 1_{Ω∖K}‖_{L^p}` along a sequence.
/// Report only: no monotonicity is asserted here.
pub fn cut_stability(seq: &[CutPair], density: &CutDensity) -> Result<Vec<CutStabilityRow>> {
    seq.iter()
        .enumerate()
        .map(|(index, pair)| {
            let rn = cut_energy(&pair.mesh, &pair.cut, density, &pair.g)?;
            let rl = cut_energy(&pair.mesh, &pair.limit, density, &pair.g)?;
            // slitting keeps triangle numbering, so gradients compare per triangle
            let gn = gradient(&rn.slit_mesh, &rn.solution);
            let gl = gradient(&rl.slit_mesh, &rl.solution);
            let diff = gn.sub(&gl);
            let gap = crate::fem::lp_norm(&pair.mesh, &diff, density.p)?;
            let diam = {
                let bb = pair.mesh.vertices().iter().fold([f64::MAX, f64::MAX, f64::MIN, f64::MIN], |b, v| {
                    [b[0].min(v[0]), b[1].min(v[1]), b[2].max(v[0]), b[3].max(v[1])]
                });
                (bb[2] - bb[0]).hypot(bb[3] - bb[1])
            };
            let hausdorff = hausdorff_distance(&cut_points(&pair.mesh, &pair.cut, 4)?, &cut_points(&pair.mesh, &pair.limit, 4)?, diam)?;
            Ok(CutStabilityRow {
                index,
                hausdorff,
                gradient_gap: gap,
                energy: rn.energy,
                limit_energy: rl.energy,
            })
        })
        .collect()
}

/// Cut file: `cut <E>`, an optional `# terminals a b` line, then one edge id
/// per line.
pub fn cut_to_text(cut: &CutPath) -> String {
    let mut s = format!("cut {}\n", cut.edges.len());
    if let Some([a, b]) = cut.terminals {
        s.push_str(&format!("# terminals {a} {b}\n"));
    }
    for e in &cut.edges {
        s.push_str(&format!("{e}\n"));
    }
    s
}

pub fn cut_from_text(text: &str, origin: &str) -> Result<CutPath> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty cut file".into()))?;
    let count: usize = header
        .strip_prefix("cut ")
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| parse_err(1, format!("expected `cut <E>`, got `{header}`")))?;
    let mut terminals = None;
    let mut edges = Vec::with_capacity(count);
    for (i, line) in lines {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('#') {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.first() == Some(&"terminals") && parts.len() == 3 {
                let a = parts[1].parse().map_err(|_| parse_err(i + 1, "bad terminal".into()))?;
                let b = parts[2].parse().map_err(|_| parse_err(i + 1, "bad terminal".into()))?;
                terminals = Some([a, b]);
            }
            continue;
        }
        edges.push(line.parse().map_err(|_| parse_err(i + 1, format!("bad edge id `{line}`")))?);
    }
    if edges.len() != count {
        return Err(parse_err(1, format!("header declares {count} edges, found {}", edges.len())));
    }
    Ok(CutPath::new(edges, terminals))
}
