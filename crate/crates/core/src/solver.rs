//! Nonlinear monotone Neumann problems
//! `-div A(x, ∇u) + b |u|^{p-2} u = h` by convex energy minimization.
//!
//! The operator family is `A(x, ξ) = a(x) (|ξ|² + ε²)^{(p-2)/2} ξ`. The
//! discrete energy
//!
//! ```text
//! E_ε(u) = Σ_T |T| [ a_T/p (|∇u_T|² + ε²)^{p/2} + b_T/p (ū_T² + ε²)^{p/2} − h_T ū_T ]
//! ```
//!
//! (`ū_T` the centroid value) is minimized by damped Newton with Armijo
//! backtracking, then `ε` is halved until the residual of the unregularized
//! operator meets the tolerance.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fem::{component_triangles, gradient, mean_over, NodalField};
use crate::linalg::SymmetricBuilder;
use crate::mesh::CrackMesh;

/// Diffusion coefficient of the operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    /// `a ≡ 1`.
    PLaplacian,
    /// `a(x)` per triangle.
    Scaled(Vec<f64>),
}

impl Operator {
    pub fn coefficient(&self, t: usize) -> f64 {
        match self {
            Operator::PLaplacian => 1.0,
            Operator::Scaled(a) => a[t],
        }
    }
}

/// Prescribed vertex values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dirichlet {
    pub vertices: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub epsilon0: f64,
    pub epsilon_min: f64,
    /// Newton tolerance on the regularized residual (relative).
    pub newton_tol: f64,
    /// Target for the unregularized residual (relative).
    pub el_tol: f64,
    pub max_newton: usize,
    pub armijo_factor: f64,
    pub armijo_slope: f64,
    /// Stop the `ε` continuation as soon as the unregularized residual meets
    /// `el_tol`; otherwise continue down to `epsilon_min`.
    pub stop_on_unregularized: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            epsilon0: 1e-2,
            epsilon_min: 1e-8,
            newton_tol: 1e-10,
            el_tol: 1e-6,
            max_newton: 200,
            armijo_factor: 0.5,
            armijo_slope: 1e-4,
            stop_on_unregularized: true,
        }
    }
}

/// Data of one Neumann problem on a given mesh; per-triangle arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub p: f64,
    pub operator: Operator,
    pub b: Vec<f64>,
    pub f: Vec<f64>,
    pub g_load: Vec<f64>,
    pub dirichlet: Option<Dirichlet>,
    pub options: SolverOptions,
}

impl ProblemSpec {
    /// Constant `b`, `f`, zero `g`, `a ≡ 1`.
    pub fn uniform(mesh: &CrackMesh, p: f64, b: f64, f: f64) -> Self {
        let nt = mesh.triangle_count();
        Self {
            p,
            operator: Operator::PLaplacian,
            b: vec![b; nt],
            f: vec![f; nt],
            g_load: vec![0.0; nt],
            dirichlet: None,
            options: SolverOptions::default(),
        }
    }

    /// `h = b f + g` on triangle `t`.
    pub fn load(&self, t: usize) -> f64 {
        self.b[t] * self.f[t] + self.g_load[t]
    }

    pub fn validate(&self, mesh: &CrackMesh) -> Result<()> {
        if !(self.p > 1.0 && self.p <= 2.0) {
            return Err(Error::invalid(format!("p must lie in (1, 2], got {}", self.p)));
        }
        let nt = mesh.triangle_count();
        if self.b.len() != nt || self.f.len() != nt || self.g_load.len() != nt {
            return Err(Error::invalid("b, f and g must have one value per triangle"));
        }
        if self.b.iter().any(|&b| !(b >= 0.0)) {
            return Err(Error::invalid("weight b must be nonnegative"));
        }
        if let Operator::Scaled(a) = &self.operator {
            if a.len() != nt || a.iter().any(|&a| !(a > 0.0)) {
                return Err(Error::invalid("scaled operator needs a positive coefficient per triangle"));
            }
        }
        let o = &self.options;
        if !(o.epsilon0 > 0.0 && o.epsilon_min > 0.0) {
            return Err(Error::invalid("regularization parameters must be positive"));
        }
        if let Some(d) = &self.dirichlet {
            if d.vertices.len() != d.values.len() || d.vertices.iter().any(|&v| v >= mesh.vertex_count()) {
                return Err(Error::invalid("malformed Dirichlet data"));
            }
        }
        Ok(())
    }
}

/// Parses a problem file: `key = value` lines, `#` comments.
///
/// Keys: `p` (required), `epsilon0`, `epsilon_min`, `operator = plap|scaled`,
/// `a`, `b`, `f`, `g` (each a constant or a field file of vertex values,
/// averaged per triangle) and `dirichlet` (a file of `vertex_id,value`
/// lines). Field file names are handed to `read`.
pub fn parse_problem(
    text: &str,
    origin: &str,
    mesh: &CrackMesh,
    read: &dyn Fn(&str) -> Result<String>,
) -> Result<ProblemSpec> {
    let perr = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let nt = mesh.triangle_count();
    let per_triangle = |value: &str, line: usize| -> Result<Vec<f64>> {
        if let Ok(c) = value.parse::<f64>() {
            return Ok(vec![c; nt]);
        }
        let field = NodalField::from_csv(&read(value)?, value)?;
        field.check(mesh).map_err(|e| perr(line, e.to_string()))?;
        Ok((0..nt).map(|t| field.centroid_value(mesh, t)).collect())
    };
    let mut spec = ProblemSpec::uniform(mesh, 2.0, 1.0, 1.0);
    let mut have_p = false;
    let mut scaled = false;
    let mut coefficient = None;
    for (lno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let ln = lno + 1;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| perr(ln, format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim().trim_matches('"'));
        let num = || value.parse::<f64>().map_err(|_| perr(ln, format!("`{key}` expects a number, got `{value}`")));
        match key {
            "p" => {
                spec.p = num()?;
                have_p = true;
            }
            "epsilon0" => spec.options.epsilon0 = num()?,
            "epsilon_min" => spec.options.epsilon_min = num()?,
            "operator" => match value {
                "plap" => scaled = false,
                "scaled" => scaled = true,
                _ => return Err(perr(ln, format!("unknown operator `{value}`"))),
            },
            "a" => coefficient = Some(per_triangle(value, ln)?),
            "b" => spec.b = per_triangle(value, ln)?,
            "f" => spec.f = per_triangle(value, ln)?,
            "g" => spec.g_load = per_triangle(value, ln)?,
            "dirichlet" => {
                let body = read(value)?;
                let mut d = Dirichlet {
                    vertices: Vec::new(),
                    values: Vec::new(),
                };
                for (k, l) in body.lines().enumerate() {
                    let l = l.trim();
                    if l.is_empty() || l.starts_with('#') || l.starts_with("vertex_id") {
                        continue;
                    }
                    let bad = || Error::Parse {
                        path: value.to_string(),
                        line: k + 1,
                        message: format!("expected `vertex_id,value`, got `{l}`"),
                    };
                    let (i, v) = l.split_once(',').ok_or_else(bad)?;
                    d.vertices.push(i.trim().parse().map_err(|_| bad())?);
                    d.values.push(v.trim().parse().map_err(|_| bad())?);
                }
                spec.dirichlet = Some(d);
            }
            _ => return Err(perr(ln, format!("unknown key `{key}`"))),
        }
    }
    if !have_p {
        return Err(perr(0, "missing `p`".into()));
    }
    if spec.options.epsilon_min > spec.options.epsilon0 {
        spec.options.epsilon_min = spec.options.epsilon0;
    }
    if scaled {
        spec.operator = Operator::Scaled(coefficient.ok_or_else(|| perr(0, "`operator = scaled` needs `a`".into()))?);
    }
    spec.validate(mesh)?;
    Ok(spec)
}

/// Outcome of [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: NodalField,
    /// Regularized energy after every accepted step.
    pub energy_trace: Vec<f64>,
    pub newton_iters: usize,
    /// Relative residual of the unregularized discrete Euler–Lagrange system.
    pub el_residual: f64,
    pub epsilon_trace: Vec<f64>,
}

impl SolveReport {
    pub fn final_epsilon(&self) -> f64 {
        *self.epsilon_trace.last().unwrap()
    }

    /// Key-value text with the traces.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(",");
        format!(
            "newton_iters = {}\nel_residual = {:.17e}\nenergy_trace = [{}]\nepsilon_trace = [{}]\n",
            self.newton_iters,
            self.el_residual,
            join(&self.energy_trace),
            join(&self.epsilon_trace)
        )
    }
}

/// `(s)^{p/2}/p` with its first two derivatives in `s`.
#[inline]
fn potential(p: f64, s: f64) -> (f64, f64, f64) {
    let e = s.powf(0.5 * p - 1.0);
    (e * s / p, 0.5 * e, 0.25 * (p - 2.0) * e / s)
}

/// Per-triangle data shared by energy, gradient and Hessian evaluations.
pub(crate) struct Assembly<'a> {
    mesh: &'a CrackMesh,
    spec: &'a ProblemSpec,
    geo: Vec<crate::mesh::TriGeom>,
}

impl<'a> Assembly<'a> {
    pub(crate) fn new(mesh: &'a CrackMesh, spec: &'a ProblemSpec) -> Self {
        Self {
            mesh,
            spec,
            geo: mesh.geometries(),
        }
    }

    fn local(&self, t: usize, u: &[f64]) -> ([f64; 2], f64) {
        let tri = self.mesh.triangles()[t];
        let g = &self.geo[t];
        let mut xi = [0.0; 2];
        let mut ub = 0.0;
        for k in 0..3 {
            let v = u[tri[k]];
            xi[0] += v * g.grads[k][0];
            xi[1] += v * g.grads[k][1];
            ub += v / 3.0;
        }
        (xi, ub)
    }

    /// Regularized energy.
    pub(crate) fn energy(&self, u: &[f64], eps: f64) -> f64 {
        let p = self.spec.p;
        let e2 = eps * eps;
        (0..self.geo.len())
            .map(|t| {
                let (xi, ub) = self.local(t, u);
                let a = self.spec.operator.coefficient(t);
                let grad_term = a * potential(p, xi[0] * xi[0] + xi[1] * xi[1] + e2).0;
                let b = self.spec.b[t];
                let react = if b > 0.0 { b * potential(p, ub * ub + e2).0 } else { 0.0 };
                self.geo[t].area * (grad_term + react - self.spec.load(t) * ub)
            })
            .sum()
    }

    /// `∫ a (|∇u|² + ε²)^{p/2} − a ε^p`, the cut energy density integral.
    pub(crate) fn membrane_energy(&self, u: &[f64], eps: f64) -> f64 {
        let p = self.spec.p;
        (0..self.geo.len())
            .map(|t| {
                let (xi, _) = self.local(t, u);
                let a = self.spec.operator.coefficient(t);
                let s = xi[0] * xi[0] + xi[1] * xi[1];
                // (s + ε²)^{p/2} − ε^p without cancellation
                let val = if eps == 0.0 {
                    s.powf(0.5 * p)
                } else {
                    let e = eps.powf(p);
                    e * ((1.0 + s / (eps * eps)).powf(0.5 * p) - 1.0)
                };
                self.geo[t].area * a * val
            })
            .sum()
    }

    /// Residual vector (all vertices); `eps = 0` gives the unregularized operator.
    pub(crate) fn residual(&self, u: &[f64], eps: f64) -> Vec<f64> {
        let p = self.spec.p;
        let e2 = eps * eps;
        let mut r = vec![0.0; u.len()];
        for t in 0..self.geo.len() {
            let (xi, ub) = self.local(t, u);
            let g = &self.geo[t];
            let tri = self.mesh.triangles()[t];
            let a = self.spec.operator.coefficient(t);
            let s = xi[0] * xi[0] + xi[1] * xi[1] + e2;
            let flux = if s > 0.0 { a * s.powf(0.5 * p - 1.0) } else { 0.0 };
            let b = self.spec.b[t];
            let rs = ub * ub + e2;
            let react = if b > 0.0 && rs > 0.0 { b * rs.powf(0.5 * p - 1.0) * ub } else { 0.0 };
            let h = self.spec.load(t);
            for k in 0..3 {
                r[tri[k]] += g.area
                    * (flux * (xi[0] * g.grads[k][0] + xi[1] * g.grads[k][1]) + (react - h) / 3.0);
            }
        }
        r
    }

    /// Hessian restricted to free vertices.
    /// Newton matrix, or with `secant` the lagged-diffusivity matrix that
    /// drops the `φ''` terms (a majorizer of the energy for `p ≤ 2`).
    fn hessian(&self, u: &[f64], eps: f64, dof: &[Option<usize>], nfree: usize, secant: bool) -> SymmetricBuilder {
        let p = self.spec.p;
        let e2 = eps * eps;
        let mut hb = SymmetricBuilder::with_capacity(nfree, 6 * self.geo.len());
        for t in 0..self.geo.len() {
            let (xi, ub) = self.local(t, u);
            let g = &self.geo[t];
            let tri = self.mesh.triangles()[t];
            let a = self.spec.operator.coefficient(t);
            let (_, d1, mut d2) = potential(p, xi[0] * xi[0] + xi[1] * xi[1] + e2);
            let b = self.spec.b[t];
            let (rd1, rd2) = if b > 0.0 {
                let (_, r1, r2) = potential(p, ub * ub + e2);
                (r1, r2)
            } else {
                (0.0, 0.0)
            };
            let rd2 = if secant { 0.0 } else { rd2 };
            if secant {
                d2 = 0.0;
            }
            let proj: [f64; 3] = std::array::from_fn(|k| xi[0] * g.grads[k][0] + xi[1] * g.grads[k][1]);
            // ∂²/∂u_i∂u_j of a φ(|ξ|²+ε²) = a[2φ' ∇λ_i·∇λ_j + 4φ'' (ξ·∇λ_i)(ξ·∇λ_j)]
            let react = b * (2.0 * rd1 + 4.0 * rd2 * ub * ub) / 9.0;
            for i in 0..3 {
                let Some(di) = dof[tri[i]] else { continue };
                for j in 0..3 {
                    let Some(dj) = dof[tri[j]] else { continue };
                    let gg = g.grads[i][0] * g.grads[j][0] + g.grads[i][1] * g.grads[j][1];
                    let v = g.area * (a * (2.0 * d1 * gg + 4.0 * d2 * proj[i] * proj[j]) + react);
                    hb.add(di, dj, v);
                }
            }
        }
        hb
    }
}

/// Free/fixed bookkeeping: Dirichlet vertices and one pinned vertex per
/// floating component (no Dirichlet data, `b ≡ 0`).
struct Constraints {
    dof: Vec<Option<usize>>,
    nfree: usize,
    fixed: Vec<Option<f64>>,
    /// Triangles of floating components, re-centered after the solve.
    floating: Vec<(Vec<usize>, Vec<usize>)>,
}

fn constraints(mesh: &CrackMesh, spec: &ProblemSpec) -> Result<Constraints> {
    let nv = mesh.vertex_count();
    let mut fixed: Vec<Option<f64>> = vec![None; nv];
    if let Some(d) = &spec.dirichlet {
        for (&v, &val) in d.vertices.iter().zip(&d.values) {
            fixed[v] = Some(val);
        }
    }
    let (comp, comp_tris) = component_triangles(mesh);
    let mut floating = Vec::new();
    for (c, tris) in comp_tris.iter().enumerate() {
        let verts: Vec<usize> = (0..nv).filter(|&v| comp[v] == c).collect();
        let has_dirichlet = verts.iter().any(|&v| fixed[v].is_some());
        let has_b = tris.iter().any(|&t| spec.b[t] > 0.0);
        if has_dirichlet || has_b || tris.is_empty() {
            continue;
        }
        let total: f64 = tris.iter().map(|&t| mesh.area(t) * spec.load(t)).sum();
        let scale: f64 = tris.iter().map(|&t| mesh.area(t) * spec.load(t).abs()).sum();
        if total.abs() > 1e-10 * scale.max(1e-300) && total.abs() > 1e-14 {
            return Err(Error::invalid(format!(
                "incompatible load on a pure Neumann component: ∫h = {total:.3e}"
            )));
        }
        fixed[verts[0]] = Some(0.0);
        floating.push((tris.clone(), verts));
    }
    let mut dof = vec![None; nv];
    let mut nfree = 0;
    for v in 0..nv {
        if fixed[v].is_none() {
            dof[v] = Some(nfree);
            nfree += 1;
        }
    }
    Ok(Constraints {
        dof,
        nfree,
        fixed,
        floating,
    })
}

fn free_norm(r: &[f64], c: &Constraints) -> f64 {
    r.iter()
        .zip(&c.dof)
        .filter(|(_, d)| d.is_some())
        .map(|(x, _)| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Norm of the load vector on free vertices, used to make tolerances relative.
fn load_scale(mesh: &CrackMesh, spec: &ProblemSpec, c: &Constraints) -> f64 {
    let mut l = vec![0.0; mesh.vertex_count()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &v in tri {
            l[v] += mesh.area(t) * spec.load(t) / 3.0;
        }
    }
    1.0 + free_norm(&l, c)
}

/// Solves from the zero initial guess (Dirichlet values imposed).
pub fn solve(mesh: &CrackMesh, spec: &ProblemSpec) -> Result<SolveReport> {
    solve_from(mesh, spec, None)
}

/// Solves starting from `initial`.
pub fn solve_from(mesh: &CrackMesh, spec: &ProblemSpec, initial: Option<&NodalField>) -> Result<SolveReport> {
    spec.validate(mesh)?;
    let c = constraints(mesh, spec)?;
    let asm = Assembly::new(mesh, spec);
    let opts = &spec.options;
    let mut u: Vec<f64> = match initial {
        Some(f) => {
            f.check(mesh)?;
            f.values.clone()
        }
        None => vec![0.0; mesh.vertex_count()],
    };
    for (v, fx) in c.fixed.iter().enumerate() {
        if let Some(val) = fx {
            u[v] = *val;
        }
    }
    // pinned vertices of floating components are only a gauge: keep the
    // initial guess consistent by shifting each component to match its pin
    for (_, verts) in &c.floating {
        let shift = initial.map_or(0.0, |f| f.values[verts[0]]);
        for &v in verts {
            u[v] -= shift;
        }
        u[verts[0]] = 0.0;
    }
    let scale = load_scale(mesh, spec, &c);
    let mut energy_trace = Vec::new();
    let mut epsilon_trace = Vec::new();
    let mut newton_iters = 0usize;
    let mut eps = opts.epsilon0.max(opts.epsilon_min);
    let linear = spec.p == 2.0;
    loop {
        epsilon_trace.push(eps);
        let mut energy = asm.energy(&u, eps);
        energy_trace.push(energy);
        let mut steps = 0usize;
        let mut stalled = false;
        let mut trial = u.clone();
        let mut prev_rn = f64::INFINITY;
        loop {
            let r = asm.residual(&u, eps);
            let rn = free_norm(&r, &c);
            if rn <= opts.newton_tol * scale {
                break;
            }
            if steps >= opts.max_newton {
                return Err(Error::NonConvergence {
                    message: format!("Newton iteration limit at ε = {eps:.3e}"),
                    residual: rn / scale,
                    iterations: newton_iters,
                    energy_trace,
                });
            }
            let rhs: Vec<f64> = (0..u.len()).filter_map(|v| c.dof[v].map(|_| -r[v])).collect();
            let newton = asm.hessian(&u, eps, &c.dof, c.nfree, false).solve(&rhs)?;
            let mut best = armijo(&asm, &u, &newton, &rhs, &c, eps, energy, opts);
            // Newton overshoots where the energy flattens out (p < 2); the
            // lagged-diffusivity step is then taken if it does better
            let slow = rn > 0.5 * prev_rn;
            prev_rn = rn;
            if !linear && (slow || best.as_ref().is_none_or(|b| b.0 < 1e-2)) {
                let lagged = asm.hessian(&u, eps, &c.dof, c.nfree, true).solve(&rhs)?;
                if let Some(alt) = armijo(&asm, &u, &lagged, &rhs, &c, eps, energy, opts) {
                    if best.as_ref().is_none_or(|b| alt.1 < b.1) {
                        best = Some(alt);
                    }
                }
            }
            let accepted = match best {
                Some((_, e_new, next)) if e_new < energy - 1e-15 * energy.abs().max(1e-300) => {
                    // a decrease at the level of round-off counts as stagnation
                    energy = e_new;
                    energy_trace.push(energy);
                    trial = next;
                    true
                }
                _ => false,
            };
            steps += 1;
            newton_iters += 1;
            if !accepted {
                // energy can no longer decrease in floating point; a stall
                // after the first level ends the continuation
                if rn <= 1e-6 * scale || epsilon_trace.len() > 1 {
                    stalled = rn > 1e-6 * scale;
                    break;
                }
                return Err(Error::NonConvergence {
                    message: format!("line search failed at ε = {eps:.3e}"),
                    residual: rn / scale,
                    iterations: newton_iters,
                    energy_trace,
                });
            }
            std::mem::swap(&mut u, &mut trial);
            if linear && steps >= 2 {
                // quadratic energy: further steps only chase round-off
                let rn2 = free_norm(&asm.residual(&u, eps), &c);
                if rn2 <= 1e-8 * scale {
                    break;
                }
            }
        }
        let el = free_norm(&asm.residual(&u, 0.0), &c) / scale;
        let done = if opts.stop_on_unregularized {
            el <= opts.el_tol || eps <= opts.epsilon_min || linear
        } else {
            eps <= opts.epsilon_min
        };
        if done || stalled {
            recenter(mesh, &c, &mut u);
            return Ok(SolveReport {
                solution: NodalField::new(u),
                energy_trace,
                newton_iters,
                el_residual: el,
                epsilon_trace,
            });
        }
        eps = (0.5 * eps).max(opts.epsilon_min);
    }
}

/// Backtracking line search along `d` (free coordinates): the step length,
/// energy and iterate of the first point meeting the Armijo condition.
#[allow(clippy::too_many_arguments)]
fn armijo(
    asm: &Assembly,
    u: &[f64],
    d: &[f64],
    rhs: &[f64],
    c: &Constraints,
    eps: f64,
    energy: f64,
    opts: &SolverOptions,
) -> Option<(f64, f64, Vec<f64>)> {
    let slope: f64 = -rhs.iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
    let mut t: f64 = 1.0;
    let mut trial = u.to_vec();
    for _ in 0..60 {
        for v in 0..u.len() {
            if let Some(i) = c.dof[v] {
                trial[v] = u[v] + t * d[i];
            }
        }
        let e_new = asm.energy(&trial, eps);
        if e_new <= energy + opts.armijo_slope * t * slope {
            return Some((t, e_new, trial));
        }
        t *= opts.armijo_factor;
    }
    None
}

fn recenter(mesh: &CrackMesh, c: &Constraints, u: &mut [f64]) {
    for (tris, verts) in &c.floating {
        let field = NodalField::new(u.to_vec());
        let m = mean_over(mesh, &field, tris);
        for &v in verts {
            u[v] -= m;
        }
    }
}

/// Regularized energy `E_ε(u)` of the problem.
pub fn energy(mesh: &CrackMesh, spec: &ProblemSpec, u: &NodalField, eps: f64) -> f64 {
    Assembly::new(mesh, spec).energy(&u.values, eps)
}

/// Residual of the discrete Euler–Lagrange system at `u` (per vertex).
pub fn residual(mesh: &CrackMesh, spec: &ProblemSpec, u: &NodalField, eps: f64) -> Vec<f64> {
    Assembly::new(mesh, spec).residual(&u.values, eps)
}

/// Empirical structure constants of the instantiated operator.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub samples: usize,
    pub min_monotonicity_gap: f64,
    /// Largest `|gap − |ξ₁−ξ₂|²|`; zero for the linear case.
    pub max_linear_deviation: f64,
    /// `inf A(x,ξ)·ξ / |ξ|^p`.
    pub c1: f64,
    /// `sup |A(x,ξ)| / |ξ|^{p-1}`.
    pub c2: f64,
    pub pass: bool,
}

/// Monte-Carlo check of strict monotonicity, growth and coercivity for the
/// unregularized operator `A(x, ξ) = a(x) |ξ|^{p-2} ξ`.
pub fn check_structure(spec: &ProblemSpec, samples: usize, seed: u64) -> StructureReport {
    let mut rng = crate::rng::stream(seed, "check_structure", 0);
    let p = spec.p;
    let ntri = spec.b.len().max(1);
    let a_of = |t: usize| match &spec.operator {
        Operator::PLaplacian => 1.0,
        Operator::Scaled(a) => a.get(t).copied().unwrap_or(0.0),
    };
    let op = |a: f64, xi: [f64; 2]| {
        let n = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        if n == 0.0 {
            [0.0, 0.0]
        } else {
            let s = a * n.powf(p - 2.0);
            [s * xi[0], s * xi[1]]
        }
    };
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        let r = 10f64.powf(rng.random_range(-3.0..3.0));
        let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        [r * th.cos(), r * th.sin()]
    };
    let mut min_gap = f64::INFINITY;
    let mut max_dev = 0.0f64;
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    // every coefficient value is visited at least once
    let total = samples.max(ntri.min(samples.max(1)));
    for k in 0..total {
        let t = if k < ntri { k } else { rng.random_range(0..ntri) };
        let a = a_of(t);
        let x1 = draw(&mut rng);
        let x2 = draw(&mut rng);
        let (a1, a2) = (op(a, x1), op(a, x2));
        let d = [x1[0] - x2[0], x1[1] - x2[1]];
        let gap = (a1[0] - a2[0]) * d[0] + (a1[1] - a2[1]) * d[1];
        let dn2 = d[0] * d[0] + d[1] * d[1];
        // relative gap so scales are comparable
        min_gap = min_gap.min(gap / dn2.powf(0.5 * p));
        max_dev = max_dev.max((gap - a * dn2).abs() / dn2.max(1e-300));
        for (x, ax) in [(x1, a1), (x2, a2)] {
            let n = (x[0] * x[0] + x[1] * x[1]).sqrt();
            c1 = c1.min((ax[0] * x[0] + ax[1] * x[1]) / n.powf(p));
            c2 = c2.max((ax[0] * ax[0] + ax[1] * ax[1]).sqrt() / n.powf(p - 1.0));
        }
    }
    StructureReport {
        samples: total,
        min_monotonicity_gap: min_gap,
        max_linear_deviation: if p == 2.0 { max_dev } else { f64::NAN },
        c1,
        c2,
        pass: min_gap > 0.0 && c1 > 0.0 && c2.is_finite(),
    }
}

/// Errors and observed rates of the manufactured `p = 2` problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub resolutions: Vec<usize>,
    pub l2_errors: Vec<f64>,
    pub h1_errors: Vec<f64>,
    pub l2_rates: Vec<f64>,
    pub h1_rates: Vec<f64>,
    pub energies: Vec<f64>,
    /// `F(u*) = ½∫|∇u*|² + ½∫u*² − ∫h u*` in closed form.
    pub exact_energy: f64,
}

/// Manufactured solution `u* = cos πx cos πy` on the unit box with `b ≡ 1`
/// and `h = (2π² + 1) u*`, which has zero Neumann flux.
pub fn manufactured_convergence(base_n: usize, levels: usize) -> Result<ConvergenceReport> {
    use crate::geometry::{BoundingBox, PixelDomain};
    use crate::mesh::triangulate;
    use std::f64::consts::PI;
    if levels < 2 || base_n == 0 {
        return Err(Error::invalid("need at least two levels and a positive base resolution"));
    }
    let exact = |x: f64, y: f64| (PI * x).cos() * (PI * y).cos();
    let exact_grad = |x: f64, y: f64| [-PI * (PI * x).sin() * (PI * y).cos(), -PI * (PI * x).cos() * (PI * y).sin()];
    let coef = 2.0 * PI * PI + 1.0;
    let mut rep = ConvergenceReport {
        resolutions: Vec::new(),
        l2_errors: Vec::new(),
        h1_errors: Vec::new(),
        l2_rates: Vec::new(),
        h1_rates: Vec::new(),
        energies: Vec::new(),
        // ∫|∇u*|² = π²/2, ∫u*² = 1/4, ∫h u* = coef/4
        exact_energy: 0.5 * (PI * PI / 2.0) + 0.5 * 0.25 - coef * 0.25,
    };
    for level in 0..levels {
        let n = base_n << level;
        let mesh = triangulate(&PixelDomain::full(n, BoundingBox::unit())?)?;
        let mut spec = ProblemSpec::uniform(&mesh, 2.0, 1.0, 0.0);
        spec.f = (0..mesh.triangle_count())
            .map(|t| {
                let c = mesh.centroid(t);
                coef * exact(c[0], c[1])
            })
            .collect();
        let sol = solve(&mesh, &spec)?;
        let u = &sol.solution;
        let grad = gradient(&mesh, u);
        let (mut e0, mut e1) = (0.0, 0.0);
        for t in 0..mesh.triangle_count() {
            let tri = mesh.triangles()[t];
            let area = mesh.area(t);
            // edge-midpoint rule, exact for quadratics
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                let (pi, pj) = (mesh.vertices()[tri[i]], mesh.vertices()[tri[j]]);
                let m = [0.5 * (pi[0] + pj[0]), 0.5 * (pi[1] + pj[1])];
                let uh = 0.5 * (u.values[tri[i]] + u.values[tri[j]]);
                let ge = exact_grad(m[0], m[1]);
                e0 += area / 3.0 * (uh - exact(m[0], m[1])).powi(2);
                let gh = grad.vectors[t];
                e1 += area / 3.0 * ((gh[0] - ge[0]).powi(2) + (gh[1] - ge[1]).powi(2));
            }
        }
        rep.resolutions.push(n);
        rep.l2_errors.push(e0.sqrt());
        rep.h1_errors.push(e1.sqrt());
        rep.energies.push(energy(&mesh, &spec, u, 0.0));
    }
    for k in 1..levels {
        rep.l2_rates.push((rep.l2_errors[k - 1] / rep.l2_errors[k]).log2());
        rep.h1_rates.push((rep.h1_errors[k - 1] / rep.h1_errors[k]).log2());
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundingBox, PixelDomain};
    use crate::mesh::triangulate;

    fn boxmesh(n: usize) -> CrackMesh {
        triangulate(&PixelDomain::full(n, BoundingBox::unit()).unwrap()).unwrap()
    }

    #[test]
    fn constant_solution_linear() {
        let m = boxmesh(8);
        let spec = ProblemSpec::uniform(&m, 2.0, 1.0, 1.0);
        let rep = solve(&m, &spec).unwrap();
        assert!(rep.solution.values.iter().all(|v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn zero_load_gives_zero_gauge() {
        let m = boxmesh(6);
        let spec = ProblemSpec::uniform(&m, 1.5, 0.0, 0.0);
        let rep = solve(&m, &spec).unwrap();
        assert!(rep.solution.max_abs() < 1e-12);
    }

    #[test]
    fn incompatible_neumann_load_rejected() {
        let m = boxmesh(4);
        let mut spec = ProblemSpec::uniform(&m, 1.5, 0.0, 0.0);
        spec.g_load = vec![1.0; m.triangle_count()];
        assert!(matches!(solve(&m, &spec), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn problem_file_parsing() {
        let mesh = boxmesh(2);
        let files = |name: &str| -> Result<String> {
            match name {
                "b.csv" => Ok((0..9).map(|i| format!("{i},{}\n", i as f64)).collect()),
                "d.csv" => Ok("vertex_id,value\n0,1.5\n8,2.5\n".into()),
                _ => Err(Error::invalid(format!("no file {name}"))),
            }
        };
        let spec = parse_problem("p = 1.5\nepsilon0 = 1e-3\nb = b.csv\nf = 8 # load\ndirichlet = d.csv\n", "prob", &mesh, &files).unwrap();
        assert_eq!(spec.p, 1.5);
        assert_eq!(spec.options.epsilon0, 1e-3);
        assert!(spec.f.iter().all(|&f| f == 8.0));
        assert_eq!(spec.b[0], (0.0 + 1.0 + 4.0) / 3.0);
        assert_eq!(spec.dirichlet.as_ref().unwrap().vertices, vec![0, 8]);
        assert!(parse_problem("b = 1\n", "prob", &mesh, &files).is_err());
        assert!(parse_problem("p = 1.5\noperator = scaled\n", "prob", &mesh, &files).is_err());
        assert!(matches!(parse_problem("p = 1.5\nq = 1\n", "prob", &mesh, &files), Err(Error::Parse { line: 2, .. })));
        assert!(parse_problem("p = 3\n", "prob", &mesh, &files).is_err());
    }

    #[test]
    fn invalid_exponent_rejected() {
        let m = boxmesh(2);
        assert!(solve(&m, &ProblemSpec::uniform(&m, 2.5, 1.0, 1.0)).is_err());
        assert!(solve(&m, &ProblemSpec::uniform(&m, 1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn energy_trace_decreases() {
        let m = boxmesh(10);
        let mut spec = ProblemSpec::uniform(&m, 1.5, 1.0, 0.0);
        spec.f = (0..m.triangle_count()).map(|t| m.centroid(t)[0] * 3.0 - 1.0).collect();
        let rep = solve(&m, &spec).unwrap();
        assert!(rep.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(rep.el_residual <= 1e-6);
    }

    #[test]
    fn structure_checks() {
        let m = boxmesh(2);
        let rep = check_structure(&ProblemSpec::uniform(&m, 2.0, 1.0, 1.0), 1000, 1);
        assert!(rep.pass);
        assert!(rep.max_linear_deviation < 1e-10);
        let rep = check_structure(&ProblemSpec::uniform(&m, 1.5, 1.0, 1.0), 10_000, 2);
        assert!(rep.pass && rep.min_monotonicity_gap > 0.0);
        let mut spec = ProblemSpec::uniform(&m, 1.5, 1.0, 1.0);
        let mut a = vec![1.0; m.triangle_count()];
        a[3] = 0.0;
        spec.operator = Operator::Scaled(a);
        assert!(!check_structure(&spec, 100, 3).pass);
    }

    /// Independent minimizer: lagged-diffusivity (Kačanov) iteration with
    /// dense Gaussian elimination, a majorize-minimize scheme for `p ≤ 2`.
    fn brute_force(m: &CrackMesh, p: f64, eps: f64, b: f64, h: &[f64]) -> Vec<f64> {
        let nv = m.vertex_count();
        let mut u = vec![0.0; nv];
        for _ in 0..5000 {
            let mut mat = vec![vec![0.0; nv + 1]; nv];
            for (t, tri) in m.triangles().iter().enumerate() {
                let [a, bb, c] = tri.map(|v| m.vertices()[v]);
                let det = (bb[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (bb[1] - a[1]);
                let area = 0.5 * det.abs();
                // barycentric gradients
                let gr = [
                    [(bb[1] - c[1]) / det, (c[0] - bb[0]) / det],
                    [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
                    [(a[1] - bb[1]) / det, (bb[0] - a[0]) / det],
                ];
                let gx: f64 = (0..3).map(|k| u[tri[k]] * gr[k][0]).sum();
                let gy: f64 = (0..3).map(|k| u[tri[k]] * gr[k][1]).sum();
                let ub = (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
                let w = (gx * gx + gy * gy + eps * eps).powf(p / 2.0 - 1.0);
                let r = b * (ub * ub + eps * eps).powf(p / 2.0 - 1.0);
                for i in 0..3 {
                    for j in 0..3 {
                        mat[tri[i]][tri[j]] += area * (w * (gr[i][0] * gr[j][0] + gr[i][1] * gr[j][1]) + r / 9.0);
                    }
                    mat[tri[i]][nv] += area * h[t] / 3.0;
                }
            }
            for col in 0..nv {
                let piv = (col..nv).max_by(|&x, &y| mat[x][col].abs().total_cmp(&mat[y][col].abs())).unwrap();
                mat.swap(col, piv);
                for row in 0..nv {
                    if row != col {
                        let f = mat[row][col] / mat[col][col];
                        for k in col..=nv {
                            mat[row][k] -= f * mat[col][k];
                        }
                    }
                }
            }
            u = (0..nv).map(|i| mat[i][nv] / mat[i][i]).collect();
        }
        u
    }

    #[test]
    fn matches_brute_force_minimizer() {
        let m = boxmesh(2);
        assert!(m.vertex_count() <= 12);
        let h: Vec<f64> = (0..m.triangle_count()).map(|t| 1.0 + m.centroid(t)[0] - 2.0 * m.centroid(t)[1]).collect();
        let eps = 1e-2;
        for p in [1.25, 1.5, 2.0] {
            let mut spec = ProblemSpec::uniform(&m, p, 1.0, 0.0);
            spec.g_load = h.clone();
            let full = solve(&m, &spec).unwrap();
            spec.options.epsilon0 = eps;
            spec.options.epsilon_min = eps;
            spec.options.stop_on_unregularized = false;
            let rep = solve(&m, &spec).unwrap();
            let oracle = NodalField::new(brute_force(&m, p, eps, 1.0, &h));
            let err = rep.solution.sub(&oracle).max_abs();
            assert!(err < 1e-5, "p = {p}: max deviation {err}");
            // the continuation result beats the oracle on the unregularized energy
            assert!(energy(&m, &spec, &full.solution, 0.0) <= energy(&m, &spec, &oracle, 0.0) + 1e-12);
        }
    }

    #[test]
    fn manufactured_rates() {
        let rep = manufactured_convergence(8, 4).unwrap();
        assert!(rep.l2_rates.iter().all(|&r| r >= 1.9), "{:?}", rep.l2_rates);
        assert!(rep.h1_rates.iter().all(|&r| r >= 0.9), "{:?}", rep.h1_rates);
    }
}
