//! Numerical checks behind the density results: elements of the orthogonal
//! complement of gradients, flattening of potentials near complement
//! components, the Malý–Martio staged construction and the pairing of
//! Airy-type stress fields with symmetrized gradients.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{gradient, lp_norm, EdgeFlux, NodalField};
use crate::geometry::{complement_components, BoundingBox, ComponentLabeling, PixelDomain};
use crate::linalg::SymmetricBuilder;
use crate::mesh::{triangulate, CrackMesh, UnionFind};

/// A field `ψ = −R∇φ` on Ω with `φ` constant on each complement component.
#[derive(Debug, Clone, PartialEq)]
pub struct HPerpElement {
    /// Potential on the box mesh.
    pub potential: NodalField,
    /// `c_i` per complement component; `c_0 = 0`.
    pub component_values: Vec<f64>,
    /// `ψ` on the triangles of the Ω mesh.
    pub field: EdgeFlux,
}

impl HPerpElement {
    /// `component,value` lines.
    pub fn component_values_csv(&self) -> String {
        let mut s = String::from("component,value\n");
        for (i, c) in self.component_values.iter().enumerate() {
            s.push_str(&format!("{i},{c:.17e}\n"));
        }
        s
    }
}

/// Component (after merging components that share a grid vertex) owning
/// each vertex of the box mesh, if any.
fn vertex_components(omega: &PixelDomain, labeling: &ComponentLabeling, box_mesh: &CrackMesh) -> Result<(Vec<Option<usize>>, Vec<usize>)> {
    let n = omega.resolution();
    let grid = box_mesh.grid().ok_or_else(|| Error::invalid("box mesh was not generated from a pixel grid"))?;
    if grid.n != n || grid.bbox != omega.bbox() || box_mesh.vertex_count() != (n + 1) * (n + 1) {
        return Err(Error::invalid("box mesh must triangulate the full bounding box at the domain resolution"));
    }
    let k = labeling.count();
    let mut uf = UnionFind::new(k);
    let mut owner: Vec<Option<usize>> = vec![None; box_mesh.vertex_count()];
    let claim = |v: usize, c: usize, owner: &mut Vec<Option<usize>>, uf: &mut UnionFind| match owner[v] {
        None => owner[v] = Some(c),
        Some(o) => uf.union(o, c),
    };
    for j in 0..=n {
        for i in 0..=n {
            if i == 0 || j == 0 || i == n || j == n {
                claim(j * (n + 1) + i, labeling.unbounded_id, &mut owner, &mut uf);
            }
        }
    }
    for (cell, lab) in labeling.labels.iter().enumerate() {
        if let Some(c) = lab {
            let (ci, cj) = (cell % n, cell / n);
            for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                claim((cj + dj) * (n + 1) + ci + di, *c, &mut owner, &mut uf);
            }
        }
    }
    let group: Vec<usize> = (0..k).map(|c| uf.find(c)).collect();
    let owner = owner.into_iter().map(|o| o.map(|c| group[c])).collect();
    Ok((owner, group))
}

/// `K u` for the P1 stiffness matrix.
fn stiffness_apply(mesh: &CrackMesh, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for t in 0..mesh.triangle_count() {
        let g = mesh.geometry(t);
        let tri = mesh.triangles()[t];
        let mut xi = [0.0; 2];
        for k in 0..3 {
            xi[0] += u[tri[k]] * g.grads[k][0];
            xi[1] += u[tri[k]] * g.grads[k][1];
        }
        for k in 0..3 {
            out[tri[k]] += g.area * (xi[0] * g.grads[k][0] + xi[1] * g.grads[k][1]);
        }
    }
    out
}

/// Discrete harmonic extension: keeps `u` on vertices with `fixed[v]` and
/// replaces the rest by the minimizer of the Dirichlet energy.
pub(crate) fn harmonic_fill(mesh: &CrackMesh, u: &mut [f64], fixed: &[bool]) -> Result<()> {
    let mut dof = vec![None; u.len()];
    let mut nfree = 0;
    for v in 0..u.len() {
        if !fixed[v] {
            dof[v] = Some(nfree);
            nfree += 1;
        }
    }
    if nfree == 0 {
        return Ok(());
    }
    let r = stiffness_apply(mesh, u);
    let k: SymmetricBuilder = crate::fem::assemble_laplacian(mesh, &dof, nfree);
    let rhs: Vec<f64> = (0..u.len()).filter_map(|v| dof[v].map(|_| -r[v])).collect();
    let d = k.solve(&rhs)?;
    for v in 0..u.len() {
        if let Some(i) = dof[v] {
            u[v] += d[i];
        }
    }
    Ok(())
}

/// `ψ = −R∇φ = (∂₂φ, −∂₁φ)` on the triangles of the Ω mesh.
pub fn hperp_field(omega_mesh: &CrackMesh, box_mesh: &CrackMesh, potential: &NodalField) -> Result<EdgeFlux> {
    potential.check(box_mesh)?;
    let grad = gradient(box_mesh, potential);
    let mut by_slot = vec![usize::MAX; box_mesh.slots().iter().max().map_or(0, |m| m + 1)];
    for (t, &s) in box_mesh.slots().iter().enumerate() {
        by_slot[s] = t;
    }
    let vectors = omega_mesh
        .slots()
        .iter()
        .map(|&s| {
            let t = *by_slot.get(s).filter(|&&t| t != usize::MAX).ok_or_else(|| Error::invalid("Ω mesh does not lie on the box grid"))?;
            let g = grad.vectors[t];
            Ok([g[1], -g[0]])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EdgeFlux::new(vectors))
}

/// Random H^⊥ elements: smooth random bumps, corrected by a harmonic
/// blend so that `φ = c_i` on every vertex of complement component `K_i`.
pub fn hperp_basis(omega: &PixelDomain, box_mesh: &CrackMesh, count: usize, seed: u64) -> Result<Vec<HPerpElement>> {
    if count == 0 {
        return Err(Error::invalid("count must be positive"));
    }
    let labeling = complement_components(omega);
    let (owner, group) = vertex_components(omega, &labeling, box_mesh)?;
    let omega_mesh = triangulate(omega)?;
    let bbox = omega.bbox();
    let fixed: Vec<bool> = owner.iter().map(Option::is_some).collect();
    (0..count)
        .into_par_iter()
        .map(|e| {
            let mut rng = crate::rng::stream(seed, "hperp_basis", e as u64);
            let mut c: Vec<f64> = (0..labeling.count()).map(|_| rng.random_range(-1.0..1.0)).collect();
            c[labeling.unbounded_id] = 0.0;
            // components merged through shared vertices share one constant
            for k in 0..c.len() {
                c[k] = c[group[k]];
            }
            let bumps: Vec<([f64; 2], f64, f64)> = (0..4)
                .map(|_| {
                    let x = [
                        bbox.x0 + bbox.side * rng.random_range(0.1..0.9),
                        bbox.y0 + bbox.side * rng.random_range(0.1..0.9),
                    ];
                    (x, bbox.side * rng.random_range(0.05..0.3), rng.random_range(-1.0..1.0))
                })
                .collect();
            let bump: Vec<f64> = box_mesh
                .vertices()
                .iter()
                .map(|p| {
                    bumps
                        .iter()
                        .map(|(x, w, a)| a * (-((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)) / (w * w)).exp())
                        .sum()
                })
                .collect();
            // φ = bump + w with w harmonic off the components and w = c_i − bump on K_i
            let mut w: Vec<f64> = owner
                .iter()
                .zip(&bump)
                .map(|(o, b)| o.map_or(0.0, |k| c[k] - b))
                .collect();
            harmonic_fill(box_mesh, &mut w, &fixed)?;
            let phi: Vec<f64> = owner
                .iter()
                .zip(bump.iter().zip(&w))
                .map(|(o, (b, w))| o.map_or(b + w, |k| c[k]))
                .collect();
            let potential = NodalField::new(phi);
            let field = hperp_field(&omega_mesh, box_mesh, &potential)?;
            Ok(HPerpElement {
                potential,
                component_values: c,
                field,
            })
        })
        .collect()
}

/// `|Σ_T |T| ψ_T·∇u_T| / (‖ψ‖_{p'} ‖∇u‖_p + tiny)`.
pub fn orthogonality_residual(omega_mesh: &CrackMesh, u: &NodalField, elem: &HPerpElement, p: f64) -> Result<f64> {
    u.check(omega_mesh)?;
    elem.field.check(omega_mesh)?;
    if !(p > 1.0) {
        return Err(Error::invalid("p must exceed 1"));
    }
    let grad = gradient(omega_mesh, u);
    let pairing: f64 = (0..omega_mesh.triangle_count())
        .map(|t| {
            let (a, b) = (elem.field.vectors[t], grad.vectors[t]);
            omega_mesh.area(t) * (a[0] * b[0] + a[1] * b[1])
        })
        .sum();
    let q = p / (p - 1.0);
    let denom = lp_norm(omega_mesh, &elem.field, q)? * lp_norm(omega_mesh, &grad, p)?;
    Ok(pairing.abs() / (denom + 1e-300))
}

/// Outcome of [`flatten_near_components`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlattenReport {
    pub field: NodalField,
    /// Value the field takes near each complement component.
    pub component_values: Vec<f64>,
    /// Neighborhood width actually used.
    pub width: f64,
    /// Set when the requested width made neighborhoods overlap.
    pub width_reduced: bool,
}

/// Distance from `p` to the closed cell `(i, j)`.
fn dist_to_cell(p: [f64; 2], bbox: BoundingBox, h: f64, cell: usize, n: usize) -> f64 {
    let (i, j) = ((cell % n) as f64, (cell / n) as f64);
    let (x0, y0) = (bbox.x0 + i * h, bbox.y0 + j * h);
    let dx = (x0 - p[0]).max(p[0] - x0 - h).max(0.0);
    let dy = (y0 - p[1]).max(p[1] - y0 - h).max(0.0);
    dx.hypot(dy)
}

/// Per vertex, distance to each complement component (the exterior of the
/// box counts towards `K_0`).
fn component_distances(mesh: &CrackMesh, omega: &PixelDomain, labeling: &ComponentLabeling) -> Vec<Vec<f64>> {
    let n = omega.resolution();
    let bbox = omega.bbox();
    let h = omega.cell_side();
    mesh.vertices()
        .par_iter()
        .map(|&p| {
            (0..labeling.count())
                .map(|c| {
                    let mut d = labeling.cells[c]
                        .iter()
                        .map(|&cell| dist_to_cell(p, bbox, h, cell, n))
                        .fold(f64::INFINITY, f64::min);
                    if c == labeling.unbounded_id {
                        d = d.min(bbox.dist_to_boundary(p));
                    }
                    d
                })
                .collect()
        })
        .collect()
}

/// Replaces `φ` by its component value on every vertex within `width` of a
/// complement component. Between flattened and untouched vertices the P1
/// interpolation acts as the cutoff blend, so the operation is a projection.
pub fn flatten_near_components(mesh: &CrackMesh, phi: &NodalField, omega: &PixelDomain, width: f64) -> Result<FlattenReport> {
    phi.check(mesh)?;
    if !(width > 0.0) {
        return Err(Error::invalid("width must be positive"));
    }
    let labeling = complement_components(omega);
    let dist = component_distances(mesh, omega, &labeling);
    let k = labeling.count();
    let tol = 1e-9 * omega.cell_side();
    let mut values = vec![f64::NAN; k];
    let mut spread = vec![(f64::INFINITY, f64::NEG_INFINITY); k];
    for (v, d) in dist.iter().enumerate() {
        for c in 0..k {
            if d[c] <= tol {
                let x = phi.values[v];
                spread[c] = (spread[c].0.min(x), spread[c].1.max(x));
            }
        }
    }
    for c in 0..k {
        let (lo, hi) = spread[c];
        if lo.is_finite() {
            if hi - lo > 1e-8 {
                return Err(Error::invalid(format!("potential is not constant on component {c} (spread {:.3e})", hi - lo)));
            }
            values[c] = 0.5 * (lo + hi);
        }
    }
    let mut w = width;
    let mut reduced = false;
    let owner = loop {
        let owner: Vec<Option<usize>> = dist
            .iter()
            .map(|d| {
                let near: Vec<usize> = (0..k).filter(|&c| d[c] <= w + tol && values[c].is_finite()).collect();
                match near.len() {
                    0 => Some(None),
                    1 => Some(Some(near[0])),
                    _ if near.iter().all(|&c| (values[c] - values[near[0]]).abs() <= 1e-8) => Some(Some(near[0])),
                    _ => None,
                }
            })
            .collect::<Option<Vec<_>>>()
            .unwrap_or_default();
        if !owner.is_empty() {
            break owner;
        }
        w *= 0.5;
        reduced = true;
        if w < 1e-6 * omega.cell_side() {
            return Err(Error::invalid("component neighborhoods overlap at every width"));
        }
    };
    let field = NodalField::new(
        owner
            .iter()
            .zip(&phi.values)
            .map(|(o, &x)| o.map_or(x, |c| values[c]))
            .collect(),
    );
    Ok(FlattenReport {
        field,
        component_values: values,
        width: w,
        width_reduced: reduced,
    })
}

/// `‖φ_k − φ‖_{W^{1,q}}` for `k = 1..=levels`, where level `k` uses the box
/// mesh refined `k−1` times and a one-cell neighborhood at that resolution.
pub fn flatten_trace(omega: &PixelDomain, box_mesh: &CrackMesh, phi: &NodalField, q: f64, levels: usize) -> Result<Vec<f64>> {
    phi.check(box_mesh)?;
    let mut mesh = box_mesh.clone();
    let mut field = phi.clone();
    let mut h = omega.cell_side();
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        if level > 0 {
            mesh = crate::mesh::refine(&mesh);
            field = field.prolong(&mesh)?;
            h *= 0.5;
        }
        let flat = flatten_near_components(&mesh, &field, omega, h)?;
        out.push(crate::fem::w1p_norm(&mesh, &flat.field.sub(&field), q)?);
    }
    Ok(out)
}

/// Width of the mollifier applied to the radial profile.
const MOLLIFIER: f64 = 0.1;

/// Piecewise-linear profile `min(1, 2 max(0, 1 − ρ))`.
fn profile(rho: f64) -> f64 {
    (2.0 * (1.0 - rho).max(0.0)).min(1.0)
}

/// Antiderivative of [`profile`] normalized by `A(ρ) = ρ` on the plateau.
fn profile_antiderivative(s: f64) -> f64 {
    if s <= 0.5 {
        s
    } else if s <= 1.0 {
        0.5 + 2.0 * (s - 0.5) - (s * s - 0.25)
    } else {
        0.75
    }
}

/// The profile averaged over a window of width [`MOLLIFIER`]: C¹ and
/// piecewise quadratic.
fn mollified(rho: f64) -> f64 {
    let d = MOLLIFIER;
    (profile_antiderivative(rho + 0.5 * d) - profile_antiderivative(rho - 0.5 * d)) / d
}

fn mollified_slope(rho: f64) -> f64 {
    let d = MOLLIFIER;
    (profile(rho + 0.5 * d) - profile(rho - 0.5 * d)) / d
}

/// Capacity bump `u_m`: the mollified profile in the logarithmic radial
/// coordinate `ρ = 1 + δ/2 + ln r / (2 ln m)`. It vanishes for `r ≥ 1`,
/// equals 1 for `r ≤ m^{−1−2δ}`, and its Dirichlet energy is `O(1/ln m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityBump {
    pub log_m: f64,
}

impl CapacityBump {
    fn rho(&self, r: f64) -> f64 {
        1.0 + 0.5 * MOLLIFIER + r.ln() / (2.0 * self.log_m)
    }

    pub fn value(&self, r: f64) -> f64 {
        if r <= 0.0 {
            1.0
        } else if r >= 1.0 {
            0.0
        } else {
            mollified(self.rho(r))
        }
    }

    /// Radius of the plateau `{u_m = 1}`.
    pub fn plateau_radius(&self) -> f64 {
        (-(1.0 + 2.0 * MOLLIFIER) * self.log_m).exp()
    }

    /// `∫|∇u_m|²`, exact: `π / ln m · ∫ P_δ'(ρ)² dρ` with a piecewise
    /// quadratic integrand.
    pub fn dirichlet_energy(&self) -> f64 {
        let d = MOLLIFIER;
        let breaks = [0.5 - 0.5 * d, 0.5 + 0.5 * d, 1.0 - 0.5 * d, 1.0 + 0.5 * d];
        let integral: f64 = breaks
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let m = 0.5 * (a + b);
                (b - a) / 6.0 * (mollified_slope(a).powi(2) + 4.0 * mollified_slope(m).powi(2) + mollified_slope(b).powi(2))
            })
            .sum();
        std::f64::consts::PI / self.log_m * integral
    }

    /// `∫u_m²`.
    pub fn l2_squared(&self) -> f64 {
        let rp = self.plateau_radius();
        let pi = std::f64::consts::PI;
        // 2π ∫ u² r² d(ln r) over the transition layer, composite Simpson in ρ
        let (a, b) = ((1.0 - MOLLIFIER) * 0.5, 1.0 + 0.5 * MOLLIFIER);
        let k = 2000;
        let h = (b - a) / k as f64;
        let lnr = |rho: f64| 2.0 * self.log_m * (rho - 1.0 - 0.5 * MOLLIFIER);
        let f = |rho: f64| mollified(rho).powi(2) * (2.0 * lnr(rho)).exp();
        let mut s = f(a) + f(b);
        for i in 1..k {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        pi * rp * rp + 2.0 * pi * 2.0 * self.log_m * s * h / 3.0
    }
}

/// One stage of the Malý–Martio construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MalyStage {
    /// Stage number `n ≥ 1`.
    pub index: usize,
    /// Ball family `B(x_i^n, r_n)` carrying the increment.
    pub centers: Vec<[f64; 2]>,
    pub radius: f64,
    pub alpha: f64,
    pub bump: CapacityBump,
    /// `‖h_n‖_{W^{1,2}}`, at most `2^{−n}`.
    pub increment_norm: f64,
    /// Plateaus of `φ_n`: centres and values (midpoints of the `2^n`-partition).
    pub plateau_centers: Vec<[f64; 2]>,
    pub plateau_values: Vec<f64>,
    pub plateau_radius: f64,
    /// Fraction of `[−1, 1]` within `2^{−n}` of a plateau value.
    pub coverage: f64,
    /// `#balls · r_n^{α_n}`.
    pub hausdorff_sum: f64,
    /// Every ball lies inside a plateau of the previous stage.
    pub nested: bool,
    /// `r_n` spans at least two grid cells.
    pub resolved: bool,
    /// `φ_n` sampled on the box mesh vertices.
    pub field: NodalField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MalyMartioOutput {
    pub stages: Vec<MalyStage>,
    /// `Q` minus every cell meeting a ball of the last stage.
    pub domain: PixelDomain,
    pub alphas: Vec<f64>,
    /// Set when some stage's balls are smaller than two cells.
    pub truncated: bool,
    pub box_mesh: CrackMesh,
}

impl MalyMartioOutput {
    /// `stage,coverage,increment_norm` lines.
    pub fn coverage_csv(&self) -> String {
        let mut s = String::from("stage,coverage,increment_norm\n");
        for st in &self.stages {
            s.push_str(&format!("{},{:.17e},{:.17e}\n", st.index, st.coverage, st.increment_norm));
        }
        s
    }
}

/// Centres of the two sub-bumps of `g_m`, in units of the carrying ball.
const SPLIT: [[f64; 2]; 2] = [[-0.5, 0.0], [0.5, 0.0]];
/// Radius of the sub-bumps, in units of the carrying ball.
const SPLIT_RADIUS: f64 = 0.45;

fn coverage(values: &[f64], radius: f64) -> f64 {
    let mut iv: Vec<(f64, f64)> = values.iter().map(|&v| ((v - radius).max(-1.0), (v + radius).min(1.0))).collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut covered = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (a, b) in iv {
        match cur {
            Some((ca, cb)) if a <= cb => cur = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                covered += cb - ca;
                cur = Some((a, b));
            }
            None => cur = Some((a, b)),
        }
    }
    if let Some((ca, cb)) = cur {
        covered += cb - ca;
    }
    covered / 2.0
}

/// Staged construction on `Q = ]−2, 2[²` along the segment `J = [−1, 1] × {0}`:
/// stage `n` splits every plateau of `φ_{n−1}` into two plateaus whose values
/// are the midpoints of the `2^n`-partition of `[−1, 1]`, with the bump
/// parameter `m_n` found by bisection so that `‖h_n‖_{W^{1,2}} ≤ 2^{−n}`.
/// Norms and plateau values are computed from the radial profiles; the grid
/// only receives samples and the pixelized domain.
pub fn maly_martio(stages: usize, alpha_schedule: Option<&[f64]>, grid_n: usize) -> Result<MalyMartioOutput> {
    if stages == 0 {
        return Err(Error::invalid("stages must be at least 1"));
    }
    if grid_n < 2 {
        return Err(Error::invalid("grid resolution too small"));
    }
    let alphas: Vec<f64> = match alpha_schedule {
        Some(a) if a.len() >= stages => a[..stages].to_vec(),
        Some(_) => return Err(Error::invalid("alpha schedule shorter than the number of stages")),
        None => (1..=stages).map(|n| 1.0 / n as f64).collect(),
    };
    if alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::invalid("alphas must be positive"));
    }
    let bbox = BoundingBox::new(-2.0, -2.0, 4.0)?;
    let box_mesh = triangulate(&PixelDomain::full(grid_n, bbox)?)?;
    let cell = bbox.side / grid_n as f64;

    let mut centers = vec![[0.0, 0.0]];
    let mut values = vec![0.0];
    let mut radius = 1.0;
    let mut parent_plateau = f64::INFINITY;
    let mut phi = vec![0.0; box_mesh.vertex_count()];
    let mut out = Vec::with_capacity(stages);
    for n in 1..=stages {
        let amp = 2f64.powi(1 - n as i32);
        let budget = 2f64.powi(-(n as i32));
        let count = centers.len() as f64;
        let norm = |b: &CapacityBump| {
            let sub = SPLIT_RADIUS * radius;
            let one = 2.0 * 0.25 * (b.dirichlet_energy() + sub * sub * b.l2_squared());
            (count * amp * amp * one).sqrt()
        };
        let (mut lo, mut hi) = (1.0f64, 1.0f64);
        while norm(&CapacityBump { log_m: hi }) > budget {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::invalid("bump budget unreachable"));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if norm(&CapacityBump { log_m: mid }) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let bump = CapacityBump { log_m: hi };
        let increment_norm = norm(&bump);

        for (v, p) in box_mesh.vertices().iter().enumerate() {
            for c in &centers {
                let y = [(p[0] - c[0]) / radius, (p[1] - c[1]) / radius];
                if y[0].hypot(y[1]) >= 1.0 {
                    continue;
                }
                for (k, z) in SPLIT.iter().enumerate() {
                    let r = (y[0] - z[0]).hypot(y[1] - z[1]) / SPLIT_RADIUS;
                    let sign = if k == 0 { 0.5 } else { -0.5 };
                    phi[v] += amp * sign * bump.value(r);
                }
            }
        }
        let plateau_radius = radius * SPLIT_RADIUS * bump.plateau_radius();
        let mut next_centers = Vec::with_capacity(2 * centers.len());
        let mut next_values = Vec::with_capacity(2 * centers.len());
        for (c, &val) in centers.iter().zip(&values) {
            for (k, z) in SPLIT.iter().enumerate() {
                next_centers.push([c[0] + radius * z[0], c[1] + radius * z[1]]);
                next_values.push(val + if k == 0 { 0.5 * amp } else { -0.5 * amp });
            }
        }
        out.push(MalyStage {
            index: n,
            centers: centers.clone(),
            radius,
            alpha: alphas[n - 1],
            bump,
            increment_norm,
            plateau_centers: next_centers.clone(),
            plateau_values: next_values.clone(),
            plateau_radius,
            coverage: coverage(&next_values, budget),
            hausdorff_sum: count * radius.powf(alphas[n - 1]),
            nested: radius <= parent_plateau,
            resolved: radius >= 2.0 * cell,
            field: NodalField::new(phi.clone()),
        });
        parent_plateau = plateau_radius;
        centers = next_centers;
        values = next_values;
        radius = plateau_radius;
    }
    let last = out.last().unwrap();
    let mut domain = PixelDomain::full(grid_n, bbox)?;
    for c in &last.centers {
        domain.remove_disc(*c, last.radius);
    }
    let truncated = out.iter().any(|s| !s.resolved);
    Ok(MalyMartioOutput {
        stages: out,
        domain,
        alphas,
        truncated,
        box_mesh,
    })
}

/// C¹ potential given by Hermite data `(φ, ∂₁φ, ∂₂φ, ∂₁₂φ)` at the nodes of
/// a pixel grid, bicubic on every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteField {
    pub n: usize,
    pub bbox: BoundingBox,
    /// Row-major over the `(n+1)²` nodes.
    pub data: Vec<[f64; 4]>,
}

/// Cubic Hermite basis on `[0, 1]` with first and second derivatives:
/// value at 0, value at 1, slope at 0, slope at 1.
fn hermite_basis(s: f64) -> [[f64; 3]; 4] {
    let (s2, s3) = (s * s, s * s * s);
    [
        [2.0 * s3 - 3.0 * s2 + 1.0, 6.0 * s2 - 6.0 * s, 12.0 * s - 6.0],
        [-2.0 * s3 + 3.0 * s2, -6.0 * s2 + 6.0 * s, -12.0 * s + 6.0],
        [s3 - 2.0 * s2 + s, 3.0 * s2 - 4.0 * s + 1.0, 6.0 * s - 4.0],
        [s3 - s2, 3.0 * s2 - 2.0 * s, 6.0 * s - 2.0],
    ]
}

impl HermiteField {
    pub fn from_fn(n: usize, bbox: BoundingBox, f: impl Fn(f64, f64) -> [f64; 4]) -> Self {
        let h = bbox.side / n as f64;
        let data = (0..(n + 1) * (n + 1))
            .map(|k| f(bbox.x0 + (k % (n + 1)) as f64 * h, bbox.y0 + (k / (n + 1)) as f64 * h))
            .collect();
        Self { n, bbox, data }
    }

    /// `(φ, φ_xx, φ_xy, φ_yy)` at `p`.
    pub fn eval(&self, p: [f64; 2]) -> [f64; 4] {
        let n = self.n;
        let h = self.bbox.side / n as f64;
        let fx = ((p[0] - self.bbox.x0) / h).clamp(0.0, n as f64);
        let fy = ((p[1] - self.bbox.y0) / h).clamp(0.0, n as f64);
        let (i, j) = ((fx.floor() as usize).min(n - 1), (fy.floor() as usize).min(n - 1));
        let (s, t) = (fx - i as f64, fy - j as f64);
        let (bs, bt) = (hermite_basis(s), hermite_basis(t));
        let mut out = [0.0; 4];
        for (a, b) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let d = self.data[(j + b) * (n + 1) + i + a];
            // value basis index a, slope basis index 2 + a
            let (v_s, d_s) = (bs[a], bs[2 + a]);
            let (v_t, d_t) = (bt[b], bt[2 + b]);
            let coef = [d[0], h * d[1], h * d[2], h * h * d[3]];
            let terms = [(v_s, v_t, coef[0]), (d_s, v_t, coef[1]), (v_s, d_t, coef[2]), (d_s, d_t, coef[3])];
            for (bx, by, c) in terms {
                out[0] += c * bx[0] * by[0];
                out[1] += c * bx[2] * by[0] / (h * h);
                out[2] += c * bx[1] * by[1] / (h * h);
                out[3] += c * bx[0] * by[2] / (h * h);
            }
        }
        out
    }
}

/// Degree-5 rule on the reference triangle: barycentric points and weights.
const DUNAVANT5: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.059715871789770, 0.470142064105115, 0.470142064105115], 0.132394152788506),
    ([0.470142064105115, 0.059715871789770, 0.470142064105115], 0.132394152788506),
    ([0.470142064105115, 0.470142064105115, 0.059715871789770], 0.132394152788506),
    ([0.797426985353087, 0.101286507323456, 0.101286507323456], 0.125939180544827),
    ([0.101286507323456, 0.797426985353087, 0.101286507323456], 0.125939180544827),
    ([0.101286507323456, 0.101286507323456, 0.797426985353087], 0.125939180544827),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryReport {
    /// `∫_Ω H̃ess(φ) : e(v)`.
    pub pairing: f64,
    /// Pairing divided by `‖H̃ess φ‖_{L²(Ω)} ‖e(v)‖_{L²(Ω)}`.
    pub normalized: f64,
}

/// Pairs the Airy stress `H̃ess(φ) = (∂₂²φ, −∂₁₂φ; −∂₁₂φ, ∂₁²φ)` with the
/// symmetrized gradient of the P1 displacement `(v₁, v₂)` over Ω.
pub fn airy_orthogonality(mesh: &CrackMesh, v: (&NodalField, &NodalField), phi: &HermiteField) -> Result<AiryReport> {
    v.0.check(mesh)?;
    v.1.check(mesh)?;
    let g = mesh.grid().ok_or_else(|| Error::invalid("mesh was not generated from a pixel grid"))?;
    if g.n != phi.n || g.bbox != phi.bbox || phi.data.len() != (phi.n + 1) * (phi.n + 1) {
        return Err(Error::invalid("potential grid does not match the mesh grid"));
    }
    let (g1, g2) = (gradient(mesh, v.0), gradient(mesh, v.1));
    let (mut pairing, mut stress2, mut strain2) = (0.0, 0.0, 0.0);
    for t in 0..mesh.triangle_count() {
        let tri = mesh.triangles()[t];
        let pts = tri.map(|k| mesh.vertices()[k]);
        let area = mesh.area(t);
        let (a, b) = (g1.vectors[t], g2.vectors[t]);
        let e = [a[0], 0.5 * (a[1] + b[0]), b[1]];
        let mut m = [0.0; 3];
        let mut s2 = 0.0;
        for (bary, w) in DUNAVANT5 {
            let x = [
                bary[0] * pts[0][0] + bary[1] * pts[1][0] + bary[2] * pts[2][0],
                bary[0] * pts[0][1] + bary[1] * pts[1][1] + bary[2] * pts[2][1],
            ];
            let [_, xx, xy, yy] = phi.eval(x);
            m[0] += w * yy;
            m[1] += w * -xy;
            m[2] += w * xx;
            s2 += w * (yy * yy + 2.0 * xy * xy + xx * xx);
        }
        pairing += area * (m[0] * e[0] + 2.0 * m[1] * e[1] + m[2] * e[2]);
        stress2 += area * s2;
        strain2 += area * (e[0] * e[0] + 2.0 * e[1] * e[1] + e[2] * e[2]);
    }
    let denom = stress2.sqrt() * strain2.sqrt();
    Ok(AiryReport {
        pairing,
        normalized: pairing.abs() / (denom + 1e-300),
    })
}

/// Hermite data that is linear, `c_i·x + b_i`, on every node within `dilation`
/// cells of complement component `K_i` (and zero near the box boundary), with
/// random data at all other nodes.
pub fn airy_potential(omega: &PixelDomain, dilation: f64, linear: &[([f64; 2], f64)], seed: u64) -> Result<HermiteField> {
    let labeling = complement_components(omega);
    if linear.len() != labeling.count() {
        return Err(Error::invalid(format!("need linear data for {} components", labeling.count())));
    }
    let n = omega.resolution();
    let bbox = omega.bbox();
    let h = omega.cell_side();
    let mut rng = crate::rng::stream(seed, "airy_potential", 0);
    let mut data = Vec::with_capacity((n + 1) * (n + 1));
    for k in 0..(n + 1) * (n + 1) {
        let p = [bbox.x0 + (k % (n + 1)) as f64 * h, bbox.y0 + (k / (n + 1)) as f64 * h];
        let near = (0..labeling.count()).find(|&c| {
            let mut d = labeling.cells[c].iter().map(|&cell| dist_to_cell(p, bbox, h, cell, n)).fold(f64::INFINITY, f64::min);
            if c == labeling.unbounded_id {
                d = d.min(bbox.dist_to_boundary(p));
            }
            d <= dilation * h * (1.0 + 1e-9)
        });
        data.push(match near {
            Some(c) if c == labeling.unbounded_id => [0.0; 4],
            Some(c) => {
                let (s, b) = linear[c];
                [s[0] * p[0] + s[1] * p[1] + b, s[0], s[1], 0.0]
            }
            None => [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ],
        });
    }
    Ok(HermiteField { n, bbox, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::is_admissible_estimate;

    fn holes(n: usize) -> PixelDomain {
        let s = n / 32;
        PixelDomain::from_fn(n, BoundingBox::unit(), |x, y| {
            let inr = |x0: usize, x1: usize, y0: usize, y1: usize| {
                let (a, b, c, d) = ((x0 * s) as f64 / n as f64, (x1 * s) as f64 / n as f64, (y0 * s) as f64 / n as f64, (y1 * s) as f64 / n as f64);
                x > a && x < b && y > c && y < d
            };
            !(inr(4, 8, 4, 8) || inr(20, 26, 6, 10) || inr(10, 14, 20, 28))
        })
        .unwrap()
    }

    fn box_mesh(omega: &PixelDomain) -> CrackMesh {
        triangulate(&PixelDomain::full(omega.resolution(), omega.bbox()).unwrap()).unwrap()
    }

    #[test]
    fn hperp_elements_are_orthogonal_to_gradients() {
        let omega = holes(32);
        let bm = box_mesh(&omega);
        let om = triangulate(&omega).unwrap();
        let elems = hperp_basis(&omega, &bm, 3, 7).unwrap();
        let mut rng = crate::rng::stream(1, "test", 0);
        for e in &elems {
            assert_eq!(e.component_values.len(), 4);
            assert_eq!(e.component_values[0], 0.0);
            let u = NodalField::new((0..om.vertex_count()).map(|_| rng.random_range(-1.0..1.0)).collect());
            assert!(orthogonality_residual(&om, &u, e, 1.5).unwrap() < 1e-12);
            let c = NodalField::constant(&om, 2.0);
            assert_eq!(orthogonality_residual(&om, &c, e, 1.5).unwrap(), 0.0);
        }
        assert!(hperp_basis(&omega, &bm, 0, 7).is_err());
    }

    #[test]
    fn flux_across_cut_to_hole_matches_plateau_jump() {
        let omega = holes(32);
        let bm = box_mesh(&omega);
        let om = triangulate(&omega).unwrap();
        let e = &hperp_basis(&omega, &bm, 1, 3).unwrap()[0];
        let lab = complement_components(&omega);
        let hole = lab.labels[omega.index(5, 5)].unwrap();
        // ∫ ψ·(0, −1) along y = 6h from x = 0 to the hole equals φ(hole) − φ(∂D)
        let n = 32;
        let h = omega.cell_side();
        let mut flux = 0.0;
        for i in 0..4 {
            let slot = 2 * omega.index(i, 6);
            let t = om.slots().iter().position(|&s| s == slot).unwrap();
            flux -= e.field.vectors[t][1] * h;
        }
        assert!((flux - e.component_values[hole]).abs() < 1e-12, "{flux} vs {}", e.component_values[hole]);
        assert_eq!(e.potential.values[6 * (n + 1)], 0.0);
    }

    #[test]
    fn nonconstant_potential_on_hole_breaks_orthogonality() {
        let omega = holes(32);
        let bm = box_mesh(&omega);
        let om = triangulate(&omega).unwrap();
        let lab = complement_components(&omega);
        let (owner, _) = vertex_components(&omega, &lab, &bm).unwrap();
        let mut phi: Vec<f64> = bm.vertices().iter().zip(&owner).map(|(p, o)| if *o == Some(1) { p[0] } else { 0.0 }).collect();
        let fixed: Vec<bool> = owner.iter().map(Option::is_some).collect();
        harmonic_fill(&bm, &mut phi, &fixed).unwrap();
        let potential = NodalField::new(phi);
        let field = hperp_field(&om, &bm, &potential).unwrap();
        let elem = HPerpElement { potential, component_values: vec![0.0; 4], field };
        let u = NodalField::interpolate(&om, |_, y| y);
        assert!(orthogonality_residual(&om, &u, &elem, 1.5).unwrap() > 1e-2);
    }

    #[test]
    fn flattening_is_a_projection() {
        let omega = holes(32);
        let bm = box_mesh(&omega);
        let e = &hperp_basis(&omega, &bm, 1, 11).unwrap()[0];
        let h = omega.cell_side();
        let once = flatten_near_components(&bm, &e.potential, &omega, 2.0 * h).unwrap();
        let twice = flatten_near_components(&bm, &once.field, &omega, 2.0 * h).unwrap();
        assert_eq!(once.field, twice.field);
        let zero = flatten_near_components(&bm, &NodalField::zeros(&bm), &omega, h).unwrap();
        assert_eq!(zero.field.max_abs(), 0.0);
        let wobbly = NodalField::interpolate(&bm, |x, y| x * y);
        assert!(flatten_near_components(&bm, &wobbly, &omega, h).is_err());
    }

    #[test]
    fn flattening_trace_decreases() {
        let omega = holes(32);
        let bm = box_mesh(&omega);
        let e = &hperp_basis(&omega, &bm, 1, 5).unwrap()[0];
        let tr = flatten_trace(&omega, &bm, &e.potential, 2.0, 3).unwrap();
        assert!(tr.windows(2).all(|w| w[1] < w[0]), "{tr:?}");
    }

    #[test]
    fn maly_martio_first_stage() {
        let out = maly_martio(1, None, 64).unwrap();
        let st = &out.stages[0];
        assert_eq!(st.plateau_values, vec![0.5, -0.5]);
        assert!(st.increment_norm <= 0.5);
        assert_eq!(st.coverage, 1.0);
        assert!(st.resolved && !out.truncated);
        assert!(is_admissible_estimate(&out.domain, 1.5, &[0.25, 0.125, 0.0625]).unwrap().consistent_with_zero_measure);
    }

    #[test]
    fn maly_martio_budget_and_coverage() {
        let out = maly_martio(5, None, 64).unwrap();
        for st in &out.stages {
            let n = st.index as i32;
            assert!(st.increment_norm <= 2f64.powi(-n));
            assert!(st.increment_norm >= 0.999 * 2f64.powi(-n));
            assert!(st.coverage >= 1.0 - 2f64.powi(-n));
            assert!(st.nested);
        }
        assert!(out.stages.windows(2).all(|w| w[1].hausdorff_sum < w[0].hausdorff_sum));
        assert!(out.truncated);
    }

    #[test]
    fn capacity_bump_energy_matches_quadrature() {
        let b = CapacityBump { log_m: 3.0 };
        // radial midpoint rule on the transition layer
        let k = 200_000;
        let (r0, r1) = (b.plateau_radius(), 1.0f64);
        let (l0, l1) = (r0.ln(), r1.ln());
        let dl = (l1 - l0) / k as f64;
        let mut e = 0.0;
        for i in 0..k {
            let l = l0 + (i as f64 + 0.5) * dl;
            let d = (b.value((l + 0.5 * dl).exp()) - b.value((l - 0.5 * dl).exp())) / dl;
            e += 2.0 * std::f64::consts::PI * d * d * dl;
        }
        assert!((e - b.dirichlet_energy()).abs() < 1e-6 * e, "{e} vs {}", b.dirichlet_energy());
    }

    #[test]
    fn airy_pairing_vanishes_for_component_linear_potentials() {
        let omega = holes(32);
        let mesh = crate::mesh::refine(&triangulate(&omega).unwrap());
        let lin = [([0.0, 0.0], 0.0), ([0.3, -0.2], 0.1), ([-1.0, 0.5], 0.7), ([0.2, 0.9], -0.4)];
        let phi = airy_potential(&omega, 2.0, &lin, 9).unwrap();
        let v1 = NodalField::interpolate(&mesh, |x, y| (3.0 * x).sin() * y);
        let v2 = NodalField::interpolate(&mesh, |x, y| x * x - y);
        let r = airy_orthogonality(&mesh, (&v1, &v2), &phi).unwrap();
        assert!(r.normalized < 1e-10, "{r:?}");
        let quad = HermiteField::from_fn(32, omega.bbox(), |x, y| [x * x + y * y, 2.0 * x, 2.0 * y, 0.0]);
        let w1 = NodalField::interpolate(&mesh, |x, _| x - 0.2);
        let w2 = NodalField::interpolate(&mesh, |_, y| y - 0.2);
        assert!(airy_orthogonality(&mesh, (&w1, &w2), &quad).unwrap().normalized > 1e-3);
        let lin_all = HermiteField::from_fn(32, omega.bbox(), |x, y| [2.0 * x - y, 2.0, -1.0, 0.0]);
        assert!(airy_orthogonality(&mesh, (&v1, &v2), &lin_all).unwrap().pairing.abs() < 1e-12);
    }
}
