//! P1 fields on [`CrackMesh`]es and the operators acting on them.
//!
//! Integrals of field values use one-point centroid quadrature; integrals of
//! gradients are exact since gradients are piecewise constant.

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, PixelDomain};
use crate::linalg::SymmetricBuilder;
use crate::mesh::CrackMesh;

/// Continuous piecewise-linear field, one value per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
}

/// Piecewise-constant vector field, one 2-vector per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFlux {
    pub vectors: Vec<[f64; 2]>,
}

impl NodalField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(mesh: &CrackMesh) -> Self {
        Self::new(vec![0.0; mesh.vertex_count()])
    }

    pub fn constant(mesh: &CrackMesh, c: f64) -> Self {
        Self::new(vec![c; mesh.vertex_count()])
    }

    pub fn interpolate(mesh: &CrackMesh, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::new(mesh.vertices().iter().map(|p| f(p[0], p[1])).collect())
    }

    pub fn check(&self, mesh: &CrackMesh) -> Result<()> {
        if self.values.len() != mesh.vertex_count() {
            return Err(Error::invalid(format!(
                "field has {} values for a mesh with {} vertices",
                self.values.len(),
                mesh.vertex_count()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field has non-finite values"));
        }
        Ok(())
    }

    /// Centroid value on triangle `t`.
    pub fn centroid_value(&self, mesh: &CrackMesh, t: usize) -> f64 {
        let [a, b, c] = mesh.triangles()[t];
        (self.values[a] + self.values[b] + self.values[c]) / 3.0
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &NodalField) -> NodalField {
        NodalField::new(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    /// Prolongation to a refinement of `mesh` (linear interpolation).
    pub fn prolong(&self, fine: &CrackMesh) -> Result<NodalField> {
        let parents = fine
            .parents()
            .ok_or_else(|| Error::invalid("mesh carries no refinement linkage"))?;
        Ok(NodalField::new(
            parents
                .iter()
                .map(|&[a, b]| 0.5 * (self.values[a] + self.values[b]))
                .collect(),
        ))
    }

    /// CSV `vertex_id,value`, preceded by a `# mesh: <name>` header line.
    pub fn to_csv(&self, mesh_name: &str) -> String {
        let mut s = format!("# mesh: {mesh_name}\nvertex_id,value\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{i},{v:.17e}\n"));
        }
        s
    }

    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (lno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("vertex_id") {
                continue;
            }
            let perr = || Error::Parse {
                path: origin.to_string(),
                line: lno + 1,
                message: format!("expected `vertex_id,value`, got `{line}`"),
            };
            let mut it = line.split(',');
            let id: usize = it.next().and_then(|t| t.trim().parse().ok()).ok_or_else(perr)?;
            let v: f64 = it.next().and_then(|t| t.trim().parse().ok()).ok_or_else(perr)?;
            if id != values.len() {
                return Err(perr());
            }
            values.push(v);
        }
        Ok(NodalField::new(values))
    }
}

impl EdgeFlux {
    pub fn new(vectors: Vec<[f64; 2]>) -> Self {
        Self { vectors }
    }

    pub fn zeros(mesh: &CrackMesh) -> Self {
        Self::new(vec![[0.0; 2]; mesh.triangle_count()])
    }

    pub fn check(&self, mesh: &CrackMesh) -> Result<()> {
        if self.vectors.len() != mesh.triangle_count() {
            return Err(Error::invalid(format!(
                "flux has {} vectors for a mesh with {} triangles",
                self.vectors.len(),
                mesh.triangle_count()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &EdgeFlux) -> EdgeFlux {
        EdgeFlux::new(
            self.vectors
                .iter()
                .zip(&other.vectors)
                .map(|(a, b)| [a[0] + b[0], a[1] + b[1]])
                .collect(),
        )
    }

    pub fn sub(&self, other: &EdgeFlux) -> EdgeFlux {
        EdgeFlux::new(
            self.vectors
                .iter()
                .zip(&other.vectors)
                .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> EdgeFlux {
        EdgeFlux::new(self.vectors.iter().map(|a| [s * a[0], s * a[1]]).collect())
    }

    /// `R w` with `R(a, b) = (-b, a)`, the counterclockwise quarter turn.
    pub fn rotate(&self) -> EdgeFlux {
        EdgeFlux::new(self.vectors.iter().map(|&v| rotate(v)).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("triangle_id,vx,vy\n");
        for (i, v) in self.vectors.iter().enumerate() {
            s.push_str(&format!("{i},{:.17e},{:.17e}\n", v[0], v[1]));
        }
        s
    }
}

/// Quarter turn counterclockwise.
pub fn rotate(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

/// `∫ w · z` over the mesh.
pub fn l2_inner(mesh: &CrackMesh, w: &EdgeFlux, z: &EdgeFlux) -> f64 {
    (0..mesh.triangle_count())
        .map(|t| mesh.area(t) * (w.vectors[t][0] * z.vectors[t][0] + w.vectors[t][1] * z.vectors[t][1]))
        .sum()
}

/// Exact gradient of the P1 interpolant, per triangle.
pub fn gradient(mesh: &CrackMesh, u: &NodalField) -> EdgeFlux {
    EdgeFlux::new(
        (0..mesh.triangle_count())
            .map(|t| {
                let g = mesh.geometry(t);
                let tri = mesh.triangles()[t];
                let mut out = [0.0; 2];
                for k in 0..3 {
                    out[0] += u.values[tri[k]] * g.grads[k][0];
                    out[1] += u.values[tri[k]] * g.grads[k][1];
                }
                out
            })
            .collect(),
    )
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("p must be in [1, ∞), got {p}")));
    }
    Ok(())
}

/// `(Σ_T |T| |w_T|^p)^{1/p}`.
pub fn lp_norm(mesh: &CrackMesh, w: &EdgeFlux, p: f64) -> Result<f64> {
    check_p(p)?;
    w.check(mesh)?;
    let s: f64 = (0..mesh.triangle_count())
        .map(|t| {
            let v = w.vectors[t];
            mesh.area(t) * (v[0] * v[0] + v[1] * v[1]).sqrt().powf(p)
        })
        .sum();
    Ok(s.powf(1.0 / p))
}

/// Weighted `L^p` norm of a nodal field with centroid quadrature.
pub fn lp_norm_scalar(mesh: &CrackMesh, u: &NodalField, p: f64, weight: Option<&[f64]>) -> Result<f64> {
    check_p(p)?;
    u.check(mesh)?;
    if let Some(b) = weight {
        if b.len() != mesh.triangle_count() {
            return Err(Error::invalid("weight must have one value per triangle"));
        }
    }
    let s: f64 = (0..mesh.triangle_count())
        .map(|t| {
            let b = weight.map_or(1.0, |b| b[t]);
            b * mesh.area(t) * u.centroid_value(mesh, t).abs().powf(p)
        })
        .sum();
    Ok(s.powf(1.0 / p))
}

/// `‖u‖_p + ‖∇u‖_p`.
pub fn w1p_norm(mesh: &CrackMesh, u: &NodalField, p: f64) -> Result<f64> {
    Ok(lp_norm_scalar(mesh, u, p, None)? + lp_norm(mesh, &gradient(mesh, u), p)?)
}

/// Piecewise-constant field on the half-cells of a pixel grid (two slots per
/// cell, matching the two triangles of [`crate::mesh::triangulate`]).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub n: usize,
    pub bbox: BoundingBox,
    /// Components per slot (1 for scalars, 2 for vectors).
    pub dim: usize,
    /// `dim` values per slot, slot-major.
    pub values: Vec<f64>,
}

impl GridField {
    pub fn slot_area(&self) -> f64 {
        let h = self.bbox.side / self.n as f64;
        0.5 * h * h
    }

    pub fn slot_count(&self) -> usize {
        2 * self.n * self.n
    }

    /// `(Σ_slots |slot| |v|^p)^{1/p}`, optionally weighted per cell.
    pub fn lp_norm(&self, p: f64, cell_weight: Option<&[f64]>) -> f64 {
        let a = self.slot_area();
        let s: f64 = (0..self.slot_count())
            .map(|k| {
                let v = &self.values[k * self.dim..(k + 1) * self.dim];
                let mag = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                cell_weight.map_or(1.0, |w| w[k / 2]) * a * mag.powf(p)
            })
            .sum();
        s.powf(1.0 / p)
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        if self.n != other.n || self.dim != other.dim || self.bbox != other.bbox {
            return Err(Error::invalid("grid fields live on different grids"));
        }
        Ok(GridField {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            ..self.clone()
        })
    }

    /// `∫ v` for scalar fields.
    pub fn integral(&self) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.values.iter().sum::<f64>() * self.slot_area()
    }

    /// Per-cell average of each component.
    pub fn cell_average(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n * self.dim];
        for k in 0..self.slot_count() {
            for d in 0..self.dim {
                out[(k / 2) * self.dim + d] += 0.5 * self.values[k * self.dim + d];
            }
        }
        out
    }
}

fn extend(mesh: &CrackMesh, target: &PixelDomain, dim: usize, value: impl Fn(usize, usize) -> f64) -> Result<GridField> {
    let grid = mesh
        .grid()
        .ok_or_else(|| Error::invalid("mesh was not generated from a pixel grid"))?;
    let tb = target.bbox();
    if grid.n != target.resolution() || grid.bbox != tb {
        return Err(Error::invalid("source mesh grid does not match the target box"));
    }
    let n = grid.n;
    let mut acc = vec![0.0; 2 * n * n * dim];
    let mut area = vec![0.0; 2 * n * n];
    for t in 0..mesh.triangle_count() {
        let s = mesh.slots()[t];
        let a = mesh.area(t);
        area[s] += a;
        for d in 0..dim {
            acc[s * dim + d] += a * value(t, d);
        }
    }
    for s in 0..2 * n * n {
        if area[s] > 0.0 {
            for d in 0..dim {
                acc[s * dim + d] /= area[s];
            }
        }
    }
    Ok(GridField {
        n,
        bbox: tb,
        dim,
        values: acc,
    })
}

/// Zero extension of a nodal field (centroid values) onto the target grid.
pub fn extend_by_zero(mesh: &CrackMesh, u: &NodalField, target: &PixelDomain) -> Result<GridField> {
    u.check(mesh)?;
    extend(mesh, target, 1, |t, _| u.centroid_value(mesh, t))
}

/// Zero extension of a piecewise-constant vector field onto the target grid.
pub fn extend_flux_by_zero(mesh: &CrackMesh, w: &EdgeFlux, target: &PixelDomain) -> Result<GridField> {
    w.check(mesh)?;
    extend(mesh, target, 2, |t, d| w.vectors[t][d])
}

/// Indicator `1_Ω` on the half-cell grid.
pub fn indicator(omega: &PixelDomain) -> GridField {
    let n = omega.resolution();
    GridField {
        n,
        bbox: omega.bbox(),
        dim: 1,
        values: (0..2 * n * n)
            .map(|k| if omega.mask()[k / 2] { 1.0 } else { 0.0 })
            .collect(),
    }
}

/// Nodal clamp `T_k(u) = min(max(u, -k), k)`.
pub fn truncate(u: &NodalField, k: f64) -> Result<NodalField> {
    if !(k > 0.0) {
        return Err(Error::invalid(format!("truncation level must be positive, got {k}")));
    }
    Ok(NodalField::new(u.values.iter().map(|v| v.clamp(-k, k)).collect()))
}

/// The 1-Lipschitz map `T(y) = ∫_0^y 1_{ℝ∖C_n}(s) ds` with
/// `C_n = {y : dist(y, C) ≤ 1/n}`.
#[derive(Debug, Clone)]
pub struct LevelFlattener {
    intervals: Vec<(f64, f64)>,
}

impl LevelFlattener {
    pub fn new(levels: &[f64], n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if levels.is_empty() || levels.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("level set must be a nonempty finite set of reals"));
        }
        Ok(Self::with_width(levels, 1.0 / n as f64))
    }

    pub(crate) fn with_width(levels: &[f64], r: f64) -> Self {
        let mut c = levels.to_vec();
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut intervals: Vec<(f64, f64)> = Vec::new();
        for y in c {
            let (lo, hi) = (y - r, y + r);
            match intervals.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => intervals.push((lo, hi)),
            }
        }
        Self { intervals }
    }

    fn covered(&self, a: f64, b: f64) -> f64 {
        self.intervals
            .iter()
            .map(|&(lo, hi)| (hi.min(b) - lo.max(a)).max(0.0))
            .sum()
    }

    pub fn apply(&self, y: f64) -> f64 {
        if y >= 0.0 {
            y - self.covered(0.0, y)
        } else {
            y + self.covered(y, 0.0)
        }
    }

    /// Whether `y` lies in the flattened set `C_n`.
    pub fn is_flat(&self, y: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| y >= lo && y <= hi)
    }

    /// Index of the interval of `C_n` containing `y`.
    pub fn interval_of(&self, y: f64) -> Option<usize> {
        self.intervals.iter().position(|&(lo, hi)| y >= lo && y <= hi)
    }
}

/// `T_n ∘ φ` applied nodewise.
pub fn flatten_levels(phi: &NodalField, levels: &[f64], n: usize) -> Result<NodalField> {
    let t = LevelFlattener::new(levels, n)?;
    Ok(NodalField::new(phi.values.iter().map(|&y| t.apply(y)).collect()))
}

/// Subtracts the mean of `u` over the triangle subset `tris`.
pub fn mean_normalize(mesh: &CrackMesh, u: &NodalField, tris: &[usize]) -> Result<NodalField> {
    if tris.is_empty() {
        return Err(Error::invalid("averaging set is empty"));
    }
    u.check(mesh)?;
    let mean = mean_over(mesh, u, tris);
    Ok(NodalField::new(u.values.iter().map(|v| v - mean).collect()))
}

pub(crate) fn mean_over(mesh: &CrackMesh, u: &NodalField, tris: &[usize]) -> f64 {
    let (mut s, mut a) = (0.0, 0.0);
    for &t in tris {
        let at = mesh.area(t);
        s += at * u.centroid_value(mesh, t);
        a += at;
    }
    s / a
}

/// Triangles of each vertex-connected component.
pub(crate) fn component_triangles(mesh: &CrackMesh) -> (Vec<usize>, Vec<Vec<usize>>) {
    let (comp, count) = mesh.components();
    let mut tris = vec![Vec::new(); count];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        tris[comp[tri[0]]].push(t);
    }
    (comp, tris)
}

/// Stiffness matrix `∫ ∇λ_i · ∇λ_j` restricted to free vertices.
pub(crate) fn assemble_laplacian(mesh: &CrackMesh, dof: &[Option<usize>], nfree: usize) -> SymmetricBuilder {
    let mut k = SymmetricBuilder::with_capacity(nfree, 6 * mesh.triangle_count());
    for t in 0..mesh.triangle_count() {
        let g = mesh.geometry(t);
        let tri = mesh.triangles()[t];
        for a in 0..3 {
            let Some(ia) = dof[tri[a]] else { continue };
            for b in 0..3 {
                let Some(ib) = dof[tri[b]] else { continue };
                let v = g.area * (g.grads[a][0] * g.grads[b][0] + g.grads[a][1] * g.grads[b][1]);
                k.add(ia, ib, v);
            }
        }
    }
    k
}

/// Result of [`helmholtz_split`].
#[derive(Debug, Clone)]
pub struct HelmholtzSplit {
    pub gradient_part: EdgeFlux,
    pub divergence_free: EdgeFlux,
    pub potential: NodalField,
}

/// `L²`-orthogonal splitting `w = ∇φ + σ`, with `σ` orthogonal to every
/// discrete gradient and `φ` of zero mean on each mesh component.
pub fn helmholtz_split(mesh: &CrackMesh, w: &EdgeFlux) -> Result<HelmholtzSplit> {
    w.check(mesh)?;
    let (comp, comp_tris) = component_triangles(mesh);
    // pin the first vertex of every component
    let mut pinned = vec![false; comp_tris.len()];
    let mut dof = vec![None; mesh.vertex_count()];
    let mut nfree = 0;
    for v in 0..mesh.vertex_count() {
        if !pinned[comp[v]] {
            pinned[comp[v]] = true;
            continue;
        }
        dof[v] = Some(nfree);
        nfree += 1;
    }
    let k = assemble_laplacian(mesh, &dof, nfree);
    let mut rhs = vec![0.0; nfree];
    for t in 0..mesh.triangle_count() {
        let g = mesh.geometry(t);
        let tri = mesh.triangles()[t];
        let wt = w.vectors[t];
        for a in 0..3 {
            if let Some(ia) = dof[tri[a]] {
                rhs[ia] += g.area * (wt[0] * g.grads[a][0] + wt[1] * g.grads[a][1]);
            }
        }
    }
    let x = k.solve(&rhs)?;
    let mut phi = NodalField::new(dof.iter().map(|d| d.map_or(0.0, |i| x[i])).collect());
    for tris in &comp_tris {
        if tris.is_empty() {
            continue;
        }
        let m = mean_over(mesh, &phi, tris);
        let c = comp[mesh.triangles()[tris[0]][0]];
        for v in 0..mesh.vertex_count() {
            if comp[v] == c {
                phi.values[v] -= m;
            }
        }
    }
    let grad = gradient(mesh, &phi);
    let sigma = w.sub(&grad);
    Ok(HelmholtzSplit {
        gradient_part: grad,
        divergence_free: sigma,
        potential: phi,
    })
}
