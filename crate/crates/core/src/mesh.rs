//! Structured P1 triangulations of pixel domains, with slit cracks.
//!
//! Every cell of Ω is split along its bottom-left/top-right diagonal into a
//! lower-right triangle (half 0) and an upper-left triangle (half 1). A crack
//! is a connected path of mesh edges; slitting duplicates the vertices along
//! it so that triangles on the two sides no longer share degrees of freedom.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, PixelDomain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Outer,
    Crack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub triangle: usize,
    pub tag: BoundaryTag,
}

/// One crack edge: the vertex pair seen from each side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrackEdge {
    pub side_a: [usize; 2],
    pub side_b: [usize; 2],
}

/// Grid a mesh was generated from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridInfo {
    pub n: usize,
    pub bbox: BoundingBox,
}

/// Area and barycentric gradients of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriGeom {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

/// A connected set of mesh edges, optionally with two required terminals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutPath {
    /// Ids into [`CrackMesh::edge_list`] of the mesh the cut lives on.
    pub edges: Vec<usize>,
    pub terminals: Option<[usize; 2]>,
}

impl CutPath {
    pub fn new(edges: Vec<usize>, terminals: Option<[usize; 2]>) -> Self {
        let mut edges = edges;
        edges.sort_unstable();
        edges.dedup();
        Self { edges, terminals }
    }

    pub fn empty() -> Self {
        Self {
            edges: Vec::new(),
            terminals: None,
        }
    }

    /// Vertex pairs of the cut edges on `mesh`.
    pub fn edge_pairs(&self, mesh: &CrackMesh) -> Result<Vec<[usize; 2]>> {
        let list = mesh.edge_list();
        self.edges
            .iter()
            .map(|&e| {
                list.get(e)
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("edge id {e} is not in the mesh edge graph")))
            })
            .collect()
    }

    /// Vertices touched by the cut, sorted.
    pub fn vertices(&self, mesh: &CrackMesh) -> Result<Vec<usize>> {
        let mut v: Vec<usize> = self.edge_pairs(mesh)?.into_iter().flatten().collect();
        v.sort_unstable();
        v.dedup();
        Ok(v)
    }

    /// Checks edge ids, connectivity and terminal incidence.
    pub fn validate(&self, mesh: &CrackMesh) -> Result<()> {
        let pairs = self.edge_pairs(mesh)?;
        if pairs.is_empty() {
            if self.terminals.is_some() {
                return Err(Error::invalid("a cut with terminals needs at least one edge"));
            }
            return Ok(());
        }
        let mut uf = UnionFind::new(mesh.vertex_count());
        for &[a, b] in &pairs {
            uf.union(a, b);
        }
        let root = uf.find(pairs[0][0]);
        if pairs.iter().any(|&[a, _]| uf.find(a) != root) {
            return Err(Error::invalid("cut edges are not connected"));
        }
        if let Some(ts) = self.terminals {
            for t in ts {
                if !pairs.iter().any(|&[a, b]| a == t || b == t) {
                    return Err(Error::invalid(format!("terminal vertex {t} is not on the cut")));
                }
            }
        }
        Ok(())
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Conforming P1 triangulation with optional slit cracks.
#[derive(Debug, Clone, PartialEq)]
pub struct CrackMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    crack_edges: Vec<CrackEdge>,
    boundary_edges: Vec<BoundaryEdge>,
    grid: Option<GridInfo>,
    /// Per triangle: `2 * cell + half` on the generating grid.
    slots: Vec<usize>,
    /// Geometric point id per vertex (crack copies share one).
    origin: Vec<usize>,
    /// Per vertex, the two parent vertices after refinement.
    parents: Option<Vec<[usize; 2]>>,
}

impl CrackMesh {
    /// Builds a mesh from raw data; boundary edges are derived.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        crack_edges: Vec<CrackEdge>,
    ) -> Result<Self> {
        let nv = vertices.len();
        for t in &triangles {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::invalid(format!("triangle {t:?} references a missing vertex")));
            }
        }
        let origin = merge_coincident(&vertices);
        let slots = (0..triangles.len()).collect();
        let mut mesh = Self {
            vertices,
            triangles,
            crack_edges,
            boundary_edges: Vec::new(),
            grid: None,
            slots,
            origin,
            parents: None,
        };
        for (k, t) in mesh.triangles.iter().enumerate() {
            if mesh_area(&mesh.vertices, t) <= 0.0 {
                return Err(Error::invalid(format!("triangle {k} is not positively oriented")));
            }
        }
        mesh.rebuild_boundary();
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn crack_edges(&self) -> &[CrackEdge] {
        &self.crack_edges
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn grid(&self) -> Option<GridInfo> {
        self.grid
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    pub fn parents(&self) -> Option<&[[usize; 2]]> {
        self.parents.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        mesh_area(&self.vertices, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    pub fn geometry(&self, t: usize) -> TriGeom {
        let [a, b, c] = self.triangles[t];
        let (p0, p1, p2) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let inv = 1.0 / det;
        let grads = [
            [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
            [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
            [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
        ];
        TriGeom {
            area: 0.5 * det,
            grads,
        }
    }

    pub fn geometries(&self) -> Vec<TriGeom> {
        (0..self.triangles.len()).map(|t| self.geometry(t)).collect()
    }

    /// All edges as sorted vertex pairs, in lexicographic order; the index in
    /// this list is the edge id.
    pub fn edge_list(&self) -> Vec<[usize; 2]> {
        let mut set: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [[a, b], [b, c], [c, a]])
            .map(|[a, b]| if a < b { [a, b] } else { [b, a] })
            .collect();
        set.sort_unstable();
        set.dedup();
        set
    }

    /// Edge id of the pair `(a, b)`, if it is a mesh edge.
    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a < b { [a, b] } else { [b, a] };
        self.edge_list().binary_search(&key).ok()
    }

    /// Connected components of the vertex graph: `(component per vertex, count)`.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut uf = UnionFind::new(self.vertices.len());
        for &[a, b, c] in &self.triangles {
            uf.union(a, b);
            uf.union(b, c);
        }
        let mut ids = HashMap::new();
        let mut comp = vec![0; self.vertices.len()];
        for v in 0..self.vertices.len() {
            let r = uf.find(v);
            let next = ids.len();
            comp[v] = *ids.entry(r).or_insert(next);
        }
        (comp, ids.len())
    }

    /// Vertices lying on outer boundary edges.
    pub fn outer_boundary_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::Outer)
            .flat_map(|e| e.vertices)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn rebuild_boundary(&mut self) {
        let mut count: BTreeMap<[usize; 2], (usize, usize)> = BTreeMap::new();
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            for [x, y] in [[a, b], [b, c], [c, a]] {
                let key = if x < y { [x, y] } else { [y, x] };
                let e = count.entry(key).or_insert((0, t));
                e.0 += 1;
            }
        }
        let crack: HashSet<[usize; 2]> = self
            .crack_edges
            .iter()
            .flat_map(|c| [c.side_a, c.side_b])
            .map(|[x, y]| if x < y { [x, y] } else { [y, x] })
            .collect();
        self.boundary_edges = count
            .into_iter()
            .filter(|(_, (k, _))| *k == 1)
            .map(|(key, (_, t))| BoundaryEdge {
                vertices: key,
                triangle: t,
                tag: if crack.contains(&key) {
                    BoundaryTag::Crack
                } else {
                    BoundaryTag::Outer
                },
            })
            .collect();
    }

    /// Mesh file text: `vertices`, `triangles` and `cracks` sections.
    pub fn to_text(&self) -> String {
        let mut s = format!("vertices {}\n", self.vertices.len());
        for p in &self.vertices {
            s.push_str(&format!("{} {}\n", p[0], p[1]));
        }
        s.push_str(&format!("triangles {}\n", self.triangles.len()));
        for t in &self.triangles {
            s.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
        }
        s.push_str(&format!("cracks {}\n", self.crack_edges.len()));
        for c in &self.crack_edges {
            s.push_str(&format!(
                "{} {} {} {}\n",
                c.side_a[0], c.side_a[1], c.side_b[0], c.side_b[1]
            ));
        }
        s
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut section = |name: &str| -> Result<(usize, Vec<(usize, Vec<f64>)>)> {
            let (lno, header) = lines.next().ok_or_else(|| perr(0, format!("missing `{name}` section")))?;
            let mut it = header.split_whitespace();
            if it.next() != Some(name) {
                return Err(perr(lno, format!("expected `{name} <count>`")));
            }
            let count: usize = it
                .next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| perr(lno, "bad count".into()))?;
            let mut rows = Vec::with_capacity(count);
            for _ in 0..count {
                let (lno, l) = lines.next().ok_or_else(|| perr(lno, format!("`{name}` section is short")))?;
                let vals = l
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| perr(lno, format!("bad number `{t}`"))))
                    .collect::<Result<Vec<f64>>>()?;
                rows.push((lno, vals));
            }
            Ok((count, rows))
        };
        let (_, vrows) = section("vertices")?;
        let (_, trows) = section("triangles")?;
        let (_, crows) = section("cracks")?;
        let idx = |lno: usize, v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(perr(lno, format!("bad index {v}")))
            }
        };
        let mut vertices = Vec::new();
        for (lno, r) in vrows {
            if r.len() != 2 {
                return Err(perr(lno, "expected `x y`".into()));
            }
            vertices.push([r[0], r[1]]);
        }
        let mut triangles = Vec::new();
        for (lno, r) in trows {
            if r.len() != 3 {
                return Err(perr(lno, "expected `i j k`".into()));
            }
            triangles.push([idx(lno, r[0])?, idx(lno, r[1])?, idx(lno, r[2])?]);
        }
        let mut cracks = Vec::new();
        for (lno, r) in crows {
            if r.len() != 4 {
                return Err(perr(lno, "expected `iA jA iB jB`".into()));
            }
            cracks.push(CrackEdge {
                side_a: [idx(lno, r[0])?, idx(lno, r[1])?],
                side_b: [idx(lno, r[2])?, idx(lno, r[3])?],
            });
        }
        CrackMesh::from_parts(vertices, triangles, cracks)
    }
}

fn mesh_area(vertices: &[[f64; 2]], t: &[usize; 3]) -> f64 {
    let (p0, p1, p2) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}

fn merge_coincident(vertices: &[[f64; 2]]) -> Vec<usize> {
    let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
    vertices
        .iter()
        .enumerate()
        .map(|(i, p)| *seen.entry((p[0].to_bits(), p[1].to_bits())).or_insert(i))
        .collect()
}

/// Two right triangles per cell of Ω; boundary edges are tagged outer.
pub fn triangulate(omega: &PixelDomain) -> Result<CrackMesh> {
    if omega.is_empty() {
        return Err(Error::invalid("cannot triangulate an empty domain"));
    }
    let n = omega.resolution();
    let bbox = omega.bbox();
    let h = omega.cell_side();
    let mut node_id = vec![usize::MAX; (n + 1) * (n + 1)];
    for j in 0..n {
        for i in 0..n {
            if omega.inside(i, j) {
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    node_id[(j + dj) * (n + 1) + i + di] = 0;
                }
            }
        }
    }
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            let k = j * (n + 1) + i;
            if node_id[k] == 0 {
                node_id[k] = vertices.len();
                vertices.push([bbox.x0 + i as f64 * h, bbox.y0 + j as f64 * h]);
            }
        }
    }
    let mut triangles = Vec::new();
    let mut slots = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if !omega.inside(i, j) {
                continue;
            }
            let v00 = node_id[j * (n + 1) + i];
            let v10 = node_id[j * (n + 1) + i + 1];
            let v01 = node_id[(j + 1) * (n + 1) + i];
            let v11 = node_id[(j + 1) * (n + 1) + i + 1];
            let cell = omega.index(i, j);
            triangles.push([v00, v10, v11]);
            slots.push(2 * cell);
            triangles.push([v00, v11, v01]);
            slots.push(2 * cell + 1);
        }
    }
    let origin = (0..vertices.len()).collect();
    let mut mesh = CrackMesh {
        vertices,
        triangles,
        crack_edges: Vec::new(),
        boundary_edges: Vec::new(),
        grid: Some(GridInfo { n, bbox }),
        slots,
        origin,
        parents: None,
    };
    mesh.rebuild_boundary();
    Ok(mesh)
}

/// Opens `cut` in `mesh`: around every cut vertex, each fan sector bounded by
/// cut edges gets its own vertex copy. Interior crack tips keep one vertex;
/// cut vertices on the outer boundary split.
pub fn slit(mesh: &CrackMesh, cut: &CutPath) -> Result<CrackMesh> {
    cut.validate(mesh)?;
    let pairs = cut.edge_pairs(mesh)?;
    if pairs.is_empty() {
        return Ok(mesh.clone());
    }
    let cut_set: HashSet<[usize; 2]> = pairs.iter().copied().collect();
    let is_cut = |a: usize, b: usize| cut_set.contains(&if a < b { [a, b] } else { [b, a] });

    let mut out = mesh.clone();
    let mut fan: Vec<Vec<usize>> = vec![Vec::new(); mesh.vertex_count()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for &v in tri {
            fan[v].push(t);
        }
    }
    // triangles on each side of every interior cut edge, before duplication
    let mut sides = Vec::new();
    for &[a, b] in &pairs {
        let adj: Vec<usize> = fan[a]
            .iter()
            .copied()
            .filter(|&t| mesh.triangles[t].contains(&b))
            .collect();
        if adj.len() == 2 {
            sides.push((a, b, adj[0], adj[1]));
        }
    }
    let cut_vertices = cut.vertices(mesh)?;
    let mut orig_of: Vec<usize> = (0..mesh.vertex_count()).collect();
    for &v in &cut_vertices {
        let tris = &fan[v];
        let mut uf = UnionFind::new(tris.len());
        for x in 0..tris.len() {
            for y in x + 1..tris.len() {
                let (tx, ty) = (out.triangles[tris[x]], out.triangles[tris[y]]);
                let shared = tx.iter().find(|&&w| w != v && ty.contains(&w));
                if let Some(&w) = shared {
                    if !is_cut(v, orig_of[w]) {
                        uf.union(x, y);
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for x in 0..tris.len() {
            let r = uf.find(x);
            groups.entry(r).or_default().push(tris[x]);
        }
        for (_, group) in groups.into_iter().skip(1) {
            let copy = out.vertices.len();
            out.vertices.push(out.vertices[v]);
            out.origin.push(out.origin[v]);
            orig_of.push(v);
            if let Some(p) = out.parents.as_mut() {
                let pv = p[v];
                p.push(pv);
            }
            for t in group {
                for slot in out.triangles[t].iter_mut() {
                    if *slot == v {
                        *slot = copy;
                    }
                }
            }
        }
    }
    let local = |t: usize, orig: usize, out: &CrackMesh| -> usize {
        let pos = mesh.triangles[t].iter().position(|&x| x == orig).unwrap();
        out.triangles[t][pos]
    };
    for (a, b, t1, t2) in sides {
        out.crack_edges.push(CrackEdge {
            side_a: [local(t1, a, &out), local(t1, b, &out)],
            side_b: [local(t2, a, &out), local(t2, b, &out)],
        });
    }
    out.rebuild_boundary();
    Ok(out)
}

/// Uniform red refinement: each triangle splits into four.
pub fn refine(mesh: &CrackMesh) -> CrackMesh {
    let mut vertices = mesh.vertices.clone();
    let mut origin = mesh.origin.clone();
    let mut parents: Vec<[usize; 2]> = (0..vertices.len()).map(|v| [v, v]).collect();
    let mut mid: HashMap<[usize; 2], usize> = HashMap::new();
    let mut geo_mid: HashMap<[usize; 2], usize> = HashMap::new();
    let mut next_geo = origin.iter().copied().max().map_or(0, |m| m + 1);
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>, origin: &mut Vec<usize>, parents: &mut Vec<[usize; 2]>| {
        let key = if a < b { [a, b] } else { [b, a] };
        if let Some(&m) = mid.get(&key) {
            return m;
        }
        let (pa, pb) = (vertices[a], vertices[b]);
        let m = vertices.len();
        vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        let (oa, ob) = (origin[a], origin[b]);
        let gkey = if oa < ob { [oa, ob] } else { [ob, oa] };
        let g = *geo_mid.entry(gkey).or_insert_with(|| {
            next_geo += 1;
            next_geo - 1
        });
        origin.push(g);
        parents.push(key);
        mid.insert(key, m);
        m
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    let mut slots = Vec::with_capacity(4 * mesh.triangles.len());
    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let mab = midpoint(a, b, &mut vertices, &mut origin, &mut parents);
        let mbc = midpoint(b, c, &mut vertices, &mut origin, &mut parents);
        let mca = midpoint(c, a, &mut vertices, &mut origin, &mut parents);
        triangles.extend_from_slice(&[[a, mab, mca], [mab, b, mbc], [mca, mbc, c], [mab, mbc, mca]]);
        slots.extend_from_slice(&[mesh.slots[t]; 4]);
    }
    let mut crack_edges = Vec::with_capacity(2 * mesh.crack_edges.len());
    for ce in &mesh.crack_edges {
        let ma = midpoint(ce.side_a[0], ce.side_a[1], &mut vertices, &mut origin, &mut parents);
        let mb = midpoint(ce.side_b[0], ce.side_b[1], &mut vertices, &mut origin, &mut parents);
        crack_edges.push(CrackEdge {
            side_a: [ce.side_a[0], ma],
            side_b: [ce.side_b[0], mb],
        });
        crack_edges.push(CrackEdge {
            side_a: [ma, ce.side_a[1]],
            side_b: [mb, ce.side_b[1]],
        });
    }
    let mut out = CrackMesh {
        vertices,
        triangles,
        crack_edges,
        boundary_edges: Vec::new(),
        grid: mesh.grid,
        slots,
        origin,
        parents: Some(parents),
    };
    out.rebuild_boundary();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::lebesgue_measure;

    fn boxmesh(n: usize) -> CrackMesh {
        triangulate(&PixelDomain::full(n, BoundingBox::unit()).unwrap()).unwrap()
    }

    /// Horizontal path of `k` edges starting at grid node (i0, j0) of a full box mesh.
    pub(crate) fn horizontal_cut(mesh: &CrackMesh, n: usize, i0: usize, j0: usize, k: usize) -> CutPath {
        let node = |i: usize, j: usize| j * (n + 1) + i;
        let edges = (0..k)
            .map(|s| mesh.edge_id(node(i0 + s, j0), node(i0 + s + 1, j0)).unwrap())
            .collect();
        CutPath::new(edges, Some([node(i0, j0), node(i0 + k, j0)]))
    }

    #[test]
    fn counts() {
        let one = boxmesh(1);
        assert_eq!((one.triangle_count(), one.vertex_count()), (2, 4));
        let m = boxmesh(7);
        assert_eq!(m.triangle_count(), 2 * 49);
        assert_eq!(m.vertex_count(), 64);
        let mut d = PixelDomain::full(7, BoundingBox::unit()).unwrap();
        d.set(3, 3, false);
        assert_eq!(triangulate(&d).unwrap().triangle_count(), 2 * 49 - 2);
        assert!(triangulate(&PixelDomain::new(2, BoundingBox::unit(), vec![false; 4]).unwrap()).is_err());
    }

    #[test]
    fn euler_characteristic_and_area() {
        let m = boxmesh(9);
        let v = m.vertex_count() as i64;
        let e = m.edge_list().len() as i64;
        let f = m.triangle_count() as i64;
        assert_eq!(v - e + f, 1);
        let d = PixelDomain::from_fn(20, BoundingBox::new(-1.0, -1.0, 2.0).unwrap(), |x, y| x * x + y * y < 0.8).unwrap();
        let md = triangulate(&d).unwrap();
        assert!((md.total_area() - lebesgue_measure(&d)).abs() <= 1e-12 * lebesgue_measure(&d));
        assert!((0..md.triangle_count()).all(|t| md.area(t) > 0.0));
    }

    #[test]
    fn interior_slit_duplicates_inner_vertices() {
        let n = 8;
        let m = boxmesh(n);
        for k in 1..=5 {
            let cut = horizontal_cut(&m, n, 1, 4, k);
            let s = slit(&m, &cut).unwrap();
            assert_eq!(s.vertex_count(), m.vertex_count() + k - 1);
            assert_eq!(s.crack_edges().len(), k);
        }
        assert_eq!(slit(&m, &CutPath::empty()).unwrap(), m);
    }

    #[test]
    fn boundary_touching_slit_opens_endpoint() {
        let n = 8;
        let m = boxmesh(n);
        let cut = horizontal_cut(&m, n, 0, 4, 3);
        let s = slit(&m, &cut).unwrap();
        // 2 interior vertices plus the boundary endpoint
        assert_eq!(s.vertex_count(), m.vertex_count() + 3);
    }

    #[test]
    fn disconnected_or_foreign_cut_rejected() {
        let n = 8;
        let m = boxmesh(n);
        let a = horizontal_cut(&m, n, 1, 2, 1);
        let b = horizontal_cut(&m, n, 4, 5, 1);
        let cut = CutPath::new(vec![a.edges[0], b.edges[0]], None);
        assert!(slit(&m, &cut).is_err());
        assert!(slit(&m, &CutPath::new(vec![usize::MAX], None)).is_err());
    }

    #[test]
    fn refine_counts_and_area() {
        let n = 6;
        let m = boxmesh(n);
        let s = slit(&m, &horizontal_cut(&m, n, 1, 3, 3)).unwrap();
        let r = refine(&s);
        assert_eq!(r.triangle_count(), 4 * s.triangle_count());
        assert_eq!(r.crack_edges().len(), 2 * s.crack_edges().len());
        assert!((r.total_area() - s.total_area()).abs() < 1e-14);
        assert!((0..r.triangle_count()).all(|t| r.area(t) > 0.0));
        // crack faces remain boundary edges after refinement
        let crack_faces = r.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Crack).count();
        assert_eq!(crack_faces, 2 * r.crack_edges().len());
    }

    #[test]
    fn mesh_text_round_trip() {
        let n = 4;
        let m = boxmesh(n);
        let s = slit(&m, &horizontal_cut(&m, n, 1, 2, 2)).unwrap();
        let back = CrackMesh::from_text(&s.to_text(), "mem").unwrap();
        assert_eq!(back.vertices(), s.vertices());
        assert_eq!(back.triangles(), s.triangles());
        assert_eq!(back.crack_edges(), s.crack_edges());
        assert_eq!(back.boundary_edges(), s.boundary_edges());
    }
}
