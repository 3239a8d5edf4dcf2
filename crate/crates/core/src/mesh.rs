//! P1 triangulations of the rectangle `[x_min, x_max] × [0, y_max]`.
//!
//! Besides construction the mesh owns triangle adjacency and a uniform bin
//! grid, which together back point location: a walk across neighbours from
//! a cached start triangle, with the bins as a fallback.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;
/// Barycentric slack accepted when deciding a point lies in a triangle.
pub const BARY_TOL: f64 = 1e-12;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Interior,
    Left,
    Right,
    Bottom,
    Top,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Interior => "interior",
            BoundaryTag::Left => "left",
            BoundaryTag::Right => "right",
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Top => "top",
        }
    }

    pub fn is_boundary(self) -> bool {
        self != BoundaryTag::Interior
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "interior" => BoundaryTag::Interior,
            "left" => BoundaryTag::Left,
            "right" => BoundaryTag::Right,
            "bottom" => BoundaryTag::Bottom,
            "top" => BoundaryTag::Top,
            other => return Err(Error::Mesh(format!("unknown boundary tag '{other}'"))),
        })
    }
}

/// What to do with query points outside the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Project onto the bounding rectangle first.
    Clamp,
    /// Fail with [`Error::Location`].
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLocation {
    pub triangle: usize,
    pub barycentric: [f64; 3],
}

#[derive(Debug, Clone)]
struct Bins {
    nx: usize,
    ny: usize,
    start: Vec<usize>,
    items: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    tags: Vec<BoundaryTag>,
    neighbors: Vec<[usize; 3]>,
    bbox: [f64; 4],
    bins: Bins,
}

impl Mesh {
    /// Builds a mesh from raw connectivity, checking orientation and edge
    /// manifoldness.
    pub fn new(nodes: Vec<Point>, triangles: Vec<[usize; 3]>, tags: Vec<BoundaryTag>) -> Result<Mesh> {
        if nodes.is_empty() || triangles.is_empty() {
            return Err(Error::Mesh("mesh needs at least one node and one triangle".into()));
        }
        if tags.len() != nodes.len() {
            return Err(Error::Mesh(format!(
                "{} tags for {} nodes",
                tags.len(),
                nodes.len()
            )));
        }
        if nodes.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Mesh("non-finite node coordinate".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::Mesh(format!("triangle {t} references a missing node")));
            }
            if signed_area(&nodes, tri) <= 0.0 {
                return Err(Error::Mesh(format!(
                    "triangle {t} is not positively oriented"
                )));
            }
        }
        let neighbors = build_neighbors(&triangles)?;
        let mut bbox = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for p in &nodes {
            bbox[0] = bbox[0].min(p[0]);
            bbox[1] = bbox[1].max(p[0]);
            bbox[2] = bbox[2].min(p[1]);
            bbox[3] = bbox[3].max(p[1]);
        }
        let bins = build_bins(&nodes, &triangles, bbox);
        Ok(Mesh {
            nodes,
            triangles,
            tags,
            neighbors,
            bbox,
            bins,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn tags(&self) -> &[BoundaryTag] {
        &self.tags
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// `[x_min, x_max, y_min, y_max]`.
    pub fn bbox(&self) -> [f64; 4] {
        self.bbox
    }

    pub fn diameter(&self) -> f64 {
        (self.bbox[1] - self.bbox[0]).hypot(self.bbox[3] - self.bbox[2])
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.nodes, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Gradients of the three P1 basis functions on triangle `t`.
    pub fn gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [p0, p1, p2] = self.vertices(t);
        let two_a = 2.0 * self.area(t);
        [
            [(p1[1] - p2[1]) / two_a, (p2[0] - p1[0]) / two_a],
            [(p2[1] - p0[1]) / two_a, (p0[0] - p2[0]) / two_a],
            [(p0[1] - p1[1]) / two_a, (p1[0] - p0[0]) / two_a],
        ]
    }

    /// Maps barycentric coordinates on triangle `t` to a point.
    pub fn point_at(&self, t: usize, bary: [f64; 3]) -> Point {
        let v = self.vertices(t);
        [
            bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
            bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
        ]
    }

    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.vertices(t);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn clamp(&self, p: Point) -> Point {
        [
            p[0].clamp(self.bbox[0], self.bbox[1]),
            p[1].clamp(self.bbox[2], self.bbox[3]),
        ]
    }

    /// Locates `p` without a cached start triangle.
    pub fn locate(&self, p: Point, policy: Policy) -> Result<PointLocation> {
        Locator::new(self).locate(p, policy)
    }

    /// P1 value of the nodal field at `p`.
    pub fn interpolate(&self, values: &[f64], p: Point, policy: Policy) -> Result<f64> {
        Locator::new(self).interpolate(values, p, policy)
    }

    /// Every interior edge shared by exactly two triangles, boundary edges by one.
    pub fn edge_counts(&self) -> std::collections::HashMap<(usize, usize), usize> {
        let mut counts = std::collections::HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// x-extent of the support of each nodal basis function.
    pub fn support_x_extent(&self) -> Vec<(f64, f64)> {
        let mut ext: Vec<(f64, f64)> = self.nodes.iter().map(|p| (p[0], p[0])).collect();
        for tri in &self.triangles {
            let lo = tri.iter().map(|&i| self.nodes[i][0]).fold(f64::INFINITY, f64::min);
            let hi = tri.iter().map(|&i| self.nodes[i][0]).fold(f64::NEG_INFINITY, f64::max);
            for &i in tri {
                ext[i].0 = ext[i].0.min(lo);
                ext[i].1 = ext[i].1.max(hi);
            }
        }
        ext
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes {} triangles {}", self.nodes.len(), self.triangles.len());
        for (p, tag) in self.nodes.iter().zip(&self.tags) {
            let _ = writeln!(s, "{} {} {}", p[0], p[1], tag);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Mesh("empty mesh file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let (n, m) = match h.as_slice() {
            ["nodes", n, "triangles", m] => (parse_usize(n)?, parse_usize(m)?),
            _ => return Err(Error::Mesh(format!("bad header line '{header}'"))),
        };
        let mut nodes = Vec::with_capacity(n);
        let mut tags = Vec::with_capacity(n);
        for i in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Mesh(format!("missing node line {i}")))?;
            match line.split_whitespace().collect::<Vec<_>>().as_slice() {
                [x, y, tag] => {
                    nodes.push([parse_f64(x)?, parse_f64(y)?]);
                    tags.push(tag.parse()?);
                }
                _ => return Err(Error::Mesh(format!("bad node line '{line}'"))),
            }
        }
        let mut triangles = Vec::with_capacity(m);
        for t in 0..m {
            let line = lines
                .next()
                .ok_or_else(|| Error::Mesh(format!("missing triangle line {t}")))?;
            match line.split_whitespace().collect::<Vec<_>>().as_slice() {
                [a, b, c] => triangles.push([parse_usize(a)?, parse_usize(b)?, parse_usize(c)?]),
                _ => return Err(Error::Mesh(format!("bad triangle line '{line}'"))),
            }
        }
        if let Some(extra) = lines.next() {
            return Err(Error::Mesh(format!("trailing content '{extra}'")));
        }
        Mesh::new(nodes, triangles, tags)
    }

    pub fn read(path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Mesh::from_text(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Mesh(format!("'{s}' is not a number")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Mesh(format!("'{s}' is not a non-negative integer")))
}

fn signed_area(nodes: &[Point], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// `neighbors[t][k]` is the triangle across the edge opposite local vertex `k`.
fn build_neighbors(triangles: &[[usize; 3]]) -> Result<Vec<[usize; 3]>> {
    let mut edges: std::collections::HashMap<(usize, usize), (usize, usize)> =
        std::collections::HashMap::with_capacity(triangles.len() * 2);
    let mut neighbors = vec![[NONE; 3]; triangles.len()];
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let key = (a.min(b), a.max(b));
            match edges.get(&key) {
                None => {
                    edges.insert(key, (t, k));
                }
                Some(&(other, ok)) => {
                    if neighbors[other][ok] != NONE {
                        return Err(Error::Mesh(format!(
                            "edge ({a}, {b}) is shared by more than two triangles"
                        )));
                    }
                    neighbors[other][ok] = t;
                    neighbors[t][k] = other;
                }
            }
        }
    }
    Ok(neighbors)
}

fn build_bins(nodes: &[Point], triangles: &[[usize; 3]], bbox: [f64; 4]) -> Bins {
    let side = ((triangles.len() as f64 / 2.0).sqrt().ceil() as usize).max(1);
    let (nx, ny) = (side, side);
    let mut lists = vec![Vec::new(); nx * ny];
    for (t, tri) in triangles.iter().enumerate() {
        let xs = tri.map(|i| nodes[i][0]);
        let ys = tri.map(|i| nodes[i][1]);
        let (i0, i1) = (
            bin_index(xs.iter().copied().fold(f64::INFINITY, f64::min), bbox[0], bbox[1], nx),
            bin_index(xs.iter().copied().fold(f64::NEG_INFINITY, f64::max), bbox[0], bbox[1], nx),
        );
        let (j0, j1) = (
            bin_index(ys.iter().copied().fold(f64::INFINITY, f64::min), bbox[2], bbox[3], ny),
            bin_index(ys.iter().copied().fold(f64::NEG_INFINITY, f64::max), bbox[2], bbox[3], ny),
        );
        for j in j0..=j1 {
            for i in i0..=i1 {
                lists[j * nx + i].push(t);
            }
        }
    }
    let mut start = Vec::with_capacity(nx * ny + 1);
    let mut items = Vec::new();
    start.push(0);
    for l in lists {
        items.extend(l);
        start.push(items.len());
    }
    Bins {
        nx,
        ny,
        start,
        items,
    }
}

fn bin_index(v: f64, lo: f64, hi: f64, n: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    (((v - lo) / (hi - lo) * n as f64).floor().max(0.0) as usize).min(n - 1)
}

/// Point locator with a per-caller cached start triangle.
#[derive(Debug, Clone)]
pub struct Locator<'m> {
    mesh: &'m Mesh,
    last: usize,
}

impl<'m> Locator<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        Locator { mesh, last: 0 }
    }

    /// Locator whose first walk starts from triangle `t`.
    pub fn starting_at(mesh: &'m Mesh, t: usize) -> Self {
        Locator { mesh, last: t }
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn locate(&mut self, p: Point, policy: Policy) -> Result<PointLocation> {
        let mesh = self.mesh;
        let q = match policy {
            Policy::Clamp => mesh.clamp(p),
            Policy::Strict => {
                let slack = 1e-12 * mesh.diameter();
                let b = mesh.bbox;
                if !(p[0] >= b[0] - slack && p[0] <= b[1] + slack && p[1] >= b[2] - slack && p[1] <= b[3] + slack) {
                    return Err(Error::Location { x: p[0], y: p[1] });
                }
                mesh.clamp(p)
            }
        };
        let found = self.walk(q).or_else(|| self.search_bins(q));
        match found {
            Some(loc) => {
                self.last = loc.triangle;
                Ok(loc)
            }
            None if policy == Policy::Clamp => {
                // non-convex imports: fall back to the least-violating triangle
                let loc = self.nearest(q);
                self.last = loc.triangle;
                Ok(loc)
            }
            None => Err(Error::Location { x: p[0], y: p[1] }),
        }
    }

    pub fn interpolate(&mut self, values: &[f64], p: Point, policy: Policy) -> Result<f64> {
        debug_assert_eq!(values.len(), self.mesh.n_nodes());
        let loc = self.locate(p, policy)?;
        let tri = self.mesh.triangles[loc.triangle];
        Ok(loc.barycentric[0] * values[tri[0]]
            + loc.barycentric[1] * values[tri[1]]
            + loc.barycentric[2] * values[tri[2]])
    }

    fn walk(&self, p: Point) -> Option<PointLocation> {
        let mesh = self.mesh;
        let mut t = self.last.min(mesh.triangles.len() - 1);
        let max_steps = 4 * (mesh.bins.nx + mesh.bins.ny) + 16;
        for _ in 0..max_steps {
            let b = mesh.barycentric(t, p);
            let (k, &min) = b
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                .unwrap();
            if min >= -BARY_TOL {
                return Some(PointLocation {
                    triangle: t,
                    barycentric: b,
                });
            }
            let next = mesh.neighbors[t][k];
            if next == NONE {
                return None;
            }
            t = next;
        }
        None
    }

    fn search_bins(&self, p: Point) -> Option<PointLocation> {
        let mesh = self.mesh;
        let bins = &mesh.bins;
        let i = bin_index(p[0], mesh.bbox[0], mesh.bbox[1], bins.nx);
        let j = bin_index(p[1], mesh.bbox[2], mesh.bbox[3], bins.ny);
        let cell = j * bins.nx + i;
        let mut best: Option<(f64, PointLocation)> = None;
        for &t in &bins.items[bins.start[cell]..bins.start[cell + 1]] {
            let b = mesh.barycentric(t, p);
            let min = b.iter().copied().fold(f64::INFINITY, f64::min);
            if min >= -BARY_TOL {
                return Some(PointLocation {
                    triangle: t,
                    barycentric: b,
                });
            }
            if best.as_ref().is_none_or(|(m, _)| min > *m) {
                best = Some((
                    min,
                    PointLocation {
                        triangle: t,
                        barycentric: b,
                    },
                ));
            }
        }
        // points on a shared edge can miss every triangle by a rounding hair
        best.filter(|(m, _)| *m >= -1e-9).map(|(_, loc)| clip(loc))
    }

    fn nearest(&self, p: Point) -> PointLocation {
        let mesh = self.mesh;
        let mut best = (f64::NEG_INFINITY, 0, [1.0, 0.0, 0.0]);
        for t in 0..mesh.triangles.len() {
            let b = mesh.barycentric(t, p);
            let min = b.iter().copied().fold(f64::INFINITY, f64::min);
            if min > best.0 {
                best = (min, t, b);
            }
        }
        clip(PointLocation {
            triangle: best.1,
            barycentric: best.2,
        })
    }
}

fn clip(loc: PointLocation) -> PointLocation {
    let b = loc.barycentric.map(|v| v.max(0.0));
    let s: f64 = b.iter().sum();
    PointLocation {
        triangle: loc.triangle,
        barycentric: b.map(|v| v / s),
    }
}

/// Structured criss-cross mesh of the rectangle on uniform spacing.
pub fn build_rect_mesh(x_min: f64, x_max: f64, y_max: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(x_min < x_max) || !(y_max > 0.0) || nx == 0 || ny == 0 {
        return Err(Error::InvalidInput(format!(
            "degenerate mesh extents x in [{x_min}, {x_max}], y in [0, {y_max}], nx={nx}, ny={ny}"
        )));
    }
    let xs = graded_coordinates(x_min, x_max, nx, x_min, None);
    let ys = graded_coordinates(0.0, y_max, ny, 0.0, None);
    build_tensor_mesh(&xs, &ys)
}

/// Criss-cross mesh on arbitrary strictly increasing coordinate lines.
///
/// Cell diagonals alternate with the parity of `i + j`. Corner nodes take the
/// bottom/top tag.
pub fn build_tensor_mesh(xs: &[f64], ys: &[f64]) -> Result<Mesh> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::InvalidInput("mesh needs at least two coordinate lines per axis".into()));
    }
    if xs.windows(2).any(|w| !(w[0] < w[1])) || ys.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("mesh coordinates must be strictly increasing".into()));
    }
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut tags = Vec::with_capacity(nodes.capacity());
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            nodes.push([x, y]);
            tags.push(if j == 0 {
                BoundaryTag::Bottom
            } else if j == ny {
                BoundaryTag::Top
            } else if i == 0 {
                BoundaryTag::Left
            } else if i == nx {
                BoundaryTag::Right
            } else {
                BoundaryTag::Interior
            });
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    Mesh::new(nodes, triangles, tags)
}

/// `n + 1` coordinates on `[lo, hi]`, uniform when `scale` is `None`,
/// otherwise clustered around `focus` by a sinh map whose fine-cell
/// width is about `scale · (asinh((hi-focus)/scale) - asinh((lo-focus)/scale)) / n`.
pub fn graded_coordinates(lo: f64, hi: f64, n: usize, focus: f64, scale: Option<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = match scale {
        None => (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect(),
        Some(a) => {
            let c = focus.clamp(lo, hi);
            let c1 = ((lo - c) / a).asinh();
            let c2 = ((hi - c) / a).asinh();
            (0..=n)
                .map(|i| c + a * (c1 + (c2 - c1) * i as f64 / n as f64).sinh())
                .collect()
        }
    };
    out[0] = lo;
    out[n] = hi;
    out
}
