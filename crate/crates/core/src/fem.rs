//! Galerkin operators of the pricing PIDE on P1 triangles.
//!
//! In time to maturity `τ` the equation reads
//!
//! ```text
//! F_τ = ∇·(K∇F) + a·∇F - rF + ∫ [F(x+u, y) - F(x, y)] W(u) du
//! K = [[y/2, ρθy/2], [ρθy/2, θ²y/2]]
//! a = (r - κ(1) - y/2 - ρθ/2, ξ(η - y) - θ²/2)
//! ```
//!
//! and the operators here are the mass matrix `M`, the diffusion matrix
//! `A_D = ∫K∇ψ_j·∇ψ_i`, and the jump matrix `A_J` such that
//! `-A_J F + g_J(τ)` is the Galerkin projection of the jump integral, with
//! `g_J` collecting the part of the integral that leaves the domain.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{build_tensor_mesh, graded_coordinates, BoundaryTag, Locator, Mesh, Point, Policy};
use crate::model::{BatesParams, MarketSpec};
use crate::quadrature::{gauss_legendre_on, TriangleRule};
use crate::reference::merton_series_price;
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Dirichlet value on `x = x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RightBoundary {
    /// `e^{x_max}`, the spot itself.
    Spot,
    /// `max(e^{x_max} - K e^{-rτ}, 0)`.
    Payoff,
}

/// Treatment of the zero-variance edge `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BottomBoundary {
    /// Dirichlet data from the zero-diffusion Merton series.
    Merton,
    /// No condition; the degenerate equation is solved on the edge itself.
    Natural,
}

/// Values of `F` assumed beyond `x_max` inside the jump integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    /// `max(e^{x} - K e^{-rτ}, 0)`.
    Payoff,
    /// `e^{x}`.
    Exponential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub n_steps: usize,
    /// Density level ε at which the jump integral is truncated.
    pub jump_eps: f64,
    pub jump_quad_points: usize,
    pub tri_quad_order: usize,
    pub right_bc: RightBoundary,
    pub bottom_bc: BottomBoundary,
    pub extension: Extension,
    /// sinh clustering scale for x around `ln K`; `None` means uniform.
    pub x_grading: Option<f64>,
    /// sinh clustering scale for y towards `y = 0`; `None` means uniform.
    pub y_grading: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            x_min: 0.0,
            x_max: 400f64.ln(),
            y_max: 1.0,
            nx: 64,
            ny: 64,
            n_steps: 50,
            jump_eps: 1e-10,
            jump_quad_points: 64,
            tri_quad_order: 2,
            right_bc: RightBoundary::Payoff,
            bottom_bc: BottomBoundary::Natural,
            extension: Extension::Payoff,
            x_grading: Some(0.5),
            y_grading: Some(0.1),
        }
    }
}

impl GridConfig {
    pub fn validate(&self, params: &BatesParams) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.x_min < self.x_max) {
            return bad(format!("x_min {} must be below x_max {}", self.x_min, self.x_max));
        }
        if !(self.y_max > 0.0) {
            return bad(format!("y_max must be > 0, got {}", self.y_max));
        }
        if self.nx == 0 || self.ny == 0 || self.n_steps == 0 || self.jump_quad_points == 0 {
            return bad("nx, ny, n_steps and jump_quad_points must be positive".into());
        }
        for (name, g) in [("x_grading", self.x_grading), ("y_grading", self.y_grading)] {
            if let Some(a) = g {
                if !(a > 0.0 && a.is_finite()) {
                    return bad(format!("{name} must be > 0, got {a}"));
                }
            }
        }
        TriangleRule::new(self.tri_quad_order)?;
        if params.lambda > 0.0 {
            params
                .jump_truncation_bounds(self.jump_eps)
                .map_err(|e| Error::Config(format!("jump_eps: {e}")))?;
        }
        Ok(())
    }

    /// Graded criss-cross mesh of the localised domain.
    pub fn build_mesh(&self, strike: f64) -> Result<Mesh> {
        let xs = graded_coordinates(self.x_min, self.x_max, self.nx, strike.ln(), self.x_grading);
        let ys = graded_coordinates(0.0, self.y_max, self.ny, 0.0, self.y_grading);
        build_tensor_mesh(&xs, &ys)
    }
}

/// Exact P1 mass matrix.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    let mut b = TripletBuilder::new(mesh.n_nodes(), mesh.n_nodes());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.area(t);
        for (li, &i) in tri.iter().enumerate() {
            for (lj, &j) in tri.iter().enumerate() {
                b.push(i, j, if li == lj { a / 6.0 } else { a / 12.0 });
            }
        }
    }
    b.build()
}

/// Mass matrix integrated with a triangle rule; exact for order ≥ 2.
pub fn assemble_mass_with(mesh: &Mesh, rule: &TriangleRule) -> CsrMatrix {
    let mut b = TripletBuilder::new(mesh.n_nodes(), mesh.n_nodes());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.area(t);
        for (li, &i) in tri.iter().enumerate() {
            for (lj, &j) in tri.iter().enumerate() {
                let v: f64 = rule.points.iter().zip(&rule.weights).map(|(q, w)| w * q[li] * q[lj]).sum();
                b.push(i, j, a * v);
            }
        }
    }
    b.build()
}

/// Diagonal (row-sum) lumped mass.
pub fn lumped_mass(mesh: &Mesh) -> CsrMatrix {
    let mut b = TripletBuilder::new(mesh.n_nodes(), mesh.n_nodes());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.area(t) / 3.0;
        for &i in tri {
            b.push(i, i, a);
        }
    }
    b.build()
}

/// `A_D` with entries `∫ K∇ψ_j·∇ψ_i`. K is affine in y and the gradients
/// are constant per element, so the centroid value integrates exactly.
pub fn assemble_diffusion(mesh: &Mesh, params: &BatesParams) -> CsrMatrix {
    let mut b = TripletBuilder::new(mesh.n_nodes(), mesh.n_nodes());
    let (rt, t2) = (params.rho * params.theta, params.theta * params.theta);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let y = mesh.point_at(t, [1.0 / 3.0; 3])[1];
        let k = [[0.5 * y, 0.5 * rt * y], [0.5 * rt * y, 0.5 * t2 * y]];
        let g = mesh.gradients(t);
        let a = mesh.area(t);
        for (li, &i) in tri.iter().enumerate() {
            for (lj, &j) in tri.iter().enumerate() {
                let kg = [
                    k[0][0] * g[lj][0] + k[0][1] * g[lj][1],
                    k[1][0] * g[lj][0] + k[1][1] * g[lj][1],
                ];
                b.push(i, j, a * (kg[0] * g[li][0] + kg[1] * g[li][1]));
            }
        }
    }
    b.build()
}

/// Quadrature samples of the jump integral that land beyond `x_max`.
///
/// Row `i` holds pairs `(c, s)` of weight `c = w ψ_i W` and spot
/// `s = e^{x+u}`, sorted by `s` with suffix sums so that
/// `Σ c · max(s - k, 0)` costs one binary search per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionWeights {
    kind: Extension,
    start: Vec<usize>,
    spots: Vec<f64>,
    /// Suffix sums of `c` and `c·s` within each row.
    tail_c: Vec<f64>,
    tail_cs: Vec<f64>,
}

impl ExtensionWeights {
    fn new(kind: Extension, rows: Vec<Vec<(f64, f64)>>) -> Self {
        let mut start = Vec::with_capacity(rows.len() + 1);
        let (mut spots, mut tail_c, mut tail_cs) = (Vec::new(), Vec::new(), Vec::new());
        start.push(0);
        for mut row in rows {
            row.sort_by(|a, b| a.1.total_cmp(&b.1));
            let base = spots.len();
            spots.extend(row.iter().map(|r| r.1));
            tail_c.resize(base + row.len(), 0.0);
            tail_cs.resize(base + row.len(), 0.0);
            let (mut c_sum, mut cs_sum) = (0.0, 0.0);
            for (k, &(c, s)) in row.iter().enumerate().rev() {
                c_sum += c;
                cs_sum += c * s;
                tail_c[base + k] = c_sum;
                tail_cs[base + k] = cs_sum;
            }
            start.push(spots.len());
        }
        ExtensionWeights {
            kind,
            start,
            spots,
            tail_c,
            tail_cs,
        }
    }

    pub fn zeros(n: usize) -> Self {
        ExtensionWeights::new(Extension::Exponential, vec![Vec::new(); n])
    }

    pub fn is_zero_row(&self, i: usize) -> bool {
        self.start[i] == self.start[i + 1]
    }

    /// Extension part of the projected jump integral for discounted strike `k_disc`.
    pub fn evaluate(&self, k_disc: f64) -> Vec<f64> {
        (0..self.start.len() - 1)
            .map(|i| {
                let (a, b) = (self.start[i], self.start[i + 1]);
                if a == b {
                    return 0.0;
                }
                match self.kind {
                    Extension::Exponential => self.tail_cs[a],
                    Extension::Payoff => {
                        let j = a + self.spots[a..b].partition_point(|&s| s <= k_disc);
                        if j == b {
                            0.0
                        } else {
                            self.tail_cs[j] - k_disc * self.tail_c[j]
                        }
                    }
                }
            })
            .collect()
    }
}

/// Jump matrix and the weights of the analytic extension beyond `x_max`.
#[derive(Debug, Clone)]
pub struct JumpOperator {
    pub matrix: CsrMatrix,
    pub extension: ExtensionWeights,
    /// `Σ W_m`, the quadrature value of the intensity on `[L_down, L_up]`.
    /// The local part of `matrix` is this times the rule-integrated mass.
    pub intensity: f64,
}

struct ElementJump {
    rows: [usize; 3],
    entries: BTreeMap<usize, [f64; 3]>,
    outside: Vec<(usize, f64, f64)>,
}

/// Assembles `A_J` by triangle quadrature in `(x, y)` and Gauss-Legendre
/// quadrature in the jump size, evaluating `F_h(x+u, y)` by point location.
pub fn assemble_jump(mesh: &Mesh, params: &BatesParams, grid: &GridConfig) -> Result<JumpOperator> {
    let n = mesh.n_nodes();
    if params.lambda == 0.0 {
        return Ok(JumpOperator {
            matrix: CsrMatrix::zeros(n, n),
            extension: ExtensionWeights::zeros(n),
            intensity: 0.0,
        });
    }
    let (lo, hi) = params.jump_truncation_bounds(grid.jump_eps)?;
    let (us, gw) = gauss_legendre_on(grid.jump_quad_points, lo, hi);
    let ws: Vec<f64> = us.iter().zip(&gw).map(|(&u, &w)| w * params.levy_density(u)).collect();
    let total_w: f64 = ws.iter().sum();
    let rule = TriangleRule::new(grid.tri_quad_order)?;
    let [x_min, x_max, _, _] = mesh.bbox();

    let element = |t: usize| -> Result<ElementJump> {
        let tri = mesh.triangles()[t];
        let area = mesh.area(t);
        let mut locator = Locator::starting_at(mesh, t);
        let mut out = ElementJump {
            rows: tri,
            entries: BTreeMap::new(),
            outside: Vec::new(),
        };
        for (bq, &wq) in rule.points.iter().zip(&rule.weights) {
            let w = wq * area;
            let [xq, yq] = mesh.point_at(t, *bq);
            for li in 0..3 {
                for (lj, &j) in tri.iter().enumerate() {
                    out.entries.entry(j).or_insert([0.0; 3])[li] += w * bq[li] * bq[lj] * total_w;
                }
            }
            for (&u, &wm) in us.iter().zip(&ws) {
                let xs = xq + u;
                if xs < x_min {
                    continue;
                }
                if xs > x_max {
                    let e = xs.exp();
                    for li in 0..3 {
                        out.outside.push((li, w * bq[li] * wm, e));
                    }
                    continue;
                }
                let loc = locator
                    .locate([xs, yq], Policy::Clamp)
                    .map_err(|_| Error::Location { x: xs, y: yq })?;
                let target = mesh.triangles()[loc.triangle];
                for (k, &j) in target.iter().enumerate() {
                    let c = w * wm * loc.barycentric[k];
                    let e = out.entries.entry(j).or_insert([0.0; 3]);
                    for li in 0..3 {
                        e[li] -= c * bq[li];
                    }
                }
            }
        }
        Ok(out)
    };

    let mut b = TripletBuilder::new(n, n);
    let mut outside = vec![Vec::new(); n];
    let n_tri = mesh.n_triangles();
    const CHUNK: usize = 2048;
    for start in (0..n_tri).step_by(CHUNK) {
        let locals: Vec<ElementJump> = (start..(start + CHUNK).min(n_tri))
            .into_par_iter()
            .map(element)
            .collect::<Result<_>>()?;
        // element-ordered accumulation keeps the sums bit-reproducible
        for el in locals {
            for (&j, vals) in &el.entries {
                for li in 0..3 {
                    b.push(el.rows[li], j, vals[li]);
                }
            }
            for (li, c, s) in el.outside {
                outside[el.rows[li]].push((c, s));
            }
        }
    }
    Ok(JumpOperator {
        matrix: b.build(),
        extension: ExtensionWeights::new(grid.extension, outside),
        intensity: total_w,
    })
}

/// Nodes whose jump stencil `supp ψ_i + [L_down, L_up]` stays inside the x-range.
pub fn full_stencil_nodes(mesh: &Mesh, params: &BatesParams, grid: &GridConfig) -> Result<Vec<bool>> {
    let (lo, hi) = params.jump_truncation_bounds(grid.jump_eps)?;
    let [x_min, x_max, _, _] = mesh.bbox();
    Ok(mesh
        .support_x_extent()
        .iter()
        .map(|&(a, b)| a + lo >= x_min && b + hi <= x_max)
        .collect())
}

/// Dirichlet data of the localised problem at time to maturity `tau`.
pub fn boundary_values(
    params: &BatesParams,
    market: &MarketSpec,
    grid: &GridConfig,
    p: Point,
    tag: BoundaryTag,
    tau: f64,
) -> Result<f64> {
    let s = p[0].exp();
    let k_disc = market.strike * (-market.rate * tau).exp();
    match tag {
        BoundaryTag::Left => Ok(0.0),
        BoundaryTag::Right => Ok(match grid.right_bc {
            RightBoundary::Spot => s,
            RightBoundary::Payoff => (s - k_disc).max(0.0),
        }),
        BoundaryTag::Top => Ok(s),
        BoundaryTag::Bottom => merton_series_price(params, s, market.strike, tau, market.rate, 1e-12),
        BoundaryTag::Interior => Err(Error::InvalidInput(format!(
            "boundary value requested at interior point ({}, {})",
            p[0], p[1]
        ))),
    }
}

/// Row replacement for Dirichlet nodes: identity rows and `rhs_i = g_i`.
///
/// With `symmetric` the Dirichlet columns of the remaining rows are also
/// eliminated into the right-hand side.
pub fn apply_dirichlet(matrix: &mut CsrMatrix, rhs: &mut [f64], mask: &[bool], values: &[f64], symmetric: bool) {
    if symmetric {
        let moved = matrix.eliminate_columns(mask, values, mask);
        for (r, m) in rhs.iter_mut().zip(moved) {
            *r -= m;
        }
    }
    for (i, &d) in mask.iter().enumerate() {
        if d {
            matrix.set_identity_row(i);
            rhs[i] = values[i];
        }
    }
}

/// Nodes carrying Dirichlet data. With a natural bottom edge only its two
/// corners stay constrained.
pub fn dirichlet_mask(mesh: &Mesh, bottom: BottomBoundary) -> Vec<bool> {
    let [x_min, x_max, _, _] = mesh.bbox();
    mesh.tags()
        .iter()
        .zip(mesh.nodes())
        .map(|(&t, p)| match (t, bottom) {
            (BoundaryTag::Bottom, BottomBoundary::Natural) => p[0] == x_min || p[0] == x_max,
            _ => t.is_boundary(),
        })
        .collect()
}

/// Everything the time stepper needs that does not change between steps.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub mass: CsrMatrix,
    pub diffusion: CsrMatrix,
    pub jump: CsrMatrix,
    pub extension: ExtensionWeights,
    pub jump_intensity: f64,
    /// Dirichlet flag per node.
    pub dirichlet: Vec<bool>,
    tri_quad_order: usize,
    strike: f64,
    rate: f64,
}

impl OperatorSet {
    pub fn assemble(mesh: &Mesh, params: &BatesParams, market: &MarketSpec, grid: &GridConfig) -> Result<Self> {
        let jump = assemble_jump(mesh, params, grid)?;
        Ok(OperatorSet {
            mass: assemble_mass(mesh),
            diffusion: assemble_diffusion(mesh, params),
            jump: jump.matrix,
            extension: jump.extension,
            jump_intensity: jump.intensity,
            dirichlet: dirichlet_mask(mesh, grid.bottom_bc),
            tri_quad_order: grid.tri_quad_order,
            strike: market.strike,
            rate: market.rate,
        })
    }

    /// Mass-only operators, for transport and reaction checks.
    pub fn mass_only(mesh: &Mesh, strike: f64, rate: f64) -> Self {
        let n = mesh.n_nodes();
        OperatorSet {
            mass: assemble_mass(mesh),
            diffusion: CsrMatrix::zeros(n, n),
            jump: CsrMatrix::zeros(n, n),
            extension: ExtensionWeights::zeros(n),
            jump_intensity: 0.0,
            dirichlet: mesh.tags().iter().map(|t| t.is_boundary()).collect(),
            tri_quad_order: 2,
            strike,
            rate,
        }
    }

    /// `A_J` with its local part `-F(x)∫W` lumped onto the diagonal. Row
    /// sums are unchanged and all off-diagonal entries are non-positive.
    pub fn jump_lumped(&self, mesh: &Mesh) -> Result<CsrMatrix> {
        if self.jump_intensity == 0.0 {
            return Ok(self.jump.clone());
        }
        let rule = TriangleRule::new(self.tri_quad_order)?;
        let w = self.jump_intensity;
        Ok(CsrMatrix::linear_combination(&[
            (1.0, &self.jump),
            (-w, &assemble_mass_with(mesh, &rule)),
            (w, &lumped_mass(mesh)),
        ]))
    }

    /// `g_J(τ)`, the extension part of the projected jump integral.
    pub fn jump_boundary(&self, tau: f64) -> Vec<f64> {
        self.extension.evaluate(self.strike * (-self.rate * tau).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rect_mesh;
    use crate::model::Preset;

    fn s1_market() -> MarketSpec {
        let p = Preset::S1.params();
        MarketSpec {
            s0: 100.0,
            strike: 100.0,
            maturity: 1.0,
            rate: 0.05,
            y0: p.eta,
        }
    }

    #[test]
    fn single_element_mass() {
        let m = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![BoundaryTag::Bottom; 3],
        )
        .unwrap();
        let mm = assemble_mass(&m);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.5 / 6.0 } else { 0.5 / 12.0 };
                assert!((mm.get(i, j) - want).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn mass_sums_to_area_and_is_symmetric() {
        let grid = GridConfig {
            nx: 20,
            ny: 12,
            ..Default::default()
        };
        let mesh = grid.build_mesh(100.0).unwrap();
        let m = assemble_mass(&mesh);
        let area = grid.x_max * grid.y_max;
        assert!((m.total_sum() - area).abs() <= 1e-12 * area);
        assert_eq!(m.asymmetry(), 0.0);
        assert!((lumped_mass(&mesh).total_sum() - area).abs() <= 1e-12 * area);
    }

    /// Cotangent-formula Laplacian, scaled by the element mean of `y/2`.
    fn cotangent_assembly(mesh: &Mesh) -> Vec<Vec<f64>> {
        let n = mesh.n_nodes();
        let mut a = vec![vec![0.0; n]; n];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let v = mesh.vertices(t);
            let c = (v[0][1] + v[1][1] + v[2][1]) / 3.0 / 2.0;
            for k in 0..3 {
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                let e1 = [v[i][0] - v[k][0], v[i][1] - v[k][1]];
                let e2 = [v[j][0] - v[k][0], v[j][1] - v[k][1]];
                let cot = (e1[0] * e2[0] + e1[1] * e2[1]) / (e1[0] * e2[1] - e1[1] * e2[0]).abs();
                let off = -0.5 * c * cot;
                let (gi, gj) = (tri[i], tri[j]);
                a[gi][gj] += off;
                a[gj][gi] += off;
                a[gi][gi] -= off;
                a[gj][gj] -= off;
            }
        }
        a
    }

    #[test]
    fn isotropic_case_matches_cotangent_assembly() {
        let params = BatesParams {
            rho: 0.0,
            theta: 1.0,
            ..Preset::S2.params()
        };
        let xs = graded_coordinates(0.0, 3.0, 9, 1.4, Some(0.6));
        let ys = graded_coordinates(0.0, 1.0, 7, 0.0, Some(0.3));
        let mesh = build_tensor_mesh(&xs, &ys).unwrap();
        let got = assemble_diffusion(&mesh, &params).to_dense();
        let want = cotangent_assembly(&mesh);
        for (gr, wr) in got.iter().zip(&want) {
            for (g, w) in gr.iter().zip(wr) {
                assert!((g - w).abs() < 1e-12, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn diffusion_kills_constants_and_is_psd() {
        use rand::{Rng, SeedableRng};
        let mesh = GridConfig {
            nx: 16,
            ny: 16,
            ..Default::default()
        }
        .build_mesh(100.0)
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for preset in Preset::ALL {
            let a = assemble_diffusion(&mesh, &preset.params());
            assert!(a.row_sums().iter().all(|s| s.abs() < 1e-12));
            assert!(a.asymmetry() < 1e-12);
            for _ in 0..100 {
                let v: Vec<f64> = (0..mesh.n_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let av = a.mul_vec(&v);
                let q: f64 = v.iter().zip(&av).map(|(x, y)| x * y).sum();
                let vv: f64 = v.iter().map(|x| x * x).sum();
                assert!(q / vv >= -1e-10);
            }
        }
    }

    #[test]
    fn bottom_strip_scales_linearly() {
        let p = Preset::S1.params();
        let norm = |h: f64| {
            let mesh = build_rect_mesh(0.0, 4.0 * h, h, 4, 1).unwrap();
            let a = assemble_diffusion(&mesh, &p);
            a.to_dense().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
        };
        let ratio = norm(0.1) / norm(0.05);
        assert!((ratio - 2.0).abs() < 1e-10, "{ratio}");
    }

    #[test]
    fn no_jumps_gives_zero_operator() {
        let p = Preset::S1.params().without_jumps();
        let mesh = build_rect_mesh(0.0, 6.0, 1.0, 8, 4).unwrap();
        let j = assemble_jump(&mesh, &p, &GridConfig::default()).unwrap();
        assert_eq!(j.matrix.nnz(), 0);
        assert!(j.extension.evaluate(50.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jump_rows_sum_to_zero_on_full_stencils() {
        let grid = GridConfig {
            nx: 24,
            ny: 8,
            ..Default::default()
        };
        let mesh = grid.build_mesh(100.0).unwrap();
        for preset in Preset::ALL {
            let p = preset.params();
            let j = assemble_jump(&mesh, &p, &grid).unwrap();
            let full = full_stencil_nodes(&mesh, &p, &grid).unwrap();
            assert!(full.iter().any(|&f| f));
            for (i, s) in j.matrix.row_sums().iter().enumerate() {
                if full[i] {
                    assert!(s.abs() <= 1e-10 * p.lambda, "{preset:?} row {i}: {s}");
                    assert!(j.extension.is_zero_row(i));
                }
            }
        }
    }

    /// Jump integral of `e^x` is `κ(1) e^x`, so `-A_J e^x ≈ κ(1) M e^x`.
    fn exponential_action_error(n: usize) -> f64 {
        let p = Preset::S1.params();
        let grid = GridConfig {
            x_min: 0.0,
            x_max: 6.0,
            y_max: 0.5,
            nx: n,
            ny: 4,
            x_grading: None,
            y_grading: None,
            ..Default::default()
        };
        let mesh = grid.build_mesh(100.0).unwrap();
        let j = assemble_jump(&mesh, &p, &grid).unwrap();
        let m = assemble_mass(&mesh);
        let v: Vec<f64> = mesh.nodes().iter().map(|q| q[0].exp()).collect();
        let jv = j.matrix.mul_vec(&v);
        let mv = m.mul_vec(&v);
        let full = full_stencil_nodes(&mesh, &p, &grid).unwrap();
        let k1 = p.kappa_one();
        (0..mesh.n_nodes())
            .filter(|&i| full[i])
            .map(|i| ((-jv[i]) / (k1 * mv[i]) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn jump_action_on_exponentials() {
        let coarse = exponential_action_error(24);
        let fine = exponential_action_error(48);
        assert!(fine < 0.01, "{fine}");
        assert!(fine / coarse < 0.6, "{coarse} -> {fine}");
    }

    #[test]
    fn lumped_jump_is_a_z_matrix_with_equal_row_sums() {
        let grid = GridConfig {
            nx: 16,
            ny: 6,
            ..Default::default()
        };
        let mesh = grid.build_mesh(100.0).unwrap();
        let p = Preset::S3.params();
        let m = s1_market();
        let ops = OperatorSet::assemble(&mesh, &p, &m, &grid).unwrap();
        let lumped = ops.jump_lumped(&mesh).unwrap();
        for (a, b) in ops.jump.row_sums().iter().zip(lumped.row_sums()) {
            assert!((a - b).abs() < 1e-12 * p.lambda);
        }
        for i in 0..mesh.n_nodes() {
            let (cols, vals) = lumped.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i {
                    assert!(v <= 1e-15, "({i}, {j}) = {v}");
                }
            }
        }
    }

    #[test]
    fn jump_assembly_is_deterministic() {
        let grid = GridConfig {
            nx: 16,
            ny: 8,
            ..Default::default()
        };
        let mesh = grid.build_mesh(100.0).unwrap();
        let p = Preset::S4.params();
        let a = assemble_jump(&mesh, &p, &grid).unwrap();
        let b = assemble_jump(&mesh, &p, &grid).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.extension, b.extension);
    }

    #[test]
    fn extension_weights_match_direct_sums() {
        let rows = vec![
            vec![(0.5, 120.0), (0.25, 90.0), (1.0, 300.0)],
            vec![],
            vec![(2.0, 100.0)],
        ];
        let direct = |k: f64, kind: Extension| -> Vec<f64> {
            rows.iter()
                .map(|r| {
                    r.iter()
                        .map(|&(c, s)| match kind {
                            Extension::Payoff => c * (s - k).max(0.0),
                            Extension::Exponential => c * s,
                        })
                        .sum()
                })
                .collect()
        };
        for kind in [Extension::Payoff, Extension::Exponential] {
            let w = ExtensionWeights::new(kind, rows.clone());
            for k in [0.0, 50.0, 95.0, 100.0, 150.0, 1e6] {
                let got = w.evaluate(k);
                for (g, d) in got.iter().zip(direct(k, kind)) {
                    assert!((g - d).abs() < 1e-12, "{kind:?} k={k}: {g} vs {d}");
                }
            }
        }
    }

    #[test]
    fn boundary_values_examples() {
        let m = s1_market();
        let g = GridConfig::default();
        let p = Preset::S1.params();
        assert_eq!(boundary_values(&p, &m, &g, [0.0, 0.3], BoundaryTag::Left, 1.0).unwrap(), 0.0);
        let top = boundary_values(&p, &m, &g, [100f64.ln(), 1.0], BoundaryTag::Top, 0.5).unwrap();
        assert!((top - 100.0).abs() < 1e-12);
        let q = p.without_jumps();
        let bottom = boundary_values(&q, &m, &g, [100f64.ln(), 0.0], BoundaryTag::Bottom, 1.0).unwrap();
        assert!((bottom - (100.0 - 100.0 * (-0.05f64).exp())).abs() < 1e-10);
        assert!((bottom - 4.877).abs() < 1e-3);
        let right = boundary_values(&p, &m, &g, [g.x_max, 0.3], BoundaryTag::Right, 1.0).unwrap();
        assert!((right - (400.0 - 100.0 * (-0.05f64).exp())).abs() < 1e-9);
        assert!(boundary_values(&p, &m, &g, [1.0, 0.3], BoundaryTag::Interior, 1.0).is_err());
    }

    #[test]
    fn dirichlet_rows_and_idempotence() {
        let mesh = build_rect_mesh(0.0, 1.0, 1.0, 4, 4).unwrap();
        let p = Preset::S1.params();
        let base = CsrMatrix::linear_combination(&[(1.0, &assemble_mass(&mesh)), (1.0, &assemble_diffusion(&mesh, &p))]);
        let mask: Vec<bool> = mesh.tags().iter().map(|t| t.is_boundary()).collect();
        let values: Vec<f64> = (0..mesh.n_nodes()).map(|i| i as f64 * 0.5).collect();
        for symmetric in [false, true] {
            let mut a = base.clone();
            let mut rhs = vec![1.0; mesh.n_nodes()];
            apply_dirichlet(&mut a, &mut rhs, &mask, &values, symmetric);
            if !symmetric {
                for i in (0..mesh.n_nodes()).filter(|&i| !mask[i]) {
                    assert_eq!(a.row(i), base.row(i));
                }
            }
            let (a1, r1) = (a.clone(), rhs.clone());
            apply_dirichlet(&mut a, &mut rhs, &mask, &values, symmetric);
            assert_eq!(a, a1);
            assert_eq!(rhs, r1);
            let mut x = vec![0.0; mesh.n_nodes()];
            crate::gmres::solve(&a, &rhs, &mut x, &Default::default()).unwrap();
            for i in (0..mesh.n_nodes()).filter(|&i| mask[i]) {
                assert!((x[i] - values[i]).abs() < 1e-9);
            }
        }
    }
}
