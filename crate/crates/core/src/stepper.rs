//! Characteristic Galerkin time marching in time to maturity.
//!
//! Each step solves
//!
//! ```text
//! (M/Δt + A_D + A_J + rM) F^{n+1} = (1/Δt) T F^n + g_J(τ_{n+1})
//! ```
//!
//! where `T F^n` is the projection of `F^n` evaluated at the feet of the
//! characteristics, followed by Dirichlet row replacement. The convection
//! field does not depend on time, so the feet and the transport matrix `T`
//! are computed once per run.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{apply_dirichlet, boundary_values, lumped_mass, GridConfig, OperatorSet};
use crate::gmres::{self, GmresConfig};
use crate::mesh::{BoundaryTag, Locator, Mesh, Point, Policy};
use crate::model::{BatesParams, MarketSpec};
use crate::quadrature::TriangleRule;
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FootMethod {
    /// Closed-form characteristic.
    Exact,
    ImplicitEuler,
    Rk4,
}

/// How the previous solution enters the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// `M · (F^n at the feet of the nodes)`.
    Nodal,
    /// `∫ F^n(foot(x)) ψ_i(x) dx` by triangle quadrature.
    Galerkin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: FootMethod,
    pub projection: Projection,
    pub linear_tol: f64,
    pub linear_maxit: usize,
    pub restart: usize,
    /// Lag the jump term to the right-hand side.
    pub explicit_jump: bool,
    pub lumped_mass: bool,
    pub symmetric_dirichlet: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: FootMethod::Exact,
            projection: Projection::Galerkin,
            linear_tol: 1e-10,
            linear_maxit: 1000,
            restart: 40,
            explicit_jump: false,
            lumped_mass: false,
            symmetric_dirichlet: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.linear_tol > 0.0) || self.linear_maxit == 0 || self.restart == 0 {
            return Err(Error::Config(
                "linear_tol, linear_maxit and restart must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Convection field `a = (r - κ(1) - y/2 - ρθ/2, ξ(η - y) - θ²/2)`.
pub fn velocity(params: &BatesParams, rate: f64, p: Point) -> [f64; 2] {
    [
        rate - params.kappa_one() - 0.5 * p[1] - 0.5 * params.rho * params.theta,
        params.xi * (params.eta - p[1]) - 0.5 * params.theta * params.theta,
    ]
}

/// End point of `dX/ds = a(X)` started at `p` after time `dt`.
///
/// The result is not clamped; callers locate it with [`Policy::Clamp`].
pub fn trace_foot(params: &BatesParams, market: &MarketSpec, p: Point, dt: f64, method: FootMethod) -> Point {
    let r = market.rate;
    match method {
        FootMethod::Exact => {
            // y' = β - ξy is linear; x' = c - y/2 integrates in closed form
            let c = r - params.kappa_one() - 0.5 * params.rho * params.theta;
            let beta = params.xi * params.eta - 0.5 * params.theta * params.theta;
            let (phi, psi) = decay_integrals(params.xi, dt);
            let y = p[1] * (-params.xi * dt).exp() + beta * phi;
            let y_int = p[1] * phi + beta * psi;
            [p[0] + c * dt - 0.5 * y_int, y]
        }
        FootMethod::ImplicitEuler => {
            let c = r - params.kappa_one() - 0.5 * params.rho * params.theta;
            let beta = params.xi * params.eta - 0.5 * params.theta * params.theta;
            let y = (p[1] + dt * beta) / (1.0 + dt * params.xi);
            [p[0] + dt * (c - 0.5 * y), y]
        }
        FootMethod::Rk4 => {
            let f = |q: Point| velocity(params, r, q);
            let add = |q: Point, k: [f64; 2], h: f64| [q[0] + h * k[0], q[1] + h * k[1]];
            let k1 = f(p);
            let k2 = f(add(p, k1, 0.5 * dt));
            let k3 = f(add(p, k2, 0.5 * dt));
            let k4 = f(add(p, k3, dt));
            [
                p[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                p[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ]
        }
    }
}

/// `φ = (1 - e^{-ξs})/ξ` and `ψ = (s - φ)/ξ`, continuous at `ξ = 0`.
fn decay_integrals(xi: f64, s: f64) -> (f64, f64) {
    let z = xi * s;
    if z.abs() < 1e-4 {
        let phi = s * (1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0);
        let psi = s * s * (0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0);
        (phi, psi)
    } else {
        let phi = -(-z).exp_m1() / xi;
        (phi, (s - phi) / xi)
    }
}

/// Source of characteristic feet for the transport step.
pub trait Characteristics: Sync {
    fn foot(&self, p: Point, dt: f64) -> Point;
}

pub struct BatesFlow<'a> {
    pub params: &'a BatesParams,
    pub market: &'a MarketSpec,
    pub method: FootMethod,
}

impl Characteristics for BatesFlow<'_> {
    fn foot(&self, p: Point, dt: f64) -> Point {
        trace_foot(self.params, self.market, p, dt, self.method)
    }
}

/// Spatially constant velocity, for transport checks.
pub struct ConstantFlow(pub [f64; 2]);

impl Characteristics for ConstantFlow {
    fn foot(&self, p: Point, dt: f64) -> Point {
        [p[0] + dt * self.0[0], p[1] + dt * self.0[1]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeState {
    pub tau: f64,
    pub values: Vec<f64>,
}

pub type BoundaryFn<'a> = Box<dyn Fn(Point, BoundaryTag, f64) -> Result<f64> + Sync + 'a>;

/// Assembled step system for a fixed mesh, operator set and time step.
pub struct Marcher<'a> {
    mesh: &'a Mesh,
    ops: &'a OperatorSet,
    dt: f64,
    system: CsrMatrix,
    transport: CsrMatrix,
    /// Applied after `transport` in the nodal projection.
    mass_after: Option<CsrMatrix>,
    /// Jump matrix lagged to the right-hand side.
    lagged_jump: Option<CsrMatrix>,
    boundary: BoundaryFn<'a>,
    cfg: SolverConfig,
}

impl<'a> Marcher<'a> {
    pub fn new<C: Characteristics>(
        mesh: &'a Mesh,
        ops: &'a OperatorSet,
        flow: &C,
        dt: f64,
        rate: f64,
        cfg: &SolverConfig,
        boundary: BoundaryFn<'a>,
    ) -> Result<Self> {
        cfg.validate()?;
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step must be > 0, got {dt}")));
        }
        let lumped;
        let mass = if cfg.lumped_mass {
            lumped = lumped_mass(mesh);
            &lumped
        } else {
            &ops.mass
        };
        let jump_lumped;
        let jump = if cfg.lumped_mass {
            jump_lumped = ops.jump_lumped(mesh)?;
            &jump_lumped
        } else {
            &ops.jump
        };
        let mut terms = vec![(1.0 / dt + rate, mass), (1.0, &ops.diffusion)];
        if !cfg.explicit_jump {
            terms.push((1.0, jump));
        }
        let mut system = CsrMatrix::linear_combination(&terms);
        if !cfg.symmetric_dirichlet {
            for (i, &d) in ops.dirichlet.iter().enumerate() {
                if d {
                    system.set_identity_row(i);
                }
            }
        }
        let (transport, mass_after) = match cfg.projection {
            Projection::Nodal => (nodal_transport(mesh, flow, dt)?, Some(mass.clone())),
            Projection::Galerkin if cfg.lumped_mass => {
                return Err(Error::Config(
                    "mass lumping needs the nodal projection".into(),
                ))
            }
            Projection::Galerkin => (galerkin_transport(mesh, flow, dt)?, None),
        };
        Ok(Marcher {
            mesh,
            ops,
            dt,
            system,
            transport,
            mass_after,
            lagged_jump: cfg.explicit_jump.then(|| jump.clone()),
            boundary,
            cfg: cfg.clone(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `state` by one time step.
    pub fn step(&self, state: &TimeState) -> Result<TimeState> {
        let tau = state.tau + self.dt;
        let nodes = self.mesh.nodes();
        let tags = self.mesh.tags();
        let values: Vec<f64> = (0..nodes.len())
            .into_par_iter()
            .map(|i| {
                if self.ops.dirichlet[i] {
                    (self.boundary)(nodes[i], tags[i], tau)
                } else {
                    Ok(0.0)
                }
            })
            .collect::<Result<_>>()?;

        let mut moved = self.transport.mul_vec(&state.values);
        if let Some(m) = &self.mass_after {
            // boundary feet may leave the domain; the new boundary value is
            // what pure transport would carry there
            for (v, (&d, &g)) in moved.iter_mut().zip(self.ops.dirichlet.iter().zip(&values)) {
                if d {
                    *v = g;
                }
            }
            moved = m.mul_vec(&moved);
        }
        let g = self.ops.jump_boundary(tau);
        let mut rhs: Vec<f64> = moved.iter().zip(&g).map(|(m, g)| m / self.dt + g).collect();
        if let Some(j) = &self.lagged_jump {
            let lag = j.mul_vec(&state.values);
            rhs.iter_mut().zip(lag).for_each(|(r, l)| *r -= l);
        }

        let mut x = state.values.clone();
        let gcfg = GmresConfig {
            tol: self.cfg.linear_tol,
            max_iter: self.cfg.linear_maxit,
            restart: self.cfg.restart,
        };
        if self.cfg.symmetric_dirichlet {
            let mut a = self.system.clone();
            apply_dirichlet(&mut a, &mut rhs, &self.ops.dirichlet, &values, true);
            gmres::solve(&a, &rhs, &mut x, &gcfg)?;
        } else {
            for (i, &d) in self.ops.dirichlet.iter().enumerate() {
                if d {
                    rhs[i] = values[i];
                }
            }
            gmres::solve(&self.system, &rhs, &mut x, &gcfg)?;
        }
        Ok(TimeState { tau, values: x })
    }
}

/// Rows are the P1 weights of `F^n` at each node's foot.
fn nodal_transport<C: Characteristics>(mesh: &Mesh, flow: &C, dt: f64) -> Result<CsrMatrix> {
    let locs = (0..mesh.n_nodes())
        .into_par_iter()
        .map_init(
            || Locator::new(mesh),
            |loc, i| loc.locate(flow.foot(mesh.nodes()[i], dt), Policy::Clamp),
        )
        .collect::<Result<Vec<_>>>()?;
    let mut b = TripletBuilder::new(mesh.n_nodes(), mesh.n_nodes());
    for (i, l) in locs.iter().enumerate() {
        for (k, &j) in mesh.triangles()[l.triangle].iter().enumerate() {
            b.push(i, j, l.barycentric[k]);
        }
    }
    Ok(b.build())
}

/// `T_ij = ∫ ψ_i(x) ψ_j(foot(x)) dx` with the order-5 triangle rule.
fn galerkin_transport<C: Characteristics>(mesh: &Mesh, flow: &C, dt: f64) -> Result<CsrMatrix> {
    let rule = TriangleRule::new(5)?;
    let locals = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let mut loc = Locator::starting_at(mesh, t);
            let a = mesh.area(t);
            let mut out = Vec::with_capacity(rule.weights.len() * 9);
            for (bq, &wq) in rule.points.iter().zip(&rule.weights) {
                let l = loc.locate(flow.foot(mesh.point_at(t, *bq), dt), Policy::Clamp)?;
                let target = mesh.triangles()[l.triangle];
                for (li, &i) in mesh.triangles()[t].iter().enumerate() {
                    for (k, &j) in target.iter().enumerate() {
                        out.push((i, j, wq * a * bq[li] * l.barycentric[k]));
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut b = TripletBuilder::new(mesh.n_nodes(), mesh.n_nodes());
    for (i, j, v) in locals.into_iter().flatten() {
        b.push(i, j, v);
    }
    Ok(b.build())
}

/// Nodal option values at a fixed time to maturity.
#[derive(Debug, Clone)]
pub struct PriceSurface {
    pub mesh: Mesh,
    pub values: Vec<f64>,
    pub tau: f64,
}

impl PriceSurface {
    /// Interpolated value at spot `s` and variance `y`.
    pub fn price_at(&self, s: f64, y: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::InvalidInput(format!("spot must be > 0, got {s}")));
        }
        self.mesh.interpolate(&self.values, [s.ln(), y], Policy::Strict)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y,value")?;
        for (p, v) in self.mesh.nodes().iter().zip(&self.values) {
            writeln!(out, "{},{},{}", p[0], p[1], v)?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Payoff `max(e^x - K, 0)` at the nodes.
pub fn payoff(mesh: &Mesh, strike: f64) -> Vec<f64> {
    mesh.nodes().iter().map(|p| (p[0].exp() - strike).max(0.0)).collect()
}

/// Prices the call on the default graded mesh of `grid`.
pub fn run(params: &BatesParams, market: &MarketSpec, grid: &GridConfig, cfg: &SolverConfig) -> Result<PriceSurface> {
    let mesh = grid.build_mesh(market.strike)?;
    run_on_mesh(mesh, params, market, grid, cfg)
}

/// Prices the call on a given mesh, which must cover the localised domain.
pub fn run_on_mesh(
    mesh: Mesh,
    params: &BatesParams,
    market: &MarketSpec,
    grid: &GridConfig,
    cfg: &SolverConfig,
) -> Result<PriceSurface> {
    params
        .validate(market)
        .into_result()
        .map_err(|e| Error::Config(e.to_string()))?;
    grid.validate(params)?;
    cfg.validate()?;
    let ops = OperatorSet::assemble(&mesh, params, market, grid)?;
    let flow = BatesFlow {
        params,
        market,
        method: cfg.method,
    };
    let dt = market.maturity / grid.n_steps as f64;
    let boundary: BoundaryFn = Box::new(|p, tag, tau| boundary_values(params, market, grid, p, tag, tau));
    let marcher = Marcher::new(&mesh, &ops, &flow, dt, market.rate, cfg, boundary)?;
    let mut state = TimeState {
        tau: 0.0,
        values: payoff(&mesh, market.strike),
    };
    for _ in 0..grid.n_steps {
        state = marcher.step(&state)?;
    }
    drop(marcher);
    drop(ops);
    Ok(PriceSurface {
        mesh,
        values: state.values,
        tau: state.tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rect_mesh;
    use crate::model::Preset;

    fn s1() -> (BatesParams, MarketSpec) {
        let p = Preset::S1.params();
        (
            p,
            MarketSpec {
                s0: 100.0,
                strike: 100.0,
                maturity: 1.0,
                rate: 0.05,
                y0: p.eta,
            },
        )
    }

    #[test]
    fn stationary_characteristic() {
        let (p, m) = s1();
        let y_bar = p.eta - p.theta * p.theta / (2.0 * p.xi);
        let dt = 0.3;
        for method in [FootMethod::Exact, FootMethod::ImplicitEuler, FootMethod::Rk4] {
            let f = trace_foot(&p, &m, [4.0, y_bar], dt, method);
            assert!((f[1] - y_bar).abs() < 1e-14, "{method:?}");
            let want = 4.0 + dt * (m.rate - p.kappa_one() - y_bar / 2.0 - p.rho * p.theta / 2.0);
            assert!((f[0] - want).abs() < 1e-14, "{method:?}");
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let (p, m) = s1();
        for method in [FootMethod::Exact, FootMethod::ImplicitEuler, FootMethod::Rk4] {
            assert_eq!(trace_foot(&p, &m, [4.2, 0.3], 0.0, method), [4.2, 0.3]);
        }
    }

    #[test]
    fn rk4_agrees_with_exact() {
        let (p, m) = s1();
        for q in [[4.6, 0.0], [3.0, 0.05], [5.5, 0.9]] {
            let a = trace_foot(&p, &m, q, 1e-3, FootMethod::Exact);
            let b = trace_foot(&p, &m, q, 1e-3, FootMethod::Rk4);
            assert!((a[0] - b[0]).abs() < 1e-10 && (a[1] - b[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_foot_with_vanishing_reversion() {
        let (p, m) = s1();
        let q = BatesParams { xi: 1e-9, ..p };
        let a = trace_foot(&q, &m, [4.0, 0.2], 0.5, FootMethod::Exact);
        let b = trace_foot(&q, &m, [4.0, 0.2], 0.5, FootMethod::Rk4);
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }

    #[test]
    fn implicit_euler_local_error_is_second_order() {
        let (p, m) = s1();
        let q = [4.6, 0.4];
        let err = |dt: f64| {
            let a = trace_foot(&p, &m, q, dt, FootMethod::Exact);
            let b = trace_foot(&p, &m, q, dt, FootMethod::ImplicitEuler);
            (a[0] - b[0]).hypot(a[1] - b[1])
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    fn transport_error(projection: Projection) -> f64 {
        let mesh = build_rect_mesh(0.0, 2.0, 1.0, 10, 8).unwrap();
        let ops = OperatorSet::mass_only(&mesh, 1.0, 0.0);
        let a = [0.3, -0.2];
        let f0 = |p: Point| 2.0 * p[0] - 3.0 * p[1] + 1.0;
        let exact = move |p: Point, tau: f64| f0([p[0] + a[0] * tau, p[1] + a[1] * tau]);
        let cfg = SolverConfig {
            projection,
            linear_tol: 1e-14,
            ..Default::default()
        };
        let boundary: BoundaryFn = Box::new(move |p, _, tau| Ok(exact(p, tau)));
        let dt = 0.01;
        let marcher = Marcher::new(&mesh, &ops, &ConstantFlow(a), dt, 0.0, &cfg, boundary).unwrap();
        let mut state = TimeState {
            tau: 0.0,
            values: mesh.nodes().iter().map(|&p| f0(p)).collect(),
        };
        for _ in 0..10 {
            state = marcher.step(&state).unwrap();
        }
        mesh.nodes()
            .iter()
            .zip(&state.values)
            .map(|(&p, v)| (v - exact(p, state.tau)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn affine_profile_is_transported_exactly() {
        assert!(transport_error(Projection::Nodal) <= 1e-10);
        assert!(transport_error(Projection::Galerkin) <= 1e-10);
    }

    #[test]
    fn reaction_only_step_discounts() {
        let mesh = build_rect_mesh(0.0, 2.0, 1.0, 6, 6).unwrap();
        let r = 0.05;
        let dt = 10.0;
        let ops = OperatorSet::mass_only(&mesh, 1.0, r);
        let c = 3.0;
        let boundary: BoundaryFn = Box::new(move |_, _, _| Ok(c / (1.0 + r * dt)));
        let cfg = SolverConfig {
            linear_tol: 1e-14,
            ..Default::default()
        };
        let marcher = Marcher::new(&mesh, &ops, &ConstantFlow([0.0, 0.0]), dt, r, &cfg, boundary).unwrap();
        let out = marcher
            .step(&TimeState {
                tau: 0.0,
                values: vec![c; mesh.n_nodes()],
            })
            .unwrap();
        for v in out.values {
            assert!((v - c / (1.0 + r * dt)).abs() < 1e-12);
        }
    }

    #[test]
    fn deep_out_of_the_money_surface_is_nearly_zero() {
        let (p, m) = s1();
        let m = MarketSpec {
            strike: 1e6,
            ..m
        };
        let grid = GridConfig {
            nx: 16,
            ny: 8,
            n_steps: 5,
            ..Default::default()
        };
        let surf = run(&p, &m, &grid, &SolverConfig::default()).unwrap();
        // the top edge carries F = e^x, so only the low-variance band is near zero
        for (q, v) in surf.mesh.nodes().iter().zip(&surf.values) {
            if q[1] <= 0.05 {
                assert!(v.abs() < 1e-2, "{q:?} {v}");
            }
        }
        assert!(surf.price_at(100.0, p.eta).unwrap().abs() < 1e-2);
    }

    #[test]
    fn surface_csv_layout() {
        let mesh = build_rect_mesh(0.0, 1.0, 1.0, 1, 1).unwrap();
        let s = PriceSurface {
            values: vec![0.0, 1.5, 2.0, 0.25],
            mesh,
            tau: 1.0,
        };
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "x,y,value\n0,0,0\n1,0,1.5\n0,1,2\n1,1,0.25\n"
        );
        assert!(s.price_at(-1.0, 0.5).is_err());
        assert!(s.price_at(10.0, 0.5).is_err());
    }
}
