use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::cli::config::RunConfig;
use crate::error::{Error, Result};
use crate::fem::{full_stencil_nodes, OperatorSet};
use crate::mc::mc_price;
use crate::mesh::BoundaryTag;
use crate::model::MarketSpec;
use crate::reference::{carr_madan_prices, implied_vol, merton_series_price, price_single_fft};
use crate::stepper::run;

const SERIES_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fem,
    Fft,
    Mc,
    Merton,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fem => "fem",
            Method::Fft => "fft",
            Method::Mc => "mc",
            Method::Merton => "merton",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Fft,
    Fem,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceRow {
    pub price: f64,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceRow {
    pub strike: f64,
    pub maturity: f64,
    pub price: f64,
    pub implied_vol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub spot: f64,
    pub fem: f64,
    pub fft: f64,
}

impl CompareRow {
    pub fn rel_diff(&self) -> f64 {
        (self.fem - self.fft).abs() / self.fft
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("output", e)
}

/// Prints the resolved configuration; warnings go to `warn`.
pub fn validate(cfg: &RunConfig, out: &mut dyn Write, warn: &mut dyn Write) -> Result<()> {
    for w in cfg.validate()? {
        writeln!(warn, "warning: {w}").map_err(io_err)?;
    }
    out.write_all(cfg.to_ini().as_bytes()).map_err(io_err)
}

pub fn price(cfg: &RunConfig, method: Method) -> Result<PriceRow> {
    cfg.validate()?;
    let (p, m) = (&cfg.params, &cfg.market);
    match method {
        Method::Fem => {
            let surf = run(p, m, &cfg.grid, &cfg.solver)?;
            Ok(PriceRow {
                price: surf.price_at(m.s0, m.y0)?,
                std_error: None,
            })
        }
        Method::Fft => Ok(PriceRow {
            price: price_single_fft(p, m, m.strike, &cfg.fft)?,
            std_error: None,
        }),
        Method::Mc => {
            let r = mc_price(p, m, &cfg.mc)?;
            Ok(PriceRow {
                price: r.estimate,
                std_error: Some(r.std_error),
            })
        }
        Method::Merton => Ok(PriceRow {
            price: merton_series_price(p, m.s0, m.strike, m.maturity, m.rate, SERIES_TOL)?,
            std_error: None,
        }),
    }
}

pub fn write_price(cfg: &RunConfig, method: Method, row: &PriceRow, out: &mut dyn Write) -> Result<()> {
    let m = &cfg.market;
    let se = row.std_error.map_or(String::new(), |s| s.to_string());
    writeln!(out, "method,s0,K,T,r,y0,price,stderr")
        .and_then(|_| {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                method.name(),
                m.s0,
                m.strike,
                m.maturity,
                m.rate,
                m.y0,
                row.price,
                se
            )
        })
        .map_err(io_err)
}

/// Prices and inverts every `(K, T)` pair, rows ordered by `T` then `K`.
///
/// The FEM engine solves once per maturity at the configured strike and uses
/// the degree-one homogeneity `C(s, K) = (K/K₀) C(s K₀/K, K₀)` for the rest.
pub fn surface(cfg: &RunConfig, engine: Engine, strikes: &[f64], maturities: &[f64]) -> Result<Vec<SurfaceRow>> {
    cfg.validate()?;
    if strikes.iter().any(|&k| !(k > 0.0)) || maturities.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidInput("strikes and maturities must be > 0".into()));
    }
    let (p, base) = (&cfg.params, cfg.market);
    let per_maturity = |t: f64| -> Result<Vec<f64>> {
        let m = MarketSpec { maturity: t, ..base };
        match engine {
            Engine::Fft => {
                let ladder = carr_madan_prices(p, &m, &cfg.fft)?;
                strikes.iter().map(|&k| ladder.price_at(k)).collect()
            }
            Engine::Fem => {
                let surf = run(p, &m, &cfg.grid, &cfg.solver)?;
                let k0 = m.strike;
                strikes
                    .iter()
                    .map(|&k| Ok(k / k0 * surf.price_at(m.s0 * k0 / k, m.y0)?))
                    .collect()
            }
        }
    };
    let prices: Vec<Vec<f64>> = maturities.par_iter().map(|&t| per_maturity(t)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(strikes.len() * maturities.len());
    for (&t, row) in maturities.iter().zip(&prices) {
        for (&k, &c) in strikes.iter().zip(row) {
            rows.push(SurfaceRow {
                strike: k,
                maturity: t,
                price: c,
                implied_vol: implied_vol(c, base.s0, k, t, base.rate).ok(),
            });
        }
    }
    Ok(rows)
}

pub fn write_surface(rows: &[SurfaceRow], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "K,T,price,implied_vol").map_err(io_err)?;
    for r in rows {
        let iv = r.implied_vol.map_or(String::new(), |v| v.to_string());
        writeln!(out, "{},{},{},{}", r.strike, r.maturity, r.price, iv).map_err(io_err)?;
    }
    Ok(())
}

/// FEM prices read off one surface against FFT prices at each spot.
pub fn compare(cfg: &RunConfig, spots: &[f64]) -> Result<Vec<CompareRow>> {
    cfg.validate()?;
    let (p, m) = (&cfg.params, &cfg.market);
    let surf = run(p, m, &cfg.grid, &cfg.solver)?;
    spots
        .iter()
        .map(|&s| {
            let at_spot = MarketSpec { s0: s, ..*m };
            Ok(CompareRow {
                spot: s,
                fem: surf.price_at(s, m.y0)?,
                fft: price_single_fft(p, &at_spot, m.strike, &cfg.fft)?,
            })
        })
        .collect()
}

pub fn write_compare(rows: &[CompareRow], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "S,price_fem,price_fft,rel_diff").map_err(io_err)?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.spot, r.fem, r.fft, r.rel_diff()).map_err(io_err)?;
    }
    Ok(())
}

/// Mesh and operator statistics, with optional exports.
pub fn mesh_info(
    cfg: &RunConfig,
    export_mesh: Option<&Path>,
    export_matrices: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    cfg.validate()?;
    let mesh = cfg.grid.build_mesh(cfg.market.strike)?;
    let mut lines = vec![
        format!("nodes,{}", mesh.n_nodes()),
        format!("triangles,{}", mesh.n_triangles()),
    ];
    for tag in [
        BoundaryTag::Interior,
        BoundaryTag::Left,
        BoundaryTag::Right,
        BoundaryTag::Bottom,
        BoundaryTag::Top,
    ] {
        let n = mesh.tags().iter().filter(|&&t| t == tag).count();
        lines.push(format!("tag_{},{n}", tag.as_str()));
    }
    let [x0, x1, y0, y1] = mesh.bbox();
    lines.push(format!("bbox,{x0},{x1},{y0},{y1}"));
    lines.push(format!("area,{}", mesh.total_area()));
    lines.push(format!("diameter,{}", mesh.diameter()));
    if cfg.params.lambda > 0.0 {
        let (lo, hi) = cfg.params.jump_truncation_bounds(cfg.grid.jump_eps)?;
        lines.push(format!("jump_bounds,{lo},{hi}"));
    }
    let ops = OperatorSet::assemble(&mesh, &cfg.params, &cfg.market, &cfg.grid)?;
    lines.push(format!("nnz_mass,{}", ops.mass.nnz()));
    lines.push(format!("nnz_diffusion,{}", ops.diffusion.nnz()));
    lines.push(format!("nnz_jump,{}", ops.jump.nnz()));
    let full = full_stencil_nodes(&mesh, &cfg.params, &cfg.grid)?;
    lines.push(format!("full_stencil_nodes,{}", full.iter().filter(|&&f| f).count()));
    lines.push(format!("dirichlet_nodes,{}", ops.dirichlet.iter().filter(|&&d| d).count()));
    for l in lines {
        writeln!(out, "{l}").map_err(io_err)?;
    }
    if let Some(path) = export_mesh {
        mesh.write(path)?;
    }
    if let Some(dir) = export_matrices {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        ops.mass.write_coo_file(&dir.join("mass.txt"))?;
        ops.diffusion.write_coo_file(&dir.join("diffusion.txt"))?;
        ops.jump.write_coo_file(&dir.join("jump.txt"))?;
    }
    Ok(())
}
