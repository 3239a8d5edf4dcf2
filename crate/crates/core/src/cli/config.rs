//! Layered run configuration: built-in defaults, then an INI file, then
//! command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ini::Ini;

use crate::error::{Error, Result};
use crate::fem::{BottomBoundary, Extension, GridConfig, RightBoundary};
use crate::mc::McConfig;
use crate::model::{BatesParams, MarketSpec, Preset};
use crate::reference::FftGrid;
use crate::stepper::{FootMethod, Projection, SolverConfig};

const KEYS: &[(&str, &[&str])] = &[
    ("model", &["preset", "xi", "eta", "theta", "rho", "lambda", "kbar", "delta"]),
    ("market", &["s0", "strike", "maturity", "rate", "y0"]),
    (
        "grid",
        &[
            "x_min",
            "x_max",
            "y_max",
            "nx",
            "ny",
            "n_steps",
            "jump_eps",
            "jump_quad_points",
            "tri_quad_order",
            "right_bc",
            "bottom_bc",
            "extension",
            "x_grading",
            "y_grading",
        ],
    ),
    (
        "solver",
        &[
            "method",
            "projection",
            "linear_tol",
            "linear_maxit",
            "restart",
            "explicit_jump",
            "lumped_mass",
            "symmetric_dirichlet",
        ],
    ),
    ("mc", &["n_paths", "n_steps", "seed", "antithetic"]),
    ("fft", &["n_points", "damping", "u_spacing"]),
];

const MODEL_FIELDS: [&str; 7] = ["xi", "eta", "theta", "rho", "lambda", "kbar", "delta"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Preset the model parameters started from, if any.
    pub preset: Option<Preset>,
    pub params: BatesParams,
    pub market: MarketSpec,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub mc: McConfig,
    pub fft: FftGrid,
    pub output: Option<PathBuf>,
}

/// One `section.key = value` assignment and where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Setting {
    pub section: String,
    pub key: String,
    pub value: String,
    pub origin: String,
}

impl Setting {
    /// Parses `section.key=value`.
    pub fn parse_flag(text: &str) -> Result<Setting> {
        let (lhs, value) = text
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected SECTION.KEY=VALUE, got '{text}'")))?;
        let (section, key) = lhs
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("expected SECTION.KEY=VALUE, got '{text}'")))?;
        Ok(Setting::new(section, key, value, "command line"))
    }

    pub fn new(section: &str, key: &str, value: &str, origin: &str) -> Setting {
        Setting {
            section: section.trim().to_string(),
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            origin: origin.to_string(),
        }
    }
}

/// Reads the settings of an INI file.
pub fn read_settings(path: &Path) -> Result<Vec<Setting>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_settings(&text, &path.display().to_string())
}

pub fn parse_settings(text: &str, origin: &str) -> Result<Vec<Setting>> {
    let doc = Ini::load_from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    let mut out = Vec::new();
    for (section, props) in doc.iter() {
        for (key, value) in props.iter() {
            let Some(section) = section else {
                return Err(Error::Config(format!(
                    "{origin}: key '{key}' appears before any [section]"
                )));
            };
            out.push(Setting::new(section, key, value, origin));
        }
    }
    Ok(out)
}

struct Layer {
    values: BTreeMap<(String, String), (String, String)>,
}

impl Layer {
    fn new(settings: &[Setting]) -> Result<Layer> {
        let mut values = BTreeMap::new();
        for s in settings {
            let known = KEYS
                .iter()
                .find(|(sec, _)| *sec == s.section)
                .ok_or_else(|| Error::Config(format!("{}: unknown section [{}]", s.origin, s.section)))?;
            if !known.1.contains(&s.key.as_str()) {
                return Err(Error::Config(format!(
                    "{}: unknown key '{}' in [{}]",
                    s.origin, s.key, s.section
                )));
            }
            values.insert((s.section.clone(), s.key.clone()), (s.value.clone(), s.origin.clone()));
        }
        Ok(Layer { values })
    }

    fn raw(&self, section: &str, key: &str) -> Option<&(String, String)> {
        self.values.get(&(section.to_string(), key.to_string()))
    }

    fn get<T>(&self, section: &str, key: &str, kind: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((v, origin)) => parse(v).map(Some).ok_or_else(|| {
                Error::Config(format!("{origin}: {section}.{key}: expected {kind}, got '{v}'"))
            }),
        }
    }

    fn f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.get(section, key, "a number", |v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
    }

    fn usize(&self, section: &str, key: &str) -> Result<Option<usize>> {
        self.get(section, key, "a non-negative integer", |v| v.parse().ok())
    }

    fn bool(&self, section: &str, key: &str) -> Result<Option<bool>> {
        self.get(section, key, "true or false", |v| v.parse().ok())
    }

    fn choice<T: Copy>(&self, section: &str, key: &str, options: &[(&str, T)]) -> Result<Option<T>> {
        let names: Vec<&str> = options.iter().map(|o| o.0).collect();
        let kind = format!("one of {}", names.join("|"));
        self.get(section, key, &kind, |v| {
            options.iter().find(|o| o.0.eq_ignore_ascii_case(v)).map(|o| o.1)
        })
    }

    /// Grading scale; `none` selects a uniform axis.
    fn grading(&self, section: &str, key: &str) -> Result<Option<Option<f64>>> {
        self.get(section, key, "a positive number or none", |v| {
            if v.eq_ignore_ascii_case("none") {
                Some(None)
            } else {
                v.parse::<f64>().ok().filter(|x| x.is_finite()).map(Some)
            }
        })
    }
}

const RIGHT_BC: [(&str, RightBoundary); 2] = [("spot", RightBoundary::Spot), ("payoff", RightBoundary::Payoff)];
const BOTTOM_BC: [(&str, BottomBoundary); 2] =
    [("merton", BottomBoundary::Merton), ("natural", BottomBoundary::Natural)];
const EXTENSION: [(&str, Extension); 2] = [("payoff", Extension::Payoff), ("exponential", Extension::Exponential)];
const FOOT: [(&str, FootMethod); 3] = [
    ("exact", FootMethod::Exact),
    ("implicit_euler", FootMethod::ImplicitEuler),
    ("rk4", FootMethod::Rk4),
];
const PROJECTION: [(&str, Projection); 2] = [("galerkin", Projection::Galerkin), ("nodal", Projection::Nodal)];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], v: T) -> &'static str {
    options.iter().find(|o| o.1 == v).map(|o| o.0).unwrap_or("?")
}

macro_rules! set {
    ($target:expr, $value:expr) => {
        if let Some(v) = $value {
            $target = v;
        }
    };
}

impl RunConfig {
    /// Resolves settings in order; later settings override earlier ones.
    pub fn resolve(settings: &[Setting]) -> Result<RunConfig> {
        let layer = Layer::new(settings)?;

        let preset = match layer.raw("model", "preset") {
            Some((v, _)) => Some(Preset::from_name(v)?),
            None => None,
        };
        let mut model = [0.0; 7];
        let base = preset.map(|p| p.params());
        if let Some(b) = base {
            model = [b.xi, b.eta, b.theta, b.rho, b.lambda, b.kbar, b.delta];
        }
        for (slot, key) in model.iter_mut().zip(MODEL_FIELDS) {
            match layer.f64("model", key)? {
                Some(v) => *slot = v,
                None if base.is_none() => {
                    return Err(Error::Config(format!(
                        "missing required key model.{key} (or set model.preset)"
                    )))
                }
                None => {}
            }
        }
        let [xi, eta, theta, rho, lambda, kbar, delta] = model;
        let params = BatesParams {
            xi,
            eta,
            theta,
            rho,
            lambda,
            kbar,
            delta,
        };

        let required = |key: &str| Error::Config(format!("missing required key market.{key}"));
        let rate = layer.f64("market", "rate")?.ok_or_else(|| required("rate"))?;
        let y0 = match layer.raw("market", "y0") {
            Some((v, _)) if v.eq_ignore_ascii_case("eta") => eta,
            Some(_) => layer.f64("market", "y0")?.unwrap(),
            None => return Err(required("y0")),
        };
        let market = MarketSpec {
            s0: layer.f64("market", "s0")?.unwrap_or(100.0),
            strike: layer.f64("market", "strike")?.unwrap_or(100.0),
            maturity: layer.f64("market", "maturity")?.unwrap_or(1.0),
            rate,
            y0,
        };

        let mut grid = GridConfig::default();
        set!(grid.x_min, layer.f64("grid", "x_min")?);
        set!(grid.x_max, layer.f64("grid", "x_max")?);
        set!(grid.y_max, layer.f64("grid", "y_max")?);
        set!(grid.nx, layer.usize("grid", "nx")?);
        set!(grid.ny, layer.usize("grid", "ny")?);
        set!(grid.n_steps, layer.usize("grid", "n_steps")?);
        set!(grid.jump_eps, layer.f64("grid", "jump_eps")?);
        set!(grid.jump_quad_points, layer.usize("grid", "jump_quad_points")?);
        set!(grid.tri_quad_order, layer.usize("grid", "tri_quad_order")?);
        set!(grid.right_bc, layer.choice("grid", "right_bc", &RIGHT_BC)?);
        set!(grid.bottom_bc, layer.choice("grid", "bottom_bc", &BOTTOM_BC)?);
        set!(grid.extension, layer.choice("grid", "extension", &EXTENSION)?);
        set!(grid.x_grading, layer.grading("grid", "x_grading")?);
        set!(grid.y_grading, layer.grading("grid", "y_grading")?);

        let mut solver = SolverConfig::default();
        set!(solver.method, layer.choice("solver", "method", &FOOT)?);
        set!(solver.projection, layer.choice("solver", "projection", &PROJECTION)?);
        set!(solver.linear_tol, layer.f64("solver", "linear_tol")?);
        set!(solver.linear_maxit, layer.usize("solver", "linear_maxit")?);
        set!(solver.restart, layer.usize("solver", "restart")?);
        set!(solver.explicit_jump, layer.bool("solver", "explicit_jump")?);
        set!(solver.lumped_mass, layer.bool("solver", "lumped_mass")?);
        set!(solver.symmetric_dirichlet, layer.bool("solver", "symmetric_dirichlet")?);

        let mut mc = McConfig::default();
        set!(mc.n_paths, layer.usize("mc", "n_paths")?);
        set!(mc.n_steps, layer.usize("mc", "n_steps")?);
        set!(mc.seed, layer.get("mc", "seed", "an unsigned 64-bit integer", |v| v.parse().ok())?);
        set!(mc.antithetic, layer.bool("mc", "antithetic")?);

        let mut fft = FftGrid::default();
        set!(fft.n_points, layer.usize("fft", "n_points")?);
        set!(fft.damping, layer.f64("fft", "damping")?);
        set!(fft.u_spacing, layer.f64("fft", "u_spacing")?);

        Ok(RunConfig {
            preset,
            params,
            market,
            grid,
            solver,
            mc,
            fft,
            output: None,
        })
    }

    /// Checks every section; model warnings are returned, hard findings fail.
    pub fn validate(&self) -> Result<Vec<String>> {
        let warnings = self.params.validate(&self.market).into_result()?;
        self.grid.validate(&self.params)?;
        self.solver.validate()?;
        self.mc.validate(self.market.maturity)?;
        self.fft.validate()?;
        Ok(warnings.iter().map(ToString::to_string).collect())
    }

    /// Fully resolved configuration as INI text; reading it back gives the
    /// same configuration bit for bit.
    pub fn to_ini(&self) -> String {
        let mut doc = Ini::new();
        let p = &self.params;
        let mut model = doc.with_section(Some("model"));
        if let Some(preset) = self.preset {
            model.set("preset", preset.name());
        }
        model
            .set("xi", p.xi.to_string())
            .set("eta", p.eta.to_string())
            .set("theta", p.theta.to_string())
            .set("rho", p.rho.to_string())
            .set("lambda", p.lambda.to_string())
            .set("kbar", p.kbar.to_string())
            .set("delta", p.delta.to_string());
        let m = &self.market;
        doc.with_section(Some("market"))
            .set("s0", m.s0.to_string())
            .set("strike", m.strike.to_string())
            .set("maturity", m.maturity.to_string())
            .set("rate", m.rate.to_string())
            .set("y0", m.y0.to_string());
        let g = &self.grid;
        let grading = |a: Option<f64>| a.map_or("none".to_string(), |v| v.to_string());
        doc.with_section(Some("grid"))
            .set("x_min", g.x_min.to_string())
            .set("x_max", g.x_max.to_string())
            .set("y_max", g.y_max.to_string())
            .set("nx", g.nx.to_string())
            .set("ny", g.ny.to_string())
            .set("n_steps", g.n_steps.to_string())
            .set("jump_eps", g.jump_eps.to_string())
            .set("jump_quad_points", g.jump_quad_points.to_string())
            .set("tri_quad_order", g.tri_quad_order.to_string())
            .set("right_bc", name_of(&RIGHT_BC, g.right_bc))
            .set("bottom_bc", name_of(&BOTTOM_BC, g.bottom_bc))
            .set("extension", name_of(&EXTENSION, g.extension))
            .set("x_grading", grading(g.x_grading))
            .set("y_grading", grading(g.y_grading));
        let s = &self.solver;
        doc.with_section(Some("solver"))
            .set("method", name_of(&FOOT, s.method))
            .set("projection", name_of(&PROJECTION, s.projection))
            .set("linear_tol", s.linear_tol.to_string())
            .set("linear_maxit", s.linear_maxit.to_string())
            .set("restart", s.restart.to_string())
            .set("explicit_jump", s.explicit_jump.to_string())
            .set("lumped_mass", s.lumped_mass.to_string())
            .set("symmetric_dirichlet", s.symmetric_dirichlet.to_string());
        doc.with_section(Some("mc"))
            .set("n_paths", self.mc.n_paths.to_string())
            .set("n_steps", self.mc.n_steps.to_string())
            .set("seed", self.mc.seed.to_string())
            .set("antithetic", self.mc.antithetic.to_string());
        doc.with_section(Some("fft"))
            .set("n_points", self.fft.n_points.to_string())
            .set("damping", self.fft.damping.to_string())
            .set("u_spacing", self.fft.u_spacing.to_string());
        let mut buf = Vec::new();
        doc.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ini output is utf-8")
    }
}
