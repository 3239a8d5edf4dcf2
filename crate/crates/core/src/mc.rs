//! Monte Carlo simulation of the Bates SDEs.
//!
//! Full-truncation Euler for the variance, correlated Gaussian increments,
//! and compound Poisson log-jumps added after the diffusion part of each
//! step. Path `j` (or antithetic pair `j`) draws from its own ChaCha stream,
//! so results do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{BatesParams, MarketSpec};

/// Upper bound on `n_paths × time steps` for a single run.
pub const MAX_WORK: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    /// Euler steps per year.
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 1_000_000,
            n_steps: 250,
            seed: 20060101,
            antithetic: true,
        }
    }
}

impl McConfig {
    fn steps_for(&self, maturity: f64) -> usize {
        ((self.n_steps as f64 * maturity).ceil() as usize).max(1)
    }

    pub fn validate(&self, maturity: f64) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 {
            return Err(Error::Config("mc n_paths and n_steps must be positive".into()));
        }
        if self.antithetic && self.n_paths < 2 {
            return Err(Error::Config("antithetic sampling needs at least two paths".into()));
        }
        let work = self.n_paths as f64 * self.steps_for(maturity) as f64;
        if work > MAX_WORK {
            return Err(Error::Config(format!(
                "mc workload {work:e} path-steps exceeds the cap {MAX_WORK:e}"
            )));
        }
        Ok(())
    }

    fn n_groups(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McResult {
    pub estimate: f64,
    pub std_error: f64,
    /// Paths that entered the estimate.
    pub n_effective: usize,
}

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Poisson draw by CDF inversion; `p0 = e^{-mean}`.
fn poisson<R: Rng>(rng: &mut R, mean: f64, p0: f64) -> u32 {
    let u: f64 = rng.random();
    let (mut n, mut p, mut cdf) = (0u32, p0, p0);
    while u > cdf && p > 0.0 {
        n += 1;
        p *= mean / n as f64;
        cdf += p;
    }
    n
}

struct Euler {
    x0: f64,
    drift: f64,
    dt: f64,
    steps: usize,
    xi: f64,
    eta: f64,
    theta: f64,
    rho: f64,
    rho_bar: f64,
    jump_mean: f64,
    p0: f64,
    gamma: f64,
    delta: f64,
}

impl Euler {
    fn new(params: &BatesParams, market: &MarketSpec, steps: usize) -> Self {
        let dt = market.maturity / steps as f64;
        let jump_mean = params.lambda * dt;
        Euler {
            x0: market.s0.ln(),
            drift: market.rate - params.kappa_one(),
            dt,
            steps,
            xi: params.xi,
            eta: params.eta,
            theta: params.theta,
            rho: params.rho,
            rho_bar: (1.0 - params.rho * params.rho).max(0.0).sqrt(),
            jump_mean,
            p0: (-jump_mean).exp(),
            gamma: params.gamma(),
            delta: params.delta,
        }
    }

    /// Terminal log-prices of `signs.len()` paths sharing one stream, with the
    /// Gaussian draws multiplied by each sign.
    fn run<const N: usize>(&self, rng: &mut ChaCha8Rng, y0: f64, signs: [f64; N]) -> [f64; N] {
        let mut x = [self.x0; N];
        let mut y = [y0; N];
        let sdt = self.dt.sqrt();
        for _ in 0..self.steps {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let jumps = if self.jump_mean > 0.0 {
                poisson(rng, self.jump_mean, self.p0)
            } else {
                0
            };
            let zj: f64 = if jumps > 0 { rng.sample(StandardNormal) } else { 0.0 };
            for k in 0..N {
                let s = signs[k];
                let yp = y[k].max(0.0);
                let vol = yp.sqrt() * sdt;
                x[k] += (self.drift - 0.5 * yp) * self.dt + vol * s * z1;
                y[k] += self.xi * (self.eta - yp) * self.dt
                    + self.theta * vol * s * (self.rho * z1 + self.rho_bar * z2);
                if jumps > 0 {
                    let n = jumps as f64;
                    x[k] += n * self.gamma + n.sqrt() * self.delta * s * zj;
                }
            }
        }
        x
    }
}

/// Terminal log-prices `X_T = ln S_T`, in path order.
pub fn simulate_terminal(params: &BatesParams, market: &MarketSpec, cfg: &McConfig) -> Result<Vec<f64>> {
    cfg.validate(market.maturity)?;
    let euler = Euler::new(params, market, cfg.steps_for(market.maturity));
    let groups = cfg.n_groups();
    Ok(if cfg.antithetic {
        (0..groups)
            .into_par_iter()
            .flat_map_iter(|j| euler.run(&mut stream(cfg.seed, j), market.y0, [1.0, -1.0]))
            .collect()
    } else {
        (0..groups)
            .into_par_iter()
            .map(|j| euler.run(&mut stream(cfg.seed, j), market.y0, [1.0])[0])
            .collect()
    })
}

/// Exact terminal log-prices of the zero-diffusion jump model
/// `X_T = ln s0 + (r - κ(1))T + Σ jumps`.
pub fn simulate_jump_terminal(params: &BatesParams, market: &MarketSpec, cfg: &McConfig) -> Result<Vec<f64>> {
    cfg.validate(0.0)?;
    let base = market.s0.ln() + (market.rate - params.kappa_one()) * market.maturity;
    let mean = params.lambda * market.maturity;
    let p0 = (-mean).exp();
    let gamma = params.gamma();
    let one = |rng: &mut ChaCha8Rng| -> (f64, f64) {
        let n = poisson(rng, mean, p0) as f64;
        let z: f64 = rng.sample(StandardNormal);
        (base + n * gamma, n.sqrt() * params.delta * z)
    };
    let groups = cfg.n_groups();
    Ok(if cfg.antithetic {
        (0..groups)
            .into_par_iter()
            .flat_map_iter(|j| {
                let (m, d) = one(&mut stream(cfg.seed, j));
                [m + d, m - d]
            })
            .collect()
    } else {
        (0..groups)
            .into_par_iter()
            .map(|j| {
                let (m, d) = one(&mut stream(cfg.seed, j));
                m + d
            })
            .collect()
    })
}

/// Mean and standard error of `f(X_T)`, averaging antithetic pairs first.
pub fn estimate<F: Fn(f64) -> f64>(terminal: &[f64], antithetic: bool, f: F) -> McResult {
    let group = if antithetic { 2 } else { 1 };
    let samples: Vec<f64> = terminal
        .chunks_exact(group)
        .map(|c| c.iter().map(|&x| f(x)).sum::<f64>() / group as f64)
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    McResult {
        estimate: mean,
        std_error: (var / n).sqrt(),
        n_effective: samples.len() * group,
    }
}

/// Discounted call prices for several strikes from one set of paths.
pub fn call_prices(terminal: &[f64], antithetic: bool, strikes: &[f64], rate: f64, maturity: f64) -> Vec<McResult> {
    let disc = (-rate * maturity).exp();
    strikes
        .iter()
        .map(|&k| estimate(terminal, antithetic, |x| disc * (x.exp() - k).max(0.0)))
        .collect()
}

/// Monte Carlo price of the European call.
pub fn mc_price(params: &BatesParams, market: &MarketSpec, cfg: &McConfig) -> Result<McResult> {
    let terminal = simulate_terminal(params, market, cfg)?;
    Ok(call_prices(&terminal, cfg.antithetic, &[market.strike], market.rate, market.maturity)[0])
}
