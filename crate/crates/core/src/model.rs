//! Bates model parameters and the closed-form quantities derived from them.
//!
//! Log-price dynamics under the pricing measure:
//!
//! ```text
//! dX = (r - κ(1) - Y/2) dt + √Y dW¹ + dZ
//! dY = ξ(η - Y) dt + θ √Y dW²,    d⟨W¹, W²⟩ = ρ dt
//! ```
//!
//! where `Z` is compound Poisson with intensity `λ` and Normal(γ, δ²) jump
//! sizes, `γ = ln(1 + k̄) - δ²/2`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// The seven Bates parameters. `gamma` is always derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatesParams {
    /// Mean-reversion speed of the variance.
    pub xi: f64,
    /// Long-run variance.
    pub eta: f64,
    /// Volatility of variance.
    pub theta: f64,
    /// Correlation between the two Brownian drivers.
    pub rho: f64,
    /// Jump intensity.
    pub lambda: f64,
    /// Mean relative jump size, `E[e^J] - 1`.
    pub kbar: f64,
    /// Standard deviation of the log-jump size.
    pub delta: f64,
}

/// Contract and market state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketSpec {
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
    /// Initial variance.
    pub y0: f64,
}

/// The four calibrated parameter sets shipped as presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    S1,
    S2,
    S3,
    S4,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::S1, Preset::S2, Preset::S3, Preset::S4];

    pub fn params(self) -> BatesParams {
        let (xi, eta, theta, rho, kbar, delta, lambda) = match self {
            Preset::S1 => (0.21568, 0.04937, 0.23828, -0.44793, -0.11889, 0.17189, 0.13674),
            Preset::S2 => (0.33502, 0.033582, 0.26969, -0.42404, -0.077973, 0.11048, 0.33785),
            Preset::S3 => (0.13279, 0.18193, 0.37518, -0.59722, 0.080396, 0.057373, 0.05218),
            Preset::S4 => (0.48443, 0.022097, 0.21903, -0.40066, -0.12938, 0.16878, 0.15977),
        };
        BatesParams {
            xi,
            eta,
            theta,
            rho,
            lambda,
            kbar,
            delta,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::S1 => "S1",
            Preset::S2 => "S2",
            Preset::S3 => "S3",
            Preset::S4 => "S4",
        }
    }

    pub fn from_name(name: &str) -> Result<Preset> {
        match name.trim().to_ascii_uppercase().as_str() {
            "S1" => Ok(Preset::S1),
            "S2" => Ok(Preset::S2),
            "S3" => Ok(Preset::S3),
            "S4" => Ok(Preset::S4),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected one of S1, S2, S3, S4)"
            ))),
        }
    }
}

/// A single validation finding.
#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    OutOfRange {
        field: &'static str,
        value: f64,
        constraint: &'static str,
    },
    /// θ² > 2ξη: the variance process can reach zero.
    FellerViolated { theta_sq: f64, two_xi_eta: f64 },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::OutOfRange {
                field,
                value,
                constraint,
            } => write!(f, "{field} = {value} out of range (requires {constraint})"),
            Finding::FellerViolated {
                theta_sq,
                two_xi_eta,
            } => write!(
                f,
                "Feller condition violated: theta^2 = {theta_sq:.6} > 2*xi*eta = {two_xi_eta:.6}"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub hard_errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.hard_errors.is_empty()
    }

    pub fn into_result(self) -> Result<Vec<Finding>> {
        if self.hard_errors.is_empty() {
            Ok(self.warnings)
        } else {
            let msg = self
                .hard_errors
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::InvalidInput(msg))
        }
    }
}

impl BatesParams {
    /// Mean of the log-jump size.
    pub fn gamma(&self) -> f64 {
        (1.0 + self.kbar).ln() - 0.5 * self.delta * self.delta
    }

    /// Same parameters with the jump component switched off.
    pub fn without_jumps(&self) -> BatesParams {
        BatesParams {
            lambda: 0.0,
            ..*self
        }
    }

    /// Cumulant of the unit-time jump process, `κ(z) = λ(e^{γz + δ²z²/2} - 1)`.
    pub fn cumulant(&self, z: f64) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        self.lambda * (self.gamma() * z + 0.5 * self.delta * self.delta * z * z).exp_m1()
    }

    /// `κ(1) = λ k̄`, the jump compensator entering the risk-neutral drift.
    pub fn kappa_one(&self) -> f64 {
        self.lambda * self.kbar
    }

    /// Lévy density of the log-jumps: intensity times the Normal(γ, δ²) density.
    pub fn levy_density(&self, u: f64) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        let d = self.delta;
        let z = (u - self.gamma()) / d;
        self.lambda * (-0.5 * z * z).exp() / (d * (2.0 * PI).sqrt())
    }

    /// Truncation interval `[L_down, L_up]` for the jump integral.
    ///
    /// The Normal density (without λ) equals `eps` at distance
    /// `√(-2δ² ln(ε δ √(2π)))` from its mean; the interval is widened by `|γ|`
    /// so it is symmetric about zero.
    pub fn jump_truncation_bounds(&self, eps: f64) -> Result<(f64, f64)> {
        let d = self.delta;
        let peak = 1.0 / (d * (2.0 * PI).sqrt());
        if !(d > 0.0) {
            return Err(Error::InvalidInput(
                "jump truncation needs delta > 0".to_string(),
            ));
        }
        if !(eps > 0.0 && eps < peak) {
            return Err(Error::Range {
                what: "jump truncation eps",
                value: eps,
                lo: 0.0,
                hi: peak,
            });
        }
        let half = (-2.0 * d * d * (eps * d * (2.0 * PI).sqrt()).ln()).sqrt();
        let up = half + self.gamma().abs();
        Ok((-up, up))
    }

    /// Checks parameter and market admissibility.
    ///
    /// A Feller violation is only a warning; the zero-variance boundary then
    /// carries the well-posedness.
    pub fn validate(&self, market: &MarketSpec) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut check = |ok: bool, field: &'static str, value: f64, constraint: &'static str| {
            if !ok {
                report.hard_errors.push(Finding::OutOfRange {
                    field,
                    value,
                    constraint,
                });
            }
        };
        check(self.xi > 0.0 && self.xi.is_finite(), "xi", self.xi, "xi > 0");
        check(self.eta > 0.0 && self.eta.is_finite(), "eta", self.eta, "eta > 0");
        check(
            self.theta > 0.0 && self.theta.is_finite(),
            "theta",
            self.theta,
            "theta > 0",
        );
        check(
            (-1.0..=1.0).contains(&self.rho),
            "rho",
            self.rho,
            "-1 <= rho <= 1 (correlation out of range)",
        );
        check(
            self.lambda >= 0.0 && self.lambda.is_finite(),
            "lambda",
            self.lambda,
            "lambda >= 0",
        );
        check(
            self.kbar > -1.0 && self.kbar.is_finite(),
            "kbar",
            self.kbar,
            "kbar > -1",
        );
        if self.lambda > 0.0 {
            check(
                self.delta > 0.0 && self.delta.is_finite(),
                "delta",
                self.delta,
                "delta > 0 when lambda > 0",
            );
        } else {
            check(
                self.delta >= 0.0 && self.delta.is_finite(),
                "delta",
                self.delta,
                "delta >= 0",
            );
        }
        check(market.s0 > 0.0 && market.s0.is_finite(), "s0", market.s0, "s0 > 0");
        check(
            market.strike > 0.0 && market.strike.is_finite(),
            "strike",
            market.strike,
            "strike > 0",
        );
        check(
            market.maturity > 0.0 && market.maturity.is_finite(),
            "maturity",
            market.maturity,
            "maturity > 0",
        );
        check(market.rate.is_finite(), "rate", market.rate, "finite rate");
        check(market.y0 > 0.0 && market.y0.is_finite(), "y0", market.y0, "y0 > 0");

        let theta_sq = self.theta * self.theta;
        let two_xi_eta = 2.0 * self.xi * self.eta;
        if theta_sq > two_xi_eta {
            report.warnings.push(Finding::FellerViolated {
                theta_sq,
                two_xi_eta,
            });
        }
        report
    }

    /// Risk-neutral characteristic function of `ln S_t`, `E[e^{iu ln S_t}]`.
    ///
    /// Valid for complex `u`; the Carr-Madan pricer evaluates it on a line
    /// below the real axis.
    pub fn characteristic_fn(&self, market: &MarketSpec, u: Complex64, t: f64) -> Complex64 {
        let iu = Complex64::i() * u;
        let drift = (market.rate - self.kappa_one()) * t;
        let spot = iu * (market.s0.ln() + drift);
        let jump = self.jump_exponent(u) * t;
        (spot + jump + heston_exponent(self, market.y0, u, t)).exp()
    }

    /// `λ(E[e^{iuJ}] - 1)` for Normal(γ, δ²) log-jumps.
    fn jump_exponent(&self, u: Complex64) -> Complex64 {
        if self.lambda == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let d2 = self.delta * self.delta;
        let iu = Complex64::i() * u;
        let mgf = (-0.5 * d2 * u * u + iu * ((1.0 + self.kbar).ln() - 0.5 * d2)).exp();
        self.lambda * (mgf - 1.0)
    }

    /// Whether `E[S_t^p]` stays finite on `(0, t]` (no moment explosion).
    pub fn moment_is_finite(&self, p: f64, t: f64) -> bool {
        // For u = -ip the variance factor is real; it explodes when
        // cosh(εs/2) + (b/ε) sinh(εs/2) reaches zero for some s <= t.
        let u = Complex64::new(0.0, -p);
        let b = Complex64::new(self.xi, 0.0) - Complex64::i() * self.rho * self.theta * u;
        let q = u * u + Complex64::i() * u;
        let eps = (self.theta * self.theta * q + b * b).sqrt();
        let samples = 2000;
        (1..=samples).all(|i| {
            let s = t * i as f64 / samples as f64;
            let half = eps * s * 0.5;
            let base = if eps.norm() < 1e-12 {
                1.0 + b.re * s * 0.5
            } else {
                (half.cosh() + b / eps * half.sinh()).re
            };
            base.is_finite() && base > 0.0
        })
    }
}

/// Log of the stochastic-variance factor of the characteristic function.
///
/// Uses the rotation-free arrangement: with `b = ξ - iρθu`,
/// `ε = √(θ²(u² + iu) + b²)` on the principal branch and `e = exp(-εt)`,
///
/// ```text
/// C = ξη/θ² [ (b - ε)t - 2 ln( ((1 + e) + b(1 - e)/ε) / 2 ) ]
/// D = -(u² + iu) y0 (1 - e)/ε / ( (1 + e) + b(1 - e)/ε )
/// ```
///
/// which equals the cosh/sinh form times the normalising factor
/// `exp(ξηt b/θ²)`; that factor is required for `ψ_t(-i) = s0 e^{rt}`.
pub(crate) fn heston_exponent(p: &BatesParams, y0: f64, u: Complex64, t: f64) -> Complex64 {
    let i = Complex64::i();
    let b = p.xi - i * p.rho * p.theta * u;
    let q = u * u + i * u;
    let eps = (p.theta * p.theta * q + b * b).sqrt();
    let e = (-eps * t).exp();
    let phi = one_minus_exp_over(eps, t);
    let denom = (1.0 + e) + b * phi;
    let c = p.xi * p.eta / (p.theta * p.theta) * ((b - eps) * t - 2.0 * (denom * 0.5).ln());
    let d = -q * y0 * phi / denom;
    c + d
}

/// `(1 - e^{-εt}) / ε`, continuous through `ε = 0`.
fn one_minus_exp_over(eps: Complex64, t: f64) -> Complex64 {
    let z = eps * t;
    if z.norm() < 1e-6 {
        t * (1.0 - z * 0.5 + z * z / 6.0)
    } else {
        (1.0 - (-z).exp()) / eps
    }
}

/// Pure Heston characteristic function of `ln S_t`, written independently of
/// [`BatesParams::characteristic_fn`] (the `g`-ratio form) for cross-checks.
#[allow(clippy::too_many_arguments)]
pub fn heston_characteristic_fn(
    kappa: f64,
    long_var: f64,
    vol_of_var: f64,
    rho: f64,
    s0: f64,
    rate: f64,
    v0: f64,
    u: Complex64,
    t: f64,
) -> Complex64 {
    let i = Complex64::i();
    let sigma2 = vol_of_var * vol_of_var;
    let beta = kappa - rho * vol_of_var * i * u;
    let d = (beta * beta + sigma2 * (i * u + u * u)).sqrt();
    let g = (beta - d) / (beta + d);
    let edt = (-d * t).exp();
    let c = i * u * (s0.ln() + rate * t)
        + kappa * long_var / sigma2 * ((beta - d) * t - 2.0 * ((1.0 - g * edt) / (1.0 - g)).ln());
    let dd = (beta - d) / sigma2 * (1.0 - edt) / (1.0 - g * edt);
    (c + dd * v0).exp()
}
