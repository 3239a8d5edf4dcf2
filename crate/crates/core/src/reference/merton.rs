use crate::error::{Error, Result};
use crate::model::BatesParams;
use crate::reference::bs_price;

const MAX_TERMS: usize = 1000;

/// Merton jump-diffusion call with zero diffusive variance: the value of the
/// Bates call on the `y = 0` boundary.
///
/// ```text
/// C = Σₙ e^{-λ't} (λ't)ⁿ/n! · C_BS(s, k, t, r̂ₙ, σ̂ₙ)
/// λ' = λ(1 + k̄),  σ̂ₙ² = nδ²/t,  r̂ₙ = r + λ(1 - e^{γ+δ²/2}) + n(γ + δ²/2)/t
/// ```
///
/// Summation stops once `s` times the Poisson tail mass beyond the last term
/// falls below `tol`.
pub fn merton_series_price(
    params: &BatesParams,
    s: f64,
    k: f64,
    t: f64,
    r: f64,
    tol: f64,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("series tolerance must be > 0, got {tol}")));
    }
    if t <= 0.0 {
        return Ok((s - k).max(0.0));
    }
    if params.lambda == 0.0 {
        return Ok(bs_price(s, k, t, r, 0.0));
    }
    let log_jump = params.gamma() + 0.5 * params.delta * params.delta;
    let mean = params.lambda * (1.0 + params.kbar) * t;
    let base_rate = r + params.lambda * (1.0 - log_jump.exp());

    let mut weight = (-mean).exp();
    let mut total = 0.0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        let rate_n = base_rate + nf * log_jump / t;
        let sigma_n = (nf * params.delta * params.delta / t).sqrt();
        total += weight * bs_price(s, k, t, rate_n, sigma_n);

        // P(N > n) <= w_{n+1} / (1 - mean/(n+2)) once n + 2 > mean
        let next = weight * mean / (nf + 1.0);
        let ratio = mean / (nf + 2.0);
        if ratio < 1.0 && s * next / (1.0 - ratio) < tol {
            return Ok(total);
        }
        weight = next;
    }
    Err(Error::Convergence {
        what: "Merton series",
        iterations: MAX_TERMS,
        last: weight,
        history: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Preset;

    #[test]
    fn no_jumps_is_degenerate_black_scholes() {
        let p = Preset::S1.params().without_jumps();
        let v = merton_series_price(&p, 100.0, 100.0, 1.0, 0.05, 1e-14).unwrap();
        assert_eq!(v, 100.0 - 100.0 * (-0.05f64).exp());
        assert_eq!(v, bs_price(100.0, 100.0, 1.0, 0.05, 0.0));
    }

    #[test]
    fn expiry_limit() {
        let p = Preset::S1.params();
        assert_eq!(merton_series_price(&p, 120.0, 100.0, 0.0, 0.05, 1e-12).unwrap(), 20.0);
        let near = merton_series_price(&p, 120.0, 100.0, 1e-8, 0.05, 1e-12).unwrap();
        assert!((near - 20.0).abs() < 1e-5, "{near}");
    }

    /// Independent route: condition on the jump count with the plain Poisson
    /// weights and an explicit forward factor, integrating each conditional
    /// lognormal payoff by Simpson's rule.
    #[test]
    fn matches_conditional_quadrature() {
        let p = Preset::S1.params();
        let (s, k, t, r): (f64, f64, f64, f64) = (100.0, 100.0, 1.0, 0.05);
        let gamma = p.gamma();
        let mut expected = 0.0;
        let mut w = (-p.lambda * t).exp();
        for n in 0..40 {
            let nf = n as f64;
            let mu = s.ln() + (r - p.kappa_one()) * t + nf * gamma;
            let sd = nf.sqrt() * p.delta;
            let payoff = if n == 0 {
                (mu.exp() - k).max(0.0)
            } else {
                // Simpson from the kink upward, where the payoff is smooth
                let m = 4000;
                let lo = k.ln().max(mu - 12.0 * sd);
                let h = (mu + 12.0 * sd - lo) / m as f64;
                (0..=m)
                    .map(|i| {
                        let x = lo + i as f64 * h;
                        let z = (x - mu) / sd;
                        let dens = (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
                        let c = if i == 0 || i == m {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        c * h / 3.0 * dens * (x.exp() - k).max(0.0)
                    })
                    .sum()
            };
            expected += w * (-r * t).exp() * payoff;
            w *= p.lambda * t / (nf + 1.0);
        }
        let v = merton_series_price(&p, s, k, t, r, 1e-13).unwrap();
        assert!((v - expected).abs() < 1e-8, "{v} vs {expected}");
    }

    #[test]
    fn rejects_bad_tolerance() {
        let p = Preset::S1.params();
        assert!(merton_series_price(&p, 100.0, 100.0, 1.0, 0.05, 0.0).is_err());
    }
}
