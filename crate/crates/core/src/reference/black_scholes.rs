use statrs::function::erf::erfc;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Black-Scholes European call.
///
/// `t = 0` gives the payoff and `sigma = 0` the discounted forward intrinsic
/// value.
pub fn bs_price(s: f64, k: f64, t: f64, r: f64, sigma: f64) -> f64 {
    if t <= 0.0 {
        return (s - k).max(0.0);
    }
    let disc_k = k * (-r * t).exp();
    let sd = sigma * t.sqrt();
    if sd <= 0.0 {
        return (s - disc_k).max(0.0);
    }
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / sd;
    let d2 = d1 - sd;
    (s * norm_cdf(d1) - disc_k * norm_cdf(d2)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degenerate_limits() {
        assert_eq!(bs_price(120.0, 100.0, 0.0, 0.05, 0.3), 20.0);
        assert_eq!(bs_price(80.0, 100.0, 0.0, 0.05, 0.3), 0.0);
        let v = bs_price(100.0, 100.0, 1.0, 0.05, 0.0);
        assert!((v - (100.0 - 100.0 * (-0.05f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn atm_value_matches_quadrature() {
        // frozen from an independent 50-digit quadrature of the lognormal
        // expectation (mpmath.quad over the Gaussian)
        let v = bs_price(100.0, 100.0, 1.0, 0.0, 0.2);
        assert!((v - 7.965_567_455_405_804).abs() < 1e-10, "{v}");
    }

    proptest! {
        #[test]
        fn monotone_in_sigma_spot_and_strike(
            s in 50.0..150.0f64, k in 50.0..150.0f64, t in 0.05..3.0f64,
            r in 0.0..0.1f64, sig in 0.05..1.0f64, bump in 1e-3..0.2f64,
        ) {
            let base = bs_price(s, k, t, r, sig);
            prop_assert!(bs_price(s, k, t, r, sig + bump) >= base - 1e-12);
            prop_assert!(bs_price(s + bump, k, t, r, sig) >= base - 1e-12);
            prop_assert!(bs_price(s, k + bump, t, r, sig) <= base + 1e-12);
        }
    }
}
