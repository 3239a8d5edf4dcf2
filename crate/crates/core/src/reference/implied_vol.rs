use crate::error::{Error, Result};
use crate::reference::bs_price;

/// Search interval for implied volatilities.
pub const VOL_BRACKET: (f64, f64) = (1e-6, 5.0);
const VOL_TOL: f64 = 1e-10;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedVolPoint {
    pub strike: f64,
    pub maturity: f64,
    pub vol: f64,
}

/// Black-Scholes implied volatility of a call price.
///
/// Illinois-style false position inside a shrinking bracket, falling back to
/// bisection whenever an interpolated step fails to halve the bracket.
pub fn implied_vol(price: f64, s: f64, k: f64, t: f64, r: f64) -> Result<f64> {
    let intrinsic = (s - k * (-r * t).exp()).max(0.0);
    if !(price > intrinsic) {
        return Err(Error::Domain {
            price,
            bound: format!("at or below the lower bound max(s - k e^(-rt), 0) = {intrinsic}"),
        });
    }
    if !(price < s) {
        return Err(Error::Domain {
            price,
            bound: format!("at or above the upper bound s = {s}"),
        });
    }
    let f = |sig: f64| bs_price(s, k, t, r, sig) - price;
    let (mut lo, mut hi) = VOL_BRACKET;
    let (mut f_lo, mut f_hi) = (f(lo), f(hi));
    if f_lo > 0.0 {
        return Err(Error::Domain {
            price,
            bound: format!("below the price at vol {lo}"),
        });
    }
    if f_hi < 0.0 {
        return Err(Error::Domain {
            price,
            bound: format!("above the price at vol {hi}"),
        });
    }

    let mut side = 0i8;
    let mut force_bisect = false;
    for _ in 0..MAX_ITER {
        let width = hi - lo;
        if width <= VOL_TOL {
            break;
        }
        let mut x = if force_bisect || f_hi == f_lo {
            0.5 * (lo + hi)
        } else {
            (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
        force_bisect = hi - lo > 0.5 * width;
    }
    Ok(0.5 * (lo + hi))
}
