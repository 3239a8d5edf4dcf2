//! Reference pricers: Black-Scholes, the Merton jump series, Carr-Madan FFT
//! and implied-volatility inversion.

mod black_scholes;
mod carr_madan;
mod implied_vol;
mod merton;

pub use black_scholes::{bs_price, norm_cdf};
pub use carr_madan::{carr_madan_from_cf, carr_madan_prices, price_single_fft, FftGrid, StrikeLadder};
pub use implied_vol::{implied_vol, ImpliedVolPoint, VOL_BRACKET};
pub use merton::merton_series_price;
