//! Bachelier and Black-Scholes prices in total-standard-deviation form,
//! the Hagan et al. (2002) SABR implied volatility, and implied-vol
//! inversion.
//!
//! Prices are undiscounted. `s` is the total standard deviation over the
//! option life: currency units for Bachelier, log units for Black-Scholes.

use crate::error::{Error, Result};
use crate::model::{Backbone, OptionType, SabrParams};
use crate::scalar::Real;
use crate::special::{norm_cdf, norm_pdf};

/// Bachelier (normal model) price. `forward` may be zero or negative.
pub fn bachelier_price<T: Real>(forward: T, strike: T, s: T, option_type: OptionType) -> Result<T> {
    if !(s >= T::zero()) {
        return Err(Error::Domain(format!("total stdev must be >= 0, got {s}")));
    }
    Ok(bachelier_unchecked(forward, strike, s, option_type))
}

#[inline]
pub(crate) fn bachelier_unchecked<T: Real>(forward: T, strike: T, s: T, option_type: OptionType) -> T {
    let sign = match option_type {
        OptionType::Call => T::one(),
        OptionType::Put => -T::one(),
    };
    let moneyness = sign * (forward - strike);
    if s == T::zero() {
        return moneyness.pos();
    }
    let d = moneyness / s;
    moneyness * norm_cdf(d) + s * norm_pdf(d)
}

/// Black-Scholes (Black-76) price on a positive forward.
pub fn black_scholes_price<T: Real>(forward: T, strike: T, s: T, option_type: OptionType) -> Result<T> {
    if !(forward > T::zero()) {
        return Err(Error::Domain(format!("forward must be > 0, got {forward}")));
    }
    if !(strike > T::zero()) {
        return Err(Error::Domain(format!("strike must be > 0, got {strike}")));
    }
    if !(s >= T::zero()) {
        return Err(Error::Domain(format!("total stdev must be >= 0, got {s}")));
    }
    Ok(black_scholes_unchecked(forward, strike, s, option_type))
}

#[inline]
pub(crate) fn black_scholes_unchecked<T: Real>(forward: T, strike: T, s: T, option_type: OptionType) -> T {
    if s == T::zero() {
        return match option_type {
            OptionType::Call => (forward - strike).pos(),
            OptionType::Put => (strike - forward).pos(),
        };
    }
    let d1 = (forward / strike).ln() / s + T::lit(0.5) * s;
    let d2 = d1 - s;
    match option_type {
        OptionType::Call => forward * norm_cdf(d1) - strike * norm_cdf(d2),
        OptionType::Put => strike * norm_cdf(-d2) - forward * norm_cdf(-d1),
    }
}

/// `zeta / x(zeta)` of the Hagan expansion, with its small-`zeta` limit.
fn zeta_over_x<T: Real>(zeta: T, rho: T) -> T {
    let half = T::lit(0.5);
    if zeta.abs() < T::lit(1e-7) {
        return T::one() - half * rho * zeta;
    }
    let one = T::one();
    let root = (one - (rho + rho) * zeta + zeta * zeta).sqrt();
    let x = if one - rho < T::lit(1e-12) {
        if zeta >= one {
            return T::zero();
        }
        -(-zeta).ln_1p()
    } else {
        ((root + zeta - rho) / (one - rho)).ln()
    };
    if x.is_finite() {
        zeta / x
    } else {
        T::zero()
    }
}

/// Hagan et al. asymptotic lognormal implied volatility for constant-
/// parameter SABR with `beta` in `{0, 1}`, at forward `s0`.
pub fn hagan_implied_vol<T: Real>(params: &SabrParams<T>, strike: T, maturity: T) -> Result<T> {
    params.validate()?;
    if params.has_term_structure() {
        return Err(Error::Unsupported(
            "Hagan expansion requires constant nu and rho".into(),
        ));
    }
    if !(strike > T::zero()) || !(maturity > T::zero()) {
        return Err(Error::Domain("strike and maturity must be > 0".into()));
    }
    let nu = params.nu.values()[0];
    let rho = params.rho.values()[0];
    let f = params.s0;
    let k = strike;
    let log_fk = (f / k).ln();
    let c24 = T::lit(24.0);
    let skew_smile = (T::lit(2.0) - T::lit(3.0) * rho * rho) / c24 * nu * nu;
    let vol = match params.backbone()? {
        Backbone::Lognormal => {
            let alpha = params.sigma0;
            let zeta = nu / alpha * log_fk;
            let correction = T::one() + (rho * nu * alpha / T::lit(4.0) + skew_smile) * maturity;
            alpha * zeta_over_x(zeta, rho) * correction
        }
        Backbone::Normal => {
            // absolute normal vol of the s0-scaled diffusion
            let alpha = params.sigma0 * params.s0;
            let fk = f * k;
            let zeta = nu / alpha * fk.sqrt() * log_fk;
            // ln(F/K) / (F - K), continuous through K = F
            let ratio = if log_fk == T::zero() {
                T::one() / k
            } else {
                log_fk / (k * log_fk.exp_m1())
            };
            let correction = T::one() + (alpha * alpha / (c24 * fk) + skew_smile) * maturity;
            alpha * ratio * zeta_over_x(zeta, rho) * correction
        }
    };
    Ok(vol)
}

/// Closed form used to quote an implied volatility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VolModel {
    /// Bachelier; the implied vol is in price units per sqrt(year).
    Normal,
    /// Black-Scholes; the implied vol is per sqrt(year) in log units.
    Lognormal,
}

/// Volatility `v` such that the closed form with total stdev `v * sqrt(T)`
/// reproduces `price`. Bracketed bisection refined by Newton steps.
pub fn implied_vol_from_price<T: Real>(
    price: T,
    forward: T,
    strike: T,
    maturity: T,
    option_type: OptionType,
    model: VolModel,
) -> Result<T> {
    if !(maturity > T::zero()) {
        return Err(Error::Domain("maturity must be > 0".into()));
    }
    if model == VolModel::Lognormal && (!(forward > T::zero()) || !(strike > T::zero())) {
        return Err(Error::Domain(
            "lognormal inversion needs positive forward and strike".into(),
        ));
    }
    let intrinsic = match option_type {
        OptionType::Call => (forward - strike).pos(),
        OptionType::Put => (strike - forward).pos(),
    };
    if !(price >= intrinsic) {
        return Err(Error::Domain(format!(
            "price {price} below intrinsic value {intrinsic}"
        )));
    }
    if model == VolModel::Lognormal {
        let upper = match option_type {
            OptionType::Call => forward,
            OptionType::Put => strike,
        };
        if price >= upper {
            return Err(Error::Domain("price at upper bound".into()));
        }
    }
    if price == intrinsic {
        return Ok(T::zero());
    }

    let eval = |s: T| -> (T, T) {
        match model {
            VolModel::Normal => {
                let d = (forward - strike) / s;
                (bachelier_unchecked(forward, strike, s, option_type), norm_pdf(d))
            }
            VolModel::Lognormal => {
                let d1 = (forward / strike).ln() / s + T::lit(0.5) * s;
                (
                    black_scholes_unchecked(forward, strike, s, option_type),
                    forward * norm_pdf(d1),
                )
            }
        }
    };

    let scale = match model {
        VolModel::Normal => (forward.abs() + strike.abs()).max(T::one()),
        VolModel::Lognormal => T::one(),
    };
    let mut lo = T::zero();
    let mut hi = scale * T::lit(0.5);
    while eval(hi).0 < price {
        lo = hi;
        hi = hi + hi;
        if !hi.is_finite() {
            return Err(Error::Domain("could not bracket the implied volatility".into()));
        }
    }

    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(16.0) * price);
    let mut s = T::lit(0.5) * (lo + hi);
    for _ in 0..200 {
        let (p, vega) = eval(s);
        let f = p - price;
        if f > T::zero() {
            hi = s;
        } else {
            lo = s;
        }
        let newton = if vega > T::zero() { s - f / vega } else { T::nan() };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            T::lit(0.5) * (lo + hi)
        };
        let step = (next - s).abs();
        s = next;
        if f.abs() <= tol && step <= T::epsilon() * T::lit(4.0) * s {
            break;
        }
        if hi - lo <= T::epsilon() * hi {
            break;
        }
    }
    if (eval(s).0 - price).abs() > tol {
        return Err(Error::Domain("implied volatility did not converge".into()));
    }
    Ok(s / maturity.sqrt())
}
