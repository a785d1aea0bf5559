//! Monte-Carlo pricers.
//!
//! [`price_mc2`] simulates only the volatility factor and averages the
//! closed-form conditional price over paths. [`price_mc1`] simulates both
//! factors with an Euler scheme and serves as the brute-force reference.
//! Both draw the volatility factor of path `m` from the same stream, so
//! their comparison isolates the estimator effect.

use std::time::Instant;

use rayon::prelude::*;

use crate::closed_form::{bachelier_unchecked, black_scholes_unchecked};
use crate::error::{Error, Result};
use crate::model::{validate, Backbone, Bundle, Contract, McConfig, Method, ModelSpec, OptionType, PayoffKind, Quote};
use crate::moments::{check_route, conditional_moments, ConditionalMoments};
use crate::path::{
    fill_cir_var_path, fill_ou_vol_path, fill_sabr_vol_path, GaussianSource, RngStream, TimeGrid, VolPath,
};
use crate::scalar::{mean_and_stderr, Real};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MC2_THREADS";

fn resolve_workers(config: &McConfig) -> Option<usize> {
    config.workers.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
    })
}

/// Runs `f` on the configured worker pool.
fn on_workers<R: Send>(config: &McConfig, f: impl FnOnce() -> R + Send) -> Result<R> {
    match resolve_workers(config) {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Unsupported(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Simulates the volatility factor of one path into `path`.
pub(crate) fn fill_vol_path<T: Real>(
    model: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    src: &mut GaussianSource,
    path: &mut VolPath<T>,
) {
    match model {
        ModelSpec::Sabr(p) => fill_sabr_vol_path(p, grid, src, path),
        ModelSpec::Heston(p) => fill_cir_var_path(p, grid, src, path),
        ModelSpec::SchobelZhu(p) => fill_ou_vol_path(p, grid, src, path),
    }
}

/// Volatility of the asset factor on step `k`, and the correlation in force.
#[inline]
fn asset_vol_and_rho<T: Real>(model: &ModelSpec<T>, grid: &TimeGrid<T>, path: &VolPath<T>, k: usize) -> (T, T) {
    match model {
        ModelSpec::Sabr(p) => {
            let rho = if p.rho.is_constant() {
                p.rho.values()[0]
            } else {
                p.rho.value_at(grid.times()[k])
            };
            (path.values[k], rho)
        }
        ModelSpec::Heston(p) => (path.values[k].sqrt(), p.rho),
        ModelSpec::SchobelZhu(p) => (path.values[k], p.rho),
    }
}

/// Per-path conditional moments, in path order.
pub fn simulate_moments<T: Real>(bundle: &Bundle<T>) -> Result<Vec<ConditionalMoments<T>>> {
    check_route(&bundle.model, bundle.contract.kind)?;
    let Bundle {
        model,
        contract,
        config,
        grid,
    } = bundle;
    on_workers(config, || {
        (0..config.n_paths as u64)
            .into_par_iter()
            .map_init(
                || VolPath::with_steps(grid.n_steps()),
                |path, m| {
                    let mut src = RngStream::vol(config.seed, m).gaussians();
                    fill_vol_path(model, grid, &mut src, path);
                    conditional_moments(model, contract.kind, grid, path)
                },
            )
            .collect::<Result<Vec<_>>>()
    })?
}

/// Per-path simulated underlying for MC1: the terminal asset (vanilla) or
/// the fixing average (Asian), in path order.
pub fn simulate_underlying<T: Real>(bundle: &Bundle<T>) -> Result<Vec<T>> {
    let backbone = check_route(&bundle.model, bundle.contract.kind)?;
    let Bundle {
        model,
        contract,
        config,
        grid,
    } = bundle;
    let s0 = model.s0();
    let half = T::lit(0.5);
    on_workers(config, || {
        (0..config.n_paths as u64)
            .into_par_iter()
            .map_init(
                || (VolPath::with_steps(grid.n_steps()), vec![T::zero(); grid.n_steps()]),
                |(path, asset_shocks), m| {
                    let mut src = RngStream::vol(config.seed, m).gaussians();
                    fill_vol_path(model, grid, &mut src, path);
                    RngStream::asset(config.seed, m).gaussians().fill(asset_shocks);

                    let fixings = grid.fixing_indices();
                    let mut next_fix = 0;
                    let mut fix_sum = T::zero();
                    // x is S/s0 - 1 (normal) or ln(S/s0) (lognormal)
                    let mut x = T::zero();
                    let level = |x: T| match backbone {
                        Backbone::Normal => s0 * (T::one() + x),
                        Backbone::Lognormal => s0 * x.exp(),
                    };
                    for (k, &asset_shock) in asset_shocks.iter().enumerate() {
                        let sqdt = grid.dt(k).sqrt();
                        let (vol, rho) = asset_vol_and_rho(model, grid, path, k);
                        let shock = rho * path.shocks[k] + (T::one() - rho * rho).sqrt() * asset_shock;
                        x = x + vol * shock * sqdt;
                        if backbone == Backbone::Lognormal {
                            x = x - half * vol * vol * grid.dt(k);
                        }
                        if contract.kind == PayoffKind::Asian && next_fix < fixings.len() && fixings[next_fix] == k + 1
                        {
                            fix_sum = fix_sum + level(x);
                            next_fix += 1;
                        }
                    }
                    match contract.kind {
                        PayoffKind::Vanilla => level(x),
                        PayoffKind::Asian => fix_sum / T::count(fixings.len()),
                    }
                },
            )
            .collect::<Vec<_>>()
    })
}

#[inline]
fn payoff<T: Real>(underlying: T, strike: T, option_type: OptionType) -> T {
    match option_type {
        OptionType::Call => (underlying - strike).pos(),
        OptionType::Put => (strike - underlying).pos(),
    }
}

fn quote<T: Real>(values: &[T], runtime: f64) -> Quote<T> {
    let (price, stderr) = mean_and_stderr(values);
    Quote {
        price,
        stderr,
        n_paths: values.len(),
        runtime,
    }
}

/// Validates the inputs and prices one strike per entry of `strikes`,
/// all from the same simulated paths. Each quote's runtime is the wall
/// time of the whole call.
pub fn price_strikes<T: Real>(
    model: &ModelSpec<T>,
    contract: &Contract<T>,
    strikes: &[T],
    config: &McConfig,
) -> Result<Vec<Quote<T>>> {
    let start = Instant::now();
    for &k in strikes {
        contract.with_strike(k).validate()?;
    }
    let bundle = validate(model.clone(), contract.clone(), *config)?;
    let s0 = model.s0();
    let option_type = contract.option_type;
    let per_strike: Vec<Vec<T>> = match config.method {
        Method::Mc2 => {
            let moments = simulate_moments(&bundle)?;
            on_workers(config, || {
                strikes
                    .iter()
                    .map(|&k| moments.par_iter().map(|m| m.price(s0, k, option_type)).collect())
                    .collect()
            })?
        }
        Method::Mc1 => {
            let underlying = simulate_underlying(&bundle)?;
            on_workers(config, || {
                strikes
                    .iter()
                    .map(|&k| underlying.par_iter().map(|&u| payoff(u, k, option_type)).collect())
                    .collect()
            })?
        }
    };
    let runtime = start.elapsed().as_secs_f64();
    Ok(per_strike.iter().map(|v| quote(v, runtime)).collect())
}

/// Prices with the method selected in `config`.
pub fn price<T: Real>(model: &ModelSpec<T>, contract: &Contract<T>, config: &McConfig) -> Result<Quote<T>> {
    Ok(price_strikes(model, contract, &[contract.strike], config)?[0])
}

/// Conditional Monte-Carlo price: the mean over volatility paths of the
/// Bachelier (`beta = 0`) or Black-Scholes (`beta = 1`) conditional price.
pub fn price_mc2<T: Real>(model: &ModelSpec<T>, contract: &Contract<T>, config: &McConfig) -> Result<Quote<T>> {
    price(
        model,
        contract,
        &McConfig {
            method: Method::Mc2,
            ..*config
        },
    )
}

/// Two-factor Euler Monte-Carlo price (log-Euler for `beta = 1`).
pub fn price_mc1<T: Real>(model: &ModelSpec<T>, contract: &Contract<T>, config: &McConfig) -> Result<Quote<T>> {
    price(
        model,
        contract,
        &McConfig {
            method: Method::Mc1,
            ..*config
        },
    )
}

/// `∫_a^b vol(t)^2 dt` for a model whose volatility is deterministic.
fn deterministic_variance<T: Real>(model: &ModelSpec<T>, a: T, b: T) -> T {
    let decay_integral = |rate: T| -> T {
        // ∫_a^b e^{-rate t} dt
        if rate == T::zero() {
            b - a
        } else {
            ((-rate * a).exp() - (-rate * b).exp()) / rate
        }
    };
    match model {
        ModelSpec::Sabr(p) => p.sigma0 * p.sigma0 * (b - a),
        ModelSpec::Heston(p) => p.w_long * (b - a) + (p.w0 - p.w_long) * decay_integral(p.kappa),
        ModelSpec::SchobelZhu(p) => {
            let c = p.zeta0 - p.zeta_long;
            let two = T::lit(2.0);
            p.zeta_long * p.zeta_long * (b - a)
                + two * p.zeta_long * c * decay_integral(p.kappa)
                + c * c * decay_integral(two * p.kappa)
        }
    }
}

/// Exact price when the volatility factor is deterministic (`nu = 0`).
pub fn price_closed_form<T: Real>(model: &ModelSpec<T>, contract: &Contract<T>) -> Result<T> {
    model.validate()?;
    contract.validate()?;
    let backbone = check_route(model, contract.kind)?;
    let deterministic = match model {
        ModelSpec::Sabr(p) => p.nu.values().iter().all(|&v| v == T::zero()),
        ModelSpec::Heston(p) => p.nu == T::zero(),
        ModelSpec::SchobelZhu(p) => p.nu == T::zero(),
    };
    if !deterministic {
        return Err(Error::Unsupported("closed form requires nu = 0".into()));
    }
    let variance = match contract.kind {
        PayoffKind::Vanilla => deterministic_variance(model, T::zero(), contract.maturity),
        PayoffKind::Asian => {
            let n = contract.fixings.len();
            let nf = T::count(n);
            let mut prev = T::zero();
            let mut acc = T::zero();
            for (j, &t) in contract.fixings.iter().enumerate() {
                let w = T::count(n - j) / nf;
                acc = acc + w * w * deterministic_variance(model, prev, t);
                prev = t;
            }
            acc
        }
    };
    let s0 = model.s0();
    Ok(match backbone {
        Backbone::Normal => bachelier_unchecked(s0, contract.strike, s0 * variance.sqrt(), contract.option_type),
        Backbone::Lognormal => black_scholes_unchecked(s0, contract.strike, variance.sqrt(), contract.option_type),
    })
}
