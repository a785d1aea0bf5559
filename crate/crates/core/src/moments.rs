//! Conditional moments of the asset given one volatility path.
//!
//! Conditionally on the volatility factor the asset is Gaussian (normal
//! backbone) or lognormal (lognormal backbone). Each path is summarised by
//! a shift `A` and a conditional variance `V`, both relative to `s0`:
//!
//! * normal: `S_T ~ N(s0 (1 + A), s0^2 V)`;
//! * lognormal: `ln(S_T / s0) ~ N(A - V/2, V)`.
//!
//! `A` carries `rho * ∫ sigma dV`, obtained analytically from the
//! volatility dynamics, and for the lognormal backbone the convexity term
//! `-1/2 rho^2 ∫ sigma^2 dt`. Integrated variances are left-endpoint sums.

use crate::closed_form::{bachelier_unchecked, black_scholes_unchecked};
use crate::error::{Error, Result};
use crate::model::{Backbone, HestonParams, ModelSpec, OptionType, PayoffKind, SabrParams, SchobelZhuParams};
use crate::path::{TimeGrid, VolPath};
use crate::scalar::Real;

/// Below this vol-of-vol the `(rho / nu)` forms are replaced by their
/// `nu -> 0` limit, a direct sum of `sigma_k dV_k`.
pub const NU_LIMIT: f64 = 1e-8;

/// Shift and conditional variance of one volatility path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalMoments<T> {
    /// `A` (normal) or `A^BS` (lognormal), relative to `s0`.
    pub shift: T,
    /// Total conditional variance over the horizon, relative to `s0^2`
    /// (normal) or in log units (lognormal).
    pub variance: T,
    pub backbone: Backbone,
}

impl<T: Real> ConditionalMoments<T> {
    /// Conditional forward: `s0 (1 + A)` or `s0 exp(A)`.
    pub fn forward(&self, s0: T) -> T {
        match self.backbone {
            Backbone::Normal => s0 * (T::one() + self.shift),
            Backbone::Lognormal => s0 * self.shift.exp(),
        }
    }

    /// Total standard deviation passed to the closed form.
    pub fn stdev(&self, s0: T) -> T {
        match self.backbone {
            Backbone::Normal => s0 * self.variance.sqrt(),
            Backbone::Lognormal => self.variance.sqrt(),
        }
    }

    /// Closed-form conditional option price.
    pub fn price(&self, s0: T, strike: T, option_type: OptionType) -> T {
        let f = self.forward(s0);
        let s = self.stdev(s0);
        match self.backbone {
            Backbone::Normal => bachelier_unchecked(f, strike, s, option_type),
            Backbone::Lognormal => black_scholes_unchecked(f, strike, s, option_type),
        }
    }
}

/// Per-step correlation and integrated-variance sums of one path.
struct VarianceSums<T> {
    /// `sum (1 - rho_k^2) sigma_k^2 dt_k`, split at the requested indices.
    orthogonal: Vec<T>,
    /// `sum rho_k^2 sigma_k^2 dt_k` over the whole path.
    parallel: T,
}

/// Accumulates left-endpoint variance sums, closing a bucket at each of
/// the sorted grid `indices`.
fn variance_sums<T: Real>(
    grid: &TimeGrid<T>,
    indices: &[usize],
    mut step: impl FnMut(usize) -> (T, T),
) -> VarianceSums<T> {
    let mut orthogonal = Vec::with_capacity(indices.len());
    let mut bucket = T::zero();
    let mut parallel = T::zero();
    let mut k = 0;
    for &end in indices {
        while k < end {
            let (var, rho) = step(k);
            let w = var * grid.dt(k);
            let rho2 = rho * rho;
            bucket = bucket + (T::one() - rho2) * w;
            parallel = parallel + rho2 * w;
            k += 1;
        }
        orthogonal.push(bucket);
        bucket = T::zero();
    }
    VarianceSums { orthogonal, parallel }
}

#[inline]
fn sabr_step<T: Real>(params: &SabrParams<T>, grid: &TimeGrid<T>, k: usize) -> (T, T) {
    let nu = if params.nu.is_constant() {
        params.nu.values()[0]
    } else {
        params.nu.value_at(grid.times()[k])
    };
    let rho = if params.rho.is_constant() {
        params.rho.values()[0]
    } else {
        params.rho.value_at(grid.times()[k])
    };
    (nu, rho)
}

/// `rho ∫_0^{t_i} sigma dV` for each sorted grid index `i`.
///
/// On each run of constant `(nu, rho)` the stochastic integral telescopes
/// to `(rho / nu) (sigma_end - sigma_start)` because `d sigma = nu sigma dV`.
fn sabr_drift<T: Real>(
    params: &SabrParams<T>,
    grid: &TimeGrid<T>,
    path: &VolPath<T>,
    indices: &[usize],
    out: &mut [T],
) {
    let limit = T::lit(NU_LIMIT);
    let mut done = T::zero();
    let mut run_start = 0;
    let mut run_direct = T::zero();
    let (mut nu, mut rho) = sabr_step(params, grid, 0);
    let run_value = |k: usize, nu: T, rho: T, start: usize, direct: T| {
        if nu < limit {
            rho * direct
        } else {
            rho / nu * (path.values[k] - path.values[start])
        }
    };
    let last = indices.last().copied().unwrap_or(0);
    let mut next = 0;
    for k in 0..=last {
        while next < indices.len() && indices[next] == k {
            out[next] = done + run_value(k, nu, rho, run_start, run_direct);
            next += 1;
        }
        if k == last {
            break;
        }
        let (nu_k, rho_k) = sabr_step(params, grid, k);
        if nu_k != nu || rho_k != rho {
            done = done + run_value(k, nu, rho, run_start, run_direct);
            run_start = k;
            run_direct = T::zero();
            nu = nu_k;
            rho = rho_k;
        }
        if nu < limit {
            run_direct = run_direct + path.values[k] * path.shocks[k] * grid.dt(k).sqrt();
        }
    }
}

fn finish_vanilla<T: Real>(drift: T, sums: &VarianceSums<T>, backbone: Backbone) -> ConditionalMoments<T> {
    let variance = sums.orthogonal[0];
    let shift = match backbone {
        Backbone::Normal => drift,
        Backbone::Lognormal => drift - T::lit(0.5) * sums.parallel,
    };
    ConditionalMoments {
        shift,
        variance,
        backbone,
    }
}

/// Average of the drift terms and the `((N - j + 1) / N)^2`-weighted sum of
/// the inter-fixing variances.
fn finish_asian<T: Real>(drifts: &[T], sums: &VarianceSums<T>) -> ConditionalMoments<T> {
    let n = drifts.len();
    let nf = T::count(n);
    let shift = drifts.iter().fold(T::zero(), |acc, &d| acc + d) / nf;
    let variance = sums.orthogonal.iter().enumerate().fold(T::zero(), |acc, (j, &iv)| {
        let w = T::count(n - j) / nf;
        acc + w * w * iv
    });
    ConditionalMoments {
        shift,
        variance,
        backbone: Backbone::Normal,
    }
}

fn sabr_vanilla<T: Real>(
    path: &VolPath<T>,
    params: &SabrParams<T>,
    grid: &TimeGrid<T>,
    backbone: Backbone,
) -> ConditionalMoments<T> {
    let n = grid.n_steps();
    let mut drift = [T::zero()];
    sabr_drift(params, grid, path, &[n], &mut drift);
    let sums = variance_sums(grid, &[n], |k| {
        let s = path.values[k];
        (s * s, sabr_step(params, grid, k).1)
    });
    finish_vanilla(drift[0], &sums, backbone)
}

/// Normal-backbone SABR: `A = (rho/nu)(sigma_T - sigma0)`,
/// `V = (1 - rho^2) ∫ sigma^2 dt`.
pub fn sabr_b0_vanilla_moments<T: Real>(
    path: &VolPath<T>,
    params: &SabrParams<T>,
    grid: &TimeGrid<T>,
) -> ConditionalMoments<T> {
    sabr_vanilla(path, params, grid, Backbone::Normal)
}

/// Lognormal-backbone SABR:
/// `A^BS = (rho/nu)(sigma_T - sigma0) - 1/2 rho^2 ∫ sigma^2 dt`.
pub fn sabr_b1_vanilla_moments<T: Real>(
    path: &VolPath<T>,
    params: &SabrParams<T>,
    grid: &TimeGrid<T>,
) -> ConditionalMoments<T> {
    sabr_vanilla(path, params, grid, Backbone::Lognormal)
}

fn require_fixings<T: Real>(grid: &TimeGrid<T>) -> Result<&[usize]> {
    let idx = grid.fixing_indices();
    if idx.is_empty() {
        return Err(Error::Domain("grid carries no fixing indices".into()));
    }
    Ok(idx)
}

/// Moments of the arithmetic average over the grid's fixings (normal
/// backbone SABR).
pub fn sabr_b0_asian_moments<T: Real>(
    path: &VolPath<T>,
    params: &SabrParams<T>,
    grid: &TimeGrid<T>,
) -> Result<ConditionalMoments<T>> {
    let idx = require_fixings(grid)?;
    let mut drifts = vec![T::zero(); idx.len()];
    sabr_drift(params, grid, path, idx, &mut drifts);
    let sums = variance_sums(grid, idx, |k| {
        let s = path.values[k];
        (s * s, sabr_step(params, grid, k).1)
    });
    Ok(finish_asian(&drifts, &sums))
}

/// `rho ∫_0^{t_i} sqrt(w) dV` from the integrated variance equation:
/// `∫ sqrt(w) dV = (w_t - w0 - kappa w_L t + kappa ∫ w dt) / nu`, exact for
/// the full-truncation scheme when `w_t` is the untruncated state.
fn heston_drift<T: Real>(
    params: &HestonParams<T>,
    grid: &TimeGrid<T>,
    path: &VolPath<T>,
    indices: &[usize],
    out: &mut [T],
) {
    let direct = params.nu < T::lit(NU_LIMIT);
    let mut iw = T::zero();
    let mut sum = T::zero();
    let mut k = 0;
    for (slot, &end) in out.iter_mut().zip(indices) {
        while k < end {
            let dt = grid.dt(k);
            if direct {
                sum = sum + path.values[k].sqrt() * path.shocks[k] * dt.sqrt();
            } else {
                iw = iw + path.values[k] * dt;
            }
            k += 1;
        }
        let iv = if direct {
            sum
        } else {
            let t = grid.times()[end];
            (path.raw_at(end) - params.w0 - params.kappa * params.w_long * t + params.kappa * iw) / params.nu
        };
        *slot = params.rho * iv;
    }
}

/// `rho ∫_0^{t_i} zeta dV` as the left-endpoint Ito sum over the path's
/// shocks. The closed form from Ito's formula on `zeta^2` divides the
/// per-step drift mismatch of the exact OU transition by `nu` and is not
/// used.
fn schobel_zhu_drift<T: Real>(
    params: &SchobelZhuParams<T>,
    grid: &TimeGrid<T>,
    path: &VolPath<T>,
    indices: &[usize],
    out: &mut [T],
) {
    let mut sum = T::zero();
    let mut k = 0;
    for (slot, &end) in out.iter_mut().zip(indices) {
        while k < end {
            sum = sum + path.values[k] * path.shocks[k] * grid.dt(k).sqrt();
            k += 1;
        }
        *slot = params.rho * sum;
    }
}

/// Heston-type moments: `A = rho I_V` (normal) or `rho I_V - 1/2 rho^2 IW`
/// (lognormal), `V = (1 - rho^2) IW`, with `IW = ∫ w dt`.
pub fn heston_vanilla_moments<T: Real>(
    path: &VolPath<T>,
    params: &HestonParams<T>,
    grid: &TimeGrid<T>,
) -> Result<ConditionalMoments<T>> {
    let backbone = params.backbone()?;
    let n = grid.n_steps();
    let mut drift = [T::zero()];
    heston_drift(params, grid, path, &[n], &mut drift);
    let sums = variance_sums(grid, &[n], |k| (path.values[k], params.rho));
    Ok(finish_vanilla(drift[0], &sums, backbone))
}

/// Asian moments for the normal-backbone Heston-type model.
pub fn heston_asian_moments<T: Real>(
    path: &VolPath<T>,
    params: &HestonParams<T>,
    grid: &TimeGrid<T>,
) -> Result<ConditionalMoments<T>> {
    require_normal(params.backbone()?)?;
    let idx = require_fixings(grid)?;
    let mut drifts = vec![T::zero(); idx.len()];
    heston_drift(params, grid, path, idx, &mut drifts);
    let sums = variance_sums(grid, idx, |k| (path.values[k], params.rho));
    Ok(finish_asian(&drifts, &sums))
}

/// Schobel-Zhu-type moments: as Heston with `IZ = ∫ zeta^2 dt`.
pub fn schobel_zhu_vanilla_moments<T: Real>(
    path: &VolPath<T>,
    params: &SchobelZhuParams<T>,
    grid: &TimeGrid<T>,
) -> Result<ConditionalMoments<T>> {
    let backbone = params.backbone()?;
    let n = grid.n_steps();
    let mut drift = [T::zero()];
    schobel_zhu_drift(params, grid, path, &[n], &mut drift);
    let sums = variance_sums(grid, &[n], |k| {
        let z = path.values[k];
        (z * z, params.rho)
    });
    Ok(finish_vanilla(drift[0], &sums, backbone))
}

/// Asian moments for the normal-backbone Schobel-Zhu-type model.
pub fn schobel_zhu_asian_moments<T: Real>(
    path: &VolPath<T>,
    params: &SchobelZhuParams<T>,
    grid: &TimeGrid<T>,
) -> Result<ConditionalMoments<T>> {
    require_normal(params.backbone()?)?;
    let idx = require_fixings(grid)?;
    let mut drifts = vec![T::zero(); idx.len()];
    schobel_zhu_drift(params, grid, path, idx, &mut drifts);
    let sums = variance_sums(grid, idx, |k| {
        let z = path.values[k];
        (z * z, params.rho)
    });
    Ok(finish_asian(&drifts, &sums))
}

fn require_normal(backbone: Backbone) -> Result<()> {
    match backbone {
        Backbone::Normal => Ok(()),
        Backbone::Lognormal => Err(Error::Unsupported(
            "Asian options have a closed-form conditional law only for beta = 0".into(),
        )),
    }
}

/// Checks that `kind` can be priced under `model`.
pub fn check_route<T: Real>(model: &ModelSpec<T>, kind: PayoffKind) -> Result<Backbone> {
    let backbone = model.backbone()?;
    if kind == PayoffKind::Asian {
        require_normal(backbone)?;
    }
    Ok(backbone)
}

/// Moments for any supported model and payoff kind.
pub fn conditional_moments<T: Real>(
    model: &ModelSpec<T>,
    kind: PayoffKind,
    grid: &TimeGrid<T>,
    path: &VolPath<T>,
) -> Result<ConditionalMoments<T>> {
    match (model, kind) {
        (ModelSpec::Sabr(p), PayoffKind::Vanilla) => Ok(sabr_vanilla(path, p, grid, p.backbone()?)),
        (ModelSpec::Sabr(p), PayoffKind::Asian) => {
            require_normal(p.backbone()?)?;
            sabr_b0_asian_moments(path, p, grid)
        }
        (ModelSpec::Heston(p), PayoffKind::Vanilla) => heston_vanilla_moments(path, p, grid),
        (ModelSpec::Heston(p), PayoffKind::Asian) => heston_asian_moments(path, p, grid),
        (ModelSpec::SchobelZhu(p), PayoffKind::Vanilla) => schobel_zhu_vanilla_moments(path, p, grid),
        (ModelSpec::SchobelZhu(p), PayoffKind::Asian) => schobel_zhu_asian_moments(path, p, grid),
    }
}
