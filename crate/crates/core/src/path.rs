//! Time grids, reproducible Gaussian streams and volatility-factor paths.
//!
//! Only the volatility (or variance) factor is simulated here. SABR and
//! Schobel-Zhu use their exact transition laws; the CIR variance of the
//! Heston model uses a full-truncation Euler scheme.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::model::{HestonParams, SabrParams, SchobelZhuParams};
use crate::scalar::Real;
use crate::special::inv_norm_cdf;

/// Simulation grid `0 = t_0 < t_1 < ... < t_n = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T> {
    times: Vec<T>,
    fixing_indices: Vec<usize>,
}

impl<T: Real> TimeGrid<T> {
    /// Number of grid points (`n_steps() + 1`).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// Grid indices of the contract fixings, in fixing order.
    pub fn fixing_indices(&self) -> &[usize] {
        &self.fixing_indices
    }

    pub fn maturity(&self) -> T {
        self.times[self.times.len() - 1]
    }

    /// Length of step `k`, i.e. `t_{k+1} - t_k`.
    #[inline]
    pub fn dt(&self, k: usize) -> T {
        self.times[k + 1] - self.times[k]
    }

    pub fn max_dt(&self) -> T {
        (0..self.n_steps()).map(|k| self.dt(k)).fold(T::zero(), T::max)
    }
}

/// Uniform grid of `ceil(T * steps_per_year)` steps refined so that every
/// fixing time is a grid point.
pub fn make_time_grid<T: Real>(maturity: T, steps_per_year: usize, fixings: &[T]) -> Result<TimeGrid<T>> {
    make_time_grid_with_breakpoints(maturity, steps_per_year, fixings, &[])
}

/// As [`make_time_grid`], additionally inserting unmarked breakpoints
/// (parameter changes) in `(0, T)`.
pub fn make_time_grid_with_breakpoints<T: Real>(
    maturity: T,
    steps_per_year: usize,
    fixings: &[T],
    breakpoints: &[T],
) -> Result<TimeGrid<T>> {
    if !(maturity > T::zero()) || !maturity.is_finite() {
        return Err(Error::invalid("maturity", format!("must be > 0, got {maturity}")));
    }
    if steps_per_year == 0 {
        return Err(Error::invalid("steps_per_year", "must be >= 1"));
    }
    if let Some(&f) = fixings.iter().find(|&&f| f > maturity || !(f > T::zero())) {
        return Err(Error::invalid("fixings", format!("{f} lies outside (0, {maturity}]")));
    }

    // Slack keeps e.g. 1.0 * 252 from rounding up to 253 steps.
    let raw = maturity.as_f64() * steps_per_year as f64;
    let n = ((raw - 1e-9 * raw.max(1.0)).ceil() as usize).max(1);
    let nf = T::count(n);
    let mut times: Vec<T> = (0..=n)
        .map(|k| if k == n { maturity } else { maturity * T::count(k) / nf })
        .collect();

    // Points within rounding distance of a uniform node replace that node.
    let snap = maturity * T::lit(1e-12);
    for &p in fixings.iter().chain(breakpoints) {
        let idx = times.partition_point(|&t| t < p);
        if idx < times.len() && (times[idx] - p).abs() <= snap {
            if idx != 0 {
                times[idx] = p;
            }
        } else if idx > 0 && (p - times[idx - 1]).abs() <= snap {
            if idx - 1 != 0 {
                times[idx - 1] = p;
            }
        } else if p > T::zero() && p < maturity {
            times.insert(idx, p);
        }
    }

    let fixing_indices = fixings
        .iter()
        .map(|&f| {
            times
                .iter()
                .position(|&t| t == f)
                .expect("fixings are inserted into the grid")
        })
        .collect();
    Ok(TimeGrid { times, fixing_indices })
}

/// Key of one independent Gaussian stream.
///
/// Streams are counter based: the same `(seed, substream, stream_id)`
/// always yields the same sequence, whichever thread consumes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
    /// Separates independent factors drawn for the same path.
    pub substream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream {
            seed,
            stream_id,
            substream: 0,
        }
    }

    pub fn with_substream(self, substream: u64) -> Self {
        RngStream { substream, ..self }
    }

    /// Volatility-factor stream of path `index`.
    pub fn vol(seed: u64, index: u64) -> Self {
        RngStream::new(seed, index)
    }

    /// Asset-factor stream of path `index`, independent of [`RngStream::vol`].
    pub fn asset(seed: u64, index: u64) -> Self {
        RngStream::new(seed, index).with_substream(1)
    }

    pub fn gaussians(&self) -> GaussianSource {
        GaussianSource::new(*self)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard normal draws by inversion of ChaCha8 uniforms.
pub struct GaussianSource {
    rng: ChaCha8Rng,
}

impl GaussianSource {
    pub fn new(stream: RngStream) -> Self {
        let mut state = stream.seed ^ stream.substream.wrapping_mul(0xd605_bbb5_8c8a_bd4d);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream.stream_id);
        GaussianSource { rng }
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn next_gaussian(&mut self) -> f64 {
        inv_norm_cdf(self.uniform())
    }

    pub fn fill<T: Real>(&mut self, out: &mut [T]) {
        for x in out {
            *x = T::lit(self.next_gaussian());
        }
    }
}

/// `count` i.i.d. standard normal draws from `stream`.
pub fn gaussian_batch(stream: RngStream, count: usize) -> Vec<f64> {
    let mut src = stream.gaussians();
    (0..count).map(|_| src.next_gaussian()).collect()
}

/// One simulated trajectory of the volatility factor.
///
/// `values[k]` is the volatility (SABR, Schobel-Zhu) or the truncated
/// variance (Heston) at `t_k`; `shocks[k]` is the standard normal driving
/// step `k`, so `dV_k = shocks[k] * sqrt(dt_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolPath<T> {
    pub values: Vec<T>,
    pub shocks: Vec<T>,
    /// Untruncated states of the Euler recursion (Heston only; empty for
    /// the exact schemes).
    pub raw: Vec<T>,
}

impl<T: Real> VolPath<T> {
    pub fn with_steps(n_steps: usize) -> Self {
        VolPath {
            values: vec![T::zero(); n_steps + 1],
            shocks: vec![T::zero(); n_steps],
            raw: Vec::new(),
        }
    }

    pub fn terminal(&self) -> T {
        self.values[self.values.len() - 1]
    }

    /// State at grid index `k` before truncation.
    pub fn raw_at(&self, k: usize) -> T {
        if self.raw.is_empty() {
            self.values[k]
        } else {
            self.raw[k]
        }
    }

    fn resize(&mut self, n_steps: usize) {
        self.values.resize(n_steps + 1, T::zero());
        self.shocks.resize(n_steps, T::zero());
        self.raw.clear();
    }
}

/// Exact lognormal SABR volatility:
/// `sigma_k = sigma0 * exp(sum nu_i g_i sqrt(dt_i) - 1/2 sum nu_i^2 dt_i)`.
pub fn simulate_sabr_vol_path<T: Real>(params: &SabrParams<T>, grid: &TimeGrid<T>, stream: RngStream) -> VolPath<T> {
    let mut path = VolPath::with_steps(grid.n_steps());
    fill_sabr_vol_path(params, grid, &mut stream.gaussians(), &mut path);
    path
}

pub(crate) fn fill_sabr_vol_path<T: Real>(
    params: &SabrParams<T>,
    grid: &TimeGrid<T>,
    src: &mut GaussianSource,
    path: &mut VolPath<T>,
) {
    let n = grid.n_steps();
    path.resize(n);
    src.fill(&mut path.shocks);
    let half = T::lit(0.5);
    let constant_nu = params.nu.is_constant().then(|| params.nu.values()[0]);
    let mut exponent = T::zero();
    path.values[0] = params.sigma0;
    for k in 0..n {
        let dt = grid.dt(k);
        let nu = constant_nu.unwrap_or_else(|| params.nu.value_at(grid.times()[k]));
        exponent = exponent + nu * path.shocks[k] * dt.sqrt() - half * nu * nu * dt;
        path.values[k + 1] = params.sigma0 * exponent.exp();
    }
}

/// Full-truncation Euler for the CIR variance; stores `max(w, 0)`.
pub fn simulate_cir_var_path<T: Real>(params: &HestonParams<T>, grid: &TimeGrid<T>, stream: RngStream) -> VolPath<T> {
    let mut path = VolPath::with_steps(grid.n_steps());
    fill_cir_var_path(params, grid, &mut stream.gaussians(), &mut path);
    path
}

pub(crate) fn fill_cir_var_path<T: Real>(
    params: &HestonParams<T>,
    grid: &TimeGrid<T>,
    src: &mut GaussianSource,
    path: &mut VolPath<T>,
) {
    let n = grid.n_steps();
    path.resize(n);
    src.fill(&mut path.shocks);
    path.raw.resize(n + 1, T::zero());
    let mut raw = params.w0;
    path.raw[0] = raw;
    path.values[0] = raw.pos();
    for k in 0..n {
        let dt = grid.dt(k);
        let w = raw.pos();
        raw = raw + params.kappa * (params.w_long - w) * dt + params.nu * w.sqrt() * path.shocks[k] * dt.sqrt();
        path.raw[k + 1] = raw;
        path.values[k + 1] = raw.pos();
    }
}

/// Exact Ornstein-Uhlenbeck transition for the Schobel-Zhu volatility.
pub fn simulate_ou_vol_path<T: Real>(
    params: &SchobelZhuParams<T>,
    grid: &TimeGrid<T>,
    stream: RngStream,
) -> VolPath<T> {
    let mut path = VolPath::with_steps(grid.n_steps());
    fill_ou_vol_path(params, grid, &mut stream.gaussians(), &mut path);
    path
}

/// Decay factor and conditional standard deviation of one OU step.
fn ou_step_coefficients<T: Real>(kappa: T, nu: T, dt: T) -> (T, T) {
    let x = kappa * dt;
    if x < T::lit(1e-12) {
        return (T::one() - x, nu * dt.sqrt());
    }
    let decay = (-x).exp();
    // (1 - e^{-2 kappa dt}) / (2 kappa)
    let var = -(-(x + x)).exp_m1() / (kappa + kappa);
    (decay, nu * var.sqrt())
}

pub(crate) fn fill_ou_vol_path<T: Real>(
    params: &SchobelZhuParams<T>,
    grid: &TimeGrid<T>,
    src: &mut GaussianSource,
    path: &mut VolPath<T>,
) {
    let n = grid.n_steps();
    path.resize(n);
    src.fill(&mut path.shocks);
    path.values[0] = params.zeta0;
    let mut cached: Option<(T, T, T)> = None;
    for k in 0..n {
        let dt = grid.dt(k);
        let (decay, sd) = match cached {
            Some((d, decay, sd)) if d == dt => (decay, sd),
            _ => {
                let (decay, sd) = ou_step_coefficients(params.kappa, params.nu, dt);
                cached = Some((dt, decay, sd));
                (decay, sd)
            }
        };
        let z = path.values[k];
        path.values[k + 1] = params.zeta_long + (z - params.zeta_long) * decay + sd * path.shocks[k];
    }
}
