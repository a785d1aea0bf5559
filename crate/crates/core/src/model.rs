//! Model, contract and simulation-configuration records.
//!
//! All records are plain values. [`validate`] checks every invariant and
//! builds the simulation grid; the resulting [`Bundle`] is what the pricers
//! consume.

use crate::error::{Error, Result};
use crate::path::{make_time_grid_with_breakpoints, TimeGrid};
use crate::scalar::Real;

/// Backbone of the asset diffusion, selected by the exponent `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backbone {
    /// `beta = 0`: Bachelier (arithmetic) diffusion scaled by `s0`.
    Normal,
    /// `beta = 1`: Black-Scholes (geometric) diffusion.
    Lognormal,
}

impl Backbone {
    pub fn from_beta<T: Real>(beta: T) -> Result<Self> {
        if beta == T::zero() {
            Ok(Backbone::Normal)
        } else if beta == T::one() {
            Ok(Backbone::Lognormal)
        } else {
            Err(Error::invalid("beta", "must be 0 or 1"))
        }
    }

    pub fn beta<T: Real>(self) -> T {
        match self {
            Backbone::Normal => T::zero(),
            Backbone::Lognormal => T::one(),
        }
    }
}

/// Piecewise-constant function of time.
///
/// `values[0]` holds on `[0, knots[0])`, `values[i]` on
/// `[knots[i-1], knots[i])` and the last value from the last knot onwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule<T> {
    knots: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> Schedule<T> {
    pub fn constant(value: T) -> Self {
        Schedule {
            knots: Vec::new(),
            values: vec![value],
        }
    }

    /// Builds a schedule from segment values and the interior breakpoints
    /// separating them; `values.len()` must be `knots.len() + 1`.
    pub fn piecewise(values: Vec<T>, knots: Vec<T>) -> Result<Self> {
        if values.len() != knots.len() + 1 {
            return Err(Error::invalid(
                "schedule",
                format!(
                    "needs one more value than breakpoints (got {} values, {} breakpoints)",
                    values.len(),
                    knots.len()
                ),
            ));
        }
        if knots.iter().any(|&k| !(k > T::zero()) || !k.is_finite()) {
            return Err(Error::invalid("schedule", "breakpoints must be positive"));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("schedule", "breakpoints not strictly increasing"));
        }
        Ok(Schedule { knots, values })
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn is_constant(&self) -> bool {
        self.values.len() == 1
    }

    /// Index of the segment containing `t`.
    pub fn segment(&self, t: T) -> usize {
        self.knots.partition_point(|&k| k <= t)
    }

    pub fn value_at(&self, t: T) -> T {
        self.values[self.segment(t)]
    }

    /// `∫_0^horizon value(t)^2 dt`.
    pub fn integrated_square(&self, horizon: T) -> T {
        let mut acc = T::zero();
        let mut start = T::zero();
        for (i, &v) in self.values.iter().enumerate() {
            let end = self.knots.get(i).copied().unwrap_or(horizon).min(horizon);
            if end > start {
                acc = acc + v * v * (end - start);
            }
            start = end;
            if start >= horizon {
                break;
            }
        }
        acc
    }
}

fn check_rho<T: Real>(rho: T) -> Result<()> {
    if rho.is_finite() && rho >= -T::one() && rho <= T::one() {
        Ok(())
    } else {
        Err(Error::invalid("rho", format!("must lie in [-1, 1], got {rho}")))
    }
}

fn check_non_negative<T: Real>(field: &'static str, x: T) -> Result<()> {
    if x.is_finite() && x >= T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be >= 0, got {x}")))
    }
}

fn check_positive<T: Real>(field: &'static str, x: T) -> Result<()> {
    if x.is_finite() && x > T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {x}")))
    }
}

/// SABR parameters for `beta` in `{0, 1}` with optional piecewise-constant
/// vol-of-vol and correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct SabrParams<T> {
    /// Initial relative volatility.
    pub sigma0: T,
    /// Vol-of-vol.
    pub nu: Schedule<T>,
    pub rho: Schedule<T>,
    pub beta: T,
    /// Spot, equal to the forward.
    pub s0: T,
}

impl<T: Real> SabrParams<T> {
    pub fn new(sigma0: T, nu: T, rho: T, beta: T, s0: T) -> Self {
        SabrParams {
            sigma0,
            nu: Schedule::constant(nu),
            rho: Schedule::constant(rho),
            beta,
            s0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Backbone::from_beta(self.beta)?;
        check_positive("sigma0", self.sigma0)?;
        check_positive("s0", self.s0)?;
        for &nu in self.nu.values() {
            check_non_negative("nu", nu)?;
        }
        for &rho in self.rho.values() {
            check_rho(rho)?;
        }
        Ok(())
    }

    pub fn backbone(&self) -> Result<Backbone> {
        Backbone::from_beta(self.beta)
    }

    pub fn has_term_structure(&self) -> bool {
        !(self.nu.is_constant() && self.rho.is_constant())
    }

    /// Accumulated vol-of-vol variance `∫_0^T nu_t^2 dt`.
    pub fn theta(&self, maturity: T) -> T {
        self.nu.integrated_square(maturity)
    }
}

/// Heston-type model: CIR variance driving a normal or lognormal backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct HestonParams<T> {
    /// Initial variance.
    pub w0: T,
    pub kappa: T,
    /// Long-run variance.
    pub w_long: T,
    /// Vol of variance.
    pub nu: T,
    pub rho: T,
    pub beta: T,
    pub s0: T,
}

impl<T: Real> HestonParams<T> {
    pub fn validate(&self) -> Result<()> {
        Backbone::from_beta(self.beta)?;
        check_non_negative("w0", self.w0)?;
        check_non_negative("kappa", self.kappa)?;
        check_non_negative("w_long", self.w_long)?;
        check_non_negative("nu", self.nu)?;
        check_rho(self.rho)?;
        check_positive("s0", self.s0)
    }

    pub fn backbone(&self) -> Result<Backbone> {
        Backbone::from_beta(self.beta)
    }
}

/// Schobel-Zhu-type model: Ornstein-Uhlenbeck volatility.
#[derive(Debug, Clone, PartialEq)]
pub struct SchobelZhuParams<T> {
    pub zeta0: T,
    pub kappa: T,
    /// Long-run volatility.
    pub zeta_long: T,
    pub nu: T,
    pub rho: T,
    pub beta: T,
    pub s0: T,
}

impl<T: Real> SchobelZhuParams<T> {
    pub fn validate(&self) -> Result<()> {
        Backbone::from_beta(self.beta)?;
        if !self.zeta0.is_finite() {
            return Err(Error::invalid("zeta0", "must be finite"));
        }
        if !self.zeta_long.is_finite() {
            return Err(Error::invalid("zeta_long", "must be finite"));
        }
        check_non_negative("kappa", self.kappa)?;
        check_non_negative("nu", self.nu)?;
        check_rho(self.rho)?;
        check_positive("s0", self.s0)
    }

    pub fn backbone(&self) -> Result<Backbone> {
        Backbone::from_beta(self.beta)
    }
}

/// Any supported stochastic-volatility model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec<T> {
    Sabr(SabrParams<T>),
    Heston(HestonParams<T>),
    SchobelZhu(SchobelZhuParams<T>),
}

impl<T: Real> ModelSpec<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Sabr(p) => p.validate(),
            ModelSpec::Heston(p) => p.validate(),
            ModelSpec::SchobelZhu(p) => p.validate(),
        }
    }

    pub fn backbone(&self) -> Result<Backbone> {
        match self {
            ModelSpec::Sabr(p) => p.backbone(),
            ModelSpec::Heston(p) => p.backbone(),
            ModelSpec::SchobelZhu(p) => p.backbone(),
        }
    }

    pub fn s0(&self) -> T {
        match self {
            ModelSpec::Sabr(p) => p.s0,
            ModelSpec::Heston(p) => p.s0,
            ModelSpec::SchobelZhu(p) => p.s0,
        }
    }

    /// Times at which model parameters change; the simulation grid must
    /// contain them.
    pub fn breakpoints(&self) -> Vec<T> {
        match self {
            ModelSpec::Sabr(p) => {
                let mut k: Vec<T> = p.nu.knots().iter().chain(p.rho.knots()).copied().collect();
                k.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
                k.dedup();
                k
            }
            _ => Vec::new(),
        }
    }
}

impl<T> From<SabrParams<T>> for ModelSpec<T> {
    fn from(p: SabrParams<T>) -> Self {
        ModelSpec::Sabr(p)
    }
}

impl<T> From<HestonParams<T>> for ModelSpec<T> {
    fn from(p: HestonParams<T>) -> Self {
        ModelSpec::Heston(p)
    }
}

impl<T> From<SchobelZhuParams<T>> for ModelSpec<T> {
    fn from(p: SchobelZhuParams<T>) -> Self {
        ModelSpec::SchobelZhu(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptionType {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayoffKind {
    Vanilla,
    /// Arithmetic average of the asset over the fixing schedule.
    Asian,
}

/// Option contract on the undiscounted forward.
#[derive(Debug, Clone, PartialEq)]
pub struct Contract<T> {
    pub kind: PayoffKind,
    pub option_type: OptionType,
    pub strike: T,
    /// Maturity in years.
    pub maturity: T,
    /// Asian fixing times; empty for vanilla contracts.
    pub fixings: Vec<T>,
}

impl<T: Real> Contract<T> {
    pub fn vanilla(option_type: OptionType, strike: T, maturity: T) -> Self {
        Contract {
            kind: PayoffKind::Vanilla,
            option_type,
            strike,
            maturity,
            fixings: Vec::new(),
        }
    }

    pub fn asian(option_type: OptionType, strike: T, maturity: T, fixings: Vec<T>) -> Self {
        Contract {
            kind: PayoffKind::Asian,
            option_type,
            strike,
            maturity,
            fixings,
        }
    }

    /// `count` equally spaced fixings ending at `maturity`.
    pub fn regular_fixings(maturity: T, count: usize) -> Vec<T> {
        let n = T::count(count);
        (1..=count)
            .map(|j| {
                if j == count {
                    maturity
                } else {
                    maturity * T::count(j) / n
                }
            })
            .collect()
    }

    /// Copy of the contract with another strike.
    pub fn with_strike(&self, strike: T) -> Self {
        Contract { strike, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("strike", self.strike)?;
        check_positive("maturity", self.maturity)?;
        if self.kind == PayoffKind::Asian {
            let Some(&last) = self.fixings.last() else {
                return Err(Error::invalid("fixings", "must not be empty"));
            };
            if self.fixings.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::invalid("fixings", "not increasing"));
            }
            if !(self.fixings[0] > T::zero()) {
                return Err(Error::invalid("fixings", "must be positive"));
            }
            if last != self.maturity {
                return Err(Error::invalid("fixings", "last fixing must equal maturity"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Full two-factor Euler simulation.
    Mc1,
    /// Conditional Monte-Carlo: simulate volatility, integrate the asset
    /// factor in closed form.
    Mc2,
}

/// Monte-Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct McConfig {
    pub n_paths: usize,
    /// Maximum grid spacing is `1 / steps_per_year`.
    pub steps_per_year: usize,
    pub seed: u64,
    pub method: Method,
    /// Worker threads; `None` uses `MC2_THREADS` or the hardware default.
    pub workers: Option<usize>,
}

impl McConfig {
    pub fn new(n_paths: usize, steps_per_year: usize, seed: u64, method: Method) -> Self {
        McConfig {
            n_paths,
            steps_per_year,
            seed,
            method,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths", "must be >= 1"));
        }
        if self.steps_per_year == 0 {
            return Err(Error::invalid("steps_per_year", "must be >= 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers", "must be >= 1"));
        }
        Ok(())
    }
}

/// Price estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote<T> {
    pub price: T,
    /// Sample standard deviation of per-path values over `sqrt(n_paths)`.
    pub stderr: T,
    pub n_paths: usize,
    /// Wall-clock seconds spent pricing.
    pub runtime: f64,
}

/// Validated inputs together with the simulation grid built for them.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle<T> {
    pub model: ModelSpec<T>,
    pub contract: Contract<T>,
    pub config: McConfig,
    pub grid: TimeGrid<T>,
}

/// Checks every invariant and builds a grid containing all fixings and
/// parameter breakpoints exactly.
pub fn validate<T: Real>(model: ModelSpec<T>, contract: Contract<T>, config: McConfig) -> Result<Bundle<T>> {
    model.validate()?;
    contract.validate()?;
    config.validate()?;
    let extra: Vec<T> = model
        .breakpoints()
        .into_iter()
        .filter(|&k| k < contract.maturity)
        .collect();
    let grid = make_time_grid_with_breakpoints(contract.maturity, config.steps_per_year, &contract.fixings, &extra)?;
    Ok(Bundle {
        model,
        contract,
        config,
        grid,
    })
}

impl<T: Real> Bundle<T> {
    /// Re-runs [`validate`] on the bundle's parts.
    pub fn revalidate(self) -> Result<Self> {
        validate(self.model, self.contract, self.config)
    }
}
