//! Conditional Monte-Carlo option pricing under stochastic volatility.
//!
//! For SABR (`beta` in `{0, 1}`), Heston-type and Schobel-Zhu-type models
//! the asset is conditionally Gaussian or lognormal given the path of the
//! volatility factor. The MC2 estimator simulates that factor only and
//! averages Bachelier or Black-Scholes prices over paths; MC1 simulates
//! both factors and acts as the reference.
//!
//! All routines are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases at the crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod closed_form;
pub mod error;
pub mod model;
pub mod moments;
pub mod path;
pub mod pricer;
pub mod scalar;
pub mod special;

pub use closed_form::{bachelier_price, black_scholes_price, hagan_implied_vol, implied_vol_from_price, VolModel};
pub use error::{Error, Result};
pub use model::{
    validate, Backbone, Bundle, Contract, HestonParams, McConfig, Method, ModelSpec, OptionType, PayoffKind, Quote,
    SabrParams, Schedule, SchobelZhuParams,
};
pub use moments::{
    conditional_moments, heston_asian_moments, heston_vanilla_moments, sabr_b0_asian_moments, sabr_b0_vanilla_moments,
    sabr_b1_vanilla_moments, schobel_zhu_asian_moments, schobel_zhu_vanilla_moments, ConditionalMoments,
};
pub use path::{
    gaussian_batch, make_time_grid, simulate_cir_var_path, simulate_ou_vol_path, simulate_sabr_vol_path, RngStream,
    TimeGrid, VolPath,
};
pub use pricer::{price, price_closed_form, price_mc1, price_mc2, price_strikes};
pub use scalar::Real;

pub type SabrParams64 = SabrParams<f64>;
pub type HestonParams64 = HestonParams<f64>;
pub type SchobelZhuParams64 = SchobelZhuParams<f64>;
pub type ModelSpec64 = ModelSpec<f64>;
pub type Contract64 = Contract<f64>;
pub type Quote64 = Quote<f64>;
pub type TimeGrid64 = TimeGrid<f64>;
pub type VolPath64 = VolPath<f64>;
pub type ConditionalMoments64 = ConditionalMoments<f64>;

pub type SabrParams32 = SabrParams<f32>;
pub type ModelSpec32 = ModelSpec<f32>;
pub type Contract32 = Contract<f32>;
pub type Quote32 = Quote<f32>;
