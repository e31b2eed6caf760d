//! Deterministic adaptive quadrature, importance sampling over power-law
//! spectral measures and log2 growth fits.

pub mod adaptive;
pub mod fit;
pub mod gauss;
pub mod sampling;

pub use adaptive::{
    adaptive_integrate, geometric_breaks, gk21, integrate, integrate_breakpoints, integrate_graded,
    integrate_to_infinity, AdaptiveOptions, IntegrationBox, IntegrationDomain, QuadratureResult,
};
pub use fit::{divergence_verdict, growth_fit, marginal_increments, GrowthFit, GrowthVerdict};
pub use gauss::GaussLegendre;
pub use sampling::{importance_sample_mu, stream_rng, uniform_rows, McEstimate, PowerLaw, WeightedPoint};
