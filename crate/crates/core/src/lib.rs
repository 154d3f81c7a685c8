//! Quantitative weak-mixing numerics for suspension flows over substitution
//! dynamical systems: substitution combinatorics, Perron eigen data, twisted
//! Birkhoff integrals, empirical spectral-measure estimates with certified
//! local bounds, integer-trace accounting for exceptional frequencies,
//! symbolic discrepancy and product-flow correlation decay.

pub mod assumptions;
pub mod discrepancy;
pub mod ek;
pub mod error;
pub mod flow;
pub mod perron;
pub mod product;
pub mod spectral;
pub mod substitution;
pub mod util;

pub use assumptions::{validate_assumptions, AssumptionReport};
pub use discrepancy::{birkhoff_sum, discrepancy_fit, zero_mass_bound, StepFunction};
pub use ek::{
    cover_budget, dimension_bound, ek_trace, ekn_membership, predict_next_k, CoverBudget, EkStats,
    EkTrace,
};
pub use error::{Error, Result};
pub use flow::{
    product_bound, tiling_length, twisted_birkhoff, twisted_sum, BoundConstants, CylFunction,
    Profile, RoofVector, TiledOrbit,
};
pub use perron::{
    char_poly_analysis, eigen_system, param_point, vandermonde_constants, CharPoly, EigenSystem,
    Irreducibility, ParamPoint, VandermondeData,
};
pub use product::{product_correlation_decay, PartnerFlow, ProductCorrelation};
pub use spectral::{
    decay_fit, exponent_budget, fejer_mass, orbit_correlation, strichartz_sup, varr_certificate,
    CorrelationMode, CorrelationTable, DecayFit, ExponentBudget, FejerMass, HolderCertificate,
};
pub use substitution::{population_vector, PopulationVector, ReturnWord, Substitution, Word};

pub use num_complex::Complex64;
