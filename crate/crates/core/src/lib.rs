//! Numerical laboratory for heat kernel estimates of isotropic jump processes.

pub mod calculus;
pub mod derived;
pub mod envelope;
pub mod error;
pub mod quad;
pub mod real;
pub mod scale;
pub mod scaling;
pub mod sim;
pub mod table;

pub use error::{Error, Result};
pub use real::Real;
pub use scale::{
    check_integrability, exterior_integral, jump_density, make_scale, unit_sphere_area, Integrability, ScaleFunction,
    ScaleKind, ScaleSpec,
};

pub type ScaleFunctionF64 = ScaleFunction<f64>;
pub type ScaleFunctionF32 = ScaleFunction<f32>;
pub use scaling::{estimate_scaling, estimate_scaling_with_nodes, ScalingCertificate, ScalingMode};
pub use table::MonotoneTable;
pub type MonotoneTableF64 = MonotoneTable<f64>;
pub type MonotoneTableF32 = MonotoneTable<f32>;
pub use derived::{build_phi, comparability_report, ComparabilityReport, DerivedConfig, DerivedScales, KVariant};
pub type DerivedScalesF64 = DerivedScales<f64>;
pub type DerivedScalesF32 = DerivedScales<f32>;
pub use calculus::{check_scale_calculus, CalculusReport, InequalityCheck};
pub use envelope::{
    closed_form_oracle, closed_form_oracle_with_rate, envelope_g, evaluate as evaluate_envelopes, gaussian_form,
    green_envelope, lower_basic, lower_k, tail_lower, tail_upper, upper_exp, upper_k, EnvelopeParams, EnvelopeVariant,
    HKEnvelope, OracleExample, OracleValue,
};
