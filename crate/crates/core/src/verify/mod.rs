//! Analytic cases, error metrics, refinement studies and reference checks.

mod cases;
mod convergence;
mod fields;
mod metrics;
mod monotone;
mod solve;
mod tpfa;

pub use cases::{make_case, AnalyticCase, CaseName, CaseParams, Physics};
pub use convergence::{convergence_study, fit_rate, fit_rates, GridFamily, RateTable};
pub use fields::{matching_determinant, singular_exponent, Factor, ScalarField, Separable, SingularField};
pub use metrics::{cell_error, cell_seminorm_error, error_metrics, face_error, ErrorReport};
pub use monotone::{monotonicity_check, MonotoneClass, MonotonicityMode, MonotonicityReport, DENSE_INVERSE_CAP};
pub use solve::{solve_case, DiscOptions, NumericalSolution};
pub use tpfa::tpfa_reference;
