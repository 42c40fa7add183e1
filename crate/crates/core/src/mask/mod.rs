//! Soft cap masks approximated by polynomials in `s · c`, and the
//! precomputed bank that yields masked first-order moments.

mod bank;
mod fit;
mod layout;
mod profile;

pub use bank::{BankMask, MaskBank};
pub use fit::{
    fit_adaptive, fit_polynomial_mask, fitters, least_squares_fit, sup_residual, FitOptions, LeastSquares, MaskFitter,
    PolynomialMask, ProfilePolynomial, TaylorSeries, FIT_SAMPLES,
};
pub use layout::{layouts, min_separation, place_mask_centers, CenterLayout, Fibonacci, Icosahedral};
pub use profile::{mask_profile, MaskSpec};
