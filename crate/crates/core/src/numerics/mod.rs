//! Special functions shared by every other module.
//!
//! All functions are pure; none of them keep state between calls.

mod gamma;
mod ncx2;
mod normal;
mod quadrature;

pub use gamma::{ln_gamma, regularized_gamma, RegularizedGamma};
pub use ncx2::{marcum_q, NoncentralChi2};
pub use normal::{gaussian_cdf, gaussian_cdf_inv, gaussian_pdf, std_normal_cdf, std_normal_quantile};
pub use quadrature::{average_over_m, golden_section_max, ChiSquareAverager, GaussLegendre, M_AVERAGE_NODES};

use crate::{Error, Result};

pub const LOG2_E: f64 = core::f64::consts::LOG2_E;

/// A value known to lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::Domain {
                what: "probability",
                value,
            })
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

/// `p log2(1/p) + (1-p) log2(1/(1-p))`, zero at both endpoints.
pub fn binary_entropy(p: f64) -> Result<f64> {
    let p = Probability::new(p)?.value();
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-(p * libm::log2(p) + (1.0 - p) * libm::log2(1.0 - p)))
}

/// Thermal entropy `g(x) = (x+1) log2(x+1) - x log2 x`, with `g(0) = 0`.
pub fn thermal_entropy_g(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain {
            what: "thermal entropy argument",
            value: x,
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let nats = if x < 1.0 {
        // log1p keeps precision for the tiny occupation numbers seen near vacuum.
        (x + 1.0) * libm::log1p(x) - x * libm::log(x)
    } else {
        // Same quantity rearranged; the naive form cancels two terms of size x ln x.
        libm::log1p(x) + x * libm::log1p(1.0 / x)
    };
    Ok(nats * LOG2_E)
}
