//! Tree, sliced hyperbolic plane and treebolic points.

mod metric;
mod point;
mod tree;

pub use metric::{geodesic_apex, hyperbolic_distance, ht_distance, phi_density};
pub use point::{HtPoint, HtPointWire};
pub use tree::{Node, TreeEnd, TreePoint, UpperEnd};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// The parameter quadruple (q, p, α, β) together with the derived drift
/// parameter a = βp q^(α−1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams", bound = "T: Real")]
pub struct Params<T> {
    q: T,
    p: u32,
    alpha: T,
    beta: T,
    a: T,
}

impl<T: Real> Params<T> {
    pub fn new(q: T, p: u32, alpha: T, beta: T) -> Result<Self> {
        if !(q > T::one()) || !q.is_finite() {
            return Err(Error::Domain(format!("q must exceed 1, got {q}")));
        }
        if p < 1 {
            return Err(Error::Domain("p must be at least 1".into()));
        }
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        if !alpha.is_finite() {
            return Err(Error::Domain(format!("alpha must be finite, got {alpha}")));
        }
        let a = beta * T::from_u32(p).unwrap() * q.powf(alpha - T::one());
        Ok(Params { q, p, alpha, beta, a })
    }

    pub fn q(&self) -> T {
        self.q
    }
    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn beta(&self) -> T {
        self.beta
    }
    /// a = βp q^(α−1).
    pub fn a(&self) -> T {
        self.a
    }
    pub fn p_real(&self) -> T {
        T::from_u32(self.p).unwrap()
    }
    pub fn ln_q(&self) -> T {
        self.q.ln()
    }
    /// Drift α − 1 of the log-height coordinate u = ln y.
    pub fn u_drift(&self) -> T {
        self.alpha - T::one()
    }
    /// βp, the weight of the upward flux in the vertical projection.
    pub fn beta_p(&self) -> T {
        self.beta * self.p_real()
    }
    /// Probability that an excursion from a bifurcation line starts upward: βp/(1+βp).
    pub fn line_up_probability(&self) -> T {
        let c = self.beta_p();
        c / (T::one() + c)
    }
    /// Up-probability a/(1+a) of the embedded vertical chain.
    pub fn embedded_up_probability(&self) -> T {
        self.a / (T::one() + self.a)
    }
    /// True when βp = 1 up to rounding, the case with a smooth plane projection.
    pub fn is_beta_p_one(&self) -> bool {
        (self.beta_p() - T::one()).abs() <= lit::<T>(1e-12).max(T::epsilon() * lit(8.0))
    }
    /// Parameters of the same family with a different β.
    pub fn with_beta(&self, beta: T) -> Result<Self> {
        Params::new(self.q, self.p, self.alpha, beta)
    }
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    q: f64,
    p: u32,
    alpha: f64,
    beta: f64,
}

impl<T: Real> TryFrom<RawParams> for Params<T> {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        Params::new(lit(r.q), r.p, lit(r.alpha), lit(r.beta))
    }
}

impl<T: Real> From<Params<T>> for RawParams {
    fn from(p: Params<T>) -> Self {
        RawParams {
            q: crate::scalar::to_f64(p.q),
            p: p.p,
            alpha: crate::scalar::to_f64(p.alpha),
            beta: crate::scalar::to_f64(p.beta),
        }
    }
}
