//! Causal geometry of Shilov boundaries of tube-type Hermitian symmetric spaces.
//!
//! Two matrix models are implemented: the Lagrangian Grassmannian `Lag_r(R^{2r})`
//! for `Sp(2r, R)` (module [`lag`]) and the Einstein universe `Ein^{n-1,1}` for
//! `SO(n, 2)` (module [`ein`]). On top of them sit the model-generic layers:
//!
//! * [`causal`]: cone classification, causal order, diamonds, domains, duality,
//!   normalization of a causal pair to the standard diamond;
//! * [`photons`]: photons as rank-one chart lines, conjugacy, intersection with
//!   incidence hypersurfaces, intersection polynomials and their splitness;
//! * [`metrics`]: the one-chain Hilbert pseudo-distance, the Caratheodory
//!   estimate, and the Kobayashi distance as a certified lower/upper bracket;
//! * [`rigidity`]: component counts, extremal boundary points, and the
//!   diamond-recovery pipeline for membership-oracle domains.
//!
//! Everything is plain dense `f64` linear algebra at desk scale (ranks up to 8,
//! Minkowski dimensions up to 10). All randomized routines take explicit seeds
//! and are deterministic for a fixed seed.

pub mod causal;
pub mod ein;
pub mod lag;
pub mod metrics;
pub mod model;
pub(crate) mod opt;
pub mod photons;
pub mod projline;
pub mod rigidity;
pub mod sample;
pub mod tol;

use thiserror::Error;

/// Classification of a chart vector against the invariant cone `c0`.
///
/// `Boundary` includes the apex (the zero vector).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeClass {
    Interior,
    Boundary,
    Outside,
}

/// Causal relation of a second point relative to a first one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CausalRelation {
    /// y in I^+(x)
    StrictFuture,
    /// y in C^+(x), y != x
    FutureCone,
    /// y in I^-(x)
    StrictPast,
    /// y in C^-(x), y != x
    PastCone,
    Spacelike,
    Equal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cross ratio undefined for this quadruple")]
    UndefinedCrossRatio,
    #[error("point lies outside the interval")]
    OutsideInterval,
    #[error("chart overflow: point is not transverse to the chart's infinity")]
    ChartOverflow,
    #[error("degenerate pair: points are not transverse")]
    DegeneratePair,
    #[error("pair is not causal: second endpoint must lie in the open future of the first")]
    NotCausalPair,
    #[error("difference is not a photon direction")]
    NotConjugateDirection,
    #[error("points are not conjugate in the domain")]
    NotConjugate,
    #[error("chain link {0} is not a conjugate pair")]
    BadChainLink(usize),
    #[error("the reference point lies on the photon")]
    OnPhoton,
    #[error("non-transverse quadruple: a required pairing vanishes")]
    NonTransverseQuadruple,
    #[error("point lies outside the domain")]
    OutsideDomain,
    #[error("mixed model data: {0}")]
    ModelMismatch(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("search budget exceeded (best residual {residual:.3e})")]
    BudgetExceeded { best: Vec<f64>, residual: f64 },
    #[error("internal bracket violation: lower {lower} exceeds upper {upper}")]
    BracketViolation { lower: f64, upper: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
