//! Default numerical tolerances, kept in one place.
//!
//! The values are absolute unless a caller scales them; geometry here lives at
//! desk scale (matrix entries of order one), where these cutoffs separate
//! genuine degeneracy from double-precision round-off.

/// Transversality cutoff: |pairing| above this counts as transverse.
pub const TRANSVERSE: f64 = 1e-9;

/// Cone membership: eigenvalue / quadratic-form cutoff between the open cone,
/// its boundary, and the outside.
pub const CONE: f64 = 1e-9;

/// Symmetry defect allowed in a symmetric chart matrix.
pub const SYMMETRY: f64 = 1e-12;

/// Isotropy defect allowed in a model point after construction.
pub const ISOTROPY: f64 = 1e-10;

/// Group-element defect: |g^T J g - J| resp. |g^T B g - B| entrywise.
pub const GROUP: f64 = 1e-9;

/// Subspace / projective equality of canonicalized points.
pub const POINT_EQ: f64 = 1e-9;

/// Residual allowed when fitting the affine pairing model along a photon.
pub const AFFINE_FIT: f64 = 1e-9;

/// Root-finding and bisection resolution in the photon parameter.
pub const ROOT: f64 = 1e-10;

/// Splitness: allowed spread of the roots of an intersection polynomial.
pub const SPLIT: f64 = 1e-7;

/// Photon-direction validity (rank-one / lightlike defect, relative).
pub const PHOTON_DIR: f64 = 1e-10;

/// Comparative tolerance for metric identities (invariance, equalities).
pub const METRIC: f64 = 1e-8;

/// Slack permitted in the bracket invariant lower <= upper.
pub const BRACKET: f64 = 1e-9;

/// Boundary localization for extremality tests.
pub const BOUNDARY: f64 = 1e-7;

/// Relative floor below which homogeneous coordinates count as zero.
pub const HOMOGENEOUS: f64 = 1e-12;
