//! Matrix model of `Lag_r(R^{2r})`, the space of Lagrangian subspaces of the
//! standard symplectic `R^{2r}`: points as isotropic frames, the symmetric
//! chart `X -> span [I; X]`, the determinant pairing, the cone of positive
//! matrices, and elements of `Sp(2r, R)`.
//!
//! The symplectic form is `J = [[0, -I],[I, 0]]`. A chart point keeps the
//! frame `[I; X]` itself, so that for chart points the pairing evaluates to
//! `det(S - X)` exactly; only points outside the chart store an
//! orthonormalized frame.

use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{tol, ConeClass, Error, Result};

/// `(X + X^T) / 2`.
pub fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

fn check_square_symmetric(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != x.ncols() || x.nrows() == 0 {
        return Err(Error::InvalidInput(format!(
            "expected a nonempty square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let scale = 1.0 + x.amax();
    let defect = (x - x.transpose()).amax();
    if defect > 1e-9 * scale {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric (defect {defect:.3e})"
        )));
    }
    Ok(symmetrize(x))
}

/// The symplectic form matrix `J` of size `2r`.
pub fn form_matrix(r: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * r, 2 * r);
    for i in 0..r {
        j[(i, r + i)] = -1.0;
        j[(r + i, i)] = 1.0;
    }
    j
}

#[derive(Debug, Clone)]
enum Repr {
    /// `X` symmetric; the frame is `[I; X]`.
    Chart(DMatrix<f64>),
    /// Orthonormal `2r x r` frame of a plane not representable in the chart.
    Frame(DMatrix<f64>),
}

/// A Lagrangian `r`-plane in `R^{2r}`.
#[derive(Debug, Clone)]
pub struct LagPoint {
    r: usize,
    repr: Repr,
}

impl LagPoint {
    pub fn r(&self) -> usize {
        self.r
    }

    /// The chart base point `span(e_1, ..., e_r)`, i.e. `chart(0)`.
    pub fn base(r: usize) -> Self {
        LagPoint {
            r,
            repr: Repr::Chart(DMatrix::zeros(r, r)),
        }
    }

    /// The plane `span(e_{r+1}, ..., e_{2r})`, the point outside the chart
    /// against which the chart is defined.
    pub fn at_infinity(r: usize) -> Self {
        let mut f = DMatrix::zeros(2 * r, r);
        for i in 0..r {
            f[(r + i, i)] = 1.0;
        }
        LagPoint {
            r,
            repr: Repr::Frame(f),
        }
    }

    /// The plane `span [I; X]` for symmetric `X`.
    pub fn from_chart(x: &DMatrix<f64>) -> Result<Self> {
        let x = check_square_symmetric(x)?;
        Ok(LagPoint {
            r: x.nrows(),
            repr: Repr::Chart(x),
        })
    }

    /// Builds a point from any rank-`r` isotropic `2r x r` frame.
    pub fn from_frame(frame: &DMatrix<f64>) -> Result<Self> {
        if frame.nrows() == 0 || frame.nrows() % 2 != 0 || frame.nrows() != 2 * frame.ncols() {
            return Err(Error::InvalidInput(format!(
                "frame must be 2r x r, got {}x{}",
                frame.nrows(),
                frame.ncols()
            )));
        }
        let point = Self::from_frame_unchecked(frame)?;
        // Isotropy is certified on the canonical frame, where the scale is 1.
        let q = point.orthonormal_frame();
        let defect = (q.transpose() * form_matrix(point.r) * &q).amax();
        if defect > tol::ISOTROPY {
            return Err(Error::InvalidInput(format!(
                "frame is not isotropic (defect {defect:.3e})"
            )));
        }
        Ok(point)
    }

    /// Canonicalization without the isotropy certificate; group images of
    /// valid points stay isotropic to rounding, so the check is skipped.
    fn from_frame_unchecked(frame: &DMatrix<f64>) -> Result<Self> {
        let r = frame.ncols();
        let (q, rr) = frame.clone().qr().unpack();
        let mut dmax: f64 = 0.0;
        let mut dmin = f64::INFINITY;
        for i in 0..r {
            let d = rr[(i, i)].abs();
            dmax = dmax.max(d);
            dmin = dmin.min(d);
        }
        if !(dmax > 0.0) || dmin <= 1e-12 * dmax {
            return Err(Error::InvalidInput("frame is rank deficient".into()));
        }
        let top = q.rows(0, r).into_owned();
        let sigma_min = top.clone().svd(false, false).singular_values.min();
        // The plane is kept in chart form whenever all chart entries stay
        // below roughly 1/threshold; beyond that it counts as at infinity.
        if sigma_min > 1e-9 {
            let bot = q.rows(r, r).into_owned();
            let x = bot * top.try_inverse().ok_or(Error::ChartOverflow)?;
            Ok(LagPoint {
                r,
                repr: Repr::Chart(symmetrize(&x)),
            })
        } else {
            Ok(LagPoint {
                r,
                repr: Repr::Frame(q),
            })
        }
    }

    pub fn is_chart(&self) -> bool {
        matches!(self.repr, Repr::Chart(_))
    }

    /// The symmetric chart matrix, when the plane is transverse to the plane
    /// at infinity.
    pub fn chart(&self) -> Result<DMatrix<f64>> {
        match &self.repr {
            Repr::Chart(x) => Ok(x.clone()),
            Repr::Frame(_) => Err(Error::ChartOverflow),
        }
    }

    /// The stored canonical frame: `[I; X]` for chart points, orthonormal
    /// otherwise.
    pub fn frame(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Chart(x) => {
                let r = self.r;
                let mut f = DMatrix::zeros(2 * r, r);
                for i in 0..r {
                    f[(i, i)] = 1.0;
                }
                for i in 0..r {
                    for j in 0..r {
                        f[(r + i, j)] = x[(i, j)];
                    }
                }
                f
            }
            Repr::Frame(q) => q.clone(),
        }
    }

    fn orthonormal_frame(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Chart(_) => {
                let (q, _) = self.frame().qr().unpack();
                q
            }
            Repr::Frame(q) => q.clone(),
        }
    }

    /// `sin` of the largest principal angle between the two planes.
    pub fn subspace_distance(&self, other: &Self) -> f64 {
        let p1 = {
            let q = self.orthonormal_frame();
            &q * q.transpose()
        };
        let p2 = {
            let q = other.orthonormal_frame();
            &q * q.transpose()
        };
        (p1 - p2).svd(false, false).singular_values.max()
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        self.r == other.r && self.subspace_distance(other) <= tol::POINT_EQ
    }
}

/// `det(frame_xi^T J frame_x)` on the stored canonical frames. Zero exactly
/// when the planes are non-transverse. For two chart points this equals
/// `det(S - X)`; only the absolute value and ratios along a common pencil are
/// meaningful across representations.
pub fn pairing(x: &LagPoint, xi: &LagPoint) -> f64 {
    let fx = x.frame();
    let fxi = xi.frame();
    let r = x.r;
    // J [top; bot] = [-bot; top], so F_xi^T J F_x = xi_bot^T x_top - xi_top^T x_bot.
    let x_top = fx.rows(0, r);
    let x_bot = fx.rows(r, r);
    let xi_top = fxi.rows(0, r);
    let xi_bot = fxi.rows(r, r);
    (xi_bot.transpose() * x_top - xi_top.transpose() * x_bot).determinant()
}

pub fn is_transverse(x: &LagPoint, y: &LagPoint) -> bool {
    pairing(x, y).abs() > tol::TRANSVERSE
}

/// Classifies `X` against the closed cone of positive semidefinite matrices:
/// Interior iff the smallest eigenvalue exceeds the cone tolerance, Boundary
/// within it (the apex included), Outside below it.
pub fn cone_member(x: &DMatrix<f64>) -> ConeClass {
    let lambda_min = symmetrize(x).symmetric_eigen().eigenvalues.min();
    if lambda_min > tol::CONE {
        ConeClass::Interior
    } else if lambda_min >= -tol::CONE {
        ConeClass::Boundary
    } else {
        ConeClass::Outside
    }
}

/// The chart direction of the standard photon `t -> chart(t E_rr)`.
pub fn standard_photon_direction(r: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(r, r);
    e[(r - 1, r - 1)] = 1.0;
    e
}

/// Spectral decomposition `X = sum_i lambda_i u_i u_i^T` with unit vectors,
/// sorted by descending eigenvalue; near-zero eigenvalues are dropped, so the
/// reconstruction error stays below 1e-9 at desk scale.
pub fn rank_one_decompose(x: &DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    let xs = symmetrize(x);
    let cut = 1e-10 * (1.0 + xs.amax());
    let eig = xs.symmetric_eigen();
    let mut terms: Vec<(f64, DVector<f64>)> = Vec::new();
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() <= cut {
            continue;
        }
        let mut u: DVector<f64> = eig.eigenvectors.column(i).into_owned();
        // Sign gauge: largest-magnitude component positive.
        let k = u.iamax();
        if u[k] < 0.0 {
            u.neg_mut();
        }
        terms.push((lambda, u));
    }
    terms.sort_by(|a, b| b.0.total_cmp(&a.0));
    terms
}

/// Symmetric square root of a positive definite matrix.
pub fn sym_sqrt(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cs = check_square_symmetric(c)?;
    let n = cs.nrows();
    let eig = cs.symmetric_eigen();
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::InvalidInput(
            "matrix square root needs a positive definite input".into(),
        ));
    }
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = eig.eigenvalues[i].sqrt();
    }
    Ok(symmetrize(
        &(&eig.eigenvectors * d * eig.eigenvectors.transpose()),
    ))
}

/// An element of `Sp(2r, R)`.
#[derive(Debug, Clone)]
pub struct SpElement {
    g: DMatrix<f64>,
}

impl SpElement {
    /// Validates `g^T J g = J`.
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        if g.nrows() != g.ncols() || g.nrows() == 0 || g.nrows() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "symplectic matrix must be 2r x 2r, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        let e = Self { g };
        if e.defect() > tol::GROUP * (1.0 + e.g.amax().powi(2)) {
            return Err(Error::InvalidInput(format!(
                "matrix is not symplectic (defect {:.3e})",
                e.defect()
            )));
        }
        Ok(e)
    }

    pub fn r(&self) -> usize {
        self.g.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// `max |g^T J g - J|`.
    pub fn defect(&self) -> f64 {
        let j = form_matrix(self.r());
        (self.g.transpose() * &j * &self.g - j).amax()
    }

    pub fn identity(r: usize) -> Self {
        Self {
            g: DMatrix::identity(2 * r, 2 * r),
        }
    }

    /// The dilation acting on the chart by `X -> t X`.
    pub fn dilation(r: usize, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!("dilation needs t > 0, got {t}")));
        }
        let mut g = DMatrix::zeros(2 * r, 2 * r);
        let (s, si) = (t.sqrt(), 1.0 / t.sqrt());
        for i in 0..r {
            g[(i, i)] = si;
            g[(r + i, r + i)] = s;
        }
        Ok(Self { g })
    }

    /// The translation acting on the chart by `X -> X + B`.
    pub fn translation(b: &DMatrix<f64>) -> Result<Self> {
        let b = check_square_symmetric(b)?;
        let r = b.nrows();
        let mut g = DMatrix::identity(2 * r, 2 * r);
        for i in 0..r {
            for j in 0..r {
                g[(r + i, j)] = b[(i, j)];
            }
        }
        Ok(Self { g })
    }

    /// The opposite unipotent; its chart action is the Mobius map
    /// `X -> X (I + B X)^{-1}` where defined.
    pub fn upper_translation(b: &DMatrix<f64>) -> Result<Self> {
        let b = check_square_symmetric(b)?;
        let r = b.nrows();
        let mut g = DMatrix::identity(2 * r, 2 * r);
        for i in 0..r {
            for j in 0..r {
                g[(i, r + j)] = b[(i, j)];
            }
        }
        Ok(Self { g })
    }

    /// `diag(A, A^{-T})`, acting on the chart by `X -> A^{-T} X A^{-1}`.
    pub fn levi(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::InvalidInput("Levi factor must be square".into()));
        }
        let r = a.nrows();
        let a_inv_t = a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("Levi factor must be invertible".into()))?
            .transpose();
        let mut g = DMatrix::zeros(2 * r, 2 * r);
        for i in 0..r {
            for j in 0..r {
                g[(i, j)] = a[(i, j)];
                g[(r + i, r + j)] = a_inv_t[(i, j)];
            }
        }
        Ok(Self { g })
    }

    /// `[[I, -I],[0, I]]`: the chart Mobius map `X -> X (I - X)^{-1}`, which
    /// carries the order interval `(0, I)` onto the positive cone.
    pub fn cayley(r: usize) -> Self {
        let mut g = DMatrix::identity(2 * r, 2 * r);
        for i in 0..r {
            g[(i, r + i)] = -1.0;
        }
        Self { g }
    }

    /// `J` itself, swapping the chart base point and the point at infinity.
    pub fn swap(r: usize) -> Self {
        Self { g: form_matrix(r) }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            g: &self.g * &other.g,
        }
    }

    /// `g^{-1} = J^{-1} g^T J`, exact for symplectic matrices.
    pub fn inverse(&self) -> Self {
        let j = form_matrix(self.r());
        Self {
            g: -(&j * self.g.transpose() * &j),
        }
    }

    pub fn act(&self, x: &LagPoint) -> LagPoint {
        let f = &self.g * x.frame();
        // Group images of genuine planes never lose rank.
        LagPoint::from_frame_unchecked(&f).expect("group image of a valid frame")
    }

    /// Chart Mobius action; `ChartOverflow` when the image leaves the chart.
    pub fn act_chart(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.act(&LagPoint::from_chart(x)?).chart()
    }
}

/// The element carrying the order interval `(p, q)` in the chart onto the
/// positive cone, `p` to the chart base point and `q` to the point at
/// infinity. Built as Cayley after rescaling `q - p` to the identity by the
/// symmetric square root, so the construction commutes with Levi conjugation.
pub fn standardize(xp: &DMatrix<f64>, xq: &DMatrix<f64>) -> Result<SpElement> {
    let xp = check_square_symmetric(xp)?;
    let xq = check_square_symmetric(xq)?;
    if xp.nrows() != xq.nrows() {
        return Err(Error::ModelMismatch("endpoint chart sizes differ"));
    }
    let c = &xq - &xp;
    match cone_member(&c) {
        ConeClass::Interior => {}
        _ => {
            return Err(if c.determinant().abs() <= tol::TRANSVERSE {
                Error::DegeneratePair
            } else {
                Error::NotCausalPair
            })
        }
    }
    let r = xp.nrows();
    let a = sym_sqrt(&c)?;
    Ok(SpElement::cayley(r)
        .compose(&SpElement::levi(&a)?)
        .compose(&SpElement::translation(&(-&xp))?))
}

impl Serialize for LagPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let f = self.frame();
        let rows: Vec<Vec<f64>> = (0..f.nrows())
            .map(|i| (0..f.ncols()).map(|j| f[(i, j)]).collect())
            .collect();
        let mut state = serde_json::Map::new();
        state.insert(
            "frame".to_string(),
            serde_json::to_value(rows).map_err(serde::ser::Error::custom)?,
        );
        serde_json::Value::Object(state).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LagPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            frame: Vec<Vec<f64>>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let nrows = raw.frame.len();
        let ncols = raw.frame.first().map_or(0, Vec::len);
        if nrows == 0 || raw.frame.iter().any(|row| row.len() != ncols) {
            return Err(D::Error::custom("frame rows must be nonempty and equal length"));
        }
        let m = DMatrix::from_fn(nrows, ncols, |i, j| raw.frame[i][j]);
        LagPoint::from_frame(&m).map_err(|e| D::Error::custom(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    fn random_sym(rng: &mut impl Rng, r: usize, scale: f64) -> DMatrix<f64> {
        let m = DMatrix::from_fn(r, r, |_, _| rng.gen_range(-scale..scale));
        symmetrize(&m)
    }

    /// Random element of the big cell `U^+ L U^-` plus an occasional swap.
    fn random_sp(rng: &mut impl Rng, r: usize) -> SpElement {
        let b1 = random_sym(rng, r, 1.0);
        let b2 = random_sym(rng, r, 1.0);
        let mut a = DMatrix::from_fn(r, r, |_, _| rng.gen_range(-1.0..1.0));
        for i in 0..r {
            a[(i, i)] += 2.0; // keep the Levi factor comfortably invertible
        }
        let g = SpElement::upper_translation(&b1)
            .unwrap()
            .compose(&SpElement::levi(&a).unwrap())
            .compose(&SpElement::translation(&b2).unwrap())
            .compose(&SpElement::dilation(r, rng.gen_range(0.2..5.0)).unwrap());
        if rng.gen_bool(0.3) {
            g.compose(&SpElement::swap(r))
        } else {
            g
        }
    }

    #[test]
    fn chart_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for r in 1..=4 {
            for _ in 0..25 {
                let x = random_sym(&mut rng, r, 3.0);
                let p = LagPoint::from_chart(&x).unwrap();
                let back = p.chart().unwrap();
                assert!((&back - &x).amax() <= 1e-10);
            }
        }
    }

    #[test]
    fn base_and_infinity_charts() {
        assert_eq!(LagPoint::base(3).chart().unwrap(), DMatrix::zeros(3, 3));
        assert!(matches!(
            LagPoint::at_infinity(3).chart(),
            Err(Error::ChartOverflow)
        ));
    }

    #[test]
    fn identity_chart_frame() {
        let p = LagPoint::from_chart(&DMatrix::identity(2, 2)).unwrap();
        let f = p.frame();
        let expected = mat(&[
            &[1.0, 0.0],
            &[0.0, 1.0],
            &[1.0, 0.0],
            &[0.0, 1.0],
        ]);
        assert!((f - expected).amax() <= 1e-12);
    }

    #[test]
    fn frame_recovers_chart() {
        let s = mat(&[&[1.0, 2.0], &[2.0, 5.0]]);
        let mut f = DMatrix::zeros(4, 2);
        f[(0, 0)] = 1.0;
        f[(1, 1)] = 1.0;
        for i in 0..2 {
            for j in 0..2 {
                f[(2 + i, j)] = s[(i, j)];
            }
        }
        let p = LagPoint::from_frame(&f).unwrap();
        assert!((p.chart().unwrap() - s).amax() <= 1e-10);
    }

    #[test]
    fn nonisotropic_frame_rejected() {
        // span(e1, e3) in r=2 coordinates is not isotropic: omega(e1, e3) = -1.
        let mut f = DMatrix::zeros(4, 2);
        f[(0, 0)] = 1.0;
        f[(2, 1)] = 1.0;
        assert!(LagPoint::from_frame(&f).is_err());
    }

    #[test]
    fn pairing_chart_pairs() {
        let zero = LagPoint::base(2);
        let id = LagPoint::from_chart(&DMatrix::identity(2, 2)).unwrap();
        // Chart frames give det(S - X) exactly: det(I - 0) = 1.
        assert!((pairing(&zero, &id) - 1.0).abs() <= 1e-12);
        assert!(is_transverse(&zero, &id));
        assert_eq!(pairing(&id, &id), 0.0);
        assert!(!is_transverse(&id, &id));
    }

    #[test]
    fn rank_one_shift_is_nontransverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for r in 2..=3 {
            let x = random_sym(&mut rng, r, 2.0);
            let u = DVector::from_fn(r, |_, _| rng.gen_range(-1.0f64..1.0));
            let shifted = &x + &u * u.transpose();
            let a = LagPoint::from_chart(&x).unwrap();
            let b = LagPoint::from_chart(&shifted).unwrap();
            assert!(pairing(&a, &b).abs() <= 1e-9, "rank-one difference must pair to zero");
            assert!(!is_transverse(&a, &b));
        }
    }

    #[test]
    fn cone_classification() {
        assert_eq!(
            cone_member(&mat(&[&[2.0, 1.0], &[1.0, 2.0]])),
            ConeClass::Interior
        );
        assert_eq!(cone_member(&DMatrix::zeros(2, 2)), ConeClass::Boundary);
        assert_eq!(
            cone_member(&mat(&[&[1.0, 2.0], &[2.0, 1.0]])),
            ConeClass::Outside
        );
    }

    #[test]
    fn group_action_on_charts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_sym(&mut rng, 3, 2.0);
        let b = random_sym(&mut rng, 3, 2.0);

        let id = SpElement::identity(3);
        let p = LagPoint::from_chart(&x).unwrap();
        assert!(id.act(&p).approx_eq(&p));

        let t = 2.75;
        let dil = SpElement::dilation(3, t).unwrap();
        assert!((dil.act_chart(&x).unwrap() - &x * t).amax() <= 1e-12);

        let tr = SpElement::translation(&b).unwrap();
        assert!((tr.act_chart(&x).unwrap() - (&x + &b)).amax() <= 1e-12);
    }

    #[test]
    fn dilation_one_is_identity() {
        let d = SpElement::dilation(2, 1.0).unwrap();
        assert!((d.matrix() - DMatrix::identity(4, 4)).amax() == 0.0);
    }

    #[test]
    fn translations_invert() {
        let b = mat(&[&[0.5, -1.0], &[-1.0, 2.0]]);
        let g = SpElement::translation(&b)
            .unwrap()
            .compose(&SpElement::translation(&(-&b)).unwrap());
        assert!((g.matrix() - DMatrix::identity(4, 4)).amax() <= 1e-12);
    }

    #[test]
    fn levi_normalizes_gram_matrices() {
        // X = A^T A goes to the identity under levi(A).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for r in 1..=4 {
            let mut a = DMatrix::from_fn(r, r, |_, _| rng.gen_range(-1.0f64..1.0));
            for i in 0..r {
                a[(i, i)] += 2.0;
            }
            let x = a.transpose() * &a;
            let g = SpElement::levi(&a).unwrap();
            let y = g.act_chart(&symmetrize(&x)).unwrap();
            assert!((y - DMatrix::identity(r, r)).amax() <= 1e-9);
        }
    }

    #[test]
    fn constructors_are_symplectic() {
        let b = mat(&[&[0.5, -1.0], &[-1.0, 2.0]]);
        let a = mat(&[&[2.0, 1.0], &[0.0, 3.0]]);
        for g in [
            SpElement::identity(2),
            SpElement::dilation(2, 3.0).unwrap(),
            SpElement::translation(&b).unwrap(),
            SpElement::upper_translation(&b).unwrap(),
            SpElement::levi(&a).unwrap(),
            SpElement::cayley(2),
            SpElement::swap(2),
        ] {
            assert!(g.defect() <= 1e-12, "defect {}", g.defect());
            let gi = g.inverse();
            assert!((g.compose(&gi).matrix() - DMatrix::identity(4, 4)).amax() <= 1e-12);
        }
    }

    #[test]
    fn cayley_maps_interval_to_cone() {
        // chart(I/2) sits in the order interval (0, I); its Cayley image is
        // (I/2)(I - I/2)^{-1} = I, interior to the cone.
        let g = SpElement::cayley(2);
        let y = g.act_chart(&(DMatrix::identity(2, 2) * 0.5)).unwrap();
        assert!((y.clone() - DMatrix::identity(2, 2)).amax() <= 1e-12);
        assert_eq!(cone_member(&y), ConeClass::Interior);
        // chart(I) leaves the chart under Cayley.
        assert!(matches!(
            g.act_chart(&DMatrix::identity(2, 2)),
            Err(Error::ChartOverflow)
        ));
    }

    #[test]
    fn standard_photon_direction_properties() {
        let e = standard_photon_direction(2);
        assert!((e.clone() - mat(&[&[0.0, 0.0], &[0.0, 1.0]])).amax() == 0.0);
        assert_eq!(cone_member(&e), ConeClass::Boundary);
        // The standard photon stays incident to the chart base point.
        let xi0 = LagPoint::base(2);
        for t in [-2.0, -0.5, 0.7, 3.0] {
            let p = LagPoint::from_chart(&(&e * t)).unwrap();
            assert!(pairing(&p, &xi0).abs() <= 1e-12);
        }
    }

    #[test]
    fn rank_one_decomposition() {
        let terms = rank_one_decompose(&DMatrix::identity(2, 2));
        assert_eq!(terms.len(), 2);
        assert!((terms[0].0 - 1.0).abs() <= 1e-12 && (terms[1].0 - 1.0).abs() <= 1e-12);

        let mut x = DMatrix::zeros(3, 3);
        x[(0, 0)] = 2.0;
        let terms = rank_one_decompose(&x);
        assert_eq!(terms.len(), 1);
        assert!((terms[0].0 - 2.0).abs() <= 1e-12);
        assert!((terms[0].1[0].abs() - 1.0).abs() <= 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for r in 1..=5 {
            let x = random_sym(&mut rng, r, 4.0);
            let mut rec = DMatrix::zeros(r, r);
            for (lambda, u) in rank_one_decompose(&x) {
                rec += &u * u.transpose() * lambda;
            }
            assert!((rec - x).amax() <= 1e-9);
        }
    }

    #[test]
    fn standardize_maps_endpoints_to_standard_pair() {
        let p = DMatrix::zeros(2, 2);
        let q = DMatrix::identity(2, 2) * 2.0;
        let g = standardize(&p, &q).unwrap();
        assert!(g.act(&LagPoint::from_chart(&p).unwrap()).approx_eq(&LagPoint::base(2)));
        assert!(g
            .act(&LagPoint::from_chart(&q).unwrap())
            .approx_eq(&LagPoint::at_infinity(2)));
        // A midpoint lands inside the positive cone.
        let mid = g.act_chart(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(cone_member(&mid), ConeClass::Interior);
    }

    #[test]
    fn standardize_rejects_bad_pairs() {
        let p = DMatrix::zeros(2, 2);
        let mut boundary = DMatrix::zeros(2, 2);
        boundary[(0, 0)] = 1.0;
        assert!(matches!(
            standardize(&p, &boundary),
            Err(Error::DegeneratePair)
        ));
        let spacelike = mat(&[&[1.0, 0.0], &[0.0, -1.0]]);
        assert!(matches!(
            standardize(&p, &spacelike),
            Err(Error::NotCausalPair)
        ));
    }

    #[test]
    fn json_round_trip() {
        let x = mat(&[&[1.0, 2.0], &[2.0, 5.0]]);
        let p = LagPoint::from_chart(&x).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: LagPoint = serde_json::from_str(&s).unwrap();
        assert!(p.approx_eq(&q));
        let inf: LagPoint = serde_json::from_str(
            &serde_json::to_string(&LagPoint::at_infinity(2)).unwrap(),
        )
        .unwrap();
        assert!(inf.approx_eq(&LagPoint::at_infinity(2)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn isotropy_and_action_laws(seed in 0u64..5000, r in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = LagPoint::from_chart(&random_sym(&mut rng, r, 2.0)).unwrap();
            let g = random_sp(&mut rng, r);
            let h = random_sp(&mut rng, r);

            // Isotropy defect of the canonical frame after an action.
            let y = g.act(&x);
            let q = y.orthonormal_frame();
            let defect = (q.transpose() * form_matrix(r) * &q).amax();
            prop_assert!(defect <= tol::ISOTROPY, "defect {defect}");

            // Left action: (gh) . x = g . (h . x).
            let lhs = g.compose(&h).act(&x);
            let rhs = g.act(&h.act(&x));
            prop_assert!(lhs.subspace_distance(&rhs) <= 1e-9);

            // Transversality is symmetric.
            let z = LagPoint::from_chart(&random_sym(&mut rng, r, 2.0)).unwrap();
            prop_assert_eq!(is_transverse(&y, &z), is_transverse(&z, &y));
        }

        #[test]
        fn pairing_matches_chart_determinant_along_pencils(seed in 0u64..5000, r in 1usize..=4) {
            // |pairing(chart X(t), chart S)| = |det(S - X(t))| with constant
            // ratio 1 along the whole pencil X(t) = X0 + t D.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x0 = random_sym(&mut rng, r, 2.0);
            let d = random_sym(&mut rng, r, 1.0);
            let s = random_sym(&mut rng, r, 2.0);
            let xi = LagPoint::from_chart(&s).unwrap();
            for t in [-1.5, -0.3, 0.0, 0.4, 1.1] {
                let xt = &x0 + &d * t;
                let p = pairing(&LagPoint::from_chart(&xt).unwrap(), &xi).abs();
                let dt = (&s - &xt).determinant().abs();
                prop_assert!((p - dt).abs() <= 1e-8 * (1.0 + dt), "t={t}: {p} vs {dt}");
            }
        }
    }
}
