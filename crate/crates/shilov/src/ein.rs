//! Matrix model of the Einstein universe `Ein^{n-1,1}`: isotropic lines of a
//! quadratic form of signature `(n, 2)` on `R^{n+2}`, with a Minkowski chart
//! of dimension `n` and the flat causal cone.
//!
//! Coordinates `0..n-1` of the chart are Minkowski coordinates, the last one
//! timelike: `psi(v) = v_0^2 + ... + v_{n-2}^2 - v_{n-1}^2`. A chart vector
//! `v` lifts to the isotropic vector `(v, psi(v), 1)`, and the ambient form
//! evaluates on two lifts to `-psi(u - v)/2`.

use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{tol, ConeClass, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minkowski square `psi(v) = sum_{i < n-1} v_i^2 - v_{n-1}^2`.
pub fn psi(v: &DVector<f64>) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n - 1 {
        s += v[i] * v[i];
    }
    s - v[n - 1] * v[n - 1]
}

/// Polarization of `psi`.
pub fn q_form(v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n - 1 {
        s += v[i] * w[i];
    }
    s - v[n - 1] * w[n - 1]
}

/// The ambient form of signature `(n, 2)` on `R^{n+2}`: Minkowski on the
/// first `n` coordinates and `-(v_n w_{n+1} + v_{n+1} w_n)/2` on the last two.
pub fn b_pair(v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let n = v.len() - 2;
    let mut s = 0.0;
    for i in 0..n - 1 {
        s += v[i] * w[i];
    }
    s - v[n - 1] * w[n - 1] - 0.5 * (v[n] * w[n + 1] + v[n + 1] * w[n])
}

/// Gram matrix of the ambient form.
pub fn form_matrix(n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n + 2, n + 2);
    for i in 0..n - 1 {
        b[(i, i)] = 1.0;
    }
    b[(n - 1, n - 1)] = -1.0;
    b[(n, n + 1)] = -0.5;
    b[(n + 1, n)] = -0.5;
    b
}

fn form_matrix_inv(n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n + 2, n + 2);
    for i in 0..n - 1 {
        b[(i, i)] = 1.0;
    }
    b[(n - 1, n - 1)] = -1.0;
    b[(n, n + 1)] = -2.0;
    b[(n + 1, n)] = -2.0;
    b
}

/// An isotropic line of the ambient form, stored by a pivot-scaled
/// representative: the last coordinate that is not negligibly small is 1.
#[derive(Debug, Clone)]
pub struct EinPoint {
    n: usize,
    rep: DVector<f64>,
}

fn canonical_rep(rep: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = rep.amax();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidInput(
            "point representative must be a nonzero finite vector".into(),
        ));
    }
    let pivot = (0..rep.len())
        .rev()
        .find(|&i| rep[i].abs() > 1e-9 * scale)
        .expect("a coordinate at the max magnitude always qualifies");
    Ok(rep / rep[pivot])
}

impl EinPoint {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Validates isotropy and pivot-scales.
    pub fn from_rep(rep: &DVector<f64>) -> Result<Self> {
        if rep.len() < 4 {
            return Err(Error::InvalidInput(
                "representative must have at least 4 coordinates".into(),
            ));
        }
        let rep = canonical_rep(rep)?;
        let defect = b_pair(&rep, &rep).abs();
        if defect > tol::ISOTROPY * (1.0 + rep.amax().powi(2)) {
            return Err(Error::InvalidInput(format!(
                "representative is not isotropic (defect {defect:.3e})"
            )));
        }
        Ok(EinPoint {
            n: rep.len() - 2,
            rep,
        })
    }

    fn from_rep_unchecked(rep: &DVector<f64>) -> Self {
        let rep = canonical_rep(rep).expect("group image of a valid representative");
        EinPoint {
            n: rep.len() - 2,
            rep,
        }
    }

    /// Lift of a chart vector: `(v, psi(v), 1)`.
    pub fn from_chart(v: &DVector<f64>) -> Result<Self> {
        let n = v.len();
        if n < 2 {
            return Err(Error::InvalidInput("chart dimension must be >= 2".into()));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("chart vector must be finite".into()));
        }
        let mut rep = DVector::zeros(n + 2);
        for i in 0..n {
            rep[i] = v[i];
        }
        rep[n] = psi(v);
        rep[n + 1] = 1.0;
        Ok(EinPoint { n, rep })
    }

    /// The chart base point, the line through `e_{n+2}`.
    pub fn base(n: usize) -> Self {
        let mut rep = DVector::zeros(n + 2);
        rep[n + 1] = 1.0;
        EinPoint { n, rep }
    }

    /// The line through `e_{n+1}`, outside the chart.
    pub fn at_infinity(n: usize) -> Self {
        let mut rep = DVector::zeros(n + 2);
        rep[n] = 1.0;
        EinPoint { n, rep }
    }

    pub fn rep(&self) -> &DVector<f64> {
        &self.rep
    }

    pub fn is_chart(&self) -> bool {
        // Pivot scaling leaves the last coordinate at exactly 1 on chart points.
        self.rep[self.n + 1] == 1.0
    }

    pub fn chart(&self) -> Result<DVector<f64>> {
        if !self.is_chart() {
            return Err(Error::ChartOverflow);
        }
        Ok(DVector::from_fn(self.n, |i, _| self.rep[i]))
    }

    /// Distance of the unit representatives, up to sign.
    pub fn proj_distance(&self, other: &Self) -> f64 {
        let a = &self.rep / self.rep.norm();
        let b = &other.rep / other.rep.norm();
        (&a - &b).norm().min((&a + &b).norm())
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        self.n == other.n && self.proj_distance(other) <= tol::POINT_EQ
    }
}

/// `-2 b(rep_x, rep_xi)` on the canonical representatives. Zero exactly when
/// the points are non-transverse; for two chart points this is
/// `psi(u - v)` on the nose.
pub fn pairing(x: &EinPoint, xi: &EinPoint) -> f64 {
    -2.0 * b_pair(&x.rep, &xi.rep)
}

pub fn is_transverse(x: &EinPoint, y: &EinPoint) -> bool {
    pairing(x, y).abs() > tol::TRANSVERSE
}

/// Classifies a chart vector against the closed future cone
/// `{psi <= 0, v_time >= 0}`.
pub fn cone_member(v: &DVector<f64>) -> ConeClass {
    let p = psi(v);
    let t = v[v.len() - 1];
    if p < -tol::CONE && t > 0.0 {
        ConeClass::Interior
    } else if p.abs() <= tol::CONE && t >= 0.0 {
        ConeClass::Boundary
    } else {
        ConeClass::Outside
    }
}

/// Future lightlike unit vectors, uniformly distributed over the spatial
/// sphere; deterministic in the seed.
pub fn lightlike_directions(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut s = DVector::from_fn(n - 1, |_, _| {
            let u: f64 = rng.gen_range(-1.0..1.0);
            let v: f64 = rng.gen_range(-1.0..1.0);
            // Box-Muller keeps the spatial direction rotation invariant.
            (-2.0 * u.abs().max(1e-12).ln()).sqrt() * (std::f64::consts::PI * v).cos()
        });
        let norm = s.norm();
        if norm < 1e-6 {
            continue;
        }
        s /= norm;
        let mut d = DVector::zeros(n);
        for i in 0..n - 1 {
            d[i] = s[i] / 2f64.sqrt();
        }
        d[n - 1] = 1.0 / 2f64.sqrt();
        out.push(d);
    }
    out
}

/// An element of the orthogonal group of the ambient form.
#[derive(Debug, Clone)]
pub struct SOElement {
    g: DMatrix<f64>,
}

impl SOElement {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        if g.nrows() != g.ncols() || g.nrows() < 4 {
            return Err(Error::InvalidInput(format!(
                "group matrix must be (n+2)x(n+2) with n >= 2, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        let e = Self { g };
        if e.defect() > tol::GROUP * (1.0 + e.g.amax().powi(2)) {
            return Err(Error::InvalidInput(format!(
                "matrix does not preserve the form (defect {:.3e})",
                e.defect()
            )));
        }
        Ok(e)
    }

    pub fn n(&self) -> usize {
        self.g.nrows() - 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// `max |g^T B g - B|`.
    pub fn defect(&self) -> f64 {
        let b = form_matrix(self.n());
        (self.g.transpose() * &b * &self.g - b).amax()
    }

    pub fn identity(n: usize) -> Self {
        Self {
            g: DMatrix::identity(n + 2, n + 2),
        }
    }

    /// Chart action `v -> t v`.
    pub fn dilation(n: usize, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!("dilation needs t > 0, got {t}")));
        }
        let mut g = DMatrix::identity(n + 2, n + 2);
        g[(n, n)] = t;
        g[(n + 1, n + 1)] = 1.0 / t;
        Ok(Self { g })
    }

    /// Chart action `v -> v + v0`.
    pub fn translation(v0: &DVector<f64>) -> Result<Self> {
        let n = v0.len();
        if n < 2 {
            return Err(Error::InvalidInput("chart dimension must be >= 2".into()));
        }
        let mut g = DMatrix::identity(n + 2, n + 2);
        for i in 0..n {
            g[(i, n + 1)] = v0[i];
            // Row n carries the polarization 2 q(v0, .).
            g[(n, i)] = if i < n - 1 { 2.0 * v0[i] } else { -2.0 * v0[i] };
        }
        g[(n, n + 1)] = psi(v0);
        Ok(Self { g })
    }

    /// The opposite unipotent: conjugate of a translation by the swap.
    pub fn upper_translation(v0: &DVector<f64>) -> Result<Self> {
        let n = v0.len();
        let s = Self::swap(n);
        Ok(s.compose(&Self::translation(v0)?).compose(&s))
    }

    /// Embeds a Lorentz matrix `m` (preserving `psi` on the chart) as
    /// `diag(m, 1, 1)`; the chart action is `v -> m v`.
    pub fn levi(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n || n < 2 {
            return Err(Error::InvalidInput("Levi factor must be square n x n".into()));
        }
        let mut h = DMatrix::identity(n, n);
        h[(n - 1, n - 1)] = -1.0;
        let defect = (m.transpose() * &h * m - &h).amax();
        if defect > tol::GROUP * (1.0 + m.amax().powi(2)) {
            return Err(Error::InvalidInput(format!(
                "Levi factor is not Lorentz (defect {defect:.3e})"
            )));
        }
        let mut g = DMatrix::identity(n + 2, n + 2);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = m[(i, j)];
            }
        }
        Ok(Self { g })
    }

    /// Exchanges the chart base point and the point at infinity.
    pub fn swap(n: usize) -> Self {
        let mut g = DMatrix::identity(n + 2, n + 2);
        g[(n, n)] = 0.0;
        g[(n + 1, n + 1)] = 0.0;
        g[(n, n + 1)] = 1.0;
        g[(n + 1, n)] = 1.0;
        Self { g }
    }

    /// The chart Mobius map sending `t e_time` to `t/(1-t) e_time`, carrying
    /// the order interval `(0, e_time)` onto the future cone. Identity on the
    /// spatial coordinates' complement of the (time, n, n+1) block.
    pub fn cayley(n: usize) -> Self {
        let mut g = DMatrix::identity(n + 2, n + 2);
        let (x, y, z) = (n - 1, n, n + 1);
        g[(x, x)] = 1.0;
        g[(x, y)] = 1.0;
        g[(z, x)] = -2.0;
        g[(z, y)] = -1.0;
        g[(z, z)] = 1.0;
        Self { g }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            g: &self.g * &other.g,
        }
    }

    /// `g^{-1} = B^{-1} g^T B`, exact for form-preserving matrices.
    pub fn inverse(&self) -> Self {
        let n = self.n();
        Self {
            g: form_matrix_inv(n) * self.g.transpose() * form_matrix(n),
        }
    }

    pub fn act(&self, x: &EinPoint) -> EinPoint {
        EinPoint::from_rep_unchecked(&(&self.g * &x.rep))
    }

    /// Chart action; `ChartOverflow` when the image leaves the chart.
    pub fn act_chart(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.act(&EinPoint::from_chart(v)?).chart()
    }
}

/// The Lorentz boost carrying the future unit timelike axis `e_time` to the
/// normalization of `u`; built from two reflections, so it commutes with the
/// spatial rotations fixing `u`.
pub fn boost(u: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = u.len();
    let psi_u = psi(u);
    if !(psi_u < 0.0) || u[n - 1] <= 0.0 {
        return Err(Error::InvalidInput(
            "boost axis must be future timelike".into(),
        ));
    }
    let un = u / (-psi_u).sqrt();
    let mut w = DVector::zeros(n);
    w[n - 1] = 1.0;
    let gamma = -q_form(&un, &w);
    let m = (&un + &w) / (2.0 + 2.0 * gamma).sqrt();
    Ok(reflection(&m) * reflection(&w))
}

/// Reflection in a unit timelike vector: `x -> x + 2 q(x, a) a`.
fn reflection(a: &DVector<f64>) -> DMatrix<f64> {
    let n = a.len();
    let mut ha = a.clone();
    ha[n - 1] = -ha[n - 1];
    DMatrix::identity(n, n) + a * ha.transpose() * 2.0
}

/// The element carrying the order interval `(p, q)` in the chart onto the
/// future cone, `p` to the chart base point and `q` to the point at infinity.
/// The pair is aligned with the time axis by a canonical boost, so the
/// construction commutes with spatial rotations about the pair's axis.
pub fn standardize(p: &DVector<f64>, q: &DVector<f64>) -> Result<SOElement> {
    if p.len() != q.len() {
        return Err(Error::ModelMismatch("endpoint chart sizes differ"));
    }
    let n = p.len();
    let w = q - p;
    match cone_member(&w) {
        ConeClass::Interior => {}
        _ => {
            return Err(if psi(&w).abs() <= tol::TRANSVERSE {
                Error::DegeneratePair
            } else {
                Error::NotCausalPair
            })
        }
    }
    let s = (-psi(&w)).sqrt();
    let back = boost(&w)?;
    // Reflection products invert by reversing the factors; cheaper and more
    // accurate here to invert through the Lorentz structure: B^{-1} = H B^T H.
    let mut h = DMatrix::identity(n, n);
    h[(n - 1, n - 1)] = -1.0;
    let back_inv = &h * back.transpose() * &h;
    Ok(SOElement::cayley(n)
        .compose(&SOElement::dilation(n, 1.0 / s)?)
        .compose(&SOElement::levi(&back_inv)?)
        .compose(&SOElement::translation(&(-p))?))
}

impl Serialize for EinPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.rep.as_slice().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EinPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(deserializer)?;
        EinPoint::from_rep(&DVector::from_vec(raw)).map_err(|e| D::Error::custom(e.to_string()))
    }
}
