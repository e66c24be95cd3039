//! Photons as rank-one chart lines: conjugacy inside a domain, projective
//! parametrization, intersection with incidence hypersurfaces, intersection
//! polynomials and their splitness, and photon intervals in a domain.

use nalgebra::{Complex, DMatrix, DVector};
use serde_json::json;

use crate::causal::{Diamond, Domain};
use crate::model::{Chart, ModelHandle, ModelKind, Point};
use crate::projline::ProjPoint;
use crate::{ein, lag, sample, tol, Error, Result};

/// Relative trim threshold for intersection-polynomial coefficients.
const COEFF_TRIM: f64 = 1e-10;

fn chart_dot(a: &Chart, b: &Chart) -> f64 {
    match (a, b) {
        (Chart::Sym(x), Chart::Sym(y)) => x.dot(y),
        (Chart::Mink(x), Chart::Mink(y)) => x.dot(y),
        _ => f64::NAN,
    }
}

pub(crate) fn point_of_chart(x: &Chart) -> Point {
    match x {
        Chart::Sym(m) => Point::Lag(lag::LagPoint::from_chart(m).expect("finite chart")),
        Chart::Mink(v) => Point::Ein(ein::EinPoint::from_chart(v).expect("finite chart")),
    }
}

pub(crate) fn pairing_points(x: &Point, xi: &Point) -> Result<f64> {
    match (x, xi) {
        (Point::Lag(a), Point::Lag(b)) => Ok(lag::pairing(a, b)),
        (Point::Ein(a), Point::Ein(b)) => Ok(ein::pairing(a, b)),
        _ => Err(Error::ModelMismatch("points live in different models")),
    }
}

/// The canonical photon direction along the last chart axis: the rank-one
/// matrix `E_rr` (Lag) or the future lightlike unit vector halfway between
/// the last spatial axis and the time axis (Ein).
pub fn standard_direction(model: &ModelHandle) -> Chart {
    match model.kind() {
        ModelKind::Lag { r } => Chart::Sym(lag::standard_photon_direction(r)),
        ModelKind::Ein { n } => {
            let mut d = DVector::zeros(n);
            d[n - 2] = 1.0 / 2f64.sqrt();
            d[n - 1] = 1.0 / 2f64.sqrt();
            Chart::Mink(d)
        }
    }
}

/// A photon meeting the chart: the affine line `base + t * dir` together
/// with its single point at infinity. The stored direction is canonical:
/// `u u^T` for a unit `u` (Lag) or a future lightlike vector of unit
/// Euclidean norm (Ein).
#[derive(Debug, Clone)]
pub struct Photon {
    base: Chart,
    dir: Chart,
    infinity_point: Point,
}

impl Photon {
    /// Builds the photon from a base point and a direction; the direction is
    /// validated (rank one / lightlike within `1e-10`) and canonicalized in
    /// scale and orientation.
    pub fn new(base: Chart, dir: Chart) -> Result<Self> {
        match (&base, &dir) {
            (Chart::Sym(x0), Chart::Sym(d)) => {
                let decomp = lag::rank_one_decompose(d);
                if decomp.len() != 1 {
                    return Err(Error::NotConjugateDirection);
                }
                let u = decomp[0].1.clone();
                let canon = &u * u.transpose();
                let infinity_point = lag_photon_infinity(x0, &u)?;
                Ok(Self {
                    base,
                    dir: Chart::Sym(canon),
                    infinity_point,
                })
            }
            (Chart::Mink(x0), Chart::Mink(d)) => {
                let scale = d.norm();
                // Lightlike-ness is projective: the defect is measured
                // against |d|^2 so the test is invariant under rescaling.
                if scale < tol::PHOTON_DIR || ein::psi(d).abs() > tol::PHOTON_DIR * scale * scale {
                    return Err(Error::NotConjugateDirection);
                }
                let mut canon = d / scale;
                if canon[canon.len() - 1] < 0.0 {
                    canon = -canon;
                }
                let infinity_point = ein_photon_infinity(x0, &canon)?;
                Ok(Self {
                    base,
                    dir: Chart::Mink(canon),
                    infinity_point,
                })
            }
            _ => Err(Error::ModelMismatch("base and direction kinds differ")),
        }
    }

    /// The standard photon: base at the chart origin, canonical direction.
    pub fn standard(model: &ModelHandle) -> Self {
        Self::new(model.chart_zero(), standard_direction(model)).expect("canonical direction")
    }

    pub fn base(&self) -> &Chart {
        &self.base
    }

    pub fn dir(&self) -> &Chart {
        &self.dir
    }

    /// The singleton intersection with the incidence hypersurface of the
    /// chart's point at infinity.
    pub fn infinity_point(&self) -> &Point {
        &self.infinity_point
    }

    /// The chart point at affine parameter `t`.
    pub fn chart_point(&self, t: f64) -> Chart {
        self.base.add(&self.dir.scale(t)).expect("same model")
    }

    /// Projective parametrization: `[1:t]` is the chart point at `t`, `[0:1]`
    /// the point at infinity.
    pub fn param(&self, t: &ProjPoint) -> Point {
        if t.is_infinity() {
            self.infinity_point.clone()
        } else {
            point_of_chart(&self.chart_point(t.value()))
        }
    }

    /// The affine parameter of a chart point on the photon; rejects points
    /// off the line.
    pub fn param_of(&self, y: &Chart) -> Result<f64> {
        let w = y.sub(&self.base)?;
        let t = chart_dot(&w, &self.dir) / chart_dot(&self.dir, &self.dir);
        let residual = w.sub(&self.dir.scale(t))?.amax();
        if residual > 1e-8 * (1.0 + w.amax()) {
            return Err(Error::InvalidInput(format!(
                "point does not lie on the photon (residual {residual:.3e})"
            )));
        }
        Ok(t)
    }

    /// Whether the model point lies on the photon (chart part or the point
    /// at infinity).
    pub fn passes_through(&self, xi: &Point) -> bool {
        if xi.approx_eq(&self.infinity_point) {
            return true;
        }
        if !xi.is_chart() {
            return false;
        }
        let chart = match xi {
            Point::Lag(p) => p.chart().map(Chart::Sym),
            Point::Ein(p) => p.chart().map(Chart::Mink),
        };
        chart.map_or(false, |c| self.param_of(&c).is_ok())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        json!({ "base": self.base, "dir": self.dir })
    }
}

/// The Lagrangian at infinity of the photon `t -> X0 + t u u^T`: directions
/// orthogonal to `u` ride the graph of `X0`, and `u` itself tips over to the
/// vertical subspace.
fn lag_photon_infinity(x0: &DMatrix<f64>, u: &DVector<f64>) -> Result<Point> {
    let r = x0.nrows();
    // Orthonormal completion of u: the QR factor of [u | I] restricted to
    // the last r-1 columns spans the orthogonal complement.
    let mut seed = DMatrix::zeros(r, r);
    seed.column_mut(0).copy_from(u);
    for k in 1..r {
        seed[(k - 1, k)] = 1.0;
    }
    let (q, _) = seed.qr().unpack();
    let mut frame = DMatrix::zeros(2 * r, r);
    for k in 1..r {
        let v = q.column(k);
        let xv = x0 * v;
        for i in 0..r {
            frame[(i, k - 1)] = v[i];
            frame[(r + i, k - 1)] = xv[i];
        }
    }
    for i in 0..r {
        frame[(r + i, r - 1)] = u[i];
    }
    Ok(Point::Lag(lag::LagPoint::from_frame(&frame)?))
}

/// The ideal point of the chart line `t -> v0 + t d` for lightlike `d`: the
/// rescaled lifts converge to `(d, 2 q(v0, d), 0)`.
fn ein_photon_infinity(v0: &DVector<f64>, d: &DVector<f64>) -> Result<Point> {
    let n = v0.len();
    let mut rep = DVector::zeros(n + 2);
    for i in 0..n {
        rep[i] = d[i];
    }
    rep[n] = 2.0 * ein::q_form(v0, d);
    Ok(Point::Ein(ein::EinPoint::from_rep(&rep)?))
}

/// True iff `x != y`, the difference is a photon direction (rank one up to
/// sign / lightlike), both points belong to the domain, and the chart
/// segment between them stays inside (64 membership probes): the pair then
/// lies in one connected component of the photon's trace in the domain.
pub fn are_conjugate(omega: &Domain, x: &Chart, y: &Chart) -> bool {
    let Ok(w) = y.sub(x) else { return false };
    if w.amax() <= tol::POINT_EQ * (1.0 + x.amax().max(y.amax())) {
        return false;
    }
    if !omega.contains(x) || !omega.contains(y) {
        return false;
    }
    let is_photon_dir = match &w {
        Chart::Sym(m) => lag::rank_one_decompose(m).len() == 1,
        Chart::Mink(v) => ein::psi(v).abs() <= tol::PHOTON_DIR * v.norm_squared(),
    };
    if !is_photon_dir {
        return false;
    }
    (1..=64).all(|k| {
        let s = k as f64 / 65.0;
        omega.contains(&x.add(&w.scale(s)).expect("same model"))
    })
}

/// The photon through two distinct chart points whose difference is a photon
/// direction; based at `x`, with the canonical (future-oriented) direction,
/// so the parameter of `y` is positive exactly when `y` is later than `x`.
pub fn photon_through(x: &Chart, y: &Chart) -> Result<Photon> {
    let w = y.sub(x)?;
    if w.amax() <= tol::POINT_EQ * (1.0 + x.amax().max(y.amax())) {
        return Err(Error::NotConjugateDirection);
    }
    Photon::new(x.clone(), w)
}

/// Intersection of a photon with the incidence hypersurface `Z_xi`.
#[derive(Debug, Clone, PartialEq)]
pub enum ZIntersection {
    /// `xi` lies on the photon (or the pairing vanishes along the whole
    /// line, the degenerate fiber of the projection).
    OnPhoton,
    /// The unique parameter whose image meets `Z_xi`.
    At(ProjPoint),
}

/// The pairing between the photon's point at parameter `t` and `xi`.
pub fn pairing_at(photon: &Photon, xi: &Point, t: f64) -> Result<f64> {
    pairing_points(&point_of_chart(&photon.chart_point(t)), xi)
}

/// Exact affine model of the pairing along the line, from three samples:
/// `(c0, c1, residual)` with `pairing(t) = c0 + c1 t` and the curvature
/// residual relative to the sample scale.
pub fn affine_fit(photon: &Photon, xi: &Point) -> Result<(f64, f64, f64)> {
    let p_minus = pairing_at(photon, xi, -1.0)?;
    let p_zero = pairing_at(photon, xi, 0.0)?;
    let p_plus = pairing_at(photon, xi, 1.0)?;
    let scale = 1.0 + p_minus.abs().max(p_zero.abs()).max(p_plus.abs());
    let c0 = p_zero;
    let c1 = 0.5 * (p_plus - p_minus);
    let residual = (p_plus + p_minus - 2.0 * p_zero).abs() / scale;
    Ok((c0, c1, residual))
}

/// Locates `Z_xi` along the photon: `OnPhoton` when `xi` lies on it, the
/// root of the affine pairing otherwise, `[0:1]` when the line meets `Z_xi`
/// only at infinity.
pub fn intersect_z(photon: &Photon, xi: &Point) -> Result<ZIntersection> {
    if photon.passes_through(xi) {
        return Ok(ZIntersection::OnPhoton);
    }
    let (c0, c1, _) = affine_fit(photon, xi)?;
    let scale = 1.0 + c0.abs().max(c1.abs());
    if c1.abs() <= tol::TRANSVERSE * scale {
        if c0.abs() <= tol::TRANSVERSE * scale {
            // Identically zero pairing: the whole photon sits inside Z_xi.
            return Ok(ZIntersection::OnPhoton);
        }
        return Ok(ZIntersection::At(ProjPoint::infinity()));
    }
    Ok(ZIntersection::At(ProjPoint::finite(-c0 / c1)))
}

/// The pairing along the photon raised to the `N`-th representation power,
/// as a monic real polynomial in the affine parameter.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IntersectionPoly {
    /// Coefficients in ascending degree; the leading one is 1.
    coeffs: Vec<f64>,
    /// The degree `n(xi)` after trimming.
    nxi: usize,
}

impl IntersectionPoly {
    pub fn degree(&self) -> usize {
        self.nxi
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// All complex roots, as eigenvalues of the companion matrix.
    pub fn roots(&self) -> Vec<Complex<f64>> {
        let n = self.nxi;
        if n == 0 {
            return Vec::new();
        }
        if n == 1 {
            return vec![Complex::new(-self.coeffs[0], 0.0)];
        }
        let mut companion = DMatrix::zeros(n, n);
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            companion[(i, n - 1)] = -self.coeffs[i];
        }
        companion.complex_eigenvalues().iter().copied().collect()
    }
}

/// Fits `pairing(t)^N` exactly through `N+1` symmetric nodes, trims the
/// coefficients at `1e-10` relative to the largest, and normalizes to a
/// monic polynomial of degree `n(xi)`.
///
/// The nodes are placed at the scale of the root of the base pairing (when
/// one exists): interpolating a polynomial whose root sits far outside the
/// node window loses the leading coefficients to cancellation, while nodes
/// at the root scale keep every coefficient accurate in relative terms.
pub fn intersection_poly(photon: &Photon, xi: &Point, n_power: usize) -> Result<IntersectionPoly> {
    if n_power == 0 {
        return Err(Error::InvalidInput("representation power must be >= 1".into()));
    }
    if photon.passes_through(xi) {
        return Err(Error::OnPhoton);
    }
    let (c0, c1, _) = affine_fit(photon, xi)?;
    let node_scale = if c1.abs() > 1e-14 * (1.0 + c0.abs()) {
        (1.0 + (c0 / c1).abs()).min(1e6)
    } else {
        1.0
    };
    // Fit in the rescaled parameter tau = t / node_scale, where the root of
    // the base pairing has magnitude <= 1 and the fit is well conditioned.
    let taus: Vec<f64> = (0..=n_power)
        .map(|j| j as f64 - n_power as f64 / 2.0)
        .collect();
    let values = taus
        .iter()
        .map(|&tau| pairing_at(photon, xi, tau * node_scale).map(|v| v.powi(n_power as i32)))
        .collect::<Result<Vec<f64>>>()?;
    let dim = n_power + 1;
    let vander = DMatrix::from_fn(dim, dim, |i, j| taus[i].powi(j as i32));
    let rhs = DVector::from_vec(values);
    let tau_coeffs = vander
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidInput("degenerate interpolation nodes".into()))?;
    let max_c = tau_coeffs.amax();
    if max_c == 0.0 {
        // Pairing identically zero along the line; intersect_z reports this
        // fiber as OnPhoton and no polynomial exists.
        return Err(Error::OnPhoton);
    }
    let mut nxi = 0;
    for (i, c) in tau_coeffs.iter().enumerate() {
        if c.abs() > COEFF_TRIM * max_c {
            nxi = i;
        }
    }
    // Back to the photon parameter: a_i^t = a_i^tau / node_scale^i, then monic.
    let lead = tau_coeffs[nxi] / node_scale.powi(nxi as i32);
    let trimmed: Vec<f64> = (0..=nxi)
        .map(|i| tau_coeffs[i] / node_scale.powi(i as i32) / lead)
        .collect();
    Ok(IntersectionPoly {
        coeffs: trimmed,
        nxi,
    })
}

/// True iff all complex roots coincide with one real value within `tol`:
/// the polynomial is a real power `(t - t*)^n`.
///
/// The root estimate `t*` is the mean of the companion-matrix eigenvalues
/// (exact for a conjugate-closed spectrum, and the stable functional of a
/// root cluster). Coincidence is then certified in coefficient space:
/// `q` must equal `(t - t*)^n` to relative accuracy `tol`. Floating point
/// forces this route: an n-fold root under relative coefficient noise `eps`
/// splits into a cluster of diameter `~ eps^(1/n)`, so measuring the raw
/// eigenvalue spread against `tol` would reject genuinely split polynomials
/// at any `tol` below the square root of the arithmetic noise, while the
/// coefficient residual stays linear in the noise.
pub fn is_split(qp: &IntersectionPoly, tol: f64) -> bool {
    let roots = qp.roots();
    if roots.is_empty() {
        return true;
    }
    let mean = roots.iter().sum::<Complex<f64>>() / roots.len() as f64;
    if mean.im.abs() > tol * (1.0 + mean.norm()) {
        return false;
    }
    let t_star = mean.re;
    // Binomial expansion of (t - t*)^n, ascending degree.
    let n = qp.degree();
    let mut power = vec![0.0; n + 1];
    power[0] = 1.0;
    for _ in 0..n {
        for i in (1..=n).rev() {
            power[i] = power[i - 1] - t_star * power[i];
        }
        power[0] *= -t_star;
    }
    let scale = qp.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let residual = qp
        .coeffs()
        .iter()
        .zip(&power)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    residual <= tol * scale
}

/// The connected component of the photon's trace in the domain around a
/// conjugate pair: `(a, b, photon)` with the interval `(a, b)` in the
/// photon's affine parameter, `a < 0 < b` relative to the base `x`.
pub fn interval_in_domain(
    omega: &Domain,
    x: &Chart,
    y: &Chart,
) -> Result<(ProjPoint, ProjPoint, Photon)> {
    if !are_conjugate(omega, x, y) {
        return Err(Error::NotConjugate);
    }
    let photon = photon_through(x, y)?;
    let (a, b) = match omega {
        Domain::Diamond(d) => diamond_interval(d, &photon)?,
        Domain::Oracle(_) => {
            let hi = bisect_exit(omega, &photon, 1.0)?;
            let lo = bisect_exit(omega, &photon, -1.0)?;
            (lo, hi)
        }
    };
    Ok((ProjPoint::finite(a), ProjPoint::finite(b), photon))
}

/// Closed-form interval endpoints in a diamond: the slope of the affine
/// pairing against each endpoint gives the exit parameter directly.
fn diamond_interval(d: &Diamond, photon: &Photon) -> Result<(f64, f64)> {
    match (photon.base(), photon.dir(), d.p(), d.q()) {
        (Chart::Sym(x0), Chart::Sym(dir), Chart::Sym(p), Chart::Sym(q)) => {
            let u = lag::rank_one_decompose(dir)
                .pop()
                .expect("canonical direction")
                .1;
            // det(A + t u u^T) = det(A) (1 + t u^T A^{-1} u) for A = x - p
            // positive definite; the single root is the lower exit.
            let a_mat = x0 - p;
            let b_mat = q - x0;
            let ai = a_mat
                .clone()
                .try_inverse()
                .ok_or(Error::DegeneratePair)?;
            let bi = b_mat
                .clone()
                .try_inverse()
                .ok_or(Error::DegeneratePair)?;
            let lo = -1.0 / (u.transpose() * ai * &u)[(0, 0)];
            let hi = 1.0 / (u.transpose() * bi * &u)[(0, 0)];
            Ok((lo, hi))
        }
        (Chart::Mink(x0), Chart::Mink(dir), Chart::Mink(p), Chart::Mink(q)) => {
            let w = x0 - p;
            let v = q - x0;
            // psi(w + t d) = psi(w) + 2 t q(w, d); both slopes are negative
            // for future timelike w, v and future lightlike d.
            let lo = -ein::psi(&w) / (2.0 * ein::q_form(&w, dir));
            let hi = ein::psi(&v) / (2.0 * ein::q_form(&v, dir));
            Ok((lo, hi))
        }
        _ => Err(Error::ModelMismatch("photon and diamond kinds differ")),
    }
}

/// Exit parameter of the photon from the domain in the given direction,
/// by doubling and bisection on membership, to `1e-10` in `t`.
fn bisect_exit(omega: &Domain, photon: &Photon, orientation: f64) -> Result<f64> {
    let (lo_box, hi_box) = omega.bbox();
    let t_max = 4.0 * (1.0 + crate::causal::chart_norm(&hi_box.sub(&lo_box)?));
    let inside = |t: f64| omega.contains(&photon.chart_point(orientation * t));
    if !inside(0.0) {
        return Err(Error::OutsideDomain);
    }
    let mut t_in = 0.0;
    let mut t_out = 1e-2;
    while inside(t_out) {
        t_in = t_out;
        t_out *= 2.0;
        if t_out > t_max {
            // Proper domains always exit; guard for ill-declared oracles.
            return Err(Error::InvalidInput(
                "photon never exits the domain inside its bounding box".into(),
            ));
        }
    }
    while t_out - t_in > tol::ROOT {
        let mid = 0.5 * (t_in + t_out);
        if inside(mid) {
            t_in = mid;
        } else {
            t_out = mid;
        }
    }
    Ok(orientation * 0.5 * (t_in + t_out))
}

/// Fitted fractional-linear law for the action of an opposite-unipotent
/// element on the standard photon.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MobiusReport {
    pub trials: usize,
    /// Worst deviation of the observed action from `t -> t / (1 + lambda t)`.
    pub max_residual: f64,
    /// The lambda fitted in the last trial (reported for spot checks).
    pub last_lambda: f64,
}

/// Runs `trials` random opposite-unipotent elements against the standard
/// photon and fits the fractional-linear law to each orbit; the law is exact
/// in both models, so the residual only measures floating-point noise.
pub fn mobius_uplus_check(model: &ModelHandle, trials: usize, seed: u64) -> Result<MobiusReport> {
    let mut rng = sample::rng(seed);
    let mut max_residual = 0.0f64;
    let mut last_lambda = 0.0;
    for _ in 0..trials {
        let y_dual = sample::random_chart(model, 0.7, &mut rng);
        let (residual, lambda) = mobius_law_residual(model, &y_dual)?;
        max_residual = max_residual.max(residual);
        last_lambda = lambda;
    }
    Ok(MobiusReport {
        trials,
        max_residual,
        last_lambda,
    })
}

/// Residual of the fractional-linear fit for one opposite-unipotent
/// parameter, plus the fitted lambda.
pub fn mobius_law_residual(model: &ModelHandle, y_dual: &Chart) -> Result<(f64, f64)> {
    let g = match y_dual {
        Chart::Sym(s) => crate::model::GroupElem::Sp(lag::SpElement::upper_translation(s)?),
        Chart::Mink(v) => crate::model::GroupElem::So(ein::SOElement::upper_translation(v)?),
    };
    let photon = Photon::standard(model);
    let ts: Vec<f64> = (1..=12).map(|k| -0.3 + 0.05 * k as f64).collect();
    // lambda from the pole-free identity 1/t' - 1/t = lambda.
    let mut lambda_estimates = Vec::new();
    let mut images = Vec::new();
    for &t in &ts {
        if t.abs() < 1e-3 {
            continue;
        }
        match g.act_chart(&photon.chart_point(t)) {
            Ok(image) => {
                let t_image = photon.param_of(&image)?;
                if t_image.abs() > 1e-12 {
                    lambda_estimates.push(1.0 / t_image - 1.0 / t);
                }
                images.push((t, t_image));
            }
            Err(_) => continue, // the pole of the Mobius map: image at infinity
        }
    }
    if images.is_empty() {
        return Err(Error::InvalidInput("no sample survived the pole filter".into()));
    }
    lambda_estimates.sort_by(|a, b| a.partial_cmp(b).expect("finite estimates"));
    let lambda = lambda_estimates[lambda_estimates.len() / 2];
    let mut residual = 0.0f64;
    for (t, t_image) in images {
        let denom = 1.0 + lambda * t;
        if denom.abs() < 1e-6 {
            continue;
        }
        residual = residual.max((t_image - t / denom).abs());
    }
    Ok((residual, lambda))
}

/// Suite report shared by the affine/singleton and splitness sweeps.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PhotonSuiteReport {
    pub trials: usize,
    pub failures: usize,
    pub max_residual: f64,
}

impl PhotonSuiteReport {
    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

/// Affine/singleton sweep: random photons against random reference points;
/// checks the three-point affine fit residual and that the located root (if
/// any) actually meets `Z_xi`.
pub fn photon_affine_suite(model: &ModelHandle, trials: usize, seed: u64) -> Result<PhotonSuiteReport> {
    let mut rng = sample::rng(seed);
    let mut failures = 0usize;
    let mut max_residual = 0.0f64;
    for _ in 0..trials {
        let base = sample::random_chart(model, 1.0, &mut rng);
        let dir = sample::random_photon_direction(model, &mut rng);
        let photon = Photon::new(base, dir)?;
        let xi = sample::random_point(model, 1.2, &mut rng);
        let (c0, c1, residual) = affine_fit(&photon, &xi)?;
        max_residual = max_residual.max(residual);
        let mut ok = residual <= tol::AFFINE_FIT;
        match intersect_z(&photon, &xi)? {
            ZIntersection::OnPhoton => {}
            ZIntersection::At(t) if t.is_infinity() => {}
            ZIntersection::At(t) => {
                let at_root = pairing_at(&photon, &xi, t.value())?;
                let scale = (1.0 + c0.abs().max(c1.abs())) * (1.0 + t.value().abs());
                ok &= at_root.abs() <= 1e-7 * scale;
            }
        }
        if !ok {
            failures += 1;
        }
    }
    Ok(PhotonSuiteReport {
        trials,
        failures,
        max_residual,
    })
}

/// Splitness sweep: every intersection polynomial over random `(photon, xi)`
/// and the given representation powers must be a near-perfect real power.
///
/// Reference points whose crossing lies beyond the interpolation node-scale
/// cap are redrawn; everything nearer is kept as generated.
pub fn splitness_suite(
    model: &ModelHandle,
    trials: usize,
    powers: &[usize],
    tol_split: f64,
    seed: u64,
) -> Result<PhotonSuiteReport> {
    let mut rng = sample::rng(seed);
    let mut failures = 0usize;
    let mut max_spread = 0.0f64;
    for _ in 0..trials {
        let base = sample::random_chart(model, 1.0, &mut rng);
        let dir = sample::random_photon_direction(model, &mut rng);
        let photon = Photon::new(base, dir)?;
        let mut xi = sample::random_point(model, 1.2, &mut rng);
        for _ in 0..40 {
            let far_crossing = match intersect_z(&photon, &xi)? {
                ZIntersection::At(t) => !t.is_infinity() && t.value().abs() > 1e5,
                ZIntersection::OnPhoton => false,
            };
            if !far_crossing {
                break;
            }
            xi = sample::random_point(model, 1.2, &mut rng);
        }
        if photon.passes_through(&xi) {
            continue;
        }
        for &n_power in powers {
            let qp = intersection_poly(&photon, &xi, n_power)?;
            let roots = qp.roots();
            let mut spread = 0.0f64;
            for i in 0..roots.len() {
                spread = spread.max(roots[i].im.abs());
                for j in i + 1..roots.len() {
                    spread = spread.max((roots[i] - roots[j]).norm());
                }
            }
            max_spread = max_spread.max(spread);
            if !is_split(&qp, tol_split) {
                failures += 1;
            }
        }
    }
    Ok(PhotonSuiteReport {
        trials,
        failures,
        max_residual: max_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::cone_class;
    use crate::model::ModelHandle;
    use crate::ConeClass;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;
    use rand::Rng;

    fn lag2() -> ModelHandle {
        ModelHandle::lag(2).unwrap()
    }

    fn ein3() -> ModelHandle {
        ModelHandle::ein(3).unwrap()
    }

    fn e22() -> DMatrix<f64> {
        dmatrix![0.0, 0.0; 0.0, 1.0]
    }

    #[test]
    fn conjugacy_examples() {
        let m = lag2();
        let omega = Domain::diamond(
            Chart::Sym(DMatrix::zeros(2, 2)),
            Chart::Sym(DMatrix::identity(2, 2) * 2.0),
        )
        .unwrap();
        let x = Chart::Sym(DMatrix::identity(2, 2) * 0.5);
        let y = Chart::Sym(DMatrix::identity(2, 2) * 0.5 + e22() * 0.5);
        assert!(are_conjugate(&omega, &x, &y));
        assert!(!are_conjugate(&omega, &x, &x.clone()));
        // Rank-two difference is not a photon direction.
        let z = Chart::Sym(DMatrix::identity(2, 2) * 0.9);
        assert!(!are_conjugate(&omega, &x, &z));
        let _ = m;

        let omega = Domain::diamond(
            Chart::Mink(dvector![0.0, 0.0, -1.0]),
            Chart::Mink(dvector![0.0, 0.0, 1.0]),
        )
        .unwrap();
        let x = Chart::Mink(dvector![0.0, 0.0, 0.0]);
        let inside = Chart::Mink(dvector![0.25, 0.0, 0.25]);
        assert!(are_conjugate(&omega, &x, &inside));
        // Lightlike difference but the far point left the diamond.
        let outside = Chart::Mink(dvector![0.9, 0.0, 0.9]);
        assert!(!are_conjugate(&omega, &x, &outside));
    }

    #[test]
    fn photon_through_examples() {
        let x = Chart::Sym(DMatrix::zeros(2, 2));
        let y = Chart::Sym(e22());
        let photon = photon_through(&x, &y).unwrap();
        assert!(photon.dir().approx_eq(&Chart::Sym(e22()), 1e-12));
        assert!((photon.param_of(&y).unwrap() - 1.0).abs() < 1e-12);

        let x = Chart::Mink(dvector![0.0, 0.0, 0.0]);
        let y = Chart::Mink(dvector![1.0, 0.0, 1.0]);
        let photon = photon_through(&x, &y).unwrap();
        let expect = Chart::Mink(dvector![1.0, 0.0, 1.0].scale(1.0 / 2f64.sqrt()));
        assert!(photon.dir().approx_eq(&expect, 1e-12));
        assert!((photon.param_of(&y).unwrap() - 2f64.sqrt()).abs() < 1e-12);

        // Rank-two difference.
        let x = Chart::Sym(DMatrix::zeros(2, 2));
        let y = Chart::Sym(DMatrix::identity(2, 2));
        assert!(matches!(
            photon_through(&x, &y),
            Err(Error::NotConjugateDirection)
        ));
    }

    #[test]
    fn param_examples() {
        let m = lag2();
        let photon = Photon::standard(&m);
        let at_zero = photon.param(&ProjPoint::finite(0.0));
        assert!(at_zero.approx_eq(&m.base_point()));
        let at_one = photon.param(&ProjPoint::finite(1.0));
        assert!(at_one.approx_eq(&m.chart_to_point(&Chart::Sym(e22())).unwrap()));
        let at_inf = photon.param(&ProjPoint::infinity());
        assert!(at_inf.approx_eq(photon.infinity_point()));
        // The infinity point is non-transverse to the chart's infinity.
        let pairing = m.pairing(&at_inf, &m.infinity_point()).unwrap();
        assert!(pairing.abs() < 1e-12, "pairing {pairing:.3e}");
    }

    #[test]
    fn infinity_point_is_on_photon_closure_in_both_models() {
        for (m, seed) in [(lag2(), 81u64), (ein3(), 82u64)] {
            let mut rng = sample::rng(seed);
            for _ in 0..20 {
                let base = sample::random_chart(&m, 1.0, &mut rng);
                let dir = sample::random_photon_direction(&m, &mut rng);
                let photon = Photon::new(base, dir).unwrap();
                // The ideal point is the projective limit of the chart ray.
                let far = photon.param(&ProjPoint::finite(1e8));
                let inf = photon.infinity_point();
                let close = match (&far, inf) {
                    (Point::Lag(a), Point::Lag(b)) => a.subspace_distance(b) < 1e-6,
                    (Point::Ein(a), Point::Ein(b)) => a.proj_distance(b) < 1e-6,
                    _ => false,
                };
                assert!(close, "chart ray must converge to the stored ideal point");
                assert!(photon.passes_through(inf));
            }
        }
    }

    #[test]
    fn intersect_z_examples() {
        let m = lag2();
        let photon = Photon::standard(&m);
        let xi = m.chart_to_point(&Chart::Sym(DMatrix::identity(2, 2))).unwrap();
        match intersect_z(&photon, &xi).unwrap() {
            ZIntersection::At(t) => assert!((t.value() - 1.0).abs() < 1e-12),
            other => panic!("expected a finite root, got {other:?}"),
        }

        let e = ein3();
        let photon = Photon::standard(&e);
        let s = dvector![0.3, -0.2, 0.6];
        let xi = e.chart_to_point(&Chart::Mink(s.clone())).unwrap();
        let Chart::Mink(d) = photon.dir().clone() else { panic!() };
        let expected = ein::psi(&s) / (2.0 * ein::q_form(&s, &d));
        match intersect_z(&photon, &xi).unwrap() {
            ZIntersection::At(t) => assert!((t.value() - expected).abs() < 1e-10),
            other => panic!("expected a finite root, got {other:?}"),
        }

        // The photon's own ideal point lies on it.
        assert_eq!(
            intersect_z(&photon, photon.infinity_point()).unwrap(),
            ZIntersection::OnPhoton
        );
    }

    #[test]
    fn intersection_poly_examples() {
        let m = lag2();
        let photon = Photon::standard(&m);
        let xi = m.chart_to_point(&Chart::Sym(DMatrix::identity(2, 2))).unwrap();
        let qp = intersection_poly(&photon, &xi, 1).unwrap();
        assert_eq!(qp.degree(), 1);
        assert!((qp.coeffs()[0] + 1.0).abs() < 1e-12, "root at +1");
        assert!((qp.coeffs()[1] - 1.0).abs() < 1e-12, "monic");

        // Squared representation: double root, vanishing discriminant.
        let e = ein3();
        let photon = Photon::standard(&e);
        let xi = e
            .chart_to_point(&Chart::Mink(dvector![0.4, 0.1, -0.3]))
            .unwrap();
        let qp = intersection_poly(&photon, &xi, 2).unwrap();
        assert_eq!(qp.degree(), 2);
        let disc = qp.coeffs()[1] * qp.coeffs()[1] - 4.0 * qp.coeffs()[0];
        assert!(disc.abs() <= 1e-8, "discriminant {disc:.3e}");
        assert!(is_split(&qp, tol::SPLIT));

        // Constant pairing against the chart's infinity: degree zero.
        let qp = intersection_poly(&photon, &e.infinity_point(), 1).unwrap();
        assert_eq!(qp.degree(), 0);

        // A reference point on the photon is rejected.
        assert!(matches!(
            intersection_poly(&photon, photon.infinity_point(), 1),
            Err(Error::OnPhoton)
        ));
    }

    #[test]
    fn splitness_on_explicit_polynomials() {
        let double_root = IntersectionPoly {
            coeffs: vec![1.0, -2.0, 1.0],
            nxi: 2,
        };
        assert!(is_split(&double_root, 1e-7));
        let complex_pair = IntersectionPoly {
            coeffs: vec![1.0, 0.0, 1.0],
            nxi: 2,
        };
        assert!(!is_split(&complex_pair, 1e-7));
    }

    #[test]
    fn interval_examples() {
        // Double cone of height two: the photon through the center exits at
        // the chart points (-1/2)(1,0,1) and (1/2)(1,0,1).
        let omega = Domain::diamond(
            Chart::Mink(dvector![0.0, 0.0, -1.0]),
            Chart::Mink(dvector![0.0, 0.0, 1.0]),
        )
        .unwrap();
        let x = Chart::Mink(dvector![0.0, 0.0, 0.0]);
        let y = Chart::Mink(dvector![0.25, 0.0, 0.25]);
        let (a, b, photon) = interval_in_domain(&omega, &x, &y).unwrap();
        let lo = photon.chart_point(a.value());
        let hi = photon.chart_point(b.value());
        assert!(lo.approx_eq(&Chart::Mink(dvector![-0.5, 0.0, -0.5]), 1e-10));
        assert!(hi.approx_eq(&Chart::Mink(dvector![0.5, 0.0, 0.5]), 1e-10));

        // Loewner interval: det(I + t E22) vanishes at t = -1, det(2I - (I + t E22)) at t = +1.
        let omega = Domain::diamond(
            Chart::Sym(DMatrix::zeros(2, 2)),
            Chart::Sym(DMatrix::identity(2, 2) * 2.0),
        )
        .unwrap();
        let x = Chart::Sym(DMatrix::identity(2, 2));
        let y = Chart::Sym(DMatrix::identity(2, 2) + e22() * 0.5);
        let (a, b, _) = interval_in_domain(&omega, &x, &y).unwrap();
        assert!((a.value() + 1.0).abs() < 1e-10);
        assert!((b.value() - 1.0).abs() < 1e-10);

        // A coincident pair determines no photon.
        assert!(matches!(
            interval_in_domain(&omega, &x, &x.clone()),
            Err(Error::NotConjugate)
        ));
    }

    #[test]
    fn interval_endpoints_and_bisection_agree() {
        // The closed forms for diamonds must match the generic bisection on
        // the same domain wrapped as an oracle image under the identity.
        for (m, seed) in [(lag2(), 91u64), (ein3(), 92u64)] {
            let mut rng = sample::rng(seed);
            for _ in 0..10 {
                let (p, q) = sample::random_causal_pair(&m, 1.0, &mut rng);
                let diamond = Domain::diamond(p.clone(), q.clone()).unwrap();
                let oracle = Domain::diamond_image(
                    crate::causal::Diamond::new(p, q).unwrap(),
                    m.identity(),
                    seed,
                )
                .unwrap();
                let x = diamond.sample_interior(1, &mut rng).pop().unwrap();
                let dir = sample::random_photon_direction(&m, &mut rng);
                let photon = Photon::new(x.clone(), dir).unwrap();
                let step = photon
                    .dir()
                    .scale(0.05 * crate::causal::chart_norm(&diamond.bbox().1.sub(&diamond.bbox().0).unwrap()) / 10.0);
                let y = x.add(&step).unwrap();
                if !are_conjugate(&diamond, &x, &y) {
                    continue;
                }
                let (a1, b1, _) = interval_in_domain(&diamond, &x, &y).unwrap();
                let (a2, b2, _) = interval_in_domain(&oracle, &x, &y).unwrap();
                assert!((a1.value() - a2.value()).abs() < 1e-7, "{} {}", a1.value(), a2.value());
                assert!((b1.value() - b2.value()).abs() < 1e-7, "{} {}", b1.value(), b2.value());
            }
        }
    }

    #[test]
    fn interval_independent_of_the_pair() {
        for (m, seed) in [(lag2(), 93u64), (ein3(), 94u64)] {
            let mut rng = sample::rng(seed);
            for _ in 0..10 {
                let (p, q) = sample::random_causal_pair(&m, 1.0, &mut rng);
                let omega = Domain::diamond(p, q).unwrap();
                let x = omega.sample_interior(1, &mut rng).pop().unwrap();
                let dir = sample::random_photon_direction(&m, &mut rng);
                let photon = Photon::new(x.clone(), dir).unwrap();
                let y1 = photon.chart_point(0.05);
                let y2 = photon.chart_point(-0.04);
                if !are_conjugate(&omega, &x, &y1) || !are_conjugate(&omega, &y2, &y1) {
                    continue;
                }
                let (a1, b1, ph1) = interval_in_domain(&omega, &x, &y1).unwrap();
                let (a2, b2, ph2) = interval_in_domain(&omega, &y2, &y1).unwrap();
                let lo1 = ph1.chart_point(a1.value());
                let hi1 = ph1.chart_point(b1.value());
                let lo2 = ph2.chart_point(a2.value());
                let hi2 = ph2.chart_point(b2.value());
                assert!(lo1.approx_eq(&lo2, 1e-7), "interval is a property of the photon");
                assert!(hi1.approx_eq(&hi2, 1e-7));
            }
        }
    }

    #[test]
    fn mobius_law_examples() {
        let m = lag2();
        // The corner entry of the unipotent parameter drives lambda.
        for mu in [0.0, 0.3, -0.8] {
            let mut s = DMatrix::zeros(2, 2);
            s[(1, 1)] = mu;
            let (residual, lambda) = mobius_law_residual(&m, &Chart::Sym(s)).unwrap();
            assert!(residual < 1e-9, "residual {residual:.3e}");
            assert!((lambda - mu).abs() < 1e-9, "lambda {lambda} vs {mu}");
        }
        // Zero corner component: the photon is fixed pointwise.
        let s = dmatrix![0.7, 0.4; 0.4, 0.0];
        let (residual, lambda) = mobius_law_residual(&m, &Chart::Sym(s)).unwrap();
        assert!(residual < 1e-12);
        assert!(lambda.abs() < 1e-12);

        let e = ein3();
        let w = dvector![0.9, 0.0, 0.0];
        // w is q-orthogonal to the standard direction: pointwise fixed.
        let (residual, lambda) = mobius_law_residual(&e, &Chart::Mink(w)).unwrap();
        assert!(residual < 1e-12);
        assert!(lambda.abs() < 1e-12);
        // Generic w: lambda = 2 q(w, d_std).
        let w = dvector![0.2, 0.5, -0.3];
        let Chart::Mink(d) = standard_direction(&e) else { panic!() };
        let expect = 2.0 * ein::q_form(&w, &d);
        let (residual, lambda) = mobius_law_residual(&e, &Chart::Mink(w)).unwrap();
        assert!(residual < 1e-9);
        assert!((lambda - expect).abs() < 1e-9);
    }

    #[test]
    fn mobius_suite_over_random_parameters() {
        for (m, seed) in [(lag2(), 95u64), (ein3(), 96u64)] {
            let report = mobius_uplus_check(&m, 100, seed).unwrap();
            assert!(
                report.max_residual <= 1e-8,
                "max residual {:.3e}",
                report.max_residual
            );
        }
    }

    #[test]
    fn affine_and_split_suites_smoke() {
        for (m, seed) in [(lag2(), 97u64), (ein3(), 98u64)] {
            let report = photon_affine_suite(&m, 100, seed).unwrap();
            assert!(report.pass(), "{report:?}");
            assert!(report.max_residual <= tol::AFFINE_FIT);
            let report = splitness_suite(&m, 100, &[1, 2], tol::SPLIT, seed).unwrap();
            assert!(report.pass(), "{report:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn photon_stays_in_the_lightcone(seed in 0u64..1_000_000) {
            for m in [lag2(), ein3()] {
                let mut rng = sample::rng(seed);
                let base = sample::random_chart(&m, 1.0, &mut rng);
                let dir = sample::random_photon_direction(&m, &mut rng);
                let photon = Photon::new(base.clone(), dir).unwrap();
                for k in 1..=8 {
                    let t = (k as f64 - 4.5) * 0.8;
                    let diff = photon.chart_point(t).sub(&base).unwrap();
                    let fwd = cone_class(&diff);
                    let bwd = cone_class(&diff.scale(-1.0));
                    prop_assert!(
                        fwd == ConeClass::Boundary || bwd == ConeClass::Boundary,
                        "photon increments are lightcone vectors"
                    );
                }
            }
        }

        #[test]
        fn located_roots_lie_on_z(seed in 0u64..1_000_000) {
            for m in [lag2(), ein3()] {
                let mut rng = sample::rng(seed);
                let base = sample::random_chart(&m, 1.0, &mut rng);
                let dir = sample::random_photon_direction(&m, &mut rng);
                let photon = Photon::new(base, dir).unwrap();
                let xi = sample::random_point(&m, 1.0, &mut rng);
                if let ZIntersection::At(t) = intersect_z(&photon, &xi).unwrap() {
                    if !t.is_infinity() {
                        let v = pairing_at(&photon, &xi, t.value()).unwrap();
                        let (c0, c1, _) = affine_fit(&photon, &xi).unwrap();
                        let scale = 1.0 + c0.abs().max(c1.abs()) * (1.0 + t.value().abs());
                        prop_assert!(v.abs() <= 1e-7 * scale, "root residual {v:.3e}");
                    }
                }
            }
        }

        #[test]
        fn poly_eval_matches_power_of_pairing(seed in 0u64..1_000_000, n_power in 1usize..3) {
            for m in [lag2(), ein3()] {
                let mut rng = sample::rng(seed);
                let base = sample::random_chart(&m, 0.8, &mut rng);
                let dir = sample::random_photon_direction(&m, &mut rng);
                let photon = Photon::new(base, dir).unwrap();
                let xi = sample::random_point(&m, 1.0, &mut rng);
                if photon.passes_through(&xi) {
                    continue;
                }
                let qp = intersection_poly(&photon, &xi, n_power).unwrap();
                // Compare at a node-free parameter; the monic normalization
                // drops the constant factor, so compare the ratio.
                let t1 = 0.37;
                let t2 = -0.61;
                let p1 = pairing_at(&photon, &xi, t1).unwrap().powi(n_power as i32);
                let p2 = pairing_at(&photon, &xi, t2).unwrap().powi(n_power as i32);
                let q1 = qp.eval(t1);
                let q2 = qp.eval(t2);
                if p2.abs() > 1e-9 && q2.abs() > 1e-9 {
                    let lhs = p1 / p2;
                    let rhs = q1 / q2;
                    prop_assert!(
                        (lhs - rhs).abs() <= 1e-6 * (1.0 + lhs.abs()),
                        "poly must be proportional to the pairing power: {lhs} vs {rhs}"
                    );
                }
            }
        }

        #[test]
        fn conjugate_pairs_round_trip(seed in 0u64..1_000_000) {
            for m in [lag2(), ein3()] {
                let mut rng = sample::rng(seed);
                let (p, q) = sample::random_causal_pair(&m, 1.0, &mut rng);
                let omega = Domain::diamond(p, q).unwrap();
                let x = omega.sample_interior(1, &mut rng).pop().unwrap();
                let dir = sample::random_photon_direction(&m, &mut rng);
                let photon = Photon::new(x.clone(), dir).unwrap();
                let y = photon.chart_point(0.02 * rng.gen_range(0.2..1.0));
                if are_conjugate(&omega, &x, &y) {
                    let back = photon_through(&x, &y).unwrap();
                    prop_assert!(back.dir().approx_eq(photon.dir(), 1e-9));
                    let t = back.param_of(&y).unwrap();
                    prop_assert!(back.chart_point(t).approx_eq(&y, 1e-9));
                }
            }
        }
    }
}
