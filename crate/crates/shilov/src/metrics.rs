//! Invariant metric machinery on proper domains.
//!
//! Three quantities are computed from one projective ingredient, the pairing
//! restricted to photons. The one-chain kernel `k(x, y)` of a conjugate pair
//! is the Hilbert distance of `x` and `y` inside the trace interval that
//! their photon cuts out of the domain. Summing the kernel over chains of
//! conjugate pairs and taking an infimum gives the upper half of the metric
//! bracket; taking cross ratios of pairing coordinates against certified dual
//! points gives the lower half. For a conjugate pair the two halves meet at
//! `k` because the interval endpoints are roots of the pairing against the
//! endpoint duals.
//!
//! Chains are built in a canonical pose of the pair: the domain is carried
//! onto the standard cone and the pair onto a pinned normal form (a sorted
//! diagonal against the identity, or the unit time axis against an in-plane
//! partner). The pose pins the coordinates up to measure-zero ties, so the
//! constructive chain and its simplex refinement are invariant under the
//! group to floating-point accuracy, not merely up to search noise.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::causal::{self, Diamond, Domain, DualPoint};
use crate::model::{Chart, GroupElem, ModelHandle, ModelKind, Point};
use crate::opt::{self, SimplexOptions};
use crate::photons::{
    self, are_conjugate, intersect_z, interval_in_domain, PhotonSuiteReport, Photon,
    ZIntersection,
};
use crate::projline::{self, ProjInterval, ProjPoint};
use crate::{ein, lag, sample, tol, Error, Result};

/// Closing residual below which a refined chain's last step counts as a
/// photon direction and is closed exactly.
const CLOSING: f64 = 1e-8;

/// Weight on a closing residual that fails the photon test.
const PENALTY: f64 = 1e6;

fn chart_eq(a: &Chart, b: &Chart) -> bool {
    a.approx_eq(b, tol::POINT_EQ)
}

fn sym(c: &Chart) -> Result<&DMatrix<f64>> {
    match c {
        Chart::Sym(m) => Ok(m),
        Chart::Mink(_) => Err(Error::ModelMismatch("expected a symmetric chart")),
    }
}

fn mink(c: &Chart) -> Result<&DVector<f64>> {
    match c {
        Chart::Mink(v) => Ok(v),
        Chart::Sym(_) => Err(Error::ModelMismatch("expected a Minkowski chart")),
    }
}

/// Relative defect of a chart vector as a photon direction: spectral mass
/// beyond the leading rank-one term, or the Minkowski square. Zero vectors
/// report a defect of one.
fn photon_defect(d: &Chart) -> f64 {
    match d {
        Chart::Sym(m) => {
            let mut mags: Vec<f64> = lag::rank_one_decompose(m)
                .into_iter()
                .map(|(l, _)| l.abs())
                .collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            match mags.len() {
                0 => 1.0,
                1 => 0.0,
                _ => mags[1..].iter().sum::<f64>() / mags[0],
            }
        }
        Chart::Mink(v) => {
            let n2 = v.norm_squared();
            if n2 == 0.0 {
                1.0
            } else {
                ein::psi(v).abs() / n2
            }
        }
    }
}

/// The cone's interior axis, used to enclose oracle domains in a diamond.
fn cone_axis(model: &ModelHandle) -> Chart {
    match model.kind() {
        ModelKind::Lag { r } => Chart::Sym(DMatrix::identity(r, r)),
        ModelKind::Ein { n } => {
            let mut v = DVector::zeros(n);
            v[n - 1] = 1.0;
            Chart::Mink(v)
        }
    }
}

/// A chain of chart points whose consecutive links are conjugate pairs.
/// Repeated consecutive points are permitted and contribute nothing.
#[derive(Debug, Clone)]
pub struct Chain {
    points: Vec<Chart>,
}

impl Chain {
    pub fn new(points: Vec<Chart>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(
                "a chain needs at least two points".into(),
            ));
        }
        for w in points.windows(2) {
            w[1].sub(&w[0])?;
        }
        Ok(Self { points })
    }

    /// The two-point chain `[x, y]`.
    pub fn pair(x: &Chart, y: &Chart) -> Self {
        Self {
            points: vec![x.clone(), y.clone()],
        }
    }

    pub fn points(&self) -> &[Chart] {
        &self.points
    }

    pub fn links(&self) -> usize {
        self.points.len() - 1
    }

    pub fn first(&self) -> &Chart {
        &self.points[0]
    }

    pub fn last(&self) -> &Chart {
        self.points.last().expect("chains are non-empty")
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points }
    }

    /// Joins two chains at a shared junction point.
    pub fn concat(&self, other: &Chain) -> Result<Chain> {
        if !chart_eq(self.last(), other.first()) {
            return Err(Error::InvalidInput(
                "chains do not share a junction point".into(),
            ));
        }
        let mut points = self.points.clone();
        points.extend(other.points.iter().skip(1).cloned());
        Chain::new(points)
    }

    /// Checks membership of every point and conjugacy of every link.
    pub fn validate(&self, omega: &Domain) -> Result<()> {
        for (i, pt) in self.points.iter().enumerate() {
            if !omega.contains(pt) {
                return Err(Error::BadChainLink(i.min(self.links() - 1)));
            }
        }
        for i in 0..self.links() {
            let (a, b) = (&self.points[i], &self.points[i + 1]);
            if chart_eq(a, b) {
                continue;
            }
            if !are_conjugate(omega, a, b) {
                return Err(Error::BadChainLink(i));
            }
        }
        Ok(())
    }

    pub fn to_json_value(&self) -> Value {
        json!({ "points": self.points })
    }
}

/// Points certified to have their incidence hypersurface disjoint from a
/// domain, carried with their certificate margins.
#[derive(Debug, Clone)]
pub struct DualSet {
    points: Vec<DualPoint>,
}

impl DualSet {
    pub fn from_points(points: Vec<DualPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(
                "a dual set needs at least two points".into(),
            ));
        }
        Ok(Self { points })
    }

    /// Certified dual points for a domain. Diamonds use the exact dual rays
    /// of the endpoints; oracle domains draw the rays of an enclosing diamond
    /// built over the bounding box and re-certify each candidate against the
    /// oracle's own interior samples.
    pub fn for_domain(
        model: &ModelHandle,
        omega: &Domain,
        count: usize,
        seed: u64,
    ) -> Result<Self> {
        match omega {
            Domain::Diamond(d) => Self::from_points(causal::dual_sample(model, d, count, seed)?),
            Domain::Oracle(_) => {
                let (lo, hi) = omega.bbox();
                let center = lo.add(&hi)?.scale(0.5);
                let radius = 0.5 * model.flatten(&hi.sub(&lo)?).norm();
                if !(radius > 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidInput(
                        "oracle bounding box is degenerate".into(),
                    ));
                }
                let axis = cone_axis(model).scale(2.5 * radius);
                let enclosing = Diamond::new(center.sub(&axis)?, center.add(&axis)?)?;
                let candidates = causal::dual_sample(model, &enclosing, count, seed)?;
                let mut rng = sample::rng(seed ^ 0x9e37_79b9_7f4a_7c15);
                let samples: Vec<Point> = omega
                    .sample_interior(1000, &mut rng)
                    .iter()
                    .map(|x| model.chart_to_point(x))
                    .collect::<Result<_>>()?;
                let mut points = Vec::new();
                for dp in candidates {
                    if let Some(margin) = causal::certify_dual(model, &samples, &dp.point) {
                        points.push(DualPoint {
                            point: dp.point,
                            margin,
                        });
                    }
                }
                Self::from_points(points)
            }
        }
    }

    pub fn points(&self) -> &[DualPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Search effort for the chain refinement.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub restarts: usize,
    pub iters: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            restarts: 3,
            iters: 120,
        }
    }
}

/// Two-sided estimate of the invariant distance, with the best chain found.
#[derive(Debug, Clone)]
pub struct MetricBracket {
    pub lower: f64,
    pub upper: f64,
    pub chain: Chain,
}

impl MetricBracket {
    pub fn to_json_value(&self) -> Value {
        json!({
            "lower": self.lower,
            "upper": self.upper,
            "links": self.chain.links(),
            "chain": self.chain.to_json_value(),
        })
    }
}

/// Kernel of a conjugate pair: the Hilbert distance inside the trace
/// interval of their photon in the domain. Zero exactly when the points
/// coincide; `NotConjugate` when no photon joins them inside the domain.
pub fn k_one_chain(omega: &Domain, x: &Chart, y: &Chart) -> Result<f64> {
    if chart_eq(x, y) {
        if !omega.contains(x) {
            return Err(Error::OutsideDomain);
        }
        return Ok(0.0);
    }
    let (a, b, photon) = interval_in_domain(omega, x, y)?;
    let t_y = photon.param_of(y)?;
    let iv = ProjInterval::arc(a, b, ProjPoint::finite(0.0))?;
    projline::hilbert_dist(&iv, &ProjPoint::finite(0.0), &ProjPoint::finite(t_y))
}

/// Cross ratio of pairing coordinates, raised to the representation power:
/// `(p(x, xi) p(y, eta) / (p(y, xi) p(x, eta)))^N`. A vanishing denominator
/// is a non-transverse quadruple.
pub fn cross_ratio_rho(
    xi: &Point,
    x: &Chart,
    y: &Chart,
    eta: &Point,
    n_power: usize,
) -> Result<f64> {
    if n_power == 0 {
        return Err(Error::InvalidInput(
            "representation power must be positive".into(),
        ));
    }
    let xp = photons::point_of_chart(x);
    let yp = photons::point_of_chart(y);
    let p_xxi = photons::pairing_points(&xp, xi)?;
    let p_yeta = photons::pairing_points(&yp, eta)?;
    let p_yxi = photons::pairing_points(&yp, xi)?;
    let p_xeta = photons::pairing_points(&xp, eta)?;
    let den = p_yxi * p_xeta;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::NonTransverseQuadruple);
    }
    let ratio = (p_xxi * p_yeta) / den;
    if !ratio.is_finite() {
        return Err(Error::NonTransverseQuadruple);
    }
    Ok(ratio.powi(n_power as i32))
}

/// Lower-bound functional: the largest `|log|` of the dual cross ratio over
/// ordered pairs from the dual set. Diamonds additionally refine over the
/// exact dual rays of the endpoints with a short simplex search seeded at
/// the endpoints themselves.
pub fn caratheodory(
    omega: &Domain,
    dual: &DualSet,
    x: &Chart,
    y: &Chart,
    n_power: usize,
) -> Result<f64> {
    if !omega.contains(x) || !omega.contains(y) {
        return Err(Error::OutsideDomain);
    }
    if chart_eq(x, y) {
        return Ok(0.0);
    }
    let mut best = 0.0f64;
    for (i, dxi) in dual.points().iter().enumerate() {
        for (j, deta) in dual.points().iter().enumerate() {
            if i == j {
                continue;
            }
            if let Ok(rho) = cross_ratio_rho(&dxi.point, x, y, &deta.point, n_power) {
                if rho != 0.0 && rho.is_finite() {
                    best = best.max(rho.abs().ln().abs());
                }
            }
        }
    }
    if let Domain::Diamond(d) = omega {
        best = best.max(refine_dual_rays(d, x, y, n_power));
    }
    Ok(best)
}

/// Simplex refinement over the dual rays `p - s(q - p)` and `q + s(q - p)`,
/// parametrized by `s = a^2` so the endpoint images sit at the seed.
fn refine_dual_rays(d: &Diamond, x: &Chart, y: &Chart, n_power: usize) -> f64 {
    let Ok(c) = d.q().sub(d.p()) else {
        return 0.0;
    };
    let objective = |a: &[f64]| -> f64 {
        let s1 = a[0] * a[0];
        let s2 = a[1] * a[1];
        let Ok(xi) = d.p().sub(&c.scale(s1)) else {
            return f64::INFINITY;
        };
        let Ok(eta) = d.q().add(&c.scale(s2)) else {
            return f64::INFINITY;
        };
        let xi_pt = photons::point_of_chart(&xi);
        let eta_pt = photons::point_of_chart(&eta);
        match cross_ratio_rho(&xi_pt, x, y, &eta_pt, n_power) {
            Ok(rho) if rho != 0.0 && rho.is_finite() => -rho.abs().ln().abs(),
            _ => f64::INFINITY,
        }
    };
    let opts = SimplexOptions {
        max_iters: 50,
        ftol: 1e-13,
        step: 0.35,
    };
    let (_, val) = opt::minimize(objective, &[0.0, 0.0], &opts);
    if val.is_finite() {
        (-val).max(0.0)
    } else {
        0.0
    }
}

/// Both sides of the projection identity for a photon and two reference
/// points: the `|log|` of the dual cross ratio of `(Lambda(t1), Lambda(t2))`
/// against `(xi, eta)`, and the power-weighted `|log|` cross ratio of the
/// four parameters on the photon's projective line.
pub fn projection_identity(
    photon: &Photon,
    xi: &Point,
    eta: &Point,
    t1: f64,
    t2: f64,
    n_power: usize,
) -> Result<(f64, f64)> {
    let x = photon.chart_point(t1);
    let y = photon.chart_point(t2);
    let rho = cross_ratio_rho(xi, &x, &y, eta, n_power)?;
    if rho == 0.0 || !rho.is_finite() {
        return Err(Error::NonTransverseQuadruple);
    }
    let lhs = rho.abs().ln().abs();
    let b1 = match intersect_z(photon, xi)? {
        ZIntersection::At(p) => p,
        ZIntersection::OnPhoton => return Err(Error::OnPhoton),
    };
    let b2 = match intersect_z(photon, eta)? {
        ZIntersection::At(p) => p,
        ZIntersection::OnPhoton => return Err(Error::OnPhoton),
    };
    let cr = projline::cross_ratio(&b1, &ProjPoint::finite(t1), &ProjPoint::finite(t2), &b2)?;
    if cr == 0.0 || !cr.is_finite() {
        return Err(Error::NonTransverseQuadruple);
    }
    let rhs = n_power as f64 * cr.abs().ln().abs();
    Ok((lhs, rhs))
}

/// Randomized sweep of the projection identity: random photons against
/// random reference points whose incidence sets cross the photon at finite,
/// well-separated parameters. A trial fails when the two sides differ by
/// more than `1e-7` at any requested power.
pub fn projection_identity_suite(
    model: &ModelHandle,
    trials: usize,
    powers: &[usize],
    seed: u64,
) -> Result<PhotonSuiteReport> {
    if powers.is_empty() {
        return Err(Error::InvalidInput("no representation powers given".into()));
    }
    let mut rng = sample::rng(seed);
    let mut failures = 0usize;
    let mut max_residual = 0.0f64;
    for _ in 0..trials {
        let mut found = false;
        for _attempt in 0..80 {
            let base = sample::random_chart(model, 0.7, &mut rng);
            let dir = sample::random_photon_direction(model, &mut rng);
            let Ok(photon) = Photon::new(base, dir) else {
                continue;
            };
            let xi = sample::random_point(model, 1.1, &mut rng);
            let eta = sample::random_point(model, 1.1, &mut rng);
            let b1 = match intersect_z(&photon, &xi) {
                Ok(ZIntersection::At(p)) if !p.is_infinity() => p.value(),
                _ => continue,
            };
            let b2 = match intersect_z(&photon, &eta) {
                Ok(ZIntersection::At(p)) if !p.is_infinity() => p.value(),
                _ => continue,
            };
            if b1.abs() > 40.0 || b2.abs() > 40.0 {
                continue;
            }
            if (b1 - b2).abs() < 0.05 * (1.0 + b1.abs() + b2.abs()) {
                continue;
            }
            let t1 = b1 + 0.37 * (b2 - b1);
            let t2 = b1 + 0.64 * (b2 - b1);
            let mut ok = true;
            for &np in powers {
                match projection_identity(&photon, &xi, &eta, t1, t2, np) {
                    Ok((lhs, rhs)) => {
                        let dev = (lhs - rhs).abs();
                        max_residual = max_residual.max(dev);
                        if dev > tol::SPLIT {
                            ok = false;
                        }
                    }
                    Err(_) => ok = false,
                }
            }
            found = true;
            if !ok {
                failures += 1;
            }
            break;
        }
        if !found {
            failures += 1;
        }
    }
    Ok(PhotonSuiteReport {
        trials,
        failures,
        max_residual,
    })
}

/// A group element carrying the domain onto the standard cone and the pair
/// onto its pinned normal form, with the images of the pair.
struct Pose {
    g: GroupElem,
    x_c: Chart,
    y_c: Chart,
}

/// Canonical pose of an interior pair in a diamond. Lag pairs land on
/// `(diag(lambda), I)` with the spectrum sorted descending and eigenvector
/// signs gauged; Ein pairs land on the unit time axis against a partner in
/// the plane of the first spatial axis. Both normal forms are invariant
/// under conjugating the input by any affine automorphism, up to ties in
/// the sorted spectrum.
fn canonical_pose(d: &Diamond, x: &Chart, y: &Chart) -> Result<Pose> {
    let g0 = d.to_standard()?;
    let x1 = g0.act_chart(x)?;
    let y1 = g0.act_chart(y)?;
    let k = match (&x1, &y1) {
        (Chart::Sym(xm), Chart::Sym(ym)) => {
            let chol = ym.clone().cholesky().ok_or_else(|| {
                Error::InvalidInput("pose needs the pair inside the cone".into())
            })?;
            let l_inv = chol.l().try_inverse().ok_or_else(|| {
                Error::InvalidInput("pose target is numerically singular".into())
            })?;
            let m = &l_inv * xm * l_inv.transpose();
            let m = (&m + &m.transpose()) * 0.5;
            let eig = m.symmetric_eigen();
            let r = xm.nrows();
            let mut order: Vec<usize> = (0..r).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
            let mut q = DMatrix::zeros(r, r);
            for (col, &i) in order.iter().enumerate() {
                q.set_column(col, &eig.eigenvectors.column(i));
            }
            for col in 0..r {
                let mut arg = 0;
                let mut best = 0.0;
                for row in 0..r {
                    if q[(row, col)].abs() > best {
                        best = q[(row, col)].abs();
                        arg = row;
                    }
                }
                if q[(arg, col)] < 0.0 {
                    for row in 0..r {
                        q[(row, col)] = -q[(row, col)];
                    }
                }
            }
            let w = l_inv.transpose() * &q;
            let w_inv = w.try_inverse().ok_or_else(|| {
                Error::InvalidInput("pose congruence is numerically singular".into())
            })?;
            GroupElem::Sp(lag::SpElement::levi(&w_inv)?)
        }
        (Chart::Mink(xv), Chart::Mink(yv)) => {
            let n = xv.len();
            let psi_x = ein::psi(xv);
            if psi_x >= 0.0 {
                return Err(Error::InvalidInput(
                    "pose needs the pair inside the cone".into(),
                ));
            }
            let b = ein::boost(xv)?;
            let mut h = DMatrix::identity(n, n);
            h[(n - 1, n - 1)] = -1.0;
            let b_inv = &h * b.transpose() * &h;
            let y2 = &b_inv * yv;
            let mut rot = DMatrix::identity(n, n);
            let ys_norm = y2.rows(0, n - 1).norm();
            if ys_norm > 1e-13 * (1.0 + y2.norm()) {
                let mut v = DVector::zeros(n - 1);
                for i in 0..n - 1 {
                    v[i] = y2[i] / ys_norm;
                }
                v[0] -= 1.0;
                let vn2 = v.norm_squared();
                if vn2 > 1e-24 {
                    for i in 0..n - 1 {
                        for j in 0..n - 1 {
                            rot[(i, j)] -= 2.0 * v[i] * v[j] / vn2;
                        }
                    }
                }
            }
            let lin = &rot * &b_inv;
            let aligned = GroupElem::So(ein::SOElement::levi(&lin)?);
            let tau = (-psi_x).sqrt();
            let unit = GroupElem::So(ein::SOElement::dilation(n, 1.0 / tau)?);
            unit.compose(&aligned)?
        }
        _ => return Err(Error::ModelMismatch("pose inputs mix models")),
    };
    let g = k.compose(&g0)?;
    Ok(Pose {
        x_c: g.act_chart(x)?,
        y_c: g.act_chart(y)?,
        g,
    })
}

/// Coordinate climb for a posed Lag pair: from the meeting point up to the
/// sorted diagonal and up to the identity, one diagonal rank-one step per
/// eigenvalue. Returns the canonical waypoints from `x_c` to `y_c`.
fn lag_canonical_chain(pose: &Pose) -> Result<Vec<Chart>> {
    let xm = sym(&pose.x_c)?;
    let ym = sym(&pose.y_c)?;
    let r = xm.nrows();
    let lam: Vec<f64> = (0..r).map(|i| xm[(i, i)]).collect();
    if lam.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidInput(
            "pose produced a nonpositive eigenvalue".into(),
        ));
    }
    let lmax = lam.iter().cloned().fold(0.0f64, f64::max);
    let eps = 0.5 * (1.0 / lmax).min(1.0);
    let z = pose.x_c.scale(eps);
    let mut up = vec![z.clone()];
    for i in 0..r {
        if i == r - 1 {
            up.push(pose.x_c.clone());
        } else {
            let mut m = sym(up.last().expect("non-empty"))?.clone();
            m[(i, i)] += (1.0 - eps) * lam[i];
            up.push(Chart::Sym(m));
        }
    }
    let mut down = vec![z];
    for i in 0..r {
        if i == r - 1 {
            down.push(pose.y_c.clone());
        } else {
            let mut m = sym(down.last().expect("non-empty"))?.clone();
            m[(i, i)] += ym[(i, i)] - eps * lam[i];
            down.push(Chart::Sym(m));
        }
    }
    let mut pts: Vec<Chart> = up.into_iter().rev().collect();
    pts.extend(down.into_iter().skip(1));
    Ok(pts)
}

/// Splits a future timelike chart step into two future lightlike halves,
/// `w = d1 + d2`, steering the split plane toward the reference vector.
fn lightlike_half(w: &Chart, reference: &Chart) -> Result<Chart> {
    let wv = mink(w)?;
    let rv = mink(reference)?;
    let n = wv.len();
    let pw = ein::psi(wv);
    if pw >= 0.0 {
        return Err(Error::InvalidInput(
            "lightlike split needs a timelike step".into(),
        ));
    }
    let mut sigma = rv - wv * (ein::q_form(rv, wv) / pw);
    let mut ps = ein::psi(&sigma);
    let floor = 1e-18 * (1.0 + wv.norm_squared() + rv.norm_squared());
    if ps <= floor {
        for k in 0..n - 1 {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            sigma = &e - wv * (ein::q_form(&e, wv) / pw);
            ps = ein::psi(&sigma);
            if ps > floor {
                break;
            }
        }
        if ps <= floor {
            return Err(Error::InvalidInput(
                "no spacelike complement for the split".into(),
            ));
        }
    }
    sigma *= ((-pw) / ps).sqrt();
    Ok(Chart::Mink((wv + sigma) * 0.5))
}

/// Null-coordinate L-chain for a posed Ein pair. On the plane spanned by
/// the first spatial axis and time, the cone is the product of the two null
/// half-lines `u = t - x_0 > 0` and `v = t + x_0 > 0`, so two axis steps
/// join any pair inside it, each step exactly lightlike by construction.
fn ein_canonical_chain(pose: &Pose) -> Result<Vec<Chart>> {
    let xv = mink(&pose.x_c)?;
    let yv = mink(&pose.y_c)?;
    let n = xv.len();
    let (ux, vx) = (xv[n - 1] - xv[0], xv[n - 1] + xv[0]);
    let (uy, vy) = (yv[n - 1] - yv[0], yv[n - 1] + yv[0]);
    if !(ux > 0.0 && vx > 0.0 && uy > 0.0 && vy > 0.0) {
        return Err(Error::InvalidInput(
            "pose left an endpoint outside the cone".into(),
        ));
    }
    let mut mid = DVector::zeros(n);
    mid[n - 1] = 0.5 * (uy + vx);
    mid[0] = 0.5 * (vx - uy);
    Ok(vec![pose.x_c.clone(), Chart::Mink(mid), pose.y_c.clone()])
}

/// Constructive chain between two interior points of a diamond: a direct
/// link for conjugate pairs, otherwise the canonical-pose climb. The number
/// of links never exceeds twice the rank (Lag) or two (Ein).
pub fn build_chain(d: &Diamond, x: &Chart, y: &Chart) -> Result<Chain> {
    if !d.contains(x) || !d.contains(y) {
        return Err(Error::OutsideDomain);
    }
    if chart_eq(x, y) {
        return Chain::new(vec![x.clone(), y.clone()]);
    }
    let dom = Domain::Diamond(d.clone());
    if are_conjugate(&dom, x, y) {
        return Chain::new(vec![x.clone(), y.clone()]);
    }
    let pose = canonical_pose(d, x, y)?;
    let canonical = match &pose.x_c {
        Chart::Sym(_) => lag_canonical_chain(&pose)?,
        Chart::Mink(_) => ein_canonical_chain(&pose)?,
    };
    let g_inv = pose.g.inverse();
    let mut pts = Vec::with_capacity(canonical.len());
    for w in &canonical {
        pts.push(g_inv.act_chart(w)?);
    }
    let m = pts.len();
    pts[0] = x.clone();
    pts[m - 1] = y.clone();
    let anchor = d.midpoint();
    for pt in pts.iter_mut().take(m - 1).skip(1) {
        let mut tries = 0;
        while !d.contains(pt) {
            tries += 1;
            if tries > 1000 {
                return Err(Error::InvalidInput(
                    "waypoint could not be retracted into the domain".into(),
                ));
            }
            *pt = anchor.add(&pt.sub(&anchor)?.scale(1.0 - 1e-9))?;
        }
    }
    let mut dedup: Vec<Chart> = vec![pts[0].clone()];
    for p in pts.into_iter().skip(1) {
        if !chart_eq(dedup.last().expect("non-empty"), &p) {
            dedup.push(p);
        }
    }
    if dedup.len() < 2 {
        dedup.push(y.clone());
    }
    let chain = Chain::new(dedup)?;
    chain.validate(&dom)?;
    Ok(chain)
}

/// Total kernel length of a chain in a domain. Links that fail to be
/// conjugate surface as `BadChainLink` with their index.
pub fn chain_length(omega: &Domain, chain: &Chain) -> Result<f64> {
    let pts = chain.points();
    let mut total = 0.0;
    for i in 0..pts.len() - 1 {
        let (a, b) = (&pts[i], &pts[i + 1]);
        if chart_eq(a, b) {
            continue;
        }
        total += k_one_chain(omega, a, b).map_err(|_| Error::BadChainLink(i))?;
    }
    Ok(total)
}

/// Frozen step family for the chain refinement. Posed steps vary one
/// magnitude along a pinned direction, which keeps the search invariant
/// under the residual gauge of the pose; raw steps (oracle domains) vary
/// the full photon direction.
enum StepKind {
    PosedAxis { axis: usize },
    PosedPlane { sigma: f64 },
    RawRank { sign: f64, dim: usize },
    RawLight { sigma: f64, dim: usize },
}

impl StepKind {
    fn width(&self) -> usize {
        match self {
            StepKind::PosedAxis { .. } | StepKind::PosedPlane { .. } => 1,
            StepKind::RawRank { dim, .. } => *dim,
            StepKind::RawLight { dim, .. } => *dim,
        }
    }

    fn make(&self, params: &[f64], n: usize) -> Option<Chart> {
        match self {
            StepKind::PosedAxis { axis } => {
                let mut m = DMatrix::zeros(n, n);
                m[(*axis, *axis)] = params[0];
                Some(Chart::Sym(m))
            }
            StepKind::PosedPlane { sigma } => {
                let mut v = DVector::zeros(n);
                v[0] = params[0];
                v[n - 1] = sigma * params[0];
                Some(Chart::Mink(v))
            }
            StepKind::RawRank { sign, dim } => {
                let v = DVector::from_column_slice(&params[..*dim]);
                let n2 = v.norm_squared();
                if n2 < 1e-24 {
                    return None;
                }
                Some(Chart::Sym(&v * v.transpose() * *sign))
            }
            StepKind::RawLight { sigma, dim } => {
                let s = DVector::from_column_slice(&params[..*dim]);
                let norm = s.norm();
                if norm < 1e-12 {
                    return None;
                }
                let mut v = DVector::zeros(dim + 1);
                for i in 0..*dim {
                    v[i] = s[i];
                }
                v[*dim] = sigma * norm;
                Some(Chart::Mink(v))
            }
        }
    }
}

/// Extracts the frozen step family and initial magnitudes from a chain's
/// consecutive differences, in the coordinates the refinement runs in.
fn step_family(points: &[Chart], posed: bool) -> Result<(Vec<StepKind>, Vec<f64>)> {
    let mut kinds = Vec::new();
    let mut params = Vec::new();
    for w in points.windows(2).take(points.len() - 2) {
        let diff = w[1].sub(&w[0])?;
        match &diff {
            Chart::Sym(m) => {
                let r = m.nrows();
                let terms = lag::rank_one_decompose(m);
                let (lam, u) = terms
                    .iter()
                    .max_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput("degenerate chain step".into()))?;
                if posed {
                    kinds.push(StepKind::PosedAxis { axis: u.iamax() });
                    params.push(lam);
                } else {
                    kinds.push(StepKind::RawRank {
                        sign: lam.signum(),
                        dim: r,
                    });
                    let v = u * lam.abs().sqrt();
                    params.extend(v.iter());
                }
            }
            Chart::Mink(v) => {
                let n = v.len();
                if posed {
                    let u = v[0];
                    let t = v[n - 1];
                    let sigma = if u * t >= 0.0 { 1.0 } else { -1.0 };
                    kinds.push(StepKind::PosedPlane { sigma });
                    params.push(if u.abs() > 0.0 { u } else { t.abs() });
                } else {
                    let t = v[n - 1];
                    kinds.push(StepKind::RawLight {
                        sigma: if t >= 0.0 { 1.0 } else { -1.0 },
                        dim: n - 1,
                    });
                    params.extend(v.iter().take(n - 1));
                }
            }
        }
    }
    Ok((kinds, params))
}

/// Simplex refinement of a chain's interior waypoints. The last link closes
/// onto `y` exactly when its residual is a photon direction within `1e-8`;
/// otherwise the residual is charged at weight `1e6`, which steers the
/// search back to closable chains.
fn refine_chain(
    omega: &Domain,
    x: &Chart,
    y: &Chart,
    best: &Chain,
    budget: &Budget,
    seed: u64,
) -> Result<Option<(f64, Chain)>> {
    let posed = matches!(omega, Domain::Diamond(_));
    let (pose_g, pose_g_inv, coords): (Option<GroupElem>, Option<GroupElem>, Vec<Chart>) =
        if let Domain::Diamond(d) = omega {
            let pose = canonical_pose(d, x, y)?;
            let mut pts = Vec::with_capacity(best.points().len());
            for p in best.points() {
                pts.push(pose.g.act_chart(p)?);
            }
            let g_inv = pose.g.inverse();
            (Some(pose.g), Some(g_inv), pts)
        } else {
            (None, None, best.points().to_vec())
        };
    let _ = pose_g;
    let chart_n = match &coords[0] {
        Chart::Sym(m) => m.nrows(),
        Chart::Mink(v) => v.len(),
    };
    let (kinds, init) = step_family(&coords, posed)?;
    if kinds.is_empty() {
        return Ok(None);
    }
    let x_ref = coords[0].clone();
    let evaluate = |params: &[f64]| -> f64 {
        let mut cur = x_ref.clone();
        let mut total = 0.0;
        let mut prev_orig = x.clone();
        let mut offset = 0;
        for kind in &kinds {
            let w = kind.width();
            let step = match kind.make(&params[offset..offset + w], chart_n) {
                Some(s) => s,
                None => return f64::INFINITY,
            };
            offset += w;
            cur = match cur.add(&step) {
                Ok(c) => c,
                Err(_) => return f64::INFINITY,
            };
            let orig = match &pose_g_inv {
                Some(g) => match g.act_chart(&cur) {
                    Ok(o) => o,
                    Err(_) => return f64::INFINITY,
                },
                None => cur.clone(),
            };
            if !omega.contains(&orig) {
                return f64::INFINITY;
            }
            if !chart_eq(&prev_orig, &orig) {
                match k_one_chain(omega, &prev_orig, &orig) {
                    Ok(k) => total += k,
                    Err(_) => return f64::INFINITY,
                }
            }
            prev_orig = orig;
        }
        if !chart_eq(&prev_orig, y) {
            let Ok(diff) = y.sub(&prev_orig) else {
                return f64::INFINITY;
            };
            let defect = photon_defect(&diff);
            if defect <= CLOSING {
                match k_one_chain(omega, &prev_orig, y) {
                    Ok(k) => total += k,
                    Err(_) => return f64::INFINITY,
                }
            } else {
                total += PENALTY * defect;
            }
        }
        total
    };
    let mut rng = sample::rng(seed ^ 0x5851_f42d_4c95_7f2d);
    let mut starts = vec![init.clone()];
    for _ in 1..budget.restarts.max(1) {
        let jittered: Vec<f64> = init
            .iter()
            .map(|&p| p + 0.2 * (1.0 + p.abs()) * sample::gaussian(&mut rng))
            .collect();
        starts.push(jittered);
    }
    let opts = SimplexOptions {
        max_iters: budget.iters,
        ftol: 1e-13,
        step: 0.15,
    };
    let (best_params, val) = opt::minimize_restarts(evaluate, &starts, &opts);
    if !val.is_finite() {
        return Ok(None);
    }
    // Rebuild the winning chain and accept it only if it validates.
    let mut pts = vec![x.clone()];
    let mut cur = x_ref;
    let mut offset = 0;
    for kind in &kinds {
        let w = kind.width();
        let Some(step) = kind.make(&best_params[offset..offset + w], chart_n) else {
            return Ok(None);
        };
        offset += w;
        cur = cur.add(&step)?;
        let orig = match &pose_g_inv {
            Some(g) => g.act_chart(&cur)?,
            None => cur.clone(),
        };
        if !chart_eq(pts.last().expect("non-empty"), &orig) {
            pts.push(orig);
        }
    }
    if !chart_eq(pts.last().expect("non-empty"), y) {
        let diff = y.sub(pts.last().expect("non-empty"))?;
        if photon_defect(&diff) > CLOSING {
            return Ok(None);
        }
        pts.push(y.clone());
    } else {
        let l = pts.len() - 1;
        pts[l] = y.clone();
    }
    if pts.len() < 2 {
        return Ok(None);
    }
    let chain = Chain::new(pts)?;
    if chain.validate(omega).is_err() {
        return Ok(None);
    }
    let len = chain_length(omega, &chain)?;
    Ok(Some((len, chain)))
}

/// Greedy photon hops toward the target with backtracking, for oracle
/// domains where no canonical pose is available. Best effort: exceeding the
/// hop budget surfaces as `BudgetExceeded`.
fn zigzag_chain(omega: &Domain, x: &Chart, y: &Chart) -> Result<Chain> {
    let bound = match x {
        Chart::Sym(m) => 8 * m.nrows() + 16,
        Chart::Mink(_) => 40,
    };
    let mut pts = vec![x.clone()];
    let mut w = x.clone();
    for _ in 0..bound {
        if chart_eq(&w, y) {
            let l = pts.len() - 1;
            pts[l] = y.clone();
            return Chain::new(pts);
        }
        let diff = y.sub(&w)?;
        if photon_defect(&diff) <= 10.0 * tol::PHOTON_DIR && are_conjugate(omega, &w, y) {
            pts.push(y.clone());
            return Chain::new(pts);
        }
        let mut advanced = false;
        let mut eta = 1.0f64;
        for _ in 0..14 {
            let target = w.add(&diff.scale(eta))?;
            if !omega.contains(&target) && !chart_eq(&target, y) {
                eta *= 0.5;
                continue;
            }
            if let Some(seg) = hop_points(omega, &w, &target) {
                pts.extend(seg.iter().cloned());
                w = target;
                advanced = true;
                break;
            }
            eta *= 0.5;
        }
        if !advanced {
            return Err(Error::BudgetExceeded {
                best: Vec::new(),
                residual: causal::chart_norm(&y.sub(&w)?),
            });
        }
    }
    Err(Error::BudgetExceeded {
        best: Vec::new(),
        residual: causal::chart_norm(&y.sub(&w)?),
    })
}

/// One greedy hop from `w` to `z` through at most `rank` photon links, all
/// verified conjugate in the domain. Returns the waypoints after `w`.
fn hop_points(omega: &Domain, w: &Chart, z: &Chart) -> Option<Vec<Chart>> {
    let diff = z.sub(w).ok()?;
    if photon_defect(&diff) <= 10.0 * tol::PHOTON_DIR {
        if are_conjugate(omega, w, z) {
            return Some(vec![z.clone()]);
        }
        return None;
    }
    match &diff {
        Chart::Sym(m) => {
            let terms = lag::rank_one_decompose(m);
            if terms.is_empty() {
                return None;
            }
            let mut out = Vec::with_capacity(terms.len());
            let mut cur = w.clone();
            for (i, (lam, u)) in terms.iter().enumerate() {
                let next = if i == terms.len() - 1 {
                    z.clone()
                } else {
                    cur.add(&Chart::Sym(u * u.transpose() * *lam)).ok()?
                };
                if !are_conjugate(omega, &cur, &next) {
                    return None;
                }
                out.push(next.clone());
                cur = next;
            }
            Some(out)
        }
        Chart::Mink(v) => {
            let n = v.len();
            let p = ein::psi(v);
            let mids: Vec<Chart> = if p < 0.0 {
                match lightlike_half(&diff, &Chart::Mink(DVector::from_fn(n, |i, _| {
                    if i == 0 {
                        1.0
                    } else {
                        0.0
                    }
                }))) {
                    Ok(d1) => vec![w.add(&d1).ok()?],
                    Err(_) => return None,
                }
            } else {
                let mut spatial = v.clone();
                spatial[n - 1] = 0.0;
                let sn = spatial.norm();
                if sn < 1e-14 {
                    return None;
                }
                let mut cands = Vec::new();
                for s in [1.0f64, -1.0] {
                    let mut ell = spatial.clone() / (sn * 2f64.sqrt());
                    ell[n - 1] = s / 2f64.sqrt();
                    let qd = ein::q_form(v, &ell);
                    if qd.abs() < 1e-14 * (1.0 + v.norm()) {
                        continue;
                    }
                    let beta = p / (2.0 * qd);
                    if let Ok(mid) = w.add(&Chart::Mink(&ell * beta)) {
                        cands.push(mid);
                    }
                }
                cands
            };
            for mid in mids {
                if are_conjugate(omega, w, &mid) && are_conjugate(omega, &mid, z) {
                    return Some(vec![mid, z.clone()]);
                }
            }
            None
        }
    }
}

/// Two-sided metric estimate. The lower side is the dual cross-ratio
/// functional scaled by the representation power; the upper side is the
/// best chain among a direct link, the constructive chain, an optional
/// injected chain, and their simplex refinement. The bracket invariant
/// `lower <= upper` is enforced up to fixed slack and its violation is an
/// error rather than a silent clamp.
#[allow(clippy::too_many_arguments)]
pub fn kobayashi(
    omega: &Domain,
    dual: &DualSet,
    x: &Chart,
    y: &Chart,
    n_power: usize,
    budget: &Budget,
    seed: u64,
    start: Option<&Chain>,
) -> Result<MetricBracket> {
    if n_power == 0 {
        return Err(Error::InvalidInput(
            "representation power must be positive".into(),
        ));
    }
    if !omega.contains(x) || !omega.contains(y) {
        return Err(Error::OutsideDomain);
    }
    if chart_eq(x, y) {
        return Ok(MetricBracket {
            lower: 0.0,
            upper: 0.0,
            chain: Chain::pair(x, y),
        });
    }
    let lower = caratheodory(omega, dual, x, y, n_power)? / n_power as f64;
    let mut candidates: Vec<Chain> = Vec::new();
    if are_conjugate(omega, x, y) {
        candidates.push(Chain::pair(x, y));
    }
    match omega {
        Domain::Diamond(d) => {
            if let Ok(c) = build_chain(d, x, y) {
                candidates.push(c);
            } else if let Ok(c) = zigzag_chain(omega, x, y) {
                // Insurance for pose-degenerate pairs near the boundary.
                candidates.push(c);
            }
        }
        Domain::Oracle(_) => {
            if let Ok(c) = zigzag_chain(omega, x, y) {
                candidates.push(c);
            }
        }
    }
    if let Some(s) = start {
        if chart_eq(s.first(), x) && chart_eq(s.last(), y) && s.validate(omega).is_ok() {
            candidates.push(s.clone());
        }
    }
    let mut best: Option<(f64, Chain)> = None;
    for c in candidates {
        if let Ok(len) = chain_length(omega, &c) {
            if best.as_ref().map_or(true, |(bl, _)| len < *bl) {
                best = Some((len, c));
            }
        }
    }
    let Some((mut best_len, mut best_chain)) = best else {
        return Err(Error::BudgetExceeded {
            best: Vec::new(),
            residual: f64::INFINITY,
        });
    };
    let tight = best_len - lower <= tol::BRACKET * (1.0 + best_len.abs());
    if best_chain.links() >= 2 && !tight && budget.iters > 0 && budget.restarts > 0 {
        if let Ok(Some((len, chain))) = refine_chain(omega, x, y, &best_chain, budget, seed) {
            if len < best_len {
                best_len = len;
                best_chain = chain;
            }
        }
    }
    let upper = best_len;
    if lower > upper + tol::BRACKET * (1.0 + upper.abs()) {
        return Err(Error::BracketViolation { lower, upper });
    }
    Ok(MetricBracket {
        lower: lower.min(upper),
        upper,
        chain: best_chain,
    })
}
