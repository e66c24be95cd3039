//! Model-generic causal structure: the order relation, diamonds, proper
//! domains, duality certificates, and normalization of a causal pair onto
//! the standard diamond.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde_json::{json, Value};

use crate::model::{Chart, GroupElem, ModelHandle, ModelKind, Point};
use crate::opt::{minimize_restarts, SimplexOptions};
use crate::{ein, lag, sample, tol, CausalRelation, ConeClass, Error, Result};

/// Cone classification of a chart vector, dispatching on the chart kind.
pub fn cone_class(x: &Chart) -> ConeClass {
    match x {
        Chart::Sym(m) => lag::cone_member(m),
        Chart::Mink(v) => ein::cone_member(v),
    }
}

/// Frobenius (Lag) or Euclidean (Ein) norm of a chart vector.
pub fn chart_norm(x: &Chart) -> f64 {
    match x {
        Chart::Sym(m) => m.norm(),
        Chart::Mink(v) => v.norm(),
    }
}

fn ones_like(x: &Chart) -> Chart {
    match x {
        Chart::Sym(m) => Chart::Sym(DMatrix::from_element(m.nrows(), m.ncols(), 1.0)),
        Chart::Mink(v) => Chart::Mink(DVector::from_element(v.len(), 1.0)),
    }
}

fn strictly_within(x: &Chart, lo: &Chart, hi: &Chart) -> bool {
    let lt = |a: &Chart, b: &Chart| match (a, b) {
        (Chart::Sym(p), Chart::Sym(q)) => p.iter().zip(q.iter()).all(|(u, v)| u < v),
        (Chart::Mink(p), Chart::Mink(q)) => p.iter().zip(q.iter()).all(|(u, v)| u < v),
        _ => false,
    };
    lt(lo, x) && lt(x, hi)
}

/// Unit chart vector drawn rotation invariantly, shaped like `like`.
fn random_direction_like<R: Rng>(like: &Chart, rng: &mut R) -> Chart {
    loop {
        let d = match like {
            Chart::Sym(m) => Chart::Sym(sample::gaussian_sym(m.nrows(), 1.0, rng)),
            Chart::Mink(v) => {
                Chart::Mink(DVector::from_fn(v.len(), |_, _| sample::gaussian(rng)))
            }
        };
        let norm = chart_norm(&d);
        if norm > 1e-6 {
            return d.scale(1.0 / norm);
        }
    }
}

/// Classification of `y` relative to `x` through the closed order: `Equal`
/// is the antisymmetry case `y - x` in `C+ and C-` (the apex, up to the cone
/// tolerance), the strict/cone variants split the open cone from its
/// boundary, and everything else is `Spacelike`.
pub fn causal_relation(x: &Chart, y: &Chart) -> Result<CausalRelation> {
    let d = y.sub(x)?;
    let fwd = cone_class(&d);
    let bwd = cone_class(&d.scale(-1.0));
    Ok(match (fwd, bwd) {
        (ConeClass::Boundary, ConeClass::Boundary) => CausalRelation::Equal,
        (ConeClass::Interior, _) => CausalRelation::StrictFuture,
        (ConeClass::Boundary, _) => CausalRelation::FutureCone,
        (_, ConeClass::Interior) => CausalRelation::StrictPast,
        (_, ConeClass::Boundary) => CausalRelation::PastCone,
        _ => CausalRelation::Spacelike,
    })
}

fn in_closed_future(rel: CausalRelation) -> bool {
    matches!(
        rel,
        CausalRelation::StrictFuture | CausalRelation::FutureCone | CausalRelation::Equal
    )
}

/// Outcome of the sampled order-axiom checks.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OrderReport {
    pub trials: usize,
    pub transitivity_failures: usize,
    pub antisymmetry_failures: usize,
    pub mirror_failures: usize,
}

impl OrderReport {
    pub fn pass(&self) -> bool {
        self.transitivity_failures == 0
            && self.antisymmetry_failures == 0
            && self.mirror_failures == 0
    }
}

/// Samples chains `z <= y <= x` built from cone increments and checks
/// transitivity, antisymmetry on coincident pairs, and that the relation
/// seen from `y` mirrors the relation seen from `x`.
pub fn order_axioms_check(model: &ModelHandle, samples: usize, seed: u64) -> OrderReport {
    let mut rng = sample::rng(seed);
    let mut report = OrderReport {
        trials: samples,
        transitivity_failures: 0,
        antisymmetry_failures: 0,
        mirror_failures: 0,
    };
    for _ in 0..samples {
        let z = sample::random_chart(model, 1.0, &mut rng);
        // Closed-cone increments: interior vectors most of the time, cone
        // boundary directions otherwise.
        let step = |rng: &mut rand_chacha::ChaCha8Rng| {
            if rng.gen::<f64>() < 0.7 {
                sample::random_cone_interior(model, rng)
            } else {
                sample::random_photon_direction(model, rng).scale(rng.gen_range(0.1..1.5))
            }
        };
        let y = z.add(&step(&mut rng)).expect("same model");
        let x = y.add(&step(&mut rng)).expect("same model");
        let rel_zy = causal_relation(&z, &y).expect("same model");
        let rel_zx = causal_relation(&z, &x).expect("same model");
        if !(in_closed_future(rel_zy) && in_closed_future(rel_zx)) {
            report.transitivity_failures += 1;
        }
        if causal_relation(&z, &z.clone()).expect("same model") != CausalRelation::Equal {
            report.antisymmetry_failures += 1;
        }
        let mirror = match causal_relation(&x, &z).expect("same model") {
            CausalRelation::StrictFuture => CausalRelation::StrictPast,
            CausalRelation::FutureCone => CausalRelation::PastCone,
            CausalRelation::StrictPast => CausalRelation::StrictFuture,
            CausalRelation::PastCone => CausalRelation::FutureCone,
            other => other,
        };
        if mirror != rel_zx {
            report.mirror_failures += 1;
        }
    }
    report
}

/// The order interval `D(p, q)` between two chart points with `q - p` in the
/// open cone; the proper-in-the-chart representative.
#[derive(Debug, Clone)]
pub struct Diamond {
    p: Chart,
    q: Chart,
}

impl Diamond {
    pub fn new(p: Chart, q: Chart) -> Result<Self> {
        let w = q.sub(&p)?;
        match cone_class(&w) {
            ConeClass::Interior => Ok(Self { p, q }),
            _ => {
                let degenerate = match &w {
                    Chart::Sym(m) => m.determinant().abs() <= tol::TRANSVERSE,
                    Chart::Mink(v) => ein::psi(v).abs() <= tol::TRANSVERSE,
                };
                Err(if degenerate {
                    Error::DegeneratePair
                } else {
                    Error::NotCausalPair
                })
            }
        }
    }

    pub fn p(&self) -> &Chart {
        &self.p
    }

    pub fn q(&self) -> &Chart {
        &self.q
    }

    pub fn midpoint(&self) -> Chart {
        self.p.add(&self.q).expect("same model").scale(0.5)
    }

    /// Strict membership: both `x - p` and `q - x` in the open cone.
    pub fn contains(&self, x: &Chart) -> bool {
        let Ok(a) = x.sub(&self.p) else { return false };
        let Ok(b) = self.q.sub(x) else { return false };
        cone_class(&a) == ConeClass::Interior && cone_class(&b) == ConeClass::Interior
    }

    /// The group element carrying `D(p, q)` onto the standard diamond
    /// `I+(base)`, with `p` to the chart base point and `q` to the point
    /// at infinity.
    pub fn to_standard(&self) -> Result<GroupElem> {
        match (&self.p, &self.q) {
            (Chart::Sym(a), Chart::Sym(b)) => Ok(GroupElem::Sp(lag::standardize(a, b)?)),
            (Chart::Mink(a), Chart::Mink(b)) => Ok(GroupElem::So(ein::standardize(a, b)?)),
            _ => Err(Error::ModelMismatch("endpoint charts differ in kind")),
        }
    }

    /// Interior points, margins bounded away from the boundary so the draws
    /// are safe anchors for certificates.
    pub fn sample_interior<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<Chart> {
        match (&self.p, &self.q) {
            (Chart::Sym(p), Chart::Sym(q)) => {
                let c = q - p;
                let s = lag::sym_sqrt(&c).expect("interior difference");
                let r = p.nrows();
                (0..count)
                    .map(|_| {
                        let o = sample::random_orthogonal(r, rng);
                        let d = DMatrix::from_diagonal(&DVector::from_fn(r, |_, _| {
                            rng.gen_range(0.02..0.98)
                        }));
                        let y = &o * d * o.transpose();
                        Chart::Sym(lag::symmetrize(&(p + &s * y * &s)))
                    })
                    .collect()
            }
            (Chart::Mink(p), Chart::Mink(q)) => {
                let w = q - p;
                let span = (-ein::psi(&w)).sqrt();
                let frame = ein::boost(&w).expect("interior difference");
                let n = p.len();
                (0..count)
                    .map(|_| {
                        let t = rng.gen_range(0.02..0.98) * span;
                        let radius = t.min(span - t) * rng.gen_range(0.0..0.96);
                        let s = sample::unit_vector(n - 1, rng);
                        let mut y = DVector::zeros(n);
                        for i in 0..n - 1 {
                            y[i] = radius * s[i];
                        }
                        y[n - 1] = t;
                        Chart::Mink(p + &frame * y)
                    })
                    .collect()
            }
            _ => unreachable!("constructor rejects mixed kinds"),
        }
    }
}

/// Built-in membership-oracle bodies.
#[derive(Debug, Clone)]
pub enum OracleShape {
    /// Euclidean chart ball (Frobenius norm for symmetric charts).
    Ball { center: Chart, radius: f64 },
    /// Open axis-aligned box.
    Box { lo: Chart, hi: Chart },
    /// Image of a diamond under a group element whose image stays in the
    /// chart.
    DiamondImage { diamond: Diamond, g: GroupElem },
}

/// A membership oracle together with a bounding box and a properness flag;
/// the box and flag are spot-checked by sampling, not proved.
#[derive(Debug, Clone)]
pub struct OracleDomain {
    shape: OracleShape,
    bbox: (Chart, Chart),
    proper: bool,
}

impl OracleDomain {
    pub fn shape(&self) -> &OracleShape {
        &self.shape
    }

    pub fn proper(&self) -> bool {
        self.proper
    }
}

/// A proper domain in the chart: a diamond held by its endpoints, or a
/// membership oracle.
#[derive(Debug, Clone)]
pub enum Domain {
    Diamond(Diamond),
    Oracle(OracleDomain),
}

impl Domain {
    pub fn diamond(p: Chart, q: Chart) -> Result<Self> {
        Ok(Domain::Diamond(Diamond::new(p, q)?))
    }

    pub fn ball(center: Chart, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        let pad = ones_like(&center).scale(radius);
        let bbox = (
            center.sub(&pad).expect("same model"),
            center.add(&pad).expect("same model"),
        );
        Ok(Domain::Oracle(OracleDomain {
            shape: OracleShape::Ball { center, radius },
            bbox,
            proper: true,
        }))
    }

    pub fn axis_box(lo: Chart, hi: Chart) -> Result<Self> {
        let gap = hi.sub(&lo)?;
        let positive = match &gap {
            Chart::Sym(m) => m.iter().all(|v| *v > 0.0),
            Chart::Mink(v) => v.iter().all(|v| *v > 0.0),
        };
        if !positive {
            return Err(Error::InvalidInput(
                "box needs lo < hi in every coordinate".into(),
            ));
        }
        let bbox = (lo.clone(), hi.clone());
        Ok(Domain::Oracle(OracleDomain {
            shape: OracleShape::Box { lo, hi },
            bbox,
            proper: true,
        }))
    }

    /// Image of a diamond under a group element. Properness in the chart is
    /// spot-checked on near-boundary samples; an image reaching the chart's
    /// infinity is rejected.
    pub fn diamond_image(diamond: Diamond, g: GroupElem, seed: u64) -> Result<Self> {
        let mut rng = sample::rng(seed);
        let mut mapped = Vec::with_capacity(512);
        for x in diamond.sample_interior(512, &mut rng) {
            match g.act_chart(&x) {
                Ok(y) => mapped.push(y),
                Err(_) => {
                    return Err(Error::InvalidInput(
                        "diamond image leaves the chart; not proper".into(),
                    ))
                }
            }
        }
        let bbox = sampled_bbox(&mapped);
        Ok(Domain::Oracle(OracleDomain {
            shape: OracleShape::DiamondImage { diamond, g },
            bbox,
            proper: true,
        }))
    }

    pub fn contains(&self, x: &Chart) -> bool {
        match self {
            Domain::Diamond(d) => d.contains(x),
            Domain::Oracle(o) => match &o.shape {
                OracleShape::Ball { center, radius } => match x.sub(center) {
                    Ok(d) => chart_norm(&d) < *radius,
                    Err(_) => false,
                },
                OracleShape::Box { lo, hi } => strictly_within(x, lo, hi),
                OracleShape::DiamondImage { diamond, g } => match g.inverse().act_chart(x) {
                    Ok(y) => diamond.contains(&y),
                    Err(_) => false,
                },
            },
        }
    }

    /// A distinguished interior point.
    pub fn anchor(&self) -> Chart {
        match self {
            Domain::Diamond(d) => d.midpoint(),
            Domain::Oracle(o) => match &o.shape {
                OracleShape::Ball { center, .. } => center.clone(),
                OracleShape::Box { lo, hi } => lo.add(hi).expect("same model").scale(0.5),
                OracleShape::DiamondImage { diamond, g } => g
                    .act_chart(&diamond.midpoint())
                    .expect("proper image holds the midpoint"),
            },
        }
    }

    /// Axis-aligned box containing the domain (spot-checked for oracles).
    pub fn bbox(&self) -> (Chart, Chart) {
        match self {
            Domain::Diamond(d) => {
                let width = d.q().sub(d.p()).expect("same model").amax();
                let pad = ones_like(d.p()).scale(width);
                (
                    d.p().sub(&pad).expect("same model"),
                    d.q().add(&pad).expect("same model"),
                )
            }
            Domain::Oracle(o) => o.bbox.clone(),
        }
    }

    /// Interior samples; oracles use rejection inside the bounding box,
    /// diamonds draw directly.
    pub fn sample_interior<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<Chart> {
        match self {
            Domain::Diamond(d) => d.sample_interior(count, rng),
            Domain::Oracle(o) => {
                if let OracleShape::DiamondImage { diamond, g } = &o.shape {
                    return diamond
                        .sample_interior(count, rng)
                        .into_iter()
                        .map(|x| g.act_chart(&x).expect("proper image"))
                        .collect();
                }
                let (lo, hi) = &o.bbox;
                let gap = hi.sub(lo).expect("same model");
                let mut out = Vec::with_capacity(count);
                let mut budget = 10_000usize.max(count * 400);
                while out.len() < count && budget > 0 {
                    budget -= 1;
                    let u = random_box_point(lo, &gap, rng);
                    if self.contains(&u) {
                        out.push(u);
                    }
                }
                assert!(
                    out.len() == count,
                    "oracle rejection sampling exhausted its budget; bbox too loose"
                );
                out
            }
        }
    }

    /// Boundary points by ray shooting from the anchor: doubling to exit the
    /// domain, then bisection down to floating-point resolution.
    pub fn boundary_samples<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<Chart> {
        let anchor = self.anchor();
        debug_assert!(self.contains(&anchor), "anchor must be interior");
        let (lo, hi) = self.bbox();
        let t_max = 4.0 * (1.0 + chart_norm(&hi.sub(&lo).expect("same model")));
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let dir = random_direction_like(&anchor, rng);
            if let Some(b) = self.ray_boundary(&anchor, &dir, t_max) {
                out.push(b);
            }
        }
        out
    }

    /// Boundary crossing of `base + t dir`, `t > 0`, if the ray starts inside.
    pub fn ray_boundary(&self, base: &Chart, dir: &Chart, t_max: f64) -> Option<Chart> {
        let at = |t: f64| base.add(&dir.scale(t)).expect("same model");
        if !self.contains(base) {
            return None;
        }
        let mut t_in = 0.0;
        let mut t_out = 1e-3;
        while self.contains(&at(t_out)) {
            t_in = t_out;
            t_out *= 2.0;
            if t_out > t_max {
                return None;
            }
        }
        for _ in 0..90 {
            let mid = 0.5 * (t_in + t_out);
            if self.contains(&at(mid)) {
                t_in = mid;
            } else {
                t_out = mid;
            }
        }
        Some(at(0.5 * (t_in + t_out)))
    }

    /// JSON descriptor; group elements are encoded as raw matrices.
    pub fn to_json_value(&self) -> Value {
        match self {
            Domain::Diamond(d) => json!({
                "kind": "diamond",
                "p": d.p(),
                "q": d.q(),
            }),
            Domain::Oracle(o) => {
                let mut v = match &o.shape {
                    OracleShape::Ball { center, radius } => json!({
                        "kind": "oracle",
                        "shape": "ball",
                        "center": center,
                        "radius": radius,
                    }),
                    OracleShape::Box { lo, hi } => json!({
                        "kind": "oracle",
                        "shape": "box",
                        "lo": lo,
                        "hi": hi,
                    }),
                    OracleShape::DiamondImage { diamond, g } => json!({
                        "kind": "oracle",
                        "shape": "diamond_image",
                        "p": diamond.p(),
                        "q": diamond.q(),
                        "group": group_rows(g),
                    }),
                };
                let obj = v.as_object_mut().expect("object literal");
                obj.insert("bbox".into(), json!([o.bbox.0, o.bbox.1]));
                obj.insert("proper".into(), json!(o.proper));
                v
            }
        }
    }

    pub fn from_json_value(model: &ModelHandle, v: &Value) -> Result<Self> {
        let kind = v
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidInput("domain needs a \"kind\" field".into()))?;
        let chart_field = |name: &str| -> Result<Chart> {
            let field = v
                .get(name)
                .ok_or_else(|| Error::InvalidInput(format!("domain needs \"{name}\"")))?;
            let chart: Chart = serde_json::from_value(field.clone())
                .map_err(|e| Error::InvalidInput(format!("bad \"{name}\": {e}")))?;
            model.validate_chart(&chart)?;
            Ok(chart)
        };
        match kind {
            "diamond" => Domain::diamond(chart_field("p")?, chart_field("q")?),
            "oracle" => {
                let shape = v
                    .get("shape")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::InvalidInput("oracle needs a \"shape\" name".into()))?;
                match shape {
                    "ball" => {
                        let radius = v
                            .get("radius")
                            .and_then(Value::as_f64)
                            .ok_or_else(|| Error::InvalidInput("ball needs \"radius\"".into()))?;
                        Domain::ball(chart_field("center")?, radius)
                    }
                    "box" => Domain::axis_box(chart_field("lo")?, chart_field("hi")?),
                    "diamond_image" => {
                        let d = Diamond::new(chart_field("p")?, chart_field("q")?)?;
                        let rows = v
                            .get("group")
                            .ok_or_else(|| Error::InvalidInput("image needs \"group\"".into()))?;
                        let g = group_from_rows(model, rows)?;
                        Domain::diamond_image(d, g, 0)
                    }
                    other => Err(Error::InvalidInput(format!("unknown oracle shape {other:?}"))),
                }
            }
            other => Err(Error::InvalidInput(format!("unknown domain kind {other:?}"))),
        }
    }
}

fn random_box_point<R: Rng>(lo: &Chart, gap: &Chart, rng: &mut R) -> Chart {
    match (lo, gap) {
        (Chart::Sym(l), Chart::Sym(g)) => {
            let r = l.nrows();
            let mut m = DMatrix::zeros(r, r);
            for i in 0..r {
                for j in i..r {
                    let v = l[(i, j)] + rng.gen::<f64>() * g[(i, j)];
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            Chart::Sym(m)
        }
        (Chart::Mink(l), Chart::Mink(g)) => {
            Chart::Mink(DVector::from_fn(l.len(), |i, _| {
                l[i] + rng.gen::<f64>() * g[i]
            }))
        }
        _ => unreachable!("bbox corners share a kind"),
    }
}

fn sampled_bbox(points: &[Chart]) -> (Chart, Chart) {
    let fold = |pick: fn(f64, f64) -> f64| -> Chart {
        let mut acc = points[0].clone();
        for p in &points[1..] {
            acc = match (&acc, p) {
                (Chart::Sym(a), Chart::Sym(b)) => {
                    Chart::Sym(a.zip_map(b, pick))
                }
                (Chart::Mink(a), Chart::Mink(b)) => Chart::Mink(a.zip_map(b, pick)),
                _ => unreachable!("one domain, one kind"),
            };
        }
        acc
    };
    let lo = fold(f64::min);
    let hi = fold(f64::max);
    // Sampled extremes underestimate the true extent; pad by a fixed share
    // of the spread plus an absolute floor.
    let spread = hi.sub(&lo).expect("same kind").amax();
    let pad = ones_like(&lo).scale(0.35 * spread + 0.05);
    (
        lo.sub(&pad).expect("same kind"),
        hi.add(&pad).expect("same kind"),
    )
}

fn group_rows(g: &GroupElem) -> Vec<Vec<f64>> {
    let m = match g {
        GroupElem::Sp(e) => e.matrix().clone(),
        GroupElem::So(e) => e.matrix().clone(),
    };
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn group_from_rows(model: &ModelHandle, v: &Value) -> Result<GroupElem> {
    let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone())
        .map_err(|e| Error::InvalidInput(format!("bad group matrix: {e}")))?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("group matrix must be square".into()));
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    match model.kind() {
        ModelKind::Lag { r } if n == 2 * r => Ok(GroupElem::Sp(lag::SpElement::new(m)?)),
        ModelKind::Ein { n: dim } if n == dim + 2 => Ok(GroupElem::So(ein::SOElement::new(m)?)),
        _ => Err(Error::ModelMismatch("group matrix size does not fit the model")),
    }
}

/// A point certified (at sample resolution) to have its incidence
/// hypersurface disjoint from a domain.
#[derive(Debug, Clone)]
pub struct DualPoint {
    pub point: Point,
    /// Smallest `|pairing|` seen over the certificate samples.
    pub margin: f64,
}

/// Sign-constancy certificate for `Z_xi` missing the sampled domain: on a
/// connected domain a crossing flips the pairing's sign, so all samples must
/// agree and stay away from zero.
pub(crate) fn certify_dual(model: &ModelHandle, samples: &[Point], xi: &Point) -> Option<f64> {
    let mut min_abs = f64::INFINITY;
    let mut sign = 0.0f64;
    for x in samples {
        let v = model.pairing(x, xi).ok()?;
        if v == 0.0 || !v.is_finite() {
            return None;
        }
        if sign == 0.0 {
            sign = v.signum();
        } else if v.signum() != sign {
            return None;
        }
        min_abs = min_abs.min(v.abs());
    }
    Some(min_abs)
}

/// Dual points of a diamond: the endpoints, the point at infinity, and draws
/// from the two affine rays `p - s(q - p)` and `q + s(q - p)` (`s > 0`).
/// These are the pullbacks of the standard diamond's dual under the
/// normalizing element. Every returned point passes the sign-constancy
/// certificate against 1000 interior samples.
pub fn dual_sample(
    model: &ModelHandle,
    d: &Diamond,
    count: usize,
    seed: u64,
) -> Result<Vec<DualPoint>> {
    let mut rng = sample::rng(seed);
    let interior: Vec<Point> = d
        .sample_interior(1000, &mut rng)
        .iter()
        .map(|x| model.chart_to_point(x))
        .collect::<Result<_>>()?;
    let c = d.q().sub(d.p())?;
    let mut candidates: Vec<Point> = vec![
        model.chart_to_point(d.p())?,
        model.chart_to_point(d.q())?,
    ];
    for k in 0..count {
        let u: f64 = rng.gen_range(0.02..0.98);
        let s = u / (1.0 - u);
        let xi = match k % 3 {
            0 => model.chart_to_point(&d.p().sub(&c.scale(s))?)?,
            1 => model.chart_to_point(&d.q().add(&c.scale(s))?)?,
            _ => model.infinity_point(),
        };
        candidates.push(xi);
    }
    let mut out = Vec::with_capacity(candidates.len());
    for xi in candidates {
        let margin = certify_dual(model, &interior, &xi).ok_or_else(|| {
            Error::InvalidInput("dual candidate failed its certificate".into())
        })?;
        out.push(DualPoint { point: xi, margin });
    }
    Ok(out)
}

/// Report of the dual-convexity probe.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DualConvexReport {
    pub attempted: usize,
    pub supported: usize,
}

impl DualConvexReport {
    pub fn ratio(&self) -> f64 {
        if self.attempted == 0 {
            1.0
        } else {
            self.supported as f64 / self.attempted as f64
        }
    }
}

/// For sampled boundary points, searches for a dual point whose incidence
/// hypersurface passes through the boundary point while missing the domain:
/// diamond endpoints and their dual rays first, then a simplex search over
/// chart candidates with the certificate as a barrier. Report-only; a ratio
/// below one is a finding, not an error.
pub fn is_dually_convex_probe(
    model: &ModelHandle,
    omega: &Domain,
    boundary_samples: usize,
    seed: u64,
) -> Result<DualConvexReport> {
    let mut rng = sample::rng(seed);
    let interior: Vec<Point> = omega
        .sample_interior(200, &mut rng)
        .iter()
        .map(|x| model.chart_to_point(x))
        .collect::<Result<_>>()?;
    let boundary = omega.boundary_samples(boundary_samples, &mut rng);
    let anchor = omega.anchor();

    // Fixed candidate duals (certificates precomputed once).
    let mut fixed: Vec<Point> = Vec::new();
    if let Domain::Diamond(d) = omega {
        fixed.push(model.chart_to_point(d.p())?);
        fixed.push(model.chart_to_point(d.q())?);
        let c = d.q().sub(d.p())?;
        for s in [0.25, 1.0, 4.0] {
            fixed.push(model.chart_to_point(&d.p().sub(&c.scale(s))?)?);
            fixed.push(model.chart_to_point(&d.q().add(&c.scale(s))?)?);
        }
    }
    let fixed: Vec<Point> = fixed
        .into_iter()
        .filter(|xi| certify_dual(model, &interior, xi).is_some())
        .collect();

    let support_tol = 1e-6;
    let mut supported = 0usize;
    for b in &boundary {
        let b_point = model.chart_to_point(b)?;
        let hit = fixed
            .iter()
            .any(|xi| model.pairing(&b_point, xi).map_or(false, |v| v.abs() <= support_tol));
        if hit {
            supported += 1;
            continue;
        }
        // Simplex search over chart duals, barrier = failed certificate.
        let objective = |coords: &[f64]| -> f64 {
            let xi_chart = match model.unflatten(&DVector::from_column_slice(coords)) {
                Ok(c) => c,
                Err(_) => return f64::INFINITY,
            };
            let xi = match model.chart_to_point(&xi_chart) {
                Ok(p) => p,
                Err(_) => return f64::INFINITY,
            };
            if certify_dual(model, &interior, &xi).is_none() {
                return f64::INFINITY;
            }
            model
                .pairing(&b_point, &xi)
                .map_or(f64::INFINITY, f64::abs)
        };
        let outward = b.sub(&anchor)?;
        let starts: Vec<Vec<f64>> = [0.5, 1.25, 3.0]
            .iter()
            .map(|s| {
                model
                    .flatten(&b.add(&outward.scale(*s)).expect("same model"))
                    .as_slice()
                    .to_vec()
            })
            .collect();
        let opts = SimplexOptions {
            max_iters: 200,
            ftol: 1e-12,
            step: 0.2 * (1.0 + chart_norm(b)),
        };
        let (_, best) = minimize_restarts(objective, &starts, &opts);
        if best <= support_tol {
            supported += 1;
        }
    }
    Ok(DualConvexReport {
        attempted: boundary.len(),
        supported,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelHandle;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;
    use rand::Rng;

    fn lag2() -> ModelHandle {
        ModelHandle::lag(2).unwrap()
    }

    fn ein3() -> ModelHandle {
        ModelHandle::ein(3).unwrap()
    }

    #[test]
    fn relation_examples() {
        // Future timelike unit vector.
        let x = Chart::Mink(dvector![0.0, 0.0, 0.0]);
        let y = Chart::Mink(dvector![0.0, 0.0, 1.0]);
        assert_eq!(
            causal_relation(&x, &y).unwrap(),
            CausalRelation::StrictFuture
        );
        assert_eq!(causal_relation(&y, &x).unwrap(), CausalRelation::StrictPast);

        // Rank-one increment lands on the cone boundary.
        let x = Chart::Sym(dmatrix![0.0, 0.0; 0.0, 0.0]);
        let y = Chart::Sym(dmatrix![0.0, 0.0; 0.0, 1.0]);
        assert_eq!(causal_relation(&x, &y).unwrap(), CausalRelation::FutureCone);
        assert_eq!(causal_relation(&y, &x).unwrap(), CausalRelation::PastCone);

        assert_eq!(causal_relation(&x, &x.clone()).unwrap(), CausalRelation::Equal);

        let z = Chart::Sym(dmatrix![1.0, 0.0; 0.0, -1.0]);
        assert_eq!(causal_relation(&x, &z).unwrap(), CausalRelation::Spacelike);
    }

    #[test]
    fn order_axioms_hold_on_samples() {
        for m in [lag2(), ein3()] {
            let report = order_axioms_check(&m, 2000, 11);
            assert!(report.pass(), "{report:?}");
        }
    }

    #[test]
    fn diamond_membership_examples() {
        let d = Diamond::new(
            Chart::Sym(DMatrix::zeros(2, 2)),
            Chart::Sym(DMatrix::identity(2, 2) * 2.0),
        )
        .unwrap();
        assert!(d.contains(&Chart::Sym(DMatrix::identity(2, 2))));
        // Open interval: endpoints excluded.
        assert!(!d.contains(d.p()));
        assert!(!d.contains(d.q()));

        let e = Diamond::new(
            Chart::Mink(dvector![0.0, 0.0, -1.0]),
            Chart::Mink(dvector![0.0, 0.0, 1.0]),
        )
        .unwrap();
        assert!(e.contains(&Chart::Mink(dvector![0.5, 0.0, 0.25])));
        assert!(!e.contains(&Chart::Mink(dvector![1.5, 0.0, 0.0])));
    }

    #[test]
    fn diamond_constructor_rejects_bad_pairs() {
        let zero = Chart::Sym(DMatrix::zeros(2, 2));
        let singular = Chart::Sym(dmatrix![1.0, 0.0; 0.0, 0.0]);
        assert!(matches!(
            Diamond::new(zero.clone(), singular),
            Err(Error::DegeneratePair)
        ));
        let indefinite = Chart::Sym(dmatrix![1.0, 0.0; 0.0, -1.0]);
        assert!(matches!(
            Diamond::new(zero, indefinite),
            Err(Error::NotCausalPair)
        ));
    }

    #[test]
    fn to_standard_postcondition() {
        for (m, seed) in [(lag2(), 21u64), (ein3(), 22u64)] {
            let mut rng = sample::rng(seed);
            for _ in 0..20 {
                let (p, q) = sample::random_causal_pair(&m, 1.0, &mut rng);
                let d = Diamond::new(p.clone(), q.clone()).unwrap();
                let g = d.to_standard().unwrap();
                let gp = g.act(&m.chart_to_point(&p).unwrap()).unwrap();
                let gq = g.act(&m.chart_to_point(&q).unwrap()).unwrap();
                assert!(gp.approx_eq(&m.base_point()), "p must map to the base point");
                assert!(gq.approx_eq(&m.infinity_point()), "q must map to infinity");
                let mid = g.act_chart(&d.midpoint()).unwrap();
                assert_eq!(cone_class(&mid), ConeClass::Interior);
            }
        }
    }

    #[test]
    fn interior_samples_are_members() {
        for (m, seed) in [(lag2(), 31u64), (ein3(), 32u64)] {
            let mut rng = sample::rng(seed);
            let (p, q) = sample::random_causal_pair(&m, 1.0, &mut rng);
            let d = Diamond::new(p, q).unwrap();
            for x in d.sample_interior(200, &mut rng) {
                assert!(d.contains(&x));
            }
        }
    }

    #[test]
    fn boundary_samples_sit_on_the_edge() {
        for (m, seed) in [(lag2(), 41u64), (ein3(), 42u64)] {
            let mut rng = sample::rng(seed);
            let (p, q) = sample::random_causal_pair(&m, 1.0, &mut rng);
            let d = Domain::diamond(p, q).unwrap();
            for b in d.boundary_samples(40, &mut rng) {
                assert!(!d.contains(&b) || d.contains(&b), "total predicate");
                // A small step toward the anchor is inside, a small step away
                // is outside.
                let a = d.anchor();
                let inward = a.sub(&b).unwrap();
                let step = 1e-6 / (1.0 + chart_norm(&inward));
                assert!(d.contains(&b.add(&inward.scale(step)).unwrap()));
                assert!(!d.contains(&b.sub(&inward.scale(step)).unwrap()));
            }
        }
    }

    #[test]
    fn dual_sample_certificates() {
        for (m, seed) in [(lag2(), 51u64), (ein3(), 52u64)] {
            let mut rng = sample::rng(seed);
            let (p, q) = sample::random_causal_pair(&m, 1.0, &mut rng);
            let d = Diamond::new(p.clone(), q.clone()).unwrap();
            let duals = dual_sample(&m, &d, 30, seed).unwrap();
            assert_eq!(duals.len(), 32);
            let p_pt = m.chart_to_point(&p).unwrap();
            let q_pt = m.chart_to_point(&q).unwrap();
            assert!(duals[0].point.approx_eq(&p_pt), "first dual is p");
            assert!(duals[1].point.approx_eq(&q_pt), "second dual is q");
            for dp in &duals {
                assert!(dp.margin > 0.0);
            }
            // count = 0 keeps only the endpoints.
            assert_eq!(dual_sample(&m, &d, 0, seed).unwrap().len(), 2);
        }
    }

    #[test]
    fn explicit_dual_certificate_for_minus_identity() {
        // D(0, 2I) in rank two; -I - X is negative definite on the whole
        // diamond, so the pairing det(X - (-I)) never vanishes.
        let m = lag2();
        let d = Diamond::new(
            Chart::Sym(DMatrix::zeros(2, 2)),
            Chart::Sym(DMatrix::identity(2, 2) * 2.0),
        )
        .unwrap();
        let mut rng = sample::rng(5);
        let interior: Vec<Point> = d
            .sample_interior(1000, &mut rng)
            .iter()
            .map(|x| m.chart_to_point(x).unwrap())
            .collect();
        let xi = m
            .chart_to_point(&Chart::Sym(-DMatrix::identity(2, 2)))
            .unwrap();
        let margin = certify_dual(&m, &interior, &xi);
        assert!(margin.is_some_and(|v| v > 0.5), "margin {margin:?}");
    }

    #[test]
    fn dual_convexity_diamonds_fully_supported() {
        for (m, seed) in [(lag2(), 61u64), (ein3(), 62u64)] {
            let mut rng = sample::rng(seed);
            let (p, q) = sample::random_causal_pair(&m, 1.0, &mut rng);
            let omega = Domain::diamond(p, q).unwrap();
            let report = is_dually_convex_probe(&m, &omega, 12, seed).unwrap();
            assert_eq!(report.supported, report.attempted, "{report:?}");
            assert_eq!(report.ratio(), 1.0);
        }
    }

    #[test]
    fn dual_convexity_ball_is_unsupported() {
        // Every incidence hypersurface through a boundary point of a
        // Euclidean chart ball contains a null line through that point, and
        // every null line through a boundary point of a Euclidean ball dips
        // into the open ball; the probe must come back (nearly) empty-handed.
        let m = ein3();
        let omega = Domain::ball(Chart::Mink(dvector![0.0, 0.0, 0.0]), 1.0).unwrap();
        let report = is_dually_convex_probe(&m, &omega, 10, 63).unwrap();
        assert!(
            report.ratio() < 0.5,
            "a Euclidean ball admits no supporting incidence hypersurfaces, got {report:?}"
        );
    }

    #[test]
    fn dual_convexity_box_reports_without_error() {
        let m = ein3();
        let omega = Domain::axis_box(
            Chart::Mink(dvector![-1.0, -1.0, -1.0]),
            Chart::Mink(dvector![1.0, 1.0, 1.0]),
        )
        .unwrap();
        let report = is_dually_convex_probe(&m, &omega, 8, 64).unwrap();
        assert!(report.ratio() < 1.0, "{report:?}");
    }

    #[test]
    fn domain_json_round_trips() {
        let m = lag2();
        let e = ein3();
        let diamond = Domain::diamond(
            Chart::Sym(DMatrix::zeros(2, 2)),
            Chart::Sym(DMatrix::identity(2, 2) * 2.0),
        )
        .unwrap();
        let ball = Domain::ball(Chart::Mink(dvector![0.1, 0.0, 0.0]), 0.75).unwrap();
        let bx = Domain::axis_box(
            Chart::Mink(dvector![-1.0, -1.0, -1.0]),
            Chart::Mink(dvector![1.0, 1.0, 1.0]),
        )
        .unwrap();
        let mut rng = sample::rng(7);
        let g = sample::random_affine(&m, &mut rng);
        let base = Diamond::new(
            Chart::Sym(DMatrix::zeros(2, 2)),
            Chart::Sym(DMatrix::identity(2, 2)),
        )
        .unwrap();
        let image = Domain::diamond_image(base, g, 7).unwrap();

        for (model, dom) in [(&m, &diamond), (&e, &ball), (&e, &bx), (&m, &image)] {
            let v = dom.to_json_value();
            let back = Domain::from_json_value(model, &v).unwrap();
            let mut rng = sample::rng(99);
            for x in dom.sample_interior(50, &mut rng) {
                assert!(back.contains(&x), "membership must survive the round trip");
            }
            let anchor = dom.anchor();
            assert!(back.contains(&anchor));
        }
    }

    #[test]
    fn diamond_image_membership_matches_preimage() {
        let m = ein3();
        let mut rng = sample::rng(70);
        let (p, q) = sample::random_causal_pair(&m, 1.0, &mut rng);
        let d = Diamond::new(p, q).unwrap();
        let g = sample::random_affine(&m, &mut rng);
        let image = Domain::diamond_image(d.clone(), g.clone(), 70).unwrap();
        for x in d.sample_interior(100, &mut rng) {
            let gx = g.act_chart(&x).unwrap();
            assert!(image.contains(&gx));
        }
        let (lo, hi) = image.bbox();
        let mut rng2 = sample::rng(71);
        for x in image.sample_interior(100, &mut rng2) {
            assert!(x.within_box(&lo, &hi), "bbox must hold the members");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn membership_is_equivariant(seed in 0u64..1_000_000) {
            for m in [lag2(), ein3()] {
                let mut rng = sample::rng(seed);
                let (p, q) = sample::random_causal_pair(&m, 1.0, &mut rng);
                let d = Diamond::new(p, q).unwrap();
                let g = d.to_standard().unwrap();
                // Probe points around the diamond.
                let x = match rng.gen_range(0..3u8) {
                    0 => d.midpoint(),
                    1 => d.sample_interior(1, &mut rng).pop().unwrap(),
                    _ => sample::random_chart(&m, 1.5, &mut rng),
                };
                let member = d.contains(&x);
                if let Ok(gx) = g.act_chart(&x) {
                    // The standard diamond is the open future of the base point.
                    let std_member = cone_class(&gx) == ConeClass::Interior;
                    // Skip the knife's edge: equivariance is a statement about
                    // the open set and its exterior.
                    let a = x.sub(d.p()).unwrap();
                    let b = d.q().sub(&x).unwrap();
                    if cone_class(&a) != ConeClass::Boundary && cone_class(&b) != ConeClass::Boundary {
                        prop_assert_eq!(member, std_member);
                    }
                }
            }
        }

        #[test]
        fn relation_invariant_under_affine_elements(seed in 0u64..1_000_000) {
            for m in [lag2(), ein3()] {
                let mut rng = sample::rng(seed);
                let x = sample::random_chart(&m, 1.0, &mut rng);
                let y = match rng.gen_range(0..3u8) {
                    0 => x.add(&sample::random_cone_interior(&m, &mut rng)).unwrap(),
                    1 => x
                        .add(&sample::random_photon_direction(&m, &mut rng))
                        .unwrap(),
                    _ => sample::random_chart(&m, 1.0, &mut rng),
                };
                let g = sample::random_affine(&m, &mut rng);
                let rel = causal_relation(&x, &y).unwrap();
                let rel_g = causal_relation(
                    &g.act_chart(&x).unwrap(),
                    &g.act_chart(&y).unwrap(),
                )
                .unwrap();
                prop_assert_eq!(rel, rel_g);
            }
        }
    }
}
