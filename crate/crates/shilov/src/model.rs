//! Model-generic layer: a handle selecting one of the two boundary models
//! and dispatch types for charts, points, and group elements.
//!
//! Everything downstream (causal structure, photons, metrics, rigidity)
//! works through this layer so the two models share one code path.

use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{ein, lag, tol, ConeClass, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Lagrangian planes in `R^{2r}`; chart = symmetric `r x r` matrices.
    Lag { r: usize },
    /// Einstein universe of dimension `n`; chart = Minkowski `n`-vectors.
    Ein { n: usize },
}

/// A model together with the power `N` of the pairing used by the metric
/// layer (the exponent of the determinant character for the active linear
/// representation).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelHandle {
    kind: ModelKind,
    rep_n: usize,
}

impl ModelHandle {
    pub fn lag(r: usize) -> Result<Self> {
        if !(1..=8).contains(&r) {
            return Err(Error::InvalidInput(format!(
                "Lagrangian rank must be in [1, 8], got {r}"
            )));
        }
        Ok(ModelHandle {
            kind: ModelKind::Lag { r },
            rep_n: 1,
        })
    }

    pub fn ein(n: usize) -> Result<Self> {
        if !(3..=10).contains(&n) {
            return Err(Error::InvalidInput(format!(
                "Einstein dimension must be in [3, 10], got {n}"
            )));
        }
        Ok(ModelHandle {
            kind: ModelKind::Ein { n },
            rep_n: 1,
        })
    }

    /// Parses `lag:R` or `ein:N`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, num) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("model must be lag:R or ein:N, got {s:?}")))?;
        let value: usize = num
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad model parameter {num:?}")))?;
        match name {
            "lag" => Self::lag(value),
            "ein" => Self::ein(value),
            _ => Err(Error::InvalidInput(format!("unknown model {name:?}"))),
        }
    }

    pub fn with_rep_n(mut self, rep_n: usize) -> Result<Self> {
        if rep_n == 0 {
            return Err(Error::InvalidInput("representation power must be >= 1".into()));
        }
        self.rep_n = rep_n;
        Ok(self)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn rep_n(&self) -> usize {
        self.rep_n
    }

    /// Real rank of the underlying group: `r` for the Lagrangian model, 2 for
    /// the Einstein model.
    pub fn rank(&self) -> usize {
        match self.kind {
            ModelKind::Lag { r } => r,
            ModelKind::Ein { .. } => 2,
        }
    }

    /// Upper bound on the number of photon-chain links needed between any
    /// two points: `2r` for the Lagrangian model, 4 for the Einstein model.
    pub fn chain_bound(&self) -> usize {
        match self.kind {
            ModelKind::Lag { r } => 2 * r,
            ModelKind::Ein { .. } => 4,
        }
    }

    /// Number of free chart coordinates.
    pub fn chart_dim(&self) -> usize {
        match self.kind {
            ModelKind::Lag { r } => r * (r + 1) / 2,
            ModelKind::Ein { n } => n,
        }
    }

    pub fn chart_zero(&self) -> Chart {
        match self.kind {
            ModelKind::Lag { r } => Chart::Sym(DMatrix::zeros(r, r)),
            ModelKind::Ein { n } => Chart::Mink(DVector::zeros(n)),
        }
    }

    pub fn validate_chart(&self, x: &Chart) -> Result<()> {
        match (self.kind, x) {
            (ModelKind::Lag { r }, Chart::Sym(m)) if m.nrows() == r && m.ncols() == r => Ok(()),
            (ModelKind::Ein { n }, Chart::Mink(v)) if v.len() == n => Ok(()),
            _ => Err(Error::ModelMismatch("chart does not fit the model")),
        }
    }

    pub fn validate_point(&self, x: &Point) -> Result<()> {
        match (self.kind, x) {
            (ModelKind::Lag { r }, Point::Lag(p)) if p.r() == r => Ok(()),
            (ModelKind::Ein { n }, Point::Ein(p)) if p.n() == n => Ok(()),
            _ => Err(Error::ModelMismatch("point does not fit the model")),
        }
    }

    /// Flattens a chart to optimizer coordinates: upper triangle by rows for
    /// the symmetric chart, plain coordinates for the Minkowski chart. Not an
    /// isometry; used for boxes and local searches only.
    pub fn flatten(&self, x: &Chart) -> DVector<f64> {
        match x {
            Chart::Sym(m) => {
                let r = m.nrows();
                let mut out = DVector::zeros(r * (r + 1) / 2);
                let mut k = 0;
                for i in 0..r {
                    for j in i..r {
                        out[k] = m[(i, j)];
                        k += 1;
                    }
                }
                out
            }
            Chart::Mink(v) => v.clone(),
        }
    }

    pub fn unflatten(&self, coords: &DVector<f64>) -> Result<Chart> {
        match self.kind {
            ModelKind::Lag { r } => {
                if coords.len() != r * (r + 1) / 2 {
                    return Err(Error::ModelMismatch("coordinate count mismatch"));
                }
                let mut m = DMatrix::zeros(r, r);
                let mut k = 0;
                for i in 0..r {
                    for j in i..r {
                        m[(i, j)] = coords[k];
                        m[(j, i)] = coords[k];
                        k += 1;
                    }
                }
                Ok(Chart::Sym(m))
            }
            ModelKind::Ein { n } => {
                if coords.len() != n {
                    return Err(Error::ModelMismatch("coordinate count mismatch"));
                }
                Ok(Chart::Mink(coords.clone()))
            }
        }
    }

    pub fn cone_member(&self, x: &Chart) -> Result<ConeClass> {
        self.validate_chart(x)?;
        Ok(match x {
            Chart::Sym(m) => lag::cone_member(m),
            Chart::Mink(v) => ein::cone_member(v),
        })
    }

    pub fn chart_to_point(&self, x: &Chart) -> Result<Point> {
        self.validate_chart(x)?;
        Ok(match x {
            Chart::Sym(m) => Point::Lag(lag::LagPoint::from_chart(m)?),
            Chart::Mink(v) => Point::Ein(ein::EinPoint::from_chart(v)?),
        })
    }

    pub fn point_to_chart(&self, x: &Point) -> Result<Chart> {
        self.validate_point(x)?;
        Ok(match x {
            Point::Lag(p) => Chart::Sym(p.chart()?),
            Point::Ein(p) => Chart::Mink(p.chart()?),
        })
    }

    pub fn base_point(&self) -> Point {
        match self.kind {
            ModelKind::Lag { r } => Point::Lag(lag::LagPoint::base(r)),
            ModelKind::Ein { n } => Point::Ein(ein::EinPoint::base(n)),
        }
    }

    pub fn infinity_point(&self) -> Point {
        match self.kind {
            ModelKind::Lag { r } => Point::Lag(lag::LagPoint::at_infinity(r)),
            ModelKind::Ein { n } => Point::Ein(ein::EinPoint::at_infinity(n)),
        }
    }

    pub fn pairing(&self, x: &Point, xi: &Point) -> Result<f64> {
        self.validate_point(x)?;
        self.validate_point(xi)?;
        Ok(match (x, xi) {
            (Point::Lag(a), Point::Lag(b)) => lag::pairing(a, b),
            (Point::Ein(a), Point::Ein(b)) => ein::pairing(a, b),
            _ => unreachable!("validated above"),
        })
    }

    pub fn is_transverse(&self, x: &Point, y: &Point) -> Result<bool> {
        Ok(self.pairing(x, y)?.abs() > tol::TRANSVERSE)
    }

    pub fn identity(&self) -> GroupElem {
        match self.kind {
            ModelKind::Lag { r } => GroupElem::Sp(lag::SpElement::identity(r)),
            ModelKind::Ein { n } => GroupElem::So(ein::SOElement::identity(n)),
        }
    }

    pub fn dilation(&self, t: f64) -> Result<GroupElem> {
        Ok(match self.kind {
            ModelKind::Lag { r } => GroupElem::Sp(lag::SpElement::dilation(r, t)?),
            ModelKind::Ein { n } => GroupElem::So(ein::SOElement::dilation(n, t)?),
        })
    }

    pub fn translation(&self, b: &Chart) -> Result<GroupElem> {
        self.validate_chart(b)?;
        Ok(match b {
            Chart::Sym(m) => GroupElem::Sp(lag::SpElement::translation(m)?),
            Chart::Mink(v) => GroupElem::So(ein::SOElement::translation(v)?),
        })
    }

    /// The element carrying the order interval `(p, q)` onto the model's
    /// future cone, `p` to the base point and `q` to the point at infinity.
    pub fn standardize(&self, p: &Chart, q: &Chart) -> Result<GroupElem> {
        self.validate_chart(p)?;
        self.validate_chart(q)?;
        Ok(match (p, q) {
            (Chart::Sym(a), Chart::Sym(b)) => GroupElem::Sp(lag::standardize(a, b)?),
            (Chart::Mink(a), Chart::Mink(b)) => GroupElem::So(ein::standardize(a, b)?),
            _ => unreachable!("validated above"),
        })
    }

    pub fn act(&self, g: &GroupElem, x: &Point) -> Result<Point> {
        self.validate_point(x)?;
        match (g, x) {
            (GroupElem::Sp(g), Point::Lag(p)) if g.r() == p.r() => Ok(Point::Lag(g.act(p))),
            (GroupElem::So(g), Point::Ein(p)) if g.n() == p.n() => Ok(Point::Ein(g.act(p))),
            _ => Err(Error::ModelMismatch("group element does not fit the point")),
        }
    }

    pub fn act_chart(&self, g: &GroupElem, x: &Chart) -> Result<Chart> {
        self.point_to_chart(&self.act(g, &self.chart_to_point(x)?)?)
    }
}

/// A chart vector in either model.
#[derive(Debug, Clone)]
pub enum Chart {
    Sym(DMatrix<f64>),
    Mink(DVector<f64>),
}

impl Chart {
    pub fn add(&self, other: &Chart) -> Result<Chart> {
        match (self, other) {
            (Chart::Sym(a), Chart::Sym(b)) if a.shape() == b.shape() => Ok(Chart::Sym(a + b)),
            (Chart::Mink(a), Chart::Mink(b)) if a.len() == b.len() => Ok(Chart::Mink(a + b)),
            _ => Err(Error::ModelMismatch("chart shapes differ")),
        }
    }

    pub fn sub(&self, other: &Chart) -> Result<Chart> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, t: f64) -> Chart {
        match self {
            Chart::Sym(a) => Chart::Sym(a * t),
            Chart::Mink(a) => Chart::Mink(a * t),
        }
    }

    pub fn amax(&self) -> f64 {
        match self {
            Chart::Sym(a) => a.amax(),
            Chart::Mink(a) => a.amax(),
        }
    }

    pub fn approx_eq(&self, other: &Chart, eps: f64) -> bool {
        match self.sub(other) {
            Ok(d) => d.amax() <= eps * (1.0 + self.amax().max(other.amax())),
            Err(_) => false,
        }
    }

    /// Elementwise comparison against a box corner.
    pub fn within_box(&self, lo: &Chart, hi: &Chart) -> bool {
        let ge = |a: &Chart, b: &Chart| match (a, b) {
            (Chart::Sym(x), Chart::Sym(y)) => x.iter().zip(y.iter()).all(|(p, q)| p >= q),
            (Chart::Mink(x), Chart::Mink(y)) => x.iter().zip(y.iter()).all(|(p, q)| p >= q),
            _ => false,
        };
        ge(self, lo) && ge(hi, self)
    }
}

impl Serialize for Chart {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            // Symmetric charts as nested rows, Minkowski charts as a flat
            // array; the two shapes make the encoding self-describing.
            Chart::Sym(m) => {
                let rows: Vec<Vec<f64>> = (0..m.nrows())
                    .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                    .collect();
                rows.serialize(serializer)
            }
            Chart::Mink(v) => v.as_slice().serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Chart {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        chart_from_value(&value).map_err(D::Error::custom)
    }
}

fn chart_from_value(value: &serde_json::Value) -> std::result::Result<Chart, String> {
    let arr = value.as_array().ok_or("chart must be a JSON array")?;
    if arr.is_empty() {
        return Err("chart must be nonempty".into());
    }
    if arr[0].is_array() {
        let rows: Vec<Vec<f64>> = serde_json::from_value(value.clone())
            .map_err(|e| format!("bad symmetric chart: {e}"))?;
        let r = rows.len();
        if rows.iter().any(|row| row.len() != r) {
            return Err("symmetric chart must be square".into());
        }
        let m = DMatrix::from_fn(r, r, |i, j| rows[i][j]);
        let defect = (&m - m.transpose()).amax();
        if defect > 1e-9 * (1.0 + m.amax()) {
            return Err(format!("chart matrix is not symmetric (defect {defect:.3e})"));
        }
        Ok(Chart::Sym(lag::symmetrize(&m)))
    } else {
        let v: Vec<f64> =
            serde_json::from_value(value.clone()).map_err(|e| format!("bad chart vector: {e}"))?;
        Ok(Chart::Mink(DVector::from_vec(v)))
    }
}

/// A boundary point in either model.
#[derive(Debug, Clone)]
pub enum Point {
    Lag(lag::LagPoint),
    Ein(ein::EinPoint),
}

impl Point {
    pub fn approx_eq(&self, other: &Point) -> bool {
        match (self, other) {
            (Point::Lag(a), Point::Lag(b)) => a.approx_eq(b),
            (Point::Ein(a), Point::Ein(b)) => a.approx_eq(b),
            _ => false,
        }
    }

    pub fn is_chart(&self) -> bool {
        match self {
            Point::Lag(p) => p.is_chart(),
            Point::Ein(p) => p.is_chart(),
        }
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Point::Lag(p) => p.serialize(serializer),
            Point::Ein(p) => p.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        if value.is_object() {
            let p: lag::LagPoint =
                serde_json::from_value(value).map_err(|e| D::Error::custom(e.to_string()))?;
            Ok(Point::Lag(p))
        } else if value.is_array() {
            let p: ein::EinPoint =
                serde_json::from_value(value).map_err(|e| D::Error::custom(e.to_string()))?;
            Ok(Point::Ein(p))
        } else {
            Err(D::Error::custom(
                "point must be {\"frame\": ...} or a flat array",
            ))
        }
    }
}

/// A group element in either model.
#[derive(Debug, Clone)]
pub enum GroupElem {
    Sp(lag::SpElement),
    So(ein::SOElement),
}

impl GroupElem {
    pub fn compose(&self, other: &GroupElem) -> Result<GroupElem> {
        match (self, other) {
            (GroupElem::Sp(a), GroupElem::Sp(b)) if a.r() == b.r() => {
                Ok(GroupElem::Sp(a.compose(b)))
            }
            (GroupElem::So(a), GroupElem::So(b)) if a.n() == b.n() => {
                Ok(GroupElem::So(a.compose(b)))
            }
            _ => Err(Error::ModelMismatch("group elements live in different groups")),
        }
    }

    pub fn inverse(&self) -> GroupElem {
        match self {
            GroupElem::Sp(g) => GroupElem::Sp(g.inverse()),
            GroupElem::So(g) => GroupElem::So(g.inverse()),
        }
    }

    /// Deviation from the defining relation of the group.
    pub fn defect(&self) -> f64 {
        match self {
            GroupElem::Sp(g) => g.defect(),
            GroupElem::So(g) => g.defect(),
        }
    }

    pub fn act(&self, x: &Point) -> Result<Point> {
        match (self, x) {
            (GroupElem::Sp(g), Point::Lag(p)) if g.r() == p.r() => Ok(Point::Lag(g.act(p))),
            (GroupElem::So(g), Point::Ein(p)) if g.n() == p.n() => Ok(Point::Ein(g.act(p))),
            _ => Err(Error::ModelMismatch("group element does not fit the point")),
        }
    }

    /// Chart action; `ChartOverflow` when the image leaves the chart.
    pub fn act_chart(&self, x: &Chart) -> Result<Chart> {
        match (self, x) {
            (GroupElem::Sp(g), Chart::Sym(m)) if g.r() == m.nrows() => {
                Ok(Chart::Sym(g.act_chart(m)?))
            }
            (GroupElem::So(g), Chart::Mink(v)) if g.n() == v.len() => {
                Ok(Chart::Mink(g.act_chart(v)?))
            }
            _ => Err(Error::ModelMismatch("group element does not fit the chart")),
        }
    }
}
