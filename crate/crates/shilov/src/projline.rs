//! Exact projective-line arithmetic: points of `P(R^2)`, the classical cross
//! ratio, and the Hilbert pseudo-metric on intervals.
//!
//! The cross ratio is normalized so that
//! `([1:0] : [1:1] : [1:t] : [0:1]) = t`.

use crate::{tol, Error, Result};

/// A point `[t1 : t2]` of the real projective line.
///
/// Stored in canonical form: `(1, t)` when the first coordinate is nonzero,
/// `(0, 1)` otherwise, so equality is testable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjPoint {
    c: (f64, f64),
}

impl ProjPoint {
    /// Builds `[t1 : t2]` and canonicalizes. Both coordinates (relatively)
    /// zero is rejected.
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        let scale = t1.abs().max(t2.abs());
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::InvalidInput(
                "projective point needs a nonzero finite coordinate pair".into(),
            ));
        }
        if t1.abs() <= tol::HOMOGENEOUS * scale {
            Ok(Self { c: (0.0, 1.0) })
        } else {
            Ok(Self { c: (1.0, t2 / t1) })
        }
    }

    /// The affine point `[1 : t]`.
    pub fn finite(t: f64) -> Self {
        Self { c: (1.0, t) }
    }

    /// The point at infinity `[0 : 1]`.
    pub fn infinity() -> Self {
        Self { c: (0.0, 1.0) }
    }

    pub fn is_infinity(&self) -> bool {
        self.c.0 == 0.0
    }

    /// Canonical homogeneous coordinates.
    pub fn coords(&self) -> (f64, f64) {
        self.c
    }

    /// Affine value `t` of `[1 : t]`; infinite for `[0 : 1]`.
    pub fn value(&self) -> f64 {
        if self.is_infinity() {
            f64::INFINITY
        } else {
            self.c.1
        }
    }

    pub fn approx_eq(&self, other: &Self, eps: f64) -> bool {
        if self.is_infinity() != other.is_infinity() {
            return false;
        }
        let d = (self.c.1 - other.c.1).abs();
        d <= eps * (1.0 + self.c.1.abs().max(other.c.1.abs()))
    }

    /// Image under an invertible 2x2 matrix acting on homogeneous coordinates.
    pub fn act(&self, g: &[[f64; 2]; 2]) -> Result<Self> {
        let (t1, t2) = self.c;
        Self::new(g[0][0] * t1 + g[0][1] * t2, g[1][0] * t1 + g[1][1] * t2)
    }
}

/// `D([p1:p2], [q1:q2]) = p1 q2 - p2 q1`, the basic projective determinant.
fn det(p: &ProjPoint, q: &ProjPoint) -> f64 {
    p.c.0 * q.c.1 - p.c.1 * q.c.0
}

/// The cross ratio `(a : x : y : b)`, an extended real.
///
/// `PGL_2(R)`-invariant; `+/-inf` when the denominator vanishes; an
/// indeterminate `0/0` quadruple is an error.
pub fn cross_ratio(a: &ProjPoint, x: &ProjPoint, y: &ProjPoint, b: &ProjPoint) -> Result<f64> {
    let num = det(a, y) * det(x, b);
    let den = det(a, x) * det(y, b);
    let v = num / den;
    if v.is_nan() {
        return Err(Error::UndefinedCrossRatio);
    }
    Ok(v)
}

/// A proper interval of `P(R^2)`: two endpoints plus an interior witness that
/// fixes which of the two arcs is meant. The full line is a distinguished
/// degenerate variant (on it the Hilbert pseudo-metric is the constant 0).
#[derive(Debug, Clone, Copy)]
pub enum ProjInterval {
    Full,
    Arc {
        a: ProjPoint,
        b: ProjPoint,
        witness: ProjPoint,
    },
}

impl ProjInterval {
    /// The arc from `a` to `b` through `witness`.
    pub fn arc(a: ProjPoint, b: ProjPoint, witness: ProjPoint) -> Result<Self> {
        let iv = ProjInterval::Arc { a, b, witness };
        // The witness must lie strictly inside the arc it designates.
        match iv.position(&witness) {
            Position::Interior => Ok(iv),
            _ => Err(Error::InvalidInput(
                "interval witness must be strictly inside the arc".into(),
            )),
        }
    }

    pub fn endpoints(&self) -> Option<(ProjPoint, ProjPoint)> {
        match self {
            ProjInterval::Full => None,
            ProjInterval::Arc { a, b, .. } => Some((*a, *b)),
        }
    }

    fn position(&self, s: &ProjPoint) -> Position {
        match self {
            ProjInterval::Full => Position::Interior,
            ProjInterval::Arc { a, b, witness } => {
                // Map (a, witness, b) to (0, 1, inf); the designated arc is the
                // image of the positive axis.
                let num = det(a, s) * det(witness, b);
                let den = det(b, s) * det(witness, a);
                if den == 0.0 {
                    // s coincides with b (or the arc data is degenerate).
                    return if num == 0.0 {
                        Position::Outside
                    } else {
                        Position::Endpoint
                    };
                }
                let m = num / den;
                if m == 0.0 {
                    Position::Endpoint
                } else if m > 0.0 {
                    Position::Interior
                } else {
                    Position::Outside
                }
            }
        }
    }

    pub fn contains_closed(&self, s: &ProjPoint) -> bool {
        !matches!(self.position(s), Position::Outside)
    }
}

enum Position {
    Interior,
    Endpoint,
    Outside,
}

/// Hilbert pseudo-metric of `s1, s2` inside the interval: the log of the cross
/// ratio `(a : s1 : s2 : b)` with the endpoints ordered so the value is >= 0.
/// Zero on the full-line variant; infinite when a point sits on an endpoint.
pub fn hilbert_dist(iv: &ProjInterval, s1: &ProjPoint, s2: &ProjPoint) -> Result<f64> {
    let (a, b) = match iv {
        ProjInterval::Full => return Ok(0.0),
        ProjInterval::Arc { a, b, .. } => (a, b),
    };
    if !iv.contains_closed(s1) || !iv.contains_closed(s2) {
        return Err(Error::OutsideInterval);
    }
    if s1.approx_eq(s2, tol::HOMOGENEOUS) {
        return Ok(0.0);
    }
    let cr = cross_ratio(a, s1, s2, b)?;
    if cr == 0.0 || cr.is_infinite() {
        return Ok(f64::INFINITY);
    }
    // Both points inside one arc give cr > 0; |ln| absorbs the endpoint order.
    Ok(cr.abs().ln().abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fp(t: f64) -> ProjPoint {
        ProjPoint::finite(t)
    }

    #[test]
    fn cross_ratio_normalization() {
        // ([1:0] : [1:1] : [1:t] : [0:1]) = t, exactly, for small integers.
        for t in -2..=3 {
            let t = t as f64;
            let v = cross_ratio(
                &ProjPoint::new(1.0, 0.0).unwrap(),
                &fp(1.0),
                &fp(t),
                &ProjPoint::infinity(),
            )
            .unwrap();
            assert!((v - t).abs() <= 1e-12, "t={t}: got {v}");
        }
    }

    #[test]
    fn cross_ratio_identity_case() {
        let v = cross_ratio(&fp(-1.0), &fp(0.3), &fp(0.3), &fp(2.0)).unwrap();
        assert!((v - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cross_ratio_four_point_value() {
        // Affine evaluation of ([1:0] : [1:1/3] : [1:2/3] : [1:1]):
        // ((2/3 - 0)(1 - 1/3)) / ((1/3 - 0)(1 - 2/3)) = 4.
        let v = cross_ratio(&fp(0.0), &fp(1.0 / 3.0), &fp(2.0 / 3.0), &fp(1.0)).unwrap();
        assert!((v - 4.0).abs() <= 1e-12, "got {v}");
    }

    #[test]
    fn cross_ratio_undefined_for_coincident_quadruple() {
        let p = fp(0.5);
        assert!(matches!(
            cross_ratio(&p, &p, &p, &p),
            Err(Error::UndefinedCrossRatio)
        ));
    }

    #[test]
    fn infinite_value_when_denominator_vanishes() {
        // y = b makes D(y, b) = 0 while the numerator stays nonzero.
        let v = cross_ratio(&fp(0.0), &fp(0.5), &fp(1.0), &fp(1.0)).unwrap();
        assert!(v.is_infinite());
    }

    #[test]
    fn hilbert_full_line_is_zero() {
        let d = hilbert_dist(&ProjInterval::Full, &fp(0.1), &fp(7.0)).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn hilbert_coincident_points() {
        let iv = ProjInterval::arc(fp(0.0), fp(1.0), fp(0.5)).unwrap();
        assert_eq!(hilbert_dist(&iv, &fp(0.25), &fp(0.25)).unwrap(), 0.0);
    }

    #[test]
    fn hilbert_log4_example() {
        // Arc from [1:0] to [1:1] through [1:1/2], points 1/3 and 2/3:
        // the cross ratio above is 4, so the distance is log 4.
        let iv = ProjInterval::arc(fp(0.0), fp(1.0), fp(0.5)).unwrap();
        let d = hilbert_dist(&iv, &fp(1.0 / 3.0), &fp(2.0 / 3.0)).unwrap();
        assert!((d - 4.0f64.ln()).abs() <= 1e-12, "got {d}");
    }

    #[test]
    fn hilbert_symmetric() {
        let iv = ProjInterval::arc(fp(0.0), fp(1.0), fp(0.5)).unwrap();
        let d1 = hilbert_dist(&iv, &fp(0.2), &fp(0.9)).unwrap();
        let d2 = hilbert_dist(&iv, &fp(0.9), &fp(0.2)).unwrap();
        assert!((d1 - d2).abs() <= 1e-12);
    }

    #[test]
    fn outside_point_is_rejected() {
        let iv = ProjInterval::arc(fp(0.0), fp(1.0), fp(0.5)).unwrap();
        assert!(matches!(
            hilbert_dist(&iv, &fp(2.0), &fp(0.5)),
            Err(Error::OutsideInterval)
        ));
        // The complementary arc through infinity contains [1:2].
        let out = ProjInterval::arc(fp(0.0), fp(1.0), ProjPoint::infinity()).unwrap();
        assert!(out.contains_closed(&fp(2.0)));
        assert!(!out.contains_closed(&fp(0.5)));
    }

    #[test]
    fn endpoint_distance_is_infinite() {
        let iv = ProjInterval::arc(fp(0.0), fp(1.0), fp(0.5)).unwrap();
        let d = hilbert_dist(&iv, &fp(0.0), &fp(0.5)).unwrap();
        assert!(d.is_infinite());
    }

    fn proj_point() -> impl Strategy<Value = ProjPoint> {
        (-10.0f64..10.0, -10.0f64..10.0)
            .prop_filter("nonzero", |(a, b)| a.abs().max(b.abs()) > 1e-3)
            .prop_map(|(a, b)| ProjPoint::new(a, b).unwrap())
    }

    fn gl2() -> impl Strategy<Value = [[f64; 2]; 2]> {
        (
            -3.0f64..3.0,
            -3.0f64..3.0,
            -3.0f64..3.0,
            -3.0f64..3.0,
        )
            .prop_filter("invertible", |(a, b, c, d)| (a * d - b * c).abs() > 0.05)
            .prop_map(|(a, b, c, d)| {
                // Normalize to determinant +-1, i.e. an SL(2) element up to sign
                // (the cross ratio is a PGL_2 invariant either way).
                let s = (a * d - b * c).abs().sqrt();
                [[a / s, b / s], [c / s, d / s]]
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn cross_ratio_is_projectively_invariant(
            a in proj_point(), x in proj_point(), y in proj_point(), b in proj_point(),
            g in gl2(),
        ) {
            let before = cross_ratio(&a, &x, &y, &b);
            let after = cross_ratio(
                &a.act(&g).unwrap(), &x.act(&g).unwrap(),
                &y.act(&g).unwrap(), &b.act(&g).unwrap(),
            );
            if let (Ok(v), Ok(w)) = (before, after) {
                // Compare on finite, well-conditioned values only.
                if v.is_finite() && w.is_finite() && v.abs() < 1e6 {
                    prop_assert!((v - w).abs() <= 1e-10 * (1.0 + v.abs()), "{v} vs {w}");
                }
            }
        }

        #[test]
        fn log_cross_ratio_cocycle(
            (tx, ty, tz) in (0.01f64..0.99, 0.01f64..0.99, 0.01f64..0.99),
        ) {
            // log(a:x:y:b) + log(a:y:z:b) = log(a:x:z:b) on an aligned quadruple.
            let (a, b) = (fp(0.0), fp(1.0));
            let (x, y, z) = (fp(tx), fp(ty), fp(tz));
            let lxy = cross_ratio(&a, &x, &y, &b).unwrap().ln();
            let lyz = cross_ratio(&a, &y, &z, &b).unwrap().ln();
            let lxz = cross_ratio(&a, &x, &z, &b).unwrap().ln();
            prop_assert!((lxy + lyz - lxz).abs() <= 1e-10);
        }

        #[test]
        fn hilbert_is_additive_along_the_interval(
            (t1, t2, t3) in (0.01f64..0.99, 0.01f64..0.99, 0.01f64..0.99),
        ) {
            // For aligned triples inside the interval the triangle inequality
            // is an equality: the metric is additive along the interval.
            let iv = ProjInterval::arc(fp(0.0), fp(1.0), fp(0.5)).unwrap();
            let mut ts = [t1, t2, t3];
            ts.sort_by(f64::total_cmp);
            let (x, y, z) = (fp(ts[0]), fp(ts[1]), fp(ts[2]));
            let dxz = hilbert_dist(&iv, &x, &z).unwrap();
            let dxy = hilbert_dist(&iv, &x, &y).unwrap();
            let dyz = hilbert_dist(&iv, &y, &z).unwrap();
            prop_assert!((dxy + dyz - dxz).abs() <= 1e-10);
        }
    }
}
