//! Seeded samplers shared by the verification suites, the examples, and the
//! command-line front end.
//!
//! Every routine takes the generator by reference; callers derive one from a
//! 64-bit seed via [`rng`] so a fixed `(config, seed)` pair replays exactly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ein;
use crate::lag;
use crate::model::{Chart, GroupElem, ModelHandle, ModelKind, Point};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal deviate (Box-Muller).
pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u <= f64::MIN_POSITIVE {
            continue;
        }
        let v: f64 = rng.gen();
        return (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos();
    }
}

/// Uniform direction on the unit sphere of `R^dim`.
pub fn unit_vector<R: Rng>(dim: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| gaussian(rng));
        let norm = v.norm();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

/// Symmetric matrix with Gaussian entries of the given scale.
pub fn gaussian_sym<R: Rng>(r: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(r, r, |_, _| scale * gaussian(rng));
    lag::symmetrize(&a)
}

/// Orthogonal matrix from the QR factorization of a Gaussian matrix, with the
/// R-diagonal signs absorbed so the draw is rotation invariant.
pub fn random_orthogonal<R: Rng>(r: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(r, r, |_, _| gaussian(rng));
    let (mut q, rr) = a.qr().unpack();
    for j in 0..r {
        if rr[(j, j)] < 0.0 {
            for i in 0..r {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Chart vector with Gaussian coordinates of the given scale.
pub fn random_chart<R: Rng>(model: &ModelHandle, scale: f64, rng: &mut R) -> Chart {
    match model.kind() {
        ModelKind::Lag { r } => Chart::Sym(gaussian_sym(r, scale, rng)),
        ModelKind::Ein { n } => Chart::Mink(DVector::from_fn(n, |_, _| scale * gaussian(rng))),
    }
}

/// Interior cone vector with spectrum (Lag) or time margin (Ein) bounded away
/// from the cone boundary.
pub fn random_cone_interior<R: Rng>(model: &ModelHandle, rng: &mut R) -> Chart {
    match model.kind() {
        ModelKind::Lag { r } => {
            let q = random_orthogonal(r, rng);
            let d = DMatrix::from_diagonal(&DVector::from_fn(r, |_, _| rng.gen_range(0.2..2.0)));
            Chart::Sym(lag::symmetrize(&(&q * d * q.transpose())))
        }
        ModelKind::Ein { n } => {
            let t = rng.gen_range(0.5..2.0);
            let radius = t * rng.gen_range(0.0..0.85);
            let s = unit_vector(n - 1, rng);
            let mut v = DVector::zeros(n);
            for i in 0..n - 1 {
                v[i] = radius * s[i];
            }
            v[n - 1] = t;
            Chart::Mink(v)
        }
    }
}

/// Photon direction: a unit rank-one symmetric matrix (Lag) or a future
/// lightlike vector with time component `1/sqrt(2)` (Ein).
pub fn random_photon_direction<R: Rng>(model: &ModelHandle, rng: &mut R) -> Chart {
    match model.kind() {
        ModelKind::Lag { r } => {
            let u = unit_vector(r, rng);
            Chart::Sym(&u * u.transpose())
        }
        ModelKind::Ein { n } => {
            let s = unit_vector(n - 1, rng);
            let mut d = DVector::zeros(n);
            for i in 0..n - 1 {
                d[i] = s[i] / 2f64.sqrt();
            }
            d[n - 1] = 1.0 / 2f64.sqrt();
            Chart::Mink(d)
        }
    }
}

/// Causal pair `(p, q)` with `q - p` in the open cone.
pub fn random_causal_pair<R: Rng>(model: &ModelHandle, scale: f64, rng: &mut R) -> (Chart, Chart) {
    let p = random_chart(model, scale, rng);
    let c = random_cone_interior(model, rng).scale(scale.max(0.25));
    let q = p.add(&c).expect("same model");
    (p, q)
}

/// Boundary point: a chart point at the given scale most of the time, the
/// image of the point at infinity under a random group element otherwise.
pub fn random_point<R: Rng>(model: &ModelHandle, scale: f64, rng: &mut R) -> Point {
    if rng.gen::<f64>() < 0.85 {
        model
            .chart_to_point(&random_chart(model, scale, rng))
            .expect("chart point")
    } else {
        let g = random_group(model, rng);
        model.act(&g, &model.infinity_point()).expect("same model")
    }
}

/// Levi element: `levi(A)` for a well-conditioned invertible `A` (Lag) or a
/// boost composed with a spatial rotation (Ein). Fixes the chart base point.
pub fn random_levi<R: Rng>(model: &ModelHandle, rng: &mut R) -> GroupElem {
    match model.kind() {
        ModelKind::Lag { r } => {
            let q1 = random_orthogonal(r, rng);
            let q2 = random_orthogonal(r, rng);
            let d = DMatrix::from_diagonal(&DVector::from_fn(r, |_, _| rng.gen_range(0.5..2.0)));
            GroupElem::Sp(lag::SpElement::levi(&(q1 * d * q2)).expect("invertible"))
        }
        ModelKind::Ein { n } => {
            let Chart::Mink(u) = random_cone_interior(model, rng) else {
                unreachable!("Ein handle samples Mink charts")
            };
            let b = ein::boost(&u).expect("future timelike");
            let o = random_orthogonal(n - 1, rng);
            let mut rot = DMatrix::identity(n, n);
            for i in 0..n - 1 {
                for j in 0..n - 1 {
                    rot[(i, j)] = o[(i, j)];
                }
            }
            GroupElem::So(ein::SOElement::levi(&(b * rot)).expect("Lorentz"))
        }
    }
}

/// Order automorphism of the chart: a dilation, a translation, or a Levi
/// element, one of the three uniformly.
pub fn random_affine<R: Rng>(model: &ModelHandle, rng: &mut R) -> GroupElem {
    match rng.gen_range(0..3u8) {
        0 => model.dilation(rng.gen_range(0.3..3.0)).expect("positive"),
        1 => model
            .translation(&random_chart(model, 1.0, rng))
            .expect("chart"),
        _ => random_levi(model, rng),
    }
}

/// Big-cell product: upper translation, Levi, translation, dilation, with a
/// swap mixed in occasionally so images leave the chart now and then.
pub fn random_group<R: Rng>(model: &ModelHandle, rng: &mut R) -> GroupElem {
    let upper = match random_chart(model, 0.4, rng) {
        Chart::Sym(b) => GroupElem::Sp(lag::SpElement::upper_translation(&b).expect("symmetric")),
        Chart::Mink(v) => GroupElem::So(ein::SOElement::upper_translation(&v).expect("chart")),
    };
    let levi = random_levi(model, rng);
    let trans = model
        .translation(&random_chart(model, 0.6, rng))
        .expect("chart");
    let dil = model.dilation(rng.gen_range(0.4..2.5)).expect("positive");
    let mut g = upper
        .compose(&levi)
        .and_then(|g| g.compose(&trans))
        .and_then(|g| g.compose(&dil))
        .expect("same model");
    if rng.gen::<f64>() < 0.3 {
        let swap = match model.kind() {
            ModelKind::Lag { r } => GroupElem::Sp(lag::SpElement::swap(r)),
            ModelKind::Ein { n } => GroupElem::So(ein::SOElement::swap(n)),
        };
        g = g.compose(&swap).expect("same model");
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ConeClass;

    fn models() -> Vec<ModelHandle> {
        vec![
            ModelHandle::lag(2).unwrap(),
            ModelHandle::lag(3).unwrap(),
            ModelHandle::ein(3).unwrap(),
            ModelHandle::ein(5).unwrap(),
        ]
    }

    #[test]
    fn deterministic_under_seed() {
        for m in models() {
            let mut r1 = rng(17);
            let mut r2 = rng(17);
            for _ in 0..5 {
                let g1 = random_group(&m, &mut r1);
                let g2 = random_group(&m, &mut r2);
                let (a, b) = match (&g1, &g2) {
                    (GroupElem::Sp(x), GroupElem::Sp(y)) => (x.matrix().clone(), y.matrix().clone()),
                    (GroupElem::So(x), GroupElem::So(y)) => (x.matrix().clone(), y.matrix().clone()),
                    _ => panic!("mixed kinds from one handle"),
                };
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn unit_vectors_have_unit_norm() {
        let mut r = rng(3);
        for dim in 1..6 {
            let v = unit_vector(dim, &mut r);
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_matrices_are_orthogonal() {
        let mut r = rng(4);
        for n in 1..7 {
            let q = random_orthogonal(n, &mut r);
            let defect = (q.transpose() * &q - DMatrix::identity(n, n)).amax();
            assert!(defect < 1e-12, "defect {defect:.3e}");
        }
    }

    #[test]
    fn cone_samples_are_interior() {
        for m in models() {
            let mut r = rng(5);
            for _ in 0..50 {
                let c = random_cone_interior(&m, &mut r);
                assert_eq!(m.cone_member(&c).unwrap(), ConeClass::Interior);
            }
        }
    }

    #[test]
    fn photon_directions_lie_on_the_cone_boundary() {
        for m in models() {
            let mut r = rng(6);
            for _ in 0..50 {
                let d = random_photon_direction(&m, &mut r);
                assert_eq!(m.cone_member(&d).unwrap(), ConeClass::Boundary);
                match &d {
                    Chart::Sym(x) => {
                        let decomp = lag::rank_one_decompose(x);
                        assert_eq!(decomp.len(), 1, "photon direction must be rank one");
                        assert!((decomp[0].0 - 1.0).abs() < 1e-12);
                    }
                    Chart::Mink(v) => {
                        assert!(ein::psi(v).abs() < 1e-12);
                        assert!((v[v.len() - 1] - 1.0 / 2f64.sqrt()).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn causal_pairs_are_causal() {
        for m in models() {
            let mut r = rng(7);
            for _ in 0..30 {
                let (p, q) = random_causal_pair(&m, 1.0, &mut r);
                let w = q.sub(&p).unwrap();
                assert_eq!(m.cone_member(&w).unwrap(), ConeClass::Interior);
            }
        }
    }

    #[test]
    fn group_samples_have_small_defect_and_act() {
        for m in models() {
            let mut r = rng(8);
            for _ in 0..20 {
                let g = random_group(&m, &mut r);
                assert!(g.defect() < 1e-8, "defect {:.3e}", g.defect());
                // Group images of boundary points are boundary points; the
                // point constructors revalidate isotropy.
                let x = random_point(&m, 1.0, &mut r);
                let gx = m.act(&g, &x).unwrap();
                let back = m.act(&g.inverse(), &gx).unwrap();
                assert!(back.approx_eq(&x), "g^-1 g x must return x");
            }
        }
    }

    #[test]
    fn affine_elements_preserve_the_order() {
        for m in models() {
            let mut r = rng(9);
            for _ in 0..30 {
                let g = random_affine(&m, &mut r);
                let (p, q) = random_causal_pair(&m, 1.0, &mut r);
                let gp = m.act_chart(&g, &p).unwrap();
                let gq = m.act_chart(&g, &q).unwrap();
                let w = gq.sub(&gp).unwrap();
                assert_eq!(m.cone_member(&w).unwrap(), ConeClass::Interior);
            }
        }
    }
}
