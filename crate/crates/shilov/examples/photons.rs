//! Photons: the rank-one chart lines, conjugate points, the singleton
//! intersection with an incidence set, splitness of intersection
//! polynomials, and the fractional-linear unipotent action.
//!
//! Run with `cargo run --example photons`.

use nalgebra::DVector;
use shilov::causal::Domain;
use shilov::model::{Chart, ModelHandle};
use shilov::photons::{
    affine_fit, intersect_z, mobius_law_residual, photon_through, splitness_suite, Photon,
    ZIntersection,
};

fn main() {
    let ein = ModelHandle::ein(3).unwrap();

    // Two chart points are conjugate exactly when their difference is a
    // photon direction; the photon through them is then unique.
    let x = ein.chart_zero();
    let y = Chart::Mink(DVector::from_vec(vec![0.25, 0.0, 0.25]));
    let photon = photon_through(&x, &y).unwrap();
    println!("photon through x, y");
    println!("  base {:?}", ein.flatten(photon.base()).as_slice());
    println!("  dir  {:?}", ein.flatten(photon.dir()).as_slice());
    println!("  y at parameter {:.6}", photon.param_of(&y).unwrap());

    // Against a reference point xi off the photon, the pairing along the
    // line is affine and vanishes exactly once.
    let xi = ein
        .chart_to_point(&Chart::Mink(DVector::from_vec(vec![0.9, 0.4, 0.1])))
        .unwrap();
    let (c0, c1, curvature) = affine_fit(&photon, &xi).unwrap();
    println!("\npairing along the line: {c0:.6} + {c1:.6} t, curvature {curvature:.2e}");
    match intersect_z(&photon, &xi).unwrap() {
        ZIntersection::At(s) if !s.is_infinity() => {
            println!("  meets the incidence set at t = {:.6}", s.value())
        }
        ZIntersection::At(_) => println!("  meets the incidence set at infinity"),
        ZIntersection::OnPhoton => println!("  xi lies on the photon"),
    }

    // The photon's trace in a diamond is an interval; its endpoints are
    // where the Hilbert-type kernel blows up.
    let omega = Domain::diamond(
        Chart::Mink(DVector::from_vec(vec![0.0, 0.0, -1.0])),
        Chart::Mink(DVector::from_vec(vec![0.0, 0.0, 1.0])),
    )
    .unwrap();
    let (a, b, _) = shilov::photons::interval_in_domain(&omega, &x, &y).unwrap();
    println!("\ntrace interval in the standard diamond: ({:.6}, {:.6})", a.value(), b.value());

    // Intersection polynomials split into linear factors, for both
    // representation powers.
    let report = splitness_suite(&ein, 400, &[1, 2], 1e-7, 3).unwrap();
    println!(
        "\nsplitness: {} trials, {} failures, spread {:.2e}",
        report.trials, report.failures, report.max_residual
    );

    // An opposite-unipotent element moves the standard photon by a
    // fractional-linear map t -> t / (1 + lambda t).
    let standard = Photon::standard(&ein);
    println!("\nstandard photon dir {:?}", ein.flatten(standard.dir()).as_slice());
    let y_dual = Chart::Mink(DVector::from_vec(vec![0.2, -0.4, 0.3]));
    let (residual, lambda) = mobius_law_residual(&ein, &y_dual).unwrap();
    println!("mobius law: lambda {lambda:.6}, residual {residual:.2e}");
}
