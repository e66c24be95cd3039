//! Strongly extremal boundary points: descent certificates on a causal
//! diamond, pointwise certification, and the contrast with a round ball
//! whose boundary has none.
//!
//! Run with `cargo run --example extremal`.

use nalgebra::DVector;
use shilov::causal::Domain;
use shilov::model::{Chart, ModelHandle};
use shilov::rigidity::{is_r_extremal, is_strongly_extremal, strongly_extremal, ConeOrientation};

fn main() {
    let ein = ModelHandle::ein(4).unwrap();
    let p = Chart::Mink(DVector::from_vec(vec![0.1, -0.2, 0.05, -0.9]));
    let q = Chart::Mink(DVector::from_vec(vec![-0.05, 0.15, -0.1, 0.8]));
    let omega = Domain::diamond(p.clone(), q.clone()).unwrap();

    // Each orientation of the descent lands on the matching endpoint of
    // the diamond: Minus finds p, Plus finds q.
    for (orientation, target, name) in [
        (ConeOrientation::Minus, &p, "past endpoint"),
        (ConeOrientation::Plus, &q, "future endpoint"),
    ] {
        let report = strongly_extremal(&omega, orientation, 42).unwrap();
        let err = report.candidates[0].sub(target).unwrap().amax();
        println!(
            "{name}: {} candidate(s), endpoint error {err:.2e}, residual {:.2e}",
            report.candidates.len(),
            report.residuals[0]
        );
    }

    // Pointwise certificates agree: the endpoints are strongly extremal,
    // a generic face point is r-extremal but not strongly extremal.
    println!("\npointwise certificates on the diamond boundary");
    println!("  q strongly extremal: {}", is_strongly_extremal(&omega, &q, 40, 5));
    let mid = p.add(&q).unwrap().scale(0.5);
    let dir = shilov::photons::standard_direction(&ein);
    let face = omega.ray_boundary(&mid, &dir, 8.0).unwrap();
    println!("  face point strongly extremal: {}", is_strongly_extremal(&omega, &face, 40, 5));
    println!("  face point r-extremal: {}", is_r_extremal(&omega, &face, 60, 5).unwrap());

    // A Euclidean ball is causally convex but not an order interval; its
    // boundary carries no strongly extremal point, so the descent reports
    // a large interior residual instead of a sharp vertex.
    let ball = Domain::ball(ein.chart_zero(), 0.7).unwrap();
    let report = strongly_extremal(&ball, ConeOrientation::Plus, 42).unwrap();
    println!(
        "\nball control: {} candidate(s), best residual {:.2e} (no sharp vertex)",
        report.candidates.len(),
        report.residuals[0]
    );
    let pole = report.candidates[0].clone();
    println!("  pole strongly extremal: {}", is_strongly_extremal(&ball, &pole, 40, 5));
}
