//! Rigidity in action: recover the endpoints of a causal diamond from
//! nothing but a membership oracle for an affine image of it, then watch
//! the same pipeline refuse a round ball.
//!
//! Run with `cargo run --example recover`.

use shilov::causal::{Diamond, Domain};
use shilov::model::{Chart, ModelHandle};
use shilov::rigidity::recover_diamond;
use shilov::sample;

fn main() {
    let lag = ModelHandle::lag(2).unwrap();

    // Hide a diamond behind a random affine map; the pipeline only ever
    // queries the image through its membership oracle.
    let base = Diamond::new(unit(&lag).scale(-1.0), unit(&lag)).unwrap();
    let mut rng = sample::rng(11);
    let g = sample::random_affine(&lag, &mut rng);
    let hidden = Domain::diamond_image(base, g.clone(), 11).unwrap();

    let report = recover_diamond(&hidden, 23).unwrap();
    println!("hidden affine image of a diamond");
    println!("  verdict        {}", report.verdict);
    println!("  pair causal    {}", report.pair_causal);
    println!("  recovered p    {:?}", report.p);
    println!("  recovered q    {:?}", report.q);
    println!(
        "  boundary residuals {:.2e} / {:.2e}",
        report.boundary_residuals.0, report.boundary_residuals.1
    );
    println!(
        "  dual margins   {:.3} / {:.3}, inclusion failures {:?}",
        report.dual_margins.0, report.dual_margins.1, report.inclusion_failures
    );

    // The true endpoints are the images of the originals under the hidden
    // map, so the recovery can be scored against them.
    let p_true = g.act_chart(&unit(&lag).scale(-1.0)).unwrap();
    let q_true = g.act_chart(&unit(&lag)).unwrap();
    let ep = report.p.sub(&p_true).unwrap().amax();
    let eq = report.q.sub(&q_true).unwrap().amax();
    println!("  endpoint errors {ep:.2e} / {eq:.2e}");

    // Negative control: a Euclidean ball passes the same oracle interface
    // but is not an order interval, and the verdict says so.
    let ball = Domain::ball(lag.chart_zero(), 0.8).unwrap();
    let control = recover_diamond(&ball, 23).unwrap();
    println!("\nball control");
    println!("  verdict        {}", control.verdict);
    println!(
        "  boundary residuals {:.2e} / {:.2e}",
        control.boundary_residuals.0, control.boundary_residuals.1
    );
}

// The symmetric identity matrix as a chart tangent: the standard causal
// direction for the Lagrangian model.
fn unit(model: &ModelHandle) -> Chart {
    let r = match model.kind() {
        shilov::model::ModelKind::Lag { r } => r,
        shilov::model::ModelKind::Ein { .. } => unreachable!(),
    };
    Chart::Sym(nalgebra::DMatrix::identity(r, r))
}
