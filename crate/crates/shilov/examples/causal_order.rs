//! The invariant causal structure: cone classes, the partial order on a
//! chart, diamonds as order intervals, and the sampled order-axiom report.
//!
//! Run with `cargo run --example causal_order`.

use nalgebra::{DMatrix, DVector};
use shilov::causal::{self, Diamond, Domain};
use shilov::model::{Chart, ModelHandle};
use shilov::sample;

fn main() {
    let ein = ModelHandle::ein(3).unwrap();

    // Cone classes in the Minkowski chart are the usual lightcone ones.
    println!("cone classes, ein n=3");
    for (name, v) in [
        ("timelike    ", vec![0.1, 0.0, 1.0]),
        ("lightlike   ", vec![0.6, 0.8, 1.0]),
        ("spacelike   ", vec![1.0, 0.0, 0.3]),
    ] {
        let class = causal::cone_class(&Chart::Mink(DVector::from_vec(v)));
        println!("  {name} -> {class:?}");
    }

    // In the symmetric chart the cone is the positive definite one, and the
    // order is the Loewner order.
    let lag = ModelHandle::lag(2).unwrap();
    let a = Chart::Sym(DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.1]));
    let b = Chart::Sym(DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.8]));
    println!(
        "\nlag r=2: relation(a, b) = {:?}",
        causal::causal_relation(&a, &b).unwrap()
    );

    // A diamond is the open order interval between two strictly causal
    // points; its midpoint lies inside, the endpoints do not.
    let d = Diamond::new(a.clone(), b.clone()).unwrap();
    println!("diamond contains midpoint  = {}", d.contains(&d.midpoint()));
    println!("diamond contains endpoint  = {}", d.contains(&a));

    // Domains serialize to JSON and come back unchanged.
    let omega = Domain::Diamond(d);
    let json = omega.to_json_value();
    let back = Domain::from_json_value(&lag, &json).unwrap();
    println!("domain JSON round trip     = {}", back.contains(&omega.anchor()));
    println!("  {json}");

    // Sampled order axioms: transitivity, antisymmetry, and the mirror
    // property of the reversed cone.
    let report = causal::order_axioms_check(&ein, 500, 1);
    println!(
        "\norder axioms: {} trials, {} failures",
        report.trials,
        report.transitivity_failures + report.antisymmetry_failures + report.mirror_failures
    );

    // Group images of causal pairs stay causal: the order is invariant.
    let mut rng = sample::rng(7);
    let (p, q) = sample::random_causal_pair(&ein, 0.6, &mut rng);
    let g = sample::random_affine(&ein, &mut rng);
    let gp = g.act_chart(&p).unwrap();
    let gq = g.act_chart(&q).unwrap();
    println!(
        "invariance: {:?} -> {:?}",
        causal::causal_relation(&p, &q).unwrap(),
        causal::causal_relation(&gp, &gq).unwrap()
    );
}
