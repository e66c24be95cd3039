//! The two matrix models side by side: symmetric charts for the Lagrangian
//! Grassmannian, Minkowski charts for the Einstein universe. Pairings,
//! transversality, the point at infinity, and a few group actions.
//!
//! Run with `cargo run --example two_models`.

use nalgebra::{DMatrix, DVector};
use shilov::model::{Chart, ModelHandle};

fn main() {
    let lag = ModelHandle::lag(2).unwrap();
    let ein = ModelHandle::ein(3).unwrap();

    // The pairing of two chart points is det(S - X) in the symmetric model
    // and a Minkowski square in the Einstein one. Nonzero means transverse.
    let x = lag.chart_to_point(&lag.chart_zero()).unwrap();
    let s = lag
        .chart_to_point(&Chart::Sym(DMatrix::identity(2, 2)))
        .unwrap();
    println!("lag r=2 pairing(0, I)      = {}", lag.pairing(&x, &s).unwrap());

    let u = ein.chart_to_point(&ein.chart_zero()).unwrap();
    let v = ein
        .chart_to_point(&Chart::Mink(DVector::from_vec(vec![0.3, 0.0, 0.8])))
        .unwrap();
    println!("ein n=3 pairing(0, v)      = {}", ein.pairing(&u, &v).unwrap());

    // Chart translations fix infinity; the swap exchanges zero and infinity.
    let inf = lag.infinity_point();
    println!(
        "lag pairing(0, infinity)   = {}",
        lag.pairing(&x, &inf).unwrap()
    );
    let shift = lag
        .translation(&Chart::Sym(DMatrix::from_row_slice(2, 2, &[
            0.4, 0.1, 0.1, -0.2,
        ])))
        .unwrap();
    let moved = lag.act(&shift, &inf).unwrap();
    println!("translation fixes infinity = {}", moved.approx_eq(&inf));

    // A dilation acts on charts by scaling; its inverse undoes it.
    let g = ein.dilation(2.5).unwrap();
    let w = Chart::Mink(DVector::from_vec(vec![0.1, -0.2, 0.4]));
    let gw = g.act_chart(&w).unwrap();
    let back = g.inverse().act_chart(&gw).unwrap();
    println!("dilation round trip        = {}", back.approx_eq(&w, 1e-12));

    // Compositions act right to left.
    let t = ein
        .translation(&Chart::Mink(DVector::from_vec(vec![0.0, 0.3, 0.0])))
        .unwrap();
    let tg = t.compose(&g).unwrap();
    let one = tg.act_chart(&w).unwrap();
    let two = t.act_chart(&g.act_chart(&w).unwrap()).unwrap();
    println!("composition agrees         = {}", one.approx_eq(&two, 1e-12));

    // Points that leave the chart under a group element are still points:
    // the swap sends the zero chart to infinity.
    let swap_zero = match &lag.kind() {
        shilov::model::ModelKind::Lag { .. } => {
            let sw = shilov::model::GroupElem::Sp(shilov::lag::SpElement::swap(2));
            lag.act(&sw, &x).unwrap()
        }
        _ => unreachable!(),
    };
    println!("swap(0) is a chart point   = {}", swap_zero.is_chart());
}
