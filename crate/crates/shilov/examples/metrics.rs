//! Invariant metrics on a causal diamond: the one-chain kernel on
//! conjugate pairs, the Caratheodory-type lower bound, and the
//! Kobayashi-type bracket with its witness chain.
//!
//! Run with `cargo run --example metrics`.

use nalgebra::DVector;
use shilov::causal::Domain;
use shilov::metrics::{caratheodory, k_one_chain, kobayashi, Budget, DualSet};
use shilov::model::{Chart, ModelHandle};

fn main() {
    let ein = ModelHandle::ein(3).unwrap();
    let omega = Domain::diamond(
        Chart::Mink(DVector::from_vec(vec![0.0, 0.0, -1.0])),
        Chart::Mink(DVector::from_vec(vec![0.0, 0.0, 1.0])),
    )
    .unwrap();
    let dual = DualSet::for_domain(&ein, &omega, 160, 7).unwrap();

    // A conjugate pair whose trace interval has cross ratio 3: the kernel,
    // the lower bound, and both ends of the bracket all equal ln 3.
    let x = ein.chart_zero();
    let y = Chart::Mink(DVector::from_vec(vec![0.25, 0.0, 0.25]));
    let k = k_one_chain(&omega, &x, &y).unwrap();
    let c = caratheodory(&omega, &dual, &x, &y, 1).unwrap();
    let bracket = kobayashi(&omega, &dual, &x, &y, 1, &Budget::default(), 0, None).unwrap();
    println!("conjugate pair, cross ratio 3");
    println!("  one-chain kernel  {k:.15}");
    println!("  lower bound       {c:.15}");
    println!("  bracket           [{:.15}, {:.15}]", bracket.lower, bracket.upper);
    println!("  reference ln 3    {:.15}", 3.0_f64.ln());

    // A non-conjugate pair needs a genuine chain. The bracket stays valid:
    // lower <= upper, and the chain stays inside the diamond.
    let p = Chart::Mink(DVector::from_vec(vec![0.3, 0.1, -0.2]));
    let q = Chart::Mink(DVector::from_vec(vec![-0.2, 0.25, 0.35]));
    let b2 = kobayashi(&omega, &dual, &p, &q, 1, &Budget::default(), 0, None).unwrap();
    println!("\nnon-conjugate pair");
    println!("  lower {:.6}", b2.lower);
    println!("  upper {:.6}  ({} links)", b2.upper, b2.chain.links());
    assert!(b2.lower <= b2.upper + 1e-12);

    // Feeding the previous chain back as a warm start can only keep or
    // improve the upper end.
    let b3 = kobayashi(&omega, &dual, &p, &q, 1, &Budget::default(), 0, Some(&b2.chain)).unwrap();
    println!("  warm restart upper {:.6}", b3.upper);
    assert!(b3.upper <= b2.upper + 1e-12);

    // The metrics scale linearly in the representation power.
    let c2 = caratheodory(&omega, &dual, &x, &y, 2).unwrap();
    println!("\npower 2 lower bound {:.15} (twice the power 1 value)", c2);
}
