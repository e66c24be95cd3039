//! Cross ratios on the projective line and the Hilbert distance they induce.
//!
//! Run with `cargo run --example cross_ratio`.

use shilov::projline::{cross_ratio, hilbert_dist, ProjInterval, ProjPoint};

fn main() {
    // Normalization: ([1:0] : [1:1] : [1:t] : [0:1]) = t.
    println!("cross-ratio normalization");
    let a = ProjPoint::finite(0.0);
    let x = ProjPoint::finite(1.0);
    let b = ProjPoint::infinity();
    for t in [-2.0, -1.0, 0.5, 2.0, 3.0] {
        let y = ProjPoint::finite(t);
        let cr = cross_ratio(&a, &x, &y, &b).unwrap();
        println!("  t = {t:5.1}  ratio = {cr:5.1}");
    }

    // Invariance under a projective map, here z -> (2z + 1) / (z - 3).
    let g = [[2.0, 1.0], [1.0, -3.0]];
    let pts = [
        ProjPoint::finite(-0.7),
        ProjPoint::finite(0.4),
        ProjPoint::finite(1.9),
        ProjPoint::finite(5.2),
    ];
    let before = cross_ratio(&pts[0], &pts[1], &pts[2], &pts[3]).unwrap();
    let imgs: Vec<ProjPoint> = pts.iter().map(|p| p.act(&g).unwrap()).collect();
    let after = cross_ratio(&imgs[0], &imgs[1], &imgs[2], &imgs[3]).unwrap();
    println!("\nprojective invariance");
    println!("  before {before:.15}");
    println!("  after  {after:.15}");

    // The Hilbert distance of the interval (-1, 1): d(0, s) = log((1+s)/(1-s)),
    // twice the inverse hyperbolic tangent.
    let iv = ProjInterval::arc(
        ProjPoint::finite(-1.0),
        ProjPoint::finite(1.0),
        ProjPoint::finite(0.0),
    )
    .unwrap();
    println!("\nHilbert distance on (-1, 1) from the center");
    for s in [0.25, 0.5, 0.75, 0.9] {
        let d = hilbert_dist(&iv, &ProjPoint::finite(0.0), &ProjPoint::finite(s)).unwrap();
        let exact = 2.0 * s.atanh();
        println!("  s = {s:4.2}  d = {d:.12}  (2 atanh s = {exact:.12})");
    }
}
