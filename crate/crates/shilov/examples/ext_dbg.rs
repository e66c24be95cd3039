use nalgebra::DVector;
use shilov::causal::Domain;
use shilov::model::{Chart, ModelHandle};
use shilov::rigidity::{strongly_extremal, ConeOrientation};

fn main() {
    let _ein = ModelHandle::ein(4).unwrap();
    let p = Chart::Mink(DVector::from_vec(vec![0.1, -0.2, 0.05, -0.9]));
    let q = Chart::Mink(DVector::from_vec(vec![-0.05, 0.15, -0.1, 0.8]));
    let omega = Domain::diamond(p.clone(), q.clone()).unwrap();
    match strongly_extremal(&omega, ConeOrientation::Plus, 42) {
        Ok(rep) => {
            for (c, r) in rep.candidates.iter().zip(&rep.residuals) {
                let err = c.sub(&q).unwrap().amax();
                println!("candidate err {err:.3e} residual {r:.3e}");
            }
        }
        Err(e) => println!("ERR {e:?}"),
    }
}
