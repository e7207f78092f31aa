//! Proximal map and conjugate of a max of two quadratics.

use dirdyk::{ConvexFunction, Matrix, MaxOfQuadratics, Vector};

fn main() {
    let a = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let f = ConvexFunction::MaxTwoQuadratics(
        MaxOfQuadratics::new(
            a,
            Vector::from_vec(vec![1.0, 0.0]),
            0.0,
            Vector::from_vec(vec![0.0, 1.0]),
            0.0,
        )
        .expect("valid pieces"),
    );

    for t in [[3.0, -1.0], [0.5, 0.5], [-2.0, 4.0]] {
        let t = Vector::from_vec(t.to_vec());
        let (x, z) = f.prox(1.5, &t).expect("prox");
        let fy = f.fenchel_young_gap(&x, &z).expect("gap");
        println!(
            "t = {:?}: x = [{:.6}, {:.6}], z = [{:.6}, {:.6}], f*(z) = {:.6}, Fenchel-Young gap {fy:.1e}",
            t.as_slice(),
            x[0],
            x[1],
            z[0],
            z[1],
            f.conjugate(&z).expect("conjugate")
        );
    }
}
