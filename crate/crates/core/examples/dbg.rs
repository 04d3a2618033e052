use trigap::density::{boundary_residual, pde_residual, Side};
use trigap::ModelParams;

fn main() {
    let p = ModelParams::from_lambdas(1.0 / 6.0, 5.0 / 6.0).unwrap();
    for side in [Side::One, Side::Two] {
        for c in [0.3, 0.7, 1.0, 1.8, 3.0] {
            for h in [1e-3, 3e-4, 1e-4, 3e-5] {
                let r = boundary_residual(side, c, &p, h).unwrap();
                print!("side {:?} c {:4} h {:6.0e}: {:+.3e}   ", side, c, h, r.value);
            }
            println!();
        }
    }
    for (u, v) in [(0.3, 0.3), (1.0, 1.0)] {
        let r = pde_residual(u, v, &p, 1e-4).unwrap();
        println!("interior ({u},{v}): {:+.3e}", r.value);
    }
}
