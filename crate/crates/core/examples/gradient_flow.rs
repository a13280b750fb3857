//! Gradient flow on the scalar loss `(pab − 1)²` from a few admissible starts.

use icarl::training::gradient_flow_scalar;

fn main() -> icarl::Result<()> {
    for (a, b, p) in [(0.5, 0.5, 0.5), (2.0, 1.0, 0.9), (0.3, 1.7, 1.1)] {
        let r = gradient_flow_scalar(a, b, p, 1e-3, 1e-6, 1e3)?;
        println!(
            "({a}, {b}, {p}) -> ({:.4}, {:.4}, {:.4}) at t = {:.2}; a²-b² drift {:.1e}",
            r.a,
            r.b,
            r.p,
            r.time,
            ((r.a * r.a - r.b * r.b) - (a * a - b * b)).abs()
        );
    }
    match gradient_flow_scalar(2.0, 2.0, 2.0, 1e-3, 1e-6, 1e3) {
        Err(e) => println!("(2, 2, 2): {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
