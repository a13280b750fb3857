//! Spectrum of the positional-encoding Hessian: narrow arcs (large μ)
//! collapse it onto one direction.

use icarl::closed_form::pe_hessian;
use icarl::numerics::sym_eig;
use icarl::training::{diagonal_invariance, early_stopped_pe_fit, off_target_mass};
use icarl::Rng;

fn main() -> icarl::Result<()> {
    let t = 10;
    for mu in [4.0, 50.0, 100.0, 300.0] {
        let mut ev = sym_eig(&pe_hessian(t, mu)?)?.values;
        ev.sort_by(|a, b| b.total_cmp(a));
        let top: Vec<String> = ev.iter().take(4).map(|x| format!("{x:.4}")).collect();
        println!("mu = {mu:>5}: top eigenvalues {}", top.join(" "));
    }
    for mu in [50.0, 300.0] {
        let f = early_stopped_pe_fit(20, mu, 1024, 1e-3, &Rng::new(0))?;
        println!(
            "mu = {mu}: {} GD iterations, off-target mass {:.3}, diagonal invariance {:.3}",
            f.iterations,
            off_target_mass(&f.params),
            diagonal_invariance(&f.params, 10)
        );
    }
    Ok(())
}
