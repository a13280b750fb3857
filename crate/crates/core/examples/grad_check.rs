//! Compare analytic gradients with central differences for one draw of each
//! model family.

use icarl::harness::{draw_check, inject_sign_flip, Family};
use icarl::Rng;

fn main() -> icarl::Result<()> {
    for (i, family) in Family::ALL.iter().enumerate() {
        let gc = draw_check(*family, &Rng::new(i as u64), 1e-6)?;
        let broken = inject_sign_flip(&gc);
        println!(
            "{:>15}: {:>3} params, rel error {:.1e} (with a flipped sign: {:.1e})",
            family.name(),
            gc.analytic.len(),
            gc.rel_error,
            broken.rel_error
        );
    }
    Ok(())
}
