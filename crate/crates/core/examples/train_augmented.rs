//! Train the structured augmented model on exact population averages and
//! watch `a3 b1` approach the optimal step `η*`.

use icarl::ar_process::{grid_dataset, ContextSpec, Encoding};
use icarl::closed_form::{check_optimum, eta_star, OptimumFamily, OptimumParams};
use icarl::models::StructuredAugParams;
use icarl::training::{fit, TrainConfig};
use icarl::Rng;

fn main() -> icarl::Result<()> {
    let (d, t_max) = (2, 6);
    let data = grid_dataset(
        &ContextSpec::UnitaryDiagonal { d },
        8,
        t_max,
        Encoding::Augmented,
    )?;
    let mut model = StructuredAugParams::random(&mut Rng::new(4), 0.1);
    let trace = fit(&mut model, &data, None, &TrainConfig::adam(5e-3, 800))?;
    println!("population loss {:.5}", trace.final_train_loss);
    println!(
        "a3*b1 = {:.6}, eta* = {:.6}",
        model.a3 * model.b1,
        eta_star(t_max, d)?
    );
    let r = check_optimum(
        OptimumParams::Structured {
            params: &model,
            t_max,
            d,
        },
        OptimumFamily::Augmented,
    )?;
    for (k, v) in &r.residuals {
        println!("{k:>12}: {v:.2e}");
    }
    Ok(())
}
