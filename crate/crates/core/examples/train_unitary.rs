//! Train the diagonal multi-head model on commuting unitary contexts and
//! compare with the closed-form optimum.

use icarl::ar_process::{make_dataset, ContextSpec, Encoding};
use icarl::closed_form::{check_optimum, OptimumFamily, OptimumParams};
use icarl::models::DiagHeadParams;
use icarl::training::{fit, TrainConfig};
use icarl::Rng;

fn main() -> icarl::Result<()> {
    let (d, heads, t_max) = (3, 3, 8);
    let data = make_dataset(
        &ContextSpec::UnitaryDiagonal { d },
        128,
        t_max,
        Encoding::Plain,
        &Rng::new(0),
    )?;
    let mut model = DiagHeadParams::random(heads, d, t_max, 0.3, &mut Rng::new(1));
    let trace = fit(&mut model, &data, None, &TrainConfig::adam(1e-2, 1500))?;
    println!(
        "loss {:.3e} -> {:.3e} in {} epochs",
        trace.train_loss[0],
        trace.final_train_loss,
        trace.epochs_run()
    );
    let r = check_optimum(OptimumParams::Diag(&model), OptimumFamily::Unitary)?;
    for (k, v) in &r.residuals {
        println!("{k:>12}: {v:.2e}");
    }
    let c = model.coupling();
    println!("C = BᵀA (rows):");
    for i in 0..d {
        println!(
            "  {:?}",
            c.row(i)
                .iter()
                .map(|x| format!("{x:+.3}"))
                .collect::<Vec<_>>()
        );
    }
    Ok(())
}
