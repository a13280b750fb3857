//! Non-attention references: inner gradient descent, least squares and a
//! fixed linear RNN.

use icarl::ar_process::{
    generate_sequence, make_dataset, sample_context, ContextSpec, Encoding, Example,
};
use icarl::baselines::{
    inner_gd, inner_gd_loss, linear_rnn_forward, log_grid, lstsq_ar_fit, tune_inner_gd, StepRule,
};
use icarl::{CMatrix, Rng};

fn main() -> icarl::Result<()> {
    let mut rng = Rng::new(2);
    let w = sample_context(&ContextSpec::GeneralOrthogonal { d: 3 }, &mut rng)?;
    let seq = generate_sequence(&w, 8)?;
    let (_, mse) = lstsq_ar_fit(&seq)?;
    println!("least squares residual {mse:.2e}");
    let gd = inner_gd(&seq, 10, 0.1)?;
    println!(
        "inner GD losses: {:?}",
        gd.losses
            .iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
    );

    let data = make_dataset(
        &ContextSpec::GeneralOrthogonal { d: 3 },
        64,
        10,
        Encoding::Augmented,
        &Rng::new(5),
    )?;
    let ex: Vec<&Example> = data.examples.iter().collect();
    let grid = log_grid(1e-3, 1.0, 13);
    for l in 1..=3 {
        let (eta, fixed) = tune_inner_gd(&ex, l, &grid)?;
        let ls = inner_gd_loss(&ex, l, StepRule::LineSearch)?;
        println!("L = {l}: fixed step {eta:.3} -> {fixed:.3}, line search -> {ls:.3}");
    }

    let d = 3;
    let y = linear_rnn_forward(&CMatrix::zeros(d, d), &CMatrix::identity(d), &seq, 4)?;
    println!(
        "RNN with A = 0, B = I returns s_4: {:e}",
        y.max_abs_diff(&seq.states[3])
    );
    Ok(())
}
