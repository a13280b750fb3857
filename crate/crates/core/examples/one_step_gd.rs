//! The augmented model at `a3 b1 = η*` is one gradient step on the inner
//! regression loss, applied to the last state.

use icarl::ar_process::{encode, generate_sequence, sample_context, ContextSpec, Encoding};
use icarl::baselines::inner_gd;
use icarl::closed_form::eta_star;
use icarl::models::{augmented_forward, StructuredAugParams};
use icarl::Rng;

fn main() -> icarl::Result<()> {
    let (d, t_max) = (3, 10);
    let eta = eta_star(t_max, d)?;
    println!("eta*({t_max}, {d}) = {eta}");
    let model = StructuredAugParams::gd_step(eta);
    let mut rng = Rng::new(3);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let w = sample_context(&ContextSpec::UnitaryDiagonal { d }, &mut rng)?;
        let seq = generate_sequence(&w, t_max)?;
        let out = augmented_forward(&model, &encode(&seq, Encoding::Augmented))?;
        // the augmented tokens also expose the pair (s_0, s_1)
        let visible = seq.with_predecessor();
        let gd = inner_gd(&visible, 1, eta)?;
        worst = worst.max(out.max_abs_diff(&gd.predict(&visible)));
    }
    println!("max |transformer - one GD step| over 20 sequences: {worst:e}");
    for t in [2, 10, 50, 200] {
        println!(
            "T = {t:>3}: T * eta*(T, 1) = {:.4}",
            t as f64 * eta_star(t, 1)?
        );
    }
    Ok(())
}
