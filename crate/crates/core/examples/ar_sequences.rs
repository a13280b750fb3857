//! Sample contexts from each ensemble, roll out sequences and encode them.

use icarl::ar_process::{
    encode, generate_sequence, make_dataset, sample_context, ContextSpec, Encoding,
};
use icarl::Rng;

fn main() -> icarl::Result<()> {
    let mut rng = Rng::new(7);
    let specs = [
        ContextSpec::UnitaryDiagonal { d: 3 },
        ContextSpec::OrthogonalConjugate { delta: 2 },
        ContextSpec::GeneralOrthogonal { d: 3 },
        ContextSpec::RestrictedArc { mu: 50.0 },
    ];
    for spec in &specs {
        let w = sample_context(spec, &mut rng)?;
        let seq = generate_sequence(&w, 6)?;
        let norms: Vec<String> = seq
            .states
            .iter()
            .map(|s| format!("{:.3}", s.norm()))
            .collect();
        println!("{spec:?}: |s_t| = {}", norms.join(" "));
    }

    let w = sample_context(&ContextSpec::GeneralOrthogonal { d: 2 }, &mut rng)?;
    let seq = generate_sequence(&w, 4)?;
    for enc in [Encoding::Plain, Encoding::Augmented, Encoding::Duplicated] {
        let tokens = encode(&seq, enc);
        println!(
            "{:>10}: token dim {}, e_2 = {:?}",
            enc.name(),
            tokens.token_dim,
            tokens.tokens[1].re()
        );
    }

    let data = make_dataset(
        &ContextSpec::UnitaryDiagonal { d: 2 },
        4,
        5,
        Encoding::Plain,
        &Rng::new(1),
    )?;
    println!(
        "dataset of {} sequences, T_max = {}",
        data.len(),
        data.t_max()
    );
    Ok(())
}
