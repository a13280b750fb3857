//! Save a model to the JSON checkpoint format and load it back.

use icarl::models::{Checkpoint, DiagHeadParams, Parametrized};
use icarl::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = DiagHeadParams::random(2, 3, 5, 1.0, &mut Rng::new(9));
    let dir = std::env::temp_dir().join("icarl-checkpoint-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("diag.json");
    Checkpoint::from_params(&model).save(&path)?;

    let mut restored = DiagHeadParams::zeros(2, 3, 5);
    Checkpoint::load(&path)?.load_into(&mut restored)?;
    assert_eq!(restored, model);
    for g in model.layout() {
        println!("{:>2}: shape {:?}", g.name, g.shape);
    }
    println!(
        "{} parameters round-tripped through {}",
        model.num_params(),
        path.display()
    );
    Ok(())
}
