//! Finite-difference check of the full training objective for every model
//! kind on a tiny random model.
//!
//! cargo run --release --example gradcheck

use aem::data::{Batch, DialoguePair};
use aem::model::{LossWeights, Model, ModelKind, ModelSpec};
use aem::nn::gradcheck::check_gradients;

fn main() -> aem::Result<()> {
    let a = DialoguePair::new(vec![4, 5, 6], vec![5, 4, 6])?;
    let b = DialoguePair::new(vec![6, 3], vec![4, 6])?;
    let batch = Batch::from_pairs(&[&a, &b], 50)?;
    let w = LossWeights {
        lambda1: 0.7,
        lambda2: 0.3,
        lambda3: 1.1,
    };
    for kind in ModelKind::ALL {
        let model = Model::<f64>::initialized(ModelSpec::new(kind, 7, 3, 4), 0.5, 11)?;
        let spec = *model.spec();
        let mut store = model.params.clone();
        // detach off: the checked gradient is the true derivative of the total
        let r = check_gradients(&mut store, 1e-5, |g, p| {
            let m = Model::from_params(spec, p.clone())?;
            Ok(m.forward(g, &batch, &w, false)?.total)
        })?;
        println!(
            "{kind:<18} {:>4} scalars  max rel error {:.2e}  ({}[{}])",
            r.checked, r.max_rel_error, r.worst_param, r.worst_index
        );
    }
    Ok(())
}
