//! Corpus BLEU, distinct-n and human-rating summaries on hand-written data.
//!
//! cargo run --example evaluate_metrics

use std::path::Path;

use aem::eval::{eval_report, g_score, HumanEvalTable};

const RATINGS: &str = "item_id,annotator_id,fluency,coherence
1,ann_a,8,5
1,ann_b,7,4
2,ann_a,6,3
2,ann_b,6,na
3,ann_a,9,6
3,ann_b,8,6
";

fn main() -> aem::Result<()> {
    let hyps = ["i am fine , thanks .", "see you on friday .", "i like it ."];
    let refs = ["i am fine , thank you .", "see you on monday then .", "i do not know ."];
    let table = HumanEvalTable::from_reader(RATINGS.as_bytes(), Path::new("ratings.csv"))?;
    let report = eval_report(&hyps, &refs, Some(&table))?;
    println!("{}", report.table());
    for line in report.machine_lines() {
        println!("{line}");
    }
    println!("\ng-score of (6.97, 3.51) = {:.4}", g_score(6.97, 3.51)?);
    Ok(())
}
