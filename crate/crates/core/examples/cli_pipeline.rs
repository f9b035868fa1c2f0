//! The train / generate / evaluate commands end to end in a scratch
//! directory, driven through the library entry points the binary uses.
//!
//! cargo run --release --example cli_pipeline

use std::fs;

use aem::cli::{cmd_evaluate, cmd_generate, cmd_train, RunConfig};
use aem::data::toy;

fn main() -> aem::Result<()> {
    let dir = std::env::temp_dir().join(format!("aem-pipeline-{}", std::process::id()));
    fs::create_dir_all(&dir)?;
    let all = toy::dialogues(420, 11);
    fs::write(dir.join("train.tsv"), toy::to_tsv(&all[..360]))?;
    fs::write(dir.join("valid.tsv"), toy::to_tsv(&all[360..400]))?;
    let test = &all[400..];
    let sources: Vec<String> = test.iter().map(|p| p.source.join(" ")).collect();
    let targets: Vec<String> = test.iter().map(|p| p.target.join(" ")).collect();
    fs::write(dir.join("test.src"), sources.join("\n") + "\n")?;
    fs::write(dir.join("test.ref"), targets.join("\n") + "\n")?;
    fs::write(
        dir.join("run.cfg"),
        "model = aem\ntrain_file = train.tsv\nvalid_file = valid.tsv\nout_dir = out\n\
         hidden_size = 24\nembed_size = 12\nbatch_size = 8\nmax_epochs = 8\n",
    )?;

    let cfg = RunConfig::load(&dir.join("run.cfg"))?;
    let summary = cmd_train(&cfg, false)?;
    for e in &summary.epochs {
        println!("{}", e.metrics_line());
    }
    let n = cmd_generate(&summary.best, &dir.join("test.src"), &dir.join("test.hyp"))?;
    println!("generated {n} responses");
    let report = cmd_evaluate(&dir.join("test.hyp"), &dir.join("test.ref"), None, None)?;
    println!("{}", report.table());
    fs::remove_dir_all(&dir)?;
    Ok(())
}
