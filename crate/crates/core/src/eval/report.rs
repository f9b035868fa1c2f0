use std::fmt::Write as _;

use super::bleu::{corpus_bleu, BleuReport};
use super::diversity::{diversity, DiversityReport};
use super::human::{HumanEvalTable, HumanSummary};
use crate::error::{invalid, Result};

/// Automatic metrics for one system, plus human ratings when available.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub bleu: BleuReport,
    pub diversity: DiversityReport,
    pub human: Option<HumanSummary>,
    pub pairs: usize,
}

/// Scores `hypotheses` against line-aligned `references`.
pub fn eval_report<H: AsRef<str>, R: AsRef<str>>(
    hypotheses: &[H],
    references: &[R],
    human: Option<&HumanEvalTable>,
) -> Result<EvalReport> {
    if hypotheses.len() != references.len() {
        return invalid(format!(
            "{} hypotheses for {} references (line counts must match)",
            hypotheses.len(),
            references.len()
        ));
    }
    let hyp: Vec<Vec<&str>> = hypotheses.iter().map(|s| s.as_ref().split_whitespace().collect()).collect();
    let rf: Vec<Vec<&str>> = references.iter().map(|s| s.as_ref().split_whitespace().collect()).collect();
    let bleu = corpus_bleu(&hyp, &rf, 4)?;
    let diversity = diversity(&hyp);
    let human = human.map(HumanEvalTable::summary).transpose()?;
    Ok(EvalReport {
        bleu,
        diversity,
        human,
        pairs: hyp.len(),
    })
}

impl EvalReport {
    /// `key=value` lines, one metric per line.
    pub fn machine_lines(&self) -> Vec<String> {
        let mut out = vec![format!("pairs={}", self.pairs)];
        for n in 1..=4 {
            out.push(format!("bleu{n}={:.4}", self.bleu.bleu(n)));
        }
        for n in 1..=4 {
            out.push(format!("p{n}={:.6}", self.bleu.precisions[n - 1]));
        }
        out.push(format!("bp={:.6}", self.bleu.brevity_penalty));
        out.push(format!("hyp_len={}", self.bleu.hyp_len));
        out.push(format!("ref_len={}", self.bleu.ref_len));
        out.push(format!("dist1={}", self.diversity.dist1));
        out.push(format!("dist2={}", self.diversity.dist2));
        out.push(format!("dist3={}", self.diversity.dist3));
        if let Some(h) = &self.human {
            out.push(format!("fluency={:.4}", h.mean_fluency));
            out.push(format!("coherence={:.4}", h.mean_coherence));
            out.push(format!("g_score={:.4}", h.g_score));
            match h.agreement {
                Some(a) => out.push(format!("agreement={a:.4}")),
                None => out.push("agreement=na".into()),
            }
        }
        out
    }

    pub fn table(&self) -> String {
        let b = &self.bleu;
        let d = &self.diversity;
        let mut s = String::new();
        let _ = writeln!(s, "{:<12}{:>10}{:>10}{:>10}{:>10}", "", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4");
        let _ = writeln!(
            s,
            "{:<12}{:>10.2}{:>10.2}{:>10.2}{:>10.2}",
            "score",
            b.bleu(1),
            b.bleu(2),
            b.bleu(3),
            b.bleu(4)
        );
        let _ = writeln!(s, "brevity penalty {:.4} (hyp {} / ref {} tokens, {} pairs)", b.brevity_penalty, b.hyp_len, b.ref_len, self.pairs);
        let _ = writeln!(s, "{:<12}{:>10}{:>10}{:>10}", "", "Dist-1", "Dist-2", "Dist-3");
        let _ = writeln!(s, "{:<12}{:>10}{:>10}{:>10}", "count", d.dist1, d.dist2, d.dist3);
        if let Some(h) = &self.human {
            let _ = writeln!(s, "{:<12}{:>10}{:>10}{:>10}", "", "Fluency", "Coherence", "G-Score");
            let _ = writeln!(s, "{:<12}{:>10.2}{:>10.2}{:>10.2}", "human", h.mean_fluency, h.mean_coherence, h.g_score);
            if let Some(a) = h.agreement {
                let _ = writeln!(s, "agreement (mean pairwise Pearson) {a:.2}");
            }
        }
        s
    }
}
