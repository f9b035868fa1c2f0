use crate::error::{invalid, Result};

/// The λ weights of the joint objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight on the two reconstruction terms.
    pub lambda1: f64,
    /// Weight on the representation-matching term.
    pub lambda2: f64,
    /// Weight on the end-to-end term.
    pub lambda3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.01,
            lambda3: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(v.is_finite() && v >= 0.0) {
                return invalid(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        Ok(())
    }
}

/// The four loss terms of one batch. `j1`, `j2`, `j4` are per-token means and
/// `j3` is the batch mean of `½‖t − s‖²`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    pub j4: f64,
    pub j1_sum: f64,
    pub j2_sum: f64,
    pub j4_sum: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    pub j4: f64,
    pub j1_sum: f64,
    pub j2_sum: f64,
    pub j4_sum: f64,
    pub total: f64,
}

/// `total = λ1(J1 + J2) + λ2·J3 + λ3·J4`
pub fn total_loss(parts: &LossParts, w: &LossWeights) -> Result<LossBreakdown> {
    w.validate()?;
    Ok(LossBreakdown {
        j1: parts.j1,
        j2: parts.j2,
        j3: parts.j3,
        j4: parts.j4,
        j1_sum: parts.j1_sum,
        j2_sum: parts.j2_sum,
        j4_sum: parts.j4_sum,
        total: w.lambda1 * (parts.j1 + parts.j2) + w.lambda2 * parts.j3 + w.lambda3 * parts.j4,
    })
}

impl LossBreakdown {
    pub fn parts(&self) -> LossParts {
        LossParts {
            j1: self.j1,
            j2: self.j2,
            j3: self.j3,
            j4: self.j4,
            j1_sum: self.j1_sum,
            j2_sum: self.j2_sum,
            j4_sum: self.j4_sum,
        }
    }

    /// `j1=.. j2=.. j3=.. j4=.. total=..`
    pub fn log_fields(&self) -> String {
        format!(
            "j1={:.6} j2={:.6} j3={:.6} j4={:.6} total={:.6}",
            self.j1, self.j2, self.j3, self.j4, self.total
        )
    }
}

/// Pools losses over several batches: summed token losses are re-normalized
/// by the pooled token counts, `j3` is weighted by batch size.
#[derive(Debug, Clone, Default)]
pub struct LossAccumulator {
    j1_sum: f64,
    j2_sum: f64,
    j4_sum: f64,
    j1_tokens: usize,
    j2_tokens: usize,
    j4_tokens: usize,
    j3_weighted: f64,
    pairs: usize,
}

impl LossAccumulator {
    pub fn add(&mut self, b: &LossBreakdown, source_tokens: usize, target_tokens: usize, pairs: usize) {
        self.j1_sum += b.j1_sum;
        self.j2_sum += b.j2_sum;
        self.j4_sum += b.j4_sum;
        self.j1_tokens += source_tokens;
        self.j2_tokens += target_tokens;
        self.j4_tokens += target_tokens;
        self.j3_weighted += b.j3 * pairs as f64;
        self.pairs += pairs;
    }

    pub fn finish(&self, w: &LossWeights) -> Result<LossBreakdown> {
        let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        total_loss(
            &LossParts {
                j1: mean(self.j1_sum, self.j1_tokens),
                j2: mean(self.j2_sum, self.j2_tokens),
                j3: mean(self.j3_weighted, self.pairs),
                j4: mean(self.j4_sum, self.j4_tokens),
                j1_sum: self.j1_sum,
                j2_sum: self.j2_sum,
                j4_sum: self.j4_sum,
            },
            w,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts(j1: f64, j2: f64, j3: f64, j4: f64) -> LossParts {
        LossParts { j1, j2, j3, j4, ..Default::default() }
    }

    #[test]
    fn composition_cases() {
        let w = LossWeights::default();
        let b = total_loss(&parts(1.0, 2.0, 5.0, 3.0), &w).unwrap();
        assert!((b.total - 6.05).abs() < 1e-12);

        let w0 = LossWeights { lambda2: 0.0, ..w };
        let b = total_loss(&parts(1.0, 2.0, 5.0, 3.0), &w0).unwrap();
        assert_eq!(b.total, 6.0);

        let zero = LossWeights { lambda1: 0.0, lambda2: 0.0, lambda3: 0.0 };
        assert_eq!(total_loss(&parts(1.0, 2.0, 5.0, 3.0), &zero).unwrap().total, 0.0);

        let neg = LossWeights { lambda1: -1.0, ..w };
        assert!(total_loss(&parts(1.0, 2.0, 5.0, 3.0), &neg).is_err());
    }
}
