use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use crate::error::{invalid, Error, Result};

pub const MIN_SCORE: u8 = 1;
pub const MAX_SCORE: u8 = 10;

/// Geometric mean of fluency and coherence.
pub fn g_score(fluency: f64, coherence: f64) -> Result<f64> {
    if !(fluency > 0.0 && coherence > 0.0) || !fluency.is_finite() || !coherence.is_finite() {
        return invalid(format!(
            "g_score needs positive finite inputs, got ({fluency}, {coherence})"
        ));
    }
    Ok((fluency * coherence).sqrt())
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return invalid(format!("pearson: lengths {} and {}", xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return invalid("pearson needs at least two observations");
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return invalid("pearson is undefined for a zero-variance series");
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Cell {
    pub fluency: Option<u8>,
    pub coherence: Option<u8>,
}

/// Human ratings indexed by (item, annotator). Absent or empty cells are
/// missing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HumanEvalTable {
    cells: BTreeMap<(String, String), Cell>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumanSummary {
    pub mean_fluency: f64,
    pub mean_coherence: f64,
    pub g_score: f64,
    /// Mean pairwise Pearson between annotators, averaged over the two
    /// criteria. `None` when no annotator pair has enough overlap.
    pub agreement: Option<f64>,
    pub items: usize,
    pub annotators: usize,
}

fn parse_score(raw: &str, what: &str, line: usize, origin: &Path) -> Result<Option<u8>> {
    let raw = raw.trim();
    if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: u8 = raw.parse().map_err(|_| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg: format!("{what} {raw:?} is not an integer"),
    })?;
    if !(MIN_SCORE..=MAX_SCORE).contains(&v) {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg: format!("{what} {v} outside {MIN_SCORE}..={MAX_SCORE}"),
        });
    }
    Ok(Some(v))
}

impl HumanEvalTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, item: &str, annotator: &str, cell: Cell) -> Result<()> {
        for v in [cell.fluency, cell.coherence].into_iter().flatten() {
            if !(MIN_SCORE..=MAX_SCORE).contains(&v) {
                return invalid(format!("score {v} outside {MIN_SCORE}..={MAX_SCORE}"));
            }
        }
        let key = (item.to_string(), annotator.to_string());
        if self.cells.insert(key, cell).is_some() {
            return invalid(format!("duplicate rating for item {item}, annotator {annotator}"));
        }
        Ok(())
    }

    /// Reads `item_id,annotator_id,fluency,coherence` rows after a header.
    pub fn from_reader<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
        let expected = ["item_id", "annotator_id", "fluency", "coherence"];
        if header != expected {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: 1,
                msg: format!("expected header {}", expected.join(",")),
            });
        }
        let mut table = Self::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let cell = Cell {
                fluency: parse_score(&rec[2], "fluency", line, origin)?,
                coherence: parse_score(&rec[3], "coherence", line, origin)?,
            };
            table.insert(&rec[0], &rec[1], cell).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line,
                msg: e.to_string(),
            })?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_reader(f, path)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn items(&self) -> BTreeSet<&str> {
        self.cells.keys().map(|(i, _)| i.as_str()).collect()
    }

    pub fn annotators(&self) -> BTreeSet<&str> {
        self.cells.keys().map(|(_, a)| a.as_str()).collect()
    }

    fn mean_of(&self, pick: impl Fn(&Cell) -> Option<u8>) -> Option<f64> {
        let v: Vec<f64> = self.cells.values().filter_map(&pick).map(f64::from).collect();
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    }

    /// Mean pairwise Pearson for one criterion. Each pair uses the items both
    /// annotators scored; pairs with fewer than two shared items or zero
    /// variance are skipped.
    pub fn agreement_for(&self, pick: impl Fn(&Cell) -> Option<u8>) -> Option<f64> {
        let mut per: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
        for ((item, ann), cell) in &self.cells {
            if let Some(v) = pick(cell) {
                per.entry(ann).or_default().insert(item, f64::from(v));
            }
        }
        let anns: Vec<_> = per.keys().copied().collect();
        let mut rs = Vec::new();
        for (i, a) in anns.iter().enumerate() {
            for b in &anns[i + 1..] {
                let (sa, sb) = (&per[a], &per[b]);
                let (xs, ys): (Vec<f64>, Vec<f64>) = sa
                    .iter()
                    .filter_map(|(item, &x)| sb.get(item).map(|&y| (x, y)))
                    .unzip();
                if let Ok(r) = pearson(&xs, &ys) {
                    rs.push(r);
                }
            }
        }
        if rs.is_empty() {
            None
        } else {
            Some(rs.iter().sum::<f64>() / rs.len() as f64)
        }
    }

    pub fn summary(&self) -> Result<HumanSummary> {
        let (Some(f), Some(c)) = (self.mean_of(|c| c.fluency), self.mean_of(|c| c.coherence))
        else {
            return invalid("human score table has no fluency or coherence ratings");
        };
        let agreement = match (
            self.agreement_for(|c| c.fluency),
            self.agreement_for(|c| c.coherence),
        ) {
            (Some(a), Some(b)) => Some((a + b) / 2.0),
            (a, b) => a.or(b),
        };
        Ok(HumanSummary {
            mean_fluency: f,
            mean_coherence: c,
            g_score: g_score(f, c)?,
            agreement,
            items: self.items().len(),
            annotators: self.annotators().len(),
        })
    }
}
