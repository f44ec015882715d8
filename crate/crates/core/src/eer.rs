//! Equal error rate and EER grids over (utterances per side) x (minimum
//! phone instances).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::metrics::{MetricConfig, MetricKind};
use crate::stats::{expected_durations, ExpectedDurations};
use crate::trials::{score_trials, TrialSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
    pub n_same: usize,
    pub n_diff: usize,
}

/// EER of distance scores (same-speaker scores expected smaller).
///
/// At threshold `t` a different-speaker score `< t` is a false accept and a
/// same-speaker score `>= t` is a false reject. Thresholds run over the
/// distinct scores followed by `+inf`; the first operating point with
/// FAR >= FRR is joined to its predecessor by a straight line and the EER is
/// read where that line crosses FAR = FRR.
pub fn compute_eer(same: &[f64], diff: &[f64]) -> Result<EerResult> {
    if same.is_empty() || diff.is_empty() {
        return Err(Error::EmptyScores);
    }
    if same.iter().chain(diff).any(|s| s.is_nan()) {
        return Err(Error::NanScore);
    }
    let mut s = same.to_vec();
    let mut d = diff.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    d.sort_unstable_by(f64::total_cmp);
    let (ns, nd) = (s.len() as u128, d.len() as u128);

    // Counts of scores strictly below the current threshold.
    let (mut is, mut id) = (0usize, 0usize);
    let mut prev: Option<(usize, usize, f64)> = None;
    loop {
        let t = match (s.get(is), d.get(id)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => f64::INFINITY,
        };
        // FAR >= FRR  <=>  id/nd >= (ns-is)/ns
        if id as u128 * ns >= (ns - is as u128) * nd {
            let far = id as f64 / nd as f64;
            let frr = (ns as usize - is) as f64 / ns as f64;
            let (pis, pid, pt) = prev.expect("first threshold always has FAR < FRR");
            let pfar = pid as f64 / nd as f64;
            let pfrr = (ns as usize - pis) as f64 / ns as f64;
            let gap_before = pfrr - pfar;
            let gap_after = far - frr;
            let alpha = gap_before / (gap_before + gap_after);
            let eer = pfar + alpha * (far - pfar);
            let threshold = if gap_after == 0.0 {
                t
            } else if t.is_finite() {
                pt + alpha * (t - pt)
            } else {
                pt
            };
            return Ok(EerResult {
                eer,
                threshold,
                n_same: same.len(),
                n_diff: diff.len(),
            });
        }
        prev = Some((is, id, t));
        while is < s.len() && s[is] <= t {
            is += 1;
        }
        while id < d.len() && d[id] <= t {
            id += 1;
        }
    }
}

/// One cell of an [`EerGrid`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EerCell {
    pub m: usize,
    pub min_instances: u32,
    /// `None` when exclusions leave no same-speaker or no different-speaker score.
    pub result: Option<EerResult>,
    /// Trials dropped because a side profile was degenerate.
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EerGrid {
    pub metric: MetricConfig,
    pub rows: Vec<usize>,
    pub cols: Vec<u32>,
    /// Row-major cells, `rows.len() * cols.len()` of them.
    pub cells: Vec<EerCell>,
}

impl EerGrid {
    pub fn cell(&self, row: usize, col: usize) -> &EerCell {
        &self.cells[row * self.cols.len() + col]
    }

    pub fn eer(&self, m: usize, min_instances: u32) -> Option<f64> {
        let r = self.rows.iter().position(|&x| x == m)?;
        let c = self.cols.iter().position(|&x| x == min_instances)?;
        self.cell(r, c).result.map(|r| r.eer)
    }

    /// Percent EER with one decimal, rows = utterances per side, columns =
    /// minimum instances. Undefined cells are written as `NA`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "m")?;
        for c in &self.cols {
            write!(w, "\t{c}")?;
        }
        writeln!(w)?;
        for (r, m) in self.rows.iter().enumerate() {
            write!(w, "{m}")?;
            for c in 0..self.cols.len() {
                match self.cell(r, c).result {
                    Some(res) => write!(w, "\t{:.1}", 100.0 * res.eer)?,
                    None => write!(w, "\tNA")?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Parameters for [`build_grid`].
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub metric: MetricConfig,
    pub m_values: Vec<usize>,
    pub min_instance_values: Vec<u32>,
    pub k_per_speaker: usize,
    pub seed: u64,
}

/// Runs the full protocol for every (m, min_instances) cell. One trial set
/// per `m` is shared by all columns of that row. The rate metric needs
/// expected durations; they are estimated from `corpus` when not supplied.
pub fn build_grid(
    corpus: &Corpus,
    spec: &GridSpec,
    expected: Option<&ExpectedDurations>,
) -> Result<EerGrid> {
    let mut rows = spec.m_values.clone();
    rows.sort_unstable();
    rows.dedup();
    let mut cols = spec.min_instance_values.clone();
    cols.sort_unstable();
    cols.dedup();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::invalid("grid needs at least one row and one column"));
    }
    let own;
    let expected = match (spec.metric.kind, expected) {
        (MetricKind::Rate, None) => {
            own = expected_durations(corpus)?;
            Some(&own)
        }
        (_, e) => e,
    };

    let ctx = |m: usize, min_instances: u32| {
        move |e: Error| Error::GridCell {
            m,
            min_instances,
            source: Box::new(e),
        }
    };
    let sets: Vec<TrialSet> = rows
        .par_iter()
        .map(|&m| {
            TrialSet::generate(corpus, m, spec.k_per_speaker, spec.seed).map_err(ctx(m, cols[0]))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, u32)> = (0..rows.len())
        .flat_map(|r| cols.iter().map(move |&c| (r, c)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(r, min_instances)| {
            let m = rows[r];
            let metric = spec.metric.with_min_instances(min_instances);
            let report = score_trials(corpus, &sets[r].trials, &metric, expected)
                .map_err(ctx(m, min_instances))?;
            let (same, diff) = report.split();
            let result = if same.is_empty() || diff.is_empty() {
                None
            } else {
                Some(compute_eer(&same, &diff).map_err(ctx(m, min_instances))?)
            };
            Ok(EerCell {
                m,
                min_instances,
                result,
                excluded: report.excluded.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EerGrid {
        metric: spec.metric,
        rows,
        cols,
        cells,
    })
}
