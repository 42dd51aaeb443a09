//! Minimum set cover over a boolean feasibility matrix
//! (`rows = candidates`, `columns = initial points`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest column count handled by the exact solver.
pub const MAX_EXACT_COLUMNS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CoverResult {
    Feasible { size: usize, chosen: Vec<usize> },
    /// `column` is the first initial point no candidate handles.
    Infeasible { column: usize },
}

impl CoverResult {
    /// Cover size, `None` meaning infinite.
    pub fn size(&self) -> Option<usize> {
        match self {
            CoverResult::Feasible { size, .. } => Some(*size),
            CoverResult::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.size().is_some()
    }
}

fn columns(feas: &[Vec<bool>]) -> Result<usize> {
    let cols = feas.first().map_or(0, Vec::len);
    if feas.iter().any(|r| r.len() != cols) {
        return Err(Error::Argument("ragged feasibility matrix".into()));
    }
    Ok(cols)
}

fn first_uncoverable(feas: &[Vec<bool>], cols: usize) -> Option<usize> {
    (0..cols).find(|&c| !feas.iter().any(|row| row[c]))
}

/// Greedy cover: repeatedly take the row covering the most uncovered
/// columns, lowest index on ties. Returned indices are sorted.
pub fn greedy_cover(feas: &[Vec<bool>]) -> Result<CoverResult> {
    let cols = columns(feas)?;
    if let Some(column) = first_uncoverable(feas, cols) {
        return Ok(CoverResult::Infeasible { column });
    }
    let mut covered = vec![false; cols];
    let mut remaining = cols;
    let mut chosen = Vec::new();
    while remaining > 0 {
        let (best, gain) = feas
            .iter()
            .enumerate()
            .map(|(j, row)| (j, (0..cols).filter(|&c| row[c] && !covered[c]).count()))
            .fold((0, 0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        debug_assert!(gain > 0);
        for c in 0..cols {
            if feas[best][c] {
                covered[c] = true;
            }
        }
        remaining -= gain;
        chosen.push(best);
    }
    chosen.sort_unstable();
    Ok(CoverResult::Feasible { size: chosen.len(), chosen })
}

struct Search {
    masks: Vec<u64>,
    suffix: Vec<u64>,
    /// Largest single-row popcount among rows `j..`.
    suffix_best: Vec<u32>,
}

impl Search {
    /// Depth-first search over increasing row indices for a cover using
    /// exactly `left` more rows; the first hit is lexicographically least.
    fn find(&self, start: usize, uncovered: u64, left: usize, picked: &mut Vec<usize>) -> bool {
        if uncovered == 0 {
            return true;
        }
        if left == 0 || start >= self.masks.len() {
            return false;
        }
        if uncovered & !self.suffix[start] != 0 {
            return false;
        }
        if uncovered.count_ones() > left as u32 * self.suffix_best[start] {
            return false;
        }
        for j in start..self.masks.len() {
            if uncovered & !self.suffix[j] != 0 {
                return false;
            }
            if self.masks[j] & uncovered == 0 {
                continue;
            }
            picked.push(j);
            if self.find(j + 1, uncovered & !self.masks[j], left - 1, picked) {
                return true;
            }
            picked.pop();
        }
        false
    }
}

/// Exact minimum cover by iterative deepening under the greedy size, with
/// pruning on reachable columns and a per-row coverage bound. Among optimal
/// covers the lexicographically smallest index set is returned.
pub fn exact_cover(feas: &[Vec<bool>]) -> Result<CoverResult> {
    let cols = columns(feas)?;
    if cols > MAX_EXACT_COLUMNS {
        return Err(Error::InstanceTooLarge { candidates: feas.len(), points: cols });
    }
    let greedy = greedy_cover(feas)?;
    let CoverResult::Feasible { size: upper, chosen: greedy_set } = greedy else {
        return Ok(greedy);
    };
    if cols == 0 {
        return Ok(CoverResult::Feasible { size: 0, chosen: vec![] });
    }
    let masks: Vec<u64> = feas
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, b)| **b).fold(0u64, |m, (c, _)| m | (1 << c)))
        .collect();
    let rows = masks.len();
    let mut suffix = vec![0u64; rows + 1];
    let mut suffix_best = vec![0u32; rows + 1];
    for j in (0..rows).rev() {
        suffix[j] = suffix[j + 1] | masks[j];
        suffix_best[j] = suffix_best[j + 1].max(masks[j].count_ones());
    }
    let search = Search { masks, suffix, suffix_best };
    let all = if cols == 64 { u64::MAX } else { (1u64 << cols) - 1 };
    for k in 1..=upper {
        let mut picked = Vec::with_capacity(k);
        if search.find(0, all, k, &mut picked) {
            return Ok(CoverResult::Feasible { size: picked.len(), chosen: picked });
        }
    }
    // The greedy set is a valid cover of size `upper`, so the loop returns.
    Ok(CoverResult::Feasible { size: upper, chosen: greedy_set })
}

/// Minimum cover by enumerating every row subset. Exponential; meant as a
/// cross-check for small matrices.
pub fn brute_force_cover(feas: &[Vec<bool>]) -> Result<CoverResult> {
    let cols = columns(feas)?;
    if feas.len() > 20 {
        return Err(Error::InstanceTooLarge { candidates: feas.len(), points: cols });
    }
    if let Some(column) = first_uncoverable(feas, cols) {
        return Ok(CoverResult::Infeasible { column });
    }
    let mut best: Option<Vec<usize>> = None;
    for subset in 0u32..(1 << feas.len()) {
        let rows: Vec<usize> = (0..feas.len()).filter(|j| subset >> j & 1 == 1).collect();
        if !(0..cols).all(|c| rows.iter().any(|&j| feas[j][c])) {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => rows.len() < b.len() || (rows.len() == b.len() && rows < *b),
        };
        if better {
            best = Some(rows);
        }
    }
    let chosen = best.unwrap_or_default();
    Ok(CoverResult::Feasible { size: chosen.len(), chosen })
}
