use std::sync::Arc;

use crate::ambient::{least_orbit_member, CopyHandle, OrbitType, VertexPredicate};
use crate::error::{Error, Result};
use crate::finset::{FinSet, Vertex};
use crate::labeling::{level_size, Labeling, WitnessEntry, MAX_DEPTH};

/// Default cap on witness placements per color class.
pub const DEFAULT_BACKTRACK_BUDGET: usize = 10_000;

/// A copy found inside one color class.
#[derive(Debug, Clone)]
pub struct GreedyOutcome {
    pub color: usize,
    pub copy: CopyHandle,
    /// Witness placements spent across all classes tried.
    pub placements: usize,
}

/// Tries the color classes in ascending order and labels the first one that
/// admits a labeling to `depth`, backtracking over witness choices.
///
/// Best effort: a class fails once it uses up `backtrack_budget` placements.
pub fn monochromatic_copy_greedy(
    c: &CopyHandle,
    coloring: Arc<dyn Fn(Vertex) -> usize + Send + Sync>,
    colors: usize,
    depth: usize,
    search_bound: usize,
    backtrack_budget: usize,
) -> Result<GreedyOutcome> {
    if colors == 0 {
        return Err(Error::precondition("at least one color is required"));
    }
    if depth > MAX_DEPTH {
        return Err(Error::precondition(format!(
            "depth {depth} exceeds the cap {MAX_DEPTH}"
        )));
    }
    let mut placements = 0;
    for color in 0..colors {
        let paint = coloring.clone();
        let class = CopyHandle::filtered(
            c,
            VertexPredicate::custom(format!("color={color}"), move |v| paint(v) == color),
        );
        let mut spent = 0;
        let found = label_with_backtracking(&class, depth, search_bound, backtrack_budget, &mut spent);
        placements += spent;
        if let Some(lab) = found {
            return Ok(GreedyOutcome {
                color,
                copy: CopyHandle::labeled(Arc::new(lab)),
                placements,
            });
        }
    }
    Err(Error::exhausted(
        format!("no color class admits a depth-{depth} labeling"),
        backtrack_budget,
    ))
}

fn label_with_backtracking(
    class: &CopyHandle,
    depth: usize,
    search_bound: usize,
    budget: usize,
    spent: &mut usize,
) -> Option<Labeling> {
    let sizes: Vec<usize> = (0..=depth).map(|n| level_size(n).unwrap() as usize).collect();
    let schedule: Vec<(usize, u64)> = sizes
        .iter()
        .enumerate()
        .flat_map(|(n, &m)| (0..m as u64).map(move |mask| (n, mask)))
        .collect();
    let level_start: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &m| {
            let s = *acc;
            *acc += m;
            Some(s)
        })
        .collect();

    let mut placed: Vec<Vertex> = Vec::with_capacity(schedule.len());
    let mut from = Vertex(0);
    while placed.len() < schedule.len() {
        let (n, mask) = schedule[placed.len()];
        let prefix: FinSet = placed[..level_start[n]].iter().copied().collect();
        let k = prefix.subset_from_mask(mask);
        let orbit = OrbitType::new(prefix, k.clone()).expect("subset of the prefix");
        match least_orbit_member(&orbit, from, class, search_bound) {
            Ok(v) => {
                if *spent >= budget {
                    return None;
                }
                *spent += 1;
                placed.push(v);
                from = Vertex(0);
            }
            Err(_) => {
                if n == 0 {
                    return None;
                }
                let order = &placed[..level_start[n]];
                let blocked = |j: usize| {
                    let h: FinSet = order[..j].iter().copied().collect();
                    let kk = h.intersection(&k);
                    let o = OrbitType::new(h, kk).expect("subset");
                    least_orbit_member(&o, Vertex(0), class, search_bound).is_err()
                };
                if from > Vertex(0) || !blocked(order.len()) {
                    let v = placed.pop()?;
                    from = Vertex(v.0 + 1);
                } else {
                    // Jump back to the earliest placement whose prefix already
                    // leaves the orbit empty.
                    let (mut lo, mut hi) = (0, order.len());
                    while lo < hi {
                        let mid = (lo + hi) / 2;
                        if blocked(mid) {
                            hi = mid;
                        } else {
                            lo = mid + 1;
                        }
                    }
                    if lo == 0 {
                        return None;
                    }
                    placed.truncate(lo);
                    let v = placed.pop()?;
                    from = Vertex(v.0 + 1);
                }
            }
        }
    }

    let mut levels = Vec::new();
    let mut witness = Vec::new();
    let mut prefix = FinSet::new();
    for (n, &start) in level_start.iter().enumerate() {
        let row = &placed[start..start + sizes[n]];
        for (mask, &q) in row.iter().enumerate() {
            witness.push(WitnessEntry {
                n,
                k: prefix.subset_from_mask(mask as u64),
                q,
            });
        }
        let level: FinSet = row.iter().copied().collect();
        prefix = prefix.union(&level);
        levels.push(level);
    }
    Labeling::from_parts(class.clone(), 0, 0, levels, &witness, search_bound).ok()
}
