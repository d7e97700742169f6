//! Diverse top-k selection.
//!
//! The plain top-k set of a sharply peaked attribution map tends to be
//! one tight clump, so top-k agreement between two maps degenerates
//! into comparing a single blob position. The diverse variant forces
//! spatial spread: pixels are taken greedily in descending score order,
//! and every pick blocks its `(2*w_div+1) x (2*w_div+1)` window, so any
//! two selected pixels end up more than `w_div` apart in Chebyshev
//! distance.
//!
//! The greedy selection is the *definition* of the diverse top-k set
//! used by the ``*_div`` metrics; it does not in general maximise total
//! score over all separated k-sets (the separated sets do not form a
//! matroid — a high pixel can block two slightly lower neighbours whose
//! sum beats it), and it can dead-end before reaching `k` even when a
//! separated k-set exists. Dead ends surface as
//! [`CoreError::DiversityShortfall`].

use crate::error::{CoreError, Result};
use crate::map::{window_bounds, AttributionMap, PixelCoord, PixelSet};
use crate::metrics::{neighborhood_union, ranking};

/// Outcome of [`diverse_top_k`]: picked pixels in selection order
/// (descending score) plus their score sum.
#[derive(Debug, Clone, PartialEq)]
pub struct DiverseSelection {
    coords: Vec<PixelCoord>,
    total_score: f64,
}

impl DiverseSelection {
    /// Pixels in the order the greedy loop took them.
    pub fn coords(&self) -> &[PixelCoord] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn total_score(&self) -> f64 {
        self.total_score
    }

    pub fn to_set(&self) -> PixelSet {
        self.coords.iter().copied().collect()
    }
}

/// Greedy diverse top-k: repeatedly take the highest-scoring unblocked
/// pixel (row-major on ties) and block its `w_div` window. Errors with
/// [`CoreError::DiversityShortfall`] if the grid is exhausted first.
pub fn diverse_top_k(map: &AttributionMap, k: usize, w_div: usize) -> Result<DiverseSelection> {
    if k == 0 || k > map.len() {
        return Err(CoreError::InvalidK { k, max: map.len() });
    }
    let (height, width) = (map.height(), map.width());
    let mut blocked = vec![false; map.len()];
    let mut coords = Vec::with_capacity(k);
    let mut total_score = 0.0;
    for idx in ranking(map) {
        if coords.len() == k {
            break;
        }
        if blocked[idx] {
            continue;
        }
        let c = PixelCoord::new(idx / width, idx % width);
        coords.push(c);
        total_score += map.values()[idx];
        let (rows, cols) = window_bounds(c, w_div, height, width);
        for r in rows {
            for col in cols.clone() {
                blocked[r * width + col] = true;
            }
        }
    }
    if coords.len() < k {
        return Err(CoreError::DiversityShortfall { requested: k, achievable: coords.len() });
    }
    Ok(DiverseSelection { coords, total_score })
}

/// Plain intersection fraction of the two diverse top-k sets.
pub fn topk_div_intersection(
    a: &AttributionMap,
    b: &AttributionMap,
    k: usize,
    w_div: usize,
) -> Result<f64> {
    a.check_same_dims(b)?;
    let s = diverse_top_k(a, k, w_div)?.to_set();
    let t = diverse_top_k(b, k, w_div)?.to_set();
    Ok(s.intersection_size(&t) as f64 / k as f64)
}

/// Window-tolerant precision on diverse top-k sets: fraction of `a`'s
/// diverse picks inside the `w` window union of `b`'s.
pub fn lens_prec_at_k_div(
    a: &AttributionMap,
    b: &AttributionMap,
    k: usize,
    w: usize,
    w_div: usize,
) -> Result<f64> {
    a.check_same_dims(b)?;
    let s = diverse_top_k(a, k, w_div)?.to_set();
    let t = diverse_top_k(b, k, w_div)?.to_set();
    let near_t = neighborhood_union(&t, w, a.height(), a.width());
    let hits = s.iter().filter(|c| near_t.contains(*c)).count();
    Ok(hits as f64 / k as f64)
}

/// Window-tolerant recall on diverse top-k sets.
pub fn lens_recall_at_k_div(
    a: &AttributionMap,
    b: &AttributionMap,
    k: usize,
    w: usize,
    w_div: usize,
) -> Result<f64> {
    lens_prec_at_k_div(b, a, k, w, w_div)
}
