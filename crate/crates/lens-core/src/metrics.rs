//! Locality-sensitive top-k agreement metrics.
//!
//! Plain top-k intersection counts a pixel as preserved only when it
//! stays in the other map's top-k set at exactly the same position.
//! The window-tolerant variants instead ask whether it lands within the
//! `(2w+1) x (2w+1)` neighborhood of *some* pixel of the other top-k
//! set:
//!
//! * precision misses: `|S \ N_w(T)| / k`, where `S`, `T` are the two
//!   top-k sets and `N_w` the union of windows around a set,
//! * recall misses: `|T \ N_w(S)| / k`,
//! * [`lens_distance`] is the sum of the two miss rates (range 0..=2),
//!   while [`lens_prec_at_k`]/[`lens_recall_at_k`] report the
//!   complementary hit rates.
//!
//! Growing `w` can only turn misses into hits, so the distance is
//! monotonically non-increasing in `w`, and at `w = 0` everything
//! collapses to plain top-k agreement. [`combined_distance`] averages
//! the distance over a [`WeightSchedule`] of `(k, w)` pairs; it is
//! bounded above by [`upper_bound_u`], a weighted symmetric-difference
//! sum which is itself a bona-fide metric on attribution maps (up to
//! top-k equivalence). Rank-correlation counterparts smooth both maps
//! with a window mean filter before comparing ([`lens_spearman`],
//! [`lens_kendall`]).
//!
//! Every score is computed as one integer counter divided by a single
//! `f64` division, so comparisons guaranteed on the integer level (for
//! example monotonicity in `w`) hold exactly in floating point too.

use crate::error::{CoreError, Result};
use crate::map::{window_bounds, AttributionMap, PixelCoord, PixelSet};

/// Pixels of `map` ordered by descending value; ties broken by
/// row-major position.
pub(crate) fn ranking(map: &AttributionMap) -> Vec<usize> {
    let vals = map.values();
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_unstable_by(|&i, &j| {
        vals[j].partial_cmp(&vals[i]).expect("finite by construction").then(i.cmp(&j))
    });
    idx
}

fn check_k(k: usize, len: usize) -> Result<()> {
    if k == 0 || k > len {
        return Err(CoreError::InvalidK { k, max: len });
    }
    Ok(())
}

/// The `k` highest-valued pixels of `map` (ties resolved row-major).
pub fn top_k_set(map: &AttributionMap, k: usize) -> Result<PixelSet> {
    check_k(k, map.len())?;
    let width = map.width();
    Ok(ranking(map)[..k]
        .iter()
        .map(|&i| PixelCoord::new(i / width, i % width))
        .collect())
}

/// Union of the clipped `(2w+1) x (2w+1)` windows around every pixel
/// of `set`, inside a `height x width` grid.
pub fn neighborhood_union(set: &PixelSet, w: usize, height: usize, width: usize) -> PixelSet {
    let mut out = PixelSet::new();
    for c in set.iter() {
        let (rows, cols) = window_bounds(c, w, height, width);
        for r in rows {
            for col in cols.clone() {
                out.insert(PixelCoord::new(r, col));
            }
        }
    }
    out
}

/// Fraction of shared pixels between the two top-k sets.
pub fn topk_intersection(a: &AttributionMap, b: &AttributionMap, k: usize) -> Result<f64> {
    a.check_same_dims(b)?;
    let s = top_k_set(a, k)?;
    let t = top_k_set(b, k)?;
    Ok(s.intersection_size(&t) as f64 / k as f64)
}

/// Fraction of `a`'s top-k pixels that land inside the window union of
/// `b`'s top-k set. Equals [`topk_intersection`] at `w = 0`.
pub fn lens_prec_at_k(a: &AttributionMap, b: &AttributionMap, k: usize, w: usize) -> Result<f64> {
    a.check_same_dims(b)?;
    let s = top_k_set(a, k)?;
    let t = top_k_set(b, k)?;
    let near_t = neighborhood_union(&t, w, a.height(), a.width());
    let hits = s.iter().filter(|c| near_t.contains(*c)).count();
    Ok(hits as f64 / k as f64)
}

/// Fraction of `b`'s top-k pixels that land inside the window union of
/// `a`'s top-k set.
pub fn lens_recall_at_k(a: &AttributionMap, b: &AttributionMap, k: usize, w: usize) -> Result<f64> {
    lens_prec_at_k(b, a, k, w)
}

/// Window-tolerant top-k distance: precision misses plus recall
/// misses, in `[0, 2]`. Non-increasing in `w`; at most the symmetric
/// difference `|S Δ T| / k`.
pub fn lens_distance(a: &AttributionMap, b: &AttributionMap, k: usize, w: usize) -> Result<f64> {
    a.check_same_dims(b)?;
    let s = top_k_set(a, k)?;
    let t = top_k_set(b, k)?;
    let near_t = neighborhood_union(&t, w, a.height(), a.width());
    let near_s = neighborhood_union(&s, w, a.height(), a.width());
    let miss_s = s.iter().filter(|c| !near_t.contains(*c)).count();
    let miss_t = t.iter().filter(|c| !near_s.contains(*c)).count();
    Ok((miss_s + miss_t) as f64 / k as f64)
}

/// Non-negative weights over `k = 1..=k_max` and `w = 0..=w_max` used
/// by [`combined_distance`] and [`upper_bound_u`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    alpha: Vec<f64>, // alpha[k-1] weights rank depth k
    beta: Vec<f64>,  // beta[w] weights window radius w
    tail: f64,
}

impl WeightSchedule {
    /// Geometric family `alpha_k = 2^-k`, `beta_w = 2^-(w+1)`,
    /// truncated at `k_max`/`w_max`. Both infinite sums equal 1, and
    /// dropping the tails costs at most [`Self::truncation_bound`]
    /// (each dropped term is a distance bounded by 2):
    /// `2 * 2^-k_max + 2 * 2^-(w_max+1)`.
    pub fn geometric(k_max: usize, w_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(CoreError::InvalidK { k: 0, max: usize::MAX });
        }
        let alpha: Vec<f64> = (1..=k_max).map(|k| 2f64.powi(-(k as i32))).collect();
        let beta: Vec<f64> = (0..=w_max).map(|w| 2f64.powi(-(w as i32) - 1)).collect();
        let tail = 2.0 * 2f64.powi(-(k_max as i32)) + 2.0 * 2f64.powi(-(w_max as i32) - 1);
        Ok(WeightSchedule { alpha, beta, tail })
    }

    /// Custom weights; `alpha[i]` applies to `k = i + 1`, `beta[i]` to
    /// `w = i`. No truncation tail (the schedule is taken as complete).
    pub fn from_weights(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || beta.is_empty() {
            return Err(CoreError::Model("weight schedule must be non-empty".into()));
        }
        let ok = |v: &f64| v.is_finite() && *v >= 0.0;
        if !alpha.iter().all(ok) || !beta.iter().all(ok) {
            return Err(CoreError::NonFinite { what: "schedule weight (non-negative)" });
        }
        Ok(WeightSchedule { alpha, beta, tail: 0.0 })
    }

    pub fn k_max(&self) -> usize {
        self.alpha.len()
    }

    pub fn w_max(&self) -> usize {
        self.beta.len() - 1
    }

    /// Weight of rank depth `k` (1-based).
    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha[k - 1]
    }

    /// Weight of window radius `w`.
    pub fn beta(&self, w: usize) -> f64 {
        self.beta[w]
    }

    /// Upper bound on the mass lost to truncating the weight family,
    /// zero for [`Self::from_weights`] schedules.
    pub fn truncation_bound(&self) -> f64 {
        self.tail
    }
}

impl Default for WeightSchedule {
    fn default() -> Self {
        WeightSchedule::geometric(64, 8).expect("valid default schedule")
    }
}

/// Incremental sweep over rank depths shared by [`combined_distance`]
/// and [`upper_bound_u`]: one pixel per map joins the top sets at each
/// step, and per-window cover counters keep every miss tally current
/// in `O((2w+1)^2)` per step.
struct PairSweep {
    height: usize,
    width: usize,
    rank_s: Vec<usize>,
    rank_t: Vec<usize>,
    in_s: Vec<bool>,
    in_t: Vec<bool>,
    intersection: usize,
    windows: Vec<WindowState>,
}

struct WindowState {
    w: usize,
    cover_s: Vec<u32>, // cells covered by windows around S-pixels
    cover_t: Vec<u32>,
    miss_s: usize, // |S \ N_w(T)|
    miss_t: usize, // |T \ N_w(S)|
}

impl PairSweep {
    fn new(a: &AttributionMap, b: &AttributionMap, windows: &[usize]) -> Self {
        let n = a.len();
        PairSweep {
            height: a.height(),
            width: a.width(),
            rank_s: ranking(a),
            rank_t: ranking(b),
            in_s: vec![false; n],
            in_t: vec![false; n],
            intersection: 0,
            windows: windows
                .iter()
                .map(|&w| WindowState {
                    w,
                    cover_s: vec![0; n],
                    cover_t: vec![0; n],
                    miss_s: 0,
                    miss_t: 0,
                })
                .collect(),
        }
    }

    /// Grows both top sets from size `k-1` to `k` (`k` is 1-based).
    fn advance(&mut self, k: usize) {
        let s = self.rank_s[k - 1];
        let t = self.rank_t[k - 1];

        if self.in_t[s] {
            self.intersection += 1;
        }
        self.in_s[s] = true;
        for ws in &mut self.windows {
            ws.enter_s(s, &self.in_t, self.height, self.width);
        }

        if self.in_s[t] {
            self.intersection += 1;
        }
        self.in_t[t] = true;
        for ws in &mut self.windows {
            ws.enter_t(t, &self.in_s, self.height, self.width);
        }
    }

    /// `|S_k Δ T_k|` after `advance` has run up to `k`.
    fn symdiff(&self, k: usize) -> usize {
        2 * (k - self.intersection)
    }
}

impl WindowState {
    fn enter_s(&mut self, pixel: usize, in_t: &[bool], height: usize, width: usize) {
        if self.cover_t[pixel] == 0 {
            self.miss_s += 1; // joins S outside the current N_w(T)
        }
        let c = PixelCoord::new(pixel / width, pixel % width);
        let (rows, cols) = window_bounds(c, self.w, height, width);
        for r in rows {
            for col in cols.clone() {
                let q = r * width + col;
                self.cover_s[q] += 1;
                if self.cover_s[q] == 1 && in_t[q] {
                    self.miss_t -= 1; // q was a T-pixel N_w(S) now reaches
                }
            }
        }
    }

    fn enter_t(&mut self, pixel: usize, in_s: &[bool], height: usize, width: usize) {
        if self.cover_s[pixel] == 0 {
            self.miss_t += 1;
        }
        let c = PixelCoord::new(pixel / width, pixel % width);
        let (rows, cols) = window_bounds(c, self.w, height, width);
        for r in rows {
            for col in cols.clone() {
                let q = r * width + col;
                self.cover_t[q] += 1;
                if self.cover_t[q] == 1 && in_s[q] {
                    self.miss_s -= 1;
                }
            }
        }
    }
}

/// Schedule-weighted sum of [`lens_distance`] over all `(k, w)` pairs:
/// `sum_k alpha_k sum_w beta_w d_k_w`. Rank depths beyond the pixel
/// count contribute exactly zero (both top sets are the whole grid) and
/// are skipped.
pub fn combined_distance(
    a: &AttributionMap,
    b: &AttributionMap,
    schedule: &WeightSchedule,
) -> Result<f64> {
    a.check_same_dims(b)?;
    let windows: Vec<usize> = (0..=schedule.w_max()).collect();
    let mut sweep = PairSweep::new(a, b, &windows);
    let k_hi = schedule.k_max().min(a.len());
    let mut total = 0.0;
    for k in 1..=k_hi {
        sweep.advance(k);
        for (wi, &w) in windows.iter().enumerate() {
            let misses = sweep.windows[wi].miss_s + sweep.windows[wi].miss_t;
            total += schedule.alpha(k) * schedule.beta(w) * (misses as f64 / k as f64);
        }
    }
    Ok(total)
}

/// Schedule-weighted symmetric-difference sum
/// `sum_k alpha_k sum_w beta_w |S_k Δ T_k| / k`. Dominates
/// [`combined_distance`] term by term and is a bounded metric on maps
/// (identical top-k rankings give 0; symmetry and the triangle
/// inequality are inherited from the set symmetric difference).
pub fn upper_bound_u(
    a: &AttributionMap,
    b: &AttributionMap,
    schedule: &WeightSchedule,
) -> Result<f64> {
    a.check_same_dims(b)?;
    let mut sweep = PairSweep::new(a, b, &[]);
    let k_hi = schedule.k_max().min(a.len());
    let mut total = 0.0;
    for k in 1..=k_hi {
        sweep.advance(k);
        let sym = sweep.symdiff(k) as f64 / k as f64;
        // Same (k, w) loop shape as combined_distance so the two sums
        // stay comparable term by term in floating point.
        for w in 0..=schedule.w_max() {
            total += schedule.alpha(k) * schedule.beta(w) * sym;
        }
    }
    Ok(total)
}

/// Window mean filter. Every output pixel averages its clipped
/// `(2w+1) x (2w+1)` window but always divides by the full window area,
/// so boundary pixels shrink toward zero. That convention makes the map
/// `a -> smooth_map(a, w)` non-expansive in the Euclidean norm, which
/// the correlation variants below rely on.
pub fn smooth_map(map: &AttributionMap, w: usize) -> AttributionMap {
    if w == 0 {
        return map.clone();
    }
    let (height, width) = (map.height(), map.width());
    let area = ((2 * w + 1) * (2 * w + 1)) as f64;
    let mut out = Vec::with_capacity(map.len());
    for c in map.coords() {
        let (rows, cols) = window_bounds(c, w, height, width);
        let mut sum = 0.0;
        for r in rows {
            for col in cols.clone() {
                sum += map.values()[r * width + col];
            }
        }
        out.push(sum / area);
    }
    AttributionMap::new(height, width, out).expect("same dims, finite values")
}

/// Average ranks (1-based, ties share the mean of their positions).
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_unstable_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite"));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // positions start+1 ..= end, averaged
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CoreError::UndefinedCorrelation("an input ranks every pixel equally"));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Spearman rank correlation (Pearson on average ranks). Errors on
/// constant maps instead of inventing a value.
pub fn spearman_rho(a: &AttributionMap, b: &AttributionMap) -> Result<f64> {
    a.check_same_dims(b)?;
    let ra = average_ranks(a.values());
    let rb = average_ranks(b.values());
    pearson(&ra, &rb)
}

/// Kendall rank correlation, tau-b variant (tie-corrected), via
/// Knight's O(n log n) algorithm: sort by the first key, then count
/// discordant pairs as merge-sort swaps on the second.
pub fn kendall_tau(a: &AttributionMap, b: &AttributionMap) -> Result<f64> {
    a.check_same_dims(b)?;
    let x = a.values();
    let y = b.values();
    let n = x.len();

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&i, &j| {
        x[i].partial_cmp(&x[j])
            .expect("finite")
            .then(y[i].partial_cmp(&y[j]).expect("finite"))
    });

    // Tie counts: pairs tied in x (n1), in y (n2), in both (n3).
    let tie_pairs = |mut same: Vec<f64>| -> u64 {
        same.sort_unstable_by(|p, q| p.partial_cmp(q).expect("finite"));
        let mut pairs = 0u64;
        let mut start = 0;
        while start < same.len() {
            let mut end = start + 1;
            while end < same.len() && same[end] == same[start] {
                end += 1;
            }
            let g = (end - start) as u64;
            pairs += g * (g - 1) / 2;
            start = end;
        }
        pairs
    };
    let mut n1 = 0u64;
    let mut n3 = 0u64;
    {
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && x[idx[end]] == x[idx[start]] {
                end += 1;
            }
            let g = (end - start) as u64;
            n1 += g * (g - 1) / 2;
            let mut sub = 0;
            while sub < end - start {
                let mut sub_end = sub + 1;
                while sub_end < end - start && y[idx[start + sub_end]] == y[idx[start + sub]] {
                    sub_end += 1;
                }
                let h = (sub_end - sub) as u64;
                n3 += h * (h - 1) / 2;
                sub = sub_end;
            }
            start = end;
        }
    }
    let n2 = tie_pairs(y.to_vec());

    // Discordant pairs = inversions of y in x-order (ties in x were
    // pre-sorted by y, so within-group pairs contribute none).
    let mut seq: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let discordant = merge_count(&mut seq, &mut buf);

    let n0 = n as u64 * (n as u64 - 1) / 2;
    let den_a = n0 - n1;
    let den_b = n0 - n2;
    if den_a == 0 || den_b == 0 {
        return Err(CoreError::UndefinedCorrelation("an input ranks every pixel equally"));
    }
    let numer = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * discordant as i64;
    Ok(numer as f64 / ((den_a as f64).sqrt() * (den_b as f64).sqrt()))
}

/// Counts strict inversions while merge-sorting `seq`.
fn merge_count(seq: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = seq.len();
    if n <= 1 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = seq.split_at_mut(mid);
    let mut inv = merge_count(left, &mut buf[..mid]) + merge_count(right, &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < left.len() && j < right.len() {
        if right[j] < left[i] {
            inv += (left.len() - i) as u64;
            buf[k] = right[j];
            j += 1;
        } else {
            buf[k] = left[i];
            i += 1;
        }
        k += 1;
    }
    while i < left.len() {
        buf[k] = left[i];
        i += 1;
        k += 1;
    }
    while j < right.len() {
        buf[k] = right[j];
        j += 1;
        k += 1;
    }
    seq.copy_from_slice(&buf[..n]);
    inv
}

/// Spearman correlation after smoothing both maps with
/// [`smooth_map`] at radius `w`.
pub fn lens_spearman(a: &AttributionMap, b: &AttributionMap, w: usize) -> Result<f64> {
    a.check_same_dims(b)?;
    spearman_rho(&smooth_map(a, w), &smooth_map(b, w))
}

/// Kendall correlation after smoothing both maps at radius `w`.
pub fn lens_kendall(a: &AttributionMap, b: &AttributionMap, w: usize) -> Result<f64> {
    a.check_same_dims(b)?;
    kendall_tau(&smooth_map(a, w), &smooth_map(b, w))
}
