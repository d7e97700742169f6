//! Attributional attacks: perturb an image inside an Linf ball so the
//! model's *explanation* moves while its *prediction* does not.
//!
//! Two baseline attacks draw random sign perturbations (fresh per
//! image, or one shared "universal" tensor for a whole set). The
//! iterative attacks run signed-gradient ascent on an
//! attribution-displacement objective, differentiated through the
//! saliency map with finite-difference Hessian-vector products:
//!
//! * [`topk_attack`] drains gradient mass off the image's original
//!   top-t pixels,
//! * [`lens_objective_attack`] drains the window dilation of that set
//!   instead (the locality-aware variant of the same objective),
//! * [`mass_center_attack`] pushes the center of mass of the absolute
//!   saliency map as far as possible.
//!
//! Every post-step iterate is recorded. The returned perturbation is
//! the *worst* prediction-preserving iterate over the whole trajectory
//! (all restarts), where "worst" is each attack's own selection score;
//! if no iterate preserves the prediction the original image comes
//! back flagged unusable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::map::{AttributionMap, ImageTensor, PixelSet};
use crate::metrics::{lens_prec_at_k, neighborhood_union, top_k_set, topk_intersection};
use crate::model::{step_sign, ToyNetwork};

/// Probe radius for finite-difference Hessian-vector products.
pub const HVP_RADIUS: f64 = 1e-4;

/// Shared knobs for all attack variants. The one-shot random attacks
/// use only `epsilon` and `seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    /// Linf perturbation budget.
    pub epsilon: f64,
    /// Step length of each signed-gradient update.
    pub step_size: f64,
    /// Updates per restart.
    pub steps: usize,
    /// Restart count; the first starts at the image, later ones at
    /// random points of the ball.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig { epsilon: 0.3, step_size: 0.01, steps: 100, restarts: 3, seed: 0 }
    }
}

impl AttackConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(CoreError::Attack("epsilon must be non-negative".into()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(CoreError::Attack("step_size must be positive".into()));
        }
        if self.steps == 0 || self.restarts == 0 {
            return Err(CoreError::Attack("steps and restarts must be positive".into()));
        }
        Ok(())
    }
}

/// One recorded point of an attack trajectory (post projection).
#[derive(Debug, Clone, PartialEq)]
pub struct AttackIterate {
    pub image: ImageTensor,
    /// Did the model still predict the original class here?
    pub preserved: bool,
    /// Selection score (`None` for the one-shot random attacks, which
    /// have nothing to rank).
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    /// Worst prediction-preserving iterate, or the original image if
    /// none exists.
    pub perturbed: ImageTensor,
    /// False when no recorded iterate kept the prediction; metric
    /// consumers must skip such results.
    pub prediction_preserved: bool,
    /// Index into `trace` of the chosen iterate (restart-major order).
    pub chosen_iteration: Option<usize>,
    /// Score of the chosen iterate.
    pub chosen_score: Option<f64>,
    /// Every post-step iterate of every restart.
    pub trace: Vec<AttackIterate>,
}

impl AttackResult {
    /// Largest absolute pixel difference against `original`.
    pub fn delta_linf(&self, original: &ImageTensor) -> f64 {
        self.perturbed
            .values()
            .iter()
            .zip(original.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

enum Goal {
    /// Lower score = worse attribution agreement (intersection-like).
    Minimize,
    /// Higher score = worse (displacement-like).
    Maximize,
}

/// Picks the worst preserved iterate; ties keep the earliest index.
fn conclude(original: &ImageTensor, trace: Vec<AttackIterate>, goal: Goal) -> AttackResult {
    let mut chosen: Option<usize> = None;
    for (i, it) in trace.iter().enumerate() {
        if !it.preserved {
            continue;
        }
        let better = match chosen {
            None => true,
            Some(j) => match (it.score, trace[j].score) {
                (Some(a), Some(b)) => match goal {
                    Goal::Minimize => a < b,
                    Goal::Maximize => a > b,
                },
                _ => false, // scoreless attacks keep the first hit
            },
        };
        if better {
            chosen = Some(i);
        }
    }
    match chosen {
        Some(i) => AttackResult {
            perturbed: trace[i].image.clone(),
            prediction_preserved: true,
            chosen_iteration: Some(i),
            chosen_score: trace[i].score,
            trace,
        },
        None => AttackResult {
            perturbed: original.clone(),
            prediction_preserved: false,
            chosen_iteration: None,
            chosen_score: None,
            trace,
        },
    }
}

fn check_image(net: &ToyNetwork, img: &ImageTensor) -> Result<()> {
    if img.len() != net.input_dim() {
        return Err(CoreError::Attack(format!(
            "image has {} pixels, network expects {}",
            img.len(),
            net.input_dim()
        )));
    }
    Ok(())
}

/// Clamps candidate pixels to the Linf ball around `original` and to
/// `[0, 1]`.
fn project(candidate: &mut [f64], original: &[f64], epsilon: f64) {
    for (x, o) in candidate.iter_mut().zip(original) {
        *x = x.clamp(o - epsilon, o + epsilon).clamp(0.0, 1.0);
    }
}

fn tensor_like(img: &ImageTensor, data: Vec<f64>) -> ImageTensor {
    ImageTensor::new(img.height(), img.width(), data).expect("projected into [0,1]")
}

/// Single random perturbation with each pixel pushed by exactly
/// `+epsilon` or `-epsilon` (then clamped to `[0,1]`).
pub fn random_sign(net: &ToyNetwork, img: &ImageTensor, cfg: &AttackConfig) -> Result<AttackResult> {
    cfg.validate()?;
    check_image(net, img)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let signs: Vec<f64> = (0..img.len()).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    apply_fixed_delta(net, img, &signs, cfg.epsilon)
}

/// Random-sign attack with one sign tensor shared by every image
/// (drawn once from `cfg.seed`), the "universal" baseline.
pub fn universal_random(
    net: &ToyNetwork,
    images: &[ImageTensor],
    cfg: &AttackConfig,
) -> Result<Vec<AttackResult>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = net.input_dim();
    let signs: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    images
        .iter()
        .map(|img| {
            check_image(net, img)?;
            apply_fixed_delta(net, img, &signs, cfg.epsilon)
        })
        .collect()
}

fn apply_fixed_delta(
    net: &ToyNetwork,
    img: &ImageTensor,
    signs: &[f64],
    epsilon: f64,
) -> Result<AttackResult> {
    let pred0 = net.predict(img.values())?;
    let mut candidate: Vec<f64> =
        img.values().iter().zip(signs).map(|(x, s)| x + s * epsilon).collect();
    project(&mut candidate, img.values(), epsilon);
    let perturbed = tensor_like(img, candidate);
    let preserved = net.predict(perturbed.values())? == pred0;
    let trace = vec![AttackIterate { image: perturbed, preserved, score: None }];
    Ok(conclude(img, trace, Goal::Minimize))
}

/// Attribution map used inside attack loops: always the plain saliency
/// map of the originally predicted class (cheap, and the quantity the
/// iterative objectives differentiate).
fn saliency(net: &ToyNetwork, img: &ImageTensor, x: &[f64], class: usize) -> Result<AttributionMap> {
    AttributionMap::new(img.height(), img.width(), net.grad_input(x, class)?)
}

/// Core loop shared by the iterative attacks: signed-gradient ascent
/// on `objective_grad`, scoring each projected iterate with `score`.
fn iterative_attack<G, S>(
    net: &ToyNetwork,
    img: &ImageTensor,
    cfg: &AttackConfig,
    pred0: usize,
    mut objective_grad: G,
    mut score: S,
    goal: Goal,
) -> Result<AttackResult>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
    S: FnMut(&[f64]) -> Result<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0 = img.values();
    let mut trace = Vec::with_capacity(cfg.steps * cfg.restarts);
    for restart in 0..cfg.restarts {
        let mut x: Vec<f64> = if restart == 0 {
            x0.to_vec()
        } else {
            let mut r: Vec<f64> =
                x0.iter().map(|v| v + rng.gen_range(-cfg.epsilon..=cfg.epsilon)).collect();
            project(&mut r, x0, cfg.epsilon);
            r
        };
        for _ in 0..cfg.steps {
            let g = objective_grad(&x)?;
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi += cfg.step_size * step_sign(*gi);
            }
            project(&mut x, x0, cfg.epsilon);
            let preserved = net.predict(&x)? == pred0;
            let s = score(&x)?;
            trace.push(AttackIterate { image: tensor_like(img, x.clone()), preserved, score: Some(s) });
        }
    }
    Ok(conclude(img, trace, goal))
}

/// Iterative attack on the original top-t saliency pixels: ascends
/// `-sum of saliency over S_t(original)` (gradient = negated
/// Hessian-vector product with the indicator of that set) and selects
/// the preserved iterate with the lowest top-t intersection.
pub fn topk_attack(
    net: &ToyNetwork,
    img: &ImageTensor,
    t: usize,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    check_image(net, img)?;
    let pred0 = net.predict(img.values())?;
    let a0 = saliency(net, img, img.values(), pred0)?;
    let target = top_k_set(&a0, t)?;
    let indicator = indicator_of(&target, img);
    iterative_attack(
        net,
        img,
        cfg,
        pred0,
        |x| {
            let hv = net.hvp_fd(x, &indicator, pred0, HVP_RADIUS)?;
            Ok(hv.iter().map(|v| -v).collect())
        },
        |x| topk_intersection(&a0, &saliency(net, img, x, pred0)?, t),
        Goal::Minimize,
    )
}

/// Locality-aware variant of [`topk_attack`]: the drained set is the
/// `(2w+1)`-window dilation of the original top-t pixels, and iterates
/// are ranked by window-tolerant precision instead of intersection.
pub fn lens_objective_attack(
    net: &ToyNetwork,
    img: &ImageTensor,
    t: usize,
    w: usize,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    check_image(net, img)?;
    let pred0 = net.predict(img.values())?;
    let a0 = saliency(net, img, img.values(), pred0)?;
    let target = top_k_set(&a0, t)?;
    let dilated = neighborhood_union(&target, w, img.height(), img.width());
    let indicator = indicator_of(&dilated, img);
    iterative_attack(
        net,
        img,
        cfg,
        pred0,
        |x| {
            let hv = net.hvp_fd(x, &indicator, pred0, HVP_RADIUS)?;
            Ok(hv.iter().map(|v| -v).collect())
        },
        |x| lens_prec_at_k(&a0, &saliency(net, img, x, pred0)?, t, w),
        Goal::Minimize,
    )
}

fn indicator_of(set: &PixelSet, img: &ImageTensor) -> Vec<f64> {
    let mut v = vec![0.0; img.len()];
    for c in set.iter() {
        v[c.row * img.width() + c.col] = 1.0;
    }
    v
}

/// Center of mass of the absolute attribution values, as fractional
/// `(row, col)`. Errors when the map is identically zero.
pub fn center_of_mass(map: &AttributionMap) -> Result<(f64, f64)> {
    match center_opt(map) {
        Some(c) => Ok(c),
        None => Err(CoreError::Attack("center of mass of an all-zero map".into())),
    }
}

fn center_opt(map: &AttributionMap) -> Option<(f64, f64)> {
    let mut total = 0.0;
    let mut row_acc = 0.0;
    let mut col_acc = 0.0;
    for c in map.coords() {
        let m = map.value(c).abs();
        total += m;
        row_acc += m * c.row as f64;
        col_acc += m * c.col as f64;
    }
    if total == 0.0 {
        return None;
    }
    Some((row_acc / total, col_acc / total))
}

/// Iterative attack that maximises how far the saliency center of mass
/// moves. The ascent direction differentiates the *squared*
/// displacement (smooth at the start point, same maximiser); scores
/// report the plain Euclidean displacement.
pub fn mass_center_attack(
    net: &ToyNetwork,
    img: &ImageTensor,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    check_image(net, img)?;
    let pred0 = net.predict(img.values())?;
    let a0 = saliency(net, img, img.values(), pred0)?;
    let c0 = center_of_mass(&a0)?;
    let width = img.width();
    iterative_attack(
        net,
        img,
        cfg,
        pred0,
        |x| {
            let a = saliency(net, img, x, pred0)?;
            let (center, total) = match (center_opt(&a), abs_total(&a)) {
                (Some(c), t) if t > 0.0 => (c, t),
                // Saliency vanished; no direction to follow.
                _ => return Ok(vec![0.0; a.len()]),
            };
            // d/da of |C(a) - C0|^2, then through the saliency map via
            // one Hessian-vector product.
            let dr = center.0 - c0.0;
            let dc = center.1 - c0.1;
            let mut v = vec![0.0; a.len()];
            for coord in a.coords() {
                let s = step_sign(a.value(coord));
                let term = 2.0 * dr * (coord.row as f64 - center.0)
                    + 2.0 * dc * (coord.col as f64 - center.1);
                v[coord.row * width + coord.col] = s * term / total;
            }
            net.hvp_fd(x, &v, pred0, HVP_RADIUS)
        },
        |x| {
            let a = saliency(net, img, x, pred0)?;
            Ok(match center_opt(&a) {
                Some((r, c)) => ((r - c0.0).powi(2) + (c - c0.1).powi(2)).sqrt(),
                None => 0.0,
            })
        },
        Goal::Maximize,
    )
}

fn abs_total(map: &AttributionMap) -> f64 {
    map.values().iter().map(|v| v.abs()).sum()
}
