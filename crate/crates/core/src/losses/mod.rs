//! Topological and overlap losses, and their weighted combination.

mod betti;
mod cldice;
mod dice;
mod hutopo;
mod skeleton;

pub use betti::{bm_loss, bm_loss_gradient};
pub use cldice::{cldice_loss, cldice_loss_with_gradient, CLDICE_EPSILON};
pub use dice::{dice_loss, DICE_EPSILON};
pub use hutopo::{hutopo_gradient, hutopo_loss};
pub use skeleton::{soft_skeleton, soft_skeleton_tape, SkeletonTape};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_filtration, channel_project, one_hot, FiltrationDirection, LabelGrid, MulticlassPrediction};
use crate::matching::betti_match;
use crate::persistence::{compute_barcode, Dims};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub alpha_max: f64,
    pub warmup_alpha: u64,
    pub total_steps: u64,
    pub gamma_matched: f64,
    pub gamma_unmatched: f64,
    pub cldice_alpha: f64,
    pub skeleton_iterations: usize,
    pub ignore_background: bool,
    /// Use `f = y` instead of `f = 1 - y`.
    pub filtration_flip: bool,
    /// Count unmatched ground-truth bars in the reported `l_u`.
    pub include_gt_unmatched: bool,
    pub hutopo_dims: Dims,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha_max: 0.05,
            warmup_alpha: 0,
            total_steps: 1000,
            gamma_matched: 1.0,
            gamma_unmatched: 1.0,
            cldice_alpha: 0.5,
            skeleton_iterations: 3,
            ignore_background: false,
            filtration_flip: false,
            include_gt_unmatched: true,
            hutopo_dims: Dims::BOTH,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha_max", self.alpha_max),
            ("gamma_matched", self.gamma_matched),
            ("gamma_unmatched", self.gamma_unmatched),
            ("cldice_alpha", self.cldice_alpha),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.cldice_alpha > 1.0 {
            return Err(Error::InvalidConfig(format!("cldice_alpha must be at most 1, got {}", self.cldice_alpha)));
        }
        if self.skeleton_iterations == 0 {
            return Err(Error::InvalidConfig("skeleton_iterations must be at least 1".into()));
        }
        if self.total_steps == 0 {
            return Err(Error::InvalidConfig("total_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn direction(&self) -> FiltrationDirection {
        FiltrationDirection::from_flip(self.filtration_flip)
    }
}

/// Sigmoid ramp of the topological weight over training.
pub fn alpha_schedule(step: u64, config: &LossConfig) -> Result<f64> {
    if config.total_steps == 0 {
        return Err(Error::InvalidConfig("total_steps must be positive".into()));
    }
    let p = (step as f64 - config.warmup_alpha as f64) / config.total_steps as f64;
    let ramp = 2.0 / (1.0 + (-10.0 * p).exp()) - 1.0;
    Ok(ramp.max(0.0) * config.alpha_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassLoss {
    pub class: usize,
    pub matched: f64,
    pub unmatched: f64,
    pub num_unmatched: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub dice_component: f64,
    pub topo_matched: f64,
    pub topo_unmatched: f64,
    pub alpha: f64,
    pub gamma_matched: f64,
    pub gamma_unmatched: f64,
    pub per_class: Vec<ClassLoss>,
    /// Shape `(classes, height, width)`, row-major. Not serialized.
    #[serde(default, skip_serializing)]
    pub gradient: Vec<f64>,
}

impl LossReport {
    /// Recomposes the total from its reported parts.
    pub fn recomposed_total(&self) -> f64 {
        self.alpha * (self.gamma_matched * self.topo_matched + self.gamma_unmatched * self.topo_unmatched)
            + self.dice_component
    }
}

fn check_shapes(pred: &MulticlassPrediction, gt: &LabelGrid) -> Result<()> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::ShapeMismatch {
            left: format!("{}x{}", pred.width(), pred.height()),
            right: format!("{}x{}", gt.width(), gt.height()),
        });
    }
    Ok(())
}

fn classes(n: usize, ignore_background: bool) -> std::ops::Range<usize> {
    usize::from(ignore_background)..n
}

/// Per-class `(l_m, l_u)` and their gradients for one channel.
pub fn channel_bm_loss(
    pred: &MulticlassPrediction,
    gt: &MulticlassPrediction,
    class: usize,
    config: &LossConfig,
) -> Result<(ClassLoss, Vec<f64>, Vec<f64>)> {
    let dir = config.direction();
    let fp = build_filtration(&channel_project(pred, class)?, dir);
    let fg = build_filtration(&channel_project(gt, class)?, dir);
    let m = betti_match(&fp, &fg)?;
    let (matched, unmatched) = bm_loss(&m, config.include_gt_unmatched);
    let (gm, gu) = bm_loss_gradient(&m, &fp, dir)?;
    let summary = ClassLoss {
        class,
        matched,
        unmatched,
        num_unmatched: m.num_unmatched(),
    };
    Ok((summary, gm, gu))
}

/// Weighted multi-class Betti matching loss plus generalized Dice.
pub fn total_loss(pred: &MulticlassPrediction, gt: &LabelGrid, step: u64, config: &LossConfig) -> Result<LossReport> {
    config.validate()?;
    check_shapes(pred, gt)?;
    let n = pred.num_classes();
    let gt1 = one_hot(gt, n)?;
    let alpha = alpha_schedule(step, config)?;
    let plane = pred.width() * pred.height();

    let (dice, mut gradient) = dice_loss(pred, &gt1, config.ignore_background)?;
    let mut per_class = Vec::new();
    let (mut lm, mut lu) = (0.0, 0.0);
    let (wm, wu) = (alpha * config.gamma_matched, alpha * config.gamma_unmatched);
    for c in classes(n, config.ignore_background) {
        let (summary, gm, gu) = channel_bm_loss(pred, &gt1, c, config)?;
        lm += summary.matched;
        lu += summary.unmatched;
        for (i, slot) in gradient[c * plane..(c + 1) * plane].iter_mut().enumerate() {
            *slot += wm * gm[i] + wu * gu[i];
        }
        per_class.push(summary);
    }
    let total = alpha * (config.gamma_matched * lm + config.gamma_unmatched * lu) + dice;
    Ok(LossReport {
        total,
        dice_component: dice,
        topo_matched: lm,
        topo_unmatched: lu,
        alpha,
        gamma_matched: config.gamma_matched,
        gamma_unmatched: config.gamma_unmatched,
        per_class,
        gradient,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Dice,
    ClDice,
    HuTopo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub kind: BaselineKind,
    pub total: f64,
    pub dice_component: f64,
    /// Summed per-channel clDice or HuTopo term; zero for plain Dice.
    pub topo_component: f64,
    pub per_class: Vec<f64>,
    #[serde(default, skip_serializing)]
    pub gradient: Vec<f64>,
}

/// Comparison losses sharing the Dice term and the channel selection of
/// [`total_loss`].
///
/// clDice mixes as `(1 - a) * dice + a * sum_c cldice_c` with `a = cldice_alpha`;
/// HuTopo adds `alpha(step) * sum_c hutopo_c` to the Dice term.
pub fn baseline_loss(
    kind: BaselineKind,
    pred: &MulticlassPrediction,
    gt: &LabelGrid,
    step: u64,
    config: &LossConfig,
) -> Result<BaselineReport> {
    config.validate()?;
    check_shapes(pred, gt)?;
    let n = pred.num_classes();
    let gt1 = one_hot(gt, n)?;
    let plane = pred.width() * pred.height();
    let dir = config.direction();
    let (dice, mut gradient) = dice_loss(pred, &gt1, config.ignore_background)?;
    let mut per_class = Vec::new();
    let (weight_dice, weight_topo) = match kind {
        BaselineKind::Dice => (1.0, 0.0),
        BaselineKind::ClDice => (1.0 - config.cldice_alpha, config.cldice_alpha),
        BaselineKind::HuTopo => (1.0, alpha_schedule(step, config)?),
    };
    if kind != BaselineKind::Dice {
        for g in gradient.iter_mut() {
            *g *= weight_dice;
        }
        for c in classes(n, config.ignore_background) {
            let (p, g) = (channel_project(pred, c)?, channel_project(&gt1, c)?);
            let (value, grad) = match kind {
                BaselineKind::ClDice => cldice_loss_with_gradient(&p, &g, config.skeleton_iterations)?,
                _ => {
                    let fp = build_filtration(&p, dir);
                    let bp = compute_barcode(&fp, config.hutopo_dims);
                    let bg = compute_barcode(&build_filtration(&g, dir), config.hutopo_dims);
                    let (value, m) = hutopo_loss(&bp, &bg, config.hutopo_dims);
                    (value, hutopo_gradient(&m, &bp, &bg, &fp, dir)?)
                }
            };
            for (slot, d) in gradient[c * plane..(c + 1) * plane].iter_mut().zip(grad) {
                *slot += weight_topo * d;
            }
            per_class.push(value);
        }
    }
    let topo: f64 = per_class.iter().sum();
    Ok(BaselineReport {
        kind,
        total: weight_dice * dice + weight_topo * topo,
        dice_component: dice,
        topo_component: topo,
        per_class,
        gradient,
    })
}
