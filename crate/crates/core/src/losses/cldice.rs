//! Soft clDice loss on one channel.

use crate::error::{Error, Result};
use crate::grid::LikelihoodGrid;
use crate::losses::skeleton::soft_skeleton_tape;

pub const CLDICE_EPSILON: f64 = 1e-8;

/// clDice loss of a soft prediction channel against a binary ground-truth
/// channel, with its gradient w.r.t. the prediction.
pub fn cldice_loss_with_gradient(pred: &LikelihoodGrid, gt: &LikelihoodGrid, k: usize) -> Result<(f64, Vec<f64>)> {
    if !pred.same_shape(gt) {
        return Err(Error::ShapeMismatch {
            left: format!("{}x{}", pred.width(), pred.height()),
            right: format!("{}x{}", gt.width(), gt.height()),
        });
    }
    if let Some((index, &value)) = gt.values().iter().enumerate().find(|(_, v)| **v != 0.0 && **v != 1.0) {
        return Err(Error::NonBinaryMask { index, value });
    }
    let tape_p = soft_skeleton_tape(pred, k)?;
    let tape_g = soft_skeleton_tape(gt, k)?;
    let (sp, sg) = (tape_p.skeleton(), tape_g.skeleton());
    let (p, g) = (pred.values(), gt.values());

    let sum_sp = sp.iter().sum::<f64>() + CLDICE_EPSILON;
    let sum_sg = sg.iter().sum::<f64>() + CLDICE_EPSILON;
    let tprec = sp.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / sum_sp;
    let tsens = sg.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() / sum_sg;
    let denom = tprec + tsens + CLDICE_EPSILON;
    let loss = 1.0 - 2.0 * tprec * tsens / denom;

    let d_prec = -2.0 * tsens * (tsens + CLDICE_EPSILON) / (denom * denom);
    let d_sens = -2.0 * tprec * (tprec + CLDICE_EPSILON) / (denom * denom);
    let upstream: Vec<f64> = g.iter().map(|&gi| d_prec * (gi - tprec) / sum_sp).collect();
    let mut grad = tape_p.backward(&upstream);
    for (gr, &s) in grad.iter_mut().zip(sg) {
        *gr += d_sens * s / sum_sg;
    }
    Ok((loss, grad))
}

pub fn cldice_loss(pred: &LikelihoodGrid, gt: &LikelihoodGrid, k: usize) -> Result<f64> {
    Ok(cldice_loss_with_gradient(pred, gt, k)?.0)
}
