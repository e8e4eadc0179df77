//! Generalized Dice loss with inverse squared-volume class weights.

use crate::error::{Error, Result};
use crate::grid::MulticlassPrediction;

/// Guard added to class volumes and to the overall ratio.
pub const DICE_EPSILON: f64 = 1e-8;

/// Generalized Dice loss and its gradient with respect to every likelihood.
///
/// `1 - (2 * sum_c w_c sum_i p g + eps) / (sum_c w_c sum_i (p + g) + eps)` with
/// `w_c = 1 / (sum_i g_ci + eps)^2`. Channel 0 is skipped when
/// `ignore_background` is set; its gradient entries are then zero.
pub fn dice_loss(
    pred: &MulticlassPrediction,
    gt: &MulticlassPrediction,
    ignore_background: bool,
) -> Result<(f64, Vec<f64>)> {
    if pred.shape() != gt.shape() {
        return Err(Error::ShapeMismatch {
            left: format!("{:?}", pred.shape()),
            right: format!("{:?}", gt.shape()),
        });
    }
    let first = usize::from(ignore_background);
    let n = pred.num_classes();
    let mut weights = vec![0.0; n];
    let mut numer = 0.0;
    let mut denom = 0.0;
    for (c, weight) in weights.iter_mut().enumerate().skip(first) {
        let (p, g) = (pred.plane(c), gt.plane(c));
        let sg: f64 = g.iter().sum();
        let sp: f64 = p.iter().sum();
        let inter: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        let w = 1.0 / ((sg + DICE_EPSILON) * (sg + DICE_EPSILON));
        *weight = w;
        numer += w * inter;
        denom += w * (sp + sg);
    }
    let top = 2.0 * numer + DICE_EPSILON;
    let bottom = denom + DICE_EPSILON;
    let loss = 1.0 - top / bottom;

    let mut grad = vec![0.0; pred.values().len()];
    let plane = pred.width() * pred.height();
    for c in first..n {
        let g = gt.plane(c);
        let w = weights[c];
        for i in 0..plane {
            // d/dp of -(top / bottom)
            grad[c * plane + i] = -(2.0 * w * g[i] * bottom - top * w) / (bottom * bottom);
        }
    }
    Ok((loss, grad))
}
