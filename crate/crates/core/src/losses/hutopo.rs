//! Wasserstein-matching topological loss on persistence diagrams.

use crate::error::Result;
use crate::grid::{Filtration, FiltrationDirection};
use crate::losses::betti::{check_fresh, route};
use crate::persistence::{Barcode, Dims};
use crate::wasserstein::{wasserstein_match, DiagramMatching};

/// Optimal-transport cost between the two diagrams over `dims`.
pub fn hutopo_loss(pred: &Barcode, gt: &Barcode, dims: Dims) -> (f64, DiagramMatching) {
    let m = wasserstein_match(pred, gt, dims);
    (m.cost(), m)
}

/// Gradient of [`hutopo_loss`] w.r.t. the likelihoods of the prediction channel.
pub fn hutopo_gradient(
    matching: &DiagramMatching,
    pred: &Barcode,
    gt: &Barcode,
    pred_filt: &Filtration,
    direction: FiltrationDirection,
) -> Result<Vec<f64>> {
    check_fresh(pred.bars(), pred_filt)?;
    let mut grad = vec![0.0; pred_filt.grid().num_vertices()];
    for dm in &matching.dims {
        for &(p, g) in &dm.matched {
            let (p, g) = (&pred.bars()[p], &gt.bars()[g]);
            route(p, 2.0 * (p.birth - g.birth), 2.0 * (p.death - g.death), pred_filt, direction, &mut grad);
        }
        for &p in &dm.unmatched_pred {
            let p = &pred.bars()[p];
            let l = p.death - p.birth;
            route(p, -l, l, pred_filt, direction, &mut grad);
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_filtration, LikelihoodGrid};
    use crate::persistence::compute_barcode;

    #[test]
    fn identical_is_zero() {
        let g = LikelihoodGrid::new(3, 3, vec![0.9, 0.2, 0.8, 0.1, 0.3, 0.7, 0.6, 0.4, 0.5]).unwrap();
        let f = build_filtration(&g, FiltrationDirection::Complement);
        let bc = compute_barcode(&f, Dims::BOTH);
        let (loss, m) = hutopo_loss(&bc, &bc, Dims::BOTH);
        assert_eq!(loss, 0.0);
        let grad = hutopo_gradient(&m, &bc, &bc, &f, FiltrationDirection::Complement).unwrap();
        assert!(grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lone_essential_bar_costs_half() {
        let f = build_filtration(&LikelihoodGrid::constant(2, 2, 1.0).unwrap(), FiltrationDirection::Complement);
        let bc = compute_barcode(&f, Dims::BOTH);
        assert_eq!(hutopo_loss(&bc, &Barcode::default(), Dims::BOTH).0, 0.5);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let v: Vec<f64> = (0..25).map(|i| ((i * 13) % 25) as f64 / 25.0 + 0.01).collect();
        let gt_mask: Vec<f64> = (0..25).map(|i| if i % 5 == 2 || i / 5 == 2 { 1.0 } else { 0.0 }).collect();
        let dir = FiltrationDirection::Complement;
        let fg = build_filtration(&LikelihoodGrid::new(5, 5, gt_mask).unwrap(), dir);
        let gt = compute_barcode(&fg, Dims::BOTH);
        let eval = |vals: &[f64]| {
            let f = build_filtration(&LikelihoodGrid::new(5, 5, vals.to_vec()).unwrap(), dir);
            let bc = compute_barcode(&f, Dims::BOTH);
            (hutopo_loss(&bc, &gt, Dims::BOTH), bc, f)
        };
        let ((_, m), bc, f) = eval(&v);
        let grad = hutopo_gradient(&m, &bc, &gt, &f, dir).unwrap();
        let eps = 1e-6;
        for i in 0..25 {
            let mut a = v.clone();
            a[i] += eps;
            let mut b = v.clone();
            b[i] -= eps;
            let fd = (eval(&a).0 .0 - eval(&b).0 .0) / (2.0 * eps);
            assert!((fd - grad[i]).abs() < 1e-6, "pixel {i}: {fd} vs {}", grad[i]);
        }
    }
}
