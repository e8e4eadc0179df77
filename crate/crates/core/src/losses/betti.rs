//! Betti matching loss split into matched and unmatched parts, with gradients
//! routed through the critical cells of the prediction bars.

use crate::error::{Error, Result};
use crate::grid::{Filtration, FiltrationDirection};
use crate::matching::BettiMatching;
use crate::persistence::Bar;

/// `(l_m, l_u)` of one matching.
///
/// `l_m` sums squared endpoint differences of matched pairs; `l_u` sums the
/// squared diagonal distance `(d - b)^2 / 2` of unmatched bars. Unmatched
/// ground-truth bars are included only when `include_gt_unmatched` is set.
pub fn bm_loss(matching: &BettiMatching, include_gt_unmatched: bool) -> (f64, f64) {
    let mut matched = 0.0;
    let mut unmatched = 0.0;
    for dim in 0..2 {
        for (p, g) in matching.matched_bars(dim) {
            let db = p.birth - g.birth;
            let dd = p.death - g.death;
            matched += db * db + dd * dd;
        }
        for p in matching.unmatched_pred_bars(dim) {
            unmatched += diagonal(p);
        }
        if include_gt_unmatched {
            for g in matching.unmatched_gt_bars(dim) {
                unmatched += diagonal(g);
            }
        }
    }
    (matched, unmatched)
}

fn diagonal(bar: &Bar) -> f64 {
    let l = bar.death - bar.birth;
    l * l / 2.0
}

/// Adds `d_birth` and `d_death` (derivatives w.r.t. filtration values) to the
/// pixels that realise the bar's endpoints, converted to likelihood space.
pub(crate) fn route(
    bar: &Bar,
    d_birth: f64,
    d_death: f64,
    filt: &Filtration,
    direction: FiltrationDirection,
    grad: &mut [f64],
) {
    let chain = direction.derivative();
    grad[filt.critical_vertex(bar.birth_cell)] += chain * d_birth;
    // essential deaths are pinned and carry no gradient
    if let Some(cell) = bar.death_cell {
        grad[filt.critical_vertex(cell)] += chain * d_death;
    }
}

pub(crate) fn check_fresh(bars: &[Bar], filt: &Filtration) -> Result<()> {
    let n = filt.grid().num_cells();
    for bar in bars {
        let stale = bar.birth_cell.index() >= n
            || filt.value(bar.birth_cell) != bar.birth
            || bar.death_cell.is_some_and(|c| c.index() >= n || filt.value(c) != bar.death);
        if stale {
            return Err(Error::ShapeMismatch {
                left: "matching".into(),
                right: "stale for this prediction filtration".into(),
            });
        }
    }
    Ok(())
}

/// Gradients of `l_m` and `l_u` with respect to the likelihoods of one channel.
///
/// `pred_filt` must be the prediction filtration the matching was computed
/// from. Ground-truth terms are constant and contribute nothing.
pub fn bm_loss_gradient(
    matching: &BettiMatching,
    pred_filt: &Filtration,
    direction: FiltrationDirection,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_fresh(matching.pred.bars(), pred_filt)?;
    let n = pred_filt.grid().num_vertices();
    let mut grad_m = vec![0.0; n];
    let mut grad_u = vec![0.0; n];
    for dim in 0..2 {
        for (p, g) in matching.matched_bars(dim) {
            route(p, 2.0 * (p.birth - g.birth), 2.0 * (p.death - g.death), pred_filt, direction, &mut grad_m);
        }
        for p in matching.unmatched_pred_bars(dim) {
            let l = p.death - p.birth;
            route(p, -l, l, pred_filt, direction, &mut grad_u);
        }
    }
    Ok((grad_m, grad_u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_filtration, CellId, LikelihoodGrid};
    use crate::matching::{betti_match, DimMatching};
    use crate::persistence::Barcode;

    fn bar(b: f64, d: f64, bc: u32, dc: Option<u32>) -> Bar {
        Bar {
            dim: 0,
            birth: b,
            death: d,
            birth_cell: CellId(bc),
            death_cell: dc.map(CellId),
        }
    }

    fn manual(pred: Vec<Bar>, gt: Vec<Bar>, dim0: DimMatching) -> BettiMatching {
        BettiMatching {
            pred: Barcode::new(pred),
            gt: Barcode::new(gt),
            dims: [dim0, DimMatching::default()],
        }
    }

    #[test]
    fn matched_pair_formula() {
        let m = manual(
            vec![bar(0.1, 0.9, 0, Some(3))],
            vec![bar(0.0, 1.0, 0, None)],
            DimMatching {
                matched: vec![(0, 0)],
                ..Default::default()
            },
        );
        let (lm, lu) = bm_loss(&m, true);
        assert!((lm - 0.02).abs() < 1e-15);
        assert_eq!(lu, 0.0);
    }

    #[test]
    fn unmatched_pred_formula() {
        let m = manual(
            vec![bar(0.4, 0.6, 0, Some(3))],
            vec![],
            DimMatching {
                unmatched_pred: vec![0],
                ..Default::default()
            },
        );
        let (lm, lu) = bm_loss(&m, true);
        assert_eq!(lm, 0.0);
        assert!((lu - 0.02).abs() < 1e-15);
    }

    #[test]
    fn gt_term_toggle() {
        let m = manual(
            vec![],
            vec![bar(0.0, 1.0, 0, None)],
            DimMatching {
                unmatched_gt: vec![0],
                ..Default::default()
            },
        );
        assert_eq!(bm_loss(&m, true), (0.0, 0.5));
        assert_eq!(bm_loss(&m, false), (0.0, 0.0));
    }

    #[test]
    fn identity_has_zero_loss_and_gradient() {
        let mask = LikelihoodGrid::new(3, 3, vec![1., 1., 1., 1., 0., 1., 1., 1., 1.]).unwrap();
        let f = build_filtration(&mask, FiltrationDirection::Complement);
        let m = betti_match(&f, &f).unwrap();
        assert_eq!(bm_loss(&m, true), (0.0, 0.0));
        let (gm, gu) = bm_loss_gradient(&m, &f, FiltrationDirection::Complement).unwrap();
        assert!(gm.iter().chain(&gu).all(|&g| g == 0.0));
    }

    #[test]
    fn late_birth_pushes_likelihood_up() {
        // one prediction component born at f = 0.3 against a gt component born at 0
        let pred = LikelihoodGrid::new(3, 1, vec![0.7, 0.2, 0.1]).unwrap();
        let gt = LikelihoodGrid::new(3, 1, vec![1.0, 0.0, 0.0]).unwrap();
        let fp = build_filtration(&pred, FiltrationDirection::Complement);
        let fg = build_filtration(&gt, FiltrationDirection::Complement);
        let m = betti_match(&fp, &fg).unwrap();
        let (p, g) = m.matched_bars(0).next().unwrap();
        assert!(p.birth > g.birth);
        let (gm, _) = bm_loss_gradient(&m, &fp, FiltrationDirection::Complement).unwrap();
        assert!(gm[0] < 0.0);
    }

    #[test]
    fn stale_matching_is_rejected() {
        let a = build_filtration(&LikelihoodGrid::new(3, 1, vec![0.9, 0.1, 0.8]).unwrap(), FiltrationDirection::Complement);
        let b = build_filtration(&LikelihoodGrid::new(3, 1, vec![0.5, 0.1, 0.8]).unwrap(), FiltrationDirection::Complement);
        let m = betti_match(&a, &a).unwrap();
        assert!(bm_loss_gradient(&m, &b, FiltrationDirection::Complement).is_err());
    }
}
