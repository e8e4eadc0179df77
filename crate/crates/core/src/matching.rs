//! Induced (Betti) matchings between a prediction and a ground-truth barcode.
//!
//! Both filtrations receive the inclusion of the sublevel sets of their
//! pointwise maximum, the comparison filtration. Each inclusion induces a
//! matching of barcodes that factors through the image barcode: comparison
//! bars match image bars with equal birth, image bars match target bars with
//! equal death. A prediction bar and a ground-truth bar are matched when both
//! reach the same comparison bar.
//!
//! Equal filtration values are ordered by cell id, the same refinement the
//! persistence computation uses. Under that order every birth and death value
//! belongs to a single cell, so these groups pair bars through shared critical
//! cells.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::grid::{shape_error, Filtration};
use crate::persistence::{compute_barcode, image_pairing, link_image, Bar, Barcode, Dims, ImageBarcode};

/// Anything with interval endpoints that can be canonically matched.
pub trait Interval {
    fn birth(&self) -> f64;
    /// Death for grouping; `f64::INFINITY` for essential classes.
    fn death_key(&self) -> f64;
    /// Refines equal birth values; bars born at the same cell share it.
    fn birth_cell_key(&self) -> u32 {
        0
    }
    /// Refines equal death values; bars killed by the same cell share it.
    fn death_cell_key(&self) -> u32 {
        0
    }
}

impl Interval for Bar {
    fn birth(&self) -> f64 {
        self.birth
    }

    fn death_key(&self) -> f64 {
        Bar::death_key(self)
    }

    fn birth_cell_key(&self) -> u32 {
        self.birth_cell.0
    }

    fn death_cell_key(&self) -> u32 {
        self.death_cell.map_or(u32::MAX, |c| c.0)
    }
}

type Key = (f64, u32);

fn key_cmp(a: Key, b: Key) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn pair_groups<A: Interval, B: Interval>(
    sup: &[A],
    sub: &[B],
    group_a: impl Fn(&A) -> Key,
    group_b: impl Fn(&B) -> Key,
    order_a: impl Fn(&A, &A) -> Ordering,
    order_b: impl Fn(&B, &B) -> Ordering,
) -> Vec<Option<usize>> {
    let mut ia: Vec<usize> = (0..sup.len()).collect();
    let mut ib: Vec<usize> = (0..sub.len()).collect();
    ia.sort_by(|&x, &y| key_cmp(group_a(&sup[x]), group_a(&sup[y])).then_with(|| order_a(&sup[x], &sup[y])));
    ib.sort_by(|&x, &y| key_cmp(group_b(&sub[x]), group_b(&sub[y])).then_with(|| order_b(&sub[x], &sub[y])));
    let mut out = vec![None; sub.len()];
    let (mut i, mut j) = (0, 0);
    while i < ia.len() && j < ib.len() {
        match key_cmp(group_a(&sup[ia[i]]), group_b(&sub[ib[j]])) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                out[ib[j]] = Some(ia[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn longest_by_death<T: Interval>(x: &T, y: &T) -> Ordering {
    y.death_key().total_cmp(&x.death_key()).then(x.death_cell_key().cmp(&y.death_cell_key()))
}

fn longest_by_birth<T: Interval>(x: &T, y: &T) -> Ordering {
    x.birth().total_cmp(&y.birth()).then(x.birth_cell_key().cmp(&y.birth_cell_key()))
}

/// Matching induced by a surjection `M -> I`: bars with equal birth, paired
/// by decreasing death. Returns, for every bar of `sub`, its partner in `sup`.
pub fn match_by_birth<A: Interval, B: Interval>(sup: &[A], sub: &[B]) -> Vec<Option<usize>> {
    pair_groups(
        sup,
        sub,
        |a| (a.birth(), a.birth_cell_key()),
        |b| (b.birth(), b.birth_cell_key()),
        longest_by_death,
        longest_by_death,
    )
}

/// Matching induced by an injection `I -> N`: bars with equal death, paired
/// by increasing birth. Returns, for every bar of `sub`, its partner in `sup`.
pub fn match_by_death<A: Interval, B: Interval>(sub: &[B], sup: &[A]) -> Vec<Option<usize>> {
    pair_groups(
        sup,
        sub,
        |a| (a.death_key(), a.death_cell_key()),
        |b| (b.death_key(), b.death_cell_key()),
        longest_by_birth,
        longest_by_birth,
    )
}

/// Matched and unmatched bars of one homology dimension, as indices into the
/// prediction and ground-truth barcodes.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DimMatching {
    pub matched: Vec<(usize, usize)>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
}

impl DimMatching {
    pub fn num_unmatched(&self) -> usize {
        self.unmatched_pred.len() + self.unmatched_gt.len()
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BettiMatching {
    pub pred: Barcode,
    pub gt: Barcode,
    pub dims: [DimMatching; 2],
}

impl BettiMatching {
    pub fn dim(&self, dim: usize) -> &DimMatching {
        &self.dims[dim]
    }

    pub fn matched_bars(&self, dim: usize) -> impl Iterator<Item = (&Bar, &Bar)> + '_ {
        self.dims[dim]
            .matched
            .iter()
            .map(|&(p, g)| (&self.pred.bars()[p], &self.gt.bars()[g]))
    }

    pub fn unmatched_pred_bars(&self, dim: usize) -> impl Iterator<Item = &Bar> + '_ {
        self.dims[dim].unmatched_pred.iter().map(|&p| &self.pred.bars()[p])
    }

    pub fn unmatched_gt_bars(&self, dim: usize) -> impl Iterator<Item = &Bar> + '_ {
        self.dims[dim].unmatched_gt.iter().map(|&g| &self.gt.bars()[g])
    }

    /// Unmatched bars over both dimensions: the Betti matching error.
    pub fn num_unmatched(&self) -> usize {
        self.dims.iter().map(DimMatching::num_unmatched).sum()
    }

    /// Neither side carries any bar.
    pub fn is_degenerate(&self) -> bool {
        self.pred.is_empty() && self.gt.is_empty()
    }
}

/// Matched `(comparison index, target index)` pairs of one dimension, read
/// off an image barcode.
fn comparison_to_target(im: &ImageBarcode, dim: usize) -> Vec<(usize, usize)> {
    im.image
        .indexed_dim(dim)
        .into_iter()
        .map(|(i, _)| (im.comparison_partner[i], im.target_partner[i]))
        .collect()
}

/// Composes the two induced matchings through shared comparison bars.
pub fn compose_matchings(
    pred_links: &[(usize, usize)],
    gt_links: &[(usize, usize)],
    pred_in_dim: &[usize],
    gt_in_dim: &[usize],
) -> DimMatching {
    let gt_by_comparison: HashMap<usize, usize> = gt_links.iter().copied().collect();
    let mut matched: Vec<(usize, usize)> = pred_links
        .iter()
        .filter_map(|(c, p)| gt_by_comparison.get(c).map(|g| (*p, *g)))
        .collect();
    matched.sort_unstable();
    let pred_hit: HashSet<usize> = matched.iter().map(|m| m.0).collect();
    let gt_hit: HashSet<usize> = matched.iter().map(|m| m.1).collect();
    let unmatched_pred = pred_in_dim.iter().copied().filter(|p| !pred_hit.contains(p)).collect();
    let unmatched_gt = gt_in_dim.iter().copied().filter(|g| !gt_hit.contains(g)).collect();
    DimMatching {
        matched,
        unmatched_pred,
        unmatched_gt,
    }
}

/// Betti matching of a prediction filtration against a ground-truth one.
pub fn betti_match(pred: &Filtration, gt: &Filtration) -> Result<BettiMatching> {
    if !pred.same_shape(gt) {
        return Err(shape_error(pred, gt));
    }
    let comparison = pred.pointwise_max(gt)?;
    let pred_bc = compute_barcode(pred, Dims::BOTH);
    let gt_bc = compute_barcode(gt, Dims::BOTH);
    let cmp_bc = compute_barcode(&comparison, Dims::BOTH);
    let im_pred = link_image(image_pairing(&comparison, pred), cmp_bc.clone(), pred_bc)?;
    let im_gt = link_image(image_pairing(&comparison, gt), cmp_bc, gt_bc)?;

    let dims = [0, 1].map(|d| {
        let pred_in_dim: Vec<usize> = im_pred.target.indexed_dim(d).iter().map(|(i, _)| *i).collect();
        let gt_in_dim: Vec<usize> = im_gt.target.indexed_dim(d).iter().map(|(i, _)| *i).collect();
        compose_matchings(
            &comparison_to_target(&im_pred, d),
            &comparison_to_target(&im_gt, d),
            &pred_in_dim,
            &gt_in_dim,
        )
    });
    let out = BettiMatching {
        pred: im_pred.target,
        gt: im_gt.target,
        dims,
    };
    for d in 0..2 {
        let m = &out.dims[d];
        if m.matched.len() + m.unmatched_pred.len() != out.pred.dim(d).count()
            || m.matched.len() + m.unmatched_gt.len() != out.gt.dim(d).count()
        {
            return Err(Error::Internal(format!("matching counts inconsistent in dimension {d}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_filtration, FiltrationDirection, LikelihoodGrid};

    fn mask_filt(w: usize, h: usize, fg: &[u8]) -> Filtration {
        let grid = LikelihoodGrid::new(w, h, fg.iter().map(|&v| v as f64).collect()).unwrap();
        build_filtration(&grid, FiltrationDirection::Complement)
    }

    #[rustfmt::skip]
    const RING: [u8; 9] = [
        1, 1, 1,
        1, 0, 1,
        1, 1, 1,
    ];

    #[test]
    fn identical_ring_matches_everything() {
        let f = mask_filt(3, 3, &RING);
        let m = betti_match(&f, &f).unwrap();
        for d in 0..2 {
            assert_eq!(m.dim(d).matched.len(), 1);
            assert_eq!(m.dim(d).num_unmatched(), 0);
        }
        let (p, g) = m.matched_bars(1).next().unwrap();
        assert_eq!((p.birth, p.death, g.birth, g.death), (0.0, 1.0, 0.0, 1.0));
    }

    #[test]
    fn empty_prediction_leaves_gt_blob_unmatched() {
        let pred = mask_filt(4, 4, &[0; 16]);
        #[rustfmt::skip]
        let gt = mask_filt(4, 4, &[
            0, 0, 0, 0,
            0, 1, 1, 0,
            0, 1, 1, 0,
            0, 0, 0, 0,
        ]);
        let m = betti_match(&pred, &gt).unwrap();
        assert!(m.pred.is_empty());
        assert_eq!(m.gt.signature(), vec![(0, 0.0, 1.0, true)]);
        assert_eq!(m.dim(0).unmatched_gt.len(), 1);
        assert_eq!(m.num_unmatched(), 1);
    }

    #[test]
    fn disjoint_blobs_do_not_match() {
        #[rustfmt::skip]
        let pred = mask_filt(5, 1, &[1, 1, 0, 0, 0]);
        let gt = mask_filt(5, 1, &[0, 0, 0, 1, 1]);
        let m = betti_match(&pred, &gt).unwrap();
        assert_eq!(m.dim(0).matched.len(), 0);
        assert_eq!(m.num_unmatched(), 2);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = mask_filt(2, 2, &[0; 4]);
        let b = mask_filt(4, 1, &[0; 4]);
        assert!(matches!(betti_match(&a, &b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn death_groups_pair_longest_first() {
        let bar = |b: f64, d: f64| Bar {
            dim: 0,
            birth: b,
            death: d,
            birth_cell: crate::grid::CellId(0),
            death_cell: Some(crate::grid::CellId(1)),
        };
        let sub = [bar(0.0, 0.7)];
        let sup = [bar(0.5, 0.7), bar(0.0, 0.7)];
        assert_eq!(match_by_death(&sub, &sup), vec![Some(1)]);
        let im = [bar(0.2, 0.4)];
        let m = [bar(0.2, 0.3), bar(0.2, 0.9)];
        assert_eq!(match_by_birth(&m, &im), vec![Some(1)]);
    }

    #[test]
    fn equal_values_pair_by_shared_cell() {
        let bar = |b: f64, d: f64, bc: u32, dc: u32| Bar {
            dim: 1,
            birth: b,
            death: d,
            birth_cell: crate::grid::CellId(bc),
            death_cell: Some(crate::grid::CellId(dc)),
        };
        let sup = [bar(0.5, 0.75, 7, 40), bar(0.5, 0.75, 3, 41)];
        let sub = [bar(0.5, 0.6, 3, 30)];
        assert_eq!(match_by_birth(&sup, &sub), vec![Some(1)]);
        let target = [bar(0.25, 0.6, 9, 31), bar(0.0, 0.6, 8, 30)];
        assert_eq!(match_by_death(&sub, &target), vec![Some(1)]);
    }
}
