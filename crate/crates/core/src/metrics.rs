//! Evaluation metrics on discrete segmentations and the model-selection score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_filtration, FiltrationDirection, LabelGrid, LikelihoodGrid, MulticlassPrediction};
use crate::losses::soft_skeleton;
use crate::matching::betti_match;
use crate::persistence::betti_numbers;

/// Per-pixel argmax over channels, ties to the lowest class.
pub fn binarize(pred: &MulticlassPrediction) -> LabelGrid {
    let plane = pred.width() * pred.height();
    let labels = (0..plane)
        .map(|i| {
            let mut best = 0;
            for c in 1..pred.num_classes() {
                if pred.values()[c * plane + i] > pred.values()[best * plane + i] {
                    best = c;
                }
            }
            best as u32
        })
        .collect();
    LabelGrid::new(pred.width(), pred.height(), labels).expect("prediction shape is non-empty")
}

fn check_pair(pred: &LikelihoodGrid, gt: &LikelihoodGrid) -> Result<()> {
    if !pred.same_shape(gt) {
        return Err(Error::ShapeMismatch {
            left: format!("{}x{}", pred.width(), pred.height()),
            right: format!("{}x{}", gt.width(), gt.height()),
        });
    }
    for m in [pred, gt] {
        if let Some(index) = m.values().iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::NonBinaryMask {
                index,
                value: m.values()[index],
            });
        }
    }
    Ok(())
}

/// Unmatched bars in dimensions 0 and 1 after Betti matching the two masks.
pub fn betti_matching_error(pred: &LikelihoodGrid, gt: &LikelihoodGrid) -> Result<usize> {
    check_pair(pred, gt)?;
    let fp = build_filtration(pred, FiltrationDirection::Complement);
    let fg = build_filtration(gt, FiltrationDirection::Complement);
    Ok(betti_match(&fp, &fg)?.num_unmatched())
}

pub fn betti_number_error(pred: &LikelihoodGrid, gt: &LikelihoodGrid, dim: usize) -> Result<usize> {
    check_pair(pred, gt)?;
    if dim > 1 {
        return Err(Error::InvalidConfig(format!("homology dimension {dim} is not available in 2D")));
    }
    let (p, g) = (betti_numbers(pred)?, betti_numbers(gt)?);
    let pick = |b: (usize, usize)| if dim == 0 { b.0 } else { b.1 };
    Ok(pick(p).abs_diff(pick(g)))
}

fn count(m: &[f64]) -> f64 {
    m.iter().filter(|&&v| v == 1.0).count() as f64
}

fn overlap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| **x == 1.0 && **y == 1.0).count() as f64
}

pub fn dice_score(pred: &LikelihoodGrid, gt: &LikelihoodGrid) -> Result<f64> {
    check_pair(pred, gt)?;
    let (p, g) = (count(pred.values()), count(gt.values()));
    if p + g == 0.0 {
        return Ok(1.0);
    }
    Ok(2.0 * overlap(pred.values(), gt.values()) / (p + g))
}

fn padded(m: &LikelihoodGrid) -> LikelihoodGrid {
    let (w, h) = (m.width() + 2, m.height() + 2);
    let mut v = vec![0.0; w * h];
    for y in 0..m.height() {
        for x in 0..m.width() {
            v[(y + 1) * w + x + 1] = m.get(x, y);
        }
    }
    LikelihoodGrid::new(w, h, v).expect("padding keeps values in range")
}

/// Skeleton of a binary mask as used by [`cldice_score`].
///
/// The mask is framed by one background pixel so that structures touching the
/// border are thinned like interior ones; the frame is cropped afterwards.
pub fn binary_skeleton(mask: &LikelihoodGrid) -> Result<LikelihoodGrid> {
    let k = mask.width().max(mask.height()).div_ceil(2).max(1);
    let s = soft_skeleton(&padded(mask), k)?;
    let w = s.width();
    let values = (0..mask.height())
        .flat_map(|y| (0..mask.width()).map(move |x| (x, y)))
        .map(|(x, y)| s.values()[(y + 1) * w + x + 1])
        .collect();
    LikelihoodGrid::new(mask.width(), mask.height(), values)
}

pub fn cldice_score(pred: &LikelihoodGrid, gt: &LikelihoodGrid) -> Result<f64> {
    check_pair(pred, gt)?;
    let (np, ng) = (count(pred.values()), count(gt.values()));
    if np == 0.0 && ng == 0.0 {
        return Ok(1.0);
    }
    if np == 0.0 || ng == 0.0 {
        return Ok(0.0);
    }
    let (sp, sg) = (binary_skeleton(pred)?, binary_skeleton(gt)?);
    let ratio = |s: &LikelihoodGrid, m: &LikelihoodGrid| {
        let total = count(s.values());
        if total == 0.0 {
            0.0
        } else {
            overlap(s.values(), m.values()) / total
        }
    };
    let tprec = ratio(&sp, gt);
    let tsens = ratio(&sg, pred);
    if tprec + tsens == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * tprec * tsens / (tprec + tsens))
}

/// `dice + 1 - min(1, bm_error / gt_betti_sum)`, with the second term 1 for a
/// topologically empty ground truth matched exactly and 0 otherwise.
pub fn selection_score(dice: f64, bm_error: f64, gt_betti_sum: f64) -> f64 {
    let topo = if gt_betti_sum == 0.0 {
        if bm_error == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - (bm_error / gt_betti_sum).min(1.0)
    };
    dice + topo
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub dice: f64,
    pub cldice: f64,
    pub bm_error: usize,
    pub b0_error: usize,
    pub b1_error: usize,
    pub gt_betti: (usize, usize),
    pub selection_score: f64,
    /// Both masks are empty for this class.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub dice: f64,
    pub cldice: f64,
    pub bm_error: f64,
    pub b0_error: f64,
    pub b1_error: f64,
    pub selection_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub num_classes: usize,
    /// Foreground classes `1..num_classes`.
    pub per_class: Vec<ClassMetrics>,
    pub macro_average: MacroMetrics,
    pub total_bm_error: usize,
    pub total_gt_betti: usize,
}

/// Mean that does not depend on the order of `values`.
fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn evaluate_class(pred: &LabelGrid, gt: &LabelGrid, class: u32) -> Result<ClassMetrics> {
    let (p, g) = (pred.mask(class), gt.mask(class));
    let (bp, bg) = (betti_numbers(&p)?, betti_numbers(&g)?);
    let dice = dice_score(&p, &g)?;
    let bm_error = betti_matching_error(&p, &g)?;
    let gt_sum = bg.0 + bg.1;
    Ok(ClassMetrics {
        class: class as usize,
        dice,
        cldice: cldice_score(&p, &g)?,
        bm_error,
        b0_error: bp.0.abs_diff(bg.0),
        b1_error: bp.1.abs_diff(bg.1),
        gt_betti: bg,
        selection_score: selection_score(dice, bm_error as f64, gt_sum as f64),
        empty: count(p.values()) == 0.0 && count(g.values()) == 0.0,
    })
}

/// Recomputes the macro block from per-class rows.
pub fn macro_average(per_class: &[ClassMetrics]) -> (MacroMetrics, usize, usize) {
    let total_bm: usize = per_class.iter().map(|c| c.bm_error).sum();
    let total_beta: usize = per_class.iter().map(|c| c.gt_betti.0 + c.gt_betti.1).sum();
    let dice = mean(per_class.iter().map(|c| c.dice));
    let m = MacroMetrics {
        dice,
        cldice: mean(per_class.iter().map(|c| c.cldice)),
        bm_error: mean(per_class.iter().map(|c| c.bm_error as f64)),
        b0_error: mean(per_class.iter().map(|c| c.b0_error as f64)),
        b1_error: mean(per_class.iter().map(|c| c.b1_error as f64)),
        selection_score: selection_score(dice, total_bm as f64, total_beta as f64),
    };
    (m, total_bm, total_beta)
}

/// Metrics of discrete label maps over foreground classes `1..num_classes`.
pub fn evaluate_labels(pred: &LabelGrid, gt: &LabelGrid, num_classes: usize) -> Result<MetricsReport> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::ShapeMismatch {
            left: format!("{}x{}", pred.width(), pred.height()),
            right: format!("{}x{}", gt.width(), gt.height()),
        });
    }
    if num_classes < 2 {
        return Err(Error::TooFewClasses(num_classes));
    }
    for l in [pred, gt] {
        if l.max_label() as usize >= num_classes {
            return Err(Error::ClassOutOfRange {
                class: l.max_label() as usize,
                num_classes,
            });
        }
    }
    let per_class = (1..num_classes as u32)
        .map(|c| evaluate_class(pred, gt, c))
        .collect::<Result<Vec<_>>>()?;
    let (macro_average, total_bm_error, total_gt_betti) = macro_average(&per_class);
    Ok(MetricsReport {
        num_classes,
        per_class,
        macro_average,
        total_bm_error,
        total_gt_betti,
    })
}

/// Metrics of a soft prediction after argmax binarization.
pub fn evaluate(pred: &MulticlassPrediction, gt: &LabelGrid) -> Result<MetricsReport> {
    evaluate_labels(&binarize(pred), gt, pred.num_classes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::one_hot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mask(rows: &[&str]) -> LikelihoodGrid {
        let r: Vec<Vec<f64>> = rows
            .iter()
            .map(|s| s.chars().map(|c| if c == '#' { 1.0 } else { 0.0 }).collect())
            .collect();
        LikelihoodGrid::from_rows(&r).unwrap()
    }

    #[test]
    fn binarize_ties_go_low() {
        let u = MulticlassPrediction::uniform(3, 4, 2).unwrap();
        assert!(binarize(&u).labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn binarize_follows_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, w, h) = (4, 5, 3);
        let mut vals = vec![0.0; n * w * h];
        for i in 0..w * h {
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
            let s: f64 = raw.iter().sum();
            for c in 0..n {
                vals[c * w * h + i] = raw[c] / s;
            }
        }
        let p = MulticlassPrediction::new(n, w, h, vals).unwrap();
        let b = binarize(&p);
        for i in 0..w * h {
            let l = b.labels()[i] as usize;
            for c in 0..n {
                assert!(p.values()[c * w * h + i] <= p.values()[l * w * h + i]);
            }
        }
    }

    #[test]
    fn bm_error_two_blobs_vs_one() {
        let gt = mask(&["......", ".##...", ".##...", "......", "......", "......"]);
        let pred = mask(&["......", ".##...", ".##...", "......", "....##", "....##"]);
        assert_eq!(betti_matching_error(&pred, &gt).unwrap(), 1);
        assert_eq!(betti_number_error(&pred, &gt, 0).unwrap(), 1);
        assert_eq!(betti_number_error(&pred, &gt, 1).unwrap(), 0);
    }

    #[test]
    fn bm_error_ring_vs_disk() {
        let gt = mask(&[".....", ".###.", ".###.", ".###.", "....."]);
        let pred = mask(&[".....", ".###.", ".#.#.", ".###.", "....."]);
        assert_eq!(betti_matching_error(&pred, &gt).unwrap(), 1);
        assert_eq!(betti_number_error(&pred, &gt, 1).unwrap(), 1);
    }

    #[test]
    fn dice_cases() {
        let p = mask(&["##", "##"]);
        let g = mask(&["#.", "#."]);
        assert!((dice_score(&p, &g).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let e = mask(&["..", ".."]);
        assert_eq!(dice_score(&e, &e).unwrap(), 1.0);
        assert_eq!(dice_score(&p, &e).unwrap(), 0.0);
        assert_eq!(cldice_score(&e, &e).unwrap(), 1.0);
        assert_eq!(cldice_score(&p, &e).unwrap(), 0.0);
        assert_eq!(cldice_score(&p, &p).unwrap(), 1.0);
    }

    #[test]
    fn cldice_tubular_fixture() {
        // gt: a horizontal 3-thick tube; pred: only its left half
        let gt = mask(&["........", "########", "########", "########", "........"]);
        let pred = mask(&["........", "####....", "####....", "####....", "........"]);
        let sg = binary_skeleton(&gt).unwrap();
        let sp = binary_skeleton(&pred).unwrap();
        let cnt = |m: &LikelihoodGrid| m.values().iter().filter(|&&v| v == 1.0).count() as f64;
        let inter = |a: &LikelihoodGrid, b: &LikelihoodGrid| {
            a.values().iter().zip(b.values()).filter(|(x, y)| **x == 1.0 && **y == 1.0).count() as f64
        };
        let tprec = inter(&sp, &gt) / cnt(&sp);
        let tsens = inter(&sg, &pred) / cnt(&sg);
        let expected = 2.0 * tprec * tsens / (tprec + tsens);
        assert_eq!(cldice_score(&pred, &gt).unwrap(), expected);
        assert_eq!(tprec, 1.0);
        assert!(tsens < 1.0);
    }

    #[test]
    fn selection_score_cases() {
        assert_eq!(selection_score(0.9, 0.0, 3.0), 1.9);
        assert_eq!(selection_score(0.7, 5.0, 3.0), 0.7);
        assert_eq!(selection_score(0.8, 1.0, 4.0), 1.55);
        assert_eq!(selection_score(0.4, 0.0, 0.0), 1.4);
        assert_eq!(selection_score(0.4, 2.0, 0.0), 0.4);
    }

    #[test]
    fn identical_inputs_are_the_fixed_point() {
        let gt = LabelGrid::from_rows(&[vec![0, 1, 1, 0], vec![2, 2, 0, 0], vec![0, 2, 0, 1]]).unwrap();
        let r = evaluate(&one_hot(&gt, 4).unwrap(), &gt).unwrap();
        assert_eq!(r.per_class.len(), 3);
        let m = &r.macro_average;
        assert_eq!((m.dice, m.cldice, m.bm_error, m.b0_error, m.b1_error, m.selection_score), (1.0, 1.0, 0.0, 0.0, 0.0, 2.0));
        assert!(r.per_class[2].empty);
    }

    #[test]
    fn rejects_non_binary_mask() {
        let p = LikelihoodGrid::constant(2, 2, 0.5).unwrap();
        assert!(dice_score(&p, &p).is_err());
    }
}
