//! Randomised equivalence checks of the fast paths against the oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::Filtration;
use crate::matching::{betti_match, BettiMatching};
use crate::oracle::{barcode_oracle, betti_match_oracle, image_barcode_oracle, signature, ValuePair, IMAGE_ORACLE_CAP};
use crate::persistence::{compute_barcode, image_barcode, Dims};

const LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Random filtration with values from the five-level set (`discrete`) or
/// uniform on `[0, 1)`.
pub fn random_filtration(rng: &mut ChaCha8Rng, width: usize, height: usize, discrete: bool) -> Filtration {
    let values: Vec<f64> = (0..width * height)
        .map(|_| {
            if discrete {
                LEVELS[rng.random_range(0..LEVELS.len())]
            } else {
                rng.random()
            }
        })
        .collect();
    Filtration::from_vertex_values(width, height, &values).expect("sampled values are valid")
}

fn sort_pairs(v: &mut [ValuePair]) {
    let key = |a: &(f64, f64, bool), b: &(f64, f64, bool)| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2));
    v.sort_by(|a, b| key(&a.0, &b.0).then(key(&a.1, &b.1)));
}

/// Matched value pairs per dimension (sorted) and unmatched counts; the form
/// returned by [`betti_match_oracle`].
pub fn matching_signature(m: &BettiMatching) -> ([Vec<ValuePair>; 2], [(usize, usize); 2]) {
    let mut pairs: [Vec<ValuePair>; 2] = [Vec::new(), Vec::new()];
    let mut unmatched = [(0, 0); 2];
    for dim in 0..2 {
        pairs[dim] = m
            .matched_bars(dim)
            .map(|(p, g)| ((p.birth, p.death, p.is_essential()), (g.birth, g.death, g.is_essential())))
            .collect();
        sort_pairs(&mut pairs[dim]);
        unmatched[dim] = (m.dim(dim).unmatched_pred.len(), m.dim(dim).unmatched_gt.len());
    }
    (pairs, unmatched)
}

pub fn barcode_agrees(f: &Filtration) -> Result<bool> {
    Ok(compute_barcode(f, Dims::BOTH).signature() == signature(&barcode_oracle(f)?))
}

pub fn image_agrees(comparison: &Filtration, target: &Filtration) -> Result<bool> {
    let fast = image_barcode(comparison, target)?;
    Ok(fast.image.signature() == signature(&image_barcode_oracle(comparison, target)?))
}

pub fn matching_agrees(pred: &Filtration, gt: &Filtration) -> Result<bool> {
    let (mut pairs, unmatched) = betti_match_oracle(pred, gt)?;
    for p in pairs.iter_mut() {
        sort_pairs(p);
    }
    Ok(matching_signature(&betti_match(pred, gt)?) == (pairs, unmatched))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckCount {
    pub passed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub size: usize,
    pub count: usize,
    pub seed: u64,
    pub barcode: CheckCount,
    /// Skipped (total 0) when `size` exceeds the image oracle cap.
    pub image: CheckCount,
    pub matching: CheckCount,
    /// Indices of failing instances, as `kind:index`.
    pub failures: Vec<String>,
}

impl SuiteSummary {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs `count` random `size x size` instances, alternating discrete and
/// continuous values.
pub fn run_suite(size: usize, count: usize, seed: u64) -> Result<SuiteSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let with_image = size <= IMAGE_ORACLE_CAP;
    let mut s = SuiteSummary {
        size,
        count,
        seed,
        barcode: CheckCount { passed: 0, total: 0 },
        image: CheckCount { passed: 0, total: 0 },
        matching: CheckCount { passed: 0, total: 0 },
        failures: Vec::new(),
    };
    let tally = |c: &mut CheckCount, ok: bool, kind: &str, i: usize, failures: &mut Vec<String>| {
        c.total += 1;
        if ok {
            c.passed += 1;
        } else {
            failures.push(format!("{kind}:{i}"));
        }
    };
    for i in 0..count {
        let discrete = i % 2 == 0;
        let pred = random_filtration(&mut rng, size, size, discrete);
        let gt = random_filtration(&mut rng, size, size, discrete);
        tally(&mut s.barcode, barcode_agrees(&pred)?, "barcode", i, &mut s.failures);
        if with_image {
            let comparison = pred.pointwise_max(&gt)?;
            tally(&mut s.image, image_agrees(&comparison, &pred)?, "image", i, &mut s.failures);
            tally(&mut s.matching, matching_agrees(&pred, &gt)?, "matching", i, &mut s.failures);
        }
    }
    Ok(s)
}
