//! Brute-force reference computations used to validate the fast paths.
//!
//! Barcodes are recovered from persistent Betti numbers `r(s, t)`, each the
//! GF(2) rank of an inclusion-induced map, evaluated at every pair of distinct
//! filtration values and turned into multiplicities by inclusion-exclusion.
//! Nothing here shares code with the union-find or the column reduction.

pub mod gf2;
pub mod suite;

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::{CellId, Filtration, LikelihoodGrid};
use crate::matching::{match_by_birth, match_by_death, Interval};
use crate::persistence::ESSENTIAL_DEATH;
use gf2::{BitVector, BooleanMatrix, EchelonBasis};

pub use gf2::gf2_rank;

/// Largest grid side accepted by [`barcode_oracle`].
pub const BARCODE_ORACLE_CAP: usize = 10;
/// Largest grid side accepted by [`image_barcode_oracle`].
pub const IMAGE_ORACLE_CAP: usize = 8;

/// A bar without provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleBar {
    pub dim: u8,
    pub birth: f64,
    pub death: f64,
    pub essential: bool,
}

impl Interval for OracleBar {
    fn birth(&self) -> f64 {
        self.birth
    }

    fn death_key(&self) -> f64 {
        if self.essential {
            f64::INFINITY
        } else {
            self.death
        }
    }
}

/// Sorted `(dim, birth, death, essential)` tuples, comparable with
/// [`crate::persistence::Barcode::signature`].
pub fn signature(bars: &[OracleBar]) -> Vec<(u8, f64, f64, bool)> {
    let mut v: Vec<_> = bars.iter().map(|b| (b.dim, b.birth, b.death, b.essential)).collect();
    v.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    v
}

fn check_cap(filt: &Filtration, cap: usize) -> Result<()> {
    if filt.width() > cap || filt.height() > cap {
        return Err(Error::TooLargeForOracle {
            width: filt.width(),
            height: filt.height(),
            cap,
        });
    }
    Ok(())
}

/// Boundary of every `dim + 1` cell as a vector over the `dim` cells.
struct BoundaryData {
    low_cells: Vec<CellId>,
    high_cells: Vec<CellId>,
    columns: Vec<BitVector>,
}

fn boundary_data(filt: &Filtration, dim: usize) -> BoundaryData {
    let grid = filt.grid();
    let mut local = vec![usize::MAX; grid.num_cells()];
    let low_cells: Vec<CellId> = grid.cells_of_dim(dim).map(CellId).collect();
    for (i, c) in low_cells.iter().enumerate() {
        local[c.index()] = i;
    }
    let high_cells: Vec<CellId> = grid.cells_of_dim(dim + 1).map(CellId).collect();
    let columns = high_cells
        .iter()
        .map(|&c| {
            let mut v = BitVector::zeros(low_cells.len());
            for face in grid.boundary(c).iter() {
                v.flip(local[face.index()]);
            }
            v
        })
        .collect();
    BoundaryData {
        low_cells,
        high_cells,
        columns,
    }
}

/// Rank of `H_dim(domain_{t_i}) -> H_dim(codomain_{t_j})` for `i <= j`.
///
/// Uses `dim(Z_i ∩ B_j) = dim B_j - rank(B_j projected off K_i)`, valid
/// because boundaries are cycles.
fn persistent_betti(domain: &Filtration, codomain: &Filtration, dim: usize, thresholds: &[f64]) -> Vec<Vec<i64>> {
    let m = thresholds.len();
    let data = boundary_data(domain, dim);
    let n_low = data.low_cells.len();

    // dim Z of the domain sublevel sets
    let lower = if dim > 0 { Some(boundary_data(domain, dim - 1)) } else { None };
    let cycle_dim: Vec<i64> = thresholds
        .iter()
        .map(|&t| {
            let inside: Vec<usize> = (0..n_low).filter(|&k| domain.value(data.low_cells[k]) <= t).collect();
            let rank = match &lower {
                None => 0,
                Some(lo) => {
                    let mut basis = EchelonBasis::new(lo.low_cells.len());
                    inside
                        .iter()
                        .filter(|&&k| basis.insert(lo.columns[k].clone()))
                        .count()
                }
            };
            inside.len() as i64 - rank as i64
        })
        .collect();

    let codomain_value = |c: CellId| codomain.value(c);
    let boundary_dim: Vec<i64> = thresholds
        .iter()
        .map(|&t| {
            let mut basis = EchelonBasis::new(n_low);
            for (k, &c) in data.high_cells.iter().enumerate() {
                if codomain_value(c) <= t {
                    basis.insert(data.columns[k].clone());
                }
            }
            basis.rank() as i64
        })
        .collect();

    let mut high_sorted: Vec<usize> = (0..data.high_cells.len()).collect();
    high_sorted.sort_by(|&a, &b| codomain_value(data.high_cells[a]).total_cmp(&codomain_value(data.high_cells[b])));

    let mut r = vec![vec![0i64; m]; m];
    for i in 0..m {
        let outside: Vec<bool> = data
            .low_cells
            .iter()
            .map(|&c| domain.value(c) > thresholds[i])
            .collect();
        let mut basis = EchelonBasis::new(n_low);
        let mut next = 0;
        for j in 0..m {
            while next < high_sorted.len() && codomain_value(data.high_cells[high_sorted[next]]) <= thresholds[j] {
                let mut v = data.columns[high_sorted[next]].clone();
                for (k, out) in outside.iter().enumerate() {
                    if !out && v.get(k) {
                        v.flip(k);
                    }
                }
                basis.insert(v);
                next += 1;
            }
            if j >= i {
                r[i][j] = cycle_dim[i] - boundary_dim[j] + basis.rank() as i64;
            }
        }
    }
    r
}

fn bars_from_ranks(r: &[Vec<i64>], thresholds: &[f64], dim: u8, out: &mut Vec<OracleBar>) -> Result<()> {
    let m = thresholds.len();
    let rk = |i: isize, j: usize| if i < 0 { 0 } else { r[i as usize][j] };
    for i in 0..m {
        let ii = i as isize;
        for j in i + 1..m {
            let mu = rk(ii, j - 1) - rk(ii - 1, j - 1) - rk(ii, j) + rk(ii - 1, j);
            if mu < 0 {
                return Err(Error::Internal(format!("negative multiplicity {mu} at ({i}, {j})")));
            }
            for _ in 0..mu {
                out.push(OracleBar {
                    dim,
                    birth: thresholds[i],
                    death: thresholds[j],
                    essential: false,
                });
            }
        }
        let mu = rk(ii, m - 1) - rk(ii - 1, m - 1);
        if mu < 0 {
            return Err(Error::Internal(format!("negative essential multiplicity at {i}")));
        }
        if thresholds[i] < ESSENTIAL_DEATH {
            for _ in 0..mu {
                out.push(OracleBar {
                    dim,
                    birth: thresholds[i],
                    death: ESSENTIAL_DEATH,
                    essential: true,
                });
            }
        }
    }
    Ok(())
}

fn rank_oracle(domain: &Filtration, codomain: &Filtration) -> Result<Vec<OracleBar>> {
    let mut thresholds: Vec<f64> = domain.values().iter().chain(codomain.values()).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut bars = Vec::new();
    for dim in 0..2 {
        let r = persistent_betti(domain, codomain, dim, &thresholds);
        bars_from_ranks(&r, &thresholds, dim as u8, &mut bars)?;
    }
    Ok(bars)
}

/// Reference barcode (dimensions 0 and 1) of a filtration of at most 10x10.
pub fn barcode_oracle(filt: &Filtration) -> Result<Vec<OracleBar>> {
    check_cap(filt, BARCODE_ORACLE_CAP)?;
    rank_oracle(filt, filt)
}

/// Reference image barcode of `H(comparison_t) -> H(target_t)`.
pub fn image_barcode_oracle(comparison: &Filtration, target: &Filtration) -> Result<Vec<OracleBar>> {
    check_cap(comparison, IMAGE_ORACLE_CAP)?;
    if !comparison.same_shape(target) {
        return Err(crate::grid::shape_error(comparison, target));
    }
    let (c, t) = (comparison.vertex_values(), target.vertex_values());
    if let Some(index) = (0..c.len()).find(|&i| c[i] < t[i]) {
        return Err(Error::NotDominating {
            index,
            comparison: c[index],
            target: t[index],
        });
    }
    rank_oracle(comparison, target)
}

/// Matched pair of bar values: `((birth, death, essential), (birth, death, essential))`.
pub type ValuePair = ((f64, f64, bool), (f64, f64, bool));

/// An oracle bar of a perturbed filtration, carrying its unperturbed values.
#[derive(Debug, Clone, Copy)]
struct KeyedBar {
    original: OracleBar,
    perturbed: OracleBar,
}

impl Interval for KeyedBar {
    fn birth(&self) -> f64 {
        self.perturbed.birth
    }

    fn death_key(&self) -> f64 {
        self.perturbed.death_key()
    }
}

/// Matched value pairs and unmatched `(pred, gt)` counts, per dimension.
pub type OracleMatching = ([Vec<ValuePair>; 2], [(usize, usize); 2]);

/// Betti matching recomposed from oracle barcodes, as value pairs per dimension,
/// plus the unmatched counts `(pred, gt)` per dimension.
///
/// Equal values are resolved by cell id, as in the fast path: the oracle runs
/// on copies of the filtrations perturbed by a multiple of the cell id far
/// below the smallest value gap, where every endpoint belongs to one cell.
/// Bars are then mapped back and the ones of zero length dropped.
pub fn betti_match_oracle(pred: &Filtration, gt: &Filtration) -> Result<OracleMatching> {
    let comparison = pred.pointwise_max(gt)?;
    let mut levels: Vec<f64> = pred.values().iter().chain(gt.values()).copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let gap = levels.windows(2).map(|w| w[1] - w[0]).fold(1.0, f64::min);
    let scale = gap / (4.0 * pred.grid().num_cells() as f64);
    // each perturbed value lies less than a quarter gap above its original
    let restore = |v: f64| levels[levels.partition_point(|&l| l <= v).saturating_sub(1)];
    let keyed = |bars: Vec<OracleBar>| -> Vec<KeyedBar> {
        bars.into_iter()
            .map(|p| KeyedBar {
                original: OracleBar {
                    birth: restore(p.birth),
                    death: if p.essential { p.death } else { restore(p.death) },
                    ..p
                },
                perturbed: p,
            })
            .filter(|k| k.original.birth < k.original.death)
            .collect()
    };
    let (pp, gp, cp) = (pred.perturbed(scale), gt.perturbed(scale), comparison.perturbed(scale));
    let bp = keyed(barcode_oracle(&pp)?);
    let bg = keyed(barcode_oracle(&gp)?);
    let bc = keyed(barcode_oracle(&cp)?);
    let ip = keyed(image_barcode_oracle(&cp, &pp)?);
    let ig = keyed(image_barcode_oracle(&cp, &gp)?);
    let key = |b: &KeyedBar| (b.original.birth, b.original.death, b.original.essential);
    let mut pairs: [Vec<ValuePair>; 2] = [Vec::new(), Vec::new()];
    let mut unmatched = [(0, 0); 2];
    for dim in 0..2u8 {
        let sel = |v: &[KeyedBar]| v.iter().copied().filter(|b| b.original.dim == dim).collect::<Vec<_>>();
        let (bp, bg, bc, ip, ig) = (sel(&bp), sel(&bg), sel(&bc), sel(&ip), sel(&ig));
        let link = |im: &[KeyedBar], target: &[KeyedBar]| -> Result<Vec<Option<usize>>> {
            let by_birth = match_by_birth(&bc, im);
            let by_death = match_by_death(im, target);
            let mut from_cmp = vec![None; bc.len()];
            for k in 0..im.len() {
                match (by_birth[k], by_death[k]) {
                    (Some(c), Some(t)) => from_cmp[c] = Some(t),
                    _ => return Err(Error::Internal("oracle image bar without partner".into())),
                }
            }
            Ok(from_cmp)
        };
        let lp = link(&ip, &bp)?;
        let lg = link(&ig, &bg)?;
        let mut matched = Vec::new();
        for c in 0..bc.len() {
            if let (Some(p), Some(g)) = (lp[c], lg[c]) {
                matched.push((key(&bp[p]), key(&bg[g])));
            }
        }
        unmatched[dim as usize] = (bp.len() - matched.len(), bg.len() - matched.len());
        pairs[dim as usize] = matched;
    }
    Ok((pairs, unmatched))
}

/// `(b0, b1)` of the foreground of a binary mask by GF(2) ranks of the
/// boundary operators, cross-checked against component labelling and the
/// Euler characteristic.
pub fn homology_ranks(mask: &LikelihoodGrid) -> Result<(usize, usize)> {
    if let Some(index) = mask.values().iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinaryMask {
            index,
            value: mask.values()[index],
        });
    }
    let (w, h) = (mask.width(), mask.height());
    let fg = |x: usize, y: usize| mask.get(x, y) == 1.0;
    let mut vertex_id = vec![usize::MAX; w * h];
    let mut nv = 0;
    for y in 0..h {
        for x in 0..w {
            if fg(x, y) {
                vertex_id[y * w + x] = nv;
                nv += 1;
            }
        }
    }
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut edge_id = std::collections::HashMap::new();
    for y in 0..h {
        for x in 0..w {
            for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                if nx < w && ny < h && fg(x, y) && fg(nx, ny) {
                    edge_id.insert((y * w + x, ny * w + nx), edges.len());
                    edges.push((y * w + x, ny * w + nx));
                }
            }
        }
    }
    let mut faces: Vec<[usize; 4]> = Vec::new();
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let (a, b, c, d) = (y * w + x, y * w + x + 1, (y + 1) * w + x, (y + 1) * w + x + 1);
            if [a, b, c, d].iter().all(|&p| mask.values()[p] == 1.0) {
                faces.push([edge_id[&(a, b)], edge_id[&(c, d)], edge_id[&(a, c)], edge_id[&(b, d)]]);
            }
        }
    }
    let mut d1 = BooleanMatrix::zeros(edges.len(), nv);
    for (e, &(a, b)) in edges.iter().enumerate() {
        d1.set(e, vertex_id[a], true);
        d1.set(e, vertex_id[b], true);
    }
    let mut d2 = BooleanMatrix::zeros(faces.len(), edges.len());
    for (f, es) in faces.iter().enumerate() {
        for &e in es {
            d2.set(f, e, true);
        }
    }
    let (r1, r2) = (gf2_rank(&d1), gf2_rank(&d2));
    let b0 = nv - r1;
    let b1 = edges.len() - r1 - r2;

    // second route: flood fill and Euler characteristic
    let mut seen = vec![false; w * h];
    let mut components = 0usize;
    for start in 0..w * h {
        if seen[start] || mask.values()[start] != 1.0 {
            continue;
        }
        components += 1;
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(p) = queue.pop_front() {
            let (x, y) = (p % w, p / w);
            let mut nbrs = Vec::with_capacity(4);
            if x > 0 {
                nbrs.push(p - 1);
            }
            if x + 1 < w {
                nbrs.push(p + 1);
            }
            if y > 0 {
                nbrs.push(p - w);
            }
            if y + 1 < h {
                nbrs.push(p + w);
            }
            for q in nbrs {
                if !seen[q] && mask.values()[q] == 1.0 {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    let chi = nv as i64 - edges.len() as i64 + faces.len() as i64;
    let euler_b1 = components as i64 - chi;
    if components != b0 || euler_b1 != b1 as i64 {
        return Err(Error::Internal(format!(
            "oracle routes disagree: ranks give ({b0}, {b1}), labelling gives ({components}, {euler_b1})"
        )));
    }
    Ok((b0, b1))
}
