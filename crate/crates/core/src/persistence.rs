//! Persistence barcodes of lower-star cubical filtrations, and image barcodes
//! of the map induced by an inclusion of sublevel sets.
//!
//! Both are computed by one pairing routine parametrised by a *domain*
//! filtration (which orders pivots and supplies birth values) and a *codomain*
//! filtration (which orders columns and supplies death values). With domain
//! equal to codomain this is ordinary persistence.
//!
//! Dimension 0 uses a union-find with the elder rule. Dimension 1 reduces the
//! square columns over GF(2); rows of domain-negative edges (those that merged
//! two components) are dropped before reduction, since the lowest entry of a
//! cycle is always a positive edge.

use crate::error::{Error, Result};
use crate::grid::{CellId, CubicalGrid, Filtration, LikelihoodGrid};
use crate::matching::{match_by_birth, match_by_death};

/// Death value assigned to classes that never die.
pub const ESSENTIAL_DEATH: f64 = 1.0;

/// One persistence interval with the cells that realise its endpoints.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Bar {
    pub dim: u8,
    pub birth: f64,
    pub death: f64,
    /// A vertex for dimension 0, an edge for dimension 1.
    pub birth_cell: CellId,
    /// An edge for dimension 0, a square for dimension 1, `None` if essential.
    pub death_cell: Option<CellId>,
}

impl Bar {
    pub fn is_essential(&self) -> bool {
        self.death_cell.is_none()
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    /// Death used for ordering and grouping: essential classes sort after
    /// every finite death, even one at exactly [`ESSENTIAL_DEATH`].
    pub fn death_key(&self) -> f64 {
        if self.is_essential() {
            f64::INFINITY
        } else {
            self.death
        }
    }
}

/// Which homology dimensions to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub zero: bool,
    pub one: bool,
}

impl Dims {
    pub const BOTH: Dims = Dims {
        zero: true,
        one: true,
    };
    pub const ZERO: Dims = Dims {
        zero: true,
        one: false,
    };
    pub const ONE: Dims = Dims {
        zero: false,
        one: true,
    };

    pub fn contains(&self, dim: usize) -> bool {
        match dim {
            0 => self.zero,
            1 => self.one,
            _ => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..2).filter(|d| self.contains(*d))
    }

    /// Parses a comma separated list such as `0,1`.
    pub fn parse(s: &str) -> Result<Dims> {
        let mut dims = Dims {
            zero: false,
            one: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "0" => dims.zero = true,
                "1" => dims.one = true,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "homology dimension must be 0 or 1, got {other:?}"
                    )))
                }
            }
        }
        if !dims.zero && !dims.one {
            return Err(Error::InvalidConfig("no homology dimension selected".into()));
        }
        Ok(dims)
    }
}

impl Default for Dims {
    fn default() -> Self {
        Dims::BOTH
    }
}

/// A multiset of bars in dimensions 0 and 1.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Barcode {
    bars: Vec<Bar>,
}

impl Barcode {
    pub fn new(bars: Vec<Bar>) -> Self {
        Self { bars }
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn dim(&self, dim: usize) -> impl Iterator<Item = &Bar> + '_ {
        self.bars.iter().filter(move |b| b.dim as usize == dim)
    }

    /// Bars of one dimension together with their index in [`Barcode::bars`].
    pub fn indexed_dim(&self, dim: usize) -> Vec<(usize, Bar)> {
        self.bars
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, b)| b.dim as usize == dim)
            .collect()
    }

    /// Number of bars alive at `t`: `birth <= t < death`.
    pub fn betti_at(&self, dim: usize, t: f64) -> usize {
        self.dim(dim).filter(|b| b.birth <= t && t < b.death).count()
    }

    /// `(dim, birth, death, essential)` tuples, sorted; for multiset comparison.
    pub fn signature(&self) -> Vec<(u8, f64, f64, bool)> {
        let mut v: Vec<_> = self
            .bars
            .iter()
            .map(|b| (b.dim, b.birth, b.death, b.is_essential()))
            .collect();
        v.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
                .then(a.3.cmp(&b.3))
        });
        v
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    /// Attaches `child` (a root) under `root`.
    fn attach(&mut self, child: u32, root: u32) {
        self.parent[child as usize] = root;
    }
}

/// Edges that merge two components when processed in filtration order.
fn negative_edges(grid: &CubicalGrid, sorted: &[u32], rank: &[u32]) -> Vec<bool> {
    let mut negative = vec![false; grid.num_cells()];
    let mut uf = UnionFind::new(grid.num_vertices());
    for edge in cells_in(grid, sorted, 1) {
        let vs = grid.vertices(edge);
        let (a, b) = (uf.find(vs.as_slice()[0]), uf.find(vs.as_slice()[1]));
        if a != b {
            negative[edge.index()] = true;
            let (elder, younger) = if rank[a as usize] < rank[b as usize] {
                (a, b)
            } else {
                (b, a)
            };
            uf.attach(younger, elder);
        }
    }
    negative
}

/// The cells of one dimension, in the order of `sorted`.
fn cells_in<'a>(grid: &CubicalGrid, sorted: &'a [u32], dim: usize) -> impl Iterator<Item = CellId> + 'a {
    let range = grid.cells_of_dim(dim);
    sorted.iter().filter(move |c| range.contains(c)).map(|&c| CellId(c))
}

/// In-place symmetric difference of two sorted index lists.
fn add_column(target: &mut Vec<u32>, other: &[u32], scratch: &mut Vec<u32>) {
    scratch.clear();
    let (mut i, mut j) = (0, 0);
    while i < target.len() && j < other.len() {
        match target[i].cmp(&other[j]) {
            std::cmp::Ordering::Less => {
                scratch.push(target[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                scratch.push(other[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    scratch.extend_from_slice(&target[i..]);
    scratch.extend_from_slice(&other[j..]);
    std::mem::swap(target, scratch);
}

fn push_bar(out: &mut Vec<Bar>, dim: u8, birth: f64, death: f64, birth_cell: CellId, death_cell: Option<CellId>) {
    if birth < death {
        out.push(Bar {
            dim,
            birth,
            death,
            birth_cell,
            death_cell,
        });
    }
}

/// Barcode of the map `H(domain_t) -> H(codomain_t)`; requires
/// `domain >= codomain` pointwise.
fn pairing(domain: &Filtration, codomain: &Filtration, dims: Dims) -> Vec<Bar> {
    let grid = *domain.grid();
    let domain_sorted = domain.sorted_all();
    let codomain_sorted = if std::ptr::eq(domain, codomain) {
        domain_sorted.clone()
    } else {
        codomain.sorted_all()
    };
    let mut rank = vec![0u32; domain_sorted.len()];
    for (pos, &c) in domain_sorted.iter().enumerate() {
        rank[c as usize] = pos as u32;
    }
    let mut bars = Vec::new();

    if dims.zero {
        let mut uf = UnionFind::new(grid.num_vertices());
        for edge in cells_in(&grid, &codomain_sorted, 1) {
            let vs = grid.vertices(edge);
            let (a, b) = (uf.find(vs.as_slice()[0]), uf.find(vs.as_slice()[1]));
            if a == b {
                continue;
            }
            let (elder, younger) = if rank[a as usize] < rank[b as usize] {
                (a, b)
            } else {
                (b, a)
            };
            uf.attach(younger, elder);
            let born = CellId(younger);
            push_bar(&mut bars, 0, domain.value(born), codomain.value(edge), born, Some(edge));
        }
        // the elder of all pixels survives
        let root = (0..grid.num_vertices() as u32)
            .min_by_key(|&v| rank[v as usize])
            .map(CellId)
            .expect("grid has at least one pixel");
        push_bar(&mut bars, 0, domain.value(root), ESSENTIAL_DEATH, root, None);
    }

    if dims.one && grid.num_squares() > 0 {
        let negative = negative_edges(&grid, &domain_sorted, &rank);
        let cell_at = &domain_sorted;
        let mut pivot_owner: Vec<u32> = vec![u32::MAX; grid.num_cells()];
        let mut columns: Vec<Vec<u32>> = Vec::new();
        let mut scratch = Vec::new();
        for square in cells_in(&grid, &codomain_sorted, 2) {
            let mut col: Vec<u32> = grid
                .boundary(square)
                .iter()
                .filter(|e| !negative[e.index()])
                .map(|e| rank[e.index()])
                .collect();
            col.sort_unstable();
            while let Some(&low) = col.last() {
                let owner = pivot_owner[low as usize];
                if owner == u32::MAX {
                    break;
                }
                add_column(&mut col, &columns[owner as usize], &mut scratch);
            }
            if let Some(&low) = col.last() {
                pivot_owner[low as usize] = columns.len() as u32;
                let edge = CellId(cell_at[low as usize]);
                push_bar(&mut bars, 1, domain.value(edge), codomain.value(square), edge, Some(square));
            }
            columns.push(col);
        }
        // a positive edge left without a pivot would be an essential cycle;
        // the full grid is contractible so this never fires
        for edge in grid.edges() {
            if !negative[edge.index()] && pivot_owner[rank[edge.index()] as usize] == u32::MAX {
                push_bar(&mut bars, 1, domain.value(edge), ESSENTIAL_DEATH, edge, None);
            }
        }
    }
    bars
}

/// Barcode of the sublevel filtration in the requested dimensions.
pub fn compute_barcode(filt: &Filtration, dims: Dims) -> Barcode {
    Barcode::new(pairing(filt, filt, dims))
}

/// Image barcode together with the comparison and target barcodes it links.
#[derive(Debug, Clone)]
pub struct ImageBarcode {
    pub image: Barcode,
    pub comparison: Barcode,
    pub target: Barcode,
    /// For each image bar, the index of the comparison bar with the same birth.
    pub comparison_partner: Vec<usize>,
    /// For each image bar, the index of the target bar with the same death.
    pub target_partner: Vec<usize>,
}

fn check_dominance(comparison: &Filtration, target: &Filtration) -> Result<()> {
    if !comparison.same_shape(target) {
        return Err(crate::grid::shape_error(comparison, target));
    }
    let c = comparison.vertex_values();
    let t = target.vertex_values();
    match (0..c.len()).find(|&i| c[i] < t[i]) {
        Some(index) => Err(Error::NotDominating {
            index,
            comparison: c[index],
            target: t[index],
        }),
        None => Ok(()),
    }
}

/// Image persistence of `H(comparison_t) -> H(target_t)`.
///
/// Requires `comparison >= target` on every pixel, so sublevel sets of the
/// comparison filtration include into those of the target.
pub fn image_barcode(comparison: &Filtration, target: &Filtration) -> Result<ImageBarcode> {
    check_dominance(comparison, target)?;
    link_image(
        image_pairing(comparison, target),
        compute_barcode(comparison, Dims::BOTH),
        compute_barcode(target, Dims::BOTH),
    )
}

/// Unlinked image barcode; the caller guarantees dominance.
pub(crate) fn image_pairing(comparison: &Filtration, target: &Filtration) -> Barcode {
    Barcode::new(pairing(comparison, target, Dims::BOTH))
}

/// Attaches each image bar to its comparison bar (shared birth) and target bar
/// (shared death) under the canonical induced matchings.
pub(crate) fn link_image(image: Barcode, comparison: Barcode, target: Barcode) -> Result<ImageBarcode> {
    let mut comparison_partner = vec![usize::MAX; image.len()];
    let mut target_partner = vec![usize::MAX; image.len()];
    for dim in 0..2 {
        let im = image.indexed_dim(dim);
        let cmp = comparison.indexed_dim(dim);
        let tgt = target.indexed_dim(dim);
        let im_bars: Vec<Bar> = im.iter().map(|(_, b)| *b).collect();
        let cmp_bars: Vec<Bar> = cmp.iter().map(|(_, b)| *b).collect();
        let tgt_bars: Vec<Bar> = tgt.iter().map(|(_, b)| *b).collect();
        let by_birth = match_by_birth(&cmp_bars, &im_bars);
        let by_death = match_by_death(&im_bars, &tgt_bars);
        for (k, (i, _)) in im.iter().enumerate() {
            let (Some(c), Some(t)) = (by_birth[k], by_death[k]) else {
                return Err(Error::Internal(format!(
                    "image bar {:?} has no partner in the comparison or target barcode",
                    im_bars[k]
                )));
            };
            comparison_partner[*i] = cmp[c].0;
            target_partner[*i] = tgt[t].0;
        }
    }
    Ok(ImageBarcode {
        image,
        comparison,
        target,
        comparison_partner,
        target_partner,
    })
}

/// Betti numbers `(b0, b1)` of the 4-connected foreground of a binary mask.
///
/// `b0` comes from a union-find over foreground pixels and `b1` from the
/// Euler characteristic, `b1 = b0 - (V - E + F)`.
pub fn betti_numbers(mask: &LikelihoodGrid) -> Result<(usize, usize)> {
    if let Some(index) = mask.values().iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinaryMask {
            index,
            value: mask.values()[index],
        });
    }
    let (w, h) = (mask.width(), mask.height());
    let fg = |x: usize, y: usize| mask.get(x, y) == 1.0;
    let mut uf = UnionFind::new(w * h);
    let (mut v, mut e, mut f) = (0i64, 0i64, 0i64);
    for y in 0..h {
        for x in 0..w {
            if !fg(x, y) {
                continue;
            }
            v += 1;
            let here = (y * w + x) as u32;
            for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                if nx < w && ny < h && fg(nx, ny) {
                    e += 1;
                    let (a, b) = (uf.find(here), uf.find((ny * w + nx) as u32));
                    if a != b {
                        uf.attach(a.max(b), a.min(b));
                    }
                }
            }
            if x + 1 < w && y + 1 < h && fg(x + 1, y) && fg(x, y + 1) && fg(x + 1, y + 1) {
                f += 1;
            }
        }
    }
    let b0 = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| fg(x, y) && uf.find((y * w + x) as u32) == (y * w + x) as u32)
        .count();
    let chi = v - e + f;
    let b1 = b0 as i64 - chi;
    if b1 < 0 {
        return Err(Error::Internal(format!("negative first Betti number {b1}")));
    }
    Ok((b0, b1 as usize))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_filtration, FiltrationDirection};

    fn filt(w: usize, h: usize, v: &[f64]) -> Filtration {
        Filtration::from_vertex_values(w, h, v).unwrap()
    }

    fn ring3() -> Vec<f64> {
        vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]
    }

    #[test]
    fn all_zero_is_one_component() {
        let bc = compute_barcode(&filt(4, 3, &[0.0; 12]), Dims::BOTH);
        assert_eq!(bc.signature(), vec![(0, 0.0, 1.0, true)]);
    }

    #[test]
    fn three_pixel_line() {
        let bc = compute_barcode(&filt(3, 1, &[0.2, 0.8, 0.4]), Dims::BOTH);
        assert_eq!(bc.signature(), vec![(0, 0.2, 1.0, true), (0, 0.4, 0.8, false)]);
        let finite = bc.bars().iter().find(|b| !b.is_essential()).unwrap();
        assert_eq!(finite.birth_cell, CellId(2));
    }

    #[test]
    fn ring_has_one_cycle() {
        let f = filt(3, 3, &ring3());
        let bc = compute_barcode(&f, Dims::BOTH);
        assert_eq!(bc.signature(), vec![(0, 0.0, 1.0, true), (1, 0.0, 1.0, false)]);
        let cycle = bc.dim(1).next().unwrap();
        assert_eq!(f.grid().dim(cycle.birth_cell), 1);
        assert_eq!(f.grid().dim(cycle.death_cell.unwrap()), 2);
    }

    #[test]
    fn critical_cells_realise_endpoints() {
        let v: Vec<f64> = (0..30).map(|i| ((i * 37) % 30) as f64 / 29.0).collect();
        let f = filt(6, 5, &v);
        for bar in compute_barcode(&f, Dims::BOTH).bars() {
            assert_eq!(f.value(bar.birth_cell), bar.birth);
            match bar.death_cell {
                Some(c) => assert_eq!(f.value(c), bar.death),
                None => assert_eq!(bar.death, ESSENTIAL_DEATH),
            }
        }
    }

    #[test]
    fn essential_bar_at_one_is_discarded() {
        let bc = compute_barcode(&filt(2, 2, &[1.0; 4]), Dims::BOTH);
        assert!(bc.is_empty());
    }

    #[test]
    fn image_of_identity_is_barcode() {
        let v: Vec<f64> = (0..25).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
        let f = filt(5, 5, &v);
        let im = image_barcode(&f, &f).unwrap();
        assert_eq!(im.image.signature(), compute_barcode(&f, Dims::BOTH).signature());
    }

    #[test]
    fn image_into_all_zero_target() {
        let v: Vec<f64> = (0..16).map(|i| ((i * 5) % 7) as f64 / 6.0).collect();
        let cmp = filt(4, 4, &v);
        let tgt = filt(4, 4, &[0.0; 16]);
        let im = image_barcode(&cmp, &tgt).unwrap();
        assert_eq!(im.image.signature(), vec![(0, 0.0, 1.0, true)]);
    }

    #[test]
    fn image_rejects_non_dominating_pair() {
        let a = filt(2, 1, &[0.5, 0.5]);
        let b = filt(2, 1, &[0.6, 0.1]);
        assert!(matches!(image_barcode(&a, &b), Err(Error::NotDominating { index: 0, .. })));
    }

    #[test]
    fn betti_examples() {
        let full = LikelihoodGrid::constant(3, 3, 1.0).unwrap();
        assert_eq!(betti_numbers(&full).unwrap(), (1, 0));
        let two = LikelihoodGrid::new(3, 1, vec![1.0, 0.0, 1.0]).unwrap();
        assert_eq!(betti_numbers(&two).unwrap(), (2, 0));
        let ring = LikelihoodGrid::new(3, 3, ring3().iter().map(|v| 1.0 - v).collect()).unwrap();
        assert_eq!(betti_numbers(&ring).unwrap(), (1, 1));
        let diag = LikelihoodGrid::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(betti_numbers(&diag).unwrap(), (2, 0));
        let soft = LikelihoodGrid::new(1, 1, vec![0.5]).unwrap();
        assert!(matches!(betti_numbers(&soft), Err(Error::NonBinaryMask { .. })));
    }

    #[test]
    fn betti_agrees_with_barcode_at_zero() {
        let ring = LikelihoodGrid::new(3, 3, ring3().iter().map(|v| 1.0 - v).collect()).unwrap();
        let bc = compute_barcode(&build_filtration(&ring, FiltrationDirection::Complement), Dims::BOTH);
        assert_eq!((bc.betti_at(0, 0.0), bc.betti_at(1, 0.0)), (1, 1));
    }

    #[test]
    fn dims_parse() {
        assert_eq!(Dims::parse("0,1").unwrap(), Dims::BOTH);
        assert_eq!(Dims::parse("1").unwrap(), Dims::ONE);
        assert!(Dims::parse("2").is_err());
        assert!(Dims::parse("").is_err());
    }
}
