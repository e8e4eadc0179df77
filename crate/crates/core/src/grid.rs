//! Likelihood grids, label grids and the cubical complex of a pixel grid.
//!
//! Pixels are the vertices of the complex (V-construction). Edges join
//! 4-neighbours and squares fill 2x2 pixel blocks, so the sublevel sets of a
//! lower-star filtration are 4-connected.
//!
//! Cells are numbered in one global, deterministic order: all vertices, then
//! horizontal edges, then vertical edges, then squares, each block row-major
//! by its anchor (top-left) vertex.

use crate::error::{Error, Result};

/// Tolerance on the per-pixel channel sum of a [`MulticlassPrediction`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-4;

fn check_shape(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::EmptyGrid { width, height });
    }
    let expected = width * height;
    if len != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: len,
        });
    }
    Ok(())
}

fn check_unit_interval(values: &[f64]) -> Result<()> {
    match values
        .iter()
        .position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0)
    {
        Some(index) => Err(Error::ValueOutOfRange {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// A single-channel likelihood map with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl LikelihoodGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_shape(width, height, values.len())?;
        check_unit_interval(&values)?;
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Builds a grid from nested rows, `rows[y][x]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::ShapeMismatch {
                left: format!("row width {width}"),
                right: "ragged rows".into(),
            });
        }
        Self::new(width, height, rows.concat())
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// True when every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn same_shape(&self, other: &LikelihoodGrid) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Per-pixel class likelihoods, class-major: `N` planes of `height x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassPrediction {
    num_classes: usize,
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl MulticlassPrediction {
    /// Validates the unit-interval and probability-simplex invariants.
    pub fn new(num_classes: usize, width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let pred = Self::new_unchecked_simplex(num_classes, width, height, values)?;
        pred.check_simplex()?;
        Ok(pred)
    }

    /// Like [`MulticlassPrediction::new`] but without the per-pixel sum check.
    ///
    /// Needed for finite-difference probes, which perturb a single channel.
    pub fn new_unchecked_simplex(
        num_classes: usize,
        width: usize,
        height: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::TooFewClasses(num_classes));
        }
        if width == 0 || height == 0 {
            return Err(Error::EmptyGrid { width, height });
        }
        let expected = num_classes * width * height;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        check_unit_interval(&values)?;
        Ok(Self {
            num_classes,
            width,
            height,
            values,
        })
    }

    /// Reports the pixel with the worst channel-sum deviation if it exceeds tolerance.
    pub fn check_simplex(&self) -> Result<()> {
        let plane = self.width * self.height;
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..plane {
            let sum: f64 = (0..self.num_classes).map(|c| self.values[c * plane + i]).sum();
            let dev = (sum - 1.0).abs();
            if dev > SIMPLEX_TOLERANCE && worst.is_none_or(|(_, s)| dev > (s - 1.0).abs()) {
                worst = Some((i, sum));
            }
        }
        match worst {
            Some((i, sum)) => Err(Error::SimplexViolation {
                x: i % self.width,
                y: i / self.width,
                sum,
            }),
            None => Ok(()),
        }
    }

    /// Every class gets likelihood `1/N`.
    pub fn uniform(num_classes: usize, width: usize, height: usize) -> Result<Self> {
        let v = 1.0 / num_classes as f64;
        Self::new(num_classes, width, height, vec![v; num_classes * width * height])
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn plane(&self, class: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.values[class * n..(class + 1) * n]
    }

    pub fn get(&self, class: usize, x: usize, y: usize) -> f64 {
        self.values[(class * self.height + y) * self.width + x]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.num_classes, self.height, self.width)
    }
}

/// Dense class ids, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelGrid {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        check_shape(width, height, labels.len())?;
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::ShapeMismatch {
                left: format!("row width {width}"),
                right: "ragged rows".into(),
            });
        }
        Self::new(width, height, rows.concat())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Binary indicator grid of one class.
    pub fn mask(&self, class: u32) -> LikelihoodGrid {
        LikelihoodGrid {
            width: self.width,
            height: self.height,
            values: self
                .labels
                .iter()
                .map(|&l| if l == class { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// Extracts the likelihood plane of class `class`.
pub fn channel_project(pred: &MulticlassPrediction, class: usize) -> Result<LikelihoodGrid> {
    if class >= pred.num_classes {
        return Err(Error::ClassOutOfRange {
            class,
            num_classes: pred.num_classes,
        });
    }
    Ok(LikelihoodGrid {
        width: pred.width,
        height: pred.height,
        values: pred.plane(class).to_vec(),
    })
}

/// Expands class ids into a one-hot prediction with `num_classes` channels.
pub fn one_hot(labels: &LabelGrid, num_classes: usize) -> Result<MulticlassPrediction> {
    if num_classes < 2 {
        return Err(Error::TooFewClasses(num_classes));
    }
    if let Some(&bad) = labels.labels.iter().find(|&&l| l as usize >= num_classes) {
        return Err(Error::ClassOutOfRange {
            class: bad as usize,
            num_classes,
        });
    }
    let plane = labels.width * labels.height;
    let mut values = vec![0.0; num_classes * plane];
    for (i, &l) in labels.labels.iter().enumerate() {
        values[l as usize * plane + i] = 1.0;
    }
    Ok(MulticlassPrediction {
        num_classes,
        width: labels.width,
        height: labels.height,
        values,
    })
}

/// Maps likelihoods to filtration values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiltrationDirection {
    /// `f = 1 - likelihood`: high-likelihood (foreground) pixels enter first.
    #[default]
    Complement,
    /// `f = likelihood`.
    Identity,
}

impl FiltrationDirection {
    pub fn from_flip(flip: bool) -> Self {
        if flip {
            Self::Identity
        } else {
            Self::Complement
        }
    }

    pub fn apply(self, likelihood: f64) -> f64 {
        match self {
            Self::Complement => 1.0 - likelihood,
            Self::Identity => likelihood,
        }
    }

    /// d f / d likelihood.
    pub fn derivative(self) -> f64 {
        match self {
            Self::Complement => -1.0,
            Self::Identity => 1.0,
        }
    }
}

/// Index of a cell in the global cell order of a [`CubicalGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct CellId(pub u32);

impl CellId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Vertex,
    HorizontalEdge,
    VerticalEdge,
    Square,
}

impl CellKind {
    pub fn dim(self) -> usize {
        match self {
            CellKind::Vertex => 0,
            CellKind::HorizontalEdge | CellKind::VerticalEdge => 1,
            CellKind::Square => 2,
        }
    }
}

/// Up to four cells, stored inline.
#[derive(Debug, Clone, Copy)]
pub struct CellSet {
    ids: [u32; 4],
    len: u8,
}

impl CellSet {
    fn new(ids: &[u32]) -> Self {
        let mut out = [0; 4];
        out[..ids.len()].copy_from_slice(ids);
        Self {
            ids: out,
            len: ids.len() as u8,
        }
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.ids[..self.len as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = CellId> + '_ {
        self.as_slice().iter().map(|&i| CellId(i))
    }
}

/// Geometry of the cubical complex of a `width x height` pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubicalGrid {
    width: usize,
    height: usize,
}

impl CubicalGrid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyGrid { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_vertices(&self) -> usize {
        self.width * self.height
    }

    pub fn num_horizontal_edges(&self) -> usize {
        (self.width - 1) * self.height
    }

    pub fn num_vertical_edges(&self) -> usize {
        self.width * (self.height - 1)
    }

    pub fn num_edges(&self) -> usize {
        self.num_horizontal_edges() + self.num_vertical_edges()
    }

    pub fn num_squares(&self) -> usize {
        (self.width - 1) * (self.height - 1)
    }

    pub fn num_cells(&self) -> usize {
        self.num_vertices() + self.num_edges() + self.num_squares()
    }

    fn h_offset(&self) -> usize {
        self.num_vertices()
    }

    fn v_offset(&self) -> usize {
        self.h_offset() + self.num_horizontal_edges()
    }

    fn sq_offset(&self) -> usize {
        self.v_offset() + self.num_vertical_edges()
    }

    pub fn vertex(&self, x: usize, y: usize) -> CellId {
        CellId((y * self.width + x) as u32)
    }

    /// Edge from `(x, y)` to `(x + 1, y)`.
    pub fn horizontal_edge(&self, x: usize, y: usize) -> CellId {
        CellId((self.h_offset() + y * (self.width - 1) + x) as u32)
    }

    /// Edge from `(x, y)` to `(x, y + 1)`.
    pub fn vertical_edge(&self, x: usize, y: usize) -> CellId {
        CellId((self.v_offset() + y * self.width + x) as u32)
    }

    /// Square with top-left vertex `(x, y)`.
    pub fn square(&self, x: usize, y: usize) -> CellId {
        CellId((self.sq_offset() + y * (self.width - 1) + x) as u32)
    }

    pub fn kind(&self, cell: CellId) -> CellKind {
        let i = cell.index();
        if i < self.h_offset() {
            CellKind::Vertex
        } else if i < self.v_offset() {
            CellKind::HorizontalEdge
        } else if i < self.sq_offset() {
            CellKind::VerticalEdge
        } else {
            CellKind::Square
        }
    }

    pub fn dim(&self, cell: CellId) -> usize {
        self.kind(cell).dim()
    }

    /// Anchor (top-left) pixel of a cell.
    pub fn anchor(&self, cell: CellId) -> (usize, usize) {
        let i = cell.index();
        let (local, row) = match self.kind(cell) {
            CellKind::Vertex => (i, self.width),
            CellKind::HorizontalEdge => (i - self.h_offset(), self.width - 1),
            CellKind::VerticalEdge => (i - self.v_offset(), self.width),
            CellKind::Square => (i - self.sq_offset(), self.width - 1),
        };
        (local % row, local / row)
    }

    /// Pixels spanned by a cell.
    pub fn vertices(&self, cell: CellId) -> CellSet {
        let (x, y) = self.anchor(cell);
        let v = |x: usize, y: usize| (y * self.width + x) as u32;
        match self.kind(cell) {
            CellKind::Vertex => CellSet::new(&[v(x, y)]),
            CellKind::HorizontalEdge => CellSet::new(&[v(x, y), v(x + 1, y)]),
            CellKind::VerticalEdge => CellSet::new(&[v(x, y), v(x, y + 1)]),
            CellKind::Square => CellSet::new(&[v(x, y), v(x + 1, y), v(x, y + 1), v(x + 1, y + 1)]),
        }
    }

    /// Codimension-one faces of a cell.
    pub fn boundary(&self, cell: CellId) -> CellSet {
        let (x, y) = self.anchor(cell);
        match self.kind(cell) {
            CellKind::Vertex => CellSet::new(&[]),
            CellKind::HorizontalEdge | CellKind::VerticalEdge => self.vertices(cell),
            CellKind::Square => CellSet::new(&[
                self.horizontal_edge(x, y).0,
                self.horizontal_edge(x, y + 1).0,
                self.vertical_edge(x, y).0,
                self.vertical_edge(x + 1, y).0,
            ]),
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = CellId> {
        let start = self.h_offset() as u32;
        (start..start + self.num_edges() as u32).map(CellId)
    }

    pub fn squares(&self) -> impl Iterator<Item = CellId> {
        let start = self.sq_offset() as u32;
        (start..start + self.num_squares() as u32).map(CellId)
    }

    pub fn cells_of_dim(&self, dim: usize) -> std::ops::Range<u32> {
        let (a, b) = match dim {
            0 => (0, self.h_offset()),
            1 => (self.h_offset(), self.sq_offset()),
            2 => (self.sq_offset(), self.num_cells()),
            _ => (0, 0),
        };
        a as u32..b as u32
    }
}

/// Lower-star filtration of the cubical grid complex.
///
/// Every cell carries the maximum value of its vertices, so values are
/// monotone under face inclusion.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtration {
    grid: CubicalGrid,
    values: Vec<f64>,
}

impl Filtration {
    /// Builds the lower-star filtration from per-pixel values in `[0, 1]`.
    pub fn from_vertex_values(width: usize, height: usize, vertex_values: &[f64]) -> Result<Self> {
        check_shape(width, height, vertex_values.len())?;
        check_unit_interval(vertex_values)?;
        let grid = CubicalGrid::new(width, height)?;
        let mut values = Vec::with_capacity(grid.num_cells());
        values.extend_from_slice(vertex_values);
        for cell in grid.num_vertices() as u32..grid.num_cells() as u32 {
            let v = grid
                .vertices(CellId(cell))
                .as_slice()
                .iter()
                .map(|&p| vertex_values[p as usize])
                .fold(f64::NEG_INFINITY, f64::max);
            values.push(v);
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &CubicalGrid {
        &self.grid
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn value(&self, cell: CellId) -> f64 {
        self.values[cell.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vertex_values(&self) -> &[f64] {
        &self.values[..self.grid.num_vertices()]
    }

    pub fn same_shape(&self, other: &Filtration) -> bool {
        self.grid == other.grid
    }

    /// Pointwise maximum of two filtrations on the same grid.
    pub fn pointwise_max(&self, other: &Filtration) -> Result<Filtration> {
        if !self.same_shape(other) {
            return Err(shape_error(self, other));
        }
        // max of lower-star values is the lower star of the max
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.max(*b))
            .collect();
        Ok(Filtration {
            grid: self.grid,
            values,
        })
    }

    /// Position of every cell in the filtration order: by value, ties by cell id.
    pub fn order(&self) -> Vec<u32> {
        let cells = self.sorted_all();
        let mut rank = vec![0u32; cells.len()];
        for (pos, &c) in cells.iter().enumerate() {
            rank[c as usize] = pos as u32;
        }
        rank
    }

    /// All cell ids in filtration order.
    pub fn sorted_all(&self) -> Vec<u32> {
        let mut keyed: Vec<(u64, u32)> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| (order_bits(v), i as u32))
            .collect();
        keyed.sort_unstable();
        keyed.into_iter().map(|(_, c)| c).collect()
    }

    /// Cells of one dimension sorted into filtration order.
    pub fn sorted_cells(&self, dim: usize) -> Vec<CellId> {
        let range = self.grid.cells_of_dim(dim);
        let mut keyed: Vec<(u64, u32)> = range.map(|c| (order_bits(self.values[c as usize]), c)).collect();
        keyed.sort_unstable();
        keyed.into_iter().map(|(_, c)| CellId(c)).collect()
    }

    /// The pixel whose value a cell inherits: its largest vertex, ties to the
    /// highest pixel index.
    pub fn critical_vertex(&self, cell: CellId) -> usize {
        let mut best = None::<(f64, u32)>;
        for &p in self.grid.vertices(cell).as_slice() {
            let v = self.values[p as usize];
            best = match best {
                Some((bv, bp)) if bv > v || (bv == v && bp > p) => Some((bv, bp)),
                _ => Some((v, p)),
            };
        }
        best.map(|(_, p)| p as usize).unwrap_or(cell.index())
    }

    /// Every cell value raised by `scale * cell id`. When `scale * num_cells`
    /// is below the smallest gap between distinct values, this realises the
    /// `(value, cell id)` order with pairwise distinct values.
    pub(crate) fn perturbed(&self, scale: f64) -> Filtration {
        Filtration {
            grid: self.grid,
            values: self.values.iter().enumerate().map(|(i, v)| v + scale * i as f64).collect(),
        }
    }

    /// Sublevel set at `t` as a pixel mask (1 = included).
    pub fn sublevel_mask(&self, t: f64) -> Vec<bool> {
        self.vertex_values().iter().map(|&v| v <= t).collect()
    }
}

/// Maps `v` to an integer with the same order as `f64::total_cmp`.
fn order_bits(v: f64) -> u64 {
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | 1 << 63
    }
}

pub(crate) fn shape_error(a: &Filtration, b: &Filtration) -> Error {
    Error::ShapeMismatch {
        left: format!("{}x{}", a.width(), a.height()),
        right: format!("{}x{}", b.width(), b.height()),
    }
}

/// Lower-star filtration of a likelihood channel under `direction`.
pub fn build_filtration(grid: &LikelihoodGrid, direction: FiltrationDirection) -> Filtration {
    let vertex_values: Vec<f64> = grid.values.iter().map(|&v| direction.apply(v)).collect();
    Filtration::from_vertex_values(grid.width, grid.height, &vertex_values)
        .expect("likelihood grid invariants guarantee a valid filtration")
}
