//! Optimal partial matching of persistence diagrams with squared Euclidean
//! costs and diagonal projection, solved exactly by the Hungarian method.

use crate::persistence::{Bar, Barcode, Dims};

/// Squared distance between two diagram points.
pub fn point_cost(p: &Bar, g: &Bar) -> f64 {
    let db = p.birth - g.birth;
    let dd = p.death - g.death;
    db * db + dd * dd
}

/// Squared distance of a point to the diagonal.
pub fn diagonal_cost(b: &Bar) -> f64 {
    let l = b.death - b.birth;
    l * l / 2.0
}

/// Minimum-cost perfect assignment on a square cost matrix (row-major).
/// Returns the column assigned to each row.
pub fn hungarian(n: usize, cost: &[f64]) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    // potentials formulation, 1-based with a virtual column 0
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut row_of = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut min_v = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if row_of[j] > 0 {
            assignment[row_of[j] - 1] = j - 1;
        }
    }
    assignment
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiagramDimMatching {
    /// Indices into the prediction and ground-truth barcodes.
    pub matched: Vec<(usize, usize)>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiagramMatching {
    pub dims: [DiagramDimMatching; 2],
}

impl DiagramMatching {
    pub fn cost(&self) -> f64 {
        self.dims[0].cost + self.dims[1].cost
    }
}

// strictly larger than any admissible total for diagrams in [0, 1]^2
const FORBIDDEN: f64 = 1e12;

fn match_dim(pred: &[(usize, Bar)], gt: &[(usize, Bar)]) -> DiagramDimMatching {
    let (np, ng) = (pred.len(), gt.len());
    let n = np + ng;
    let mut cost = vec![0.0; n * n];
    // rows: pred points then gt-diagonal slots; cols: gt points then pred-diagonal slots
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = match (i < np, j < ng) {
                (true, true) => point_cost(&pred[i].1, &gt[j].1),
                (true, false) => {
                    if j - ng == i {
                        diagonal_cost(&pred[i].1)
                    } else {
                        FORBIDDEN
                    }
                }
                (false, true) => {
                    if i - np == j {
                        diagonal_cost(&gt[j].1)
                    } else {
                        FORBIDDEN
                    }
                }
                (false, false) => 0.0,
            };
        }
    }
    let assignment = hungarian(n, &cost);
    let mut out = DiagramDimMatching::default();
    let mut gt_used = vec![false; ng];
    for (i, &j) in assignment.iter().enumerate().take(np) {
        if j < ng {
            out.matched.push((pred[i].0, gt[j].0));
            gt_used[j] = true;
            out.cost += point_cost(&pred[i].1, &gt[j].1);
        } else {
            out.unmatched_pred.push(pred[i].0);
            out.cost += diagonal_cost(&pred[i].1);
        }
    }
    for (j, used) in gt_used.iter().enumerate() {
        if !used {
            out.unmatched_gt.push(gt[j].0);
            out.cost += diagonal_cost(&gt[j].1);
        }
    }
    out
}

/// Exact optimal matching between two barcodes, per selected dimension.
pub fn wasserstein_match(pred: &Barcode, gt: &Barcode, dims: Dims) -> DiagramMatching {
    let mut out = DiagramMatching::default();
    for d in dims.iter() {
        out.dims[d] = match_dim(&pred.indexed_dim(d), &gt.indexed_dim(d));
    }
    out
}
