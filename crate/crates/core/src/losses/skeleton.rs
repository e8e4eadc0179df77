//! Soft skeletonization by iterated min/max morphology, with a reverse pass
//! for gradients.
//!
//! Erosion takes the minimum over the 4-neighbour cross, dilation the maximum
//! over the 3x3 square. Out-of-grid neighbours are ignored.

use crate::error::{Error, Result};
use crate::grid::LikelihoodGrid;

const CROSS: [(isize, isize); 5] = [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)];
const SQUARE: [(isize, isize); 9] = [
    (0, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Applies a min or max filter and records which input pixel won at each
/// output pixel (first in stencil order on ties).
fn morph(img: &[f64], w: usize, h: usize, stencil: &[(isize, isize)], take_max: bool) -> (Vec<f64>, Vec<u32>) {
    let mut out = Vec::with_capacity(img.len());
    let mut arg = Vec::with_capacity(img.len());
    for y in 0..h {
        for x in 0..w {
            let mut best = y * w + x;
            for &(dx, dy) in &stencil[1..] {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                let better = if take_max { img[q] > img[best] } else { img[q] < img[best] };
                if better {
                    best = q;
                }
            }
            out.push(img[best]);
            arg.push(best as u32);
        }
    }
    (out, arg)
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Forward record of a soft skeleton, enough to replay it backwards.
#[derive(Debug, Clone)]
pub struct SkeletonTape {
    width: usize,
    height: usize,
    /// `erosions[j]` is the image eroded `j` times, for `j = 0..=k+1`.
    erosions: Vec<Vec<f64>>,
    erode_arg: Vec<Vec<u32>>,
    /// dilation of `erosions[j + 1]`, i.e. the opening of `erosions[j]`
    dilate_arg: Vec<Vec<u32>>,
    deltas: Vec<Vec<f64>>,
    /// skeleton before each accumulation step
    partial: Vec<Vec<f64>>,
    skeleton: Vec<f64>,
}

impl SkeletonTape {
    pub fn skeleton(&self) -> &[f64] {
        &self.skeleton
    }

    pub fn into_grid(self) -> LikelihoodGrid {
        LikelihoodGrid::new(self.width, self.height, self.skeleton).expect("skeleton stays in [0, 1]")
    }

    /// Propagates `upstream` (gradient w.r.t. the skeleton) back to the input image.
    pub fn backward(&self, upstream: &[f64]) -> Vec<f64> {
        let n = self.width * self.height;
        let k = self.deltas.len() - 1;
        let mut g_delta = vec![vec![0.0; n]; k + 1];
        let mut g_skel = upstream.to_vec();
        for j in (1..=k).rev() {
            let (s, d) = (&self.partial[j], &self.deltas[j]);
            for i in 0..n {
                if d[i] - s[i] * d[i] > 0.0 {
                    g_delta[j][i] += g_skel[i] * (1.0 - s[i]);
                    g_skel[i] *= 1.0 - d[i];
                }
            }
        }
        for i in 0..n {
            g_delta[0][i] += g_skel[i];
        }

        let mut g_ero = vec![vec![0.0; n]; k + 2];
        for j in 0..=k {
            let e = &self.erosions[j];
            let opened = |i: usize| self.erosions[j + 1][self.dilate_arg[j][i] as usize];
            for i in 0..n {
                let g = g_delta[j][i];
                if g != 0.0 && e[i] - opened(i) > 0.0 {
                    g_ero[j][i] += g;
                    g_ero[j + 1][self.dilate_arg[j][i] as usize] -= g;
                }
            }
        }
        for j in (1..=k + 1).rev() {
            let (head, tail) = g_ero.split_at_mut(j);
            for i in 0..n {
                head[j - 1][self.erode_arg[j - 1][i] as usize] += tail[0][i];
            }
        }
        g_ero.swap_remove(0)
    }
}

/// Soft skeleton of `grid` with `k` iterations, recorded for a backward pass.
pub fn soft_skeleton_tape(grid: &LikelihoodGrid, k: usize) -> Result<SkeletonTape> {
    if k == 0 {
        return Err(Error::InvalidConfig("skeleton iterations must be at least 1".into()));
    }
    let (w, h) = (grid.width(), grid.height());
    let mut erosions = vec![grid.values().to_vec()];
    let mut erode_arg = Vec::with_capacity(k + 1);
    for _ in 0..=k {
        let (e, a) = morph(erosions.last().unwrap(), w, h, &CROSS, false);
        let empty = e.iter().all(|&v| v == 0.0);
        erosions.push(e);
        erode_arg.push(a);
        // later rounds only add zero residuals
        if empty {
            break;
        }
    }
    let rounds = erosions.len() - 2;
    let mut dilate_arg = Vec::with_capacity(rounds + 1);
    let mut deltas = Vec::with_capacity(rounds + 1);
    for j in 0..=rounds {
        let (opened, a) = morph(&erosions[j + 1], w, h, &SQUARE, true);
        deltas.push(erosions[j].iter().zip(&opened).map(|(e, o)| relu(e - o)).collect::<Vec<_>>());
        dilate_arg.push(a);
    }
    let mut skel = deltas[0].clone();
    let mut partial = vec![Vec::new()];
    for d in &deltas[1..] {
        partial.push(skel.clone());
        for (s, &d) in skel.iter_mut().zip(d) {
            *s += relu(d - *s * d);
        }
    }
    Ok(SkeletonTape {
        width: w,
        height: h,
        erosions,
        erode_arg,
        dilate_arg,
        deltas,
        partial,
        skeleton: skel,
    })
}

/// Soft skeleton of `grid` with `k` iterations.
pub fn soft_skeleton(grid: &LikelihoodGrid, k: usize) -> Result<LikelihoodGrid> {
    Ok(soft_skeleton_tape(grid, k)?.into_grid())
}
