use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PlantParams, State};

/// How an off-grid successor is mapped back onto grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    /// Snap to the closest node, ties to the lower index. Yields an exactly finite MDP.
    #[default]
    Nearest,
    /// Bilinear interpolation over the enclosing cell.
    Multilinear,
}

/// Tensor grid over the (x1, x2) state box. Node `(i, j)` has flat index `i·n2 + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    x1: Vec<f64>,
    x2: Vec<f64>,
}

impl Grid {
    pub fn new(x1: Vec<f64>, x2: Vec<f64>) -> Result<Self> {
        for (name, bp) in [("x1", &x1), ("x2", &x2)] {
            if bp.is_empty() {
                return Err(Error::InvalidParameters(format!(
                    "{name} breakpoints are empty"
                )));
            }
            if bp.iter().any(|v| !v.is_finite()) || bp.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidParameters(format!(
                    "{name} breakpoints must be finite and strictly increasing"
                )));
            }
        }
        Ok(Grid { x1, x2 })
    }

    /// `n1 × n2` evenly spaced nodes spanning `[0, cap1] × [0, cap2]`.
    pub fn uniform(n1: usize, n2: usize, plant: &PlantParams) -> Result<Self> {
        if n1 < 2 || n2 < 2 {
            return Err(Error::InvalidParameters(format!(
                "uniform grid needs at least 2 nodes per axis, got {n1}x{n2}"
            )));
        }
        let axis = |n: usize, cap: f64| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        cap
                    } else {
                        cap * i as f64 / (n - 1) as f64
                    }
                })
                .collect()
        };
        Grid::new(axis(n1, plant.cap1), axis(n2, plant.cap2))
    }

    pub fn x1_breakpoints(&self) -> &[f64] {
        &self.x1
    }

    pub fn x2_breakpoints(&self) -> &[f64] {
        &self.x2
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.x1.len(), self.x2.len())
    }

    pub fn len(&self) -> usize {
        self.x1.len() * self.x2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.x2.len() + i2
    }

    pub fn node(&self, idx: usize) -> State {
        let n2 = self.x2.len();
        State::new(self.x1[idx / n2], self.x2[idx % n2])
    }

    pub fn nodes(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    pub fn cell_widths(&self) -> (Vec<f64>, Vec<f64>) {
        let w = |bp: &[f64]| bp.windows(2).map(|w| w[1] - w[0]).collect();
        (w(&self.x1), w(&self.x2))
    }

    /// True when the grid spans exactly `[0, cap1] × [0, cap2]`.
    pub fn covers(&self, plant: &PlantParams) -> bool {
        self.x1[0] == 0.0
            && self.x2[0] == 0.0
            && *self.x1.last().unwrap() == plant.cap1
            && *self.x2.last().unwrap() == plant.cap2
    }

    fn inside(&self, x: State) -> bool {
        x.x1 >= self.x1[0]
            && x.x1 <= *self.x1.last().unwrap()
            && x.x2 >= self.x2[0]
            && x.x2 <= *self.x2.last().unwrap()
    }

    pub fn nearest(&self, x: State) -> Result<usize> {
        if !self.inside(x) {
            return Err(Error::OutOfBox { x1: x.x1, x2: x.x2 });
        }
        Ok(self.index(nearest_1d(&self.x1, x.x1), nearest_1d(&self.x2, x.x2)))
    }

    /// Nodes and convex weights representing `x`; zero weights are dropped.
    pub fn project(&self, x: State, mode: Projection) -> Result<Vec<(usize, f64)>> {
        match mode {
            Projection::Nearest => Ok(vec![(self.nearest(x)?, 1.0)]),
            Projection::Multilinear => {
                if !self.inside(x) {
                    return Err(Error::OutOfBox { x1: x.x1, x2: x.x2 });
                }
                let a = linear_1d(&self.x1, x.x1);
                let b = linear_1d(&self.x2, x.x2);
                let mut out = Vec::with_capacity(4);
                for &(i, wi) in a.iter().flatten() {
                    for &(j, wj) in b.iter().flatten() {
                        out.push((self.index(i, j), wi * wj));
                    }
                }
                Ok(out)
            }
        }
    }
}

fn nearest_1d(bp: &[f64], v: f64) -> usize {
    let hi = bp.partition_point(|&b| b < v);
    if hi == 0 {
        return 0;
    }
    if hi == bp.len() {
        return bp.len() - 1;
    }
    if bp[hi] - v < v - bp[hi - 1] {
        hi
    } else {
        hi - 1
    }
}

fn linear_1d(bp: &[f64], v: f64) -> [Option<(usize, f64)>; 2] {
    let hi = bp.partition_point(|&b| b < v);
    if hi == 0 || bp[hi.min(bp.len() - 1)] == v {
        return [Some((hi.min(bp.len() - 1), 1.0)), None];
    }
    let lo = hi - 1;
    let t = (v - bp[lo]) / (bp[hi] - bp[lo]);
    [Some((lo, 1.0 - t)), Some((hi, t))]
}
