use crate::error::{Error, Result};

/// Symmetric pairwise distances on a finite node set, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

/// Triples checked for the triangle inequality before giving up on exhaustiveness.
const TRIANGLE_BUDGET: usize = 200_000;

impl DistanceMatrix {
    pub fn new(n: usize, d: Vec<f64>) -> Result<Self> {
        if d.len() != n * n {
            return Err(Error::InvalidParameters(format!(
                "distance matrix needs {} entries, got {}",
                n * n,
                d.len()
            )));
        }
        let m = DistanceMatrix { n, d };
        for i in 0..n {
            if m.get(i, i) != 0.0 {
                return Err(Error::InvalidParameters(
                    "metric diagonal must be zero".into(),
                ));
            }
            for j in 0..n {
                let v = m.get(i, j);
                if !(v >= 0.0 && v.is_finite()) || v != m.get(j, i) {
                    return Err(Error::InvalidParameters(
                        "metric must be finite, non-negative and symmetric".into(),
                    ));
                }
            }
        }
        // exhaustive on small sets, strided otherwise
        let total = n * n * n;
        let stride = (total / TRIANGLE_BUDGET).max(1);
        for code in (0..total).step_by(stride) {
            let (i, j, k) = (code / (n * n), (code / n) % n, code % n);
            if m.get(i, k) > m.get(i, j) + m.get(j, k) + 1e-12 * (1.0 + m.get(i, k)) {
                return Err(Error::InvalidParameters(format!(
                    "triangle inequality fails at ({i}, {j}, {k})"
                )));
            }
        }
        Ok(m)
    }

    /// Euclidean distances between points of equal dimension.
    pub fn euclidean(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let s: f64 = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d[i * n + j] = s.sqrt();
                d[j * n + i] = d[i * n + j];
            }
        }
        DistanceMatrix::new(n, d)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    /// Smallest distance between distinct nodes; `None` when all nodes coincide.
    pub fn min_positive(&self) -> Option<f64> {
        self.d
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .min_by(f64::total_cmp)
    }
}

/// `h_m(x) = min_y h(y) + m·ρ(x, y)`, the largest m-Lipschitz minorant of `h`.
pub fn lipschitz_regularize(h: &[f64], metric: &DistanceMatrix, m: f64) -> Result<Vec<f64>> {
    if !(m >= 0.0) {
        return Err(Error::InvalidParameters(format!(
            "slope must be non-negative, got {m}"
        )));
    }
    if h.len() != metric.len() {
        return Err(Error::InvalidParameters(
            "node values and metric differ in size".into(),
        ));
    }
    Ok((0..h.len())
        .map(|x| {
            h.iter()
                .enumerate()
                .map(|(y, &hy)| {
                    if m == 0.0 {
                        hy
                    } else {
                        hy + m * metric.get(x, y)
                    }
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// Slope beyond which the regularizer reproduces `h` exactly on the node set.
pub fn exactness_threshold(h: &[f64], metric: &DistanceMatrix) -> f64 {
    let lo = h.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match metric.min_positive() {
        Some(d) => (hi - lo) / d,
        None => 0.0,
    }
}
