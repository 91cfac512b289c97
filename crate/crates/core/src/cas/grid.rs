use super::CasError;

pub const MAX_DIMS: usize = 4;
const MAX_CORNERS: usize = 1 << MAX_DIMS;

/// Rectilinear grid, row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
    strides: Vec<usize>,
}

/// Multilinear interpolation stencil: node indices and their weights.
/// Zero-weight corners are omitted.
#[derive(Debug, Clone, Copy)]
pub struct Interpolant {
    nodes: [usize; MAX_CORNERS],
    weights: [f64; MAX_CORNERS],
    len: usize,
}

impl Interpolant {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes[..self.len].iter().copied().zip(self.weights[..self.len].iter().copied())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl Grid {
    pub fn new(axes: Vec<(&'static str, Vec<f64>)>) -> Result<Self, CasError> {
        if axes.is_empty() || axes.len() > MAX_DIMS {
            return Err(CasError::InvalidSpec(format!("grid must have 1..={MAX_DIMS} axes")));
        }
        for (name, values) in &axes {
            if values.is_empty() {
                return Err(CasError::InvalidGrid { axis: name, reason: "no points".into() });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(CasError::InvalidGrid { axis: name, reason: "non-finite coordinate".into() });
            }
            if let Some(w) = values.windows(2).find(|w| w[1] <= w[0]) {
                return Err(CasError::InvalidGrid {
                    axis: name,
                    reason: format!("not strictly increasing at {} -> {}", w[0], w[1]),
                });
            }
        }
        let axes: Vec<Vec<f64>> = axes.into_iter().map(|(_, v)| v).collect();
        let mut strides = vec![1; axes.len()];
        for d in (0..axes.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * axes[d + 1].len();
        }
        Ok(Self { axes, strides })
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, d: usize) -> &[f64] {
        &self.axes[d]
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn coords(&self, mut index: usize) -> [usize; MAX_DIMS] {
        let mut out = [0; MAX_DIMS];
        for (d, s) in self.strides.iter().enumerate() {
            out[d] = index / s;
            index %= s;
        }
        out
    }

    /// Grid point coordinates of a node.
    pub fn point(&self, index: usize) -> [f64; MAX_DIMS] {
        let c = self.coords(index);
        let mut out = [0.0; MAX_DIMS];
        for d in 0..self.dims() {
            out[d] = self.axes[d][c[d]];
        }
        out
    }

    /// Bracketing lower index and fraction toward the upper neighbor, after
    /// clamping `x` into the axis range.
    fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
        let n = axis.len();
        if n == 1 || x <= axis[0] {
            return (0, 0.0);
        }
        if x >= axis[n - 1] {
            return (n - 1, 0.0);
        }
        // first index with axis[i] > x, minus one
        let i = axis.partition_point(|&g| g <= x) - 1;
        (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
    }

    /// Multilinear stencil at `point` (clamped to the grid bounds).
    pub fn interpolant(&self, point: &[f64]) -> Interpolant {
        let mut out = Interpolant { nodes: [0; MAX_CORNERS], weights: [0.0; MAX_CORNERS], len: 1 };
        out.weights[0] = 1.0;
        for (d, axis) in self.axes.iter().enumerate() {
            let (i, t) = Self::bracket(axis, point[d]);
            let stride = self.strides[d];
            let len = out.len;
            if t == 0.0 {
                for k in 0..len {
                    out.nodes[k] += i * stride;
                }
            } else {
                for k in 0..len {
                    out.nodes[len + k] = out.nodes[k] + (i + 1) * stride;
                    out.weights[len + k] = out.weights[k] * t;
                    out.nodes[k] += i * stride;
                    out.weights[k] *= 1.0 - t;
                }
                out.len = 2 * len;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(vec![("a", vec![0.0, 1.0, 3.0]), ("b", vec![-1.0, 1.0])]).unwrap()
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(matches!(
            Grid::new(vec![("h", vec![1.0, 0.0])]),
            Err(CasError::InvalidGrid { axis: "h", .. })
        ));
        assert!(Grid::new(vec![("h", vec![])]).is_err());
        assert!(Grid::new(vec![("h", vec![0.0, 0.0])]).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = grid();
        assert_eq!(g.len(), 6);
        for i in 0..g.len() {
            let c = g.coords(i);
            assert_eq!(g.index(&c[..2]), i);
        }
        assert_eq!(g.point(3), [1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn stencil_weights() {
        let g = grid();
        let s = g.interpolant(&[2.0, 0.0]);
        assert_eq!(s.len(), 4);
        let total: f64 = s.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-15);
        // on-node queries touch a single node
        let s = g.interpolant(&[1.0, 1.0]);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![(3, 1.0)]);
        // clamping
        let s = g.interpolant(&[10.0, -5.0]);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![(4, 1.0)]);
    }

    #[test]
    fn reproduces_linear_functions() {
        let g = grid();
        let f = |p: [f64; MAX_DIMS]| 2.0 * p[0] - 3.0 * p[1] + 0.5;
        let values: Vec<f64> = (0..g.len()).map(|i| f(g.point(i))).collect();
        for &(a, b) in &[(0.3, 0.2), (2.7, -0.9), (1.0, 0.0)] {
            let v: f64 = g.interpolant(&[a, b]).iter().map(|(n, w)| w * values[n]).sum();
            assert!((v - f([a, b, 0.0, 0.0])).abs() < 1e-12);
        }
    }
}
