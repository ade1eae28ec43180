//! Dense tensor grid on the box [-B, B]^k with multilinear interpolation.

/// Node layout: index = sum_d multi[d] * stride[d] with the last axis
/// contiguous, so neighbors along axis d differ by m^(k-1-d).
#[derive(Debug, Clone)]
pub struct Grid {
    pub k: usize,
    pub m: usize,
    pub b: f64,
    pub delta: f64,
    pub len: usize,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(k: usize, m: usize, b: f64) -> Self {
        assert!(k >= 1 && m >= 2 && b > 0.0);
        let mut strides = vec![0usize; k];
        let mut s = 1usize;
        for d in (0..k).rev() {
            strides[d] = s;
            s = s.checked_mul(m).expect("grid too large");
        }
        Grid {
            k,
            m,
            b,
            delta: 2.0 * b / (m - 1) as f64,
            len: s,
            strides,
        }
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Bandwidth of the nearest-neighbor stencil: the largest stride.
    pub fn bandwidth(&self) -> usize {
        self.strides[0]
    }

    pub fn axis_index(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.m
    }

    pub fn coord_of(&self, axis_index: usize) -> f64 {
        -self.b + axis_index as f64 * self.delta
    }

    pub fn node_coords(&self, idx: usize, out: &mut [f64]) {
        for d in 0..self.k {
            out[d] = self.coord_of(self.axis_index(idx, d));
        }
    }

    /// Multilinear interpolation of a scalar node field at x (clamped to the
    /// box).
    pub fn interp_scalar(&self, field: &[f64], x: &[f64]) -> f64 {
        debug_assert_eq!(field.len(), self.len);
        let mut base = 0usize;
        let mut w = [0.0f64; 8];
        let mut frac = vec![0.0f64; self.k];
        for d in 0..self.k {
            let t = ((x[d] + self.b) / self.delta).clamp(0.0, (self.m - 1) as f64);
            let i = (t.floor() as usize).min(self.m - 2);
            frac[d] = t - i as f64;
            base += i * self.strides[d];
        }
        let corners = 1usize << self.k;
        debug_assert!(corners <= w.len());
        let mut acc = 0.0;
        for c in 0..corners {
            let mut weight = 1.0;
            let mut idx = base;
            for d in 0..self.k {
                if c & (1 << d) != 0 {
                    weight *= frac[d];
                    idx += self.strides[d];
                } else {
                    weight *= 1.0 - frac[d];
                }
            }
            w[c] = weight;
            acc += weight * field[idx];
        }
        acc
    }

    /// Multilinear interpolation of a vector field stored as `dim` components
    /// per node.
    pub fn interp_vector(&self, field: &[f64], dim: usize, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(field.len(), self.len * dim);
        let mut base = 0usize;
        let mut frac = vec![0.0f64; self.k];
        for d in 0..self.k {
            let t = ((x[d] + self.b) / self.delta).clamp(0.0, (self.m - 1) as f64);
            let i = (t.floor() as usize).min(self.m - 2);
            frac[d] = t - i as f64;
            base += i * self.strides[d];
        }
        out[..dim].fill(0.0);
        let corners = 1usize << self.k;
        for c in 0..corners {
            let mut weight = 1.0;
            let mut idx = base;
            for d in 0..self.k {
                if c & (1 << d) != 0 {
                    weight *= frac[d];
                    idx += self.strides[d];
                } else {
                    weight *= 1.0 - frac[d];
                }
            }
            for j in 0..dim {
                out[j] += weight * field[idx * dim + j];
            }
        }
    }
}
