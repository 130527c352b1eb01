use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Uniform periodic lattice on `[-L/2, L/2)^N`, `N ∈ {1, 2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    points_per_axis: usize,
    length: f64,
}

impl Grid {
    pub fn new(dim: usize, points_per_axis: usize, length: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {points_per_axis}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        Ok(Self { dim, points_per_axis, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points_per_axis as f64
    }

    /// `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `L^N`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Total number of nodes, `n^N`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `j` along one axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    /// Per-axis node index of flat (row-major) index `idx`. Axis 0 is the slow one.
    pub fn axis_index(&self, idx: usize, axis: usize) -> usize {
        let n = self.points_per_axis;
        match (self.dim, axis) {
            (1, _) => idx,
            (_, 0) => idx / n,
            _ => idx % n,
        }
    }

    /// Position of flat index `idx`; unused trailing coordinates are zero.
    pub fn position(&self, idx: usize) -> [f64; 2] {
        let mut x = [0.0; 2];
        for (axis, xa) in x.iter_mut().enumerate().take(self.dim) {
            *xa = self.coordinate(self.axis_index(idx, axis));
        }
        x
    }

    /// Signed mode number in FFT ordering: `k` for `k < n/2`, else `k - n`.
    pub fn signed_mode(&self, k: usize) -> i64 {
        let n = self.points_per_axis;
        if k < n / 2 {
            k as i64
        } else {
            k as i64 - n as i64
        }
    }

    /// Per-axis wavenumbers `ξ_k = 2π k' / L` in FFT ordering.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.points_per_axis)
            .map(|k| 2.0 * PI * self.signed_mode(k) as f64 / self.length)
            .collect()
    }

    /// Largest representable wavenumber magnitude along one axis, `π / h`.
    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }

    /// `|ξ|` at every node of the transform layout. Exactly zero at the zero mode.
    pub fn abs_wavenumbers(&self) -> Vec<f64> {
        let xi = self.wavenumbers();
        match self.dim {
            1 => xi.iter().map(|x| x.abs()).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for a in &xi {
                    for b in &xi {
                        out.push((a * a + b * b).sqrt());
                    }
                }
                out
            }
        }
    }
}
