//! Complementary checkerboard inpainting masks.
//!
//! The image is split into an `N`×`N` grid. Cell `(r, c)` belongs to the first
//! mask when `r + c` is even and to the second otherwise, so the two masks sum
//! to the all-ones matrix. Cell boundaries sit at `round(k·dim/N)` so ragged
//! remainders are spread evenly instead of piling up in the last row/column.

use thiserror::Error;

use crate::image::BinaryMask;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("grid count must be at least 1")]
    ZeroGrids,
    #[error("grid count {n_grids} exceeds image dimension {width}x{height}")]
    TooManyGrids {
        n_grids: usize,
        width: usize,
        height: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub n_grids: usize,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(n_grids: usize, width: usize, height: usize) -> Result<Self, GridError> {
        let spec = Self {
            n_grids,
            width,
            height,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.n_grids == 0 {
            return Err(GridError::ZeroGrids);
        }
        if self.n_grids > self.width.min(self.height) {
            return Err(GridError::TooManyGrids {
                n_grids: self.n_grids,
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }
}

/// Cell index of every coordinate along one axis.
fn cell_indices(dim: usize, n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(dim);
    for k in 0..n {
        // round-half-up of k·dim/n in integer arithmetic
        let start = (2 * k * dim + n) / (2 * n);
        let end = (2 * (k + 1) * dim + n) / (2 * n);
        out.extend(std::iter::repeat_n(k, end - start));
    }
    debug_assert_eq!(out.len(), dim);
    out
}

/// Returns `(m0, m1)`; `m0` holds the even-parity cells, top-left included.
pub fn checkerboard_masks(spec: GridSpec) -> Result<(BinaryMask, BinaryMask), GridError> {
    spec.validate()?;
    let cols = cell_indices(spec.width, spec.n_grids);
    let rows = cell_indices(spec.height, spec.n_grids);
    let m0 = BinaryMask::from_fn(spec.width, spec.height, |x, y| (rows[y] + cols[x]) % 2 == 0);
    let m1 = m0.invert();
    Ok((m0, m1))
}
