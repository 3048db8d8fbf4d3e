//! Fixed ±1 Johnson–Lindenstrauss sign matrix.
//!
//! Entries are derived bit-exactly from `(seed, row, column)` so that any
//! implementation can regenerate the matrix an index was built with:
//!
//! ```text
//! mix(x)  = splitmix64 finalizer of x + 0x9E3779B97F4A7C15
//! word    = mix(seed ^ mix((row << 32) | (col / 64)))
//! bit     = (word >> (63 - col % 64)) & 1
//! entry   = if bit == 1 { -1 } else { +1 }
//! ```
//!
//! All arithmetic is wrapping on `u64`. The first column of each 64-column
//! block takes its sign from the high bit of the block's word.

use super::vector::norm;
use super::{BaseVector, EmbedError, ReducedVector, Result, REDUCED_DIM, ZERO_NORM};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn block_word(seed: u64, row: usize, block: usize) -> u64 {
    mix(seed ^ mix(((row as u64) << 32) | block as u64))
}

/// `256 × d` matrix of signs, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JlMatrix {
    seed: u64,
    cols: usize,
    signs: Vec<i8>,
    /// Same entries, column-major.
    by_column: Vec<i8>,
}

impl JlMatrix {
    pub fn new(seed: u64, d: usize) -> Result<Self> {
        if d < REDUCED_DIM {
            return Err(EmbedError::InvalidDimension(d));
        }
        let mut signs = Vec::with_capacity(REDUCED_DIM * d);
        for row in 0..REDUCED_DIM {
            for block in 0..d.div_ceil(64) {
                let word = block_word(seed, row, block);
                let width = (d - block * 64).min(64);
                signs.extend((0..width).map(|j| if (word >> (63 - j)) & 1 == 1 { -1 } else { 1 }));
            }
        }
        let mut by_column = vec![0i8; signs.len()];
        for row in 0..REDUCED_DIM {
            for col in 0..d {
                by_column[col * REDUCED_DIM + row] = signs[row * d + col];
            }
        }
        Ok(Self { seed, cols: d, signs, by_column })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        REDUCED_DIM
    }

    pub fn entry(&self, row: usize, col: usize) -> i8 {
        self.signs[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.signs[row * self.cols..(row + 1) * self.cols]
    }

    /// Raw row-major entries.
    pub fn as_slice(&self) -> &[i8] {
        &self.signs
    }

    /// `norm(Rx)`.
    pub fn project(&self, x: &BaseVector) -> Result<ReducedVector> {
        x.check_dim(self.cols)?;
        if x.norm() < ZERO_NORM {
            return Err(EmbedError::ZeroVector);
        }
        // Each output still accumulates its terms in column order.
        let mut y = [0.0f64; REDUCED_DIM];
        for (col, &v) in self.by_column.chunks_exact(REDUCED_DIM).zip(x.as_slice()) {
            for (out, &s) in y.iter_mut().zip(col) {
                *out += f64::from(s) * v;
            }
        }
        let n = norm(&y);
        if n < ZERO_NORM {
            return Err(EmbedError::ZeroVector);
        }
        y.iter_mut().for_each(|v| *v /= n);
        Ok(ReducedVector::from_components(y))
    }
}

pub fn jl_project(x: &BaseVector, r: &JlMatrix) -> Result<ReducedVector> {
    r.project(x)
}
