//! Counter-based deterministic random number generation.
//!
//! Every stochastic operation in the library takes an explicit seed and
//! derives independent streams by splitting, so results never depend on
//! thread scheduling or call order across components. The generator is
//! SplitMix64 run in counter mode: the i-th output is a pure function of
//! (key, i), and `split` derives a new key from (key, tag).

use crate::linalg::Matrix;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const KEY_SALT: u64 = 0xA076_1D64_78BD_642F;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Splittable deterministic generator. Cloning forks the exact stream state.
#[derive(Debug, Clone)]
pub struct DetRng {
    key: u64,
    counter: u64,
    /// Unused second output of the last Box-Muller pair.
    spare_normal: Option<f64>,
}

impl DetRng {
    pub fn new(seed: u64) -> Self {
        DetRng {
            key: mix(seed ^ KEY_SALT),
            counter: 0,
            spare_normal: None,
        }
    }

    /// Derive an independent stream identified by `tag`. Does not advance self.
    pub fn split(&self, tag: u64) -> Self {
        DetRng {
            key: mix(self.key ^ mix(tag.wrapping_add(GOLDEN))),
            counter: 0,
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let c = self.counter;
        self.counter += 1;
        mix(self.key.wrapping_add(c.wrapping_mul(GOLDEN)))
    }

    /// Uniform in [0, 1) with 53 bits of mantissa.
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_uniform()
    }

    /// Standard normal via Box-Muller. Pairs are generated together and the
    /// second member cached, so two consecutive draws consume two raw draws.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // First draw mapped to (0, 1] so the logarithm is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next_normal()).collect()
    }

    pub fn fill_normal(&mut self, buf: &mut [f64]) {
        for slot in buf.iter_mut() {
            *slot = self.next_normal();
        }
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        let data = self.normal_vec(rows * cols);
        Matrix::from_raw(rows, cols, data)
    }

    pub fn uniform_matrix(&mut self, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
        let data = (0..rows * cols).map(|_| self.next_uniform_in(lo, hi)).collect();
        Matrix::from_raw(rows, cols, data)
    }
}
