//! Seeded sample generators.
//!
//! The generator is SplitMix64 so that other implementations can reproduce
//! the same point sets bit for bit:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! return z ^ (z >> 31)
//! ```
//!
//! A uniform double in `[0, 1)` is `(next() >> 11) · 2⁻⁵³`. Points uniform in
//! the disc (or the ball of `ℂ^d`) are drawn by rejection from the cube
//! `[-1, 1)^{2d}`, real parts before imaginary parts for each coordinate,
//! then scaled by the requested radius.

use num_complex::Complex64;

use crate::kernels::Point;

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-1, 1)`.
    pub fn next_signed(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }

    pub fn next_index(&mut self, bound: usize) -> usize {
        (self.next_f64() * bound as f64) as usize % bound.max(1)
    }
}

/// `n` points uniform in the ball of radius `radius` in `ℂ^dim`.
pub fn uniform_ball(n: usize, dim: usize, radius: f64, seed: u64) -> Vec<Point> {
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let coords: Vec<Complex64> = (0..dim)
            .map(|_| {
                let re = rng.next_signed();
                let im = rng.next_signed();
                Complex64::new(re, im)
            })
            .collect();
        let norm_sq: f64 = coords.iter().map(|z| z.norm_sqr()).sum();
        if norm_sq < 1.0 {
            out.push(Point::new(coords.into_iter().map(|z| z * radius).collect()));
        }
    }
    out
}

/// `n` points uniform in the disc of radius `radius`.
pub fn uniform_disc(n: usize, radius: f64, seed: u64) -> Vec<Point> {
    uniform_ball(n, 1, radius, seed)
}

/// Points `r·e^{iθ}` for every pair `(r, θ)`, radii varying fastest.
pub fn radial_grid(radii: &[f64], thetas: &[f64]) -> Vec<Point> {
    thetas
        .iter()
        .flat_map(|&t| radii.iter().map(move |&r| Point::disc(Complex64::from_polar(r, t))))
        .collect()
}
