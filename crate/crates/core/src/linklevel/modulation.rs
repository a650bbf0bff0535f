//! Unit-energy constellations.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

/// 0 -> +1, 1 -> -1.
pub fn bpsk_map(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b & 1 == 0 { 1.0 } else { -1.0 }).collect()
}

/// Sign decision; zero maps to bit 0.
pub fn bpsk_demap(symbols: &[f64]) -> Vec<u8> {
    symbols.iter().map(|&s| u8::from(s < 0.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Constellation {
    #[default]
    Bpsk,
    /// Gray-mapped QPSK.
    Qpsk,
}

impl Constellation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Bpsk => 1,
            Constellation::Qpsk => 2,
        }
    }

    /// Points in bit-label order: point `i` carries the bits of `i`, MSB first.
    pub fn points(self) -> Vec<Complex64> {
        match self {
            Constellation::Bpsk => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            Constellation::Qpsk => (0..4)
                .map(|i| {
                    let re = if i & 2 == 0 { 1.0 } else { -1.0 };
                    let im = if i & 1 == 0 { 1.0 } else { -1.0 };
                    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
                })
                .collect(),
        }
    }

    /// Groups `bits` into point indices; the length must be a multiple of
    /// the bits per symbol.
    pub fn bits_to_indices(self, bits: &[u8]) -> Vec<usize> {
        let m = self.bits_per_symbol();
        bits.chunks_exact(m)
            .map(|c| c.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize))
            .collect()
    }

    pub fn indices_to_bits(self, indices: &[usize]) -> Vec<u8> {
        let m = self.bits_per_symbol();
        indices
            .iter()
            .flat_map(|&i| (0..m).rev().map(move |j| ((i >> j) & 1) as u8))
            .collect()
    }

    pub fn map(self, bits: &[u8]) -> Vec<Complex64> {
        let pts = self.points();
        self.bits_to_indices(bits).into_iter().map(|i| pts[i]).collect()
    }
}
