//! Feedforward convolutional code with zero-tail termination and a
//! hard-decision Viterbi decoder.

use crate::{Error, Result};

/// Generator set of a rate-1/n feedforward code.
///
/// Generators are written in octal with the most significant tap applied to
/// the newest input bit, e.g. `(133, 171)` for the constraint-length-7
/// industry-standard code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSpec {
    pub constraint_length: usize,
    pub generators: Vec<u32>,
}

impl CodeSpec {
    pub fn new(constraint_length: usize, generators_octal: &[&str]) -> Result<Self> {
        if !(2..=16).contains(&constraint_length) {
            return Err(Error::invalid(format!(
                "unsupported constraint length {constraint_length}"
            )));
        }
        if generators_octal.is_empty() {
            return Err(Error::invalid("at least one generator is required"));
        }
        let generators = generators_octal
            .iter()
            .map(|g| u32::from_str_radix(g, 8).map_err(|_| Error::invalid(format!("bad octal generator `{g}`"))))
            .collect::<Result<Vec<_>>>()?;
        let limit = 1u32 << constraint_length;
        if generators.iter().any(|&g| g == 0 || g >= limit) {
            return Err(Error::invalid("generator does not fit the constraint length"));
        }
        if generators.iter().all(|&g| g & (limit >> 1) == 0) {
            return Err(Error::invalid("no generator taps the newest input bit"));
        }
        Ok(Self {
            constraint_length,
            generators,
        })
    }

    /// K = 7, generators 133 and 171 (octal), rate 1/2.
    pub fn k7_rate_half() -> Self {
        Self::new(7, &["133", "171"]).expect("static code is valid")
    }

    pub fn outputs_per_bit(&self) -> usize {
        self.generators.len()
    }

    /// Code rate including neither puncturing nor tail.
    pub fn rate(&self) -> f64 {
        1.0 / self.outputs_per_bit() as f64
    }

    pub fn memory(&self) -> usize {
        self.constraint_length - 1
    }

    pub fn states(&self) -> usize {
        1 << self.memory()
    }

    /// Coded length for `info_len` input bits.
    pub fn coded_len(&self, info_len: usize) -> usize {
        self.outputs_per_bit() * (info_len + self.memory())
    }

    /// Largest info length whose codeword fits `coded_len` bits.
    pub fn info_len_for(&self, coded_len: usize) -> Option<usize> {
        (coded_len / self.outputs_per_bit()).checked_sub(self.memory())
    }

    /// Output bits for `input` entering the encoder in `state`.
    fn branch(&self, state: usize, input: u8) -> (usize, u32) {
        let window = ((input as usize) << self.memory()) | state;
        let mut out = 0u32;
        for (i, &g) in self.generators.iter().enumerate() {
            out |= (((window as u32) & g).count_ones() & 1) << i;
        }
        (window >> 1, out)
    }
}

/// Encodes `bits` and flushes the register with `K - 1` zeros.
pub fn conv_encode(bits: &[u8], code: &CodeSpec) -> Vec<u8> {
    let mut state = 0;
    let mut out = Vec::with_capacity(code.coded_len(bits.len()));
    let tail = std::iter::repeat_n(0u8, code.memory());
    for b in bits.iter().copied().chain(tail) {
        let (next, word) = code.branch(state, b & 1);
        for i in 0..code.outputs_per_bit() {
            out.push(((word >> i) & 1) as u8);
        }
        state = next;
    }
    out
}

/// Hard-decision Viterbi decoding of a zero-tail terminated codeword.
///
/// Branch metric is the Hamming distance; among equal metrics the
/// lower-numbered predecessor survives.
pub fn viterbi_decode(coded: &[u8], code: &CodeSpec) -> Result<Vec<u8>> {
    let n_out = code.outputs_per_bit();
    if !coded.len().is_multiple_of(n_out) {
        return Err(Error::invalid(format!(
            "coded length {} is not a multiple of {n_out}",
            coded.len()
        )));
    }
    let steps = coded.len() / n_out;
    let info_len = steps
        .checked_sub(code.memory())
        .ok_or_else(|| Error::invalid("codeword shorter than the encoder tail"))?;

    let states = code.states();
    let table: Vec<[(usize, u32); 2]> = (0..states).map(|s| [code.branch(s, 0), code.branch(s, 1)]).collect();

    const UNREACHED: u32 = u32::MAX / 2;
    let mut metric = vec![UNREACHED; states];
    metric[0] = 0;
    let mut next_metric = vec![UNREACHED; states];
    // survivors[t * states + s] = predecessor state of s at step t
    let mut survivors = vec![0u16; steps * states];

    for (t, chunk) in coded.chunks_exact(n_out).enumerate() {
        let received = chunk
            .iter()
            .enumerate()
            .fold(0u32, |acc, (i, &b)| acc | (((b & 1) as u32) << i));
        next_metric.fill(UNREACHED);
        let limit_input = if t >= info_len { 1 } else { 2 };
        for s in 0..states {
            if metric[s] >= UNREACHED {
                continue;
            }
            for &(ns, word) in &table[s][..limit_input] {
                let m = metric[s] + (word ^ received).count_ones();
                if m < next_metric[ns] {
                    next_metric[ns] = m;
                    survivors[t * states + ns] = s as u16;
                }
            }
        }
        std::mem::swap(&mut metric, &mut next_metric);
    }

    let mut bits = vec![0u8; steps];
    let mut state = 0usize;
    for t in (0..steps).rev() {
        // the input that led into `state` is its top register bit
        bits[t] = (state >> (code.memory() - 1)) as u8 & 1;
        state = survivors[t * states + state] as usize;
    }
    bits.truncate(info_len);
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use rand::Rng;

    /// Direct polynomial convolution over GF(2), one generator at a time.
    fn convolve(bits: &[u8], generator_octal: &str, k: usize) -> Vec<u8> {
        let g = u32::from_str_radix(generator_octal, 8).unwrap();
        // taps[j] multiplies the input delayed by j
        let taps: Vec<u8> = (0..k).map(|j| ((g >> (k - 1 - j)) & 1) as u8).collect();
        let padded: Vec<u8> = bits.iter().copied().chain(std::iter::repeat_n(0, k - 1)).collect();
        (0..padded.len())
            .map(|t| {
                (0..k)
                    .filter(|&j| j <= t)
                    .fold(0, |acc, j| acc ^ (taps[j] & padded[t - j]))
            })
            .collect()
    }

    #[test]
    fn zero_in_zero_out() {
        let code = CodeSpec::k7_rate_half();
        let out = conv_encode(&[0; 20], &code);
        assert_eq!(out.len(), 2 * 26);
        assert!(out.iter().all(|&b| b == 0));
    }

    #[test]
    fn impulse_response_is_generator_taps() {
        let code = CodeSpec::k7_rate_half();
        let out = conv_encode(&[1], &code);
        let g0 = convolve(&[1], "133", 7);
        let g1 = convolve(&[1], "171", 7);
        assert_eq!(g0, vec![1, 0, 1, 1, 0, 1, 1]);
        assert_eq!(g1, vec![1, 1, 1, 1, 0, 0, 1]);
        let interleaved: Vec<u8> = g0.iter().zip(&g1).flat_map(|(&a, &b)| [a, b]).collect();
        assert_eq!(out, interleaved);
    }

    #[test]
    fn encoder_matches_polynomial_convolution() {
        let code = CodeSpec::k7_rate_half();
        let mut rng = rng_from(1);
        let bits: Vec<u8> = (0..50).map(|_| rng.random_range(0..2)).collect();
        let a = convolve(&bits, "133", 7);
        let b = convolve(&bits, "171", 7);
        let expected: Vec<u8> = a.iter().zip(&b).flat_map(|(&x, &y)| [x, y]).collect();
        assert_eq!(conv_encode(&bits, &code), expected);
    }

    #[test]
    fn noiseless_roundtrip() {
        let code = CodeSpec::k7_rate_half();
        let mut rng = rng_from(2);
        for len in [0, 1, 7, 100, 314] {
            let bits: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
            assert_eq!(viterbi_decode(&conv_encode(&bits, &code), &code).unwrap(), bits);
        }
    }

    #[test]
    fn corrects_every_single_error() {
        let code = CodeSpec::k7_rate_half();
        let mut rng = rng_from(3);
        let bits: Vec<u8> = (0..100).map(|_| rng.random_range(0..2)).collect();
        let clean = conv_encode(&bits, &code);
        for pos in 0..clean.len() {
            let mut noisy = clean.clone();
            noisy[pos] ^= 1;
            assert_eq!(viterbi_decode(&noisy, &code).unwrap(), bits, "flip at {pos}");
        }
    }

    #[test]
    fn decoder_is_maximum_likelihood() {
        let code = CodeSpec::k7_rate_half();
        let mut rng = rng_from(4);
        for info_len in [4usize, 8, 12] {
            let codebook: Vec<Vec<u8>> = (0..1u32 << info_len)
                .map(|w| {
                    let bits: Vec<u8> = (0..info_len).map(|i| ((w >> i) & 1) as u8).collect();
                    conv_encode(&bits, &code)
                })
                .collect();
            for _ in 0..20 {
                let received: Vec<u8> = (0..code.coded_len(info_len)).map(|_| rng.random_range(0..2)).collect();
                let dist = |c: &[u8]| c.iter().zip(&received).filter(|(a, b)| a != b).count();
                let best = codebook.iter().map(|c| dist(c)).min().unwrap();
                let decoded = viterbi_decode(&received, &code).unwrap();
                assert_eq!(dist(&conv_encode(&decoded, &code)), best);
            }
        }
    }

    #[test]
    fn rejects_bad_lengths_and_specs() {
        let code = CodeSpec::k7_rate_half();
        assert!(viterbi_decode(&[0; 5], &code).is_err());
        assert!(viterbi_decode(&[0; 10], &code).is_err());
        assert!(CodeSpec::new(3, &["9"]).is_err());
        assert!(CodeSpec::new(3, &["17"]).is_err());
        assert!(CodeSpec::new(3, &["3"]).is_err());
        assert_eq!(code.info_len_for(640), Some(314));
    }
}
