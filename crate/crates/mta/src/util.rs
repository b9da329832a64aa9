//! Small numeric helpers: seed mixing for reproducible substreams and
//! compensated summation for order-stable aggregation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; decorrelates nearby integer inputs.
pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministically derives a child seed from a base seed and an index path
/// such as `[replicate, task]`.
pub(crate) fn mix_seed(seed: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ 0xD6E8_FEB8_6659_FD93);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p ^ 0xA076_1D64_78BD_642F));
    }
    h
}

/// An independent random stream for the given index path. Streams built from
/// the same `(seed, path)` are identical regardless of platform, thread
/// count, or the order in which sibling streams are consumed.
pub(crate) fn substream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut s = mix_seed(seed, path);
    for chunk in key.chunks_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Kahan compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Mean of the squared differences over all ordered pairs (r, s), r != s:
/// `(1/(T(T-1))) sum_{r,s} (x_r - x_s)^2`, computed in O(T) via the
/// shift-invariant identity `2 * sum (x - mean)^2 / (T - 1)`.
pub(crate) fn mean_squared_pairwise_diff(values: &[f64]) -> f64 {
    let t = values.len();
    if t < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / t as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    2.0 * ss / (t - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::RngCore;

    #[test]
    fn substream_is_deterministic_and_path_sensitive() {
        let mut a = substream(7, &[1, 2]);
        let mut b = substream(7, &[1, 2]);
        let mut c = substream(7, &[2, 1]);
        assert_eq!(a.next_u64(), b.next_u64());
        assert_ne!(a.next_u64(), c.next_u64());
    }

    #[test]
    fn pairwise_diff_matches_double_sum() {
        let xs = [0.3, -1.2, 4.5, 0.0, 2.2];
        let t = xs.len();
        let mut total = 0.0;
        for r in 0..t {
            for s in 0..t {
                total += (xs[r] - xs[s]) * (xs[r] - xs[s]);
            }
        }
        let brute = total / (t * (t - 1)) as f64;
        let fast = mean_squared_pairwise_diff(&xs);
        assert!((brute - fast).abs() < 1e-12 * brute.max(1.0));
    }

    #[test]
    fn pairwise_diff_is_shift_invariant() {
        let xs = [1.0, 2.0, 5.0];
        let shifted: Vec<f64> = xs.iter().map(|v| v + 123.456).collect();
        let a = mean_squared_pairwise_diff(&xs);
        let b = mean_squared_pairwise_diff(&shifted);
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn kahan_sums_small_terms_stably() {
        let mut k = KahanSum::default();
        k.add(1.0);
        for _ in 0..1_000_000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-10)).abs() < 1e-14);
    }
}
