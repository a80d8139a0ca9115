// SPDX-License-Identifier: MPL-2.0

//! Zipf sampling over a finite support, by inverse CDF on precomputed
//! cumulative weights (weight of rank k is 1/k^s).

use rand::RngCore;

pub struct Zipf {
    cumulative: Vec<f64>,
}

impl Zipf {
    pub fn new(support: usize, s: f64) -> Self {
        assert!(support >= 1);
        let mut cumulative = Vec::with_capacity(support);
        let mut acc = 0.0;
        for k in 1..=support {
            acc += 1.0 / (k as f64).powf(s);
            cumulative.push(acc);
        }
        let total = acc;
        for c in &mut cumulative {
            *c /= total;
        }
        Zipf { cumulative }
    }

    /// Zero-based rank.
    pub fn sample(&self, rng: &mut dyn RngCore) -> usize {
        let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        self.cumulative.partition_point(|&c| c <= u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn ranks_in_range_and_head_heavy() {
        let z = Zipf::new(1000, 1.03);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut counts = vec![0u64; 1000];
        for _ in 0..100_000 {
            let r = z.sample(&mut rng);
            assert!(r < 1000);
            counts[r] += 1;
        }
        assert!(counts[0] > counts[99] && counts[0] > counts[500]);
    }
}
