// SPDX-License-Identifier: MPL-2.0

//! Differential-privacy layer: discrete Laplace noise for published
//! prefix-count shares, the advanced-composition budget calculator, and the
//! noise/deployment sizing helpers.
//!
//! Each server independently noises every value share it publishes, so
//! neither server sees the other's exact share. A reconstructed weight then
//! carries the sum of two independent rounded Laplace draws.
//!
//! Throughout, `kappa` is the tail parameter: the probability that the two
//! servers' collective noise on one query exceeds `2·kappa/epsilon` in
//! magnitude is at most `exp(-kappa)`.

use rand::RngCore;

/// One rounded draw from Laplace(0, 1/epsilon), rounded half-away-from-zero.
pub fn sample_noise(epsilon: f64, rng: &mut dyn RngCore) -> i64 {
    assert!(epsilon > 0.0, "epsilon must be positive");
    // Inverse CDF: u uniform in (-1/2, 1/2), x = -sign(u)·(1/ε)·ln(1-2|u|).
    let u = loop {
        let r = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        if r > -0.5 {
            break r;
        }
    };
    let x = -u.signum() / epsilon * (1.0 - 2.0 * u.abs()).ln();
    // f64::round is half-away-from-zero, matching the frozen convention.
    x.round() as i64
}

/// Advanced composition: the overall privacy parameter for `q` queries at
/// per-query `epsilon` and slack `delta`:
/// `ε' = √(2q·ln(1/δ))·ε + q·ε·(e^ε − 1)`. Defined as 0 for `q = 0`.
pub fn compose(epsilon: f64, queries: u64, delta: f64) -> f64 {
    assert!(epsilon > 0.0 && delta > 0.0 && delta < 1.0);
    if queries == 0 {
        return 0.0;
    }
    let q = queries as f64;
    (2.0 * q * (1.0 / delta).ln()).sqrt() * epsilon + q * epsilon * (epsilon.exp() - 1.0)
}

/// Per-query deviation bound `2·kappa/epsilon` (exceeded with probability at
/// most `exp(-kappa)`), rounded to the nearest integer.
pub fn noise_bound(epsilon: f64, kappa: f64) -> i64 {
    assert!(epsilon > 0.0 && kappa >= 0.0);
    (2.0 * kappa / epsilon).round() as i64
}

/// Minimum number of clients so that the per-query noise bound stays below
/// `slack · t` for threshold `t = tau · clients`: the smallest `C` with
/// `2·kappa/epsilon < slack · tau · C`.
pub fn min_clients(tau: f64, epsilon: f64, slack: f64, kappa: f64) -> u64 {
    assert!(tau > 0.0 && tau <= 1.0 && epsilon > 0.0 && slack > 0.0 && kappa >= 0.0);
    let mut c = (2.0 * kappa / (epsilon * slack * tau)).floor() as u64 + 1;
    // Walk across any floating-point boundary so the strict inequality holds.
    while 2.0 * kappa / epsilon >= slack * tau * c as f64 {
        c += 1;
    }
    while c > 1 && 2.0 * kappa / epsilon < slack * tau * (c - 1) as f64 {
        c -= 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn compose_example_parameters() {
        // ε = 0.001, q = 100·n with n = 256, δ = 2^-40 → ε' ≈ 1.22.
        let e = compose(0.001, 25_600, 2f64.powi(-40));
        assert!((e - 1.22).abs() < 0.01, "ε' = {e}");
        assert_eq!(compose(0.001, 0, 2f64.powi(-40)), 0.0);
    }

    #[test]
    fn compose_matches_independent_evaluation() {
        // Re-derive with a separately-coded path (ln(1/δ) = 40·ln 2 and
        // exp_m1) and require 1e-6 relative agreement.
        let eps = 0.001f64;
        let q = 25_600f64;
        let oracle = (2.0 * q * (40.0 * std::f64::consts::LN_2)).sqrt() * eps
            + q * eps * eps.exp_m1();
        let got = compose(eps, 25_600, 2f64.powi(-40));
        assert!(((got - oracle) / oracle).abs() < 1e-6);
    }

    #[test]
    fn compose_monotonicity() {
        let delta = 1e-9;
        let mut prev = 0.0;
        for q in [1u64, 10, 100, 1000, 10_000] {
            let e = compose(0.001, q, delta);
            assert!(e > prev);
            prev = e;
        }
        let mut prev = 0.0;
        for eps in [1e-4, 1e-3, 1e-2, 1e-1] {
            let e = compose(eps, 1000, delta);
            assert!(e > prev);
            prev = e;
        }
        // Decreasing in delta (larger delta, smaller epsilon').
        assert!(compose(0.001, 1000, 1e-12) > compose(0.001, 1000, 1e-6));
    }

    #[test]
    fn bound_and_sizing_examples() {
        assert_eq!(noise_bound(0.001, 30.0), 60_000);
        assert_eq!(noise_bound(0.1, 0.0), 0);
        // t = 0.01·C and slack 0.05 reproduce the 4000·κ/C < ε rule (up to
        // float rounding at the exact boundary).
        for kappa in [1.0f64, 10.0, 30.0] {
            for eps in [0.001f64, 0.01] {
                let c = min_clients(0.01, eps, 0.05, kappa);
                assert!(2.0 * kappa / eps < 0.05 * 0.01 * c as f64, "bound violated");
                assert!(
                    2.0 * kappa / eps >= 0.05 * 0.01 * (c - 1) as f64,
                    "C not minimal: {c}"
                );
                assert!(4000.0 * kappa / (c as f64) < eps * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn sampler_mean_and_extreme_epsilon() {
        let mut rng = ChaCha20Rng::seed_from_u64(60);
        let eps = 0.1;
        let n = 1_000_000u64;
        let mut sum: i64 = 0;
        for _ in 0..n {
            sum += sample_noise(eps, &mut rng);
        }
        let mean = sum as f64 / n as f64;
        // std of the mean is (√2/ε)/√n ≈ 0.01414; allow 3σ.
        let bound = 3.0 * (std::f64::consts::SQRT_2 / eps) / (n as f64).sqrt();
        assert!(mean.abs() < bound, "mean {mean} vs {bound}");

        // ε → ∞: the noise collapses to zero.
        for _ in 0..10_000 {
            assert_eq!(sample_noise(1e6, &mut rng), 0);
        }
    }

    #[test]
    fn collective_tail_bound() {
        // P(|X₁+X₂| > 2κ/ε) ≤ exp(-κ) for the two servers' combined noise.
        let mut rng = ChaCha20Rng::seed_from_u64(61);
        let (eps, kappa) = (0.1f64, 5.0f64);
        let bound = noise_bound(eps, kappa);
        let n = 100_000u64;
        let mut exceed = 0u64;
        for _ in 0..n {
            let s = sample_noise(eps, &mut rng) + sample_noise(eps, &mut rng);
            if s.abs() > bound {
                exceed += 1;
            }
        }
        let p = (-kappa).exp();
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (exceed as f64 / n as f64) <= p + 3.0 * sigma,
            "rate {} vs e^-κ {}",
            exceed as f64 / n as f64,
            p
        );
    }

    #[test]
    fn two_draw_convolution_matches_analytic() {
        // Empirical histogram of the summed rounded draws against the
        // analytic convolution of the rounded-Laplace pmf, coarse chi-square.
        let eps = 0.5f64;
        let b = 1.0 / eps;
        // pmf of one rounded draw: P(0) = 1 - e^{-1/(2b)}, and for k ≥ 1
        // P(±k) = (e^{1/(2b)} - e^{-1/(2b)})/2 · e^{-k/b}.
        let range = 25usize;
        let mut pmf = vec![0.0f64; 2 * range + 1];
        let half = (-0.5 / b).exp();
        pmf[range] = 1.0 - half;
        for k in 1..=range {
            let p = 0.5 * ((0.5 / b).exp() - (-0.5f64 / b).exp()) * (-(k as f64) / b).exp();
            pmf[range + k] = p;
            pmf[range - k] = p;
        }
        // convolve
        let mut conv = vec![0.0f64; 4 * range + 1];
        for i in 0..pmf.len() {
            for j in 0..pmf.len() {
                conv[i + j] += pmf[i] * pmf[j];
            }
        }
        let mut rng = ChaCha20Rng::seed_from_u64(62);
        let n = 200_000u64;
        let mut counts = vec![0u64; conv.len()];
        let mut clipped = 0;
        for _ in 0..n {
            let s = sample_noise(eps, &mut rng) + sample_noise(eps, &mut rng);
            let idx = s + 2 * range as i64;
            if idx < 0 || idx >= conv.len() as i64 {
                clipped += 1;
            } else {
                counts[idx as usize] += 1;
            }
        }
        assert!(clipped < 5, "tail mass outside ±{range} too large");
        let mut chi2 = 0.0;
        let mut dof = 0;
        for (c, p) in counts.iter().zip(&conv) {
            let e = p * n as f64;
            if e >= 20.0 {
                chi2 += (*c as f64 - e) * (*c as f64 - e) / e;
                dof += 1;
            }
        }
        // dof ≈ 40; chi2 < 120 is a loose gross-bias gate.
        assert!(chi2 < 120.0, "chi2 = {chi2} over {dof} cells");
    }
}
