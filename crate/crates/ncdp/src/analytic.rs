//! Closed-form performance expressions used to cross-validate the Monte
//! Carlo simulations: the probability that a Poisson population fits in
//! a frame, the full-rank probability of a random GF(2^n) access matrix,
//! and the resulting normalized throughput.

/// Natural log of the Poisson pmf `pois(m; lambda)`.
fn ln_poisson_pmf(m: usize, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if m == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let ln_fact: f64 = (1..=m).map(|i| (i as f64).ln()).sum();
    m as f64 * lambda.ln() - lambda - ln_fact
}

/// Probability that a Poisson(G*S) number of active terminals does not
/// exceed the frame size S.
pub fn prob_active_le_s(g: f64, s: usize) -> f64 {
    let lambda = g * s as f64;
    let mut acc = 0.0;
    for m in 0..=s {
        acc += ln_poisson_pmf(m, lambda).exp();
    }
    acc.min(1.0)
}

/// Probability that `n_tx` columns drawn uniformly from GF(2^n)^S are
/// linearly independent: `prod_{k=0}^{n_tx-1} (1 - 2^{-n(S-k)})`. Zero
/// when `n_tx > s`.
pub fn prob_full_rank(s: usize, n_tx: usize, n: u8) -> f64 {
    if n_tx > s {
        return 0.0;
    }
    let mut log_p = 0.0;
    for k in 0..n_tx {
        let exponent = -(n as f64) * (s - k) as f64 * std::f64::consts::LN_2;
        log_p += (-exponent.exp()).ln_1p();
    }
    log_p.exp()
}

/// Normalized throughput of the coded random-access frame:
/// `Phi = G * sum_m pois(m; GS) * prod_{k=0}^{m} (1 - 2^{-n(S-k)})`,
/// with the product vanishing once the population exceeds the frame.
pub fn throughput_analytic(g: f64, s: usize, n: u8) -> f64 {
    let lambda = g * s as f64;
    let mut acc = 0.0;
    // terms with m >= s contribute zero (the product includes k = m)
    for m in 0..s {
        let p = prob_full_rank(s, m + 1, n);
        if p == 0.0 {
            continue;
        }
        acc += (ln_poisson_pmf(m, lambda) + p.ln()).exp();
    }
    g * acc
}

/// Transmit probability below which the access matrix becomes too sparse
/// for reliable full rank: `ln(S) / S`.
pub fn sparsity_threshold(s: usize) -> f64 {
    (s as f64).ln() / s as f64
}

/// Mean number of transmissions per frame under per-slot transmit
/// probability `p`.
pub fn expected_replicas(s: usize, p: f64) -> f64 {
    s as f64 * p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galois::{Field, FieldMatrix, FieldSpec};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn active_population_fits_frame() {
        // at G = 0.8, S = 100 the frame overflows only rarely
        let p = prob_active_le_s(0.8, 100);
        assert!(p > 0.985 && p < 0.995, "p = {p}");
    }

    #[test]
    fn active_population_degenerate_cases() {
        assert_eq!(prob_active_le_s(0.0, 10), 1.0);
        assert!(prob_active_le_s(5.0, 10) < 1e-3);
    }

    #[test]
    fn full_rank_binary_hand_value() {
        // 2 columns in GF(2)^2: (1 - 1/4)(1 - 1/2) = 0.375
        assert!((prob_full_rank(2, 2, 1) - 0.375).abs() < 1e-15);
        assert_eq!(prob_full_rank(2, 3, 1), 0.0);
        assert_eq!(prob_full_rank(5, 0, 1), 1.0);
    }

    #[test]
    fn full_rank_exhaustive_gf2_small() {
        // enumerate all S x m binary matrices for S <= 4
        for s in 1..=4usize {
            for m in 1..=s {
                let field = Field::new(FieldSpec::with_default_poly(1).unwrap());
                let cells = s * m;
                let total = 1u32 << cells;
                let mut full = 0u64;
                for code in 0..total {
                    let mut mat = FieldMatrix::zeros(field.clone(), s, m);
                    for c in 0..cells {
                        mat.set(c / m, c % m, ((code >> c) & 1) as u16);
                    }
                    if mat.rank() == m {
                        full += 1;
                    }
                }
                let exact = full as f64 / total as f64;
                let formula = prob_full_rank(s, m, 1);
                assert!(
                    (exact - formula).abs() < 1e-12,
                    "S={s} m={m}: {exact} vs {formula}"
                );
            }
        }
    }

    #[test]
    fn full_rank_monte_carlo_gf16() {
        // spot-check a larger field against sampling
        let spec = FieldSpec::with_default_poly(4).unwrap();
        let field = Field::new(spec);
        let (s, m) = (6usize, 5usize);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 20_000;
        let mut full = 0u64;
        for _ in 0..trials {
            let mut mat = FieldMatrix::zeros(field.clone(), s, m);
            for j in 0..s {
                for i in 0..m {
                    mat.set(j, i, rng.gen_range(0..16));
                }
            }
            if mat.rank() == m {
                full += 1;
            }
        }
        let est = full as f64 / trials as f64;
        let formula = prob_full_rank(s, m, 4);
        let sigma = (formula * (1.0 - formula) / trials as f64).sqrt();
        assert!(
            (est - formula).abs() < 4.0 * sigma + 1e-3,
            "{est} vs {formula}"
        );
    }

    #[test]
    fn full_rank_monotone_in_field_size() {
        for n in 1..8u8 {
            assert!(prob_full_rank(10, 8, n) < prob_full_rank(10, 8, n + 1));
        }
    }

    #[test]
    fn throughput_zero_load() {
        assert_eq!(throughput_analytic(0.0, 100, 8), 0.0);
    }

    #[test]
    fn throughput_near_load_when_underloaded() {
        let phi = throughput_analytic(0.1, 100, 8);
        assert!((phi - 0.1).abs() < 1e-3, "phi = {phi}");
    }

    #[test]
    fn throughput_increases_with_field_size() {
        let g = 1.0;
        let mut last = 0.0;
        for n in [1u8, 2, 4, 8] {
            let phi = throughput_analytic(g, 50, n);
            assert!(phi > last, "n = {n}: {phi} <= {last}");
            last = phi;
        }
    }

    #[test]
    fn sparsity_reference_values() {
        // ln(100)/100 = 0.0461, ln(1000)/1000 = 0.0069
        assert!((sparsity_threshold(100) - 0.0461).abs() < 5e-4);
        assert!((sparsity_threshold(1000) - 0.0069).abs() < 5e-5);
    }

    #[test]
    fn expected_replica_reference_values() {
        // S = 150: p = 0.0453 gives ~6.8 transmissions, p = 1 - 2^-8
        // gives 149.415
        assert!((expected_replicas(150, 0.0453) - 6.795).abs() < 1e-10);
        assert!((expected_replicas(150, 1.0 - 2f64.powi(-8)) - 149.4140625).abs() < 1e-9);
    }
}
