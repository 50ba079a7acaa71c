//! Brake Galerkin counts against brake indices on random reversible coefficients.

use std::f64::consts::PI;

use maslovkit::brake::brake_indices;
use maslovkit::dual_morse::brake_assemble_and_count;
use maslovkit::index::IndexOptions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::random_reversible;

#[test]
fn brake_counts_match_brake_indices() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = IndexOptions::default();
    for _ in 0..6 {
        let n = rng.random_range(1..=2);
        let tau = [2.0, PI, 2.0 * PI][rng.random_range(0..3)];
        let b = random_reversible(&mut rng, n, tau);
        let lo = (0..64)
            .map(|q| b.eval(tau * q as f64 / 64.0).symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min);
        let k = lo - 0.2 - rng.random_range(0.0..1.0);
        let (_, c) = brake_assemble_and_count(&b, k, 64).unwrap();
        let r = brake_indices(&b, 2048, &opts).unwrap();
        let floor = (k * tau / (2.0 * PI)).floor() as i64;
        assert!(c.converged);
        assert_eq!(
            c.m_minus as i64,
            r.mu1 - n as i64 * floor,
            "n={n} tau={tau} k={k}"
        );
        assert_eq!(c.m_zero, r.nu1);
    }
}
