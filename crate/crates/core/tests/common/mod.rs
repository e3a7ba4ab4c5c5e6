#![allow(dead_code)]

use jointcon::{ChannelSet, Constellation};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Gauss–Hermite nodes and weights for the weight e^{-x²} (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let weights = (0..n).map(|i| sqrt_pi * eig.eigenvectors[(0, i)].powi(2)).collect();
    (eig.eigenvalues.iter().copied().collect(), weights)
}

/// E[f(Z)] for Z ~ N(0, 1).
pub fn expect_normal(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let (x, w) = gauss_hermite(n);
    let s: f64 = x.iter().zip(&w).map(|(&x, &w)| w * f(std::f64::consts::SQRT_2 * x)).sum();
    s / std::f64::consts::PI.sqrt()
}

/// Mutual information of ±1 over real Gaussian noise of variance `sigma2`, with
/// the quadrature carried out over the noise.
pub fn bpsk_mi_quadrature(sigma2: f64) -> f64 {
    let sigma = sigma2.sqrt();
    let eq = expect_normal(
        |z| {
            let a = -2.0 * (1.0 + sigma * z) / sigma2;
            // log2(1 + e^a), stable for large |a|
            (a.max(0.0) + (-a.abs()).exp().ln_1p()) / std::f64::consts::LN_2
        },
        120,
    );
    1.0 - eq
}

pub fn scalar_bpsk(noise_var: f64) -> (Constellation, ChannelSet) {
    let x = Constellation::new(1, vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]).unwrap();
    let chan = ChannelSet::from_normalized(
        vec![DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0))],
        vec![noise_var],
    )
    .unwrap();
    (x, chan)
}
