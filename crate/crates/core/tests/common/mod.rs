//! Independent reference computations.
//!
//! Nothing here goes through the library's linear algebra or random streams:
//! unitaries come from Gram-Schmidt on Ginibre columns drawn with `StdRng`,
//! and probabilities are computed from amplitudes by hand.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

pub type Mat = Vec<Vec<Complex64>>;

fn gaussian(rng: &mut StdRng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Haar unitary as rows `u[i][j]`, columns orthonormalized in order.
pub fn haar(d: usize, rng: &mut StdRng) -> Mat {
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut v: Vec<Complex64> = (0..d).map(|_| gaussian(rng)).collect();
        for q in &cols {
            let proj: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= proj * qi;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|z| z / norm).collect());
    }
    (0..d).map(|i| (0..d).map(|j| cols[j][i]).collect()).collect()
}

/// Success probability of the identity map for `Σ_i |ii⟩/√d` after `U⊗U`:
/// the output amplitudes are `(U Uᵀ)_{ab}/√d`.
pub fn max_entangled_identity_success(u: &Mat) -> f64 {
    let d = u.len();
    (0..d)
        .map(|i| {
            let uut: Complex64 = (0..d).map(|k| u[i][k] * u[i][k]).sum();
            uut.norm_sqr() / d as f64
        })
        .sum()
}

/// `(mean, standard error)` of the qutrit channel success over `trials` draws.
pub fn qutrit_channel_reference(trials: usize, seed: u64) -> (f64, f64) {
    let mut rng = StdRng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..trials)
        .map(|_| max_entangled_identity_success(&haar(3, &mut rng)))
        .collect();
    mean_se(&xs)
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Joint outcome probabilities `|⟨b_i b_j|ψ⟩|²` for a pure state with
/// amplitudes `psi[a*d + b]` and basis vectors given as columns of `basis`.
pub fn pure_joint(psi: &[Complex64], basis: &Mat) -> Vec<Vec<f64>> {
    let d = basis.len();
    let mut p = vec![vec![0.0; d]; d];
    for (i, row) in p.iter_mut().enumerate() {
        for (j, pij) in row.iter_mut().enumerate() {
            let mut amp = Complex64::new(0.0, 0.0);
            for a in 0..d {
                for b in 0..d {
                    amp += (basis[a][i] * basis[b][j]).conj() * psi[a * d + b];
                }
            }
            *pij = amp.norm_sqr();
        }
    }
    p
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(d - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, d - 1);
            out.push(q);
        }
    }
    out
}

/// `1 − max_π Σ_i P(i, π(i))` by listing every permutation.
pub fn brute_force_leakage(p: &[Vec<f64>]) -> f64 {
    let best = permutations(p.len())
        .into_iter()
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| p[i][j]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    1.0 - best
}

/// Purity of `G G† / Tr` for an `n×n` complex Ginibre `G`, computed entrywise.
pub fn induced_purity(n: usize, rng: &mut StdRng) -> f64 {
    let g: Mat = (0..n).map(|_| (0..n).map(|_| gaussian(rng)).collect()).collect();
    let mut rho = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            rho[i][j] = (0..n).map(|k| g[i][k] * g[j][k].conj()).sum();
        }
    }
    let tr: f64 = (0..n).map(|i| rho[i][i].re).sum();
    let mut purity = 0.0;
    for i in 0..n {
        for j in 0..n {
            purity += rho[i][j].norm_sqr();
        }
    }
    purity / (tr * tr)
}
