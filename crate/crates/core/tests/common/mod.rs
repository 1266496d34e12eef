//! Shared oracles for the integration and acceptance targets.
#![allow(dead_code)]

use mhflab::linalg::C64;
use mhflab::many_body::{FockBasis, ModeIntegrals};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random Hermitian one-body matrix and a two-body matrix that is
/// Hermitian on K² and symmetric under swapping the two particles.
pub fn random_integrals(modes: usize, seed: u64) -> ModeIntegrals {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| {
        let a = Array2::from_shape_fn((n, n), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        &a + &a.t().mapv(|z| z.conj())
    };
    let one_body = draw(modes);
    let m = draw(modes * modes);
    let swap = |r: usize| (r % modes) * modes + r / modes;
    let two_body = Array2::from_shape_fn((modes * modes, modes * modes), |(r, c)| 0.5 * (m[[r, c]] + m[[swap(r), swap(c)]]));
    ModeIntegrals { one_body, two_body }
}

fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    if n == 0 {
        return vec![(Vec::new(), 1.0)];
    }
    let mut out = Vec::new();
    for (perm, sign) in permutations(n - 1) {
        for pos in 0..=perm.len() {
            let mut p = perm.clone();
            p.insert(pos, n - 1);
            // inserting the largest element at `pos` adds (n-1-pos) inversions
            let s = if (n - 1 - pos).is_multiple_of(2) { sign } else { -sign };
            out.push((p, s));
        }
    }
    out
}

/// Index of a product state (m_1, …, m_N) in K^N, particle 1 most significant.
fn product_index(modes: &[usize], k: usize) -> usize {
    modes.iter().fold(0, |acc, &m| acc * k + m)
}

fn digits(mut index: usize, k: usize, n: usize) -> Vec<usize> {
    let mut d = vec![0; n];
    for slot in d.iter_mut().rev() {
        *slot = index % k;
        index /= k;
    }
    d
}

/// First-quantized H = Σ_p h⁽ᵖ⁾ + λ Σ_{p<q} W⁽ᵖᑫ⁾ on (C^K)^{⊗N}, compressed
/// to antisymmetrized Slater states ordered like the Fock basis.
pub fn first_quantized_hamiltonian(integrals: &ModeIntegrals, basis: &FockBasis, coupling: f64) -> Array2<C64> {
    let k = integrals.one_body.nrows();
    let n = basis.particles();
    let full = k.pow(n as u32);
    let mut h = Array2::<C64>::zeros((full, full));
    for col in 0..full {
        let d = digits(col, k, n);
        for p in 0..n {
            for i in 0..k {
                let mut e = d.clone();
                e[p] = i;
                h[[product_index(&e, k), col]] += integrals.one_body[[i, d[p]]];
            }
        }
        for p in 0..n {
            for q in p + 1..n {
                for i in 0..k {
                    for j in 0..k {
                        let mut e = d.clone();
                        e[p] = i;
                        e[q] = j;
                        h[[product_index(&e, k), col]] += integrals.two_body[[i * k + j, d[p] * k + d[q]]] * coupling;
                    }
                }
            }
        }
    }
    let perms = permutations(n);
    let norm = 1.0 / (perms.len() as f64).sqrt();
    let mut slater = Array2::<C64>::zeros((full, basis.dim()));
    for s in 0..basis.dim() {
        let mask = basis.mask(s);
        let occ: Vec<usize> = (0..k).filter(|&m| mask >> m & 1 == 1).collect();
        for (perm, sign) in &perms {
            let modes: Vec<usize> = perm.iter().map(|&p| occ[p]).collect();
            slater[[product_index(&modes, k), s]] += C64::new(sign * norm, 0.0);
        }
    }
    slater.t().mapv(|z| z.conj()).dot(&h.dot(&slater))
}

pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
}
