//! Fixed-N occupation basis and fermionic ladder operators on bitmasks.
//! Mode p sits at bit p; a†_p and a_p carry the sign (−1)^{#occupied modes below p}.

use std::collections::HashMap;

use crate::error::{LabError, Result};

/// Largest many-body dimension handled by dense linear algebra.
pub const DIMENSION_CAP: usize = 5000;
const MAX_MODES: usize = 63;

/// All K-mode occupations with exactly N particles, ordered
/// lexicographically by their ascending lists of occupied modes.
#[derive(Debug, Clone)]
pub struct FockBasis {
    modes: usize,
    particles: usize,
    masks: Vec<u64>,
    index: HashMap<u64, usize>,
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

impl FockBasis {
    pub fn new(modes: usize, particles: usize) -> Result<Self> {
        if modes == 0 || modes > MAX_MODES {
            return Err(LabError::InvalidParameter {
                name: "modes",
                reason: format!("must lie in 1..={MAX_MODES}, got {modes}"),
            });
        }
        if particles == 0 || particles > modes {
            return Err(LabError::InvalidParameter {
                name: "n_particles",
                reason: format!("must lie in 1..={modes}, got {particles}"),
            });
        }
        let dimension = binomial(modes, particles);
        if dimension > DIMENSION_CAP {
            return Err(LabError::DimensionCap {
                dimension,
                cap: DIMENSION_CAP,
            });
        }
        let mut masks = Vec::with_capacity(dimension);
        let mut chosen = Vec::with_capacity(particles);
        collect(modes, particles, 0, &mut chosen, &mut masks);
        let index = masks.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        Ok(Self {
            modes,
            particles,
            masks,
            index,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn mask(&self, i: usize) -> u64 {
        self.masks[i]
    }

    pub fn position(&self, mask: u64) -> Option<usize> {
        self.index.get(&mask).copied()
    }

    /// Basis position of the occupation listing `modes`.
    pub fn position_of(&self, modes: &[usize]) -> Result<usize> {
        let mut mask = 0u64;
        for &p in modes {
            if p >= self.modes || mask & (1 << p) != 0 {
                return Err(LabError::InvalidParameter {
                    name: "occupation",
                    reason: format!("modes must be distinct and below {}, got {modes:?}", self.modes),
                });
            }
            mask |= 1 << p;
        }
        self.position(mask).ok_or_else(|| LabError::InvalidParameter {
            name: "occupation",
            reason: format!("expected {} modes, got {}", self.particles, modes.len()),
        })
    }
}

fn collect(modes: usize, left: usize, start: usize, chosen: &mut Vec<usize>, out: &mut Vec<u64>) {
    if left == 0 {
        out.push(chosen.iter().fold(0u64, |m, &p| m | (1 << p)));
        return;
    }
    for p in start..=modes - left {
        chosen.push(p);
        collect(modes, left - 1, p + 1, chosen, out);
        chosen.pop();
    }
}

/// (−1)^{#occupied modes below p}
fn parity_below(mask: u64, p: usize) -> f64 {
    if (mask & ((1u64 << p) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// a_p |mask⟩
pub fn annihilate(mask: u64, p: usize) -> Option<(u64, f64)> {
    (mask & (1 << p) != 0).then(|| (mask ^ (1 << p), parity_below(mask, p)))
}

/// a†_p |mask⟩
pub fn create(mask: u64, p: usize) -> Option<(u64, f64)> {
    (mask & (1 << p) == 0).then(|| (mask | (1 << p), parity_below(mask, p)))
}

/// a†_i a_j |mask⟩
pub fn hop(mask: u64, i: usize, j: usize) -> Option<(u64, f64)> {
    let (m, s1) = annihilate(mask, j)?;
    let (m, s2) = create(m, i)?;
    Some((m, s1 * s2))
}

/// a†_i a†_j a_l a_k |mask⟩
pub fn pair_hop(mask: u64, i: usize, j: usize, k: usize, l: usize) -> Option<(u64, f64)> {
    let (m, s1) = annihilate(mask, k)?;
    let (m, s2) = annihilate(m, l)?;
    let (m, s3) = create(m, j)?;
    let (m, s4) = create(m, i)?;
    Some((m, s1 * s2 * s3 * s4))
}

/// Occupied modes in ascending order.
pub fn occupied(mask: u64) -> Vec<usize> {
    (0..64).filter(|p| mask & (1 << p) != 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_order_and_size() {
        let b = FockBasis::new(4, 2).unwrap();
        assert_eq!(b.dim(), 6);
        let lists: Vec<Vec<usize>> = b.masks().iter().map(|&m| occupied(m)).collect();
        assert_eq!(lists, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(b.position_of(&[1, 3]).unwrap(), 4);
        assert_eq!(FockBasis::new(10, 4).unwrap().dim(), 210);
        assert!(matches!(FockBasis::new(20, 10), Err(LabError::DimensionCap { .. })));
        assert!(FockBasis::new(3, 4).is_err());
    }

    #[test]
    fn anticommutation_signs() {
        // a†_0 a†_1 |∅⟩ = −a†_1 a†_0 |∅⟩
        let (m01, s01) = create(create(0, 1).unwrap().0, 0).unwrap();
        let (m10, s10) = create(create(0, 0).unwrap().0, 1).unwrap();
        assert_eq!(m01, m10);
        assert_eq!(s01, -s10);
        assert!(create(0b1, 0).is_none());
        assert!(annihilate(0b10, 0).is_none());
        // number operator
        for mask in 0..16u64 {
            for p in 0..4 {
                let n = hop(mask, p, p).map_or(0.0, |(m, s)| {
                    assert_eq!(m, mask);
                    s
                });
                assert_eq!(n, ((mask >> p) & 1) as f64);
            }
        }
    }
}
