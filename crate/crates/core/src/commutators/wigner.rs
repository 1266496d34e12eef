//! One-dimensional discrete Wigner transform and the quantum-gradient
//! identities relating commutators with x and −iħ∂ to phase-space
//! derivatives.
//!
//! For a matrix γ on the grid the kernel is γ_ab / h. Offsets y = 2jh keep
//! x ± y/2 on sites, so
//!   W(x_k, ξ) = 2 Σ_j e^{2ijhξ/ħ} γ_{k+j, k−j},
//! periodic in ξ with period πħ/h. The ξ samples ξ_m = πħm/L cover one
//! period, which makes Σ_{k,m} W h Δξ / (2πħ) = tr γ exact for odd M.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::lattice::{momentum_operator, FieldSpec, Grid};
use crate::linalg::C64;

use super::commutator;

/// Real phase-space samples W[k, m] at (x_k, ξ_m).
#[derive(Debug, Clone)]
pub struct WignerMap {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub values: Array2<f64>,
}

impl WignerMap {
    /// Σ W h Δξ / (2πħ).
    pub fn total_mass(&self, spacing: f64, hbar: f64) -> f64 {
        let dxi = if self.xi.len() > 1 { self.xi[1] - self.xi[0] } else { 0.0 };
        self.values.sum() * spacing * dxi / (2.0 * PI * hbar)
    }
}

fn check(gamma: &Array2<C64>, grid: &Grid, hbar: f64) -> Result<()> {
    if grid.dim() != 1 {
        return Err(LabError::UnsupportedDimension {
            dim: grid.dim(),
            operation: "Wigner transform",
        });
    }
    if gamma.dim() != (grid.len(), grid.len()) {
        return Err(LabError::SizeMismatch {
            left: gamma.dim(),
            right: (grid.len(), grid.len()),
        });
    }
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(LabError::InvalidParameter {
            name: "hbar",
            reason: format!("must be finite and positive, got {hbar}"),
        });
    }
    Ok(())
}

/// ξ_m = πħm/L for the (M−1)/2 values of m centred on zero.
pub fn conjugate_momenta(grid: &Grid, hbar: f64) -> Vec<f64> {
    let count = (grid.points_per_axis() - 1) / 2;
    let first = -((count / 2) as i64);
    (0..count as i64)
        .map(|m| PI * hbar * (first + m) as f64 / grid.half_length())
        .collect()
}

/// Complex Wigner sum at arbitrary ξ; real for Hermitian γ.
fn wigner_sum(gamma: &Array2<C64>, grid: &Grid, hbar: f64, xi: &[f64]) -> Array2<C64> {
    let m = grid.len();
    let h = grid.spacing();
    let mut out = Array2::<C64>::zeros((m, xi.len()));
    for (col, &q) in xi.iter().enumerate() {
        let step = C64::from_polar(1.0, 2.0 * h * q / hbar);
        for k in 0..m {
            let reach = k.min(m - 1 - k);
            let mut acc = gamma[[k, k]];
            let mut phase = C64::new(1.0, 0.0);
            for j in 1..=reach {
                phase *= step;
                acc += phase * gamma[[k + j, k - j]] + phase.conj() * gamma[[k - j, k + j]];
            }
            out[[k, col]] = acc * 2.0;
        }
    }
    out
}

/// W(x_k, ξ_m) on the grid sites and the conjugate momenta.
pub fn wigner_transform(gamma: &Array2<C64>, grid: &Grid, hbar: f64) -> Result<WignerMap> {
    check(gamma, grid, hbar)?;
    let xi = conjugate_momenta(grid, hbar);
    let values = wigner_sum(gamma, grid, hbar, &xi).mapv(|z| z.re);
    Ok(WignerMap {
        x: grid.axis_coordinates(),
        xi,
        values,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientResiduals {
    pub spacing: f64,
    /// ‖W_{[x,γ]} + iħ ∂_ξ W_γ‖
    pub position_residual: f64,
    /// ‖W_{[−iħD,γ]} + iħ ∂_x W_γ‖
    pub momentum_residual: f64,
}

/// Residuals of both quantum-gradient identities in the discrete L² norm
/// over interior x and the conjugate momenta. ∂_ξ is a central difference
/// with step ħh and ∂_x a central difference on the grid, both second
/// order, so the residuals refine with h.
pub fn quantum_gradient_check(gamma: &Array2<C64>, grid: &Grid, hbar: f64) -> Result<GradientResiduals> {
    check(gamma, grid, hbar)?;
    let h = grid.spacing();
    let n = grid.len();
    let xi = conjugate_momenta(grid, hbar);
    let dxi = PI * hbar / grid.half_length();
    let free = FieldSpec::harmonic();
    let x: Array2<C64> = Array2::from_diag(&grid.axis_coordinates().iter().map(|&v| C64::new(v, 0.0)).collect::<ndarray::Array1<_>>());
    let p = momentum_operator(grid, &free, hbar, 0.0, 0)?.into_matrix();

    let w_x = wigner_sum(&commutator(&x, gamma)?, grid, hbar, &xi);
    let w_p = wigner_sum(&commutator(&p, gamma)?, grid, hbar, &xi);
    let w = wigner_sum(gamma, grid, hbar, &xi);

    let delta = hbar * h;
    let plus: Vec<f64> = xi.iter().map(|q| q + delta).collect();
    let minus: Vec<f64> = xi.iter().map(|q| q - delta).collect();
    let w_plus = wigner_sum(gamma, grid, hbar, &plus);
    let w_minus = wigner_sum(gamma, grid, hbar, &minus);
    let minus_i_hbar = C64::new(0.0, -hbar);

    let mut pos = 0.0;
    let mut mom = 0.0;
    for k in 1..n - 1 {
        for m in 0..xi.len() {
            let d_xi = (w_plus[[k, m]] - w_minus[[k, m]]) / (2.0 * delta);
            pos += (w_x[[k, m]] - minus_i_hbar * d_xi).norm_sqr();
            let d_x = (w[[k + 1, m]] - w[[k - 1, m]]) / (2.0 * h);
            mom += (w_p[[k, m]] - minus_i_hbar * d_x).norm_sqr();
        }
    }
    let measure = h * dxi;
    Ok(GradientResiduals {
        spacing: h,
        position_residual: (pos * measure).sqrt(),
        momentum_residual: (mom * measure).sqrt(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementStudy {
    pub coarse: GradientResiduals,
    pub fine: GradientResiduals,
    pub position_ratio: f64,
    pub momentum_ratio: f64,
}

/// Gradient residuals at h and h/2 for a density matrix built per grid.
pub fn gradient_refinement(grid: &Grid, hbar: f64, build: impl Fn(&Grid) -> Result<Array2<C64>>) -> Result<RefinementStudy> {
    let fine_grid = grid.refined();
    let coarse = quantum_gradient_check(&build(grid)?, grid, hbar)?;
    let fine = quantum_gradient_check(&build(&fine_grid)?, &fine_grid, hbar)?;
    Ok(RefinementStudy {
        position_ratio: coarse.position_residual / fine.position_residual,
        momentum_ratio: coarse.momentum_residual / fine.momentum_residual,
        coarse,
        fine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{assemble_hamiltonian, build_grid};
    use crate::linalg::identity;
    use crate::spectra::{eigendecompose, spectral_projector};

    fn gaussian_state(grid: &Grid, sigma: f64) -> Array2<C64> {
        let mut g: Vec<f64> = grid.sites().map(|x| (-x[0] * x[0] / (2.0 * sigma * sigma)).exp()).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        g.iter_mut().for_each(|v| *v /= norm);
        Array2::from_shape_fn((grid.len(), grid.len()), |(a, b)| C64::new(g[a] * g[b], 0.0))
    }

    fn oscillator_projector(grid: &Grid) -> Result<Array2<C64>> {
        let d = eigendecompose(&assemble_hamiltonian(grid, &FieldSpec::harmonic(), 0.1, 0.0)?)?;
        Ok(spectral_projector(&d, 1.0)?.entries().clone())
    }

    #[test]
    fn gaussian_wigner_is_nearly_positive_and_normalized() {
        let grid = build_grid(1, 201, 5.0).unwrap();
        let hbar = 0.1;
        let w = wigner_transform(&gaussian_state(&grid, 0.3), &grid, hbar).unwrap();
        let max = w.values.iter().cloned().fold(f64::MIN, f64::max);
        let min = w.values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(min >= -1e-3 * max);
        assert!((w.total_mass(grid.spacing(), hbar) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn zero_and_identity_inputs() {
        let grid = build_grid(1, 41, 2.0).unwrap();
        let zero = Array2::<C64>::zeros((41, 41));
        assert!(wigner_transform(&zero, &grid, 0.2).unwrap().values.iter().all(|v| *v == 0.0));
        let r = quantum_gradient_check(&identity(41), &grid, 0.2).unwrap();
        assert!(r.position_residual < 1e-12);
        let diag = Array2::from_diag(&ndarray::Array1::from_iter((0..41).map(|k| C64::new(k as f64, 0.0))));
        let r = quantum_gradient_check(&diag, &grid, 0.2).unwrap();
        assert!(r.position_residual < 1e-10);
        let two_d = build_grid(2, 5, 1.0).unwrap();
        assert!(matches!(
            wigner_transform(&identity(25), &two_d, 0.1),
            Err(LabError::UnsupportedDimension { .. })
        ));
    }

    #[test]
    fn projector_residuals_refine() {
        let grid = build_grid(1, 161, 4.0).unwrap();
        let study = gradient_refinement(&grid, 0.1, oscillator_projector).unwrap();
        assert!(study.position_ratio >= 1.8, "{study:?}");
        assert!(study.momentum_ratio >= 1.8, "{study:?}");
    }
}
