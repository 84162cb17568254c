//! Logarithmic negativity of truncated two-mode states.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;

/// Negative eigenvalues of the partial transpose above this are roundoff.
pub const EIGEN_ZERO_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntanglementReport {
    /// Sum of the magnitudes of the negative eigenvalues of `ρ^{T_B}`.
    pub negativity: f64,
    /// `ln ‖ρ^{T_B}‖₁ = ln(1 + 2N)`.
    pub log_negativity: f64,
    pub spectrum_min: f64,
    /// Photon-number cutoff per mode.
    pub cutoff_used: usize,
}

/// `(l, m; n, p) -> (l, p; n, m)`.
pub fn partial_transpose(rho: &DensityMatrix) -> DensityMatrix {
    rho.partial_transpose()
}

/// Groups indices connected through exactly nonzero entries. Structural
/// zeros (odd parity, photon-number selection rules) split the matrix into
/// independent blocks.
fn connected_blocks(m: &DMatrix<Complex64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if m[(i, j)] != Complex64::new(0.0, 0.0) {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = root(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Eigenvalues of a Hermitian matrix, diagonalizing each decoupled block
/// on its own.
pub fn hermitian_spectrum(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows());
    for block in connected_blocks(m) {
        let sub = DMatrix::from_fn(block.len(), block.len(), |i, j| m[(block[i], block[j])]);
        out.extend(sub.symmetric_eigenvalues().iter().copied());
    }
    out
}

/// Eigendecomposes the partial transpose of a unit-trace `rho`.
pub fn log_negativity(rho: &DensityMatrix) -> Result<EntanglementReport> {
    let pt = rho.partial_transpose().operator();
    let dim = pt.nrows();
    // Hermitize against roundoff before the Hermitian solver
    let herm = (&pt + pt.adjoint()) * Complex64::new(0.5, 0.0);
    let spectrum = hermitian_spectrum(&herm);
    if spectrum.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver { dim, detail: "non-finite eigenvalue".into() });
    }
    let total: f64 = spectrum.iter().sum();
    let trace = rho.trace();
    if (total - trace).abs() > 1e-8 * trace.abs().max(1.0) {
        return Err(Error::Eigensolver {
            dim,
            detail: format!("eigenvalue sum {total} differs from trace {trace}"),
        });
    }
    let negativity: f64 = spectrum.iter().filter(|&&v| v < -EIGEN_ZERO_TOL).map(|v| -v).sum();
    let spectrum_min = spectrum.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EntanglementReport {
        negativity,
        log_negativity: (1.0 + 2.0 * negativity).ln(),
        spectrum_min,
        cutoff_used: rho.cutoff().n_max(),
    })
}

/// Exact log-negativity of the two-mode squeezed vacuum.
///
/// In the Schmidt basis `|ψ> = √(1-λ²) Σ λⁿ |n>|n>` with `λ = tanh r`, so
/// `‖ρ^{T_B}‖₁ = (Σ cₙ)² = (1-λ²)/(1-λ)² = (1+λ)/(1-λ) = e^{2r}`.
pub fn tmsv_log_negativity_baseline(r: f64) -> f64 {
    2.0 * r.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{gaussian_density, FockCutoff};
    use crate::phase_space::{phase_map, tmsv_state, SymplecticMap};

    fn bell() -> DensityMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let coeffs = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(h, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(h, 0.0),
            ],
        );
        DensityMatrix::pure(FockCutoff::new(1).unwrap(), &coeffs)
    }

    #[test]
    fn bell_state_spectrum() {
        let rho = bell();
        let mut ev: Vec<f64> =
            rho.partial_transpose().operator().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([-0.5, 0.5, 0.5, 0.5]) {
            assert!((got - want).abs() < 1e-14);
        }
        let rep = log_negativity(&rho).unwrap();
        assert!((rep.log_negativity - 2f64.ln()).abs() < 1e-14);
        assert!((rep.negativity - 0.5).abs() < 1e-14);
    }

    #[test]
    fn blockwise_spectrum_matches_dense() {
        let rho = gaussian_density(&tmsv_state(0.6).unwrap(), FockCutoff::new(8).unwrap()).unwrap();
        let pt = rho.partial_transpose().operator();
        assert!(connected_blocks(&pt).len() > 1);
        let mut blocks = hermitian_spectrum(&pt);
        let mut dense: Vec<f64> = pt.symmetric_eigenvalues().iter().copied().collect();
        blocks.sort_by(f64::total_cmp);
        dense.sort_by(f64::total_cmp);
        for (a, b) in blocks.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn product_state_has_zero_negativity() {
        let mut coeffs = DMatrix::zeros(3, 3);
        coeffs[(0, 1)] = Complex64::new(0.6, 0.0);
        coeffs[(1, 1)] = Complex64::new(0.0, 0.8);
        let rep = log_negativity(&DensityMatrix::pure(FockCutoff::new(2).unwrap(), &coeffs)).unwrap();
        assert_eq!(rep.log_negativity, 0.0);
    }

    #[test]
    fn partial_transpose_is_an_involution() {
        let rho = gaussian_density(&tmsv_state(0.3).unwrap(), FockCutoff::new(4).unwrap()).unwrap();
        assert_eq!(partial_transpose(&partial_transpose(&rho)), rho);
    }

    #[test]
    fn tmsv_matches_closed_form() {
        let r = 0.5;
        let rho = gaussian_density(&tmsv_state(r).unwrap(), FockCutoff::new(25).unwrap()).unwrap();
        let rep = log_negativity(&rho).unwrap();
        assert!((rep.log_negativity - tmsv_log_negativity_baseline(r)).abs() < 1e-3);
    }

    #[test]
    fn increases_with_squeezing() {
        let cut = FockCutoff::new(15).unwrap();
        let values: Vec<f64> = [0.05, 0.1, 0.2, 0.3]
            .iter()
            .map(|&r| {
                log_negativity(&gaussian_density(&tmsv_state(r).unwrap(), cut).unwrap())
                    .unwrap()
                    .log_negativity
            })
            .collect();
        assert!(values.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn local_rotation_does_not_change_it() {
        let st = tmsv_state(0.4).unwrap();
        let rotated = st.apply(&phase_map(0.7).direct_sum(&SymplecticMap::identity(1))).unwrap();
        let cut = FockCutoff::new(14).unwrap();
        let a = log_negativity(&gaussian_density(&st, cut).unwrap()).unwrap();
        let b = log_negativity(&gaussian_density(&rotated, cut).unwrap()).unwrap();
        assert!((a.log_negativity - b.log_negativity).abs() < 1e-9);
    }
}
