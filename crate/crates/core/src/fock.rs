//! Truncated two-mode density matrices from Gaussian branches.
//!
//! With `𝓡 = (α, α*, β, β*)ᵀ = U (x_A, p_A, x_B, p_B)ᵀ`, the Q function of a
//! Gaussian with covariance `γ` and mean `d` satisfies
//!
//! ```text
//! π² Q(α, β) e^{|α|² + |β|²} = Σ ρ_{lmnp} α*^l β*^m α^n β^p / √(l! m! n! p!)
//! ```
//!
//! and equals `scale · exp(-yᵀΘy - Δy)` in `y = (α*, β*, α, β)` with
//!
//! ```text
//! Φ = U (γ + 1)⁻¹ U†,   Θ = B (Φ - ½) D,   Λ = -2 dᵀ (γ + 1)⁻¹ U†,   Δ = Λ D,
//! scale = 4 √det Φ · exp(-Λ Φ⁻¹ Λ† / 4).
//! ```
//!
//! Derivatives at the origin give `ρ_{lmnp} = scale (-1)^{l+m+n+p} H^{Θ,Δ}_{lmnp} / √(l!m!n!p!)`.
//! The quadratic form is `𝓡†Φ𝓡` and the constant carries a single minus sign;
//! both are pinned by the vacuum-convolution tests below. For centered
//! states `Δ = 0` and the parity factor is 1.

use nalgebra::{DMatrix, Matrix4, RowVector4, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::branch::{HomodyneBranch, SignedGaussianMixture};
use crate::error::{Error, Result};
use crate::hermite::{hermite_table, HermiteParams};
use crate::phase_space::GaussianState;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `U`: `(x_A, p_A, x_B, p_B) -> (α, α*, β, β*)`.
pub fn ladder_transform() -> Matrix4<Complex64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (one, i) = (Complex64::new(h, 0.0), Complex64::new(0.0, h));
    let z = c(0.0);
    #[rustfmt::skip]
    let u = Matrix4::new(
        one, i,   z,   z,
        one, -i,  z,   z,
        z,   z,   one, i,
        z,   z,   one, -i,
    );
    u
}

/// `B`: `y ↦ 𝓡*` reordering (`(α*, β*, α, β) -> (α*, α, β*, β)`).
pub fn row_permutation() -> Matrix4<Complex64> {
    #[rustfmt::skip]
    let b = Matrix4::new(
        c(1.0), c(0.0), c(0.0), c(0.0),
        c(0.0), c(0.0), c(1.0), c(0.0),
        c(0.0), c(1.0), c(0.0), c(0.0),
        c(0.0), c(0.0), c(0.0), c(1.0),
    );
    b
}

/// `D`: `y ↦ 𝓡` reordering (`(α*, β*, α, β) -> (α, α*, β, β*)`).
pub fn column_permutation() -> Matrix4<Complex64> {
    #[rustfmt::skip]
    let d = Matrix4::new(
        c(0.0), c(0.0), c(1.0), c(0.0),
        c(1.0), c(0.0), c(0.0), c(0.0),
        c(0.0), c(0.0), c(0.0), c(1.0),
        c(0.0), c(1.0), c(0.0), c(0.0),
    );
    d
}

/// Maximum photon number kept per mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct FockCutoff(usize);

impl FockCutoff {
    pub const DEFAULT: FockCutoff = FockCutoff(12);

    pub fn new(n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::Domain { name: "cutoff", value: 0.0, range: ">= 1" });
        }
        Ok(Self(n_max))
    }

    pub fn n_max(self) -> usize {
        self.0
    }

    /// Levels per mode, `n_max + 1`.
    pub fn levels(self) -> usize {
        self.0 + 1
    }
}

impl Default for FockCutoff {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// `ρ_{lmnp} = <l|<m| ρ |n>|p>` with `l, n` on mode A and `m, p` on mode B.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    cutoff: FockCutoff,
    elems: Vec<Complex64>,
    raw_trace: f64,
}

impl DensityMatrix {
    pub fn from_fn(cutoff: FockCutoff, mut f: impl FnMut(usize, usize, usize, usize) -> Complex64) -> Self {
        let d = cutoff.levels();
        let mut elems = Vec::with_capacity(d.pow(4));
        for l in 0..d {
            for m in 0..d {
                for n in 0..d {
                    for p in 0..d {
                        elems.push(f(l, m, n, p));
                    }
                }
            }
        }
        let mut out = Self { cutoff, elems, raw_trace: 0.0 };
        out.raw_trace = out.trace();
        out
    }

    /// Pure state `Σ c_{lm} |l>|m>` with `coeffs` indexed `[l][m]`.
    pub fn pure(cutoff: FockCutoff, coeffs: &DMatrix<Complex64>) -> Self {
        Self::from_fn(cutoff, |l, m, n, p| {
            let get = |a: usize, b: usize| {
                if a < coeffs.nrows() && b < coeffs.ncols() {
                    coeffs[(a, b)]
                } else {
                    c(0.0)
                }
            };
            get(l, m) * get(n, p).conj()
        })
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    #[inline]
    fn offset(&self, l: usize, m: usize, n: usize, p: usize) -> usize {
        let d = self.cutoff.levels();
        ((l * d + m) * d + n) * d + p
    }

    #[inline]
    pub fn get(&self, l: usize, m: usize, n: usize, p: usize) -> Complex64 {
        self.elems[self.offset(l, m, n, p)]
    }

    /// `Σ_{lm} Re ρ_{lmlm}`.
    pub fn trace(&self) -> f64 {
        let d = self.cutoff.levels();
        (0..d).flat_map(|l| (0..d).map(move |m| (l, m))).map(|(l, m)| self.get(l, m, l, m).re).sum()
    }

    /// Trace of the truncated series before renormalization.
    pub fn raw_trace(&self) -> f64 {
        self.raw_trace
    }

    /// `max |ρ_{lmnp} - conj(ρ_{nplm})|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let d = self.cutoff.levels();
        let mut worst: f64 = 0.0;
        for l in 0..d {
            for m in 0..d {
                for n in 0..d {
                    for p in 0..d {
                        worst = worst.max((self.get(l, m, n, p) - self.get(n, p, l, m).conj()).norm());
                    }
                }
            }
        }
        worst
    }

    pub fn max_imag(&self) -> f64 {
        self.elems.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
    }

    /// The `(d², d²)` operator matrix, row `l·d + m`, column `n·d + p`.
    pub fn operator(&self) -> DMatrix<Complex64> {
        let dd = self.cutoff.levels().pow(2);
        DMatrix::from_row_slice(dd, dd, &self.elems)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.operator().symmetric_eigenvalues().iter().copied().collect()
    }

    pub fn elements(&self) -> &[Complex64] {
        &self.elems
    }

    /// Divides by the trace; the pre-normalization trace is kept.
    pub fn normalized(mut self) -> Result<Self> {
        let tr = self.trace();
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::CutoffOverflow { cutoff: self.cutoff.n_max() });
        }
        for z in &mut self.elems {
            *z /= tr;
        }
        self.raw_trace = tr;
        Ok(self)
    }

    /// `(l, m; n, p) -> (l, p; n, m)`: transpose on mode B.
    pub fn partial_transpose(&self) -> Self {
        Self {
            cutoff: self.cutoff,
            elems: {
                let d = self.cutoff.levels();
                let mut out = Vec::with_capacity(self.elems.len());
                for l in 0..d {
                    for m in 0..d {
                        for n in 0..d {
                            for p in 0..d {
                                out.push(self.get(l, p, n, m));
                            }
                        }
                    }
                }
                out
            },
            raw_trace: self.raw_trace,
        }
    }
}

/// Generating-function data for one Gaussian term.
#[derive(Clone, Debug, PartialEq)]
pub struct QGeneratorParams {
    pub theta: Matrix4<Complex64>,
    pub delta: Vector4<Complex64>,
    /// `4 √det Φ · exp(-ΛΦ⁻¹Λ†/4)`; the branch weight is applied separately.
    pub scale: Complex64,
}

impl QGeneratorParams {
    /// From a two-mode Gaussian state directly.
    pub fn from_gaussian(state: &GaussianState) -> Result<Self> {
        if state.num_modes() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: state.num_modes() });
        }
        let g = state.cov().as_matrix();
        let smoothed = Matrix4::from_fn(|i, j| g[(i, j)] + if i == j { 1.0 } else { 0.0 });
        let k = smoothed.try_inverse().ok_or(Error::Singular { context: "γ + 1" })?;
        let d = Vector4::from_fn(|i, _| state.disp()[i]);
        let u = ladder_transform();
        let phi = u * k.map(c) * u.adjoint();
        let lambda = (d.transpose() * k * -2.0).map(c) * u.adjoint();
        let exponent = (d.transpose() * k * d)[(0, 0)];
        let scale = c(4.0 * (-exponent).exp() / smoothed.determinant().sqrt());
        Ok(Self {
            theta: row_permutation() * (phi - Matrix4::identity() * c(0.5)) * column_permutation(),
            delta: (lambda * column_permutation()).transpose(),
            scale,
        })
    }

    /// From the homodyne-conditioned `Φ` and `Λ`.
    pub fn from_homodyne(phi: &Matrix4<Complex64>, lambda: &RowVector4<Complex64>) -> Result<Self> {
        let phi_inv = phi.try_inverse().ok_or(Error::Singular { context: "Φ" })?;
        let quad = (lambda * phi_inv * lambda.adjoint())[(0, 0)];
        let scale = phi.determinant().sqrt() * 4.0 * (-quad / 4.0).exp();
        Ok(Self {
            theta: row_permutation() * (phi - Matrix4::identity() * c(0.5)) * column_permutation(),
            delta: (lambda * column_permutation()).transpose(),
            scale,
        })
    }
}

/// `C = B[(UγU† + 1)⁻¹ - ½]D` for a 4x4 branch covariance.
pub fn c_matrix(gamma: &GaussianState) -> Result<Matrix4<Complex64>> {
    Ok(QGeneratorParams::from_gaussian(&GaussianState::centered(gamma.cov().clone()))?.theta)
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

/// `Σ_k weight_k · scale_k · (-1)^{l+m+n+p} H^k_{lmnp} / √(l!m!n!p!)`,
/// without renormalization.
pub fn assemble_terms(terms: &[(f64, QGeneratorParams)], cutoff: FockCutoff) -> Result<DensityMatrix> {
    let n_max = cutoff.n_max();
    let tables: Vec<_> =
        terms.par_iter().map(|(_, q)| hermite_table(&HermiteParams::new(q.theta, q.delta), n_max)).collect();
    let lf = log_factorials(n_max);
    let rho = DensityMatrix::from_fn(cutoff, |l, m, n, p| {
        let norm = (-0.5 * (lf[l] + lf[m] + lf[n] + lf[p])).exp();
        let sign = if (l + m + n + p) % 2 == 0 { 1.0 } else { -1.0 };
        let mut acc = c(0.0);
        for ((w, q), t) in terms.iter().zip(&tables) {
            acc += q.scale * *w * t.get([l, m, n, p]);
        }
        acc * (norm * sign)
    });
    if rho.elems.iter().any(|z| !z.is_finite()) {
        return Err(Error::CutoffOverflow { cutoff: n_max });
    }
    Ok(rho)
}

/// Heralded Protocol I state `4M/√(l!m!n!p!) Σ (-1)^{i+j} P^(ij) H^{C^(ij),0} / √det(γ^(ij)+1)`,
/// renormalized to unit trace.
pub fn assemble_protocol1(mixture: &SignedGaussianMixture, cutoff: FockCutoff) -> Result<DensityMatrix> {
    let m = mixture.normalization()?;
    let terms = mixture
        .branches()
        .iter()
        .map(|b| Ok((m * b.sign() * b.weight, QGeneratorParams::from_gaussian(&b.state)?)))
        .collect::<Result<Vec<_>>>()?;
    assemble_terms(&terms, cutoff)?.normalized()
}

/// `M_hom = (Σ (-1)^{i+j} P^(ij) q_z^(ij))⁻¹`, with the same roundoff floor
/// as [`SignedGaussianMixture::success_weight`].
pub fn homodyne_normalization(branches: &[HomodyneBranch]) -> Result<f64> {
    let sum: f64 = branches.iter().map(|b| b.signed_joint_weight()).sum();
    let floor = 64.0 * f64::EPSILON * branches.iter().map(|b| b.signed_joint_weight().abs()).sum::<f64>();
    if sum > floor {
        Ok(1.0 / sum)
    } else {
        Err(Error::ZeroSuccessProbability(sum))
    }
}

/// Protocol II state from homodyne-conditioned branches, renormalized.
pub fn assemble_protocol2(branches: &[HomodyneBranch], cutoff: FockCutoff) -> Result<DensityMatrix> {
    let m_hom = homodyne_normalization(branches)?;
    let terms = branches
        .iter()
        .map(|b| {
            Ok((
                m_hom * b.signed_joint_weight(),
                QGeneratorParams::from_homodyne(&b.reduction.phi, &b.reduction.lambda)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    assemble_terms(&terms, cutoff)?.normalized()
}

/// Single Gaussian state in the Fock basis, renormalized.
pub fn gaussian_density(state: &GaussianState, cutoff: FockCutoff) -> Result<DensityMatrix> {
    assemble_terms(&[(1.0, QGeneratorParams::from_gaussian(state)?)], cutoff)?.normalized()
}
