//! Reference computations that avoid the phase-space pipeline entirely.
#![allow(dead_code)]

use cvqnd::fock::{DensityMatrix, FockCutoff};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Hermite functions `ψ_n(x)`, `n < levels`, by the stable three-term recursion.
fn hermite_functions(levels: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; levels];
    out[0] = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
    if levels > 1 {
        out[1] = 2f64.sqrt() * x * out[0];
    }
    for n in 1..levels.saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
    out
}

fn log_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// TMSV Schmidt matrix `ψ[m, n] = √(1-λ²) λⁿ δ_mn`.
pub fn tmsv_amplitudes(r: f64, levels: usize) -> DMatrix<f64> {
    let lam = r.tanh();
    DMatrix::from_fn(
        levels,
        levels,
        |m, n| {
            if m == n {
                (1.0 - lam * lam).sqrt() * lam.powi(n as i32)
            } else {
                0.0
            }
        },
    )
}

/// `<m| f_k(x̂) |n>` for `f_k(x) = e^{-κ²x²/4} (κx/√2)^k / √k!`: the amplitude
/// of `k` photons in a vacuum ancilla displaced in `x` by `κ x̂`.
pub fn qnd_kraus(kappa: f64, levels: usize, k: usize) -> DMatrix<f64> {
    let (half_width, points) = (14.0, 6000);
    let h = 2.0 * half_width / points as f64;
    let mut out = DMatrix::zeros(levels, levels);
    for step in 0..=points {
        let x = -half_width + h * step as f64;
        let psi = hermite_functions(levels, x);
        let f = (-kappa * kappa * x * x / 4.0).exp()
            * (kappa * x / 2f64.sqrt()).powi(k as i32)
            * (-0.5 * log_factorial(k)).exp();
        for m in 0..levels {
            for n in 0..levels {
                out[(m, n)] += h * f * psi[m] * psi[n];
            }
        }
    }
    out
}

/// `A_k = t^k/√k! · T^n̂ a^k` with `t = √(1-T²)`: `k` photons reflected.
pub fn beamsplitter_kraus(t_amp: f64, levels: usize, k: usize) -> DMatrix<f64> {
    let refl = (1.0 - t_amp * t_amp).sqrt();
    DMatrix::from_fn(levels, levels, |m, n| {
        if n >= k && m == n - k {
            let log =
                k as f64 * refl.ln() + m as f64 * t_amp.ln() + 0.5 * (log_factorial(n) - log_factorial(m))
                    - 0.5 * log_factorial(k);
            log.exp()
        } else {
            0.0
        }
    })
}

/// Heralded two-click state `Σ_{k,k'≥1} w_k w_k' (F_k⊗F_k')|ψ><ψ|(F_k⊗F_k')†`
/// with `w_k = 1 - (1-η)^k`, truncated to `cutoff` and renormalized.
pub fn heralded_state(
    psi: &DMatrix<f64>,
    kraus: impl Fn(usize) -> DMatrix<f64>,
    photons: usize,
    eta: f64,
    cutoff: FockCutoff,
) -> DensityMatrix {
    let d = cutoff.levels();
    let ops: Vec<_> = (0..photons).map(kraus).collect();
    let w: Vec<f64> = (0..photons).map(|k| 1.0 - (1.0 - eta).powi(k as i32)).collect();
    let mut acc = vec![0.0; d.pow(4)];
    for k in 1..photons {
        for kk in 1..photons {
            let c = &ops[k] * psi * ops[kk].transpose();
            let weight = w[k] * w[kk];
            for l in 0..d {
                for m in 0..d {
                    let a = weight * c[(l, m)];
                    if a == 0.0 {
                        continue;
                    }
                    for n in 0..d {
                        for p in 0..d {
                            acc[((l * d + m) * d + n) * d + p] += a * c[(n, p)];
                        }
                    }
                }
            }
        }
    }
    let rho =
        DensityMatrix::from_fn(cutoff, |l, m, n, p| Complex64::new(acc[((l * d + m) * d + n) * d + p], 0.0));
    rho.normalized().expect("positive trace")
}

pub fn brute_protocol1_xp(r: f64, kappa: f64, eta: f64, cutoff: FockCutoff) -> DensityMatrix {
    let levels = 34;
    heralded_state(&tmsv_amplitudes(r, levels), |k| qnd_kraus(kappa, levels, k), 26, eta, cutoff)
}

pub fn brute_protocol1_bs(r: f64, t_amp: f64, eta: f64, cutoff: FockCutoff) -> DensityMatrix {
    let levels = 34;
    heralded_state(&tmsv_amplitudes(r, levels), |k| beamsplitter_kraus(t_amp, levels, k), 12, eta, cutoff)
}

/// `ln((Σ s)² / Σ s²)` over the singular values of a pure-state amplitude matrix.
pub fn pure_log_negativity(amplitudes: &DMatrix<f64>) -> f64 {
    let s = amplitudes.singular_values();
    let l1: f64 = s.iter().sum();
    let l2: f64 = s.iter().map(|v| v * v).sum();
    (l1 * l1 / l2).ln()
}

/// State `∝ Σ (n+1) λⁿ |nn>` from subtracting one photon on each arm.
pub fn photon_subtracted_amplitudes(r: f64, levels: usize) -> DMatrix<f64> {
    let lam = r.tanh();
    DMatrix::from_fn(levels, levels, |m, n| if m == n { (n as f64 + 1.0) * lam.powi(n as i32) } else { 0.0 })
}

/// Closed form of [`photon_subtracted_amplitudes`]' log-negativity.
pub fn photon_subtracted_log_negativity(r: f64) -> f64 {
    let lam = r.tanh();
    ((1.0 + lam).powi(3) / ((1.0 - lam) * (1.0 + lam * lam))).ln()
}

/// `x_A x_B |TMSV>`, the weak-QND heralded state.
pub fn position_product_amplitudes(r: f64, levels: usize) -> DMatrix<f64> {
    let x = DMatrix::from_fn(levels, levels, |m, n| {
        if n == m + 1 {
            (n as f64 / 2.0).sqrt()
        } else if m == n + 1 {
            (m as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    &x * tmsv_amplitudes(r, levels) * x.transpose()
}

/// Truncated pure state for feeding [`cvqnd::entanglement::log_negativity`].
pub fn pure_density(amplitudes: &DMatrix<f64>, cutoff: FockCutoff) -> DensityMatrix {
    let coeffs = amplitudes.map(|v| Complex64::new(v, 0.0));
    DensityMatrix::pure(cutoff, &coeffs).normalized().unwrap()
}

/// Normalized Gaussian density `exp(-xᵀγ⁻¹x) / (π^{n/2} √det γ)` in the
/// "vacuum = identity" convention, for `n` quadratures.
pub struct GaussianDensity {
    precision: DMatrix<f64>,
    norm: f64,
}

impl GaussianDensity {
    pub fn new(cov: &DMatrix<f64>) -> Self {
        let n = cov.nrows() as f64;
        Self {
            precision: cov.clone().try_inverse().expect("invertible"),
            norm: 1.0 / (std::f64::consts::PI.powf(n / 2.0) * cov.determinant().sqrt()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut q = 0.0;
        for i in 0..x.len() {
            for j in 0..x.len() {
                q += x[i] * self.precision[(i, j)] * x[j];
            }
        }
        self.norm * (-q).exp()
    }
}

/// Trapezoid sum of `f` over the cube `[-half, half]^dim`.
pub fn grid_integral(dim: usize, half: f64, points: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let h = 2.0 * half / (points - 1) as f64;
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut total = 0.0;
    loop {
        for (xi, &k) in x.iter_mut().zip(&idx) {
            *xi = -half + h * k as f64;
        }
        total += f(&x);
        let mut d = 0;
        loop {
            if d == dim {
                return total * h.powi(dim as i32);
            }
            idx[d] += 1;
            if idx[d] < points {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// `(2π)^n ∫ W_ρ W_vac` over the chosen ancilla quadratures.
pub fn vacuum_overlap(cov: &DMatrix<f64>) -> f64 {
    let dim = cov.nrows();
    let state = GaussianDensity::new(cov);
    let vac = GaussianDensity::new(&DMatrix::identity(dim, dim));
    let points = if dim == 4 { 44 } else { 400 };
    // the vacuum factor confines the integrand
    let integral = grid_integral(dim, 6.5, points, |x| state.eval(x) * vac.eval(x));
    (2.0 * std::f64::consts::PI).powi(dim as i32 / 2) * integral
}

/// `q_z` for XP at θ = 0 as a 2D convolution over the system positions:
/// the detected quadrature is `√ξ (x_anc + κ x_sys) + √(1-ξ) x_vac`.
pub fn homodyne_density_by_convolution(r: f64, kappa: f64, xi: f64, anc_var: (f64, f64), z: [f64; 2]) -> f64 {
    let (c, s) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    let sys = GaussianDensity::new(&DMatrix::from_row_slice(2, 2, &[c, s, s, c]));
    let va = xi * anc_var.0 + 1.0 - xi;
    let vb = xi * anc_var.1 + 1.0 - xi;
    let g = |u: f64, v: f64| (-u * u / v).exp() / (std::f64::consts::PI * v).sqrt();
    let half = 7.0 * c.sqrt();
    grid_integral(2, half, 801, |x| {
        sys.eval(x) * g(z[0] - xi.sqrt() * kappa * x[0], va) * g(z[1] - xi.sqrt() * kappa * x[1], vb)
    })
}
