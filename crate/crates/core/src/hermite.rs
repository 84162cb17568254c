//! Four-variable Hermite polynomials evaluated at the origin,
//!
//! ```text
//! H^{Θ,Δ}_{r,s,t,v} = (-1)^{r+s+t+v} e^{yᵀΘy + Δy} ∂^r_1 ∂^s_2 ∂^t_3 ∂^v_4 e^{-yᵀΘy - Δy} |_{y=0}
//! ```
//!
//! Raising index `a` by one obeys
//!
//! ```text
//! H_{k+e_a} = Δ_a H_k - Σ_j k_j (Θ_aj + Θ_ja) H_{k-e_j}
//! ```
//!
//! which for `a = 1` is the familiar five-term recursion
//! `H_{r+1,s,t,v} = Δ₁H - 2rΘ₁₁H_{r-1} - s(Θ₁₂+Θ₂₁)H_{s-1} - t(Θ₁₃+Θ₃₁)H_{t-1} - v(Θ₁₄+Θ₄₁)H_{v-1}`.
//! For `a = 2, 3, 4` the `Δ` component and the symmetrized row of `Θ` are
//! those of axis `a`.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct HermiteParams {
    pub theta: Matrix4<Complex64>,
    pub delta: Vector4<Complex64>,
}

impl HermiteParams {
    pub fn new(theta: Matrix4<Complex64>, delta: Vector4<Complex64>) -> Self {
        Self { theta, delta }
    }

    pub fn centered(theta: Matrix4<Complex64>) -> Self {
        Self { theta, delta: Vector4::zeros() }
    }

    pub fn is_centered(&self) -> bool {
        self.delta.iter().all(|d| *d == Complex64::new(0.0, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(self.delta.iter()).all(|z| z.is_finite())
    }
}

/// Dense table of `H_{r,s,t,v}` for `0 <= r,s,t,v <= max_index`.
#[derive(Clone, Debug)]
pub struct HermiteTable {
    params: HermiteParams,
    max_index: usize,
    values: Vec<Complex64>,
}

impl HermiteTable {
    pub fn params(&self) -> &HermiteParams {
        &self.params
    }

    pub fn max_index(&self) -> usize {
        self.max_index
    }

    #[inline]
    fn offset(&self, idx: [usize; 4]) -> usize {
        let n = self.max_index + 1;
        ((idx[0] * n + idx[1]) * n + idx[2]) * n + idx[3]
    }

    /// Panics if any index exceeds `max_index`.
    #[inline]
    pub fn get(&self, idx: [usize; 4]) -> Complex64 {
        assert!(idx.iter().all(|&k| k <= self.max_index), "index {idx:?} beyond table");
        self.values[self.offset(idx)]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|z| z.is_finite())
    }
}

/// Fills the table by recursion. When `Δ = 0`, odd-order entries are exactly
/// zero and are skipped.
pub fn hermite_table(params: &HermiteParams, max_index: usize) -> HermiteTable {
    let n = max_index + 1;
    let sym = params.theta + params.theta.transpose();
    let centered = params.is_centered();
    let zero = Complex64::new(0.0, 0.0);
    let mut table = HermiteTable { params: params.clone(), max_index, values: vec![zero; n * n * n * n] };
    let strides = [n * n * n, n * n, n, 1];
    table.values[0] = Complex64::new(1.0, 0.0);

    for r in 0..n {
        for s in 0..n {
            for t in 0..n {
                for v in 0..n {
                    let idx = [r, s, t, v];
                    let order = r + s + t + v;
                    if order == 0 || (centered && order % 2 == 1) {
                        continue;
                    }
                    // lower along the first nonzero axis; every referenced
                    // entry precedes `idx` in row-major order
                    let axis = idx.iter().position(|&k| k > 0).unwrap();
                    let mut low = idx;
                    low[axis] -= 1;
                    let base = (((low[0] * n + low[1]) * n + low[2]) * n) + low[3];
                    let mut acc = params.delta[axis] * table.values[base];
                    for j in 0..4 {
                        if low[j] > 0 {
                            let coeff = sym[(axis, j)] * low[j] as f64;
                            acc -= coeff * table.values[base - strides[j]];
                        }
                    }
                    let at = table.offset(idx);
                    table.values[at] = acc;
                }
            }
        }
    }
    table
}

/// Truncated multivariate power series in four variables.
struct Jet {
    degree: usize,
    coeffs: Vec<Complex64>,
}

impl Jet {
    fn zero(degree: usize) -> Self {
        let n = degree + 1;
        Self { degree, coeffs: vec![Complex64::new(0.0, 0.0); n * n * n * n] }
    }

    fn at(&self, idx: [usize; 4]) -> usize {
        let n = self.degree + 1;
        ((idx[0] * n + idx[1]) * n + idx[2]) * n + idx[3]
    }

    fn monomials(degree: usize) -> Vec<[usize; 4]> {
        let mut out = Vec::new();
        for a in 0..=degree {
            for b in 0..=degree - a {
                for c in 0..=degree - a - b {
                    for d in 0..=degree - a - b - c {
                        out.push([a, b, c, d]);
                    }
                }
            }
        }
        out
    }

    fn mul(&self, other: &Jet) -> Jet {
        let mut out = Jet::zero(self.degree);
        let monos = Self::monomials(self.degree);
        for &p in &monos {
            let cp = self.coeffs[self.at(p)];
            if cp == Complex64::new(0.0, 0.0) {
                continue;
            }
            for &q in &monos {
                let sum = [p[0] + q[0], p[1] + q[1], p[2] + q[2], p[3] + q[3]];
                if sum.iter().sum::<usize>() > self.degree {
                    continue;
                }
                let at = out.at(sum);
                out.coeffs[at] += cp * other.coeffs[other.at(q)];
            }
        }
        out
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Reference value of `H_{r,s,t,v}` straight from the defining derivative:
/// the Taylor coefficients of `exp(-yᵀΘy - Δy)` are obtained by jet
/// arithmetic, and `∂^k f(0) = k! c_k`. Intended for index sums up to ~8.
pub fn hermite_direct(params: &HermiteParams, idx: [usize; 4]) -> Complex64 {
    let degree: usize = idx.iter().sum();
    let mut q = Jet::zero(degree);
    if degree >= 1 {
        for i in 0..4 {
            let mut e = [0; 4];
            e[i] = 1;
            let at = q.at(e);
            q.coeffs[at] -= params.delta[i];
        }
    }
    if degree >= 2 {
        for i in 0..4 {
            for j in 0..4 {
                let mut e = [0; 4];
                e[i] += 1;
                e[j] += 1;
                let at = q.at(e);
                q.coeffs[at] -= params.theta[(i, j)];
            }
        }
    }
    // exp(q) = Σ_k q^k / k!; q has no constant term so k <= degree suffices
    let mut sum = Jet::zero(degree);
    let mut power = Jet::zero(degree);
    power.coeffs[0] = Complex64::new(1.0, 0.0);
    for k in 0..=degree {
        let inv = 1.0 / factorial(k);
        for (s, p) in sum.coeffs.iter_mut().zip(&power.coeffs) {
            *s += p * inv;
        }
        if k < degree {
            power = power.mul(&q);
        }
    }
    let c = sum.coeffs[sum.at(idx)];
    let scale: f64 = idx.iter().map(|&k| factorial(k)).product();
    let sign = if degree.is_multiple_of(2) { 1.0 } else { -1.0 };
    c * scale * sign
}
