//! Gaussian states and symplectic phase-space operations.
//!
//! Quadratures are ordered `(x1, p1, ..., xN, pN)` and the covariance matrix
//! is `γ_lm = <R_l R_m + R_m R_l> - 2 d_l d_m`, so the vacuum has `γ = 1`.
//!
//! # QND couplings
//!
//! A coupling `H = κ A_s B_a` between quadrature `A` of the system mode `s`
//! and quadrature `B` of the ancilla mode `a` has a nilpotent generator, so its
//! phase-space action is exactly `S = 1 + κ Ω G`. On `(x_s, p_s, x_a, p_a)`:
//!
//! ```text
//!        XX                 XP                 PX                 PP
//! [ 1  0  0  0]      [ 1  0  0  0]      [ 1  0  κ  0]      [ 1  0  0  κ]
//! [ 0  1 -κ  0]      [ 0  1  0 -κ]      [ 0  1  0  0]      [ 0  1  0  0]
//! [ 0  0  1  0]      [ κ  0  1  0]      [ 0  0  1  0]      [ 0  κ  1  0]
//! [-κ  0  0  1]      [ 0  0  0  1]      [ 0 -κ  0  1]      [ 0  0  0  1]
//! ```
//!
//! The coupled quadratures `A_s` and `B_a` are left untouched; their conjugates
//! pick up `±κ` times the partner quadrature.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_unit, Error, Result};

/// Eigenvalue floor used when testing `γ + iΩ ⪰ 0`.
pub const PHYSICALITY_TOL: f64 = 1e-10;

/// Block-diagonal symplectic form `Ω = ⊕ [[0, 1], [-1, 0]]`.
pub fn symplectic_form(num_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * num_modes, 2 * num_modes);
    for k in 0..num_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (na, nb) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(na + nb, na + nb);
    out.view_mut((0, 0), (na, na)).copy_from(a);
    out.view_mut((na, na), (nb, nb)).copy_from(b);
    out
}

/// Real symmetric `2N x 2N` second-moment matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    data: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Wraps `data`, which must be square, even-sized, finite and symmetric up
    /// to roundoff. The stored matrix is exactly symmetric.
    pub fn new(mut data: DMatrix<f64>) -> Result<Self> {
        let n = data.nrows();
        if data.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: data.ncols() });
        }
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::DimensionMismatch { expected: n + n % 2, found: n });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain { name: "covariance entry", value: f64::NAN, range: "finite reals" });
        }
        let scale = 1.0 + data.amax();
        let asym = (&data - data.transpose()).amax();
        if asym > 1e-9 * scale {
            return Err(Error::Domain { name: "covariance asymmetry", value: asym, range: "roundoff" });
        }
        symmetrize(&mut data);
        Ok(Self { data })
    }

    pub fn vacuum(num_modes: usize) -> Self {
        Self { data: DMatrix::identity(2 * num_modes, 2 * num_modes) }
    }

    pub fn num_modes(&self) -> usize {
        self.data.nrows() / 2
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Smallest eigenvalue of the Hermitian matrix `γ + iΩ`.
    pub fn physicality_margin(&self) -> f64 {
        let n = self.data.nrows();
        let omega = symplectic_form(self.num_modes());
        let h = DMatrix::<Complex64>::from_fn(n, n, |i, j| Complex64::new(self.data[(i, j)], omega[(i, j)]));
        h.symmetric_eigenvalues().min()
    }

    /// `γ + iΩ ⪰ 0` (up to [`PHYSICALITY_TOL`]) and `γ > 0`.
    pub fn is_physical(&self) -> bool {
        self.physicality_margin() >= -PHYSICALITY_TOL && self.data.clone().symmetric_eigenvalues().min() > 0.0
    }

    /// The `2x2` block coupling modes `i` and `j`.
    pub fn mode_block(&self, i: usize, j: usize) -> Matrix2<f64> {
        self.data.fixed_view::<2, 2>(2 * i, 2 * j).into_owned()
    }

    /// Principal submatrix on the listed quadrature indices, in that order.
    /// Deleting quadratures from a covariance matrix marginalizes the Wigner
    /// function over them.
    pub fn select(&self, quadratures: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(quadratures.len(), quadratures.len(), |i, j| {
            self.data[(quadratures[i], quadratures[j])]
        })
    }

    /// Reorders modes so that new mode `k` is old mode `order[k]`.
    pub fn permute_modes(&self, order: &[usize]) -> Result<Self> {
        let n = self.num_modes();
        check_permutation(order, n)?;
        let quads: Vec<usize> = order.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        Ok(Self { data: self.select(&quads) })
    }

    pub fn direct_sum(&self, other: &Self) -> Self {
        Self { data: block_diag(&self.data, &other.data) }
    }
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: order.len() });
    }
    let mut seen = vec![false; n];
    for &m in order {
        if m >= n {
            return Err(Error::ModeOutOfRange { index: m, num_modes: n });
        }
        if seen[m] {
            return Err(Error::InvalidModePair(m, m));
        }
        seen[m] = true;
    }
    Ok(())
}

/// Which quadratures a QND Hamiltonian `κ A_sys B_anc` couples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QndKind {
    XX,
    XP,
    PX,
    PP,
}

impl QndKind {
    pub const ALL: [QndKind; 4] = [QndKind::XX, QndKind::XP, QndKind::PX, QndKind::PP];

    /// Offsets (0 = x, 1 = p) of the system and ancilla quadratures in `H`.
    fn offsets(self) -> (usize, usize) {
        match self {
            QndKind::XX => (0, 0),
            QndKind::XP => (0, 1),
            QndKind::PX => (1, 0),
            QndKind::PP => (1, 1),
        }
    }
}

impl fmt::Display for QndKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QndKind::XX => "xx",
            QndKind::XP => "xp",
            QndKind::PX => "px",
            QndKind::PP => "pp",
        };
        f.write_str(s)
    }
}

impl FromStr for QndKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xx" => Ok(QndKind::XX),
            "xp" => Ok(QndKind::XP),
            "px" => Ok(QndKind::PX),
            "pp" => Ok(QndKind::PP),
            other => Err(format!("unknown QND kind `{other}` (expected xx, xp, px or pp)")),
        }
    }
}

/// Real `2N x 2N` matrix `S` with `S Ω Sᵀ = Ω`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticMap {
    data: DMatrix<f64>,
}

impl SymplecticMap {
    pub fn identity(num_modes: usize) -> Self {
        Self { data: DMatrix::identity(2 * num_modes, 2 * num_modes) }
    }

    /// Validates `S Ω Sᵀ = Ω` to within `1e-10 (1 + |S|²)` entrywise.
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        let n = data.nrows();
        if data.ncols() != n || !n.is_multiple_of(2) {
            return Err(Error::DimensionMismatch { expected: n, found: data.ncols() });
        }
        let map = Self { data };
        let scale = 1.0 + map.data.amax().powi(2);
        let residual = map.symplectic_residual();
        if residual > 1e-10 * scale {
            return Err(Error::Domain { name: "symplectic residual", value: residual, range: "roundoff" });
        }
        Ok(map)
    }

    pub fn num_modes(&self) -> usize {
        self.data.nrows() / 2
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// `max |S Ω Sᵀ - Ω|`.
    pub fn symplectic_residual(&self) -> f64 {
        let omega = symplectic_form(self.num_modes());
        (&self.data * &omega * self.data.transpose() - omega).amax()
    }

    /// `S⁻¹ = -Ω Sᵀ Ω`.
    pub fn inverse(&self) -> Self {
        let omega = symplectic_form(self.num_modes());
        Self { data: -(&omega * self.data.transpose() * &omega) }
    }

    /// `self ∘ first`, i.e. `first` acts before `self`.
    pub fn after(&self, first: &Self) -> Result<Self> {
        if self.data.nrows() != first.data.nrows() {
            return Err(Error::DimensionMismatch { expected: self.data.nrows(), found: first.data.nrows() });
        }
        Ok(Self { data: &self.data * &first.data })
    }

    /// Embeds this map into `num_modes` modes, with local mode `k` acting on
    /// global mode `modes[k]` and the identity elsewhere.
    pub fn embed(&self, modes: &[usize], num_modes: usize) -> Result<Self> {
        if modes.len() != self.num_modes() {
            return Err(Error::DimensionMismatch { expected: self.num_modes(), found: modes.len() });
        }
        for (a, &ma) in modes.iter().enumerate() {
            if ma >= num_modes {
                return Err(Error::ModeOutOfRange { index: ma, num_modes });
            }
            if modes[..a].contains(&ma) {
                return Err(Error::InvalidModePair(ma, ma));
            }
        }
        let mut out = DMatrix::identity(2 * num_modes, 2 * num_modes);
        for (a, &ma) in modes.iter().enumerate() {
            for (b, &mb) in modes.iter().enumerate() {
                for p in 0..2 {
                    for q in 0..2 {
                        out[(2 * ma + p, 2 * mb + q)] = self.data[(2 * a + p, 2 * b + q)];
                    }
                }
            }
        }
        Ok(Self { data: out })
    }

    /// Block-diagonal `self ⊕ other`.
    pub fn direct_sum(&self, other: &Self) -> Self {
        Self { data: block_diag(&self.data, &other.data) }
    }
}

/// `second ∘ first`.
pub fn compose(second: &SymplecticMap, first: &SymplecticMap) -> Result<SymplecticMap> {
    second.after(first)
}

/// QND coupling of the given kind between system mode `modes.0` and ancilla
/// mode `modes.1` inside an `num_modes`-mode system.
pub fn qnd_map(kind: QndKind, kappa: f64, modes: (usize, usize), num_modes: usize) -> Result<SymplecticMap> {
    check_finite("kappa", kappa)?;
    let (sys, anc) = modes;
    if sys == anc {
        return Err(Error::InvalidModePair(sys, anc));
    }
    for m in [sys, anc] {
        if m >= num_modes {
            return Err(Error::ModeOutOfRange { index: m, num_modes });
        }
    }
    let (qa, qb) = kind.offsets();
    let a = 2 * sys + qa;
    let b = 2 * anc + qb;
    // S = 1 + κ Ω G with G_ab = G_ba = 1; Ω only moves x <-> p inside a mode.
    let conj = |idx: usize| if idx.is_multiple_of(2) { (idx + 1, -1.0) } else { (idx - 1, 1.0) };
    let mut data = DMatrix::identity(2 * num_modes, 2 * num_modes);
    let (ca, sa) = conj(a);
    let (cb, sb) = conj(b);
    data[(ca, b)] += sa * kappa;
    data[(cb, a)] += sb * kappa;
    Ok(SymplecticMap { data })
}

/// Single-mode phase rotation `[[cos θ, sin θ], [-sin θ, cos θ]]`.
pub fn phase_map(theta: f64) -> SymplecticMap {
    let (s, c) = theta.sin_cos();
    SymplecticMap { data: DMatrix::from_row_slice(2, 2, &[c, s, -s, c]) }
}

/// Single-mode squeezer `diag(e^s, e^-s)`; `s > 0` squeezes `p`.
pub fn squeeze_map(s: f64) -> SymplecticMap {
    SymplecticMap { data: DMatrix::from_row_slice(2, 2, &[s.exp(), 0.0, 0.0, (-s).exp()]) }
}

/// Two-mode beamsplitter with amplitude transmittance `t`.
pub fn beamsplitter_map(t: f64) -> Result<SymplecticMap> {
    check_unit("T", t)?;
    let r = (1.0 - t * t).sqrt();
    #[rustfmt::skip]
    let data = DMatrix::from_row_slice(4, 4, &[
        t,   0.0, r,   0.0,
        0.0, t,   0.0, r,
        r,   0.0, -t,  0.0,
        0.0, r,   0.0, -t,
    ]);
    Ok(SymplecticMap { data })
}

/// Covariance matrix plus first moments.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    cov: CovarianceMatrix,
    disp: DVector<f64>,
}

impl GaussianState {
    pub fn new(cov: CovarianceMatrix, disp: DVector<f64>) -> Result<Self> {
        let n = cov.as_matrix().nrows();
        if disp.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: disp.len() });
        }
        Ok(Self { cov, disp })
    }

    pub fn centered(cov: CovarianceMatrix) -> Self {
        let n = cov.as_matrix().nrows();
        Self { cov, disp: DVector::zeros(n) }
    }

    pub fn vacuum(num_modes: usize) -> Self {
        Self::centered(CovarianceMatrix::vacuum(num_modes))
    }

    pub fn cov(&self) -> &CovarianceMatrix {
        &self.cov
    }

    pub fn disp(&self) -> &DVector<f64> {
        &self.disp
    }

    pub fn num_modes(&self) -> usize {
        self.cov.num_modes()
    }

    /// `γ -> S γ Sᵀ`, `d -> S d`.
    pub fn apply(&self, map: &SymplecticMap) -> Result<Self> {
        let n = self.cov.as_matrix().nrows();
        if map.data.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, found: map.data.nrows() });
        }
        let mut cov = &map.data * self.cov.as_matrix() * map.data.transpose();
        symmetrize(&mut cov);
        Ok(Self { cov: CovarianceMatrix { data: cov }, disp: &map.data * &self.disp })
    }

    /// Pure-loss channel of efficiency `eta` on each listed mode:
    /// `γ -> L γ L + (1 - η) P`, `d -> L d`, with `L = √η` on the listed
    /// quadratures and 1 elsewhere, `P` the projector on the listed modes.
    pub fn loss(&self, eta: f64, modes: &[usize]) -> Result<Self> {
        check_unit("eta", eta)?;
        let n = self.num_modes();
        let mut scale = vec![1.0; 2 * n];
        for &m in modes {
            if m >= n {
                return Err(Error::ModeOutOfRange { index: m, num_modes: n });
            }
            scale[2 * m] = eta.sqrt();
            scale[2 * m + 1] = eta.sqrt();
        }
        let g = self.cov.as_matrix();
        let mut cov = DMatrix::from_fn(2 * n, 2 * n, |i, j| scale[i] * g[(i, j)] * scale[j]);
        for &m in modes {
            cov[(2 * m, 2 * m)] += 1.0 - eta;
            cov[(2 * m + 1, 2 * m + 1)] += 1.0 - eta;
        }
        let disp = DVector::from_fn(2 * n, |i, _| scale[i] * self.disp[i]);
        Ok(Self { cov: CovarianceMatrix { data: cov }, disp })
    }

    pub fn direct_sum(&self, other: &Self) -> Self {
        let mut disp = DVector::zeros(self.disp.len() + other.disp.len());
        disp.rows_mut(0, self.disp.len()).copy_from(&self.disp);
        disp.rows_mut(self.disp.len(), other.disp.len()).copy_from(&other.disp);
        Self { cov: self.cov.direct_sum(&other.cov), disp }
    }

    /// Wigner function `exp[-(R-d)ᵀ γ⁻¹ (R-d)] / (π^N √det γ)`.
    pub fn wigner(&self, point: &[f64]) -> Result<f64> {
        let n = self.disp.len();
        if point.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: point.len() });
        }
        let chol = self
            .cov
            .as_matrix()
            .clone()
            .cholesky()
            .ok_or(Error::Singular { context: "Wigner covariance" })?;
        let delta = DVector::from_fn(n, |i, _| point[i] - self.disp[i]);
        let solved = chol.solve(&delta);
        let quad = delta.dot(&solved);
        let det = chol.determinant();
        Ok((-quad).exp() / (PI.powi(self.num_modes() as i32) * det.sqrt()))
    }
}

/// Two-mode squeezed vacuum with squeezing `r` on modes `(A, B)`.
pub fn tmsv_state(r: f64) -> Result<GaussianState> {
    check_finite("r", r)?;
    let (c, s) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    #[rustfmt::skip]
    let data = DMatrix::from_row_slice(4, 4, &[
        c,   0.0, s,   0.0,
        0.0, c,   0.0, -s,
        s,   0.0, c,   0.0,
        0.0, -s,  0.0, c,
    ]);
    Ok(GaussianState::centered(CovarianceMatrix { data }))
}

pub fn apply(map: &SymplecticMap, state: &GaussianState) -> Result<GaussianState> {
    state.apply(map)
}

pub fn loss_channel(state: &GaussianState, eta: f64, modes: &[usize]) -> Result<GaussianState> {
    state.loss(eta, modes)
}

pub fn direct_sum(a: &GaussianState, b: &GaussianState) -> GaussianState {
    a.direct_sum(b)
}

pub fn wigner_eval(state: &GaussianState, point: &[f64]) -> Result<f64> {
    state.wigner(point)
}
