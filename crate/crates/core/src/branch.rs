//! Conditional non-Gaussian states as signed mixtures of Gaussian branches.
//!
//! An on/off detection `{|0><0|, 1 - |0><0|}` on two ancillas turns the click
//! projector into `Σ_{ij} (-1)^{i+j} Π_i ⊗ Π_j` with `Π_0 = |0><0|` and
//! `Π_1 = 1`. Each term maps a Gaussian to a (subnormalized) Gaussian, so the
//! heralded state is `M Σ (-1)^{i+j} P^(ij) W^(ij)` with normalized branch
//! Wigner functions `W^(ij)` and `M⁻¹ = Σ (-1)^{i+j} P^(ij)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, RowVector4, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_unit, Error, Result};
use crate::fock::ladder_transform;
use crate::phase_space::{
    phase_map, qnd_map, tmsv_state, CovarianceMatrix, GaussianState, QndKind, SymplecticMap,
};

/// `(i, j)` with 0 = projected onto vacuum and 1 = traced out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BranchIndex {
    i: u8,
    j: u8,
}

impl BranchIndex {
    pub const ALL: [BranchIndex; 4] = [
        BranchIndex { i: 0, j: 0 },
        BranchIndex { i: 0, j: 1 },
        BranchIndex { i: 1, j: 0 },
        BranchIndex { i: 1, j: 1 },
    ];

    pub fn new(i: u8, j: u8) -> Result<Self> {
        if i > 1 || j > 1 {
            return Err(Error::Domain { name: "branch index", value: f64::from(i.max(j)), range: "{0, 1}" });
        }
        Ok(Self { i, j })
    }

    pub fn i(self) -> u8 {
        self.i
    }

    pub fn j(self) -> u8 {
        self.j
    }

    /// `(-1)^{i+j}`.
    pub fn sign(self) -> f64 {
        if (self.i + self.j).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

/// One normalized Gaussian term of a signed mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBranch {
    pub index: BranchIndex,
    pub state: GaussianState,
    /// Unsigned probability `P^(ij)` (times the outcome density for
    /// homodyne-conditioned branches).
    pub weight: f64,
}

impl GaussianBranch {
    pub fn sign(&self) -> f64 {
        self.index.sign()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignedGaussianMixture {
    branches: Vec<GaussianBranch>,
}

impl SignedGaussianMixture {
    pub fn new(branches: Vec<GaussianBranch>) -> Self {
        Self { branches }
    }

    pub fn branches(&self) -> &[GaussianBranch] {
        &self.branches
    }

    /// Raw `Σ sign · weight`, without any cancellation cleanup.
    pub fn signed_sum(&self) -> f64 {
        self.branches.iter().map(|b| b.sign() * b.weight).sum()
    }

    /// Below this magnitude the signed sum is indistinguishable from
    /// cancellation roundoff.
    pub fn noise_floor(&self) -> f64 {
        64.0 * f64::EPSILON * self.branches.iter().map(|b| b.weight.abs()).sum::<f64>()
    }

    /// Heralding probability (or joint density), clamped to exactly zero
    /// when it sits inside the roundoff floor.
    pub fn success_weight(&self) -> f64 {
        let s = self.signed_sum();
        if s.abs() <= self.noise_floor() {
            0.0
        } else {
            s
        }
    }

    /// `M = (Σ sign · weight)⁻¹`.
    pub fn normalization(&self) -> Result<f64> {
        match self.success_weight() {
            w if w > 0.0 => Ok(1.0 / w),
            _ => Err(Error::ZeroSuccessProbability(self.signed_sum())),
        }
    }
}

/// Partition of `Γ = γ⁻¹` into system (first four quadratures), ancilla and
/// cross blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionBlocks {
    pub system: DMatrix<f64>,
    pub ancilla: DMatrix<f64>,
    pub cross: DMatrix<f64>,
}

impl PrecisionBlocks {
    pub fn from_covariance(gamma: &CovarianceMatrix) -> Result<Self> {
        let n = gamma.as_matrix().nrows();
        if n != 8 {
            return Err(Error::DimensionMismatch { expected: 8, found: n });
        }
        let prec = spd_inverse(gamma.as_matrix())
            .ok_or(Error::Singular { context: "pre-measurement covariance" })?;
        Ok(Self {
            system: prec.view((0, 0), (4, 4)).into_owned(),
            ancilla: prec.view((4, 4), (4, 4)).into_owned(),
            cross: prec.view((0, 4), (4, 4)).into_owned(),
        })
    }

    pub fn reassemble(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(8, 8);
        out.view_mut((0, 0), (4, 4)).copy_from(&self.system);
        out.view_mut((4, 4), (4, 4)).copy_from(&self.ancilla);
        out.view_mut((0, 4), (4, 4)).copy_from(&self.cross);
        out.view_mut((4, 0), (4, 4)).copy_from(&self.cross.transpose());
        out
    }
}

fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut inv = m.clone().cholesky()?.inverse();
    let n = inv.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = v;
            inv[(j, i)] = v;
        }
    }
    Some(inv)
}

fn spd_det(m: &DMatrix<f64>) -> Option<f64> {
    m.clone().cholesky().map(|c| c.determinant())
}

/// Covariance of `A, B, a, b` right before the ancillas are detected, for an
/// arbitrary two-mode system-ancilla interaction applied to `(A, a)` and
/// `(B, b)`, followed by loss `eta` on the ancillas.
pub fn pre_measurement_cov(r: f64, interaction: &SymplecticMap, eta: f64) -> Result<CovarianceMatrix> {
    check_unit("eta", eta)?;
    if interaction.num_modes() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: interaction.num_modes() });
    }
    let init = tmsv_state(r)?.direct_sum(&GaussianState::vacuum(2));
    let map = interaction.embed(&[0, 2], 4)?.after(&interaction.embed(&[1, 3], 4)?)?;
    Ok(init.apply(&map)?.loss(eta, &[2, 3])?.cov().clone())
}

/// QND interaction of `kind` and strength `kappa` on both arms.
pub fn protocol1_pre_measurement_cov(
    r: f64,
    kappa: f64,
    kind: QndKind,
    eta: f64,
) -> Result<CovarianceMatrix> {
    pre_measurement_cov(r, &qnd_map(kind, kappa, (0, 1), 2)?, eta)
}

/// Splits the heralded state of modes `A, B` after a click on both ancillas
/// of the 8x8 `gamma` (modes `A, B, a, b`) into its four Gaussian branches.
pub fn on_off_branches(gamma: &CovarianceMatrix) -> Result<SignedGaussianMixture> {
    let blocks = PrecisionBlocks::from_covariance(gamma)?;
    let det_full = spd_det(gamma.as_matrix())
        .map(|d| 1.0 / d)
        .ok_or(Error::Singular { context: "pre-measurement covariance" })?;
    let mut branches = Vec::with_capacity(4);
    for index in BranchIndex::ALL {
        let sing = |context| Error::BranchSingular { i: index.i, j: index.j, context };
        let mut anc = blocks.ancilla.clone();
        for q in 0..2 {
            anc[(q, q)] += f64::from(1 - index.i);
            anc[(2 + q, 2 + q)] += f64::from(1 - index.j);
        }
        let anc_inv = spd_inverse(&anc).ok_or_else(|| sing("ancilla precision"))?;
        let sys = &blocks.system - &blocks.cross * &anc_inv * blocks.cross.transpose();
        let cov = spd_inverse(&sys).ok_or_else(|| sing("system precision"))?;
        let det_sys = spd_det(&sys).ok_or_else(|| sing("system precision"))?;
        let det_anc = spd_det(&anc).ok_or_else(|| sing("ancilla precision"))?;
        let weight =
            f64::from(1u8 << (2 - index.i - index.j)) * det_full.sqrt() / (det_sys.sqrt() * det_anc.sqrt());
        branches.push(GaussianBranch {
            index,
            state: GaussianState::centered(CovarianceMatrix::new(cov)?),
            weight,
        });
    }
    Ok(SignedGaussianMixture::new(branches))
}

/// Variances `(ϑ₊(k), ϑ₋(k))` of a squeezed vacuum `diag(e^{2s}, e^{-2s})`
/// after a beamsplitter of intensity transmittance `t²` whose reflected port
/// is projected on vacuum (`k = 0`) or discarded (`k = 1`) by a detector of
/// efficiency `eta`.
pub fn subtraction_variances(s: f64, t: f64, eta: f64, k: u8) -> (f64, f64) {
    let k = f64::from(k);
    let var = |e: f64| {
        1.0 + (2.0 - k) * (e - 1.0) * t * t / (1.0 + (1.0 - k) * (1.0 + eta * (e - 1.0) * (1.0 - t * t)))
    };
    (var((2.0 * s).exp()), var((-2.0 * s).exp()))
}

/// Probability that the tapped-off port of one ancilla shows no click.
fn no_click_probability(s: f64, t: f64, eta: f64) -> f64 {
    let denom: f64 =
        [(2.0 * s).exp(), (-2.0 * s).exp()].iter().map(|e| 2.0 + eta * (1.0 - t * t) * (e - 1.0)).product();
    2.0 / denom.sqrt()
}

/// `(τ₊(k), τ₋(k))` as used by the closed-form weight expression
/// `2^{2-i-j} √(ϑ₊ϑ₋ϑ₊ϑ₋) / √(τ₊τ₋τ₊τ₋)`. For `eta = 1` this reproduces the
/// vacuum-overlap weights exactly; for `eta < 1` all four weights pick up
/// the same extra factor, which cancels in any normalized quantity.
pub fn closed_form_tau(s: f64, t: f64, eta: f64, k: u8) -> (f64, f64) {
    let k = f64::from(k);
    let tau = |e: f64| 1.0 - k - (1.0 + (e - 1.0) * t * t) / ((1.0 - eta) * (e - 1.0) * (1.0 - t * t) - e);
    (tau((2.0 * s).exp()), tau((-2.0 * s).exp()))
}

/// Branch weights from the `ϑ/τ` closed form, in [`BranchIndex::ALL`] order.
pub fn closed_form_subtraction_weights(s: f64, t: f64, eta: f64) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (slot, index) in BranchIndex::ALL.iter().enumerate() {
        let (ti, tj) = (closed_form_tau(s, t, eta, index.i), closed_form_tau(s, t, eta, index.j));
        let tau_prod = ti.0 * ti.1 * tj.0 * tj.1;
        if tau_prod <= 0.0 || !tau_prod.is_finite() {
            return Err(Error::DegenerateBranch(tau_prod));
        }
        let (vi, vj) = (subtraction_variances(s, t, eta, index.i), subtraction_variances(s, t, eta, index.j));
        out[slot] =
            f64::from(1u8 << (2 - index.i - index.j)) * (vi.0 * vi.1 * vj.0 * vj.1).sqrt() / tau_prod.sqrt();
    }
    Ok(out)
}

/// Photon-subtracted squeezed vacua on both ancillas `a, b` (squeezing `s`,
/// amplitude transmittance `t`, on/off efficiency `eta`).
pub fn prepare_subtracted_ancilla(s: f64, t: f64, eta: f64) -> Result<SignedGaussianMixture> {
    check_finite("s", s)?;
    check_unit("T", t)?;
    check_unit("eta", eta)?;
    let p_vac = no_click_probability(s, t, eta);
    let per_mode = |k: u8| if k == 0 { p_vac } else { 1.0 };
    let branches = BranchIndex::ALL
        .iter()
        .map(|&index| {
            let (a, b) =
                (subtraction_variances(s, t, eta, index.i), subtraction_variances(s, t, eta, index.j));
            let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![a.0, a.1, b.0, b.1]));
            Ok(GaussianBranch {
                index,
                state: GaussianState::centered(CovarianceMatrix::new(cov)?),
                weight: per_mode(index.i) * per_mode(index.j),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SignedGaussianMixture::new(branches))
}

/// How detector inefficiency `ξ` enters before the homodyne measurement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum HomodyneLoss {
    /// Beamsplitter loss: `√ξ` on both sides of the ancilla rows and columns
    /// plus `(1 - ξ)` vacuum noise.
    #[default]
    Symmetric,
    /// Cross blocks scaled by `ξ` instead of `√ξ`; ancilla block as above.
    CrossScaled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomodyneSettings {
    /// Measured quadrature `x cos θ + p sin θ`.
    pub theta: f64,
    pub xi: f64,
    /// Outcomes `(z_a, z_b)`.
    pub outcome: [f64; 2],
    pub loss: HomodyneLoss,
}

impl HomodyneSettings {
    pub fn new(theta: f64, xi: f64, z: f64) -> Self {
        Self { theta, xi, outcome: [z, z], loss: HomodyneLoss::default() }
    }
}

/// Result of conditioning one Gaussian branch on homodyne outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct HomodyneReduction {
    /// Outcome density `q_z` at `(z_a, z_b)`.
    pub q_z: f64,
    /// `ℬ - 𝒞ᵀ𝒜⁻¹𝒞`, the precision of the outcome marginal.
    pub outcome_precision: Matrix2<f64>,
    /// `Φ = U (𝒜⁻¹ + 1)⁻¹ U†`.
    pub phi: Matrix4<Complex64>,
    /// `Λ = 2 zᵀ 𝒞ᵀ 𝒜⁻¹ (𝒜⁻¹ + 1)⁻¹ U†`.
    pub lambda: RowVector4<Complex64>,
    /// Conditional state of `A, B`: covariance `𝒜⁻¹`, mean `-𝒜⁻¹𝒞z`.
    pub conditional: GaussianState,
}

/// Conditions the 8x8 branch covariance (modes `A, B, a, b`) on homodyne
/// outcomes of both ancillas.
pub fn homodyne_reduce(gamma: &CovarianceMatrix, settings: &HomodyneSettings) -> Result<HomodyneReduction> {
    let xi = check_unit("xi", settings.xi)?;
    check_finite("theta", settings.theta)?;
    if gamma.num_modes() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: gamma.num_modes() });
    }
    let lossy = match settings.loss {
        HomodyneLoss::Symmetric => GaussianState::centered(gamma.clone()).loss(xi, &[2, 3])?.cov().clone(),
        HomodyneLoss::CrossScaled => {
            let g = gamma.as_matrix();
            let m = DMatrix::from_fn(8, 8, |i, j| match (i >= 4, j >= 4) {
                (false, false) => g[(i, j)],
                (true, true) => xi * g[(i, j)] + if i == j { 1.0 - xi } else { 0.0 },
                _ => xi * g[(i, j)],
            });
            CovarianceMatrix::new(m)?
        }
    };
    let rot = phase_map(settings.theta).direct_sum(&phase_map(settings.theta));
    let rotated = GaussianState::centered(lossy).apply(&SymplecticMap::identity(2).direct_sum(&rot))?;
    // keep x_A p_A x_B p_B and the measured x_a, x_b; drop the conjugates
    let mu = rotated.cov().select(&[0, 1, 2, 3, 4, 6]);
    let mu_inv = spd_inverse(&mu).ok_or(Error::Singular { context: "homodyne covariance μ" })?;
    let a = mu_inv.fixed_view::<4, 4>(0, 0).into_owned();
    let b = mu_inv.fixed_view::<2, 2>(4, 4).into_owned();
    let c = mu_inv.fixed_view::<4, 2>(0, 4).into_owned();
    let a_inv = a.try_inverse().ok_or(Error::Singular { context: "conditional precision 𝒜" })?;
    let outcome_precision = b - c.transpose() * a_inv * c;
    let z = Vector2::new(settings.outcome[0], settings.outcome[1]);
    let det = outcome_precision.determinant();
    if det <= 0.0 {
        return Err(Error::Singular { context: "outcome precision" });
    }
    let q_z = det.sqrt() / PI * (-(z.transpose() * outcome_precision * z)[(0, 0)]).exp();

    let smoothed =
        (a_inv + Matrix4::identity()).try_inverse().ok_or(Error::Singular { context: "𝒜⁻¹ + 1" })?;
    let u = ladder_transform();
    let u_dag = u.adjoint();
    let phi = u * smoothed.map(|v| Complex64::new(v, 0.0)) * u_dag;
    let lin = (z.transpose() * c.transpose() * a_inv * smoothed) * 2.0;
    let lambda = lin.map(|v| Complex64::new(v, 0.0)) * u_dag;

    let mean = -(a_inv * c * z);
    let cond_cov = CovarianceMatrix::new(DMatrix::from_fn(4, 4, |i, j| a_inv[(i, j)]))?;
    let conditional = GaussianState::new(cond_cov, DVector::from_column_slice(mean.as_slice()))?;
    Ok(HomodyneReduction { q_z, outcome_precision, phi, lambda, conditional })
}

/// A homodyne-conditioned branch of Protocol II.
#[derive(Clone, Debug, PartialEq)]
pub struct HomodyneBranch {
    pub index: BranchIndex,
    /// Preparation weight `P^(ij)`.
    pub weight: f64,
    pub reduction: HomodyneReduction,
}

impl HomodyneBranch {
    /// `(-1)^{i+j} P^(ij) q_z^(ij)`.
    pub fn signed_joint_weight(&self) -> f64 {
        self.index.sign() * self.weight * self.reduction.q_z
    }
}

/// Per-branch covariance after the QND interaction: `S (γ_TMSV ⊕ γ_ab^(ij)) Sᵀ`.
pub fn interact_branch(
    r: f64,
    ancilla: &GaussianState,
    interaction: &SymplecticMap,
) -> Result<CovarianceMatrix> {
    if ancilla.num_modes() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: ancilla.num_modes() });
    }
    let init = tmsv_state(r)?.direct_sum(ancilla);
    let map = interaction.embed(&[0, 2], 4)?.after(&interaction.embed(&[1, 3], 4)?)?;
    Ok(init.apply(&map)?.cov().clone())
}

/// Runs every ancilla branch through the interaction and the homodyne
/// measurement. `M_hom⁻¹` is the sum of [`HomodyneBranch::signed_joint_weight`].
pub fn homodyne_branches(
    r: f64,
    ancilla: &SignedGaussianMixture,
    interaction: &SymplecticMap,
    settings: &HomodyneSettings,
) -> Result<Vec<HomodyneBranch>> {
    ancilla
        .branches()
        .iter()
        .map(|b| {
            let gamma = interact_branch(r, &b.state, interaction)?;
            let reduction = homodyne_reduce(&gamma, settings).map_err(|e| match e {
                Error::Singular { context } => Error::BranchSingular { i: b.index.i, j: b.index.j, context },
                other => other,
            })?;
            Ok(HomodyneBranch { index: b.index, weight: b.weight, reduction })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_index_bounds() {
        assert!(BranchIndex::new(2, 0).is_err());
        assert_eq!(BranchIndex::new(0, 1).unwrap().sign(), -1.0);
        assert_eq!(BranchIndex::new(1, 1).unwrap().sign(), 1.0);
    }

    #[test]
    fn no_interaction_gives_tmsv_plus_vacua() {
        let g = protocol1_pre_measurement_cov(0.4, 0.0, QndKind::XP, 1.0).unwrap();
        let expected = tmsv_state(0.4).unwrap().direct_sum(&GaussianState::vacuum(2));
        assert!((g.as_matrix() - expected.cov().as_matrix()).amax() < 1e-15);
    }

    #[test]
    fn vacuum_ancillas_never_click() {
        let g = protocol1_pre_measurement_cov(0.3, 0.0, QndKind::XP, 1.0).unwrap();
        let mix = on_off_branches(&g).unwrap();
        for b in mix.branches() {
            assert!((b.weight - 1.0).abs() < 1e-12);
        }
        assert_eq!(mix.success_weight(), 0.0);
        assert!(matches!(mix.normalization(), Err(Error::ZeroSuccessProbability(_))));
    }

    #[test]
    fn trace_out_branch_is_plain_marginal() {
        let g = protocol1_pre_measurement_cov(0.345, 0.5, QndKind::XP, 0.8).unwrap();
        let mix = on_off_branches(&g).unwrap();
        let b11 = &mix.branches()[3];
        assert_eq!(b11.index, BranchIndex::new(1, 1).unwrap());
        assert!((b11.weight - 1.0).abs() < 1e-12);
        let marginal = g.select(&[0, 1, 2, 3]);
        assert!((b11.state.cov().as_matrix() - marginal).amax() < 1e-10);
    }

    #[test]
    fn precision_blocks_reassemble() {
        let g = protocol1_pre_measurement_cov(0.2, 0.7, QndKind::PP, 0.9).unwrap();
        let blocks = PrecisionBlocks::from_covariance(&g).unwrap();
        let inv = g.as_matrix().clone().try_inverse().unwrap();
        assert!((blocks.reassemble() - inv).amax() < 1e-10);
    }

    #[test]
    fn weights_in_unit_interval_and_normalized() {
        let g = protocol1_pre_measurement_cov(0.345, 0.5, QndKind::XP, 1.0).unwrap();
        let mix = on_off_branches(&g).unwrap();
        for b in mix.branches() {
            assert!((0.0..=1.0).contains(&b.weight));
            assert!(b.state.cov().is_physical());
        }
        let m = mix.normalization().unwrap();
        assert!((m * mix.signed_sum() - 1.0).abs() < 1e-10);
        assert!((0.0..=1.0).contains(&mix.success_weight()));
    }

    #[test]
    fn dead_detectors_never_herald() {
        let g = protocol1_pre_measurement_cov(0.3, 0.8, QndKind::XP, 0.0).unwrap();
        assert_eq!(on_off_branches(&g).unwrap().success_weight(), 0.0);
    }

    #[test]
    fn on_off_rejects_wrong_size() {
        let g = CovarianceMatrix::vacuum(2);
        assert!(matches!(on_off_branches(&g), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn unsqueezed_ancilla_cannot_be_subtracted() {
        let mix = prepare_subtracted_ancilla(0.0, 0.95, 1.0).unwrap();
        for b in mix.branches() {
            assert_eq!(b.weight, 1.0);
        }
        assert_eq!(mix.signed_sum(), 0.0);
        assert_eq!(closed_form_tau(0.0, 0.95, 1.0, 0), (2.0, 2.0));
        assert_eq!(closed_form_tau(0.0, 0.95, 1.0, 1), (1.0, 1.0));
    }

    #[test]
    fn full_transmission_leaves_squeezed_vacuum() {
        let s = 0.4;
        let (vp, vm) = subtraction_variances(s, 1.0, 0.7, 1);
        assert!((vp - (2.0 * s).exp()).abs() < 1e-14);
        assert!((vm - (-2.0 * s).exp()).abs() < 1e-14);
    }

    #[test]
    fn subtraction_weights_match_closed_form_at_unit_efficiency() {
        let mix = prepare_subtracted_ancilla(0.2, 0.95, 1.0).unwrap();
        let expected = closed_form_subtraction_weights(0.2, 0.95, 1.0).unwrap();
        for (b, p) in mix.branches().iter().zip(expected) {
            assert!((b.weight - p).abs() < 1e-13);
            assert!((0.0..=1.0).contains(&b.weight));
        }
        let succ = mix.success_weight();
        assert!(succ > 0.0 && succ < 1.0);
    }

    #[test]
    fn closed_form_weights_differ_by_uniform_factor_below_unit_efficiency() {
        let (s, t, eta) = (0.5, 0.9, 0.6);
        let mix = prepare_subtracted_ancilla(s, t, eta).unwrap();
        let expected = closed_form_subtraction_weights(s, t, eta).unwrap();
        let ratios: Vec<f64> = mix.branches().iter().zip(expected).map(|(b, p)| p / b.weight).collect();
        let u = (1.0 - eta) * (1.0 - t * t);
        let factor: f64 = [(2.0 * s).exp(), (-2.0 * s).exp()].iter().map(|e| e - u * (e - 1.0)).product();
        for r in ratios {
            assert!((r - factor).abs() < 1e-12);
        }
    }

    #[test]
    fn homodyne_at_zero_outcome() {
        let anc = prepare_subtracted_ancilla(0.2, 0.95, 1.0).unwrap();
        let g =
            interact_branch(0.3, &anc.branches()[0].state, &qnd_map(QndKind::XP, 0.5, (0, 1), 2).unwrap())
                .unwrap();
        let red = homodyne_reduce(&g, &HomodyneSettings::new(0.0, 1.0, 0.0)).unwrap();
        let expected = red.outcome_precision.determinant().sqrt() / PI;
        assert!((red.q_z - expected).abs() < 1e-15);
        assert!(red.lambda.iter().all(|l| l.norm() == 0.0));
        assert!(red.conditional.disp().iter().all(|d| *d == 0.0));
    }

    #[test]
    fn homodyne_marginal_matches_covariance_subblock() {
        let anc = prepare_subtracted_ancilla(0.3, 0.95, 1.0).unwrap();
        for (theta, xi) in [(0.0, 1.0), (0.7, 0.8), (1.3, 0.5)] {
            for b in anc.branches() {
                let g =
                    interact_branch(0.4, &b.state, &qnd_map(QndKind::XP, 0.6, (0, 1), 2).unwrap()).unwrap();
                let settings =
                    HomodyneSettings { theta, xi, outcome: [0.3, -0.2], loss: HomodyneLoss::Symmetric };
                let red = homodyne_reduce(&g, &settings).unwrap();
                // x_θ marginal computed directly from the covariance matrix
                let lossy = GaussianState::centered(g.clone()).loss(xi, &[2, 3]).unwrap();
                let (c, s) = (theta.cos(), theta.sin());
                let m = lossy.cov().as_matrix();
                let var = |k: usize, l: usize| {
                    let (ik, il) = (4 + 2 * k, 4 + 2 * l);
                    c * c * m[(ik, il)]
                        + c * s * (m[(ik, il + 1)] + m[(ik + 1, il)])
                        + s * s * m[(ik + 1, il + 1)]
                };
                let sigma = Matrix2::new(var(0, 0), var(0, 1), var(1, 0), var(1, 1));
                let z = Vector2::new(0.3, -0.2);
                let dens = (-(z.transpose() * sigma.try_inverse().unwrap() * z)[(0, 0)]).exp()
                    / (PI * sigma.determinant().sqrt());
                assert!((red.q_z - dens).abs() < 1e-12 * dens.max(1.0));
            }
        }
    }

    #[test]
    fn cross_scaled_loss_only_matters_for_lossy_homodyne() {
        let anc = prepare_subtracted_ancilla(0.2, 0.95, 1.0).unwrap();
        let g =
            interact_branch(0.3, &anc.branches()[0].state, &qnd_map(QndKind::XP, 0.5, (0, 1), 2).unwrap())
                .unwrap();
        let mut s = HomodyneSettings::new(0.0, 1.0, 0.2);
        let a = homodyne_reduce(&g, &s).unwrap();
        s.loss = HomodyneLoss::CrossScaled;
        let b = homodyne_reduce(&g, &s).unwrap();
        assert!((a.q_z - b.q_z).abs() < 1e-14);
        s.xi = 0.6;
        let c = homodyne_reduce(&g, &s).unwrap();
        s.loss = HomodyneLoss::Symmetric;
        let d = homodyne_reduce(&g, &s).unwrap();
        // the outcome marginal only sees the ancilla block, the conditional
        // state sees the cross correlations
        assert!((c.q_z - d.q_z).abs() < 1e-14);
        let diff = (c.conditional.cov().as_matrix() - d.conditional.cov().as_matrix()).amax();
        assert!(diff > 1e-6);
    }
}
