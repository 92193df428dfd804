//! Two-qubit correlation tensors.
//!
//! Any two-qubit state can be written as
//! `ρ = ¼[I⊗I + (α·σ)⊗I + I⊗(β·σ) + Σ T_ij σ_i⊗σ_j]`.
//! A state whose identical-setting correlation `⟨n·σ ⊗ n·σ⟩ = nTnᵀ` is `±1`
//! for every direction needs `T = ±I₃ + X` with `X` antisymmetric; positivity
//! then forces `α = β = X = 0` and only the minus sign survives, which is the
//! singlet. [`certify_singlet_invariance`] walks that chain on a concrete state.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, ONE, ZERO};
use crate::qudit::{DensityMatrix, PureState};

/// Tolerance on structural residuals (split residual, Bloch vector norms).
pub const STRUCTURAL_TOLERANCE: f64 = 1e-10;
/// Tolerance on the final entrywise comparison with the singlet projector.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;
/// Tolerance on the pair-sum identity, which goes through an eigensolve.
pub const VIETA_TOLERANCE: f64 = 1e-8;
pub const UNIT_VECTOR_TOLERANCE: f64 = 1e-9;

/// The Pauli matrices σ_x, σ_y, σ_z.
pub fn pauli_matrices() -> [CMatrix; 3] {
    [
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        CMatrix::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]),
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(-1.0, 0.0)]),
    ]
}

/// `n·σ`.
pub fn sigma_along(n: &Vector3<f64>) -> CMatrix {
    let s = pauli_matrices();
    s[0].scale(n[0]) + s[1].scale(n[1]) + s[2].scale(n[2])
}

/// Bloch vectors and correlation tensor of a two-qubit operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTensorDecomposition {
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
    #[serde(rename = "T")]
    pub t: [[f64; 3]; 3],
}

impl CorrelationTensorDecomposition {
    pub fn new(alpha: Vector3<f64>, beta: Vector3<f64>, t: Matrix3<f64>) -> Self {
        CorrelationTensorDecomposition {
            alpha: alpha.into(),
            beta: beta.into(),
            t: std::array::from_fn(|i| std::array::from_fn(|j| t[(i, j)])),
        }
    }

    pub fn alpha(&self) -> Vector3<f64> {
        Vector3::from(self.alpha)
    }

    pub fn beta(&self) -> Vector3<f64> {
        Vector3::from(self.beta)
    }

    pub fn tensor(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.t[i][j])
    }

    /// Checks the norm bounds every physical two-qubit state satisfies.
    pub fn satisfies_state_bounds(&self) -> bool {
        let t = self.tensor();
        let a2 = self.alpha().norm_squared();
        let b2 = self.beta().norm_squared();
        a2.sqrt() <= 1.0 + 1e-9
            && b2.sqrt() <= 1.0 + 1e-9
            && t.iter().all(|v| v.abs() <= 1.0 + 1e-9)
            && a2 + b2 + t.norm_squared() <= 3.0 + 1e-8
    }
}

/// `α_i = Tr[ρ σ_i⊗I]`, `β_j = Tr[ρ I⊗σ_j]`, `T_ij = Tr[ρ σ_i⊗σ_j]`.
pub fn decompose(rho: &DensityMatrix) -> Result<CorrelationTensorDecomposition> {
    rho.require_bipartite(2)?;
    let m = rho.matrix();
    let s = pauli_matrices();
    let id = linalg::identity(2);
    let expect = |op: &CMatrix| linalg::trace(&(m * op)).re;
    let alpha = Vector3::from_fn(|i, _| expect(&linalg::kron(&s[i], &id)));
    let beta = Vector3::from_fn(|j, _| expect(&linalg::kron(&id, &s[j])));
    let t = Matrix3::from_fn(|i, j| expect(&linalg::kron(&s[i], &s[j])));
    Ok(CorrelationTensorDecomposition::new(alpha, beta, t))
}

/// Evaluates the decomposition forward. Always Hermitian with unit trace; not
/// necessarily positive.
pub fn reconstruct(decomp: &CorrelationTensorDecomposition) -> CMatrix {
    let s = pauli_matrices();
    let id = linalg::identity(2);
    let mut m = linalg::identity(4);
    for i in 0..3 {
        m += linalg::kron(&s[i], &id).scale(decomp.alpha[i]);
        m += linalg::kron(&id, &s[i]).scale(decomp.beta[i]);
        for j in 0..3 {
            m += linalg::kron(&s[i], &s[j]).scale(decomp.t[i][j]);
        }
    }
    m.scale(0.25)
}

/// `nTnᵀ`, the correlation of identical spin measurements along `n`.
pub fn correlation_value(decomp: &CorrelationTensorDecomposition, n: &Vector3<f64>) -> Result<f64> {
    let norm = n.norm();
    if (norm - 1.0).abs() > UNIT_VECTOR_TOLERANCE {
        return Err(Error::NotUnitVector { norm });
    }
    Ok((n.transpose() * decomp.tensor() * n)[(0, 0)])
}

/// `Tr[ρ (n·σ)⊗(n·σ)]` computed on the full operator.
pub fn direct_correlation(rho: &DensityMatrix, n: &Vector3<f64>) -> Result<f64> {
    rho.require_bipartite(2)?;
    let ns = sigma_along(n);
    Ok(linalg::trace(&(rho.matrix() * linalg::kron(&ns, &ns))).re)
}

/// A real antisymmetric 3×3 matrix, stored by its upper-triangle entries.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Antisymmetric3 {
    pub x12: f64,
    pub x13: f64,
    pub x23: f64,
}

impl Antisymmetric3 {
    pub fn new(x12: f64, x13: f64, x23: f64) -> Self {
        Antisymmetric3 { x12, x13, x23 }
    }

    /// `(M − Mᵀ)/2`.
    pub fn antisymmetric_part(m: &Matrix3<f64>) -> Self {
        Antisymmetric3 {
            x12: 0.5 * (m[(0, 1)] - m[(1, 0)]),
            x13: 0.5 * (m[(0, 2)] - m[(2, 0)]),
            x23: 0.5 * (m[(1, 2)] - m[(2, 1)]),
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            0.0, self.x12, self.x13,
            -self.x12, 0.0, self.x23,
            -self.x13, -self.x23, 0.0,
        )
    }

    /// `Tr(XᵀX)`.
    pub fn norm_squared(&self) -> f64 {
        2.0 * (self.x12 * self.x12 + self.x13 * self.x13 + self.x23 * self.x23)
    }
}

/// Sign of the correlation hypothesis, `+1` or `−1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Best fit of `T` to the form `sign·I₃ + X`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AntisymmetricSplit {
    pub sign: Sign,
    pub x: Antisymmetric3,
    /// `‖T − sign·I₃ − X‖_F`.
    pub residual: f64,
}

/// The sign comes from `Tr(T)/3` (zero maps to `+`) and `X` is the
/// antisymmetric part of `T`; the residual is zero exactly when `T` has the
/// `±I₃ + X` form.
pub fn antisymmetric_split(t: &Matrix3<f64>) -> AntisymmetricSplit {
    let sign = if t.trace() / 3.0 >= 0.0 { Sign::Plus } else { Sign::Minus };
    let x = Antisymmetric3::antisymmetric_part(t);
    let residual = (t - Matrix3::identity() * sign.value() - x.matrix()).norm();
    AntisymmetricSplit { sign, x, residual }
}

/// Builds `¼[I⊗I + sign·Σσ_i⊗σ_i + Σ_{i<j} X_ij(σ_i⊗σ_j − σ_j⊗σ_i) + (α·σ)⊗I + I⊗(β·σ)]`.
pub fn constrained_operator(alpha: &Vector3<f64>, beta: &Vector3<f64>, x: &Antisymmetric3, sign: Sign) -> CMatrix {
    let t = Matrix3::identity() * sign.value() + x.matrix();
    reconstruct(&CorrelationTensorDecomposition::new(*alpha, *beta, t))
}

/// Both sides of the pair-sum identity for the constrained operator:
/// `lhs = Σ_{i<j} λ_i λ_j` by brute force over the eigenvalues,
/// `rhs = −(‖α‖² + ‖β‖² + ‖X‖²)/8`.
pub fn vieta_pair_sum(alpha: &Vector3<f64>, beta: &Vector3<f64>, x: &Antisymmetric3, sign: Sign) -> (f64, f64) {
    let ev = linalg::eigvalsh(&constrained_operator(alpha, beta, x, sign));
    let mut lhs = 0.0;
    for i in 0..ev.len() {
        for j in (i + 1)..ev.len() {
            lhs += ev[i] * ev[j];
        }
    }
    let rhs = -(alpha.norm_squared() + beta.norm_squared() + x.norm_squared()) / 8.0;
    (lhs, rhs)
}

/// Why a two-qubit state fails to carry an invariant perfect correlation.
/// Variants follow the order in which the conditions are checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum NotInvariantReason {
    /// `T` is not of the form `±I₃ + X`.
    TensorNotSplittable { residual: f64 },
    /// Local Bloch vector of A is nonzero.
    NonzeroAlpha { norm: f64 },
    /// Local Bloch vector of B is nonzero.
    NonzeroBeta { norm: f64 },
    /// `X ≠ 0`, which positivity rules out.
    NonzeroAntisymmetric { norm: f64 },
    /// `T = +I₃`: the correlated (type II) form, which is not positive.
    CorrelatedSign,
    /// Every structural condition holds but the state is not the singlet projector.
    NotSinglet { distance: f64 },
}

impl std::fmt::Display for NotInvariantReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::TensorNotSplittable { residual } => {
                write!(f, "T is not ±I3 + antisymmetric (residual {residual:.3e})")
            }
            Self::NonzeroAlpha { norm } => write!(f, "alpha != 0 (norm {norm:.3e})"),
            Self::NonzeroBeta { norm } => write!(f, "beta != 0 (norm {norm:.3e})"),
            Self::NonzeroAntisymmetric { norm } => write!(f, "X != 0 (norm {norm:.3e})"),
            Self::CorrelatedSign => write!(f, "T = +I3 (correlated type) is not positive"),
            Self::NotSinglet { distance } => {
                write!(f, "T != -I3: distance to singlet {distance:.3e}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Verdict {
    TypeICertified,
    NotInvariant(NotInvariantReason),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals {
    pub split_residual: f64,
    pub alpha_norm: f64,
    pub beta_norm: f64,
    pub antisymmetric_norm: f64,
    pub singlet_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub verdict: Verdict,
    pub residuals: Residuals,
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        matches!(self.verdict, Verdict::TypeICertified)
    }

    pub fn reason(&self) -> Option<&NotInvariantReason> {
        match &self.verdict {
            Verdict::TypeICertified => None,
            Verdict::NotInvariant(r) => Some(r),
        }
    }
}

/// Decides whether a two-qubit state has the invariant anti-correlation
/// (`⟨n·σ⊗n·σ⟩ = −1` for all `n`), reporting the first failed condition.
pub fn certify_singlet_invariance(rho: &DensityMatrix) -> Result<Certificate> {
    let decomp = decompose(rho)?;
    let split = antisymmetric_split(&decomp.tensor());
    let residuals = Residuals {
        split_residual: split.residual,
        alpha_norm: decomp.alpha().norm(),
        beta_norm: decomp.beta().norm(),
        antisymmetric_norm: split.x.norm_squared().sqrt(),
        singlet_distance: rho.max_abs_diff(&PureState::singlet().density()),
    };
    let reason = if residuals.split_residual > STRUCTURAL_TOLERANCE {
        Some(NotInvariantReason::TensorNotSplittable {
            residual: residuals.split_residual,
        })
    } else if residuals.alpha_norm > STRUCTURAL_TOLERANCE {
        Some(NotInvariantReason::NonzeroAlpha {
            norm: residuals.alpha_norm,
        })
    } else if residuals.beta_norm > STRUCTURAL_TOLERANCE {
        Some(NotInvariantReason::NonzeroBeta {
            norm: residuals.beta_norm,
        })
    } else if residuals.antisymmetric_norm > STRUCTURAL_TOLERANCE {
        Some(NotInvariantReason::NonzeroAntisymmetric {
            norm: residuals.antisymmetric_norm,
        })
    } else if split.sign == Sign::Plus {
        Some(NotInvariantReason::CorrelatedSign)
    } else if residuals.singlet_distance > CERTIFICATE_TOLERANCE {
        Some(NotInvariantReason::NotSinglet {
            distance: residuals.singlet_distance,
        })
    } else {
        None
    };
    let verdict = match reason {
        None => Verdict::TypeICertified,
        Some(r) => Verdict::NotInvariant(r),
    };
    Ok(Certificate { verdict, residuals })
}

/// Projects a two-qubit state onto the only candidate form compatible with an
/// invariant perfect correlation: drops `α`, `β` and `X`, keeping
/// `¼(I⊗I + sign·Σσ_i⊗σ_i)` with the sign inferred from `Tr T`.
pub fn snap_to_invariant_form(rho: &DensityMatrix) -> Result<CMatrix> {
    let split = antisymmetric_split(&decompose(rho)?.tensor());
    Ok(constrained_operator(
        &Vector3::zeros(),
        &Vector3::zeros(),
        &Antisymmetric3::default(),
        split.sign,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::{random_state, StateKind};
    use crate::rng::stream;
    use rand::Rng;

    fn assert_vec3(v: Vector3<f64>, want: [f64; 3]) {
        for k in 0..3 {
            assert!((v[k] - want[k]).abs() < 1e-12, "{v:?} vs {want:?}");
        }
    }

    #[test]
    fn pauli_algebra() {
        // σ_i σ_j = δ_ij I + i ε_ijk σ_k
        let s = pauli_matrices();
        let id = linalg::identity(2);
        let eps = |i: usize, j: usize, k: usize| -> f64 {
            match (i, j, k) {
                (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
                (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
                _ => 0.0,
            }
        };
        for i in 0..3 {
            for j in 0..3 {
                let mut want = if i == j { id.clone() } else { CMatrix::zeros(2, 2) };
                for k in 0..3 {
                    want += s[k].map(|z| z * c(0.0, eps(i, j, k)));
                }
                assert!(linalg::max_abs_diff(&(&s[i] * &s[j]), &want) <= 1e-14);
            }
        }
    }

    #[test]
    fn decompose_examples() {
        let d = decompose(&PureState::singlet().density()).unwrap();
        assert_vec3(d.alpha(), [0.0; 3]);
        assert_vec3(d.beta(), [0.0; 3]);
        assert!((d.tensor() + Matrix3::identity()).norm() < 1e-12);

        let d = decompose(&PureState::product(2, 0, 0).unwrap().density()).unwrap();
        assert_vec3(d.alpha(), [0.0, 0.0, 1.0]);
        assert_vec3(d.beta(), [0.0, 0.0, 1.0]);
        assert!((d.tensor() - Matrix3::from_diagonal(&Vector3::new(0.0, 0.0, 1.0))).norm() < 1e-12);

        let d = decompose(&DensityMatrix::maximally_mixed(2)).unwrap();
        assert!(d.alpha().norm() + d.beta().norm() + d.tensor().norm() < 1e-12);

        assert!(decompose(&PureState::max_entangled(3).density()).is_err());
    }

    #[test]
    fn reconstruct_examples() {
        let singlet = CorrelationTensorDecomposition::new(Vector3::zeros(), Vector3::zeros(), -Matrix3::identity());
        let m = reconstruct(&singlet);
        assert!(linalg::max_abs_diff(&m, PureState::singlet().density().matrix()) < 1e-12);

        let zero = CorrelationTensorDecomposition::new(Vector3::zeros(), Vector3::zeros(), Matrix3::zeros());
        assert!(linalg::max_abs_diff(&reconstruct(&zero), &linalg::identity(4).scale(0.25)) < 1e-15);

        let plus = CorrelationTensorDecomposition::new(Vector3::zeros(), Vector3::zeros(), Matrix3::identity());
        let ev = linalg::eigvalsh(&reconstruct(&plus));
        // Unit trace forces the spectrum {-1/2, 1/2, 1/2, 1/2}.
        let want = [-0.5, 0.5, 0.5, 0.5];
        for k in 0..4 {
            assert!((ev[k] - want[k]).abs() < 1e-10, "{ev:?}");
        }
    }

    #[test]
    fn correlation_value_examples() {
        let singlet = decompose(&PureState::singlet().density()).unwrap();
        let n = Vector3::new(1.0, 2.0, -0.5).normalize();
        assert!((correlation_value(&singlet, &n).unwrap() + 1.0).abs() < 1e-12);

        let phi = decompose(&PureState::phi_plus().density()).unwrap();
        let y = Vector3::new(0.0, 1.0, 0.0);
        let x = Vector3::new(1.0, 0.0, 0.0);
        assert!((correlation_value(&phi, &y).unwrap() + 1.0).abs() < 1e-12);
        assert!((correlation_value(&phi, &x).unwrap() - 1.0).abs() < 1e-12);

        let mixed = decompose(&DensityMatrix::maximally_mixed(2)).unwrap();
        assert!(correlation_value(&mixed, &n).unwrap().abs() < 1e-12);

        assert!(matches!(
            correlation_value(&mixed, &Vector3::new(1.0, 1.0, 0.0)),
            Err(Error::NotUnitVector { .. })
        ));
    }

    #[test]
    fn split_examples() {
        let s = antisymmetric_split(&-Matrix3::identity());
        assert_eq!(s.sign, Sign::Minus);
        assert_eq!(s.x, Antisymmetric3::default());
        assert!(s.residual < 1e-15);

        let s = antisymmetric_split(&Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0)));
        assert_eq!(s.sign, Sign::Plus);
        assert!((s.residual - 2.0).abs() < 1e-12);

        let x = Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let s = antisymmetric_split(&(x - Matrix3::identity()));
        assert_eq!(s.sign, Sign::Minus);
        assert_eq!(s.x.matrix(), x);
        assert!(s.residual < 1e-15);

        assert_eq!(antisymmetric_split(&Matrix3::zeros()).sign, Sign::Plus);
    }

    #[test]
    fn split_x_is_exactly_antisymmetric() {
        let mut rng = stream(3, 0);
        for _ in 0..100 {
            let t = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let x = antisymmetric_split(&t).x.matrix();
            assert_eq!(x + x.transpose(), Matrix3::zeros());
        }
    }

    #[test]
    fn vieta_identity_on_the_two_degenerate_signs() {
        let z = Vector3::zeros();
        let x = Antisymmetric3::default();
        let (lhs, rhs) = vieta_pair_sum(&z, &z, &x, Sign::Minus);
        assert!(lhs.abs() < 1e-12 && rhs == 0.0);
        // Spectrum {1/2, 1/2, 1/2, -1/2}: 3·(1/4) + 3·(-1/4) = 0.
        let (lhs, rhs) = vieta_pair_sum(&z, &z, &x, Sign::Plus);
        assert!(lhs.abs() < 1e-12 && rhs == 0.0);
    }

    #[test]
    fn vieta_identity_random_parameters() {
        let mut rng = stream(17, 0);
        for k in 0..300 {
            let alpha = Vector3::from_fn(|_, _| rng.random_range(-0.3..0.3));
            let beta = Vector3::from_fn(|_, _| rng.random_range(-0.3..0.3));
            let x = Antisymmetric3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            let sign = if k % 2 == 0 { Sign::Plus } else { Sign::Minus };
            let (lhs, rhs) = vieta_pair_sum(&alpha, &beta, &x, sign);
            assert!((lhs - rhs).abs() <= VIETA_TOLERANCE, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn certificate_examples() {
        let cert = certify_singlet_invariance(&PureState::singlet().density()).unwrap();
        assert!(cert.is_certified());

        let cert = certify_singlet_invariance(&PureState::phi_minus().density()).unwrap();
        assert!(matches!(cert.reason(), Some(NotInvariantReason::TensorNotSplittable { .. })));

        let cert = certify_singlet_invariance(&DensityMatrix::maximally_mixed(2)).unwrap();
        assert!(matches!(cert.reason(), Some(NotInvariantReason::TensorNotSplittable { .. })));

        assert!(certify_singlet_invariance(&PureState::max_entangled(3).density()).is_err());
    }

    #[test]
    fn certificate_rejects_slightly_perturbed_singlet() {
        let mut rng = stream(5, 0);
        let singlet = PureState::singlet().density();
        for _ in 0..50 {
            let h = CMatrix::from_fn(4, 4, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let mut h = linalg::hermitize(&h);
            let tr = linalg::trace(&h) / c(4.0, 0.0);
            for k in 0..4 {
                h[(k, k)] -= tr;
            }
            let h = h.scale(1e-6 / linalg::frobenius(&h));
            // Mix with I/4 so the perturbed operator stays positive.
            let raw = (singlet.matrix() + h).scale(0.999) + linalg::identity(4).scale(0.001 / 4.0);
            let rho = DensityMatrix::new(raw, 2, true).unwrap();
            assert!(!certify_singlet_invariance(&rho).unwrap().is_certified());
        }
    }

    #[test]
    fn snapping_a_singlet_like_state_certifies() {
        let singlet = PureState::singlet().density();
        let raw = singlet.matrix().scale(0.9) + linalg::identity(4).scale(0.1 / 4.0);
        let rho = DensityMatrix::new(raw, 2, true).unwrap();
        assert!(!certify_singlet_invariance(&rho).unwrap().is_certified());
        let snapped = DensityMatrix::new(snap_to_invariant_form(&rho).unwrap(), 2, true).unwrap();
        assert!(certify_singlet_invariance(&snapped).unwrap().is_certified());
    }

    #[test]
    fn random_states_respect_norm_bounds() {
        for seed in 0..50 {
            let kind = if seed % 2 == 0 { StateKind::Pure } else { StateKind::Mixed };
            let rho = random_state(2, kind, &mut stream(seed, 0)).unwrap();
            assert!(decompose(&rho).unwrap().satisfies_state_bounds());
        }
    }
}
