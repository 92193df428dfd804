//! States, measurement bases and joint measurement statistics on `d ⊗ d`.
//!
//! Composite index convention: subsystem A is the left tensor factor, so the
//! basis ket `|a⟩|b⟩` sits at row `a * d + b`. Outcome labels are 0-based.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, ONE, ZERO};

pub const HERMITIAN_TOLERANCE: f64 = 1e-10;
pub const TRACE_TOLERANCE: f64 = 1e-10;
pub const NORM_TOLERANCE: f64 = 1e-10;
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-10;
pub const UNITARY_TOLERANCE: f64 = 1e-10;
/// Negative probabilities down to this magnitude are treated as round-off.
pub const NEGATIVE_PROB_TOLERANCE: f64 = 1e-12;
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// A validated density operator, either on `d ⊗ d` (bipartite) or on a single qudit.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    local_dim: usize,
    bipartite: bool,
    matrix: CMatrix,
    psd_tolerance: f64,
}

impl DensityMatrix {
    pub const DEFAULT_PSD_TOLERANCE: f64 = 1e-9;

    pub fn new(raw: CMatrix, local_dim: usize, bipartite: bool) -> Result<Self> {
        Self::with_tolerance(raw, local_dim, bipartite, Self::DEFAULT_PSD_TOLERANCE)
    }

    pub fn with_tolerance(
        raw: CMatrix,
        local_dim: usize,
        bipartite: bool,
        psd_tolerance: f64,
    ) -> Result<Self> {
        if local_dim == 0 {
            return Err(Error::dims("local_dim >= 1", 0));
        }
        let n = if bipartite { local_dim * local_dim } else { local_dim };
        if raw.nrows() != n || raw.ncols() != n {
            return Err(Error::dims(
                format!("{n}x{n}"),
                format!("{}x{}", raw.nrows(), raw.ncols()),
            ));
        }
        for (col, column) in raw.column_iter().enumerate() {
            if let Some(row) = column.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite { row, col });
            }
        }
        let deviation = linalg::hermiticity_defect(&raw);
        if deviation > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian { deviation });
        }
        let tr = linalg::trace(&raw);
        if (tr - ONE).norm() > TRACE_TOLERANCE {
            return Err(Error::TraceNotOne { trace: tr.re });
        }
        let matrix = linalg::hermitize(&raw);
        let min_eigenvalue = linalg::eigvalsh(&matrix)[0];
        if min_eigenvalue < -psd_tolerance {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
        }
        Ok(DensityMatrix {
            local_dim,
            bipartite,
            matrix,
            psd_tolerance,
        })
    }

    /// `I / d²` on `d ⊗ d`.
    pub fn maximally_mixed(local_dim: usize) -> Self {
        let n = local_dim * local_dim;
        DensityMatrix {
            local_dim,
            bipartite: true,
            matrix: linalg::identity(n).scale(1.0 / n as f64),
            psd_tolerance: Self::DEFAULT_PSD_TOLERANCE,
        }
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn is_bipartite(&self) -> bool {
        self.bipartite
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn psd_tolerance(&self) -> f64 {
        self.psd_tolerance
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Number of eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().iter().filter(|&&v| v > tol).count()
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        linalg::max_abs_diff(&self.matrix, &other.matrix)
    }

    pub(crate) fn require_bipartite(&self, local_dim: usize) -> Result<()> {
        if !self.bipartite {
            return Err(Error::dims("bipartite state", "single-system state"));
        }
        if self.local_dim != local_dim {
            return Err(Error::dims(
                format!("local_dim {local_dim}"),
                format!("local_dim {}", self.local_dim),
            ));
        }
        Ok(())
    }
}

/// Validates a raw operator as a density matrix with the default PSD tolerance.
pub fn validate_density(raw: CMatrix, local_dim: usize, bipartite: bool) -> Result<DensityMatrix> {
    DensityMatrix::new(raw, local_dim, bipartite)
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    local_dim: usize,
    bipartite: bool,
    amplitudes: CVector,
}

impl PureState {
    pub fn new(amplitudes: CVector, local_dim: usize, bipartite: bool) -> Result<Self> {
        let n = if bipartite { local_dim * local_dim } else { local_dim };
        if local_dim == 0 || amplitudes.len() != n {
            return Err(Error::dims(n, amplitudes.len()));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotUnitVector { norm });
        }
        Ok(PureState {
            local_dim,
            bipartite,
            amplitudes,
        })
    }

    /// `(|01⟩ − |10⟩)/√2`.
    pub fn singlet() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = CVector::from_vec(vec![ZERO, c(h, 0.0), c(-h, 0.0), ZERO]);
        PureState::new(amps, 2, true).expect("singlet is normalized")
    }

    /// `(|00⟩ + |11⟩)/√2`.
    pub fn phi_plus() -> Self {
        Self::schmidt_diagonal(&[c(1.0, 0.0), c(1.0, 0.0)]).expect("nonzero coefficients")
    }

    /// `(|00⟩ − |11⟩)/√2`.
    pub fn phi_minus() -> Self {
        Self::schmidt_diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]).expect("nonzero coefficients")
    }

    /// `Σᵢ |ii⟩ / √d`.
    pub fn max_entangled(d: usize) -> Self {
        Self::schmidt_diagonal(&vec![ONE; d]).expect("nonzero coefficients")
    }

    /// `Σᵢ αᵢ |ii⟩`, normalized. The coefficients need not be normalized but
    /// must not all vanish.
    pub fn schmidt_diagonal(coefficients: &[num_complex::Complex64]) -> Result<Self> {
        let d = coefficients.len();
        let mut amps = CVector::zeros(d * d);
        for (i, &a) in coefficients.iter().enumerate() {
            amps[i * d + i] = a;
        }
        let norm = amps.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotUnitVector { norm });
        }
        PureState::new(amps.unscale(norm), d, true)
    }

    /// `|a⟩|b⟩` in the computational basis.
    pub fn product(d: usize, a: usize, b: usize) -> Result<Self> {
        for index in [a, b] {
            if index >= d {
                return Err(Error::IndexOutOfRange { index, dim: d });
            }
        }
        let mut amps = CVector::zeros(d * d);
        amps[a * d + b] = ONE;
        PureState::new(amps, d, true)
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            local_dim: self.local_dim,
            bipartite: self.bipartite,
            matrix: linalg::projector(&self.amplitudes),
            psd_tolerance: DensityMatrix::DEFAULT_PSD_TOLERANCE,
        }
    }
}

/// Schmidt decomposition of a bipartite vector on `d ⊗ d`:
/// `|v⟩ = Σ_k s_k |a_k⟩|b_k⟩` with `s` descending. Returns `(s, A, B)` where the
/// columns of `A` and `B` are the Schmidt vectors.
pub fn schmidt_decomposition(amplitudes: &CVector, d: usize) -> (Vec<f64>, CMatrix, CMatrix) {
    let coeffs = CMatrix::from_fn(d, d, |a, b| amplitudes[a * d + b]);
    let svd = coeffs.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^dagger");
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let s = order.iter().map(|&k| svd.singular_values[k]).collect();
    let mut a = CMatrix::zeros(d, d);
    let mut b = CMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        a.set_column(dst, &u.column(src));
        // M = U S V^dagger, so the B-side vector is the conjugated row of V^dagger.
        b.set_column(dst, &v_t.row(src).transpose());
    }
    (s, a, b)
}

/// An ordered orthonormal basis of `C^d`, stored as the columns of a unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    vectors: CMatrix,
}

impl OrthonormalBasis {
    pub fn new(vectors: Vec<CVector>) -> Result<Self> {
        let d = vectors.len();
        if d == 0 {
            return Err(Error::dims("at least one vector", 0));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != d) {
            return Err(Error::dims(format!("vectors of length {d}"), v.len()));
        }
        Self::from_unitary(CMatrix::from_columns(&vectors))
    }

    /// Columns of `u` become the basis vectors.
    pub fn from_unitary(u: CMatrix) -> Result<Self> {
        if u.nrows() != u.ncols() || u.nrows() == 0 {
            return Err(Error::dims("square matrix", format!("{}x{}", u.nrows(), u.ncols())));
        }
        let deviation = linalg::unitarity_defect(&u);
        if deviation > ORTHONORMAL_TOLERANCE || !deviation.is_finite() {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(OrthonormalBasis { vectors: u })
    }

    pub fn computational(d: usize) -> Self {
        OrthonormalBasis {
            vectors: linalg::identity(d),
        }
    }

    /// `f_k = Σ_j ω^{jk} |j⟩ / √d` with `ω = e^{2πi/d}`.
    pub fn fourier(d: usize) -> Self {
        let norm = (d as f64).sqrt();
        let vectors = CMatrix::from_fn(d, d, |j, k| {
            let phase = 2.0 * std::f64::consts::PI * ((j * k) % d) as f64 / d as f64;
            num_complex::Complex64::from_polar(1.0 / norm, phase)
        });
        OrthonormalBasis { vectors }
    }

    /// Eigenbasis of σ_y: `(|0⟩ + i|1⟩)/√2`, `(|0⟩ − i|1⟩)/√2`.
    pub fn sigma_y_eigenbasis() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let vectors = CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(0.0, h), c(0.0, -h)]);
        OrthonormalBasis { vectors }
    }

    /// Orthonormal basis whose first vector is `first` (normalized); the rest is
    /// completed by Gram-Schmidt against the computational basis.
    pub fn completion(first: &CVector) -> Result<Self> {
        let d = first.len();
        let norm = first.norm();
        if d == 0 || norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotUnitVector { norm });
        }
        let mut cols: Vec<CVector> = vec![first.unscale(norm)];
        for k in 0..d {
            if cols.len() == d {
                break;
            }
            let mut v = CVector::zeros(d);
            v[k] = ONE;
            for u in &cols {
                let overlap = u.dotc(&v);
                v -= u * overlap;
            }
            let n = v.norm();
            if n > 1e-6 {
                cols.push(v.unscale(n));
            }
        }
        Self::new(cols)
    }

    pub fn local_dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vector(&self, i: usize) -> CVector {
        self.vectors.column(i).into_owned()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.vectors
    }

    /// The basis `{U e_i}`.
    pub fn rotated(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.local_dim() {
            return Err(Error::dims(self.local_dim(), u.nrows()));
        }
        Self::from_unitary(u * &self.vectors)
    }

    /// Reorders the vectors: new vector `k` is old vector `order[k]`.
    pub fn reordered(&self, order: &[usize]) -> Self {
        let cols: Vec<CVector> = order.iter().map(|&k| self.vector(k)).collect();
        OrthonormalBasis {
            vectors: CMatrix::from_columns(&cols),
        }
    }

    /// `|⟨e_i|f_j⟩|²` for this basis `e` and `other` basis `f`.
    pub fn overlaps(&self, other: &OrthonormalBasis) -> DMatrix<f64> {
        (self.vectors.adjoint() * &other.vectors).map(|z| z.norm_sqr())
    }
}

/// `P(i, j) = ⟨e_i e_j|ρ|e_i e_j⟩` for both subsystems measured in the same basis.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    local_dim: usize,
    probs: DMatrix<f64>,
}

impl JointDistribution {
    /// Validates, clamps round-off negatives to zero and renormalizes.
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        let d = probs.nrows();
        if d == 0 || probs.ncols() != d {
            return Err(Error::dims("square d x d table", format!("{}x{}", probs.nrows(), probs.ncols())));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < -NEGATIVE_PROB_TOLERANCE) {
            return Err(Error::InvalidDistribution(format!("entry {bad} is negative or non-finite")));
        }
        let mut probs = probs.map(|p| p.max(0.0));
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        probs.unscale_mut(total);
        Ok(JointDistribution { local_dim: d, probs })
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[(i, j)]
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn marginal_a(&self) -> Vec<f64> {
        self.probs.row_iter().map(|r| r.sum()).collect()
    }

    pub fn marginal_b(&self) -> Vec<f64> {
        self.probs.column_iter().map(|c| c.sum()).collect()
    }
}

fn check_basis(rho: &DensityMatrix, basis: &OrthonormalBasis) -> Result<usize> {
    let d = basis.local_dim();
    rho.require_bipartite(d)?;
    Ok(d)
}

/// Joint outcome statistics with both subsystems measured in `basis`.
pub fn joint_distribution(rho: &DensityMatrix, basis: &OrthonormalBasis) -> Result<JointDistribution> {
    let d = check_basis(rho, basis)?;
    let w = linalg::kron(basis.as_matrix(), basis.as_matrix());
    let rho_w = rho.matrix() * &w;
    // Column i*d + j of W is e_i ⊗ e_j.
    let probs = DMatrix::from_fn(d, d, |i, j| {
        let k = i * d + j;
        w.column(k).dotc(&rho_w.column(k)).re
    });
    JointDistribution::new(probs)
}

/// `⟨e_i^A|ρ|e_i^A⟩`: the subnormalized state of B after outcome `i` on A.
pub fn conditional_operator(
    rho: &DensityMatrix,
    outcome_index: usize,
    basis: &OrthonormalBasis,
) -> Result<CMatrix> {
    let d = check_basis(rho, basis)?;
    if outcome_index >= d {
        return Err(Error::IndexOutOfRange {
            index: outcome_index,
            dim: d,
        });
    }
    Ok(conditional_on_vector(rho.matrix(), d, &basis.vector(outcome_index)))
}

/// `⟨v^A|ρ|v^A⟩` for an arbitrary (not necessarily normalized) vector `v` on A.
pub(crate) fn conditional_on_vector(rho: &CMatrix, d: usize, v: &CVector) -> CMatrix {
    CMatrix::from_fn(d, d, |b, bp| {
        let mut acc = ZERO;
        for a in 0..d {
            let left = v[a].conj();
            if left == ZERO {
                continue;
            }
            for ap in 0..d {
                acc += left * rho[(a * d + b, ap * d + bp)] * v[ap];
            }
        }
        acc
    })
}

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * scale, im * scale)
    })
}

/// Haar-distributed `d × d` unitary: QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal folded back into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<CMatrix> {
    if d < 1 {
        return Err(Error::OutOfRange {
            what: "unitary dimension",
            value: d,
            min: 1,
            max: usize::MAX,
        });
    }
    let qr = ginibre(d, d, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..d {
        let diag = r[(k, k)];
        let phase = if diag.norm() > 0.0 { diag / diag.norm() } else { ONE };
        for row in 0..d {
            q[(row, k)] *= phase;
        }
    }
    Ok(q)
}

/// Which ensemble `random_state` draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    /// Haar-random pure state on `d ⊗ d`.
    Pure,
    /// Partial trace of a Haar-random pure state on `(d ⊗ d) ⊗ C^{d²}` (induced measure).
    Mixed,
}

pub fn random_state<R: Rng + ?Sized>(d: usize, kind: StateKind, rng: &mut R) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::OutOfRange {
            what: "local dimension",
            value: d,
            min: 2,
            max: usize::MAX,
        });
    }
    let n = d * d;
    let matrix = match kind {
        StateKind::Pure => {
            let g = ginibre(n, 1, rng);
            let v = g.column(0).into_owned();
            linalg::projector(&v.unscale(v.norm()))
        }
        StateKind::Mixed => {
            // Rows index the system, columns the purifying environment; a
            // Gaussian vector on the joint space is Haar up to normalization.
            let g = ginibre(n, n, rng);
            let gg = &g * g.adjoint();
            let tr = linalg::trace(&gg).re;
            gg.unscale(tr)
        }
    };
    DensityMatrix::new(matrix, d, true)
}
