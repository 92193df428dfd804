//! Invariance of perfect correlations under a change of the common measurement basis.
//!
//! A correlation is invariant when every basis gives a perfect one-to-one
//! outcome map, always of the same cycle type. This module measures how far a
//! state is from that ([`invariance_defect`]), and builds explicit two-basis
//! counterexamples ([`falsify`]) following three constructions:
//!
//! - a map with a non-loop edge `s → p` is broken by a second basis that shares
//!   only `e_s` with the first: the collapse target of outcome `s` must move;
//! - an all-loop map forces the state onto `span{|e_i e_i⟩}` with a coefficient
//!   matrix that pairwise-superposition probes pin to a constant
//!   ([`structural_check`]); any non-constancy yields a probe basis that breaks the map;
//! - the constant case is the maximally entangled vector, whose restriction to
//!   `span{e_1, e_2}` anti-correlates in the basis `(e_1 ± i e_2)/√2`.
//!
//! For two qubits the singlet is the single exception and is certified through
//! [`crate::pauli::certify_singlet_invariance`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{classify, CycleTypeSignature, PerfectCorrelationVerdict, DEFAULT_PERFECTION_TOLERANCE};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::parallel::Workers;
use crate::pauli::{self, Certificate};
use crate::qudit::{self, haar_unitary, joint_distribution, DensityMatrix, OrthonormalBasis};
use crate::rng::{derive_seed, stream};

/// Stage tolerances of the structural check.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-9;
pub const SPECTRAL_TOLERANCE: f64 = 1e-10;
pub const CONSTANCY_TOLERANCE: f64 = 1e-9;
pub const PURE_FORM_TOLERANCE: f64 = 1e-9;
/// Number of Haar-random candidate bases when searching for a perfect basis.
pub const HAAR_CANDIDATES: usize = 20;
pub const DEFAULT_PROBES: usize = 1000;

const TAG_CANDIDATES: u64 = 1;
const TAG_COMPLEMENT: u64 = 2;
const TAG_SEARCH: u64 = 3;

/// Leakage of the best one-to-one outcome map in `basis`; zero iff the state is
/// perfectly correlated there.
pub fn basis_defect(rho: &DensityMatrix, basis: &OrthonormalBasis) -> Result<f64> {
    Ok(basis_verdict(rho, basis)?.leakage)
}

pub fn basis_verdict(rho: &DensityMatrix, basis: &OrthonormalBasis) -> Result<PerfectCorrelationVerdict> {
    let dist = joint_distribution(rho, basis)?;
    classify(&dist, perfection_tolerance(basis.local_dim()))
}

fn perfection_tolerance(d: usize) -> f64 {
    DEFAULT_PERFECTION_TOLERANCE.min(0.5 / d as f64)
}

/// Fixed probe bases tried before any random ones: computational, Fourier, and
/// for qubits the σ_y eigenbasis.
pub fn standard_bases(d: usize) -> Vec<OrthonormalBasis> {
    let mut out = vec![OrthonormalBasis::computational(d)];
    if d > 1 {
        out.push(OrthonormalBasis::fourier(d));
    }
    if d == 2 {
        out.push(OrthonormalBasis::sigma_y_eigenbasis());
    }
    out
}

/// Random probe basis number `index` under `seed`.
pub fn random_basis(d: usize, seed: u64, index: u64) -> OrthonormalBasis {
    let u = haar_unitary(d, &mut stream(seed, index)).expect("d >= 1");
    OrthonormalBasis::from_unitary(u).expect("Haar sample is unitary")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeOptions {
    pub n_random_bases: usize,
    pub refine: bool,
    pub seed: u64,
    pub workers: Workers,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            n_random_bases: DEFAULT_PROBES,
            refine: false,
            seed: 0,
            workers: Workers::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceDefect {
    /// Largest leakage over all probed bases (and the refined basis, if any).
    pub value: f64,
    pub worst_basis: OrthonormalBasis,
    pub max_leakage: f64,
    /// Two probed bases were both perfect but with different cycle types.
    pub signature_mismatch: bool,
    /// Distinct cycle types among the perfect probed bases.
    pub perfect_signatures: Vec<CycleTypeSignature>,
    pub perfect_bases: usize,
    pub probes: usize,
    /// Leakage reached by local refinement, when it ran.
    pub refined_leakage: Option<f64>,
}

/// Probes the standard bases plus `n_random_bases` Haar-random ones. The
/// scalar `value` only tracks imperfection; a change of cycle type between
/// perfect bases is reported through `signature_mismatch`.
pub fn invariance_defect(rho: &DensityMatrix, probe: &ProbeOptions) -> Result<InvarianceDefect> {
    if probe.n_random_bases == 0 {
        return Err(Error::OutOfRange {
            what: "n_random_bases",
            value: 0,
            min: 1,
            max: usize::MAX,
        });
    }
    let d = rho.local_dim();
    rho.require_bipartite(d)?;
    let fixed = standard_bases(d);
    let n_fixed = fixed.len();
    let total = n_fixed + probe.n_random_bases;
    let basis_at = |k: usize| {
        if k < n_fixed {
            fixed[k].clone()
        } else {
            random_basis(d, probe.seed, (k - n_fixed) as u64)
        }
    };
    let verdicts = probe.workers.map(total, |k| basis_verdict(rho, &basis_at(k)));

    let mut worst = (0usize, f64::NEG_INFINITY);
    let mut signatures: Vec<CycleTypeSignature> = Vec::new();
    let mut perfect_bases = 0;
    for (k, v) in verdicts.into_iter().enumerate() {
        let v = v?;
        if v.leakage > worst.1 {
            worst = (k, v.leakage);
        }
        if v.perfect {
            perfect_bases += 1;
            if !signatures.contains(&v.signature) {
                signatures.push(v.signature);
            }
        }
    }
    signatures.sort_by(|a, b| b.counts().cmp(a.counts()));

    let mut worst_basis = basis_at(worst.0);
    let mut max_leakage = worst.1;
    let mut refined_leakage = None;
    if probe.refine {
        let (basis, leak) = refine_worst_basis(rho, &worst_basis)?;
        refined_leakage = Some(leak);
        if leak > max_leakage {
            max_leakage = leak;
            worst_basis = basis;
        }
    }
    Ok(InvarianceDefect {
        value: max_leakage,
        worst_basis,
        max_leakage,
        signature_mismatch: signatures.len() > 1,
        perfect_signatures: signatures,
        perfect_bases,
        probes: total,
        refined_leakage,
    })
}

/// Hermitian generator from `d²` real parameters: `d` diagonal entries, then
/// `(re, im)` pairs for the strict upper triangle.
fn hermitian_from_params(d: usize, params: &[f64]) -> CMatrix {
    let mut h = CMatrix::zeros(d, d);
    let mut k = d;
    for i in 0..d {
        h[(i, i)] = c(params[i], 0.0);
        for j in (i + 1)..d {
            let z = c(params[k], params[k + 1]);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    h
}

/// Coordinate ascent on the leakage over bases `exp(iH)·B₀`: each parameter of
/// `H` is nudged by `±step`, the step halving from 0.1 to 1e-6 whenever a full
/// sweep fails to improve, for at most 200 sweeps.
pub fn refine_worst_basis(rho: &DensityMatrix, start: &OrthonormalBasis) -> Result<(OrthonormalBasis, f64)> {
    let d = start.local_dim();
    let n = d * d;
    let eval = |params: &[f64]| -> Result<(OrthonormalBasis, f64)> {
        let u = linalg::expi_hermitian(&hermitian_from_params(d, params));
        let b = OrthonormalBasis::from_unitary(u * start.as_matrix())?;
        let leak = basis_defect(rho, &b)?;
        Ok((b, leak))
    };
    let mut params = vec![0.0; n];
    let mut best = (start.clone(), basis_defect(rho, start)?);
    let mut step = 0.1;
    for _ in 0..200 {
        let mut improved = false;
        for k in 0..n {
            for delta in [step, -step] {
                params[k] += delta;
                let (b, leak) = eval(&params)?;
                if leak > best.1 {
                    best = (b, leak);
                    improved = true;
                    break;
                }
                params[k] -= delta;
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-6 {
                break;
            }
        }
    }
    Ok(best)
}

/// The coefficient form `ρ = Σ α_ij |e_i e_i⟩⟨e_j e_j|` with its spectral data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalCorrelatedForm {
    pub basis: OrthonormalBasis,
    #[serde(serialize_with = "ser_cmatrix")]
    pub coefficients: CMatrix,
    /// Row `k` holds `γ_{k,i} = ⟨e_i e_i|g_k⟩` for eigenvector `g_k`.
    #[serde(serialize_with = "ser_cmatrix")]
    pub spectral_coefficients: CMatrix,
    pub eigenvalues: Vec<f64>,
    /// `max |α_ij − Σ_k λ_k γ_{k,i} γ*_{k,j}|`.
    pub spectral_residual: f64,
}

impl DiagonalCorrelatedForm {
    /// `max |α_ij − α_kl|` over all entry pairs.
    pub fn spread(&self) -> f64 {
        let vals: Vec<Complex64> = self.coefficients.iter().copied().collect();
        let mut s: f64 = 0.0;
        for (k, a) in vals.iter().enumerate() {
            for b in &vals[k + 1..] {
                s = s.max((a - b).norm());
            }
        }
        s
    }
}

fn ser_cmatrix<S: serde::Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Parts {
        re: Vec<Vec<f64>>,
        im: Vec<Vec<f64>>,
    }
    Parts {
        re: m.row_iter().map(|r| r.iter().map(|z| z.re).collect()).collect(),
        im: m.row_iter().map(|r| r.iter().map(|z| z.im).collect()).collect(),
    }
    .serialize(s)
}

/// Reads off `α_ij = ⟨e_i e_i|ρ|e_j e_j⟩` and the spectral coefficients of the
/// eigenvectors of `ρ` with eigenvalue above `1e-12`.
pub fn diagonal_correlated_form(rho: &DensityMatrix, basis: &OrthonormalBasis) -> Result<DiagonalCorrelatedForm> {
    let d = basis.local_dim();
    rho.require_bipartite(d)?;
    let diag_vecs: Vec<CVector> = (0..d)
        .map(|i| linalg::kron_vec(&basis.vector(i), &basis.vector(i)))
        .collect();
    let m = rho.matrix();
    let coefficients = CMatrix::from_fn(d, d, |i, j| diag_vecs[i].dotc(&(m * &diag_vecs[j])));
    let (vals, vecs) = linalg::eigh(m);
    let kept: Vec<usize> = (0..vals.len()).rev().filter(|&k| vals[k] > 1e-12).collect();
    let eigenvalues: Vec<f64> = kept.iter().map(|&k| vals[k]).collect();
    let spectral_coefficients =
        CMatrix::from_fn(kept.len(), d, |r, i| diag_vecs[i].dotc(&vecs.column(kept[r]).into_owned()));
    let mut rebuilt = CMatrix::zeros(d, d);
    for (r, &lam) in eigenvalues.iter().enumerate() {
        for i in 0..d {
            for j in 0..d {
                rebuilt[(i, j)] += spectral_coefficients[(r, i)] * spectral_coefficients[(r, j)].conj() * lam;
            }
        }
    }
    let spectral_residual = linalg::max_abs_diff(&coefficients, &rebuilt);
    Ok(DiagonalCorrelatedForm {
        basis: basis.clone(),
        coefficients,
        spectral_coefficients,
        eigenvalues,
        spectral_residual,
    })
}

/// One pairwise-superposition probe `m = (e_i + φ e_j)/√2`, `φ ∈ {1, i}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeViolation {
    pub i: usize,
    pub j: usize,
    pub imaginary: bool,
    /// Entrywise deviation of `⟨m^A|ρ|m^A⟩` from a multiple of the projector
    /// onto `Σ_k m_k* e_k`, in units of the coefficients `α`.
    pub violation: f64,
}

impl ProbeViolation {
    /// Probe vector in basis coordinates.
    pub fn coordinates(&self, d: usize) -> CVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = CVector::zeros(d);
        v[self.i] = c(h, 0.0);
        v[self.j] = if self.imaginary { c(0.0, h) } else { c(h, 0.0) };
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuralReport {
    /// Number of stages passed, 0..=4.
    pub stages_passed: u8,
    pub failed_stage: Option<u8>,
    /// Stage 1: largest `P(i, j)` with `i ≠ j`.
    pub max_off_diagonal: f64,
    /// Stage 2: probability mass outside `span{|e_i e_i⟩}`.
    pub mass_outside_span: Option<f64>,
    pub form: Option<DiagonalCorrelatedForm>,
    pub alpha_spread: Option<f64>,
    /// Stage 3 probes in order `(i<j, real)`, `(i<j, imaginary)`.
    pub probes: Vec<ProbeViolation>,
    pub max_probe_violation: Option<f64>,
    /// Stage 4: the common coefficient `c` and distance to `c·Σ|e_i e_i⟩⟨e_j e_j|`.
    pub constant: Option<f64>,
    pub pure_form_distance: Option<f64>,
    /// Numerical rank of the input (eigenvalues above 1e-9).
    pub rank: usize,
    /// Stages 1–3 held for an input of rank > 1, which the chain rules out.
    pub contradicts_mixedness: bool,
}

impl StructuralReport {
    pub fn passed(&self) -> bool {
        self.stages_passed == 4
    }

    pub fn worst_probe(&self) -> Option<&ProbeViolation> {
        self.probes.iter().max_by(|a, b| a.violation.total_cmp(&b.violation))
    }
}

/// Non-proportionality of `C` to `T` on the 2×2 support `{i, j}` of the probe,
/// plus any weight of `C` off that support. `T` has entries of modulus ½ on the support.
fn proportionality_defect(cond: &CMatrix, target: &CMatrix, i: usize, j: usize) -> f64 {
    let d = cond.nrows();
    let support = [i, j];
    let mut ratios = Vec::with_capacity(4);
    let mut outside: f64 = 0.0;
    for k in 0..d {
        for l in 0..d {
            if support.contains(&k) && support.contains(&l) {
                ratios.push(cond[(k, l)] / target[(k, l)]);
            } else {
                outside = outside.max(2.0 * cond[(k, l)].norm());
            }
        }
    }
    let mut spread: f64 = 0.0;
    for (a, x) in ratios.iter().enumerate() {
        for y in &ratios[a + 1..] {
            spread = spread.max((x - y).norm());
        }
    }
    spread.max(outside)
}

/// Runs the chain that an all-loop perfect correlation in `basis` forces:
///
/// 1. `P(i, j) = 0` for `i ≠ j`;
/// 2. `ρ = Σ α_ij |e_i e_i⟩⟨e_j e_j|` with `α = Σ_k λ_k γ_k γ_k†`;
/// 3. for every probe `m`, `⟨m^A|ρ|m^A⟩ = c_m Σ_ij m_i* m_j |e_i⟩⟨e_j|`, i.e. `α` constant;
/// 4. then `ρ = c Σ_ij |e_i e_i⟩⟨e_j e_j|`, a pure state.
///
/// Stops at the first failed stage.
pub fn structural_check(rho: &DensityMatrix, basis: &OrthonormalBasis) -> Result<StructuralReport> {
    let d = basis.local_dim();
    let dist = joint_distribution(rho, basis)?;
    let mut report = StructuralReport {
        stages_passed: 0,
        failed_stage: None,
        max_off_diagonal: 0.0,
        mass_outside_span: None,
        form: None,
        alpha_spread: None,
        probes: Vec::new(),
        max_probe_violation: None,
        constant: None,
        pure_form_distance: None,
        rank: rho.rank(1e-9),
        contradicts_mixedness: false,
    };
    for i in 0..d {
        for j in 0..d {
            if i != j {
                report.max_off_diagonal = report.max_off_diagonal.max(dist.get(i, j));
            }
        }
    }
    if report.max_off_diagonal > OFF_DIAGONAL_TOLERANCE {
        report.failed_stage = Some(1);
        return Ok(report);
    }
    report.stages_passed = 1;

    let form = diagonal_correlated_form(rho, basis)?;
    let inside: f64 = (0..d).map(|i| form.coefficients[(i, i)].re).sum();
    let outside = (1.0 - inside).abs();
    report.mass_outside_span = Some(outside);
    report.alpha_spread = Some(form.spread());
    let stage2_ok = outside <= OFF_DIAGONAL_TOLERANCE * (d * d) as f64 && form.spectral_residual <= SPECTRAL_TOLERANCE;
    report.form = Some(form);
    if !stage2_ok {
        report.failed_stage = Some(2);
        return Ok(report);
    }
    report.stages_passed = 2;

    let b = basis.as_matrix();
    let mut probes = Vec::new();
    for imaginary in [false, true] {
        for i in 0..d {
            for j in (i + 1)..d {
                let mut p = ProbeViolation {
                    i,
                    j,
                    imaginary,
                    violation: 0.0,
                };
                let coords = p.coordinates(d);
                let m = b * &coords;
                let cond = b.adjoint() * qudit::conditional_on_vector(rho.matrix(), d, &m) * b;
                let conj = coords.map(|z| z.conj());
                p.violation = proportionality_defect(&cond, &linalg::projector(&conj), i, j);
                probes.push(p);
            }
        }
    }
    let max_violation = probes.iter().map(|p| p.violation).fold(0.0, f64::max);
    report.probes = probes;
    report.max_probe_violation = Some(max_violation);
    if max_violation > CONSTANCY_TOLERANCE {
        report.failed_stage = Some(3);
        return Ok(report);
    }
    report.stages_passed = 3;
    report.contradicts_mixedness = report.rank > 1;

    let form = report.form.as_ref().expect("stage 2 stored the form");
    let constant = form.coefficients.iter().map(|z| z.re).sum::<f64>() / (d * d) as f64;
    let phi: CVector = (0..d).fold(CVector::zeros(d * d), |acc, i| {
        acc + linalg::kron_vec(&basis.vector(i), &basis.vector(i))
    });
    let pure = linalg::projector(&phi).scale(constant);
    let distance = linalg::max_abs_diff(rho.matrix(), &pure);
    report.constant = Some(constant);
    report.pure_form_distance = Some(distance);
    if distance > PURE_FORM_TOLERANCE || report.contradicts_mixedness {
        report.failed_stage = Some(4);
        return Ok(report);
    }
    report.stages_passed = 4;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// Two bases, both perfect, with different cycle types.
    SignatureMismatch,
    /// A non-loop edge in the first basis; the second basis shares only the
    /// edge's source vector and cannot keep its collapse target.
    CollapseConflict,
    /// All-loop map whose coefficient matrix is not constant; the second basis
    /// contains a probe vector that does not collapse onto itself.
    ProbeCollapse,
    /// All-loop map on the maximally entangled form; rotating two basis vectors
    /// into `(e_1 ± i e_2)/√2` turns two loops into a 2-cycle.
    TwoDimensionalRestriction,
    /// The first basis is not perfectly correlated at all.
    ImperfectBasis,
}

/// Conditional-collapse data of a non-loop edge `s → p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseConflict {
    pub outcome: usize,
    pub target_in_basis_1: usize,
    pub target_in_basis_2: Option<usize>,
    /// `|⟨e_p|f_q⟩|²` between the two collapse targets (absent if basis 2 is imperfect).
    pub target_overlap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalsificationWitness {
    pub kind: WitnessKind,
    pub basis_1: OrthonormalBasis,
    pub basis_2: OrthonormalBasis,
    pub verdict_1: PerfectCorrelationVerdict,
    pub verdict_2: PerfectCorrelationVerdict,
    pub shared_vector_index: Option<usize>,
    pub collapse: Option<CollapseConflict>,
    pub structural: Option<StructuralReport>,
    /// Bases examined before the witness was found.
    pub bases_examined: usize,
}

impl FalsificationWitness {
    /// The two verdicts cannot both come from one invariant perfect correlation.
    pub fn is_incompatible(&self) -> bool {
        let (a, b) = (&self.verdict_1, &self.verdict_2);
        match (a.perfect, b.perfect) {
            (true, true) => {
                a.signature != b.signature
                    || self
                        .collapse
                        .as_ref()
                        .and_then(|c| c.target_overlap)
                        .is_some_and(|o| o < 1.0 - 1e-10)
            }
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FalsifyOutcome {
    CertifiedInvariant(Certificate),
    Falsified(Box<FalsificationWitness>),
    /// No witness among the probed bases.
    Inconclusive { bases_examined: usize },
}

impl FalsifyOutcome {
    pub fn witness(&self) -> Option<&FalsificationWitness> {
        match self {
            FalsifyOutcome::Falsified(w) => Some(w),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FalsifyOptions {
    /// Random bases tried after the structured constructions come up empty.
    pub search_bases: usize,
    pub seed: u64,
}

impl Default for FalsifyOptions {
    fn default() -> Self {
        FalsifyOptions {
            search_bases: DEFAULT_PROBES,
            seed: 0,
        }
    }
}

struct Probed {
    basis: OrthonormalBasis,
    verdict: PerfectCorrelationVerdict,
}

fn probe(rho: &DensityMatrix, basis: OrthonormalBasis) -> Result<Probed> {
    let verdict = basis_verdict(rho, &basis)?;
    Ok(Probed { basis, verdict })
}

fn witness(kind: WitnessKind, a: &Probed, b: &Probed, examined: usize) -> FalsificationWitness {
    FalsificationWitness {
        kind,
        basis_1: a.basis.clone(),
        basis_2: b.basis.clone(),
        verdict_1: a.verdict.clone(),
        verdict_2: b.verdict.clone(),
        shared_vector_index: None,
        collapse: None,
        structural: None,
        bases_examined: examined,
    }
}

/// Candidate bases in which a perfect correlation is looked for first.
fn candidate_bases(rho: &DensityMatrix, seed: u64) -> Vec<OrthonormalBasis> {
    let d = rho.local_dim();
    let mut out = standard_bases(d);
    if d >= 3 {
        let (_, vecs) = linalg::eigh(rho.matrix());
        let dominant = vecs.column(d * d - 1).into_owned();
        let (_, schmidt_a, _) = qudit::schmidt_decomposition(&dominant, d);
        if let Ok(b) = OrthonormalBasis::from_unitary(schmidt_a) {
            out.push(b);
        }
        let s = derive_seed(seed, TAG_CANDIDATES, 0);
        out.extend((0..HAAR_CANDIDATES as u64).map(|k| random_basis(d, s, k)));
    }
    out
}

fn first_mismatch(probed: &[Probed]) -> Option<(usize, usize)> {
    let perfect: Vec<usize> = (0..probed.len()).filter(|&k| probed[k].verdict.perfect).collect();
    for (a, &i) in perfect.iter().enumerate() {
        for &j in &perfect[a + 1..] {
            if probed[i].verdict.signature != probed[j].verdict.signature {
                return Some((i, j));
            }
        }
    }
    None
}

/// Keeps vector `s` of `basis` and rotates its orthogonal complement by a
/// generic unitary, so the new basis shares exactly that one vector.
pub fn single_shared_vector_basis(basis: &OrthonormalBasis, s: usize, seed: u64) -> Result<OrthonormalBasis> {
    let d = basis.local_dim();
    if d < 3 {
        return Err(Error::OutOfRange {
            what: "local dimension for a single-shared-vector basis",
            value: d,
            min: 3,
            max: usize::MAX,
        });
    }
    if s >= d {
        return Err(Error::IndexOutOfRange { index: s, dim: d });
    }
    let others: Vec<usize> = (0..d).filter(|&k| k != s).collect();
    let q = CMatrix::from_columns(&others.iter().map(|&k| basis.vector(k)).collect::<Vec<_>>());
    // Reject the measure-zero draws that keep some complement vector fixed up to phase.
    for attempt in 0..16 {
        let w = haar_unitary(d - 1, &mut stream(seed, attempt))?;
        if w.iter().any(|z| z.norm() > 1.0 - 1e-6) {
            continue;
        }
        let rotated = &q * w;
        let mut cols = Vec::with_capacity(d);
        let mut next = 0;
        for k in 0..d {
            if k == s {
                cols.push(basis.vector(s));
            } else {
                cols.push(rotated.column(next).into_owned());
                next += 1;
            }
        }
        return OrthonormalBasis::new(cols);
    }
    Err(Error::Format("could not draw a generic complement rotation".into()))
}

/// Basis `{(e_a + i e_b)/√2, (e_a − i e_b)/√2}` on positions `a`, `b`; all other vectors kept.
fn two_dimensional_rotation(basis: &OrthonormalBasis, a: usize, b: usize) -> Result<OrthonormalBasis> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (ea, eb) = (basis.vector(a), basis.vector(b));
    let mut cols: Vec<CVector> = (0..basis.local_dim()).map(|k| basis.vector(k)).collect();
    cols[a] = (&ea + &eb * c(0.0, 1.0)).scale(h);
    cols[b] = (&ea - &eb * c(0.0, 1.0)).scale(h);
    OrthonormalBasis::new(cols)
}

fn collapse_witness(rho: &DensityMatrix, first: &Probed, seed: u64, examined: usize) -> Result<Option<FalsificationWitness>> {
    let perm = &first.verdict.permutation;
    let Some(s) = (0..perm.dim()).find(|&i| perm.image(i) != i) else {
        return Ok(None);
    };
    let p = perm.image(s);
    let second = probe(rho, single_shared_vector_basis(&first.basis, s, derive_seed(seed, TAG_COMPLEMENT, 0))?)?;
    let (target_2, overlap) = if second.verdict.perfect {
        let q = second.verdict.permutation.image(s);
        let o = first.basis.vector(p).dotc(&second.basis.vector(q)).norm_sqr();
        (Some(q), Some(o))
    } else {
        (None, None)
    };
    let kind = if second.verdict.perfect && second.verdict.signature != first.verdict.signature {
        WitnessKind::SignatureMismatch
    } else {
        WitnessKind::CollapseConflict
    };
    let mut w = witness(kind, first, &second, examined + 1);
    w.shared_vector_index = Some(s);
    w.collapse = Some(CollapseConflict {
        outcome: s,
        target_in_basis_1: p,
        target_in_basis_2: target_2,
        target_overlap: overlap,
    });
    Ok(w.is_incompatible().then_some(w))
}

fn all_loops_witness(rho: &DensityMatrix, first: &Probed, examined: usize) -> Result<Option<FalsificationWitness>> {
    let d = first.basis.local_dim();
    let report = structural_check(rho, &first.basis)?;
    let (kind, second) = match report.failed_stage {
        None => (
            WitnessKind::TwoDimensionalRestriction,
            probe(rho, two_dimensional_rotation(&first.basis, 0, 1)?)?,
        ),
        Some(3) => {
            let worst = report.worst_probe().expect("stage 3 ran");
            let m = first.basis.as_matrix() * worst.coordinates(d);
            (WitnessKind::ProbeCollapse, probe(rho, OrthonormalBasis::completion(&m)?)?)
        }
        Some(_) => return Ok(None),
    };
    let mut w = witness(kind, first, &second, examined + 1);
    w.structural = Some(report);
    Ok(w.is_incompatible().then_some(w))
}

/// Looks for a pair of bases proving that `rho` has no invariant perfect
/// correlation. Only the two-qubit singlet is certified instead.
pub fn falsify(rho: &DensityMatrix, opts: &FalsifyOptions) -> Result<FalsifyOutcome> {
    let d = rho.local_dim();
    rho.require_bipartite(d)?;
    if d == 2 {
        let cert = pauli::certify_singlet_invariance(rho)?;
        if cert.is_certified() {
            return Ok(FalsifyOutcome::CertifiedInvariant(cert));
        }
    }

    let probed = candidate_bases(rho, opts.seed)
        .into_iter()
        .map(|b| probe(rho, b))
        .collect::<Result<Vec<_>>>()?;
    let examined = probed.len();

    if let Some((i, j)) = first_mismatch(&probed) {
        return Ok(FalsifyOutcome::Falsified(Box::new(witness(
            WitnessKind::SignatureMismatch,
            &probed[i],
            &probed[j],
            examined,
        ))));
    }

    if d >= 3 {
        if let Some(first) = probed.iter().find(|p| p.verdict.perfect) {
            let w = if first.verdict.signature.is_all_loops() {
                all_loops_witness(rho, first, examined)?
            } else {
                collapse_witness(rho, first, opts.seed, examined)?
            };
            if let Some(w) = w {
                return Ok(FalsifyOutcome::Falsified(Box::new(w)));
            }
        }
    }

    if let Some(bad) = probed.iter().find(|p| !p.verdict.perfect) {
        let partner = probed
            .iter()
            .find(|p| p.verdict.perfect)
            .or_else(|| probed.iter().min_by(|a, b| a.verdict.leakage.total_cmp(&b.verdict.leakage)))
            .expect("at least one candidate");
        return Ok(FalsifyOutcome::Falsified(Box::new(witness(
            WitnessKind::ImperfectBasis,
            bad,
            partner,
            examined,
        ))));
    }

    // Every candidate was perfect with one common type: widen the search.
    let seed = derive_seed(opts.seed, TAG_SEARCH, 0);
    for k in 0..opts.search_bases {
        let p = probe(rho, random_basis(d, seed, k as u64))?;
        let reference = &probed[0];
        if !p.verdict.perfect || p.verdict.signature != reference.verdict.signature {
            let kind = if p.verdict.perfect {
                WitnessKind::SignatureMismatch
            } else {
                WitnessKind::ImperfectBasis
            };
            return Ok(FalsifyOutcome::Falsified(Box::new(witness(kind, &p, reference, examined + k + 1))));
        }
    }
    Ok(FalsifyOutcome::Inconclusive {
        bases_examined: examined + opts.search_bases,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportVerdict {
    Certified,
    Falsified,
    Inconclusive,
}

/// Combined falsification and defect report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub verdict: ReportVerdict,
    pub defect: f64,
    pub signature_mismatch: bool,
    pub witness: Option<FalsificationWitness>,
    pub certificate_reason: Option<String>,
    pub probes: usize,
    pub seed: u64,
}

pub fn assess(rho: &DensityMatrix, probe: &ProbeOptions) -> Result<InvarianceReport> {
    let outcome = falsify(
        rho,
        &FalsifyOptions {
            search_bases: probe.n_random_bases,
            seed: probe.seed,
        },
    )?;
    let defect = invariance_defect(rho, probe)?;
    let certificate_reason = if rho.local_dim() == 2 {
        pauli::certify_singlet_invariance(rho)?.reason().map(|r| r.to_string())
    } else {
        None
    };
    let (verdict, witness) = match outcome {
        FalsifyOutcome::CertifiedInvariant(_) => (ReportVerdict::Certified, None),
        FalsifyOutcome::Falsified(w) => (ReportVerdict::Falsified, Some(*w)),
        FalsifyOutcome::Inconclusive { .. } => (ReportVerdict::Inconclusive, None),
    };
    Ok(InvarianceReport {
        verdict,
        defect: defect.value,
        signature_mismatch: defect.signature_mismatch,
        witness,
        certificate_reason,
        probes: defect.probes,
        seed: probe.seed,
    })
}

/// `|⟨e_i|f_j⟩|²` has exactly one entry equal to 1 and no other row or column
/// of the overlap matrix is a standard basis row.
pub fn shares_exactly_one_vector(a: &OrthonormalBasis, b: &OrthonormalBasis) -> bool {
    let o: DMatrix<f64> = a.overlaps(b);
    let ones = o.iter().filter(|&&v| (v - 1.0).abs() <= 1e-10).count();
    let d = o.nrows();
    let unit_rows = (0..d).filter(|&i| o.row(i).iter().any(|&v| (v - 1.0).abs() <= 1e-10)).count();
    let unit_cols = (0..d).filter(|&j| o.column(j).iter().any(|&v| (v - 1.0).abs() <= 1e-10)).count();
    ones == 1 && unit_rows == 1 && unit_cols == 1
}
