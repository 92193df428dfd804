//! Collective unitary noise `ρ ↦ (U⊗U) ρ (U⊗U)†` and random-state scans.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{classify, OutcomePermutation, DEFAULT_PERFECTION_TOLERANCE};
use crate::invariance::{invariance_defect, ProbeOptions};
use crate::io::{format_f64, DensityFile};
use crate::linalg::{self, CMatrix};
use crate::parallel::Workers;
use crate::pauli;
use crate::qudit::{self, haar_unitary, joint_distribution, random_state, DensityMatrix, OrthonormalBasis, PureState, StateKind};
use crate::rng::{derive_seed, stream};

/// Distance to the singlet under which a scanned state is flagged.
pub const NEAR_SINGLET: f64 = 1e-6;

const TAG_STATES: u64 = 11;
const TAG_PROBES: u64 = 12;

/// Applies the same unitary to both halves.
pub fn collective_channel(rho: &DensityMatrix, u: &CMatrix) -> Result<DensityMatrix> {
    let d = rho.local_dim();
    rho.require_bipartite(d)?;
    if u.nrows() != d || u.ncols() != d {
        return Err(Error::dims(format!("{d}x{d} unitary"), format!("{}x{}", u.nrows(), u.ncols())));
    }
    let deviation = linalg::unitarity_defect(u);
    if deviation > qudit::UNITARY_TOLERANCE {
        return Err(Error::NotUnitary { deviation });
    }
    let uu = linalg::kron(u, u);
    let out = &uu * rho.matrix() * uu.adjoint();
    DensityMatrix::with_tolerance(out, d, true, rho.psd_tolerance())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    input_state: DensityMatrix,
    trials: usize,
    measurement_basis: OrthonormalBasis,
    declared_map: OutcomePermutation,
    seed: u64,
}

impl ChannelConfig {
    /// Computational measurement basis; the declared map is the one `classify`
    /// finds on the noiseless state in that basis.
    pub fn new(input_state: DensityMatrix, trials: usize, seed: u64) -> Result<Self> {
        let basis = OrthonormalBasis::computational(input_state.local_dim());
        Self::with_basis(input_state, trials, seed, basis)
    }

    pub fn with_basis(input_state: DensityMatrix, trials: usize, seed: u64, basis: OrthonormalBasis) -> Result<Self> {
        let d = input_state.local_dim();
        input_state.require_bipartite(d)?;
        if basis.local_dim() != d {
            return Err(Error::dims(format!("basis of dimension {d}"), format!("dimension {}", basis.local_dim())));
        }
        let tol = DEFAULT_PERFECTION_TOLERANCE.min(0.5 / d as f64);
        let declared_map = classify(&joint_distribution(&input_state, &basis)?, tol)?.permutation;
        Self::explicit(input_state, trials, seed, basis, declared_map)
    }

    pub fn explicit(
        input_state: DensityMatrix,
        trials: usize,
        seed: u64,
        measurement_basis: OrthonormalBasis,
        declared_map: OutcomePermutation,
    ) -> Result<Self> {
        let d = input_state.local_dim();
        input_state.require_bipartite(d)?;
        if trials == 0 {
            return Err(Error::OutOfRange {
                what: "trials",
                value: 0,
                min: 1,
                max: usize::MAX,
            });
        }
        if measurement_basis.local_dim() != d || declared_map.dim() != d {
            return Err(Error::dims(
                format!("basis and map of dimension {d}"),
                format!("{} and {}", measurement_basis.local_dim(), declared_map.dim()),
            ));
        }
        Ok(ChannelConfig {
            input_state,
            trials,
            measurement_basis,
            declared_map,
            seed,
        })
    }

    pub fn local_dim(&self) -> usize {
        self.input_state.local_dim()
    }

    pub fn input_state(&self) -> &DensityMatrix {
        &self.input_state
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn measurement_basis(&self) -> &OrthonormalBasis {
        &self.measurement_basis
    }

    pub fn declared_map(&self) -> &OutcomePermutation {
        &self.declared_map
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelStats {
    #[serde(skip)]
    pub per_trial_success: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
    pub min: f64,
    pub trials: usize,
    pub seed: u64,
}

impl ChannelStats {
    fn from_trials(per_trial_success: Vec<f64>, seed: u64) -> Self {
        let n = per_trial_success.len();
        let mean = per_trial_success.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = per_trial_success.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        let min = per_trial_success.iter().copied().fold(f64::INFINITY, f64::min);
        ChannelStats {
            per_trial_success,
            mean,
            std_error,
            min,
            trials: n,
            seed,
        }
    }

    /// `trial_index,success_probability` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial_index,success_probability\n");
        for (t, p) in self.per_trial_success.iter().enumerate() {
            out.push_str(&format!("{t},{}\n", format_f64(*p)));
        }
        out
    }
}

/// Probability that the declared map holds after one collective unitary.
pub fn trial_success(config: &ChannelConfig, u: &CMatrix) -> Result<f64> {
    let out = collective_channel(&config.input_state, u)?;
    let dist = joint_distribution(&out, &config.measurement_basis)?;
    let p: f64 = (0..config.local_dim()).map(|i| dist.get(i, config.declared_map.image(i))).sum();
    Ok(p.clamp(0.0, 1.0))
}

/// Trial `t` draws its unitary from stream `t` of the configured seed.
pub fn simulate(config: &ChannelConfig, workers: Workers) -> Result<ChannelStats> {
    let d = config.local_dim();
    let per_trial = workers.map(config.trials, |t| {
        let u = haar_unitary(d, &mut stream(config.seed, t as u64))?;
        trial_success(config, &u)
    });
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ChannelStats::from_trials(per_trial, config.seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanOptions {
    pub probes_per_state: usize,
    pub refine: bool,
    pub seed: u64,
    pub workers: Workers,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScannedState {
    pub index: usize,
    pub kind: &'static str,
    /// Max leakage over the probed bases, or 1 when two perfect bases disagree in type.
    pub score: f64,
    pub max_leakage: f64,
    pub signature_mismatch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub local_dim: usize,
    pub count: usize,
    pub probes_per_state: usize,
    pub refine: bool,
    pub seed: u64,
    pub min_defect: f64,
    pub max_defect: f64,
    pub argmin: ScannedState,
    pub argmin_state: DensityFile,
    /// d = 2: indices of states within [`NEAR_SINGLET`] of the singlet.
    pub near_singlet: Vec<usize>,
    /// d = 2: distance of the argmin from the singlet.
    pub argmin_singlet_distance: Option<f64>,
    /// d = 2: whether the argmin, snapped to `α = β = 0, T = ±I`, is certified.
    pub snapped_certified: Option<bool>,
}

fn kind_name(k: usize) -> (&'static str, StateKind) {
    if k.is_multiple_of(2) {
        ("pure", StateKind::Pure)
    } else {
        ("mixed", StateKind::Mixed)
    }
}

/// Draws `count` states, alternating pure and mixed, and scans them.
pub fn scan_random_states(d: usize, count: usize, opts: &ScanOptions) -> Result<ScanReport> {
    if count == 0 {
        return Err(Error::OutOfRange {
            what: "count",
            value: 0,
            min: 1,
            max: usize::MAX,
        });
    }
    let state_seed = derive_seed(opts.seed, TAG_STATES, 0);
    let states = (0..count)
        .map(|k| {
            let (name, kind) = kind_name(k);
            Ok((name, random_state(d, kind, &mut stream(state_seed, k as u64))?))
        })
        .collect::<Result<Vec<_>>>()?;
    scan_states(states, opts)
}

/// Scans the given states; each is probed with its own derived seed.
pub fn scan_states(states: Vec<(&'static str, DensityMatrix)>, opts: &ScanOptions) -> Result<ScanReport> {
    let Some(d) = states.first().map(|(_, s)| s.local_dim()) else {
        return Err(Error::OutOfRange {
            what: "count",
            value: 0,
            min: 1,
            max: usize::MAX,
        });
    };
    let probe_seed = derive_seed(opts.seed, TAG_PROBES, 0);
    let scored = opts.workers.map(states.len(), |k| -> Result<ScannedState> {
        let probe = ProbeOptions {
            n_random_bases: opts.probes_per_state,
            refine: opts.refine,
            seed: derive_seed(probe_seed, k as u64, 0),
            workers: Workers::SEQUENTIAL,
        };
        let defect = invariance_defect(&states[k].1, &probe)?;
        Ok(ScannedState {
            index: k,
            kind: states[k].0,
            score: if defect.signature_mismatch { 1.0 } else { defect.value },
            max_leakage: defect.max_leakage,
            signature_mismatch: defect.signature_mismatch,
        })
    });
    let scored = scored.into_iter().collect::<Result<Vec<_>>>()?;
    let argmin = scored
        .iter()
        .min_by(|a, b| a.score.total_cmp(&b.score))
        .cloned()
        .expect("non-empty");
    let max_defect = scored.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);
    let argmin_rho = &states[argmin.index].1;

    let (near_singlet, distance, snapped) = if d == 2 {
        let singlet = PureState::singlet().density();
        let near = states
            .iter()
            .enumerate()
            .filter(|(_, (_, s))| s.max_abs_diff(&singlet) <= NEAR_SINGLET)
            .map(|(k, _)| k)
            .collect();
        let snapped = DensityMatrix::new(pauli::snap_to_invariant_form(argmin_rho)?, 2, true)
            .and_then(|s| pauli::certify_singlet_invariance(&s))
            .map(|c| c.is_certified())
            .unwrap_or(false);
        (near, Some(argmin_rho.max_abs_diff(&singlet)), Some(snapped))
    } else {
        (Vec::new(), None, None)
    };

    Ok(ScanReport {
        local_dim: d,
        count: states.len(),
        probes_per_state: opts.probes_per_state,
        refine: opts.refine,
        seed: opts.seed,
        min_defect: argmin.score,
        max_defect,
        argmin_state: DensityFile::from_density(argmin_rho),
        argmin,
        near_singlet,
        argmin_singlet_distance: distance,
        snapped_certified: snapped,
    })
}
