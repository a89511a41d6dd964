//! Distinguishability of orthogonal inputs under a shared random circuit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gates::{stream_rng, GateSampler, GateSequence, Gateset, WITNESS_STREAM};
use super::joint::JointState;
use crate::error::{Error, Result};
use crate::fock::{mixed_fidelity, trace_distance, CMatrix, EnvState};
use crate::spin_boson::EvolutionBlocks;

/// Increments above this count as information backflow.
pub const BACKFLOW_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSeries {
    /// `0..=k`.
    pub depths: Vec<usize>,
    /// `D_k` between the `|0⟩`- and `|1⟩`-seeded system states.
    pub distances: Vec<f64>,
    /// `D_k - D_{k-1}` for `k = 1..`; one shorter than `distances`.
    pub increments: Vec<f64>,
}

impl WitnessSeries {
    pub fn max_increment(&self) -> f64 {
        self.increments.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Reduced system states of the two evolutions after each layer (no inverse),
/// starting with the inputs themselves.
pub fn paired_system_states(
    blocks: &EvolutionBlocks,
    rho_env: &EnvState,
    seq: &GateSequence,
    markovian: bool,
) -> Result<Vec<(CMatrix, CMatrix)>> {
    let d = blocks.d();
    if seq.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: seq.d(),
        });
    }
    let basis = |i: usize| EnvState::pure(i, d).map(EnvState::into_matrix);
    let mut a = JointState::product(&basis(0)?, rho_env.matrix())?;
    let mut b = JointState::product(&basis(1)?, rho_env.matrix())?;
    let mut out = vec![(a.reduced_system(), b.reduced_system())];
    for u in seq.gates() {
        for s in [&mut a, &mut b] {
            s.apply_system_unitary(u)?;
            s.apply_joint_step(blocks)?;
            if markovian {
                s.refresh(rho_env)?;
            }
        }
        out.push((a.reduced_system(), b.reduced_system()));
    }
    Ok(out)
}

pub fn witness_series(
    blocks: &EvolutionBlocks,
    rho_env: &EnvState,
    seq: &GateSequence,
    markovian: bool,
) -> Result<WitnessSeries> {
    let pairs = paired_system_states(blocks, rho_env, seq, markovian)?;
    let distances = pairs
        .iter()
        .map(|(a, b)| trace_distance(a, b))
        .collect::<Result<Vec<f64>>>()?;
    let increments = distances.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(WitnessSeries {
        depths: (0..distances.len()).collect(),
        distances,
        increments,
    })
}

/// Uhlmann fidelity between the two evolved system states at each depth.
pub fn mixed_fidelity_series(
    blocks: &EvolutionBlocks,
    rho_env: &EnvState,
    seq: &GateSequence,
    markovian: bool,
) -> Result<Vec<f64>> {
    paired_system_states(blocks, rho_env, seq, markovian)?
        .iter()
        .map(|(a, b)| mixed_fidelity(a, b))
        .collect()
}

/// Witness series for `n_circuits` random circuits of depth `depth`; circuit
/// `c` draws its gates from stream `(WITNESS_STREAM, c)`.
pub fn witness_circuits(
    blocks: &EvolutionBlocks,
    rho_env: &EnvState,
    n_circuits: usize,
    depth: usize,
    gateset: Gateset,
    seed: u64,
    markovian: bool,
) -> Result<Vec<WitnessSeries>> {
    if n_circuits == 0 || n_circuits > u32::MAX as usize {
        return Err(Error::InvalidParameter("circuit count must be in 1..2^32".into()));
    }
    let sampler = GateSampler::new(gateset, blocks.d())?;
    (0..n_circuits)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, WITNESS_STREAM, c as u32);
            let seq = sampler.sequence(depth, &mut rng);
            witness_series(blocks, rho_env, &seq, markovian)
        })
        .collect()
}

/// All increments `ΔD_k` across circuits, bucketed by step `k = 1..=depth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessHistogram {
    pub per_depth: Vec<Vec<f64>>,
}

impl WitnessHistogram {
    pub fn from_series(series: &[WitnessSeries]) -> Self {
        let depth = series.iter().map(|s| s.increments.len()).max().unwrap_or(0);
        let mut per_depth = vec![Vec::with_capacity(series.len()); depth];
        for s in series {
            for (k, inc) in s.increments.iter().enumerate() {
                per_depth[k].push(*inc);
            }
        }
        Self { per_depth }
    }

    /// Fraction of increments above [`BACKFLOW_THRESHOLD`] at each step.
    pub fn positive_fractions(&self) -> Vec<f64> {
        self.per_depth
            .iter()
            .map(|v| v.iter().filter(|x| **x > BACKFLOW_THRESHOLD).count() as f64 / v.len().max(1) as f64)
            .collect()
    }

    pub fn positive_fraction(&self) -> f64 {
        let total: usize = self.per_depth.iter().map(Vec::len).sum();
        let positive = self
            .per_depth
            .iter()
            .flatten()
            .filter(|x| **x > BACKFLOW_THRESHOLD)
            .count();
        positive as f64 / total.max(1) as f64
    }
}

pub fn witness_histogram(
    blocks: &EvolutionBlocks,
    rho_env: &EnvState,
    n_circuits: usize,
    depth: usize,
    gateset: Gateset,
    seed: u64,
    markovian: bool,
) -> Result<WitnessHistogram> {
    let series = witness_circuits(blocks, rho_env, n_circuits, depth, gateset, seed, markovian)?;
    Ok(WitnessHistogram::from_series(&series))
}
