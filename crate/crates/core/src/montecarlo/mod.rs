//! Sampled-circuit simulation of the joint system-bath evolution.

mod gates;
mod joint;
mod witness;

pub use gates::{clifford_1q_table, haar_unitary, pauli_x, stream_rng, GateSampler, GateSequence, Gateset, WITNESS_STREAM};
pub use joint::JointState;
pub use witness::{
    mixed_fidelity_series, paired_system_states, witness_circuits, witness_histogram, witness_series,
    WitnessHistogram, WitnessSeries, BACKFLOW_THRESHOLD,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::DecayCurve;
use crate::error::{Error, Result};
use crate::fock::{trace_product, CMatrix, EnvState};
use crate::spin_boson::EvolutionBlocks;

/// Depth guard for [`xi_exact_average`].
pub const XI_DEPTH_LIMIT: usize = 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub samples: usize,
    pub depths: Vec<usize>,
    pub seed: u64,
    pub markovian: bool,
    pub gateset: Gateset,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.samples > u32::MAX as usize {
            return Err(Error::InvalidParameter("samples must be in 1..2^32".into()));
        }
        crate::avg_channel::check_depths(&self.depths)?;
        if self.depths.len() >= u32::MAX as usize {
            return Err(Error::InvalidParameter("too many depths".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub system: CMatrix,
    pub env: CMatrix,
}

/// Runs `U_1`, step, …, `U_k`, step, then the inverse, from `ρ_s ⊗ ρ_env`.
/// In Markovian mode the bath is reset to `ρ_env` after every step.
pub fn simulate_sequence(
    blocks: &EvolutionBlocks,
    rho_s: &CMatrix,
    rho_env: &EnvState,
    seq: &GateSequence,
    markovian: bool,
) -> Result<SimOutput> {
    if rho_s.nrows() != blocks.d() || seq.d() != blocks.d() {
        return Err(Error::DimensionMismatch {
            expected: blocks.d(),
            found: rho_s.nrows(),
        });
    }
    if rho_env.dim() != blocks.env_dim() {
        return Err(Error::DimensionMismatch {
            expected: blocks.env_dim(),
            found: rho_env.dim(),
        });
    }
    let mut state = JointState::product(rho_s, rho_env.matrix())?;
    for u in seq.gates() {
        state.apply_system_unitary(u)?;
        state.apply_joint_step(blocks)?;
        if markovian {
            state.refresh(rho_env)?;
        }
    }
    state.apply_system_unitary(seq.inverse())?;
    Ok(SimOutput {
        system: state.reduced_system(),
        env: state.reduced_env(),
    })
}

/// Mean survival and its standard error at each configured depth.
///
/// Sample `j` at depth index `i` uses [`stream_rng`]`(seed, i, j)`; samples
/// may run in parallel but are summed in index order.
pub fn estimate_decay(
    blocks: &EvolutionBlocks,
    rho_s: &CMatrix,
    rho_env: &EnvState,
    cfg: &SimConfig,
) -> Result<DecayCurve> {
    cfg.validate()?;
    let sampler = GateSampler::new(cfg.gateset, blocks.d())?;
    let mut values = Vec::with_capacity(cfg.depths.len());
    let mut stderr = Vec::with_capacity(cfg.depths.len());
    for (i, &depth) in cfg.depths.iter().enumerate() {
        if depth == 0 {
            values.push(1.0);
            stderr.push(0.0);
            continue;
        }
        let samples = (0..cfg.samples)
            .into_par_iter()
            .map(|j| {
                let mut rng = stream_rng(cfg.seed, i as u32, j as u32);
                let seq = sampler.sequence(depth, &mut rng);
                let out = simulate_sequence(blocks, rho_s, rho_env, &seq, cfg.markovian)?;
                Ok(trace_product(&out.system, rho_s).re)
            })
            .collect::<Result<Vec<f64>>>()?;
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let se = if samples.len() > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        values.push(mean.clamp(0.0, 1.0));
        stderr.push(se);
    }
    DecayCurve::new(cfg.depths.clone(), values, Some(stderr))
}

/// `f_k = Σ_{j=1}^k (-1)^{u_1 + … + u_j}` for an X/𝕀 string `u` (true = X).
pub fn xi_phase_factor(u: &[bool]) -> i64 {
    let mut parity = false;
    let mut f = 0;
    for &x in u {
        parity ^= x;
        f += if parity { -1 } else { 1 };
    }
    f
}

/// Exact average survival of `|+⟩` over all `2^k` X/𝕀 strings, simulated
/// through the joint evolution (no closed-form approximation).
pub fn xi_exact_average(blocks: &EvolutionBlocks, rho_env: &EnvState, k: usize) -> Result<f64> {
    if k > XI_DEPTH_LIMIT {
        return Err(Error::DepthLimit {
            requested: k,
            limit: XI_DEPTH_LIMIT,
        });
    }
    if blocks.d() != 2 {
        return Err(Error::Unsupported("the XI gateset acts on a single qubit".into()));
    }
    let plus = CMatrix::from_element(2, 2, 0.5.into());
    let x = pauli_x();
    let start = JointState::product(&plus, rho_env.matrix())?;

    fn walk(
        state: JointState,
        left: usize,
        parity: bool,
        blocks: &EvolutionBlocks,
        x: &CMatrix,
        plus: &CMatrix,
        acc: &mut f64,
    ) -> Result<()> {
        if left == 0 {
            let mut sys = state.reduced_system();
            if parity {
                sys = x * sys * x;
            }
            *acc += trace_product(&sys, plus).re;
            return Ok(());
        }
        let mut id_branch = state.clone();
        id_branch.apply_joint_step(blocks)?;
        walk(id_branch, left - 1, parity, blocks, x, plus, acc)?;
        let mut x_branch = state;
        x_branch.apply_system_unitary(x)?;
        x_branch.apply_joint_step(blocks)?;
        walk(x_branch, left - 1, !parity, blocks, x, plus, acc)
    }

    let mut acc = 0.0;
    walk(start, k, false, blocks, &x, &plus, &mut acc)?;
    Ok(acc / (1u64 << k) as f64)
}
