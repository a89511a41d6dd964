//! Block-diagonal spin-boson model.
//!
//! The qubits couple to the bath through `σ_z` only, so the joint Hamiltonian
//! is a direct sum over computational basis patterns `p` of bath Hamiltonians
//!
//! ```text
//! H_p = Σ_i ω_i a_i†a_i + Σ_i (Σ_j g_ij (-1)^{p_j}) (a_i + a_i†)
//! ```
//!
//! System-only terms are left out; they can be folded into the applied gates.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{build_mode_ops, herm_func, tensor_embed, CMatrix, EnvSpace, ModeSpec};

/// A computational basis pattern of the `n` qubits.
///
/// `index` is the basis index with qubit 0 as the most significant bit, which
/// matches the Kronecker order of the system factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProjectorLabel {
    index: usize,
    n_qubits: usize,
}

impl ProjectorLabel {
    pub fn new(index: usize, n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits >= usize::BITS as usize || index >= 1 << n_qubits {
            return Err(Error::InvalidParameter(format!(
                "label {index} is not a {n_qubits}-qubit basis pattern"
            )));
        }
        Ok(Self { index, n_qubits })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut index = 0;
        for &b in bits {
            if b > 1 {
                return Err(Error::InvalidParameter(format!("bit value {b}")));
            }
            index = (index << 1) | b as usize;
        }
        Self::new(index, bits.len())
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Value of qubit `j`'s bit.
    pub fn bit(&self, j: usize) -> u8 {
        ((self.index >> (self.n_qubits - 1 - j)) & 1) as u8
    }

    /// `Σ_j (-1)^{p_j}`.
    pub fn weight(&self) -> i32 {
        (0..self.n_qubits)
            .map(|j| if self.bit(j) == 0 { 1 } else { -1 })
            .sum()
    }
}

/// Qubits, bath modes, couplings `g[mode][qubit]` and the interaction time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinBosonModel {
    n_qubits: usize,
    env: EnvSpace,
    couplings: Vec<Vec<f64>>,
    dt: f64,
}

impl SpinBosonModel {
    pub fn new(n_qubits: usize, env: EnvSpace, couplings: Vec<Vec<f64>>, dt: f64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 12 {
            return Err(Error::InvalidParameter(format!(
                "qubit count must be in 1..=12, got {n_qubits}"
            )));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "interaction time must be positive, got {dt}"
            )));
        }
        if couplings.len() != env.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: env.n_modes(),
                found: couplings.len(),
            });
        }
        for row in &couplings {
            if row.len() != n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: n_qubits,
                    found: row.len(),
                });
            }
            if row.iter().any(|g| !g.is_finite()) {
                return Err(Error::InvalidParameter("couplings must be finite".into()));
            }
        }
        Ok(Self {
            n_qubits,
            env,
            couplings,
            dt,
        })
    }

    /// Same coupling `g` between every mode and every qubit.
    pub fn uniform(n_qubits: usize, env: EnvSpace, g: f64, dt: f64) -> Result<Self> {
        let couplings = vec![vec![g; n_qubits]; env.n_modes()];
        Self::new(n_qubits, env, couplings, dt)
    }

    /// One qubit, one mode.
    pub fn single(omega: f64, cutoff: usize, g: f64, dt: f64) -> Result<Self> {
        let env = EnvSpace::single(ModeSpec::new(omega, cutoff)?);
        Self::uniform(1, env, g, dt)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// System dimension `d = 2^n`.
    pub fn d(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn env(&self) -> &EnvSpace {
        &self.env
    }

    pub fn env_dim(&self) -> usize {
        self.env.dim()
    }

    pub fn couplings(&self) -> &[Vec<f64>] {
        &self.couplings
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn labels(&self) -> impl Iterator<Item = ProjectorLabel> + '_ {
        (0..self.d()).map(move |index| ProjectorLabel {
            index,
            n_qubits: self.n_qubits,
        })
    }

    fn embedded_mode_ops(&self) -> Result<Vec<(CMatrix, CMatrix)>> {
        self.env
            .modes()
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let ops = build_mode_ops(m.cutoff)?;
                Ok((
                    tensor_embed(&ops.n, i, &self.env)?,
                    tensor_embed(&ops.x, i, &self.env)?,
                ))
            })
            .collect()
    }

    /// Total number operator `Σ_i n_i`.
    pub fn number_operator(&self) -> Result<CMatrix> {
        let dim = self.env_dim();
        let mut out = CMatrix::zeros(dim, dim);
        for (n, _) in self.embedded_mode_ops()? {
            out += n;
        }
        Ok(out)
    }

    /// Displacement weight of mode `i` under pattern `p`: `Σ_j g_ij (-1)^{p_j}`.
    fn mode_weight(&self, mode: usize, p: &ProjectorLabel) -> f64 {
        (0..self.n_qubits)
            .map(|j| {
                let sign = if p.bit(j) == 0 { 1.0 } else { -1.0 };
                sign * self.couplings[mode][j]
            })
            .sum()
    }

    fn check_label(&self, p: &ProjectorLabel) -> Result<()> {
        if p.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: p.n_qubits,
            });
        }
        Ok(())
    }

    /// Bath Hamiltonian `H_p` attached to the projector `|p⟩⟨p|`.
    pub fn block_hamiltonian(&self, p: &ProjectorLabel) -> Result<CMatrix> {
        self.check_label(p)?;
        let dim = self.env_dim();
        let mut h = CMatrix::zeros(dim, dim);
        for (i, (n, x)) in self.embedded_mode_ops()?.into_iter().enumerate() {
            let omega = self.env.modes()[i].omega;
            h += n.scale(omega) + x.scale(self.mode_weight(i, p));
        }
        Ok(h)
    }

    /// `E_p = e^{-i H_p dt}` for every pattern.
    pub fn evolution_blocks(&self) -> Result<EvolutionBlocks> {
        let dt = self.dt;
        let blocks = self
            .labels()
            .map(|p| {
                let h = self.block_hamiltonian(&p)?;
                herm_func(&h, |l| Complex64::new(0.0, -dt * l).exp())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EvolutionBlocks {
            n_qubits: self.n_qubits,
            blocks,
        })
    }

    /// `cos((H_0 - H_1) dt)`; single qubit only.
    pub fn delta_cos_op(&self) -> Result<CMatrix> {
        if self.n_qubits != 1 {
            return Err(Error::Unsupported(
                "the cosine generator is defined for a single qubit".into(),
            ));
        }
        let h0 = self.block_hamiltonian(&ProjectorLabel::new(0, 1)?)?;
        let h1 = self.block_hamiltonian(&ProjectorLabel::new(1, 1)?)?;
        let dt = self.dt;
        herm_func(&(h0 - h1), |l| Complex64::new((dt * l).cos(), 0.0))
    }
}

/// Precomputed bath propagators, one per computational basis pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionBlocks {
    n_qubits: usize,
    blocks: Vec<CMatrix>,
}

impl EvolutionBlocks {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn d(&self) -> usize {
        self.blocks.len()
    }

    pub fn env_dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn get(&self, p: &ProjectorLabel) -> &CMatrix {
        &self.blocks[p.index()]
    }

    pub fn as_slice(&self) -> &[CMatrix] {
        &self.blocks
    }

    /// Dense `Σ_p |p⟩⟨p| ⊗ E_p`.
    pub fn joint_step_unitary(&self) -> CMatrix {
        let (d, de) = (self.d(), self.env_dim());
        let mut u = CMatrix::zeros(d * de, d * de);
        for (p, e) in self.blocks.iter().enumerate() {
            u.view_mut((p * de, p * de), (de, de)).copy_from(e);
        }
        u
    }
}

/// Dense joint step unitary of a model.
pub fn joint_step_unitary(model: &SpinBosonModel) -> Result<CMatrix> {
    Ok(model.evolution_blocks()?.joint_step_unitary())
}
