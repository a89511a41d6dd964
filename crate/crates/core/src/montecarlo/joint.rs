//! Joint system-bath density matrices in system-block form.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{CMatrix, EnvState};
use crate::spin_boson::EvolutionBlocks;

/// `ρ = Σ_{p,q} |p⟩⟨q| ⊗ ρ_pq` stored as the `d²` bath blocks `ρ_pq`.
///
/// The interaction is block-diagonal in the system basis, so a joint step is
/// `ρ_pq ↦ E_p ρ_pq E_q†` and never forms the full joint unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    d: usize,
    dim: usize,
    blocks: Vec<CMatrix>,
}

impl JointState {
    /// `ρ_s ⊗ ρ_env`.
    pub fn product(rho_s: &CMatrix, rho_env: &CMatrix) -> Result<Self> {
        if !rho_s.is_square() || !rho_env.is_square() {
            return Err(Error::InvalidParameter("density matrices must be square".into()));
        }
        let d = rho_s.nrows();
        let dim = rho_env.nrows();
        let blocks = (0..d * d)
            .map(|idx| rho_env * rho_s[(idx / d, idx % d)])
            .collect();
        Ok(Self { d, dim, blocks })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn env_dim(&self) -> usize {
        self.dim
    }

    pub fn block(&self, p: usize, q: usize) -> &CMatrix {
        &self.blocks[p * self.d + q]
    }

    /// `(U ⊗ 𝕀) ρ (U† ⊗ 𝕀)`.
    pub fn apply_system_unitary(&mut self, u: &CMatrix) -> Result<()> {
        let d = self.d;
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: u.nrows(),
            });
        }
        // Left factor first: T_pq = Σ_r U_pr ρ_rq, then ρ'_pq = Σ_s T_ps conj(U_qs).
        let mut tmp = Vec::with_capacity(d * d);
        for p in 0..d {
            for q in 0..d {
                let mut acc = CMatrix::zeros(self.dim, self.dim);
                for r in 0..d {
                    let c = u[(p, r)];
                    if c != Complex64::new(0.0, 0.0) {
                        acc += self.block(r, q) * c;
                    }
                }
                tmp.push(acc);
            }
        }
        for p in 0..d {
            for q in 0..d {
                let mut acc = CMatrix::zeros(self.dim, self.dim);
                for s in 0..d {
                    let c = u[(q, s)].conj();
                    if c != Complex64::new(0.0, 0.0) {
                        acc += &tmp[p * d + s] * c;
                    }
                }
                self.blocks[p * d + q] = acc;
            }
        }
        Ok(())
    }

    /// One interaction step `ρ_pq ↦ E_p ρ_pq E_q†`.
    pub fn apply_joint_step(&mut self, e: &EvolutionBlocks) -> Result<()> {
        if e.d() != self.d || e.env_dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: e.env_dim(),
            });
        }
        let ep = e.as_slice();
        let e_dag: Vec<CMatrix> = ep.iter().map(|m| m.adjoint()).collect();
        for (idx, b) in self.blocks.iter_mut().enumerate() {
            let (p, q) = (idx / self.d, idx % self.d);
            *b = &ep[p] * &*b * &e_dag[q];
        }
        Ok(())
    }

    /// `tr_E ρ`.
    pub fn reduced_system(&self) -> CMatrix {
        CMatrix::from_fn(self.d, self.d, |p, q| self.block(p, q).trace())
    }

    /// `tr_S ρ`.
    pub fn reduced_env(&self) -> CMatrix {
        (0..self.d).fold(CMatrix::zeros(self.dim, self.dim), |acc, p| acc + self.block(p, p))
    }

    /// Markovian reset: `tr_E(ρ) ⊗ ρ_env`.
    pub fn refresh(&mut self, rho_env: &EnvState) -> Result<()> {
        if rho_env.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho_env.dim(),
            });
        }
        *self = Self::product(&self.reduced_system(), rho_env.matrix())?;
        Ok(())
    }

    /// Dense `(d·D) × (d·D)` matrix, system index most significant.
    pub fn to_dense(&self) -> CMatrix {
        let (d, dim) = (self.d, self.dim);
        CMatrix::from_fn(d * dim, d * dim, |i, j| self.block(i / dim, j / dim)[(i % dim, j % dim)])
    }
}
