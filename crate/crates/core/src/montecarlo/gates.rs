//! Random gate sampling and the deterministic RNG stream layout.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{CMatrix, ONE, ZERO};

/// Stream tag reserved for witness circuits, kept apart from every depth index.
pub const WITNESS_STREAM: u32 = u32::MAX;

/// Generator for sample `b` of group `a` (a depth index, or
/// [`WITNESS_STREAM`]): ChaCha8 keyed by `seed` on stream `(a << 32) | b`.
pub fn stream_rng(seed: u64, a: u32, b: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((a as u64) << 32) | b as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gateset {
    Haar,
    Clifford1q,
    /// Uniform over `{𝕀, X}`; not a 2-design.
    Xi,
}

/// Haar unitary from the QR decomposition of a complex Ginibre matrix, with
/// the phases of `diag(R)` moved onto `Q` so the law is exactly invariant.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { ONE };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

fn phase_normalized(u: &CMatrix) -> CMatrix {
    let pivot = u.iter().find(|z| z.norm() > 1e-9).copied().unwrap_or(ONE);
    u * (pivot.conj() / pivot.norm())
}

fn same_up_to_phase(a: &CMatrix, b: &CMatrix) -> bool {
    (phase_normalized(a) - phase_normalized(b)).iter().all(|z| z.norm() < 1e-9)
}

/// The 24 single-qubit Cliffords (modulo global phase), generated from H and S.
pub fn clifford_1q_table() -> Result<Vec<CMatrix>> {
    let h = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ONE, -ONE]) * Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
    let s = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, Complex64::i()]);
    let mut table = vec![CMatrix::identity(2, 2)];
    let mut frontier = 0;
    while frontier < table.len() {
        let base = table[frontier].clone();
        for g in [&h, &s] {
            let next = g * &base;
            if !table.iter().any(|t| same_up_to_phase(t, &next)) {
                table.push(next);
            }
        }
        frontier += 1;
    }
    if table.len() != 24 {
        return Err(Error::Unsupported(format!(
            "Clifford generation produced {} elements",
            table.len()
        )));
    }
    Ok(table)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

/// Draws gates from one gateset.
#[derive(Debug, Clone)]
pub struct GateSampler {
    gateset: Gateset,
    d: usize,
    table: Vec<CMatrix>,
}

impl GateSampler {
    pub fn new(gateset: Gateset, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter("system dimension must be >= 2".into()));
        }
        let table = match gateset {
            Gateset::Haar => Vec::new(),
            Gateset::Clifford1q | Gateset::Xi if d != 2 => {
                return Err(Error::Unsupported(format!("{gateset:?} gates act on a single qubit")));
            }
            Gateset::Clifford1q => clifford_1q_table()?,
            Gateset::Xi => vec![CMatrix::identity(2, 2), pauli_x()],
        };
        Ok(Self { gateset, d, table })
    }

    pub fn gateset(&self) -> Gateset {
        self.gateset
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        match self.gateset {
            Gateset::Haar => haar_unitary(self.d, rng),
            _ => self.table[rng.random_range(0..self.table.len())].clone(),
        }
    }

    pub fn sequence<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> GateSequence {
        GateSequence::new((0..k).map(|_| self.sample(rng)).collect(), self.d)
            .expect("sampled gates have the sampler's dimension")
    }
}

/// Gates `U_1..U_k` and the recovery `(U_k ··· U_1)^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSequence {
    gates: Vec<CMatrix>,
    inverse: CMatrix,
}

impl GateSequence {
    pub fn new(gates: Vec<CMatrix>, d: usize) -> Result<Self> {
        let mut total = CMatrix::identity(d, d);
        for g in &gates {
            if g.nrows() != d || g.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: g.nrows(),
                });
            }
            total = g * total;
        }
        Ok(Self {
            gates,
            inverse: total.adjoint(),
        })
    }

    pub fn gates(&self) -> &[CMatrix] {
        &self.gates
    }

    pub fn inverse(&self) -> &CMatrix {
        &self.inverse
    }

    pub fn depth(&self) -> usize {
        self.gates.len()
    }

    pub fn d(&self) -> usize {
        self.inverse.nrows()
    }
}
