//! Truncated bosonic Fock-space algebra.
//!
//! Every operator is a dense complex matrix built directly on the truncated
//! space (the ladder operators are projected first, functions of them are
//! taken afterwards). For multimode spaces mode 0 is the leftmost Kronecker
//! factor.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense complex matrix used for every operator in the crate.
pub type CMatrix = DMatrix<Complex64>;

/// Hermiticity tolerance for inputs of [`herm_func`] and friends.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Hermiticity and normalization tolerance for [`EnvState`].
pub const STATE_TOL: f64 = 1e-12;

/// Most negative eigenvalue tolerated in a density matrix.
pub const PSD_TOL: f64 = 1e-10;

/// Most negative eigenvalue tolerated by [`mixed_fidelity`].
pub const FIDELITY_PSD_TOL: f64 = 1e-8;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A single harmonic mode with an occupation cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    /// Angular frequency in relative units. Zero is allowed and yields a
    /// static bath.
    pub omega: f64,
    /// Largest retained occupation number `N`; the mode has dimension `N + 1`.
    pub cutoff: usize,
}

impl ModeSpec {
    pub fn new(omega: f64, cutoff: usize) -> Result<Self> {
        if !omega.is_finite() || omega < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mode frequency must be finite and non-negative, got {omega}"
            )));
        }
        if cutoff == 0 {
            return Err(Error::InvalidParameter(
                "occupation cutoff must be at least 1".into(),
            ));
        }
        Ok(Self { omega, cutoff })
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }
}

/// Ordered collection of modes forming the environment Hilbert space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpace {
    modes: Vec<ModeSpec>,
}

impl EnvSpace {
    pub fn new(modes: Vec<ModeSpec>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidParameter(
                "environment needs at least one mode".into(),
            ));
        }
        for m in &modes {
            ModeSpec::new(m.omega, m.cutoff)?;
        }
        Ok(Self { modes })
    }

    pub fn single(mode: ModeSpec) -> Self {
        Self { modes: vec![mode] }
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        self.modes.iter().map(ModeSpec::dim).product()
    }
}

/// Ladder, number and position operators of one truncated mode.
#[derive(Debug, Clone)]
pub struct ModeOps {
    pub a: CMatrix,
    pub n: CMatrix,
    /// Position operator `a + a†` (no `1/√2`).
    pub x: CMatrix,
}

/// Builds `a`, `n = a†a` and `x = a + a†` on a mode with the given cutoff.
pub fn build_mode_ops(cutoff: usize) -> Result<ModeOps> {
    if cutoff == 0 {
        return Err(Error::InvalidParameter(
            "occupation cutoff must be at least 1".into(),
        ));
    }
    let dim = cutoff + 1;
    let mut a = CMatrix::zeros(dim, dim);
    for k in 1..dim {
        a[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
    }
    let n = a.adjoint() * &a;
    let x = &a + a.adjoint();
    Ok(ModeOps { a, n, x })
}

/// A validated density matrix on the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    matrix: CMatrix,
}

impl EnvState {
    /// Validates Hermiticity, positivity and unit trace.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let dev = hermitian_deviation(&matrix);
        if dev > STATE_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::NotNormalized(tr.re));
        }
        let (vals, _) = eigh(&matrix);
        let min = vals.min();
        if min < -PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(Self { matrix })
    }

    pub fn pure(index: usize, dim: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} outside dimension {dim}"
            )));
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(index, index)] = ONE;
        Ok(Self { matrix: m })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `tr(op · ρ)`.
    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        trace_product(op, &self.matrix)
    }
}

/// Thermal state `ρ ∝ Σ_k e^{-β ω k} |k⟩⟨k|` renormalized on the truncated
/// space. `beta = f64::INFINITY` yields the vacuum.
pub fn thermal_state(mode: &ModeSpec, beta: f64) -> Result<EnvState> {
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "inverse temperature must be positive, got {beta}"
        )));
    }
    let dim = mode.dim();
    if beta.is_infinite() {
        return EnvState::pure(0, dim);
    }
    let weights: Vec<f64> = (0..dim)
        .map(|k| (-beta * mode.omega * k as f64).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    let diag = DVector::from_iterator(dim, weights.iter().map(|w| Complex64::new(w / z, 0.0)));
    Ok(EnvState {
        matrix: CMatrix::from_diagonal(&diag),
    })
}

/// Product of per-mode thermal states at a common inverse temperature.
pub fn thermal_state_space(space: &EnvSpace, beta: f64) -> Result<EnvState> {
    let mut out: Option<CMatrix> = None;
    for mode in space.modes() {
        let rho = thermal_state(mode, beta)?.into_matrix();
        out = Some(match out {
            None => rho,
            Some(acc) => acc.kronecker(&rho),
        });
    }
    Ok(EnvState {
        matrix: out.expect("EnvSpace has at least one mode"),
    })
}

/// Places a single-mode operator on `mode_index`, identity elsewhere.
pub fn tensor_embed(op: &CMatrix, mode_index: usize, space: &EnvSpace) -> Result<CMatrix> {
    let modes = space.modes();
    let Some(target) = modes.get(mode_index) else {
        return Err(Error::InvalidParameter(format!(
            "mode index {mode_index} out of range for {} modes",
            modes.len()
        )));
    };
    if op.nrows() != target.dim() || op.ncols() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            found: op.nrows(),
        });
    }
    let mut out: Option<CMatrix> = None;
    for (i, mode) in modes.iter().enumerate() {
        let factor = if i == mode_index {
            op.clone()
        } else {
            CMatrix::identity(mode.dim(), mode.dim())
        };
        out = Some(match out {
            None => factor,
            Some(acc) => acc.kronecker(&factor),
        });
    }
    Ok(out.expect("EnvSpace has at least one mode"))
}

/// Largest entry of `|H - H†|`.
pub fn hermitian_deviation(h: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..h.nrows() {
        for j in i..h.ncols() {
            dev = dev.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized first,
/// so callers are responsible for checking Hermiticity.
pub(crate) fn eigh(h: &CMatrix) -> (DVector<f64>, CMatrix) {
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

fn check_hermitian(h: &CMatrix) -> Result<()> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            found: h.ncols(),
        });
    }
    let scale = h.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    let dev = hermitian_deviation(h);
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

/// Applies `f` to the spectrum of a Hermitian matrix: `V f(Λ) V†`.
pub fn herm_func<F>(h: &CMatrix, f: F) -> Result<CMatrix>
where
    F: Fn(f64) -> Complex64,
{
    check_hermitian(h)?;
    let (vals, vecs) = eigh(h);
    let mut scaled = vecs.clone();
    for (j, lambda) in vals.iter().enumerate() {
        let fj = f(*lambda);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= fj;
        }
    }
    Ok(scaled * vecs.adjoint())
}

/// Hermitian eigenvalues with a Hermiticity check.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Result<DVector<f64>> {
    check_hermitian(h)?;
    Ok(eigh(h).0)
}

/// `tr(A · B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Which factor of `system ⊗ env` survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    System,
    Env,
}

/// Partial trace of an operator on `system ⊗ env` with `dim(system) = d_sys`.
pub fn partial_trace(joint: &CMatrix, d_sys: usize, keep: Keep) -> Result<CMatrix> {
    let total = joint.nrows();
    if !joint.is_square() || d_sys == 0 || !total.is_multiple_of(d_sys) {
        return Err(Error::InvalidParameter(format!(
            "a {}x{} operator does not factor with system dimension {d_sys}",
            joint.nrows(),
            joint.ncols()
        )));
    }
    let d_env = total / d_sys;
    match keep {
        Keep::System => {
            let mut out = CMatrix::zeros(d_sys, d_sys);
            for a in 0..d_sys {
                for b in 0..d_sys {
                    let mut acc = ZERO;
                    for e in 0..d_env {
                        acc += joint[(a * d_env + e, b * d_env + e)];
                    }
                    out[(a, b)] = acc;
                }
            }
            Ok(out)
        }
        Keep::Env => {
            let mut out = CMatrix::zeros(d_env, d_env);
            for s in 0..d_sys {
                out += joint.view((s * d_env, s * d_env), (d_env, d_env));
            }
            Ok(out)
        }
    }
}

/// `½ Σ |λ_i(ρ − σ)|`.
pub fn trace_distance(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch {
            expected: rho.nrows(),
            found: sigma.nrows(),
        });
    }
    let vals = hermitian_eigenvalues(&(rho - sigma))?;
    Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
}

fn psd_sqrt(rho: &CMatrix) -> Result<CMatrix> {
    check_hermitian(rho)?;
    let (vals, vecs) = eigh(rho);
    let min = vals.min();
    if min < -FIDELITY_PSD_TOL {
        return Err(Error::NotPositive(min));
    }
    let mut scaled = vecs.clone();
    for (j, lambda) in vals.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= s;
        }
    }
    Ok(scaled * vecs.adjoint())
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`.
pub fn mixed_fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch {
            expected: rho.nrows(),
            found: sigma.nrows(),
        });
    }
    let sqrt_rho = psd_sqrt(rho)?;
    // sigma is only checked for Hermiticity and positivity via its eigenvalues.
    let min_sigma = hermitian_eigenvalues(sigma)?.min();
    if min_sigma < -FIDELITY_PSD_TOL {
        return Err(Error::NotPositive(min_sigma));
    }
    let inner = &sqrt_rho * sigma * &sqrt_rho;
    let (vals, _) = eigh(&inner);
    let root: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok(root * root)
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_hermitian(dim: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = CMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        (&m + m.adjoint()).scale(0.5)
    }

    pub fn random_density(dim: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let rho = &g * g.adjoint();
        let tr = rho.trace();
        rho.unscale(tr.re)
    }

    pub fn random_unitary(dim: usize, seed: u64) -> CMatrix {
        let h = random_hermitian(dim, seed);
        herm_func(&h, |l| Complex64::new(0.0, -3.0 * l).exp()).unwrap()
    }

    pub fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}
