//! Exactly averaged randomized-benchmarking propagation.
//!
//! After twirling, the joint state at every depth lies in
//! `𝕀/d ⊗ B_id + ρ_s ⊗ B_rho` for two bath operators, so one layer costs a
//! double sum over pattern pairs `(p, q)` of conjugations `E_p B E_q†`
//! instead of an enumeration of every trajectory. The trajectory sum, the
//! Markovian and XI closed forms and the brute-force photon average in this
//! module exist mostly as independent cross-checks of that engine.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::DecayCurve;
use crate::error::{Error, Result};
use crate::fock::{herm_func, trace_product, CMatrix, EnvState, ONE};
use crate::spin_boson::{EvolutionBlocks, ProjectorLabel, SpinBosonModel};

/// Default number of trajectory-pair terms the trajectory sum may visit
/// (`d^{2k}`); allows depth 6 for a single qubit.
pub const TRAJECTORY_BUDGET: usize = 1 << 12;

/// Default number of diagonal trajectories (`d^k`) for the brute-force photon
/// average; allows depth 10 for a single qubit.
pub const PHOTON_BUDGET: usize = 1 << 10;

/// Tolerance on `tr ρ_s² = 1` for the survival readout.
pub const PURITY_TOL: f64 = 1e-10;

/// Weights of the twirled output on the two system shapes.
///
/// `E[U† P_p U M U† P_q U] = c_id · tr(M) 𝕀/d + c_keep · M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwirlCoeffs {
    pub c_id: f64,
    pub c_keep: f64,
}

pub fn twirl_coeffs(delta: bool, d: usize) -> TwirlCoeffs {
    let df = d as f64;
    let delta = if delta { 1.0 } else { 0.0 };
    let norm = df * df - 1.0;
    TwirlCoeffs {
        c_id: (df * delta - 1.0) / norm,
        c_keep: (1.0 - delta / df) / norm,
    }
}

/// Closed-form Haar average of `U† A U ρ U† B U`. Reference only: the engine
/// never calls it.
pub fn haar_twirl_reference(a: &CMatrix, b: &CMatrix, rho: &CMatrix) -> Result<CMatrix> {
    let d = rho.nrows();
    for m in [a, b, rho] {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: m.nrows(),
            });
        }
    }
    if d < 2 {
        return Err(Error::InvalidParameter("twirl needs d >= 2".into()));
    }
    let df = Complex64::new(d as f64, 0.0);
    let tr_ab = trace_product(a, b);
    let tr_rho = rho.trace();
    let id = CMatrix::identity(d, d);
    let first = id.scale(1.0 / d as f64) * (tr_ab * tr_rho / df);
    let coeff = (df * a.trace() * b.trace() - tr_ab) / (df * (df * df - ONE));
    let traceless = rho - id * (tr_rho / df);
    Ok(first + traceless * coeff)
}

/// Haar-averaged joint state `𝕀/d ⊗ B_id + ρ_s ⊗ B_rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedState {
    b_id: CMatrix,
    b_rho: CMatrix,
    d: usize,
}

impl AveragedState {
    /// Depth-zero state: everything on the `ρ_s` shape.
    pub fn initial(rho_env: &EnvState, d: usize) -> Self {
        let dim = rho_env.dim();
        Self {
            b_id: CMatrix::zeros(dim, dim),
            b_rho: rho_env.matrix().clone(),
            d,
        }
    }

    pub fn from_parts(b_id: CMatrix, b_rho: CMatrix, d: usize) -> Result<Self> {
        if b_id.shape() != b_rho.shape() || !b_id.is_square() {
            return Err(Error::DimensionMismatch {
                expected: b_id.nrows(),
                found: b_rho.nrows(),
            });
        }
        Ok(Self { b_id, b_rho, d })
    }

    pub fn b_id(&self) -> &CMatrix {
        &self.b_id
    }

    pub fn b_rho(&self) -> &CMatrix {
        &self.b_rho
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Reduced bath state `B_id + B_rho`.
    pub fn env_state(&self) -> CMatrix {
        &self.b_id + &self.b_rho
    }

    /// `tr(B_id) + tr(B_rho)`, which stays at 1.
    pub fn total_trace(&self) -> f64 {
        self.b_id.trace().re + self.b_rho.trace().re
    }
}

/// One gate-plus-interaction layer of the averaged engine.
pub fn propagate_layer(state: &AveragedState, blocks: &EvolutionBlocks) -> Result<AveragedState> {
    propagate_layer_with(state, blocks, twirl_coeffs)
}

/// [`propagate_layer`] with a caller-supplied coefficient rule.
///
/// Per-`p` partial sums may run in parallel; they are always accumulated in
/// ascending `(p, q)` order so the result does not depend on the worker count.
pub fn propagate_layer_with<F>(
    state: &AveragedState,
    blocks: &EvolutionBlocks,
    rule: F,
) -> Result<AveragedState>
where
    F: Fn(bool, usize) -> TwirlCoeffs + Sync,
{
    let d = blocks.d();
    let dim = blocks.env_dim();
    if state.d != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: state.d,
        });
    }
    if state.b_id.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: state.b_id.nrows(),
        });
    }
    let e = blocks.as_slice();
    let e_dag: Vec<CMatrix> = e.iter().map(|m| m.adjoint()).collect();
    let same = rule(true, d);
    let diff = rule(false, d);

    let partials: Vec<(CMatrix, CMatrix)> = (0..d)
        .into_par_iter()
        .map(|p| {
            let left_id = &e[p] * &state.b_id;
            let left_rho = &e[p] * &state.b_rho;
            let mut acc_id = CMatrix::zeros(dim, dim);
            let mut acc_rho = CMatrix::zeros(dim, dim);
            for (q, eq_dag) in e_dag.iter().enumerate() {
                let c = if p == q { same } else { diff };
                let x = &left_id * eq_dag;
                let y = &left_rho * eq_dag;
                acc_id += x.scale(c.c_id + c.c_keep) + y.scale(c.c_id);
                acc_rho += y.scale(c.c_keep);
            }
            (acc_id, acc_rho)
        })
        .collect();

    let mut b_id = CMatrix::zeros(dim, dim);
    let mut b_rho = CMatrix::zeros(dim, dim);
    for (pi, pr) in partials {
        b_id += pi;
        b_rho += pr;
    }
    Ok(AveragedState { b_id, b_rho, d })
}

fn check_pure_system_state(rho_s: &CMatrix, d: usize) -> Result<()> {
    if rho_s.nrows() != d || rho_s.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho_s.nrows(),
        });
    }
    let tr = rho_s.trace();
    if (tr.re - 1.0).abs() > PURITY_TOL || tr.im.abs() > PURITY_TOL {
        return Err(Error::NotNormalized(tr.re));
    }
    let purity = trace_product(rho_s, rho_s).re;
    if (purity - 1.0).abs() > PURITY_TOL {
        return Err(Error::NotPure(purity));
    }
    Ok(())
}

/// Survival probability `tr(E[ρ_sys] ρ_s) = tr(B_id)/d + tr(B_rho) tr(ρ_s²)`.
pub fn rb_output(state: &AveragedState, rho_s: &CMatrix) -> Result<f64> {
    check_pure_system_state(rho_s, state.d)?;
    let purity = trace_product(rho_s, rho_s).re;
    Ok(state.b_id.trace().re / state.d as f64 + state.b_rho.trace().re * purity)
}

/// Replaces the bath by `ρ_env` while keeping the weight on each shape.
pub fn refresh_env(state: &AveragedState, rho_env: &EnvState) -> AveragedState {
    let rho = rho_env.matrix();
    AveragedState {
        b_id: rho.scale(state.b_id.trace().re),
        b_rho: rho.scale(state.b_rho.trace().re),
        d: state.d,
    }
}

fn require_single_qubit(model: &SpinBosonModel, what: &str) -> Result<()> {
    if model.n_qubits() != 1 {
        return Err(Error::Unsupported(format!(
            "{what} is only available for a single qubit"
        )));
    }
    Ok(())
}

fn check_env(model: &SpinBosonModel, rho_env: &EnvState) -> Result<()> {
    if rho_env.dim() != model.env_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.env_dim(),
            found: rho_env.dim(),
        });
    }
    Ok(())
}

/// `(1 + 2 tr(cos((H_0 - H_1) dt) ρ_env)) / 3`.
pub fn markovian_rate_closed(model: &SpinBosonModel, rho_env: &EnvState) -> Result<f64> {
    require_single_qubit(model, "the Markovian closed form")?;
    check_env(model, rho_env)?;
    let c = model.delta_cos_op()?;
    Ok((1.0 + 2.0 * rho_env.expectation(&c).re) / 3.0)
}

/// `½ + ½ ((1 + 2⟨cos((H_0 - H_1) dt)⟩) / 3)^k`.
///
/// Exact only when `H_0` and `H_1` commute (a static bath, `ω = 0`);
/// otherwise [`markovian_rate_exact`] gives the rate the refreshed engine
/// actually follows.
pub fn markovian_fidelity_closed(model: &SpinBosonModel, rho_env: &EnvState, k: usize) -> Result<f64> {
    let rate = markovian_rate_closed(model, rho_env)?;
    Ok(0.5 + 0.5 * rate.powi(k as i32))
}

/// Per-layer contraction of the `ρ_s` weight with a refreshed bath,
/// `Σ_{p,q} c_keep(δ_pq) tr(E_p ρ_env E_q†)`. For one qubit this is
/// `(1 + 2 Re tr(E_1† E_0 ρ_env)) / 3`.
pub fn markovian_rate_exact(blocks: &EvolutionBlocks, rho_env: &EnvState) -> Result<f64> {
    let d = blocks.d();
    if rho_env.dim() != blocks.env_dim() {
        return Err(Error::DimensionMismatch {
            expected: blocks.env_dim(),
            found: rho_env.dim(),
        });
    }
    let e = blocks.as_slice();
    let mut rate = 0.0;
    for (p, ep) in e.iter().enumerate() {
        let left = ep * rho_env.matrix();
        for (q, eq) in e.iter().enumerate() {
            let c = twirl_coeffs(p == q, d);
            rate += c.c_keep * trace_product(&left, &eq.adjoint()).re;
        }
    }
    Ok(rate)
}

/// A pair of pattern sequences indexing one trajectory term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryPair {
    pub p: Vec<ProjectorLabel>,
    pub q: Vec<ProjectorLabel>,
}

impl TrajectoryPair {
    pub fn new(p: Vec<ProjectorLabel>, q: Vec<ProjectorLabel>) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                found: q.len(),
            });
        }
        Ok(Self { p, q })
    }

    pub fn depth(&self) -> usize {
        self.p.len()
    }

    /// Number of layers with `p_j ≠ q_j`.
    pub fn hamming(&self) -> usize {
        self.p.iter().zip(&self.q).filter(|(a, b)| a != b).count()
    }

    /// Coefficient of `ρ_s` carried by this pair after twirling every layer:
    /// `Π_j c_keep(δ_j)`.
    pub fn rho_coefficient(&self, d: usize) -> f64 {
        let k = self.depth() as i32;
        let dist = self.hamming() as i32;
        let df = d as f64;
        let norm = df * df - 1.0;
        (1.0 - 1.0 / df).powi(k - dist) / norm.powi(k)
    }
}

fn pattern_sequences(d: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = d.pow(k as u32);
    (0..total).map(move |mut idx| {
        // Digit j is the pattern of layer j (layer 0 least significant).
        let mut seq = Vec::with_capacity(k);
        for _ in 0..k {
            seq.push(idx % d);
            idx /= d;
        }
        seq
    })
}

/// `E_{x_k} ··· E_{x_1}`.
fn trajectory_propagator(blocks: &[CMatrix], seq: &[usize]) -> CMatrix {
    let dim = blocks[0].nrows();
    seq.iter()
        .fold(CMatrix::identity(dim, dim), |acc, &x| &blocks[x] * acc)
}

/// Default depth guard for the trajectory sum at system dimension `d`.
pub fn default_trajectory_limit(d: usize) -> usize {
    let mut k = 0;
    while d.pow(2 * (k as u32 + 1)) <= TRAJECTORY_BUDGET {
        k += 1;
    }
    k
}

/// Survival probability as an explicit sum over every trajectory pair,
/// `1/d + Σ_{p,q} (1-1/d)^{1+k-dist}/(d²-1)^k · tr(H(p) ρ_env H(q)†)`.
pub fn trajectory_sum_fidelity(model: &SpinBosonModel, rho_env: &EnvState, k: usize) -> Result<f64> {
    trajectory_sum_fidelity_with_limit(model, rho_env, k, default_trajectory_limit(model.d()))
}

pub fn trajectory_sum_fidelity_with_limit(
    model: &SpinBosonModel,
    rho_env: &EnvState,
    k: usize,
    limit: usize,
) -> Result<f64> {
    if k > limit {
        return Err(Error::DepthLimit { requested: k, limit });
    }
    check_env(model, rho_env)?;
    let d = model.d();
    let df = d as f64;
    let blocks = model.evolution_blocks()?;
    let seqs: Vec<Vec<usize>> = pattern_sequences(d, k).collect();
    let props: Vec<CMatrix> = seqs
        .iter()
        .map(|s| trajectory_propagator(blocks.as_slice(), s))
        .collect();
    let left: Vec<CMatrix> = props.iter().map(|h| h * rho_env.matrix()).collect();
    let norm = (df * df - 1.0).powi(k as i32);

    let mut acc = 0.0;
    for (i, sp) in seqs.iter().enumerate() {
        for (j, sq) in seqs.iter().enumerate() {
            let dist = sp.iter().zip(sq).filter(|(a, b)| a != b).count() as i32;
            let w = (1.0 - 1.0 / df).powi(1 + k as i32 - dist) / norm;
            // tr(A B†) = Σ A_ij conj(B_ij)
            let overlap: Complex64 = left[i]
                .iter()
                .zip(props[j].iter())
                .map(|(a, b)| a * b.conj())
                .sum();
            acc += w * overlap.re;
        }
    }
    Ok(1.0 / df + acc)
}

/// XI-gateset closed form `½ + ½ tr(cos((H_0 - H_1) dt)^k ρ_env)` from `|+⟩`.
pub fn xi_fidelity_closed(model: &SpinBosonModel, rho_env: &EnvState, k: usize) -> Result<f64> {
    require_single_qubit(model, "the XI closed form")?;
    check_env(model, rho_env)?;
    let h0 = model.block_hamiltonian(&ProjectorLabel::new(0, 1)?)?;
    let h1 = model.block_hamiltonian(&ProjectorLabel::new(1, 1)?)?;
    let dt = model.dt();
    let ck = herm_func(&(h0 - h1), |l| Complex64::new((dt * l).cos().powi(k as i32), 0.0))?;
    Ok(0.5 + 0.5 * rho_env.expectation(&ck).re)
}

/// Mean and variance of the total photon number at one depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonPoint {
    pub depth: usize,
    pub mean: f64,
    pub variance: f64,
}

/// Photon statistics of the averaged bath state at each requested depth.
pub fn photon_statistics(
    model: &SpinBosonModel,
    rho_env: &EnvState,
    depths: &[usize],
) -> Result<Vec<PhotonPoint>> {
    check_depths(depths)?;
    check_env(model, rho_env)?;
    let blocks = model.evolution_blocks()?;
    let n = model.number_operator()?;
    let n2 = &n * &n;
    let mut state = AveragedState::initial(rho_env, model.d());
    let mut out = Vec::with_capacity(depths.len());
    let mut k = 0;
    for &depth in depths {
        while k < depth {
            state = propagate_layer(&state, &blocks)?;
            k += 1;
        }
        let rho = state.env_state();
        let mean = trace_product(&n, &rho).re;
        let second = trace_product(&n2, &rho).re;
        out.push(PhotonPoint {
            depth,
            mean,
            variance: second - mean * mean,
        });
    }
    Ok(out)
}

/// `tr(n̂ (B_id + B_rho))` after `k` averaged layers.
pub fn avg_photon_efficient(model: &SpinBosonModel, rho_env: &EnvState, k: usize) -> Result<f64> {
    Ok(photon_statistics(model, rho_env, &[k])?[0].mean)
}

/// `Σ_p d^{-k} tr(n̂ H(p) ρ_env H(p)†)` over diagonal trajectories only.
pub fn avg_photon_bruteforce(model: &SpinBosonModel, rho_env: &EnvState, k: usize) -> Result<f64> {
    let d = model.d();
    let mut limit = 0;
    while d.pow(limit as u32 + 1) <= PHOTON_BUDGET {
        limit += 1;
    }
    avg_photon_bruteforce_with_limit(model, rho_env, k, limit)
}

pub fn avg_photon_bruteforce_with_limit(
    model: &SpinBosonModel,
    rho_env: &EnvState,
    k: usize,
    limit: usize,
) -> Result<f64> {
    if k > limit {
        return Err(Error::DepthLimit { requested: k, limit });
    }
    check_env(model, rho_env)?;
    let d = model.d();
    let blocks = model.evolution_blocks()?;
    let n = model.number_operator()?;
    let weight = (d as f64).powi(-(k as i32));
    let mut acc = 0.0;
    for seq in pattern_sequences(d, k) {
        let h = trajectory_propagator(blocks.as_slice(), &seq);
        let evolved = &h * rho_env.matrix() * h.adjoint();
        acc += weight * trace_product(&n, &evolved).re;
    }
    Ok(acc)
}

/// Which averaged circuit family a decay curve describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayMode {
    NonMarkovian,
    Markovian,
    Xi,
}

pub(crate) fn check_depths(depths: &[usize]) -> Result<()> {
    if depths.is_empty() {
        return Err(Error::InvalidParameter("no depths requested".into()));
    }
    if depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "depths must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Exact averaged decay curve.
///
/// `NonMarkovian` and `Markovian` run the layer engine (the latter refreshes
/// the bath after each layer). `Xi` evaluates the XI closed form, which always
/// starts from `|+⟩`, so `rho_s` is ignored in that mode.
pub fn rb_decay(
    model: &SpinBosonModel,
    rho_s: &CMatrix,
    rho_env: &EnvState,
    depths: &[usize],
    mode: DecayMode,
) -> Result<DecayCurve> {
    check_depths(depths)?;
    check_env(model, rho_env)?;
    let values = match mode {
        DecayMode::NonMarkovian | DecayMode::Markovian => {
            check_pure_system_state(rho_s, model.d())?;
            let blocks = model.evolution_blocks()?;
            let mut state = AveragedState::initial(rho_env, model.d());
            let mut values = Vec::with_capacity(depths.len());
            let mut k = 0;
            for &depth in depths {
                while k < depth {
                    state = propagate_layer(&state, &blocks)?;
                    if mode == DecayMode::Markovian {
                        state = refresh_env(&state, rho_env);
                    }
                    k += 1;
                }
                values.push(rb_output(&state, rho_s)?);
            }
            values
        }
        DecayMode::Xi => {
            require_single_qubit(model, "the XI closed form")?;
            let c = model.delta_cos_op()?;
            let dim = model.env_dim();
            let mut power = CMatrix::identity(dim, dim);
            let mut values = Vec::with_capacity(depths.len());
            let mut k = 0;
            for &depth in depths {
                while k < depth {
                    power = &c * power;
                    k += 1;
                }
                values.push(0.5 + 0.5 * rho_env.expectation(&power).re);
            }
            values
        }
    };
    DecayCurve::new(depths.to_vec(), values, None)
}

/// Spectral radius of the `B_rho` transfer map `B ↦ Σ c_keep(δ_pq) E_p B E_q†`,
/// i.e. the asymptotic per-layer decay of the non-Markovian survival.
///
/// The map preserves Hermiticity, so it is diagonalized as a real-linear map
/// on Hermitian matrices.
pub fn nonmarkovian_envelope_rate(blocks: &EvolutionBlocks) -> Result<f64> {
    let dim = blocks.env_dim();
    let d = blocks.d();
    let n = dim * dim;
    let basis = |k: usize| -> CMatrix {
        let mut m = CMatrix::zeros(dim, dim);
        let (i, j, imag) = hermitian_coordinate(k, dim);
        if i == j {
            m[(i, i)] = ONE;
        } else if imag {
            m[(i, j)] = Complex64::new(0.0, 1.0);
            m[(j, i)] = Complex64::new(0.0, -1.0);
        } else {
            m[(i, j)] = ONE;
            m[(j, i)] = ONE;
        }
        m
    };
    let mut real_map = DMatrix::<f64>::zeros(n, n);
    for col in 0..n {
        let input = AveragedState {
            b_id: CMatrix::zeros(dim, dim),
            b_rho: basis(col),
            d,
        };
        let out = propagate_layer(&input, blocks)?.b_rho;
        for row in 0..n {
            let (i, j, imag) = hermitian_coordinate(row, dim);
            real_map[(row, col)] = if imag { out[(i, j)].im } else { out[(i, j)].re };
        }
    }
    let eig = real_map.complex_eigenvalues();
    Ok(eig.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Coordinate `k` of a Hermitian `dim × dim` matrix: diagonal entries first,
/// then real and imaginary parts of the strict upper triangle.
fn hermitian_coordinate(k: usize, dim: usize) -> (usize, usize, bool) {
    if k < dim {
        return (k, k, false);
    }
    let mut r = k - dim;
    for i in 0..dim {
        for j in (i + 1)..dim {
            if r < 2 {
                return (i, j, r == 1);
            }
            r -= 2;
        }
    }
    unreachable!("coordinate {k} out of range for dimension {dim}")
}

/// Largest `|cos(λ dt)|` over eigenvectors of `H_0 - H_1` that `ρ_env`
/// populates: the asymptotic per-layer decay of the XI closed form.
pub fn xi_envelope_rate(model: &SpinBosonModel, rho_env: &EnvState) -> Result<f64> {
    require_single_qubit(model, "the XI envelope")?;
    check_env(model, rho_env)?;
    let h0 = model.block_hamiltonian(&ProjectorLabel::new(0, 1)?)?;
    let h1 = model.block_hamiltonian(&ProjectorLabel::new(1, 1)?)?;
    let (vals, vecs) = crate::fock::eigh(&(h0 - h1));
    let mut rate: f64 = 0.0;
    for (j, lambda) in vals.iter().enumerate() {
        let v = vecs.column(j);
        let pop = (v.adjoint() * rho_env.matrix() * v)[(0, 0)].re;
        if pop > 1e-14 {
            rate = rate.max((model.dt() * lambda).cos().abs());
        }
    }
    Ok(rate)
}
