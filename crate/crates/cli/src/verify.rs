//! Self-verification: every check compares two independent routes to the
//! same quantity at desk scale.

use num_complex::Complex64;

use nmrb::avg_channel::{
    avg_photon_bruteforce, haar_twirl_reference, markovian_fidelity_closed, markovian_rate_closed, propagate_layer_with,
    refresh_env, rb_output, trajectory_sum_fidelity, twirl_coeffs, xi_fidelity_closed, AveragedState, TwirlCoeffs,
};
use nmrb::fock::{thermal_state_space, trace_product, CMatrix, EnvState};
use nmrb::montecarlo::{
    clifford_1q_table, estimate_decay, haar_unitary, stream_rng, witness_histogram, xi_exact_average, Gateset,
    SimConfig, BACKFLOW_THRESHOLD,
};
use nmrb::spin_boson::SpinBosonModel;

use crate::Fault;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub tolerance: String,
    pub observed: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<CheckOutcome>,
}

impl Report {
    pub fn render(&self) -> String {
        let mut out = format!("{:<52} {:>10} {:>12}  status\n", "check", "tolerance", "observed");
        for c in &self.checks {
            out.push_str(&format!(
                "{:<52} {:>10} {:>12.3e}  {}\n",
                c.name,
                c.tolerance,
                c.observed,
                if c.passed { "PASS" } else { "FAIL" }
            ));
        }
        let failed = self.failures().len();
        out.push_str(&format!("{} checks, {} failed\n", self.checks.len(), failed));
        out
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect()
    }
}

type Rule = fn(bool, usize) -> TwirlCoeffs;

fn flipped_sign(delta: bool, d: usize) -> TwirlCoeffs {
    let c = twirl_coeffs(delta, d);
    TwirlCoeffs { c_id: -c.c_id, c_keep: c.c_keep }
}

fn at_most(name: &'static str, tol: f64, observed: f64) -> CheckOutcome {
    CheckOutcome {
        name,
        tolerance: format!("{tol:.0e}"),
        observed,
        passed: observed.is_finite() && observed <= tol,
    }
}

fn standard(omega: f64, cutoff: usize) -> SpinBosonModel {
    SpinBosonModel::single(omega, cutoff, 4.0, 0.1).expect("valid parameters")
}

fn ket0() -> CMatrix {
    EnvState::pure(0, 2).expect("valid").into_matrix()
}

fn projector(i: usize, d: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(i, i)] = 1.0.into();
    m
}

/// Engine survival (or bath state) at depths `0..=kmax` under `rule`.
fn engine_run(model: &SpinBosonModel, rho_env: &EnvState, kmax: usize, markovian: bool, rule: Rule) -> Vec<AveragedState> {
    let blocks = model.evolution_blocks().expect("valid model");
    let mut state = AveragedState::initial(rho_env, model.d());
    let mut out = vec![state.clone()];
    for _ in 0..kmax {
        state = propagate_layer_with(&state, &blocks, rule).expect("consistent dimensions");
        if markovian {
            state = refresh_env(&state, rho_env);
        }
        out.push(state.clone());
    }
    out
}

fn max_entry(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn run_battery(fault: Option<Fault>) -> Report {
    let rule: Rule = match fault {
        None => twirl_coeffs,
        Some(Fault::TwirlSign) => flipped_sign,
    };
    let mut checks = Vec::new();

    let mut law: f64 = 0.0;
    for d in [2usize, 4, 8] {
        for delta in [false, true] {
            let c = rule(delta, d);
            let want = if delta { 1.0 / d as f64 } else { 0.0 };
            law = law.max((c.c_id + c.c_keep - want).abs());
        }
    }
    checks.push(at_most("twirl coefficient trace law", 1e-15, law));

    let mut rng = stream_rng(0, 0, 0);
    let u = haar_unitary(2, &mut rng);
    let rho = &u * (projector(0, 2).scale(0.7) + projector(1, 2).scale(0.3)) * u.adjoint();
    let mut twirl: f64 = 0.0;
    for p in 0..2 {
        for q in 0..2 {
            let c = rule(p == q, 2);
            let ours = CMatrix::identity(2, 2).scale(0.5 * c.c_id) + rho.scale(c.c_keep);
            let reference = haar_twirl_reference(&projector(p, 2), &projector(q, 2), &rho).expect("square");
            twirl = twirl.max(max_entry(&(ours - reference)));
        }
    }
    checks.push(at_most("twirl coefficients vs Haar average formula", 1e-12, twirl));

    let m8 = standard(10.0, 8);
    let rho8 = thermal_state_space(m8.env(), f64::INFINITY).expect("valid");
    let run = engine_run(&m8, &rho8, 6, false, rule);
    let traj = (0..=6)
        .map(|k| {
            let v = rb_output(&run[k], &ket0()).expect("pure");
            (v - trajectory_sum_fidelity(&m8, &rho8, k).expect("within guard")).abs()
        })
        .fold(0.0, f64::max);
    checks.push(at_most("engine vs trajectory sum (k<=6, N=8)", 1e-9, traj));

    let m0 = standard(0.0, 10);
    let vac = EnvState::pure(0, 11).expect("valid");
    let run = engine_run(&m0, &vac, 100, true, rule);
    let markov = run
        .iter()
        .enumerate()
        .map(|(k, s)| (rb_output(s, &ket0()).expect("pure") - markovian_fidelity_closed(&m0, &vac, k).expect("n=1")).abs())
        .fold(0.0, f64::max);
    checks.push(at_most("refreshed engine vs Markovian closed form (w=0)", 1e-10, markov));

    let rate = markovian_rate_closed(&m0, &vac).expect("n=1");
    let gaussian = (1.0 + 2.0 * (-0.32f64).exp()) / 3.0;
    checks.push(at_most("Markovian rate vs Gaussian oracle", 1e-5, (rate - gaussian).abs()));

    let m10 = standard(10.0, 10);
    let rho10 = thermal_state_space(m10.env(), f64::INFINITY).expect("valid");
    let n_op = m10.number_operator().expect("valid");
    let run = engine_run(&m10, &rho10, 10, false, rule);
    let photon = (0..=10)
        .map(|k| {
            let engine = trace_product(&n_op, &run[k].env_state()).re;
            (engine - avg_photon_bruteforce(&m10, &rho10, k).expect("within guard")).abs()
        })
        .fold(0.0, f64::max);
    checks.push(at_most("photon number: engine vs diagonal trajectories", 1e-9, photon));

    let b0 = m0.evolution_blocks().expect("valid");
    let xi = (0..=8)
        .map(|k| (xi_exact_average(&b0, &vac, k).expect("guard") - xi_fidelity_closed(&m0, &vac, k).expect("n=1")).abs())
        .fold(0.0, f64::max);
    checks.push(at_most("XI closed form vs enumeration (w=0, k<=8)", 1e-9, xi));

    let depths = vec![1, 5, 10];
    let run = engine_run(&m10, &rho10, 10, false, rule);
    let cfg = SimConfig { samples: 400, depths: depths.clone(), seed: 1, markovian: false, gateset: Gateset::Clifford1q };
    let sampled = estimate_decay(&m10.evolution_blocks().expect("valid"), &ket0(), &rho10, &cfg).expect("valid config");
    let z = depths
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let exact = rb_output(&run[k], &ket0()).expect("pure");
            (sampled.values()[i] - exact).abs() / sampled.stderr().expect("sampled")[i]
        })
        .fold(0.0, f64::max);
    checks.push(at_most("Clifford sampling vs engine (z-score)", 3.0, z));

    let n = 20_000;
    let a = haar_unitary(2, &mut rng);
    let b = haar_unitary(2, &mut rng) + CMatrix::identity(2, 2);
    let reference = haar_twirl_reference(&a, &b, &rho).expect("square");
    let mut sum = CMatrix::zeros(2, 2);
    let mut sum_sq = [0.0f64; 4];
    let mut srng = stream_rng(0, 1, 0);
    for _ in 0..n {
        let v = haar_unitary(2, &mut srng);
        let vd = v.adjoint();
        let x = &vd * &a * &v * &rho * &vd * &b * &v;
        for (s, e) in sum_sq.iter_mut().zip(x.iter()) {
            *s += e.norm_sqr();
        }
        sum += x;
    }
    let mean = sum / Complex64::from(n as f64);
    let moment = mean
        .iter()
        .zip(reference.iter())
        .zip(sum_sq)
        .map(|((m, r), s)| {
            let se = ((s / n as f64 - m.norm_sqr()).max(0.0) / n as f64).sqrt().max(1e-12);
            (m - r).norm() / se
        })
        .fold(0.0, f64::max);
    checks.push(at_most("Haar second moment vs formula (z-score)", 3.0, moment));

    let table = clifford_1q_table().map(|t| t.len()).unwrap_or(0);
    checks.push(at_most("single-qubit Clifford group order is 24", 0.0, (table as f64 - 24.0).abs()));

    let blocks = m10.evolution_blocks().expect("valid");
    let mk = witness_histogram(&blocks, &rho10, 20, 30, Gateset::Clifford1q, 3, true).expect("valid");
    let worst = mk.per_depth.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    checks.push(at_most("Markovian witness increments", BACKFLOW_THRESHOLD, worst));

    let nm = witness_histogram(&blocks, &rho10, 20, 30, Gateset::Clifford1q, 3, false).expect("valid");
    let frac = nm.positive_fraction();
    checks.push(CheckOutcome {
        name: "non-Markovian witness backflow fraction",
        tolerance: "> 0".into(),
        observed: frac,
        passed: frac > 0.0,
    });

    Report { checks }
}
