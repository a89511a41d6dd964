//! Experiment subcommands. Each returns the full output text.

use std::fmt::Write;

use nmrb::analysis::{compare_models, fit_exponential, fit_power_exponential, DecayCurve, FitResult, DEFAULT_RATIO_THRESHOLD};
use nmrb::avg_channel::{
    default_trajectory_limit, markovian_fidelity_closed, photon_statistics, rb_decay, trajectory_sum_fidelity,
    xi_fidelity_closed,
};
use nmrb::fock::{CMatrix, EnvState};
use nmrb::montecarlo::{estimate_decay, witness_circuits, Gateset, SimConfig, WitnessHistogram, XI_DEPTH_LIMIT};
use serde_json::json;

use crate::config::{ExperimentConfig, Method, ModeArg};
use crate::format::{fmt_g, parse_decay_csv};
use crate::{CliError, FitChoice, ReportFormat, RunArgs};

const CONFIG_PREFIX: &str = "config: ";

/// Loads the config and applies command-line overrides.
pub fn resolve(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn header(command: &str, cfg: &ExperimentConfig) -> String {
    format!(
        "# nmrb {} {command}\n# {CONFIG_PREFIX}{}\n",
        env!("CARGO_PKG_VERSION"),
        cfg.to_json()
    )
}

/// Reads the configuration back out of a `#` header block.
pub fn config_from_comments(comments: &[String]) -> Option<Result<ExperimentConfig, CliError>> {
    comments
        .iter()
        .find_map(|c| c.strip_prefix(CONFIG_PREFIX))
        .map(ExperimentConfig::from_json)
}

fn ground_ket(d: usize) -> CMatrix {
    EnvState::pure(0, d).expect("d >= 2").into_matrix()
}

fn plus_state() -> CMatrix {
    CMatrix::from_element(2, 2, 0.5.into())
}

fn incompatible(msg: impl Into<String>) -> CliError {
    CliError::Incompatible(msg.into())
}

pub fn decay_curve(cfg: &ExperimentConfig) -> Result<DecayCurve, CliError> {
    let model = cfg.model()?;
    let rho_env = cfg.env_state(&model)?;
    let depths = cfg.depths_with_zero();
    let max_depth = *depths.last().expect("non-empty");
    let d = model.d();
    let single = cfg.n_qubits == 1;
    let exact = |values: Vec<f64>| DecayCurve::new(depths.clone(), values, None).map_err(CliError::from);

    match (cfg.method, cfg.mode) {
        (Method::Averaged, ModeArg::Nonmarkovian | ModeArg::Markovian) => {
            Ok(rb_decay(&model, &ground_ket(d), &rho_env, &depths, cfg.mode.into())?)
        }
        (Method::Averaged, ModeArg::Xi) => {
            if !single || max_depth > XI_DEPTH_LIMIT {
                return Err(incompatible(format!(
                    "averaged xi enumerates 2^k strings: single qubit and depth <= {XI_DEPTH_LIMIT} only"
                )));
            }
            let blocks = model.evolution_blocks()?;
            let values = depths
                .iter()
                .map(|&k| nmrb::montecarlo::xi_exact_average(&blocks, &rho_env, k))
                .collect::<nmrb::Result<Vec<_>>>()?;
            exact(values)
        }
        (Method::Closed, _) if !single => Err(incompatible("closed forms exist for a single qubit only")),
        (Method::Closed, ModeArg::Nonmarkovian) => Err(incompatible("no closed form for the non-Markovian decay")),
        (Method::Closed, ModeArg::Markovian) => exact(
            depths
                .iter()
                .map(|&k| markovian_fidelity_closed(&model, &rho_env, k))
                .collect::<nmrb::Result<_>>()?,
        ),
        (Method::Closed, ModeArg::Xi) => exact(
            depths
                .iter()
                .map(|&k| xi_fidelity_closed(&model, &rho_env, k))
                .collect::<nmrb::Result<_>>()?,
        ),
        (Method::Trajectory, ModeArg::Nonmarkovian) => {
            let limit = default_trajectory_limit(d);
            if max_depth > limit {
                return Err(incompatible(format!("trajectory sum is limited to depth {limit} here")));
            }
            exact(
                depths
                    .iter()
                    .map(|&k| trajectory_sum_fidelity(&model, &rho_env, k))
                    .collect::<nmrb::Result<_>>()?,
            )
        }
        (Method::Trajectory, _) => Err(incompatible("the trajectory sum covers the non-Markovian mode only")),
        (Method::Montecarlo, mode) => {
            let (gateset, rho_s) = match mode {
                ModeArg::Xi => {
                    if !single {
                        return Err(incompatible("the XI gateset acts on a single qubit"));
                    }
                    (Gateset::Xi, plus_state())
                }
                _ => {
                    let g = cfg.gateset();
                    if g == Gateset::Xi {
                        return Err(incompatible("the XI gateset is not a 2-design; use mode xi"));
                    }
                    if g == Gateset::Clifford1q && !single {
                        return Err(incompatible("clifford1q needs a single qubit"));
                    }
                    (g, ground_ket(d))
                }
            };
            let sim = SimConfig {
                samples: cfg.samples,
                depths: depths.clone(),
                seed: cfg.seed,
                markovian: mode == ModeArg::Markovian,
                gateset,
            };
            Ok(estimate_decay(&model.evolution_blocks()?, &rho_s, &rho_env, &sim)?)
        }
    }
}

pub fn decay(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let curve = decay_curve(cfg)?;
    let mut out = header("decay", cfg);
    out.push_str("depth,value,stderr\n");
    for (i, (k, v)) in curve.depths().iter().zip(curve.values()).enumerate() {
        let se = curve.stderr().map(|s| fmt_g(s[i])).unwrap_or_default();
        writeln!(out, "{k},{},{se}", fmt_g(*v)).unwrap();
    }
    Ok(out)
}

pub fn witness(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let markovian = match cfg.mode {
        ModeArg::Nonmarkovian => false,
        ModeArg::Markovian => true,
        ModeArg::Xi => return Err(incompatible("the witness runs in nonmarkovian or markovian mode")),
    };
    if !matches!(cfg.method, Method::Montecarlo | Method::Averaged) {
        return Err(incompatible("the witness is a sampled-circuit quantity"));
    }
    let model = cfg.model()?;
    let rho_env = cfg.env_state(&model)?;
    let depth = *cfg.depths.last().expect("non-empty");
    let series = witness_circuits(
        &model.evolution_blocks()?,
        &rho_env,
        cfg.circuits,
        depth,
        cfg.gateset(),
        cfg.seed,
        markovian,
    )?;
    let mut out = header("witness", cfg);
    out.push_str("circuit_id,depth,D,deltaD\n");
    for (c, s) in series.iter().enumerate() {
        for (k, dk) in s.distances.iter().enumerate() {
            let inc = if k == 0 { String::new() } else { fmt_g(s.increments[k - 1]) };
            writeln!(out, "{c},{k},{},{inc}", fmt_g(*dk)).unwrap();
        }
    }
    let hist = WitnessHistogram::from_series(&series);
    writeln!(out, "# summary: fraction of increments above threshold per depth").unwrap();
    writeln!(out, "# depth,positive_fraction").unwrap();
    for (k, f) in hist.positive_fractions().iter().enumerate() {
        writeln!(out, "# {},{}", k + 1, fmt_g(*f)).unwrap();
    }
    writeln!(out, "# overall,{}", fmt_g(hist.positive_fraction())).unwrap();
    Ok(out)
}

pub fn photon(cfg: &ExperimentConfig) -> Result<String, CliError> {
    if cfg.method != Method::Averaged || cfg.mode != ModeArg::Nonmarkovian {
        return Err(incompatible("photon statistics use the averaged non-Markovian engine"));
    }
    let cutoffs: Vec<Option<usize>> = match &cfg.cutoffs {
        Some(c) => c.iter().map(|&n| Some(n)).collect(),
        None => vec![None],
    };
    let depths = cfg.depths_with_zero();
    let mut out = header("photon", cfg);
    out.push_str("cutoff,depth,n_avg,n_var\n");
    for cutoff in cutoffs {
        let model = cfg.model_with_cutoff(cutoff)?;
        let label = cutoff.map(|c| c.to_string()).unwrap_or_else(|| {
            cfg.modes.iter().map(|m| m.cutoff.to_string()).collect::<Vec<_>>().join("/")
        });
        let rho_env = cfg.env_state(&model)?;
        for p in photon_statistics(&model, &rho_env, &depths)? {
            writeln!(out, "{label},{},{},{}", p.depth, fmt_g(p.mean), fmt_g(p.variance)).unwrap();
        }
    }
    Ok(out)
}

fn describe(fit: &FitResult) -> String {
    let names: &[&str] = match fit.model {
        nmrb::analysis::FitModel::ExpOffset => &["A", "p"],
        nmrb::analysis::FitModel::PowexpOffset => &["A", "alpha", "beta"],
    };
    let params: Vec<String> = names.iter().zip(&fit.params).map(|(n, v)| format!("{n}={}", fmt_g(*v))).collect();
    format!(
        "{} {} offset={}{} sse={} converged={} fallback={} degenerate={}",
        match fit.model {
            nmrb::analysis::FitModel::ExpOffset => "exp_offset",
            nmrb::analysis::FitModel::PowexpOffset => "powexp_offset",
        },
        params.join(" "),
        fmt_g(fit.offset),
        if fit.offset_fixed { " (fixed)" } else { "" },
        fmt_g(fit.sse),
        fit.converged,
        fit.fallback,
        fit.degenerate,
    )
}

fn without_depth_zero(curve: &DecayCurve) -> Result<DecayCurve, CliError> {
    let keep: Vec<usize> = (0..curve.len()).filter(|&i| curve.depths()[i] > 0).collect();
    DecayCurve::new(
        keep.iter().map(|&i| curve.depths()[i]).collect(),
        keep.iter().map(|&i| curve.values()[i]).collect(),
        curve.stderr().map(|s| keep.iter().map(|&i| s[i]).collect()),
    )
    .map_err(CliError::from)
}

/// Fit report. Depth 0 is dropped for the power-law model, where `k^{-α}`
/// is singular.
pub fn fit(text: &str, choice: FitChoice, offset: Option<f64>, format: ReportFormat) -> Result<String, CliError> {
    let (curve, comments) = parse_decay_csv(text)?;
    let offset = match offset {
        Some(o) => o,
        None => match config_from_comments(&comments) {
            Some(cfg) => 1.0 / (1u64 << cfg.map_err(|e| CliError::MalformedCsv(e.to_string()))?.n_qubits) as f64,
            None => 0.5,
        },
    };
    let fit_err = |e: nmrb::Error| CliError::MalformedCsv(format!("cannot fit this curve: {e}"));
    let (exp, pow, cmp) = match choice {
        FitChoice::Exp => (Some(fit_exponential(&curve, Some(offset)).map_err(fit_err)?), None, None),
        FitChoice::Powexp => (
            None,
            Some(fit_power_exponential(&without_depth_zero(&curve)?, Some(offset)).map_err(fit_err)?),
            None,
        ),
        FitChoice::Compare => {
            let c = compare_models(&without_depth_zero(&curve)?, offset, DEFAULT_RATIO_THRESHOLD).map_err(fit_err)?;
            (Some(c.exponential.clone()), Some(c.power_exponential.clone()), Some(c))
        }
    };
    Ok(match format {
        ReportFormat::Json => {
            let value = json!({
                "offset": offset,
                "exponential": exp,
                "power_exponential": pow,
                "ratio": cmp.as_ref().map(|c| c.ratio),
                "threshold": cmp.as_ref().map(|c| c.threshold),
                "class": cmp.as_ref().map(|c| c.class),
            });
            format!("{}\n", serde_json::to_string_pretty(&value).expect("report serializes"))
        }
        ReportFormat::Text => {
            let mut out = String::new();
            writeln!(out, "points: {}", curve.len()).unwrap();
            writeln!(out, "model forms: A*p^k + B and A*k^(-alpha)*exp(-beta*k) + B").unwrap();
            for f in exp.iter().chain(pow.iter()) {
                writeln!(out, "{}", describe(f)).unwrap();
            }
            if let Some(c) = cmp {
                let class = match c.class {
                    nmrb::analysis::DecayClass::Exponential => "exponential",
                    nmrb::analysis::DecayClass::NonExponential => "non-exponential",
                };
                writeln!(out, "sse_ratio={} threshold={} class={class}", fmt_g(c.ratio), fmt_g(c.threshold)).unwrap();
            }
            out
        }
    })
}
