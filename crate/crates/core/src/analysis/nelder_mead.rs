//! Derivative-free simplex minimizer.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop once every vertex lies within `tol` (max-norm) of the best one.
    pub tol: f64,
    /// Initial simplex offsets: `step · |x0_i|`, or `zero_step` when `x0_i = 0`.
    pub step: f64,
    pub zero_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-10,
            step: 0.05,
            zero_step: 2.5e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub trace: Vec<f64>,
}

const ALPHA: f64 = 1.0;
const GAMMA: f64 = 2.0;
const RHO: f64 = 0.5;
const SIGMA: f64 = 0.5;

fn eval<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64]) -> Result<f64> {
    let v = f(x);
    if v.is_nan() {
        return Err(Error::NonFiniteObjective(x.to_vec()));
    }
    Ok(v)
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b - a)
    a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect()
}

pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: NelderMeadOptions) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty starting point".into()));
    }
    let f0 = eval(&mut f, x0)?;
    if !f0.is_finite() {
        return Err(Error::NonFiniteObjective(x0.to_vec()));
    }
    let mut simplex = vec![(x0.to_vec(), f0)];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] = if x[i] != 0.0 {
            x[i] * (1.0 + opts.step)
        } else {
            opts.zero_step
        };
        let fx = eval(&mut f, &x)?;
        simplex.push((x, fx));
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        // Stable sort keeps ties in insertion order, so runs are reproducible.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].0.clone();
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let (worst, f_worst) = simplex[n].clone();
        let f_best = simplex[0].1;
        let f_second = simplex[n - 1].1;

        let xr = combine(&centroid, &worst, -ALPHA);
        let fr = eval(&mut f, &xr)?;
        if fr < f_best {
            let xe = combine(&centroid, &worst, -GAMMA);
            let fe = eval(&mut f, &xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < f_second {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < f_worst {
                let xc = combine(&centroid, &xr, RHO);
                let fc = eval(&mut f, &xc)?;
                (xc, fc)
            } else {
                let xc = combine(&centroid, &worst, RHO);
                let fc = eval(&mut f, &xc)?;
                (xc, fc)
            };
            if fc < fr.min(f_worst) {
                simplex[n] = (xc, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x = combine(&anchor, &vertex.0, SIGMA);
                    let fx = eval(&mut f, &x)?;
                    *vertex = (x, fx);
                }
            }
        }
        let current = simplex.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        trace.push(current);
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    Ok(NelderMeadResult {
        x,
        fx,
        iterations,
        converged,
        trace,
    })
}
