//! Decay-curve fitting: an offset exponential `A p^k + B` and an offset
//! power-law-times-exponential `A k^{-α} e^{-βk} + B`.
//!
//! Amplitudes (and a free offset) enter linearly, so both fitters profile them
//! out with a weighted linear solve and only search the nonlinear parameters.

mod nelder_mead;

pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default `sse(exp) / sse(powexp)` above which a curve counts as
/// non-exponential.
pub const DEFAULT_RATIO_THRESHOLD: f64 = 10.0;

/// Per-point floor added to both residual sums before taking their ratio.
/// Output is written with 12 significant digits, so residuals below ~1e-12
/// per point carry no information.
pub const SSE_FLOOR_PER_POINT: f64 = 1e-24;

const VALUE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    depths: Vec<usize>,
    values: Vec<f64>,
    stderr: Option<Vec<f64>>,
}

impl DecayCurve {
    pub fn new(depths: Vec<usize>, values: Vec<f64>, stderr: Option<Vec<f64>>) -> Result<Self> {
        if depths.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: depths.len(),
                found: values.len(),
            });
        }
        if let Some(s) = &stderr {
            if s.len() != depths.len() {
                return Err(Error::DimensionMismatch {
                    expected: depths.len(),
                    found: s.len(),
                });
            }
            if s.iter().any(|e| !e.is_finite() || *e < 0.0) {
                return Err(Error::InvalidParameter("standard errors must be finite and non-negative".into()));
            }
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0 + VALUE_SLACK).contains(*v)) {
            return Err(Error::InvalidParameter(format!("survival value {v} outside [0, 1]")));
        }
        Ok(Self { depths, values, stderr })
    }

    pub fn depths(&self) -> &[usize] {
        &self.depths
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stderr(&self) -> Option<&[f64]> {
        self.stderr.as_deref()
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    /// Points sorted by depth with their least-squares weights.
    fn points(&self) -> Vec<Point> {
        let weights: Vec<f64> = match &self.stderr {
            Some(s) => {
                let floor = s.iter().copied().filter(|e| *e > 0.0).fold(f64::INFINITY, f64::min);
                if floor.is_finite() {
                    s.iter().map(|e| 1.0 / e.max(floor).powi(2)).collect()
                } else {
                    vec![1.0; s.len()]
                }
            }
            None => vec![1.0; self.len()],
        };
        let mut pts: Vec<Point> = self
            .depths
            .iter()
            .zip(&self.values)
            .zip(weights)
            .map(|((&k, &y), w)| Point { k: k as f64, y, w })
            .collect();
        pts.sort_by(|a, b| a.k.total_cmp(&b.k).then(a.y.total_cmp(&b.y)).then(a.w.total_cmp(&b.w)));
        pts
    }
}

#[derive(Debug, Clone, Copy)]
struct Point {
    k: f64,
    y: f64,
    w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `A p^k + B`, params `[A, p]`.
    ExpOffset,
    /// `A k^{-α} e^{-βk} + B`, params `[A, α, β]`.
    PowexpOffset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<f64>,
    pub offset: f64,
    pub offset_fixed: bool,
    /// Weighted residual sum of squares.
    pub sse: f64,
    pub converged: bool,
    /// The log-space fit was impossible and a nonlinear search was used.
    pub fallback: bool,
    /// Flat input: no decay information, `p` reported as 1.
    pub degenerate: bool,
}

impl FitResult {
    pub fn predict(&self, k: f64) -> f64 {
        match self.model {
            FitModel::ExpOffset => self.params[0] * self.params[1].powf(k) + self.offset,
            FitModel::PowexpOffset => {
                self.params[0] * k.powf(-self.params[1]) * (-self.params[2] * k).exp() + self.offset
            }
        }
    }
}

/// Weighted least squares for `y ≈ A φ + B` with either `B` fixed or free.
/// Returns `(A, B, sse)`.
fn profile_linear(pts: &[Point], phi: &[f64], offset: Option<f64>) -> (f64, f64, f64) {
    let (a, b) = match offset {
        Some(b) => {
            let num: f64 = pts.iter().zip(phi).map(|(p, f)| p.w * f * (p.y - b)).sum();
            let den: f64 = pts.iter().zip(phi).map(|(p, f)| p.w * f * f).sum();
            (if den > 0.0 { num / den } else { 0.0 }, b)
        }
        None => {
            let (mut sw, mut sf, mut sff, mut sy, mut sfy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (p, f) in pts.iter().zip(phi) {
                sw += p.w;
                sf += p.w * f;
                sff += p.w * f * f;
                sy += p.w * p.y;
                sfy += p.w * f * p.y;
            }
            let det = sw * sff - sf * sf;
            if det.abs() <= 1e-300 {
                (0.0, sy / sw)
            } else {
                ((sw * sfy - sf * sy) / det, (sff * sy - sf * sfy) / det)
            }
        }
    };
    let sse = pts.iter().zip(phi).map(|(p, f)| p.w * (p.y - a * f - b).powi(2)).sum();
    (a, b, sse)
}

fn exp_profile(pts: &[Point], p: f64, offset: Option<f64>) -> (f64, f64, f64) {
    let phi: Vec<f64> = pts.iter().map(|pt| p.powf(pt.k)).collect();
    profile_linear(pts, &phi, offset)
}

fn powexp_profile(pts: &[Point], alpha: f64, beta: f64, offset: Option<f64>) -> (f64, f64, f64) {
    let phi: Vec<f64> = pts.iter().map(|pt| pt.k.powf(-alpha) * (-beta * pt.k).exp()).collect();
    profile_linear(pts, &phi, offset)
}

fn polish_options() -> NelderMeadOptions {
    NelderMeadOptions {
        max_iter: 20_000,
        tol: 1e-13,
        step: 0.01,
        zero_step: 1e-3,
    }
}

/// Fits `A p^k + B`.
///
/// With a fixed offset the start comes from a weighted linear regression of
/// `ln(y - B)` on `k`; if some `y - B ≤ 0` a coarse grid over `p` is used
/// instead and `fallback` is set. In every case the linear-scale residual is
/// then minimized over `p` with `A` (and a free `B`) profiled out.
pub fn fit_exponential(curve: &DecayCurve, offset: Option<f64>) -> Result<FitResult> {
    if curve.len() < 3 {
        return Err(Error::InvalidParameter("exponential fit needs at least 3 points".into()));
    }
    let pts = curve.points();
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    if hi - lo < 1e-12 {
        let (a, b, sse) = exp_profile(&pts, 1.0, offset);
        return Ok(FitResult {
            model: FitModel::ExpOffset,
            params: vec![a, 1.0],
            offset: b,
            offset_fixed: offset.is_some(),
            sse,
            converged: true,
            fallback: false,
            degenerate: true,
        });
    }

    let log_start = offset.and_then(|b| {
        if pts.iter().any(|p| p.y - b <= 0.0) {
            return None;
        }
        let w: Vec<f64> = pts.iter().map(|p| p.w * (p.y - b).powi(2)).collect();
        let sw: f64 = w.iter().sum();
        let mk: f64 = pts.iter().zip(&w).map(|(p, w)| w * p.k).sum::<f64>() / sw;
        let ml: f64 = pts.iter().zip(&w).map(|(p, w)| w * (p.y - b).ln()).sum::<f64>() / sw;
        let skk: f64 = pts.iter().zip(&w).map(|(p, w)| w * (p.k - mk).powi(2)).sum();
        let skl: f64 = pts.iter().zip(&w).map(|(p, w)| w * (p.k - mk) * ((p.y - b).ln() - ml)).sum();
        (skk > 0.0).then(|| (skl / skk).exp())
    });
    let fallback = offset.is_some() && log_start.is_none();
    let p0 = log_start.unwrap_or_else(|| {
        (1..200)
            .map(|i| i as f64 / 200.0)
            .map(|p| (p, exp_profile(&pts, p, offset).2))
            .fold((1.0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
            .0
    });

    let nm = nelder_mead(|x| exp_profile(&pts, x[0], offset).2, &[p0], polish_options())?;
    let p = nm.x[0];
    let (a, b, sse) = exp_profile(&pts, p, offset);
    Ok(FitResult {
        model: FitModel::ExpOffset,
        params: vec![a, p],
        offset: b,
        offset_fixed: offset.is_some(),
        sse,
        converged: nm.converged,
        fallback,
        degenerate: false,
    })
}

/// Starting exponents of the multi-start power-law search.
pub const POWEXP_ALPHA_STARTS: [f64; 4] = [0.1, 0.5, 1.0, 2.0];

/// Fits `A k^{-α} e^{-βk} + B` from every start in [`POWEXP_ALPHA_STARTS`]
/// with `β` seeded by the exponential-fit rate; the smallest residual wins,
/// ties broken by lexicographic parameter order.
pub fn fit_power_exponential(curve: &DecayCurve, offset: Option<f64>) -> Result<FitResult> {
    if curve.len() < 4 {
        return Err(Error::InvalidParameter("power-exponential fit needs at least 4 points".into()));
    }
    if curve.depths().contains(&0) {
        return Err(Error::InvalidParameter("power-exponential fit needs depths >= 1".into()));
    }
    let pts = curve.points();
    let exp = fit_exponential(curve, offset)?;
    let rate = exp.params[1];
    let beta0 = if rate > 0.0 && rate < 1.0 { -rate.ln() } else { 0.0 };

    let mut best: Option<(Vec<f64>, f64, f64, bool)> = None;
    for alpha0 in POWEXP_ALPHA_STARTS {
        let nm = nelder_mead(
            |x| powexp_profile(&pts, x[0], x[1], offset).2,
            &[alpha0, beta0],
            polish_options(),
        )?;
        let (a, b, sse) = powexp_profile(&pts, nm.x[0], nm.x[1], offset);
        let params = vec![a, nm.x[0], nm.x[1]];
        let better = match &best {
            None => true,
            Some((bp, _, bsse, _)) => {
                sse < *bsse || (sse == *bsse && params.iter().zip(bp).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()) == Some(std::cmp::Ordering::Less))
            }
        };
        if better {
            best = Some((params, b, sse, nm.converged));
        }
    }
    let (params, b, sse, converged) = best.expect("at least one start");
    Ok(FitResult {
        model: FitModel::PowexpOffset,
        params,
        offset: b,
        offset_fixed: offset.is_some(),
        sse,
        converged,
        fallback: false,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayClass {
    Exponential,
    NonExponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub exponential: FitResult,
    pub power_exponential: FitResult,
    /// `(sse_exp + floor) / (sse_powexp + floor)`.
    pub ratio: f64,
    pub threshold: f64,
    pub class: DecayClass,
}

/// Fits both models with the given fixed offset and classifies the curve.
pub fn compare_models(curve: &DecayCurve, offset: f64, threshold: f64) -> Result<ModelComparison> {
    let exponential = fit_exponential(curve, Some(offset))?;
    let power_exponential = fit_power_exponential(curve, Some(offset))?;
    let floor = curve.len() as f64 * SSE_FLOOR_PER_POINT;
    let ratio = (exponential.sse + floor) / (power_exponential.sse + floor);
    let class = if ratio > threshold {
        DecayClass::NonExponential
    } else {
        DecayClass::Exponential
    };
    Ok(ModelComparison {
        exponential,
        power_exponential,
        ratio,
        threshold,
        class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(depths: impl IntoIterator<Item = usize>, f: impl Fn(f64) -> f64) -> DecayCurve {
        let depths: Vec<usize> = depths.into_iter().collect();
        let values = depths.iter().map(|&k| f(k as f64)).collect();
        DecayCurve::new(depths, values, None).unwrap()
    }

    #[test]
    fn curve_validation() {
        assert!(DecayCurve::new(vec![1, 2], vec![0.5], None).is_err());
        assert!(DecayCurve::new(vec![1], vec![1.1], None).is_err());
        assert!(DecayCurve::new(vec![1], vec![-0.1], None).is_err());
        assert!(DecayCurve::new(vec![1], vec![f64::NAN], None).is_err());
        assert!(DecayCurve::new(vec![1], vec![0.5], Some(vec![-1.0])).is_err());
        assert!(DecayCurve::new(vec![1], vec![1.0 + 1e-10], Some(vec![0.0])).is_ok());
    }

    #[test]
    fn exponential_recovery() {
        let c = curve(0..40, |k| 0.5 + 0.5 * 0.8f64.powf(k));
        let fit = fit_exponential(&c, Some(0.5)).unwrap();
        assert!((fit.params[0] - 0.5).abs() < 1e-8 && (fit.params[1] - 0.8).abs() < 1e-8);
        assert!(!fit.fallback && !fit.degenerate && fit.converged);
    }

    #[test]
    fn exponential_free_offset() {
        let c = curve(0..60, |k| 0.3 + 0.6 * 0.9f64.powf(k));
        let fit = fit_exponential(&c, None).unwrap();
        assert!((fit.offset - 0.3).abs() < 1e-7, "{fit:?}");
        assert!((fit.params[1] - 0.9).abs() < 1e-7);
    }

    #[test]
    fn exponential_fallback_when_below_offset() {
        // Dips under the assumed offset, so the logarithm is undefined.
        let c = curve(0..30, |k| 0.45 + 0.55 * 0.7f64.powf(k));
        let fit = fit_exponential(&c, Some(0.5)).unwrap();
        assert!(fit.fallback);
        assert!(fit.sse.is_finite());
        let free = fit_exponential(&c, None).unwrap();
        assert!(!free.fallback && (free.params[1] - 0.7).abs() < 1e-6);
    }

    #[test]
    fn flat_curve_is_degenerate() {
        let c = curve(0..10, |_| 1.0);
        let fit = fit_exponential(&c, Some(0.5)).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.params[1], 1.0);
        assert!((fit.params[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn too_few_points() {
        assert!(fit_exponential(&curve(1..3, |k| 0.5 + 0.5 * 0.9f64.powf(k)), Some(0.5)).is_err());
        assert!(fit_power_exponential(&curve(1..4, |k| 0.5 + 0.5 * 0.9f64.powf(k)), Some(0.5)).is_err());
        assert!(fit_power_exponential(&curve(0..10, |k| 0.5 + 0.5 * 0.9f64.powf(k)), Some(0.5)).is_err());
    }

    #[test]
    fn power_exponential_recovery() {
        let c = curve(1..=100, |k| 0.5 + 0.4 * k.powf(-0.7) * (-0.05 * k).exp());
        let fit = fit_power_exponential(&c, Some(0.5)).unwrap();
        for (got, want) in fit.params.iter().zip([0.4, 0.7, 0.05]) {
            assert!((got - want).abs() < 1e-4, "{:?}", fit.params);
        }
    }

    #[test]
    fn nested_exponential_limit() {
        let c = curve(1..=60, |k| 0.5 + 0.5 * 0.9f64.powf(k));
        let fit = fit_power_exponential(&c, Some(0.5)).unwrap();
        assert!(fit.params[1].abs() < 1e-4, "{:?}", fit.params);
        assert!((fit.params[2] + 0.9f64.ln()).abs() < 1e-4);
    }

    #[test]
    fn weighted_fit_uses_stderr() {
        let depths: Vec<usize> = (0..20).collect();
        let mut values: Vec<f64> = depths.iter().map(|&k| 0.5 + 0.5 * 0.85f64.powi(k as i32)).collect();
        values[10] += 0.05;
        let mut stderr = vec![1e-4; 20];
        stderr[0] = 0.0;
        stderr[10] = 1e3;
        let c = DecayCurve::new(depths, values, Some(stderr)).unwrap();
        let fit = fit_exponential(&c, Some(0.5)).unwrap();
        assert!((fit.params[1] - 0.85).abs() < 1e-6, "{:?}", fit.params);
    }

    #[test]
    fn comparison_classifies_synthetic_shapes() {
        let exp = curve(1..=100, |k| 0.5 + 0.5 * 0.9f64.powf(k));
        let cmp = compare_models(&exp, 0.5, DEFAULT_RATIO_THRESHOLD).unwrap();
        assert_eq!(cmp.class, DecayClass::Exponential);
        assert!(cmp.ratio < 2.0);
        let slow = curve(1..=100, |k| 0.5 + 0.4 * k.powf(-0.7) * (-0.05 * k).exp());
        let cmp = compare_models(&slow, 0.5, DEFAULT_RATIO_THRESHOLD).unwrap();
        assert_eq!(cmp.class, DecayClass::NonExponential);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn fits_ignore_point_order(p in 0.6f64..0.97, amp in 0.2f64..0.5, seed in any::<u64>()) {
            let depths: Vec<usize> = (1..=30).collect();
            let values: Vec<f64> = depths.iter().map(|&k| 0.5 + amp * (k as f64).powf(-0.3) * p.powi(k as i32)).collect();
            let mut order: Vec<usize> = (0..depths.len()).collect();
            let mut s = seed;
            for i in (1..order.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (s >> 33) as usize % (i + 1));
            }
            let shuffled = DecayCurve::new(
                order.iter().map(|&i| depths[i]).collect(),
                order.iter().map(|&i| values[i]).collect(),
                None,
            ).unwrap();
            let sorted = DecayCurve::new(depths, values, None).unwrap();
            prop_assert_eq!(fit_exponential(&sorted, Some(0.5)).unwrap(), fit_exponential(&shuffled, Some(0.5)).unwrap());
            prop_assert_eq!(fit_power_exponential(&sorted, Some(0.5)).unwrap(), fit_power_exponential(&shuffled, Some(0.5)).unwrap());
        }

        #[test]
        fn refit_is_a_fixed_point(p in 0.6f64..0.97, amp in 0.1f64..0.5) {
            let c = curve(0..50, |k| 0.5 + amp * p.powf(k));
            let fit = fit_exponential(&c, Some(0.5)).unwrap();
            let again = curve(0..50, |k| fit.predict(k));
            let refit = fit_exponential(&again, Some(0.5)).unwrap();
            for (a, b) in fit.params.iter().zip(&refit.params) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }

        #[test]
        fn powexp_refit_is_a_fixed_point(alpha in 0.2f64..1.5, beta in 0.01f64..0.2) {
            let c = curve(1..=60, |k| 0.5 + 0.4 * k.powf(-alpha) * (-beta * k).exp());
            let fit = fit_power_exponential(&c, Some(0.5)).unwrap();
            let again = curve(1..=60, |k| fit.predict(k));
            let refit = fit_power_exponential(&again, Some(0.5)).unwrap();
            for (a, b) in fit.params.iter().zip(&refit.params) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
