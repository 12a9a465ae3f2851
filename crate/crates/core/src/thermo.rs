//! Entropy, pressure, intersection and pressure-form estimators on marked
//! length spectra.
//!
//! Growth rates are least-squares slopes of `log sum_{R_T} l(a) e^{g(a)}`
//! against `T`. Weighting each orbit by its length cancels the `1/T` factor
//! of prime-orbit counting (`#R_T ~ e^{hT}/(hT)`), which otherwise biases
//! slopes of `log #R_T` low by about `1/T` at desk-scale cutoffs.
//!
//! Pressure is measured after tilting the potential by `s l` with `s` chosen
//! so that the tilted total at the largest cutoff equals the untilted one:
//! `P(g) = s + slope(g - s l)`. The tilt leaves a growth rate close to the
//! entropy, where the slope fit is accurate, and makes `P(g + c l) = P(g) + c`
//! hold to rounding.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::lengths::{spectrum_on, LengthError, LengthKind, MarkedSpectrum, NecklaceSet};
use crate::matnum::{eigen, eigenprojection_top, MatError, Matrix};
use crate::reps::{RepError, RepPath, Representation};
use crate::words::{GroupSpec, Necklace, WordError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermoError {
    #[error("need at least {need} increasing cutoffs, got {got}")]
    TooFewCutoffs { need: usize, got: usize },
    #[error("cutoffs must be strictly increasing and positive")]
    UnsortedCutoffs,
    #[error("cutoff {cutoff} is not below the metrically complete bound {complete}")]
    IncompleteCutoff { cutoff: f64, complete: f64 },
    #[error("only {count} classes with length <= {cutoff}; at least 10 needed")]
    InsufficientData { cutoff: f64, count: usize },
    #[error("root not bracketed in ({lo}, {hi})")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("spectra are indexed by different necklace sets")]
    MismatchedIndex,
    #[error("second difference {value:e} is within 10x of the roundoff floor {floor:e} at step {step}")]
    StepTooSmall { value: f64, floor: f64, step: f64 },
    #[error("spectrum at t = {t} has {count} failed classes")]
    PathFailures { t: f64, count: usize },
    #[error("{0} and {1} are powers of a common class")]
    NotCoprime(String, String),
    #[error("{what} is not proximal")]
    NotProximal { what: String },
    #[error("estimator needs a free group")]
    NotFree,
    #[error(transparent)]
    Length(#[from] LengthError),
    #[error(transparent)]
    Rep(#[from] RepError),
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Word(#[from] WordError),
}

/// Scalar estimate with its truncation diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThermoEstimate {
    pub estimator: String,
    pub value: f64,
    pub cutoffs: Vec<f64>,
    /// Raw per-cutoff values (e.g. `log #R_T / T`).
    pub per_cutoff: Vec<f64>,
    /// Fitted values over the growing windows `cutoffs[..k]`.
    pub window_fits: Vec<f64>,
    /// Largest relative change among the last three window fits.
    pub convergence: f64,
    /// Number of classes in `R_T` at the largest cutoff.
    pub classes: usize,
    pub failures: usize,
}

// ---------------------------------------------------------------------------
// summation

/// Neumaier compensated sum, in iteration order.
fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `log sum exp(x_i)`.
fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + neumaier(xs.iter().map(|x| (x - m).exp())).ln()
}

// ---------------------------------------------------------------------------
// cutoffs

fn check_cutoffs(cutoffs: &[f64], need: usize) -> Result<(), ThermoError> {
    if cutoffs.len() < need {
        return Err(ThermoError::TooFewCutoffs {
            need,
            got: cutoffs.len(),
        });
    }
    if cutoffs.windows(2).any(|w| !(w[0] < w[1])) || !(cutoffs[0] > 0.0) {
        return Err(ThermoError::UnsortedCutoffs);
    }
    Ok(())
}

fn check_complete(spec: &MarkedSpectrum, cutoffs: &[f64]) -> Result<(), ThermoError> {
    let complete = spec.complete_cutoff();
    let last = *cutoffs.last().unwrap();
    if !(last < complete) {
        return Err(ThermoError::IncompleteCutoff {
            cutoff: last,
            complete,
        });
    }
    for &t in cutoffs {
        let count = spec.count_upto(t);
        if count < 10 {
            return Err(ThermoError::InsufficientData { cutoff: t, count });
        }
    }
    Ok(())
}

/// Default cutoff grid: eight points over the top 30% of the complete range.
pub const DEFAULT_CUTOFF_COUNT: usize = 8;
pub const DEFAULT_CUTOFF_SPAN: f64 = 0.3;

pub fn default_cutoffs(spec: &MarkedSpectrum) -> Vec<f64> {
    auto_cutoffs(spec, DEFAULT_CUTOFF_COUNT, DEFAULT_CUTOFF_SPAN)
}

/// `count` equally spaced cutoffs ending just below the complete bound and
/// spanning the given fraction of it.
pub fn auto_cutoffs(spec: &MarkedSpectrum, count: usize, span: f64) -> Vec<f64> {
    let top = spec.complete_cutoff() * (1.0 - 1e-9);
    let bottom = top * (1.0 - span);
    (0..count)
        .map(|k| bottom + (top - bottom) * k as f64 / (count - 1) as f64)
        .collect()
}

/// Least-squares slope coefficients: `slope = sum_i c_i y_i`.
fn slope_coefficients(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    x.iter().map(|v| (v - mean) / var).collect()
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    neumaier(slope_coefficients(x).iter().zip(y).map(|(c, v)| c * v))
}

fn convergence_of(fits: &[f64]) -> f64 {
    let tail = &fits[fits.len().saturating_sub(4)..];
    tail.windows(2)
        .map(|w| ((w[1] - w[0]) / w[1]).abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// cumulative sums

/// Classes of `R_T` for each cutoff, in canonical order.
struct Cumulative {
    cutoffs: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl Cumulative {
    fn new(base: &MarkedSpectrum, cutoffs: &[f64]) -> Cumulative {
        Cumulative {
            cutoffs: cutoffs.to_vec(),
            members: cutoffs.iter().map(|&t| base.indices_upto(t)).collect(),
        }
    }

    fn top(&self) -> &[usize] {
        self.members.last().unwrap()
    }

    /// `log sum_{R_T} l e^{f}` for every cutoff.
    fn log_sums(&self, l: &[f64], f: &(dyn Fn(usize) -> f64 + Sync)) -> Vec<f64> {
        self.members
            .par_iter()
            .map(|idx| {
                let xs: Vec<f64> = idx.iter().map(|&i| l[i].ln() + f(i)).collect();
                log_sum_exp(&xs)
            })
            .collect()
    }

    /// Slopes over the growing windows `cutoffs[..k]`, `k >= 3` (or the
    /// whole list when shorter).
    fn window_slopes(&self, l: &[f64], f: &(dyn Fn(usize) -> f64 + Sync)) -> Vec<f64> {
        let y = self.log_sums(l, f);
        let m = self.cutoffs.len();
        (m.min(3)..=m).map(|k| slope(&self.cutoffs[..k], &y[..k])).collect()
    }

    /// Tilt `s` with `sum_{R_Tmax} l e^{f - s m} = sum_{R_Tmax} l`.
    fn tilt(&self, l: &[f64], f: &(dyn Fn(usize) -> f64 + Sync), m: &[f64]) -> Result<f64, ThermoError> {
        let idx = self.top();
        let target = log_sum_exp(&idx.iter().map(|&i| l[i].ln()).collect::<Vec<_>>());
        solve_decreasing(
            |s| {
                let xs: Vec<f64> = idx.iter().map(|&i| l[i].ln() + f(i) - s * m[i]).collect();
                let lse = log_sum_exp(&xs);
                let mean = neumaier(idx.iter().zip(&xs).map(|(&i, x)| m[i] * (x - lse).exp()));
                (lse - target, -mean)
            },
            0.0,
        )
    }

    /// Pressure fits of `f` over growing windows, with tilt direction `m`.
    fn pressure_fits(&self, l: &[f64], f: &(dyn Fn(usize) -> f64 + Sync), m: &[f64]) -> Result<Vec<f64>, ThermoError> {
        let s = self.tilt(l, f, m)?;
        if s == 0.0 {
            return Ok(self.window_slopes(l, f));
        }
        let tilted = |i: usize| f(i) - s * m[i];
        Ok(self.window_slopes(l, &tilted).into_iter().map(|q| s + q).collect())
    }
}

/// Root of a decreasing function given with its derivative: bracket by
/// expansion, then Newton steps safeguarded by bisection.
fn solve_decreasing(f: impl Fn(f64) -> (f64, f64), guess: f64) -> Result<f64, ThermoError> {
    let (f0, _) = f(guess);
    if f0 == 0.0 {
        return Ok(guess);
    }
    let (mut lo, mut hi);
    let mut step = 1.0;
    if f0 > 0.0 {
        lo = guess;
        hi = guess + step;
        let mut n = 0;
        while f(hi).0 > 0.0 {
            lo = hi;
            step *= 2.0;
            hi += step;
            n += 1;
            if n > 60 || !hi.is_finite() {
                return Err(ThermoError::BracketFailure { lo: guess, hi });
            }
        }
    } else {
        hi = guess;
        lo = guess - step;
        let mut n = 0;
        while f(lo).0 < 0.0 {
            hi = lo;
            step *= 2.0;
            lo -= step;
            n += 1;
            if n > 60 || !lo.is_finite() {
                return Err(ThermoError::BracketFailure { lo, hi: guess });
            }
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, d) = f(s);
        if v == 0.0 {
            return Ok(s);
        }
        if v > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - v / d;
        let next = if d < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let tol = 1e-15 * s.abs().max(1.0);
        if (next - s).abs() <= tol || hi - lo <= tol {
            return Ok(next);
        }
        s = next;
    }
    Ok(s)
}

/// Bisection for a decreasing function on `(lo, hi)`.
fn bisect_decreasing(
    f: impl Fn(f64) -> Result<f64, ThermoError>,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64, ThermoError> {
    if !(f(lo)? > 0.0 && f(hi)? < 0.0) {
        return Err(ThermoError::BracketFailure { lo, hi });
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn per_cutoff_ratios(cum: &Cumulative, g: Option<&[f64]>) -> Vec<f64> {
    cum.members
        .iter()
        .zip(&cum.cutoffs)
        .map(|(idx, t)| {
            let xs: Vec<f64> = idx.iter().map(|&i| g.map_or(0.0, |g| g[i])).collect();
            log_sum_exp(&xs) / t
        })
        .collect()
}

fn estimate(
    name: &str,
    base: &MarkedSpectrum,
    g: Option<&[f64]>,
    cutoffs: &[f64],
) -> Result<ThermoEstimate, ThermoError> {
    check_cutoffs(cutoffs, 3)?;
    check_complete(base, cutoffs)?;
    let cum = Cumulative::new(base, cutoffs);
    let l = base.lengths();
    let fits = match g {
        None => cum.window_slopes(l, &|_| 0.0),
        Some(g) => cum.pressure_fits(l, &|i| g[i], l)?,
    };
    Ok(ThermoEstimate {
        estimator: name.to_string(),
        value: *fits.last().unwrap(),
        cutoffs: cutoffs.to_vec(),
        per_cutoff: per_cutoff_ratios(&cum, g),
        convergence: convergence_of(&fits),
        window_fits: fits,
        classes: cum.top().len(),
        failures: base.failures().len(),
    })
}

/// Topological entropy: growth rate of `#R_T`.
pub fn entropy(spec: &MarkedSpectrum, cutoffs: &[f64]) -> Result<ThermoEstimate, ThermoError> {
    estimate("entropy", spec, None, cutoffs)
}

/// Topological pressure of a potential given by its periods, aligned with
/// the classes of `base`.
pub fn pressure(base: &MarkedSpectrum, g: &[f64], cutoffs: &[f64]) -> Result<ThermoEstimate, ThermoError> {
    assert_eq!(g.len(), base.len(), "potential must be defined on every class");
    estimate("pressure", base, Some(g), cutoffs)
}

/// Entropy as the root `h` of `P(-h l) = 0` on `(1e-4, 20)`, with the
/// pressure fitted over the upper half of the cutoffs only.
pub fn solve_entropy_by_pressure(spec: &MarkedSpectrum, cutoffs: &[f64]) -> Result<ThermoEstimate, ThermoError> {
    check_cutoffs(cutoffs, 3)?;
    check_complete(spec, cutoffs)?;
    let upper = &cutoffs[cutoffs.len() / 2..];
    let upper = if upper.len() < 2 { &cutoffs[cutoffs.len() - 2..] } else { upper };
    let cum = Cumulative::new(spec, upper);
    let l = spec.lengths();
    let p = |h: f64| -> Result<f64, ThermoError> {
        let f = |i: usize| -h * l[i];
        Ok(*cum.pressure_fits(l, &f, l)?.last().unwrap())
    };
    let value = bisect_decreasing(p, 1e-4, 20.0)?;
    let slope_fit = entropy(spec, cutoffs)?;
    Ok(ThermoEstimate {
        estimator: "entropy-by-pressure-root".into(),
        value,
        convergence: slope_fit.convergence.max((value - slope_fit.value).abs() / value),
        ..slope_fit
    })
}

fn same_index(a: &MarkedSpectrum, b: &MarkedSpectrum) -> Result<(), ThermoError> {
    if a.classes() != b.classes() {
        return Err(ThermoError::MismatchedIndex);
    }
    Ok(())
}

/// Orbit average of `l_B / l_A` over `R_T(A)`.
pub fn intersection(a: &MarkedSpectrum, b: &MarkedSpectrum, cutoffs: &[f64]) -> Result<ThermoEstimate, ThermoError> {
    same_index(a, b)?;
    check_cutoffs(cutoffs, 1)?;
    check_complete(a, cutoffs)?;
    let per_cutoff: Vec<f64> = cutoffs
        .iter()
        .map(|&t| {
            let idx = a.indices_upto(t);
            let n = idx.len() as f64;
            neumaier(idx.iter().map(|&i| b.lengths()[i] / a.lengths()[i])) / n
        })
        .collect();
    Ok(ThermoEstimate {
        estimator: "intersection".into(),
        value: *per_cutoff.last().unwrap(),
        cutoffs: cutoffs.to_vec(),
        convergence: convergence_of(&per_cutoff),
        window_fits: per_cutoff.clone(),
        per_cutoff,
        classes: a.count_upto(*cutoffs.last().unwrap()),
        failures: a.failures().len() + b.failures().len(),
    })
}

/// Entropy of `B` measured on the orbits of `A`: the root `h` of
/// `P_A(-h l_B) = 0`. Needs metric completeness for `A` only.
pub fn entropy_over(a: &MarkedSpectrum, b: &MarkedSpectrum, cutoffs: &[f64]) -> Result<f64, ThermoError> {
    same_index(a, b)?;
    check_cutoffs(cutoffs, 3)?;
    check_complete(a, cutoffs)?;
    let cum = Cumulative::new(a, cutoffs);
    let (la, lb) = (a.lengths(), b.lengths());
    let p = |h: f64| -> Result<f64, ThermoError> {
        let f = |i: usize| -h * lb[i];
        Ok(*cum.pressure_fits(la, &f, la)?.last().unwrap())
    };
    let guess = *cum.window_slopes(la, &|_| 0.0).last().unwrap();
    let ratio = {
        let idx = cum.top();
        neumaier(idx.iter().map(|&i| la[i])) / neumaier(idx.iter().map(|&i| lb[i]))
    };
    let centre = guess * ratio;
    bisect_decreasing(p, centre * 0.25, centre * 4.0)
}

/// `J(A, B) = (h_B / h_A) I(A, B)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RenormalizedIntersection {
    pub value: f64,
    pub entropy_a: f64,
    pub entropy_b: f64,
    pub intersection: ThermoEstimate,
}

pub fn renormalized_intersection(
    a: &MarkedSpectrum,
    b: &MarkedSpectrum,
    cutoffs: &[f64],
) -> Result<RenormalizedIntersection, ThermoError> {
    let i = intersection(a, b, cutoffs)?;
    let h_a = entropy_over(a, a, cutoffs)?;
    let h_b = entropy_over(a, b, cutoffs)?;
    Ok(RenormalizedIntersection {
        value: h_b / h_a * i.value,
        entropy_a: h_a,
        entropy_b: h_b,
        intersection: i,
    })
}

// ---------------------------------------------------------------------------
// shell estimator for the pressure form

/// Renormalized intersection in variational form over the classes of `A`
/// in the cutoff window, `S = {c : T_0 - dT < l_A(c) <= T_max}`. With
/// `mu ~ e^{-h_A l_A}` on `S` and `h_B` fixed by
/// `sum_S e^{-h_B l_B} = sum_S e^{-h_A l_A}`, Gibbs' inequality gives
/// `J = h_B <l_B>_mu / (h_A <l_A>_mu) >= 1` at every truncation, with equality iff `h_B l_B = h_A l_A` on `S`. The
/// second difference along a path is therefore a finite-truncation Hessian
/// at a genuine minimum.
pub fn renormalized_intersection_equilibrium(
    a: &MarkedSpectrum,
    b: &MarkedSpectrum,
    cutoffs: &[f64],
) -> Result<f64, ThermoError> {
    same_index(a, b)?;
    check_cutoffs(cutoffs, 3)?;
    check_complete(a, cutoffs)?;
    let lower = cutoffs[0] - (cutoffs[1] - cutoffs[0]);
    let upper = cutoffs[cutoffs.len() - 1];
    let (la, lb) = (a.lengths(), b.lengths());
    let window: Vec<usize> = (0..la.len()).filter(|&i| la[i] > lower && la[i] <= upper).collect();
    if window.len() < 10 {
        return Err(ThermoError::InsufficientData {
            cutoff: upper,
            count: window.len(),
        });
    }
    if window.iter().all(|&i| la[i] == lb[i]) {
        return Ok(1.0);
    }
    let h_a = entropy(a, cutoffs)?.value;
    let xs: Vec<f64> = window.iter().map(|&i| -h_a * la[i]).collect();
    let log_z = log_sum_exp(&xs);
    let weights: Vec<f64> = xs.iter().map(|x| (x - log_z).exp()).collect();
    let mean = |l: &[f64]| neumaier(window.iter().zip(&weights).map(|(&i, w)| w * l[i]));
    let (mean_a, mean_b) = (mean(la), mean(lb));
    let h_b = solve_decreasing(
        |h| {
            let ys: Vec<f64> = window.iter().map(|&i| -h * lb[i]).collect();
            let lse = log_sum_exp(&ys);
            let d = -neumaier(window.iter().zip(&ys).map(|(&i, y)| lb[i] * (y - lse).exp()));
            (lse - log_z, d)
        },
        h_a * mean_a / mean_b,
    )?;
    Ok(h_b * mean_b / (h_a * mean_a))
}

// ---------------------------------------------------------------------------
// pressure form

/// Second difference of `t -> J(l_0, l_t)` at `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PressureFormValue {
    pub value: f64,
    pub step: f64,
    pub path: String,
    pub kind: LengthKind,
    pub cutoffs: Vec<f64>,
    pub j_minus: f64,
    pub j_plus: f64,
    /// Roundoff floor of the second difference.
    pub floor: f64,
    pub companion: Option<f64>,
}

/// Largest step offered by the automatic step search.
pub const MAX_STEP: f64 = 5e-2;

/// Second difference from the three spectra `l_{-eps}, l_0, l_{eps}`.
pub fn pressure_form_from_spectra(
    minus: &MarkedSpectrum,
    base: &MarkedSpectrum,
    plus: &MarkedSpectrum,
    step: f64,
    cutoffs: &[f64],
    label: &str,
) -> Result<PressureFormValue, ThermoError> {
    let j_minus = renormalized_intersection_equilibrium(base, minus, cutoffs)?;
    let j_plus = renormalized_intersection_equilibrium(base, plus, cutoffs)?;
    let value = (j_minus - 2.0 + j_plus) / (step * step);
    let floor = 4.0 * f64::EPSILON * j_minus.abs().max(j_plus.abs()).max(1.0) / (step * step);
    if value != 0.0 && value.abs() < 10.0 * floor && step < MAX_STEP {
        return Err(ThermoError::StepTooSmall { value, floor, step });
    }
    Ok(PressureFormValue {
        value,
        step,
        path: label.to_string(),
        kind: base.kind(),
        cutoffs: cutoffs.to_vec(),
        j_minus,
        j_plus,
        floor,
        companion: None,
    })
}

fn path_spectrum(path: &RepPath, t: f64, kind: LengthKind, set: &NecklaceSet) -> Result<MarkedSpectrum, ThermoError> {
    let s = spectrum_on(&path.at(t)?, kind, set)?;
    if !s.failures().is_empty() {
        return Err(ThermoError::PathFailures {
            t,
            count: s.failures().len(),
        });
    }
    Ok(s)
}

/// Pressure form along a representation path.
pub fn pressure_form(
    path: &RepPath,
    kind: LengthKind,
    set: &NecklaceSet,
    step: f64,
    cutoffs: &[f64],
) -> Result<PressureFormValue, ThermoError> {
    let base = path_spectrum(path, 0.0, kind, set)?;
    let minus = path_spectrum(path, -step, kind, set)?;
    let plus = path_spectrum(path, step, kind, set)?;
    pressure_form_from_spectra(&minus, &base, &plus, step, cutoffs, path.label())
}

/// Pressure form with the step doubled from `step` while the second
/// difference is lost in roundoff, up to `MAX_STEP`.
pub fn pressure_form_auto(
    path: &RepPath,
    kind: LengthKind,
    set: &NecklaceSet,
    step: f64,
    cutoffs: &[f64],
) -> Result<PressureFormValue, ThermoError> {
    let mut eps = step;
    loop {
        match pressure_form(path, kind, set, eps, cutoffs) {
            Err(ThermoError::StepTooSmall { .. }) => eps = (2.0 * eps).min(MAX_STEP),
            other => return other,
        }
    }
}

/// Result of the degenerate-direction diagnostic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegenerateReport {
    pub path: String,
    pub kind: LengthKind,
    pub step: f64,
    pub sampled_classes: usize,
    /// Largest `|d/dt (h_t l_t(c))| / (h_0 l_0(c))` over the sample.
    pub max_normalized_first_variation: f64,
    /// Second differences at `step` and `step / 2`.
    pub pressure_form: f64,
    pub pressure_form_half_step: f64,
    /// Richardson combination of the two, free of the `O(step^2)` term.
    pub pressure_form_extrapolated: f64,
    pub companion_pressure_form: Option<f64>,
    pub companion_extrapolated: Option<f64>,
    /// Ratio of the extrapolated values.
    pub ratio_to_companion: Option<f64>,
}

/// Second difference that may legitimately vanish: a value lost in
/// roundoff is kept rather than reported as an error.
fn form_value(
    minus: &MarkedSpectrum,
    base: &MarkedSpectrum,
    plus: &MarkedSpectrum,
    step: f64,
    cutoffs: &[f64],
) -> Result<f64, ThermoError> {
    match pressure_form_from_spectra(minus, base, plus, step, cutoffs, "") {
        Ok(v) => Ok(v.value),
        Err(ThermoError::StepTooSmall { value, .. }) => Ok(value),
        Err(e) => Err(e),
    }
}

/// Second differences at `step` and `step / 2` and their Richardson
/// extrapolation `(4 v(step / 2) - v(step)) / 3`.
pub fn pressure_form_richardson(
    path: &RepPath,
    kind: LengthKind,
    set: &NecklaceSet,
    step: f64,
    cutoffs: &[f64],
) -> Result<(f64, f64, f64), ThermoError> {
    let base = path_spectrum(path, 0.0, kind, set)?;
    richardson_with_base(path, kind, set, &base, step, cutoffs)
}

fn richardson_with_base(
    path: &RepPath,
    kind: LengthKind,
    set: &NecklaceSet,
    base: &MarkedSpectrum,
    step: f64,
    cutoffs: &[f64],
) -> Result<(f64, f64, f64), ThermoError> {
    let mut v = [0.0; 2];
    for (k, eps) in [step, 0.5 * step].into_iter().enumerate() {
        let minus = path_spectrum(path, -eps, kind, set)?;
        let plus = path_spectrum(path, eps, kind, set)?;
        v[k] = form_value(&minus, base, &plus, eps, cutoffs)?;
    }
    Ok((v[0], v[1], (4.0 * v[1] - v[0]) / 3.0))
}

/// Central first differences of `h_t l_t(c)` over a sample of classes, and
/// the pressure form, optionally compared with a companion path.
pub fn degenerate_direction_test(
    path: &RepPath,
    kind: LengthKind,
    set: &NecklaceSet,
    step: f64,
    cutoffs: &[f64],
    companion: Option<&RepPath>,
) -> Result<DegenerateReport, ThermoError> {
    let base = path_spectrum(path, 0.0, kind, set)?;
    let minus = path_spectrum(path, -step, kind, set)?;
    let plus = path_spectrum(path, step, kind, set)?;
    same_index(&base, &minus)?;
    same_index(&base, &plus)?;
    let h0 = entropy_over(&base, &base, cutoffs)?;
    let hm = entropy_over(&base, &minus, cutoffs)?;
    let hp = entropy_over(&base, &plus, cutoffs)?;
    let idx = base.indices_upto(*cutoffs.last().unwrap());
    let stride = (idx.len() / 64).max(1);
    let sample: Vec<usize> = idx.iter().copied().step_by(stride).collect();
    let max_var = sample
        .iter()
        .map(|&i| {
            let d = (hp * plus.lengths()[i] - hm * minus.lengths()[i]) / (2.0 * step);
            d.abs() / (h0 * base.lengths()[i])
        })
        .fold(0.0, f64::max);
    let (coarse, fine, extrapolated) = richardson_with_base(path, kind, set, &base, step, cutoffs)?;
    let comp = match companion {
        Some(c) => Some(pressure_form_richardson(c, kind, set, step, cutoffs)?),
        None => None,
    };
    Ok(DegenerateReport {
        path: path.label().into(),
        kind,
        step,
        sampled_classes: sample.len(),
        max_normalized_first_variation: max_var,
        pressure_form: coarse,
        pressure_form_half_step: fine,
        pressure_form_extrapolated: extrapolated,
        companion_pressure_form: comp.map(|c| c.0),
        companion_extrapolated: comp.map(|c| c.2),
        ratio_to_companion: comp.map(|c| extrapolated / c.2),
    })
}

// ---------------------------------------------------------------------------
// Poincare series

/// Critical exponent of `sum exp(-s l(g))` over cyclically reduced words,
/// located where the sums over words of lengths `n - 1` and `n` coincide.
/// Each necklace of length `n` accounts for as many words as its primitive
/// period.
pub fn poincare_exponent(rho: &Representation, kind: LengthKind, max_len: usize) -> Result<ThermoEstimate, ThermoError> {
    if rho.spec().is_surface() {
        return Err(ThermoError::NotFree);
    }
    if max_len < 2 {
        return Err(ThermoError::TooFewCutoffs { need: 2, got: max_len });
    }
    let set = NecklaceSet::enumerate(rho.spec(), max_len)?;
    let spec = spectrum_on(rho, kind, &set)?;
    // per word length: (log multiplicity, length) pairs
    let mut spheres: Vec<Vec<(f64, f64)>> = vec![Vec::new(); max_len + 1];
    for (n, &l) in spec.classes().iter().zip(spec.lengths()) {
        spheres[n.len()].push(((n.primitive_period() as f64).ln(), l));
    }
    let log_sphere = |n: usize, s: f64| -> f64 {
        let xs: Vec<f64> = spheres[n].iter().map(|(m, l)| m - s * l).collect();
        log_sum_exp(&xs)
    };
    let crossing = |n: usize| -> Result<Option<f64>, ThermoError> {
        let f = |s: f64| log_sphere(n, s) - log_sphere(n - 1, s);
        if !(f(0.0) > 0.0) {
            return Ok(Some(0.0));
        }
        // first sign change; the sums cross again for large s when short
        // words are unusually long
        let mut lo = 0.0;
        while f(lo + 0.05) > 0.0 {
            lo += 0.05;
            if lo > 20.0 {
                return Ok(None);
            }
        }
        let mut hi = lo + 0.05;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(0.5 * (lo + hi)))
    };
    // short spheres need not cross at all; the longest one must
    let mut lens = Vec::new();
    let mut fits = Vec::new();
    for n in 2..=max_len {
        if let Some(v) = crossing(n)? {
            lens.push(n as f64);
            fits.push(v);
        } else if n == max_len {
            return Err(ThermoError::BracketFailure { lo: 0.0, hi: 20.0 });
        }
    }
    let value = *fits.last().unwrap();
    Ok(ThermoEstimate {
        estimator: "poincare-exponent".into(),
        value,
        cutoffs: lens,
        per_cutoff: fits.clone(),
        convergence: if value == 0.0 { 0.0 } else { convergence_of(&fits) },
        window_fits: fits,
        classes: spec.len(),
        failures: spec.failures().len(),
    })
}

// ---------------------------------------------------------------------------
// eigenprojection limits

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypkReport {
    pub alpha: String,
    pub beta: String,
    /// `Tr(p1(A) p1(B))`.
    pub trace_projections: f64,
    /// `Tr(p1(A) B)`.
    pub trace_projection_image: f64,
    /// `lambda1(A^n B^n) / (lambda1(A^n) lambda1(B^n))`, `n = 1..=n_max`.
    pub sequence_projections: Vec<f64>,
    /// `lambda1(A^n B) / lambda1(A^n)`, `n = 1..=n_max`.
    pub sequence_projection_image: Vec<f64>,
    pub residual_projections: f64,
    pub residual_projection_image: f64,
}

/// Signed top eigenvalue of a proximal matrix.
fn lambda1(m: &Matrix, what: &str) -> Result<f64, ThermoError> {
    let e = eigen(m)?;
    if !e.proximal {
        return Err(ThermoError::NotProximal { what: what.into() });
    }
    Ok(e.eigenvalues[0].re)
}

/// Compares the limits of the eigenvalue ratios with traces of
/// eigenprojections for coprime classes `alpha`, `beta`.
pub fn typk_limits(
    rho: &Representation,
    alpha: &Necklace,
    beta: &Necklace,
    n_max: usize,
) -> Result<TypkReport, ThermoError> {
    let spec: &GroupSpec = rho.spec();
    let (ra, rb) = (alpha.root(), beta.root());
    if ra == rb || ra == rb.inverse(spec) {
        return Err(ThermoError::NotCoprime(alpha.to_string(), beta.to_string()));
    }
    let a = rho.evaluate_letters(alpha.letters());
    let b = rho.evaluate_letters(beta.letters());
    let la = lambda1(&a, &alpha.to_string())?;
    let lb = lambda1(&b, &beta.to_string())?;
    let pa = eigenprojection_top(&a)?.0;
    let pb = eigenprojection_top(&b)?.0;
    let trace_pp = (&pa * &pb).trace();
    let trace_pb = (&pa * &b).trace();
    // normalised powers keep the products in range
    let an = a.scale(1.0 / la);
    let bn = b.scale(1.0 / lb);
    let mut ap = Matrix::identity(a.dim());
    let mut bp = Matrix::identity(b.dim());
    let mut seq_pp = Vec::with_capacity(n_max);
    let mut seq_pb = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        ap = &ap * &an;
        bp = &bp * &bn;
        seq_pp.push(lambda1(&(&ap * &bp), &format!("(alpha^{n} beta^{n})"))?);
        seq_pb.push(lambda1(&(&ap * &b), &format!("(alpha^{n} beta)"))?);
    }
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE);
    Ok(TypkReport {
        alpha: alpha.to_string(),
        beta: beta.to_string(),
        trace_projections: trace_pp,
        trace_projection_image: trace_pb,
        residual_projections: rel(*seq_pp.last().unwrap(), trace_pp),
        residual_projection_image: rel(*seq_pb.last().unwrap(), trace_pb),
        sequence_projections: seq_pp,
        sequence_projection_image: seq_pb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lengths::marked_spectrum;
    use crate::reps::{make_path, random_tracefree, schottky_default};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn word_spectrum(max_len: usize) -> MarkedSpectrum {
        let set = NecklaceSet::enumerate(&GroupSpec::free(2), max_len).unwrap();
        MarkedSpectrum::word_length(&set)
    }

    fn int_cutoffs(lo: usize, hi: usize) -> Vec<f64> {
        (lo..=hi).map(|t| t as f64).collect()
    }

    #[test]
    fn neumaier_is_exact_on_cancellation() {
        assert_eq!(neumaier([1e100, 1.0, -1e100].into_iter()), 1.0);
    }

    #[test]
    fn word_length_entropy_near_log3() {
        let s = word_spectrum(11);
        let cut = int_cutoffs(6, 11);
        let h = entropy(&s, &cut).unwrap();
        assert!((h.value / 3f64.ln() - 1.0).abs() < 0.02, "{}", h.value);
        for (t, v) in cut.iter().zip(&h.per_cutoff) {
            assert!((v - (s.count_upto(*t) as f64).ln() / t).abs() < 1e-14);
        }
        let r = solve_entropy_by_pressure(&s, &cut).unwrap();
        assert!((r.value / 3f64.ln() - 1.0).abs() < 0.02, "{}", r.value);
    }

    #[test]
    fn cutoff_validation() {
        let s = word_spectrum(6);
        assert!(matches!(entropy(&s, &[4.0, 5.0]), Err(ThermoError::TooFewCutoffs { .. })));
        assert!(matches!(entropy(&s, &[4.0, 5.0, 7.0]), Err(ThermoError::IncompleteCutoff { .. })));
        assert!(matches!(entropy(&s, &[1.0, 2.0, 3.0]), Err(ThermoError::InsufficientData { .. })));
        assert!(matches!(entropy(&s, &[3.0, 5.0, 4.0]), Err(ThermoError::UnsortedCutoffs)));
    }

    #[test]
    fn exact_scalings() {
        let rho = schottky_default(9.0).unwrap();
        let a = marked_spectrum(&rho, LengthKind::Spectral, 8).unwrap();
        let cut = default_cutoffs(&a);
        let h = entropy(&a, &cut).unwrap().value;
        let c = 2.5;
        let ac = a.scaled(c);
        let cut_c: Vec<f64> = cut.iter().map(|t| t * c).collect();
        let hc = entropy(&ac, &cut_c).unwrap().value;
        assert!((hc - h / c).abs() <= 1e-12 * h);
        let zero = vec![0.0; a.len()];
        let p0 = pressure(&a, &zero, &cut).unwrap();
        let e = entropy(&a, &cut).unwrap();
        assert_eq!(p0.value, e.value);
        assert_eq!(p0.per_cutoff, e.per_cutoff);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        use rand::Rng;
        let g: Vec<f64> = a.lengths().iter().map(|l| rng.gen_range(-0.3..0.1) * l).collect();
        let pg = pressure(&a, &g, &cut).unwrap().value;
        let shifted: Vec<f64> = g.iter().zip(a.lengths()).map(|(x, l)| x + 0.7 * l).collect();
        let ps = pressure(&a, &shifted, &cut).unwrap().value;
        assert!((ps - pg - 0.7).abs() <= 1e-12);
        let mhl: Vec<f64> = a.lengths().iter().map(|l| -h * l).collect();
        assert!(pressure(&a, &mhl, &cut).unwrap().value.abs() < 0.05);
        let i = intersection(&a, &a, &cut).unwrap();
        assert!(i.per_cutoff.iter().all(|&v| v == 1.0));
        let ic = intersection(&a, &ac, &cut).unwrap();
        assert!(ic.per_cutoff.iter().all(|&v| (v - c).abs() <= 1e-12));
        assert_eq!(renormalized_intersection(&a, &a, &cut).unwrap().value, 1.0);
        assert!((renormalized_intersection(&a, &ac, &cut).unwrap().value - 1.0).abs() <= 1e-12);
        assert_eq!(renormalized_intersection_equilibrium(&a, &a, &cut).unwrap(), 1.0);
        let r = solve_entropy_by_pressure(&a, &cut).unwrap().value;
        let rc = solve_entropy_by_pressure(&ac, &cut_c).unwrap().value;
        assert!((rc - r / c).abs() <= 1e-6 * r / c);
    }

    #[test]
    fn mismatched_index_rejected() {
        let a = word_spectrum(6);
        let b = word_spectrum(5);
        assert_eq!(intersection(&a, &b, &[5.0]).unwrap_err(), ThermoError::MismatchedIndex);
    }

    #[test]
    fn constant_path_has_zero_form() {
        let rho = schottky_default(9.0).unwrap().tau(3).unwrap();
        let set = NecklaceSet::enumerate(rho.spec(), 7).unwrap();
        let path = make_path(&rho, vec![Matrix::zeros(3); 2], 0.01).unwrap();
        let base = spectrum_on(&rho, LengthKind::Spectral, &set).unwrap();
        let cut = default_cutoffs(&base);
        let v = pressure_form(&path, LengthKind::Spectral, &set, 0.01, &cut).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn generic_path_has_positive_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = schottky_default(9.0).unwrap().tau(3).unwrap();
        let set = NecklaceSet::enumerate(rho.spec(), 12).unwrap();
        let dirs = (0..2).map(|_| random_tracefree(&mut rng, 3, 1.0)).collect();
        let path = make_path(&rho, dirs, 0.01).unwrap();
        let base = spectrum_on(&rho, LengthKind::Spectral, &set).unwrap();
        let cut = default_cutoffs(&base);
        let v1 = pressure_form(&path, LengthKind::Spectral, &set, 0.01, &cut).unwrap().value;
        let v2 = pressure_form(&path, LengthKind::Spectral, &set, 0.005, &cut).unwrap().value;
        assert!(v1 > 0.0 && v2 > 0.0);
        assert!((v1 - v2).abs() <= 0.2 * v2, "{v1} {v2}");
    }

    #[test]
    fn poincare_cyclic_and_schottky() {
        use crate::matnum::BoundaryPoint::*;
        let (cyc, _) = crate::reps::schottky_sl2(&[4.0], &[(Finite(0.0), Infinity)]).unwrap();
        assert_eq!(poincare_exponent(&cyc, LengthKind::Spectral, 8).unwrap().value, 0.0);
        let rho = schottky_default(9.0).unwrap();
        let p = poincare_exponent(&rho, LengthKind::Spectral, 14).unwrap();
        let s = marked_spectrum(&rho, LengthKind::Spectral, 14).unwrap();
        let h = entropy(&s, &default_cutoffs(&s)).unwrap();
        assert!((p.value - h.value).abs() <= 0.05 * h.value, "{} {}", p.value, h.value);
    }

    #[test]
    fn typk_diagonal_oracle() {
        let spec = GroupSpec::free(2);
        let g = Matrix::from_rows(&[&[1.0, 0.4], &[0.3, 1.5]]);
        let b = &(&g * &Matrix::diag(&[3.0, 1.0 / 3.0])) * &g.inverse().unwrap();
        let rho = Representation::new(spec.clone(), vec![Matrix::diag(&[2.0, 0.5]), b], "diag").unwrap();
        let alpha = crate::words::cyclic_canonical(&"a".parse().unwrap(), &spec).unwrap();
        let beta = crate::words::cyclic_canonical(&"b".parse().unwrap(), &spec).unwrap();
        let r = typk_limits(&rho, &alpha, &beta, 30).unwrap();
        let oracle = g[(0, 0)] * g[(1, 1)] / g.det();
        assert!((r.trace_projections - oracle).abs() < 1e-12);
        assert!(r.residual_projections < 1e-6);
        assert!(r.residual_projection_image < 1e-6);
        assert!(matches!(
            typk_limits(&rho, &alpha, &alpha, 30),
            Err(ThermoError::NotCoprime(..))
        ));
    }

    #[test]
    fn equilibrium_intersection_is_at_least_one() {
        let rho = schottky_default(9.0).unwrap();
        let set = NecklaceSet::enumerate(rho.spec(), 9).unwrap();
        let a = spectrum_on(&rho, LengthKind::Spectral, &set).unwrap();
        let cut = default_cutoffs(&a);
        assert_eq!(renormalized_intersection_equilibrium(&a, &a, &cut).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..4 {
            let dirs = (0..2).map(|_| random_tracefree(&mut rng, 2, 0.3)).collect();
            let eta = make_path(&rho, dirs, 0.1).unwrap().at(0.1).unwrap();
            let b = spectrum_on(&eta, LengthKind::Spectral, &set).unwrap();
            let j = renormalized_intersection_equilibrium(&a, &b, &cut).unwrap();
            assert!(j >= 1.0 - 1e-12, "{j}");
        }
    }

    proptest::proptest! {
        #[test]
        fn gibbs_form_never_below_one(c in 0.2f64..5.0, bump in proptest::collection::vec(-0.5f64..0.5, 16)) {
            let a = word_spectrum(8);
            let cut = int_cutoffs(5, 8);
            // an arbitrary positive reweighting of the word lengths
            let lb: Vec<f64> = a.lengths().iter().enumerate().map(|(i, l)| c * l * (1.0 + 0.5 * bump[i % 16])).collect();
            let b = a.with_lengths(lb);
            let j = renormalized_intersection_equilibrium(&a, &b, &cut).unwrap();
            proptest::prop_assert!(j >= 1.0 - 1e-12, "{}", j);
        }
    }
}
