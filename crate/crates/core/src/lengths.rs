//! Length functionals and marked length spectra.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matnum::{eigen, MatError, Matrix};
use crate::reps::{DisplacementGuard, PrefixEvaluator, RepError, Representation};
use crate::words::{
    cyclic_canonical, enumerate_guarded, EnumOptions, Generator, GroupKind, GroupSpec, Necklace,
    Word, WordError,
};

/// Largest tolerated fraction of classes whose length could not be computed.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

/// Classes evaluated per parallel work item.
const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthKind {
    /// `2 arccosh(|tr| / 2)`, SL(2) only.
    Hyperbolic,
    /// `log` of the spectral radius.
    Spectral,
    /// Spectral length of the class plus that of its inverse.
    Hilbert,
}

impl LengthKind {
    pub fn name(self) -> &'static str {
        match self {
            LengthKind::Hyperbolic => "hyperbolic",
            LengthKind::Spectral => "spectral",
            LengthKind::Hilbert => "hilbert",
        }
    }

    pub fn parse(s: &str) -> Option<LengthKind> {
        match s {
            "hyperbolic" => Some(LengthKind::Hyperbolic),
            "spectral" => Some(LengthKind::Spectral),
            "hilbert" => Some(LengthKind::Hilbert),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LengthError {
    #[error("class {class} is not proximal (gap {gap})")]
    NotProximal { class: String, gap: f64 },
    #[error("class {class} is elliptic or parabolic (|tr| = {trace})")]
    EllipticElement { class: String, trace: f64 },
    #[error("hyperbolic length needs a 2-dimensional representation, got {0}")]
    WrongDimension(usize),
    #[error("representation group {rep} does not match necklace group {set}")]
    GroupMismatch { rep: String, set: String },
    #[error("{failed} of {total} classes failed, above the {MAX_FAILURE_FRACTION} limit")]
    TooManyFailures { failed: usize, total: usize },
    #[error("spectrum cache parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Rep(#[from] RepError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// Spectral length `log Lambda(m)`, requiring a proximal matrix.
fn spectral_of(m: &Matrix, class: &dyn Fn() -> String) -> Result<f64, LengthError> {
    let e = eigen(m)?;
    if !e.proximal {
        return Err(LengthError::NotProximal {
            class: class(),
            gap: e.gap_ratio,
        });
    }
    Ok(e.spectral_radius().ln())
}

fn hyperbolic_of(m: &Matrix, class: &dyn Fn() -> String) -> Result<f64, LengthError> {
    if m.dim() != 2 {
        return Err(LengthError::WrongDimension(m.dim()));
    }
    let tr = m.trace().abs();
    if !(tr > 2.0) {
        return Err(LengthError::EllipticElement {
            class: class(),
            trace: tr,
        });
    }
    Ok(2.0 * (0.5 * tr).acosh())
}

fn length_from_images(
    m: &Matrix,
    m_inv: Option<&Matrix>,
    kind: LengthKind,
    class: &dyn Fn() -> String,
) -> Result<f64, LengthError> {
    match kind {
        LengthKind::Hyperbolic => hyperbolic_of(m, class),
        LengthKind::Spectral => spectral_of(m, class),
        LengthKind::Hilbert => {
            let inv = m_inv.expect("hilbert length needs the inverse image");
            Ok(spectral_of(m, class)? + spectral_of(inv, class)?)
        }
    }
}

fn inverse_letters(w: &[Generator]) -> Vec<Generator> {
    w.iter().rev().map(|g| g.inverse()).collect()
}

/// Length of a single class.
pub fn length_of(rho: &Representation, w: &Necklace, kind: LengthKind) -> Result<f64, LengthError> {
    if kind == LengthKind::Hyperbolic && rho.dim() != 2 {
        return Err(LengthError::WrongDimension(rho.dim()));
    }
    let m = rho.evaluate_letters(w.letters());
    let inv = (kind == LengthKind::Hilbert).then(|| rho.evaluate_letters(&inverse_letters(w.letters())));
    length_from_images(&m, inv.as_ref(), kind, &|| w.to_string())
}

/// Sorted set of necklaces together with how it was truncated.
#[derive(Clone, Debug, PartialEq)]
pub struct NecklaceSet {
    pub spec: GroupSpec,
    pub max_len: usize,
    /// Displacement bound used for pruning, if any; classes whose length
    /// exceeds it may be missing.
    pub metric_bound: Option<f64>,
    pub classes: Vec<Necklace>,
}

impl NecklaceSet {
    pub fn enumerate(spec: &GroupSpec, max_len: usize) -> Result<NecklaceSet, WordError> {
        Self::enumerate_with(spec, max_len, &EnumOptions::default())
    }

    pub fn enumerate_with(spec: &GroupSpec, max_len: usize, opts: &EnumOptions) -> Result<NecklaceSet, WordError> {
        Ok(NecklaceSet {
            spec: spec.clone(),
            max_len,
            metric_bound: None,
            classes: enumerate_guarded(spec, max_len, opts, ())?,
        })
    }

    /// Classes of word length at most `max_len` whose cyclic words move the
    /// base point by at most `t_bound + slack` along every prefix of the
    /// enumeration. Classes of length `<= t_bound` are retained provided the
    /// slack dominates the prefix overshoot, which callers should validate
    /// against a full enumeration at small `max_len`.
    pub fn displacement_pruned(
        rho: &Representation,
        max_len: usize,
        t_bound: f64,
        slack: f64,
        opts: &EnumOptions,
    ) -> Result<NecklaceSet, WordError> {
        let guard = DisplacementGuard::new(rho, t_bound + slack);
        Ok(NecklaceSet {
            spec: rho.spec().clone(),
            max_len,
            metric_bound: Some(t_bound),
            classes: enumerate_guarded(rho.spec(), max_len, opts, guard)?,
        })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Lengths of every class of a necklace set under one representation and
/// one length functional.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkedSpectrum {
    label: String,
    kind: LengthKind,
    group: GroupKind,
    max_len: usize,
    metric_bound: Option<f64>,
    classes: Vec<Necklace>,
    lengths: Vec<f64>,
    failures: Vec<(Necklace, String)>,
}

/// Spectrum over all necklaces of word length at most `max_len`.
pub fn marked_spectrum(rho: &Representation, kind: LengthKind, max_len: usize) -> Result<MarkedSpectrum, LengthError> {
    let set = NecklaceSet::enumerate(rho.spec(), max_len)?;
    spectrum_on(rho, kind, &set)
}

/// Spectrum over a given necklace set. Failed classes are recorded; more
/// than one percent of failures is an error.
pub fn spectrum_on(rho: &Representation, kind: LengthKind, set: &NecklaceSet) -> Result<MarkedSpectrum, LengthError> {
    if *rho.spec() != set.spec {
        return Err(LengthError::GroupMismatch {
            rep: rho.spec().describe(),
            set: set.spec.describe(),
        });
    }
    if kind == LengthKind::Hyperbolic && rho.dim() != 2 {
        return Err(LengthError::WrongDimension(rho.dim()));
    }
    let results: Vec<Vec<Result<f64, LengthError>>> = set
        .classes
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut fwd = PrefixEvaluator::new(rho);
            let mut inv_words: Vec<Vec<Generator>> = Vec::new();
            if kind == LengthKind::Hilbert {
                inv_words = chunk.iter().map(|n| inverse_letters(n.letters())).collect();
            }
            let mut bwd = PrefixEvaluator::new(rho);
            chunk
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    let m = fwd.eval(n.letters()).clone();
                    let inv = if kind == LengthKind::Hilbert {
                        Some(bwd.eval(&inv_words[i]).clone())
                    } else {
                        None
                    };
                    length_from_images(&m, inv.as_ref(), kind, &|| n.to_string())
                })
                .collect()
        })
        .collect();
    let mut classes = Vec::with_capacity(set.classes.len());
    let mut lengths = Vec::with_capacity(set.classes.len());
    let mut failures = Vec::new();
    for (n, r) in set.classes.iter().zip(results.into_iter().flatten()) {
        match r {
            Ok(l) if l > 0.0 && l.is_finite() => {
                classes.push(n.clone());
                lengths.push(l);
            }
            Ok(l) => failures.push((n.clone(), format!("non-positive length {l}"))),
            Err(e) => failures.push((n.clone(), e.to_string())),
        }
    }
    let total = set.classes.len();
    if failures.len() as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(LengthError::TooManyFailures {
            failed: failures.len(),
            total,
        });
    }
    Ok(MarkedSpectrum {
        label: rho.label().to_string(),
        kind,
        group: rho.spec().kind(),
        max_len: set.max_len,
        metric_bound: set.metric_bound,
        classes,
        lengths,
        failures,
    })
}

impl MarkedSpectrum {
    /// Spectrum with caller-supplied lengths (e.g. word length), in the
    /// canonical order of `set`.
    pub fn from_lengths(
        label: impl Into<String>,
        kind: LengthKind,
        set: &NecklaceSet,
        lengths: Vec<f64>,
    ) -> MarkedSpectrum {
        assert_eq!(set.classes.len(), lengths.len());
        MarkedSpectrum {
            label: label.into(),
            kind,
            group: set.spec.kind(),
            max_len: set.max_len,
            metric_bound: set.metric_bound,
            classes: set.classes.clone(),
            lengths,
            failures: Vec::new(),
        }
    }

    /// Word-length spectrum of a necklace set.
    pub fn word_length(set: &NecklaceSet) -> MarkedSpectrum {
        let lengths = set.classes.iter().map(|n| n.len() as f64).collect();
        Self::from_lengths("word-length", LengthKind::Spectral, set, lengths)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> LengthKind {
        self.kind
    }

    pub fn group(&self) -> GroupKind {
        self.group
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn classes(&self) -> &[Necklace] {
        &self.classes
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn failures(&self) -> &[(Necklace, String)] {
        &self.failures
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, n: &Necklace) -> Option<f64> {
        self.classes.binary_search(n).ok().map(|i| self.lengths[i])
    }

    /// Same classes with every length multiplied by `c`.
    pub fn scaled(&self, c: f64) -> MarkedSpectrum {
        let mut s = self.clone();
        s.lengths.iter_mut().for_each(|l| *l *= c);
        s.label = format!("{}*{c}", self.label);
        s
    }

    /// Same classes with the given lengths, e.g. a function of the classes
    /// evaluated in canonical order.
    pub fn with_lengths(&self, lengths: Vec<f64>) -> MarkedSpectrum {
        assert_eq!(lengths.len(), self.lengths.len(), "one length per class");
        let mut s = self.clone();
        s.lengths = lengths;
        s
    }

    /// Smallest ratio of length to word length over the stored classes.
    pub fn min_length_per_letter(&self) -> f64 {
        self.classes
            .iter()
            .zip(&self.lengths)
            .map(|(n, l)| l / n.len() as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// Supremum of the cutoffs `T` for which `R_T` is provably captured by
    /// the word-length truncation: classes of word length `> max_len` are
    /// estimated to have length at least `(max_len + 1) * r_min`, with
    /// `r_min` the observed minimal length per letter. Cutoffs must be
    /// strictly below this value.
    pub fn complete_cutoff(&self) -> f64 {
        let t = (self.max_len + 1) as f64 * self.min_length_per_letter();
        match self.metric_bound {
            // the pruning bound itself is attained, hence the nudge
            Some(b) => t.min(b * (1.0 + 1e-12)),
            None => t,
        }
    }

    /// Number of classes with length `<= t`.
    pub fn count_upto(&self, t: f64) -> usize {
        self.lengths.iter().filter(|&&l| l <= t).count()
    }

    /// Lengths of the classes in `R_T`, in canonical class order.
    pub fn indices_upto(&self, t: f64) -> Vec<usize> {
        (0..self.lengths.len()).filter(|&i| self.lengths[i] <= t).collect()
    }

    /// Plain-text cache: commented header, then `word,length` lines.
    pub fn to_cache(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# label: {}", self.label).unwrap();
        writeln!(s, "# kind: {}", self.kind.name()).unwrap();
        writeln!(s, "# group: {}", group_text(self.group)).unwrap();
        writeln!(s, "# max_len: {}", self.max_len).unwrap();
        if let Some(b) = self.metric_bound {
            writeln!(s, "# metric_bound: {b:.16e}").unwrap();
        }
        for (n, why) in &self.failures {
            writeln!(s, "# failure: {n}: {why}").unwrap();
        }
        for (n, l) in self.classes.iter().zip(&self.lengths) {
            writeln!(s, "{n},{l:.16e}").unwrap();
        }
        s
    }

    pub fn from_cache(text: &str) -> Result<MarkedSpectrum, LengthError> {
        let err = |line: usize, msg: String| LengthError::Parse { line, msg };
        let mut label = None;
        let mut kind = None;
        let mut group = None;
        let mut max_len = None;
        let mut metric_bound = None;
        let mut failures = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let (key, value) = rest
                    .split_once(':')
                    .ok_or_else(|| err(ln, "header line without ':'".into()))?;
                let value = value.trim();
                match key.trim() {
                    "label" => label = Some(value.to_string()),
                    "kind" => {
                        kind = Some(LengthKind::parse(value).ok_or_else(|| err(ln, format!("unknown kind {value:?}")))?)
                    }
                    "group" => group = Some(parse_group(value).ok_or_else(|| err(ln, format!("unknown group {value:?}")))?),
                    "max_len" => max_len = Some(value.parse().map_err(|_| err(ln, "bad max_len".into()))?),
                    "metric_bound" => {
                        metric_bound = Some(value.parse().map_err(|_| err(ln, "bad metric_bound".into()))?)
                    }
                    "failure" => failures.push((ln, value.to_string())),
                    other => return Err(err(ln, format!("unknown header key {other:?}"))),
                }
            } else if !line.trim().is_empty() {
                rows.push((ln, line.to_string()));
            }
        }
        let group: GroupKind = group.ok_or_else(|| err(0, "missing group".into()))?;
        let spec = GroupSpec::from_kind(group);
        let canonical = |ln: usize, w: &str| -> Result<Necklace, LengthError> {
            let word: Word = w.parse().map_err(|e: WordError| err(ln, e.to_string()))?;
            spec.check_word(&word).map_err(|e| err(ln, e.to_string()))?;
            let n = cyclic_canonical(&word, &spec).map_err(|e| err(ln, e.to_string()))?;
            if n.to_string() != w.trim() {
                return Err(err(ln, format!("{w:?} is not in canonical form")));
            }
            Ok(n)
        };
        let mut classes = Vec::with_capacity(rows.len());
        let mut lengths = Vec::with_capacity(rows.len());
        for (ln, row) in rows {
            let (w, l) = row
                .split_once(',')
                .ok_or_else(|| err(ln, "expected word,length".into()))?;
            classes.push(canonical(ln, w)?);
            lengths.push(l.trim().parse::<f64>().map_err(|_| err(ln, format!("bad length {l:?}")))?);
        }
        if classes.windows(2).any(|p| p[0] >= p[1]) {
            return Err(err(0, "classes are not in strictly increasing canonical order".into()));
        }
        let failures = failures
            .into_iter()
            .map(|(ln, v)| {
                let (w, why) = v.split_once(':').unwrap_or((v.as_str(), ""));
                Ok((canonical(ln, w.trim())?, why.trim().to_string()))
            })
            .collect::<Result<Vec<_>, LengthError>>()?;
        Ok(MarkedSpectrum {
            label: label.unwrap_or_default(),
            kind: kind.ok_or_else(|| err(0, "missing kind".into()))?,
            group,
            max_len: max_len.ok_or_else(|| err(0, "missing max_len".into()))?,
            metric_bound,
            classes,
            lengths,
            failures,
        })
    }
}

fn group_text(g: GroupKind) -> String {
    match g {
        GroupKind::Free { rank } => format!("free {rank}"),
        GroupKind::SurfaceGenus2 => "surface_genus2".into(),
    }
}

fn parse_group(s: &str) -> Option<GroupKind> {
    match s.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["surface_genus2"] => Some(GroupKind::SurfaceGenus2),
        ["free", k] => k
            .parse()
            .ok()
            .filter(|r| (1..=13).contains(r))
            .map(|rank| GroupKind::Free { rank }),
        _ => None,
    }
}
