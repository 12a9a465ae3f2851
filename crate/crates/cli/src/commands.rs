//! One function per subcommand. Each returns the artifacts to write; nothing
//! here touches the file system except reading representation files.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use thermospec::lengths::spectrum_on;
use thermospec::report::{count_series, estimate_series, to_json, typk_series, CsvTable};
use thermospec::reps::{contragredient_path, make_path, random_tracefree, twist_path, ContragredientData};
use thermospec::suite::{full_report, SuiteReport, PRUNE_SLACK};
use thermospec::thermo::{
    degenerate_direction_test, entropy, intersection, pressure, pressure_form, pressure_form_auto,
    renormalized_intersection, solve_entropy_by_pressure, typk_limits,
};
use thermospec::words::{cyclic_canonical, EnumOptions};
use thermospec::{LengthKind, MarkedSpectrum, Matrix, NecklaceSet, RepPath, Representation, Word};

use crate::config::{self, Directions, ExperimentConfig};

/// Named file contents, written in order by the caller.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    /// Lines for standard output.
    pub summary: Vec<String>,
    /// False when the command ran but its checks failed.
    pub passed: bool,
}

impl Artifacts {
    fn new() -> Self {
        Artifacts {
            passed: true,
            ..Default::default()
        }
    }

    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }
}

/// Report envelope: every number sits under the estimator call that made it.
#[derive(Serialize)]
struct Report {
    command: &'static str,
    seed: u64,
    representation: String,
    calls: Vec<Value>,
}

fn call<T: Serialize>(estimator: &str, result: &T) -> Value {
    json!({"estimator": estimator, "result": result})
}

/// Everything a spectral command needs, built in a fixed order from the
/// seeded generator.
struct Setup {
    base: Representation,
    rho: Representation,
    kind: LengthKind,
    rng: ChaCha8Rng,
}

fn setup(cfg: &ExperimentConfig, seed: u64, base_dir: &Path) -> Result<Setup> {
    let mut rng = config::rng(seed);
    let spec = cfg.group.spec()?;
    let (base, rho) = cfg.representation.build("representation", &mut rng, base_dir)?;
    if *rho.spec() != spec {
        bail!(
            "group: config declares {} but the representation is of {}",
            spec.describe(),
            rho.spec().describe()
        );
    }
    Ok(Setup {
        base,
        rho,
        kind: cfg.spectrum.kind()?,
        rng,
    })
}

/// Necklace set for `rho`. Surface groups are enumerated with displacement
/// pruning through the SL(2) base; lengths of `tau_d` images are fixed
/// multiples of hyperbolic ones, which sets the completeness bound.
fn working_set(base: &Representation, rho: &Representation, kind: LengthKind, max_len: usize) -> Result<NecklaceSet> {
    if !(base.spec().is_surface() && base.dim() == 2) {
        return Ok(NecklaceSet::enumerate(rho.spec(), max_len)?);
    }
    let probe = thermospec::lengths::marked_spectrum(base, LengthKind::Hyperbolic, 7.min(max_len))?;
    let bound = (max_len as f64 + 1.0) * probe.min_length_per_letter();
    let mut set = NecklaceSet::displacement_pruned(base, max_len, bound, PRUNE_SLACK, &EnumOptions::default())?;
    let factor = match kind {
        LengthKind::Hyperbolic => 1.0,
        LengthKind::Spectral => (rho.dim() as f64 - 1.0) / 2.0,
        LengthKind::Hilbert => rho.dim() as f64 - 1.0,
    };
    set.metric_bound = Some(bound * factor);
    Ok(set)
}

fn base_spectrum(s: &Setup, cfg: &ExperimentConfig) -> Result<(NecklaceSet, MarkedSpectrum)> {
    let set = working_set(&s.base, &s.rho, s.kind, cfg.spectrum.max_len)?;
    let spec = spectrum_on(&s.rho, s.kind, &set)?;
    Ok((set, spec))
}

fn spectrum_summary(spec: &MarkedSpectrum) -> Value {
    json!({
        "label": spec.label(),
        "kind": spec.kind(),
        "max_len": spec.max_len(),
        "classes": spec.len(),
        "failures": spec.failures().len(),
        "complete_cutoff": spec.complete_cutoff(),
    })
}

pub fn enumerate(cfg: &ExperimentConfig, seed: u64) -> Result<Artifacts> {
    let spec = cfg.group.spec()?;
    let max_len = cfg.spectrum.max_len;
    let set = NecklaceSet::enumerate(&spec, max_len)?;
    let mut per_length = vec![0usize; max_len + 1];
    let mut text = String::new();
    for n in &set.classes {
        per_length[n.len()] += 1;
        text.push_str(&n.to_string());
        text.push('\n');
    }
    let mut csv = CsvTable::new(&["word_length", "classes", "primitive"]);
    for (len, &count) in per_length.iter().enumerate().skip(1) {
        let primitive = set.classes.iter().filter(|n| n.len() == len && n.is_primitive()).count();
        csv.push(&[len as f64, count as f64, primitive as f64]);
    }
    let report = Report {
        command: "enumerate",
        seed,
        representation: String::new(),
        calls: vec![call(
            "enumerate_necklaces",
            &json!({"group": spec.describe(), "max_len": max_len, "classes": set.len(), "per_length": &per_length[1..]}),
        )],
    };
    let mut out = Artifacts::new();
    out.summary.push(format!("{} classes of word length <= {max_len} in {}", set.len(), spec.describe()));
    out.add("enumerate.json", to_json(&report));
    out.add("necklaces.txt", text);
    out.add("enumerate.csv", csv.render());
    Ok(out)
}

pub fn spectrum(cfg: &ExperimentConfig, seed: u64, base_dir: &Path) -> Result<Artifacts> {
    let s = setup(cfg, seed, base_dir)?;
    let (_, spec) = base_spectrum(&s, cfg)?;
    let cut = cfg.cutoffs.resolve(&spec)?;
    let report = Report {
        command: "spectrum",
        seed,
        representation: s.rho.label().into(),
        calls: vec![call("spectrum_on", &spectrum_summary(&spec))],
    };
    let mut out = Artifacts::new();
    out.summary.push(format!(
        "{} classes, complete below {:.4}, {} failures",
        spec.len(),
        spec.complete_cutoff(),
        spec.failures().len()
    ));
    out.add("spectrum.json", to_json(&report));
    out.add("spectrum.cache", spec.to_cache());
    out.add("counts.csv", count_series(&spec, &cut).render());
    Ok(out)
}

pub fn entropy_cmd(cfg: &ExperimentConfig, seed: u64, base_dir: &Path) -> Result<Artifacts> {
    let s = setup(cfg, seed, base_dir)?;
    let (_, spec) = base_spectrum(&s, cfg)?;
    let cut = cfg.cutoffs.resolve(&spec)?;
    let e = entropy(&spec, &cut)?;
    let mut out = Artifacts::new();
    out.summary.push(format!(
        "entropy {:.6} over {} classes, convergence {:.2e}",
        e.value, e.classes, e.convergence
    ));
    let report = Report {
        command: "entropy",
        seed,
        representation: s.rho.label().into(),
        calls: vec![call("spectrum_on", &spectrum_summary(&spec)), call("entropy", &e)],
    };
    out.add("entropy.json", to_json(&report));
    out.add("entropy.csv", estimate_series(&e).render());
    out.add("spectrum.cache", spec.to_cache());
    Ok(out)
}

pub fn pressure_cmd(cfg: &ExperimentConfig, seed: u64, base_dir: &Path) -> Result<Artifacts> {
    let s = setup(cfg, seed, base_dir)?;
    let (_, spec) = base_spectrum(&s, cfg)?;
    let cut = cfg.cutoffs.resolve(&spec)?;
    let c = cfg.pressure.coefficient.unwrap_or(0.0);
    let g: Vec<f64> = spec.lengths().iter().map(|l| c * l).collect();
    let p = pressure(&spec, &g, &cut)?;
    let mut out = Artifacts::new();
    out.summary.push(format!("pressure of {c} * l: {:.6}, convergence {:.2e}", p.value, p.convergence));
    let mut calls = vec![call("spectrum_on", &spectrum_summary(&spec)), call("pressure", &p)];
    out.add("pressure.csv", estimate_series(&p).render());
    if cfg.pressure.solve_root {
        let h = solve_entropy_by_pressure(&spec, &cut)?;
        out.summary.push(format!("root of P(-h l) = 0: h = {:.6}", h.value));
        calls.push(call("solve_entropy_by_pressure", &h));
    }
    let report = Report {
        command: "pressure",
        seed,
        representation: s.rho.label().into(),
        calls,
    };
    out.add("pressure.json", to_json(&report));
    Ok(out)
}

pub fn intersection_cmd(cfg: &ExperimentConfig, seed: u64, base_dir: &Path) -> Result<Artifacts> {
    let mut s = setup(cfg, seed, base_dir)?;
    let other = cfg.comparison.as_ref().context("intersection needs a [comparison] section")?;
    let (_, eta) = other.build("comparison", &mut s.rng, base_dir)?;
    let (set, a) = base_spectrum(&s, cfg)?;
    let b = spectrum_on(&eta, s.kind, &set)?;
    let cut = cfg.cutoffs.resolve(&a)?;
    let i = intersection(&a, &b, &cut)?;
    let j = renormalized_intersection(&a, &b, &cut)?;
    let mut out = Artifacts::new();
    out.summary.push(format!("I = {:.6}, J = {:.6}", i.value, j.value));
    let report = Report {
        command: "intersection",
        seed,
        representation: format!("{} vs {}", s.rho.label(), eta.label()),
        calls: vec![
            call("spectrum_on", &spectrum_summary(&a)),
            call("spectrum_on", &spectrum_summary(&b)),
            call("intersection", &i),
            call("renormalized_intersection", &j),
        ],
    };
    out.add("intersection.json", to_json(&report));
    out.add("intersection.csv", estimate_series(&i).render());
    Ok(out)
}

/// The configured path and, for random or contragredient directions, the
/// generic path through the same raw directions.
fn build_path(s: &mut Setup, cfg: &ExperimentConfig) -> Result<(RepPath, Option<RepPath>)> {
    let p = &cfg.path;
    match p.directions {
        Directions::Twist => {
            if !(s.base.spec().is_surface() && s.base.dim() == 2) {
                bail!("path.directions = \"twist\" needs a genus-2 Fuchsian representation");
            }
            let path = twist_path(&s.base, (p.twist[0], p.twist[1]), p.step)?;
            let path = match cfg.representation.tau {
                Some(d) => path.tau(d)?,
                None => path,
            };
            Ok((path, None))
        }
        Directions::Random | Directions::Contragredient => {
            if s.rho.spec().is_surface() {
                bail!("path.directions = {:?} breaks the surface relator; use \"twist\"", p.directions);
            }
            let d = s.rho.dim();
            let raw: Vec<Matrix> = (0..s.rho.spec().rank())
                .map(|_| random_tracefree(&mut s.rng, d, p.scale))
                .collect();
            let generic = make_path(&s.rho, raw.clone(), p.step)?;
            if p.directions == Directions::Random {
                return Ok((generic, None));
            }
            let data = ContragredientData::for_tau(d);
            let anti = raw.iter().map(|x| data.symmetrize(x)).collect();
            let path = contragredient_path(&s.rho, &data, anti, p.step)?;
            Ok((path, Some(generic)))
        }
    }
}

pub fn pressure_form_cmd(cfg: &ExperimentConfig, seed: u64, base_dir: &Path) -> Result<Artifacts> {
    let mut s = setup(cfg, seed, base_dir)?;
    let (path, _) = build_path(&mut s, cfg)?;
    let (set, base) = base_spectrum(&s, cfg)?;
    let cut = cfg.cutoffs.resolve(&base)?;
    let v = if cfg.path.auto_step {
        pressure_form_auto(&path, s.kind, &set, cfg.path.step, &cut)?
    } else {
        pressure_form(&path, s.kind, &set, cfg.path.step, &cut)?
    };
    let mut out = Artifacts::new();
    out.summary.push(format!("pressure form {:.6e} at step {}", v.value, v.step));
    let report = Report {
        command: "pressure-form",
        seed,
        representation: path.label().into(),
        calls: vec![call("spectrum_on", &spectrum_summary(&base)), call("pressure_form", &v)],
    };
    out.add("pressure_form.json", to_json(&report));
    Ok(out)
}

pub fn degenerate_cmd(cfg: &ExperimentConfig, seed: u64, base_dir: &Path) -> Result<Artifacts> {
    let mut s = setup(cfg, seed, base_dir)?;
    let (path, companion) = build_path(&mut s, cfg)?;
    let (set, base) = base_spectrum(&s, cfg)?;
    let cut = cfg.cutoffs.resolve(&base)?;
    let r = degenerate_direction_test(&path, s.kind, &set, cfg.path.step, &cut, companion.as_ref())?;
    let mut out = Artifacts::new();
    out.summary.push(format!(
        "max normalized first variation {:.2e}; extrapolated pressure form {:.3e}{}",
        r.max_normalized_first_variation,
        r.pressure_form_extrapolated,
        match r.ratio_to_companion {
            Some(q) => format!(", ratio to companion {q:.2e}"),
            None => String::new(),
        }
    ));
    let report = Report {
        command: "degenerate-test",
        seed,
        representation: path.label().into(),
        calls: vec![
            call("spectrum_on", &spectrum_summary(&base)),
            call("degenerate_direction_test", &r),
        ],
    };
    out.add("degenerate.json", to_json(&report));
    Ok(out)
}

pub fn typk_cmd(cfg: &ExperimentConfig, seed: u64, base_dir: &Path) -> Result<Artifacts> {
    let s = setup(cfg, seed, base_dir)?;
    let spec = s.rho.spec().clone();
    let class = |field: &str, text: &str| -> Result<_> {
        let w: Word = text.parse().with_context(|| format!("typk.{field}: cannot parse word {text:?}"))?;
        cyclic_canonical(&w, &spec).with_context(|| format!("typk.{field}: {text:?} is not a valid class"))
    };
    let alpha = class("alpha", &cfg.typk.alpha)?;
    let beta = class("beta", &cfg.typk.beta)?;
    let r = typk_limits(&s.rho, &alpha, &beta, cfg.typk.n_max)?;
    let mut out = Artifacts::new();
    out.summary.push(format!(
        "trace limits {:.6e} (projections) and {:.6e} (projection image)",
        r.trace_projections, r.trace_projection_image
    ));
    let report = Report {
        command: "typk",
        seed,
        representation: s.rho.label().into(),
        calls: vec![call("typk_limits", &r)],
    };
    out.add("typk.json", to_json(&report));
    out.add("typk.csv", typk_series(&r).render());
    Ok(out)
}

pub fn rigidity_suite(seed: u64, threads: usize) -> Result<Artifacts> {
    let report: SuiteReport = full_report(seed, threads).map_err(anyhow::Error::msg)?;
    let mut out = Artifacts::new();
    for c in &report.criteria {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        out.summary.push(format!("{tag} criterion {:>2} ({}): {}", c.id, c.name, c.summary));
    }
    out.passed = report.passed;
    out.add("rigidity_suite.json", to_json(&report));
    Ok(out)
}
