//! Experiment configuration: TOML with fixed sections, unknown keys rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use thermospec::matnum::BoundaryPoint;
use thermospec::reps::{fuchsian_regular, random_schottky, schottky_default, schottky_sl2};
use thermospec::thermo::{auto_cutoffs, DEFAULT_CUTOFF_COUNT, DEFAULT_CUTOFF_SPAN};
use thermospec::{GroupSpec, LengthKind, MarkedSpectrum, Representation};

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub group: GroupConfig,
    pub representation: RepConfig,
    /// Second representation, for `intersection`.
    pub comparison: Option<RepConfig>,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub cutoffs: CutoffConfig,
    #[serde(default)]
    pub pressure: PressureConfig,
    #[serde(default)]
    pub path: PathConfig,
    #[serde(default)]
    pub typk: TypkConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKindConfig {
    #[default]
    Free,
    SurfaceGenus2,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub kind: GroupKindConfig,
    /// Rank of a free group.
    pub rank: Option<usize>,
}

impl GroupConfig {
    pub fn spec(&self) -> Result<GroupSpec> {
        Ok(match self.kind {
            GroupKindConfig::Free => GroupSpec::free(self.rank.context("group.rank is required for a free group")?),
            GroupKindConfig::SurfaceGenus2 => {
                if self.rank.is_some() {
                    bail!("group.rank does not apply to the genus-2 surface group");
                }
                GroupSpec::surface_genus2()
            }
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builder {
    /// Rank-2 Schottky group with axes `(-1, 1)` and `(inf, 0)`.
    #[default]
    SchottkyDefault,
    /// Schottky group from explicit multipliers and axes.
    Schottky,
    /// Random certified Schottky group drawn from the seed.
    RandomSchottky,
    /// Genus-2 Fuchsian group of the regular octagon.
    FuchsianRegular,
    /// Representation in the plain-text format of `Representation::to_text`.
    File,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RepConfig {
    pub builder: Builder,
    pub lambda: Option<f64>,
    pub multipliers: Option<Vec<f64>>,
    /// Axis endpoints `[repelling, attracting]`; `inf` is the point at infinity.
    pub axes: Option<Vec<[f64; 2]>>,
    pub lambda_range: Option<[f64; 2]>,
    pub rank: Option<usize>,
    pub file: Option<PathBuf>,
    /// Compose with the irreducible representation `tau_d`.
    pub tau: Option<usize>,
}

fn boundary(x: f64) -> BoundaryPoint {
    if x.is_infinite() {
        BoundaryPoint::Infinity
    } else {
        BoundaryPoint::Finite(x)
    }
}

impl RepConfig {
    /// The SL(2) (or file) representation before `tau`.
    pub fn build_base(&self, section: &str, rng: &mut ChaCha8Rng, base_dir: &Path) -> Result<Representation> {
        let need = |field: &str| format!("{section}.{field} is required for builder {:?}", self.builder);
        let rep = match self.builder {
            Builder::SchottkyDefault => schottky_default(self.lambda.with_context(|| need("lambda"))?)?,
            Builder::Schottky => {
                let mults = self.multipliers.clone().with_context(|| need("multipliers"))?;
                let axes: Vec<_> = self
                    .axes
                    .as_ref()
                    .with_context(|| need("axes"))?
                    .iter()
                    .map(|[r, a]| (boundary(*r), boundary(*a)))
                    .collect();
                schottky_sl2(&mults, &axes)?.0.with_label("schottky")
            }
            Builder::RandomSchottky => {
                let [lo, hi] = self.lambda_range.with_context(|| need("lambda_range"))?;
                if !(lo > 1.0 && hi >= lo) {
                    bail!("{section}.lambda_range must satisfy 1 < lo <= hi");
                }
                random_schottky(rng, self.rank.unwrap_or(2), (lo, hi))?
            }
            Builder::FuchsianRegular => fuchsian_regular()?,
            Builder::File => {
                let path = base_dir.join(self.file.as_ref().with_context(|| need("file"))?);
                let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                Representation::from_text(&text)?
            }
        };
        Ok(rep)
    }

    pub fn build(&self, section: &str, rng: &mut ChaCha8Rng, base_dir: &Path) -> Result<(Representation, Representation)> {
        let base = self.build_base(section, rng, base_dir)?;
        let rho = match self.tau {
            Some(d) if d >= 2 => base.tau(d)?,
            Some(d) => bail!("{section}.tau must be at least 2, got {d}"),
            None => base.clone(),
        };
        Ok((base, rho))
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub kind: String,
    /// Word-length cap.
    pub max_len: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            kind: "spectral".into(),
            max_len: 10,
        }
    }
}

impl SpectrumConfig {
    pub fn kind(&self) -> Result<LengthKind> {
        LengthKind::parse(&self.kind)
            .with_context(|| format!("spectrum.kind: unknown length kind {:?} (hyperbolic, spectral, hilbert)", self.kind))
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffConfig {
    /// Explicit cutoffs; otherwise `count` points over the top `span` of the
    /// metrically complete range.
    pub values: Option<Vec<f64>>,
    pub count: Option<usize>,
    pub span: Option<f64>,
}

impl CutoffConfig {
    pub fn resolve(&self, spec: &MarkedSpectrum) -> Result<Vec<f64>> {
        match &self.values {
            Some(v) => {
                if self.count.is_some() || self.span.is_some() {
                    bail!("cutoffs.values excludes cutoffs.count and cutoffs.span");
                }
                Ok(v.clone())
            }
            None => Ok(auto_cutoffs(
                spec,
                self.count.unwrap_or(DEFAULT_CUTOFF_COUNT),
                self.span.unwrap_or(DEFAULT_CUTOFF_SPAN),
            )),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PressureConfig {
    /// Potential `g = coefficient * l`; defaults to `0`.
    pub coefficient: Option<f64>,
    /// Also solve `P(-h l) = 0` for `h`.
    #[serde(default)]
    pub solve_root: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Directions {
    /// Random trace-free directions.
    #[default]
    Random,
    /// Random directions projected onto the contragredient-antisymmetric
    /// part (`tau_d` representations).
    Contragredient,
    /// Twist deformation of a genus-2 Fuchsian group.
    Twist,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub directions: Directions,
    pub scale: f64,
    pub step: f64,
    /// Double the step while the second difference is lost in roundoff.
    pub auto_step: bool,
    pub twist: [f64; 2],
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            directions: Directions::Random,
            scale: 0.5,
            step: 1e-2,
            auto_step: false,
            twist: [1.0, 0.6],
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct TypkConfig {
    pub alpha: String,
    pub beta: String,
    pub n_max: usize,
}

impl Default for TypkConfig {
    fn default() -> Self {
        TypkConfig {
            alpha: "ab".into(),
            beta: "aB".into(),
            n_max: 30,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// Parses a config; errors carry the TOML diagnostic, which names the
/// offending key and its line.
pub fn parse(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid config: {e}"))
}

pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = parse("[group]\nkind = \"free\"\nrank = 2\n[representation]\nbuilder = \"schottky-default\"\nlambda = 9.0\n").unwrap();
        assert_eq!(c.group.spec().unwrap(), GroupSpec::free(2));
        assert_eq!(c.spectrum.max_len, 10);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse("[group]\nkind = \"free\"\nrank = 2\n[representation]\nlamda = 9.0\n").unwrap_err();
        assert!(format!("{e:#}").contains("lamda"), "{e:#}");
    }

    #[test]
    fn infinite_axis_endpoint() {
        let c = parse(
            "[group]\nkind = \"free\"\nrank = 2\n[representation]\nbuilder = \"schottky\"\nmultipliers = [9.0, 9.0]\naxes = [[-1.0, 1.0], [inf, 0.0]]\n",
        )
        .unwrap();
        let (_, rho) = c.representation.build("representation", &mut rng(0), Path::new(".")).unwrap();
        assert_eq!(rho.dim(), 2);
    }
}
