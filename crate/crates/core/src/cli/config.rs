use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{make_interaction, InteractionKind, InteractionSpec, Offset, PinningSpec};
use crate::oracle::QuadratureScheme;
use crate::sampler::{Algorithm, Schedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    OracleValidate,
    Pinv,
    Tail,
    Twopoint,
    Sgap,
    Avoidance,
    GreenProfile,
    LemmaSuite,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::OracleValidate,
        Experiment::Pinv,
        Experiment::Tail,
        Experiment::Twopoint,
        Experiment::Sgap,
        Experiment::Avoidance,
        Experiment::GreenProfile,
        Experiment::LemmaSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::OracleValidate => "oracle-validate",
            Experiment::Pinv => "pinv",
            Experiment::Tail => "tail",
            Experiment::Twopoint => "twopoint",
            Experiment::Sgap => "sgap",
            Experiment::Avoidance => "avoidance",
            Experiment::GreenProfile => "green-profile",
            Experiment::LemmaSuite => "lemma-suite",
        }
    }

    pub fn citation(self) -> &'static str {
        match self {
            Experiment::OracleValidate => "Pinned-set representation and δ limit: sampler vs exact oracles",
            Experiment::Pinv => "Theorem: mean square height of the pinned field is finite",
            Experiment::Tail => "Theorem: e^{−C₃T²/log T}",
            Experiment::Twopoint => "Theorems: exponential decay of ⟨h_0 h_d⟩ (Gaussian, any J; general, large J)",
            Experiment::Sgap => "Theorem: var⟨α,h⟩ ≤ C₅⟨α,α⟩",
            Experiment::Avoidance => "Proposition parts 1–3",
            Experiment::GreenProfile => "Random-walk representation, log d(i,A) variance growth, exit time ≤ C N²",
            Experiment::LemmaSuite => "Appendix lemmas: comparison inequalities for conditioned fields",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    /// `gaussian`, `quartic` or `cosh`, all nearest-neighbour.
    pub interaction: String,
    /// Gaussian `Ψ(x) = coef·x²`.
    pub coef: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub l: i32,
    pub l_list: Vec<i32>,
    pub boundary: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            interaction: "gaussian".into(),
            coef: 0.5,
            kappa: 1.0,
            lambda: 1.0,
            l: 16,
            l_list: vec![8, 16, 32, 64],
            boundary: 0.0,
        }
    }
}

impl ModelSection {
    pub fn spec(&self) -> Result<InteractionSpec> {
        let kind = match self.interaction.as_str() {
            "gaussian" => InteractionKind::gaussian_nn(self.coef),
            "quartic" => InteractionKind::quartic_nn(self.kappa, self.lambda),
            "cosh" => InteractionKind::Cosh {
                kappa: self.kappa,
                offsets: Offset::nearest_neighbors(),
            },
            other => {
                return Err(Error::Config(format!(
                    "model.interaction must be gaussian, quartic or cosh, got `{other}`"
                )))
            }
        };
        make_interaction(kind)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PinningSection {
    /// `free`, `square-well` or `delta`.
    pub variant: String,
    pub strength: f64,
    pub half_width: f64,
    /// `e^J` of δ-pinning.
    pub atom_weight: f64,
}

impl Default for PinningSection {
    fn default() -> Self {
        PinningSection {
            variant: "delta".into(),
            strength: 1.0,
            half_width: 1.0,
            atom_weight: 1.0,
        }
    }
}

impl PinningSection {
    pub fn spec(&self) -> Result<PinningSpec> {
        match self.variant.as_str() {
            "free" => Ok(PinningSpec::Free),
            "square-well" => PinningSpec::square_well(self.strength, self.half_width),
            "delta" => PinningSpec::delta_weight(self.atom_weight),
            other => Err(Error::Config(format!(
                "pinning.variant must be free, square-well or delta, got `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainSection {
    pub burn_in: usize,
    pub sweeps: usize,
    pub thin: usize,
    pub replicas: usize,
    pub seed: u64,
    pub overrelax: usize,
    /// `metropolis` or `auxiliary`.
    pub algorithm: Algorithm,
}

impl Default for ChainSection {
    fn default() -> Self {
        let s = Schedule::default();
        ChainSection {
            burn_in: s.burn_in,
            sweeps: s.sweeps,
            thin: s.thin,
            replicas: s.replicas,
            seed: s.seed,
            overrelax: s.overrelax,
            algorithm: s.algorithm,
        }
    }
}

impl ChainSection {
    pub fn schedule(&self) -> Schedule {
        Schedule {
            burn_in: self.burn_in,
            sweeps: self.sweeps,
            thin: self.thin,
            proposal_width: None,
            seed: self.seed,
            replicas: self.replicas,
            overrelax: self.overrelax,
            algorithm: self.algorithm,
        }
    }
}

/// Parameters specific to one experiment; each experiment reads its own keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamsSection {
    pub t_grid: Vec<f64>,
    pub distances: Vec<i32>,
    /// Also run the unpinned contrast where the experiment has one.
    pub contrast: bool,
    /// Average sampled two-point products over translated pairs.
    pub translation_average: bool,
    pub box_half_widths: Vec<i32>,
    pub sizes: Vec<usize>,
    pub n_divergence: Vec<i32>,
    pub n_exit: Vec<i32>,
    pub n_paths: usize,
    pub points_per_dim: usize,
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection {
            t_grid: (0..12).map(|k| 0.5 + 0.25 * k as f64).collect(),
            distances: (2..=12).collect(),
            contrast: true,
            translation_average: false,
            box_half_widths: vec![1, 2, 4],
            sizes: (1..=12).collect(),
            n_divergence: vec![8, 16, 32, 64, 128],
            n_exit: vec![8, 16, 32],
            n_paths: 4000,
            points_per_dim: 64,
        }
    }
}

impl ParamsSection {
    pub fn scheme(&self) -> QuadratureScheme {
        QuadratureScheme::with_points(self.points_per_dim)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "runs".into() }
    }
}

/// A fully resolved run description. Every key has a default, so a config
/// file only lists what it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub pinning: PinningSection,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        RunConfig {
            experiment,
            model: ModelSection::default(),
            pinning: PinningSection::default(),
            chain: ChainSection::default(),
            params: ParamsSection::default(),
            output: OutputSection::default(),
        }
    }

    /// Parses TOML text, applies `key=value` overrides and rejects unknown keys.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        from_table(value)
    }

    /// Reads a TOML config or an emitted `manifest.json`.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value = serde_json::from_str(&text)?;
            let config = manifest
                .get("config")
                .ok_or_else(|| Error::Config(format!("{} has no `config` entry", path.display())))?;
            let mut table: toml::Table = serde_json::from_value(config.clone())
                .map_err(|e| Error::Config(format!("manifest config: {e}")))?;
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            return from_table(table);
        }
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

fn from_table(table: toml::Table) -> Result<RunConfig> {
    let unknown = unknown_keys(&table);
    if !unknown.is_empty() {
        return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
}

fn key_paths(prefix: &str, table: &toml::Table, out: &mut BTreeSet<String>) {
    for (k, v) in table {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        if let toml::Value::Table(t) = v {
            key_paths(&path, t, out);
        }
        out.insert(path);
    }
}

/// Every key of `table` absent from the default configuration.
pub fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let toml::Value::Table(reference) = toml::Value::try_from(RunConfig::new(Experiment::Pinv)).expect("config serialises")
    else {
        unreachable!("a struct serialises to a table")
    };
    let mut known = BTreeSet::new();
    key_paths("", &reference, &mut known);
    let mut given = BTreeSet::new();
    key_paths("", table, &mut given);
    given.difference(&known).cloned().collect()
}

/// `section.key=value` with a TOML value; bare words are taken as strings.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_sections() {
        let c = RunConfig::from_toml_str("experiment = \"tail\"", &[]).unwrap();
        assert_eq!(c, RunConfig::new(Experiment::Tail));
    }

    #[test]
    fn every_unknown_key_is_named() {
        let text = "experiment = \"pinv\"\npotental = 1\n[model]\nl = 4\nsize = 3\n";
        let err = RunConfig::from_toml_str(text, &[]).unwrap_err().to_string();
        assert!(err.contains("potental") && err.contains("model.size"), "{err}");
    }

    #[test]
    fn overrides_win_and_parse_scalars() {
        let c = RunConfig::from_toml_str(
            "experiment = \"pinv\"\n[chain]\nseed = 3\n",
            &[
                "chain.seed=9".into(),
                "model.interaction=quartic".into(),
                "model.l_list=[4, 8]".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.chain.seed, 9);
        assert_eq!(c.model.interaction, "quartic");
        assert_eq!(c.model.l_list, vec![4, 8]);
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::new(Experiment::Avoidance);
        c.pinning.variant = "square-well".into();
        let back = RunConfig::from_toml_str(&c.to_toml(), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn bad_variant_is_config_error() {
        let mut c = RunConfig::new(Experiment::Pinv);
        c.pinning.variant = "wall".into();
        assert!(matches!(c.pinning.spec(), Err(Error::Config(_))));
    }
}
