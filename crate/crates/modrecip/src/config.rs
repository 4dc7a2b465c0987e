//! Experiment configuration: a TOML file with `[grid]`, `[solver]` and
//! `[experiment]` sections. Every key has a default, and the effective
//! configuration (defaults filled in) is what reports echo.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use modrecip_core::{MetricGrid, Norm, SolverConfig, WeightField};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// One verb per experiment type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// A single modulus solve on the configured grid.
    Modulus,
    /// The reciprocity product over every norm and exponent in the sweep.
    Reciprocity,
    /// The crossing modulus of the linf square against pi/4 as `n` grows.
    Sharpness,
    /// The coarea ratio of a chain potential over the `n` sweep.
    Coarea,
    /// Crossing modulus of a constant-weight rectangle against its closed form.
    Convergence,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Modulus => "modulus",
            Experiment::Reciprocity => "reciprocity",
            Experiment::Sharpness => "sharpness",
            Experiment::Coarea => "coarea",
            Experiment::Convergence => "convergence",
        }
    }

    /// Relative tolerance used when `experiment.tolerance` is not set.
    ///
    /// Cell-center discretization errors decay like `1/n` and reach about
    /// 12% at `n = 16`, so sweeps default to a tolerance that the coarsest
    /// default grid meets.
    pub fn default_tolerance(self) -> f64 {
        match self {
            Experiment::Modulus => 0.05,
            Experiment::Reciprocity => 0.1,
            Experiment::Sharpness | Experiment::Coarea | Experiment::Convergence => 0.15,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Conformal weight: a positive constant or a named preset.
///
/// Written as `"1"`, `"0.5"`, `"slit"`, `"bump"` or `"bump:<amplitude>"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSpec {
    Constant(f64),
    Slit,
    Bump(f64),
}

impl WeightSpec {
    pub fn field(self) -> WeightField {
        match self {
            WeightSpec::Constant(c) => WeightField::Constant(c),
            WeightSpec::Slit => WeightField::Slit,
            WeightSpec::Bump(amplitude) => WeightField::Bump { amplitude },
        }
    }
}

impl FromStr for WeightSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        match s {
            "slit" => return Ok(WeightSpec::Slit),
            "bump" => return Ok(WeightSpec::Bump(1.0)),
            _ => {}
        }
        if let Some(amp) = s.strip_prefix("bump:") {
            return match amp.trim().parse::<f64>() {
                Ok(a) if a.is_finite() && a > -1.0 => Ok(WeightSpec::Bump(a)),
                _ => Err(format!("bump amplitude must be a real above -1, got {amp:?}")),
            };
        }
        match s.parse::<f64>() {
            Ok(c) if c.is_finite() && c > 0.0 => Ok(WeightSpec::Constant(c)),
            _ => Err(format!(
                "expected a positive constant, \"slit\", \"bump\" or \"bump:<amplitude>\", got {s:?}"
            )),
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Constant(c) => write!(f, "{c}"),
            WeightSpec::Slit => f.write_str("slit"),
            WeightSpec::Bump(a) => write!(f, "bump:{a}"),
        }
    }
}

impl Serialize for WeightSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for WeightSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        // Accept bare numbers as well as strings.
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(c) => WeightSpec::from_str(&c.to_string()),
            Raw::Text(s) => WeightSpec::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormName {
    L1,
    L2,
    Linf,
}

impl NormName {
    pub const ALL: [NormName; 3] = [NormName::L1, NormName::L2, NormName::Linf];

    pub fn norm(self) -> Norm {
        match self {
            NormName::L1 => Norm::L1,
            NormName::L2 => Norm::L2,
            NormName::Linf => Norm::LInf,
        }
    }

    pub fn name(self) -> &'static str {
        self.norm().name()
    }
}

/// Which family the `modulus` experiment solves for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// Curves from the left side to the right side.
    Connecting,
    /// Boundaries separating the left side from the right side.
    Separating,
}

/// Density paired with the chain potential in the `coarea` experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoareaDensity {
    One,
    /// Uniform on `[0.5, 1.5]`, drawn from the run seed.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub width: f64,
    pub height: f64,
    pub norm: NormName,
    pub weight: WeightSpec,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n: 32,
            width: 1.0,
            height: 1.0,
            norm: NormName::Linf,
            weight: WeightSpec::Constant(1.0),
        }
    }
}

impl GridSpec {
    pub fn build(&self, n: usize, norm: NormName) -> modrecip_core::Result<MetricGrid> {
        MetricGrid::new(n, self.width, self.height, norm.norm())?.with_weight(self.weight.field())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub p: f64,
    pub tol_gap: f64,
    pub tol_admissibility: f64,
    pub max_outer_iters: usize,
    pub epsilon_floor: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let cfg = SolverConfig::new(2.0);
        SolverSpec {
            p: cfg.p,
            tol_gap: cfg.tol_gap,
            tol_admissibility: cfg.tol_admissibility,
            max_outer_iters: cfg.max_outer_iters,
            epsilon_floor: cfg.epsilon_floor,
        }
    }
}

impl SolverSpec {
    pub fn solver_config(&self, p: f64) -> SolverConfig {
        let mut cfg = SolverConfig::new(p);
        cfg.tol_gap = self.tol_gap;
        cfg.tol_admissibility = self.tol_admissibility;
        cfg.max_outer_iters = self.max_outer_iters;
        cfg.epsilon_floor = self.epsilon_floor;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Number of levels in the coarea quadrature.
    pub levels: usize,
    /// Grid sizes for `sharpness`, `coarea` and `convergence`.
    pub n_sweep: Vec<usize>,
    /// Exponents for `reciprocity`.
    pub p_sweep: Vec<f64>,
    /// Norms for `reciprocity`.
    pub norms: Vec<NormName>,
    /// Relative tolerance; filled with the experiment default when absent.
    pub tolerance: Option<f64>,
    pub family: FamilyKind,
    /// Constant upper gradient fed to the chain potential.
    pub gradient: f64,
    pub density: CoareaDensity,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            levels: 64,
            n_sweep: vec![16, 32, 64],
            p_sweep: vec![1.5, 2.0, 3.0],
            norms: NormName::ALL.to_vec(),
            tolerance: None,
            family: FamilyKind::Connecting,
            gradient: 1.0,
            density: CoareaDensity::One,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub grid: GridSpec,
    pub solver: SolverSpec,
    pub experiment: ExperimentSpec,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config {
            field: "<file>".into(),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Config, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Config::from_toml(&text)
    }

    /// Defaults rendered as TOML, for `--help`.
    pub fn defaults_toml() -> String {
        toml::to_string(&Config::default()).expect("default config serializes")
    }

    pub fn tolerance(&self, experiment: Experiment) -> f64 {
        self.experiment
            .tolerance
            .unwrap_or_else(|| experiment.default_tolerance())
    }

    /// Checks every field the experiment reads and fills the tolerance.
    pub fn resolve(mut self, experiment: Experiment) -> Result<Config, HarnessError> {
        let bad = |field: &str, message: String| HarnessError::Config {
            field: field.into(),
            message,
        };
        let g = &self.grid;
        if !(g.width > 0.0 && g.width.is_finite()) {
            return Err(bad("grid.width", format!("must be a positive real, got {}", g.width)));
        }
        if !(g.height > 0.0 && g.height.is_finite()) {
            return Err(bad("grid.height", format!("must be a positive real, got {}", g.height)));
        }
        let s = &self.solver;
        if !(s.p.is_finite() && s.p >= SolverConfig::MIN_P) {
            return Err(bad(
                "solver.p",
                format!("must be at least {}, got {}", SolverConfig::MIN_P, s.p),
            ));
        }
        if !(s.tol_gap > 0.0 && s.tol_gap < 1.0) {
            return Err(bad("solver.tol_gap", format!("must lie in (0, 1), got {}", s.tol_gap)));
        }
        if !(s.tol_admissibility > 0.0 && s.tol_admissibility < 1.0) {
            return Err(bad(
                "solver.tol_admissibility",
                format!("must lie in (0, 1), got {}", s.tol_admissibility),
            ));
        }
        if s.max_outer_iters == 0 {
            return Err(bad("solver.max_outer_iters", "must be positive".into()));
        }
        if !(s.epsilon_floor > 0.0 && s.epsilon_floor.is_finite()) {
            return Err(bad(
                "solver.epsilon_floor",
                format!("must be a positive real, got {}", s.epsilon_floor),
            ));
        }
        let e = &self.experiment;
        if let Some(t) = e.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(bad("experiment.tolerance", format!("must be a positive real, got {t}")));
            }
        }
        let check_n = |field: &str, n: usize| {
            if n < 3 {
                Err(bad(field, format!("grid sizes must be at least 3, got {n}")))
            } else {
                Ok(())
            }
        };
        let constant_weight = matches!(g.weight, WeightSpec::Constant(_));
        match experiment {
            Experiment::Modulus => check_n("grid.n", g.n)?,
            Experiment::Reciprocity => {
                check_n("grid.n", g.n)?;
                if e.p_sweep.is_empty() {
                    return Err(bad("experiment.p_sweep", "must not be empty".into()));
                }
                if let Some(p) = e.p_sweep.iter().find(|p| !(p.is_finite() && **p >= SolverConfig::MIN_P)) {
                    return Err(bad(
                        "experiment.p_sweep",
                        format!("exponents must be at least {}, got {p}", SolverConfig::MIN_P),
                    ));
                }
                if let Some(p) = e.p_sweep.iter().find(|&&p| p / (p - 1.0) < SolverConfig::MIN_P) {
                    return Err(bad(
                        "experiment.p_sweep",
                        format!("the conjugate of {p} is below {}", SolverConfig::MIN_P),
                    ));
                }
                if e.norms.is_empty() {
                    return Err(bad("experiment.norms", "must not be empty".into()));
                }
            }
            Experiment::Sharpness | Experiment::Coarea | Experiment::Convergence => {
                if e.n_sweep.is_empty() {
                    return Err(bad("experiment.n_sweep", "must not be empty".into()));
                }
                for &n in &e.n_sweep {
                    check_n("experiment.n_sweep", n)?;
                }
            }
        }
        match experiment {
            Experiment::Sharpness => {
                if s.p / (s.p - 1.0) < SolverConfig::MIN_P {
                    return Err(bad(
                        "solver.p",
                        format!("the conjugate of {} is below {}", s.p, SolverConfig::MIN_P),
                    ));
                }
                if g.norm != NormName::Linf {
                    return Err(bad("grid.norm", "sharpness is defined for linf only".into()));
                }
                if g.width != g.height {
                    return Err(bad("grid.width", "sharpness needs a square domain".into()));
                }
                if g.weight != WeightSpec::Constant(1.0) {
                    return Err(bad("grid.weight", "sharpness needs the unit weight".into()));
                }
            }
            Experiment::Convergence if !constant_weight => {
                return Err(bad(
                    "grid.weight",
                    "convergence needs a constant weight to have a closed form".into(),
                ));
            }
            Experiment::Coarea => {
                if e.levels < 16 {
                    return Err(bad("experiment.levels", format!("must be at least 16, got {}", e.levels)));
                }
                if !(e.gradient > 0.0 && e.gradient.is_finite()) {
                    return Err(bad(
                        "experiment.gradient",
                        format!("must be a positive real, got {}", e.gradient),
                    ));
                }
            }
            _ => {}
        }
        self.experiment.tolerance = Some(self.tolerance(experiment));
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_spec_parsing() {
        assert_eq!("1".parse(), Ok(WeightSpec::Constant(1.0)));
        assert_eq!("slit".parse(), Ok(WeightSpec::Slit));
        assert_eq!("bump:2.5".parse(), Ok(WeightSpec::Bump(2.5)));
        assert!("0".parse::<WeightSpec>().is_err());
        assert!("wedge".parse::<WeightSpec>().is_err());
        assert!("bump:-3".parse::<WeightSpec>().is_err());
    }

    #[test]
    fn numbers_and_strings_both_parse_as_weights() {
        let a = Config::from_toml("[grid]\nweight = 2\n").unwrap();
        let b = Config::from_toml("[grid]\nweight = \"2\"\n").unwrap();
        assert_eq!(a.grid.weight, WeightSpec::Constant(2.0));
        assert_eq!(a, b);
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let text = Config::defaults_toml();
        assert_eq!(Config::from_toml(&text).unwrap(), Config::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::from_toml("[grid]\nsize = 4\n").is_err());
        assert!(Config::from_toml("[solver]\ntol = 1e-3\n").is_err());
    }

    #[test]
    fn resolve_names_the_offending_field() {
        let field_of = |text: &str, exp: Experiment| match Config::from_toml(text).unwrap().resolve(exp) {
            Err(HarnessError::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        };
        assert_eq!(field_of("[solver]\np = 1.0\n", Experiment::Modulus), "solver.p");
        assert_eq!(field_of("[grid]\nn = 2\n", Experiment::Modulus), "grid.n");
        assert_eq!(field_of("[grid]\nnorm = \"l2\"\n", Experiment::Sharpness), "grid.norm");
        assert_eq!(field_of("[experiment]\nlevels = 8\n", Experiment::Coarea), "experiment.levels");
        assert_eq!(field_of("[experiment]\np_sweep = [25.0]\n", Experiment::Reciprocity), "experiment.p_sweep");
        assert_eq!(field_of("[grid]\nweight = \"slit\"\n", Experiment::Convergence), "grid.weight");
    }

    #[test]
    fn resolve_fills_the_default_tolerance() {
        let cfg = Config::default().resolve(Experiment::Reciprocity).unwrap();
        assert_eq!(cfg.experiment.tolerance, Some(0.1));
    }
}
