//! Scenario files: a cocycle source, an optional splitting and a list of
//! analyses, validated before anything runs.

use std::path::Path;

use cocycle_lab::classify::{Direction, PhVariant};
use cocycle_lab::gallery::{self, ProductModelSpec};
use cocycle_lab::katok::KatokBlock;
use cocycle_lab::linalg::{self, Matrix};
use cocycle_lab::{Cocycle, ScheduleRule, SplittingSpec, Tolerances};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub dimension: usize,
    #[serde(default)]
    pub splitting: Option<SplittingSpec>,
    #[serde(default)]
    pub symplectic: bool,
    /// Finite horizon of the cocycle; `--horizon` overrides it.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub source: SourceSpec,
    #[serde(default)]
    pub tolerances: Option<ToleranceOverrides>,
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub expect: Option<Expectations>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Constant {
        #[serde(with = "linalg::serde_matrix")]
        matrix: Matrix,
    },
    Explicit {
        #[serde(with = "linalg::serde_matrices")]
        factors: Vec<Matrix>,
        /// Repeat the factors with this period instead of stopping after them.
        #[serde(default)]
        periodic: bool,
    },
    Schedule {
        alphabet: Vec<Letter>,
        rule: ScheduleRule,
    },
    Gallery {
        id: String,
    },
    Random {
        /// Number of distinct factors, repeated periodically.
        #[serde(default = "one")]
        period: usize,
        spread: f64,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Letter {
    pub symbol: String,
    #[serde(with = "linalg::serde_matrix")]
    pub matrix: Matrix,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub symp: Option<f64>,
    pub eig: Option<f64>,
    pub angle: Option<f64>,
    pub gap: Option<f64>,
    pub ratio: Option<f64>,
}

impl ToleranceOverrides {
    pub fn apply(&self, base: Tolerances) -> Tolerances {
        Tolerances {
            symp: self.symp.unwrap_or(base.symp),
            eig: self.eig.unwrap_or(base.eig),
            angle: self.angle.unwrap_or(base.angle),
            gap: self.gap.unwrap_or(base.gap),
            ratio: self.ratio.unwrap_or(base.ratio),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub per_axis: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Analysis {
    /// `log Θ(start, n)` for `n = 1..=max_len`, also written as CSV.
    ThetaSeries {
        #[serde(default)]
        start: usize,
        max_len: Option<usize>,
    },
    Witness {
        tau: f64,
        horizon: Option<usize>,
        #[serde(default = "forward")]
        direction: Direction,
    },
    Ph {
        k: usize,
        #[serde(default = "relative")]
        variant: PhVariant,
    },
    Lyapunov {
        #[serde(default)]
        method: LyapunovChoice,
        n: Option<usize>,
    },
    SpectrumBunching {
        n: Option<usize>,
    },
    UniformBunching {
        theta: f64,
        m_max: usize,
    },
    Domination {
        dim_e: usize,
        m_max: usize,
    },
    TrivialOrDominated {
        m_max: usize,
        n: Option<usize>,
    },
    Ellipticity {
        eps: f64,
    },
    Flatten {
        eps: f64,
    },
    Remark {
        m_list: Vec<u32>,
    },
    ProductModel {
        model: Option<ProductModelSpec>,
    },
    Katok {
        blocks: Option<Vec<KatokBlock>>,
        epsilon: Option<f64>,
        grid: Grid,
    },
}

fn forward() -> Direction {
    Direction::Forward
}

fn relative() -> PhVariant {
    PhVariant::Relative
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovChoice {
    #[default]
    Qr,
    Exterior,
    Eigen,
}

impl Analysis {
    pub fn kind(&self) -> &'static str {
        match self {
            Analysis::ThetaSeries { .. } => "theta_series",
            Analysis::Witness { .. } => "witness",
            Analysis::Ph { .. } => "ph",
            Analysis::Lyapunov { .. } => "lyapunov",
            Analysis::SpectrumBunching { .. } => "spectrum_bunching",
            Analysis::UniformBunching { .. } => "uniform_bunching",
            Analysis::Domination { .. } => "domination",
            Analysis::TrivialOrDominated { .. } => "trivial_or_dominated",
            Analysis::Ellipticity { .. } => "ellipticity",
            Analysis::Flatten { .. } => "flatten",
            Analysis::Remark { .. } => "remark",
            Analysis::ProductModel { .. } => "product_model",
            Analysis::Katok { .. } => "katok",
        }
    }
}

/// Asserted verdicts; each key is decided by the analyses that report it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub forward_bunched: Option<bool>,
    pub backward_bunched: Option<bool>,
    pub partially_hyperbolic: Option<bool>,
    pub uniformly_bunched: Option<bool>,
    pub dominated: Option<bool>,
    pub elliptic: Option<bool>,
    pub flattening_certified: Option<bool>,
    pub remark_verified: Option<bool>,
    pub product_conditions_hold: Option<bool>,
    pub obstruction_triggered: Option<bool>,
}

impl Expectations {
    pub fn entries(&self) -> Vec<(&'static str, bool)> {
        [
            ("forward_bunched", self.forward_bunched),
            ("backward_bunched", self.backward_bunched),
            ("partially_hyperbolic", self.partially_hyperbolic),
            ("uniformly_bunched", self.uniformly_bunched),
            ("dominated", self.dominated),
            ("elliptic", self.elliptic),
            ("flattening_certified", self.flattening_certified),
            ("remark_verified", self.remark_verified),
            ("product_conditions_hold", self.product_conditions_hold),
            ("obstruction_triggered", self.obstruction_triggered),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }
}

/// Parse with the offending path in the error message.
pub fn parse(text: &str) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Input(format!("{}: {}", e.path(), e.inner())))?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

impl Scenario {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "schema_version: unsupported version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.dimension == 0 {
            return Err(invalid("dimension: must be at least 1"));
        }
        if let Some(s) = self.splitting {
            if s.dim() != self.dimension {
                return Err(invalid(format!(
                    "splitting: dimensions sum to {} but dimension is {}",
                    s.dim(),
                    self.dimension
                )));
            }
        }
        if let SourceSpec::Gallery { id } = &self.source {
            gallery::lookup(id).map_err(|e| invalid(format!("source.id: {e}")))?;
        }
        if self.analyses.is_empty() {
            return Err(invalid("analyses: at least one analysis is required"));
        }
        for (i, a) in self.analyses.iter().enumerate() {
            if let Analysis::Remark { m_list } = a {
                if m_list.is_empty() {
                    return Err(invalid(format!("analyses[{i}].m_list: must not be empty")));
                }
            }
        }
        Ok(())
    }

    pub fn gallery_id(&self) -> Option<&str> {
        match &self.source {
            SourceSpec::Gallery { id } => Some(id),
            _ => None,
        }
    }

    /// Build the cocycle, applying the horizon override when given.
    pub fn build_cocycle(&self, horizon: Option<usize>, seed: u64) -> cocycle_lab::Result<Cocycle> {
        let horizon = horizon.or(self.horizon);
        let mut c = match &self.source {
            SourceSpec::Constant { matrix } => Cocycle::constant(matrix.clone())?,
            SourceSpec::Explicit { factors, periodic } => {
                if *periodic {
                    Cocycle::periodic(factors.clone())?
                } else {
                    Cocycle::explicit(factors.clone())?
                }
            }
            SourceSpec::Schedule { alphabet, rule } => Cocycle::schedule(
                alphabet
                    .iter()
                    .map(|l| (l.symbol.clone(), l.matrix.clone()))
                    .collect(),
                rule.clone(),
            )?,
            SourceSpec::Gallery { id } => match id.as_str() {
                "remark" => gallery::remark_cocycle(horizon.unwrap_or(1022))?,
                "product-basic" => gallery::product_cocycle(&gallery::product_basic())?,
                "product-obstructed" => gallery::product_cocycle(&gallery::product_obstructed())?,
                "katok-linear" => {
                    let (blocks, eps) = gallery::katok_linear();
                    let g = cocycle_lab::katok::KatokAssembly::new(blocks, eps)?;
                    Cocycle::constant(g.linear_part())?
                }
                other => {
                    return Err(cocycle_lab::Error::InvalidInput(format!(
                        "unknown gallery id `{other}`"
                    )))
                }
            },
            SourceSpec::Random { period, spread } => {
                if *period == 0 {
                    return Err(cocycle_lab::Error::InvalidInput(
                        "period must be at least 1".into(),
                    ));
                }
                let factors = (0..*period as u64)
                    .map(|i| {
                        if self.symplectic {
                            if !self.dimension.is_multiple_of(2) {
                                return Err(cocycle_lab::Error::InvalidInput(
                                    "symplectic random source needs an even dimension".into(),
                                ));
                            }
                            linalg::random_symplectic(
                                self.dimension / 2,
                                *spread,
                                seed.wrapping_add(i),
                            )
                        } else {
                            let mut g = linalg::rng(seed.wrapping_add(i));
                            let m = Matrix::identity(self.dimension, self.dimension)
                                + linalg::random_matrix(self.dimension, self.dimension, &mut g)
                                    * *spread;
                            Ok(m)
                        }
                    })
                    .collect::<cocycle_lab::Result<Vec<_>>>()?;
                Cocycle::periodic(factors)?
            }
        };
        if c.dim() != self.dimension {
            return Err(cocycle_lab::Error::InvalidInput(format!(
                "source has dimension {} but the scenario declares {}",
                c.dim(),
                self.dimension
            )));
        }
        if let Some(s) = self.splitting {
            if c.splitting() != Some(s) {
                c = c.with_splitting(s)?;
            }
        }
        if let Some(h) = horizon {
            if c.horizon() != Some(h) {
                c = c.with_horizon(h)?;
            }
        }
        if self.symplectic {
            c = c.with_symplectic(true);
        }
        Ok(c)
    }
}
