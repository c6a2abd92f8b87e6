//! JSON scenario files: spaces, a product measure, a payoff or target
//! function, named points, and the thresholds verification runs must meet.
//!
//! Symbols are written as labels of their coordinate space. A minimal file:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "coin",
//!   "measure": { "tail": { "kind": "constant", "weights": [0.5, 0.5] } },
//!   "function": { "kind": "cylinder", "table": [0.0, 1.0] }
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::games::{GameError, GameSpec};
use crate::model::{
    CoordinateMeasure, CoordinateSpace, Cylinder, FormulaFamily, GeometricWeights, MeasureTail,
    ModelError, PointSpec, ProductMeasure, ScoreTable, SpaceFamily, SymbolSequence, SymbolTail,
    TailFunction,
};

pub const SCHEMA_VERSION: u32 = 1;

const BUILTINS: &[(&str, &str)] = &[
    ("example-3-4", include_str!("../scenarios/example-3-4.json")),
    (
        "discounted-uniform",
        include_str!("../scenarios/discounted-uniform.json"),
    ),
    (
        "weighted-pair",
        include_str!("../scenarios/weighted-pair.json"),
    ),
    (
        "biased-coordinate",
        include_str!("../scenarios/biased-coordinate.json"),
    ),
    ("naming-game", include_str!("../scenarios/naming-game.json")),
    ("purify-demo", include_str!("../scenarios/purify-demo.json")),
    (
        "purify-product",
        include_str!("../scenarios/purify-product.json"),
    ),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("{context}: {source}")]
    Invalid { context: String, source: ModelError },
    #[error("{context}: unknown symbol {label:?}")]
    UnknownSymbol { context: String, label: String },
    #[error("unknown formula family {0:?}")]
    UnknownFamily(String),
    #[error("{0}")]
    Game(#[from] GameError),
    #[error("no scenario file or built-in named {0:?}")]
    NotFound(String),
}

fn invalid(context: impl Into<String>) -> impl FnOnce(ModelError) -> ScenarioError {
    let context = context.into();
    move |source| ScenarioError::Invalid { context, source }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema_version: u32,
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    spaces: Option<RawSpaces>,
    measure: RawMeasure,
    #[serde(default)]
    function: Option<RawFunction>,
    #[serde(default)]
    points: BTreeMap<String, RawSequence>,
    #[serde(default)]
    thresholds: Thresholds,
    #[serde(default)]
    defaults: Defaults,
    #[serde(default)]
    game: Option<RawGame>,
    #[serde(default)]
    naming_game: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpaces {
    #[serde(default)]
    head: Vec<Vec<String>>,
    tail: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    #[serde(default)]
    head: Vec<Vec<f64>>,
    tail: RawMeasureTail,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawMeasureTail {
    Constant {
        weights: Vec<f64>,
    },
    Periodic {
        weights: Vec<Vec<f64>>,
    },
    Formula {
        family: String,
        #[serde(default = "half")]
        ratio: f64,
    },
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawFunction {
    Constant {
        value: f64,
    },
    Cylinder {
        /// Defaults to the arities of coordinates `1..=d` for the smallest fitting `d`.
        #[serde(default)]
        radices: Option<Vec<usize>>,
        table: Vec<f64>,
    },
    DiscountedSum {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "half")]
        ratio: f64,
        #[serde(default)]
        head_scores: Vec<Vec<f64>>,
        scores: Vec<f64>,
    },
    ProductIndicator {
        targets: RawSequence,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSequence {
    #[serde(default)]
    head: Vec<String>,
    tail: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGame {
    actions: Vec<RawAction>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAction {
    name: String,
    function: RawFunction,
}

/// Fractions a verification campaign must reach for a zero exit status.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub strong: Option<f64>,
    pub weak: Option<f64>,
}

/// Scenario-suggested parameters; command-line flags take precedence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub epsilon: Option<f64>,
    pub n_max: Option<usize>,
    pub depth: Option<usize>,
    pub samples: Option<usize>,
    pub retries: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub spaces: SpaceFamily,
    pub measure: Arc<ProductMeasure>,
    pub function: Option<TailFunction>,
    pub points: BTreeMap<String, PointSpec>,
    pub thresholds: Thresholds,
    pub defaults: Defaults,
    pub game: Option<GameSpec>,
    pub naming_game: bool,
    /// SHA-256 of the source text, hex encoded.
    pub digest: String,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let raw: RawScenario = serde_json::from_str(text)?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Schema(raw.schema_version));
        }
        let spaces = build_spaces(raw.spaces)?;
        let measure = build_measure(raw.measure)?;
        measure
            .validate_against(&spaces)
            .map_err(invalid("measure"))?;
        let function = raw
            .function
            .map(|f| build_function(f, &spaces, "function"))
            .transpose()?;
        let mut points = BTreeMap::new();
        for (name, seq) in raw.points {
            let context = format!("points.{name}");
            let seq = build_sequence(&seq, &spaces, &context)?;
            points.insert(name, PointSpec::described(seq));
        }
        let game = match raw.game {
            Some(g) => {
                let mut names = Vec::new();
                let mut payoffs = Vec::new();
                for a in g.actions {
                    let context = format!("game.actions.{}", a.name);
                    payoffs.push(build_function(a.function, &spaces, &context)?);
                    names.push(a.name);
                }
                Some(GameSpec::new(names, payoffs)?)
            }
            None => None,
        };
        Ok(Scenario {
            name: raw.name,
            description: raw.description,
            spaces,
            measure: Arc::new(measure),
            function,
            points,
            thresholds: raw.thresholds,
            defaults: raw.defaults,
            game,
            naming_game: raw.naming_game,
            digest: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    pub fn from_path(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Scenario::from_json(&text)
    }

    pub fn builtin(name: &str) -> Option<Result<Scenario, ScenarioError>> {
        builtin_source(name).map(Scenario::from_json)
    }

    /// A file path if one exists, otherwise a built-in name.
    pub fn load(spec: &str) -> Result<Scenario, ScenarioError> {
        let path = Path::new(spec);
        if path.exists() {
            return Scenario::from_path(path);
        }
        Scenario::builtin(spec).unwrap_or_else(|| Err(ScenarioError::NotFound(spec.to_string())))
    }

    /// Parse a point given as `h1,h2,…;t1,t2,…` (labels; the tail repeats),
    /// or look up a named point.
    pub fn point(&self, spec: &str) -> Result<PointSpec, ScenarioError> {
        if let Some(p) = self.points.get(spec) {
            return Ok(p.clone());
        }
        let (head, tail) = spec.split_once(';').unwrap_or(("", spec));
        let split = |s: &str| -> Vec<String> {
            s.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(String::from)
                .collect()
        };
        let raw = RawSequence {
            head: split(head),
            tail: split(tail),
        };
        Ok(PointSpec::described(build_sequence(
            &raw,
            &self.spaces,
            &format!("point {spec:?}"),
        )?))
    }

    /// Render the first `n` coordinates of `x` as labels.
    pub fn labels(&self, x: &PointSpec, n: usize) -> Vec<String> {
        (1..=n)
            .map(|i| self.spaces.space(i).label(x.coordinate(i)).to_string())
            .collect()
    }
}

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

fn build_spaces(raw: Option<RawSpaces>) -> Result<SpaceFamily, ScenarioError> {
    let Some(raw) = raw else {
        return Ok(SpaceFamily::binary());
    };
    let head = raw
        .head
        .into_iter()
        .enumerate()
        .map(|(k, symbols)| {
            CoordinateSpace::new(k + 1, symbols)
                .map_err(invalid(format!("spaces.head coordinate {}", k + 1)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    SpaceFamily::new(head, raw.tail).map_err(invalid("spaces.tail"))
}

fn build_measure(raw: RawMeasure) -> Result<ProductMeasure, ScenarioError> {
    let head = raw
        .head
        .into_iter()
        .enumerate()
        .map(|(k, w)| {
            CoordinateMeasure::new(w).map_err(invalid(format!("measure coordinate {}", k + 1)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let t = head.len();
    let tail = match raw.tail {
        RawMeasureTail::Constant { weights } => MeasureTail::Constant(
            CoordinateMeasure::new(weights)
                .map_err(invalid(format!("measure tail (coordinates {} on)", t + 1)))?,
        ),
        RawMeasureTail::Periodic { weights } => MeasureTail::Periodic(
            weights
                .into_iter()
                .enumerate()
                .map(|(k, w)| {
                    CoordinateMeasure::new(w).map_err(invalid(format!(
                        "measure tail entry {k} (coordinate {})",
                        t + 1 + k
                    )))
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
        RawMeasureTail::Formula { family, ratio } => match family.as_str() {
            "geometric_bernoulli" => {
                MeasureTail::Formula(FormulaFamily::GeometricBernoulli { ratio })
            }
            _ => return Err(ScenarioError::UnknownFamily(family)),
        },
    };
    ProductMeasure::new(head, tail).map_err(invalid("measure tail"))
}

fn lookup(
    spaces: &SpaceFamily,
    i: usize,
    label: &str,
    context: &str,
) -> Result<usize, ScenarioError> {
    spaces
        .space(i)
        .lookup(label)
        .ok_or_else(|| ScenarioError::UnknownSymbol {
            context: format!("{context}, coordinate {i}"),
            label: label.to_string(),
        })
}

fn build_sequence(
    raw: &RawSequence,
    spaces: &SpaceFamily,
    context: &str,
) -> Result<SymbolSequence, ScenarioError> {
    if raw.tail.is_empty() {
        return Err(ScenarioError::Invalid {
            context: context.to_string(),
            source: ModelError::EmptyPeriod,
        });
    }
    let orig = raw.head.len();
    let period = raw.tail.len();
    // Spell out the tail over any explicitly listed spaces so every label is
    // resolved against its own coordinate, then rotate the remaining cycle.
    let explicit = orig.max(spaces.head_len());
    let labels: Vec<&String> = raw
        .head
        .iter()
        .chain((orig + 1..=explicit).map(|i| &raw.tail[(i - orig - 1) % period]))
        .collect();
    let head = labels
        .iter()
        .enumerate()
        .map(|(k, l)| lookup(spaces, k + 1, l, context))
        .collect::<Result<Vec<_>, _>>()?;
    let shift = explicit - orig;
    let tail_syms = (0..period)
        .map(|k| {
            lookup(
                spaces,
                explicit + 1 + k,
                &raw.tail[(shift + k) % period],
                context,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let tail = match tail_syms.as_slice() {
        [s] => SymbolTail::Constant(*s),
        _ => SymbolTail::Periodic(tail_syms),
    };
    let seq = SymbolSequence::new(head, tail).map_err(invalid(context))?;
    seq.validate_against(spaces).map_err(invalid(context))?;
    Ok(seq)
}

fn build_function(
    raw: RawFunction,
    spaces: &SpaceFamily,
    context: &str,
) -> Result<TailFunction, ScenarioError> {
    Ok(match raw {
        RawFunction::Constant { value } => TailFunction::constant(value),
        RawFunction::Cylinder { radices, table } => {
            let radices = match radices {
                Some(r) => r,
                None => {
                    let mut r = Vec::new();
                    let mut size = 1usize;
                    while size < table.len() {
                        let a = spaces.arity(r.len() + 1);
                        r.push(a);
                        size = size.saturating_mul(a);
                    }
                    r
                }
            };
            for (k, &r) in radices.iter().enumerate() {
                if r != spaces.arity(k + 1) {
                    return Err(ScenarioError::Invalid {
                        context: context.to_string(),
                        source: ModelError::ArityMismatch {
                            coordinate: k + 1,
                            expected: spaces.arity(k + 1),
                            found: r,
                        },
                    });
                }
            }
            TailFunction::cylinder(Cylinder::new(radices, table).map_err(invalid(context))?)
        }
        RawFunction::DiscountedSum {
            scale,
            ratio,
            head_scores,
            scores,
        } => {
            let weights = GeometricWeights::new(scale, ratio).map_err(invalid(context))?;
            let table = ScoreTable::new(head_scores, scores).map_err(invalid(context))?;
            TailFunction::discounted_sum(weights, table)
        }
        RawFunction::ProductIndicator { targets } => TailFunction::product_indicator(
            build_sequence(&targets, spaces, &format!("{context}.targets"))?,
        ),
    })
}
