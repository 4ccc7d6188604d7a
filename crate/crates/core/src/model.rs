//! Takagi-Sugeno rule base and forward inference.
//!
//! Each rule pairs a conjunction of Gaussian premises with an affine
//! consequent. Rule firing uses the minimum t-norm and the model output is
//! the firing-weighted average of the rule outputs.
//!
//! The Gaussian here is `exp(-(x - mean)^2 / width^2)`, without the usual
//! factor 2 in the denominator. Widths produced by [`crate::identify`] carry
//! a compensating factor 2 under the square root, so a width fitted from a
//! cluster with standard deviation `s` comes out as `sqrt(2) * s` and the
//! membership reduces to the conventional `exp(-(x - mean)^2 / (2 s^2))`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FuzzyError, Result};

/// Rule-strength sum below which a firing vector counts as degenerate.
pub const DEGENERACY_FLOOR: f64 = 1e-12;

/// Version tag written into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMf {
    mean: f64,
    width: f64,
}

impl GaussianMf {
    pub fn new(mean: f64, width: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(FuzzyError::invalid("mean", format!("{mean} is not finite")));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(FuzzyError::invalid(
                "width",
                format!("{width} must be finite and strictly positive"),
            ));
        }
        Ok(Self { mean, width })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Membership degree of `x`, always in `[0, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(FuzzyError::NonFinite {
                context: "membership argument".into(),
            });
        }
        let d = (x - self.mean) / self.width;
        Ok((-d * d).exp())
    }
}

/// One IF-THEN rule: Gaussian premises per input and an affine consequent
/// `[a0, a1, .., an]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TsRule {
    premise: Vec<GaussianMf>,
    consequent: Vec<f64>,
}

impl TsRule {
    pub fn new(premise: Vec<GaussianMf>, consequent: Vec<f64>) -> Result<Self> {
        if premise.is_empty() {
            return Err(FuzzyError::invalid("premise", "a rule needs at least one input"));
        }
        if consequent.len() != premise.len() + 1 {
            return Err(FuzzyError::DimensionMismatch {
                expected: premise.len() + 1,
                actual: consequent.len(),
            });
        }
        if consequent.iter().any(|c| !c.is_finite()) {
            return Err(FuzzyError::NonFinite {
                context: "rule consequent".into(),
            });
        }
        Ok(Self {
            premise,
            consequent,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.premise.len()
    }

    pub fn premise(&self) -> &[GaussianMf] {
        &self.premise
    }

    pub fn consequent(&self) -> &[f64] {
        &self.consequent
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.premise.len() {
            return Err(FuzzyError::DimensionMismatch {
                expected: self.premise.len(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Truth value of the rule: minimum over the premise memberships.
    pub fn firing_strength(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut w = 1.0f64;
        for (mf, &xj) in self.premise.iter().zip(x) {
            w = w.min(mf.eval(xj)?);
        }
        Ok(w)
    }

    /// Affine consequent `a0 + sum_j a_j x_j`.
    pub fn output(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.consequent[0]
            + self.consequent[1..]
                .iter()
                .zip(x)
                .map(|(a, xj)| a * xj)
                .sum::<f64>())
    }

    /// Squared distance from `x` to the premise means, each axis scaled by
    /// the premise width.
    fn premise_distance(&self, x: &[f64]) -> f64 {
        self.premise
            .iter()
            .zip(x)
            .map(|(mf, &xj)| {
                let d = (xj - mf.mean) / mf.width;
                d * d
            })
            .sum()
    }
}

/// Per-rule truth values for one input sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FiringVector {
    values: Vec<f64>,
}

impl FiringVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn is_degenerate(&self) -> bool {
        self.total() < DEGENERACY_FLOOR
    }
}

/// Result of a single inference, with the degeneracy flag exposed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub degenerate: bool,
}

/// Outputs of [`TsModel::predict_batch`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchPrediction {
    pub values: Vec<f64>,
    /// Row indices that fell back to the nearest rule.
    pub degenerate_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsModel {
    rules: Vec<TsRule>,
    input_dim: usize,
}

impl TsModel {
    pub fn new(rules: Vec<TsRule>) -> Result<Self> {
        let first = rules.first().ok_or(FuzzyError::EmptyModel)?;
        let input_dim = first.input_dim();
        for rule in &rules {
            if rule.input_dim() != input_dim {
                return Err(FuzzyError::DimensionMismatch {
                    expected: input_dim,
                    actual: rule.input_dim(),
                });
            }
        }
        Ok(Self { rules, input_dim })
    }

    pub fn rules(&self) -> &[TsRule] {
        &self.rules
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn firing(&self, x: &[f64]) -> Result<FiringVector> {
        let values = self
            .rules
            .iter()
            .map(|r| r.firing_strength(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(FiringVector { values })
    }

    /// Index of the rule whose premise means are closest to `x` in
    /// width-normalized coordinates. Ties go to the lowest index.
    pub fn nearest_rule(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.input_dim {
            return Err(FuzzyError::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, rule) in self.rules.iter().enumerate() {
            let d = rule.premise_distance(x);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        Ok(best)
    }

    /// Normalized truth values; a degenerate firing vector becomes one-hot at
    /// the nearest rule.
    pub fn normalized_firing(&self, x: &[f64]) -> Result<(Vec<f64>, bool)> {
        let firing = self.firing(x)?;
        if firing.is_degenerate() {
            let mut row = vec![0.0; self.rules.len()];
            row[self.nearest_rule(x)?] = 1.0;
            return Ok((row, true));
        }
        let total = firing.total();
        Ok((firing.values.iter().map(|w| w / total).collect(), false))
    }

    pub fn predict_detailed(&self, x: &[f64]) -> Result<Prediction> {
        let firing = self.firing(x)?;
        if firing.is_degenerate() {
            let rule = &self.rules[self.nearest_rule(x)?];
            return Ok(Prediction {
                value: rule.output(x)?,
                degenerate: true,
            });
        }
        let outputs = self
            .rules
            .iter()
            .map(|r| r.output(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Prediction {
            value: weighted_average(&firing.values, &outputs),
            degenerate: false,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_detailed(x)?.value)
    }

    /// Row-wise [`TsModel::predict`] over an `N x n` input matrix.
    pub fn predict_batch(&self, inputs: &DMatrix<f64>) -> Result<BatchPrediction> {
        if inputs.nrows() > 0 && inputs.ncols() != self.input_dim {
            return Err(FuzzyError::DimensionMismatch {
                expected: self.input_dim,
                actual: inputs.ncols(),
            });
        }
        let mut out = BatchPrediction {
            values: Vec::with_capacity(inputs.nrows()),
            degenerate_rows: Vec::new(),
        };
        let mut row = vec![0.0; self.input_dim];
        for k in 0..inputs.nrows() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = inputs[(k, j)];
            }
            let p = self.predict_detailed(&row).map_err(|e| e.at_row(k))?;
            if p.degenerate {
                out.degenerate_rows.push(k);
            }
            out.values.push(p.value);
        }
        Ok(out)
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            input_dim: self.input_dim,
            rule_count: self.rules.len(),
            rules: self
                .rules
                .iter()
                .map(|r| RuleDocument {
                    mean: r.premise.iter().map(|mf| mf.mean).collect(),
                    width: r.premise.iter().map(|mf| mf.width).collect(),
                    consequent: r.consequent.clone(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(FuzzyError::Format(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        if doc.rules.len() != doc.rule_count {
            return Err(FuzzyError::Format(format!(
                "rule_count is {} but {} rules are present",
                doc.rule_count,
                doc.rules.len()
            )));
        }
        let rules = doc
            .rules
            .iter()
            .map(|r| {
                if r.mean.len() != doc.input_dim || r.width.len() != doc.input_dim {
                    return Err(FuzzyError::Format(
                        "premise vectors do not match input_dim".into(),
                    ));
                }
                let premise = r
                    .mean
                    .iter()
                    .zip(&r.width)
                    .map(|(&m, &w)| GaussianMf::new(m, w))
                    .collect::<Result<Vec<_>>>()?;
                TsRule::new(premise, r.consequent.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rules)
    }

    /// Serializes to the versioned TOML model document.
    pub fn to_text(&self) -> String {
        toml::to_string(&self.to_document()).expect("model documents always serialize")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            toml::from_str(text).map_err(|e| FuzzyError::Format(e.to_string()))?;
        Self::from_document(&doc)
    }
}

/// Firing-weighted mean of rule outputs. Callers guarantee a positive weight sum.
pub(crate) fn weighted_average(weights: &[f64], outputs: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&w, &y) in weights.iter().zip(outputs) {
        num += w * y;
        den += w;
    }
    num / den
}

/// Plain serialized form of a [`TsModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub input_dim: usize,
    pub rule_count: usize,
    pub rules: Vec<RuleDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDocument {
    pub mean: Vec<f64>,
    pub width: Vec<f64>,
    pub consequent: Vec<f64>,
}
