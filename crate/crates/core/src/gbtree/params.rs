use serde::{Deserialize, Serialize};

use super::GbtError;

/// Gradient-based one-side sampling rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GossParams {
    /// Fraction of rows with the largest |gradient| kept outright.
    pub top_rate: f64,
    /// Fraction of rows drawn uniformly from the remainder.
    pub other_rate: f64,
}

/// Weight applied to the uniformly drawn GOSS rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GossAmplification {
    /// `(1 - a) / b`, which keeps gradient sums unbiased.
    #[default]
    Unbiased,
    /// `1 / (1 - a)`, the factor printed in some descriptions of GOSS. Kept
    /// for comparison only; it is biased whenever `b != 1 - a`.
    InverseTopComplement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum GrowthPolicy {
    /// Split every node of a level before moving to the next.
    DepthWise,
    /// Always split the open leaf with the largest gain, up to `num_leaves`.
    LeafWise { num_leaves: usize },
}

/// Booster configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    /// Minimum hessian sum per child (= minimum rows under squared loss).
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Penalty per leaf; a split must gain more than this.
    pub gamma: f64,
    pub goss: Option<GossParams>,
    pub goss_amplification: GossAmplification,
    pub growth: GrowthPolicy,
    pub patience: usize,
    pub seed: u64,
}

impl Default for HyperParams {
    /// Stock settings (learning rate 0.1, 100 depth-6 trees, no sampling).
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_depth: 6,
            n_estimators: 100,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
            lambda: 1.0,
            gamma: 0.0,
            goss: None,
            goss_amplification: GossAmplification::Unbiased,
            growth: GrowthPolicy::DepthWise,
            patience: 50,
            seed: 42,
        }
    }
}

impl HyperParams {
    /// Tuned depth-wise configuration with row subsampling and a split penalty.
    pub fn xgb_style() -> Self {
        Self {
            learning_rate: 0.023764,
            max_depth: 6,
            n_estimators: 1000,
            min_child_weight: 1.0,
            subsample: 0.6,
            colsample_bytree: 1.0,
            gamma: 0.97328,
            ..Self::default()
        }
    }

    /// Leaf-wise growth capped at 31 leaves, GOSS row sampling and 80 %
    /// feature sampling.
    pub fn lgbm_style() -> Self {
        Self {
            learning_rate: 0.02,
            max_depth: 6,
            n_estimators: 1000,
            min_child_weight: 20.0,
            subsample: 1.0,
            colsample_bytree: 0.8,
            lambda: 0.0,
            gamma: 0.0,
            goss: Some(GossParams {
                top_rate: 0.2,
                other_rate: 0.1,
            }),
            growth: GrowthPolicy::LeafWise { num_leaves: 31 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GbtError> {
        let bad = |m: String| Err(GbtError::InvalidParams(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be > 0", self.learning_rate));
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1".into());
        }
        if self.n_estimators < 1 {
            return bad("n_estimators must be at least 1".into());
        }
        if !(self.min_child_weight >= 0.0) {
            return bad(format!("min_child_weight {} must be >= 0", self.min_child_weight));
        }
        for (name, v) in [
            ("subsample", self.subsample),
            ("colsample_bytree", self.colsample_bytree),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} {v} must be in (0, 1]"));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be >= 0", self.lambda));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma {} must be >= 0", self.gamma));
        }
        if let Some(g) = self.goss {
            super::goss::check_rates(g.top_rate, g.other_rate)?;
        }
        if let GrowthPolicy::LeafWise { num_leaves } = self.growth {
            if num_leaves < 2 {
                return bad("num_leaves must be at least 2".into());
            }
        }
        if self.patience < 1 {
            return bad("patience must be at least 1".into());
        }
        Ok(())
    }
}
