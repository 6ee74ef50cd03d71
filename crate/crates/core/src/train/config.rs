use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{MaskMode, MaskPlan, ScaleMode};

/// Training hyperparameters. Field defaults follow the reference protocol
/// (200 epochs, batch 100, learning rate 0.5 held for the first half, then
/// ramped down to 0.0005 by 90% of training).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_peak: f64,
    pub lr_floor: f64,
    pub phase1_frac: f64,
    pub phase2_frac: f64,
    pub momentum: f64,
    /// Coefficient of the squared L2 penalty on weights.
    pub weight_decay: f64,
    pub drop_prob: f64,
    pub lambda_frozen_train: usize,
    pub mode: MaskMode,
    pub scale_mode: ScaleMode,
    pub seed: u64,
    /// Maximum random translation in pixels; 0 disables shifting.
    pub shift_max: usize,
    /// Probability of a horizontal mirror; 0 disables flipping.
    pub flip_prob: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 100,
            lr_peak: 0.5,
            lr_floor: 0.0005,
            phase1_frac: 0.5,
            phase2_frac: 0.9,
            momentum: 0.9,
            weight_decay: 5e-4,
            drop_prob: 0.1,
            lambda_frozen_train: 0,
            mode: MaskMode::Dropconnect,
            scale_mode: ScaleMode::Inverted,
            seed: 0,
            shift_max: 4,
            flip_prob: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0 < self.phase1_frac
            && self.phase1_frac < self.phase2_frac
            && self.phase2_frac <= 1.0)
        {
            return bad(format!(
                "need 0 < phase1_frac ({}) < phase2_frac ({}) ≤ 1",
                self.phase1_frac, self.phase2_frac
            ));
        }
        if !(self.lr_floor <= self.lr_peak) || self.lr_floor < 0.0 {
            return bad(format!(
                "need 0 ≤ lr_floor ({}) ≤ lr_peak ({})",
                self.lr_floor, self.lr_peak
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if !(self.weight_decay >= 0.0) {
            return bad(format!("weight_decay {} must be non-negative", self.weight_decay));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return bad(format!("flip_prob {} outside [0, 1]", self.flip_prob));
        }
        self.mask_plan().map(|_| ())
    }

    /// Mask plan applied to every training batch.
    pub fn mask_plan(&self) -> Result<MaskPlan> {
        MaskPlan::new(self.drop_prob, self.lambda_frozen_train, self.mode, self.scale_mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn phase_and_lr_ordering_enforced() {
        let mut c = TrainConfig::default();
        c.phase1_frac = 0.9;
        c.phase2_frac = 0.5;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = TrainConfig::default();
        c.lr_floor = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_defaults_and_unknown_keys() {
        let c: TrainConfig = serde_json::from_str(r#"{"epochs": 3, "mode": "dropout"}"#).unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.mode, MaskMode::Dropout);
        assert_eq!(c.batch_size, 100);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 3}"#).is_err());
    }
}
