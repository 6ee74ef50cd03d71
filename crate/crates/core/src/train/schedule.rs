use super::config::TrainConfig;

/// Piecewise learning rate: `lr_peak` until `phase1_frac` of training, a
/// linear ramp down to `lr_floor` until `phase2_frac`, then `lr_floor`.
pub fn lr_at(step: usize, total_steps: usize, cfg: &TrainConfig) -> f64 {
    let frac = step as f64 / total_steps.max(1) as f64;
    if frac < cfg.phase1_frac {
        cfg.lr_peak
    } else if frac < cfg.phase2_frac {
        let t = (frac - cfg.phase1_frac) / (cfg.phase2_frac - cfg.phase1_frac);
        cfg.lr_peak + (cfg.lr_floor - cfg.lr_peak) * t
    } else {
        cfg.lr_floor
    }
}
