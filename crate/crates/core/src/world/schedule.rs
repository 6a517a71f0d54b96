use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear-β diffusion schedule with cumulative products `ᾱ_t`, `t = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    alpha_bar: Vec<f64>,
    /// Cached `(1 - ᾱ_t) / ᾱ_t`.
    noise_var: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    #[serde(default = "default_beta_start")]
    pub beta_start: f64,
    #[serde(default = "default_beta_end")]
    pub beta_end: f64,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
}

fn default_beta_start() -> f64 {
    1e-4
}

fn default_beta_end() -> f64 {
    0.02
}

fn default_t_max() -> usize {
    1000
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            beta_start: default_beta_start(),
            beta_end: default_beta_end(),
            t_max: default_t_max(),
        }
    }
}

impl DiffusionSchedule {
    pub fn linear(beta_start: f64, beta_end: f64, t_max: usize) -> Result<Self> {
        if t_max == 0 {
            return Err(Error::config("schedule.t_max must be positive"));
        }
        if !(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end) {
            return Err(Error::config(
                "schedule needs 0 < beta_start <= beta_end < 1",
            ));
        }
        let mut alpha_bar = Vec::with_capacity(t_max);
        let mut prod = 1.0;
        for t in 0..t_max {
            let beta = if t_max == 1 {
                beta_start
            } else {
                beta_start + (beta_end - beta_start) * t as f64 / (t_max - 1) as f64
            };
            prod *= 1.0 - beta;
            alpha_bar.push(prod);
        }
        Ok(Self::from_alpha_bar(alpha_bar))
    }

    pub fn from_config(cfg: &ScheduleConfig) -> Result<Self> {
        Self::linear(cfg.beta_start, cfg.beta_end, cfg.t_max)
    }

    fn from_alpha_bar(alpha_bar: Vec<f64>) -> Self {
        let noise_var = alpha_bar.iter().map(|a| (1.0 - a) / a).collect();
        Self {
            alpha_bar,
            noise_var,
        }
    }

    pub fn t_max(&self) -> usize {
        self.alpha_bar.len()
    }

    /// `ᾱ_t` for `1 <= t <= T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t - 1]
    }

    /// `sqrt((1 - ᾱ_t) / ᾱ_t)`, the data-space noise std at step `t`.
    pub fn noise_level(&self, t: usize) -> f64 {
        self.noise_var[t - 1].sqrt()
    }

    /// `t* = argmin_t |σ² − (1−ᾱ_t)/ᾱ_t|`, ties toward the smaller `t`.
    pub fn get_timestep(&self, sigma: f64) -> Result<(usize, f64)> {
        let (low, high) = (self.noise_level(1), self.noise_level(self.t_max()));
        if !(sigma >= low && sigma <= high) {
            return Err(Error::Range { sigma, low, high });
        }
        let s2 = sigma * sigma;
        // noise_var is strictly increasing, so the minimizer is next to the insertion point.
        let idx = self.noise_var.partition_point(|&v| v < s2);
        let mut best = idx.min(self.noise_var.len() - 1);
        if best > 0 && (s2 - self.noise_var[best - 1]).abs() <= (self.noise_var[best] - s2).abs() {
            best -= 1;
        }
        Ok((best + 1, self.alpha_bar[best]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_schedule() -> DiffusionSchedule {
        DiffusionSchedule::from_config(&ScheduleConfig::default()).unwrap()
    }

    #[test]
    fn levels_strictly_increase() {
        let s = default_schedule();
        assert!((s.alpha_bar(1) - (1.0 - 1e-4)).abs() < 1e-15);
        for t in 2..=s.t_max() {
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            assert!(s.noise_level(t) > s.noise_level(t - 1));
        }
    }

    #[test]
    fn exact_hit() {
        let s = default_schedule();
        let (t, ab) = s.get_timestep(s.noise_level(100)).unwrap();
        assert_eq!(t, 100);
        assert_eq!(ab, s.alpha_bar(100));
    }

    #[test]
    fn just_below_midpoint_selects_lower() {
        let s = default_schedule();
        let v1 = s.noise_level(200).powi(2);
        let v2 = s.noise_level(201).powi(2);
        let mid = 0.5 * (v1 + v2);
        let below = (mid - 1e-9 * (v2 - v1)).sqrt();
        let above = (mid + 1e-3 * (v2 - v1)).sqrt();
        assert_eq!(s.get_timestep(below).unwrap().0, 200);
        assert_eq!(s.get_timestep(above).unwrap().0, 201);
    }

    #[test]
    fn matches_full_scan() {
        let s = default_schedule();
        for &sigma in &[0.5, 0.25, 1.0, 0.0123, 3.7, 100.0] {
            let s2: f64 = sigma * sigma;
            let mut best = 1;
            for t in 1..=s.t_max() {
                let r = (s2 - s.noise_level(t).powi(2)).abs();
                if r < (s2 - s.noise_level(best).powi(2)).abs() {
                    best = t;
                }
            }
            assert_eq!(s.get_timestep(sigma).unwrap().0, best, "sigma {sigma}");
        }
    }

    #[test]
    fn out_of_range_names_endpoints() {
        let s = default_schedule();
        let err = s.get_timestep(1e-4).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Range { .. }));
        assert!(msg.contains(&s.noise_level(1).to_string()));
        assert!(msg.contains(&s.noise_level(1000).to_string()));
        assert!(s.get_timestep(1e6).is_err());
    }
}
