use serde::{Deserialize, Serialize};

use super::CondError;

/// Hyper-parameters of the linear-beta diffusion schedule, the reduced
/// timestep `f(t) = beta_f * t` and the mixture weight `W_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleParams {
    pub num_timesteps: u32,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Slope of the reduced timestep.
    pub beta_f: f64,
    pub t_peak: f64,
    pub t_decay_end: f64,
    pub v_decay_end: f64,
    /// Exponential decay rate of `W_t` below `t_decay_end`.
    pub b_w: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            num_timesteps: 1000,
            beta_start: 1e-4,
            beta_end: 2e-2,
            beta_f: 0.2,
            t_peak: 1000.0,
            t_decay_end: 300.0,
            v_decay_end: 0.8,
            b_w: 0.075,
        }
    }
}

/// Validated schedule with the cumulative products precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    params: ScheduleParams,
    /// `alpha_bar[t]` for `t = 0..=T`, with `alpha_bar[0] = 1`.
    alpha_bar: Vec<f64>,
}

impl Schedule {
    pub fn new(params: ScheduleParams) -> Result<Self, CondError> {
        let p = &params;
        let bad = |m: &str| Err(CondError::InvalidSchedule(m.to_string()));
        if p.num_timesteps < 1 {
            return bad("num_timesteps must be >= 1");
        }
        if !(p.beta_start > 0.0 && p.beta_start < 1.0 && p.beta_end > 0.0 && p.beta_end < 1.0) {
            return bad("betas must lie in (0, 1)");
        }
        // beta_f = 1 would make the reduced timestep equal to t.
        if !(p.beta_f > 0.0 && p.beta_f < 1.0) {
            return bad("beta_f must lie in (0, 1)");
        }
        if !(p.t_peak > p.t_decay_end && p.t_decay_end >= 0.0) {
            return bad("need t_peak > t_decay_end >= 0");
        }
        if !(0.0..=1.0).contains(&p.v_decay_end) || !(p.b_w >= 0.0) {
            return bad("need v_decay_end in [0, 1] and b_w >= 0");
        }
        let n = p.num_timesteps as usize;
        let mut alpha_bar = Vec::with_capacity(n + 1);
        alpha_bar.push(1.0);
        let mut acc = 1.0f64;
        for s in 1..=n {
            let frac = if n == 1 {
                0.0
            } else {
                (s - 1) as f64 / (n - 1) as f64
            };
            let beta = p.beta_start + (p.beta_end - p.beta_start) * frac;
            acc *= 1.0 - beta;
            alpha_bar.push(acc);
        }
        Ok(Self { params, alpha_bar })
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    pub fn num_timesteps(&self) -> u32 {
        self.params.num_timesteps
    }

    pub fn check_t(&self, t: u32, lo: u32) -> Result<(), CondError> {
        if t < lo || t > self.params.num_timesteps {
            return Err(CondError::TimestepOutOfRange {
                t,
                lo,
                hi: self.params.num_timesteps,
            });
        }
        Ok(())
    }

    /// Cumulative signal retention at timestep `t`.
    pub fn alpha_bar(&self, t: u32) -> Result<f64, CondError> {
        self.check_t(t, 0)?;
        Ok(self.alpha_bar[t as usize])
    }

    /// Reduced timestep used for the corrupted condition.
    pub fn f_of_t(&self, t: u32) -> u32 {
        (self.params.beta_f * t as f64).round().max(0.0) as u32
    }

    /// Mixture weight of the corrupted condition at timestep `t`: linear
    /// from `v_decay_end` at `t_decay_end` up to 1 at `t_peak`, exponential
    /// decay below `t_decay_end`, clamped to `[0, 1]`.
    pub fn w_of_t(&self, t: u32) -> f64 {
        let p = &self.params;
        let t = t as f64;
        let w = if t < p.t_decay_end {
            p.v_decay_end * (-p.b_w * (p.t_decay_end - t)).exp()
        } else {
            1.0 - (1.0 - p.v_decay_end) * (p.t_peak - t) / (p.t_peak - p.t_decay_end)
        };
        w.clamp(0.0, 1.0)
    }

    /// `alpha_bar / (1 - alpha_bar)`; infinite at `t = 0`.
    pub fn snr(&self, t: u32) -> Result<f64, CondError> {
        let a = self.alpha_bar(t)?;
        Ok(a / (1.0 - a))
    }
}
