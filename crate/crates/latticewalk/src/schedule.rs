//! Step-size schedules: polynomial decay δ₀(1+t)^{-κ} and fixed steps.

/// Default decay exponent for the polynomial schedule.
pub const DEFAULT_DECAY_EXPONENT: f64 = 0.55;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleMode {
    Decaying,
    Fixed,
}

/// Produces the per-iteration step size δ_t.
///
/// In decaying mode δ_t = δ₀·(1+t)^{-κ}, strictly decreasing with δ_0 = δ₀;
/// in fixed mode δ_t = δ₀ for all t.
#[derive(Clone, Copy, Debug)]
pub struct StepSchedule {
    base_step: f64,
    decay_exponent: f64,
    mode: ScheduleMode,
}

impl StepSchedule {
    /// Decaying schedule with the default exponent 0.55.
    pub fn decaying(base_step: f64) -> Self {
        Self::with_exponent(base_step, DEFAULT_DECAY_EXPONENT)
    }

    pub fn with_exponent(base_step: f64, decay_exponent: f64) -> Self {
        assert!(
            base_step > 0.0 && base_step.is_finite(),
            "base_step must be positive and finite"
        );
        assert!(
            decay_exponent > 0.0,
            "decay exponent must be positive for a decreasing schedule"
        );
        StepSchedule {
            base_step,
            decay_exponent,
            mode: ScheduleMode::Decaying,
        }
    }

    pub fn fixed(base_step: f64) -> Self {
        assert!(
            base_step > 0.0 && base_step.is_finite(),
            "base_step must be positive and finite"
        );
        StepSchedule {
            base_step,
            decay_exponent: DEFAULT_DECAY_EXPONENT,
            mode: ScheduleMode::Fixed,
        }
    }

    pub fn base_step(&self) -> f64 {
        self.base_step
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    /// Step size at iteration `t` (total: always positive).
    pub fn step_size(&self, t: u64) -> f64 {
        match self.mode {
            ScheduleMode::Fixed => self.base_step,
            ScheduleMode::Decaying => {
                self.base_step * (1.0 + t as f64).powf(-self.decay_exponent)
            }
        }
    }
}
