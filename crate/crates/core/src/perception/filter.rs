/// First-order linear temporal filter `y_t = K_f x_t + (1 - K_f) y_{t-1}`.
///
/// The first sample seeds the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalFilter {
    gain: f64,
    state: Option<f64>,
}

impl TemporalFilter {
    pub fn new(gain: f64) -> crate::Result<Self> {
        if !(gain > 0.0 && gain < 1.0) {
            return Err(crate::Error::Config(format!(
                "filter gain must lie in (0, 1), got {gain}"
            )));
        }
        Ok(Self { gain, state: None })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn value(&self) -> Option<f64> {
        self.state
    }

    pub fn step(&mut self, raw: f64) -> f64 {
        debug_assert!(raw.is_finite());
        let next = match self.state {
            None => raw,
            Some(prev) => self.gain * raw + (1.0 - self.gain) * prev,
        };
        self.state = Some(next);
        next
    }

    /// Steady-state output variance over input variance for white noise input.
    pub fn white_noise_variance_ratio(&self) -> f64 {
        self.gain / (2.0 - self.gain)
    }
}

pub fn filter_step(filter: &mut TemporalFilter, raw: f64) -> f64 {
    filter.step(raw)
}
