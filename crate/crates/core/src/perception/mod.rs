//! Signal-level models of the camera estimators.
//!
//! The bearing network is replaced by exact interval quantization plus a
//! seeded label-noise channel; the distance estimator synthesizes a depth patch
//! with background contamination and recovers the distance by sigma clipping.
//! Both raw estimates pass through a [`TemporalFilter`].

mod bearing;
mod depth;
mod filter;

pub use bearing::{
    class_center, label_of, measure_bearing, BearingClassifier, BearingClassifierModel, BearingMeasurement,
};
pub use depth::{clipped_mean, measure_depth, sigma_clip, DepthEstimator, DepthEstimatorModel};
pub use filter::{filter_step, TemporalFilter};

use crate::error::Result;

/// One row of a follower's estimate history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateSample {
    pub t: f64,
    pub phi_raw: Option<f64>,
    pub phi_filtered: Option<f64>,
    pub l_raw: Option<f64>,
    pub l_filtered: Option<f64>,
    pub visible: bool,
}

/// Time series of raw and filtered estimates.
pub type EstimateStream = Vec<EstimateSample>;

/// The full estimator chain of one follower.
#[derive(Debug, Clone)]
pub struct PairEstimator {
    bearing: BearingClassifier,
    depth: DepthEstimator,
    phi_filter: TemporalFilter,
    l_filter: TemporalFilter,
    ideal: bool,
    /// Last exact reading, used when `ideal` bypasses the filters.
    exact_hold: Option<(f64, f64)>,
}

impl PairEstimator {
    pub fn new(bearing: BearingClassifierModel, depth: DepthEstimatorModel, k_f: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            bearing: BearingClassifier::new(bearing, seed)?,
            // separate stream so depth draws never shift bearing draws
            depth: DepthEstimator::new(depth, seed ^ 0xD3E7_0000_0000_0001)?,
            phi_filter: TemporalFilter::new(k_f)?,
            l_filter: TemporalFilter::new(k_f)?,
            ideal: false,
            exact_hold: None,
        })
    }

    /// Perfect perception: exact `(L, phi)` while visible, frozen otherwise.
    /// The temporal filters are bypassed.
    pub fn ideal(bearing: BearingClassifierModel, depth: DepthEstimatorModel, k_f: f64) -> Result<Self> {
        let mut est = Self::new(bearing, depth, k_f, 0)?;
        est.ideal = true;
        Ok(est)
    }

    /// Processes one camera frame. `visible` is the upstream visibility (depth
    /// band); the bearing classifier may still report the leader as out of view.
    pub fn observe(&mut self, t: f64, l_true: f64, phi_true: f64, visible: bool) -> EstimateSample {
        if self.ideal {
            return self.observe_exact(t, l_true, phi_true, visible);
        }
        let reading = self.bearing.measure(phi_true, visible);
        let (phi_raw, l_raw) = match reading.phi_hat {
            Some(phi_hat) => (Some(phi_hat), self.depth.measure(l_true).ok()),
            None => (None, None),
        };
        if let Some(phi) = phi_raw {
            self.phi_filter.step(phi);
        }
        if let Some(l) = l_raw {
            self.l_filter.step(l);
        }
        EstimateSample {
            t,
            phi_raw,
            phi_filtered: self.phi_filter.value(),
            l_raw,
            l_filtered: self.l_filter.value(),
            visible: phi_raw.is_some(),
        }
    }

    fn observe_exact(&mut self, t: f64, l_true: f64, phi_true: f64, visible: bool) -> EstimateSample {
        let model = self.bearing.model();
        let seen = visible && label_of(phi_true, model) != model.not_visible_label();
        if seen {
            self.exact_hold = Some((phi_true, l_true));
        }
        let raw = seen.then_some((phi_true, l_true));
        EstimateSample {
            t,
            phi_raw: raw.map(|r| r.0),
            phi_filtered: self.exact_hold.map(|h| h.0),
            l_raw: raw.map(|r| r.1),
            l_filtered: self.exact_hold.map(|h| h.1),
            visible: seen,
        }
    }
}
