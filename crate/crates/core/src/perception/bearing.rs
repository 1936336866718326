//! Quantized bearing classifier with a seeded misclassification channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the bearing classifier channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BearingClassifierModel {
    /// Number of equal intervals the field of view is split into.
    pub n_classes_in_fov: usize,
    pub psi_max: f64,
    pub misclass_rate: f64,
    /// Largest label shift applied by a misclassification.
    pub misclass_spread: usize,
}

impl BearingClassifierModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_classes_in_fov > 0
            && self.psi_max > 0.0
            && self.psi_max < std::f64::consts::FRAC_PI_2
            && (0.0..1.0).contains(&self.misclass_rate)
            && (self.misclass_rate == 0.0 || self.misclass_spread > 0);
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid bearing classifier {self:?}")))
        }
    }

    pub fn class_width(&self) -> f64 {
        2.0 * self.psi_max / self.n_classes_in_fov as f64
    }

    /// Label reserved for "leader not in view".
    pub fn not_visible_label(&self) -> usize {
        self.n_classes_in_fov
    }

    pub fn label_count(&self) -> usize {
        self.n_classes_in_fov + 1
    }
}

impl Default for BearingClassifierModel {
    // 0.5236 is the camera half-angle as specified, not pi/6
    #[allow(clippy::approx_constant)]
    fn default() -> Self {
        Self {
            n_classes_in_fov: 20,
            psi_max: 0.5236,
            misclass_rate: 0.1,
            misclass_spread: 3,
        }
    }
}

/// Class index of the interval `[-psi_max + k w, -psi_max + (k + 1) w)` holding
/// `phi`. Bearings at or beyond the edges map to the not-visible label, except
/// `-psi_max` itself which opens class 0.
pub fn label_of(phi: f64, model: &BearingClassifierModel) -> usize {
    if !phi.is_finite() || phi.abs() >= model.psi_max && phi != -model.psi_max {
        return model.not_visible_label();
    }
    let k = ((phi + model.psi_max) / model.class_width()).floor();
    // Rounding right below +psi_max can land on n; clamp onto the last class.
    (k.max(0.0) as usize).min(model.n_classes_in_fov - 1)
}

pub fn class_center(label: usize, model: &BearingClassifierModel) -> Result<f64> {
    if label >= model.n_classes_in_fov {
        return Err(Error::OutOfFovLabel { label });
    }
    Ok(-model.psi_max + (label as f64 + 0.5) * model.class_width())
}

/// One classifier reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingMeasurement {
    pub label: usize,
    /// Class center, absent when the leader is not visible.
    pub phi_hat: Option<f64>,
    /// Whether the misclassification channel fired on this draw.
    pub perturbed: bool,
}

/// Stateful classifier: the model plus a private random stream.
#[derive(Debug, Clone)]
pub struct BearingClassifier {
    model: BearingClassifierModel,
    rng: ChaCha8Rng,
}

impl BearingClassifier {
    pub fn new(model: BearingClassifierModel, seed: u64) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn model(&self) -> &BearingClassifierModel {
        &self.model
    }

    /// Classifies `phi_true`; `visible = false` short-circuits to the
    /// not-visible label (e.g. when the depth band already excludes the leader).
    pub fn measure(&mut self, phi_true: f64, visible: bool) -> BearingMeasurement {
        let model = self.model;
        let hidden = BearingMeasurement {
            label: model.not_visible_label(),
            phi_hat: None,
            perturbed: false,
        };
        if !visible {
            return hidden;
        }
        let mut label = label_of(phi_true, &model);
        if label == model.not_visible_label() {
            return hidden;
        }
        // Always draw so the random stream advances identically per visible frame.
        let fire = self.rng.gen::<f64>() < model.misclass_rate;
        let spread = model.misclass_spread.max(1) as i64;
        let magnitude = self.rng.gen_range(1..=spread);
        let sign = if self.rng.gen::<bool>() { 1 } else { -1 };
        if fire {
            let shifted = label as i64 + sign * magnitude;
            label = shifted.clamp(0, model.n_classes_in_fov as i64 - 1) as usize;
        }
        BearingMeasurement {
            label,
            phi_hat: Some(class_center(label, &model).expect("in-view label")),
            perturbed: fire,
        }
    }
}

pub fn measure_bearing(phi_true: f64, visible: bool, classifier: &mut BearingClassifier) -> BearingMeasurement {
    classifier.measure(phi_true, visible)
}
