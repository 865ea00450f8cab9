//! Short-horizon context forecasting plus controlled prediction-error
//! injection.
//!
//! The forecaster is deliberately lightweight: per field, an exponentially
//! weighted level plus an exponentially weighted one-step trend, linearly
//! extrapolated to the configured 100–200 ms horizon and clamped back into
//! the physical ranges. A constant history is a fixed point of the filter.
//!
//! Stability experiments do not rely on the filter's incidental error;
//! [`inject_error`] displaces the true next context by a seeded, bounded
//! amount so the error magnitude ε is an experiment parameter rather than an
//! artifact of the filter.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{perturb_context, ContextRanges, ContextVector, NUMERIC_FIELD_COUNT};
use crate::scalar::{clamp, Scalar};
use crate::Real;

/// Filter parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorParams<S = Real> {
    /// Smoothing coefficient λ in `(0, 1]`, applied to both level and trend.
    pub smoothing: S,
    /// Ring-buffer length in steps.
    pub window: usize,
    /// Forecast horizon in milliseconds.
    pub horizon_ms: u32,
}

impl<S: Scalar> Default for PredictorParams<S> {
    fn default() -> Self {
        Self {
            smoothing: S::from_real(0.6),
            window: 8,
            horizon_ms: 150,
        }
    }
}

impl<S: Scalar> PredictorParams<S> {
    pub fn validate(&self) -> Result<(), PredictError> {
        if !(self.smoothing > S::zero() && self.smoothing <= S::one()) {
            return Err(PredictError::BadParams {
                what: "smoothing must lie in (0, 1]",
            });
        }
        if self.window == 0 {
            return Err(PredictError::BadParams {
                what: "window must be at least one step",
            });
        }
        if !(100..=200).contains(&self.horizon_ms) {
            return Err(PredictError::BadParams {
                what: "horizon_ms must lie in the 100..=200 ms band",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("invalid predictor params: {what}")]
    BadParams { what: &'static str },
    #[error("prediction requested on an empty history buffer")]
    EmptyBuffer,
}

/// Ring buffer of recent contexts plus the filter configuration.
#[derive(Debug, Clone)]
pub struct PredictorState<S = Real> {
    params: PredictorParams<S>,
    ranges: ContextRanges<S>,
    buf: VecDeque<ContextVector<S>>,
}

impl<S: Scalar> PredictorState<S> {
    /// Build a predictor, enforcing the parameter band.
    pub fn new(params: PredictorParams<S>) -> Result<Self, PredictError> {
        params.validate()?;
        Ok(Self::with_params_unchecked(params))
    }

    /// Build a predictor without the horizon band check, for experiments
    /// that deliberately run outside it.
    pub fn with_params_unchecked(params: PredictorParams<S>) -> Self {
        Self {
            params,
            ranges: ContextRanges::default(),
            buf: VecDeque::with_capacity(params.window.max(1)),
        }
    }

    pub fn params(&self) -> &PredictorParams<S> {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Record an observation, evicting the oldest once the window is full.
    pub fn observe(&mut self, x: ContextVector<S>) {
        if self.buf.len() == self.params.window {
            self.buf.pop_front();
        }
        self.buf.push_back(x);
    }

    /// Forecast the context at `horizon_ms` past the newest observation.
    ///
    /// Runs the level/trend recurrences over the buffered window and
    /// extrapolates; outputs are clamped into the physical ranges, urgency is
    /// carried forward from the latest observation.
    pub fn predict(&self) -> Result<ContextVector<S>, PredictError> {
        let latest = self.buf.back().ok_or(PredictError::EmptyBuffer)?;
        let lambda = self.params.smoothing;
        let step_ms = self.step_ms();
        let horizon_steps = S::from_real(self.params.horizon_ms as f64 / step_ms);

        let mut predicted = [S::zero(); NUMERIC_FIELD_COUNT];
        for (idx, slot) in predicted.iter_mut().enumerate() {
            let mut level = S::zero();
            let mut trend = S::zero();
            let mut prev = S::zero();
            for (k, x) in self.buf.iter().enumerate() {
                let obs = x.numeric_fields()[idx];
                if k == 0 {
                    level = obs;
                } else {
                    let delta = obs - prev;
                    if k == 1 {
                        trend = delta;
                    } else {
                        trend = trend + lambda * (delta - trend);
                    }
                    level = level + lambda * (obs - level);
                }
                prev = obs;
            }
            *slot = level + trend * horizon_steps;
        }

        let ranges = self.ranges.as_array();
        for (p, r) in predicted.iter_mut().zip(ranges) {
            *p = clamp(*p, r.lo, r.hi);
        }
        let mut out = latest.with_numeric_fields(predicted);
        out.timestamp_ms = latest.timestamp_ms + self.params.horizon_ms as i64;
        Ok(out)
    }

    /// Sampling cadence inferred from the newest pair of timestamps; a
    /// single-entry buffer assumes the sensing default of 20 ms.
    fn step_ms(&self) -> f64 {
        let n = self.buf.len();
        if n >= 2 {
            let a = self.buf[n - 2].timestamp_ms;
            let b = self.buf[n - 1].timestamp_ms;
            ((b - a) as f64).max(1.0)
        } else {
            20.0
        }
    }
}

/// Bound and seed for a controlled prediction-error displacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionErrorSpec<S = Real> {
    /// Bound on the normalised L∞ displacement of the predicted context.
    pub epsilon: S,
    pub seed: u64,
}

impl<S: Scalar> PredictionErrorSpec<S> {
    pub fn new(epsilon: S, seed: u64) -> Self {
        Self { epsilon, seed }
    }
}

/// Displace the true next context by at most `spec.epsilon` in the declared
/// normalised norm. Deterministic per seed; ε = 0 returns the input.
///
/// The urgency class is never displaced, so any selector consuming the
/// output sees exactly the prediction-error model the stability analysis
/// assumes and nothing else.
pub fn inject_error<S: Scalar>(
    x_true: &ContextVector<S>,
    spec: &PredictionErrorSpec<S>,
) -> ContextVector<S> {
    perturb_context(x_true, spec.epsilon, spec.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{normalized_distance, Urgency};
    use approx::assert_relative_eq;

    fn ctx(ts: i64, snr: f64) -> ContextVector {
        ContextVector {
            timestamp_ms: ts,
            snr_db: snr,
            per: 0.05,
            speed_mps: 13.9,
            accel_mps2: 0.0,
            connectivity_horizon_s: 5.0,
            urgency: Urgency::Telemetry,
            cpu_load: 0.6,
            visibility_m: 1000.0,
            ambient_temp_c: 15.0,
        }
    }

    #[test]
    fn constant_history_is_a_fixed_point() {
        let mut p = PredictorState::new(PredictorParams::default()).unwrap();
        for k in 0..8 {
            p.observe(ctx(k * 20, 18.0));
        }
        let out = p.predict().unwrap();
        let reference = ctx(0, 18.0);
        assert_eq!(out.numeric_fields(), reference.numeric_fields());
        assert_eq!(out.urgency, Urgency::Telemetry);
        assert_eq!(out.timestamp_ms, 140 + 150);
    }

    #[test]
    fn empty_buffer_is_an_error() {
        let p = PredictorState::<f64>::new(PredictorParams::default()).unwrap();
        assert!(matches!(p.predict(), Err(PredictError::EmptyBuffer)));
    }

    /// Closed-form response of the level/trend filter to a linear ramp
    /// `x_k = x0 + r k`: the trend locks to `r` exactly (it is initialised at
    /// the first delta and every later delta equals `r`), and the level obeys
    /// `level_k = x_k - (r (1-λ)/λ) (1 - (1-λ)^k)` for k >= 1.
    #[test]
    fn ramp_prediction_matches_closed_form_filter_response() {
        let lambda = 0.6;
        let rate = 0.1; // dB per step
        let x0 = 10.0;
        let n = 8usize;
        let horizon_ms = 100u32;
        let step_ms = 20.0;

        let mut p = PredictorState::new(PredictorParams {
            smoothing: lambda,
            window: n,
            horizon_ms,
        })
        .unwrap();
        for k in 0..n {
            p.observe(ctx(k as i64 * 20, x0 + rate * k as f64));
        }
        let out = p.predict().unwrap();

        let k = (n - 1) as f64;
        let x_last = x0 + rate * k;
        let lag = rate * (1.0 - lambda) / lambda * (1.0 - (1.0 - lambda).powf(k));
        let level = x_last - lag;
        let expected = level + rate * (horizon_ms as f64 / step_ms);
        assert_relative_eq!(out.snr_db, expected, max_relative = 1e-12);

        // The forecast tracks the true extrapolation within the filter lag.
        let truth = x_last + rate * (horizon_ms as f64 / step_ms);
        assert!((out.snr_db - truth).abs() <= rate * (1.0 - lambda) / lambda + 1e-12);
    }

    #[test]
    fn per_prediction_stays_in_unit_interval_under_steep_ramp() {
        let mut p = PredictorState::new(PredictorParams::default()).unwrap();
        for k in 0..8i64 {
            let mut x = ctx(k * 20, 18.0);
            x.per = (0.6 + 0.05 * k as f64).min(1.0);
            p.observe(x);
        }
        let out = p.predict().unwrap();
        assert!((0.0..=1.0).contains(&out.per));
    }

    #[test]
    fn horizon_band_is_enforced_but_overridable() {
        let bad = PredictorParams::<f64> {
            horizon_ms: 500,
            ..Default::default()
        };
        assert!(PredictorState::new(bad).is_err());
        let p = PredictorState::with_params_unchecked(bad);
        assert_eq!(p.params().horizon_ms, 500);
    }

    #[test]
    fn injected_error_is_identity_at_zero() {
        let x = ctx(0, 18.0);
        let spec = PredictionErrorSpec::new(0.0, 4);
        assert_eq!(inject_error(&x, &spec), x);
    }

    #[test]
    fn injected_error_is_bounded_and_non_degenerate() {
        let x = ctx(0, 18.0);
        let ranges = ContextRanges::default();
        let mut reached = false;
        for seed in 0..100u64 {
            let y = inject_error(&x, &PredictionErrorSpec::new(0.30, seed));
            let d = normalized_distance(&x, &y, &ranges);
            assert!(d <= 0.30 + 1e-12);
            if d >= 0.25 {
                reached = true;
            }
        }
        assert!(reached, "error injection never came close to its bound");
    }

    #[test]
    fn epsilon_grid_for_sweeps_is_expressible() {
        let grid: Vec<f64> = (0..=6).map(|k| 0.05 * k as f64).collect();
        assert_eq!(grid.len(), 7);
        assert_relative_eq!(grid[6], 0.30, max_relative = 1e-12);
        for w in grid.windows(2) {
            assert!(w[1] > w[0]);
        }
    }
}
