// SPDX-License-Identifier: MPL-2.0

//! Run configuration: a flat key-value (TOML) document, identical on both
//! servers. The digest of the canonical serialization is exchanged in the
//! `Hello` message and must match before aggregation starts.

use hh_core::heavy::{DpParams, HeavyConfig, Threshold};
use hh_core::transport::ProtocolError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Heavy,
    Histogram,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Client string length in bits.
    pub bits: usize,
    /// Expected number of client submissions; ingest stops once reached.
    pub clients: u64,
    pub mode: Mode,
    /// Heaviness threshold as a fraction of submitted clients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Absolute heaviness threshold; overrides `tau` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u64>,
    /// Per-query differential-privacy parameter; noise off when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp_epsilon: Option<f64>,
    /// Overall DP slack δ, reported in budget summaries only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp_delta: Option<f64>,
    /// Abort when the disqualified fraction exceeds this (default 1.0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_disqualified_frac: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| ProtocolError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.bits == 0 || self.bits > 4096 {
            return Err(ProtocolError::Config("bits out of range".into()));
        }
        if self.mode == Mode::Heavy && self.tau.is_none() && self.threshold.is_none() {
            return Err(ProtocolError::Config(
                "heavy mode needs tau or threshold".into(),
            ));
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(ProtocolError::Config("tau out of (0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn heavy_config(&self) -> HeavyConfig {
        let threshold = match (self.threshold, self.tau) {
            (Some(t), _) => Threshold::Absolute(t),
            (None, Some(tau)) => Threshold::Fraction(tau),
            (None, None) => Threshold::Absolute(1),
        };
        HeavyConfig {
            bits: self.bits,
            threshold,
            dp: self.dp_epsilon.map(|epsilon| DpParams { epsilon }),
            abort_disqualified_frac: self.abort_disqualified_frac.unwrap_or(1.0),
        }
    }

    /// Digest of the canonical serialization, compared across servers.
    pub fn digest(&self) -> [u8; 32] {
        let canonical = toml::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).into()
    }
}
