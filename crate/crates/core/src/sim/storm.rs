use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::weather::WeatherSeries;

/// Constant rain rate over `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pulse {
    pub start_s: f64,
    pub end_s: f64,
    pub rate_mm_per_h: f64,
}

impl Pulse {
    pub fn rate_mps(&self) -> f64 {
        self.rate_mm_per_h / 3.6e6
    }

    /// Rain depth delivered by the pulse (mm).
    pub fn depth_mm(&self) -> f64 {
        self.rate_mm_per_h * (self.end_s - self.start_s) / 3600.0
    }
}

/// Rectangular rain pulses over a constant evapotranspiration baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StormSpec {
    pub name: String,
    pub duration_s: f64,
    pub evaporation_m3ps: f64,
    pub pulses: Vec<Pulse>,
}

const WET_12H: &str = include_str!("../../presets/wet-12h.json");

impl StormSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: StormSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Built-in presets by name.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "wet-12h" => StormSpec::from_json_str(WET_12H),
            _ => Err(Error::Weather(format!("unknown storm preset `{name}`"))),
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["wet-12h"]
    }

    pub fn total_depth_mm(&self) -> f64 {
        self.pulses.iter().map(Pulse::depth_mm).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !(self.evaporation_m3ps >= 0.0) {
            return Err(Error::Weather(
                "storm needs a positive duration and non-negative evaporation".into(),
            ));
        }
        for p in &self.pulses {
            if !(p.start_s >= 0.0 && p.end_s > p.start_s && p.rate_mm_per_h >= 0.0)
                || !p.rate_mm_per_h.is_finite()
            {
                return Err(Error::Weather(format!(
                    "bad pulse [{}, {}) at {} mm/h",
                    p.start_s, p.end_s, p.rate_mm_per_h
                )));
            }
        }
        let mut sorted = self.pulses.clone();
        sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        for w in sorted.windows(2) {
            if w[1].start_s < w[0].end_s {
                return Err(Error::OverlappingPulses(
                    w[0].start_s,
                    w[0].end_s,
                    w[1].start_s,
                    w[1].end_s,
                ));
            }
        }
        Ok(())
    }
}

/// Sample the storm every `tau` seconds; sample `k` holds the rate at `kτ`.
pub fn synth_storm(spec: &StormSpec, tau: f64) -> Result<WeatherSeries> {
    spec.validate()?;
    if !(tau > 0.0) {
        return Err(Error::Weather(format!("invalid sample period {tau}")));
    }
    let n = (spec.duration_s / tau).ceil() as usize;
    let w_r = (0..n)
        .map(|k| {
            let t = k as f64 * tau;
            spec.pulses
                .iter()
                .find(|p| p.start_s <= t && t < p.end_s)
                .map_or(0.0, Pulse::rate_mps)
        })
        .collect();
    WeatherSeries::new(0.0, tau, w_r, vec![spec.evaporation_m3ps; n])
}
