use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Disturbance;

pub const WEATHER_HEADER: [&str; 3] = ["t_s", "w_r_mps", "w_e_m3ps"];

/// Allowed deviation of a timestamp from the uniform sampling grid (s).
const JITTER: f64 = 1e-6;

/// Uniformly sampled disturbance series. Sample `k` is held over `[t0 + kτ, t0 + (k+1)τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries {
    pub t0: f64,
    pub period: f64,
    pub w_r: Vec<f64>,
    pub w_e: Vec<f64>,
}

impl WeatherSeries {
    pub fn new(t0: f64, period: f64, w_r: Vec<f64>, w_e: Vec<f64>) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) || !t0.is_finite() {
            return Err(Error::Weather(format!("invalid sample period {period}")));
        }
        if w_r.len() != w_e.len() {
            return Err(Error::Weather("rain and evaporation lengths differ".into()));
        }
        if w_r.is_empty() {
            return Err(Error::Weather("no samples".into()));
        }
        if let Some(k) = (0..w_r.len()).find(|&k| !Disturbance::new(w_r[k], w_e[k]).is_valid()) {
            return Err(Error::Weather(format!(
                "sample {k} is negative or non-finite: ({}, {})",
                w_r[k], w_e[k]
            )));
        }
        Ok(WeatherSeries {
            t0,
            period,
            w_r,
            w_e,
        })
    }

    /// Same disturbance at every sample.
    pub fn constant(w: Disturbance, period: f64, len: usize) -> Result<Self> {
        WeatherSeries::new(0.0, period, vec![w.w_r; len], vec![w.w_e; len])
    }

    pub fn len(&self) -> usize {
        self.w_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w_r.is_empty()
    }

    pub fn at(&self, k: usize) -> Disturbance {
        Disturbance::new(self.w_r[k], self.w_e[k])
    }

    /// Samples `k..k+len`, erroring when the series is too short.
    pub fn window(&self, k: usize, len: usize) -> Result<Vec<Disturbance>> {
        if k + len > self.len() {
            return Err(Error::Weather(format!(
                "series has {} samples, need {}",
                self.len(),
                k + len
            )));
        }
        Ok((k..k + len).map(|i| self.at(i)).collect())
    }

    pub fn disturbances(&self) -> impl Iterator<Item = Disturbance> + '_ {
        (0..self.len()).map(|k| self.at(k))
    }

    /// Linear interpolation onto a new period, keeping both endpoints.
    pub fn resample(&self, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Weather(format!("invalid sample period {period}")));
        }
        let span = (self.len() - 1) as f64 * self.period;
        let n = (span / period + JITTER).floor() as usize + 1;
        let mut w_r = Vec::with_capacity(n);
        let mut w_e = Vec::with_capacity(n);
        for k in 0..n {
            let s = (k as f64 * period / self.period).min((self.len() - 1) as f64);
            let i = (s.floor() as usize).min(self.len() - 1);
            let frac = s - i as f64;
            let lerp = |v: &[f64]| {
                if frac == 0.0 || i + 1 == v.len() {
                    v[i]
                } else {
                    v[i] + frac * (v[i + 1] - v[i])
                }
            };
            w_r.push(lerp(&self.w_r));
            w_e.push(lerp(&self.w_e));
        }
        WeatherSeries::new(self.t0, period, w_r, w_e)
    }
}

/// Parse a weather CSV with header `t_s,w_r_mps,w_e_m3ps` and resample to `tau`.
pub fn parse_weather_csv(reader: impl Read, tau: f64) -> Result<WeatherSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != WEATHER_HEADER {
        return Err(Error::WeatherLine {
            line: 1,
            msg: format!("expected header `{}`", WEATHER_HEADER.join(",")),
        });
    }
    let (mut t, mut w_r, mut w_e) = (Vec::new(), Vec::new(), Vec::new());
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::WeatherLine {
            line,
            msg: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(Error::WeatherLine {
                line,
                msg: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let mut vals = [0.0; 3];
        for (slot, field) in vals.iter_mut().zip(record.iter()) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::WeatherLine {
                    line,
                    msg: format!("`{field}` is not a finite number"),
                })?;
        }
        if vals[1] < 0.0 || vals[2] < 0.0 {
            return Err(Error::WeatherLine {
                line,
                msg: "negative rate".into(),
            });
        }
        t.push(vals[0]);
        w_r.push(vals[1]);
        w_e.push(vals[2]);
    }
    if t.is_empty() {
        return Err(Error::Weather("no samples".into()));
    }
    // median gap, so one bad timestamp is blamed on its own line
    let period = if t.len() > 1 {
        let mut gaps: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_by(f64::total_cmp);
        let m = gaps.len() / 2;
        if gaps.len() % 2 == 1 {
            gaps[m]
        } else {
            0.5 * (gaps[m - 1] + gaps[m])
        }
    } else {
        tau
    };
    if !(period > 0.0) {
        return Err(Error::WeatherLine {
            line: 3,
            msg: "timestamps must increase".into(),
        });
    }
    for (k, &tk) in t.iter().enumerate() {
        if (tk - (t[0] + k as f64 * period)).abs() > JITTER {
            return Err(Error::WeatherLine {
                line: k + 2,
                msg: format!("timestamp {tk} breaks the uniform period {period}"),
            });
        }
    }
    WeatherSeries::new(t[0], period, w_r, w_e)?.resample(tau)
}

pub fn load_weather_csv(path: &Path, tau: f64) -> Result<WeatherSeries> {
    parse_weather_csv(std::fs::File::open(path)?, tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, tau: f64) -> Result<WeatherSeries> {
        parse_weather_csv(text.as_bytes(), tau)
    }

    #[test]
    fn constant_file() {
        let s = parse("t_s,w_r_mps,w_e_m3ps\n0,1e-6,4e-5\n3600,1e-6,4e-5\n", 60.0).unwrap();
        assert_eq!(s.len(), 61);
        assert!(s.disturbances().all(|w| w == Disturbance::new(1e-6, 4e-5)));
    }

    #[test]
    fn hourly_to_seconds_is_piecewise_linear() {
        let s = parse(
            "t_s,w_r_mps,w_e_m3ps\n0,0,0\n3600,3.6e-6,1\n7200,0,1\n",
            1.0,
        )
        .unwrap();
        assert_eq!(s.len(), 7201);
        assert_eq!(s.w_r[0], 0.0);
        assert_eq!(s.w_r[3600], 3.6e-6);
        assert_eq!(s.w_r[7200], 0.0);
        assert!((s.w_r[1800] - 1.8e-6).abs() < 1e-20);
        assert!((s.w_e[900] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse("t_s,w_r_mps,w_e_m3ps\n0,0,0\n1,abc,0\n", 1.0).unwrap_err();
        assert!(matches!(e, Error::WeatherLine { line: 3, .. }), "{e}");
        let e = parse("t_s,w_r_mps,w_e_m3ps\n0,0,0\n1,-1,0\n", 1.0).unwrap_err();
        assert!(matches!(e, Error::WeatherLine { line: 3, .. }));
        let e = parse("t_s,w_r_mps,w_e_m3ps\n0,0,0\n1,0,0\n2,0,0\n3.5,0,0\n", 1.0).unwrap_err();
        assert!(matches!(e, Error::WeatherLine { line: 5, .. }), "{e}");
        let e = parse("time,rain,evap\n0,0,0\n", 1.0).unwrap_err();
        assert!(matches!(e, Error::WeatherLine { line: 1, .. }));
    }

    #[test]
    fn empty_file_has_no_samples() {
        let e = parse("t_s,w_r_mps,w_e_m3ps\n", 1.0).unwrap_err();
        assert!(e.to_string().contains("no samples"));
    }

    #[test]
    fn small_jitter_is_tolerated() {
        let s = parse("t_s,w_r_mps,w_e_m3ps\n0,0,0\n1.0000005,0,0\n2,0,0\n", 1.0).unwrap();
        assert_eq!(s.len(), 3);
    }
}
