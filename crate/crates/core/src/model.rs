//! Exact (non-smooth) two-tank plant.
//!
//! Tank 1 is the underground cistern, tank 2 the soil of the green roof.
//! Volumes are in m³, flows in m³/s. Rain `w_r` is a rate in m/s collected
//! over the cistern inlet area `a_in` and over the roof area `a2`;
//! evapotranspiration `w_e` is already a volumetric rate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the cistern / green roof system.
///
/// [`Default`] gives the reference site values. Serialized keys follow the
/// usual symbol names (`a1`, `z_H`, `D`, ...); `a_hat`, `c_hat` and `tau`
/// also accept `â`, `ĉ` and `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    /// Cistern bottom area (m²).
    pub a1: f64,
    /// Green roof area (m²).
    pub a2: f64,
    /// Flow area through the pump (m²).
    pub a_pump: f64,
    /// Cistern inlet area (m²).
    pub a_in: f64,
    /// Quadratic pump-curve coefficient (s²/m⁵), negative.
    #[serde(alias = "â")]
    pub a_hat: f64,
    /// Pump shut-off head (m).
    #[serde(alias = "ĉ")]
    pub c_hat: f64,
    /// Outlet discharge coefficient.
    pub c_d: f64,
    /// Elevation of the roof above the cistern (m).
    pub d: f64,
    /// Pipe diameter (m).
    #[serde(rename = "D")]
    pub d_pipe: f64,
    /// Pipe friction factor.
    #[serde(rename = "F")]
    pub friction: f64,
    pub g: f64,
    /// Saturated hydraulic conductivity of the soil (m/s).
    #[serde(rename = "K")]
    pub k_sat: f64,
    /// Minor loss coefficient.
    #[serde(rename = "k_L")]
    pub k_minor: f64,
    /// Pipe length (m).
    pub l: f64,
    /// Outlet radius (m).
    pub r_o: f64,
    /// Time step (s).
    #[serde(alias = "τ")]
    pub tau: f64,
    /// Soil capacity (m³).
    pub z_cap: f64,
    /// Net positive suction head (m).
    #[serde(rename = "z_H")]
    pub z_h: f64,
    /// Outlet elevation (m).
    pub z_o: f64,
    /// Pump elevation above the cistern floor (m).
    pub z_pump: f64,
    /// Soil depth (m).
    pub z_soil: f64,
    /// Desired water depth in the soil (m).
    pub z_veg: f64,
    /// Upper clamp of the cistern volume (m³).
    pub cap1: f64,
    /// Upper clamp of the roof volume (m³).
    pub cap2: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        let a1 = 25.0;
        let a2 = 68.8;
        let z_o = 3.0;
        let z_soil = 0.5;
        PlantParams {
            a1,
            a2,
            a_pump: 0.01 * PI,
            a_in: 0.305 * 0.305 * PI,
            a_hat: -5.78e5,
            c_hat: 55.2,
            c_d: 0.61,
            d: 16.0,
            d_pipe: 0.2,
            friction: 3.56,
            g: 9.81,
            k_sat: 7.83e-8,
            k_minor: 0.6,
            l: 18.4,
            r_o: 0.125,
            tau: 1.0,
            z_cap: a2 * z_soil,
            z_h: 0.6,
            z_o,
            z_pump: 0.15,
            z_soil,
            z_veg: 4.57e-2,
            cap1: 2.0 * a1 * z_o,
            cap2: a2 * z_soil,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a1", self.a1),
            ("a2", self.a2),
            ("a_pump", self.a_pump),
            ("a_in", self.a_in),
            ("c_d", self.c_d),
            ("d", self.d),
            ("D", self.d_pipe),
            ("F", self.friction),
            ("g", self.g),
            ("K", self.k_sat),
            ("l", self.l),
            ("r_o", self.r_o),
            ("tau", self.tau),
            ("z_cap", self.z_cap),
            ("z_H", self.z_h),
            ("z_o", self.z_o),
            ("z_pump", self.z_pump),
            ("z_soil", self.z_soil),
            ("z_veg", self.z_veg),
            ("cap1", self.cap1),
            ("cap2", self.cap2),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameters(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.k_minor.is_finite() && self.k_minor >= 0.0) {
            return Err(Error::InvalidParameters(format!(
                "k_L must be non-negative, got {}",
                self.k_minor
            )));
        }
        if !(self.a_hat < 0.0) {
            return Err(Error::InvalidParameters(format!(
                "a_hat must be negative, got {}",
                self.a_hat
            )));
        }
        if !(self.c_hat > self.d) {
            return Err(Error::InvalidParameters(format!(
                "c_hat ({}) must exceed d ({})",
                self.c_hat, self.d
            )));
        }
        let b = self.pump_coefficient();
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "pump coefficient b is not real and positive ({b})"
            )));
        }
        Ok(())
    }

    /// Outlet coefficient `c_d·π·r_o²·√(2g)`.
    pub fn c_out(&self) -> f64 {
        self.c_d * PI * self.r_o * self.r_o * (2.0 * self.g).sqrt()
    }

    /// Friction plus minor head loss per unit squared flow, `(F·l/D + k_L)/(2g·a_pump²)`.
    pub fn head_loss_coefficient(&self) -> f64 {
        (self.friction * self.l / self.d_pipe + self.k_minor)
            / (2.0 * self.g * self.a_pump * self.a_pump)
    }

    /// `b = (head_loss_coefficient − â)^(−1/2)`.
    pub fn pump_coefficient(&self) -> f64 {
        (self.head_loss_coefficient() - self.a_hat).powf(-0.5)
    }

    /// Desired roof volume `x₂* = a2·z_veg`.
    pub fn x2_target(&self) -> f64 {
        self.a2 * self.z_veg
    }

    /// Minimum cistern volume at which the pumps can run, `a1·(z_pump + z_H)`.
    pub fn x1_pump_threshold(&self) -> f64 {
        self.a1 * (self.z_pump + self.z_h)
    }

    pub fn contains(&self, x: State) -> bool {
        (0.0..=self.cap1).contains(&x.x1) && (0.0..=self.cap2).contains(&x.x2)
    }

    pub fn clamp(&self, x: State) -> State {
        State {
            x1: x.x1.clamp(0.0, self.cap1),
            x2: x.x2.clamp(0.0, self.cap2),
        }
    }

    /// Gravity discharge through the cistern outlet.
    pub fn q_out(&self, x1: f64) -> f64 {
        let head = x1 / self.a1 - self.z_o;
        if head > 0.0 {
            self.c_out() * head.sqrt()
        } else {
            0.0
        }
    }

    /// Maximum aggregate pump flow: the non-negative intersection of the
    /// quadratic pump curve `â·y² + ĉ` with the pipe head loss.
    pub fn q_pump_max(&self, x1: f64) -> Result<f64> {
        let radicand = x1 / self.a1 + self.c_hat - self.d;
        if !(radicand > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "pump radicand {radicand} is not positive"
            )));
        }
        Ok(self.pump_coefficient() * radicand.sqrt())
    }

    pub fn q_pump(&self, x: State, u: f64) -> Result<f64> {
        check_control(u)?;
        if x.x2 / self.a2 >= self.z_veg || x.x1 / self.a1 < self.z_pump + self.z_h {
            return Ok(0.0);
        }
        Ok(u * self.q_pump_max(x.x1)?)
    }

    /// Darcy drainage once the soil is at capacity.
    pub fn q_drain(&self, x2: f64) -> f64 {
        if x2 < self.z_cap {
            0.0
        } else {
            self.k_sat * self.a2 * (x2 / self.a2 + self.z_soil) / self.z_soil
        }
    }

    /// Right-hand side `f(x, u, w)` of the volume balance.
    pub fn f_rhs(&self, x: State, u: f64, w: Disturbance) -> Result<[f64; 2]> {
        let pump = self.q_pump(x, u)?;
        Ok([
            w.w_r * self.a_in - self.q_out(x.x1) - pump,
            w.w_r * self.a2 + pump - w.w_e - self.q_drain(x.x2),
        ])
    }

    /// One forward-Euler step followed by the box clamp.
    pub fn step(&self, x: State, u: f64, w: Disturbance) -> Result<State> {
        Ok(self.step_detailed(x, u, w)?.state)
    }

    /// Like [`step`](Self::step) but also reports the rate and how much the clamp removed.
    pub fn step_detailed(&self, x: State, u: f64, w: Disturbance) -> Result<StepOutcome> {
        let rate = self.f_rhs(x, u, w)?;
        let raw = State {
            x1: x.x1 + self.tau * rate[0],
            x2: x.x2 + self.tau * rate[1],
        };
        let state = self.clamp(raw);
        Ok(StepOutcome {
            state,
            rate,
            clamp_correction: [state.x1 - raw.x1, state.x2 - raw.x2],
        })
    }
}

pub(crate) fn check_control(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::ControlOutOfRange(u))
    }
}

/// Water volumes (m³) in the cistern and in the roof soil.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x1: f64,
    pub x2: f64,
}

impl State {
    pub fn new(x1: f64, x2: f64) -> Self {
        State { x1, x2 }
    }
}

/// Precipitation rate (m/s) and evapotranspiration rate (m³/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Disturbance {
    pub w_r: f64,
    pub w_e: f64,
}

impl Disturbance {
    pub fn new(w_r: f64, w_e: f64) -> Self {
        Disturbance { w_r, w_e }
    }

    pub fn is_valid(&self) -> bool {
        self.w_r.is_finite() && self.w_e.is_finite() && self.w_r >= 0.0 && self.w_e >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: State,
    pub rate: [f64; 2],
    /// Clamped minus unclamped state; zero when no bound was hit.
    pub clamp_correction: [f64; 2],
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> PlantParams {
        PlantParams::default()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn defaults_are_valid() {
        let p = p();
        p.validate().unwrap();
        assert_eq!(p.z_cap, p.a2 * p.z_soil);
        assert!(rel(p.pump_coefficient(), 1.2965e-3) < 1e-4);
    }

    #[test]
    fn validate_rejects_bad_values() {
        let mut q = p();
        q.a_hat = 1.0;
        assert!(q.validate().is_err());
        let mut q = p();
        q.c_hat = 10.0;
        assert!(q.validate().is_err());
        let mut q = p();
        q.tau = 0.0;
        assert!(q.validate().is_err());
    }

    #[test]
    fn q_out_spot_values() {
        let p = p();
        assert_eq!(p.q_out(75.0), 0.0);
        assert_eq!(p.q_out(0.0), 0.0);
        let expected = 0.61 * PI * 0.125f64.powi(2) * 19.62f64.sqrt();
        assert!(rel(p.q_out(100.0), expected) < 1e-12);
        assert!(rel(p.q_out(100.0), 0.13263) < 1e-4);
    }

    #[test]
    fn q_pump_max_spot_values() {
        let p = p();
        assert!(rel(p.q_pump_max(0.0).unwrap(), 8.117e-3) < 1e-3);
        assert!(rel(p.q_pump_max(100.0).unwrap(), 8.521e-3) < 1e-3);
    }

    #[test]
    fn q_pump_gates() {
        let p = p();
        let moist = State::new(100.0, p.a2 * p.z_veg);
        assert_eq!(p.q_pump(moist, 1.0).unwrap(), 0.0);
        assert_eq!(p.q_pump(State::new(18.0, 0.0), 1.0).unwrap(), 0.0);
        let q = p.q_pump(State::new(100.0, 0.0), 0.5).unwrap();
        assert!(rel(q, 4.261e-3) < 1e-3);
        assert!(matches!(
            p.q_pump(State::new(100.0, 0.0), 1.5),
            Err(Error::ControlOutOfRange(_))
        ));
        assert!(p.q_pump(State::new(100.0, 0.0), -0.1).is_err());
    }

    #[test]
    fn q_pump_gate_straddles_thresholds() {
        let p = p();
        let x1_thr = p.x1_pump_threshold();
        let x2_thr = p.x2_target();
        for k in -3..=3 {
            let d = k as f64 * 1e-9;
            for &(x1, x2) in &[(x1_thr + d, 0.0), (100.0, x2_thr + d)] {
                let x = State::new(x1, x2);
                let closed = x.x2 / p.a2 >= p.z_veg || x.x1 / p.a1 < p.z_pump + p.z_h;
                let q = p.q_pump(x, 1.0).unwrap();
                if closed {
                    assert_eq!(q, 0.0, "x = {x:?}");
                } else {
                    assert!(q > 0.0, "x = {x:?}");
                }
            }
        }
    }

    #[test]
    fn q_drain_spot_values() {
        let p = p();
        assert_eq!(p.q_drain(0.0), 0.0);
        assert!(rel(p.q_drain(p.z_cap), 1.0774e-5) < 1e-4);
        let mut last = 0.0;
        for i in 0..=400 {
            let q = p.q_drain(i as f64 * 0.1);
            assert!(q >= last);
            last = q;
        }
    }

    #[test]
    fn f_rhs_examples() {
        let p = p();
        let f = p
            .f_rhs(State::new(10.0, 1.0), 0.0, Disturbance::default())
            .unwrap();
        assert_eq!(f, [0.0, 0.0]);

        let f = p
            .f_rhs(State::new(100.0, 0.0), 0.5, Disturbance::new(1e-5, 0.0))
            .unwrap();
        let pump = 0.5 * p.q_pump_max(100.0).unwrap();
        assert!(rel(f[0], 1e-5 * p.a_in - p.q_out(100.0) - pump) < 1e-12);
        assert!(rel(f[1], 1e-5 * 68.8 + pump) < 1e-12);
        assert!(rel(f[0], -0.13263 - 4.261e-3 + 1e-5 * 0.2922) < 1e-4);
    }

    #[test]
    fn step_examples() {
        let p = p();
        let x = State::new(10.0, 1.0);
        assert_eq!(p.step(x, 0.0, Disturbance::default()).unwrap(), x);

        let next = p
            .step(State::new(100.0, 0.0), 0.0, Disturbance::default())
            .unwrap();
        assert!(rel(next.x1, 100.0 - 0.13263) < 1e-6);
        assert_eq!(next.x2, 0.0);

        let near_cap = State::new(10.0, p.cap2 - 1e-3);
        let out = p
            .step_detailed(near_cap, 0.0, Disturbance::new(1e-3, 0.0))
            .unwrap();
        assert_eq!(out.state.x2, p.cap2);
        assert!(out.clamp_correction[1] < 0.0);
    }

    fn valid_state() -> impl Strategy<Value = State> {
        let p = PlantParams::default();
        (0.0..=p.cap1, 0.0..=p.cap2).prop_map(|(a, b)| State::new(a, b))
    }

    proptest! {
        #[test]
        fn flows_are_nonnegative(x in valid_state(), u in 0.0..=1.0f64) {
            let p = p();
            prop_assert!(p.q_out(x.x1) >= 0.0);
            prop_assert!(p.q_pump(x, u).unwrap() >= 0.0);
            prop_assert!(p.q_drain(x.x2) >= 0.0);
        }

        #[test]
        fn pump_max_solves_intersection(x1 in 0.0..200.0f64) {
            let p = p();
            let y = p.q_pump_max(x1).unwrap();
            let curve = p.a_hat * y * y + p.c_hat;
            let loss = p.head_loss_coefficient() * y * y + p.d - x1 / p.a1;
            prop_assert!((curve - loss).abs() <= 1e-9 * curve.abs());
        }

        #[test]
        fn step_monotone_in_rain(
            x1 in 0.0..140.0f64,
            x2 in 0.0..30.0f64,
            u in 0.0..=1.0f64,
            r in 0.0..1e-4f64,
            dr in 0.0..1e-4f64,
            e in 0.0..1e-4f64,
        ) {
            let p = p();
            let x = State::new(x1, x2);
            let lo = p.step_detailed(x, u, Disturbance::new(r, e)).unwrap();
            let hi = p.step_detailed(x, u, Disturbance::new(r + dr, e)).unwrap();
            if lo.clamp_correction == [0.0; 2] && hi.clamp_correction == [0.0; 2] {
                prop_assert!(hi.state.x1 >= lo.state.x1);
                prop_assert!(hi.state.x2 >= lo.state.x2);
            }
        }

        #[test]
        fn step_output_is_clamp_fixed_point(
            x in valid_state(),
            u in 0.0..=1.0f64,
            r in 0.0..1e-2f64,
            e in 0.0..1.0f64,
        ) {
            let p = p();
            let next = p.step(x, u, Disturbance::new(r, e)).unwrap();
            prop_assert!(p.contains(next));
            prop_assert_eq!(p.clamp(next), next);
        }
    }
}
