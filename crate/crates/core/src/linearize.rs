//! Operating-point linearization of `f^ε` and the condensed horizon QP.
//!
//! About `p = (x̄, ū, w̄)` the smooth plant becomes
//! `x̃ᵢ₊₁ = A x̃ᵢ + B ũᵢ + C w̃ᵢ + b` with `A = τ·∂f/∂x + I`, `B = τ·∂f/∂u`,
//! `C = τ·∂f/∂w` and `b = τ·f^ε(p)`. Stacking `M` steps turns the MPC cost
//! into a single quadratic in the control sequence.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::model::{Disturbance, State};
use crate::smooth::{sigmoid_gate_slope, smooth_sqrt_slope, GateSense, SmoothParams};

/// Largest supported look-ahead.
pub const MAX_STAGES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub x: State,
    pub u: f64,
    pub w: Disturbance,
}

/// Partial derivatives of `f^ε` at an operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothJacobian {
    /// Rows are (f₁, f₂), columns (x₁, x₂).
    pub dx: Matrix2<f64>,
    pub du: Vector2<f64>,
    /// Columns are (w_r, w_e).
    pub dw: Matrix2<f64>,
}

/// Hand-derived Jacobian of the smooth vector field.
pub fn smooth_jacobian(p: &OperatingPoint, sp: &SmoothParams) -> Result<SmoothJacobian> {
    let plant = &sp.plant;
    let eps = sp.epsilon;
    let (x1, x2, u) = (p.x.x1, p.x.x2, p.u);
    crate::model::check_control(u)?;

    let dq_out = plant.c_out() * smooth_sqrt_slope(sp.outlet_head(x1), eps) / plant.a1;

    let b = plant.pump_coefficient();
    let rho = sp.pump_radicand(x1);
    let root = crate::smooth::psi(rho, eps);
    let s1 = sp.suction_gate(x1);
    let s2 = sp.moisture_gate(x2);
    let ds1 = sigmoid_gate_slope(x1, plant.x1_pump_threshold(), GateSense::ActivateAbove, eps);
    let ds2 = sigmoid_gate_slope(x2, plant.x2_target(), GateSense::ActivateBelow, eps);
    let dpump_dx1 = u * b * (smooth_sqrt_slope(rho, eps) / plant.a1 * s1 + root * ds1) * s2;
    let dpump_dx2 = u * b * root * s1 * ds2;
    let dpump_du = b * root * s1 * s2;

    let s3 = sp.capacity_gate(x2);
    let ds3 = sigmoid_gate_slope(x2, plant.z_cap, GateSense::ActivateAbove, eps);
    let ddrain = plant.k_sat / plant.z_soil * s3 + sp.darcy_rate(x2) * ds3;

    Ok(SmoothJacobian {
        dx: Matrix2::new(
            -dq_out - dpump_dx1,
            -dpump_dx2,
            dpump_dx1,
            dpump_dx2 - ddrain,
        ),
        du: Vector2::new(-dpump_du, dpump_du),
        dw: Matrix2::new(plant.a_in, 0.0, plant.a2, -1.0),
    })
}

/// Discrete-time affine model about an operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModel {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
    /// Disturbance input; columns are (w_r, w_e).
    pub c: Matrix2<f64>,
    /// Drift `τ·f^ε(p)`.
    pub drift: Vector2<f64>,
}

impl LinearModel {
    /// One step of `x̃' = A x̃ + B ũ + C w̃ + drift`.
    pub fn advance(&self, x: Vector2<f64>, u: f64, w: Vector2<f64>) -> Vector2<f64> {
        self.a * x + self.b * u + self.c * w + self.drift
    }
}

pub fn linearize_at(p: &OperatingPoint, sp: &SmoothParams) -> Result<LinearModel> {
    let tau = sp.plant.tau;
    let jac = smooth_jacobian(p, sp)?;
    let f = sp.f_eps_rhs(p.x, p.u, p.w)?;
    Ok(LinearModel {
        a: Matrix2::identity() + jac.dx * tau,
        b: jac.du * tau,
        c: jac.dw * tau,
        drift: Vector2::new(f[0], f[1]) * tau,
    })
}

/// Cost and reference data needed to condense a horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonCost {
    /// Control weight λ > 0.
    pub lambda: f64,
    /// Roof area; the x₂ deviation is weighted by `1/a2²`.
    pub a2: f64,
    /// Desired x₂ deviation `x₂* − x̄₂` at every stage.
    pub x2_offset: f64,
    /// Operating-point control ū; the QP variable is the absolute control `ū + ũ`.
    pub u_bar: f64,
}

/// Stacked prediction `Y = Ã y₀ + B̃ U + C̃ W̃ + d̃` with cost
/// `(Y − s)ᵀ Q̃ (Y − s) + Uᵀ R̃ U`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedHorizon {
    pub stages: usize,
    pub a_tilde: DMatrix<f64>,
    pub b_tilde: DMatrix<f64>,
    pub c_tilde: DMatrix<f64>,
    /// Accumulated drift, including the `−B ū` shift of the control variable.
    pub d_tilde: DVector<f64>,
    pub q_tilde: DMatrix<f64>,
    pub r_tilde: DMatrix<f64>,
    /// Stacked per-stage target `s`.
    pub target: DVector<f64>,
    pub y0: Vector2<f64>,
    pub w_tilde: DVector<f64>,
}

/// Stack `stages` steps of `lm`. `w_tilde` holds `(w_r, w_e)` deviations per stage.
pub fn condense(
    lm: &LinearModel,
    stages: usize,
    y0: Vector2<f64>,
    w_tilde: &[f64],
    cost: &HorizonCost,
) -> Result<CondensedHorizon> {
    if !(1..=MAX_STAGES).contains(&stages) {
        return Err(Error::InvalidHorizon(stages));
    }
    if !(cost.lambda > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "lambda must be positive, got {}",
            cost.lambda
        )));
    }
    if w_tilde.len() != 2 * stages {
        return Err(Error::InvalidParameters(format!(
            "expected {} disturbance entries, got {}",
            2 * stages,
            w_tilde.len()
        )));
    }
    let m = stages;
    // powers[k] = A^k
    let mut powers = Vec::with_capacity(m + 1);
    powers.push(Matrix2::<f64>::identity());
    for k in 1..=m {
        powers.push(lm.a * powers[k - 1]);
    }

    let mut a_tilde = DMatrix::zeros(2 * m, 2);
    let mut b_tilde = DMatrix::zeros(2 * m, m);
    let mut c_tilde = DMatrix::zeros(2 * m, 2 * m);
    let mut d_tilde = DVector::zeros(2 * m);
    let step_drift = lm.drift - lm.b * cost.u_bar;
    let mut acc = Vector2::zeros();
    for i in 0..m {
        a_tilde
            .fixed_view_mut::<2, 2>(2 * i, 0)
            .copy_from(&powers[i + 1]);
        for j in 0..=i {
            let pw = &powers[i - j];
            b_tilde
                .fixed_view_mut::<2, 1>(2 * i, j)
                .copy_from(&(pw * lm.b));
            c_tilde
                .fixed_view_mut::<2, 2>(2 * i, 2 * j)
                .copy_from(&(pw * lm.c));
        }
        acc = lm.a * acc + step_drift;
        d_tilde.fixed_view_mut::<2, 1>(2 * i, 0).copy_from(&acc);
    }

    let weight = 1.0 / (cost.a2 * cost.a2);
    let mut q_tilde = DMatrix::zeros(2 * m, 2 * m);
    let mut target = DVector::zeros(2 * m);
    for i in 0..m {
        q_tilde[(2 * i + 1, 2 * i + 1)] = weight;
        target[2 * i + 1] = cost.x2_offset;
    }

    Ok(CondensedHorizon {
        stages: m,
        a_tilde,
        b_tilde,
        c_tilde,
        d_tilde,
        q_tilde,
        r_tilde: DMatrix::identity(m, m) * cost.lambda,
        target,
        y0,
        w_tilde: DVector::from_column_slice(w_tilde),
    })
}

impl CondensedHorizon {
    /// Part of the prediction that does not depend on `U`, minus the target.
    fn free_residual(&self) -> DVector<f64> {
        &self.a_tilde * self.y0 + &self.c_tilde * &self.w_tilde + &self.d_tilde - &self.target
    }

    pub fn predict(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.a_tilde * self.y0 + &self.b_tilde * u + &self.c_tilde * &self.w_tilde + &self.d_tilde
    }

    pub fn cost(&self, u: &DVector<f64>) -> f64 {
        let e = self.predict(u) - &self.target;
        (e.transpose() * &self.q_tilde * &e)[(0, 0)] + (u.transpose() * &self.r_tilde * u)[(0, 0)]
    }

    /// Analytic gradient `2(B̃ᵀQ̃(Y − s) + R̃U)`.
    pub fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        let e = self.predict(u) - &self.target;
        (self.b_tilde.transpose() * &self.q_tilde * e + &self.r_tilde * u) * 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    /// Stationary point of the unconstrained quadratic.
    pub unclamped: DVector<f64>,
    /// Controls clamped to `[0, 1]`.
    pub controls: Vec<f64>,
    /// True when any entry had to be clamped.
    pub clamp_active: bool,
}

/// Solve `(B̃ᵀQ̃B̃ + R̃) U = −B̃ᵀQ̃(Ã y₀ + C̃ W̃ + d̃ − s)` then clamp to `[0, 1]`.
pub fn solve_mpc_qp(ch: &CondensedHorizon) -> Result<QpSolution> {
    let bt_q = ch.b_tilde.transpose() * &ch.q_tilde;
    let hessian = &bt_q * &ch.b_tilde + &ch.r_tilde;
    let rhs = -(&bt_q * ch.free_residual());

    let chol = hessian.clone().cholesky().ok_or(Error::NearSingular {
        residual: f64::INFINITY,
    })?;
    let u = chol.solve(&rhs);
    let scale = hessian.norm() * u.norm() + rhs.norm();
    let residual = if scale > 0.0 {
        (&hessian * &u - &rhs).norm() / scale
    } else {
        0.0
    };
    if !(residual <= 1e-9) {
        return Err(Error::NearSingular { residual });
    }

    let controls: Vec<f64> = u.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let clamp_active = controls.iter().zip(u.iter()).any(|(c, v)| c != v);
    Ok(QpSolution {
        unclamped: u,
        controls,
        clamp_active,
    })
}
