//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stormdp::riskdp::{FiniteMdp, PolicyTable, StageCosts};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tabular instance with single-node successors and per-stage costs in `[0, 2)`.
pub fn tiny_instance(
    rng: &mut ChaCha8Rng,
    nodes: usize,
    actions: usize,
    atoms: usize,
    horizon: usize,
) -> FiniteMdp {
    let mut probs: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let residual = 1.0 - probs.iter().sum::<f64>();
    probs[0] += residual;
    let successors = (0..nodes * actions * atoms)
        .map(|_| vec![(rng.gen_range(0..nodes), 1.0)])
        .collect();
    let costs = (0..horizon)
        .map(|_| {
            (0..nodes * actions)
                .map(|_| rng.gen_range(0.0..2.0))
                .collect()
        })
        .collect();
    let terminal = (0..nodes).map(|_| rng.gen_range(0.0..2.0)).collect();
    FiniteMdp::new(
        nodes,
        actions,
        probs,
        successors,
        StageCosts::PerStage(costs),
        terminal,
    )
    .expect("valid random instance")
}

/// Every disturbance path from `start` under `policy`: (probability, accumulated cost Z_0).
pub fn cost_paths(mdp: &FiniteMdp, policy: &PolicyTable, start: usize) -> Vec<(f64, f64)> {
    let horizon = policy.actions.len();
    let atoms = mdp.probabilities().len();
    let count = atoms.pow(horizon as u32);
    (0..count)
        .map(|mut code| {
            let (mut prob, mut z, mut x) = (1.0, 0.0, start);
            for t in 0..horizon {
                let k = code % atoms;
                code /= atoms;
                let a = policy.actions[t][x];
                z += mdp.stage_cost(t, x, a);
                prob *= mdp.probabilities()[k];
                let succ = mdp.successors(x, a, k);
                assert_eq!(succ.len(), 1, "path enumeration needs a projected instance");
                x = succ[0].0;
            }
            (prob, z + mdp.terminal_cost()[x])
        })
        .collect()
}

/// `E[exp(γ Z_0)]` by exhaustive path enumeration.
pub fn w0_by_paths(mdp: &FiniteMdp, policy: &PolicyTable, start: usize, theta: f64) -> f64 {
    let g = -theta / 2.0;
    cost_paths(mdp, policy, start)
        .iter()
        .map(|(p, z)| p * (g * z).exp())
        .sum()
}

/// `(1/γ)·log E[exp(γ Z_0)]` with a plain max shift.
pub fn entropic_by_paths(mdp: &FiniteMdp, policy: &PolicyTable, start: usize, theta: f64) -> f64 {
    let g = -theta / 2.0;
    let paths = cost_paths(mdp, policy, start);
    let m = paths
        .iter()
        .map(|(_, z)| g * z)
        .fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = paths.iter().map(|(p, z)| p * (g * z - m).exp()).sum();
    (m + s.ln()) / g
}

/// Decode policy number `code` in base `|A|` over (stage, node) slots.
pub fn policy_from_code(
    mut code: usize,
    nodes: usize,
    actions: usize,
    horizon: usize,
) -> PolicyTable {
    let mut table = vec![vec![0; nodes]; horizon];
    for slot in 0..nodes * horizon {
        table[slot / nodes][slot % nodes] = code % actions;
        code /= actions;
    }
    PolicyTable { actions: table }
}

/// Minimum over all Markov policies of the path-enumerated entropic value, per start node.
pub fn brute_force_by_paths(mdp: &FiniteMdp, horizon: usize, theta: f64) -> Vec<f64> {
    let n = mdp.n_nodes();
    let count = mdp.n_actions().pow((n * horizon) as u32);
    let mut best = vec![f64::INFINITY; n];
    for code in 0..count {
        let policy = policy_from_code(code, n, mdp.n_actions(), horizon);
        for (x, b) in best.iter_mut().enumerate() {
            *b = b.min(entropic_by_paths(mdp, &policy, x, theta));
        }
    }
    best
}

/// Reference plant quantities recomputed from the raw parameter table.
pub mod table {
    use std::f64::consts::PI;

    pub const A1: f64 = 25.0;
    pub const A2: f64 = 68.8;
    pub const G: f64 = 9.81;

    pub fn c_out() -> f64 {
        0.61 * PI * 0.125 * 0.125 * (2.0 * G).sqrt()
    }

    pub fn pump_b() -> f64 {
        let a_pump = 0.01 * PI;
        let loss = (3.56 * 18.4 / 0.2 + 0.6) / (2.0 * G * a_pump * a_pump);
        (loss - (-5.78e5)).powf(-0.5)
    }

    pub fn q_out(x1: f64) -> f64 {
        let head = x1 / A1 - 3.0;
        if head > 0.0 {
            c_out() * head.sqrt()
        } else {
            0.0
        }
    }

    pub fn q_pump_max(x1: f64) -> f64 {
        pump_b() * (x1 / A1 + 55.2 - 16.0).sqrt()
    }

    pub fn q_drain(x2: f64) -> f64 {
        let z_soil = 0.5;
        if x2 >= A2 * z_soil {
            7.83e-8 * A2 * (x2 / A2 + z_soil) / z_soil
        } else {
            0.0
        }
    }
}

pub mod lin {
    use nalgebra::{DVector, Matrix2, Vector2};
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;
    use stormdp::linearize::{
        condense, CondensedHorizon, HorizonCost, LinearModel, OperatingPoint,
    };
    use stormdp::model::{Disturbance, State};
    use stormdp::smooth::SmoothParams;

    /// Random operating point; one in four lands inside a smoothing band.
    pub fn operating_point(rng: &mut ChaCha8Rng, sp: &SmoothParams, i: usize) -> OperatingPoint {
        let p = &sp.plant;
        let eps = sp.epsilon;
        let mut x1 = rng.gen_range(0.0..p.cap1);
        let mut x2 = rng.gen_range(0.0..p.cap2);
        match i % 8 {
            0 => x1 = p.x1_pump_threshold() + rng.gen_range(-3.0..3.0) * eps,
            2 => x2 = (p.x2_target() + rng.gen_range(-3.0..3.0) * eps).max(0.0),
            4 => x2 = p.z_cap - rng.gen_range(0.0..3.0) * eps,
            6 => x1 = p.a1 * (p.z_o + rng.gen_range(0.0..eps)),
            _ => {}
        }
        OperatingPoint {
            x: State::new(x1, x2),
            u: rng.gen_range(0.01..0.99),
            w: Disturbance::new(rng.gen_range(0.0..3e-6), rng.gen_range(0.0..1e-4)),
        }
    }

    /// Distance (in smooth-sqrt argument units) from the outlet head to the blend joints.
    pub fn joint_distance(op: &OperatingPoint, sp: &SmoothParams) -> f64 {
        let y = sp.outlet_head(op.x.x1);
        y.abs().min((y - sp.epsilon).abs())
    }

    /// Central differences of `f^ε`: (∂/∂x columns, ∂/∂u, ∂/∂w columns).
    pub fn fd_jacobian(
        op: &OperatingPoint,
        sp: &SmoothParams,
        hx: f64,
    ) -> (Matrix2<f64>, Vector2<f64>, Matrix2<f64>) {
        let f = |x: State, u: f64, w: Disturbance| {
            let v = sp.f_eps_rhs(x, u, w).expect("valid point");
            Vector2::new(v[0], v[1])
        };
        let (x, u, w) = (op.x, op.u, op.w);
        let d1 = (f(State::new(x.x1 + hx, x.x2), u, w) - f(State::new(x.x1 - hx, x.x2), u, w))
            / (2.0 * hx);
        let d2 = (f(State::new(x.x1, x.x2 + hx), u, w) - f(State::new(x.x1, x.x2 - hx), u, w))
            / (2.0 * hx);
        let hu = 1e-4;
        let du = (f(x, u + hu, w) - f(x, u - hu, w)) / (2.0 * hu);
        let hr = 1e-7;
        let dr = (f(x, u, Disturbance::new(w.w_r + hr, w.w_e))
            - f(x, u, Disturbance::new(w.w_r, w.w_e)))
            / hr;
        let he = 1e-6;
        let de = (f(x, u, Disturbance::new(w.w_r, w.w_e + he))
            - f(x, u, Disturbance::new(w.w_r, w.w_e)))
            / he;
        (
            Matrix2::from_columns(&[d1, d2]),
            du,
            Matrix2::from_columns(&[dr, de]),
        )
    }

    /// `|a − b| ≤ rel·max(|a|, |b|) + floor`.
    pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()) + floor
    }

    pub struct RandomQp {
        pub lm: LinearModel,
        pub cost: HorizonCost,
        pub y0: Vector2<f64>,
        pub w: Vec<f64>,
        pub ch: CondensedHorizon,
    }

    pub fn random_qp(rng: &mut ChaCha8Rng, stages: usize) -> RandomQp {
        let mut r = |lo: f64, hi: f64| rng.gen_range(lo..hi);
        let lm = LinearModel {
            a: Matrix2::new(
                1.0 + r(-0.1, 0.05),
                r(-0.05, 0.05),
                r(-0.05, 0.05),
                1.0 + r(-0.1, 0.05),
            ),
            b: {
                let b = r(0.05, 1.0);
                Vector2::new(-b, b)
            },
            c: Matrix2::new(r(0.0, 1.0), 0.0, r(10.0, 100.0), -r(0.5, 2.0)),
            drift: Vector2::new(r(-0.2, 0.2), r(-0.05, 0.05)),
        };
        let cost = HorizonCost {
            lambda: 10f64.powf(r(-4.0, 0.0)),
            a2: r(10.0, 100.0),
            x2_offset: r(-2.0, 2.0),
            u_bar: r(0.0, 1.0),
        };
        let y0 = Vector2::new(r(-1.0, 1.0), r(-1.0, 1.0));
        let w: Vec<f64> = (0..2 * stages).map(|_| r(-1e-3, 1e-3)).collect();
        let ch = condense(&lm, stages, y0, &w, &cost).expect("valid instance");
        RandomQp {
            lm,
            cost,
            y0,
            w,
            ch,
        }
    }

    /// Stacked states from explicit forward iteration with absolute controls `u`.
    pub fn forward(q: &RandomQp, u: &DVector<f64>) -> DVector<f64> {
        let m = u.len();
        let mut out = DVector::zeros(2 * m);
        let mut y = q.y0;
        for i in 0..m {
            let w = Vector2::new(q.w[2 * i], q.w[2 * i + 1]);
            y = q.lm.advance(y, u[i] - q.cost.u_bar, w);
            out[2 * i] = y[0];
            out[2 * i + 1] = y[1];
        }
        out
    }

    /// Central-difference gradient of the condensed cost.
    pub fn fd_gradient(ch: &CondensedHorizon, u: &DVector<f64>) -> DVector<f64> {
        let h = 1e-6;
        DVector::from_iterator(
            u.len(),
            (0..u.len()).map(|i| {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[i] += h;
                dn[i] -= h;
                (ch.cost(&up) - ch.cost(&dn)) / (2.0 * h)
            }),
        )
    }
}
