use rayon::prelude::*;

use crate::error::{Error, Result};

use super::mdp::{min_max, FiniteMdp};

/// Risk-aversion parameter. Only the risk-averse branch `θ < 0` is supported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskParams {
    theta: f64,
}

impl RiskParams {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta < 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "risk parameter must be finite and negative, got {theta}"
            )));
        }
        Ok(RiskParams { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `γ = −θ/2 > 0`, the exponent multiplier.
    pub fn gamma(&self) -> f64 {
        -0.5 * self.theta
    }
}

/// What replaces the expectation in the backup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    Entropic(RiskParams),
    Neutral,
}

impl Criterion {
    pub fn entropic(theta: f64) -> Result<Self> {
        RiskParams::new(theta).map(Criterion::Entropic)
    }
}

/// `V_t` on every node for `t = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub values: Vec<Vec<f64>>,
}

/// Argmin action index `μ_t` on every node for `t = 0..N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyTable {
    pub actions: Vec<Vec<usize>>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    /// Check `Σ_{s≥t} min c_s + min c_N ≤ V_t ≤ Σ_{s≥t} max c_s + max c_N`.
    pub fn within_bounds(&self, mdp: &FiniteMdp, tol: f64) -> bool {
        let n = self.horizon();
        let (tmin, tmax) = min_max(mdp.terminal_cost());
        let (mut lo, mut hi) = (tmin, tmax);
        for t in (0..=n).rev() {
            if t < n {
                let (cmin, cmax) = mdp.stage_cost_range(t);
                lo += cmin;
                hi += cmax;
            }
            let slack = tol * (1.0 + lo.abs().max(hi.abs()));
            if self.values[t]
                .iter()
                .any(|&v| v < lo - slack || v > hi + slack)
            {
                return false;
            }
        }
        true
    }
}

/// `log Σ exp(a_i)` with the maximum shifted out.
pub fn log_sum_exp(a: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = a.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    m + a.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Entropic risk of a discrete cost distribution: `(1/γ)·log Σ p·exp(γZ)`.
pub fn risk_functional(z: &[f64], p: &[f64], risk: RiskParams) -> f64 {
    let g = risk.gamma();
    log_sum_exp(z.iter().zip(p).map(move |(&z, &p)| p.ln() + g * z)) / g
}

fn successor_value(succ: &[(usize, f64)], v: &[f64]) -> f64 {
    succ.iter().map(|&(k, w)| w * v[k]).sum()
}

/// Risk backup of a single (node, action) pair against the stage-(t+1) values.
fn psi(mdp: &FiniteMdp, node: usize, action: usize, v_next: &[f64], criterion: Criterion) -> f64 {
    let probs = mdp.probabilities();
    match criterion {
        Criterion::Neutral => probs
            .iter()
            .enumerate()
            .map(|(k, p)| p * successor_value(mdp.successors(node, action, k), v_next))
            .sum(),
        Criterion::Entropic(r) => {
            let g = r.gamma();
            let terms = probs.iter().enumerate().map(move |(k, p)| {
                p.ln() + g * successor_value(mdp.successors(node, action, k), v_next)
            });
            log_sum_exp(terms) / g
        }
    }
}

/// One backward stage: `V_t(x) = min_u c_t(x,u) + ψ(x,u)`, ties to the smallest index.
pub fn entropic_backup(
    mdp: &FiniteMdp,
    v_next: &[f64],
    t: usize,
    criterion: Criterion,
) -> Result<(Vec<f64>, Vec<usize>)> {
    if v_next.len() != mdp.n_nodes() || v_next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { stage: t + 1 });
    }
    let rows: Vec<(f64, usize)> = (0..mdp.n_nodes())
        .into_par_iter()
        .map(|node| {
            let mut best = (f64::INFINITY, 0);
            for a in 0..mdp.n_actions() {
                let v = mdp.stage_cost(t, node, a) + psi(mdp, node, a, v_next, criterion);
                if v < best.0 {
                    best = (v, a);
                }
            }
            best
        })
        .collect();
    if rows.iter().any(|r| !r.0.is_finite()) {
        return Err(Error::NonFinite { stage: t });
    }
    Ok(rows.into_iter().unzip())
}

/// Backward induction from `V_N = c_N`.
pub fn solve(
    mdp: &FiniteMdp,
    horizon: usize,
    criterion: Criterion,
) -> Result<(ValueTable, PolicyTable)> {
    if horizon == 0 || horizon > mdp.max_horizon() {
        return Err(Error::InvalidHorizon(horizon));
    }
    let mut values = vec![Vec::new(); horizon + 1];
    let mut actions = vec![Vec::new(); horizon];
    values[horizon] = mdp.terminal_cost().to_vec();
    for t in (0..horizon).rev() {
        let (v, mu) = entropic_backup(mdp, &values[t + 1], t, criterion)?;
        values[t] = v;
        actions[t] = mu;
    }
    Ok((ValueTable { values }, PolicyTable { actions }))
}

/// `W_t^π` tables, stored as `log W` with `γ` so `risk_value = log W / γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct WTable {
    pub log_w: Vec<Vec<f64>>,
    gamma: f64,
}

impl WTable {
    pub fn w(&self, t: usize, node: usize) -> f64 {
        self.log_w[t][node].exp()
    }

    /// `(1/γ)·log W_t(x)`, the entropic value of the policy from `(t, x)`.
    pub fn risk_value(&self, t: usize, node: usize) -> f64 {
        self.log_w[t][node] / self.gamma
    }
}

/// Multiplicative policy evaluation, run in log space.
///
/// Under multilinear projection the interpolation weights enter `W` linearly,
/// i.e. they act as transition probabilities.
pub fn evaluate_policy_w(
    mdp: &FiniteMdp,
    policy: &PolicyTable,
    risk: RiskParams,
) -> Result<WTable> {
    let n = policy.actions.len();
    if n == 0 || n > mdp.max_horizon() {
        return Err(Error::InvalidHorizon(n));
    }
    if policy
        .actions
        .iter()
        .any(|row| row.len() != mdp.n_nodes() || row.iter().any(|&a| a >= mdp.n_actions()))
    {
        return Err(Error::InvalidParameters(
            "policy must assign a valid action to every node and stage".into(),
        ));
    }
    let g = risk.gamma();
    let probs = mdp.probabilities();
    let mut log_w = vec![Vec::new(); n + 1];
    log_w[n] = mdp.terminal_cost().iter().map(|c| g * c).collect();
    for t in (0..n).rev() {
        let next = &log_w[t + 1];
        let row: Vec<f64> = (0..mdp.n_nodes())
            .map(|x| {
                let a = policy.actions[t][x];
                let terms = probs.iter().enumerate().flat_map(|(k, p)| {
                    mdp.successors(x, a, k)
                        .iter()
                        .map(move |&(y, w)| p.ln() + w.ln() + next[y])
                });
                g * mdp.stage_cost(t, x, a) + log_sum_exp(terms)
            })
            .collect();
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { stage: t });
        }
        log_w[t] = row;
    }
    Ok(WTable { log_w, gamma: g })
}

/// Exhaustive search result over all Markov deterministic policies.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    /// Minimal entropic value per start node.
    pub values: Vec<f64>,
    /// A minimizing policy per start node.
    pub best: Vec<PolicyTable>,
    pub policies_checked: usize,
}

pub const MAX_ENUMERATED_POLICIES: f64 = 1e6;

/// Visit every Markov deterministic policy with its per-node entropic value.
pub fn enumerate_policies(
    mdp: &FiniteMdp,
    horizon: usize,
    risk: RiskParams,
    mut visit: impl FnMut(&PolicyTable, &WTable),
) -> Result<usize> {
    if horizon == 0 || horizon > mdp.max_horizon() {
        return Err(Error::InvalidHorizon(horizon));
    }
    let slots = mdp.n_nodes() * horizon;
    let count = (mdp.n_actions() as f64).powi(slots as i32);
    if count > MAX_ENUMERATED_POLICIES {
        return Err(Error::OversizedInstance(count));
    }
    let count = count as usize;
    let mut policy = PolicyTable {
        actions: vec![vec![0; mdp.n_nodes()]; horizon],
    };
    for mut code in 0..count {
        for slot in 0..slots {
            policy.actions[slot / mdp.n_nodes()][slot % mdp.n_nodes()] = code % mdp.n_actions();
            code /= mdp.n_actions();
        }
        let w = evaluate_policy_w(mdp, &policy, risk)?;
        visit(&policy, &w);
    }
    Ok(count)
}

pub fn brute_force_optimal(
    mdp: &FiniteMdp,
    horizon: usize,
    risk: RiskParams,
) -> Result<BruteForce> {
    let n = mdp.n_nodes();
    let mut values = vec![f64::INFINITY; n];
    let mut best = vec![
        PolicyTable {
            actions: Vec::new()
        };
        n
    ];
    let checked = enumerate_policies(mdp, horizon, risk, |policy, w| {
        for x in 0..n {
            let v = w.risk_value(0, x);
            if v < values[x] {
                values[x] = v;
                best[x] = policy.clone();
            }
        }
    })?;
    Ok(BruteForce {
        values,
        best,
        policies_checked: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riskdp::mdp::StageCosts;

    fn two_atom_chain(v_next_costs: [f64; 2]) -> FiniteMdp {
        // node 0 moves to node 0 or 1 with equal odds; terminal costs carry V_next
        FiniteMdp::new(
            2,
            1,
            vec![0.5, 0.5],
            vec![
                vec![(0, 1.0)],
                vec![(1, 1.0)],
                vec![(1, 1.0)],
                vec![(1, 1.0)],
            ],
            StageCosts::Stationary(vec![0.0, 0.0]),
            v_next_costs.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn scalar_backup_value() {
        let mdp = two_atom_chain([0.0, 2.0]);
        let (v, _) =
            entropic_backup(&mdp, &[0.0, 2.0], 0, Criterion::entropic(-2.0).unwrap()).unwrap();
        assert!((v[0] - 1.433780830483027).abs() < 1e-14);
        assert!((v[1] - 2.0).abs() < 1e-15);
        let r = risk_functional(&[0.0, 2.0], &[0.5, 0.5], RiskParams::new(-2.0).unwrap());
        assert!((r - 1.433780830483027).abs() < 1e-14);
    }

    #[test]
    fn degenerate_risk_is_identity() {
        let r = RiskParams::new(-3.0).unwrap();
        assert_eq!(risk_functional(&[4.25, 4.25], &[0.3, 0.7], r), 4.25);
    }

    #[test]
    fn near_zero_theta_is_expectation() {
        let r = RiskParams::new(-1e-6).unwrap();
        let z = [1.0, 3.0, 10.0];
        let p = [0.2, 0.5, 0.3];
        let mean: f64 = z.iter().zip(&p).map(|(z, p)| z * p).sum();
        assert!((risk_functional(&z, &p, r) - mean).abs() < 1e-4);
    }

    #[test]
    fn constant_next_value_passes_through() {
        let mdp = FiniteMdp::new(
            2,
            2,
            vec![0.25, 0.75],
            vec![
                vec![(0, 1.0)],
                vec![(1, 1.0)],
                vec![(1, 1.0)],
                vec![(0, 1.0)],
                vec![(0, 0.5), (1, 0.5)],
                vec![(1, 1.0)],
                vec![(0, 1.0)],
                vec![(0, 1.0)],
            ],
            StageCosts::Stationary(vec![1.0, 0.5, 2.0, 3.0]),
            vec![0.0, 0.0],
        )
        .unwrap();
        let (v, mu) =
            entropic_backup(&mdp, &[7.0, 7.0], 0, Criterion::entropic(-0.7).unwrap()).unwrap();
        assert!((v[0] - 7.5).abs() < 1e-12);
        assert!((v[1] - 9.0).abs() < 1e-12);
        assert_eq!(mu, vec![1, 0]);
    }

    #[test]
    fn zero_costs_give_zero_values_and_first_action() {
        let mdp = FiniteMdp::new(
            1,
            3,
            vec![1.0],
            vec![vec![(0, 1.0)]; 3],
            StageCosts::Stationary(vec![0.0; 3]),
            vec![0.0],
        )
        .unwrap();
        let (v, p) = solve(&mdp, 4, Criterion::entropic(-1.0).unwrap()).unwrap();
        assert!(v.values.iter().flatten().all(|&x| x == 0.0));
        assert!(p.actions.iter().flatten().all(|&a| a == 0));
        let w = evaluate_policy_w(&mdp, &p, RiskParams::new(-2.0).unwrap()).unwrap();
        assert!(w.log_w.iter().flatten().all(|&l| l == 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(RiskParams::new(0.0).is_err());
        assert!(RiskParams::new(0.5).is_err());
        let mdp = two_atom_chain([0.0, 1.0]);
        assert!(solve(&mdp, 0, Criterion::Neutral).is_err());
        assert!(entropic_backup(&mdp, &[f64::NAN, 0.0], 0, Criterion::Neutral).is_err());
    }

    #[test]
    fn oversized_enumeration_rejected() {
        let mdp = FiniteMdp::new(
            4,
            3,
            vec![1.0],
            vec![vec![(0, 1.0)]; 12],
            StageCosts::Stationary(vec![0.0; 12]),
            vec![0.0; 4],
        )
        .unwrap();
        let r = brute_force_optimal(&mdp, 4, RiskParams::new(-1.0).unwrap());
        assert!(matches!(r, Err(Error::OversizedInstance(_))));
    }
}
