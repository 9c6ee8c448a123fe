use crate::error::{Error, Result};
use crate::model::{Disturbance, PlantParams, State};

use super::grid::{Grid, Projection};

/// State/action-independent finite disturbance distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceModel {
    atoms: Vec<(Disturbance, f64)>,
}

impl DisturbanceModel {
    pub fn new(atoms: Vec<(Disturbance, f64)>) -> Result<Self> {
        check_probabilities(atoms.iter().map(|a| a.1))?;
        if atoms.iter().any(|(w, _)| !w.is_valid()) {
            return Err(Error::InvalidParameters(
                "disturbance atoms must be finite and non-negative".into(),
            ));
        }
        Ok(DisturbanceModel { atoms })
    }

    pub fn single(w: Disturbance) -> Self {
        DisturbanceModel {
            atoms: vec![(w, 1.0)],
        }
    }

    /// Empirical quantile binning: sort samples by rain rate, cut into `bins`
    /// equal-count groups and represent each by its mean. Identical atoms merge.
    pub fn fit_quantiles(samples: &[Disturbance], bins: usize) -> Result<Self> {
        if samples.is_empty() || bins == 0 {
            return Err(Error::InvalidParameters(
                "quantile fit needs samples and at least one bin".into(),
            ));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.w_r.total_cmp(&b.w_r).then(a.w_e.total_cmp(&b.w_e)));
        let n = sorted.len();
        let bins = bins.min(n);
        let mut atoms: Vec<(Disturbance, f64)> = Vec::with_capacity(bins);
        for k in 0..bins {
            let (lo, hi) = (k * n / bins, (k + 1) * n / bins);
            let chunk = &sorted[lo..hi];
            let len = chunk.len() as f64;
            let mean = Disturbance::new(
                chunk.iter().map(|d| d.w_r).sum::<f64>() / len,
                chunk.iter().map(|d| d.w_e).sum::<f64>() / len,
            );
            let p = len / n as f64;
            match atoms.iter_mut().find(|(w, _)| *w == mean) {
                Some(atom) => atom.1 += p,
                None => atoms.push((mean, p)),
            }
        }
        DisturbanceModel::new(atoms)
    }

    pub fn atoms(&self) -> &[(Disturbance, f64)] {
        &self.atoms
    }
}

fn check_probabilities(p: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    let mut count = 0;
    for v in p {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "probabilities must be positive, got {v}"
            )));
        }
        total += v;
        count += 1;
    }
    if count == 0 || (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameters(format!(
            "probabilities must sum to 1, got {total}"
        )));
    }
    Ok(())
}

/// Quadratic moisture cost with a control penalty:
/// `c_t(x,u) = (x2/a2 − z_veg)² + λu²`, `c_N(x) = (x2/a2 − z_veg)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSpec {
    pub lambda: f64,
    pub a2: f64,
    pub z_veg: f64,
}

impl CostSpec {
    pub fn new(lambda: f64, plant: &PlantParams) -> Self {
        CostSpec {
            lambda,
            a2: plant.a2,
            z_veg: plant.z_veg,
        }
    }

    pub fn terminal(&self, x: State) -> f64 {
        let e = x.x2 / self.a2 - self.z_veg;
        e * e
    }

    pub fn stage(&self, x: State, u: f64) -> f64 {
        self.terminal(x) + self.lambda * u * u
    }
}

/// Stage costs indexed by `node·n_actions + action`.
#[derive(Debug, Clone, PartialEq)]
pub enum StageCosts {
    Stationary(Vec<f64>),
    PerStage(Vec<Vec<f64>>),
}

/// Finite Markov decision problem with a shared disturbance distribution.
///
/// For node `x`, action `a` and atom `k` the successor is a convex
/// combination of nodes (a single node under nearest projection).
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    n_nodes: usize,
    n_actions: usize,
    probs: Vec<f64>,
    offsets: Vec<usize>,
    succ: Vec<(usize, f64)>,
    costs: StageCosts,
    terminal: Vec<f64>,
}

impl FiniteMdp {
    /// `successors[(node·n_actions + action)·n_atoms + atom]` lists weighted successor nodes.
    pub fn new(
        n_nodes: usize,
        n_actions: usize,
        probs: Vec<f64>,
        successors: Vec<Vec<(usize, f64)>>,
        costs: StageCosts,
        terminal: Vec<f64>,
    ) -> Result<Self> {
        if n_nodes == 0 || n_actions == 0 {
            return Err(Error::InvalidParameters("empty node or action set".into()));
        }
        check_probabilities(probs.iter().copied())?;
        let n_atoms = probs.len();
        if successors.len() != n_nodes * n_actions * n_atoms {
            return Err(Error::InvalidParameters(format!(
                "expected {} successor lists, got {}",
                n_nodes * n_actions * n_atoms,
                successors.len()
            )));
        }
        let mut offsets = Vec::with_capacity(successors.len() + 1);
        let mut succ = Vec::new();
        offsets.push(0);
        for list in successors {
            let total: f64 = list.iter().map(|s| s.1).sum();
            if list.is_empty()
                || list.iter().any(|&(n, w)| n >= n_nodes || !(w >= 0.0))
                || (total - 1.0).abs() > 1e-12
            {
                return Err(Error::InvalidParameters(
                    "successor weights must be convex over valid nodes".into(),
                ));
            }
            succ.extend(list);
            offsets.push(succ.len());
        }
        let table_len = n_nodes * n_actions;
        let bad_costs = match &costs {
            StageCosts::Stationary(c) => c.len() != table_len || c.iter().any(|v| !v.is_finite()),
            StageCosts::PerStage(cs) => cs
                .iter()
                .any(|c| c.len() != table_len || c.iter().any(|v| !v.is_finite())),
        };
        if bad_costs || terminal.len() != n_nodes || terminal.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameters(
                "cost tables have the wrong shape".into(),
            ));
        }
        Ok(FiniteMdp {
            n_nodes,
            n_actions,
            probs,
            offsets,
            succ,
            costs,
            terminal,
        })
    }

    /// Discretize the exact plant: successors come from one clamped Euler step
    /// projected back onto `grid`.
    pub fn from_plant(
        plant: &PlantParams,
        grid: &Grid,
        actions: &[f64],
        disturbances: &DisturbanceModel,
        cost: &CostSpec,
        mode: Projection,
    ) -> Result<Self> {
        if !grid.covers(plant) {
            return Err(Error::InvalidParameters(
                "grid must span exactly [0, cap1] x [0, cap2]".into(),
            ));
        }
        let atoms = disturbances.atoms();
        let mut successors = Vec::with_capacity(grid.len() * actions.len() * atoms.len());
        let mut costs = Vec::with_capacity(grid.len() * actions.len());
        for x in grid.nodes() {
            for &u in actions {
                costs.push(cost.stage(x, u));
                for (w, _) in atoms {
                    let next = plant.step(x, u, *w)?;
                    successors.push(grid.project(next, mode)?);
                }
            }
        }
        let terminal = grid.nodes().map(|x| cost.terminal(x)).collect();
        FiniteMdp::new(
            grid.len(),
            actions.len(),
            atoms.iter().map(|a| a.1).collect(),
            successors,
            StageCosts::Stationary(costs),
            terminal,
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn successors(&self, node: usize, action: usize, atom: usize) -> &[(usize, f64)] {
        let k = (node * self.n_actions + action) * self.probs.len() + atom;
        &self.succ[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn stage_cost(&self, t: usize, node: usize, action: usize) -> f64 {
        let k = node * self.n_actions + action;
        match &self.costs {
            StageCosts::Stationary(c) => c[k],
            StageCosts::PerStage(cs) => cs[t][k],
        }
    }

    pub fn terminal_cost(&self) -> &[f64] {
        &self.terminal
    }

    pub fn costs(&self) -> &StageCosts {
        &self.costs
    }

    /// Replace the cost tables, keeping the dynamics.
    pub fn with_costs(&self, costs: StageCosts, terminal: Vec<f64>) -> Result<Self> {
        let successors = (0..self.offsets.len() - 1)
            .map(|k| self.succ[self.offsets[k]..self.offsets[k + 1]].to_vec())
            .collect();
        FiniteMdp::new(
            self.n_nodes,
            self.n_actions,
            self.probs.clone(),
            successors,
            costs,
            terminal,
        )
    }

    /// Largest horizon the cost tables support.
    pub fn max_horizon(&self) -> usize {
        match &self.costs {
            StageCosts::Stationary(_) => usize::MAX,
            StageCosts::PerStage(cs) => cs.len(),
        }
    }

    /// `(min, max)` of the stage-t costs.
    pub fn stage_cost_range(&self, t: usize) -> (f64, f64) {
        let slice: &[f64] = match &self.costs {
            StageCosts::Stationary(c) => c,
            StageCosts::PerStage(cs) => &cs[t],
        };
        min_max(slice)
    }
}

pub(crate) fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities_validated() {
        let w = Disturbance::default();
        assert!(DisturbanceModel::new(vec![(w, 0.5), (w, 0.4)]).is_err());
        assert!(DisturbanceModel::new(vec![(w, 1.0), (w, 0.0)]).is_err());
        assert!(DisturbanceModel::new(vec![(w, 0.25), (w, 0.75)]).is_ok());
        assert!(DisturbanceModel::new(vec![(Disturbance::new(-1.0, 0.0), 1.0)]).is_err());
    }

    #[test]
    fn quantile_fit() {
        let samples: Vec<_> = (0..9).map(|i| Disturbance::new(i as f64, 1.0)).collect();
        let dm = DisturbanceModel::fit_quantiles(&samples, 3).unwrap();
        let atoms = dm.atoms();
        assert_eq!(atoms.len(), 3);
        assert_eq!(atoms[0].0.w_r, 1.0);
        assert_eq!(atoms[2].0.w_r, 7.0);
        assert!(atoms.iter().all(|a| (a.1 - 1.0 / 3.0).abs() < 1e-15));

        // all-dry series collapses to one atom
        let dry = vec![Disturbance::new(0.0, 4e-5); 10];
        let dm = DisturbanceModel::fit_quantiles(&dry, 3).unwrap();
        assert_eq!(dm.atoms().len(), 1);
        assert!((dm.atoms()[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn from_plant_builds_consistent_tables() {
        let p = PlantParams::default();
        let grid = Grid::uniform(5, 4, &p).unwrap();
        let dm = DisturbanceModel::new(vec![
            (Disturbance::new(0.0, 0.0), 0.5),
            (Disturbance::new(1e-5, 0.0), 0.5),
        ])
        .unwrap();
        let cost = CostSpec::new(1e-3, &p);
        let mdp =
            FiniteMdp::from_plant(&p, &grid, &[0.0, 1.0], &dm, &cost, Projection::Nearest).unwrap();
        assert_eq!(mdp.n_nodes(), 20);
        for node in 0..20 {
            for a in 0..2 {
                for k in 0..2 {
                    assert_eq!(mdp.successors(node, a, k).len(), 1);
                }
            }
        }
        let x = grid.node(7);
        assert_eq!(mdp.stage_cost(0, 7, 1), cost.stage(x, 1.0));
        assert_eq!(mdp.terminal_cost()[7], cost.terminal(x));
    }

    #[test]
    fn rejects_bad_successors() {
        let r = FiniteMdp::new(
            2,
            1,
            vec![1.0],
            vec![vec![(0, 0.5)], vec![(1, 1.0)]],
            StageCosts::Stationary(vec![0.0, 0.0]),
            vec![0.0, 0.0],
        );
        assert!(r.is_err());
        let r = FiniteMdp::new(
            2,
            1,
            vec![1.0],
            vec![vec![(2, 1.0)], vec![(1, 1.0)]],
            StageCosts::Stationary(vec![0.0, 0.0]),
            vec![0.0, 0.0],
        );
        assert!(r.is_err());
    }
}
