use super::MarlError;

/// Empirical probabilities `p_ij` that agent `j` acts right after agent `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MidPolicyEstimate {
    counts: Vec<Vec<f64>>,
    prior: f64,
    identity: bool,
}

impl MidPolicyEstimate {
    pub fn new(n: usize, prior: f64) -> Self {
        MidPolicyEstimate { counts: vec![vec![0.0; n]; n], prior, identity: false }
    }

    /// An estimate whose rows stay indicator-on-self whatever is observed.
    pub fn identity(n: usize) -> Self {
        MidPolicyEstimate { identity: true, ..Self::new(n, 0.0) }
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<f64>] {
        &self.counts
    }

    pub fn update(&mut self, i: usize, j: usize) -> Result<(), MarlError> {
        let n = self.n();
        if i >= n || j >= n {
            return Err(MarlError::Config(format!("agent pair ({i}, {j}) out of range for {n} agents")));
        }
        self.counts[i][j] += 1.0;
        Ok(())
    }

    /// Row `p_i·`. An all-zero row without prior falls back to uniform.
    pub fn row(&self, i: usize) -> Vec<f64> {
        let n = self.n();
        if self.identity {
            return (0..n).map(|j| if j == i { 1.0 } else { 0.0 }).collect();
        }
        let total: f64 = self.counts[i].iter().map(|c| c + self.prior).sum();
        if total <= 0.0 {
            return vec![1.0 / n as f64; n];
        }
        self.counts[i].iter().map(|c| (c + self.prior) / total).collect()
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.row(i)).collect()
    }
}

/// `V̂(s') = Σ_j p_ij·V^j(s')`, with zero-probability terms left out.
pub fn dependent_soft_value(row: &[f64], values: &[f64]) -> Result<f64, MarlError> {
    if row.len() != values.len() {
        return Err(MarlError::Width { expected: row.len(), got: values.len() });
    }
    Ok(row.iter().zip(values).filter(|(p, _)| **p != 0.0).map(|(p, v)| p * v).sum())
}

/// `δ^i = r + γ·Σ_j p_ij V^j(s') − V^i(s)`, no bootstrap when `done`.
pub fn dependent_td_residual(
    row: &[f64],
    reward: f64,
    gamma: f64,
    next_values: &[f64],
    value: f64,
    done: bool,
) -> Result<f64, MarlError> {
    let boot = dependent_soft_value(row, next_values)?;
    Ok(if done { reward - value } else { reward + gamma * boot - value })
}
