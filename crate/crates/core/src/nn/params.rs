use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::NnError;

/// What a parameter set is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Actor,
    Critic,
    TargetCritic,
    Shared,
}

/// Named tensors of one network, iterated in name order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub role: Role,
    tensors: BTreeMap<String, Array2<f64>>,
}

impl ParameterSet {
    pub fn new(role: Role) -> Self {
        ParameterSet { role, tensors: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Array2<f64>) -> Result<(), NnError> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(NnError::Structure(format!("duplicate parameter `{name}`")));
        }
        self.tensors.insert(name, t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array2<f64>> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Array2<f64>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.tensors.values().map(|t| t.len()).sum()
    }

    /// Copy of the tensors whose names start with one of `prefixes`.
    pub fn subset(&self, prefixes: &[&str], role: Role) -> ParameterSet {
        let tensors = self
            .tensors
            .iter()
            .filter(|(k, _)| prefixes.iter().any(|p| k.starts_with(p)))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        ParameterSet { role, tensors }
    }

    /// Ok when `other` has a tensor of the same shape for every name here.
    pub fn check_covers(&self, other: &ParameterSet) -> Result<(), NnError> {
        for (name, t) in &self.tensors {
            match other.tensors.get(name) {
                Some(o) if o.dim() == t.dim() => {}
                Some(o) => return Err(NnError::Shape { op: "structure", left: t.dim(), right: o.dim() }),
                None => return Err(NnError::Structure(format!("`{name}` missing"))),
            }
        }
        Ok(())
    }
}

/// A `fan_in × fan_out` matrix with orthonormal rows or columns (whichever
/// are fewer), times `gain`. Entries of an orthonormal matrix have RMS
/// `1/√max(fan_in, fan_out)`.
pub fn orthogonal<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize, gain: f64) -> Array2<f64> {
    let (rows, cols) = if fan_in >= fan_out { (fan_in, fan_out) } else { (fan_out, fan_in) };
    // Modified Gram-Schmidt on the columns of a tall Gaussian matrix.
    let mut a = Array2::from_shape_simple_fn((rows, cols), || rng.sample::<f64, _>(StandardNormal));
    for j in 0..cols {
        for k in 0..j {
            let proj = a.column(j).dot(&a.column(k));
            let ck = a.column(k).to_owned();
            a.column_mut(j).scaled_add(-proj, &ck);
        }
        let norm = a.column(j).dot(&a.column(j)).sqrt();
        a.column_mut(j).mapv_inplace(|v| v / norm);
    }
    let a = if fan_in >= fan_out { a } else { a.reversed_axes() };
    (a * gain).as_standard_layout().into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn orthogonal_columns_are_orthonormal() {
        let mut rng = stream(1, Stream::Init);
        let w = orthogonal(&mut rng, 8, 3, 1.0);
        let g = w.t().dot(&w);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - e).abs() < 1e-12);
            }
        }
        let w = orthogonal(&mut rng, 3, 8, 1.0);
        assert_eq!(w.dim(), (3, 8));
        let g = w.dot(&w.t());
        assert!((g[[1, 1]] - 1.0).abs() < 1e-12 && g[[0, 2]].abs() < 1e-12);
    }

    #[test]
    fn initialization_is_seed_deterministic() {
        let a = orthogonal(&mut stream(4, Stream::Init), 5, 5, 1.0);
        let b = orthogonal(&mut stream(4, Stream::Init), 5, 5, 1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut p = ParameterSet::new(Role::Actor);
        p.insert("w", Array2::zeros((1, 1))).unwrap();
        assert!(p.insert("w", Array2::zeros((1, 1))).is_err());
    }
}
