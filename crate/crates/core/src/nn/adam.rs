use std::collections::BTreeMap;

use ndarray::{Array2, Zip};

use super::{NnError, ParameterSet};

/// Adam with bias correction. Moments are kept per parameter name.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: BTreeMap<String, Array2<f64>>,
    v: BTreeMap<String, Array2<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: BTreeMap::new(), v: BTreeMap::new() }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update of every tensor in `params`; each must have a gradient.
    pub fn step(&mut self, params: &mut ParameterSet, grads: &BTreeMap<String, Array2<f64>>) -> Result<(), NnError> {
        for (name, p) in params.iter() {
            match grads.get(name) {
                Some(g) if g.dim() == p.dim() => {}
                Some(g) => return Err(NnError::Shape { op: "adam", left: p.dim(), right: g.dim() }),
                None => return Err(NnError::MissingGradient(name.to_string())),
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let step = self.lr / bc1;
        for (name, p) in params.iter_mut() {
            let g = &grads[name];
            let m = self.m.entry(name.to_string()).or_insert_with(|| Array2::zeros(g.dim()));
            let v = self.v.entry(name.to_string()).or_insert_with(|| Array2::zeros(g.dim()));
            Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= step * *m / ((*v / bc2).sqrt() + eps);
            });
        }
        Ok(())
    }
}

/// `target ← τ·source + (1 − τ)·target` for every tensor of `target`.
pub fn soft_update_target(source: &ParameterSet, target: &mut ParameterSet, tau: f64) -> Result<(), NnError> {
    target.check_covers(source)?;
    for (name, t) in target.iter_mut() {
        let s = source.get(name).expect("covered");
        Zip::from(t).and(s).for_each(|t, &s| *t = tau * s + (1.0 - tau) * *t);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Role, Tape};
    use ndarray::array;

    fn single(w: f64) -> ParameterSet {
        let mut ps = ParameterSet::new(Role::Actor);
        ps.insert("w", array![[w]]).unwrap();
        ps
    }

    fn grads(g: f64) -> BTreeMap<String, Array2<f64>> {
        BTreeMap::from([("w".to_string(), array![[g]])])
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut ps = single(1.5);
        let mut opt = Adam::new(0.1);
        opt.step(&mut ps, &grads(0.0)).unwrap();
        assert_eq!(ps.get("w").unwrap()[[0, 0]], 1.5);
    }

    #[test]
    fn first_step_moves_by_lr_against_the_gradient_sign() {
        for g in [3.0, -0.002] {
            let mut ps = single(0.0);
            let mut opt = Adam::new(0.01);
            opt.step(&mut ps, &grads(g)).unwrap();
            let w = ps.get("w").unwrap()[[0, 0]];
            assert!((w + 0.01 * g.signum()).abs() < 1e-6, "{w}");
        }
    }

    #[test]
    fn hundred_steps_on_a_parabola_converge() {
        let mut ps = single(1.0);
        let mut opt = Adam::new(0.1);
        for _ in 0..100 {
            let mut t = Tape::new();
            let p = t.bind(&ps);
            let w = p.get("w").unwrap();
            let loss = t.mul(w, w).unwrap();
            let g = t.backward(loss).unwrap();
            opt.step(&mut ps, &p.gradients(&g)).unwrap();
        }
        assert!(ps.get("w").unwrap()[[0, 0]].abs() < 0.05);
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut ps = single(1.0);
        let mut opt = Adam::new(0.1);
        assert!(matches!(opt.step(&mut ps, &BTreeMap::new()), Err(NnError::MissingGradient(_))));
    }

    #[test]
    fn soft_update_interpolates() {
        let src = single(2.0);
        let mut tgt = single(0.0);
        soft_update_target(&src, &mut tgt, 0.5).unwrap();
        assert_eq!(tgt.get("w").unwrap()[[0, 0]], 1.0);
        soft_update_target(&src, &mut tgt, 0.0).unwrap();
        assert_eq!(tgt.get("w").unwrap()[[0, 0]], 1.0);
        soft_update_target(&src, &mut tgt, 1.0).unwrap();
        assert_eq!(tgt, src);
        let mut other = ParameterSet::new(Role::TargetCritic);
        other.insert("v", array![[0.0]]).unwrap();
        assert!(soft_update_target(&src, &mut other, 0.5).is_err());
    }
}
