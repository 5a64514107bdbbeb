//! Central finite-difference check of tape gradients.

use super::{Bound, NnError, ParameterSet, Tape, Var};

/// Denominator floor of the relative error.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub n_checked: usize,
}

/// `|a − n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares the tape gradient of the scalar built by `f` against central
/// differences with step `h`, entry by entry over every tensor of `params`.
pub fn check_gradients<F>(params: &ParameterSet, h: f64, f: F) -> Result<GradCheck, NnError>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var, NnError>,
{
    let eval = |ps: &ParameterSet| -> Result<f64, NnError> {
        let mut t = Tape::new();
        let b = t.bind(ps);
        let y = f(&mut t, &b)?;
        Ok(t.scalar(y))
    };
    let mut t = Tape::new();
    let b = t.bind(params);
    let y = f(&mut t, &b)?;
    let analytic = b.gradients(&t.backward(y)?);

    let mut work = params.clone();
    let mut out = GradCheck { max_rel_error: 0.0, max_abs_error: 0.0, n_checked: 0 };
    let names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
    for name in names {
        let len = params.get(&name).expect("listed").len();
        for k in 0..len {
            let orig = params.get(&name).expect("listed").as_slice().expect("standard layout")[k];
            set(&mut work, &name, k, orig + h);
            let up = eval(&work)?;
            set(&mut work, &name, k, orig - h);
            let down = eval(&work)?;
            set(&mut work, &name, k, orig);
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[&name].as_slice().expect("standard layout")[k];
            out.max_rel_error = out.max_rel_error.max(relative_error(a, numeric));
            out.max_abs_error = out.max_abs_error.max((a - numeric).abs());
            out.n_checked += 1;
        }
    }
    Ok(out)
}

fn set(ps: &mut ParameterSet, name: &str, k: usize, v: f64) {
    ps.get_mut(name).expect("listed").as_slice_mut().expect("standard layout")[k] = v;
}
