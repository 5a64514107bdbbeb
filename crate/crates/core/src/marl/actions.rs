use crate::env::{isolation_safe, Action};
use crate::grid::{Bus, GridSpec};

use super::MarlError;

/// All legal bus configurations of `sub`: the first slot pinned to bus 1,
/// isolating configurations removed. Ordered by the bit pattern of slots
/// `1..n` (slot `k` on bus 2 sets bit `k - 1`), so the all-bus-1
/// configuration comes first.
pub fn enumerate_actions(spec: &GridSpec, sub: usize) -> Result<Vec<Action>, MarlError> {
    let elements = &spec
        .substations
        .get(sub)
        .ok_or_else(|| MarlError::Config(format!("no substation {sub}")))?
        .elements;
    let n = elements.len();
    if n < 2 {
        return Err(MarlError::TooFewElements { substation: sub, elements: n });
    }
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << (n - 1)) {
        let config: Vec<Bus> = (0..n)
            .map(|k| if k > 0 && mask & (1 << (k - 1)) != 0 { Bus::Two } else { Bus::One })
            .collect();
        if isolation_safe(elements, &config) {
            out.push(Action::SetBus { substation: sub, config });
        }
    }
    Ok(out)
}

/// Substations that get a low-level agent: more than `min_size` elements.
pub fn controllable_substations(spec: &GridSpec, min_size: usize) -> Vec<usize> {
    (0..spec.n_substations()).filter(|&s| spec.substation_size(s) > min_size).collect()
}
