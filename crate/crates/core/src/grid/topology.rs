use serde::{Deserialize, Serialize};

use super::{Element, GridError, GridSpec};

/// Busbar of a substation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bus {
    One,
    Two,
}

impl Bus {
    pub fn index(self) -> usize {
        match self {
            Bus::One => 0,
            Bus::Two => 1,
        }
    }

    pub fn number(self) -> i8 {
        match self {
            Bus::One => 1,
            Bus::Two => 2,
        }
    }

    pub fn from_number(n: i64) -> Option<Bus> {
        match n {
            1 => Some(Bus::One),
            2 => Some(Bus::Two),
            _ => None,
        }
    }
}

/// Mutable bus-assignment and line-status state of a grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Topology {
    pub load_bus: Vec<Bus>,
    pub gen_bus: Vec<Bus>,
    pub line_or_bus: Vec<Bus>,
    pub line_ex_bus: Vec<Bus>,
    pub line_in_service: Vec<bool>,
    /// Steps left before a disconnected line may come back.
    pub cooldown: Vec<u32>,
    /// Consecutive steps each line has spent above its limit.
    pub overload_steps: Vec<u32>,
}

impl Topology {
    /// Everything on bus 1, all lines in service, all counters zero.
    pub fn reference(spec: &GridSpec) -> Self {
        let nl = spec.n_lines();
        Topology {
            load_bus: vec![Bus::One; spec.loads.len()],
            gen_bus: vec![Bus::One; spec.generators.len()],
            line_or_bus: vec![Bus::One; nl],
            line_ex_bus: vec![Bus::One; nl],
            line_in_service: vec![true; nl],
            cooldown: vec![0; nl],
            overload_steps: vec![0; nl],
        }
    }

    pub fn bus(&self, e: Element) -> Bus {
        match e {
            Element::Load(i) => self.load_bus[i],
            Element::Generator(i) => self.gen_bus[i],
            Element::LineOrigin(i) => self.line_or_bus[i],
            Element::LineExtremity(i) => self.line_ex_bus[i],
        }
    }

    fn bus_mut(&mut self, e: Element) -> &mut Bus {
        match e {
            Element::Load(i) => &mut self.load_bus[i],
            Element::Generator(i) => &mut self.gen_bus[i],
            Element::LineOrigin(i) => &mut self.line_or_bus[i],
            Element::LineExtremity(i) => &mut self.line_ex_bus[i],
        }
    }

    /// Bus of every slot of `sub`, in slot order.
    pub fn substation_config(&self, spec: &GridSpec, sub: usize) -> Vec<Bus> {
        spec.substations[sub].elements.iter().map(|&e| self.bus(e)).collect()
    }

    pub fn set_substation_config(&mut self, spec: &GridSpec, sub: usize, config: &[Bus]) -> Result<(), GridError> {
        let slots = &spec.substations[sub].elements;
        if slots.len() != config.len() {
            return Err(GridError::ConfigLength { substation: sub, expected: slots.len(), got: config.len() });
        }
        for (&e, &b) in slots.iter().zip(config) {
            *self.bus_mut(e) = b;
        }
        Ok(())
    }

    /// Topology vector: bus number of every element (loads, generators, line
    /// origins, line extremities) followed by one 0/1 status per line.
    pub fn vector(&self) -> Vec<i8> {
        let mut v = Vec::with_capacity(self.load_bus.len() + self.gen_bus.len() + 3 * self.line_in_service.len());
        v.extend(self.load_bus.iter().map(|b| b.number()));
        v.extend(self.gen_bus.iter().map(|b| b.number()));
        v.extend(self.line_or_bus.iter().map(|b| b.number()));
        v.extend(self.line_ex_bus.iter().map(|b| b.number()));
        v.extend(self.line_in_service.iter().map(|&s| s as i8));
        v
    }

    /// Checks the structural invariants against `spec`.
    pub fn validate(&self, spec: &GridSpec) -> Result<(), GridError> {
        let nl = spec.n_lines();
        let ok = self.load_bus.len() == spec.loads.len()
            && self.gen_bus.len() == spec.generators.len()
            && self.line_or_bus.len() == nl
            && self.line_ex_bus.len() == nl
            && self.line_in_service.len() == nl
            && self.cooldown.len() == nl
            && self.overload_steps.len() == nl;
        if !ok {
            return Err(GridError::Invalid("topology does not match grid dimensions".into()));
        }
        for l in 0..nl {
            if self.cooldown[l] > 0 && self.line_in_service[l] {
                return Err(GridError::Invalid(format!("line {l} in service with cooldown {}", self.cooldown[l])));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::case5;

    #[test]
    fn vector_length_is_elements_plus_lines() {
        let g = case5();
        let t = Topology::reference(&g);
        assert_eq!(t.vector().len(), g.n_elements() + g.n_lines());
        t.validate(&g).unwrap();
    }

    #[test]
    fn substation_config_round_trip() {
        let g = case5();
        let mut t = Topology::reference(&g);
        let n = g.substation_size(0);
        let mut cfg = vec![Bus::One; n];
        cfg[n - 1] = Bus::Two;
        cfg[n - 2] = Bus::Two;
        t.set_substation_config(&g, 0, &cfg).unwrap();
        assert_eq!(t.substation_config(&g, 0), cfg);
        assert!(t.set_substation_config(&g, 0, &cfg[1..]).is_err());
    }
}
