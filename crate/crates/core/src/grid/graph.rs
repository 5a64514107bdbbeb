use std::collections::BTreeMap;

use super::{Bus, Element, GridSpec, Topology};

/// Per-element power injections for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Injections {
    pub load_mw: Vec<f64>,
    pub gen_mw: Vec<f64>,
}

/// An electrical node: one energized busbar of a substation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeKey {
    pub substation: usize,
    pub bus: Bus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub line: usize,
    pub from: usize,
    pub to: usize,
    pub reactance: f64,
    pub limit_mw: f64,
}

/// Bus-level graph derived from a grid, its topology and injections.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectricalGraph {
    /// Sorted by (substation, bus).
    pub nodes: Vec<NodeKey>,
    pub node_gen_mw: Vec<f64>,
    pub node_load_mw: Vec<f64>,
    pub node_n_gens: Vec<usize>,
    pub node_n_loads: Vec<usize>,
    /// In-service lines only.
    pub edges: Vec<Edge>,
    pub n_lines: usize,
}

impl ElectricalGraph {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Net injection (generation minus load) per node, before balancing.
    pub fn net_injection(&self, node: usize) -> f64 {
        self.node_gen_mw[node] - self.node_load_mw[node]
    }

    pub fn node_index(&self, key: NodeKey) -> Option<usize> {
        self.nodes.binary_search(&key).ok()
    }

    /// True when the node carries a load, a generator or an in-service line.
    pub fn is_active(&self, node: usize) -> bool {
        self.node_n_gens[node] > 0
            || self.node_n_loads[node] > 0
            || self.edges.iter().any(|e| e.from == node || e.to == node)
    }

    /// Connected components over in-service edges, as a component label per
    /// node. Labels are assigned in node order.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut uf = UnionFind::new(self.nodes.len());
        for e in &self.edges {
            uf.union(e.from, e.to);
        }
        let mut labels = vec![usize::MAX; self.nodes.len()];
        let mut root_label = BTreeMap::new();
        for (i, label) in labels.iter_mut().enumerate() {
            let r = uf.find(i);
            let next = root_label.len();
            *label = *root_label.entry(r).or_insert(next);
        }
        let n = root_label.len();
        (labels, n)
    }
}

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Derives the electrical graph. A (substation, bus) pair is a node when at
/// least one element is assigned to it, whether or not that element is a
/// line currently in service.
pub fn build_electrical_graph(spec: &GridSpec, topo: &Topology, inj: &Injections) -> ElectricalGraph {
    let mut keys: Vec<NodeKey> = spec
        .substations
        .iter()
        .flat_map(|s| s.elements.iter().map(move |&e| NodeKey { substation: s.id, bus: topo.bus(e) }))
        .collect();
    keys.sort();
    keys.dedup();

    let n = keys.len();
    let index = |k: NodeKey| keys.binary_search(&k).expect("every assigned element has a node");
    let mut node_gen_mw = vec![0.0; n];
    let mut node_load_mw = vec![0.0; n];
    let mut node_n_gens = vec![0; n];
    let mut node_n_loads = vec![0; n];
    for (i, g) in spec.generators.iter().enumerate() {
        let k = index(NodeKey { substation: g.substation, bus: topo.bus(Element::Generator(i)) });
        node_gen_mw[k] += inj.gen_mw[i];
        node_n_gens[k] += 1;
    }
    for (i, d) in spec.loads.iter().enumerate() {
        let k = index(NodeKey { substation: d.substation, bus: topo.bus(Element::Load(i)) });
        node_load_mw[k] += inj.load_mw[i];
        node_n_loads[k] += 1;
    }
    let edges = spec
        .lines
        .iter()
        .filter(|l| topo.line_in_service[l.id])
        .map(|l| Edge {
            line: l.id,
            from: index(NodeKey { substation: l.from, bus: topo.line_or_bus[l.id] }),
            to: index(NodeKey { substation: l.to, bus: topo.line_ex_bus[l.id] }),
            reactance: l.reactance,
            limit_mw: l.limit_mw,
        })
        .collect();

    ElectricalGraph {
        nodes: keys,
        node_gen_mw,
        node_load_mw,
        node_n_gens,
        node_n_loads,
        edges,
        n_lines: spec.n_lines(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::case5;

    fn flat_injections(spec: &GridSpec) -> Injections {
        Injections { load_mw: vec![10.0; spec.loads.len()], gen_mw: vec![15.0; spec.generators.len()] }
    }

    #[test]
    fn unsplit_grid_has_one_node_per_substation() {
        let g = case5();
        let t = Topology::reference(&g);
        let eg = build_electrical_graph(&g, &t, &flat_injections(&g));
        assert_eq!(eg.n_nodes(), 5);
        assert_eq!(eg.edges.len(), 8);
    }

    #[test]
    fn moving_two_elements_splits_substation_zero() {
        let g = case5();
        let mut t = Topology::reference(&g);
        let n = g.substation_size(0);
        let mut cfg = vec![Bus::One; n];
        cfg[n - 1] = Bus::Two;
        cfg[n - 2] = Bus::Two;
        t.set_substation_config(&g, 0, &cfg).unwrap();
        let eg = build_electrical_graph(&g, &t, &flat_injections(&g));
        assert_eq!(eg.n_nodes(), 6);
    }

    #[test]
    fn all_lines_out_keeps_nodes() {
        let g = case5();
        let mut t = Topology::reference(&g);
        t.line_in_service.iter_mut().for_each(|s| *s = false);
        let eg = build_electrical_graph(&g, &t, &flat_injections(&g));
        assert_eq!(eg.edges.len(), 0);
        assert_eq!(eg.n_nodes(), 5);
    }

    #[test]
    fn injections_are_summed_per_node() {
        let g = case5();
        let t = Topology::reference(&g);
        let inj = flat_injections(&g);
        let eg = build_electrical_graph(&g, &t, &inj);
        let total_gen: f64 = eg.node_gen_mw.iter().sum();
        let total_load: f64 = eg.node_load_mw.iter().sum();
        assert_eq!(total_gen, 30.0);
        assert_eq!(total_load, 30.0);
        assert_eq!(build_electrical_graph(&g, &t, &inj), eg);
    }
}
