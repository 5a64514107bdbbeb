//! Static grid description and its text file format.

use serde::{Deserialize, Serialize};

use super::GridError;

/// Current version of the grid description schema.
pub const GRID_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    /// Series reactance in per unit.
    pub reactance: f64,
    /// Thermal limit in MW.
    pub limit_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub id: usize,
    pub substation: usize,
    pub p_max_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub id: usize,
    pub substation: usize,
}

/// One element slot of a substation. Each slot sits on bus 1 or bus 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    Load(usize),
    Generator(usize),
    LineOrigin(usize),
    LineExtremity(usize),
}

impl Element {
    pub fn is_injection(self) -> bool {
        matches!(self, Element::Load(_) | Element::Generator(_))
    }

    pub fn line(self) -> Option<usize> {
        match self {
            Element::LineOrigin(l) | Element::LineExtremity(l) => Some(l),
            _ => None,
        }
    }
}

/// A substation and its ordered element slots.
///
/// Slots are ordered loads, generators, line origins, line extremities, each
/// group by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct Substation {
    pub id: usize,
    pub elements: Vec<Element>,
}

/// On-disk form of a grid description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub schema_version: u32,
    pub name: String,
    pub substations: usize,
    #[serde(default, rename = "line")]
    pub lines: Vec<LineSpec>,
    #[serde(default, rename = "generator")]
    pub generators: Vec<GeneratorSpec>,
    #[serde(default, rename = "load")]
    pub loads: Vec<LoadSpec>,
}

/// Validated static grid description.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub name: String,
    pub substations: Vec<Substation>,
    pub lines: Vec<LineSpec>,
    pub generators: Vec<GeneratorSpec>,
    pub loads: Vec<LoadSpec>,
}

impl GridSpec {
    /// Builds and validates a grid. Ids in each category must be `0..n` in
    /// order, every element must reference an existing substation and the
    /// substation graph must be connected.
    pub fn new(
        name: impl Into<String>,
        n_substations: usize,
        lines: Vec<LineSpec>,
        generators: Vec<GeneratorSpec>,
        loads: Vec<LoadSpec>,
    ) -> Result<Self, GridError> {
        if n_substations == 0 {
            return Err(GridError::Invalid("grid has no substations".into()));
        }
        check_ids("line", lines.iter().map(|l| l.id))?;
        check_ids("generator", generators.iter().map(|g| g.id))?;
        check_ids("load", loads.iter().map(|l| l.id))?;
        for l in &lines {
            if l.from >= n_substations || l.to >= n_substations {
                return Err(GridError::Invalid(format!("line {} references a missing substation", l.id)));
            }
            if l.from == l.to {
                return Err(GridError::Invalid(format!("line {} connects substation {} to itself", l.id, l.from)));
            }
            if !(l.reactance > 0.0 && l.reactance.is_finite()) {
                return Err(GridError::Invalid(format!("line {} reactance must be positive", l.id)));
            }
            if !(l.limit_mw > 0.0 && l.limit_mw.is_finite()) {
                return Err(GridError::Invalid(format!("line {} limit must be positive", l.id)));
            }
        }
        for g in &generators {
            if g.substation >= n_substations {
                return Err(GridError::Invalid(format!("generator {} references a missing substation", g.id)));
            }
            if !(g.p_max_mw > 0.0) {
                return Err(GridError::Invalid(format!("generator {} p_max must be positive", g.id)));
            }
        }
        for d in &loads {
            if d.substation >= n_substations {
                return Err(GridError::Invalid(format!("load {} references a missing substation", d.id)));
            }
        }

        let mut substations: Vec<Substation> =
            (0..n_substations).map(|id| Substation { id, elements: Vec::new() }).collect();
        for d in &loads {
            substations[d.substation].elements.push(Element::Load(d.id));
        }
        for g in &generators {
            substations[g.substation].elements.push(Element::Generator(g.id));
        }
        for l in &lines {
            substations[l.from].elements.push(Element::LineOrigin(l.id));
        }
        for l in &lines {
            substations[l.to].elements.push(Element::LineExtremity(l.id));
        }

        let spec = GridSpec { name: name.into(), substations, lines, generators, loads };
        if !spec.substations_connected() {
            return Err(GridError::Invalid("substation graph is not connected".into()));
        }
        Ok(spec)
    }

    pub fn from_file(file: GridFile) -> Result<Self, GridError> {
        if file.schema_version != GRID_SCHEMA_VERSION {
            return Err(GridError::Schema(format!(
                "unsupported schema_version {} (expected {GRID_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        Self::new(file.name, file.substations, file.lines, file.generators, file.loads)
    }

    pub fn parse(text: &str) -> Result<Self, GridError> {
        let file: GridFile = toml::from_str(text).map_err(|e| GridError::Schema(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, GridError> {
        let text = std::fs::read_to_string(path).map_err(|e| GridError::Io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn to_file(&self) -> GridFile {
        GridFile {
            schema_version: GRID_SCHEMA_VERSION,
            name: self.name.clone(),
            substations: self.substations.len(),
            lines: self.lines.clone(),
            generators: self.generators.clone(),
            loads: self.loads.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("grid description serializes")
    }

    pub fn n_substations(&self) -> usize {
        self.substations.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    /// Total element slots over all substations (each line counts twice).
    pub fn n_elements(&self) -> usize {
        self.loads.len() + self.generators.len() + 2 * self.lines.len()
    }

    pub fn substation_size(&self, sub: usize) -> usize {
        self.substations[sub].elements.len()
    }

    /// Substation of an element slot.
    pub fn element_substation(&self, e: Element) -> usize {
        match e {
            Element::Load(i) => self.loads[i].substation,
            Element::Generator(i) => self.generators[i].substation,
            Element::LineOrigin(i) => self.lines[i].from,
            Element::LineExtremity(i) => self.lines[i].to,
        }
    }

    /// Lines with an endpoint at `sub`.
    pub fn incident_lines(&self, sub: usize) -> impl Iterator<Item = usize> + '_ {
        self.substations[sub].elements.iter().filter_map(|e| e.line())
    }

    pub fn total_p_max(&self) -> f64 {
        self.generators.iter().map(|g| g.p_max_mw).sum()
    }

    fn substations_connected(&self) -> bool {
        let n = self.substations.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            for l in &self.lines {
                let other = if l.from == s {
                    l.to
                } else if l.to == s {
                    l.from
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

fn check_ids(kind: &str, ids: impl Iterator<Item = usize>) -> Result<(), GridError> {
    for (pos, id) in ids.enumerate() {
        if id != pos {
            return Err(GridError::Invalid(format!("{kind} ids must be 0..n in order; found {id} at position {pos}")));
        }
    }
    Ok(())
}
