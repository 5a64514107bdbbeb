//! Chronic tables and the episode-set manifest.
//!
//! A chronic is a comma-separated table with a mandatory header
//! `timestep,load_<id>_mw...,gen_<id>_mw...`. The manifest is a TOML document
//! listing each chronic file with its split and window offsets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Chronic, EnvError, EpisodeSet, Split};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub split: Split,
    pub offsets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub window: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(rename = "chronic")]
    pub chronics: Vec<ManifestEntry>,
}

pub fn write_chronic<W: std::io::Write>(chronic: &Chronic, out: W) -> Result<(), EnvError> {
    let mut w = csv::Writer::from_writer(out);
    let n_loads = chronic.load_mw.first().map_or(0, Vec::len);
    let n_gens = chronic.gen_mw.first().map_or(0, Vec::len);
    let mut header = vec!["timestep".to_string()];
    header.extend((0..n_loads).map(|i| format!("load_{i}_mw")));
    header.extend((0..n_gens).map(|i| format!("gen_{i}_mw")));
    w.write_record(&header).map_err(csv_err)?;
    for (t, (loads, gens)) in chronic.load_mw.iter().zip(&chronic.gen_mw).enumerate() {
        let mut row = vec![t.to_string()];
        // `{:?}` prints the shortest string that round-trips the f64.
        row.extend(loads.iter().chain(gens).map(|v| format!("{v:?}")));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| EnvError::Io("chronic".into(), e))?;
    Ok(())
}

pub fn read_chronic<R: std::io::Read>(id: &str, input: R) -> Result<Chronic, EnvError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("timestep") {
        return Err(EnvError::Format(format!("{id}: first column must be `timestep`")));
    }
    let mut n_loads = 0;
    let mut n_gens = 0;
    for (k, name) in header.iter().enumerate().skip(1) {
        if name == format!("load_{n_loads}_mw") && n_gens == 0 {
            n_loads += 1;
        } else if name == format!("gen_{n_gens}_mw") {
            n_gens += 1;
        } else {
            return Err(EnvError::Format(format!("{id}: unexpected column `{name}` at position {k}")));
        }
    }
    let mut load_mw = Vec::new();
    let mut gen_mw = Vec::new();
    for (row_no, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parse = |k: usize| -> Result<f64, EnvError> {
            rec.get(k)
                .ok_or_else(|| EnvError::Format(format!("{id}: row {row_no} is short")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| EnvError::Format(format!("{id}: row {row_no} column {k}: {e}")))
        };
        let t: usize = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| EnvError::Format(format!("{id}: row {row_no} has a bad timestep")))?;
        if t != row_no {
            return Err(EnvError::Format(format!("{id}: timestep {t} at row {row_no}")));
        }
        load_mw.push((1..=n_loads).map(parse).collect::<Result<Vec<_>, _>>()?);
        gen_mw.push((n_loads + 1..=n_loads + n_gens).map(parse).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(Chronic { id: id.to_string(), load_mw, gen_mw, step_minutes: 5 })
}

/// Writes every chronic as `<id>.csv` plus `manifest.toml` into `dir`.
pub fn write_episode_set(set: &EpisodeSet, dir: &Path, seed: Option<u64>) -> Result<PathBuf, EnvError> {
    std::fs::create_dir_all(dir).map_err(|e| EnvError::Io(dir.display().to_string(), e))?;
    let mut entries = Vec::new();
    for (c, chronic) in set.chronics.iter().enumerate() {
        let file = format!("{}.csv", chronic.id);
        let path = dir.join(&file);
        let f = std::fs::File::create(&path).map_err(|e| EnvError::Io(path.display().to_string(), e))?;
        write_chronic(chronic, std::io::BufWriter::new(f))?;
        entries.push(ManifestEntry { id: chronic.id.clone(), file, split: set.splits[c], offsets: set.offsets[c].clone() });
    }
    let manifest = Manifest { schema_version: MANIFEST_SCHEMA_VERSION, window: set.window, seed, chronics: entries };
    let path = dir.join("manifest.toml");
    let text = toml::to_string(&manifest).map_err(|e| EnvError::Format(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| EnvError::Io(path.display().to_string(), e))?;
    Ok(path)
}

/// Reads a manifest and the chronic files it lists (relative to the
/// manifest's directory).
pub fn read_episode_set(manifest_path: &Path) -> Result<EpisodeSet, EnvError> {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| EnvError::Io(manifest_path.display().to_string(), e))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| EnvError::Format(e.to_string()))?;
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(EnvError::Format(format!("unsupported manifest schema_version {}", manifest.schema_version)));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut set = EpisodeSet { chronics: Vec::new(), splits: Vec::new(), offsets: Vec::new(), window: manifest.window };
    for e in manifest.chronics {
        let path = base.join(&e.file);
        let f = std::fs::File::open(&path).map_err(|err| EnvError::Io(path.display().to_string(), err))?;
        set.chronics.push(read_chronic(&e.id, std::io::BufReader::new(f))?);
        set.splits.push(e.split);
        set.offsets.push(e.offsets);
    }
    set.validate()?;
    Ok(set)
}

fn csv_err(e: csv::Error) -> EnvError {
    EnvError::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_chronics, ChronicProfile};
    use crate::grid::case5;

    #[test]
    fn episode_set_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let set = generate_chronics(&case5(), 5, 4, 900, &ChronicProfile::default()).unwrap();
        let manifest = write_episode_set(&set, dir.path(), Some(5)).unwrap();
        let back = read_episode_set(&manifest).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn header_is_mandatory() {
        let text = "0,1.0,2.0\n1,1.0,2.0\n";
        assert!(read_chronic("x", text.as_bytes()).is_err());
        let text = "timestep,load_0_mw,gen_0_mw\n0,1.0,2.0\n";
        let c = read_chronic("x", text.as_bytes()).unwrap();
        assert_eq!(c.load_mw, vec![vec![1.0]]);
        assert_eq!(c.gen_mw, vec![vec![2.0]]);
    }

    #[test]
    fn unknown_manifest_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.toml");
        std::fs::write(&path, "schema_version = 1\nwindow = 10\nextra = 3\nchronic = []\n").unwrap();
        assert!(matches!(read_episode_set(&path), Err(EnvError::Format(_))));
    }
}
