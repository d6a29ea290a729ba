//! Persistent, concurrently readable store of custom layers.
//!
//! On disk: one `layer-NNNN.csv` (`cdscode,value`) per layer and an
//! `index.json` with names, files, timestamps and join statistics. Both are
//! written to a temporary name and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::layer::{CustomLayer, JoinStats};
use crate::ingest::sha256_hex;
use crate::model::CdsCode;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("a layer named {0:?} already exists")]
    DuplicateLayerName(String),
    #[error("no layer named {0:?}")]
    NotFound(String),
    #[error("layer store {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("layer store is corrupt: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexEntry {
    name: String,
    file: String,
    created_at: u64,
    join_stats: JoinStats,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct IndexFile {
    next_file: u64,
    layers: Vec<IndexEntry>,
}

#[derive(Default)]
struct State {
    layers: BTreeMap<String, (Arc<CustomLayer>, String)>,
    next_file: u64,
    fingerprint: String,
}

pub struct LayerRegistry {
    dir: Option<PathBuf>,
    state: RwLock<State>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RegistryError + '_ {
    move |source| RegistryError::Io { path: path.to_path_buf(), source }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RegistryError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

impl LayerRegistry {
    /// A registry that lives only in memory.
    pub fn in_memory() -> Self {
        let reg = LayerRegistry { dir: None, state: RwLock::new(State::default()) };
        reg.state.write().unwrap().fingerprint = fingerprint(&IndexFile::default());
        reg
    }

    /// Opens (creating if needed) a registry persisted under `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, RegistryError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let index_path = dir.join("index.json");
        let index: IndexFile = match fs::read(&index_path) {
            Ok(bytes) => {
                serde_json::from_slice(&bytes).map_err(|e| RegistryError::Corrupt(format!("index.json: {e}")))?
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => IndexFile::default(),
            Err(e) => return Err(io_err(&index_path)(e)),
        };
        let mut state = State { next_file: index.next_file, fingerprint: fingerprint(&index), ..State::default() };
        for entry in index.layers {
            let path = dir.join(&entry.file);
            let values = read_values(&path)?;
            let layer = CustomLayer {
                name: entry.name.clone(),
                created_at: entry.created_at,
                join_stats: entry.join_stats,
                values,
            };
            state.layers.insert(entry.name, (Arc::new(layer), entry.file));
        }
        Ok(LayerRegistry { dir: Some(dir), state: RwLock::new(state) })
    }

    pub fn names(&self) -> Vec<String> {
        self.state.read().unwrap().layers.keys().cloned().collect()
    }

    pub fn list(&self) -> Vec<Arc<CustomLayer>> {
        self.state.read().unwrap().layers.values().map(|(l, _)| Arc::clone(l)).collect()
    }

    pub fn get(&self, name: &str) -> Option<Arc<CustomLayer>> {
        self.state.read().unwrap().layers.get(name).map(|(l, _)| Arc::clone(l))
    }

    pub fn len(&self) -> usize {
        self.state.read().unwrap().layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Content hash of the index; changes whenever a layer is added or removed.
    pub fn fingerprint(&self) -> String {
        self.state.read().unwrap().fingerprint.clone()
    }

    pub fn create(&self, layer: CustomLayer) -> Result<Arc<CustomLayer>, RegistryError> {
        let mut state = self.state.write().unwrap();
        if state.layers.contains_key(&layer.name) {
            return Err(RegistryError::DuplicateLayerName(layer.name));
        }
        let file = format!("layer-{:04}.csv", state.next_file);
        if let Some(dir) = &self.dir {
            write_atomic(&dir.join(&file), &values_csv(&layer.values))?;
        }
        let layer = Arc::new(layer);
        let mut next =
            State { layers: state.layers.clone(), next_file: state.next_file + 1, fingerprint: String::new() };
        next.layers.insert(layer.name.clone(), (Arc::clone(&layer), file));
        self.commit(&mut state, next)?;
        Ok(layer)
    }

    pub fn delete(&self, name: &str) -> Result<(), RegistryError> {
        let mut state = self.state.write().unwrap();
        let Some((_, file)) = state.layers.get(name).cloned() else {
            return Err(RegistryError::NotFound(name.to_string()));
        };
        let mut next = State { layers: state.layers.clone(), next_file: state.next_file, fingerprint: String::new() };
        next.layers.remove(name);
        self.commit(&mut state, next)?;
        if let Some(dir) = &self.dir {
            let _ = fs::remove_file(dir.join(file));
        }
        Ok(())
    }

    fn commit(&self, state: &mut State, mut next: State) -> Result<(), RegistryError> {
        let index = IndexFile {
            next_file: next.next_file,
            layers: next
                .layers
                .values()
                .map(|(l, f)| IndexEntry {
                    name: l.name.clone(),
                    file: f.clone(),
                    created_at: l.created_at,
                    join_stats: l.join_stats.clone(),
                })
                .collect(),
        };
        if let Some(dir) = &self.dir {
            let bytes = serde_json::to_vec_pretty(&index).expect("index serializes");
            write_atomic(&dir.join("index.json"), &bytes)?;
        }
        next.fingerprint = fingerprint(&index);
        *state = next;
        Ok(())
    }
}

fn fingerprint(index: &IndexFile) -> String {
    let mut entries: Vec<(&str, u64, &str)> =
        index.layers.iter().map(|e| (e.name.as_str(), e.created_at, e.file.as_str())).collect();
    entries.sort();
    sha256_hex(serde_json::to_string(&entries).expect("serializes").as_bytes())
}

fn values_csv(values: &BTreeMap<CdsCode, f64>) -> Vec<u8> {
    let mut out = String::from("cdscode,value\n");
    for (code, v) in values {
        out.push_str(&format!("{code},{v}\n"));
    }
    out.into_bytes()
}

fn read_values(path: &Path) -> Result<BTreeMap<CdsCode, f64>, RegistryError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let mut values = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| RegistryError::Corrupt(format!("{}: {e}", path.display())))?;
        let bad = || RegistryError::Corrupt(format!("{}: bad row {:?}", path.display(), row));
        let code = CdsCode::parse(row.get(0).unwrap_or("")).map_err(|_| bad())?;
        let v: f64 = row.get(1).unwrap_or("").parse().map_err(|_| bad())?;
        values.insert(code, v);
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(name: &str, v: f64) -> CustomLayer {
        let mut values = BTreeMap::new();
        values.insert(CdsCode::parse("01611190000000").unwrap(), v);
        values.insert(CdsCode::parse("01611270000000").unwrap(), 0.1 + 0.2);
        CustomLayer {
            name: name.into(),
            created_at: 1_700_000_000,
            join_stats: JoinStats { rows: 2, matched: 2, ..JoinStats::default() },
            values,
        }
    }

    #[test]
    fn persists_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let reg = LayerRegistry::open(dir.path()).unwrap();
        let f0 = reg.fingerprint();
        reg.create(layer("acs", 1.0 / 3.0)).unwrap();
        reg.create(layer("income", -2.5)).unwrap();
        let f2 = reg.fingerprint();
        assert_ne!(f0, f2);
        drop(reg);

        let reg = LayerRegistry::open(dir.path()).unwrap();
        assert_eq!(reg.names(), vec!["acs", "income"]);
        assert_eq!(*reg.get("acs").unwrap(), layer("acs", 1.0 / 3.0));
        assert_eq!(reg.fingerprint(), f2);
        reg.delete("acs").unwrap();
        assert!(reg.get("acs").is_none());
        drop(reg);
        let reg = LayerRegistry::open(dir.path()).unwrap();
        assert_eq!(reg.names(), vec!["income"]);
        assert!(!dir.path().join("layer-0000.csv").exists());
    }

    #[test]
    fn duplicate_and_missing() {
        let reg = LayerRegistry::in_memory();
        reg.create(layer("a", 1.0)).unwrap();
        assert!(matches!(reg.create(layer("a", 2.0)), Err(RegistryError::DuplicateLayerName(_))));
        assert!(matches!(reg.delete("b"), Err(RegistryError::NotFound(_))));
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn concurrent_creates_are_unique() {
        let reg = Arc::new(LayerRegistry::in_memory());
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let reg = Arc::clone(&reg);
                std::thread::spawn(move || reg.create(layer(&format!("l{}", i % 4), 1.0)).is_ok())
            })
            .collect();
        let ok = handles.into_iter().map(|h| h.join().unwrap()).filter(|&b| b).count();
        assert_eq!(ok, 4);
        assert_eq!(reg.len(), 4);
    }

    #[test]
    fn corrupt_index() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("index.json"), "{").unwrap();
        assert!(matches!(LayerRegistry::open(dir.path()), Err(RegistryError::Corrupt(_))));
    }
}
