use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roi::{DatasetSchema, VectorDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Admin,
    ProtectedAreas,
}

/// One entry of a catalog file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub id: String,
    pub kind: DatasetKind,
    pub path: PathBuf,
    pub schema: DatasetSchema,
}

#[derive(Deserialize)]
struct CatalogFile {
    datasets: Vec<DatasetConfig>,
}

/// Named vector datasets available for ROI selection.
#[derive(Clone, Debug, Default)]
pub struct DatasetCatalog {
    entries: BTreeMap<String, (DatasetKind, Arc<VectorDataset>)>,
}

impl DatasetCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads `{"datasets": [...]}`; relative paths resolve against the
    /// catalog file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CatalogFile = serde_json::from_str(&text)
            .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut catalog = DatasetCatalog::new();
        for cfg in file.datasets {
            let ds = VectorDataset::from_geojson_file(base.join(&cfg.path), cfg.schema)?;
            catalog.insert(cfg.id, cfg.kind, ds);
        }
        Ok(catalog)
    }

    pub fn insert(&mut self, id: impl Into<String>, kind: DatasetKind, dataset: VectorDataset) {
        self.entries.insert(id.into(), (kind, Arc::new(dataset)));
    }

    pub fn get(&self, id: &str) -> Result<(DatasetKind, &VectorDataset)> {
        self.entries
            .get(id)
            .map(|(k, d)| (*k, d.as_ref()))
            .ok_or_else(|| Error::NoSuchUnit(format!("dataset `{id}`")))
    }

    pub fn ids(&self) -> impl Iterator<Item = (&str, DatasetKind)> {
        self.entries
            .iter()
            .map(|(k, (kind, _))| (k.as_str(), *kind))
    }

    /// Child names below `path` in dataset `id`.
    pub fn children(&self, id: &str, path: &[&str]) -> Result<Vec<String>> {
        let (kind, ds) = self.get(id)?;
        match (kind, path) {
            (DatasetKind::ProtectedAreas, [iso3]) if ds.schema.hierarchy_keys.is_empty() => {
                ds.list_protected_areas(iso3)
            }
            _ => ds.list_children(path),
        }
    }
}
