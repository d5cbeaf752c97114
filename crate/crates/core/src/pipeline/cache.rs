use std::collections::{HashMap, VecDeque};
use std::hash::Hash;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::Serialize;

use crate::analytics::SceneNdvi;
use crate::error::Result;
use crate::ingest::{export_composite, ExportKind, ExportRecord};
use crate::ndvi::{NdviComposite, ThresholdMask};
use crate::raster::RasterGrid;
use crate::sensor::SensorId;

/// Composite plus the per-scene grids it was built from.
#[derive(Debug)]
pub struct CachedComposite {
    pub composite: NdviComposite<f32>,
    pub scenes: Vec<SceneNdvi<f32>>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
    pub capacity: usize,
}

struct Lru<K, V> {
    map: HashMap<K, V>,
    order: VecDeque<K>,
    capacity: usize,
}

impl<K: Clone + Eq + Hash, V: Clone> Lru<K, V> {
    fn new(capacity: usize) -> Self {
        Lru {
            map: HashMap::new(),
            order: VecDeque::new(),
            capacity: capacity.max(1),
        }
    }

    fn touch(&mut self, key: &K) {
        if let Some(i) = self.order.iter().position(|k| k == key) {
            let k = self.order.remove(i).expect("position in range");
            self.order.push_back(k);
        }
    }

    fn get(&mut self, key: &K) -> Option<V> {
        let v = self.map.get(key).cloned()?;
        self.touch(key);
        Some(v)
    }

    /// Inserts and returns the evicted entries.
    fn insert(&mut self, key: K, value: V) -> Vec<(K, V)> {
        if self.map.insert(key.clone(), value).is_some() {
            self.touch(&key);
            return Vec::new();
        }
        self.order.push_back(key);
        let mut evicted = Vec::new();
        while self.order.len() > self.capacity {
            let k = self.order.pop_front().expect("non-empty");
            if let Some(v) = self.map.remove(&k) {
                evicted.push((k, v));
            }
        }
        evicted
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

/// Bounded LRU map of composites, keyed by the inputs that determine them.
pub struct CompositeCache {
    inner: Mutex<Lru<String, Arc<CachedComposite>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl CompositeCache {
    pub fn new(capacity: usize) -> Self {
        CompositeCache {
            inner: Mutex::new(Lru::new(capacity)),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Looks `key` up, counting a hit or a miss.
    pub fn get(&self, key: &str) -> Option<Arc<CachedComposite>> {
        let v = lock(&self.inner).get(&key.to_string());
        let counter = if v.is_some() {
            &self.hits
        } else {
            &self.misses
        };
        counter.fetch_add(1, Ordering::Relaxed);
        v
    }

    pub fn insert(&self, key: String, value: Arc<CachedComposite>) {
        lock(&self.inner).insert(key, value);
    }

    pub fn stats(&self) -> CacheStats {
        let inner = lock(&self.inner);
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: inner.map.len(),
            capacity: inner.capacity,
        }
    }
}

/// Exported GeoTIFFs by analysis id. The oldest analyses' files are deleted
/// once more than `capacity` are held.
pub struct ExportStore {
    dir: PathBuf,
    inner: Mutex<Lru<String, ExportRecord>>,
}

impl ExportStore {
    pub fn new(dir: impl Into<PathBuf>, capacity: usize) -> Self {
        ExportStore {
            dir: dir.into(),
            inner: Mutex::new(Lru::new(capacity)),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes both rasters for `analysis_id`, reusing earlier files.
    pub fn export(
        &self,
        analysis_id: &str,
        composite: &RasterGrid<f32>,
        mask: &ThresholdMask,
        sensor: SensorId,
    ) -> Result<ExportRecord> {
        let mut inner = lock(&self.inner);
        if let Some(rec) = inner.get(&analysis_id.to_string()) {
            if rec.composite_path.exists() && rec.mask_path.exists() {
                return Ok(rec);
            }
        }
        let rec = export_composite(composite, mask, sensor, &self.dir, analysis_id)?;
        for (id, old) in inner.insert(analysis_id.to_string(), rec.clone()) {
            log::debug!("dropping exports of {id}");
            let _ = std::fs::remove_file(&old.composite_path);
            let _ = std::fs::remove_file(&old.mask_path);
        }
        Ok(rec)
    }

    /// Path of a held export, if its file still exists.
    pub fn get(&self, analysis_id: &str, kind: ExportKind) -> Option<PathBuf> {
        let rec = lock(&self.inner).get(&analysis_id.to_string())?;
        let p = rec.path(kind).to_path_buf();
        p.exists().then_some(p)
    }
}
