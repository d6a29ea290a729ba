use std::collections::HashMap;
use std::hash::Hash;
use std::sync::{Arc, Mutex, OnceLock};

/// Keyed cache whose values are built at most once per key: concurrent
/// callers for the same key wait for the first builder. When `capacity`
/// entries are held the cache is cleared before inserting.
#[derive(Debug)]
pub struct SingleFlightCache<K, V> {
    slots: Mutex<HashMap<K, Arc<OnceLock<V>>>>,
    capacity: usize,
}

impl<K: Eq + Hash + Clone, V: Clone> SingleFlightCache<K, V> {
    pub fn new(capacity: usize) -> Self {
        SingleFlightCache { slots: Mutex::new(HashMap::new()), capacity: capacity.max(1) }
    }

    pub fn get_or_build(&self, key: &K, build: impl FnOnce() -> V) -> V {
        let slot = {
            let mut slots = self.slots.lock().unwrap_or_else(|p| p.into_inner());
            if let Some(slot) = slots.get(key) {
                Arc::clone(slot)
            } else {
                if slots.len() >= self.capacity {
                    slots.clear();
                }
                let slot = Arc::new(OnceLock::new());
                slots.insert(key.clone(), Arc::clone(&slot));
                slot
            }
        };
        slot.get_or_init(build).clone()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
