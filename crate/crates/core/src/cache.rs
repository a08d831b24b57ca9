//! Per-station cache state, the replacement action space, the cache matrix
//! and the LRU/LFU/FIFO baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::topology::Topology;
use crate::{Error, FileId, Result, StationId, UserId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedFile {
    pub file: FileId,
    /// Logical access tick of the most recent hit or insertion.
    pub last_used: u64,
    pub use_count: u64,
    /// Logical tick at insertion.
    pub inserted: u64,
    pub inserted_cycle: u64,
}

/// Files held by one base station, in slot order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheState {
    pub station: StationId,
    capacity: usize,
    slots: Vec<CachedFile>,
    /// Per-cache access counter; orders events inside one cycle.
    clock: u64,
}

/// Result of feeding one request to a baseline cache.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Hit,
    Inserted,
    Replaced { evicted: FileId },
}

impl CacheState {
    pub fn new(station: StationId, capacity: usize) -> Self {
        CacheState {
            station,
            capacity,
            slots: Vec::with_capacity(capacity),
            clock: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() >= self.capacity
    }

    pub fn slots(&self) -> &[CachedFile] {
        &self.slots
    }

    pub fn files(&self) -> impl Iterator<Item = FileId> + '_ {
        self.slots.iter().map(|s| s.file)
    }

    /// File in `slot`, or `None` for a free slot.
    pub fn file_at(&self, slot: usize) -> Option<FileId> {
        self.slots.get(slot).map(|s| s.file)
    }

    pub fn contains(&self, file: FileId) -> bool {
        self.position(file).is_some()
    }

    pub fn position(&self, file: FileId) -> Option<usize> {
        self.slots.iter().position(|s| s.file == file)
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn entry(&mut self, file: FileId, cycle: u64) -> CachedFile {
        let t = self.tick();
        CachedFile {
            file,
            last_used: t,
            use_count: 1,
            inserted: t,
            inserted_cycle: cycle,
        }
    }

    /// Puts `file` into a free slot. Returns false when the file is already
    /// cached or the cache is full.
    pub fn insert(&mut self, file: FileId, cycle: u64) -> bool {
        if self.is_full() || self.contains(file) {
            return false;
        }
        let e = self.entry(file, cycle);
        self.slots.push(e);
        true
    }

    fn touch(&mut self, slot: usize) {
        let t = self.tick();
        let s = &mut self.slots[slot];
        s.last_used = t;
        s.use_count += 1;
    }

    /// Executes a caching action. `requested` holds the current request of
    /// each connectable user, in connectable-user order. A replacement whose
    /// file is already cached degrades to a no-op; one that names a free slot
    /// fills it. Returns whether the cache changed.
    pub fn apply_action(
        &mut self,
        action: Action,
        requested: &[FileId],
        cycle: u64,
    ) -> Result<bool> {
        let Action::Replace {
            evict_slot,
            request_slot,
        } = action
        else {
            return Ok(false);
        };
        if evict_slot >= self.capacity || request_slot >= requested.len() {
            return Err(Error::contract(format!(
                "action {action:?} out of bounds for capacity {} and {} requests",
                self.capacity,
                requested.len()
            )));
        }
        let file = requested[request_slot];
        if self.contains(file) {
            return Ok(false);
        }
        let e = self.entry(file, cycle);
        if evict_slot < self.slots.len() {
            self.slots[evict_slot] = e;
        } else {
            self.slots.push(e);
        }
        Ok(true)
    }

    /// Feeds one request to a classic replacement policy.
    pub fn baseline_step(
        &mut self,
        policy: BaselinePolicy,
        file: FileId,
        cycle: u64,
    ) -> StepOutcome {
        if let Some(slot) = self.position(file) {
            self.touch(slot);
            return StepOutcome::Hit;
        }
        if self.capacity == 0 {
            return StepOutcome::Inserted;
        }
        if !self.is_full() {
            let e = self.entry(file, cycle);
            self.slots.push(e);
            return StepOutcome::Inserted;
        }
        let victim = self.victim(policy);
        let evicted = self.slots[victim].file;
        self.slots[victim] = self.entry(file, cycle);
        StepOutcome::Replaced { evicted }
    }

    /// Slot evicted by `policy`; ties go to the lowest slot.
    fn victim(&self, policy: BaselinePolicy) -> usize {
        let key = |s: &CachedFile| match policy {
            BaselinePolicy::Lru => s.last_used,
            BaselinePolicy::Lfu => s.use_count,
            BaselinePolicy::Fifo => s.inserted,
        };
        let mut best = 0;
        for (i, s) in self.slots.iter().enumerate().skip(1) {
            if key(s) < key(&self.slots[best]) {
                best = i;
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselinePolicy {
    Lru,
    Lfu,
    Fifo,
}

impl BaselinePolicy {
    pub const ALL: [BaselinePolicy; 3] = [
        BaselinePolicy::Lru,
        BaselinePolicy::Lfu,
        BaselinePolicy::Fifo,
    ];
}

impl fmt::Display for BaselinePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselinePolicy::Lru => "lru",
            BaselinePolicy::Lfu => "lfu",
            BaselinePolicy::Fifo => "fifo",
        })
    }
}

impl FromStr for BaselinePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lru" => Ok(BaselinePolicy::Lru),
            "lfu" => Ok(BaselinePolicy::Lfu),
            "fifo" => Ok(BaselinePolicy::Fifo),
            other => Err(Error::config(format!("unknown baseline policy {other:?}"))),
        }
    }
}

/// A caching decision: keep the cache, or overwrite `evict_slot` with the
/// file requested by the `request_slot`-th connectable user. Both indices
/// are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    NoOp,
    Replace {
        evict_slot: usize,
        request_slot: usize,
    },
}

/// Number of actions, including the no-op: `capacity * n_connectable + 1`.
pub fn action_space_size(capacity: usize, n_connectable: usize) -> usize {
    capacity * n_connectable + 1
}

/// Maps an action id to an action. Id 0 is the no-op; the rest enumerate
/// (slot, user) pairs in row-major order.
pub fn decode_action(id: usize, capacity: usize, n_connectable: usize) -> Result<Action> {
    if id >= action_space_size(capacity, n_connectable) {
        return Err(Error::contract(format!(
            "action id {id} outside 0..{}",
            action_space_size(capacity, n_connectable)
        )));
    }
    if id == 0 {
        return Ok(Action::NoOp);
    }
    Ok(Action::Replace {
        evict_slot: (id - 1) / n_connectable,
        request_slot: (id - 1) % n_connectable,
    })
}

pub fn encode_action(action: Action, capacity: usize, n_connectable: usize) -> Result<usize> {
    match action {
        Action::NoOp => Ok(0),
        Action::Replace {
            evict_slot,
            request_slot,
        } if evict_slot < capacity && request_slot < n_connectable => {
            Ok(1 + evict_slot * n_connectable + request_slot)
        }
        other => Err(Error::contract(format!("{other:?} out of bounds"))),
    }
}

/// The N x M caching indicator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheMatrix {
    n_stations: usize,
    catalog_size: usize,
    cells: Vec<bool>,
}

impl CacheMatrix {
    pub fn from_caches(caches: &[CacheState], catalog_size: usize) -> Self {
        let mut cells = vec![false; caches.len() * catalog_size];
        for (i, c) in caches.iter().enumerate() {
            for f in c.files() {
                cells[i * catalog_size + f] = true;
            }
        }
        CacheMatrix {
            n_stations: caches.len(),
            catalog_size,
            cells,
        }
    }

    pub fn get(&self, station: StationId, file: FileId) -> bool {
        self.cells[station * self.catalog_size + file]
    }

    pub fn row(&self, station: StationId) -> &[bool] {
        &self.cells[station * self.catalog_size..(station + 1) * self.catalog_size]
    }

    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.n_stations)
            .map(|i| self.row(i).iter().filter(|&&b| b).count())
            .collect()
    }

    /// Checks the capacity constraint for every station.
    pub fn within_capacity(&self, capacity: usize) -> bool {
        self.row_sums().iter().all(|&s| s <= capacity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lookup {
    Hit(StationId),
    Miss,
}

/// The covering station that serves `file` to `user`: the nearest one that
/// holds it (lower id on ties), or a miss.
pub fn lookup(caches: &[CacheState], topology: &Topology, user: UserId, file: FileId) -> Lookup {
    let mut best: Option<(StationId, f64)> = None;
    for (i, cache) in caches.iter().enumerate() {
        if !topology.covered(i, user) || !cache.contains(file) {
            continue;
        }
        let d = topology.distance(i, user);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map_or(Lookup::Miss, |(i, _)| Lookup::Hit(i))
}
