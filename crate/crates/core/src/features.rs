//! Sliding-window request counters per base station.
//!
//! Each station remembers its last `short`, `medium` and `long` received
//! requests. An agent's observation is the per-file request count in each
//! window, concatenated: `[short; medium; long]`, each of length `M`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::{FileId, StationId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSizes {
    pub short: usize,
    pub medium: usize,
    pub long: usize,
}

impl Default for WindowSizes {
    fn default() -> Self {
        WindowSizes {
            short: 10,
            medium: 100,
            long: 1000,
        }
    }
}

impl WindowSizes {
    pub fn as_array(&self) -> [usize; 3] {
        [self.short, self.medium, self.long]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Window {
    size: usize,
    recent: VecDeque<FileId>,
    counts: Vec<u32>,
}

impl Window {
    fn new(size: usize, catalog_size: usize) -> Self {
        Window {
            size,
            recent: VecDeque::with_capacity(size + 1),
            counts: vec![0; catalog_size],
        }
    }

    fn push(&mut self, file: FileId) {
        if self.size == 0 {
            return;
        }
        self.recent.push_back(file);
        self.counts[file] += 1;
        if self.recent.len() > self.size {
            let old = self.recent.pop_front().expect("non-empty");
            self.counts[old] -= 1;
        }
    }
}

/// Per-agent feature vector `[F_s; F_m; F_l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub values: Vec<f64>,
    pub catalog_size: usize,
}

impl Observation {
    pub fn short(&self) -> &[f64] {
        &self.values[..self.catalog_size]
    }

    pub fn medium(&self) -> &[f64] {
        &self.values[self.catalog_size..2 * self.catalog_size]
    }

    pub fn long(&self) -> &[f64] {
        &self.values[2 * self.catalog_size..]
    }

    /// The three window features of one file.
    pub fn file_features(&self, file: FileId) -> [f64; 3] {
        let m = self.catalog_size;
        [
            self.values[file],
            self.values[m + file],
            self.values[2 * m + file],
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureWindows {
    catalog_size: usize,
    sizes: WindowSizes,
    stations: Vec<[Window; 3]>,
}

impl FeatureWindows {
    pub fn new(n_stations: usize, catalog_size: usize, sizes: WindowSizes) -> Self {
        let stations = (0..n_stations)
            .map(|_| {
                [
                    Window::new(sizes.short, catalog_size),
                    Window::new(sizes.medium, catalog_size),
                    Window::new(sizes.long, catalog_size),
                ]
            })
            .collect();
        FeatureWindows {
            catalog_size,
            sizes,
            stations,
        }
    }

    pub fn catalog_size(&self) -> usize {
        self.catalog_size
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    /// Length of one observation, `3 M`.
    pub fn observation_len(&self) -> usize {
        3 * self.catalog_size
    }

    /// Appends a request seen by `station` to all three windows.
    pub fn record_request(&mut self, station: StationId, file: FileId) {
        for w in &mut self.stations[station] {
            w.push(file);
        }
    }

    /// Raw counts of window 0 (short), 1 (medium) or 2 (long).
    pub fn counts(&self, station: StationId, window: usize) -> &[u32] {
        &self.stations[station][window].counts
    }

    /// Requests currently held by a window.
    pub fn window_len(&self, station: StationId, window: usize) -> usize {
        self.stations[station][window].recent.len()
    }

    /// Writes the observation of `station` into `out` (length `3 M`). With
    /// `normalize`, counts are divided by the window size.
    pub fn write_observation(&self, station: StationId, normalize: bool, out: &mut [f64]) {
        let m = self.catalog_size;
        for (k, w) in self.stations[station].iter().enumerate() {
            let denom = if normalize && w.size > 0 {
                w.size as f64
            } else {
                1.0
            };
            for (o, &c) in out[k * m..(k + 1) * m].iter_mut().zip(&w.counts) {
                *o = c as f64 / denom;
            }
        }
    }

    pub fn observation(&self, station: StationId, normalize: bool) -> Observation {
        let mut values = vec![0.0; self.observation_len()];
        self.write_observation(station, normalize, &mut values);
        Observation {
            values,
            catalog_size: self.catalog_size,
        }
    }

    /// Observations of all stations concatenated in station order, length `3 M N`.
    pub fn global_state(&self, normalize: bool) -> Vec<f64> {
        let len = self.observation_len();
        let mut x = vec![0.0; len * self.stations.len()];
        for (i, chunk) in x.chunks_mut(len).enumerate() {
            self.write_observation(i, normalize, chunk);
        }
        x
    }

    pub fn sizes(&self) -> WindowSizes {
        self.sizes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn windows() -> FeatureWindows {
        FeatureWindows::new(2, 8, WindowSizes::default())
    }

    #[test]
    fn ten_requests_fill_the_short_window() {
        let mut w = windows();
        for _ in 0..10 {
            w.record_request(0, 7);
        }
        let o = w.observation(0, false);
        assert_eq!(
            (o.short()[7], o.medium()[7], o.long()[7]),
            (10.0, 10.0, 10.0)
        );
    }

    #[test]
    fn empty_history_is_zero() {
        let o = windows().observation(1, true);
        assert!(o.values.iter().all(|&v| v == 0.0));
        assert_eq!(o.values.len(), 24);
    }

    #[test]
    fn eleventh_request_evicts_oldest() {
        let mut w = windows();
        for _ in 0..10 {
            w.record_request(0, 7);
        }
        w.record_request(0, 3);
        let o = w.observation(0, false);
        assert_eq!(o.short()[7], 9.0);
        assert_eq!(o.short()[3], 1.0);
        assert_eq!(o.medium()[7], 10.0);
        assert_eq!(o.long()[3], 1.0);
    }

    #[test]
    fn normalized_full_short_window() {
        let mut w = windows();
        for _ in 0..10 {
            w.record_request(0, 2);
        }
        let o = w.observation(0, true);
        assert_eq!(o.short()[2], 1.0);
        assert_eq!(o.short().iter().sum::<f64>(), 1.0);
        assert_eq!(o.file_features(2), [1.0, 0.1, 0.01]);
    }

    #[test]
    fn global_state_layout() {
        let mut single = FeatureWindows::new(1, 4, WindowSizes::default());
        single.record_request(0, 1);
        assert_eq!(
            single.global_state(true),
            single.observation(0, true).values
        );

        let mut w = FeatureWindows::new(3, 4, WindowSizes::default());
        w.record_request(0, 1);
        w.record_request(2, 3);
        let x = w.global_state(false);
        assert_eq!(x.len(), 3 * 4 * 3);
        for i in 0..3 {
            assert_eq!(
                &x[i * 12..(i + 1) * 12],
                &w.observation(i, false).values[..]
            );
        }
    }

    proptest! {
        #[test]
        fn counts_match_recount(requests in prop::collection::vec(0usize..6, 0..1500)) {
            let sizes = WindowSizes::default();
            let mut w = FeatureWindows::new(1, 6, sizes);
            for &f in &requests {
                w.record_request(0, f);
            }
            let o = w.observation(0, false);
            for (k, size) in sizes.as_array().into_iter().enumerate() {
                let tail = &requests[requests.len().saturating_sub(size)..];
                let slice = &o.values[k * 6..(k + 1) * 6];
                for f in 0..6 {
                    let brute = tail.iter().filter(|&&r| r == f).count() as f64;
                    prop_assert_eq!(slice[f], brute);
                    prop_assert!(slice[f] <= size as f64);
                }
                prop_assert_eq!(slice.iter().sum::<f64>(), requests.len().min(size) as f64);
            }
        }

        #[test]
        fn observation_is_function_of_history(requests in prop::collection::vec(0usize..6, 0..300)) {
            let mut a = FeatureWindows::new(1, 6, WindowSizes::default());
            let mut b = FeatureWindows::new(1, 6, WindowSizes::default());
            for &f in &requests {
                a.record_request(0, f);
                b.record_request(0, f);
            }
            prop_assert_eq!(a.observation(0, true), b.observation(0, true));
        }
    }
}
