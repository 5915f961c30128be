//! Randomized property tests against brute-force oracles.

use std::collections::VecDeque;

use proptest::prelude::*;

use dualmem::embedding::{cosine_distance, embed_local};
use dualmem::policy::{Policy, Segment, UnitKey};
use dualmem::scene_graph::{ObjectAttributes, SceneGraph};
use dualmem::short_term::{MemoryUnit, ObjectState, ShortTermStore};
use dualmem::sketch::FrequencySketch;
use dualmem::Position;

fn key(n: u8) -> UnitKey {
    UnitKey::new(format!("k{n}")).unwrap()
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Insert(u8),
    Access(u8),
}

fn ops(max_key: u8, len: usize) -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(
        prop_oneof![
            (0..max_key).prop_map(Op::Insert),
            (0..max_key).prop_map(Op::Access),
        ],
        0..len,
    )
}

/// Brute-force FIFO reference: a deque plus the variant's re-insert rule.
struct FifoOracle {
    queue: VecDeque<u8>,
    capacity: usize,
    merge: bool,
}

impl FifoOracle {
    fn insert(&mut self, k: u8) -> (Option<u8>, bool) {
        if self.queue.contains(&k) {
            // Resident re-insert never moves the key or evicts.
            return (None, self.merge);
        }
        self.queue.push_back(k);
        let evicted = if self.queue.len() > self.capacity {
            self.queue.pop_front()
        } else {
            None
        };
        (evicted, false)
    }
}

proptest! {
    #[test]
    fn fifo_variants_match_brute_force_oracle(
        merge in any::<bool>(),
        capacity in 1usize..12,
        script in ops(20, 400),
    ) {
        let mut policy = if merge {
            Policy::fifo_merge(capacity).unwrap()
        } else {
            Policy::fifo(capacity).unwrap()
        };
        let mut oracle = FifoOracle { queue: VecDeque::new(), capacity, merge };
        for op in script {
            match op {
                Op::Insert(k) => {
                    let report = policy.insert(&key(k));
                    let (evicted, merged) = oracle.insert(k);
                    prop_assert_eq!(report.evicted, evicted.map(key));
                    prop_assert_eq!(report.merged, merged);
                }
                Op::Access(k) => {
                    let hit = policy.access(&key(k)).is_hit();
                    prop_assert_eq!(hit, oracle.queue.contains(&k));
                }
            }
            let resident: Vec<UnitKey> =
                policy.resident_keys().into_iter().map(|(k, _)| k).collect();
            let expected: Vec<UnitKey> = oracle.queue.iter().copied().map(key).collect();
            prop_assert_eq!(resident, expected);
            prop_assert!(policy.len() <= capacity);
        }
    }

    #[test]
    fn fifo_merge_keeps_at_most_one_entry_per_key(
        capacity in 1usize..10,
        script in ops(6, 300),
    ) {
        let mut policy = Policy::fifo_merge(capacity).unwrap();
        for op in script {
            match op {
                Op::Insert(k) => { policy.insert(&key(k)); }
                Op::Access(k) => { policy.access(&key(k)); }
            }
            let mut keys: Vec<UnitKey> =
                policy.resident_keys().into_iter().map(|(k, _)| k).collect();
            let before = keys.len();
            keys.sort();
            keys.dedup();
            prop_assert_eq!(keys.len(), before);
        }
    }

    #[test]
    fn w_tiny_lfu_respects_capacity_and_protection(
        window in 1usize..10,
        main in 1usize..10,
        script in ops(24, 500),
    ) {
        let capacity = window + main;
        let mut policy = Policy::w_tiny_lfu(capacity, window, main).unwrap();
        for op in script {
            match op {
                Op::Insert(k) => {
                    let before = policy.resident_keys();
                    let report = policy.insert(&key(k));
                    if let Some(evicted) = report.evicted {
                        let segment = before
                            .iter()
                            .find(|(r, _)| *r == evicted)
                            .map(|(_, s)| *s);
                        // The victim is either the rejected candidate or a
                        // window/probation resident, never protected.
                        prop_assert_ne!(segment, Some(Segment::Protected));
                        // The victim minimizes the sketch estimate over the
                        // surviving window and probation entries.
                        let victim_est = policy.frequency_estimate(&evicted);
                        for (survivor, segment) in policy.resident_keys() {
                            if matches!(segment, Segment::Window | Segment::Probation) {
                                prop_assert!(
                                    victim_est <= policy.frequency_estimate(&survivor)
                                );
                            }
                        }
                    }
                }
                Op::Access(k) => { policy.access(&key(k)); }
            }
            prop_assert!(policy.len() <= capacity);
        }
    }

    #[test]
    fn sketch_estimate_is_never_below_true_count(
        script in prop::collection::vec(0u8..16, 0..200),
    ) {
        // No halving within the script's length, so estimates are one-sided.
        let mut sketch = FrequencySketch::new(4, 64, 1_000_000)
            .unwrap()
            .with_counter_cap(u32::MAX);
        let mut counts = [0u32; 16];
        for k in script {
            sketch.increment(&[k]);
            counts[k as usize] += 1;
        }
        for k in 0u8..16 {
            prop_assert!(sketch.estimate(&[k]) >= counts[k as usize]);
        }
    }

    #[test]
    fn store_round_trips_through_json(
        specs in prop::collection::vec(
            ("[a-z]{1,8}", -100.0f64..100.0, -100.0f64..100.0, -100.0f64..100.0, 0usize..12),
            1..20,
        ),
    ) {
        let mut store = ShortTermStore::new(Policy::fifo_merge(32).unwrap());
        for (i, (ty, x, y, z, state)) in specs.iter().enumerate() {
            store.record(MemoryUnit::new(
                ty.clone(),
                UnitKey::new(format!("{ty}|{i}")).unwrap(),
                Position::new(*x, *y, *z),
                ObjectState::ALL[*state],
                format!("/img/{i}.jpg"),
            ));
        }
        let text = store.serialize();
        let restored = ShortTermStore::deserialize(&text).unwrap();
        prop_assert_eq!(restored.len(), store.len());
        prop_assert_eq!(restored.policy().resident_keys(), store.policy().resident_keys());
        for (k, _) in store.policy().resident_keys() {
            prop_assert_eq!(restored.get(&k), store.get(&k));
        }
        prop_assert_eq!(restored.serialize(), text);
    }

    #[test]
    fn recall_matches_full_scan_oracle(
        n in 1usize..30,
        k in 1usize..10,
        query_words in prop::collection::vec("[a-z]{1,6}", 0..5),
    ) {
        let mut store = ShortTermStore::new(Policy::fifo(64).unwrap());
        for i in 0..n {
            store.record(MemoryUnit::new(
                format!("Obj{i:02}"),
                UnitKey::new(format!("Obj{i:02}|{i}")).unwrap(),
                Position::new(i as f64, 0.5, 0.0),
                ObjectState::ALL[i % 12],
                "/img.jpg",
            ));
        }
        let query = query_words.join(" ");
        let got = store.recall_untracked(&query, k).unwrap();

        // Oracle: embed the query, scan residents in order, stable sort.
        let q: dualmem::Embedding = embed_local(&query);
        let mut scored: Vec<(UnitKey, f32)> = store
            .policy()
            .resident_keys()
            .into_iter()
            .map(|(key, _)| {
                let d = cosine_distance(&store.get(&key).unwrap().embedding, &q).unwrap();
                (key, d)
            })
            .collect();
        scored.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        scored.truncate(k);

        prop_assert_eq!(got.len(), scored.len());
        for ((unit, d), (expected_key, expected_d)) in got.iter().zip(&scored) {
            prop_assert_eq!(&unit.object_id, expected_key);
            prop_assert_eq!(*d, *expected_d);
        }
        // Output is sorted ascending by distance.
        for pair in got.windows(2) {
            prop_assert!(pair[0].1 <= pair[1].1);
        }
    }

    #[test]
    fn scene_graph_integrity_and_navigability_oracle(
        n_areas in 1usize..7,
        edge_picks in prop::collection::vec((0usize..7, 0usize..7), 0..12),
        query in (0usize..7, 0usize..7),
    ) {
        let mut graph = SceneGraph::new();
        for i in 0..n_areas {
            graph
                .add_area(
                    format!("node_{i}"),
                    Position::new(i as f64, 0.0, 0.0),
                    None,
                )
                .unwrap();
            graph
                .add_object(
                    &format!("node_{i}"),
                    format!("obj_{i}"),
                    ObjectAttributes {
                        position: Position::new(i as f64, 0.0, 0.1),
                        volume: None,
                    },
                )
                .unwrap();
        }

        // Union-find oracle over accepted edges.
        let mut parent: Vec<usize> = (0..n_areas).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (a, b) in edge_picks {
            let (a, b) = (a % n_areas, b % n_areas);
            let result = graph.add_edge(&format!("node_{a}"), &format!("node_{b}"));
            if a == b {
                prop_assert!(result.is_err());
            } else {
                prop_assert!(result.is_ok());
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }

        // Edges only reference existing areas.
        for (a, b) in graph.edges() {
            prop_assert!(graph.area(a).is_some());
            prop_assert!(graph.area(b).is_some());
        }

        let (qa, qb) = (query.0 % n_areas, query.1 % n_areas);
        let reachable = graph
            .navigable(&format!("node_{qa}"), &format!("node_{qb}"))
            .unwrap();
        prop_assert_eq!(reachable, find(&mut parent, qa) == find(&mut parent, qb));

        // Disk round-trip preserves the graph exactly.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.graph");
        graph.save(&path).unwrap();
        prop_assert_eq!(SceneGraph::load(&path).unwrap(), graph);
    }
}
