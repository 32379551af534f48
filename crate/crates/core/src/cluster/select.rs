//! Conditioning-channel selection: cluster-guided medoids and the seeded
//! random baseline they are compared against.

use serde_json::json;

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::rng::{sample_without_replacement, seeded_rng};
use crate::scalar::Scalar;
use crate::ssim::SimilarityMatrix;

/// How a selection was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMethod {
    /// Medoids drawn per cluster from a k-way cut.
    ClusterMedoid { source_k: usize },
    /// Uniform sample without replacement.
    Random { seed: u64 },
}

impl SelectionMethod {
    pub fn label(&self) -> &'static str {
        match self {
            SelectionMethod::ClusterMedoid { .. } => "cluster_medoid",
            SelectionMethod::Random { .. } => "random",
        }
    }
}

/// Sorted, unique channel indices plus the recipe that produced them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelSelection {
    indices: Vec<usize>,
    method: SelectionMethod,
}

impl ChannelSelection {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn method(&self) -> SelectionMethod {
        self.method
    }

    /// `names` is the full channel-name table of the source stack.
    pub fn to_json(&self, names: &[String]) -> Result<String> {
        if self.indices.iter().any(|&i| i >= names.len()) {
            return Err(Error::validation("selection index out of range for name table"));
        }
        let selected: Vec<&str> = self.indices.iter().map(|&i| names[i].as_str()).collect();
        let (seed, k) = match self.method {
            SelectionMethod::ClusterMedoid { source_k } => (None, Some(source_k)),
            SelectionMethod::Random { seed } => (Some(seed), None),
        };
        Ok(json!({
            "method": self.method.label(),
            "seed": seed,
            "k": k,
            "indices": self.indices,
            "names": selected,
        })
        .to_string())
    }
}

/// Mean similarity of channel `i` to the other members of its cluster;
/// zero for singletons.
fn medoid_score<S: Scalar>(m: &SimilarityMatrix<S>, members: &[usize], i: usize) -> f64 {
    if members.len() < 2 {
        return 0.0;
    }
    let total: f64 =
        members.iter().filter(|&&j| j != i).map(|&j| m.get(i, j).into_f64()).sum();
    total / (members.len() - 1) as f64
}

/// Allocates `count` seats across cluster sizes by largest remainder in
/// exact integer arithmetic, then repairs so every cluster keeps at least
/// one seat. Requires count >= number of clusters.
fn allocate_seats(sizes: &[usize], count: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let k = sizes.len();
    debug_assert!(count >= k && count <= n);

    let mut seats: Vec<usize> = sizes.iter().map(|&s| count * s / n).collect();
    let mut extras = count - seats.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(count * sizes[c] % n), c));
    for &c in &order {
        if extras == 0 {
            break;
        }
        // The cap cannot be hit here: a cluster at capacity has zero
        // remainder and is never handed an extra seat.
        seats[c] += 1;
        extras -= 1;
    }

    // Guarantee a seat everywhere, taking from the best-seated cluster.
    for c in 0..k {
        if seats[c] > 0 {
            continue;
        }
        let donor = (0..k)
            .max_by_key(|&d| (seats[d], std::cmp::Reverse(d)))
            .expect("at least one cluster");
        debug_assert!(seats[donor] >= 2);
        seats[donor] -= 1;
        seats[c] = 1;
    }
    seats
}

/// Picks `count` channels guided by the clustering: seats go to clusters
/// by size (largest remainder, at least one each when they fit), and each
/// cluster contributes its highest mean-similarity members first.
pub fn select_by_cluster<S: Scalar>(
    a: &ClusterAssignment,
    m: &SimilarityMatrix<S>,
    count: usize,
) -> Result<ChannelSelection> {
    let n = a.n();
    if m.n() != n {
        return Err(Error::validation(format!(
            "similarity matrix covers {} channels but the assignment covers {n}",
            m.n()
        )));
    }
    if count == 0 || count > n {
        return Err(Error::validation(format!(
            "cannot select {count} of {n} channels"
        )));
    }

    let clusters = a.clusters();
    let k = clusters.len();
    let seats: Vec<usize> = if count < k {
        // Too few seats to cover every cluster: the largest clusters win.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&c| (std::cmp::Reverse(clusters[c].len()), c));
        let mut seats = vec![0usize; k];
        for &c in order.iter().take(count) {
            seats[c] = 1;
        }
        seats
    } else {
        let sizes: Vec<usize> = clusters.iter().map(|c| c.len()).collect();
        allocate_seats(&sizes, count)
    };

    let mut indices = Vec::with_capacity(count);
    for (c, members) in clusters.iter().enumerate() {
        if seats[c] == 0 {
            continue;
        }
        let mut ranked: Vec<(f64, usize)> =
            members.iter().map(|&i| (medoid_score(m, members, i), i)).collect();
        ranked.sort_by(|a, b| {
            b.0.partial_cmp(&a.0).expect("finite scores").then(a.1.cmp(&b.1))
        });
        indices.extend(ranked[..seats[c]].iter().map(|&(_, i)| i));
    }
    indices.sort_unstable();
    debug_assert_eq!(indices.len(), count);

    Ok(ChannelSelection {
        indices,
        method: SelectionMethod::ClusterMedoid { source_k: a.k() },
    })
}

/// Uniform sample of `count` distinct channels, sorted; identical seeds
/// give identical selections.
pub fn select_random(n_channels: usize, count: usize, seed: u64) -> Result<ChannelSelection> {
    if count == 0 || count > n_channels {
        return Err(Error::validation(format!(
            "cannot select {count} of {n_channels} channels"
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut indices = sample_without_replacement(n_channels, count, &mut rng);
    indices.sort_unstable();
    Ok(ChannelSelection { indices, method: SelectionMethod::Random { seed } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{agglomerate, cut, to_distance, Linkage};
    use crate::ssim::SimilarityKind;

    fn sim(names: usize, pairs: &[f64]) -> SimilarityMatrix<f64> {
        let names: Vec<String> = (0..names).map(|i| format!("ch{i}")).collect();
        SimilarityMatrix::from_pairs(SimilarityKind::Ssim, names, pairs)
    }

    fn assignment(labels: &[usize], k: usize) -> ClusterAssignment {
        ClusterAssignment { labels: labels.to_vec(), k }
    }

    fn pseudo_pairs(n: usize, mut seed: f64) -> Vec<f64> {
        (0..n * (n - 1) / 2)
            .map(|_| {
                seed = (seed * 823.0 + 0.377).fract();
                2.0 * seed - 1.0
            })
            .collect()
    }

    #[test]
    fn selecting_everything_returns_every_index() {
        let m = sim(4, &pseudo_pairs(4, 0.3));
        let a = assignment(&[0, 0, 1, 1], 2);
        let s = select_by_cluster(&a, &m, 4).unwrap();
        assert_eq!(s.indices(), &[0, 1, 2, 3]);
    }

    #[test]
    fn one_seat_per_cluster_picks_the_medoids() {
        // Cluster {0,1,2}: means 0.5, 0.7, 0.3, so 1 is the medoid.
        let m = sim(4, &[0.9, 0.1, 0.0, 0.5, 0.0, 0.0]);
        let a = assignment(&[0, 0, 0, 1], 2);
        let s = select_by_cluster(&a, &m, 2).unwrap();
        assert_eq!(s.indices(), &[1, 3]);
        assert_eq!(s.method(), SelectionMethod::ClusterMedoid { source_k: 2 });
    }

    #[test]
    fn extra_seats_follow_the_medoid_ranking() {
        let m = sim(4, &[0.9, 0.1, 0.0, 0.5, 0.0, 0.0]);
        let a = assignment(&[0, 0, 0, 1], 2);
        let s = select_by_cluster(&a, &m, 3).unwrap();
        // Cluster 0 ranked 1 (0.7), 0 (0.5), 2 (0.3): two seats take {0,1}.
        assert_eq!(s.indices(), &[0, 1, 3]);
    }

    #[test]
    fn tied_medoid_scores_prefer_the_lower_index() {
        // Channels 0 and 1 both score 0.4 inside the single cluster.
        let m = sim(3, &[0.6, 0.2, 0.2]);
        let a = assignment(&[0, 0, 0], 1);
        let s = select_by_cluster(&a, &m, 1).unwrap();
        assert_eq!(s.indices(), &[0]);
    }

    #[test]
    fn selection_matches_a_brute_force_oracle() {
        // Oracle: recompute every mean-similarity score directly and pick
        // per-cluster prefixes after integer largest-remainder seating.
        let n = 9;
        let m = sim(n, &pseudo_pairs(n, 0.61));
        let labels = [0, 1, 0, 2, 1, 0, 2, 0, 1];
        let a = assignment(&labels, 3);
        for count in 3..=n {
            let got = select_by_cluster(&a, &m, count).unwrap();

            let clusters: Vec<Vec<usize>> = (0..3)
                .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
                .collect();
            let sizes: Vec<usize> = clusters.iter().map(|c| c.len()).collect();
            let mut seats: Vec<usize> = sizes.iter().map(|&s| count * s / n).collect();
            let mut extras = count - seats.iter().sum::<usize>();
            let mut order: Vec<usize> = (0..3).collect();
            order.sort_by_key(|&c| (std::cmp::Reverse(count * sizes[c] % n), c));
            for &c in &order {
                if extras > 0 {
                    seats[c] += 1;
                    extras -= 1;
                }
            }
            for c in 0..3 {
                if seats[c] == 0 {
                    let donor =
                        (0..3).max_by_key(|&d| (seats[d], std::cmp::Reverse(d))).unwrap();
                    seats[donor] -= 1;
                    seats[c] = 1;
                }
            }
            let mut want = Vec::new();
            for (c, members) in clusters.iter().enumerate() {
                let mut scored: Vec<(f64, usize)> = members
                    .iter()
                    .map(|&i| {
                        let s: f64 = members
                            .iter()
                            .filter(|&&j| j != i)
                            .map(|&j| m.get(i, j))
                            .sum();
                        (s / (members.len() - 1) as f64, i)
                    })
                    .collect();
                scored.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
                want.extend(scored[..seats[c]].iter().map(|&(_, i)| i));
            }
            want.sort_unstable();
            assert_eq!(got.indices(), &want[..], "count {count}");
        }
    }

    #[test]
    fn remainder_seating_respects_cluster_sizes() {
        // Sizes [3, 2, 1] with 4 seats: quotas 2, 4/3, 2/3 seat as 2,1,1.
        let m = sim(6, &pseudo_pairs(6, 0.23));
        let a = assignment(&[0, 0, 0, 1, 1, 2], 3);
        let s = select_by_cluster(&a, &m, 4).unwrap();
        let picked = s.indices();
        assert_eq!(picked.iter().filter(|&&i| i <= 2).count(), 2);
        assert_eq!(picked.iter().filter(|&&i| (3..=4).contains(&i)).count(), 1);
        assert!(picked.contains(&5));
    }

    #[test]
    fn dominant_clusters_still_leave_one_seat_each() {
        // Sizes [8, 1, 1] with 3 seats: raw remainders hand everything to
        // the big cluster; the repair pass claws two seats back.
        let n = 10;
        let m = sim(n, &pseudo_pairs(n, 0.47));
        let labels = [0, 0, 0, 0, 0, 0, 0, 0, 1, 2];
        let s = select_by_cluster(&assignment(&labels, 3), &m, 3).unwrap();
        assert!(s.indices().contains(&8));
        assert!(s.indices().contains(&9));
        assert_eq!(s.indices().iter().filter(|&&i| i < 8).count(), 1);
    }

    #[test]
    fn too_few_seats_go_to_the_largest_clusters() {
        // Sizes [3, 3, 2, 1], 2 seats: size ties break toward label 0.
        let n = 9;
        let m = sim(n, &pseudo_pairs(n, 0.82));
        let labels = [0, 0, 0, 1, 1, 1, 2, 2, 3];
        let s = select_by_cluster(&assignment(&labels, 4), &m, 2).unwrap();
        assert_eq!(s.indices().len(), 2);
        assert_eq!(s.indices().iter().filter(|&&i| i <= 2).count(), 1);
        assert_eq!(s.indices().iter().filter(|&&i| (3..=5).contains(&i)).count(), 1);
    }

    #[test]
    fn cluster_selection_validates_its_inputs() {
        let m = sim(4, &pseudo_pairs(4, 0.3));
        let a = assignment(&[0, 0, 1, 1], 2);
        assert!(select_by_cluster(&a, &m, 0).is_err());
        assert!(select_by_cluster(&a, &m, 5).is_err());
        let wrong = sim(3, &pseudo_pairs(3, 0.3));
        assert!(select_by_cluster(&a, &wrong, 2).is_err());
    }

    #[test]
    fn every_cluster_is_represented_when_seats_suffice() {
        for seed in 0..6 {
            let n = 12;
            let m = sim(n, &pseudo_pairs(n, 0.05 + seed as f64 * 0.13));
            let d = to_distance(&m);
            let t = agglomerate(&d, Linkage::Average).unwrap();
            for k in 2..=5 {
                let a = cut(&t, k).unwrap();
                for count in k..=n {
                    let s = select_by_cluster(&a, &m, count).unwrap();
                    assert_eq!(s.indices().len(), count);
                    let mut seen = vec![false; k];
                    for &i in s.indices() {
                        seen[a.labels()[i]] = true;
                    }
                    assert!(seen.iter().all(|&v| v), "k {k} count {count}");
                    let mut dedup = s.indices().to_vec();
                    dedup.dedup();
                    assert_eq!(dedup.len(), count);
                }
            }
        }
    }

    #[test]
    fn selections_are_permutation_equivariant() {
        let n = 8;
        let pairs = pseudo_pairs(n, 0.29);
        let m = sim(n, &pairs);
        let p: Vec<usize> = (0..n).rev().collect();
        let mut permuted = vec![0.0; n * (n - 1) / 2];
        let mut it = 0;
        let mut full = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                full[p[i] * n + p[j]] = pairs[it];
                full[p[j] * n + p[i]] = pairs[it];
                it += 1;
            }
        }
        let mut idx = 0;
        for i in 0..n {
            for j in i + 1..n {
                permuted[idx] = full[i * n + j];
                idx += 1;
            }
        }
        let mp = sim(n, &permuted);

        let a = cut(&agglomerate(&to_distance(&m), Linkage::Average).unwrap(), 3).unwrap();
        let ap = cut(&agglomerate(&to_distance(&mp), Linkage::Average).unwrap(), 3).unwrap();
        let s = select_by_cluster(&a, &m, 4).unwrap();
        let sp = select_by_cluster(&ap, &mp, 4).unwrap();
        let mut mapped: Vec<usize> = s.indices().iter().map(|&i| p[i]).collect();
        mapped.sort_unstable();
        assert_eq!(mapped, sp.indices());
    }

    #[test]
    fn random_selection_is_deterministic_and_sorted() {
        let a = select_random(10, 4, 99).unwrap();
        let b = select_random(10, 4, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.indices().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.method(), SelectionMethod::Random { seed: 99 });
        let c = select_random(10, 4, 100).unwrap();
        assert_ne!(a.indices(), c.indices());
    }

    #[test]
    fn random_selection_covers_the_full_range_when_exhaustive() {
        let s = select_random(5, 5, 7).unwrap();
        assert_eq!(s.indices(), &[0, 1, 2, 3, 4]);
        assert!(select_random(5, 6, 7).is_err());
        assert!(select_random(5, 0, 7).is_err());
    }

    #[test]
    fn random_selection_is_uniform_over_many_seeds() {
        let n = 10;
        let count = 3;
        let trials = 10_000u64;
        let mut hits = vec![0u32; n];
        for seed in 0..trials {
            for &i in select_random(n, count, seed).unwrap().indices() {
                hits[i] += 1;
            }
        }
        for (i, &h) in hits.iter().enumerate() {
            let freq = h as f64 / trials as f64;
            assert!((freq - 0.3).abs() < 0.02, "channel {i}: {freq}");
        }
    }

    #[test]
    fn selection_json_carries_the_recipe() {
        let names: Vec<String> = (0..4).map(|i| format!("marker{i}")).collect();
        let m = sim(4, &pseudo_pairs(4, 0.3));
        let a = assignment(&[0, 0, 1, 1], 2);
        let s = select_by_cluster(&a, &m, 2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s.to_json(&names).unwrap()).unwrap();
        assert_eq!(v["method"], "cluster_medoid");
        assert_eq!(v["k"], 2);
        assert!(v["seed"].is_null());
        assert_eq!(v["indices"].as_array().unwrap().len(), 2);

        let r = select_random(4, 2, 5).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json(&names).unwrap()).unwrap();
        assert_eq!(v["method"], "random");
        assert_eq!(v["seed"], 5);
        assert!(v["k"].is_null());
        assert_eq!(v["names"].as_array().unwrap().len(), 2);

        assert!(r.to_json(&names[..1]).is_err());
    }
}
