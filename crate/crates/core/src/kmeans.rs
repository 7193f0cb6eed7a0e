//! k-means with cluster sizes held within one of each other.
//!
//! `|P|` points and target size `n` give `k = ceil(|P| / n)` clusters, each
//! of size `floor(|P| / k)` or `ceil(|P| / k)`. Every iteration assigns
//! points to the current centroids by a minimum-cost flow (squared Euclidean
//! cost), then moves each centroid to the mean of its cluster. Initial
//! centroids are chosen k-means++ style from a seeded generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const MAX_ITERATIONS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KMeansError {
    #[error("no points to cluster")]
    NoPoints,
    #[error("target cluster size must be at least 1")]
    ZeroTarget,
    #[error("points have different dimensions")]
    Dimension,
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Minimum-cost assignment of points to clusters where every cluster
/// receives `lo` or `lo + 1` points and exactly `extra` clusters receive
/// `lo + 1`. `cost[p][c]` is the cost of putting point `p` in cluster `c`.
///
/// Points are inserted one at a time along a shortest augmenting path
/// (successive shortest paths with Johnson potentials). The residual graph
/// has cluster nodes, a hub node owning the `extra` spare slots, and the
/// already placed points; a placed point is only reachable from its own
/// cluster, so Dijkstra runs over the cluster and hub nodes alone.
pub fn balanced_assignment(cost: &[Vec<f64>], lo: usize, extra: usize) -> Vec<usize> {
    let n_points = cost.len();
    let k = cost.first().map_or(0, Vec::len);
    assert!(k * lo + extra == n_points && extra <= k, "sizes do not add up");
    let hub = k;
    let mut assign = vec![usize::MAX; n_points];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut has_extra = vec![false; k];
    let mut extra_used = 0;
    // Potentials of clusters + hub, and of points.
    let mut pi = vec![0.0f64; k + 1];
    let mut pi_point = vec![0.0f64; n_points];

    for p in 0..n_points {
        pi_point[p] = (0..k).map(|c| pi[c] - cost[p][c]).fold(f64::NEG_INFINITY, f64::max);
        let mut dist = vec![f64::INFINITY; k + 1];
        // How each node was reached: from the new point, by moving a placed
        // point, from the hub, or (for the hub) from a cluster.
        #[derive(Clone, Copy)]
        enum Pred {
            Source,
            Point(usize),
            Hub,
            FromCluster(usize),
        }
        let mut pred = vec![Pred::Source; k + 1];
        let mut done = vec![false; k + 1];
        for c in 0..k {
            dist[c] = (cost[p][c] + pi_point[p] - pi[c]).max(0.0);
        }
        let mut point_dist = vec![f64::INFINITY; n_points];
        loop {
            let mut u = usize::MAX;
            for v in 0..=k {
                if !done[v] && dist[v].is_finite() && (u == usize::MAX || dist[v] < dist[u]) {
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u == hub {
                // Hub -> cluster holding a spare slot (it may give it up).
                for c in 0..k {
                    if has_extra[c] && !done[c] {
                        let d = dist[hub] + (pi[hub] - pi[c]).max(0.0);
                        if d < dist[c] {
                            dist[c] = d;
                            pred[c] = Pred::Hub;
                        }
                    }
                }
                continue;
            }
            if !has_extra[u] && !done[hub] {
                // Cluster -> hub: take a spare slot.
                let d = dist[u] + (pi[u] - pi[hub]).max(0.0);
                if d < dist[hub] {
                    dist[hub] = d;
                    pred[hub] = Pred::FromCluster(u);
                }
            }
            for &q in &members[u] {
                let dq = dist[u] + (-cost[q][u] + pi[u] - pi_point[q]).max(0.0);
                point_dist[q] = dq;
                for c in 0..k {
                    if c != u && !done[c] {
                        let d = dq + (cost[q][c] + pi_point[q] - pi[c]).max(0.0);
                        if d < dist[c] {
                            dist[c] = d;
                            pred[c] = Pred::Point(q);
                        }
                    }
                }
            }
        }

        // True path cost to the sink through each terminal, ties by index.
        let true_cost = |v: usize| dist[v] - pi_point[p] + pi[v];
        let mut best: Option<(f64, usize)> = None;
        for c in 0..k {
            if dist[c].is_finite() && members[c].len() < lo + usize::from(has_extra[c]) {
                let t = true_cost(c);
                if best.is_none_or(|(b, _)| t < b) {
                    best = Some((t, c));
                }
            }
        }
        if extra_used < extra && dist[hub].is_finite() {
            let t = true_cost(hub);
            if best.is_none_or(|(b, _)| t < b) {
                best = Some((t, hub));
            }
        }
        let (_, terminal) = best.expect("a free slot always exists while points remain");
        if terminal == hub {
            extra_used += 1;
        }

        // Walk back along the path, moving points as we go.
        let mut v = terminal;
        loop {
            match pred[v] {
                Pred::Source => {
                    assign[p] = v;
                    members[v].push(p);
                    break;
                }
                Pred::Hub => {
                    // v gives its spare slot back to the hub.
                    has_extra[v] = false;
                    v = hub;
                }
                Pred::FromCluster(c) => {
                    // c takes a spare slot from the hub.
                    has_extra[c] = true;
                    v = c;
                }
                Pred::Point(q) => {
                    let from = assign[q];
                    members[from].retain(|&x| x != q);
                    members[v].push(q);
                    assign[q] = v;
                    v = from;
                }
            }
        }

        let finite_max = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
        for v in 0..=k {
            pi[v] += if dist[v].is_finite() { dist[v] } else { finite_max };
        }
        for q in 0..n_points {
            if q == p {
                // The new point sits at distance 0 from itself.
                continue;
            }
            if assign[q] != usize::MAX {
                pi_point[q] += if point_dist[q].is_finite() { point_dist[q] } else { finite_max };
            }
        }
    }
    assign
}

fn kmeans_pp(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        centers.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

/// Partitions point indices into `ceil(|P| / target)` clusters of
/// near-equal size. Clusters are returned with members ascending, ordered by
/// their smallest member. Deterministic for a fixed seed.
pub fn constrained_kmeans(points: &[Vec<f64>], target: usize, seed: u64) -> Result<Vec<Vec<usize>>, KMeansError> {
    if points.is_empty() {
        return Err(KMeansError::NoPoints);
    }
    if target == 0 {
        return Err(KMeansError::ZeroTarget);
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(KMeansError::Dimension);
    }
    let n = points.len();
    if target >= n {
        return Ok(vec![(0..n).collect()]);
    }
    if target == 1 {
        return Ok((0..n).map(|i| vec![i]).collect());
    }
    let k = n.div_ceil(target);
    let lo = n / k;
    let extra = n % k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_pp(points, k, &mut rng);
    let mut assign: Vec<usize> = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let cost: Vec<Vec<f64>> =
            points.iter().map(|p| centers.iter().map(|c| squared_distance(p, c)).collect()).collect();
        let next = balanced_assignment(&cost, lo, extra);
        if next == assign {
            break;
        }
        assign = next;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            for s in &mut sums[c] {
                *s /= counts[c] as f64;
            }
        }
        centers = sums;
    }
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in assign.iter().enumerate() {
        clusters[c].push(i);
    }
    clusters.sort_by_key(|c| c[0]);
    Ok(clusters)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(cost: &[Vec<f64>], lo: usize, extra: usize) -> f64 {
        let (n, k) = (cost.len(), cost[0].len());
        let mut best = f64::INFINITY;
        let mut assign = vec![0; n];
        loop {
            let mut sizes = vec![0; k];
            for &c in &assign {
                sizes[c] += 1;
            }
            let ok = sizes.iter().all(|&s| s == lo || s == lo + 1)
                && sizes.iter().filter(|&&s| s == lo + 1).count() == extra;
            if ok {
                best = best.min(assign.iter().enumerate().map(|(p, &c)| cost[p][c]).sum());
            }
            let mut i = 0;
            while i < n {
                assign[i] += 1;
                if assign[i] < k {
                    break;
                }
                assign[i] = 0;
                i += 1;
            }
            if i == n {
                return best;
            }
        }
    }

    #[test]
    fn assignment_is_optimal_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.gen_range(1..=7);
            let k = rng.gen_range(1..=n.min(4));
            let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.gen_range(0..20) as f64).collect()).collect();
            let (lo, extra) = (n / k, n % k);
            let assign = balanced_assignment(&cost, lo, extra);
            let total: f64 = assign.iter().enumerate().map(|(p, &c)| cost[p][c]).sum();
            assert_eq!(total, brute_force(&cost, lo, extra), "{cost:?} -> {assign:?}");
            let mut sizes = vec![0; k];
            for &c in &assign {
                sizes[c] += 1;
            }
            assert!(sizes.iter().all(|&s| s == lo || s == lo + 1));
        }
    }

    #[test]
    fn ten_points_target_four() {
        let points: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let clusters = constrained_kmeans(&points, 4, 1).unwrap();
        let mut sizes: Vec<usize> = clusters.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
    }

    #[test]
    fn degenerate_targets() {
        let points: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 0.0]).collect();
        assert_eq!(constrained_kmeans(&points, 1, 0).unwrap().len(), 5);
        assert_eq!(constrained_kmeans(&points, 9, 0).unwrap(), vec![vec![0, 1, 2, 3, 4]]);
        assert_eq!(constrained_kmeans(&[], 2, 0), Err(KMeansError::NoPoints));
        assert_eq!(constrained_kmeans(&points, 0, 0), Err(KMeansError::ZeroTarget));
    }

    #[test]
    fn separated_groups_are_found() {
        let mut points = Vec::new();
        for i in 0..4 {
            points.push(vec![i as f64 * 0.01, 0.0]);
            points.push(vec![100.0 + i as f64 * 0.01, 0.0]);
        }
        let clusters = constrained_kmeans(&points, 4, 3).unwrap();
        assert_eq!(clusters, vec![vec![0, 2, 4, 6], vec![1, 3, 5, 7]]);
    }
}
