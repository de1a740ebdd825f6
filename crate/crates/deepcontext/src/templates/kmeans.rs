//! Seeded k-means (k-means++ initialization, Lloyd iterations).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MAX_ITERS: usize = 100;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters d-dimensional points into k centroids, deterministically for a
/// given seed. If there are fewer than k distinct points, the distinct points
/// are returned padded by cycling duplication.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(!points.is_empty(), "kmeans needs at least one point");
    assert!(k >= 1, "kmeans needs k >= 1");

    let mut distinct: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !distinct.iter().any(|q| q == p) {
            distinct.push(p.clone());
        }
    }
    if distinct.len() <= k {
        let mut out = distinct.clone();
        let mut i = 0;
        while out.len() < k {
            out.push(distinct[i % distinct.len()].clone());
            i += 1;
        }
        return out;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..points.len())
        } else {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        };
        centroids.push(points[next].clone());
        let c = centroids.last().expect("just pushed");
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, c));
        }
    }

    // Lloyd until assignments stabilize
    let dim = points[0].len();
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = dist2(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for v in sums[c].iter_mut() {
                    *v /= counts[c] as f64;
                }
                centroids[c] = sums[c].clone();
            }
            // empty clusters keep their previous centroid
        }
    }
    centroids
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn k1_is_the_mean() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 0.0]];
        let c = kmeans(&pts, 1, 0);
        assert_eq!(c.len(), 1);
        assert!((c[0][0] - 3.0).abs() < 1e-12);
        assert!((c[0][1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_planted_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut pts = Vec::new();
        for _ in 0..50 {
            pts.push(vec![
                0.0 + rng.random_range(-0.1..0.1),
                0.0 + rng.random_range(-0.1..0.1),
            ]);
            pts.push(vec![
                10.0 + rng.random_range(-0.1..0.1),
                10.0 + rng.random_range(-0.1..0.1),
            ]);
        }
        let mut c = kmeans(&pts, 2, 7);
        c.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert!(dist2(&c[0], &[0.0, 0.0]) < 0.04);
        assert!(dist2(&c[1], &[10.0, 10.0]) < 0.04);
    }

    #[test]
    fn deterministic_for_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        assert_eq!(kmeans(&pts, 3, 42), kmeans(&pts, 3, 42));
    }

    #[test]
    fn k_exceeding_distinct_points_pads() {
        let pts = vec![vec![1.0], vec![1.0], vec![2.0]];
        let c = kmeans(&pts, 4, 0);
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|p| p == &vec![1.0] || p == &vec![2.0]));
        assert!(c.iter().any(|p| p == &vec![1.0]));
        assert!(c.iter().any(|p| p == &vec![2.0]));
    }
}
