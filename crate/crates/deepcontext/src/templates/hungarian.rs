//! Minimum-cost bipartite assignment (Hungarian algorithm with potentials,
//! O(n^2 m) shortest augmenting paths).

/// Solves min-cost assignment for an `n x m` cost matrix given as rows.
///
/// Returns `assign[row] = Some(col)` covering `min(n, m)` pairs; when there
/// are more rows than columns the cheapest rows win and the rest stay
/// unassigned.
pub fn assign_min_cost(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    if m == 0 {
        return vec![None; n];
    }
    if n <= m {
        solve_rows_le_cols(cost, n, m)
    } else {
        // transpose, solve, invert the mapping
        let t: Vec<Vec<f64>> = (0..m)
            .map(|j| (0..n).map(|i| cost[i][j]).collect())
            .collect();
        let col_to_row = solve_rows_le_cols(&t, m, n);
        let mut assign = vec![None; n];
        for (col, row) in col_to_row.iter().enumerate() {
            if let Some(r) = row {
                assign[*r] = Some(col);
            }
        }
        assign
    }
}

/// Total cost of an assignment, summed in row order (so independent solvers
/// producing the same assignment produce bit-identical totals).
pub fn assignment_cost(cost: &[Vec<f64>], assign: &[Option<usize>]) -> f64 {
    assign
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| cost[i][j]))
        .sum()
}

fn solve_rows_le_cols(cost: &[Vec<f64>], n: usize, m: usize) -> Vec<Option<usize>> {
    const INF: f64 = f64::INFINITY;
    // 1-based potentials; p[j] = row matched to column j, 0 = free
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // augment along the found path
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assign = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            assign[p[j] - 1] = Some(j - 1);
        }
    }
    assign
}

/// Exhaustive minimum over all assignments; exponential, test oracle only.
#[cfg(test)]
pub fn brute_force_min_cost(cost: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let n = cost.len();
    let m = if n == 0 { 0 } else { cost[0].len() };
    let mut best = (f64::INFINITY, vec![None; n]);
    let mut assign = vec![None; n];
    let mut used = vec![false; m];
    fn rec(
        cost: &[Vec<f64>],
        row: usize,
        remaining: usize,
        assign: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut (f64, Vec<Option<usize>>),
    ) {
        let n = cost.len();
        let m = used.len();
        if row == n {
            if remaining == 0 {
                let mut total = 0.0;
                for (i, j) in assign.iter().enumerate() {
                    if let Some(j) = j {
                        total += cost[i][*j];
                    }
                }
                if total < best.0 {
                    *best = (total, assign.clone());
                }
            }
            return;
        }
        // rows that must stay unassigned when n > m
        if n - row > remaining {
            assign[row] = None;
            rec(cost, row + 1, remaining, assign, used, best);
        }
        if remaining > 0 {
            for j in 0..m {
                if !used[j] {
                    used[j] = true;
                    assign[row] = Some(j);
                    rec(cost, row + 1, remaining - 1, assign, used, best);
                    assign[row] = None;
                    used[j] = false;
                }
            }
        }
    }
    let k = n.min(m);
    rec(cost, 0, k, &mut assign, &mut used, &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_hand_case() {
        // greedy would take (0,0)=1 then (1,1)=4: total 5; optimum is 1+2... check
        let cost = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let assign = assign_min_cost(&cost);
        let total = assignment_cost(&cost, &assign);
        assert_eq!(total, 4.0); // (0,1)+(1,0) = 2+2
    }

    #[test]
    fn greedy_suboptimal_case() {
        // row-greedy picks 1 + 5 + 9 = 15; optimum is 3 + 4 + 5 = 12
        let cost = vec![
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 7.0],
            vec![5.0, 9.0, 9.0],
        ];
        let assign = assign_min_cost(&cost);
        let (best, _) = brute_force_min_cost(&cost);
        assert_eq!(assignment_cost(&cost, &assign), best);
    }

    #[test]
    fn rectangular_both_ways() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.random_range(1..6);
            let m = rng.random_range(1..6);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.random_range(0.0..10.0)).collect())
                .collect();
            let assign = assign_min_cost(&cost);
            // structural: injective, correct count
            let assigned: Vec<usize> = assign.iter().filter_map(|a| *a).collect();
            assert_eq!(assigned.len(), n.min(m));
            let mut seen = std::collections::BTreeSet::new();
            for a in &assigned {
                assert!(seen.insert(*a));
            }
            let (best, _) = brute_force_min_cost(&cost);
            let total = assignment_cost(&cost, &assign);
            assert_eq!(total, best, "cost {cost:?}");
        }
    }
}
