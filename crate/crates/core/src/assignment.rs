//! Maximum-weight perfect assignment on a square weight table.

use nalgebra::DMatrix;

/// Largest size solved by exhaustive enumeration; larger tables use the
/// Hungarian method.
pub const EXHAUSTIVE_MAX: usize = 8;

/// Returns `(map, weight)` with `map[i]` the column assigned to row `i`,
/// maximizing `Σ_i w[i][map[i]]`.
pub fn max_weight_assignment(w: &DMatrix<f64>) -> (Vec<usize>, f64) {
    assert_eq!(w.nrows(), w.ncols(), "assignment needs a square table");
    if w.nrows() <= EXHAUSTIVE_MAX {
        exhaustive(w)
    } else {
        hungarian(w)
    }
}

/// Enumerates all permutations (Heap's algorithm); ties keep the first one visited.
pub fn exhaustive(w: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let n = w.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let score = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| w[(i, j)]).sum::<f64>();
    let mut best = perm.clone();
    let mut best_score = score(&perm);
    let mut counters = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            let s = score(&perm);
            if s > best_score {
                best_score = s;
                best.clone_from(&perm);
            }
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    (best, best_score)
}

/// O(n³) Hungarian method with potentials, run on the negated weights.
pub fn hungarian(w: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let n = w.nrows();
    let cost = |i: usize, j: usize| -w[(i - 1, j - 1)];
    // 1-based arrays; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut map = vec![0usize; n];
    for j in 1..=n {
        map[row_of[j] - 1] = j - 1;
    }
    let total = map.iter().enumerate().map(|(i, &j)| w[(i, j)]).sum();
    (map, total)
}
