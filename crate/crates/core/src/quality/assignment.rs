/// Maximum-total assignment between the rows (estimated objects) and
/// columns (ground-truth objects) of a non-negative quality matrix.
///
/// Kuhn-Munkres with potentials on the zero-padded square matrix.
/// Zero-quality pairs are reported as unassigned. Negative or non-finite
/// entries are treated as zero. Pairs come back sorted by row.
pub fn optimal_assignment(quality: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = quality.len();
    let cols = quality.iter().map(Vec::len).max().unwrap_or(0);
    let n = rows.max(cols);
    if n == 0 {
        return Vec::new();
    }
    let q = |i: usize, j: usize| -> f64 {
        match quality.get(i).and_then(|r| r.get(j)) {
            Some(&v) if v.is_finite() && v > 0.0 => v,
            _ => 0.0,
        }
    };

    // 1-based arrays; index 0 is the virtual start column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = -q(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .filter(|&j| owner[j] != 0)
        .map(|j| (owner[j] - 1, j - 1))
        .filter(|&(i, j)| i < rows && j < cols && q(i, j) > 0.0)
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Sum of the assigned qualities, accumulated in row order.
pub fn assignment_total(quality: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    let mut sorted = pairs.to_vec();
    sorted.sort_unstable();
    sorted.iter().fold(0.0, |acc, &(i, j)| acc + quality[i][j])
}
