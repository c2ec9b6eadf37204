//! Shared test oracles, kept independent of the library's distance
//! implementations.

/// Minimum-cost W2 over all point pairings, by exhaustive permutation
/// enumeration. Points are rows of equal length; the two sets must have
/// equal cardinality.
pub fn w2_brute_force(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    visit_permutations(&mut perm, 0, &mut |p| {
        let cost: f64 = (0..n)
            .map(|i| {
                a[i].iter()
                    .zip(&b[p[i]])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
            })
            .sum();
        if cost < best {
            best = cost;
        }
    });
    (best / n as f64).sqrt()
}

fn visit_permutations(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        visit_permutations(perm, k + 1, visit);
        perm.swap(k, i);
    }
}

/// Lower-median of a sample (exact middle for odd lengths, lower of the
/// two middles for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}
