//! Classification accuracy and partition agreement scores.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Fraction of positions where `pred` and `truth` agree.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

/// Maps arbitrary labels to `0..k` in order of first appearance.
pub fn relabel<T: PartialEq + Copy>(labels: &[T]) -> (Vec<usize>, Vec<T>) {
    let mut classes: Vec<T> = Vec::new();
    let ids = labels
        .iter()
        .map(|l| match classes.iter().position(|c| c == l) {
            Some(i) => i,
            None => {
                classes.push(*l);
                classes.len() - 1
            }
        })
        .collect();
    (ids, classes)
}

/// Contingency table of two labelings of the same items.
pub struct Contingency {
    pub table: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

impl Contingency {
    pub fn new(a: &[usize], b: &[usize]) -> Self {
        assert_eq!(a.len(), b.len(), "labelings differ in length");
        let (a, _) = relabel(a);
        let (b, _) = relabel(b);
        let ka = a.iter().max().map_or(0, |m| m + 1);
        let kb = b.iter().max().map_or(0, |m| m + 1);
        let mut table = vec![vec![0u64; kb]; ka];
        for (&i, &j) in a.iter().zip(&b) {
            table[i][j] += 1;
        }
        let row_sums = table.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
        Self {
            table,
            row_sums,
            col_sums,
            total: a.len() as u64,
        }
    }
}

fn entropy(counts: &[u64], total: u64) -> f64 {
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * math::ln(p)
        })
        .sum()
}

/// Normalized mutual information `I(A;B) / sqrt(H(A)·H(B))`.
///
/// Two single-cluster labelings agree perfectly (1); a single-cluster
/// labeling against a non-trivial one carries no information (0).
pub fn nmi(a: &[usize], b: &[usize]) -> f64 {
    let c = Contingency::new(a, b);
    if c.total == 0 {
        return 1.0;
    }
    let ha = entropy(&c.row_sums, c.total);
    let hb = entropy(&c.col_sums, c.total);
    match (ha == 0.0, hb == 0.0) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let n = c.total as f64;
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * math::ln(n * nij / (c.row_sums[i] as f64 * c.col_sums[j] as f64));
            }
        }
    }
    (mi / math::sqrt(ha * hb)).clamp(0.0, 1.0)
}

fn pairs(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index with the permutation-model expected index.
pub fn ari(a: &[usize], b: &[usize]) -> f64 {
    let c = Contingency::new(a, b);
    let index: f64 = c.table.iter().flatten().map(|&x| pairs(x)).sum();
    let sum_a: f64 = c.row_sums.iter().map(|&x| pairs(x)).sum();
    let sum_b: f64 = c.col_sums.iter().map(|&x| pairs(x)).sum();
    let total = pairs(c.total);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        // Both partitions trivial in the same way: identical up to relabeling.
        return if index == max { 1.0 } else { 0.0 };
    }
    (index - expected) / (max - expected)
}
