//! Kendall's tau-b with tie correction.
//!
//! Uses Knight's O(n log n) method: sort by the first ranking (ties broken by
//! the second), then count inversions of the second ranking with a merge
//! sort. With `n0 = n(n-1)/2`, `n1`/`n2` the tied pairs in each ranking and
//! `n3` the pairs tied in both,
//!
//! ```text
//! tau_b = (n0 - n1 - n2 + n3 - 2 * swaps) / sqrt((n0 - n1) * (n0 - n2))
//! ```

use std::collections::BTreeMap;

use super::{MeasureError, Ranking};

fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sort `xs` and return the number of strict inversions.
fn merge_count(xs: &mut [usize], buf: &mut [usize]) -> u64 {
    let n = xs.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut xs[..mid], &mut buf[..mid]);
    swaps += merge_count(&mut xs[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if xs[j] < xs[i] {
            buf[k] = xs[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = xs[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&xs[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&xs[j..n]);
    xs.copy_from_slice(&buf[..n]);
    swaps
}

/// Tau-b between two rank vectors (equal values are ties).
pub fn tau_b(x: &[usize], y: &[usize]) -> Result<f64, MeasureError> {
    if x.len() != y.len() {
        return Err(MeasureError::ItemSetsDiffer);
    }
    let n = x.len() as u64;
    if n < 2 {
        return Err(MeasureError::TooFewItems);
    }
    let mut pairs: Vec<(usize, usize)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_unstable();
    let n0 = n * (n - 1) / 2;
    let xs: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let n1 = tied_pairs(&xs);
    let n3 = tied_pairs(&pairs);
    let mut ys: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0; ys.len()];
    let swaps = merge_count(&mut ys, &mut buf);
    let n2 = tied_pairs(&ys);
    let denom = ((n0 - n1) as f64) * ((n0 - n2) as f64);
    if denom == 0.0 {
        return Err(MeasureError::UndefinedTau);
    }
    let num = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    Ok(num as f64 / denom.sqrt())
}

fn ranks(r: &Ranking) -> Result<BTreeMap<&str, usize>, MeasureError> {
    let mut out = BTreeMap::new();
    for (rank, group) in r.iter().enumerate() {
        for item in group {
            if out.insert(item.as_str(), rank).is_some() {
                return Err(MeasureError::ItemSetsDiffer);
            }
        }
    }
    Ok(out)
}

/// Tau-b between two rankings of the same items given as tie groups.
pub fn kendall_tau(a: &Ranking, b: &Ranking) -> Result<f64, MeasureError> {
    let ra = ranks(a)?;
    let rb = ranks(b)?;
    if ra.len() != rb.len() || ra.keys().any(|k| !rb.contains_key(k)) {
        return Err(MeasureError::ItemSetsDiffer);
    }
    let x: Vec<usize> = ra.values().copied().collect();
    let y: Vec<usize> = ra.keys().map(|k| rb[k]).collect();
    tau_b(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(items: &[&[&str]]) -> Ranking {
        items
            .iter()
            .map(|g| g.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    #[test]
    fn identical_reversed_and_one_swap() {
        let abc = r(&[&["A"], &["B"], &["C"]]);
        assert_eq!(kendall_tau(&abc, &abc).unwrap(), 1.0);
        assert_eq!(kendall_tau(&abc, &r(&[&["C"], &["B"], &["A"]])).unwrap(), -1.0);
        let acb = r(&[&["A"], &["C"], &["B"]]);
        assert!((kendall_tau(&abc, &acb).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ties_use_b_correction() {
        // x = (1,2,3,4), y = (1,1,2,3): C=5, D=0, ties in y = 1
        let tau = tau_b(&[0, 1, 2, 3], &[0, 0, 1, 2]).unwrap();
        assert!((tau - 5.0 / (6.0f64 * 5.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let a = r(&[&["A"], &["B"]]);
        assert_eq!(
            kendall_tau(&a, &r(&[&["A"], &["C"]])),
            Err(MeasureError::ItemSetsDiffer)
        );
        assert_eq!(kendall_tau(&r(&[&["A"]]), &r(&[&["A"]])), Err(MeasureError::TooFewItems));
        assert_eq!(
            kendall_tau(&a, &r(&[&["A", "B"]])),
            Err(MeasureError::UndefinedTau)
        );
        assert_eq!(
            kendall_tau(&r(&[&["A"], &["A"]]), &a),
            Err(MeasureError::ItemSetsDiffer)
        );
    }
}
