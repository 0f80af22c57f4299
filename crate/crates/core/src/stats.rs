//! Small statistics helpers used by the analyses and acceptance checks.

use statrs::distribution::{Binomial, DiscreteCDF};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Ranks starting at 1, ties get the average of their positions.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// Two-class threshold maximising the between-class variance over the sorted
/// values; values `>= threshold` form the upper class.
pub fn otsu_threshold(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let total: f64 = v.iter().sum();
    let mut best = (f64::NEG_INFINITY, v[v.len() - 1]);
    let mut below = 0.0;
    for i in 1..v.len() {
        below += v[i - 1];
        if v[i] == v[i - 1] {
            continue;
        }
        let n0 = i as f64;
        let n1 = n - n0;
        let m0 = below / n0;
        let m1 = (total - below) / n1;
        let between = n0 * n1 * (m0 - m1).powi(2);
        if between > best.0 {
            best = (between, 0.5 * (v[i - 1] + v[i]));
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl Detection {
    pub fn from_flags(predicted: &[bool], actual: &[bool]) -> Self {
        assert_eq!(predicted.len(), actual.len());
        let mut d = Detection {
            true_pos: 0,
            false_pos: 0,
            false_neg: 0,
        };
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (true, true) => d.true_pos += 1,
                (true, false) => d.false_pos += 1,
                (false, true) => d.false_neg += 1,
                (false, false) => {}
            }
        }
        d
    }

    /// 1 when nothing was predicted.
    pub fn precision(&self) -> f64 {
        let p = self.true_pos + self.false_pos;
        if p == 0 {
            1.0
        } else {
            self.true_pos as f64 / p as f64
        }
    }

    /// 1 when there was nothing to find.
    pub fn recall(&self) -> f64 {
        let a = self.true_pos + self.false_neg;
        if a == 0 {
            1.0
        } else {
            self.true_pos as f64 / a as f64
        }
    }
}

/// One-sided sign test of `median > 0`; zeros are dropped. Returns the
/// p-value `P(X ≥ positives)` for `X ~ Bin(n, 1/2)`.
pub fn sign_test_positive(xs: &[f64]) -> f64 {
    let pos = xs.iter().filter(|&&x| x > 0.0).count() as u64;
    let n = xs.iter().filter(|&&x| x != 0.0).count() as u64;
    if n == 0 {
        return 1.0;
    }
    let bin = Binomial::new(0.5, n).expect("valid binomial");
    if pos == 0 {
        1.0
    } else {
        bin.sf(pos - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn spearman_monotone_is_one() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.exp()).collect();
        assert!((spearman(&x, &y) - 1.0).abs() < 1e-12);
        let z: Vec<f64> = y.iter().map(|v| -v).collect();
        assert!((spearman(&x, &z) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_of_linear() {
        let x = [0.0, 1.0, 2.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((pearson(&x, &y) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn otsu_separates_two_clusters() {
        let mut xs = vec![0.0, 0.1, 0.05, 0.02, 0.12, 0.08];
        xs.extend([5.0, 5.2, 4.9]);
        let t = otsu_threshold(&xs);
        assert!(t > 0.12 && t < 4.9, "{t}");
    }

    #[test]
    fn detection_counts() {
        let d = Detection::from_flags(&[true, true, false, false], &[true, false, true, false]);
        assert_eq!((d.precision(), d.recall()), (0.5, 0.5));
    }

    #[test]
    fn sign_test_values() {
        // 10 of 10 positive: 2^-10
        let p = sign_test_positive(&[1.0; 10]);
        assert!((p - 1.0 / 1024.0).abs() < 1e-12);
        let p = sign_test_positive(&[1.0, -1.0]);
        assert!((p - 0.75).abs() < 1e-12);
        assert_eq!(sign_test_positive(&[0.0, 0.0]), 1.0);
    }
}
