//! Population moments over finite sequences (1/K normalization throughout).

pub fn mean(a: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().sum::<f64>() / a.len() as f64
}

pub fn mean_sq(a: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64
}

/// Population covariance. Both slices must have the same length.
pub fn cov(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cov: length mismatch");
    if a.is_empty() {
        return 0.0;
    }
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64
}

pub fn var(a: &[f64]) -> f64 {
    cov(a, a)
}

pub fn std(a: &[f64]) -> f64 {
    var(a).sqrt()
}

/// Median of a slice (NaN-free input assumed).
pub fn median(a: &[f64]) -> f64 {
    if a.is_empty() {
        return f64::NAN;
    }
    let mut v = a.to_vec();
    v.sort_by(|x, y| x.total_cmp(y));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean after dropping the `frac` largest and smallest fraction of values.
pub fn trimmed_mean(a: &[f64], frac: f64) -> f64 {
    if a.is_empty() {
        return f64::NAN;
    }
    let mut v = a.to_vec();
    v.sort_by(|x, y| x.total_cmp(y));
    let cut = ((v.len() as f64) * frac).floor() as usize;
    let kept = &v[cut..v.len() - cut];
    if kept.is_empty() {
        median(a)
    } else {
        mean(kept)
    }
}
