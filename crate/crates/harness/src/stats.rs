/// `10 log10(reference / value)`.
pub fn gap_db(reference: f64, value: f64) -> f64 {
    10.0 * (reference / value).log10()
}

/// Sample mean and standard error of the mean (zero for fewer than two
/// samples). Empty input gives NaN.
pub fn mean_std_err(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
