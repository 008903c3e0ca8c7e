/// Compensated (Neumaier) summation. The result depends on the order of the
/// added values, so callers feed trials in index order.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for v in iter {
            s.add(v);
        }
        s
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().copied().collect::<NeumaierSum>().value() / values.len() as f64
}

/// Sample standard deviation (denominator `n - 1`), zero for one value.
pub(crate) fn std_dev(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .collect::<NeumaierSum>()
        .value();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Linear-interpolation quantile of sorted data (Hyndman-Fan type 7).
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
