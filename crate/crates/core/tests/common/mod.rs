#![allow(dead_code)]

/// Running mean and standard error of a scalar statistic.
#[derive(Debug, Default, Clone)]
pub struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn std_err(&self) -> f64 {
        let n = self.n as f64;
        let var = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        (var / n).sqrt()
    }

    /// `|mean - target|` in standard errors.
    pub fn z(&self, target: f64) -> f64 {
        (self.mean() - target).abs() / self.std_err()
    }
}
