use super::SigError;

/// Mean of exactly `n` samples.
pub fn boxcar_average(samples: &[f64], n: usize) -> Result<f64, SigError> {
    if n == 0 {
        return Err(SigError::ZeroDivisor);
    }
    if samples.len() != n {
        return Err(SigError::LengthMismatch {
            expected: n,
            actual: samples.len(),
        });
    }
    Ok(samples.iter().sum::<f64>() / n as f64)
}

/// Streaming block averager: emits the mean of every `n` pushed samples.
#[derive(Debug, Clone)]
pub struct Boxcar {
    n: usize,
    sum: f64,
    count: usize,
}

impl Boxcar {
    pub fn new(n: usize) -> Result<Self, SigError> {
        if n == 0 {
            return Err(SigError::ZeroDivisor);
        }
        Ok(Self {
            n,
            sum: 0.0,
            count: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn push(&mut self, v: f64) -> Option<f64> {
        self.sum += v;
        self.count += 1;
        if self.count == self.n {
            let mean = self.sum / self.n as f64;
            self.sum = 0.0;
            self.count = 0;
            Some(mean)
        } else {
            None
        }
    }

    pub fn reset(&mut self) {
        self.sum = 0.0;
        self.count = 0;
    }
}
