/// How much worse continuing the macro is than the best primitive:
/// `1 - exp(q_m) / exp(q_highest)`, computed as `1 - exp(q_m - q_highest)`.
pub fn divergence(q_m: f64, q_highest: f64) -> f64 {
    1.0 - libm::exp(q_m - q_highest)
}

/// Exponential moving mean and standard deviation of the divergence `d`.
///
/// The first observation seeds the mean; later ones use decay `0.99`.
/// Abandonment stays disabled until `warmup` observations have been seen.
#[derive(Debug, Clone, PartialEq)]
pub struct AbandonShipTracker {
    z: f64,
    decay: f64,
    warmup: u64,
    mean: f64,
    variance: f64,
    count: u64,
}

impl AbandonShipTracker {
    pub const DECAY: f64 = 0.99;
    pub const WARMUP: u64 = 10;

    pub fn new(z: f64) -> Self {
        Self::with_params(z, Self::DECAY, Self::WARMUP)
    }

    pub fn with_params(z: f64, decay: f64, warmup: u64) -> Self {
        AbandonShipTracker {
            z,
            decay,
            warmup,
            mean: 0.0,
            variance: 0.0,
            count: 0,
        }
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        libm::sqrt(self.variance.max(0.0))
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn threshold(&self) -> f64 {
        self.mean + self.std() * self.z
    }

    pub fn observe(&mut self, d: f64) {
        if self.count == 0 {
            self.mean = d;
            self.variance = 0.0;
        } else {
            let diff = d - self.mean;
            let incr = (1.0 - self.decay) * diff;
            self.mean += incr;
            self.variance = self.decay * (self.variance + diff * incr);
        }
        self.count += 1;
    }

    /// Decides against the statistics seen so far, then records `d`.
    pub fn abandon_check(&mut self, q_m: f64, q_highest: f64) -> bool {
        let d = divergence(q_m, q_highest);
        let abandon = self.count >= self.warmup && d > self.threshold();
        self.observe(d);
        abandon
    }
}
