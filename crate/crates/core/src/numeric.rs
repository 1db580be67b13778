use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// Wraps an angle to (-π, π].
pub fn wrap_phase(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let r = x.rem_euclid(TWO_PI);
    if r > PI {
        r - TWO_PI
    } else {
        r
    }
}

/// Uniform grid on (-π, π]: `θ_i = -π + 2π(i+1)/m`.
pub fn periodic_grid(m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| -PI + TWO_PI * (i + 1) as f64 / m as f64)
        .collect()
}

/// Composite trapezoid over one full period of samples on a uniform grid.
pub fn trapezoid_periodic(values: &[f64]) -> f64 {
    let mut s = NeumaierSum::default();
    for &v in values {
        s.add(v);
    }
    s.total() * TWO_PI / values.len() as f64
}

/// Kahan–Babuška (Neumaier) compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}
