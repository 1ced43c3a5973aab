//! Zipfian rank sampling.

use rand::Rng;

/// Samples ranks in `[0, n)` with `P(rank = i) ∝ 1 / (i + 1)^theta`.
///
/// Uses the Gray et al. closed-form approximation for `theta < 1` and an
/// exact inverse CDF otherwise (the closed form divides by `1 - theta`).
#[derive(Debug, Clone)]
pub struct ZipfSampler {
    n: u64,
    theta: f64,
    method: Method,
}

#[derive(Debug, Clone)]
enum Method {
    Closed { zetan: f64, alpha: f64, eta: f64, half_pow: f64 },
    Table(Vec<f64>),
}

/// Generalized harmonic number `sum_{i=1..n} 1/i^theta`.
pub fn zeta(n: u64, theta: f64) -> f64 {
    (1..=n).map(|i| (i as f64).powf(-theta)).sum()
}

impl ZipfSampler {
    pub fn new(n: u64, theta: f64) -> Self {
        assert!(n > 0, "empty key space");
        assert!((0.0..=1.0).contains(&theta), "theta must be in [0, 1]");
        let method = if theta < 1.0 {
            let zetan = zeta(n, theta);
            let zeta2 = zeta(2.min(n), theta);
            let eta = if n <= 2 {
                1.0
            } else {
                (1.0 - (2.0 / n as f64).powf(1.0 - theta)) / (1.0 - zeta2 / zetan)
            };
            Method::Closed { zetan, alpha: 1.0 / (1.0 - theta), eta, half_pow: 0.5f64.powf(theta) }
        } else {
            let mut acc = 0.0;
            let mut cdf: Vec<f64> = (1..=n)
                .map(|i| {
                    acc += (i as f64).powf(-theta);
                    acc
                })
                .collect();
            let total = acc;
            cdf.iter_mut().for_each(|c| *c /= total);
            Method::Table(cdf)
        };
        ZipfSampler { n, theta, method }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Exact probability mass of `rank`.
    pub fn mass(&self, rank: u64) -> f64 {
        ((rank + 1) as f64).powf(-self.theta) / zeta(self.n, self.theta)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen();
        match &self.method {
            Method::Closed { zetan, alpha, eta, half_pow } => {
                let uz = u * zetan;
                if uz < 1.0 {
                    0
                } else if uz < 1.0 + half_pow {
                    1.min(self.n - 1)
                } else {
                    let r = (self.n as f64 * (eta * u - eta + 1.0).powf(*alpha)) as u64;
                    r.min(self.n - 1)
                }
            }
            Method::Table(cdf) => (cdf.partition_point(|c| *c <= u) as u64).min(self.n - 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn counts(s: &ZipfSampler, draws: usize, seed: u64) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = vec![0u64; s.n() as usize];
        for _ in 0..draws {
            c[s.sample(&mut rng) as usize] += 1;
        }
        c
    }

    #[test]
    fn ranks_stay_in_range() {
        for theta in [0.0, 0.5, 0.99, 1.0] {
            for n in [1, 2, 3, 50] {
                let s = ZipfSampler::new(n, theta);
                let mut rng = ChaCha8Rng::seed_from_u64(1);
                assert!((0..2000).all(|_| s.sample(&mut rng) < n));
            }
        }
    }

    #[test]
    fn top_key_mass_at_099() {
        let s = ZipfSampler::new(10_000, 0.99);
        let draws = 1_000_000;
        let c = counts(&s, draws, 7);
        // closed-form oracle: 1 / H(n, theta)
        let h: f64 = (1..=10_000u32).map(|i| 1.0 / (i as f64).powf(0.99)).sum();
        let expected = 1.0 / h;
        let got = c[0] as f64 / draws as f64;
        assert!((got - expected).abs() / expected < 0.05, "got {got}, expected {expected}");
    }

    #[test]
    fn theta_one_uses_exact_table() {
        let s = ZipfSampler::new(100, 1.0);
        let draws = 200_000;
        let c = counts(&s, draws, 3);
        for rank in [0u64, 1, 9] {
            let expected = s.mass(rank);
            let got = c[rank as usize] as f64 / draws as f64;
            assert!((got - expected).abs() / expected < 0.05, "rank {rank}: {got} vs {expected}");
        }
    }

    #[test]
    fn theta_zero_is_uniform_within_3_sigma() {
        let n = 100;
        let draws = 200_000usize;
        let c = counts(&ZipfSampler::new(n, 0.0), draws, 11);
        let p = 1.0 / n as f64;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        // 3 sigma per key, allowing the expected handful of excursions over 100 keys
        let outliers = c.iter().filter(|&&k| (k as f64 - mean).abs() > 3.0 * sigma).count();
        assert!(outliers <= 2, "{outliers} keys outside 3 sigma");
    }
}
