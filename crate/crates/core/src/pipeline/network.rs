//! Seeded discrete-event stand-in for block broadcast.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Per-block, per-replica delivery delay in virtual time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DelayModel {
    Zero,
    /// Uniform on `[0, max]`.
    Uniform { max: u64 },
    /// Pareto-like with shape 1.5, capped at `max`.
    HeavyTail { scale: u64, max: u64 },
}

impl DelayModel {
    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match *self {
            DelayModel::Zero => 0,
            DelayModel::Uniform { max } => rng.gen_range(0..=max),
            DelayModel::HeavyTail { scale, max } => {
                let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                let d = scale as f64 * (u.powf(-1.0 / 1.5) - 1.0);
                (d.min(max as f64)) as u64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedNetwork {
    pub seed: u64,
    pub delay: DelayModel,
    /// Virtual time between consecutive broadcasts by the sequencer.
    pub interval: u64,
}

impl SimulatedNetwork {
    pub fn new(seed: u64, delay: DelayModel) -> Self {
        SimulatedNetwork { seed, delay, interval: 1 }
    }

    pub fn instant() -> Self {
        Self::new(0, DelayModel::Zero)
    }

    /// Arrival time of every block at every replica, `[replica][block]`.
    ///
    /// Channels are FIFO: a block never arrives before its predecessor.
    pub fn arrivals(&self, replicas: usize, blocks: usize) -> Vec<Vec<u64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = vec![Vec::with_capacity(blocks); replicas];
        for b in 0..blocks {
            let sent = b as u64 * self.interval;
            for lane in out.iter_mut() {
                let raw = sent + self.delay.sample(&mut rng);
                let at = lane.last().map_or(raw, |prev: &u64| raw.max(*prev));
                lane.push(at);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_under_random_delays() {
        for delay in [DelayModel::Uniform { max: 50 }, DelayModel::HeavyTail { scale: 5, max: 500 }] {
            let net = SimulatedNetwork::new(9, delay);
            for lane in net.arrivals(4, 200) {
                assert!(lane.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn seeded() {
        let a = SimulatedNetwork::new(3, DelayModel::Uniform { max: 10 });
        assert_eq!(a.arrivals(3, 20), a.arrivals(3, 20));
        let b = SimulatedNetwork::new(4, DelayModel::Uniform { max: 10 });
        assert_ne!(a.arrivals(3, 20), b.arrivals(3, 20));
    }

    #[test]
    fn zero_delay_is_broadcast_time() {
        let net = SimulatedNetwork::instant();
        assert_eq!(net.arrivals(2, 3), vec![vec![0, 1, 2], vec![0, 1, 2]]);
    }
}
