use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Discretized Ornstein-Uhlenbeck process:
/// `x ← x + θ(μ − x)·dt + σ·√dt·z`, `z ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuNoiseState {
    pub x: f64,
    pub mean: f64,
    pub theta: f64,
    pub sigma: f64,
    pub dt: f64,
}

impl Default for OuNoiseState {
    fn default() -> Self {
        OuNoiseState {
            x: 0.0,
            mean: 0.0,
            theta: 0.15,
            sigma: 0.2,
            dt: 1.0,
        }
    }
}

impl OuNoiseState {
    pub fn new(mean: f64, theta: f64, sigma: f64, dt: f64) -> Result<Self> {
        let state = OuNoiseState {
            x: mean,
            mean,
            theta,
            sigma,
            dt,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.sigma >= 0.0 && self.dt > 0.0 && self.mean.is_finite() && self.x.is_finite()) {
            return Err(Error::Config(format!(
                "OU parameters need theta > 0, sigma >= 0, dt > 0 (got theta {}, sigma {}, dt {})",
                self.theta, self.sigma, self.dt
            )));
        }
        Ok(())
    }

    pub fn reset(&mut self) {
        self.x = self.mean;
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let (x, next) = ou_sample(self, rng);
        *self = next;
        x
    }

    /// Variance of the stationary distribution of the discrete recurrence.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma * self.dt / (2.0 * self.theta * self.dt - (self.theta * self.dt).powi(2))
    }
}

pub fn ou_sample<R: Rng + ?Sized>(state: &OuNoiseState, rng: &mut R) -> (f64, OuNoiseState) {
    let z: f64 = rng.sample(StandardNormal);
    let x = state.x + state.theta * (state.mean - state.x) * state.dt + state.sigma * state.dt.sqrt() * z;
    (x, OuNoiseState { x, ..*state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixed_point_without_volatility() {
        let mut s = OuNoiseState::new(0.7, 0.15, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(s.sample(&mut rng), 0.7);
        }
    }

    #[test]
    fn full_reversion_in_one_step() {
        let s = OuNoiseState {
            x: 5.0,
            mean: 0.0,
            theta: 1.0,
            sigma: 0.0,
            dt: 1.0,
        };
        let (x, next) = ou_sample(&s, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(x, 0.0);
        assert_eq!(next.x, 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(OuNoiseState::new(0.0, 0.0, 0.2, 1.0).is_err());
        assert!(OuNoiseState::new(0.0, 0.15, -0.1, 1.0).is_err());
    }

    #[test]
    fn closed_form_variance() {
        let s = OuNoiseState::default();
        assert!((s.stationary_variance() - 0.04 / (0.3 - 0.0225)).abs() < 1e-15);
    }
}
