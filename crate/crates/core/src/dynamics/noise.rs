use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::trajectory::Trajectory;
use crate::error::{Error, Result};

/// Adds i.i.d. zero-mean Gaussian noise of the given variance to every
/// coordinate of every sample. Reproducible from `seed`.
pub fn add_observation_noise(traj: &Trajectory, variance: f64, seed: u64) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    add_observation_noise_with(traj, variance, &mut rng)
}

pub fn add_observation_noise_with<R: Rng + ?Sized>(
    traj: &Trajectory,
    variance: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::Domain(format!("noise variance must be nonnegative, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(traj.clone());
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(traj.map_states(|s| s.iter().map(|v| v + normal.sample(rng)).collect()))
}
