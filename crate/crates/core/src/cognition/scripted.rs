//! Deterministic scripted cognition: a backend that answers from a policy
//! function of the agent's observable view plus seeded randomness, with no
//! network involved.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{BackendError, BackendRequest, CognitionBackend, SamplingParams};

/// A deterministic decision rule. Policies read only the structured view and
/// the provided rng, so a given (seed, agent, tick) always replies the same.
pub trait ScriptedPolicy: Send {
    fn reply(&self, request: &BackendRequest, rng: &mut ChaCha8Rng) -> String;
}

/// Derives the per-decision rng from the run seed, agent name, and tick.
pub fn rng_for(seed: u64, agent: &str, tick: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(agent.as_bytes());
    hasher.update([0x1f]);
    hasher.update(tick.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 8];
    key.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(key))
}

/// Standard normal draw via the Box-Muller transform.
pub fn normal_draw(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    mean + sd * z
}

/// Backend that runs a [`ScriptedPolicy`] under a per-decision seeded rng.
pub struct Scripted {
    pub seed: u64,
    policy: Box<dyn ScriptedPolicy>,
}

impl Scripted {
    pub fn new(seed: u64, policy: Box<dyn ScriptedPolicy>) -> Self {
        Scripted { seed, policy }
    }
}

impl CognitionBackend for Scripted {
    fn complete(
        &mut self,
        request: &BackendRequest,
        _sampling: &SamplingParams,
    ) -> Result<String, BackendError> {
        let mut rng = rng_for(self.seed, &request.agent, request.view.tick);
        Ok(self.policy.reply(request, &mut rng))
    }
}
