//! Built-in environments and the name registry used by the trainer and CLI.

pub mod cartpole;
pub mod multiroom;
pub mod pointreach;
pub mod tabular;
pub mod taxi;

pub use cartpole::CartPole;
pub use multiroom::MultiRoom;
pub use pointreach::PointReach;
pub use tabular::{tabular_env_from, TabularEnv};
pub use taxi::Taxi;

use crate::error::{Error, Result};
use crate::mdp::Environment;
use crate::oracle::TabularMdp;

/// Names accepted by [`make_env`]; `chain:<n>` takes any `n >= 2`.
pub const ENV_NAMES: [&str; 5] = ["taxi", "cartpole", "multiroom", "pointreach", "chain:<n>"];

/// The MDP behind `chain:<n>`.
pub fn chain_mdp(n: usize) -> Result<TabularMdp> {
    TabularMdp::chain(n, 2)
}

/// Instantiates a registered environment. The environment is reset with
/// `seed` before being returned; callers continue with `reset(None)`.
pub fn make_env(name: &str, seed: u64) -> Result<Box<dyn Environment>> {
    let mut env: Box<dyn Environment> = match name {
        "taxi" => Box::new(Taxi::new()),
        "cartpole" => Box::new(CartPole::new(seed)),
        "multiroom" => Box::new(MultiRoom::new(seed)),
        "pointreach" => Box::new(PointReach::new(seed)),
        other => match other.strip_prefix("chain:") {
            Some(n) => {
                let n: usize =
                    n.parse().map_err(|_| Error::Config(format!("bad chain length in env name {other:?}")))?;
                Box::new(tabular_env_from(chain_mdp(n)?, seed).with_name(other))
            }
            None => {
                return Err(Error::Config(format!(
                    "unknown environment {other:?}; expected one of {}",
                    ENV_NAMES.join(", ")
                )))
            }
        },
    };
    env.reset(Some(seed));
    Ok(env)
}
