use std::time::Duration;

use super::{ProviderError, ProviderErrorKind};

pub trait Sleeper: Send + Sync {
    fn sleep(&self, duration: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Delays before retry 1..=max_retries: `base * factor^i`.
pub fn backoff_schedule(max_retries: u32, base_seconds: f64, factor: f64) -> Vec<Duration> {
    (0..max_retries)
        .map(|i| Duration::from_secs_f64(base_seconds * factor.powi(i as i32)))
        .collect()
}

/// Runs `op` until it succeeds, fails with a non-retryable error, or
/// `max_retries` retries have been spent.
pub fn with_retries<T>(
    max_retries: u32,
    base_seconds: f64,
    factor: f64,
    sleeper: &dyn Sleeper,
    mut op: impl FnMut() -> Result<T, ProviderErrorKind>,
) -> Result<T, ProviderError> {
    let schedule = backoff_schedule(max_retries, base_seconds, factor);
    let mut attempt = 0u32;
    loop {
        attempt += 1;
        match op() {
            Ok(v) => return Ok(v),
            Err(kind) if kind.is_retryable() && (attempt as usize) <= schedule.len() => {
                log::warn!("attempt {attempt} failed ({kind}); retrying");
                sleeper.sleep(schedule[attempt as usize - 1]);
            }
            Err(kind) => return Err(ProviderError::new(kind, attempt)),
        }
    }
}
