//! Exponential backoff for transient network failures.

use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    /// Retries after the first attempt; total attempts are `max_retries + 1`.
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub factor: f64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 4,
            base_delay_ms: 500,
            factor: 2.0,
            max_delay_ms: 30_000,
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: u32) -> Self {
        RetryPolicy {
            max_retries,
            base_delay_ms: 0,
            factor: 2.0,
            max_delay_ms: 0,
        }
    }

    /// Delay before retry number `attempt` (0-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self.base_delay_ms as f64 * self.factor.powi(attempt as i32);
        Duration::from_millis(ms.min(self.max_delay_ms as f64) as u64)
    }

    /// Runs `op` until it succeeds, fails with a non-transient error, or the
    /// retry budget is spent. The last error is returned.
    pub fn run<T, E>(&self, is_transient: impl Fn(&E) -> bool, mut op: impl FnMut() -> Result<T, E>) -> Result<T, E> {
        let mut attempt = 0;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if attempt < self.max_retries && is_transient(&e) => {
                    let wait = self.delay(attempt);
                    log::debug!("transient failure, retry {} in {:?}", attempt + 1, wait);
                    if !wait.is_zero() {
                        std::thread::sleep(wait);
                    }
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn delays_grow_and_cap() {
        let p = RetryPolicy {
            max_retries: 5,
            base_delay_ms: 100,
            factor: 2.0,
            max_delay_ms: 500,
        };
        let ms: Vec<u128> = (0..5).map(|a| p.delay(a).as_millis()).collect();
        assert_eq!(ms, vec![100, 200, 400, 500, 500]);
    }

    #[test]
    fn retries_transient_then_succeeds() {
        let calls = Cell::new(0);
        let r: Result<u32, &str> = RetryPolicy::no_delay(3).run(
            |_| true,
            || {
                calls.set(calls.get() + 1);
                if calls.get() < 3 {
                    Err("flaky")
                } else {
                    Ok(7)
                }
            },
        );
        assert_eq!(r, Ok(7));
        assert_eq!(calls.get(), 3);
    }

    #[test]
    fn gives_up_after_budget_and_skips_permanent() {
        let calls = Cell::new(0);
        let r: Result<(), &str> = RetryPolicy::no_delay(2).run(
            |_| true,
            || {
                calls.set(calls.get() + 1);
                Err("down")
            },
        );
        assert_eq!(r, Err("down"));
        assert_eq!(calls.get(), 3);

        calls.set(0);
        let _ = RetryPolicy::no_delay(5).run(
            |e: &&str| *e != "fatal",
            || -> Result<(), &str> {
                calls.set(calls.get() + 1);
                Err("fatal")
            },
        );
        assert_eq!(calls.get(), 1);
    }
}
