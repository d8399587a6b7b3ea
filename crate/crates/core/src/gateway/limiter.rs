use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

/// Bounds concurrent requests to one backend and, optionally, their start
/// rate via a token bucket.
pub struct RateLimiter {
    max_in_flight: usize,
    in_flight: Mutex<usize>,
    released: Condvar,
    bucket: Option<Mutex<Bucket>>,
}

struct Bucket {
    capacity: f64,
    tokens: f64,
    per_second: f64,
    last: Instant,
}

impl Bucket {
    /// Takes a token, or returns how long until one is available.
    fn take(&mut self, now: Instant) -> Option<Duration> {
        let elapsed = now.duration_since(self.last).as_secs_f64();
        self.tokens = (self.tokens + elapsed * self.per_second).min(self.capacity);
        self.last = now;
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            None
        } else {
            Some(Duration::from_secs_f64((1.0 - self.tokens) / self.per_second))
        }
    }
}

pub struct Permit<'a> {
    limiter: &'a RateLimiter,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.limiter.in_flight.lock().unwrap();
        *n -= 1;
        self.limiter.released.notify_one();
    }
}

impl RateLimiter {
    pub fn new(max_in_flight: usize, requests_per_minute: Option<u32>) -> Self {
        let max_in_flight = max_in_flight.max(1);
        let bucket = requests_per_minute.filter(|r| *r > 0).map(|rpm| {
            Mutex::new(Bucket {
                capacity: max_in_flight as f64,
                tokens: max_in_flight as f64,
                per_second: rpm as f64 / 60.0,
                last: Instant::now(),
            })
        });
        RateLimiter {
            max_in_flight,
            in_flight: Mutex::new(0),
            released: Condvar::new(),
            bucket,
        }
    }

    pub fn unlimited() -> Self {
        RateLimiter::new(usize::MAX, None)
    }

    pub fn in_flight(&self) -> usize {
        *self.in_flight.lock().unwrap()
    }

    /// Blocks until both a concurrency slot and a rate token are available.
    pub fn acquire(&self) -> Permit<'_> {
        if let Some(bucket) = &self.bucket {
            loop {
                let wait = bucket.lock().unwrap().take(Instant::now());
                match wait {
                    None => break,
                    Some(d) => std::thread::sleep(d),
                }
            }
        }
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.max_in_flight {
            n = self.released.wait(n).unwrap();
        }
        *n += 1;
        Permit { limiter: self }
    }
}
