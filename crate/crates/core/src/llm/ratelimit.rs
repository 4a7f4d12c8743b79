use std::collections::VecDeque;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

/// Extra spacing added to the window to absorb delivery jitter between the
/// client clock and the receiving server.
const WINDOW_SLACK: Duration = Duration::from_millis(25);

/// Sliding-window limiter: at most `max_requests` starts in any `window`.
///
/// Shared by reference across worker threads; `acquire` blocks until a slot
/// is free.
#[derive(Debug)]
pub struct RateLimiter {
    max_requests: usize,
    window: Duration,
    starts: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    /// Limiter for `per_second` requests per second. Fractional rates below
    /// one widen the window instead.
    pub fn per_second(per_second: f64) -> Self {
        assert!(per_second.is_finite() && per_second > 0.0);
        let (max_requests, window) = if per_second >= 1.0 {
            (per_second.floor() as usize, Duration::from_secs(1))
        } else {
            (1, Duration::from_secs_f64(1.0 / per_second))
        };
        RateLimiter {
            max_requests,
            window: window + WINDOW_SLACK,
            starts: Mutex::new(VecDeque::with_capacity(max_requests)),
        }
    }

    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut starts = self.starts.lock().expect("rate limiter poisoned");
                let now = Instant::now();
                while starts
                    .front()
                    .is_some_and(|t| now.duration_since(*t) >= self.window)
                {
                    starts.pop_front();
                }
                if starts.len() < self.max_requests {
                    starts.push_back(now);
                    return;
                }
                self.window - now.duration_since(starts[0])
            };
            thread::sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn never_exceeds_rate_in_a_window() {
        let limiter = Arc::new(RateLimiter::per_second(20.0));
        let stamps = Arc::new(Mutex::new(Vec::new()));
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let (l, s) = (limiter.clone(), stamps.clone());
                thread::spawn(move || {
                    for _ in 0..12 {
                        l.acquire();
                        s.lock().unwrap().push(Instant::now());
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let mut stamps = stamps.lock().unwrap().clone();
        stamps.sort();
        for (i, t) in stamps.iter().enumerate() {
            let in_window = stamps[i..]
                .iter()
                .take_while(|u| u.duration_since(*t) < Duration::from_secs(1))
                .count();
            assert!(in_window <= 20, "{in_window} requests within one second");
        }
    }
}
