//! In-process resource metering: wall-clock time always, CPU user time and
//! peak resident memory when the OS exposes them.

use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub wall_seconds: f64,
    /// `None` when the platform does not report it.
    pub cpu_user_seconds: Option<f64>,
    /// Peak resident set size during the step; `None` when the peak cannot
    /// be reset and read back (non-Linux, restricted /proc).
    pub peak_memory_bytes: Option<u64>,
}

/// Runs `step` and measures it.
pub fn meter<R>(step: impl FnOnce() -> R) -> (R, Measurement) {
    let peak_reset = reset_peak_rss();
    let cpu_before = cpu_user_seconds();
    let start = Instant::now();
    let out = step();
    let wall_seconds = start.elapsed().as_secs_f64();
    let cpu_user_seconds = match (cpu_before, cpu_user_seconds()) {
        (Some(a), Some(b)) => Some((b - a).max(0.0)),
        _ => None,
    };
    let peak_memory_bytes = if peak_reset { peak_rss_bytes() } else { None };
    (
        out,
        Measurement {
            wall_seconds,
            cpu_user_seconds,
            peak_memory_bytes,
        },
    )
}

#[cfg(unix)]
fn cpu_user_seconds() -> Option<f64> {
    let mut usage = std::mem::MaybeUninit::<libc::rusage>::zeroed();
    // SAFETY: getrusage only writes into the provided struct.
    let rc = unsafe { libc::getrusage(libc::RUSAGE_SELF, usage.as_mut_ptr()) };
    if rc != 0 {
        return None;
    }
    // SAFETY: rc == 0 means the struct was filled in.
    let usage = unsafe { usage.assume_init() };
    Some(usage.ru_utime.tv_sec as f64 + usage.ru_utime.tv_usec as f64 * 1e-6)
}

#[cfg(not(unix))]
fn cpu_user_seconds() -> Option<f64> {
    None
}

/// Resets the kernel's high-water mark of resident memory (Linux >= 4.0).
fn reset_peak_rss() -> bool {
    cfg!(target_os = "linux") && std::fs::write("/proc/self/clear_refs", "5").is_ok()
}

fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kib: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kib * 1024)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    #[test]
    fn empty_step_is_fast() {
        let ((), m) = meter(|| ());
        assert!(m.wall_seconds >= 0.0 && m.wall_seconds < 0.1, "{m:?}");
        if let Some(cpu) = m.cpu_user_seconds {
            assert!(cpu >= 0.0);
        }
    }

    #[test]
    fn sleeping_step_is_timed() {
        let ((), m) = meter(|| std::thread::sleep(Duration::from_millis(100)));
        assert!((0.1..=0.5).contains(&m.wall_seconds), "{m:?}");
    }

    #[test]
    fn value_is_passed_through() {
        let (v, _) = meter(|| 41 + 1);
        assert_eq!(v, 42);
    }

    #[cfg(target_os = "linux")]
    #[test]
    fn linux_reports_cpu_time() {
        let (_, m) = meter(|| (0..2_000_000u64).map(|x| x.wrapping_mul(x)).sum::<u64>());
        assert!(m.cpu_user_seconds.is_some());
    }
}
