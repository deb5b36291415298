use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

/// `label: done/total` on stderr, redrawn at most once per percent.
pub struct Counter {
    label: String,
    quiet: bool,
    last: AtomicUsize,
}

impl Counter {
    pub fn new(label: impl Into<String>, quiet: bool) -> Self {
        Counter {
            label: label.into(),
            quiet,
            last: AtomicUsize::new(usize::MAX),
        }
    }

    pub fn tick(&self, done: usize, total: usize) {
        if self.quiet || total == 0 {
            return;
        }
        let pct = done * 100 / total;
        if self.last.swap(pct, Ordering::Relaxed) == pct && done != total {
            return;
        }
        let mut err = std::io::stderr().lock();
        let _ = write!(err, "\r{}: {done}/{total} trials", self.label);
        if done == total {
            let _ = writeln!(err);
        }
        let _ = err.flush();
    }
}
