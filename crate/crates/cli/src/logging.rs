//! Warnings go to stderr and are kept for the run manifest.

use std::sync::Mutex;

use log::{Level, LevelFilter, Log, Metadata, Record};

static WARNINGS: Mutex<Vec<String>> = Mutex::new(Vec::new());

struct Collector;

static VERBOSE: std::sync::atomic::AtomicBool = std::sync::atomic::AtomicBool::new(false);
static COLLECTOR: Collector = Collector;

impl Log for Collector {
    fn enabled(&self, metadata: &Metadata) -> bool {
        let level = if VERBOSE.load(std::sync::atomic::Ordering::Relaxed) {
            Level::Info
        } else {
            Level::Warn
        };
        metadata.level() <= level
    }

    fn log(&self, record: &Record) {
        if !self.enabled(record.metadata()) {
            return;
        }
        let message = record.args().to_string();
        let label = match record.level() {
            Level::Error => "error",
            Level::Warn => "warning",
            _ => "info",
        };
        eprintln!("{label}: {message}");
        if record.level() <= Level::Warn {
            WARNINGS.lock().expect("warning log poisoned").push(message);
        }
    }

    fn flush(&self) {}
}

pub fn init(verbose: bool) {
    VERBOSE.store(verbose, std::sync::atomic::Ordering::Relaxed);
    if log::set_logger(&COLLECTOR).is_ok() {
        log::set_max_level(LevelFilter::Info);
    }
}

/// Warnings emitted so far, deduplicated in order of first appearance.
pub fn warnings() -> Vec<String> {
    let all = WARNINGS.lock().expect("warning log poisoned");
    let mut seen = std::collections::HashSet::new();
    all.iter().filter(|w| seen.insert(w.as_str())).cloned().collect()
}
