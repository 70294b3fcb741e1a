//! Threaded amplitude scans. Results are gathered by amplitude index, so the report
//! does not depend on which worker finishes first.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Result;
use mbe_core::harness::{assemble_scan, scan_entry, validate_amplitudes, Experiment, ScanEntry, ScanReport};

pub fn parallel_scan(template: &Experiment, amplitudes: &[f64], workers: usize) -> Result<ScanReport> {
    validate_amplitudes(amplitudes)?;
    template.validate()?;
    let workers = workers.clamp(1, amplitudes.len());
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<mbe_core::Result<ScanEntry>>>> = Mutex::new(vec![None; amplitudes.len()]);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(a) = amplitudes.get(i) else { break };
                let r = scan_entry(template, *a);
                slots.lock().expect("scan worker panicked")[i] = Some(r);
            });
        }
    });
    let entries = slots
        .into_inner()
        .expect("scan worker panicked")
        .into_iter()
        .map(|e| e.expect("every slot filled"))
        .collect::<mbe_core::Result<Vec<_>>>()?;
    Ok(assemble_scan(entries))
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
