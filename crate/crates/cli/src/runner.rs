//! Runs jobs on a small thread pool and merges records in job order.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::report::Record;
use crate::suites::Job;

pub fn run_jobs(jobs: Vec<Job>, threads: usize) -> Vec<Record> {
    let n = jobs.len();
    let slots: Vec<Mutex<Option<Job>>> = jobs.into_iter().map(|j| Mutex::new(Some(j))).collect();
    let results: Vec<Mutex<Vec<Record>>> = (0..n).map(|_| Mutex::new(Vec::new())).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= n {
            break;
        }
        let Some(job) = slots[i].lock().expect("job slot").take() else { continue };
        let name = job.name.clone();
        let t0 = Instant::now();
        let mut recs = catch_unwind(AssertUnwindSafe(job.run))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                vec![Record::failed(name, "", format!("panicked: {msg}"))]
            });
        let ms = t0.elapsed().as_millis() as u64;
        for r in &mut recs {
            r.runtime_ms = ms;
        }
        *results[i].lock().expect("result slot") = recs;
    };
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(worker);
            }
        });
    }
    results.into_iter().flat_map(|m| m.into_inner().expect("result slot")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Status;

    fn jobs() -> Vec<Job> {
        (0..6)
            .map(|i| Job {
                name: format!("j{i}"),
                run: Box::new(move || {
                    if i == 3 {
                        panic!("boom");
                    }
                    vec![Record::exact(format!("r{i}"), "", true)]
                }),
            })
            .collect()
    }

    #[test]
    fn order_is_preserved_across_threads() {
        let a: Vec<String> = run_jobs(jobs(), 1).into_iter().map(|r| r.name).collect();
        let b: Vec<String> = run_jobs(jobs(), 4).into_iter().map(|r| r.name).collect();
        assert_eq!(a, b);
        assert_eq!(a, ["r0", "r1", "r2", "j3", "r4", "r5"]);
    }

    #[test]
    fn panics_become_failures() {
        let r = run_jobs(jobs(), 2);
        assert_eq!(r[3].status, Status::Fail);
        assert!(r[3].detail.contains("boom"));
    }
}
