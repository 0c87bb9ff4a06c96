//! Worker pool shared by every data-parallel stage.

use std::sync::OnceLock;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "VOXBEAM_THREADS";

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let available = std::thread::available_parallelism().map_or(1, |n| n.get());
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .map_or(available, |cap| cap.min(available));
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("voxbeam-worker-{i}"))
            .build()
            .expect("failed to build worker pool")
    })
}

/// Run `f` inside the capped worker pool.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    pool().install(f)
}

pub fn thread_count() -> usize {
    pool().current_num_threads()
}
