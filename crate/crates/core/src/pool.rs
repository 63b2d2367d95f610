use crate::error::{Error, Result};

/// Runs `op` on a dedicated pool with `workers` threads, or on the global
/// rayon pool when `workers` is `None`.
pub fn run_with_workers<T: Send>(
    workers: Option<usize>,
    op: impl FnOnce() -> T + Send,
) -> Result<T> {
    match workers {
        None => Ok(op()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Pool(e.to_string()))?;
            Ok(pool.install(op))
        }
    }
}
