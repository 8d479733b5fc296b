//! Rayon-backed executor.

use dressed_stirap_core::exec::Executor;
use rayon::prelude::*;

pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    /// `None` uses one worker per available core.
    pub fn new(threads: Option<usize>) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build()?;
        Ok(Pool { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Pool {
    fn map_indexed<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dressed_stirap_core::exec::Sequential;

    #[test]
    fn matches_sequential_order() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = Pool::new(Some(4)).unwrap().map_indexed(1000, f);
        let b = Sequential.map_indexed(1000, f);
        assert_eq!(a, b);
        assert_eq!(Pool::new(Some(3)).unwrap().threads(), 3);
    }
}
