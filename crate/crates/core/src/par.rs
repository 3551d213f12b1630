//! Data-parallel helpers with a sequential fallback.
//!
//! Without the `parallel` feature every [`Execution`] runs sequentially.
//! Results are always returned in index order, so output never depends on
//! the execution mode.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work will actually be spread over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    pub fn try_map<T, F>(self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Calls `f(chunk_index, chunk)` on consecutive `chunk`-sized pieces of `data`.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let chunk = chunk.max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
            return;
        }
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Worker count for the current mode.
pub fn threads(exec: Execution) -> usize {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return rayon::current_num_threads();
    }
    let _ = exec;
    1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn modes_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = Execution::Sequential.map(1000, f);
        let b = Execution::Parallel.map(1000, f);
        assert_eq!(a, b);

        let mut x = vec![0usize; 103];
        let mut y = x.clone();
        Execution::Sequential.for_each_chunk_mut(&mut x, 10, |c, s| s.iter_mut().for_each(|v| *v = c));
        Execution::Parallel.for_each_chunk_mut(&mut y, 10, |c, s| s.iter_mut().for_each(|v| *v = c));
        assert_eq!(x, y);
        assert_eq!(x[102], 10);
    }

    #[test]
    fn try_map_reports_errors() {
        let r = Execution::Parallel.try_map(50, |i| if i == 31 { Err(Error::Singular) } else { Ok(i) });
        assert!(r.is_err());
        assert_eq!(Execution::Sequential.try_map(3, Ok).unwrap(), vec![0, 1, 2]);
    }
}
