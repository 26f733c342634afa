/// Selects how data-parallel loops are run.
///
/// `Parallel` dispatches to rayon when the `parallel` feature is compiled in;
/// without the feature it silently runs sequentially. Both paths produce
/// identical, order-preserving results.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Whether this build can actually run loops in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Send + Sync,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    pub fn map_slice<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Send + Sync,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Fills `out` row by row; `f` receives the row index and the row slice.
    pub fn fill_rows<T, F>(self, out: &mut [T], row_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Send + Sync,
    {
        if row_len == 0 {
            return;
        }
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                out.par_chunks_mut(row_len)
                    .enumerate()
                    .for_each(|(y, row)| f(y, row));
            }
            _ => out
                .chunks_mut(row_len)
                .enumerate()
                .for_each(|(y, row)| f(y, row)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let seq = Execution::Sequential.map_range(100, |i| (i as f64).sqrt());
        let par = Execution::Parallel.map_range(100, |i| (i as f64).sqrt());
        assert_eq!(seq, par);

        let mut a = vec![0usize; 12];
        let mut b = vec![0usize; 12];
        Execution::Sequential.fill_rows(&mut a, 4, |y, row| row.iter_mut().enumerate().for_each(|(x, v)| *v = y * 10 + x));
        Execution::Parallel.fill_rows(&mut b, 4, |y, row| row.iter_mut().enumerate().for_each(|(x, v)| *v = y * 10 + x));
        assert_eq!(a, b);
        assert_eq!(a[5], 11);
    }
}
