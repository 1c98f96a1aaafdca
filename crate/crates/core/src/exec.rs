//! Data-parallel helpers. With the `parallel` feature the maps run on the
//! rayon pool; without it they fall back to plain iterators. Output order
//! always matches input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for the batch entry points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` silently degrades to sequential when the crate is built
    /// without the `parallel` feature.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            Execution::Parallel => par_map(items, f),
        }
    }

    /// Fill a column-major `rows x cols` buffer from `f(row, col)`.
    pub fn fill_column_major<R, F>(self, rows: usize, cols: usize, f: F) -> Vec<R>
    where
        R: Send + Default + Clone,
        F: Fn(usize, usize) -> R + Sync + Send,
    {
        let mut out = vec![R::default(); rows * cols];
        if rows == 0 {
            return out;
        }
        match self {
            Execution::Sequential => {
                for (c, col) in out.chunks_mut(rows).enumerate() {
                    for (r, v) in col.iter_mut().enumerate() {
                        *v = f(r, c);
                    }
                }
            }
            Execution::Parallel => par_fill(&mut out, rows, &f),
        }
        out
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
fn par_fill<R, F>(out: &mut [R], rows: usize, f: &F)
where
    R: Send,
    F: Fn(usize, usize) -> R + Sync + Send,
{
    out.par_chunks_mut(rows).enumerate().for_each(|(c, col)| {
        for (r, v) in col.iter_mut().enumerate() {
            *v = f(r, c);
        }
    });
}

#[cfg(not(feature = "parallel"))]
fn par_fill<R, F>(out: &mut [R], rows: usize, f: &F)
where
    R: Send,
    F: Fn(usize, usize) -> R + Sync + Send,
{
    for (c, col) in out.chunks_mut(rows).enumerate() {
        for (r, v) in col.iter_mut().enumerate() {
            *v = f(r, c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = Execution::Sequential.map(&xs, |x| x * x);
        let b = Execution::Parallel.map(&xs, |x| x * x);
        assert_eq!(a, b);
        let m1 = Execution::Sequential.fill_column_major(7, 5, |r, c| (r * 10 + c) as f64);
        let m2 = Execution::Parallel.fill_column_major(7, 5, |r, c| (r * 10 + c) as f64);
        assert_eq!(m1, m2);
        assert_eq!(m1[7 * 2 + 3], 32.0);
    }
}
