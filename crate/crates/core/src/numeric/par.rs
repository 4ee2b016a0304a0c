//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature, [`Execution::Parallel`] distributes work over
//! the rayon pool; without it, or with [`Execution::Sequential`], the same
//! closure runs in a plain loop. Output order always matches input order, so
//! results are bitwise identical between the two modes.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

pub fn map<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.01).collect();
        let a = map(Execution::Parallel, &xs, |x| x.sin());
        let b = map(Execution::Sequential, &xs, |x| x.sin());
        assert_eq!(a, b);
        assert_eq!(a[10], 0.1f64.sin());
    }
}
