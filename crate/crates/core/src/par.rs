//! Sweep helpers: rayon when the `parallel` feature is on, plain iterators otherwise.

/// How a verification sweep should be run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sweep {
    Sequential,
    #[default]
    Parallel,
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(mode: Sweep, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Sweep::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

pub fn all<T, F>(mode: Sweep, items: &[T], f: F) -> bool
where
    T: Sync,
    F: Fn(&T) -> bool + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Sweep::Parallel => {
            use rayon::prelude::*;
            items.par_iter().all(f)
        }
        _ => items.iter().all(f),
    }
}
