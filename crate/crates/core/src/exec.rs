//! Fan-out of independent runs (sweep entries, randomized trials) over a
//! rayon pool, with a sequential path that is always available.

use serde::Serialize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled; otherwise the
    /// same as `Sequential`.
    #[default]
    Parallel,
}

impl Exec {
    /// Maps `f` over `items`, preserving order. Results are identical for
    /// both variants since every entry is computed independently.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().map(f).collect(),
            Exec::Parallel => par_map(items, f),
        }
    }

    /// Runs two closures, concurrently when possible.
    pub fn join<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        match self {
            Exec::Sequential => (a(), b()),
            #[cfg(feature = "parallel")]
            Exec::Parallel => rayon::join(a, b),
            #[cfg(not(feature = "parallel"))]
            Exec::Parallel => (a(), b()),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree() {
        let xs: Vec<u64> = (0..100).collect();
        let f = |x: &u64| x * x + 1;
        assert_eq!(Exec::Sequential.map(&xs, f), Exec::Parallel.map(&xs, f));
        assert_eq!(Exec::Parallel.join(|| 1, || 2), (1, 2));
    }
}
