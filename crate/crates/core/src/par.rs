// Data-parallel map that degrades to a sequential loop without the
// `parallel` feature (e.g. on wasm32).

#[cfg(feature = "parallel")]
pub(crate) fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub(crate) fn for_each<T, F>(items: &[T], f: F)
where
    T: Sync,
    F: Fn(&T) + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().for_each(f)
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each<T, F>(items: &[T], f: F)
where
    F: Fn(&T),
{
    items.iter().for_each(f)
}
