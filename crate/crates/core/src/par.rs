//! Data-parallel map with a sequential fallback when the `parallel`
//! feature is off.

/// Apply `f` to every item, preserving order.
#[cfg(feature = "parallel")]
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    map_seq(items, f)
}

/// Always sequential, for benchmarking against [`par_map`].
pub fn map_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Fallible variant that returns the first error in item order.
pub fn try_par_map<T, U, E, F>(items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    par_map(items, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let v: Vec<u32> = (0..100).collect();
        assert_eq!(par_map(&v, |x| x * 2), map_seq(&v, |x| x * 2));
        let r: Result<Vec<u32>, u32> = try_par_map(&v, |&x| if x == 7 || x == 9 { Err(x) } else { Ok(x) });
        assert_eq!(r, Err(7));
    }
}
