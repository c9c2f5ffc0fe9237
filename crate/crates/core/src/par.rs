//! Data-parallel loop helpers. With the `parallel` feature the macros
//! dispatch to rayon; without it they fall back to the identical
//! sequential loops. Every accumulation happens inside one yielded chunk
//! or is reduced over an order-preserving collect, so results are bitwise
//! identical across both paths and any thread count.

#[cfg(feature = "parallel")]
pub use rayon::prelude::*;

/// `for_each` over mutable chunks of a slice.
macro_rules! par_chunks_mut {
    ($slice:expr, $chunk:expr) => {{
        #[cfg(feature = "parallel")]
        {
            $crate::par::ParallelSliceMut::par_chunks_mut($slice, $chunk)
        }
        #[cfg(not(feature = "parallel"))]
        {
            $slice.chunks_mut($chunk)
        }
    }};
}

/// Iterator over an index range, parallel when enabled.
macro_rules! par_range {
    ($range:expr) => {{
        #[cfg(feature = "parallel")]
        {
            $crate::par::IntoParallelIterator::into_par_iter($range)
        }
        #[cfg(not(feature = "parallel"))]
        {
            $range.into_iter()
        }
    }};
}
