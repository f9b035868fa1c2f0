//! Dense matrix kernels. Rows of the output are computed independently with a
//! fixed summation order, so results do not depend on the thread count or on
//! how many other rows share the call.

use crate::nn::Real;
use rayon::prelude::*;

const PAR_THRESHOLD: usize = 1 << 16;

fn rows_mut<T: Real, F>(out: &mut [T], width: usize, work: usize, f: F)
where
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    if work >= PAR_THRESHOLD {
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    } else {
        out.chunks_mut(width).enumerate().for_each(|(i, row)| f(i, row));
    }
}

/// `out (m×n) += a (m×k) · b (k×n)`
pub(crate) fn matmul_acc<T: Real>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    rows_mut(out, n, m * k * n, |i, orow| {
        let arow = &a[i * k..(i + 1) * k];
        for (p, &aip) in arow.iter().enumerate() {
            if aip == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    });
}

/// `out (m×k) += a (m×n) · bᵀ` where `b` is `k×n`.
pub(crate) fn matmul_nt_acc<T: Real>(a: &[T], b: &[T], out: &mut [T], m: usize, n: usize, k: usize) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    rows_mut(out, k, m * k * n, |i, orow| {
        let arow = &a[i * n..(i + 1) * n];
        for (p, o) in orow.iter_mut().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            let mut s = T::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                s += x * y;
            }
            *o += s;
        }
    });
}

/// `out (k×n) += aᵀ · c` where `a` is `m×k` and `c` is `m×n`.
pub(crate) fn matmul_tn_acc<T: Real>(a: &[T], c: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(c.len(), m * n);
    rows_mut(out, n, m * k * n, |p, orow| {
        for i in 0..m {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let crow = &c[i * n..(i + 1) * n];
            for (o, &cv) in orow.iter_mut().zip(crow) {
                *o += aip * cv;
            }
        }
    });
}
