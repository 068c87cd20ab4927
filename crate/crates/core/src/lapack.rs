//! Symmetric eigensolver backed by the system LAPACK (`dsyevd`,
//! divide and conquer).

use std::os::raw::{c_char, c_int};

use nalgebra::DMatrix;

// links the system OpenBLAS, which provides the LAPACK symbols
use openblas_src as _;

/// Eigenvalues in ascending order and, if requested, the column eigenvectors.
/// `None` when LAPACK reports a failure to converge.
pub(crate) fn syevd(mut a: DMatrix<f64>, vectors: bool) -> Option<(Vec<f64>, Option<DMatrix<f64>>)> {
    let n = a.nrows();
    let n_int = c_int::try_from(n).ok()?;
    let jobz = if vectors { b'V' } else { b'N' } as c_char;
    let uplo = b'L' as c_char;
    let mut w = vec![0.0; n];
    let mut info: c_int = 0;

    // workspace query
    let mut work_size = 0.0;
    let mut iwork_size: c_int = 0;
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &n_int,
            a.as_mut_ptr(),
            &n_int.max(1),
            w.as_mut_ptr(),
            &mut work_size,
            &-1,
            &mut iwork_size,
            &-1,
            &mut info,
        );
    }
    if info != 0 {
        return None;
    }
    let lwork = work_size as c_int;
    let mut work = vec![0.0; lwork.max(1) as usize];
    let mut iwork = vec![0 as c_int; iwork_size.max(1) as usize];
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &n_int,
            a.as_mut_ptr(),
            &n_int.max(1),
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &iwork_size,
            &mut info,
        );
    }
    if info != 0 {
        return None;
    }
    Some((w, vectors.then_some(a)))
}
