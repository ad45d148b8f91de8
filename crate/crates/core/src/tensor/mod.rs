//! Dense and sparse kernels shared by the reasoning engines.

mod dense;
mod gradcheck;
mod sparse;

pub use dense::{
    axpy, batched_transform, dense_matmul, dot, normalize_slice, row_normalize,
    row_normalize_in_place, vec_matmul, vec_matmul_t, xavier_bound, xavier_uniform, DenseMatrix,
    ROW_NORM_EPS,
};
pub use gradcheck::{finite_diff_check, GradCheckOptions, GradCheckReport};
pub use sparse::{bool_matmul, bool_matmul_count, heaviside, SparseBoolMatrix, SparseCountMatrix};
