use htl_core::kernels::{gram, gram_cross, kernel_eval, KernelSpec};
use htl_core::Matrix;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn sized() -> impl Strategy<Value = Matrix> {
    (1usize..20, 1usize..6).prop_flat_map(|(n, d)| matrix(n, d))
}

fn spec() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![Just(KernelSpec::Linear), (1e-3f64..10.0).prop_map(|g| KernelSpec::Rbf { gamma: g })]
}

fn min_eigenvalue(k: &Matrix) -> f64 {
    let m = DMatrix::from_row_slice(k.rows(), k.cols(), k.data());
    m.symmetric_eigen().eigenvalues.min()
}

proptest! {
    #[test]
    fn gram_is_symmetric_and_psd(x in sized(), k in spec()) {
        let g = gram(&k, &x).unwrap();
        prop_assert_eq!(g.max_abs_diff(&g.transpose()), 0.0);
        let scale = (0..g.rows()).map(|i| g.row(i)[i]).fold(1.0, f64::max);
        prop_assert!(min_eigenvalue(&g) >= -1e-9 * scale * g.rows() as f64);
    }

    #[test]
    fn rbf_diagonal_is_one_and_entries_bounded(x in sized(), gamma in 1e-3f64..10.0) {
        let g = gram(&KernelSpec::Rbf { gamma }, &x).unwrap();
        for i in 0..g.rows() {
            prop_assert!((g.row(i)[i] - 1.0).abs() < 1e-12);
            prop_assert!(g.row(i).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn cross_gram_matches_pointwise(x in matrix(5, 3), z in matrix(4, 3), k in spec()) {
        let c = gram_cross(&k, &x, &z).unwrap();
        prop_assert_eq!((c.rows(), c.cols()), (5, 4));
        for i in 0..5 {
            for j in 0..4 {
                let v = kernel_eval(&k, x.row(i), z.row(j)).unwrap();
                prop_assert!((c.row(i)[j] - v).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }
}

#[test]
fn invalid_gamma_and_dimensions_are_rejected() {
    assert!(KernelSpec::rbf(0.0).is_err());
    assert!(KernelSpec::rbf(f64::NAN).is_err());
    assert!(kernel_eval(&KernelSpec::Linear, &[1.0], &[1.0, 2.0]).is_err());
    assert!(gram_cross(&KernelSpec::Linear, &Matrix::zeros(2, 3), &Matrix::zeros(2, 2)).is_err());
}
