use poisson_eb::cv::{select_h, CvConfig, CvEstimator};
use poisson_eb::sampling::stream;
use poisson_eb::sim::{draw_counts, make_lambda, run_experiment, TablePreset};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn risk_reports_do_not_depend_on_worker_count() {
    let cfg = TablePreset::Table4.config(Some(40), 5);
    let one = in_pool(1, || run_experiment(&cfg).unwrap());
    let four = in_pool(4, || run_experiment(&cfg).unwrap());
    let seven = in_pool(7, || run_experiment(&cfg).unwrap());
    assert_eq!(one, four);
    assert_eq!(one, seven);
    assert_ne!(
        one,
        run_experiment(&TablePreset::Table4.config(Some(40), 6)).unwrap()
    );
}

#[test]
fn cv_selection_does_not_depend_on_worker_count() {
    let lambda = make_lambda(&TablePreset::Table3.lambda()).unwrap();
    let y = draw_counts(&lambda, &mut stream(8, 0)).unwrap();
    let cases = [
        (CvEstimator::AdjustedRobbins, CvConfig::default().h_grid),
        (CvEstimator::ModifiedNormal { q: 0.25 }, vec![0.2, 0.5, 0.9]),
    ];
    for (estimator, h_grid) in cases {
        let cfg = CvConfig {
            k: 200,
            h_grid,
            ..CvConfig::default()
        };
        let one = in_pool(1, || select_h(&y, &cfg, estimator).unwrap());
        let many = in_pool(6, || select_h(&y, &cfg, estimator).unwrap());
        assert_eq!(one, many);
        assert_eq!(one, select_h(&y, &cfg, estimator).unwrap());
    }
}
