use podrbf::formats;
use podrbf_core::bench::{self, SciencePolicyParams};
use podrbf_core::integrator::{IntegratorOptions, TimeGrid};
use podrbf_core::rbf::KernelKind;
use podrbf_core::sampling::{lhs_sample, sample, Strategy};
use podrbf_core::snapshot::{build_snapshots, SnapshotMatrix};
use podrbf_core::surrogate::Surrogate;

#[test]
fn trained_surrogate_survives_a_file_round_trip() {
    let def = bench::science_policy(&SciencePolicyParams::default()).unwrap();
    let grid = TimeGrid::new(def.t_span.0, def.t_span.1, 40).unwrap();
    let opts = IntegratorOptions::default();
    let samples = sample(Strategy::SymmetricLatinHypercube, 20, &def.bounds, 3).unwrap();
    let y = build_snapshots(&def, &samples, &grid, &opts).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let samples_path = dir.path().join("samples.csv");
    let snap_path = dir.path().join("snapshots.bin");
    formats::write_samples(&samples_path, &samples).unwrap();
    formats::write_snapshots_bin(&snap_path, &y.data).unwrap();
    let reloaded = SnapshotMatrix::from_parts(
        formats::read_snapshots_bin(&snap_path).unwrap(),
        grid,
        formats::read_samples(&samples_path).unwrap(),
        def.n_y,
    )
    .unwrap();
    assert_eq!(reloaded.data, y.data);

    for kind in [KernelKind::LinearSpline, KernelKind::CubicSpline] {
        let s = Surrogate::train(&reloaded, 0.01, kind).unwrap();
        let path = dir.path().join("surrogate.bin");
        formats::write_surrogate(&path, &s).unwrap();
        let back = formats::read_surrogate(&path).unwrap();
        assert_eq!(back.k, s.k);
        assert_eq!(back.kind(), kind);
        let test = lhs_sample(5, &def.bounds, 9).unwrap();
        assert_eq!(back.predict_many(&test).unwrap(), s.predict_many(&test).unwrap());
    }
}

#[test]
fn truncated_surrogate_is_a_format_error() {
    let def = bench::science_policy(&SciencePolicyParams::default()).unwrap();
    let grid = TimeGrid::new(def.t_span.0, def.t_span.1, 20).unwrap();
    let samples = sample(Strategy::LatinHypercube, 10, &def.bounds, 0).unwrap();
    let y = build_snapshots(&def, &samples, &grid, &IntegratorOptions::default()).unwrap();
    let s = Surrogate::train(&y, 0.01, KernelKind::LinearSpline).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("surrogate.bin");
    formats::write_surrogate(&path, &s).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    let err = formats::read_surrogate(&path).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}
