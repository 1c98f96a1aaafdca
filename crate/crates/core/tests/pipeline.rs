use approx::assert_relative_eq;

use fcspdc::dispersion::{Crystal, CrystalDispersion};
use fcspdc::exec::Execution;
use fcspdc::io::{self, SweepSidecar};
use fcspdc::metrics::purity;
use fcspdc::optimizer::{sweep, OptimizationConstraints, SearchOptions, SweepSettings};
use fcspdc::phasematch::ConfigId;
use fcspdc::source::{GridOptions, SourceModel};
use fcspdc::spectra::{BandwidthSet, PmfKind};
use fcspdc::Error;

fn ktp() -> &'static CrystalDispersion {
    CrystalDispersion::builtin(Crystal::Ktp)
}

fn quick(exec: Execution) -> SweepSettings {
    SweepSettings {
        pmf: PmfKind::Gaussian,
        constraints: OptimizationConstraints::default(),
        search: SearchOptions { starts: 2, polish_evals: 20, polish_configs: 1, ..Default::default() },
        conventional: false,
        exec,
    }
}

fn design() -> (SourceModel, BandwidthSet) {
    let src = SourceModel::new(ktp(), ConfigId::II, 780.0).unwrap();
    (src, BandwidthSet::new(0.004, 0.002, 0.004, 0.002).unwrap())
}

#[test]
fn amplitude_dumps_round_trip() {
    let (src, bw) = design();
    let opts = GridOptions::default().with_points(64);
    let amps = src.amplitudes(&bw, PmfKind::Sinc, &opts).unwrap();
    let f = &amps.effective;

    let mut bin = Vec::new();
    io::write_amplitude_binary(&mut bin, f).unwrap();
    let back = io::read_amplitude_binary(bin.as_slice()).unwrap();
    assert_eq!(back.values, f.values);
    assert_eq!((back.kind, back.normalization), (f.kind, f.normalization));

    let mut text = Vec::new();
    io::write_amplitude_csv(&mut text, f).unwrap();
    let back = io::read_amplitude_csv(text.as_slice(), f.kind, f.normalization).unwrap();
    assert_eq!(back.grid.shape(), f.grid.shape());
    assert_relative_eq!(purity(&back).unwrap(), purity(f).unwrap(), epsilon = 1e-12);
}

#[test]
fn sequential_and_parallel_sweeps_agree() {
    let lambdas = [700.0, 1000.0, 1300.0];
    let a = sweep(ktp(), &lambdas, &quick(Execution::Sequential));
    let b = sweep(ktp(), &lambdas, &quick(Execution::Parallel));
    assert_eq!(a.len(), 3);
    for (p, q) in a.iter().zip(&b) {
        assert_eq!(p.lambda_deg_nm, q.lambda_deg_nm);
        let (r, s) = (p.ok().unwrap(), q.ok().unwrap());
        assert_eq!(r.best.config, s.best.config);
        assert_eq!(r.best.bandwidths, s.best.bandwidths);
    }
}

#[test]
fn sweep_keeps_going_past_a_failed_point() {
    let pts = sweep(ktp(), &[400.0, 1000.0], &quick(Execution::Sequential));
    assert!(pts[0].result.as_ref().unwrap_err().contains("absorption"));
    assert!(pts[1].ok().is_some());
}

#[test]
fn sidecar_resume_bookkeeping() {
    let s = quick(Execution::Sequential);
    let lambdas = vec![800.0, 1100.0];
    let mut side = SweepSidecar::new(Crystal::Ktp, s.pmf, lambdas.clone(), s.constraints, s.search, s.conventional);
    assert_eq!(side.pending(), lambdas);
    side.record(sweep(ktp(), &[1100.0], &s));
    assert_eq!(side.pending(), vec![800.0]);
    assert!(!side.complete);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("side.json");
    side.save(&path).unwrap();
    let mut loaded = SweepSidecar::load(&path).unwrap();
    assert!(loaded.same_request(&side));
    loaded.record(sweep(ktp(), &[800.0], &s));
    assert!(loaded.complete);
    assert_eq!(loaded.points.iter().map(|p| p.lambda_deg_nm).collect::<Vec<_>>(), lambdas);
    assert_eq!(loaded.success_fraction(), 1.0);

    let other = SweepSidecar::new(Crystal::Ln, s.pmf, lambdas, s.constraints, s.search, s.conventional);
    assert!(!loaded.same_request(&other));

    let mut table = Vec::new();
    io::write_sweep_csv(&mut table, &loaded.points).unwrap();
    let rows = io::read_sweep_csv(table.as_slice()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.status == "ok" && r.purity.unwrap() > 0.9));
}

#[test]
fn sidecar_rejects_foreign_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.json");
    std::fs::write(&path, "{\"format\": \"other\"}").unwrap();
    assert!(matches!(SweepSidecar::load(&path), Err(Error::Parse(_))));
}
