use std::collections::HashMap;
use std::path::Path;

use gpcert::attack::{mean_nearest_enemy_distance, run_attack_sweep, OriginClass};
use gpcert::bounds::{msp_certificate, CrossPair};
use gpcert::experiment::{
    generate_blobs, records_file_name, run_sweep, BlobSpec, DatasetSource, NormSpec, SweepConfig,
};
use gpcert::gp::{default_jitter, two_point_predict};
use gpcert::io::{emit_plot_data, read_records};
use gpcert::normal::std_normal_cdf;
use gpcert::{Error, KernelSpec, Label, LabeledDataset};

fn blob_config(dim: usize, theta1: Vec<f64>, theta2: Vec<f64>, replicates: usize) -> SweepConfig {
    SweepConfig {
        theta1_values: theta1,
        theta2_values: theta2,
        norm: NormSpec::Relative {
            fraction_of_mean_nearest_enemy: 0.1,
        },
        epsilon: 0.0,
        jitter: None,
        seed: 21,
        dataset_source: DatasetSource::Blobs(BlobSpec {
            n_per_class: 200,
            dim,
            separation: 10.0,
            spread: 1.0,
        }),
        origin_class: OriginClass::Plus,
        replicates,
    }
}

#[test]
fn bound_shrinks_with_longer_length_scale() {
    let dir = tempfile::tempdir().unwrap();
    for dim in [2, 20] {
        let s = run_sweep(&blob_config(dim, vec![0.1], vec![10.0, 50.0], 1), dir.path()).unwrap();
        let short = s.row(0.1, 10.0).unwrap().mean_max_theoretical;
        let long = s.row(0.1, 50.0).unwrap().mean_max_theoretical;
        assert!(short > long, "D = {dim}: {short} vs {long}");
    }
}

fn parse_summary(path: &Path) -> Vec<HashMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let headers = reader.headers().unwrap().clone();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            headers.iter().zip(r.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect()
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn summary_is_recomputable_from_record_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = blob_config(2, vec![0.1, 1.0], vec![10.0], 2);
    run_sweep(&config, dir.path()).unwrap();
    let rows = parse_summary(&dir.path().join("summary.csv"));
    assert_eq!(rows.len(), 2);
    for row in rows {
        let num = |k: &str| row[k].parse::<f64>().unwrap();
        let (t1, t2) = (num("theta1"), num("theta2"));
        assert_eq!(row["status"], "ok");
        let reps: Vec<_> = (0..2)
            .map(|rep| read_records(&dir.path().join(records_file_name(t1, t2, rep))).unwrap())
            .collect();
        let all: Vec<_> = reps.iter().flatten().collect();
        let follow = all.iter().filter(|r| r.follows_theorem).count() as f64 / all.len() as f64;
        let maxima: Vec<f64> = reps
            .iter()
            .map(|recs| recs.iter().filter(|r| r.valid).map(|r| r.theoretical_exact).fold(f64::NAN, f64::max))
            .collect();
        let m = mean(&maxima);
        let sd = mean(&maxima.iter().map(|x| (x - m) * (x - m)).collect::<Vec<_>>()).sqrt();
        let violators: Vec<f64> = all.iter().filter(|r| !r.follows_theorem).map(|r| r.distance_to_enemy).collect();
        let dist_all = mean(&all.iter().map(|r| r.distance_to_enemy).collect::<Vec<_>>());

        assert_eq!(row["n_records"].parse::<usize>().unwrap(), all.len());
        assert_eq!(row["n_valid"].parse::<usize>().unwrap(), all.iter().filter(|r| r.valid).count());
        assert_eq!(row["n_violators"].parse::<usize>().unwrap(), violators.len());
        assert_eq!(num("proportion_following_theorem"), follow);
        assert_eq!(num("mean_max_theoretical"), m);
        assert_eq!(num("std_max_theoretical"), sd);
        assert_eq!(num("mean_distance_all"), dist_all);
        if violators.is_empty() {
            assert_eq!(row["mean_distance_violators"], "NaN");
        } else {
            assert_eq!(num("mean_distance_violators"), mean(&violators));
        }
    }
}

#[test]
fn identical_configs_give_identical_summaries() {
    let config = blob_config(2, vec![0.5], vec![10.0, 50.0], 1);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = run_sweep(&config, a.path()).unwrap();
    let sb = run_sweep(&config, b.path()).unwrap();
    assert_eq!(format!("{sa:?}"), format!("{sb:?}"));
    for f in ["summary.csv", "histogram.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn histogram_header_records_the_bin_width() {
    let dir = tempfile::tempdir().unwrap();
    run_sweep(&blob_config(2, vec![1.0], vec![10.0], 1), dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
    let mut lines = text.lines();
    let width: f64 = lines
        .next()
        .unwrap()
        .strip_prefix("# rule=freedman-diaconis bin_width=")
        .unwrap()
        .parse()
        .unwrap();
    assert!(width > 0.0);
    assert_eq!(lines.next().unwrap(), "bin_lower,bin_upper,count");
    let total: usize = lines.map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 200);
}

#[test]
fn empty_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_sweep(&blob_config(2, vec![], vec![10.0], 1), dir.path()).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn separated_blobs_mostly_follow_the_bound() {
    let d = generate_blobs(200, 2, 10.0, 1.0, 7).unwrap();
    let k = KernelSpec::gaussian(0.5, 10.0).unwrap();
    let norm = 0.1 * mean_nearest_enemy_distance(&d, OriginClass::Plus);
    let recs = run_attack_sweep(&d, k, norm, 0.0, default_jitter(&k), OriginClass::Plus).unwrap();
    assert_eq!(recs.len(), 200);
    let follow = recs.iter().filter(|r| r.follows_theorem).count();
    assert!(follow >= 190, "{follow} of 200");
}

#[test]
fn overlapping_blobs_give_mostly_invalid_certificates() {
    let d = generate_blobs(200, 2, 0.0, 1.0, 7).unwrap();
    let k = KernelSpec::gaussian(1.0, 10.0).unwrap();
    let norm = mean_nearest_enemy_distance(&d, OriginClass::Plus);
    let recs = run_attack_sweep(&d, k, norm, 0.0, default_jitter(&k), OriginClass::Plus).unwrap();
    let invalid = recs.iter().filter(|r| !r.valid).count();
    assert!(invalid > recs.len() / 2, "{invalid} of {}", recs.len());
}

#[test]
fn two_point_plot_data_matches_closed_form() {
    let k = KernelSpec::gaussian(1.0, 1.0).unwrap();
    let d = LabeledDataset::from_rows(&[vec![0.0], vec![2.0]], vec![Label::Plus, Label::Minus]).unwrap();
    let recs = run_attack_sweep(&d, k, 0.5, 0.0, 0.0, OriginClass::Plus).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plot.csv");
    emit_plot_data(&recs, &path).unwrap();

    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let v: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();

    let pair = CrossPair::new(&[0.0], &[2.0], &k).unwrap();
    let cert = msp_certificate(&pair, k.eval_at_distance(0.5), 0.0, &k).unwrap();
    let p = two_point_predict(&[0.0], &[2.0], &[0.5], &k).unwrap();
    assert_eq!(v[0], 2.0);
    assert!((v[1] - std_normal_cdf(-p.mean / p.variance.sqrt())).abs() < 1e-12);
    assert_eq!(v[2], cert.exact_tail);
    assert!((v[2] - 0.134_514_290_425_074_8).abs() < 1e-14);
}
