#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use msled::retrieval::{read_index, write_index, DistanceMatrix, Hit};
use msled::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn one_scale_config() -> PipelineConfig {
    PipelineConfig {
        scales: vec![1.0],
        ..PipelineConfig::default()
    }
}

fn random_descriptor(rng: &mut impl Rng) -> MultiscaleDescriptor {
    let m = to_dmatrix(&random_spd(SLED_DIM, 0.5, rng));
    MultiscaleDescriptor {
        scales: vec![1.0],
        matrices: vec![CovarianceDescriptor::from_matrix(SpdMatrix::new(m).unwrap())],
    }
}

fn random_index(labels: &[&str], seed: u64) -> DescriptorIndex {
    let mut rng = rng(seed);
    let entries = labels
        .iter()
        .enumerate()
        .map(|(i, l)| IndexEntry {
            id: i as u64,
            label: l.to_string(),
            descriptor: random_descriptor(&mut rng),
        })
        .collect();
    DescriptorIndex::new(one_scale_config(), entries).unwrap()
}

fn full_distances(index: &DescriptorIndex) -> Vec<Vec<f64>> {
    let e = index.entries();
    e.iter()
        .map(|a| e.iter().map(|b| multiscale_distance(&a.descriptor, &b.descriptor).unwrap()).collect())
        .collect()
}

fn labels_and_ids(index: &DescriptorIndex) -> (Vec<String>, Vec<u64>) {
    index.entries().iter().map(|e| (e.label.clone(), e.id)).unzip()
}

const LABELS: [&str; 10] = ["a", "b", "a", "c", "b", "a", "c", "b", "a", "c"];

#[test]
fn query_with_member_returns_it_first() {
    let index = random_index(&LABELS, 1);
    let probe = &index.get(7).unwrap().descriptor;
    let result = query(&index, probe, 3).unwrap();
    assert_eq!(result.hits[0], Hit { id: 7, distance: 0.0 });
    assert_eq!(result.hits.len(), 3);
}

#[test]
fn identical_descriptors_tie_break_by_id() {
    let mut rng = rng(2);
    let d = random_descriptor(&mut rng);
    let entries = [5u64, 2, 9, 1]
        .iter()
        .map(|&id| IndexEntry {
            id,
            label: "x".into(),
            descriptor: d.clone(),
        })
        .collect();
    let index = DescriptorIndex::new(one_scale_config(), entries).unwrap();
    let ids: Vec<u64> = query(&index, &d, 4).unwrap().hits.iter().map(|h| h.id).collect();
    assert_eq!(ids, vec![1, 2, 5, 9]);
}

#[test]
fn query_matches_full_sort_oracle() {
    let index = random_index(&LABELS, 3);
    let mut rng = rng(33);
    let probe = random_descriptor(&mut rng);
    let mut want: Vec<(f64, u64)> = index
        .entries()
        .iter()
        .map(|e| (multiscale_distance(&e.descriptor, &probe).unwrap(), e.id))
        .collect();
    want.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for k in 1..=10 {
        let got: Vec<(f64, u64)> = query(&index, &probe, k).unwrap().hits.iter().map(|h| (h.distance, h.id)).collect();
        assert_eq!(got, want[..k]);
    }
}

#[test]
fn query_rejects_bad_k() {
    let index = random_index(&LABELS, 4);
    let probe = index.entries()[0].descriptor.clone();
    assert!(matches!(query(&index, &probe, 0), Err(Error::KOutOfRange { k: 0, len: 10 })));
    assert!(matches!(query(&index, &probe, 11), Err(Error::KOutOfRange { k: 11, len: 10 })));
}

#[test]
fn arr_matches_oracle_and_grows_with_k() {
    let index = random_index(&LABELS, 5);
    let dist = full_distances(&index);
    let (labels, ids) = labels_and_ids(&index);
    let mut prev = 0.0;
    for k in 1..=10 {
        let report = evaluate_arr(&index, k).unwrap();
        let want = arr_from_matrix(&labels, &ids, &dist, k);
        assert!((report.arr - want).abs() < 1e-12, "k={k}: {} vs {want}", report.arr);
        assert!(report.arr >= prev - 1e-12);
        prev = report.arr;
    }
    assert!((prev - 1.0).abs() < 1e-12);
}

#[test]
fn per_class_rates_average_to_overall() {
    let index = random_index(&LABELS, 6);
    let report = evaluate_arr(&index, 4).unwrap();
    let n: usize = report.class_sizes.values().sum();
    let weighted: f64 = report
        .per_class
        .iter()
        .map(|(c, r)| r * report.class_sizes[c] as f64)
        .sum::<f64>()
        / n as f64;
    assert!((weighted - report.arr).abs() < 1e-12);
    assert!(!report.uniform_relevant);
    assert_eq!(report.class_sizes["a"], 4);
}

#[test]
fn arr_does_not_depend_on_entry_order() {
    let index = random_index(&LABELS, 7);
    let mut entries = index.entries().to_vec();
    entries.shuffle(&mut rng(77));
    let shuffled = DescriptorIndex::new(index.config().clone(), entries).unwrap();
    for k in [1, 3, 6] {
        assert_eq!(evaluate_arr(&index, k).unwrap().arr, evaluate_arr(&shuffled, k).unwrap().arr);
    }
}

#[test]
fn distance_matrix_is_symmetric_with_zero_diagonal() {
    let index = random_index(&LABELS, 8);
    let dm = DistanceMatrix::compute(&index).unwrap();
    let dist = full_distances(&index);
    for i in 0..dm.len() {
        assert_eq!(dm.get(i, i), 0.0);
        for j in 0..dm.len() {
            assert_eq!(dm.get(i, j), dm.get(j, i));
            assert!((dm.get(i, j) - dist[i][j]).abs() < 1e-12);
        }
    }
}

#[test]
fn csv_report_layout() {
    let index = random_index(&["a", "a", "b", "b"], 9);
    let csv = evaluate_arr(&index, 4).unwrap().to_csv();
    assert_eq!(csv, "class,rate\na,1.000000\nb,1.000000\nARR,1.000000\n");
}

#[test]
fn index_rejects_duplicate_ids_and_scale_mismatch() {
    let mut rng = rng(10);
    let d = random_descriptor(&mut rng);
    let entry = |id| IndexEntry {
        id,
        label: "x".into(),
        descriptor: d.clone(),
    };
    assert!(matches!(
        DescriptorIndex::new(one_scale_config(), vec![entry(1), entry(1)]),
        Err(Error::Dataset(_))
    ));
    assert!(matches!(
        DescriptorIndex::new(PipelineConfig::default(), vec![entry(1)]),
        Err(Error::IncompatibleDescriptors(_))
    ));
    assert!(DescriptorIndex::new(one_scale_config(), vec![]).is_err());
}

#[test]
fn serialization_round_trips() {
    let index = random_index(&LABELS, 11);
    let bytes = write_index(&index).unwrap();
    let back = read_index(&bytes).unwrap();
    assert_eq!(back, index);
    assert_eq!(write_index(&back).unwrap(), bytes);
}

#[test]
fn load_errors_are_classified() {
    let index = random_index(&["a", "b"], 12);
    let bytes = write_index(&index).unwrap();

    let mut wrong_magic = bytes.clone();
    wrong_magic[0] = b'X';
    assert!(matches!(read_index(&wrong_magic), Err(Error::Format(_))));

    let mut version = bytes.clone();
    version[7] = b'2';
    assert!(matches!(read_index(&version), Err(Error::VersionMismatch { found: b'2' })));

    for cut in [3, 20, bytes.len() / 2, bytes.len() - 5] {
        assert!(matches!(read_index(&bytes[..cut]), Err(Error::Truncated)), "cut at {cut}");
    }

    let mut flipped = bytes.clone();
    let at = bytes.len() - 100;
    flipped[at] ^= 0x01;
    assert!(matches!(read_index(&flipped), Err(Error::ChecksumMismatch { .. })));

    assert!(matches!(read_index(b""), Err(Error::Truncated)));
    assert!(matches!(read_index(b"hello world, not an index"), Err(Error::Format(_))));
}

#[test]
fn save_and_load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.idx");
    let index = random_index(&LABELS, 13);
    save_index(&index, &path).unwrap();
    assert_eq!(load_index(&path).unwrap(), index);
    assert!(matches!(load_index(dir.path().join("missing.idx")), Err(Error::Io(_))));
}

fn small_corpus(dir: &std::path::Path) -> DatasetManifest {
    let images = grating_corpus(2, 64, 21);
    write_corpus(dir, &images);
    scan_dataset(dir, Labeling::Subdir).unwrap()
}

#[test]
fn build_index_is_deterministic_across_pool_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_corpus(dir.path());
    assert_eq!(manifest.total(), 16);
    assert_eq!(manifest.class_count(), 8);
    let cfg = PipelineConfig::default();
    let build = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| build_index(&manifest, &cfg)).unwrap()
    };
    let one = write_index(&build(1)).unwrap();
    let four = write_index(&build(4)).unwrap();
    assert_eq!(one, four);
}

#[test]
fn two_image_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng(14);
    for (name, period) in [("a", 4.0), ("b", 9.0)] {
        std::fs::create_dir(dir.path().join(name)).unwrap();
        grating(64, period, 0.0, 0.0, 5.0, &mut rng)
            .save_ppm(dir.path().join(name).join("0.ppm"))
            .unwrap();
    }
    let manifest = scan_dataset(dir.path(), Labeling::Subdir).unwrap();
    assert_eq!(manifest.total(), 2);
    assert_eq!(manifest.warnings.len(), 2);
    let index = build_index(&manifest, &PipelineConfig::default()).unwrap();
    let report = evaluate_arr(&index, 1).unwrap();
    assert_eq!(report.arr, 1.0);
    assert_eq!(evaluate_arr(&index, 2).unwrap().arr, 1.0);
}

#[test]
fn unreadable_image_aborts_the_build() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_corpus(dir.path());
    let victim = manifest.entries[5].path.clone();
    std::fs::write(&victim, b"P6\n garbage").unwrap();
    match build_index(&manifest, &PipelineConfig::default()) {
        Err(Error::ImageFailed { id, path, .. }) => {
            assert_eq!(id, 5);
            assert_eq!(path, victim);
        }
        other => panic!("expected ImageFailed, got {other:?}"),
    }
}

#[test]
fn stem_labeling_groups_by_name_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng(15);
    for name in ["Bark.0000.ppm", "Bark.0001.ppm", "Brick.0000.ppm", "Brick.0001.ppm"] {
        grating(40, 5.0, 0.0, 0.0, 5.0, &mut rng).save_ppm(dir.path().join(name)).unwrap();
    }
    let manifest = scan_dataset(dir.path(), Labeling::Stem).unwrap();
    let counts = manifest.class_counts();
    assert_eq!(counts["Bark"], 2);
    assert_eq!(counts["Brick"], 2);
    assert_eq!(manifest.relevant_count(), Some(2));
}
