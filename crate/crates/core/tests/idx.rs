use std::fs;
use std::path::{Path, PathBuf};

use driftcl::streams::{fashion_mnist_paths, load_fashion_mnist, read_idx_images, read_idx_labels};
use driftcl::Error;

fn images_file(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    for v in [0x0000_0803u32, count, rows, cols] {
        b.extend_from_slice(&v.to_be_bytes());
    }
    b.extend_from_slice(pixels);
    b
}

fn labels_file(labels: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    b.extend_from_slice(labels);
    b
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, bytes).unwrap();
    p
}

#[test]
fn tiny_pair_loads_and_scales() {
    let dir = tempfile::tempdir().unwrap();
    let pixels: Vec<u8> = (0..3 * 2 * 2).map(|i| (i * 20) as u8).collect();
    let img = write(dir.path(), "img", &images_file(3, 2, 2, &pixels));
    let lab = write(dir.path(), "lab", &labels_file(&[7, 0, 9]));
    let samples = load_fashion_mnist(&img, &lab).unwrap();
    assert_eq!(samples.len(), 3);
    assert_eq!(samples[1].label, 0);
    assert_eq!(samples[2].id, 2);
    assert_eq!(
        &samples[1].features[..],
        &[80.0 / 255.0, 100.0 / 255.0, 120.0 / 255.0, 140.0 / 255.0]
    );
}

#[test]
fn bad_magic_reports_offset_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = images_file(1, 1, 1, &[0]);
    bytes[3] = 0x01;
    let p = write(dir.path(), "img", &bytes);
    match read_idx_images(&p) {
        Err(Error::Format { offset, path, .. }) => {
            assert_eq!(offset, 0);
            assert_eq!(path, p);
        }
        other => panic!("unexpected {other:?}"),
    }
    let lab = write(dir.path(), "lab", &images_file(1, 1, 1, &[0]));
    assert!(matches!(read_idx_labels(&lab), Err(Error::Format { offset: 0, .. })));
}

#[test]
fn truncated_body_reports_where_data_ends() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "img", &images_file(2, 2, 2, &[1, 2, 3, 4, 5]));
    match read_idx_images(&p) {
        Err(Error::Format { offset, .. }) => assert_eq!(offset, 16 + 5),
        other => panic!("unexpected {other:?}"),
    }
    let short_header = write(dir.path(), "hdr", &[0, 0, 8, 3, 0, 0]);
    assert!(matches!(read_idx_images(&short_header), Err(Error::Format { .. })));
}

#[test]
fn count_mismatch_between_files() {
    let dir = tempfile::tempdir().unwrap();
    let img = write(dir.path(), "img", &images_file(2, 1, 1, &[1, 2]));
    let lab = write(dir.path(), "lab", &labels_file(&[1, 2, 3]));
    assert!(matches!(load_fashion_mnist(&img, &lab), Err(Error::Format { .. })));
}

#[test]
fn out_of_range_label_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let img = write(dir.path(), "img", &images_file(1, 1, 1, &[1]));
    let lab = write(dir.path(), "lab", &labels_file(&[10]));
    assert!(matches!(
        load_fashion_mnist(&img, &lab),
        Err(Error::Format { offset: 8, .. })
    ));
}

#[test]
fn missing_file_explains_how_to_get_data() {
    let err = read_idx_images(Path::new("/nonexistent/train-images-idx3-ubyte")).unwrap_err();
    assert!(matches!(err, Error::DatasetMissing { .. }));
    assert!(err.to_string().contains("DRIFTCL_DATA_DIR"));
    assert_eq!(err.exit_code(), 4);
}

/// Decodes the label file byte by byte, independently of the loader.
fn reference_label_histogram(path: &Path) -> [u64; 10] {
    let bytes = fs::read(path).unwrap();
    let n = u32::from_be_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    let mut h = [0u64; 10];
    for &b in &bytes[8..8 + n] {
        h[b as usize] += 1;
    }
    h
}

#[test]
fn real_dataset_matches_byte_level_parse() {
    let dir = std::env::var_os("DRIFTCL_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/fashion_mnist"));
    let [_, (img, lab)] = fashion_mnist_paths(&dir);
    if !img.is_file() || !lab.is_file() {
        eprintln!("Fashion-MNIST not present in {}; skipping", dir.display());
        return;
    }
    let samples = load_fashion_mnist(&img, &lab).unwrap();
    let mut h = [0u64; 10];
    for s in &samples {
        h[s.label] += 1;
        assert_eq!(s.features.len(), 784);
    }
    assert_eq!(h, reference_label_histogram(&lab));
    let raw = fs::read(&img).unwrap();
    let raw_sum: u64 = raw[16..].iter().map(|&b| b as u64).sum();
    let loaded_sum: f64 = samples.iter().flat_map(|s| s.features.iter()).sum::<f64>() * 255.0;
    assert!((loaded_sum - raw_sum as f64).abs() <= 1e-9 * raw_sum as f64);
}
