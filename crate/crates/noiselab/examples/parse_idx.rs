//! Parse MNIST-style IDX files into a dataset.
//!
//! Builds a tiny IDX image/label pair in memory (the same big-endian layout
//! MNIST ships), writes it to disk, and loads it back through the IDX file
//! reader. Volumes with more than two image dimensions flatten into the same
//! feature-vector path.

use noiselab::data::{load_idx_pair, parse_idx_pair};

fn idx_images(dims: &[u32], payload: &[u8]) -> Vec<u8> {
    let mut bytes = vec![0, 0, 0x08, dims.len() as u8];
    for d in dims {
        bytes.extend_from_slice(&d.to_be_bytes());
    }
    bytes.extend_from_slice(payload);
    bytes
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut bytes = vec![0, 0, 0x08, 1];
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    bytes
}

fn main() -> noiselab::Result<()> {
    // Six 4x4 "images": class 0 is dark, class 1 is bright.
    let mut payload = Vec::new();
    let labels = [0u8, 1, 0, 1, 0, 1];
    for &label in &labels {
        let base: u8 = if label == 0 { 40 } else { 200 };
        payload.extend((0..16).map(|i| base.saturating_add(3 * i as u8)));
    }
    let images = idx_images(&[6, 4, 4], &payload);
    let label_bytes = idx_labels(&labels);

    let d = parse_idx_pair(&images, &label_bytes, 2, "toy-idx")?;
    println!("parsed '{}': {} samples x {} features", d.name, d.n(), d.feature_dim);
    println!(
        "first sample: label={} features[0..4]={:?}",
        d.samples[0].observed_label,
        &d.samples[0].features[..4]
    );

    // The same bytes as files, through the path-based loader.
    let dir = std::env::temp_dir().join("noiselab-demo");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let img_path = dir.join("toy-images.idx");
    let lab_path = dir.join("toy-labels.idx");
    std::fs::write(&img_path, &images).expect("write images");
    std::fs::write(&lab_path, &label_bytes).expect("write labels");
    let from_disk = load_idx_pair(&img_path, &lab_path, 2)?;
    assert_eq!(from_disk.samples, d.samples);
    println!("file loader agrees with the in-memory parser");

    // A 3-dimensional volume set (2 volumes of 2x2x2) flattens to 8 features.
    let volumes = idx_images(&[2, 2, 2, 2], &[128u8; 16]);
    let vol_labels = idx_labels(&[0, 1]);
    let vols = parse_idx_pair(&volumes, &vol_labels, 2, "toy-volumes")?;
    println!("volume pair: {} samples x {} features (flattened)", vols.n(), vols.feature_dim);

    // Malformed files fail loudly, naming the offending field.
    let mut bad = images.clone();
    bad[3] = 2; // not enough dimensions for an image tensor
    match parse_idx_pair(&bad, &label_bytes, 2, "bad") {
        Err(e) => println!("malformed header rejected: {e}"),
        Ok(_) => unreachable!("parser accepted a 2-dimensional image file"),
    }
    Ok(())
}
