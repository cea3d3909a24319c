//! The CIFAR-100 binary record loader: assemble a small fixture file, load
//! it back, and show the truncation guard.
//!
//! With real data, point the training config at the binary files:
//!
//! ```bash
//! cargo run --release -- train --dataset cifar100 --preset cifar \
//!     --cifar-train train.bin --cifar-test test.bin \
//!     --base-classes 50 --phases 5
//! ```

use dualinc::data::{load_cifar100, CIFAR100_RECORD_BYTES};
use std::io::Write;

fn main() {
    let dir = std::env::temp_dir().join("dualinc-examples/cifar_loader");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("fixture.bin");

    // two records: 1 coarse byte, 1 fine byte, 3072 channel-planar pixels
    let mut bytes = Vec::new();
    for (coarse, fine) in [(1u8, 42u8), (0, 7)] {
        bytes.push(coarse);
        bytes.push(fine);
        bytes.extend((0..3072).map(|i| (i % 256) as u8));
    }
    std::fs::File::create(&path).unwrap().write_all(&bytes).unwrap();
    println!("wrote {} bytes ({} records of {})", bytes.len(), 2, CIFAR100_RECORD_BYTES);

    let samples = load_cifar100(&path, None).unwrap();
    for (i, s) in samples.iter().enumerate() {
        println!(
            "record {i}: fine label {} -> image {}x{}x{}, first pixels {:?}",
            s.image_class,
            s.image.channels(),
            s.image.height(),
            s.image.width(),
            &s.image.data()[..4]
        );
    }

    // a file that is not a whole number of records is rejected
    let bad = dir.join("truncated.bin");
    std::fs::File::create(&bad).unwrap().write_all(&bytes[..3073]).unwrap();
    match load_cifar100(&bad, None) {
        Err(e) => println!("truncated file rejected: {e}"),
        Ok(_) => unreachable!(),
    }
}
