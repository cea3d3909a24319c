//! The data modification step: exact quarter turns, bilinear rotation for
//! arbitrary angles, and the batch expansion to N*M labeled tuples.
//!
//! ```bash
//! cargo run --release --example rotate_and_modify
//! ```

use dualinc::data::{modify_batch, rotate_bilinear, rotate_quarter, Image, LabeledSample, OrientationSet};

fn print_grid(tag: &str, img: &Image) {
    println!("{tag}:");
    for r in 0..img.height() {
        let row: Vec<String> =
            (0..img.width()).map(|c| format!("{:4.1}", img.get(0, r, c))).collect();
        println!("  [{}]", row.join(","));
    }
}

fn main() {
    let img = Image::new(1, 3, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
    print_grid("original", &img);
    print_grid("quarter turn (90 ccw)", &rotate_quarter(&img, 1));
    print_grid("half turn", &rotate_quarter(&img, 2));

    let mut four = img.clone();
    for _ in 0..4 {
        four = rotate_quarter(&four, 1);
    }
    println!("four quarter turns restore the image bitwise: {}", four == img);

    let tilted = rotate_bilinear(&img, 45.0);
    print_grid("bilinear 45 degrees (zero fill outside)", &tilted);
    println!(
        "center pixel is invariant: {} == {}",
        tilted.get(0, 1, 1),
        img.get(0, 1, 1)
    );

    // batch of N=2 images, M=2 orientations -> 4 labeled tuples
    let batch = vec![
        LabeledSample { image: img.clone(), image_class: 7 },
        LabeledSample { image: rotate_quarter(&img, 2), image_class: 3 },
    ];
    let orientations = OrientationSet::new(vec![0.0, 90.0]);
    let modified = modify_batch(&batch, &orientations);
    println!("\nmodify_batch: {} originals x {} orientations = {} rows", batch.len(), orientations.len(), modified.len());
    for (i, m) in modified.iter().enumerate() {
        println!("  row {i}: (image class {}, orientation class {})", m.image_class, m.orientation_class);
    }
}
