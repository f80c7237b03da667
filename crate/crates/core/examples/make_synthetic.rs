//! Writes a synthetic block scene that the CLI can read.
//!
//! ```text
//! cargo run -p wsunsal --example make_synthetic -- <dir> [noise]
//! ```

use std::path::PathBuf;

use wsunsal::data::{write_cube, write_labels_text};
use wsunsal::synthetic::BlockScene;

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "synthetic".into()));
    let noise = args.next().map(|s| s.parse().expect("noise must be a number")).unwrap_or(0.1);
    std::fs::create_dir_all(&dir).expect("create output directory");
    let scene = BlockScene { noise, ..BlockScene::default() };
    let (cube, labels) = scene.generate();
    write_cube(&cube, &dir.join("scene.bsq"), &dir.join("scene.hdr")).expect("write cube");
    write_labels_text(&labels, &dir.join("labels.txt")).expect("write labels");
    println!(
        "{}x{}x{} scene, {} classes, noise {noise} -> {}",
        cube.height(),
        cube.width(),
        cube.bands(),
        labels.class_count(),
        dir.display()
    );
}
