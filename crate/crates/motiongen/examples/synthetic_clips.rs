//! Render a few synthetic clips to PPM for visual inspection.

use motiongen::pipeline::{write_ppm, SyntheticVideoSpec};

fn main() {
    let spec = SyntheticVideoSpec::default();
    let out = std::env::temp_dir().join("motiongen_synth");
    std::fs::create_dir_all(&out).unwrap();
    for clip in 0..3i64 {
        for (j, t) in [0.0, 32.0, 64.0, 96.0].into_iter().enumerate() {
            let frame = spec.frame(clip, t).unwrap();
            write_ppm(&out.join(format!("clip{clip}_t{j}.ppm")), &frame).unwrap();
        }
    }
    println!("wrote 12 frames under {}", out.display());
    let params = spec.clip_params(0);
    println!(
        "clip 0: {} blobs, background drift speed {:.2} px/frame, wavelength {:.1}",
        params.blobs.len(),
        params.background.speed,
        params.background.wavelength
    );
}
