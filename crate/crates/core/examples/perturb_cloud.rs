// Build a scene from a model: random rigid motion, 1/2 decimation, then
// Gaussian noise of 0.3 mr. The ground truth maps the scene back.

use sdass::ply::{load_ply, save_ply, PlyData, PlyFormat};
use sdass::{synthetic, NuisanceSpec};

pub fn run_example() -> sdass::Result<()> {
    let model = synthetic::torus(8_000, 3.0, 1.0, 2);
    let mr = model.resolution()?;
    let spec = NuisanceSpec {
        noise_sigma_mr: 0.3,
        decimation_rate: 0.5,
        transform_seed: Some(7),
        noise_seed: 1,
        decimation_seed: 2,
        ..NuisanceSpec::default()
    };
    let scene = spec.apply(&model, mr)?;
    let gt = scene.ground_truth();
    println!("{spec}");
    println!(
        "model {} points (mr {mr:.4}) -> scene {} points (mr {:.4})",
        model.len(),
        scene.cloud.len(),
        scene.cloud.resolution()?
    );
    println!("scene -> model:\n{gt}");

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("scene.ply");
    save_ply(
        &PlyData::Cloud(scene.cloud.clone()),
        &path,
        PlyFormat::BinaryLittleEndian,
    )?;
    let back = load_ply(&path)?;
    assert_eq!(back.cloud(), &scene.cloud);

    let err: f64 = scene
        .cloud
        .points()
        .iter()
        .map(|p| {
            let q = gt.apply(p);
            model
                .points()
                .iter()
                .map(|m| (m - q).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .take(200)
        .sum::<f64>()
        / 200.0;
    println!("mean distance of mapped scene points to the model: {:.3} mr", err / mr);
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdass::Result<()> {
    run_example()
}
