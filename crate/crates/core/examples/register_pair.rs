// Feature-based registration: SDASS correspondences filtered by NNDR, then
// RANSAC with a least-squares refit.

use sdass::register::register_clouds;
use sdass::{synthetic, IndexedCloud, NuisanceSpec, RansacParams, SdassParams};

pub fn run_example() -> sdass::Result<()> {
    let model = synthetic::bumpy_sphere(20_000, 10.0, 6);
    let mr = model.resolution()?;
    let spec = NuisanceSpec {
        noise_sigma_mr: 0.2,
        decimation_rate: 0.5,
        transform_seed: Some(11),
        noise_seed: 1,
        decimation_seed: 1,
        ..NuisanceSpec::default()
    };
    let scene = spec.apply(&model, mr)?;
    let gt = scene.ground_truth();
    let (scene, model) = (IndexedCloud::new(scene.cloud), IndexedCloud::new(model));

    let reg = register_clouds(
        &scene,
        &model,
        800,
        &SdassParams::default(),
        &RansacParams::with_mr(mr, 3),
        mr,
        0.3,
    )?;
    let r = &reg.result;
    println!(
        "{} correspondences, {} inliers after {} hypotheses, rms {:.3} mr",
        reg.correspondences.len(),
        r.inliers.len(),
        r.iterations_used,
        r.rms_residual / mr
    );
    println!("estimated scene -> model:\n{}", r.transform);
    println!(
        "rotation error {:.3} deg, translation error {:.3} mr",
        r.transform.rotation_angle_to(&gt).to_degrees(),
        (r.transform.translation() - gt.translation()).norm() / mr
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdass::Result<()> {
    run_example()
}
