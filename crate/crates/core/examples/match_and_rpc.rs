// Match a noisy scene against its model with SDASS and with spin images and
// compare recall vs 1-precision, AUC_pr and top-200 PCC.

use sdass::eval::{evaluate_matching, sample_keypoint_pairs, MatchingConfig};
use sdass::{
    describe_keypoints, describe_spin_images, synthetic, IndexedCloud, NuisanceSpec, SdassParams, SpinImageParams,
};

pub fn run_example() -> sdass::Result<()> {
    let model = synthetic::bumpy_sphere(20_000, 10.0, 4);
    let mr = model.resolution()?;
    let spec = NuisanceSpec {
        noise_sigma_mr: 0.3,
        transform_seed: Some(2),
        noise_seed: 3,
        ..NuisanceSpec::default()
    };
    let scene = spec.apply(&model, mr)?;
    let gt = scene.ground_truth();
    let (scene, model) = (IndexedCloud::new(scene.cloud), IndexedCloud::new(model));
    let pairs = sample_keypoint_pairs(&scene, &model, &gt, 500, 9, 2.0 * mr)?;
    let config = MatchingConfig::with_mr(mr);

    let sdass_params = SdassParams::default();
    let spin_params = SpinImageParams::default();
    let runs = [
        (
            "sdass",
            describe_keypoints(&scene, &pairs.scene_keypoints, &sdass_params, mr)?,
            describe_keypoints(&model, &pairs.model_keypoints, &sdass_params, mr)?,
        ),
        (
            "spin",
            describe_spin_images(&scene, &pairs.scene_keypoints, &spin_params, mr)?,
            describe_spin_images(&model, &pairs.model_keypoints, &spin_params, mr)?,
        ),
    ];
    for (name, s, m) in &runs {
        let report = evaluate_matching(s, m, &gt, &config)?;
        println!(
            "{name}: AUC_pr {:.3}, PCC {:.1}%",
            report.curve.auc_pr, report.pcc.percentage
        );
        for p in report.curve.points.iter().step_by(20) {
            println!(
                "  ratio <= {:.2}: 1-precision {:.3}, recall {:.3}",
                p.threshold,
                p.one_minus_precision(),
                p.recall
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdass::Result<()> {
    run_example()
}
