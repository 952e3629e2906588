// Repeatability (share of angle errors under 5°) of the local axes as noise
// grows: the LMA against the small-radius normal, and both LRA variants.

use sdass::eval::{axis_repeatability, sample_keypoint_pairs};
use sdass::{synthetic, AxisKind, IndexedCloud, LraVariant, NuisanceSpec};

pub fn run_example() -> sdass::Result<()> {
    let model = synthetic::bumpy_sphere(20_000, 10.0, 3);
    let mr = model.resolution()?;
    let model = IndexedCloud::new(model);
    let kinds = [
        AxisKind::Lma { radius_mr: 7.0 },
        AxisKind::RnNormal { radius_mr: 3.0 },
        AxisKind::Lra {
            radius_mr: 20.0,
            variant: LraVariant::SdassFullRadius,
        },
        AxisKind::Lra {
            radius_mr: 20.0,
            variant: LraVariant::yang(),
        },
    ];
    print!("{:>8}", "sigma");
    for k in &kinds {
        print!("{:>10}", k.label());
    }
    println!();
    for sigma in [0.1, 0.3, 0.5, 1.0] {
        let spec = NuisanceSpec {
            noise_sigma_mr: sigma,
            transform_seed: Some(5),
            noise_seed: 5,
            ..NuisanceSpec::default()
        };
        let scene = spec.apply(model.cloud(), mr)?;
        let gt = scene.ground_truth();
        let scene = IndexedCloud::new(scene.cloud);
        let pairs = sample_keypoint_pairs(&scene, &model, &gt, 300, 1, 2.0 * mr)?;
        print!("{sigma:>8.1}");
        for kind in kinds {
            print!(
                "{:>10.3}",
                axis_repeatability(&scene, &model, &pairs, kind, mr)?.repeatability
            );
        }
        println!();
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdass::Result<()> {
    run_example()
}
