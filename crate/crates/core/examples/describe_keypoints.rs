// Describe a few keypoints of a synthetic surface with SDASS and look at
// what the histogram holds.

use sdass::sdass::SdassDescriber;
use sdass::{synthetic, IndexedCloud, SdassParams};

pub fn run_example() -> sdass::Result<()> {
    let cloud = synthetic::bumpy_sphere(20_000, 10.0, 1);
    let mr = cloud.resolution()?;
    let cloud = IndexedCloud::new(cloud);
    let params = SdassParams::default();
    let describer = SdassDescriber::new(&cloud, params, mr)?;
    println!(
        "mr = {mr:.4}, feature length = {} (mask drops {} bins)",
        params.feature_len(),
        describer.mask().redundant_bins()
    );

    for i in [0, 5_000, 10_000] {
        let kp = cloud.cloud().point(i);
        let (feature, stats) = describer.describe_with_stats(kp)?;
        let (peak, value) = feature
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("feature is non-empty");
        println!(
            "keypoint {i:>5}: {} support points, {} accumulated, peak bin {peak} = {value:.3}, sum = {:.12}",
            stats.support_points,
            stats.accumulated,
            feature.sum()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdass::Result<()> {
    run_example()
}
