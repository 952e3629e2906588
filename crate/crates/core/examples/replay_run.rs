// Drive the command line in-process: describe a cloud, match it against
// itself, then replay the match from its manifest.

use std::fs;

use sdass::ply::{save_ply, PlyData, PlyFormat};
use sdass::{cli, synthetic, RigidTransform};

pub fn run_example() -> sdass::Result<()> {
    let dir = tempfile::tempdir()?;
    let p = |name: &str| dir.path().join(name).display().to_string();
    save_ply(
        &PlyData::Cloud(synthetic::bumpy_sphere(5_000, 10.0, 8)),
        p("model.ply"),
        PlyFormat::BinaryLittleEndian,
    )?;
    fs::write(p("identity.transform"), RigidTransform::identity().to_text())?;

    let runs: [&[&str]; 3] = [
        &[
            "sdass",
            "describe",
            &p("model.ply"),
            "--sample",
            "200",
            "--seed",
            "1",
            "--radius-mr",
            "10",
            "--out",
            &p("feat"),
        ],
        &[
            "sdass",
            "match",
            &p("feat/features.feat"),
            &p("feat/features.feat"),
            &p("identity.transform"),
            "--out",
            &p("match"),
        ],
        &[
            "sdass",
            "--manifest",
            &p("match/manifest.txt"),
            "--replay-out",
            &p("replay"),
        ],
    ];
    for args in runs {
        let code = cli::run(args);
        assert_eq!(code, 0, "{args:?}");
    }
    println!("{}", fs::read_to_string(p("match/summary.csv"))?);
    assert_eq!(fs::read(p("match/rpc.csv"))?, fs::read(p("replay/rpc.csv"))?);
    println!("replayed rpc.csv is byte-identical");
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdass::Result<()> {
    run_example()
}
