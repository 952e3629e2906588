// PLY mesh round trip, boundary detection and the inner region used to keep
// keypoints away from open edges.

use std::collections::BTreeSet;

use sdass::ply::{read_ply_bytes, write_ply, PlyFormat};
use sdass::pointcloud::{detect_boundary_points, inner_region};
use sdass::synthetic;

pub fn run_example() -> sdass::Result<()> {
    let mesh = synthetic::grid_mesh(30, 20, 0.5);
    let mut bytes = Vec::new();
    write_ply(&mut bytes, mesh.cloud(), mesh.triangles(), PlyFormat::Ascii)?;
    let back = read_ply_bytes(&bytes)?;
    println!(
        "{} vertices, {} triangles round-tripped through {} bytes of ASCII PLY",
        back.cloud().len(),
        back.triangles().len(),
        bytes.len()
    );

    let boundary: BTreeSet<usize> = detect_boundary_points(&mesh)?;
    let mr = mesh.cloud().resolution()?;
    let inner = inner_region(mesh.cloud(), &boundary, 3.0 * mr);
    println!(
        "{} boundary vertices; {} vertices lie farther than 3 mr from them",
        boundary.len(),
        inner.len()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdass::Result<()> {
    run_example()
}
