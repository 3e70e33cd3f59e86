//! Per-edge input features of a small mesh, and their invariance to a
//! rotation plus uniform scaling.

use medmesh::mesh::{extract_edge_features, FEATURE_CHANNELS};
use medmesh::synth::icosphere;

fn main() -> medmesh::Result<()> {
    let mesh = icosphere(1);
    let x = extract_edge_features(&mesh)?;
    println!(
        "V={} F={} E={} boundary={}",
        mesh.vertex_count(),
        mesh.face_count(),
        mesh.edge_count(),
        mesh.boundary_edge_count()
    );
    println!("channels: dihedral, inner angle (min, max), length ratio (min, max)");
    for e in 0..3 {
        let col: Vec<String> = (0..FEATURE_CHANNELS)
            .map(|c| format!("{:.5}", x.values()[[c, e]]))
            .collect();
        println!("edge {e}: {}", col.join(" "));
    }

    let (c, s) = (0.6f64, 0.8f64);
    let moved = mesh.with_vertices(
        mesh.vertices()
            .iter()
            .map(|p| {
                [
                    3.0 * (c * p[0] - s * p[1]),
                    3.0 * (s * p[0] + c * p[1]),
                    3.0 * p[2] + 1.0,
                ]
            })
            .collect(),
    )?;
    let y = extract_edge_features(&moved)?;
    let diff = (&x.values() - &y.values())
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    println!("max change after rotate+scale+shift: {diff:e}");
    Ok(())
}
