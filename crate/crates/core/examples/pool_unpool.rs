//! Edge-collapse pooling followed by unpooling.

use medmesh::mesh::extract_edge_features;
use medmesh::pool::{mesh_pool, mesh_unpool};
use medmesh::synth::{generate, SynthSpec};

fn main() -> medmesh::Result<()> {
    let sample = generate(&SynthSpec::sample(3, 1200, true))?;
    let mesh = &sample.mesh;
    let x = extract_edge_features(mesh)?;
    println!(
        "input: {} edges, {} on the boundary",
        mesh.edge_count(),
        mesh.boundary_edge_count()
    );

    for target in [900, 600] {
        let out = mesh_pool(mesh, &x, target)?;
        let h = &out.history;
        let largest = (0..h.pooled_edge_count())
            .map(|g| h.membership().iter().filter(|&&m| m == g).count())
            .max()
            .unwrap_or(0);
        let back = mesh_unpool(&out.features, h)?;
        println!(
            "target {target}: {} edges, {} boundary, {} collapses, largest group {largest}, unpooled to {}",
            out.mesh.edge_count(),
            out.mesh.boundary_edge_count(),
            h.collapsed().len(),
            back.edge_count()
        );
    }
    Ok(())
}
