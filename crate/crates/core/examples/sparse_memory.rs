//! Dense vs sparse storage of the merge matrix as the mesh grows.

use medmesh::mesh::extract_edge_features;
use medmesh::pool::{mesh_pool, pool_memory_report};
use medmesh::synth::icosphere;

fn main() -> medmesh::Result<()> {
    println!("edge_count\tdense\tsparse\tratio");
    for level in 1..=4 {
        let mesh = icosphere(level);
        let e = mesh.edge_count();
        let out = mesh_pool(&mesh, &extract_edge_features(&mesh)?, e * 3 / 4)?;
        println!("{}", pool_memory_report(e, &out.history));
    }
    Ok(())
}
