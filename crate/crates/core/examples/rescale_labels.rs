//! Carry labels from a coarse mesh to a finer one by nearest edge midpoint.

use medmesh::rescale::rescale_labels;
use medmesh::synth::{class, class_histogram, generate, SynthSpec};

fn main() -> medmesh::Result<()> {
    let low = generate(&SynthSpec::sample(5, 800, false))?;
    let high = generate(&SynthSpec::sample(5, 3200, false))?;
    let moved = rescale_labels(&low.mesh, &low.labels, &high.mesh)?;
    let agree = moved
        .iter()
        .zip(&high.labels)
        .filter(|(a, b)| a == b)
        .count();
    println!(
        "low  {:>5} edges {:?}",
        low.labels.len(),
        class_histogram(&low.labels, class::COUNT)
    );
    println!(
        "high {:>5} edges {:?}",
        moved.len(),
        class_histogram(&moved, class::COUNT)
    );
    println!(
        "agreement with the generator's own high-res labels: {:.3}",
        agree as f64 / moved.len() as f64
    );
    Ok(())
}
