//! Confusion matrix, per-class IoU and accuracy for a hand-made prediction.

use medmesh::metrics::{confusion, MetricsReport};

fn main() -> medmesh::Result<()> {
    let gt = [0, 0, 1, 1, 1, 3, 3, 3];
    let pred = [0, 1, 1, 1, 3, 3, 3, 3];
    // the last edge is ignored; class 2 never occurs and is left out of the mean
    let mask = [true, true, true, true, true, true, true, false];
    let cm = confusion(&pred, &gt, &mask, 4)?;
    println!("{}", MetricsReport::from_confusion(&cm)?);
    Ok(())
}
