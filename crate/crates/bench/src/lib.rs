//! Shared input builders for the loss benchmarks: recognition-scale
//! shapes (16 x 32 maps over a 37-class alphabet, batches of 256).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ctc2d::sampling;
use ctc2d::{Label, ProbMap2D, ProbSeq1D, TransitionMap};

pub const HEIGHT: usize = 16;
pub const WIDTH: usize = 32;
pub const NUM_CLASSES: usize = 37;
pub const BATCH: usize = 256;
pub const LABEL_LEN: usize = 10;

pub struct SequenceBatch {
    pub inputs: Vec<ProbSeq1D>,
    pub labels: Vec<Label>,
}

pub struct MapBatch {
    pub inputs: Vec<(ProbMap2D, TransitionMap)>,
    pub labels: Vec<Label>,
}

pub fn sequence_batch(seed: u64) -> SequenceBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = (0..BATCH)
        .map(|_| sampling::random_seq(&mut rng, WIDTH, NUM_CLASSES))
        .collect();
    let labels = (0..BATCH)
        .map(|_| feasible_label(&mut rng))
        .collect();
    SequenceBatch { inputs, labels }
}

pub fn map_batch(seed: u64) -> MapBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = (0..BATCH)
        .map(|_| {
            let map = sampling::random_map(&mut rng, HEIGHT, WIDTH, NUM_CLASSES);
            let psi = sampling::random_simplified(&mut rng, HEIGHT, WIDTH);
            (map, psi)
        })
        .collect();
    let labels = (0..BATCH)
        .map(|_| feasible_label(&mut rng))
        .collect();
    MapBatch { inputs, labels }
}

fn feasible_label(rng: &mut ChaCha8Rng) -> Label {
    // Length-10 labels over the non-blank classes; resample the rare
    // draw whose repeats push min_width past the available columns.
    loop {
        let label = sampling::random_label(rng, NUM_CLASSES, LABEL_LEN);
        if label.min_width() <= WIDTH {
            return label;
        }
    }
}
