//! Synthetic tables with a known best rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{preprocess, read_table, Dataset, PreprocessOptions, Schema, TableOptions};
use crate::error::Result;

/// Lower bound on `f1` inside the planted region.
pub const PLANTED_F1_MIN: f64 = 0.6;
/// Upper bound (exclusive) on `f2` inside the planted region.
pub const PLANTED_F2_MAX: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct Planted {
    /// Columns `f0..f{p-1}` and `label` (`pos`/`neg`).
    pub csv: String,
    /// Rows inside `f1 >= 0.6 AND f2 < 0.3`, all labelled `pos`.
    pub positives: usize,
    pub n: usize,
}

impl Planted {
    pub fn inside(f1: f64, f2: f64) -> bool {
        f1 >= PLANTED_F1_MIN && f2 < PLANTED_F2_MAX
    }

    pub fn dataset(&self) -> Result<Dataset> {
        let schema = Schema::parse("label:target")?;
        let raw = read_table(self.csv.as_bytes(), &schema, &TableOptions::default())?;
        preprocess(&raw, &PreprocessOptions::default())
    }
}

/// Noise-free data where `positive_share` of the `n` rows fall inside the
/// planted box and are positive; every other row is negative. With a
/// positive majority the box is the largest pure region, so the best rule
/// at any `w >= 1` covers exactly the positives. Values have three
/// decimals. Needs `p >= 3`.
pub fn planted_conjunction(n: usize, p: usize, positive_share: f64, seed: u64) -> Planted {
    assert!(p >= 3, "the planted box uses f1 and f2");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positives = (n as f64 * positive_share).round() as usize;
    let round = |x: f64| (x * 1000.0).round() / 1000.0;
    let mut csv = String::new();
    let header: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
    csv.push_str(&header.join(","));
    csv.push_str(",label\n");
    for i in 0..n {
        let pos = i < positives;
        let row: Vec<f64> = loop {
            let mut row: Vec<f64> = (0..p).map(|_| round(rng.gen::<f64>())).collect();
            if pos {
                row[1] = round(rng.gen_range(PLANTED_F1_MIN..=1.0));
                row[2] = round(rng.gen_range(0.0..0.299));
            }
            if Planted::inside(row[1], row[2]) == pos {
                break row;
            }
        };
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        csv.push_str(&cells.join(","));
        csv.push_str(if pos { ",pos\n" } else { ",neg\n" });
    }
    Planted { csv, positives, n }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_holds_exactly_the_positives() {
        let planted = planted_conjunction(50, 4, 0.7, 3);
        let ds = planted.dataset().unwrap();
        assert_eq!(ds.n_samples(), 50);
        let pos = ds.label_index("pos").unwrap();
        let inside = (0..50)
            .filter(|&i| Planted::inside(ds.raw_column(1)[i], ds.raw_column(2)[i]))
            .count();
        assert_eq!(inside, planted.positives);
        assert_eq!(ds.labels().iter().filter(|&&k| k == pos).count(), 35);
    }

    #[test]
    fn same_seed_same_table() {
        assert_eq!(
            planted_conjunction(30, 3, 0.6, 9).csv,
            planted_conjunction(30, 3, 0.6, 9).csv
        );
    }
}
