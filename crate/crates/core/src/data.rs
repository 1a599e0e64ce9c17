//! The circular-boundary task: sampling, labeling, CSV persistence, scoring.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, parse_error, Error, Result};
use crate::model::{InputVector, ModelParams};
use crate::sampler::{sample_probability_estimate, RandomSource, ShotConfig};

pub use crate::model::Label;

pub const CSV_HEADER: [&str; 3] = ["x1", "x2", "label"];

/// Circle `(x1 − X1)² + (x2 − X2)² = R²`. Outside is "yes", inside "no".
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBoundary")]
pub struct Boundary {
    pub center: (f64, f64),
    pub radius: f64,
}

#[derive(Deserialize)]
struct RawBoundary {
    center: (f64, f64),
    radius: f64,
}

impl TryFrom<RawBoundary> for Boundary {
    type Error = Error;

    fn try_from(raw: RawBoundary) -> Result<Self> {
        Boundary::new(raw.center, raw.radius)
    }
}

impl Default for Boundary {
    fn default() -> Self {
        Self {
            center: (0.2, 0.6),
            radius: 0.33,
        }
    }
}

impl Boundary {
    pub fn new(center: (f64, f64), radius: f64) -> Result<Self> {
        if !(center.0.is_finite() && center.1.is_finite()) {
            return invalid("boundary center must be finite");
        }
        if !(radius.is_finite() && radius > 0.0) {
            return invalid(format!("boundary radius must be positive, got {radius}"));
        }
        Ok(Self { center, radius })
    }

    /// Points on the circle count as inside.
    pub fn label(&self, x: &InputVector) -> Label {
        let dx = x.x1 - self.center.0;
        let dy = x.x2 - self.center.1;
        if dx * dx + dy * dy > self.radius * self.radius {
            Label::Yes
        } else {
            Label::No
        }
    }
}

pub fn label_point(b: &Boundary, x: &InputVector) -> Label {
    b.label(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: InputVector,
    pub y: Label,
}

impl LabeledSample {
    pub const fn new(x: InputVector, y: Label) -> Self {
        Self { x, y }
    }
}

/// `n` points uniform on `[0, 1]²`, labeled by `b`.
pub fn generate_dataset(
    n: usize,
    b: &Boundary,
    rng: &mut RandomSource,
) -> Result<Vec<LabeledSample>> {
    if n == 0 {
        return invalid("dataset size must be at least 1");
    }
    Ok((0..n)
        .map(|_| {
            let x1 = rng.uniform();
            let x2 = rng.uniform();
            let x = InputVector::new(x1, x2);
            LabeledSample::new(x, b.label(&x))
        })
        .collect())
}

/// Fraction of `test` whose predicted label matches. Predictions use exact
/// probabilities or shot-sampled estimates depending on `eval_cfg`.
pub fn accuracy(
    params: &ModelParams,
    test: &[LabeledSample],
    eval_cfg: &ShotConfig,
    rng: &mut RandomSource,
) -> Result<f64> {
    if test.is_empty() {
        return invalid("test set must not be empty");
    }
    let mut correct = 0usize;
    for s in test {
        let p = sample_probability_estimate(params.forward(&s.x), eval_cfg, rng)?;
        if params.classify(p) == s.y {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    x1: f64,
    x2: f64,
    label: Label,
}

pub fn write_dataset_csv<W: Write>(samples: &[LabeledSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for s in samples {
        w.write_record([
            format!("{:.17}", s.x.x1),
            format!("{:.17}", s.x.x2),
            s.y.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Vec<LabeledSample>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(parse_error(
            "header",
            format!(
                "expected `x1,x2,label`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for (line, row) in r.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| parse_error(format!("row {}", line + 1), e.to_string()))?;
        for (name, v) in [("x1", row.x1), ("x2", row.x2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(parse_error(
                    format!("row {} {name}", line + 1),
                    format!("coordinate {v} outside [0, 1]"),
                ));
            }
        }
        out.push(LabeledSample::new(
            InputVector::new(row.x1, row.x2),
            row.label,
        ));
    }
    if out.is_empty() {
        return Err(parse_error("rows", "dataset has no samples"));
    }
    Ok(out)
}

pub fn save_dataset(samples: &[LabeledSample], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_dataset_csv(samples, std::io::BufWriter::new(file))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<LabeledSample>> {
    read_dataset_csv(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Encoding;
    use proptest::prelude::*;

    #[test]
    fn label_examples() {
        let b = Boundary::default();
        assert_eq!(b.label(&InputVector::new(0.2, 0.6)), Label::No);
        assert_eq!(b.label(&InputVector::new(0.9, 0.9)), Label::Yes);
        // exactly representable tie: center (0,0), radius 0.5, point (0.5, 0)
        let tie = Boundary::new((0.0, 0.0), 0.5).unwrap();
        assert_eq!(tie.label(&InputVector::new(0.5, 0.0)), Label::No);
        assert_eq!(tie.label(&InputVector::new(0.0, 0.5)), Label::No);
    }

    #[test]
    fn boundary_validation() {
        assert!(Boundary::new((0.2, 0.6), 0.0).is_err());
        assert!(Boundary::new((0.2, 0.6), -1.0).is_err());
        assert!(Boundary::new((f64::NAN, 0.6), 0.3).is_err());
    }

    #[test]
    fn clipped_disc_fraction() {
        let b = Boundary::default();
        let data = generate_dataset(1_000_000, &b, &mut RandomSource::new(1)).unwrap();
        let inside = data.iter().filter(|s| s.y == Label::No).count() as f64 / 1e6;
        assert!((inside - 0.2945).abs() < 0.003, "{inside}");
    }

    #[test]
    fn huge_radius_labels_everything_no() {
        let b = Boundary::new((0.2, 0.6), 10.0).unwrap();
        let data = generate_dataset(500, &b, &mut RandomSource::new(3)).unwrap();
        assert!(data.iter().all(|s| s.y == Label::No));
    }

    #[test]
    fn generation_is_deterministic() {
        let b = Boundary::default();
        let a = generate_dataset(50, &b, &mut RandomSource::new(9)).unwrap();
        let c = generate_dataset(50, &b, &mut RandomSource::new(9)).unwrap();
        assert_eq!(a, c);
        assert!(generate_dataset(0, &b, &mut RandomSource::new(9)).is_err());
    }

    #[test]
    fn constant_model_scores_the_yes_fraction() {
        let b = Boundary::default();
        let test = generate_dataset(100_000, &b, &mut RandomSource::new(4)).unwrap();
        let p = ModelParams::zeros(3, Encoding::Linear).unwrap();
        let acc = accuracy(&p, &test, &ShotConfig::exact(), &mut RandomSource::new(0)).unwrap();
        assert!((acc - 0.7055).abs() < 0.01, "{acc}");
    }

    #[test]
    fn perfect_predictions_score_one() {
        let p = ModelParams::zeros(3, Encoding::Linear).unwrap();
        let test: Vec<LabeledSample> = [(0.1, 0.2), (0.7, 0.4)]
            .iter()
            .map(|&(a, b)| LabeledSample::new(InputVector::new(a, b), Label::Yes))
            .collect();
        let acc = accuracy(&p, &test, &ShotConfig::exact(), &mut RandomSource::new(0)).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn ties_at_threshold_score_the_no_fraction() {
        // one layer at φ = π/2 with x = (1, 0) gives p = 0.5 exactly
        let p = ModelParams::new(
            vec![std::f64::consts::FRAC_PI_2, 0.0],
            1,
            Encoding::Linear,
            0.5,
        )
        .unwrap();
        let x = InputVector::new(1.0, 0.0);
        let pr = p.forward(&x);
        assert!((pr - 0.5).abs() < 1e-15);
        let p = p.with_threshold(pr).unwrap();
        let test = vec![
            LabeledSample::new(x, Label::No),
            LabeledSample::new(x, Label::Yes),
            LabeledSample::new(x, Label::No),
            LabeledSample::new(x, Label::No),
        ];
        let acc = accuracy(&p, &test, &ShotConfig::exact(), &mut RandomSource::new(0)).unwrap();
        assert_eq!(acc, 0.75);
    }

    #[test]
    fn empty_test_set_is_rejected() {
        let p = ModelParams::zeros(3, Encoding::Linear).unwrap();
        assert!(accuracy(&p, &[], &ShotConfig::exact(), &mut RandomSource::new(0)).is_err());
    }

    #[test]
    fn csv_round_trip_and_format() {
        let data = generate_dataset(20, &Boundary::default(), &mut RandomSource::new(2)).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&data, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,label\n"));
        let back = read_dataset_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), data.len());
        for (a, b) in data.iter().zip(&back) {
            assert_eq!(a.y, b.y);
            assert!((a.x.x1 - b.x.x1).abs() < 1e-15);
        }
    }

    #[test]
    fn csv_loader_validates() {
        assert!(read_dataset_csv("a,b,c\n0.1,0.2,yes\n".as_bytes()).is_err());
        assert!(read_dataset_csv("x1,x2,label\n1.5,0.2,yes\n".as_bytes()).is_err());
        assert!(read_dataset_csv("x1,x2,label\n0.5,0.2,maybe\n".as_bytes()).is_err());
        assert!(read_dataset_csv("x1,x2,label\n".as_bytes()).is_err());
        let ok = read_dataset_csv("x1,x2,label\n0.5,0.2,yes\n0,1,no\n".as_bytes()).unwrap();
        assert_eq!(ok[1].y, Label::No);
    }

    proptest! {
        #[test]
        fn relabeling_is_identity(seed in any::<u64>(), cx in 0.0f64..1.0, cy in 0.0f64..1.0, r in 0.01f64..1.0) {
            let b = Boundary::new((cx, cy), r).unwrap();
            let data = generate_dataset(64, &b, &mut RandomSource::new(seed)).unwrap();
            for s in &data {
                prop_assert_eq!(label_point(&b, &s.x), s.y);
                prop_assert!((0.0..=1.0).contains(&s.x.x1) && (0.0..=1.0).contains(&s.x.x2));
            }
        }

        #[test]
        fn flipped_labels_complement_accuracy(seed in any::<u64>(), pseed in any::<u64>()) {
            let data = generate_dataset(200, &Boundary::default(), &mut RandomSource::new(seed)).unwrap();
            let flipped: Vec<LabeledSample> = data.iter().map(|s| LabeledSample::new(s.x, s.y.flipped())).collect();
            let p = ModelParams::random(3, Encoding::Linear, &mut RandomSource::new(pseed)).unwrap();
            prop_assume!(data.iter().all(|s| p.forward(&s.x) != p.threshold()));
            let mut rng = RandomSource::new(0);
            let a = accuracy(&p, &data, &ShotConfig::exact(), &mut rng).unwrap();
            let b = accuracy(&p, &flipped, &ShotConfig::exact(), &mut rng).unwrap();
            prop_assert!((a + b - 1.0).abs() <= 1e-12);
        }
    }
}
