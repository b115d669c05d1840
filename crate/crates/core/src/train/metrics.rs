#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    /// Mean of per-class accuracies over classes with at least one sample.
    pub class_accuracy: f64,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
}

impl Metrics {
    pub fn from_predictions(truth: &[usize], predicted: &[usize], n_classes: usize) -> Self {
        assert_eq!(truth.len(), predicted.len(), "one prediction per sample");
        let mut confusion = vec![vec![0; n_classes]; n_classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        Self::from_confusion(confusion)
    }

    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Self {
        let total: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..confusion.len()).map(|i| confusion[i][i]).sum();
        let per_class: Vec<f64> = confusion
            .iter()
            .enumerate()
            .filter_map(|(i, row)| {
                let n: usize = row.iter().sum();
                (n > 0).then(|| row[i] as f64 / n as f64)
            })
            .collect();
        let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
        Self {
            accuracy: ratio(correct as f64, total as f64),
            class_accuracy: ratio(per_class.iter().sum(), per_class.len() as f64),
            confusion,
        }
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

/// Predicts the most frequent training class (lowest index on ties) for
/// every test object.
pub fn majority_class_baseline(train_labels: &[usize], test_labels: &[usize], n_classes: usize) -> Metrics {
    let mut counts = vec![0usize; n_classes];
    for &l in train_labels {
        counts[l] += 1;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    Metrics::from_predictions(test_labels, &vec![best; test_labels.len()], n_classes)
}
