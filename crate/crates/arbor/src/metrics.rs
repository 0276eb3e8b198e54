//! Evaluation of trained trees: confusion matrix, per-class and
//! aggregate accuracies, and group-conditional prediction rates.

use crate::dataset::BinaryDataset;
use crate::tree::TrainedTree;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub n_rows: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// confusion[actual][predicted]
    pub confusion: Vec<Vec<usize>>,
    /// Per-class accuracy; empty classes hold NaN.
    pub per_class_accuracy: Vec<f64>,
    /// Mean per-class accuracy over nonempty classes.
    pub balanced_accuracy: f64,
    /// Minimum per-class accuracy over nonempty classes.
    pub worst_case_accuracy: f64,
    pub class_names: Vec<String>,
}

/// Positive-prediction and error rates of one protected group
/// (binary classification, class 1 positive).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRates {
    pub group: String,
    pub size: usize,
    /// P(predict positive | group)
    pub positive_rate: f64,
    /// P(predict positive | group, actually positive)
    pub true_positive_rate: f64,
    /// P(predict positive | group, actually negative)
    pub false_positive_rate: f64,
}

/// Run a tree over a dataset and aggregate its classification quality.
pub fn evaluate(tree: &TrainedTree, data: &BinaryDataset) -> Evaluation {
    let n_classes = data.n_classes();
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (x, &y) in data.features.iter().zip(&data.labels) {
        let predicted = tree.predict(x);
        confusion[y][predicted] += 1;
    }
    let correct: usize = (0..n_classes).map(|k| confusion[k][k]).sum();
    let per_class_accuracy: Vec<f64> = (0..n_classes)
        .map(|k| {
            let total: usize = confusion[k].iter().sum();
            confusion[k][k] as f64 / total as f64
        })
        .collect();
    let populated: Vec<f64> = per_class_accuracy.iter().copied().filter(|a| a.is_finite()).collect();
    let balanced_accuracy = populated.iter().sum::<f64>() / populated.len() as f64;
    let worst_case_accuracy = populated.iter().copied().fold(f64::INFINITY, f64::min);
    Evaluation {
        n_rows: data.n_rows(),
        correct,
        accuracy: correct as f64 / data.n_rows() as f64,
        confusion,
        per_class_accuracy,
        balanced_accuracy,
        worst_case_accuracy,
        class_names: data.class_names.clone(),
    }
}

/// Number of training rows a tree classifies correctly.
pub fn count_correct(tree: &TrainedTree, data: &BinaryDataset) -> usize {
    data.features
        .iter()
        .zip(&data.labels)
        .filter(|(x, &y)| tree.predict(x) == y)
        .count()
}

/// Group-conditional rates for a protected attribute; `groups` holds
/// one group index per row and `names` the printable group labels.
pub fn group_rates(
    tree: &TrainedTree,
    data: &BinaryDataset,
    groups: &[usize],
    names: &[String],
) -> Vec<GroupRates> {
    let n_groups = names.len();
    let mut out = Vec::with_capacity(n_groups);
    for g in 0..n_groups {
        let rows: Vec<usize> = (0..data.n_rows()).filter(|&i| groups[i] == g).collect();
        let predicted_positive = |subset: &[usize]| -> usize {
            subset
                .iter()
                .filter(|&&i| tree.predict(&data.features[i]) == 1)
                .count()
        };
        let positives: Vec<usize> = rows.iter().copied().filter(|&i| data.labels[i] == 1).collect();
        let negatives: Vec<usize> = rows.iter().copied().filter(|&i| data.labels[i] == 0).collect();
        out.push(GroupRates {
            group: names[g].clone(),
            size: rows.len(),
            positive_rate: predicted_positive(&rows) as f64 / rows.len() as f64,
            true_positive_rate: predicted_positive(&positives) as f64 / positives.len() as f64,
            false_positive_rate: predicted_positive(&negatives) as f64 / negatives.len() as f64,
        });
    }
    out
}

impl Evaluation {
    /// Multi-line human-readable report.
    pub fn report(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "rows={} correct={} accuracy={:.4}\n",
            self.n_rows, self.correct, self.accuracy
        ));
        out.push_str(&format!(
            "balanced_accuracy={:.4} worst_case_accuracy={:.4}\n",
            self.balanced_accuracy, self.worst_case_accuracy
        ));
        for (k, name) in self.class_names.iter().enumerate() {
            out.push_str(&format!(
                "class {name}: accuracy={:.4} row={:?}\n",
                self.per_class_accuracy[k], self.confusion[k]
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{TrainStats, TreeNode, TREE_SCHEMA_VERSION};

    fn stump() -> TrainedTree {
        TrainedTree {
            schema_version: TREE_SCHEMA_VERSION,
            depth: 1,
            nodes: vec![
                TreeNode { id: 1, leaf: false, feature: Some(0), class: None },
                TreeNode { id: 2, leaf: true, feature: None, class: Some(0) },
                TreeNode { id: 3, leaf: true, feature: None, class: Some(1) },
            ],
            feature_names: vec!["f0".into()],
            class_names: vec!["c0".into(), "c1".into()],
            encoding: Vec::new(),
            stats: TrainStats::default(),
        }
    }

    #[test]
    fn perfect_split_scores_one() {
        let data = BinaryDataset::from_rows(
            vec![vec![0], vec![0], vec![1], vec![1]],
            vec![0, 0, 1, 1],
            2,
        );
        let eval = evaluate(&stump(), &data);
        assert_eq!(eval.correct, 4);
        assert_eq!(eval.accuracy, 1.0);
        assert_eq!(eval.balanced_accuracy, 1.0);
        assert_eq!(eval.worst_case_accuracy, 1.0);
        assert_eq!(eval.confusion, vec![vec![2, 0], vec![0, 2]]);
    }

    #[test]
    fn majority_stump_on_skewed_data() {
        // all rows look identical, tree routes them to class 1
        let data = BinaryDataset::from_rows(vec![vec![1]; 10], {
            let mut labels = vec![1usize; 9];
            labels.push(0);
            labels
        }, 2);
        let eval = evaluate(&stump(), &data);
        assert_eq!(eval.correct, 9);
        assert!((eval.balanced_accuracy - 0.5).abs() < 1e-12);
        assert_eq!(eval.worst_case_accuracy, 0.0);
    }

    #[test]
    fn worst_case_never_exceeds_balanced_nor_best() {
        let data = BinaryDataset::from_rows(
            vec![vec![0], vec![1], vec![0], vec![1], vec![1]],
            vec![0, 1, 1, 0, 1],
            2,
        );
        let eval = evaluate(&stump(), &data);
        let best = eval
            .per_class_accuracy
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(eval.worst_case_accuracy <= eval.balanced_accuracy + 1e-12);
        assert!(eval.balanced_accuracy <= best + 1e-12);
    }

    #[test]
    fn group_rates_match_hand_counts() {
        let data = BinaryDataset::from_rows(
            vec![vec![0], vec![0], vec![1], vec![1]],
            vec![0, 1, 0, 1],
            2,
        );
        let groups = vec![0, 0, 1, 1];
        let names = vec!["a".to_string(), "b".to_string()];
        let rates = group_rates(&stump(), &data, &groups, &names);
        assert_eq!(rates[0].positive_rate, 0.0);
        assert_eq!(rates[1].positive_rate, 1.0);
        assert_eq!(rates[1].true_positive_rate, 1.0);
        assert_eq!(rates[1].false_positive_rate, 1.0);
    }
}
