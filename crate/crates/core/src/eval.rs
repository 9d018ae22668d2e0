//! Structure-recovery and parameter-accuracy metrics against ground truth.

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::infer::InferredNetwork;

/// Edge-recovery counts and rates, plus the percentage parameter error on
/// the correctly predicted edges when defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `100 * sum |p_hat - p| / sum p` over true positives; None when there
    /// are no true positives.
    pub parameter_error_percent: Option<f64>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

fn check_node_sets(truth: &Network, inferred: &InferredNetwork) -> Result<()> {
    if truth.node_count() != inferred.node_count() {
        return Err(Error::parameter(format!(
            "node sets differ: truth has {}, inferred has {}",
            truth.node_count(),
            inferred.node_count()
        )));
    }
    Ok(())
}

/// Precision, recall and F1 of the predicted edge set
/// `{(j, i) : p_hat_ji >= threshold}` against the true support
/// `{(j, i) : p_ji > 0}`.
///
/// Conventions for empty sets: recall is 1 when there are no true edges;
/// precision is 1 when nothing is predicted and nothing is true, 0 when
/// nothing is predicted against a nonempty truth is vacuous (no false
/// positives), so it is also 1 there; F1 is 0 when precision + recall is 0.
pub fn structure_metrics(
    truth: &Network,
    inferred: &InferredNetwork,
    threshold: f64,
) -> Result<Metrics> {
    check_node_sets(truth, inferred)?;
    let n = truth.node_count();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for src in 0..n {
        for dst in 0..n {
            let true_edge = truth.edge_probability(src, dst).unwrap_or(0.0) > 0.0;
            let predicted = inferred.probability(src, dst) >= threshold;
            match (true_edge, predicted) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let precision = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        1.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        precision,
        recall,
        f1,
        parameter_error_percent: None,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
    })
}

/// The correctly predicted edges: true edges whose estimate meets the
/// threshold.
pub fn true_positive_edges(
    truth: &Network,
    inferred: &InferredNetwork,
    threshold: f64,
) -> Result<Vec<(usize, usize)>> {
    check_node_sets(truth, inferred)?;
    Ok(truth
        .edges()
        .filter(|&(src, dst, p)| p > 0.0 && inferred.probability(src, dst) >= threshold)
        .map(|(src, dst, _)| (src, dst))
        .collect())
}

/// Percentage error in the estimated activation parameters over an edge set:
/// `100 * sum |p_hat - p| / sum p`.
pub fn parameter_error(
    truth: &Network,
    inferred: &InferredNetwork,
    edges: &[(usize, usize)],
) -> Result<f64> {
    check_node_sets(truth, inferred)?;
    if edges.is_empty() {
        return Err(Error::parameter(
            "parameter error is undefined for an empty edge set",
        ));
    }
    let n = truth.node_count();
    let mut abs_diff = 0.0;
    let mut total_true = 0.0;
    for &(src, dst) in edges {
        if src >= n || dst >= n {
            return Err(Error::parameter(format!(
                "edge ({src}, {dst}) outside 0..{n}"
            )));
        }
        let p_true = truth.edge_probability(src, dst).unwrap_or(0.0);
        abs_diff += (inferred.probability(src, dst) - p_true).abs();
        total_true += p_true;
    }
    if total_true <= 0.0 {
        return Err(Error::parameter(
            "parameter error is undefined when the true probabilities sum to zero",
        ));
    }
    Ok(100.0 * abs_diff / total_true)
}

/// Structure metrics with the parameter error filled in when the
/// true-positive set is nonempty.
pub fn evaluate(truth: &Network, inferred: &InferredNetwork, threshold: f64) -> Result<Metrics> {
    let mut metrics = structure_metrics(truth, inferred, threshold)?;
    let tp_edges = true_positive_edges(truth, inferred, threshold)?;
    if !tp_edges.is_empty() {
        metrics.parameter_error_percent = Some(parameter_error(truth, inferred, &tp_edges)?);
    }
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth_net() -> Network {
        Network::new(
            vec![1; 4],
            vec![(0, 1, 0.3), (1, 2, 0.2), (2, 3, 0.1), (3, 0, 0.4)],
            false,
        )
        .unwrap()
    }

    fn inferred_from(edges: &[(usize, usize, f64)]) -> InferredNetwork {
        let net = Network::new(vec![1; 4], edges.to_vec(), false).unwrap();
        InferredNetwork::from_network(&net)
    }

    #[test]
    fn perfect_recovery() {
        let truth = truth_net();
        let inferred = InferredNetwork::from_network(&truth);
        let m = structure_metrics(&truth, &inferred, 1e-4).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        let e = parameter_error(
            &truth,
            &inferred,
            &true_positive_edges(&truth, &inferred, 1e-4).unwrap(),
        )
        .unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn one_spurious_edge() {
        let truth = truth_net();
        let inferred = inferred_from(&[
            (0, 1, 0.3),
            (1, 2, 0.2),
            (2, 3, 0.1),
            (3, 0, 0.4),
            (0, 2, 0.05),
        ]);
        let m = structure_metrics(&truth, &inferred, 1e-4).unwrap();
        assert!((m.precision - 0.8).abs() < 1e-12);
        assert_eq!(m.recall, 1.0);
        assert!((m.f1 - 2.0 * 0.8 / 1.8).abs() < 1e-12);
    }

    #[test]
    fn empty_prediction_against_truth() {
        let truth = truth_net();
        let inferred = InferredNetwork::empty(4);
        let m = structure_metrics(&truth, &inferred, 1e-4).unwrap();
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.true_positives, 0);
        assert!(evaluate(&truth, &inferred, 1e-4)
            .unwrap()
            .parameter_error_percent
            .is_none());
    }

    #[test]
    fn single_edge_two_percent_error() {
        let truth = Network::new(vec![1, 1], vec![(0, 1, 0.01)], false).unwrap();
        let inferred = inferred_from_small(0.0102);
        let e = parameter_error(&truth, &inferred, &[(0, 1)]).unwrap();
        assert!((e - 2.0).abs() < 1e-9, "{e}");
    }

    fn inferred_from_small(p: f64) -> InferredNetwork {
        let net = Network::new(vec![1, 1], vec![(0, 1, p)], false).unwrap();
        InferredNetwork::from_network(&net)
    }

    #[test]
    fn empty_edge_set_is_an_error() {
        let truth = truth_net();
        let inferred = InferredNetwork::from_network(&truth);
        assert!(parameter_error(&truth, &inferred, &[]).is_err());
    }

    #[test]
    fn node_set_mismatch_is_an_error() {
        let truth = truth_net();
        let inferred = InferredNetwork::empty(3);
        assert!(structure_metrics(&truth, &inferred, 1e-4).is_err());
    }

    #[test]
    fn scale_consistency() {
        let truth = Network::new(vec![1, 1, 1], vec![(0, 1, 0.02), (1, 2, 0.005)], false).unwrap();
        let inferred = inferred_from_pair(0.021, 0.0045);
        let e1 = parameter_error(&truth, &inferred, &[(0, 1), (1, 2)]).unwrap();

        let scaled_truth =
            Network::new(vec![1, 1, 1], vec![(0, 1, 0.2), (1, 2, 0.05)], false).unwrap();
        let scaled_inferred = inferred_from_pair(0.21, 0.045);
        let e2 = parameter_error(&scaled_truth, &scaled_inferred, &[(0, 1), (1, 2)]).unwrap();
        assert!((e1 - e2).abs() < 1e-9, "{e1} vs {e2}");
    }

    fn inferred_from_pair(p01: f64, p12: f64) -> InferredNetwork {
        let net = Network::new(vec![1, 1, 1], vec![(0, 1, p01), (1, 2, p12)], false).unwrap();
        InferredNetwork::from_network(&net)
    }
}
