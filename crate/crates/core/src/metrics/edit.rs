/// One step of an alignment from ground truth to prediction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlignOp<S> {
    Match(S),
    Substitute { gt: S, pred: S },
    Delete(S),
    Insert(S),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EditOps<S> {
    pub distance: usize,
    pub alignment: Vec<AlignOp<S>>,
}

impl<S: Clone> EditOps<S> {
    /// Rebuilds the prediction by applying the alignment to the ground truth.
    pub fn replay(&self) -> Vec<S> {
        self.alignment
            .iter()
            .filter_map(|op| match op {
                AlignOp::Match(s) | AlignOp::Insert(s) => Some(s.clone()),
                AlignOp::Substitute { pred, .. } => Some(pred.clone()),
                AlignOp::Delete(_) => None,
            })
            .collect()
    }

    /// The ground-truth side of the alignment.
    pub fn ground_truth(&self) -> Vec<S> {
        self.alignment
            .iter()
            .filter_map(|op| match op {
                AlignOp::Match(s) | AlignOp::Delete(s) => Some(s.clone()),
                AlignOp::Substitute { gt, .. } => Some(gt.clone()),
                AlignOp::Insert(_) => None,
            })
            .collect()
    }
}

/// Levenshtein distance with a full alignment. On equal cost the backtrace
/// prefers match/substitute, then delete, then insert.
pub fn edit_distance<S: PartialEq + Clone>(gt: &[S], pred: &[S]) -> EditOps<S> {
    let (n, m) = (gt.len(), pred.len());
    let w = m + 1;
    let mut dp = vec![0usize; (n + 1) * w];
    for j in 0..=m {
        dp[j] = j;
    }
    for i in 1..=n {
        dp[i * w] = i;
        for j in 1..=m {
            let sub = dp[(i - 1) * w + j - 1] + usize::from(gt[i - 1] != pred[j - 1]);
            let del = dp[(i - 1) * w + j] + 1;
            let ins = dp[i * w + j - 1] + 1;
            dp[i * w + j] = sub.min(del).min(ins);
        }
    }

    let mut alignment = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i * w + j];
        if i > 0 && j > 0 {
            let same = gt[i - 1] == pred[j - 1];
            if dp[(i - 1) * w + j - 1] + usize::from(!same) == here {
                alignment.push(if same {
                    AlignOp::Match(gt[i - 1].clone())
                } else {
                    AlignOp::Substitute {
                        gt: gt[i - 1].clone(),
                        pred: pred[j - 1].clone(),
                    }
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[(i - 1) * w + j] + 1 == here {
            alignment.push(AlignOp::Delete(gt[i - 1].clone()));
            i -= 1;
        } else {
            alignment.push(AlignOp::Insert(pred[j - 1].clone()));
            j -= 1;
        }
    }
    alignment.reverse();
    EditOps {
        distance: dp[n * w + m],
        alignment,
    }
}
