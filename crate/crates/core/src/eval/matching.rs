/// Fate of one detection after matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Matched the counted ground truth with this index.
    TruePositive(usize),
    FalsePositive,
    /// Explained by an ignored object or a DontCare region; scores nothing.
    Discarded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Indexed like the input detections.
    pub outcomes: Vec<Outcome>,
    /// Detection indices by descending score, lower index first on ties.
    pub order: Vec<usize>,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.outcomes.iter().filter(|o| matches!(o, Outcome::TruePositive(_))).count()
    }

    pub fn false_positives(&self) -> usize {
        self.outcomes.iter().filter(|o| **o == Outcome::FalsePositive).count()
    }

    pub fn discarded(&self) -> usize {
        self.outcomes.iter().filter(|o| **o == Outcome::Discarded).count()
    }

    /// Precision/recall after each scoring detection, in score order.
    pub fn pr_points(&self, num_gt: usize) -> Vec<PrPoint> {
        pr_curve(self.order.iter().map(|&d| self.outcomes[d]), num_gt)
    }
}

/// One point of a precision/recall curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Builds the curve from outcomes already in descending score order;
/// discarded detections are skipped.
pub fn pr_curve<I: IntoIterator<Item = Outcome>>(ordered: I, num_gt: usize) -> Vec<PrPoint> {
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut points = Vec::new();
    for o in ordered {
        match o {
            Outcome::TruePositive(_) => tp += 1,
            Outcome::FalsePositive => fp += 1,
            Outcome::Discarded => continue,
        }
        let recall = if num_gt == 0 { 0.0 } else { tp as f64 / num_gt as f64 };
        points.push(PrPoint { recall, precision: tp as f64 / (tp + fp) as f64 });
    }
    points
}

/// Greedy matching in descending score order.
///
/// A detection becomes a true positive on the unmatched counted ground truth
/// with the highest overlap (lower index on ties) if that overlap reaches
/// `threshold`. Otherwise it is discarded when it overlaps any ignored object
/// by at least `threshold`, and is a false positive if not. Ignored objects
/// may absorb any number of detections.
///
/// `overlap(det, gt)` takes indices into the caller's detection and
/// annotation lists; `counted` and `ignored` hold annotation indices.
pub fn match_detections<F>(scores: &[f64], counted: &[usize], ignored: &[usize], overlap: F, threshold: f64) -> MatchResult
where
    F: Fn(usize, usize) -> f64,
{
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut taken = vec![false; counted.len()];
    let mut outcomes = vec![Outcome::FalsePositive; scores.len()];
    for &d in &order {
        let mut best: Option<(usize, f64)> = None;
        for (slot, &g) in counted.iter().enumerate() {
            if taken[slot] {
                continue;
            }
            let iou = overlap(d, g);
            if iou >= threshold && best.map_or(true, |(_, b)| iou > b) {
                best = Some((slot, iou));
            }
        }
        outcomes[d] = if let Some((slot, _)) = best {
            taken[slot] = true;
            Outcome::TruePositive(counted[slot])
        } else if ignored.iter().any(|&g| overlap(d, g) >= threshold) {
            Outcome::Discarded
        } else {
            Outcome::FalsePositive
        };
    }
    MatchResult { outcomes, order }
}
