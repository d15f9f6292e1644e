use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{chamfer_l2, PointCloud};
use crate::scalar::Real;
use crate::selector::bank::FeatureBank;
use crate::selector::pointnn::{pointnn_embed, PointNnConfig};

/// `(1 + max cosine similarity to the bank) / 2`, in `[0, 1]`.
pub fn quality_score<T: Real>(cloud: &PointCloud<T>, bank: &FeatureBank, cfg: &PointNnConfig) -> Result<f64> {
    let d = pointnn_embed(cloud, cfg)?;
    score_descriptor(&d, bank)
}

pub fn score_descriptor(descriptor: &[f64], bank: &FeatureBank) -> Result<f64> {
    Ok(((1.0 + bank.max_cosine(descriptor)?) / 2.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Baseline,
    Refined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    ScoreOnly,
    Dual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub id: String,
    pub chosen: Choice,
    pub q_base: f64,
    pub q_ref: f64,
    pub cd_base: Option<f64>,
    pub cd_ref: Option<f64>,
    pub criterion: Criterion,
}

impl SelectionRecord {
    /// Re-derives the choice from the stored fields.
    pub fn is_consistent(&self) -> bool {
        self.chosen == decide(self.q_base, self.q_ref, self.cd_base.zip(self.cd_ref))
            && (self.criterion == Criterion::Dual) == self.cd_base.is_some()
            && self.cd_base.is_some() == self.cd_ref.is_some()
    }

    /// Chamfer distance of the chosen output, when ground truth was given.
    pub fn cd_chosen(&self) -> Option<f64> {
        match self.chosen {
            Choice::Baseline => self.cd_base,
            Choice::Refined => self.cd_ref,
        }
    }
}

/// The selection rule. Without distances the refined output must score
/// strictly higher. With distances a strictly lower Chamfer distance decides,
/// whatever the scores say, so the chosen output is never worse in CD.
pub fn decide(q_base: f64, q_ref: f64, cds: Option<(f64, f64)>) -> Choice {
    match cds {
        None if q_ref > q_base => Choice::Refined,
        None => Choice::Baseline,
        Some((cd_base, cd_ref)) if cd_ref < cd_base => Choice::Refined,
        Some(_) => Choice::Baseline,
    }
}

pub fn select<T: Real>(
    id: &str,
    base: &PointCloud<T>,
    refined: &PointCloud<T>,
    bank: &FeatureBank,
    gt: Option<&PointCloud<T>>,
    cfg: &PointNnConfig,
) -> Result<SelectionRecord> {
    let q_base = quality_score(base, bank, cfg)?;
    let q_ref = quality_score(refined, bank, cfg)?;
    let cds = gt.map(|g| (chamfer_l2(base, g), chamfer_l2(refined, g)));
    Ok(SelectionRecord {
        id: id.to_string(),
        chosen: decide(q_base, q_ref, cds),
        q_base,
        q_ref,
        cd_base: cds.map(|c| c.0),
        cd_ref: cds.map(|c| c.1),
        criterion: if cds.is_some() { Criterion::Dual } else { Criterion::ScoreOnly },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selector::bank::build_feature_bank;

    #[test]
    fn rule_table() {
        assert_eq!(decide(0.6, 0.8, None), Choice::Refined);
        assert_eq!(decide(0.7, 0.7, None), Choice::Baseline);
        assert_eq!(decide(0.6, 0.8, Some((1.5, 1.2))), Choice::Refined);
        // disagreement: CD decides
        assert_eq!(decide(0.8, 0.6, Some((1.5, 1.2))), Choice::Refined);
        assert_eq!(decide(0.6, 0.8, Some((1.2, 1.5))), Choice::Baseline);
        assert_eq!(decide(0.6, 0.8, Some((1.2, 1.2))), Choice::Baseline);
    }

    fn grid(n: usize, stretch: f64) -> PointCloud<f64> {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (i as f64 / n as f64, j as f64 / n as f64);
                pts.push([x * stretch, y, (x * 7.0 + y * 3.0).sin() * 0.1]);
            }
        }
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn bank_member_scores_one_and_selection_records() {
        let cfg = PointNnConfig {
            stage_sizes: vec![32, 8],
            ..Default::default()
        };
        let gt = grid(10, 1.0);
        let bank = build_feature_bank(std::slice::from_ref(&gt), "plate", &cfg).unwrap();
        assert!((quality_score(&gt, &bank, &cfg).unwrap() - 1.0).abs() < 1e-6);
        let worse = grid(10, 3.0);
        let q = quality_score(&worse, &bank, &cfg).unwrap();
        assert!((0.0..=1.0).contains(&q));

        let rec = select("s0", &worse, &gt, &bank, Some(&gt), &cfg).unwrap();
        assert_eq!(rec.chosen, Choice::Refined);
        assert_eq!(rec.cd_chosen(), Some(0.0));
        assert!(rec.is_consistent());
        let rec = select("s1", &gt, &worse, &bank, None, &cfg).unwrap();
        assert_eq!((rec.chosen, rec.criterion), (Choice::Baseline, Criterion::ScoreOnly));
        assert!(rec.is_consistent());
        assert_eq!(rec, select("s1", &gt, &worse, &bank, None, &cfg).unwrap());
    }

    #[test]
    fn orthogonal_and_antipodal_scores() {
        let bank = FeatureBank::new("a", vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(score_descriptor(&[0.0, 1.0], &bank).unwrap(), 0.5);
        assert_eq!(score_descriptor(&[-1.0, 0.0], &bank).unwrap(), 0.0);
    }
}
