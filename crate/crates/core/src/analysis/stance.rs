use crate::hin::EntityId;
use crate::ingest::NUM_CLASSES;
use crate::numkit::Matrix;

/// Governor labels indexed by the argmax of the liberal distribution.
pub const GOVERNOR_LABELS: [&str; NUM_CLASSES] = [
    "very conservative",
    "lean conservative",
    "neutral",
    "lean liberal",
    "very liberal",
];

/// Expected class index, `sum_i i * p_i`.
pub fn continuous_stance(dist: &[f64]) -> f64 {
    dist.iter().enumerate().map(|(i, p)| i as f64 * p).sum()
}

/// Ties go to the lower (more conservative) index.
pub fn governor_label(liberal_dist: &[f64]) -> &'static str {
    let best = (0..liberal_dist.len().min(NUM_CLASSES)).fold(0, |b, i| {
        if liberal_dist[i] > liberal_dist[b] {
            i
        } else {
            b
        }
    });
    GOVERNOR_LABELS[best]
}

#[derive(Debug, Clone, PartialEq)]
pub struct StanceScore {
    pub entity: EntityId,
    pub liberal: [f64; NUM_CLASSES],
    pub conservative: [f64; NUM_CLASSES],
    pub liberal_continuous: f64,
    pub conservative_continuous: f64,
}

/// Stance read-out for the listed rows of the head outputs.
pub fn stance_scores(l: &Matrix, c: &Matrix, entities: &[EntityId]) -> Vec<StanceScore> {
    entities
        .iter()
        .map(|&e| {
            let liberal: [f64; NUM_CLASSES] = l.row(e).try_into().expect("five classes");
            let conservative: [f64; NUM_CLASSES] = c.row(e).try_into().expect("five classes");
            StanceScore {
                entity: e,
                liberal,
                conservative,
                liberal_continuous: continuous_stance(&liberal),
                conservative_continuous: continuous_stance(&conservative),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(continuous_stance(&[0.0, 0.0, 0.0, 0.0, 1.0]), 4.0);
        assert!((continuous_stance(&[0.2; 5]) - 2.0).abs() < 1e-15);
        assert_eq!(continuous_stance(&[1.0, 0.0, 0.0, 0.0, 0.0]), 0.0);
        assert_eq!(
            governor_label(&[0.6, 0.1, 0.1, 0.1, 0.1]),
            "very conservative"
        );
        assert_eq!(governor_label(&[0.1, 0.1, 0.1, 0.1, 0.6]), "very liberal");
        assert_eq!(governor_label(&[0.1, 0.1, 0.6, 0.1, 0.1]), "neutral");
        assert_eq!(
            governor_label(&[0.1, 0.4, 0.1, 0.4, 0.0]),
            "lean conservative"
        );
    }

    #[test]
    fn scores_from_heads() {
        let l = Matrix::from_rows(&[[0.2; 5], [0.0, 0.0, 0.0, 0.0, 1.0]]).unwrap();
        let s = stance_scores(&l, &l, &[1]);
        assert_eq!(s[0].entity, 1);
        assert_eq!(s[0].liberal_continuous, 4.0);
    }

    proptest! {
        #[test]
        fn mass_shift_up_is_monotone(raw in proptest::array::uniform5(0.01f64..1.0), from in 0usize..4, frac in 0.0f64..1.0) {
            let total: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let mut q = p.clone();
            let moved = p[from] * frac;
            q[from] -= moved;
            q[from + 1] += moved;
            let (a, b) = (continuous_stance(&p), continuous_stance(&q));
            prop_assert!(b >= a - 1e-12);
            prop_assert!((0.0..=4.0 + 1e-12).contains(&a));
        }
    }
}
