use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::LearnError;

/// Fold index per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub fold: Vec<usize>,
    pub k: usize,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.fold.len()
    }

    pub fn rows_in(&self, k: usize) -> Vec<usize> {
        (0..self.fold.len()).filter(|&i| self.fold[i] == k).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.fold {
            s[f] += 1;
        }
        s
    }
}

/// Assigns `n` rows to `k` folds.
///
/// Rows are shuffled within each stratum and dealt round-robin, with the
/// dealing position carried across strata so overall fold sizes also
/// differ by at most one.
pub fn make_folds(n: usize, k: usize, seed: u64, strata: Option<&[bool]>) -> Result<FoldAssignment, LearnError> {
    if k < 2 || k > n {
        return Err(LearnError::KTooLarge { k, n });
    }
    if let Some(s) = strata {
        if s.len() != n {
            return Err(LearnError::Shape(format!("{} strata labels for {n} rows", s.len())));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = match strata {
        Some(s) => vec![
            (0..n).filter(|&i| s[i]).collect(),
            (0..n).filter(|&i| !s[i]).collect(),
        ],
        None => vec![(0..n).collect()],
    };
    let mut fold = vec![0; n];
    let mut next = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for i in g {
            fold[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment { fold, k })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_rows_two_folds() {
        let f = make_folds(4, 2, 1, None).unwrap();
        assert_eq!(f.sizes(), vec![2, 2]);
    }

    #[test]
    fn same_seed_same_folds() {
        assert_eq!(make_folds(50, 5, 9, None).unwrap(), make_folds(50, 5, 9, None).unwrap());
        assert_ne!(make_folds(50, 5, 9, None).unwrap(), make_folds(50, 5, 10, None).unwrap());
    }

    #[test]
    fn strata_are_split_evenly() {
        let s = [true, true, false, false];
        let f = make_folds(4, 2, 3, Some(&s)).unwrap();
        for k in 0..2 {
            let rows = f.rows_in(k);
            assert_eq!(rows.iter().filter(|&&i| s[i]).count(), 1);
            assert_eq!(rows.len(), 2);
        }
    }

    #[test]
    fn k_must_fit() {
        assert_eq!(make_folds(3, 4, 0, None).unwrap_err(), LearnError::KTooLarge { k: 4, n: 3 });
        assert!(make_folds(3, 1, 0, None).is_err());
    }
}
