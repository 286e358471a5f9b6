use std::collections::{BTreeSet, HashMap};

use super::{AutomatonError, Dfa};

impl Dfa {
    /// Existential projection onto some positions: accepts the words `w` of
    /// length `keep.len()` for which an accepted word `u` of length `length`
    /// has `u[keep[j]] == w[j]` for every `j`. `keep` must be strictly increasing.
    pub fn project_positions(&self, length: usize, keep: &[usize]) -> Result<Dfa, AutomatonError> {
        if keep.windows(2).any(|w| w[0] >= w[1]) || keep.last().is_some_and(|&p| p >= length) {
            return Err(AutomatonError::Malformed(format!(
                "projection positions {keep:?} must increase and stay below {length}"
            )));
        }
        let k = self.alphabet().len();
        let m = keep.len();
        // Advances a state set over the dropped positions `from..to`.
        let skip = |set: BTreeSet<u32>, from: usize, to: usize| {
            let mut set = set;
            for _ in from..to {
                set = set
                    .iter()
                    .flat_map(|&s| (0..k).map(move |a| self.step(s, a)))
                    .collect();
            }
            set
        };
        let first_stop = keep.first().copied().unwrap_or(length);
        let init = skip(BTreeSet::from([self.start()]), 0, first_stop);

        // State 0 is dead; layered subsets are numbered as discovered.
        let mut ids: HashMap<(usize, BTreeSet<u32>), u32> = HashMap::new();
        let mut layers: Vec<(usize, BTreeSet<u32>)> = vec![(usize::MAX, BTreeSet::new())];
        let mut intern = |key: (usize, BTreeSet<u32>), layers: &mut Vec<(usize, BTreeSet<u32>)>| {
            if key.1.is_empty() {
                return 0;
            }
            *ids.entry(key.clone()).or_insert_with(|| {
                layers.push(key);
                layers.len() as u32 - 1
            })
        };
        let start = intern((0, init), &mut layers);
        let mut trans: Vec<u32> = Vec::new();
        let mut accepting = Vec::new();
        let mut i = 0;
        while i < layers.len() {
            let (j, set) = layers[i].clone();
            accepting.push(j == m && set.iter().any(|&s| self.is_accepting(s)));
            for a in 0..k {
                let t = if j >= m {
                    0
                } else {
                    let stepped: BTreeSet<u32> = set.iter().map(|&s| self.step(s, a)).collect();
                    let to = keep.get(j + 1).copied().unwrap_or(length);
                    let next = skip(stepped, keep[j] + 1, to);
                    intern((j + 1, next), &mut layers)
                };
                trans.push(t);
            }
            i += 1;
        }
        Ok(Dfa::from_parts(self.alphabet().to_vec(), start, accepting, trans)?.minimize())
    }
}
