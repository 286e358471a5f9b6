use std::collections::HashMap;
use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use super::{AutomatonError, Dfa};

/// Exact number of models of a formula at a fixed length.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelCount(BigUint);

impl ModelCount {
    pub fn new(value: BigUint) -> Self {
        ModelCount(value)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// `log2` of the count; `None` for zero.
    pub fn log2(&self) -> Option<f64> {
        if self.0.is_zero() {
            return None;
        }
        let bits = self.0.bits();
        if bits <= 1000 {
            return Some(self.0.to_f64().expect("finite below 2^1000").log2());
        }
        // Keep the top 64 bits to stay within f64 range.
        let shift = bits - 64;
        let top = (&self.0 >> shift).to_f64().expect("fits");
        Some(top.log2() + shift as f64)
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::INFINITY)
    }
}

impl From<u64> for ModelCount {
    fn from(v: u64) -> Self {
        ModelCount(BigUint::from(v))
    }
}

impl fmt::Display for ModelCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Number of accepted strings of exactly `length` characters.
pub fn count_models(dfa: &Dfa, length: usize) -> ModelCount {
    let n = dfa.num_states();
    let k = dfa.alphabet().len();
    let mut cur = vec![BigUint::zero(); n];
    cur[dfa.start() as usize] = BigUint::from(1u8);
    for _ in 0..length {
        let mut next = vec![BigUint::zero(); n];
        for (s, c) in cur.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for a in 0..k {
                next[dfa.step(s as u32, a) as usize] += c;
            }
        }
        cur = next;
    }
    let total = cur
        .into_iter()
        .enumerate()
        .filter(|&(s, _)| dfa.is_accepting(s as u32))
        .map(|(_, c)| c)
        .sum();
    ModelCount(total)
}

/// Number of strings of `length` characters accepted by both automata,
/// counted over reachable state pairs without building the product.
pub fn count_intersection(a: &Dfa, b: &Dfa, length: usize) -> Result<ModelCount, AutomatonError> {
    if a.alphabet() != b.alphabet() {
        return Err(AutomatonError::AlphabetMismatch);
    }
    let k = a.alphabet().len();
    let mut cur: HashMap<(u32, u32), BigUint> = HashMap::new();
    cur.insert((a.start(), b.start()), BigUint::from(1u8));
    for _ in 0..length {
        let mut next: HashMap<(u32, u32), BigUint> = HashMap::with_capacity(cur.len() * 2);
        for (&(p, q), c) in &cur {
            for s in 0..k {
                *next.entry((a.step(p, s), b.step(q, s))).or_default() += c;
            }
        }
        cur = next;
    }
    let total = cur
        .into_iter()
        .filter(|&((p, q), _)| a.is_accepting(p) && b.is_accepting(q))
        .map(|(_, c)| c)
        .sum();
    Ok(ModelCount(total))
}

pub fn is_empty(dfa: &Dfa, length: usize) -> bool {
    count_models(dfa, length).is_zero()
}

/// Precomputed completion counts for repeated uniform sampling.
#[derive(Debug, Clone)]
pub struct ModelSampler {
    dfa: Dfa,
    length: usize,
    // completions[t][s]: accepted strings of length `length - t` read from `s`.
    completions: Vec<Vec<BigUint>>,
}

impl ModelSampler {
    pub fn new(dfa: Dfa, length: usize) -> Self {
        let n = dfa.num_states();
        let k = dfa.alphabet().len();
        let mut completions = vec![Vec::new(); length + 1];
        completions[length] = (0..n)
            .map(|s| BigUint::from(dfa.is_accepting(s as u32) as u8))
            .collect();
        for t in (0..length).rev() {
            let after = &completions[t + 1];
            let row = (0..n)
                .map(|s| (0..k).map(|a| &after[dfa.step(s as u32, a) as usize]).sum())
                .collect();
            completions[t] = row;
        }
        ModelSampler {
            dfa,
            length,
            completions,
        }
    }

    pub fn count(&self) -> ModelCount {
        ModelCount(self.completions[0][self.dfa.start() as usize].clone())
    }

    pub fn dfa(&self) -> &Dfa {
        &self.dfa
    }

    /// The `index`-th accepted string in alphabet-lexicographic order.
    pub fn unrank(&self, index: &BigUint) -> Option<String> {
        let mut r = index.clone();
        if r >= self.completions[0][self.dfa.start() as usize] {
            return None;
        }
        let mut s = self.dfa.start();
        let mut out = String::with_capacity(self.length);
        for t in 0..self.length {
            let after = &self.completions[t + 1];
            for (a, &c) in self.dfa.alphabet().iter().enumerate() {
                let next = self.dfa.step(s, a);
                let w = &after[next as usize];
                if r < *w {
                    out.push(c);
                    s = next;
                    break;
                }
                r -= w;
            }
        }
        Some(out)
    }

    /// Uniformly random accepted string.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<String, AutomatonError> {
        let total = &self.completions[0][self.dfa.start() as usize];
        if total.is_zero() {
            return Err(AutomatonError::EmptyLanguage {
                length: self.length,
            });
        }
        let index = rng.gen_biguint_below(total);
        Ok(self.unrank(&index).expect("index below total"))
    }
}

pub fn sample_uniform<R: Rng + ?Sized>(
    dfa: &Dfa,
    length: usize,
    rng: &mut R,
) -> Result<String, AutomatonError> {
    ModelSampler::new(dfa.clone(), length).sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::compile;
    use crate::constraint::{parse_formula, Formula, StringDomain};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn count_src(src: &str, d: &StringDomain) -> ModelCount {
        count_models(&compile(&parse_formula(src, d).unwrap(), d).unwrap(), 4)
    }

    #[test]
    fn counts_over_pin_domain() {
        let d = StringDomain::digits(4);
        assert_eq!(count_src("(true)", &d), ModelCount::from(10_000));
        assert_eq!(count_src("(false)", &d), ModelCount::from(0));
        assert_eq!(
            count_src(r#"(= (charat h 0) "1")"#, &d),
            ModelCount::from(1000)
        );
        assert_eq!(
            count_src(
                r#"(and (= (charat h 0) "1") (not (= (charat h 1) "0")))"#,
                &d
            ),
            ModelCount::from(900)
        );
    }

    #[test]
    fn intersection_count_matches_product() {
        let d = StringDomain::digits(4);
        let a = compile(&parse_formula(r#"(= (charat h 0) "1")"#, &d).unwrap(), &d).unwrap();
        let b = compile(
            &parse_formula(r#"(not (= (charat h 3) "9"))"#, &d).unwrap(),
            &d,
        )
        .unwrap();
        let direct = count_intersection(&a, &b, 4).unwrap();
        assert_eq!(direct, ModelCount::from(900));
        assert_eq!(direct, count_models(&a.intersect(&b).unwrap(), 4));
    }

    #[test]
    fn log2_of_counts() {
        assert_eq!(ModelCount::from(8).log2(), Some(3.0));
        assert_eq!(ModelCount::from(1).log2(), Some(0.0));
        assert_eq!(ModelCount::from(0).log2(), None);
        let huge = ModelCount::new(BigUint::from(1u8) << 2000u32);
        assert!((huge.log2().unwrap() - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn unrank_enumerates_in_order() {
        let d = StringDomain::new("ab".chars(), 2, 2).unwrap();
        let f = parse_formula(r#"(not (= h "ab"))"#, &d).unwrap();
        let sampler = ModelSampler::new(compile(&f, &d).unwrap(), 2);
        let all: Vec<String> = (0u32..3)
            .map(|i| sampler.unrank(&i.into()).unwrap())
            .collect();
        assert_eq!(all, ["aa", "ba", "bb"]);
        assert_eq!(sampler.unrank(&3u32.into()), None);
    }

    #[test]
    fn samples_satisfy_and_singletons_are_forced() {
        let d = StringDomain::digits(4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dfa = compile(&parse_formula(r#"(= (charat h 0) "1")"#, &d).unwrap(), &d).unwrap();
        for _ in 0..200 {
            assert!(sample_uniform(&dfa, 4, &mut rng).unwrap().starts_with('1'));
        }
        let one = compile(&parse_formula(r#"(= h "1337")"#, &d).unwrap(), &d).unwrap();
        assert_eq!(sample_uniform(&one, 4, &mut rng).unwrap(), "1337");
        let none = compile(&Formula::False, &d).unwrap();
        assert_eq!(
            sample_uniform(&none, 4, &mut rng),
            Err(AutomatonError::EmptyLanguage { length: 4 })
        );
    }
}
