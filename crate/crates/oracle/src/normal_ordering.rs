//! Fock-space matrices of ladder-operator words, built by multiplying padded
//! truncated matrices so that truncation never reaches the retained block.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// A ladder operator letter acting on one mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    /// Annihilation `a_mode`.
    Lower(usize),
    /// Creation `a†_mode`.
    Raise(usize),
}

/// Linear combination of operator words; each word is applied right to left
/// as written, i.e. `[Lower(0), Raise(0)]` is `a a†`.
#[derive(Clone, Debug, Default)]
pub struct OperatorPolynomial {
    pub words: Vec<(Complex64, Vec<Ladder>)>,
}

impl OperatorPolynomial {
    pub fn push(&mut self, coeff: Complex64, word: Vec<Ladder>) {
        self.words.push((coeff, word));
    }

    /// Anti-normally ordered operator of a symbol given as
    /// `(powers_alpha, powers_alpha_star, coeff)` terms: `α^p α*^q ↦ a^p a†^q`.
    pub fn anti_normal_from_symbol(terms: &[(Vec<u32>, Vec<u32>, Complex64)]) -> Self {
        let mut out = Self::default();
        for (pa, pb, c) in terms {
            let mut word = Vec::new();
            for (mode, &p) in pa.iter().enumerate() {
                word.extend(std::iter::repeat_n(Ladder::Lower(mode), p as usize));
            }
            for (mode, &q) in pb.iter().enumerate() {
                word.extend(std::iter::repeat_n(Ladder::Raise(mode), q as usize));
            }
            out.push(*c, word);
        }
        out
    }

    fn max_word_len(&self) -> usize {
        self.words.iter().map(|(_, w)| w.len()).max().unwrap_or(0)
    }
}

fn single_mode_lower(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 })
}

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// Matrix of `op` in the number basis with `cutoff` quanta per mode
/// (`cutoff + 1` levels each, mode 0 most significant).
pub fn oracle_normal_ordering(op: &OperatorPolynomial, num_modes: usize, cutoff: usize) -> DMatrix<Complex64> {
    // Padding by the word length keeps every intermediate state that can
    // return to the retained block.
    let pad = op.max_word_len();
    let big = cutoff + 1 + pad;
    let lower = single_mode_lower(big).map(|v| Complex64::new(v, 0.0));
    let eye = DMatrix::<Complex64>::identity(big, big);
    let embed = |mode: usize, m: &DMatrix<Complex64>| {
        let mut acc = DMatrix::<Complex64>::identity(1, 1);
        for k in 0..num_modes {
            acc = kron(&acc, if k == mode { m } else { &eye });
        }
        acc
    };
    let lowers: Vec<DMatrix<Complex64>> = (0..num_modes).map(|k| embed(k, &lower)).collect();
    let raises: Vec<DMatrix<Complex64>> = lowers.iter().map(|l| l.adjoint()).collect();
    let full = big.pow(num_modes as u32);
    let mut total = DMatrix::<Complex64>::zeros(full, full);
    for (c, word) in &op.words {
        let mut m = DMatrix::<Complex64>::identity(full, full);
        for letter in word {
            m = match letter {
                Ladder::Lower(k) => m * &lowers[*k],
                Ladder::Raise(k) => m * &raises[*k],
            };
        }
        total += m * *c;
    }
    // crop to levels 0..=cutoff per mode
    let small = cutoff + 1;
    let keep: Vec<usize> = (0..small.pow(num_modes as u32))
        .map(|s| {
            let mut rem = s;
            let mut idx = 0;
            let mut digits = vec![0; num_modes];
            for k in (0..num_modes).rev() {
                digits[k] = rem % small;
                rem /= small;
            }
            for d in digits {
                idx = idx * big + d;
            }
            idx
        })
        .collect();
    DMatrix::from_fn(keep.len(), keep.len(), |i, j| total[(keep[i], keep[j])])
}
