//! Dense row-major table layout shared by every table in the crate.
//!
//! A table over variables `v_0, …, v_{n-1}` with cardinalities `c_0, …, c_{n-1}`
//! stores the entry for assignment `(a_0, …, a_{n-1})` at
//! `((a_0 · c_1 + a_1) · c_2 + …) · c_{n-1} + a_{n-1}`: lexicographic, with the
//! last variable varying fastest. An empty variable list has exactly one entry.

/// Number of joint configurations of the given cardinalities.
pub fn size(cards: &[usize]) -> usize {
    cards.iter().product()
}

/// Row-major strides for `cards`.
pub fn strides(cards: &[usize]) -> Vec<usize> {
    let mut out = vec![0; cards.len()];
    let mut acc = 1;
    for (s, &c) in out.iter_mut().zip(cards).rev() {
        *s = acc;
        acc *= c;
    }
    out
}

/// Flat index of an assignment.
pub fn index(assignment: &[usize], cards: &[usize]) -> usize {
    debug_assert_eq!(assignment.len(), cards.len());
    assignment.iter().zip(cards).fold(0, |acc, (&a, &c)| acc * c + a)
}

/// Decode a flat index into `out`.
pub fn decode(mut flat: usize, cards: &[usize], out: &mut [usize]) {
    for (slot, &c) in out.iter_mut().zip(cards).rev() {
        *slot = flat % c;
        flat /= c;
    }
}

/// Iterates every assignment of `cards` in canonical order.
#[derive(Debug, Clone)]
pub struct Assignments {
    cards: Vec<usize>,
    current: Vec<usize>,
    done: bool,
}

impl Assignments {
    pub fn new(cards: &[usize]) -> Self {
        Assignments {
            cards: cards.to_vec(),
            current: vec![0; cards.len()],
            done: cards.contains(&0),
        }
    }
}

impl Iterator for Assignments {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        // odometer step, last position fastest
        let mut pos = self.cards.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.current[pos] += 1;
            if self.current[pos] < self.cards[pos] {
                break;
            }
            self.current[pos] = 0;
        }
        Some(out)
    }
}
