//! Dense factors and sum-product variable elimination.

use std::collections::{BTreeMap, BTreeSet};

use crate::diagram::layout::{self, Assignments};
use crate::diagram::{Cpt, NodeIdx};
use crate::error::{Error, Result};

/// A real table over an ordered list of variables, canonical layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    vars: Vec<NodeIdx>,
    cards: Vec<usize>,
    table: Vec<f64>,
}

impl Factor {
    pub fn new(vars: Vec<NodeIdx>, cards: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        if vars.len() != cards.len() {
            return Err(Error::Invalid(
                "factor variables and cardinalities differ in length".into(),
            ));
        }
        let distinct: BTreeSet<_> = vars.iter().collect();
        if distinct.len() != vars.len() {
            return Err(Error::Invalid("factor lists a variable twice".into()));
        }
        if table.len() != layout::size(&cards) {
            return Err(Error::Invalid(format!(
                "factor table has {} entries, expected {}",
                table.len(),
                layout::size(&cards)
            )));
        }
        if table.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("factor has a non-finite entry".into()));
        }
        Ok(Factor { vars, cards, table })
    }

    /// The multiplicative identity: no variables, one entry equal to 1.
    pub fn unit() -> Self {
        Factor {
            vars: Vec::new(),
            cards: Vec::new(),
            table: vec![1.0],
        }
    }

    /// Constant-one factor over `vars`.
    pub fn ones(vars: Vec<NodeIdx>, cards: Vec<usize>) -> Self {
        let n = layout::size(&cards);
        Factor {
            vars,
            cards,
            table: vec![1.0; n],
        }
    }

    /// The factor `P(child | parents)` over `parents ++ [child]`.
    pub fn from_cpt(cpt: &Cpt, card: impl Fn(NodeIdx) -> usize) -> Result<Self> {
        let mut vars = cpt.parents.clone();
        vars.push(cpt.child);
        let cards = vars.iter().map(|&v| card(v)).collect();
        Factor::new(vars, cards, cpt.rows.clone())
    }

    pub fn vars(&self) -> &[NodeIdx] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn into_table(self) -> Vec<f64> {
        self.table
    }

    pub fn card_of(&self, v: NodeIdx) -> Option<usize> {
        self.vars.iter().position(|&x| x == v).map(|i| self.cards[i])
    }

    pub fn sum(&self) -> f64 {
        self.table.iter().sum()
    }

    /// Entry at an assignment given in this factor's variable order.
    pub fn get(&self, assignment: &[usize]) -> f64 {
        self.table[layout::index(assignment, &self.cards)]
    }

    /// Pointwise product joined on shared variables. The result lists this
    /// factor's variables first, then the new ones from `other`.
    pub fn multiply(&self, other: &Factor) -> Result<Factor> {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.vars.iter().zip(&other.cards) {
            match self.card_of(v) {
                Some(existing) if existing != c => return Err(Error::FrameMismatch(v)),
                Some(_) => {}
                None => {
                    vars.push(v);
                    cards.push(c);
                }
            }
        }
        let project = |f: &Factor| -> Vec<usize> {
            // stride of each result coordinate inside `f`, 0 if absent
            let strides = layout::strides(&f.cards);
            vars.iter()
                .map(|v| f.vars.iter().position(|x| x == v).map_or(0, |i| strides[i]))
                .collect()
        };
        let (sa, sb) = (project(self), project(other));
        let mut table = Vec::with_capacity(layout::size(&cards));
        for a in Assignments::new(&cards) {
            let ia: usize = a.iter().zip(&sa).map(|(x, s)| x * s).sum();
            let ib: usize = a.iter().zip(&sb).map(|(x, s)| x * s).sum();
            table.push(self.table[ia] * other.table[ib]);
        }
        Ok(Factor { vars, cards, table })
    }

    /// Sums out every variable in `out`; remaining variables keep their order.
    pub fn marginalize(&self, out: &BTreeSet<NodeIdx>) -> Factor {
        let keep: Vec<usize> = (0..self.vars.len()).filter(|&i| !out.contains(&self.vars[i])).collect();
        let vars: Vec<_> = keep.iter().map(|&i| self.vars[i]).collect();
        let cards: Vec<_> = keep.iter().map(|&i| self.cards[i]).collect();
        let mut table = vec![0.0; layout::size(&cards)];
        let mut kept = vec![0; keep.len()];
        for (flat, a) in Assignments::new(&self.cards).enumerate() {
            for (slot, &i) in kept.iter_mut().zip(&keep) {
                *slot = a[i];
            }
            table[layout::index(&kept, &cards)] += self.table[flat];
        }
        Factor { vars, cards, table }
    }

    /// Same factor with variables permuted into `order`, which must list
    /// exactly this factor's variables.
    pub fn reorder(&self, order: &[NodeIdx]) -> Result<Factor> {
        let pos: Vec<usize> = order
            .iter()
            .map(|v| {
                self.vars
                    .iter()
                    .position(|x| x == v)
                    .ok_or_else(|| Error::Invalid(format!("variable {v} not in factor")))
            })
            .collect::<Result<_>>()?;
        if pos.len() != self.vars.len() {
            return Err(Error::Invalid("reorder must list every variable".into()));
        }
        let cards: Vec<_> = pos.iter().map(|&i| self.cards[i]).collect();
        let src_strides = layout::strides(&self.cards);
        let table = Assignments::new(&cards)
            .map(|a| {
                let src: usize = a.iter().zip(&pos).map(|(x, &i)| x * src_strides[i]).sum();
                self.table[src]
            })
            .collect();
        Ok(Factor {
            vars: order.to_vec(),
            cards,
            table,
        })
    }
}

/// Min-fill elimination order over the interaction graph of `scopes`,
/// breaking ties by the smallest variable index.
pub fn min_fill_order(scopes: &[Vec<NodeIdx>], eliminate: &BTreeSet<NodeIdx>) -> Vec<NodeIdx> {
    let mut adj: BTreeMap<NodeIdx, BTreeSet<NodeIdx>> = BTreeMap::new();
    for scope in scopes {
        for &a in scope {
            let entry = adj.entry(a).or_default();
            entry.extend(scope.iter().copied().filter(|&b| b != a));
        }
    }
    let mut remaining = eliminate.clone();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let fill = |v: NodeIdx| -> usize {
            let ns: Vec<_> = adj.get(&v).map(|s| s.iter().copied().collect()).unwrap_or_default();
            let mut missing = 0;
            for (i, a) in ns.iter().enumerate() {
                for b in &ns[i + 1..] {
                    if !adj[a].contains(b) {
                        missing += 1;
                    }
                }
            }
            missing
        };
        let next = *remaining
            .iter()
            .min_by_key(|&&v| (fill(v), v))
            .expect("remaining is nonempty");
        remaining.remove(&next);
        order.push(next);
        let ns: Vec<_> = adj.remove(&next).unwrap_or_default().into_iter().collect();
        for &a in &ns {
            let entry = adj.get_mut(&a).expect("neighbor present");
            entry.remove(&next);
            entry.extend(ns.iter().copied().filter(|&b| b != a));
        }
    }
    order
}

/// Sum-product elimination of every variable not in `keep`. The result is
/// over `keep` in the given order; kept variables that no factor mentions
/// are constant along their coordinate.
pub fn eliminate(factors: Vec<Factor>, keep: &[(NodeIdx, usize)]) -> Result<Factor> {
    let keep_set: BTreeSet<NodeIdx> = keep.iter().map(|&(v, _)| v).collect();
    let doomed: BTreeSet<NodeIdx> = factors
        .iter()
        .flat_map(|f| f.vars.iter().copied())
        .filter(|v| !keep_set.contains(v))
        .collect();
    let scopes: Vec<Vec<NodeIdx>> = factors.iter().map(|f| f.vars.clone()).collect();
    let order = min_fill_order(&scopes, &doomed);
    eliminate_in_order(factors, keep, &order)
}

/// [`eliminate`] with an explicit elimination order, which must cover every
/// variable that is not kept.
pub fn eliminate_in_order(mut factors: Vec<Factor>, keep: &[(NodeIdx, usize)], order: &[NodeIdx]) -> Result<Factor> {
    for &v in order {
        let (touching, rest): (Vec<_>, Vec<_>) = factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = rest;
        if touching.is_empty() {
            continue;
        }
        let mut product = Factor::unit();
        for f in &touching {
            product = product.multiply(f)?;
        }
        factors.push(product.marginalize(&BTreeSet::from([v])));
    }
    let mut product = Factor::unit();
    for f in &factors {
        product = product.multiply(f)?;
    }
    let keep_set: BTreeSet<NodeIdx> = keep.iter().map(|&(v, _)| v).collect();
    if let Some(stray) = product.vars.iter().find(|v| !keep_set.contains(v)) {
        return Err(Error::Invalid(format!("elimination order misses variable {stray}")));
    }
    let (missing_vars, missing_cards): (Vec<_>, Vec<_>) = keep
        .iter()
        .filter(|(v, _)| product.card_of(*v).is_none())
        .copied()
        .unzip();
    product = product.multiply(&Factor::ones(missing_vars, missing_cards))?;
    let order: Vec<NodeIdx> = keep.iter().map(|&(v, _)| v).collect();
    product.reorder(&order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(vars: &[NodeIdx], cards: &[usize], table: &[f64]) -> Factor {
        Factor::new(vars.to_vec(), cards.to_vec(), table.to_vec()).unwrap()
    }

    #[test]
    fn multiply_same_scope_is_pointwise() {
        let a = f(&[0], &[3], &[1.0, 2.0, 3.0]);
        let b = f(&[0], &[3], &[0.5, 0.5, 2.0]);
        assert_eq!(a.multiply(&b).unwrap().table(), &[0.5, 1.0, 6.0]);
    }

    #[test]
    fn multiply_by_unit_is_identity() {
        let a = f(&[4, 2], &[2, 3], &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        assert_eq!(a.multiply(&Factor::unit()).unwrap(), a);
        assert_eq!(Factor::unit().multiply(&a).unwrap(), a);
    }

    #[test]
    fn multiply_joins_on_shared_variables() {
        // P(a) * P(b|a)
        let pa = f(&[0], &[2], &[0.3, 0.7]);
        let pba = f(&[0, 1], &[2, 2], &[0.9, 0.1, 0.2, 0.8]);
        let joint = pa.multiply(&pba).unwrap();
        assert_eq!(joint.vars(), &[0, 1]);
        let expect = [0.27, 0.03, 0.14, 0.56];
        for (x, e) in joint.table().iter().zip(expect) {
            assert!((x - e).abs() < 1e-15);
        }
        let marginal = joint.marginalize(&BTreeSet::from([1]));
        assert!((marginal.sum() - 1.0).abs() < 1e-15);
        assert!((marginal.table()[0] - 0.3).abs() < 1e-15);
        let pb = joint.marginalize(&BTreeSet::from([0]));
        assert!((pb.table()[0] - 0.41).abs() < 1e-15);
    }

    #[test]
    fn frame_mismatch() {
        let a = f(&[0], &[2], &[1.0, 1.0]);
        let b = f(&[0], &[3], &[1.0, 1.0, 1.0]);
        assert_eq!(a.multiply(&b), Err(Error::FrameMismatch(0)));
    }

    #[test]
    fn reorder_transposes() {
        let a = f(&[0, 1], &[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let t = a.reorder(&[1, 0]).unwrap();
        assert_eq!(t.table(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(t.reorder(&[0, 1]).unwrap(), a);
    }

    #[test]
    fn elimination_order_does_not_matter() {
        // chain 0 -> 1 -> 2 -> 3, keep {0, 3}
        let factors = vec![
            f(&[0], &[2], &[0.4, 0.6]),
            f(&[0, 1], &[2, 3], &[0.2, 0.3, 0.5, 0.1, 0.1, 0.8]),
            f(&[1, 2], &[3, 2], &[0.9, 0.1, 0.4, 0.6, 0.5, 0.5]),
            f(&[2, 3], &[2, 2], &[0.7, 0.3, 0.25, 0.75]),
        ];
        let keep = [(3, 2), (0, 2)];
        let a = eliminate(factors.clone(), &keep).unwrap();
        let b = eliminate_in_order(factors.clone(), &keep, &[2, 1]).unwrap();
        let c = eliminate_in_order(factors, &keep, &[1, 2]).unwrap();
        for ((x, y), z) in a.table().iter().zip(b.table()).zip(c.table()) {
            assert!((x - y).abs() < 1e-12 && (x - z).abs() < 1e-12);
        }
        assert!((a.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kept_variable_without_factor_is_constant() {
        let r = eliminate(vec![f(&[0], &[2], &[0.3, 0.7])], &[(5, 3), (0, 2)]).unwrap();
        assert_eq!(r.vars(), &[5, 0]);
        assert_eq!(r.table(), &[0.3, 0.7, 0.3, 0.7, 0.3, 0.7]);
    }

    #[test]
    fn min_fill_prefers_leaves() {
        // star around 0: eliminating 0 first would connect 1, 2, 3
        let scopes = vec![vec![0, 1], vec![0, 2], vec![0, 3]];
        let order = min_fill_order(&scopes, &BTreeSet::from([0, 1, 2, 3]));
        assert_eq!(order[0], 1);
    }
}
