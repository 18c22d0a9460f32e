//! The growable action set: primitives first, then macros in arrival order.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::grammar::MacroAction;

pub type ActionId = usize;

/// Primitive ids are `0..primitive_count`; macro `i` gets id `primitive_count + i`.
/// Ids never change once assigned and the set never shrinks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSet {
    primitive_count: usize,
    macros: Vec<MacroAction>,
    known: BTreeSet<Vec<usize>>,
}

impl ActionSet {
    pub fn new(primitive_count: usize) -> Self {
        ActionSet {
            primitive_count,
            macros: Vec::new(),
            known: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.primitive_count + self.macros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn primitive_count(&self) -> usize {
        self.primitive_count
    }

    pub fn is_macro(&self, id: ActionId) -> bool {
        id >= self.primitive_count && id < self.len()
    }

    pub fn contains(&self, id: ActionId) -> bool {
        id < self.len()
    }

    pub fn macro_action(&self, id: ActionId) -> Option<&MacroAction> {
        id.checked_sub(self.primitive_count)
            .and_then(|i| self.macros.get(i))
    }

    pub fn macros(&self) -> impl Iterator<Item = (ActionId, &MacroAction)> {
        self.macros
            .iter()
            .enumerate()
            .map(move |(i, m)| (self.primitive_count + i, m))
    }

    pub fn macro_count(&self) -> usize {
        self.macros.len()
    }

    /// Primitive sequence an action stands for.
    pub fn primitives(&self, id: ActionId) -> Option<Vec<usize>> {
        if id < self.primitive_count {
            Some(vec![id])
        } else {
            self.macro_action(id).map(|m| m.primitives.clone())
        }
    }

    /// Number of primitives the action expands to.
    pub fn length(&self, id: ActionId) -> usize {
        self.macro_action(id).map_or(1, MacroAction::len)
    }

    /// Appends the macros not already present, returning their new ids.
    ///
    /// Candidates shorter than two primitives or naming unknown primitives are skipped.
    pub fn extend(&mut self, candidates: impl IntoIterator<Item = MacroAction>) -> Vec<ActionId> {
        let mut added = Vec::new();
        for m in candidates {
            let valid = m.len() >= 2 && m.primitives.iter().all(|&p| p < self.primitive_count);
            if valid && self.known.insert(m.primitives.clone()) {
                added.push(self.len());
                self.macros.push(m);
            }
        }
        added
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mac(p: &[usize]) -> MacroAction {
        MacroAction {
            primitives: p.to_vec(),
            source: 0,
        }
    }

    #[test]
    fn ids_are_stable_and_deduplicated() {
        let mut set = ActionSet::new(6);
        assert_eq!(set.extend([mac(&[1, 2]), mac(&[4, 2])]), [6, 7]);
        assert_eq!(set.extend([mac(&[1, 2]), mac(&[1, 0, 5])]), [8]);
        assert_eq!(set.len(), 9);
        assert_eq!(set.primitives(7), Some(vec![4, 2]));
        assert_eq!(set.primitives(3), Some(vec![3]));
        assert_eq!(set.primitives(9), None);
        assert_eq!(set.length(8), 3);
        assert!(set.is_macro(6) && !set.is_macro(5) && !set.is_macro(9));
    }

    #[test]
    fn rejects_short_or_foreign_macros() {
        let mut set = ActionSet::new(2);
        assert!(set.extend([mac(&[0]), mac(&[0, 7])]).is_empty());
        assert_eq!(set.len(), 2);
    }
}
