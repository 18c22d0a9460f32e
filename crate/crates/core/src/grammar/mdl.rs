//! Sequitur regularised by description length.
//!
//! Classic Sequitur proposes the candidate rules; they are considered in
//! creation order and each is kept only if the grammar built from the kept
//! rules plus the candidate encodes in strictly fewer bits than the grammar
//! built from the kept rules alone. Rejected rules are inlined, so the result
//! is always lossless and never costs more than the rule-free encoding.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use super::{cost_bits, sequitur, Grammar, GrammarError, Rule, Symbol};

pub fn mdl_filter(seq: &[usize]) -> Result<Grammar, GrammarError> {
    if seq.is_empty() {
        return Err(GrammarError::EmptyInput);
    }
    let full = sequitur::induce(seq, 2);
    let terminals = seq.iter().copied().collect::<BTreeSet<_>>().len();
    let mut kept = BTreeSet::new();
    let mut best = cost_bits(seq.len(), terminals);
    let order = dependency_order(&full);
    for head in full.rules.keys().copied() {
        kept.insert(head);
        let cost = cost_with(&full, &kept, terminals, &order);
        if cost < best {
            best = cost;
        } else {
            kept.remove(&head);
        }
    }
    Ok(restrict(&full, &kept))
}

/// Rule heads ordered so every rule comes after the rules its body references.
fn dependency_order(g: &Grammar) -> Vec<usize> {
    let mut order = Vec::with_capacity(g.rules.len());
    let mut done = BTreeSet::new();
    for &root in g.rules.keys() {
        let mut stack = vec![(root, false)];
        while let Some((head, expanded)) = stack.pop() {
            if done.contains(&head) {
                continue;
            }
            if expanded {
                done.insert(head);
                order.push(head);
                continue;
            }
            stack.push((head, true));
            for s in &g.rules[&head].body {
                if let Symbol::NonTerminal(child) = s {
                    if !done.contains(child) {
                        stack.push((*child, false));
                    }
                }
            }
        }
    }
    order
}

/// Expanded length of every rule when only `kept` nonterminals survive.
fn lengths(g: &Grammar, kept: &BTreeSet<usize>, order: &[usize]) -> BTreeMap<usize, usize> {
    let mut len = BTreeMap::new();
    for rule in order.iter().map(|h| &g.rules[h]) {
        let n = rule
            .body
            .iter()
            .map(|s| match s {
                Symbol::Terminal(_) => 1,
                Symbol::NonTerminal(h) if kept.contains(h) => 1,
                Symbol::NonTerminal(h) => len[h],
            })
            .sum();
        len.insert(rule.head, n);
    }
    len
}

fn cost_with(g: &Grammar, kept: &BTreeSet<usize>, terminals: usize, order: &[usize]) -> f64 {
    let len = lengths(g, kept, order);
    let size = |body: &[Symbol]| -> usize {
        body.iter()
            .map(|s| match s {
                Symbol::Terminal(_) => 1,
                Symbol::NonTerminal(h) if kept.contains(h) => 1,
                Symbol::NonTerminal(h) => len[h],
            })
            .sum()
    };
    let occurrences: usize =
        size(&g.start) + kept.iter().map(|h| size(&g.rules[h].body)).sum::<usize>();
    cost_bits(occurrences + kept.len(), terminals + kept.len())
}

/// Inlines every rule not in `kept`.
fn restrict(g: &Grammar, kept: &BTreeSet<usize>) -> Grammar {
    let rewrite = |body: &[Symbol]| -> Vec<Symbol> {
        let mut out = Vec::new();
        let mut stack: Vec<core::slice::Iter<'_, Symbol>> = Vec::new();
        stack.push(body.iter());
        while let Some(top) = stack.last_mut() {
            match top.next() {
                None => {
                    stack.pop();
                }
                Some(&Symbol::NonTerminal(h)) if !kept.contains(&h) => {
                    stack.push(g.rules[&h].body.iter())
                }
                Some(&s) => out.push(s),
            }
        }
        out
    };
    let rules = kept
        .iter()
        .map(|&h| {
            (
                h,
                Rule {
                    head: h,
                    body: rewrite(&g.rules[&h].body),
                },
            )
        })
        .collect();
    Grammar::from_parts(rewrite(&g.start), rules)
}
