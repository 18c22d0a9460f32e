//! Grammar induction over action sequences.
//!
//! A [`Grammar`] is a start sequence plus rewrite rules whose nonterminals,
//! once flattened, become [`MacroAction`]s. Terminals are primitive action
//! ids; nonterminal ids are allocated above the largest terminal so the two
//! ranges never overlap.

mod mdl;
mod sequitur;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use thiserror::Error;

pub use mdl::mdl_filter;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid k: {0} (must be at least 2)")]
    InvalidK(usize),
    #[error("unknown rule head {0}")]
    UnknownRule(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Terminal(usize),
    NonTerminal(usize),
}

impl Symbol {
    pub fn id(self) -> usize {
        match self {
            Symbol::Terminal(id) | Symbol::NonTerminal(id) => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub head: usize,
    pub body: Vec<Symbol>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    start: Vec<Symbol>,
    rules: BTreeMap<usize, Rule>,
}

/// A flattened nonterminal: the unit appended to an agent's action set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MacroAction {
    pub primitives: Vec<usize>,
    /// Nonterminal id the macro was flattened from.
    pub source: usize,
}

impl MacroAction {
    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn first(&self) -> usize {
        self.primitives[0]
    }
}

impl Grammar {
    pub(crate) fn from_parts(start: Vec<Symbol>, rules: BTreeMap<usize, Rule>) -> Self {
        Grammar { start, rules }
    }

    /// The trivial grammar: no rules, the start sequence is the input itself.
    pub fn rule_free(seq: &[usize]) -> Self {
        Grammar {
            start: seq.iter().map(|&t| Symbol::Terminal(t)).collect(),
            rules: BTreeMap::new(),
        }
    }

    pub fn start(&self) -> &[Symbol] {
        &self.start
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values()
    }

    pub fn rule(&self, head: usize) -> Option<&Rule> {
        self.rules.get(&head)
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// Fully expands `head` into terminals.
    pub fn flatten(&self, head: usize) -> Result<Vec<usize>, GrammarError> {
        let rule = self
            .rules
            .get(&head)
            .ok_or(GrammarError::UnknownRule(head))?;
        let mut out = Vec::new();
        self.expand_into(&rule.body, &mut out)?;
        Ok(out)
    }

    /// Reproduces the sequence the grammar was inferred from.
    pub fn expand(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.expand_into(&self.start, &mut out)
            .expect("grammar references only its own rules");
        out
    }

    fn expand_into(&self, body: &[Symbol], out: &mut Vec<usize>) -> Result<(), GrammarError> {
        // explicit stack; rule depth can reach log2 of the input length or worse
        let mut stack: Vec<core::slice::Iter<'_, Symbol>> = Vec::new();
        stack.push(body.iter());
        while let Some(top) = stack.last_mut() {
            match top.next() {
                None => {
                    stack.pop();
                }
                Some(Symbol::Terminal(t)) => out.push(*t),
                Some(Symbol::NonTerminal(n)) => {
                    let rule = self.rules.get(n).ok_or(GrammarError::UnknownRule(*n))?;
                    stack.push(rule.body.iter());
                }
            }
        }
        Ok(())
    }

    /// One macro per nonterminal, deduplicated by primitive sequence.
    ///
    /// Macros keep the order of their source nonterminals.
    pub fn extract_macros(&self) -> Vec<MacroAction> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for rule in self.rules.values() {
            let primitives = self.flatten(rule.head).expect("rule exists");
            if primitives.len() >= 2 && seen.insert(primitives.clone()) {
                out.push(MacroAction {
                    primitives,
                    source: rule.head,
                });
            }
        }
        out
    }

    /// Description length in bits.
    ///
    /// `(symbol occurrences + rule count) * log2(max(2, distinct symbols))`.
    pub fn encoding_cost(&self) -> f64 {
        let occurrences =
            self.start.len() + self.rules.values().map(|r| r.body.len()).sum::<usize>();
        let mut distinct: BTreeSet<Symbol> = self.start.iter().copied().collect();
        for rule in self.rules.values() {
            distinct.insert(Symbol::NonTerminal(rule.head));
            distinct.extend(rule.body.iter().copied());
        }
        cost_bits(occurrences + self.rules.len(), distinct.len())
    }

    /// Number of references to each nonterminal across start and all bodies.
    pub fn reference_counts(&self) -> BTreeMap<usize, usize> {
        let mut counts: BTreeMap<usize, usize> = self.rules.keys().map(|&h| (h, 0)).collect();
        let bodies = core::iter::once(&self.start).chain(self.rules.values().map(|r| &r.body));
        for body in bodies {
            for sym in body {
                if let Symbol::NonTerminal(n) = sym {
                    *counts.entry(*n).or_default() += 1;
                }
            }
        }
        counts
    }

    /// Rule-per-line text form: `S -> ...` then `<head> -> ... = <flattened>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "S ->");
        for s in &self.start {
            let _ = write!(out, " {}", s.id());
        }
        out.push('\n');
        for rule in self.rules.values() {
            let _ = write!(out, "{} ->", rule.head);
            for s in &rule.body {
                let _ = write!(out, " {}", s.id());
            }
            let _ = write!(out, " =");
            for t in self.flatten(rule.head).expect("rule exists") {
                let _ = write!(out, " {t}");
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub(crate) fn cost_bits(units: usize, alphabet: usize) -> f64 {
    units as f64 * libm::log2(alphabet.max(2) as f64)
}

/// Classic Sequitur: digram uniqueness and rule utility (every rule used twice).
pub fn sequitur_infer(seq: &[usize]) -> Result<Grammar, GrammarError> {
    if seq.is_empty() {
        return Err(GrammarError::EmptyInput);
    }
    Ok(sequitur::induce(seq, 2))
}

/// Sequitur that only forms a rule once a digram repeats `k` times.
pub fn k_sequitur_infer(seq: &[usize], k: usize) -> Result<Grammar, GrammarError> {
    if k < 2 {
        return Err(GrammarError::InvalidK(k));
    }
    if seq.is_empty() {
        return Err(GrammarError::EmptyInput);
    }
    Ok(sequitur::induce(seq, k))
}

/// Which grammar calculator turns best episodes into macros.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Calculator {
    Sequitur,
    KSequitur(usize),
    Mdl,
}

impl Calculator {
    pub fn infer(&self, seq: &[usize]) -> Result<Grammar, GrammarError> {
        match *self {
            Calculator::Sequitur => sequitur_infer(seq),
            Calculator::KSequitur(k) => k_sequitur_infer(seq, k),
            Calculator::Mdl => mdl_filter(seq),
        }
    }

    /// Infers one grammar over several episodes.
    ///
    /// Episodes are joined with distinct boundary terminals numbered from
    /// `boundary_base` upward. Each boundary occurs once, so no rule can span
    /// two episodes.
    pub fn infer_episodes(
        &self,
        episodes: &[&[usize]],
        boundary_base: usize,
    ) -> Result<Grammar, GrammarError> {
        let mut joined = Vec::new();
        for (i, episode) in episodes.iter().enumerate() {
            if i > 0 {
                joined.push(boundary_base + i - 1);
            }
            joined.extend_from_slice(episode);
        }
        self.infer(&joined)
    }
}

impl fmt::Display for Calculator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Calculator::Sequitur => f.write_str("sequitur"),
            Calculator::KSequitur(k) => write!(f, "k-sequitur({k})"),
            Calculator::Mdl => f.write_str("mdl"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn letters(s: &str) -> Vec<usize> {
        s.bytes().map(|b| (b - b'a') as usize).collect()
    }

    fn word(seq: &[usize]) -> String {
        seq.iter().map(|&t| (b'a' + t as u8) as char).collect()
    }

    fn macro_words(g: &Grammar) -> BTreeSet<String> {
        g.extract_macros()
            .iter()
            .map(|m| word(&m.primitives))
            .collect()
    }

    #[test]
    fn abab_factors_ab() {
        let g = sequitur_infer(&letters("abab")).unwrap();
        assert_eq!(g.rule_count(), 1);
        let rule = g.rules().next().unwrap();
        assert_eq!(rule.body, vec![Symbol::Terminal(0), Symbol::Terminal(1)]);
        assert_eq!(
            g.start(),
            &[
                Symbol::NonTerminal(rule.head),
                Symbol::NonTerminal(rule.head)
            ]
        );
    }

    #[test]
    fn no_repeats_no_rules() {
        let seq = letters("abcdef");
        let g = sequitur_infer(&seq).unwrap();
        assert_eq!(g.rule_count(), 0);
        assert_eq!(g, Grammar::rule_free(&seq));
    }

    #[test]
    fn hanoi_example_macros() {
        let g = sequitur_infer(&letters("bafbcdbafecfbafbcdbcfecdbafbcdb")).unwrap();
        let expected: BTreeSet<String> = ["bc", "ec", "baf", "bafbcd"]
            .iter()
            .map(|s| String::from(*s))
            .collect();
        assert_eq!(macro_words(&g), expected);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert_eq!(sequitur_infer(&[]), Err(GrammarError::EmptyInput));
        assert_eq!(k_sequitur_infer(&[], 3), Err(GrammarError::EmptyInput));
        assert_eq!(mdl_filter(&[]), Err(GrammarError::EmptyInput));
    }

    #[test]
    fn k_below_two_is_rejected() {
        assert_eq!(k_sequitur_infer(&[0, 1], 1), Err(GrammarError::InvalidK(1)));
        assert_eq!(k_sequitur_infer(&[0, 1], 0), Err(GrammarError::InvalidK(0)));
    }

    #[test]
    fn k_sequitur_examples() {
        let g = k_sequitur_infer(&letters("ababab"), 3).unwrap();
        assert_eq!(macro_words(&g), BTreeSet::from([String::from("ab")]));

        let g = k_sequitur_infer(&letters("ababcdcd"), 3).unwrap();
        assert_eq!(g.rule_count(), 0);

        let g = k_sequitur_infer(&letters("ababababcdcd"), 4).unwrap();
        assert_eq!(g.rule_count(), 1);
        assert_eq!(macro_words(&g), BTreeSet::from([String::from("ab")]));
    }

    #[test]
    fn cost_examples() {
        assert_eq!(Grammar::rule_free(&letters("abab")).encoding_cost(), 4.0);
        assert_eq!(Grammar::rule_free(&letters("aaaa")).encoding_cost(), 4.0);
        let g = sequitur_infer(&letters("abab")).unwrap();
        let expected = 5.0 * libm::log2(3.0);
        assert!((g.encoding_cost() - expected).abs() < 1e-12);
        assert!((g.encoding_cost() - 7.92).abs() < 0.01);
    }

    #[test]
    fn flatten_nested_rule() {
        // J -> I G d, I -> b a f, G -> b c
        let (b, a, f, c, d) = (1, 0, 5, 2, 3);
        let mut rules = BTreeMap::new();
        rules.insert(
            6,
            Rule {
                head: 6,
                body: vec![Symbol::Terminal(b), Symbol::Terminal(c)],
            },
        );
        rules.insert(
            8,
            Rule {
                head: 8,
                body: vec![
                    Symbol::Terminal(b),
                    Symbol::Terminal(a),
                    Symbol::Terminal(f),
                ],
            },
        );
        rules.insert(
            9,
            Rule {
                head: 9,
                body: vec![
                    Symbol::NonTerminal(8),
                    Symbol::NonTerminal(6),
                    Symbol::Terminal(d),
                ],
            },
        );
        let g = Grammar::from_parts(vec![Symbol::NonTerminal(9), Symbol::NonTerminal(9)], rules);
        assert_eq!(word(&g.flatten(9).unwrap()), "bafbcd");
        assert_eq!(g.flatten(7), Err(GrammarError::UnknownRule(7)));
        assert_eq!(word(&g.expand()), "bafbcdbafbcd");
    }

    #[test]
    fn duplicate_flattenings_yield_one_macro() {
        let mut rules = BTreeMap::new();
        rules.insert(
            2,
            Rule {
                head: 2,
                body: vec![Symbol::Terminal(0), Symbol::Terminal(1)],
            },
        );
        rules.insert(
            3,
            Rule {
                head: 3,
                body: vec![Symbol::Terminal(0), Symbol::Terminal(1)],
            },
        );
        let g = Grammar::from_parts(vec![Symbol::NonTerminal(2), Symbol::NonTerminal(3)], rules);
        let macros = g.extract_macros();
        assert_eq!(macros.len(), 1);
        assert_eq!(macros[0].source, 2);
        assert!(Grammar::rule_free(&[0, 1]).extract_macros().is_empty());
    }

    #[test]
    fn episodes_never_share_rules_across_boundaries() {
        let a = letters("abc");
        let b = letters("cab");
        // "ca" would repeat only across the boundary
        let g = Calculator::Sequitur.infer_episodes(&[&a, &b], 100).unwrap();
        assert!(g
            .extract_macros()
            .iter()
            .all(|m| !m.primitives.contains(&100)));
        let expanded = g.expand();
        assert_eq!(expanded, [0, 1, 2, 100, 2, 0, 1]);
    }

    #[test]
    fn nonterminal_ids_sit_above_terminals() {
        let g = sequitur_infer(&letters("abcabcabc")).unwrap();
        for rule in g.rules() {
            assert!(rule.head > 2);
        }
    }
}
