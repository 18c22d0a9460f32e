//! Online Sequitur over a doubly linked symbol arena.
//!
//! Symbols are appended one at a time to the start rule. Every new digram is
//! looked up in the digram index; once a digram has `min_repeats`
//! non-overlapping occurrences it is replaced everywhere by a fresh rule, and
//! a digram that already forms the complete body of a rule is replaced by that
//! rule. Rules referenced fewer than `min_repeats` times (or whose body shrank
//! below two symbols) are inlined at every use and deleted.
//!
//! With `min_repeats == 2` this is the classic algorithm: digram uniqueness
//! and rule utility both hold after every append.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use super::{Grammar, Rule, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Sym {
    Term(usize),
    Rule(usize),
    Guard(usize),
}

#[derive(Debug)]
struct Node {
    sym: Sym,
    prev: usize,
    next: usize,
    live: bool,
}

#[derive(Debug)]
struct RuleSlot {
    guard: usize,
    uses: BTreeSet<usize>,
    live: bool,
}

type Digram = (Sym, Sym);

const START: usize = 0;

pub(crate) struct Engine {
    nodes: Vec<Node>,
    rules: Vec<RuleSlot>,
    digrams: BTreeMap<Digram, Vec<usize>>,
    min_repeats: usize,
    underused: Vec<usize>,
    recheck: Vec<usize>,
    pruning: bool,
}

impl Engine {
    pub(crate) fn new(min_repeats: usize) -> Self {
        debug_assert!(min_repeats >= 2);
        let mut engine = Engine {
            nodes: Vec::new(),
            rules: Vec::new(),
            digrams: BTreeMap::new(),
            min_repeats,
            underused: Vec::new(),
            recheck: Vec::new(),
            pruning: false,
        };
        engine.new_rule();
        engine
    }

    pub(crate) fn push(&mut self, terminal: usize) {
        let last = self.last(START);
        let node = self.new_node(Sym::Term(terminal));
        let guard = self.rules[START].guard;
        self.link(last, node);
        self.link(node, guard);
        self.check(last);
    }

    fn new_node(&mut self, sym: Sym) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            sym,
            prev: id,
            next: id,
            live: true,
        });
        id
    }

    fn new_rule(&mut self) -> usize {
        let id = self.rules.len();
        let guard = self.new_node(Sym::Guard(id));
        self.rules.push(RuleSlot {
            guard,
            uses: BTreeSet::new(),
            live: true,
        });
        id
    }

    /// Creates a node for `sym`, registering it as a use when it names a rule.
    fn place(&mut self, sym: Sym) -> usize {
        let node = self.new_node(sym);
        if let Sym::Rule(r) = sym {
            self.rules[r].uses.insert(node);
        }
        node
    }

    fn kill(&mut self, node: usize) {
        self.nodes[node].live = false;
        if let Sym::Rule(r) = self.nodes[node].sym {
            self.rules[r].uses.remove(&node);
            self.underused.push(r);
        }
    }

    fn first(&self, rule: usize) -> usize {
        self.nodes[self.rules[rule].guard].next
    }

    fn last(&self, rule: usize) -> usize {
        self.nodes[self.rules[rule].guard].prev
    }

    fn next(&self, node: usize) -> usize {
        self.nodes[node].next
    }

    fn prev(&self, node: usize) -> usize {
        self.nodes[node].prev
    }

    fn is_guard(&self, node: usize) -> bool {
        matches!(self.nodes[node].sym, Sym::Guard(_))
    }

    fn link(&mut self, left: usize, right: usize) {
        self.nodes[left].next = right;
        self.nodes[right].prev = left;
    }

    fn key(&self, node: usize) -> Option<Digram> {
        if !self.nodes[node].live || self.is_guard(node) {
            return None;
        }
        let next = self.next(node);
        if self.is_guard(next) {
            return None;
        }
        Some((self.nodes[node].sym, self.nodes[next].sym))
    }

    fn body_len(&self, rule: usize) -> usize {
        let guard = self.rules[rule].guard;
        let mut n = 0;
        let mut cur = self.next(guard);
        while cur != guard {
            n += 1;
            cur = self.next(cur);
        }
        n
    }

    fn body(&self, rule: usize) -> Vec<usize> {
        let guard = self.rules[rule].guard;
        let mut out = Vec::new();
        let mut cur = self.next(guard);
        while cur != guard {
            out.push(cur);
            cur = self.next(cur);
        }
        out
    }

    fn registered(&self, key: &Digram, node: usize) -> bool {
        self.digrams.get(key).is_some_and(|l| l.contains(&node))
    }

    fn overlaps(&self, a: usize, b: usize) -> bool {
        self.next(a) == b || self.next(b) == a
    }

    /// Drops the index entry for the digram starting at `node`, if any.
    fn forget(&mut self, node: usize) {
        let Some(key) = self.key(node) else { return };
        let Some(list) = self.digrams.get_mut(&key) else {
            return;
        };
        let Some(pos) = list.iter().position(|&n| n == node) else {
            return;
        };
        list.remove(pos);
        if list.is_empty() {
            self.digrams.remove(&key);
        }
        // An overlapping neighbour ("aaa") may have been left unindexed.
        if key.0 == key.1 {
            let prev = self.prev(node);
            let next = self.next(node);
            self.recheck.push(prev);
            self.recheck.push(next);
        }
    }

    fn flush_recheck(&mut self) {
        while let Some(node) = self.recheck.pop() {
            let Some(key) = self.key(node) else { continue };
            let list = self.digrams.get(&key);
            let free = list
                .is_none_or(|l| !l.contains(&node) && l.iter().all(|&o| !self.overlaps(o, node)));
            if free {
                self.digrams.entry(key).or_default().push(node);
            }
        }
    }

    /// Checks the digram starting at `node`; returns true when it was rewritten.
    fn check(&mut self, node: usize) -> bool {
        let Some(key) = self.key(node) else {
            return false;
        };
        let list = self.digrams.get(&key).cloned().unwrap_or_default();
        if list.contains(&node) || list.iter().any(|&o| self.overlaps(o, node)) {
            return false;
        }

        let whole_rule = list.iter().copied().find(|&o| self.is_whole_rule(o));
        if let Some(body) = whole_rule {
            let Sym::Guard(rule) = self.nodes[self.prev(body)].sym else {
                unreachable!("guard node without guard symbol")
            };
            let deferred = core::mem::replace(&mut self.pruning, true);
            self.substitute(node, rule);
            for other in list.into_iter().filter(|&o| o != body) {
                if self.registered(&key, other) {
                    self.substitute(other, rule);
                }
            }
            self.pruning = deferred;
            self.underused.push(rule);
            self.enforce_utility();
            return true;
        }

        let mut list = list;
        list.push(node);
        if list.len() < self.min_repeats {
            self.digrams.insert(key, list);
            return false;
        }

        self.digrams.remove(&key);
        let rule = self.new_rule();
        let a = self.place(key.0);
        let b = self.place(key.1);
        let guard = self.rules[rule].guard;
        self.link(guard, a);
        self.link(a, b);
        self.link(b, guard);
        // No rule may be pruned until every occurrence has been replaced.
        let deferred = core::mem::replace(&mut self.pruning, true);
        for occurrence in list {
            if self.key(occurrence) == Some(key) && self.is_outside(occurrence, rule) {
                self.substitute(occurrence, rule);
            }
        }
        let first = self.first(rule);
        self.check(first);
        self.pruning = deferred;
        self.underused.push(rule);
        self.enforce_utility();
        true
    }

    fn is_whole_rule(&self, node: usize) -> bool {
        let prev = self.prev(node);
        let Sym::Guard(rule) = self.nodes[prev].sym else {
            return false;
        };
        rule != START && self.rules[rule].live && self.is_guard(self.next(self.next(node)))
    }

    fn is_outside(&self, node: usize, rule: usize) -> bool {
        let guard = self.rules[rule].guard;
        self.prev(node) != guard
    }

    /// Replaces the digram starting at `node` with a reference to `rule`.
    fn substitute(&mut self, node: usize, rule: usize) {
        let p = self.prev(node);
        let b = self.next(node);
        let c = self.next(b);
        if let (Sym::Guard(owner), true) = (self.nodes[p].sym, self.is_guard(c)) {
            // the owner's body is about to shrink to a single symbol
            self.underused.push(owner);
        }
        self.forget(p);
        self.forget(node);
        self.forget(b);
        self.kill(node);
        self.kill(b);
        let x = self.place(Sym::Rule(rule));
        self.link(p, x);
        self.link(x, c);
        self.flush_recheck();
        if !self.check(p) {
            self.check(x);
        }
    }

    fn enforce_utility(&mut self) {
        // Inlining re-checks digrams, which can land back here; the outer
        // loop drains whatever the nested calls queue up.
        if self.pruning {
            return;
        }
        self.pruning = true;
        while let Some(rule) = self.underused.pop() {
            if rule == START || !self.rules[rule].live {
                continue;
            }
            let uses = self.rules[rule].uses.len();
            if uses >= self.min_repeats && self.body_len(rule) >= 2 {
                continue;
            }
            self.inline(rule);
        }
        self.pruning = false;
    }

    /// Expands every use of `rule` in place and deletes the rule.
    fn inline(&mut self, rule: usize) {
        let body = self.body(rule);
        let syms: Vec<Sym> = body.iter().map(|&n| self.nodes[n].sym).collect();
        for &n in &body {
            self.forget(n);
        }
        for &n in &body {
            self.kill(n);
        }
        let guard = self.rules[rule].guard;
        self.nodes[guard].live = false;
        self.rules[rule].live = false;
        self.recheck.clear();

        while let Some(&site) = self.rules[rule].uses.first() {
            let p = self.prev(site);
            let nx = self.next(site);
            self.forget(p);
            self.forget(site);
            self.kill(site);
            let mut fresh = vec![p];
            let mut tail = p;
            for &sym in &syms {
                let n = self.place(sym);
                self.link(tail, n);
                tail = n;
                fresh.push(n);
            }
            self.link(tail, nx);
            self.flush_recheck();
            for n in fresh {
                if self.nodes[n].live {
                    self.check(n);
                }
            }
        }
    }

    pub(crate) fn finish(self) -> Grammar {
        let live: Vec<usize> = (1..self.rules.len())
            .filter(|&r| self.rules[r].live)
            .collect();
        let max_terminal = self
            .nodes
            .iter()
            .filter_map(|n| match n.sym {
                Sym::Term(t) => Some(t),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let base = max_terminal + 1;
        let ids: BTreeMap<usize, usize> = live
            .iter()
            .enumerate()
            .map(|(i, &r)| (r, base + i))
            .collect();
        let convert = |engine: &Engine, rule: usize| -> Vec<Symbol> {
            engine
                .body(rule)
                .into_iter()
                .map(|n| match engine.nodes[n].sym {
                    Sym::Term(t) => Symbol::Terminal(t),
                    Sym::Rule(r) => Symbol::NonTerminal(ids[&r]),
                    Sym::Guard(_) => unreachable!("guard inside a rule body"),
                })
                .collect()
        };
        let start = convert(&self, START);
        let rules = live
            .iter()
            .map(|&r| {
                let head = ids[&r];
                (
                    head,
                    Rule {
                        head,
                        body: convert(&self, r),
                    },
                )
            })
            .collect();
        Grammar::from_parts(start, rules)
    }
}

/// Runs the engine over `seq` with the given repeat threshold.
pub(crate) fn induce(seq: &[usize], min_repeats: usize) -> Grammar {
    let mut engine = Engine::new(min_repeats);
    for &t in seq {
        engine.push(t);
    }
    engine.finish()
}
