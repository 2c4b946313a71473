//! Lowering from the AST to a labeled control-flow graph.
//!
//! Every node is one atomic three-address statement. A statement whose
//! expression holds `k >= 1` binary operators lowers to `k` nodes: inner
//! operators are hoisted left to right into temporaries `$t0, $t1, ...`
//! (numbered afresh for each statement) and the outermost operator stays in
//! the statement's own node. Calls and array allocations nested inside a
//! larger expression also get a temporary. Branches render as `if <cond>`
//! with two successors; loops add a back-edge to the first node of their
//! condition. Empty blocks lower to a single `nop` node, and falling off the
//! end of the function reaches an implicit `return` node. Unreachable nodes
//! are dropped.

use std::collections::VecDeque;

use super::ast::{Expr, Function, Stmt, UnOp};
use crate::error::Result;
use crate::graph::LabeledCfg;

struct Builder {
    labels: Vec<String>,
    edges: Vec<(usize, usize)>,
    temps: usize,
}

impl Builder {
    fn emit(&mut self, label: String, preds: &[usize]) -> usize {
        let id = self.labels.len();
        self.labels.push(label);
        for &p in preds {
            if !self.edges.contains(&(p, id)) {
                self.edges.push((p, id));
            }
        }
        id
    }

    fn fresh_temp(&mut self) -> String {
        let t = format!("$t{}", self.temps);
        self.temps += 1;
        t
    }

    /// Lowers `e` to an operand with no binary operator at its top level,
    /// emitting temporaries as needed.
    fn operand(&mut self, e: &Expr, preds: &mut Vec<usize>) -> String {
        match e {
            Expr::Literal(s) | Expr::Var(s) => s.clone(),
            Expr::Index(base, idx) => {
                let b = self.operand(base, preds);
                let i = self.operand(idx, preds);
                format!("{b}[{i}]")
            }
            Expr::Unary(op, inner) => {
                let x = self.operand(inner, preds);
                match op {
                    UnOp::Neg => format!("-{x}"),
                    UnOp::Not => format!("!{x}"),
                }
            }
            Expr::Binary { .. } | Expr::Call(..) | Expr::NewArray(..) => {
                let rhs = self.rvalue(e, preds);
                let t = self.fresh_temp();
                let id = self.emit(format!("{t} = {rhs}"), preds);
                *preds = vec![id];
                t
            }
        }
    }

    /// Lowers `e` to the right-hand side of a single statement.
    fn rvalue(&mut self, e: &Expr, preds: &mut Vec<usize>) -> String {
        match e {
            Expr::Binary { op, lhs, rhs, .. } => {
                let a = self.operand(lhs, preds);
                let b = self.operand(rhs, preds);
                format!("{a} {op} {b}")
            }
            Expr::Call(name, args) => {
                let args: Vec<String> = args.iter().map(|a| self.operand(a, preds)).collect();
                format!("call {name}({})", args.join(", "))
            }
            Expr::NewArray(ty, len) => {
                let n = self.operand(len, preds);
                format!("new {ty}[{n}]")
            }
            _ => self.operand(e, preds),
        }
    }

    fn statement_node(
        &mut self,
        preds: Vec<usize>,
        render: impl FnOnce(&mut Self, &mut Vec<usize>) -> String,
    ) -> usize {
        self.temps = 0;
        let mut preds = preds;
        let label = render(self, &mut preds);
        self.emit(label, &preds)
    }

    fn assign(&mut self, target: &Expr, value: &Expr, preds: Vec<usize>) -> Vec<usize> {
        let id = self.statement_node(preds, |b, p| {
            let t = b.operand(target, p);
            let v = b.rvalue(value, p);
            format!("{t} = {v}")
        });
        vec![id]
    }

    fn branch(&mut self, cond: &Expr, preds: Vec<usize>) -> usize {
        self.statement_node(preds, |b, p| format!("if {}", b.rvalue(cond, p)))
    }

    /// Lowers a nested block; empty blocks become a `nop`.
    fn body(&mut self, stmts: &[Stmt], preds: Vec<usize>) -> Vec<usize> {
        if stmts.is_empty() {
            return vec![self.emit("nop".into(), &preds)];
        }
        self.block(stmts, preds)
    }

    fn block(&mut self, stmts: &[Stmt], mut preds: Vec<usize>) -> Vec<usize> {
        for s in stmts {
            preds = self.stmt(s, preds);
        }
        preds
    }

    fn stmt(&mut self, s: &Stmt, preds: Vec<usize>) -> Vec<usize> {
        match s {
            Stmt::Assign { target, value } => self.assign(target, value, preds),
            Stmt::Decl { name, init, .. } => match init {
                Some(v) => self.assign(&Expr::Var(name.clone()), v, preds),
                None => preds,
            },
            Stmt::Call(e) => {
                let id = self.statement_node(preds, |b, p| b.rvalue(e, p));
                vec![id]
            }
            Stmt::Return(value) => {
                self.statement_node(preds, |b, p| match value {
                    Some(v) => format!("return {}", b.rvalue(v, p)),
                    None => "return".to_string(),
                });
                Vec::new()
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
            } => {
                let b = self.branch(cond, preds);
                let mut exits = self.body(then_body, vec![b]);
                match else_body {
                    Some(e) => exits.extend(self.body(e, vec![b])),
                    None => exits.push(b),
                }
                exits
            }
            Stmt::While { cond, body } => self.looping(cond, body, None, preds),
            Stmt::For {
                init,
                cond,
                update,
                body,
            } => {
                let preds = match init {
                    Some(s) => self.stmt(s, preds),
                    None => preds,
                };
                self.looping(cond, body, update.as_deref(), preds)
            }
        }
    }

    fn looping(
        &mut self,
        cond: &Expr,
        body: &[Stmt],
        update: Option<&Stmt>,
        preds: Vec<usize>,
    ) -> Vec<usize> {
        let head = self.labels.len();
        let b = self.branch(cond, preds);
        let mut exits = self.body(body, vec![b]);
        if let Some(u) = update {
            if !exits.is_empty() {
                exits = self.stmt(u, exits);
            }
        }
        for e in exits {
            if !self.edges.contains(&(e, head)) {
                self.edges.push((e, head));
            }
        }
        vec![b]
    }
}

/// Builds the labeled CFG of a parsed function. Node 0 is the entry.
pub fn build_cfg(f: &Function) -> Result<LabeledCfg> {
    let mut b = Builder {
        labels: Vec::new(),
        edges: Vec::new(),
        temps: 0,
    };
    let exits = b.block(&f.body, Vec::new());
    if !exits.is_empty() || b.labels.is_empty() {
        b.emit("return".into(), &exits);
    }

    // Keep only nodes reachable from the entry, preserving emission order.
    let n = b.labels.len();
    let mut succ = vec![Vec::new(); n];
    for &(s, d) in &b.edges {
        succ[s].push(d);
    }
    let mut reachable = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    reachable[0] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &succ[v] {
            if !reachable[w] {
                reachable[w] = true;
                queue.push_back(w);
            }
        }
    }
    let mut remap = vec![usize::MAX; n];
    let mut labels = Vec::new();
    for (old, label) in b.labels.into_iter().enumerate() {
        if reachable[old] {
            remap[old] = labels.len();
            labels.push(label);
        }
    }
    let edges = b
        .edges
        .iter()
        .filter(|&&(s, d)| reachable[s] && reachable[d])
        .map(|&(s, d)| (remap[s], remap[d]))
        .collect();
    let g = LabeledCfg::new(labels, edges)?;
    Ok(g.with_name(f.name.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse;

    fn cfg(src: &str) -> LabeledCfg {
        build_cfg(&parse(src).unwrap()).unwrap()
    }

    #[test]
    fn straight_line_is_a_path() {
        let g = cfg("a = 1; b = 2; c = a + b;");
        assert_eq!(g.labels(), &["a = 1", "b = 2", "c = a + b", "return"]);
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn if_else_diamond() {
        let g = cfg("if (c) { a = 1; } else { b = 2; }");
        assert_eq!(g.labels(), &["if c", "a = 1", "b = 2", "return"]);
        assert_eq!(g.out_degree(0), 2);
        assert_eq!(g.in_degree(3), 2);
    }

    #[test]
    fn three_address_decomposition() {
        let g = cfg("x = a + b * c - d;");
        assert_eq!(
            g.labels(),
            &["$t0 = b * c", "$t1 = a + $t0", "x = $t1 - d", "return"]
        );
        let g = cfg("if (a[i + 1] % 2 == 0) { x = f(y + 1) * 2; }");
        assert_eq!(
            g.labels(),
            &[
                "$t0 = i + 1",
                "$t1 = a[$t0] % 2",
                "if $t1 == 0",
                "$t0 = y + 1",
                "$t1 = call f($t0)",
                "x = $t1 * 2",
                "return"
            ]
        );
    }

    #[test]
    fn while_loop_has_back_edge() {
        let g = cfg("i = 0; while (i < n) { i = i + 1; } return i;");
        assert_eq!(g.labels(), &["i = 0", "if i < n", "i = i + 1", "return i"]);
        assert!(g.has_edge(2, 1));
        assert!(g.has_edge(1, 3));
        assert_eq!(g.out_degree(1), 2);
    }

    #[test]
    fn empty_blocks_become_nop() {
        let g = cfg("if (a) { } x = 1;");
        assert_eq!(g.labels(), &["if a", "nop", "x = 1", "return"]);
        assert_eq!(g.out_degree(0), 2);
    }

    #[test]
    fn dead_code_after_return_is_dropped() {
        let g = cfg("return 1; x = 2;");
        assert_eq!(g.labels(), &["return 1"]);
        let g = cfg("int f() { }");
        assert_eq!(g.labels(), &["return"]);
    }

    #[test]
    fn loop_condition_temporaries_are_inside_the_loop() {
        let g = cfg("while (i + 1 < n) { i = i + 1; }");
        assert_eq!(
            g.labels(),
            &["$t0 = i + 1", "if $t0 < n", "i = i + 1", "return"]
        );
        assert!(g.has_edge(2, 0));
    }
}
