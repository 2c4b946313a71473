//! Lexer and recursive-descent parser for the mini-language.
//!
//! Precedence, loosest first: `== !=`, `< <= > >=`, `& | ^` (one level),
//! `+ -`, `* / %`, unary `- !`, then postfix indexing. All binary levels are
//! left-associative. Placing the bitwise operators on a single level keeps
//! the tree shape unchanged when one of them is swapped for another.

use super::ast::{BinOp, Expr, Function, Param, Stmt, Type, UnOp};
use crate::error::{Error, Result};

const TYPE_NAMES: &[&str] = &["int", "float", "bool", "void"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
    line: usize,
    column: usize,
}

const PUNCTS: &[&str] = &[
    "<=", ">=", "==", "!=", "+", "-", "*", "/", "%", "<", ">", "&", "|", "^", "!", "=", "(", ")",
    "{", "}", "[", "]", ";", ",",
];

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    while i < bytes.len() {
        let c = bytes[i];
        let column = i - line_start + 1;
        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                offset: start,
                line,
                column,
            });
            continue;
        }
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            out.push(Token {
                tok: Tok::Number(src[start..i].to_string()),
                offset: start,
                line,
                column,
            });
            continue;
        }
        match PUNCTS.iter().find(|p| src[i..].starts_with(**p)) {
            Some(p) => {
                i += p.len();
                out.push(Token {
                    tok: Tok::Punct(p),
                    offset: start,
                    line,
                    column,
                });
            }
            None => {
                return Err(Error::Parse {
                    line,
                    column,
                    message: format!(
                        "unexpected character {:?}",
                        src[i..].chars().next().unwrap()
                    ),
                })
            }
        }
    }
    let column = bytes.len() - line_start + 1;
    out.push(Token {
        tok: Tok::Eof,
        offset: bytes.len(),
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Number(s) => format!("number '{s}'"),
        Tok::Punct(p) => format!("'{p}'"),
        Tok::Eof => "end of input".into(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T> {
        let t = &self.tokens[self.pos];
        Err(Error::Parse {
            line: t.line,
            column: t.column,
            message: format!("expected {expected}, found {}", describe(&t.tok)),
        })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<()> {
        if self.eat(p) {
            Ok(())
        } else {
            self.error(&format!("'{p}'"))
        }
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error("identifier"),
        }
    }

    fn at_type(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if TYPE_NAMES.contains(&s.as_str()))
    }

    fn ty(&mut self) -> Result<Type> {
        let base = match self.peek().clone() {
            Tok::Ident(s) if TYPE_NAMES.contains(&s.as_str()) => {
                self.bump();
                s
            }
            _ => return self.error("type"),
        };
        let array = if self.is_punct("[") && matches!(self.peek_at(1), Tok::Punct("]")) {
            self.bump();
            self.bump();
            true
        } else {
            false
        };
        Ok(Type { base, array })
    }

    fn starts_function(&self) -> bool {
        if !self.at_type() {
            return false;
        }
        let mut k = 1;
        if matches!(self.peek_at(1), Tok::Punct("[")) {
            k = 3;
        }
        matches!(self.peek_at(k), Tok::Ident(_)) && matches!(self.peek_at(k + 1), Tok::Punct("("))
    }

    fn program(&mut self) -> Result<Function> {
        let f = if self.starts_function() {
            let return_type = self.ty()?;
            let name = self.ident()?;
            self.expect("(")?;
            let mut params = Vec::new();
            if !self.is_punct(")") {
                loop {
                    let ty = self.ty()?;
                    let name = self.ident()?;
                    params.push(Param { ty, name });
                    if !self.eat(",") {
                        break;
                    }
                }
            }
            self.expect(")")?;
            let body = self.block()?;
            Function {
                name,
                return_type: Some(return_type),
                params,
                body,
            }
        } else {
            let mut body = Vec::new();
            while *self.peek() != Tok::Eof {
                body.push(self.stmt()?);
            }
            Function {
                name: "main".into(),
                return_type: None,
                params: Vec::new(),
                body,
            }
        };
        if *self.peek() != Tok::Eof {
            return self.error("end of input");
        }
        Ok(f)
    }

    fn block(&mut self) -> Result<Vec<Stmt>> {
        self.expect("{")?;
        let mut body = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return self.error("'}'");
            }
            body.push(self.stmt()?);
        }
        self.bump();
        Ok(body)
    }

    fn stmt(&mut self) -> Result<Stmt> {
        if self.is_keyword("if") {
            self.bump();
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            let then_body = self.block()?;
            let else_body = if self.is_keyword("else") {
                self.bump();
                if self.is_keyword("if") {
                    Some(vec![self.stmt()?])
                } else {
                    Some(self.block()?)
                }
            } else {
                None
            };
            return Ok(Stmt::If {
                cond,
                then_body,
                else_body,
            });
        }
        if self.is_keyword("while") {
            self.bump();
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            let body = self.block()?;
            return Ok(Stmt::While { cond, body });
        }
        if self.is_keyword("for") {
            self.bump();
            self.expect("(")?;
            let init = if self.is_punct(";") {
                None
            } else {
                Some(Box::new(self.simple_stmt()?))
            };
            self.expect(";")?;
            let cond = self.expr()?;
            self.expect(";")?;
            let update = if self.is_punct(")") {
                None
            } else {
                Some(Box::new(self.simple_stmt()?))
            };
            self.expect(")")?;
            let body = self.block()?;
            return Ok(Stmt::For {
                init,
                cond,
                update,
                body,
            });
        }
        if self.is_keyword("return") {
            self.bump();
            let value = if self.is_punct(";") {
                None
            } else {
                Some(self.expr()?)
            };
            self.expect(";")?;
            return Ok(Stmt::Return(value));
        }
        let s = self.simple_stmt()?;
        self.expect(";")?;
        Ok(s)
    }

    /// Declaration, assignment or call, without the trailing `;`.
    fn simple_stmt(&mut self) -> Result<Stmt> {
        if self.at_type() {
            let ty = self.ty()?;
            let name = self.ident()?;
            let init = if self.eat("=") {
                Some(self.expr()?)
            } else {
                None
            };
            return Ok(Stmt::Decl { ty, name, init });
        }
        let target = self.postfix()?;
        match target {
            Expr::Call(..) if !self.is_punct("=") => Ok(Stmt::Call(target)),
            Expr::Var(_) | Expr::Index(..) => {
                self.expect("=")?;
                let value = self.expr()?;
                Ok(Stmt::Assign { target, value })
            }
            _ => self.error("assignment target"),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        self.binary_level(0)
    }

    fn binary_level(&mut self, level: usize) -> Result<Expr> {
        const LEVELS: &[&[(&str, BinOp)]] = &[
            &[("==", BinOp::Eq), ("!=", BinOp::Ne)],
            &[
                ("<=", BinOp::Le),
                (">=", BinOp::Ge),
                ("<", BinOp::Lt),
                (">", BinOp::Gt),
            ],
            &[
                ("&", BinOp::BitAnd),
                ("|", BinOp::BitOr),
                ("^", BinOp::BitXor),
            ],
            &[("+", BinOp::Add), ("-", BinOp::Sub)],
            &[("*", BinOp::Mul), ("/", BinOp::Div), ("%", BinOp::Rem)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary_level(level + 1)?;
        loop {
            let found = LEVELS[level].iter().find(|(p, _)| self.is_punct(p));
            let Some(&(_, op)) = found else { break };
            let offset = self.bump().offset;
            let rhs = self.binary_level(level + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                offset,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat("-") {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        if self.eat("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr> {
        let mut e = self.primary()?;
        while self.eat("[") {
            let idx = self.expr()?;
            self.expect("]")?;
            e = Expr::Index(Box::new(e), Box::new(idx));
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                Ok(Expr::Literal(n))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Expr::Literal(s))
            }
            Tok::Ident(s) if s == "new" => {
                self.bump();
                let base = match self.peek().clone() {
                    Tok::Ident(t) if TYPE_NAMES.contains(&t.as_str()) => {
                        self.bump();
                        t
                    }
                    _ => return self.error("element type"),
                };
                self.expect("[")?;
                let len = self.expr()?;
                self.expect("]")?;
                Ok(Expr::NewArray(base, Box::new(len)))
            }
            Tok::Ident(s) if !is_reserved(&s) => {
                self.bump();
                if self.eat("(") {
                    let mut args = Vec::new();
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat(",") {
                                break;
                            }
                        }
                    }
                    self.expect(")")?;
                    Ok(Expr::Call(s, args))
                } else {
                    Ok(Expr::Var(s))
                }
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            _ => self.error("expression"),
        }
    }
}

fn is_reserved(s: &str) -> bool {
    TYPE_NAMES.contains(&s)
        || matches!(
            s,
            "if" | "else" | "while" | "for" | "return" | "new" | "true" | "false"
        )
}

/// Parses one function (or a bare statement list) into an AST.
pub fn parse(source: &str) -> Result<Function> {
    let tokens = lex(source)?;
    Parser { tokens, pos: 0 }.program()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_assignment() {
        let f = parse("sum = 0;").unwrap();
        assert_eq!(
            f.body,
            vec![Stmt::Assign {
                target: Expr::Var("sum".into()),
                value: Expr::Literal("0".into())
            }]
        );
    }

    #[test]
    fn while_loop_with_one_statement() {
        let f = parse("while (i < n) { i = i + 1; }").unwrap();
        match &f.body[..] {
            [Stmt::While { cond, body }] => {
                assert!(matches!(cond, Expr::Binary { op: BinOp::Lt, .. }));
                assert_eq!(body.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_expression_points_at_semicolon() {
        match parse("x = ;") {
            Err(Error::Parse {
                line,
                column,
                message,
            }) => {
                assert_eq!((line, column), (1, 5));
                assert!(message.contains("';'"), "{message}");
                assert!(message.contains("expected expression"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn error_positions_track_lines() {
        let err = parse("int f(int a) {\n  a = a +;\n}").unwrap_err();
        assert!(
            matches!(
                err,
                Error::Parse {
                    line: 2,
                    column: 10,
                    ..
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn function_header_and_arrays() {
        let f =
            parse("int[] f(int[] a, int n) { int[] b = new int[n]; b[0] = a[n - 1]; return b; }")
                .unwrap();
        assert_eq!(f.name, "f");
        assert_eq!(f.params.len(), 2);
        assert!(f.params[0].ty.array);
        assert_eq!(f.body.len(), 3);
    }

    #[test]
    fn precedence_and_offsets() {
        let src = "x = a + b * c;";
        let f = parse(src).unwrap();
        let ops = f.binary_operators();
        assert_eq!(ops, vec![(BinOp::Add, 6), (BinOp::Mul, 10)]);
        assert_eq!(&src[6..7], "+");
        let f = parse("if ((x & 1) == 0) { y = 1; }").unwrap();
        let ops: Vec<BinOp> = f.binary_operators().into_iter().map(|(o, _)| o).collect();
        assert_eq!(ops, vec![BinOp::BitAnd, BinOp::Eq]);
    }

    #[test]
    fn comments_and_else_if() {
        let f =
            parse("// header\nif (a < b) { x = 1; } else if (a > b) { x = 2; } else { x = 3; }")
                .unwrap();
        assert!(matches!(&f.body[0], Stmt::If { else_body: Some(b), .. } if b.len() == 1));
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        assert!(parse("int f() { return 1; } }").is_err());
        assert!(parse("x = 1").is_err());
        assert!(parse("x = 1 $").is_err());
    }
}
