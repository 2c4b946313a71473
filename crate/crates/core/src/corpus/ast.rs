use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitOr,
    BitXor,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::BitAnd => "&",
            BinOp::BitOr => "|",
            BinOp::BitXor => "^",
        }
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Type {
    pub base: String,
    pub array: bool,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.array {
            write!(f, "{}[]", self.base)
        } else {
            f.write_str(&self.base)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub ty: Type,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Numeric or boolean literal, kept as written.
    Literal(String),
    Var(String),
    Index(Box<Expr>, Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        /// Byte offset of the operator token in the source.
        offset: usize,
    },
    Unary(UnOp, Box<Expr>),
    Call(String, Vec<Expr>),
    NewArray(String, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign {
        target: Expr,
        value: Expr,
    },
    Decl {
        ty: Type,
        name: String,
        init: Option<Expr>,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Option<Vec<Stmt>>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Expr,
        update: Option<Box<Stmt>>,
        body: Vec<Stmt>,
    },
    Return(Option<Expr>),
    Call(Expr),
}

/// One parsed function. Bare statement lists parse into a function named
/// `main` with no parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: String,
    pub return_type: Option<Type>,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
}

impl Expr {
    /// Visits every binary operator in source order.
    pub fn for_each_binary(&self, f: &mut impl FnMut(BinOp, usize)) {
        match self {
            Expr::Literal(_) | Expr::Var(_) => {}
            Expr::Index(a, b) => {
                a.for_each_binary(f);
                b.for_each_binary(f);
            }
            Expr::Binary {
                op,
                lhs,
                rhs,
                offset,
            } => {
                lhs.for_each_binary(f);
                f(*op, *offset);
                rhs.for_each_binary(f);
            }
            Expr::Unary(_, e) | Expr::NewArray(_, e) => e.for_each_binary(f),
            Expr::Call(_, args) => args.iter().for_each(|a| a.for_each_binary(f)),
        }
    }
}

impl Stmt {
    pub fn for_each_binary(&self, f: &mut impl FnMut(BinOp, usize)) {
        match self {
            Stmt::Assign { target, value } => {
                target.for_each_binary(f);
                value.for_each_binary(f);
            }
            Stmt::Decl { init, .. } => {
                if let Some(e) = init {
                    e.for_each_binary(f);
                }
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
            } => {
                cond.for_each_binary(f);
                then_body.iter().for_each(|s| s.for_each_binary(f));
                if let Some(b) = else_body {
                    b.iter().for_each(|s| s.for_each_binary(f));
                }
            }
            Stmt::While { cond, body } => {
                cond.for_each_binary(f);
                body.iter().for_each(|s| s.for_each_binary(f));
            }
            Stmt::For {
                init,
                cond,
                update,
                body,
            } => {
                if let Some(s) = init {
                    s.for_each_binary(f);
                }
                cond.for_each_binary(f);
                if let Some(s) = update {
                    s.for_each_binary(f);
                }
                body.iter().for_each(|s| s.for_each_binary(f));
            }
            Stmt::Return(e) => {
                if let Some(e) = e {
                    e.for_each_binary(f);
                }
            }
            Stmt::Call(e) => e.for_each_binary(f),
        }
    }
}

impl Function {
    /// Every binary operator occurrence as `(operator, source offset)`.
    pub fn binary_operators(&self) -> Vec<(BinOp, usize)> {
        let mut out = Vec::new();
        for s in &self.body {
            s.for_each_binary(&mut |op, off| out.push((op, off)));
        }
        out
    }
}
