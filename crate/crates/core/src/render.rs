//! Deterministic textual rendering. Parse-level terms render back to parseable source.

use alloc::string::String;
use core::fmt::{self, Display, Formatter, Write};

use crate::parser::{FnSig, Program};
use crate::syntax::{Chan, Checkpoint, Collab, Endpoint, Expr, Op, Process, Side, Sort, Value};
use crate::types::{RoleRef, Roles, SessionType};

pub fn render<T: Display + ?Sized>(v: &T) -> String {
    let mut s = String::new();
    let _ = write!(s, "{v}");
    s
}

impl Display for Sort {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sort::Bool => "bool",
            Sort::Int => "int",
            Sort::Str => "str",
        })
    }
}

impl Display for Value {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Str(s) => {
                f.write_char('"')?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => f.write_char(c)?,
                    }
                }
                f.write_char('"')
            }
        }
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Op(Op::Or, _) => 1,
        Expr::Op(Op::And, _) => 2,
        Expr::Op(Op::Eq | Op::Lt, _) => 3,
        Expr::Op(Op::Add | Op::Concat, _) => 4,
        Expr::Op(Op::Not, _) => 5,
        _ => 6,
    }
}

fn expr_at(e: &Expr, min: u8, f: &mut Formatter<'_>) -> fmt::Result {
    if prec(e) < min {
        f.write_char('(')?;
        expr_at(e, 0, f)?;
        return f.write_char(')');
    }
    match e {
        Expr::Lit(v) => write!(f, "{v}"),
        Expr::Var(x) => f.write_str(x),
        Expr::Call(g, args) => {
            write!(f, "{g}(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                expr_at(a, 0, f)?;
            }
            f.write_char(')')
        }
        Expr::Op(Op::Not, args) => {
            f.write_char('!')?;
            expr_at(&args[0], 5, f)
        }
        Expr::Op(op, args) => {
            let (sym, p) = match op {
                Op::Or => ("||", 1),
                Op::And => ("&&", 2),
                Op::Eq => ("==", 3),
                Op::Lt => ("<", 3),
                Op::Add => ("+", 4),
                Op::Concat => ("++", 4),
                Op::Not => unreachable!(),
            };
            // Left-associative; comparisons do not chain.
            let (lmin, rmin) = if p == 3 { (4, 4) } else { (p, p + 1) };
            expr_at(&args[0], lmin, f)?;
            write!(f, " {sym} ")?;
            expr_at(&args[1], rmin, f)
        }
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        expr_at(self, 0, f)
    }
}

impl Display for Endpoint {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self.side {
            Side::Plus => write!(f, "~s{}", self.session.0),
            Side::Minus => write!(f, "s{}", self.session.0),
            Side::Role(r) => write!(f, "s{}[{r}]", self.session.0),
        }
    }
}

impl Display for Chan {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Chan::Var(x) => f.write_str(x),
            Chan::End(e) => write!(f, "{e}"),
        }
    }
}

fn peer(p: &Option<u32>, f: &mut Formatter<'_>) -> fmt::Result {
    match p {
        Some(r) => write!(f, "@{r}"),
        None => Ok(()),
    }
}

impl Display for Process {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Process::Send { chan, peer: p, expr, cont } => {
                write!(f, "{chan}!<{expr}>")?;
                peer(p, f)?;
                write!(f, ". {cont}")
            }
            Process::Recv { chan, peer: p, var, sort, cont } => {
                write!(f, "{chan}?({var}:{sort})")?;
                peer(p, f)?;
                write!(f, ". {cont}")
            }
            Process::Select { chan, peer: p, label, cont } => {
                write!(f, "{chan}<+{label}")?;
                peer(p, f)?;
                write!(f, ". {cont}")
            }
            Process::Branch { chan, peer: p, arms } => {
                write!(f, "{chan}>+{{")?;
                for (i, (l, q)) in arms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{l}: {q}")?;
                }
                f.write_char('}')?;
                peer(p, f)
            }
            Process::If { cond, then, els } => write!(f, "if {cond} then {then} else {els}"),
            Process::Rec { var, body } => write!(f, "rec {var}. {body}"),
            Process::Var(x) => f.write_str(x),
            Process::Inact => f.write_char('0'),
            Process::Commit(cont) => write!(f, "commit. {cont}"),
            Process::Roll => f.write_str("roll"),
            Process::Abort => f.write_str("abort"),
        }
    }
}

impl Display for Checkpoint {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let tag = if self.imposed { "imp" } else { "ckp" };
        write!(f, "{{{tag} {}}}", self.process)
    }
}

impl Display for Collab {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Collab::Request { chan, arity, var, body } => {
                write!(f, "request {chan}")?;
                if let Some(n) = arity {
                    write!(f, "[{n}]")?;
                }
                write!(f, "({var}). {body}")
            }
            Collab::Accept { chan, role, var, body } => {
                write!(f, "accept {chan}")?;
                if let Some(p) = role {
                    write!(f, "[{p}]")?;
                }
                write!(f, "({var}). {body}")
            }
            Collab::Par(..) => {
                for (i, c) in self.components().into_iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            Collab::Session { name, saved, body } => write!(f, "session s{} {{{saved}}} ({body})", name.0),
            Collab::Log { endpoint, checkpoint, current } => write!(f, "{endpoint}:{checkpoint} {current}"),
            Collab::RollError => f.write_str("roll_error"),
            Collab::ComError => f.write_str("com_error"),
        }
    }
}

impl Display for Roles {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self.from {
            RoleRef::Hole => write!(f, "[_,{}]", self.to),
            RoleRef::Role(p) => write!(f, "[{p},{}]", self.to),
        }
    }
}

fn roles(r: &Option<Roles>, f: &mut Formatter<'_>) -> fmt::Result {
    match r {
        Some(r) => write!(f, "{r}"),
        None => Ok(()),
    }
}

/// Renders a type in prefix position, parenthesizing choices.
fn ty_prefix(t: &SessionType, f: &mut Formatter<'_>) -> fmt::Result {
    match t {
        SessionType::Choice(..) => write!(f, "({t})"),
        _ => write!(f, "{t}"),
    }
}

impl Display for SessionType {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            SessionType::Out { roles: r, sort, cont } => {
                f.write_char('!')?;
                roles(r, f)?;
                write!(f, "[{sort}]. ")?;
                ty_prefix(cont, f)
            }
            SessionType::In { roles: r, sort, cont } => {
                f.write_char('?')?;
                roles(r, f)?;
                write!(f, "[{sort}]. ")?;
                ty_prefix(cont, f)
            }
            SessionType::Sel { roles: r, label, cont } => {
                f.write_str("sel")?;
                roles(r, f)?;
                write!(f, "[{label}]. ")?;
                ty_prefix(cont, f)
            }
            SessionType::Brn { roles: r, arms } => {
                f.write_str("brn")?;
                roles(r, f)?;
                f.write_char('[')?;
                for (i, (l, t)) in arms.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{l}: {t}")?;
                }
                f.write_char(']')
            }
            SessionType::Choice(l, r) => {
                write!(f, "{l} (+) ")?;
                ty_prefix(r, f)
            }
            SessionType::Var(x) => f.write_str(x),
            SessionType::Mu(x, body) => {
                write!(f, "mu {x}. ")?;
                ty_prefix(body, f)
            }
            SessionType::End => f.write_str("end"),
            SessionType::Err => f.write_str("err"),
            SessionType::Cmt(cont) => {
                f.write_str("cmt. ")?;
                ty_prefix(cont, f)
            }
            SessionType::Roll => f.write_str("roll"),
            SessionType::Abt => f.write_str("abt"),
        }
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for (name, FnSig { args, result, domain }) in &self.signatures {
            write!(f, "fn {name}(")?;
            for (i, s) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{s}")?;
            }
            write!(f, "): {result}")?;
            if let Some(d) = domain {
                f.write_str(" in {")?;
                for (i, v) in d.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_char('}')?;
            }
            f.write_str(";\n")?;
        }
        write!(f, "main = {}", self.main)
    }
}
