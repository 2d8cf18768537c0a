//! Surface-syntax printer. `parse(print(t))` is the identity up to
//! alpha-equivalence; tests enforce this on the whole corpus.

use crate::ast::{CaseArms, Const, Expr, Formula, Prim};
use num_traits::Signed;
use std::fmt::Write;

// Expression precedence levels, loosest first.
const P_LOW: u8 = 0; // fun / let / if / case / observe
const P_OR: u8 = 1;
const P_AND: u8 = 2;
const P_CMP: u8 = 3;
const P_CONS: u8 = 4;
const P_TENSOR: u8 = 5;
const P_ADD: u8 = 6;
const P_MUL: u8 = 7;
const P_UNARY: u8 = 8;
const P_APP: u8 = 9;
const P_ATOM: u8 = 10;

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    pe(e, P_LOW, &mut s);
    s
}

pub fn print_formula(f: &Formula) -> String {
    let mut s = String::new();
    pf(f, 0, &mut s);
    s
}

fn paren(cond: bool, out: &mut String, k: impl FnOnce(&mut String)) {
    if cond {
        out.push('(');
        k(out);
        out.push(')');
    } else {
        k(out);
    }
}

fn print_const(c: &Const, out: &mut String) {
    match c {
        Const::Rat(r) => {
            if r.is_negative() {
                if r.is_integer() {
                    let _ = write!(out, "(-{})", -r.numer().clone());
                } else {
                    let _ = write!(out, "(-{}/{})", -r.numer().clone(), r.denom());
                }
            } else if r.is_integer() {
                let _ = write!(out, "{}", r.numer());
            } else {
                let _ = write!(out, "{}/{}", r.numer(), r.denom());
            }
        }
        Const::Bool(true) => out.push_str("true"),
        Const::Bool(false) => out.push_str("false"),
        Const::Unit => out.push_str("()"),
        Const::Infinity => out.push_str("inf"),
        Const::Pi => out.push_str("PI"),
        Const::Euler => out.push_str("EULER"),
        Const::Nil => out.push_str("[]"),
    }
}

fn binop_level(p: Prim) -> Option<(u8, &'static str)> {
    match p {
        Prim::Or => Some((P_OR, "||")),
        Prim::And => Some((P_AND, "&&")),
        Prim::Lt => Some((P_CMP, "<")),
        Prim::Le => Some((P_CMP, "<=")),
        Prim::Gt => Some((P_CMP, ">")),
        Prim::Ge => Some((P_CMP, ">=")),
        Prim::Cons => Some((P_CONS, "::")),
        Prim::Add => Some((P_ADD, "+")),
        Prim::Sub => Some((P_ADD, "-")),
        Prim::Mul => Some((P_MUL, "*")),
        Prim::Div => Some((P_MUL, "/")),
        _ => None,
    }
}

fn call_name(p: Prim) -> &'static str {
    match p {
        Prim::Neg => "neg",
        Prim::PSub => "psub",
        Prim::Abs => "abs",
        Prim::Min => "min",
        Prim::Max => "max",
        Prim::Sqrt => "sqrt",
        Prim::Exp => "exp",
        Prim::Log => "log",
        Prim::Len => "len",
        Prim::IntToReal => "int2real",
        Prim::RealToPReal => "preal",
        Prim::Kl => "kl",
        Prim::Not => "not",
        _ => unreachable!("binary operator printed as call"),
    }
}

fn pe(e: &Expr, min: u8, out: &mut String) {
    match e {
        Expr::Var(x) => out.push_str(x),
        Expr::Const(c) => print_const(c, out),
        Expr::Lebesgue => out.push_str("Lebesgue"),
        Expr::Prim(p, args) => {
            if let Some((lvl, sym)) = binop_level(*p) {
                // Left-assoc at lvl except Cons (right-assoc).
                let (ll, rl) = if *p == Prim::Cons {
                    (lvl + 1, lvl)
                } else {
                    (lvl, lvl + 1)
                };
                paren(min > lvl, out, |out| {
                    pe(&args[0], ll, out);
                    let _ = write!(out, " {sym} ");
                    pe(&args[1], rl, out);
                });
            } else if *p == Prim::Not {
                paren(min > P_UNARY, out, |out| {
                    out.push_str("not ");
                    pe(&args[0], P_APP, out);
                });
            } else {
                out.push_str(call_name(*p));
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    pe(a, P_LOW, out);
                }
                out.push(')');
            }
        }
        Expr::App(f, a) => paren(min > P_APP, out, |out| {
            pe(f, P_APP, out);
            out.push(' ');
            pe(a, P_ATOM, out);
        }),
        Expr::Lam(x, t, b) => paren(min > P_LOW, out, |out| {
            if matches!(t, crate::types::TypeTerm::Arrow(..)) {
                let _ = write!(out, "fun {x} : ({t}) -> ");
            } else {
                let _ = write!(out, "fun {x} : {t} -> ");
            }
            pe(b, P_LOW, out);
        }),
        Expr::Pair(a, b) => paren(min > P_APP, out, |out| {
            out.push('<');
            pe(a, P_CONS, out);
            out.push_str(", ");
            pe(b, P_CONS, out);
            out.push('>');
        }),
        Expr::Proj(i, a) => paren(min > P_APP, out, |out| {
            let _ = write!(out, "pi{i} ");
            pe(a, P_ATOM, out);
        }),
        Expr::Case(scrut, arms) => paren(min > P_LOW, out, |out| match arms {
            CaseArms::Bool { tt, ff } => {
                out.push_str("if ");
                pe(scrut, P_OR, out);
                out.push_str(" then ");
                pe(tt, P_LOW, out);
                out.push_str(" else ");
                pe(ff, P_LOW, out);
            }
            CaseArms::List {
                nil,
                head,
                tail,
                cons,
            } => {
                out.push_str("case ");
                pe(scrut, P_OR, out);
                out.push_str(" with [] -> ");
                pe(nil, P_LOW, out);
                let _ = write!(out, " | {head} :: {tail} -> ");
                pe(cons, P_LOW, out);
            }
            CaseArms::Pair { fst, snd, body } => {
                out.push_str("case ");
                pe(scrut, P_OR, out);
                let _ = write!(out, " with <{fst}, {snd}> -> ");
                pe(body, P_LOW, out);
            }
        }),
        Expr::Letrec {
            f,
            x,
            dom,
            cod,
            body,
        } => paren(min > P_LOW, out, |out| {
            let _ = write!(out, "letrec {f} ({x} : {dom}) : {cod} = ");
            pe(body, P_LOW, out);
        }),
        Expr::Ret(a) => paren(min > P_APP, out, |out| {
            out.push_str("return ");
            pe(a, P_ATOM, out);
        }),
        Expr::Bind(a, b) => paren(min > P_APP, out, |out| {
            out.push_str("bind ");
            pe(a, P_ATOM, out);
            out.push(' ');
            pe(b, P_ATOM, out);
        }),
        Expr::Observe(a, b) => paren(min > P_LOW, out, |out| {
            out.push_str("observe ");
            pe(a, P_TENSOR, out);
            out.push_str(" as ");
            pe(b, P_LOW, out);
        }),
        Expr::Uniform(a, b) => {
            out.push_str("Uniform(");
            pe(a, P_LOW, out);
            out.push_str(", ");
            pe(b, P_LOW, out);
            out.push(')');
        }
        Expr::Bern(a) => {
            out.push_str("Bern(");
            pe(a, P_LOW, out);
            out.push(')');
        }
        Expr::Gauss(a, b) => {
            out.push_str("Gauss(");
            pe(a, P_LOW, out);
            out.push_str(", ");
            pe(b, P_LOW, out);
            out.push(')');
        }
        Expr::Gpdf(a, b) => {
            out.push_str("GPDF(");
            pe(a, P_LOW, out);
            out.push_str(", ");
            pe(b, P_LOW, out);
            out.push(')');
        }
        Expr::Expect { binder, src, body } => {
            let _ = write!(out, "E[{binder} ~ ");
            pe(src, P_LOW, out);
            out.push_str("](");
            pe(body, P_LOW, out);
            out.push(')');
        }
        Expr::Scale(a, b) => {
            out.push_str("scale(");
            pe(a, P_LOW, out);
            out.push_str(", ");
            pe(b, P_LOW, out);
            out.push(')');
        }
        Expr::Normalize(a) => {
            out.push_str("normalize(");
            pe(a, P_LOW, out);
            out.push(')');
        }
        Expr::Ascribe(a, t) => {
            out.push('(');
            pe(a, P_LOW, out);
            let _ = write!(out, " : {t})");
        }
        Expr::MacPr { binder, src, event } => {
            let _ = write!(out, "Pr[{binder} ~ ");
            pe(src, P_LOW, out);
            out.push_str("](");
            pe(event, P_LOW, out);
            out.push(')');
        }
        Expr::MacEr { binder, src, body } => {
            let _ = write!(out, "Er[{binder} ~ ");
            pe(src, P_LOW, out);
            out.push_str("](");
            pe(body, P_LOW, out);
            out.push(')');
        }
        Expr::MacVar { binder, src, body } => {
            let _ = write!(out, "Var[{binder} ~ ");
            pe(src, P_LOW, out);
            out.push_str("](");
            pe(body, P_LOW, out);
            out.push(')');
        }
        Expr::MacLet { x, ann, rhs, body } => paren(min > P_LOW, out, |out| {
            match ann {
                Some(t) => {
                    let _ = write!(out, "let {x} : {t} = ");
                }
                None => {
                    let _ = write!(out, "let {x} = ");
                }
            }
            pe(rhs, P_LOW, out);
            out.push_str(" in ");
            pe(body, P_LOW, out);
        }),
        Expr::MacMlet { x, ann, rhs, body } => paren(min > P_LOW, out, |out| {
            match ann {
                Some(t) => {
                    let _ = write!(out, "mlet {x} : {t} = ");
                }
                None => {
                    let _ = write!(out, "mlet {x} = ");
                }
            }
            pe(rhs, P_LOW, out);
            out.push_str(" in ");
            pe(body, P_LOW, out);
        }),
        Expr::MacTensor(a, b) => paren(min > P_TENSOR, out, |out| {
            pe(a, P_TENSOR + 1, out);
            out.push_str(" (*) ");
            pe(b, P_TENSOR + 1, out);
        }),
    }
}

// Formula precedence: 0 = quantifiers/iff, 1 = imp, 2 = and, 3 = atom/neg.
fn pf(f: &Formula, min: u8, out: &mut String) {
    match f {
        // Formula atoms parse their operands below the expression comparison
        // level, so comparison expressions inside them get parenthesized.
        Formula::Eq(a, b) => {
            pe(a, P_CONS, out);
            out.push_str(" = ");
            pe(b, P_CONS, out);
        }
        Formula::Lt(a, b) => {
            pe(a, P_CONS, out);
            out.push_str(" < ");
            pe(b, P_CONS, out);
        }
        Formula::MacLe(a, b) => {
            pe(a, P_CONS, out);
            out.push_str(" <= ");
            pe(b, P_CONS, out);
        }
        Formula::Top => out.push_str("top"),
        Formula::Bot => out.push_str("bot"),
        Formula::And(a, b) => paren(min > 2, out, |out| {
            pf(a, 3, out);
            out.push_str(" /\\ ");
            pf(b, 2, out);
        }),
        Formula::Imp(a, b) => paren(min > 1, out, |out| {
            pf(a, 2, out);
            out.push_str(" => ");
            pf(b, 1, out);
        }),
        Formula::MacIff(a, b) => paren(min > 0, out, |out| {
            pf(a, 1, out);
            out.push_str(" <-> ");
            pf(b, 1, out);
        }),
        Formula::Not(a) => paren(min > 3, out, |out| {
            out.push('~');
            pf(a, 3, out);
        }),
        Formula::Forall(x, t, b) => paren(min > 0, out, |out| {
            let _ = write!(out, "forall {x} : {t}. ");
            pf(b, 0, out);
        }),
        Formula::Exists(x, t, b) => paren(min > 0, out, |out| {
            let _ = write!(out, "exists {x} : {t}. ");
            pf(b, 0, out);
        }),
        Formula::MacSup {
            target,
            binder,
            ty,
            cond,
            body,
        } => {
            pe(target, P_CONS, out);
            let _ = write!(out, " = sup {binder} : {ty} st ");
            pf(cond, 1, out);
            out.push_str(". ");
            pe(body, P_CONS, out);
        }
        Formula::MacLip {
            target,
            arg_ty,
            dom_metric,
            cod_metric,
            func,
        } => {
            pe(target, P_CONS, out);
            let _ = write!(out, " = lipk[{arg_ty}](");
            pe(dom_metric, P_LOW, out);
            out.push_str(", ");
            pe(cod_metric, P_LOW, out);
            out.push_str(", ");
            pe(func, P_LOW, out);
            out.push(')');
        }
        Formula::MacWass {
            target,
            arg_ty,
            metric,
            mu1,
            mu2,
        } => {
            pe(target, P_CONS, out);
            let _ = write!(out, " = wass[{arg_ty}](");
            pe(metric, P_LOW, out);
            out.push_str(", ");
            pe(mu1, P_LOW, out);
            out.push_str(", ");
            pe(mu2, P_LOW, out);
            out.push(')');
        }
        Formula::MacKlDef { d1, d2, density } => {
            out.push_str("kl_def(");
            pe(d1, P_LOW, out);
            out.push_str(", ");
            pe(d2, P_LOW, out);
            out.push_str(", ");
            pe(density, P_LOW, out);
            out.push(')');
        }
        Formula::MacULift {
            param,
            grade,
            val_ty,
            body,
        } => {
            let _ = write!(out, "U({param}, ");
            pe(grade, P_LOW, out);
            let _ = write!(out, ", {val_ty}, ");
            pf(body, 0, out);
            out.push(')');
        }
        Formula::MacRLift {
            param,
            grade,
            val_ty1,
            val_ty2,
            body,
        } => {
            let _ = write!(out, "R({param}, ");
            pe(grade, P_LOW, out);
            let _ = write!(out, ", {val_ty1}, {val_ty2}, ");
            pf(body, 0, out);
            out.push(')');
        }
    }
}
