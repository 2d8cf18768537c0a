//! The conversion relation used by [CONV] steps: beta reduction, projection
//! and case reduction, monadic unit/associativity laws, expectation over a
//! point mass, literal arithmetic, and distribution of the int-to-real
//! coercion. Letrec bodies are never unfolded here.

use crate::ast::{CaseArms, Const, Expr, Formula, Prim};
use crate::error::{CoreError, Result};
use crate::subst::{alpha_eq_expr, subst_expr};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

const FUEL: u32 = 100_000;

/// Normal form under the conversion relation.
pub fn normalize(e: &Expr) -> Result<Expr> {
    let mut fuel = FUEL;
    nf(e, &mut fuel)
}

/// Conversion equality `t1 = t2` (normal forms alpha-equal).
pub fn conv_eq(a: &Expr, b: &Expr) -> Result<bool> {
    Ok(alpha_eq_expr(&normalize(a)?, &normalize(b)?))
}

/// Fold ground literal arithmetic only (no beta or monadic steps), so that
/// schema-built terms agree with parser-folded literals.
pub fn fold_ground_expr(e: &Expr) -> Expr {
    use crate::ast::CaseArms;
    match e {
        Expr::Prim(p, args) => {
            let args = args.iter().map(fold_ground_expr).collect::<Vec<_>>();
            // Mirror the parser exactly: only literal division folds.
            if *p == Prim::Div {
                if let (Expr::Const(Const::Rat(a)), Expr::Const(Const::Rat(b))) =
                    (&args[0], &args[1])
                {
                    if !b.is_zero() {
                        return Expr::Const(Const::Rat(a / b));
                    }
                }
            }
            Expr::Prim(*p, args)
        }
        Expr::App(a, b) => Expr::app(fold_ground_expr(a), fold_ground_expr(b)),
        Expr::Lam(x, t, b) => Expr::Lam(x.clone(), t.clone(), Box::new(fold_ground_expr(b))),
        Expr::Pair(a, b) => Expr::pair(fold_ground_expr(a), fold_ground_expr(b)),
        Expr::Proj(i, a) => Expr::Proj(*i, Box::new(fold_ground_expr(a))),
        Expr::Case(s, arms) => {
            let arms = match arms {
                CaseArms::Bool { tt, ff } => CaseArms::Bool {
                    tt: Box::new(fold_ground_expr(tt)),
                    ff: Box::new(fold_ground_expr(ff)),
                },
                CaseArms::List {
                    nil,
                    head,
                    tail,
                    cons,
                } => CaseArms::List {
                    nil: Box::new(fold_ground_expr(nil)),
                    head: head.clone(),
                    tail: tail.clone(),
                    cons: Box::new(fold_ground_expr(cons)),
                },
                CaseArms::Pair { fst, snd, body } => CaseArms::Pair {
                    fst: fst.clone(),
                    snd: snd.clone(),
                    body: Box::new(fold_ground_expr(body)),
                },
            };
            Expr::Case(Box::new(fold_ground_expr(s)), arms)
        }
        Expr::Ret(a) => Expr::Ret(Box::new(fold_ground_expr(a))),
        Expr::Bind(a, b) => Expr::bind(fold_ground_expr(a), fold_ground_expr(b)),
        Expr::Observe(a, b) => Expr::Observe(
            Box::new(fold_ground_expr(a)),
            Box::new(fold_ground_expr(b)),
        ),
        Expr::Uniform(a, b) => Expr::Uniform(
            Box::new(fold_ground_expr(a)),
            Box::new(fold_ground_expr(b)),
        ),
        Expr::Bern(a) => Expr::Bern(Box::new(fold_ground_expr(a))),
        Expr::Gauss(a, b) => Expr::Gauss(
            Box::new(fold_ground_expr(a)),
            Box::new(fold_ground_expr(b)),
        ),
        Expr::Gpdf(a, b) => Expr::Gpdf(
            Box::new(fold_ground_expr(a)),
            Box::new(fold_ground_expr(b)),
        ),
        Expr::Expect { binder, src, body } => Expr::Expect {
            binder: binder.clone(),
            src: Box::new(fold_ground_expr(src)),
            body: Box::new(fold_ground_expr(body)),
        },
        Expr::Scale(a, b) => Expr::Scale(
            Box::new(fold_ground_expr(a)),
            Box::new(fold_ground_expr(b)),
        ),
        Expr::Normalize(a) => Expr::Normalize(Box::new(fold_ground_expr(a))),
        Expr::Ascribe(a, t) => Expr::Ascribe(Box::new(fold_ground_expr(a)), t.clone()),
        Expr::Letrec {
            f,
            x,
            dom,
            cod,
            body,
        } => Expr::Letrec {
            f: f.clone(),
            x: x.clone(),
            dom: dom.clone(),
            cod: cod.clone(),
            body: Box::new(fold_ground_expr(body)),
        },
        other => other.clone(),
    }
}

pub fn fold_ground_formula(f: &Formula) -> Formula {
    match f {
        Formula::Eq(a, b) => Formula::Eq(fold_ground_expr(a), fold_ground_expr(b)),
        Formula::Lt(a, b) => Formula::Lt(fold_ground_expr(a), fold_ground_expr(b)),
        Formula::And(a, b) => Formula::and(fold_ground_formula(a), fold_ground_formula(b)),
        Formula::Imp(a, b) => Formula::imp(fold_ground_formula(a), fold_ground_formula(b)),
        Formula::Not(a) => Formula::not(fold_ground_formula(a)),
        Formula::Forall(x, t, b) => {
            Formula::Forall(x.clone(), t.clone(), Box::new(fold_ground_formula(b)))
        }
        Formula::Exists(x, t, b) => {
            Formula::Exists(x.clone(), t.clone(), Box::new(fold_ground_formula(b)))
        }
        other => other.clone(),
    }
}

fn spend(fuel: &mut u32) -> Result<()> {
    if *fuel == 0 {
        return Err(CoreError::Rewrite(
            "conversion fuel exhausted (diverging reduction?)".into(),
        ));
    }
    *fuel -= 1;
    Ok(())
}

fn nf(e: &Expr, fuel: &mut u32) -> Result<Expr> {
    spend(fuel)?;
    let e = match e {
        Expr::Var(_) | Expr::Const(_) | Expr::Lebesgue => e.clone(),
        Expr::Prim(p, args) => {
            let args = args
                .iter()
                .map(|a| nf(a, fuel))
                .collect::<Result<Vec<_>>>()?;
            fold_prim(*p, args)
        }
        Expr::App(f, a) => {
            let f = nf(f, fuel)?;
            let a = nf(a, fuel)?;
            match f {
                Expr::Lam(x, _, b) => nf(&subst_expr(&b, &x, &a), fuel)?,
                f => Expr::app(f, a),
            }
        }
        Expr::Lam(x, t, b) => Expr::Lam(x.clone(), t.clone(), Box::new(nf(b, fuel)?)),
        Expr::Pair(a, b) => Expr::pair(nf(a, fuel)?, nf(b, fuel)?),
        Expr::Proj(i, a) => {
            let a = nf(a, fuel)?;
            match a {
                Expr::Pair(x, y) => {
                    if *i == 1 {
                        *x
                    } else {
                        *y
                    }
                }
                a => Expr::Proj(*i, Box::new(a)),
            }
        }
        Expr::Case(s, arms) => {
            let s = nf(s, fuel)?;
            match (&s, arms) {
                (Expr::Const(Const::Bool(bv)), CaseArms::Bool { tt, ff }) => {
                    return nf(if *bv { tt } else { ff }, fuel);
                }
                (Expr::Const(Const::Nil), CaseArms::List { nil, .. }) => {
                    return nf(nil, fuel);
                }
                (Expr::Prim(Prim::Cons, hs), CaseArms::List {
                    head, tail, cons, ..
                }) => {
                    let with_h = subst_expr(cons, head, &hs[0]);
                    let with_t = subst_expr(&with_h, tail, &hs[1]);
                    return nf(&with_t, fuel);
                }
                (Expr::Pair(a, b), CaseArms::Pair { fst, snd, body }) => {
                    let w = subst_expr(&subst_expr(body, fst, a), snd, b);
                    return nf(&w, fuel);
                }
                _ => {}
            }
            let arms = match arms {
                CaseArms::Bool { tt, ff } => CaseArms::Bool {
                    tt: Box::new(nf(tt, fuel)?),
                    ff: Box::new(nf(ff, fuel)?),
                },
                CaseArms::List {
                    nil,
                    head,
                    tail,
                    cons,
                } => CaseArms::List {
                    nil: Box::new(nf(nil, fuel)?),
                    head: head.clone(),
                    tail: tail.clone(),
                    cons: Box::new(nf(cons, fuel)?),
                },
                CaseArms::Pair { fst, snd, body } => CaseArms::Pair {
                    fst: fst.clone(),
                    snd: snd.clone(),
                    body: Box::new(nf(body, fuel)?),
                },
            };
            Expr::Case(Box::new(s), arms)
        }
        Expr::Letrec {
            f,
            x,
            dom,
            cod,
            body,
        } => Expr::Letrec {
            f: f.clone(),
            x: x.clone(),
            dom: dom.clone(),
            cod: cod.clone(),
            body: Box::new(nf(body, fuel)?),
        },
        Expr::Ret(a) => Expr::Ret(Box::new(nf(a, fuel)?)),
        Expr::Bind(m, k) => {
            let m = nf(m, fuel)?;
            let k = nf(k, fuel)?;
            match m {
                // Left unit.
                Expr::Ret(v) => {
                    let app = Expr::app(k, *v);
                    return nf(&app, fuel);
                }
                // Associativity, rebracketed to the right.
                Expr::Bind(m1, k1) => {
                    let x = crate::subst::fresh_name("assoc_x", &{
                        let mut s = crate::subst::free_vars_expr(&k1);
                        s.extend(crate::subst::free_vars_expr(&k));
                        s
                    });
                    let inner = Expr::bind(Expr::app((*k1).clone(), Expr::var(&x)), k);
                    let re = Expr::bind(
                        (*m1).clone(),
                        Expr::Lam(x, crate::types::TypeTerm::Hole, Box::new(inner)),
                    );
                    return nf(&re, fuel);
                }
                m => {
                    // Right unit.
                    if let Expr::Lam(x, _, b) = &k {
                        if let Expr::Ret(v) = &**b {
                            if matches!(&**v, Expr::Var(y) if y == x) {
                                return Ok(m);
                            }
                        }
                    }
                    Expr::bind(m, k)
                }
            }
        }
        Expr::Observe(a, b) => Expr::Observe(Box::new(nf(a, fuel)?), Box::new(nf(b, fuel)?)),
        Expr::Uniform(a, b) => Expr::Uniform(Box::new(nf(a, fuel)?), Box::new(nf(b, fuel)?)),
        Expr::Bern(a) => Expr::Bern(Box::new(nf(a, fuel)?)),
        Expr::Gauss(a, b) => Expr::Gauss(Box::new(nf(a, fuel)?), Box::new(nf(b, fuel)?)),
        Expr::Gpdf(a, b) => Expr::Gpdf(Box::new(nf(a, fuel)?), Box::new(nf(b, fuel)?)),
        Expr::Expect { binder, src, body } => {
            let src = nf(src, fuel)?;
            let body = nf(body, fuel)?;
            // Expectation over a point mass evaluates the body there.
            if let Expr::Ret(v) = &src {
                return nf(&subst_expr(&body, binder, v), fuel);
            }
            Expr::Expect {
                binder: binder.clone(),
                src: Box::new(src),
                body: Box::new(body),
            }
        }
        Expr::Scale(a, b) => Expr::Scale(Box::new(nf(a, fuel)?), Box::new(nf(b, fuel)?)),
        Expr::Normalize(a) => Expr::Normalize(Box::new(nf(a, fuel)?)),
        // Ascriptions record elaboration facts; conversion looks through them.
        Expr::Ascribe(a, _) => nf(a, fuel)?,
        other => {
            return Err(CoreError::Rewrite(format!(
                "conversion on a macro node `{}`; desugar first",
                crate::printer::print_expr(other)
            )))
        }
    };
    Ok(e)
}

fn rat(e: &Expr) -> Option<&BigRational> {
    match e {
        Expr::Const(Const::Rat(r)) => Some(r),
        _ => None,
    }
}

fn is_inf(e: &Expr) -> bool {
    matches!(e, Expr::Const(Const::Infinity))
}

fn rc(r: BigRational) -> Expr {
    Expr::Const(Const::Rat(r))
}

fn bl(b: bool) -> Expr {
    Expr::Const(Const::Bool(b))
}

/// Literal folding, including the `0 * inf = 0` convention on preal and the
/// ring-homomorphism laws of `int2real`.
fn fold_prim(p: Prim, args: Vec<Expr>) -> Expr {
    use Prim::*;
    let infinity = || Expr::Const(Const::Infinity);
    match p {
        Add => match (rat(&args[0]), rat(&args[1])) {
            (Some(a), Some(b)) => return rc(a + b),
            (Some(a), None) if a.is_zero() => return args[1].clone(),
            (None, Some(b)) if b.is_zero() => return args[0].clone(),
            _ if is_inf(&args[0]) && rat(&args[1]).is_some() => return infinity(),
            _ if is_inf(&args[1]) && rat(&args[0]).is_some() => return infinity(),
            _ if is_inf(&args[0]) && is_inf(&args[1]) => return infinity(),
            _ => {}
        },
        Sub => {
            if let (Some(a), Some(b)) = (rat(&args[0]), rat(&args[1])) {
                return rc(a - b);
            }
        }
        Mul => match (rat(&args[0]), rat(&args[1])) {
            (Some(a), Some(b)) => return rc(a * b),
            (Some(a), None) if a.is_one() && !is_inf(&args[1]) => return args[1].clone(),
            (None, Some(b)) if b.is_one() && !is_inf(&args[0]) => return args[0].clone(),
            (Some(a), None) if a.is_zero() && !is_inf(&args[1]) => return rc(BigRational::zero()),
            (None, Some(b)) if b.is_zero() && !is_inf(&args[0]) => return rc(BigRational::zero()),
            (Some(a), None) if is_inf(&args[1]) => {
                return if a.is_zero() { rc(BigRational::zero()) } else { infinity() };
            }
            (None, Some(b)) if is_inf(&args[0]) => {
                return if b.is_zero() { rc(BigRational::zero()) } else { infinity() };
            }
            _ if is_inf(&args[0]) && is_inf(&args[1]) => return infinity(),
            _ => {}
        },
        Div => match (rat(&args[0]), rat(&args[1])) {
            (Some(a), Some(b)) if !b.is_zero() => return rc(a / b),
            (Some(a), Some(_zero)) if !a.is_zero() => return infinity(),
            (Some(_), None) if is_inf(&args[1]) => return rc(BigRational::zero()),
            _ => {}
        },
        Neg => {
            if let Some(a) = rat(&args[0]) {
                return rc(-a.clone());
            }
        }
        PSub => match (rat(&args[0]), rat(&args[1])) {
            (Some(a), Some(b)) => return rc(a - b),
            _ => {}
        },
        Abs => {
            if let Some(a) = rat(&args[0]) {
                return rc(a.abs());
            }
        }
        Min => match (rat(&args[0]), rat(&args[1])) {
            (Some(a), Some(b)) => return rc(a.min(b).clone()),
            (Some(a), None) if is_inf(&args[1]) => return rc(a.clone()),
            (None, Some(b)) if is_inf(&args[0]) => return rc(b.clone()),
            _ => {}
        },
        Max => match (rat(&args[0]), rat(&args[1])) {
            (Some(a), Some(b)) => return rc(a.max(b).clone()),
            _ if is_inf(&args[0]) || is_inf(&args[1]) => return infinity(),
            _ => {}
        },
        // Comparisons canonicalize to Lt/Le with flipped operands.
        Gt => return fold_prim(Lt, vec![args[1].clone(), args[0].clone()]),
        Ge => return fold_prim(Le, vec![args[1].clone(), args[0].clone()]),
        Lt | Le => {
            let cmp = |a: &BigRational, b: &BigRational| match p {
                Lt => a < b,
                Le => a <= b,
                _ => unreachable!(),
            };
            match (rat(&args[0]), rat(&args[1])) {
                (Some(a), Some(b)) => return bl(cmp(a, b)),
                (Some(_), None) if is_inf(&args[1]) => {
                    return bl(matches!(p, Lt | Le));
                }
                (None, Some(_)) if is_inf(&args[0]) => {
                    return bl(matches!(p, Gt | Ge));
                }
                _ if is_inf(&args[0]) && is_inf(&args[1]) => {
                    return bl(matches!(p, Le | Ge));
                }
                _ => {}
            }
        }
        And => match (&args[0], &args[1]) {
            (Expr::Const(Const::Bool(a)), Expr::Const(Const::Bool(b))) => return bl(*a && *b),
            (Expr::Const(Const::Bool(true)), other)
            | (other, Expr::Const(Const::Bool(true))) => return other.clone(),
            (Expr::Const(Const::Bool(false)), _) | (_, Expr::Const(Const::Bool(false))) => {
                return bl(false)
            }
            _ => {}
        },
        Or => match (&args[0], &args[1]) {
            (Expr::Const(Const::Bool(a)), Expr::Const(Const::Bool(b))) => return bl(*a || *b),
            (Expr::Const(Const::Bool(false)), other)
            | (other, Expr::Const(Const::Bool(false))) => return other.clone(),
            (Expr::Const(Const::Bool(true)), _) | (_, Expr::Const(Const::Bool(true))) => {
                return bl(true)
            }
            _ => {}
        },
        Not => {
            if let Expr::Const(Const::Bool(b)) = &args[0] {
                return bl(!*b);
            }
        }
        Len => match &args[0] {
            Expr::Const(Const::Nil) => return rc(BigRational::zero()),
            Expr::Prim(Cons, ht) => {
                return fold_prim(
                    Add,
                    vec![
                        rc(BigRational::from_integer(1.into())),
                        fold_prim(Len, vec![ht[1].clone()]),
                    ],
                );
            }
            _ => {}
        },
        IntToReal => match &args[0] {
            // Value-preserving on literals; a ring homomorphism otherwise.
            Expr::Const(Const::Rat(_)) => return args[0].clone(),
            Expr::Prim(op @ (Add | Sub | Mul), xs) => {
                return fold_prim(
                    *op,
                    vec![
                        fold_prim(IntToReal, vec![xs[0].clone()]),
                        fold_prim(IntToReal, vec![xs[1].clone()]),
                    ],
                );
            }
            Expr::Prim(Neg, xs) => {
                return fold_prim(Neg, vec![fold_prim(IntToReal, vec![xs[0].clone()])]);
            }
            _ => {}
        },
        RealToPReal => {
            if let Some(a) = rat(&args[0]) {
                if !a.is_negative() {
                    return args[0].clone();
                }
            }
        }
        Cons | Kl | Sqrt | Exp | Log => {}
    }
    Expr::Prim(p, args)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_expr_str;
    use crate::desugar::desugar_expr;
    use crate::liftings::MacroEnv;

    fn norm(src: &str) -> Expr {
        let e = parse_expr_str(src).unwrap();
        let d = desugar_expr(&e, &MacroEnv::default()).unwrap();
        normalize(&d).unwrap()
    }

    fn assert_conv(a: &str, b: &str) {
        let (na, nb) = (norm(a), norm(b));
        assert!(
            alpha_eq_expr(&na, &nb),
            "normal forms differ:\n  {}\n  {}",
            crate::printer::print_expr(&na),
            crate::printer::print_expr(&nb)
        );
    }

    #[test]
    fn monad_left_unit() {
        assert_conv("bind (return v) f", "f v");
    }

    #[test]
    fn projection_beta() {
        assert_conv("pi1 (<a, b>)", "a");
        assert_conv("(fun x : real -> x + x) 3", "6");
    }

    #[test]
    fn tensor_marginal_shape() {
        // mlet v = (x (*) X) in return (pi1 v)  reduces to nested binds
        assert_conv(
            "mlet v = (x (*) X) in return (pi1 v)",
            "bind x (fun a : _ -> bind X (fun b : _ -> return a))",
        );
    }

    #[test]
    fn right_unit_and_assoc() {
        assert_conv("bind m (fun x : real -> return x)", "m");
        assert_conv(
            "bind (bind m k) g",
            "bind m (fun x : _ -> bind (k x) g)",
        );
    }

    #[test]
    fn dirac_expectation() {
        assert_conv("E[x ~ return 2](preal(x * 3))", "6");
    }

    #[test]
    fn infinity_conventions() {
        assert_conv("0 * inf", "0");
        assert_conv("2 * inf", "inf");
        assert_conv("1 / 0", "inf");
        assert_conv("len(1 :: 2 :: [])", "2");
        assert_conv("int2real(n + 1)", "int2real(n) + 1");
    }

    #[test]
    fn letrec_not_unfolded() {
        let e = norm("(letrec f (i : int) : M[int] = if i <= 0 then return 0 else f (i - 1)) 3");
        // The application stays; only the interpreter runs recursions.
        assert!(matches!(e, Expr::App(..)));
    }
}
