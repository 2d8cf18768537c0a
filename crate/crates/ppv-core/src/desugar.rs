//! Macro elimination: let/mlet/product-measure sugar, `Pr`/`Er`/`Var`,
//! sup/Lipschitz/Wasserstein equations, the divergence characterization, and
//! lifted assertions. Output trees contain no macro nodes; the pass is
//! idempotent.

use crate::ast::{CaseArms, Expr, Formula, Prim};
use crate::error::Result;
use crate::liftings::{expand_rel, expand_unary, MacroEnv};
use crate::subst::{free_vars_expr, free_vars_formula, fresh_name};
use crate::types::TypeTerm;
use std::collections::BTreeSet;

pub fn desugar_expr(e: &Expr, env: &MacroEnv) -> Result<Expr> {
    de(e, env)
}

pub fn desugar_formula(f: &Formula, env: &MacroEnv) -> Result<Formula> {
    df(f, env)
}

fn bx(e: Expr) -> Box<Expr> {
    Box::new(e)
}

fn de(e: &Expr, env: &MacroEnv) -> Result<Expr> {
    Ok(match e {
        Expr::Var(_) | Expr::Const(_) | Expr::Lebesgue => e.clone(),
        Expr::Prim(p, args) => Expr::Prim(
            *p,
            args.iter().map(|a| de(a, env)).collect::<Result<_>>()?,
        ),
        Expr::App(a, b) => Expr::App(bx(de(a, env)?), bx(de(b, env)?)),
        Expr::Lam(x, t, b) => Expr::Lam(x.clone(), t.clone(), bx(de(b, env)?)),
        Expr::Pair(a, b) => Expr::Pair(bx(de(a, env)?), bx(de(b, env)?)),
        Expr::Proj(i, a) => Expr::Proj(*i, bx(de(a, env)?)),
        Expr::Case(s, arms) => {
            let arms = match arms {
                CaseArms::Bool { tt, ff } => CaseArms::Bool {
                    tt: bx(de(tt, env)?),
                    ff: bx(de(ff, env)?),
                },
                CaseArms::List {
                    nil,
                    head,
                    tail,
                    cons,
                } => CaseArms::List {
                    nil: bx(de(nil, env)?),
                    head: head.clone(),
                    tail: tail.clone(),
                    cons: bx(de(cons, env)?),
                },
                CaseArms::Pair { fst, snd, body } => CaseArms::Pair {
                    fst: fst.clone(),
                    snd: snd.clone(),
                    body: bx(de(body, env)?),
                },
            };
            Expr::Case(bx(de(s, env)?), arms)
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
            body: bx(de(body, env)?),
        },
        Expr::Ret(a) => Expr::Ret(bx(de(a, env)?)),
        Expr::Bind(a, b) => Expr::Bind(bx(de(a, env)?), bx(de(b, env)?)),
        Expr::Observe(a, b) => Expr::Observe(bx(de(a, env)?), bx(de(b, env)?)),
        Expr::Uniform(a, b) => Expr::Uniform(bx(de(a, env)?), bx(de(b, env)?)),
        Expr::Bern(a) => Expr::Bern(bx(de(a, env)?)),
        Expr::Gauss(a, b) => Expr::Gauss(bx(de(a, env)?), bx(de(b, env)?)),
        Expr::Gpdf(a, b) => Expr::Gpdf(bx(de(a, env)?), bx(de(b, env)?)),
        Expr::Expect { binder, src, body } => Expr::Expect {
            binder: binder.clone(),
            src: bx(de(src, env)?),
            body: bx(de(body, env)?),
        },
        Expr::Scale(a, b) => Expr::Scale(bx(de(a, env)?), bx(de(b, env)?)),
        Expr::Normalize(a) => Expr::Normalize(bx(de(a, env)?)),
        Expr::Ascribe(a, t) => Expr::Ascribe(bx(de(a, env)?), t.clone()),

        Expr::MacLet { x, ann, rhs, body } => {
            let t = ann.clone().unwrap_or(TypeTerm::Hole);
            Expr::app(
                Expr::Lam(x.clone(), t, bx(de(body, env)?)),
                de(rhs, env)?,
            )
        }
        Expr::MacMlet { x, ann, rhs, body } => {
            let t = ann.clone().unwrap_or(TypeTerm::Hole);
            Expr::bind(
                de(rhs, env)?,
                Expr::Lam(x.clone(), t, bx(de(body, env)?)),
            )
        }
        Expr::MacTensor(a, b) => {
            let a = de(a, env)?;
            let b = de(b, env)?;
            let mut avoid: BTreeSet<String> = free_vars_expr(&a);
            avoid.extend(free_vars_expr(&b));
            let x = fresh_name("tens_a", &avoid);
            avoid.insert(x.clone());
            let y = fresh_name("tens_b", &avoid);
            Expr::bind(
                a,
                Expr::Lam(
                    x.clone(),
                    TypeTerm::Hole,
                    bx(Expr::bind(
                        b,
                        Expr::Lam(
                            y.clone(),
                            TypeTerm::Hole,
                            bx(Expr::ret(Expr::pair(Expr::var(&x), Expr::var(&y)))),
                        ),
                    )),
                ),
            )
        }
        Expr::MacPr { binder, src, event } => Expr::Expect {
            binder: binder.clone(),
            src: bx(de(src, env)?),
            body: bx(Expr::if_then_else(
                de(event, env)?,
                Expr::one(),
                Expr::zero(),
            )),
        },
        Expr::MacEr { binder, src, body } => {
            let src = de(src, env)?;
            let body = de(body, env)?;
            real_expectation(binder, src, body)
        }
        Expr::MacVar { binder, src, body } => {
            // Var[x ~ e](t) = Er[x ~ e](t * t) - (Er[x ~ e](t))^2
            let src = de(src, env)?;
            let body = de(body, env)?;
            let second = real_expectation(
                binder,
                src.clone(),
                Expr::prim(Prim::Mul, vec![body.clone(), body.clone()]),
            );
            let first = real_expectation(binder, src, body);
            Expr::prim(
                Prim::Sub,
                vec![second, Expr::prim(Prim::Mul, vec![first.clone(), first])],
            )
        }
    })
}

/// The positive/negative-part expansion of a real-valued expectation:
/// `psub(E[x ~ e](if t > 0 then preal(abs(t)) else 0),
///       E[x ~ e](if t < 0 then preal(abs(t)) else 0))`.
fn real_expectation(binder: &str, src: Expr, body: Expr) -> Expr {
    let part = |cmp: Prim, body: &Expr| {
        Expr::if_then_else(
            Expr::prim(cmp, vec![body.clone(), Expr::zero()]),
            Expr::prim(
                Prim::RealToPReal,
                vec![Expr::prim(Prim::Abs, vec![body.clone()])],
            ),
            Expr::zero(),
        )
    };
    Expr::prim(
        Prim::PSub,
        vec![
            Expr::expect(binder, src.clone(), part(Prim::Gt, &body)),
            Expr::expect(binder, src, part(Prim::Lt, &body)),
        ],
    )
}

fn bf(f: Formula) -> Box<Formula> {
    Box::new(f)
}

fn df(f: &Formula, env: &MacroEnv) -> Result<Formula> {
    Ok(match f {
        Formula::Eq(a, b) => Formula::Eq(de(a, env)?, de(b, env)?),
        Formula::Lt(a, b) => Formula::Lt(de(a, env)?, de(b, env)?),
        Formula::Top | Formula::Bot => f.clone(),
        Formula::And(a, b) => Formula::And(bf(df(a, env)?), bf(df(b, env)?)),
        Formula::Imp(a, b) => Formula::Imp(bf(df(a, env)?), bf(df(b, env)?)),
        Formula::Not(a) => Formula::Not(bf(df(a, env)?)),
        Formula::Forall(x, t, b) => Formula::Forall(x.clone(), t.clone(), bf(df(b, env)?)),
        Formula::Exists(x, t, b) => Formula::Exists(x.clone(), t.clone(), bf(df(b, env)?)),

        Formula::MacLe(a, b) => Formula::Not(bf(Formula::Lt(de(b, env)?, de(a, env)?))),
        Formula::MacIff(a, b) => {
            let a = df(a, env)?;
            let b = df(b, env)?;
            Formula::and(
                Formula::imp(a.clone(), b.clone()),
                Formula::imp(b, a),
            )
        }
        Formula::MacSup {
            target,
            binder,
            ty,
            cond,
            body,
        } => {
            let target = de(target, env)?;
            let cond = df(cond, env)?;
            let body = de(body, env)?;
            sup_formula(&target, binder, ty, &cond, &body)
        }
        Formula::MacLip {
            target,
            arg_ty,
            dom_metric,
            cod_metric,
            func,
        } => {
            let target = de(target, env)?;
            let dm = de(dom_metric, env)?;
            let cm = de(cod_metric, env)?;
            let fe = de(func, env)?;
            lipschitz_formula(&target, arg_ty, &dm, &cm, &fe)
        }
        Formula::MacWass {
            target,
            arg_ty,
            metric,
            mu1,
            mu2,
        } => {
            let target = de(target, env)?;
            let metric = de(metric, env)?;
            let mu1 = de(mu1, env)?;
            let mu2 = de(mu2, env)?;
            wasserstein_formula(&target, arg_ty, &metric, &mu1, &mu2)
        }
        Formula::MacKlDef { d1, d2, density } => {
            let d1 = de(d1, env)?;
            let d2 = de(d2, env)?;
            let g = de(density, env)?;
            let mut avoid = free_vars_expr(&d1);
            avoid.extend(free_vars_expr(&g));
            let x = fresh_name("x", &avoid);
            let log_density = Expr::prim(Prim::Log, vec![Expr::app(g.clone(), Expr::var(&x))]);
            Formula::imp(
                Formula::eq(d1.clone(), Expr::Scale(bx(d2.clone()), bx(g))),
                Formula::eq(
                    Expr::prim(Prim::Kl, vec![d1.clone(), d2]),
                    real_expectation(&x, d1, log_density),
                ),
            )
        }
        Formula::MacULift {
            param,
            grade,
            val_ty,
            body,
        } => {
            let p = env.get(param)?;
            let grade = de(grade, env)?;
            let body = df(body, env)?;
            expand_unary(p, &grade, val_ty, &body)?
        }
        Formula::MacRLift {
            param,
            grade,
            val_ty1,
            val_ty2,
            body,
        } => {
            let p = env.get(param)?;
            let grade = de(grade, env)?;
            let body = df(body, env)?;
            expand_rel(p, &grade, val_ty1, val_ty2, &body)?
        }
    })
}

/// `(forall x. cond => body <= a) /\ (forall b. (forall x. cond => body <= b) => a <= b)`.
fn sup_formula(
    target: &Expr,
    binder: &str,
    ty: &TypeTerm,
    cond: &Formula,
    body: &Expr,
) -> Formula {
    let mut avoid = free_vars_expr(target);
    avoid.extend(free_vars_formula(cond));
    avoid.extend(free_vars_expr(body));
    avoid.insert(binder.to_string());
    let ub = fresh_name("ub", &avoid);
    let is_bound = |b: Expr| {
        Formula::forall(
            binder,
            ty.clone(),
            Formula::imp(cond.clone(), Formula::le(body.clone(), b)),
        )
    };
    Formula::and(
        is_bound(target.clone()),
        Formula::forall(
            &ub,
            TypeTerm::Real,
            Formula::imp(
                is_bound(Expr::var(&ub)),
                Formula::le(target.clone(), Expr::var(&ub)),
            ),
        ),
    )
}

/// Lipschitz-constant equation: `a = sup over pairs p of
/// cod_metric <f (pi1 p), f (pi2 p)> / dom_metric <pi1 p, pi2 p>`.
fn lipschitz_formula(
    target: &Expr,
    arg_ty: &TypeTerm,
    dom_metric: &Expr,
    cod_metric: &Expr,
    func: &Expr,
) -> Formula {
    let mut avoid = free_vars_expr(target);
    avoid.extend(free_vars_expr(dom_metric));
    avoid.extend(free_vars_expr(cod_metric));
    avoid.extend(free_vars_expr(func));
    let p = fresh_name("pair", &avoid);
    let s1 = Expr::proj(1, Expr::var(&p));
    let s2 = Expr::proj(2, Expr::var(&p));
    let num = Expr::app(
        cod_metric.clone(),
        Expr::pair(
            Expr::app(func.clone(), s1.clone()),
            Expr::app(func.clone(), s2.clone()),
        ),
    );
    let den = Expr::app(dom_metric.clone(), Expr::pair(s1, s2));
    sup_formula(
        target,
        &p,
        &TypeTerm::prod(arg_ty.clone(), arg_ty.clone()),
        &Formula::Top,
        &Expr::prim(Prim::Div, vec![num, den]),
    )
}

/// Wasserstein equation: sup over 1-Lipschitz test functions of the difference
/// of expectations.
fn wasserstein_formula(
    target: &Expr,
    arg_ty: &TypeTerm,
    metric: &Expr,
    mu1: &Expr,
    mu2: &Expr,
) -> Formula {
    let mut avoid = free_vars_expr(target);
    avoid.extend(free_vars_expr(metric));
    avoid.extend(free_vars_expr(mu1));
    avoid.extend(free_vars_expr(mu2));
    let f = fresh_name("test_f", &avoid);
    avoid.insert(f.clone());
    let kvar = fresh_name("lip_k", &avoid);
    avoid.insert(kvar.clone());
    let s = fresh_name("s", &avoid);

    // Metric on the real line, as a pair function.
    let p = fresh_name("rp", &avoid);
    let real_metric = Expr::Lam(
        p.clone(),
        TypeTerm::prod(TypeTerm::Real, TypeTerm::Real),
        bx(Expr::prim(
            Prim::RealToPReal,
            vec![Expr::prim(
                Prim::Abs,
                vec![Expr::prim(
                    Prim::Sub,
                    vec![Expr::proj(1, Expr::var(&p)), Expr::proj(2, Expr::var(&p))],
                )],
            )],
        )),
    );

    let lip_cond = Formula::exists(
        &kvar,
        TypeTerm::Real,
        Formula::and(
            lipschitz_formula(
                &Expr::var(&kvar),
                arg_ty,
                metric,
                &real_metric,
                &Expr::var(&f),
            ),
            Formula::le(Expr::var(&kvar), Expr::one()),
        ),
    );
    let body = Expr::prim(
        Prim::Sub,
        vec![
            real_expectation(&s, mu1.clone(), Expr::app(Expr::var(&f), Expr::var(&s))),
            real_expectation(&s, mu2.clone(), Expr::app(Expr::var(&f), Expr::var(&s))),
        ],
    );
    sup_formula(
        target,
        &f,
        &TypeTerm::arrow(arg_ty.clone(), TypeTerm::Real),
        &lip_cond,
        &body,
    )
}

/// True when no macro node remains anywhere in the formula.
pub fn formula_is_core(f: &Formula) -> bool {
    match f {
        Formula::Eq(a, b) | Formula::Lt(a, b) => expr_is_core(a) && expr_is_core(b),
        Formula::Top | Formula::Bot => true,
        Formula::And(a, b) | Formula::Imp(a, b) => formula_is_core(a) && formula_is_core(b),
        Formula::Not(a) => formula_is_core(a),
        Formula::Forall(_, _, b) | Formula::Exists(_, _, b) => formula_is_core(b),
        _ => false,
    }
}

pub fn expr_is_core(e: &Expr) -> bool {
    match e {
        Expr::Var(_) | Expr::Const(_) | Expr::Lebesgue => true,
        Expr::Prim(_, args) => args.iter().all(expr_is_core),
        Expr::App(a, b)
        | Expr::Pair(a, b)
        | Expr::Bind(a, b)
        | Expr::Observe(a, b)
        | Expr::Uniform(a, b)
        | Expr::Gauss(a, b)
        | Expr::Gpdf(a, b)
        | Expr::Scale(a, b) => expr_is_core(a) && expr_is_core(b),
        Expr::Lam(_, _, b) => expr_is_core(b),
        Expr::Proj(_, a) | Expr::Ret(a) | Expr::Bern(a) | Expr::Normalize(a) => expr_is_core(a),
        Expr::Ascribe(a, _) => expr_is_core(a),
        Expr::Case(s, arms) => {
            expr_is_core(s)
                && match arms {
                    CaseArms::Bool { tt, ff } => expr_is_core(tt) && expr_is_core(ff),
                    CaseArms::List { nil, cons, .. } => expr_is_core(nil) && expr_is_core(cons),
                    CaseArms::Pair { body, .. } => expr_is_core(body),
                }
        }
        Expr::Letrec { body, .. } => expr_is_core(body),
        Expr::Expect { src, body, .. } => expr_is_core(src) && expr_is_core(body),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_expr_str, parse_formula_str};
    use crate::printer::print_expr;
    use crate::subst::{alpha_eq_expr, alpha_eq_formula};

    fn env() -> MacroEnv {
        MacroEnv::default()
    }

    #[test]
    fn mlet_is_bind_lambda() {
        let e = parse_expr_str("mlet x = d in return x").unwrap();
        let d = desugar_expr(&e, &env()).unwrap();
        let expect = parse_expr_str("bind d (fun x : _ -> return x)").unwrap();
        assert!(alpha_eq_expr(&d, &expect), "{}", print_expr(&d));
    }

    #[test]
    fn tensor_is_nested_bind() {
        let e = parse_expr_str("e1 (*) e2").unwrap();
        let d = desugar_expr(&e, &env()).unwrap();
        let expect = parse_expr_str(
            "bind e1 (fun x : _ -> bind e2 (fun y : _ -> return (<x, y>)))",
        )
        .unwrap();
        assert!(alpha_eq_expr(&d, &expect), "{}", print_expr(&d));
    }

    #[test]
    fn pr_is_indicator_expectation() {
        let e = parse_expr_str("Pr[x ~ e](x > 0)").unwrap();
        let d = desugar_expr(&e, &env()).unwrap();
        let expect = parse_expr_str("E[x ~ e](if x > 0 then 1 else 0)").unwrap();
        assert!(alpha_eq_expr(&d, &expect), "{}", print_expr(&d));
    }

    #[test]
    fn desugar_idempotent() {
        for src in [
            "Var[x ~ e](x + 1)",
            "Er[x ~ e](h x)",
            "mlet x = d in let y = x in return (y :: [])",
            "Uniform(0,1) (*) Uniform(0,1)",
        ] {
            let e = parse_expr_str(src).unwrap();
            let d1 = desugar_expr(&e, &env()).unwrap();
            let d2 = desugar_expr(&d1, &env()).unwrap();
            assert!(alpha_eq_expr(&d1, &d2), "not idempotent on {src}");
            assert!(expr_is_core(&d1), "macro left in {src}");
        }
    }

    #[test]
    fn unary_lift_expansion_shape() {
        let f = parse_formula_str("U(S_ub, alpha, bool, ~(r' = true))").unwrap();
        let d = desugar_formula(&f, &env()).unwrap();
        assert!(formula_is_core(&d));
        let expect = parse_formula_str(
            "forall beta : preal. forall f : (bool -> D[unit]). \
             (forall x : bool. ~(x = true) => E[y ~ f x](1) <= beta) => \
             E[y ~ bind r f](1) <= alpha + beta",
        )
        .unwrap();
        let expect = desugar_formula(&expect, &env()).unwrap();
        assert!(alpha_eq_formula(&d, &expect));
    }

    #[test]
    fn rel_lift_expansion_is_core() {
        let f = parse_formula_str("R(S_cpl, (), real, real, r1' = r2')").unwrap();
        let d = desugar_formula(&f, &env()).unwrap();
        assert!(formula_is_core(&d));
    }

    #[test]
    fn var_of_sup_macros_expand() {
        let f = parse_formula_str("a = sup x : real st x < 1. x").unwrap();
        let d = desugar_formula(&f, &env()).unwrap();
        assert!(formula_is_core(&d));
        let f = parse_formula_str("k1 = lipk[real](dm, dc, f)").unwrap();
        assert!(formula_is_core(&desugar_formula(&f, &env()).unwrap()));
        let f = parse_formula_str("w = wass[real](dm, mu1, mu2)").unwrap();
        assert!(formula_is_core(&desugar_formula(&f, &env()).unwrap()));
        let f = parse_formula_str("kl_def(d1, d2, f)").unwrap();
        assert!(formula_is_core(&desugar_formula(&f, &env()).unwrap()));
    }
}
