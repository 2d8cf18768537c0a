//! Bidirectional typing for desugared terms and formulas.
//!
//! Checking elaborates: implicit binder annotations (holes) are filled in,
//! int-to-real coercions become explicit `int2real` nodes, and uses of the
//! `D[t] <= M[t]` subsumption are recorded as ascriptions.

use crate::ast::{CaseArms, Const, Context, Expr, Formula, Prim};
use crate::error::{CoreError, Result};
use crate::types::TypeTerm;
use num_traits::Signed;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct TypeIssue {
    pub pos: Option<String>,
    pub msg: String,
}

/// Machine-readable outcome of a typecheck run.
#[derive(Debug, Clone, Serialize)]
pub struct TypeReport {
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r#type: Option<String>,
    pub errors: Vec<TypeIssue>,
}

impl TypeReport {
    pub fn accepted(t: &TypeTerm) -> TypeReport {
        TypeReport {
            verdict: "accepted".into(),
            r#type: Some(t.to_string()),
            errors: Vec::new(),
        }
    }
    pub fn rejected(err: &CoreError) -> TypeReport {
        TypeReport {
            verdict: "rejected".into(),
            r#type: None,
            errors: vec![TypeIssue {
                pos: None,
                msg: err.to_string(),
            }],
        }
    }
}

pub fn report_expr(ctx: &Context, e: &Expr) -> TypeReport {
    match infer_expr(ctx, e) {
        Ok((t, _)) => TypeReport::accepted(&t),
        Err(e) => TypeReport::rejected(&e),
    }
}

fn err(msg: impl Into<String>) -> CoreError {
    CoreError::ty(msg)
}

fn in_ctx(msg: String, e: &Expr) -> CoreError {
    err(format!("{msg} in `{}`", crate::printer::print_expr(e)))
}

/// Least numeric supertype for implicit widening; only int -> real is
/// implicit, real -> preal takes an explicit `preal(..)`.
fn numeric_join(a: &TypeTerm, b: &TypeTerm) -> Option<TypeTerm> {
    use TypeTerm::*;
    match (a, b) {
        (Int, Int) => Some(Int),
        (Int, Real) | (Real, Int) | (Real, Real) => Some(Real),
        (PReal, PReal) => Some(PReal),
        _ => None,
    }
}

/// Insert the widening coercion from `from` to `to` when needed.
fn widen(e: Expr, from: &TypeTerm, to: &TypeTerm) -> Expr {
    if from == to {
        return e;
    }
    match (from, to) {
        // Literals are polymorphic across the numeric types.
        (TypeTerm::Int, TypeTerm::Real) if matches!(e, Expr::Const(Const::Rat(_))) => e,
        (TypeTerm::Int, TypeTerm::Real) => Expr::prim(Prim::IntToReal, vec![e]),
        // Subsumption D <= M, recorded as an ascription.
        _ if from.subtype_of(to) => Expr::Ascribe(Box::new(e), to.clone()),
        _ => e,
    }
}

fn rat_const_checks(r: &num_rational::BigRational, want: &TypeTerm) -> bool {
    match want {
        TypeTerm::Int => r.is_integer(),
        TypeTerm::Real => true,
        TypeTerm::PReal => !r.is_negative(),
        _ => false,
    }
}

pub fn infer_expr(ctx: &Context, e: &Expr) -> Result<(TypeTerm, Expr)> {
    match e {
        Expr::Var(x) => match ctx.lookup(x) {
            Some(t) => Ok((t.clone(), e.clone())),
            None => Err(err(format!("unbound variable '{x}'"))),
        },
        Expr::Const(c) => {
            let t = match c {
                Const::Rat(r) => {
                    if r.is_integer() {
                        TypeTerm::Int
                    } else {
                        TypeTerm::Real
                    }
                }
                Const::Bool(_) => TypeTerm::Bool,
                Const::Unit => TypeTerm::Unit,
                Const::Infinity => TypeTerm::PReal,
                Const::Pi | Const::Euler => TypeTerm::Real,
                Const::Nil => return Err(err("cannot infer element type of []; ascribe it")),
            };
            Ok((t, e.clone()))
        }
        Expr::Lebesgue => Ok((TypeTerm::meas(TypeTerm::Real), e.clone())),
        Expr::Prim(p, args) => infer_prim(ctx, e, *p, args),
        Expr::App(f, a) => {
            // A beta redex with an implicit binder (from let-sugar) infers the
            // argument first and pushes its type into the lambda.
            if matches!(&**f, Expr::Lam(_, TypeTerm::Hole, _)) {
                let (ta, a2) = infer_expr(ctx, a)?;
                let (tf, f2) = infer_fun_against(ctx, f, &ta)?;
                let cod = match tf {
                    TypeTerm::Arrow(_, cod) => *cod,
                    _ => unreachable!(),
                };
                return Ok((cod, Expr::app(f2, a2)));
            }
            let (tf, f2) = infer_expr(ctx, f)?;
            match tf {
                TypeTerm::Arrow(dom, cod) => {
                    let a2 = check_expr(ctx, a, &dom)?;
                    Ok((*cod, Expr::app(f2, a2)))
                }
                other => Err(in_ctx(
                    format!("expected a function, found `{other}`"),
                    e,
                )),
            }
        }
        Expr::Lam(x, t, b) => {
            if matches!(t, TypeTerm::Hole) {
                return Err(in_ctx(
                    "cannot infer the type of this binder; annotate it".into(),
                    e,
                ));
            }
            let ctx2 = ctx.with_var(x, t.clone());
            let (tb, b2) = infer_expr(&ctx2, b)?;
            Ok((
                TypeTerm::arrow(t.clone(), tb),
                Expr::Lam(x.clone(), t.clone(), Box::new(b2)),
            ))
        }
        Expr::Pair(a, b) => {
            let (ta, a2) = infer_expr(ctx, a)?;
            let (tb, b2) = infer_expr(ctx, b)?;
            Ok((TypeTerm::prod(ta, tb), Expr::pair(a2, b2)))
        }
        Expr::Proj(i, a) => {
            let (ta, a2) = infer_expr(ctx, a)?;
            match ta {
                TypeTerm::Prod(t1, t2) => Ok((
                    if *i == 1 { *t1 } else { *t2 },
                    Expr::Proj(*i, Box::new(a2)),
                )),
                other => Err(in_ctx(format!("projection from non-product `{other}`"), e)),
            }
        }
        Expr::Case(s, arms) => infer_case(ctx, e, s, arms, None),
        Expr::Letrec {
            f,
            x,
            dom,
            cod,
            body,
        } => {
            if !matches!(dom, TypeTerm::Int | TypeTerm::List(_)) {
                return Err(in_ctx(
                    format!("recursion domain must be int or a list type, found `{dom}`"),
                    e,
                ));
            }
            let fty = TypeTerm::arrow(dom.clone(), cod.clone());
            let ctx2 = ctx.with_var(f, fty.clone()).with_var(x, dom.clone());
            let body2 = check_expr(&ctx2, body, cod)?;
            if let Some(site) = check_termination(f, x, dom, &body2) {
                return Err(in_ctx(
                    format!("recursive call `{site}` is not on a smaller argument"),
                    e,
                ));
            }
            Ok((
                fty,
                Expr::Letrec {
                    f: f.clone(),
                    x: x.clone(),
                    dom: dom.clone(),
                    cod: cod.clone(),
                    body: Box::new(body2),
                },
            ))
        }
        Expr::Ret(a) => {
            let (ta, a2) = infer_expr(ctx, a)?;
            Ok((TypeTerm::meas(ta), Expr::Ret(Box::new(a2))))
        }
        Expr::Bind(m, k) => {
            let (tm, m2) = infer_expr(ctx, m)?;
            let (elem, m_sub) = measure_elem(&tm)
                .ok_or_else(|| in_ctx(format!("bind of non-measure `{tm}`"), e))?;
            let (tk, k2) = infer_fun_against(ctx, k, &elem)?;
            match tk {
                TypeTerm::Arrow(_, cod) => match (&*cod, m_sub) {
                    (TypeTerm::SubProb(b), true) => {
                        Ok((TypeTerm::subprob((**b).clone()), Expr::bind(m2, k2)))
                    }
                    (TypeTerm::SubProb(b) | TypeTerm::Meas(b), _) => {
                        Ok((TypeTerm::meas((**b).clone()), Expr::bind(m2, k2)))
                    }
                    (other, _) => Err(in_ctx(
                        format!("bind continuation must return a measure, found `{other}`"),
                        e,
                    )),
                },
                other => Err(in_ctx(format!("bind continuation `{other}`"), e)),
            }
        }
        Expr::Observe(m, lik) => {
            let (tm, m2) = infer_expr(ctx, m)?;
            let (elem, _) = measure_elem(&tm)
                .ok_or_else(|| in_ctx(format!("observe on non-measure `{tm}`"), e))?;
            let lik2 = check_expr(
                ctx,
                lik,
                &TypeTerm::arrow(elem.clone(), TypeTerm::PReal),
            )?;
            Ok((
                TypeTerm::meas(elem),
                Expr::Observe(Box::new(m2), Box::new(lik2)),
            ))
        }
        Expr::Uniform(a, b) => {
            let a2 = check_expr(ctx, a, &TypeTerm::Real)?;
            let b2 = check_expr(ctx, b, &TypeTerm::Real)?;
            Ok((
                TypeTerm::meas(TypeTerm::Real),
                Expr::Uniform(Box::new(a2), Box::new(b2)),
            ))
        }
        Expr::Bern(p) => {
            let p2 = check_expr(ctx, p, &TypeTerm::PReal)?;
            Ok((TypeTerm::subprob(TypeTerm::Bool), Expr::Bern(Box::new(p2))))
        }
        Expr::Gauss(m, v) => {
            let m2 = check_expr(ctx, m, &TypeTerm::Real)?;
            let v2 = check_expr(ctx, v, &TypeTerm::PReal)?;
            Ok((
                TypeTerm::meas(TypeTerm::Real),
                Expr::Gauss(Box::new(m2), Box::new(v2)),
            ))
        }
        Expr::Gpdf(m, v) => {
            let m2 = check_expr(ctx, m, &TypeTerm::Real)?;
            let v2 = check_expr(ctx, v, &TypeTerm::PReal)?;
            Ok((
                TypeTerm::arrow(TypeTerm::Real, TypeTerm::PReal),
                Expr::Gpdf(Box::new(m2), Box::new(v2)),
            ))
        }
        Expr::Expect { binder, src, body } => {
            let (tm, src2) = infer_expr(ctx, src)?;
            let (elem, _) = measure_elem(&tm)
                .ok_or_else(|| in_ctx(format!("expectation over non-measure `{tm}`"), e))?;
            let ctx2 = ctx.with_var(binder, elem);
            let body2 = check_expr(&ctx2, body, &TypeTerm::PReal)?;
            Ok((
                TypeTerm::PReal,
                Expr::Expect {
                    binder: binder.clone(),
                    src: Box::new(src2),
                    body: Box::new(body2),
                },
            ))
        }
        Expr::Scale(m, w) => {
            let (tm, m2) = infer_expr(ctx, m)?;
            let (elem, is_sub) = measure_elem(&tm)
                .ok_or_else(|| in_ctx(format!("scale on non-measure `{tm}`"), e))?;
            let w2 = check_expr(ctx, w, &TypeTerm::arrow(elem.clone(), TypeTerm::PReal))?;
            // Scaling by a syntactically subunital weight preserves D.
            let ty = if is_sub && weight_subunital(&w2) {
                TypeTerm::subprob(elem)
            } else {
                TypeTerm::meas(elem)
            };
            Ok((ty, Expr::Scale(Box::new(m2), Box::new(w2))))
        }
        Expr::Normalize(m) => {
            let (tm, m2) = infer_expr(ctx, m)?;
            let (elem, _) = measure_elem(&tm)
                .ok_or_else(|| in_ctx(format!("normalize on non-measure `{tm}`"), e))?;
            Ok((TypeTerm::meas(elem), Expr::Normalize(Box::new(m2))))
        }
        Expr::Ascribe(a, t) => {
            let a2 = check_expr(ctx, a, t)?;
            Ok((t.clone(), a2))
        }
        other => Err(err(format!(
            "macro node reached the typechecker (desugar first): `{}`",
            crate::printer::print_expr(other)
        ))),
    }
}

/// `M[t]`/`D[t]` element type; the bool records whether it was `D`.
fn measure_elem(t: &TypeTerm) -> Option<(TypeTerm, bool)> {
    match t {
        TypeTerm::Meas(a) => Some(((**a).clone(), false)),
        TypeTerm::SubProb(a) => Some(((**a).clone(), true)),
        _ => None,
    }
}

/// Weight functions that keep a subprobability a subprobability: constant
/// literals in [0,1], two-literal indicators, and `min(t, c)` with `c <= 1`.
fn weight_subunital(w: &Expr) -> bool {
    fn lit_in_unit(e: &Expr) -> bool {
        matches!(e, Expr::Const(Const::Rat(r))
            if !r.is_negative() && *r <= num_rational::BigRational::from_integer(1.into()))
    }
    match w {
        Expr::Lam(_, _, b) => match &**b {
            Expr::Case(_, CaseArms::Bool { tt, ff }) => lit_in_unit(tt) && lit_in_unit(ff),
            Expr::Prim(Prim::Min, args) => lit_in_unit(&args[1]) || lit_in_unit(&args[0]),
            e => lit_in_unit(e),
        },
        _ => false,
    }
}

fn infer_case(
    ctx: &Context,
    whole: &Expr,
    s: &Expr,
    arms: &CaseArms,
    want: Option<&TypeTerm>,
) -> Result<(TypeTerm, Expr)> {
    let (ts, s2) = infer_expr(ctx, s)?;
    match arms {
        CaseArms::Bool { tt, ff } => {
            if ts != TypeTerm::Bool {
                return Err(in_ctx(format!("if-condition of type `{ts}`"), whole));
            }
            let (t, tt2, ff2) = match want {
                Some(w) => (
                    w.clone(),
                    check_expr(ctx, tt, w)?,
                    check_expr(ctx, ff, w)?,
                ),
                None => {
                    let (t1, tt2) = infer_expr(ctx, tt)?;
                    // Branch join through checking the other branch at t1, or
                    // widening to the second branch's type.
                    match check_expr(ctx, ff, &t1) {
                        Ok(ff2) => (t1, tt2, ff2),
                        Err(_) => {
                            let (t2, ff2) = infer_expr(ctx, ff)?;
                            let tt2 = check_expr(ctx, tt, &t2)?;
                            (t2, tt2, ff2)
                        }
                    }
                }
            };
            Ok((
                t,
                Expr::Case(
                    Box::new(s2),
                    CaseArms::Bool {
                        tt: Box::new(tt2),
                        ff: Box::new(ff2),
                    },
                ),
            ))
        }
        CaseArms::List {
            nil,
            head,
            tail,
            cons,
        } => {
            let elem = match &ts {
                TypeTerm::List(a) => (**a).clone(),
                other => {
                    return Err(in_ctx(format!("list case on `{other}`"), whole));
                }
            };
            let ctx2 = ctx
                .with_var(head, elem.clone())
                .with_var(tail, TypeTerm::list(elem));
            let (t, nil2, cons2) = match want {
                Some(w) => (
                    w.clone(),
                    check_expr(ctx, nil, w)?,
                    check_expr(&ctx2, cons, w)?,
                ),
                None => {
                    let (t1, nil2) = infer_expr(ctx, nil)?;
                    match check_expr(&ctx2, cons, &t1) {
                        Ok(cons2) => (t1, nil2, cons2),
                        Err(_) => {
                            let (t2, cons2) = infer_expr(&ctx2, cons)?;
                            let nil2 = check_expr(ctx, nil, &t2)?;
                            (t2, nil2, cons2)
                        }
                    }
                }
            };
            Ok((
                t,
                Expr::Case(
                    Box::new(s2),
                    CaseArms::List {
                        nil: Box::new(nil2),
                        head: head.clone(),
                        tail: tail.clone(),
                        cons: Box::new(cons2),
                    },
                ),
            ))
        }
        CaseArms::Pair { fst, snd, body } => {
            let (t1, t2) = match &ts {
                TypeTerm::Prod(a, b) => ((**a).clone(), (**b).clone()),
                other => return Err(in_ctx(format!("pair case on `{other}`"), whole)),
            };
            let ctx2 = ctx.with_var(fst, t1).with_var(snd, t2);
            let (t, body2) = match want {
                Some(w) => (w.clone(), check_expr(&ctx2, body, w)?),
                None => infer_expr(&ctx2, body)?,
            };
            Ok((
                t,
                Expr::Case(
                    Box::new(s2),
                    CaseArms::Pair {
                        fst: fst.clone(),
                        snd: snd.clone(),
                        body: Box::new(body2),
                    },
                ),
            ))
        }
    }
}

/// Infer a continuation against a known argument type, filling binder holes.
fn infer_fun_against(ctx: &Context, k: &Expr, arg: &TypeTerm) -> Result<(TypeTerm, Expr)> {
    match k {
        Expr::Lam(x, t, b) => {
            let bind_ty = match t {
                TypeTerm::Hole => arg.clone(),
                t => {
                    if !arg.subtype_of(t) {
                        return Err(err(format!(
                            "continuation binder `{x} : {t}` does not accept `{arg}`"
                        )));
                    }
                    t.clone()
                }
            };
            let ctx2 = ctx.with_var(x, bind_ty.clone());
            let (tb, b2) = infer_expr(&ctx2, b)?;
            Ok((
                TypeTerm::arrow(bind_ty.clone(), tb),
                Expr::Lam(x.clone(), bind_ty, Box::new(b2)),
            ))
        }
        _ => {
            let (tk, k2) = infer_expr(ctx, k)?;
            match &tk {
                TypeTerm::Arrow(dom, _) if arg.subtype_of(dom) => Ok((tk, k2)),
                other => Err(err(format!(
                    "expected a continuation from `{arg}`, found `{other}`"
                ))),
            }
        }
    }
}

/// Bring two numeric operands to a common type: implicit int-to-real
/// widening, with rational literals adapting to the other side (so `1`
/// works at preal positions).
fn reconcile(
    ctx: &Context,
    whole: &Expr,
    a: &Expr,
    b: &Expr,
) -> Result<(TypeTerm, Expr, Expr)> {
    let (ta, a2) = infer_numeric(ctx, a)?;
    let (tb, b2) = infer_numeric(ctx, b)?;
    if let Some(join) = numeric_join(&ta, &tb) {
        return Ok((join.clone(), widen(a2, &ta, &join), widen(b2, &tb, &join)));
    }
    // No implicit join: try rechecking one side at the other's type, which
    // lets literals (and literal-branched conditionals) inhabit preal.
    if let Ok(a3) = check_expr(ctx, a, &tb) {
        return Ok((tb, a3, b2));
    }
    if let Ok(b3) = check_expr(ctx, b, &ta) {
        return Ok((ta, a2, b3));
    }
    Err(in_ctx(
        format!("mixed operand types `{ta}` and `{tb}`"),
        whole,
    ))
}

fn infer_prim(ctx: &Context, whole: &Expr, p: Prim, args: &[Expr]) -> Result<(TypeTerm, Expr)> {
    let redo = |args2: Vec<Expr>| Expr::Prim(p, args2);
    match p {
        Prim::Add | Prim::Mul | Prim::Min | Prim::Max => {
            let (join, a2, b2) = reconcile(ctx, whole, &args[0], &args[1])?;
            Ok((join, redo(vec![a2, b2])))
        }
        Prim::Sub => {
            let (join, a2, b2) = reconcile(ctx, whole, &args[0], &args[1])?;
            if join == TypeTerm::PReal {
                return Err(in_ctx(
                    "subtraction is not available on preal (use psub)".into(),
                    whole,
                ));
            }
            Ok((join, redo(vec![a2, b2])))
        }
        Prim::Div => {
            let (join, a2, b2) = reconcile(ctx, whole, &args[0], &args[1])?;
            let join = match join {
                TypeTerm::Int | TypeTerm::Real => TypeTerm::Real,
                t => t,
            };
            Ok((join, redo(vec![a2, b2])))
        }
        Prim::Neg => {
            let a2 = check_expr(ctx, &args[0], &TypeTerm::Real)?;
            Ok((TypeTerm::Real, redo(vec![a2])))
        }
        Prim::PSub => {
            let a2 = check_expr(ctx, &args[0], &TypeTerm::PReal)?;
            let b2 = check_expr(ctx, &args[1], &TypeTerm::PReal)?;
            Ok((TypeTerm::Real, redo(vec![a2, b2])))
        }
        Prim::Abs | Prim::Sqrt | Prim::Exp | Prim::Log => {
            let a2 = check_expr(ctx, &args[0], &TypeTerm::Real)?;
            Ok((TypeTerm::Real, redo(vec![a2])))
        }
        Prim::Lt | Prim::Le | Prim::Gt | Prim::Ge => {
            let (_, a2, b2) = reconcile(ctx, whole, &args[0], &args[1])?;
            Ok((TypeTerm::Bool, redo(vec![a2, b2])))
        }
        Prim::And | Prim::Or => {
            let a2 = check_expr(ctx, &args[0], &TypeTerm::Bool)?;
            let b2 = check_expr(ctx, &args[1], &TypeTerm::Bool)?;
            Ok((TypeTerm::Bool, redo(vec![a2, b2])))
        }
        Prim::Not => {
            let a2 = check_expr(ctx, &args[0], &TypeTerm::Bool)?;
            Ok((TypeTerm::Bool, redo(vec![a2])))
        }
        Prim::Len => {
            let (t, a2) = infer_expr(ctx, &args[0])?;
            match t {
                TypeTerm::List(_) => Ok((TypeTerm::Int, redo(vec![a2]))),
                other => Err(in_ctx(format!("len of `{other}`"), whole)),
            }
        }
        Prim::Cons => {
            let (th, h2) = infer_expr(ctx, &args[0])?;
            let t2 = check_expr(ctx, &args[1], &TypeTerm::list(th.clone()))?;
            Ok((TypeTerm::list(th), redo(vec![h2, t2])))
        }
        Prim::IntToReal => {
            let a2 = check_expr(ctx, &args[0], &TypeTerm::Int)?;
            Ok((TypeTerm::Real, redo(vec![a2])))
        }
        Prim::RealToPReal => {
            let a2 = check_expr(ctx, &args[0], &TypeTerm::Real)?;
            Ok((TypeTerm::PReal, redo(vec![a2])))
        }
        Prim::Kl => {
            let a2 = check_expr(ctx, &args[0], &TypeTerm::meas(TypeTerm::Real))?;
            let b2 = check_expr(ctx, &args[1], &TypeTerm::meas(TypeTerm::Real))?;
            Ok((TypeTerm::Real, redo(vec![a2, b2])))
        }
    }
}

fn infer_numeric(ctx: &Context, e: &Expr) -> Result<(TypeTerm, Expr)> {
    let (t, e2) = infer_expr(ctx, e)?;
    if t.is_numeric() {
        Ok((t, e2))
    } else {
        Err(err(format!(
            "expected a numeric operand, found `{t}` in `{}`",
            crate::printer::print_expr(e)
        )))
    }
}

pub fn check_expr(ctx: &Context, e: &Expr, want: &TypeTerm) -> Result<Expr> {
    match (e, want) {
        (Expr::Const(Const::Rat(r)), t) if t.is_numeric() => {
            if rat_const_checks(r, t) {
                Ok(e.clone())
            } else {
                Err(err(format!("literal `{}` is not a `{t}`", r)))
            }
        }
        (Expr::Const(Const::Nil), TypeTerm::List(_)) => Ok(e.clone()),
        (Expr::Lam(x, t, b), TypeTerm::Arrow(dom, cod)) => {
            let bind_ty = match t {
                TypeTerm::Hole => (**dom).clone(),
                t => {
                    if !dom.subtype_of(t) {
                        return Err(err(format!(
                            "binder `{x} : {t}` does not accept `{dom}`"
                        )));
                    }
                    t.clone()
                }
            };
            let ctx2 = ctx.with_var(x, bind_ty.clone());
            let b2 = check_expr(&ctx2, b, cod)?;
            Ok(Expr::Lam(x.clone(), bind_ty, Box::new(b2)))
        }
        (Expr::Pair(a, b), TypeTerm::Prod(ta, tb)) => {
            let a2 = check_expr(ctx, a, ta)?;
            let b2 = check_expr(ctx, b, tb)?;
            Ok(Expr::pair(a2, b2))
        }
        (Expr::Ret(a), TypeTerm::Meas(t) | TypeTerm::SubProb(t)) => {
            let a2 = check_expr(ctx, a, t)?;
            Ok(Expr::Ret(Box::new(a2)))
        }
        (Expr::Case(s, arms), _) => {
            let (_, e2) = infer_case(ctx, e, s, arms, Some(want))?;
            Ok(e2)
        }
        (Expr::Prim(Prim::Cons, args), TypeTerm::List(elem)) => {
            let h2 = check_expr(ctx, &args[0], elem)?;
            let t2 = check_expr(ctx, &args[1], want)?;
            Ok(Expr::prim(Prim::Cons, vec![h2, t2]))
        }
        // Push the expected result type through a literal application.
        (Expr::App(f, a), want) if matches!(&**f, Expr::Lam(..)) => {
            let (ta, a2) = infer_expr(ctx, a)?;
            let f2 = check_expr(ctx, f, &TypeTerm::arrow(ta, want.clone()))?;
            Ok(Expr::app(f2, a2))
        }
        // Push an expected numeric type into overloaded arithmetic.
        (Expr::Prim(p @ (Prim::Add | Prim::Mul | Prim::Min | Prim::Max), args), t)
            if t.is_numeric() =>
        {
            let a2 = check_expr(ctx, &args[0], t)?;
            let b2 = check_expr(ctx, &args[1], t)?;
            Ok(Expr::Prim(*p, vec![a2, b2]))
        }
        (Expr::Prim(Prim::Div, args), t @ (TypeTerm::PReal | TypeTerm::Real)) => {
            let a2 = check_expr(ctx, &args[0], t)?;
            let b2 = check_expr(ctx, &args[1], t)?;
            Ok(Expr::Prim(Prim::Div, vec![a2, b2]))
        }
        _ => {
            let (t, e2) = infer_expr(ctx, e)?;
            if t.subtype_of(want) {
                Ok(widen(e2, &t, want))
            } else if t == TypeTerm::Int && *want == TypeTerm::Real {
                Ok(widen(e2, &t, want))
            } else {
                Err(err(format!(
                    "expected `{want}`, found `{t}` in `{}`",
                    crate::printer::print_expr(e)
                )))
            }
        }
    }
}

/// Well-formedness of a desugared formula; returns the elaborated formula.
pub fn check_formula_wf(ctx: &Context, f: &Formula) -> Result<Formula> {
    match f {
        Formula::Eq(a, b) => {
            let (ta, a2) = infer_expr(ctx, a)?;
            // Try the symmetric direction to allow widening on either side.
            match check_expr(ctx, b, &ta) {
                Ok(b2) => Ok(Formula::Eq(a2, b2)),
                Err(_) => match infer_expr(ctx, b) {
                    Ok((tb, b2)) => {
                        let a2 = check_expr(ctx, a, &tb).map_err(|_| {
                            err(format!(
                                "equality between `{ta}` and `{tb}` in `{}`",
                                crate::printer::print_formula(f)
                            ))
                        })?;
                        Ok(Formula::Eq(a2, b2))
                    }
                    Err(e) => Err(err(format!(
                        "equality in `{}`: {e}",
                        crate::printer::print_formula(f)
                    ))),
                },
            }
        }
        Formula::Lt(a, b) => {
            let whole = Expr::prim(Prim::Lt, vec![a.clone(), b.clone()]);
            let (_, a2, b2) = reconcile(ctx, &whole, a, b)?;
            Ok(Formula::Lt(a2, b2))
        }
        Formula::Top | Formula::Bot => Ok(f.clone()),
        Formula::And(a, b) => Ok(Formula::and(
            check_formula_wf(ctx, a)?,
            check_formula_wf(ctx, b)?,
        )),
        Formula::Imp(a, b) => Ok(Formula::imp(
            check_formula_wf(ctx, a)?,
            check_formula_wf(ctx, b)?,
        )),
        Formula::Not(a) => Ok(Formula::not(check_formula_wf(ctx, a)?)),
        Formula::Forall(x, t, b) => {
            let b2 = check_formula_wf(&ctx.with_var(x, t.clone()), b)?;
            Ok(Formula::Forall(x.clone(), t.clone(), Box::new(b2)))
        }
        Formula::Exists(x, t, b) => {
            let b2 = check_formula_wf(&ctx.with_var(x, t.clone()), b)?;
            Ok(Formula::Exists(x.clone(), t.clone(), Box::new(b2)))
        }
        other => Err(err(format!(
            "macro node reached well-formedness checking: `{}`",
            crate::printer::print_formula(other)
        ))),
    }
}

/// Syntactic termination check. Returns the offending call site, if any.
///
/// Accepted recursive calls: on int, `f (x - c)` with `c` a positive integer
/// literal; on lists, `f t` where `t` is a case tail of the recursion
/// variable (or of a let-alias of it). Any other occurrence of `f` rejects.
pub fn check_termination(f: &str, x: &str, dom: &TypeTerm, body: &Expr) -> Option<String> {
    struct St<'a> {
        f: &'a str,
        is_int: bool,
    }
    fn dec_arg(st: &St, arg: &Expr, aliases: &[String], tails: &[String]) -> bool {
        if st.is_int {
            match arg {
                Expr::Prim(Prim::Sub, args) => {
                    let base_ok = matches!(&args[0], Expr::Var(v) if aliases.iter().any(|a| a == v));
                    let step_ok = matches!(&args[1], Expr::Const(Const::Rat(r))
                        if r.is_integer() && r.is_positive());
                    base_ok && step_ok
                }
                _ => false,
            }
        } else {
            matches!(arg, Expr::Var(v) if tails.iter().any(|t| t == v))
        }
    }
    // aliases: variables equal to the recursion argument; tails: case tails.
    fn walk(
        st: &St,
        e: &Expr,
        aliases: &mut Vec<String>,
        tails: &mut Vec<String>,
    ) -> Option<String> {
        match e {
            Expr::Var(v) if v == st.f => Some(v.clone()),
            Expr::App(h, a) => {
                if let Expr::Var(v) = &**h {
                    if v == st.f {
                        return if dec_arg(st, a, aliases, tails) {
                            walk(st, a, aliases, tails)
                        } else {
                            Some(crate::printer::print_expr(e))
                        };
                    }
                }
                // A let-alias is a beta redex with a variable right-hand side.
                if let (Expr::Lam(y, _, b), Expr::Var(v)) = (&**h, &**a) {
                    if aliases.iter().any(|al| al == v) {
                        aliases.push(y.clone());
                        let r = walk(st, b, aliases, tails);
                        aliases.pop();
                        return r.or_else(|| walk(st, h, aliases, tails));
                    }
                    if tails.iter().any(|t| t == v) {
                        tails.push(y.clone());
                        let r = walk(st, b, aliases, tails);
                        tails.pop();
                        return r.or_else(|| walk(st, h, aliases, tails));
                    }
                }
                walk(st, h, aliases, tails).or_else(|| walk(st, a, aliases, tails))
            }
            Expr::Case(s, CaseArms::List {
                nil,
                head: _,
                tail,
                cons,
            }) => {
                if let Some(site) = walk(st, s, aliases, tails) {
                    return Some(site);
                }
                if let Some(site) = walk(st, nil, aliases, tails) {
                    return Some(site);
                }
                let scrut_is_arg =
                    matches!(&**s, Expr::Var(v) if aliases.iter().any(|a| a == v));
                if scrut_is_arg {
                    tails.push(tail.clone());
                }
                let r = walk(st, cons, aliases, tails);
                if scrut_is_arg {
                    tails.pop();
                }
                r
            }
            _ => {
                let mut found = None;
                for_each_child(e, &mut |c| {
                    if found.is_none() {
                        found = walk(st, c, aliases, tails);
                    }
                });
                found
            }
        }
    }
    let st = St {
        f,
        is_int: matches!(dom, TypeTerm::Int),
    };
    let mut aliases = vec![x.to_string()];
    let mut tails = Vec::new();
    walk(&st, body, &mut aliases, &mut tails)
}

/// Visit immediate subexpressions (no binder bookkeeping; shadowing of the
/// recursion function name is rejected conservatively by the walk above).
fn for_each_child(e: &Expr, k: &mut impl FnMut(&Expr)) {
    match e {
        Expr::Var(_) | Expr::Const(_) | Expr::Lebesgue => {}
        Expr::Prim(_, args) => args.iter().for_each(|a| k(a)),
        Expr::App(a, b)
        | Expr::Pair(a, b)
        | Expr::Bind(a, b)
        | Expr::Observe(a, b)
        | Expr::Uniform(a, b)
        | Expr::Gauss(a, b)
        | Expr::Gpdf(a, b)
        | Expr::Scale(a, b)
        | Expr::MacTensor(a, b) => {
            k(a);
            k(b);
        }
        Expr::Lam(_, _, b) => k(b),
        Expr::Proj(_, a) | Expr::Ret(a) | Expr::Bern(a) | Expr::Normalize(a) => k(a),
        Expr::Ascribe(a, _) => k(a),
        Expr::Case(s, arms) => {
            k(s);
            match arms {
                CaseArms::Bool { tt, ff } => {
                    k(tt);
                    k(ff);
                }
                CaseArms::List { nil, cons, .. } => {
                    k(nil);
                    k(cons);
                }
                CaseArms::Pair { body, .. } => k(body),
            }
        }
        Expr::Letrec { body, .. } => k(body),
        Expr::Expect { src, body, .. } => {
            k(src);
            k(body);
        }
        Expr::MacPr {
            src, event: body, ..
        }
        | Expr::MacEr { src, body, .. }
        | Expr::MacVar { src, body, .. } => {
            k(src);
            k(body);
        }
        Expr::MacLet { rhs, body, .. } | Expr::MacMlet { rhs, body, .. } => {
            k(rhs);
            k(body);
        }
    }
}
