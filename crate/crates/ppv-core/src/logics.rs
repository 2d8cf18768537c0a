//! The unary and relational program logics: syntax-directed rules over the
//! subject term(s), subsumption into the assertion logic, conversion between
//! the layers, and the derived rules (let bindings, the Bayesian observation
//! rule, and the graded lifting laws) checked by expansion into primitive
//! steps so the trusted core stays unchanged.

use crate::ast::{CaseArms, Const, Context, Expr, Formula, Prim, R, R1, R2, RV, RV1, RV2};
use crate::error::{CoreError, Result};
use crate::kernel::Kernel;
use crate::liftings::{LiftKind, LiftParam};
use crate::rewrite::rewrite_expr;
use crate::script::{HypRef, Justification, Rule, Side, Step};
use crate::subst::{alpha_eq_formula, fresh_name, subst_formula, subst_formula_many};
use crate::typecheck::{check_formula_wf, infer_expr};
use crate::types::TypeTerm;
use std::collections::{BTreeMap, BTreeSet};

fn perr(step: &str, msg: impl Into<String>) -> CoreError {
    CoreError::proof(step, msg)
}

fn measure_elem(t: &TypeTerm) -> Option<TypeTerm> {
    match t {
        TypeTerm::Meas(a) | TypeTerm::SubProb(a) => Some((**a).clone()),
        _ => None,
    }
}

/// Replace `r` applied to `x` by bare `r`: recovers the abstraction-rule
/// postcondition from the goal. Fails when bare occurrences of `r` remain.
fn invert_app(post: &Formula, x: &str, what: &str) -> Result<Formula> {
    let applied = Expr::app(Expr::var(R), Expr::var(x));
    let inner = match rewrite_expr_in_formula(post, &applied, &Expr::var(R)) {
        Some(f) => f,
        None => post.clone(),
    };
    // Round trip must reproduce the goal.
    let back = subst_formula(&inner, R, &Expr::app(Expr::var(R), Expr::var(x)));
    if alpha_eq_formula(&back, post) {
        Ok(inner)
    } else {
        Err(perr(
            what,
            "postcondition is not of the form phi[r x / r]",
        ))
    }
}

fn rewrite_expr_in_formula(f: &Formula, lhs: &Expr, rhs: &Expr) -> Option<Formula> {
    crate::rewrite::rewrite_formula(f, lhs, rhs, None)
        .ok()
        .map(|o| o.result)
}

pub struct UplGoal<'g> {
    pub ctx: &'g Context,
    pub subject: &'g Expr,
    pub ty: &'g TypeTerm,
    pub post: &'g Formula,
}

pub fn check_upl(
    k: &mut Kernel<'_>,
    ctx: &Context,
    subject: &Expr,
    ty: &TypeTerm,
    post: &Formula,
    steps: &[Step],
) -> Result<()> {
    if steps.len() != 1 {
        return Err(perr(
            "upl",
            format!("expected exactly one subject-directed step, found {}", steps.len()),
        ));
    }
    check_upl_step(k, ctx, subject, ty, post, &steps[0])
}

/// PL goal corresponding to a unary judgment (the conversion direction that
/// replaces the distinguished variable by the subject).
pub fn upl_to_pl(subject: &Expr, post: &Formula) -> Formula {
    subst_formula(post, R, subject)
}

pub fn rpl_to_pl(left: &Expr, right: &Expr, post: &Formula) -> Formula {
    let mut m = BTreeMap::new();
    m.insert(R1.to_string(), left.clone());
    m.insert(R2.to_string(), right.clone());
    subst_formula_many(post, &m)
}

fn prep_post(k: &Kernel<'_>, ctx: &Context, ty: &TypeTerm, f: &Formula) -> Result<Formula> {
    k.prep_formula(&ctx.with_var(R, ty.clone()), f)
}

fn check_upl_step(
    k: &mut Kernel<'_>,
    ctx: &Context,
    subject: &Expr,
    ty: &TypeTerm,
    post: &Formula,
    step: &Step,
) -> Result<()> {
    match step {
        Step::UPl(block) => k.check_pl(ctx, &upl_to_pl(subject, post), block),
        Step::UVar(block) => match subject {
            Expr::Var(_) => k.check_pl(ctx, &upl_to_pl(subject, post), block),
            _ => Err(perr("u_var", "subject is not a variable")),
        },
        Step::USub { mid, subj, entail } => {
            let mid = prep_post(k, ctx, ty, mid)?;
            check_upl(k, ctx, subject, ty, &mid, subj)?;
            let goal = Formula::imp(upl_to_pl(subject, &mid), upl_to_pl(subject, post));
            k.check_pl(ctx, &goal, entail)
        }
        Step::URet(block) => match subject {
            Expr::Ret(e) => {
                let elem = measure_elem(ty)
                    .ok_or_else(|| perr("u_ret", "subject type is not monadic"))?;
                let post2 = subst_formula(post, R, &Expr::Ret(Box::new(Expr::var(R))));
                check_upl(k, ctx, e, &elem, &post2, block)
            }
            _ => Err(perr("u_ret", "subject is not a return")),
        },
        Step::UBind { first, lhs, rhs } => match subject {
            Expr::Bind(e, kont) => {
                let (te, _) = infer_expr(ctx, e)?;
                let elem = measure_elem(&te)
                    .ok_or_else(|| perr("u_bind", "first component is not a measure"))?;
                let first = prep_post(k, ctx, &te, first)?;
                check_upl(k, ctx, e, &te, &first, lhs)?;
                let (tk, _) = infer_expr(ctx, kont)?;
                let s = fresh_name("s", &{
                    let mut a = crate::subst::free_vars_formula(&first);
                    a.extend(crate::subst::free_vars_formula(post));
                    a
                });
                // forall s. first[s/r] => post[bind s r / r]
                let post2 = Formula::Forall(
                    s.clone(),
                    te.clone(),
                    Box::new(Formula::imp(
                        subst_formula(&first, R, &Expr::var(&s)),
                        subst_formula(
                            post,
                            R,
                            &Expr::bind(Expr::var(&s), Expr::var(R)),
                        ),
                    )),
                );
                let _ = elem;
                check_upl(k, ctx, kont, &tk, &post2, rhs)
            }
            _ => Err(perr("u_bind", "subject is not a bind")),
        },
        Step::UQry { first, lhs, rhs } => match subject {
            Expr::Observe(e, lik) => {
                let (te, _) = infer_expr(ctx, e)?;
                let elem = measure_elem(&te)
                    .ok_or_else(|| perr("u_qry", "prior is not a measure"))?;
                let first = prep_post(k, ctx, &te, first)?;
                check_upl(k, ctx, e, &te, &first, lhs)?;
                let s = fresh_name("s", &{
                    let mut a = crate::subst::free_vars_formula(&first);
                    a.extend(crate::subst::free_vars_formula(post));
                    a
                });
                let post2 = Formula::Forall(
                    s.clone(),
                    te.clone(),
                    Box::new(Formula::imp(
                        subst_formula(&first, R, &Expr::var(&s)),
                        subst_formula(
                            post,
                            R,
                            &Expr::Observe(Box::new(Expr::var(&s)), Box::new(Expr::var(R))),
                        ),
                    )),
                );
                check_upl(
                    k,
                    ctx,
                    lik,
                    &TypeTerm::arrow(elem, TypeTerm::PReal),
                    &post2,
                    rhs,
                )
            }
            _ => Err(perr("u_qry", "subject is not an observe")),
        },
        Step::UAbs { pre, hyp, body } => match subject {
            Expr::Lam(x, t, lam_body) => {
                let (bx, bt, inner_imp) = match post {
                    Formula::Forall(bx, bt, b) => (bx.clone(), bt.clone(), (**b).clone()),
                    _ => return Err(perr("u_abs", "postcondition is not universally quantified")),
                };
                if bt != *t {
                    return Err(perr("u_abs", "quantifier type differs from the binder"));
                }
                // Rename the goal's bound variable to the lambda binder.
                let inner_imp = if bx == *x {
                    inner_imp
                } else {
                    subst_formula(&inner_imp, &bx, &Expr::var(x))
                };
                let (ante, concl) = match inner_imp {
                    Formula::Imp(a, b) => (*a, *b),
                    _ => return Err(perr("u_abs", "postcondition body is not an implication")),
                };
                let pre = k.prep_formula(&ctx.with_var(x, t.clone()), pre)?;
                if !alpha_eq_formula(&ante, &pre) {
                    return Err(perr("u_abs", "stated precondition differs from the goal"));
                }
                let inner_post = invert_app(&concl, x, "u_abs")?;
                let hname = hyp
                    .clone()
                    .unwrap_or_else(|| fresh_hyp(ctx, "h_pre"));
                let mut bctx = ctx.with_var(x, t.clone());
                bctx.push_hyp(&hname, pre);
                let (bty, _) = infer_expr(&bctx, lam_body)?;
                check_upl(k, &bctx, lam_body, &bty, &inner_post, body)
            }
            _ => Err(perr("u_abs", "subject is not a lambda")),
        },
        Step::UApp {
            pre,
            post: phi,
            x,
            fun,
            arg,
        } => match subject {
            Expr::App(t, u) => {
                let (tu, _) = infer_expr(ctx, u)?;
                let (tt, _) = infer_expr(ctx, t)?;
                let pre = prep_post(k, ctx, &tu, pre)?;
                let phi_ctx = ctx.with_var(x, tu.clone()).with_var(R, ty.clone());
                let phi = {
                    let d = crate::desugar::desugar_formula(phi, k.env)?;
                    check_formula_wf(&phi_ctx, &d)?
                };
                // Conclusion: goal = phi[u/x].
                let want = subst_formula(&phi, x, u);
                if !alpha_eq_formula(post, &want) {
                    return Err(perr("u_app", "goal is not post[arg/x]"));
                }
                // Premise for the function part.
                let fun_post = Formula::Forall(
                    x.clone(),
                    tu.clone(),
                    Box::new(Formula::imp(
                        subst_formula(&pre, R, &Expr::var(x)),
                        subst_formula(&phi, R, &Expr::app(Expr::var(R), Expr::var(x))),
                    )),
                );
                check_upl(k, ctx, t, &tt, &fun_post, fun)?;
                check_upl(k, ctx, u, &tu, &pre, arg)
            }
            _ => Err(perr("u_app", "subject is not an application")),
        },
        Step::ULetrec {
            pre,
            post: phi,
            ih,
            body,
        } => match subject {
            Expr::Letrec {
                f,
                x,
                dom,
                cod,
                body: rec_body,
            } => {
                let xctx = ctx.with_var(x, dom.clone());
                let pre = k.prep_formula(&xctx, pre)?;
                let phi = {
                    let d = crate::desugar::desugar_formula(phi, k.env)?;
                    check_formula_wf(&xctx.with_var(R, cod.clone()), &d)?
                };
                // Goal: forall x : dom. pre => phi[r x / r].
                let want = Formula::Forall(
                    x.clone(),
                    dom.clone(),
                    Box::new(Formula::imp(
                        pre.clone(),
                        subst_formula(&phi, R, &Expr::app(Expr::var(R), Expr::var(x))),
                    )),
                );
                if !alpha_eq_formula(post, &want) {
                    return Err(perr(
                        "u_letrec",
                        "goal is not forall x. pre => post[r x / r]",
                    ));
                }
                let m = fresh_name("m", &{
                    let mut s = crate::subst::free_vars_formula(&phi);
                    s.extend(crate::subst::free_vars_formula(&pre));
                    s.insert(x.clone());
                    s
                });
                let size = |e: Expr| match dom {
                    TypeTerm::Int => Expr::prim(Prim::Abs, vec![e]),
                    _ => Expr::prim(Prim::Len, vec![e]),
                };
                let ih_f = Formula::Forall(
                    m.clone(),
                    dom.clone(),
                    Box::new(Formula::imp(
                        Formula::lt(size(Expr::var(&m)), size(Expr::var(x))),
                        Formula::imp(
                            subst_formula(&pre, x, &Expr::var(&m)),
                            subst_formula(
                                &subst_formula(&phi, R, &Expr::app(Expr::var(f), Expr::var(&m))),
                                x,
                                &Expr::var(&m),
                            ),
                        ),
                    )),
                );
                let mut bctx = ctx
                    .with_var(x, dom.clone())
                    .with_var(f, TypeTerm::arrow(dom.clone(), cod.clone()));
                bctx.push_hyp(&format!("{ih}_pre"), pre);
                bctx.push_hyp(ih, ih_f);
                check_upl(k, &bctx, rec_body, cod, &phi, body)
            }
            _ => Err(perr("u_letrec", "subject is not a letrec")),
        },
        Step::UCaseBool { name, tt, ff } => match subject {
            Expr::Case(s, CaseArms::Bool { tt: st, ff: sf }) => {
                let case = |v: bool| Formula::eq((**s).clone(), Expr::Const(Const::Bool(v)));
                check_upl(k, &ctx.with_hyp(name, case(true)), st, ty, post, tt)?;
                check_upl(k, &ctx.with_hyp(name, case(false)), sf, ty, post, ff)
            }
            _ => Err(perr("u_case_bool", "subject is not an if")),
        },
        Step::UCaseList { name, nil, cons } => match subject {
            Expr::Case(
                s,
                CaseArms::List {
                    nil: sn,
                    head,
                    tail,
                    cons: sc,
                },
            ) => {
                let (ts, _) = infer_expr(ctx, s)?;
                let elem = match &ts {
                    TypeTerm::List(a) => (**a).clone(),
                    _ => return Err(perr("u_case_list", "scrutinee is not a list")),
                };
                let nil_hyp = Formula::eq(
                    (**s).clone(),
                    Expr::Ascribe(Box::new(Expr::Const(Const::Nil)), ts.clone()),
                );
                check_upl(k, &ctx.with_hyp(name, nil_hyp), sn, ty, post, nil)?;
                let mut cctx = ctx.with_var(head, elem).with_var(tail, ts);
                cctx.push_hyp(
                    name,
                    Formula::eq(
                        (**s).clone(),
                        Expr::prim(Prim::Cons, vec![Expr::var(head), Expr::var(tail)]),
                    ),
                );
                check_upl(k, &cctx, sc, ty, post, cons)
            }
            _ => Err(perr("u_case_list", "subject is not a list case")),
        },
        Step::ULet { first, rhs, body } => match subject {
            // let x = e1 in e2 is the beta redex (fun x -> e2) e1.
            Expr::App(lam, _) => match &**lam {
                Expr::Lam(x, _, _) => {
                    let expanded = Step::UApp {
                        pre: first.clone(),
                        post: post_as_written(post),
                        x: x.clone(),
                        fun: vec![Step::UAbs {
                            pre: subst_formula(first, R, &Expr::var(x)),
                            hyp: Some(format!("h_{x}")),
                            body: body.clone(),
                        }],
                        arg: rhs.clone(),
                    };
                    check_upl_step(k, ctx, subject, ty, post, &expanded)
                }
                _ => Err(perr("u_let", "subject is not a let redex")),
            },
            _ => Err(perr("u_let", "subject is not a let redex")),
        },
        Step::Bayes { query, pos, finite } => {
            bayes_step(k, ctx, subject, ty, post, query, pos, finite)
        }
        Step::ULiftUnit { param, phi, body } => {
            let p = k.env.get(param)?.clone();
            lift_unit_step(k, ctx, subject, ty, post, &p, phi, body)
        }
        Step::ULiftBind {
            param,
            alpha,
            beta,
            phi,
            post: phi2,
            lhs,
            rhs,
        } => {
            let p = k.env.get(param)?.clone();
            lift_bind_step(k, ctx, subject, ty, post, &p, alpha, beta, phi, phi2, lhs, rhs)
        }
        other => Err(perr(
            "upl",
            format!("step {other:?} is not a unary-logic step"),
        )),
    }
}

/// The goal formula as the script wrote it (already elaborated upstream).
fn post_as_written(post: &Formula) -> Formula {
    post.clone()
}

fn fresh_hyp(ctx: &Context, base: &str) -> String {
    let mut avoid: BTreeSet<String> = ctx.hyps.iter().map(|(n, _)| n.clone()).collect();
    avoid.extend(ctx.vars.iter().map(|(n, _)| n.clone()));
    fresh_name(base, &avoid)
}

// ---------------------------------------------------------------------------
// Derived rule: [Bayes]
// ---------------------------------------------------------------------------

/// Expand the Bayesian observation rule into [u-QRY] plus assertion-logic
/// reasoning from the observation characterization, then check the expansion.
#[allow(clippy::too_many_arguments)]
fn bayes_step(
    k: &mut Kernel<'_>,
    ctx: &Context,
    subject: &Expr,
    ty: &TypeTerm,
    post: &Formula,
    query: &Expr,
    pos: &[Step],
    finite: &[Step],
) -> Result<()> {
    let (prior, lik) = match subject {
        Expr::Observe(e, lik) => ((**e).clone(), (**lik).clone()),
        _ => return Err(perr("bayes", "subject is not an observe")),
    };
    let (x, cond) = match &lik {
        Expr::Lam(x, _, body) => match body.as_ref() {
            Expr::Case(c, CaseArms::Bool { tt, ff }) => {
                let one = matches!(&**tt, Expr::Const(Const::Rat(r)) if *r == num_rational::BigRational::from_integer(1.into()));
                let zero = matches!(&**ff, Expr::Const(Const::Rat(r)) if r == &num_rational::BigRational::from_integer(0.into()));
                if !(one && zero) {
                    return Err(perr("bayes", "likelihood is not an indicator"));
                }
                (x.clone(), (**c).clone())
            }
            _ => return Err(perr("bayes", "likelihood is not an indicator lambda")),
        },
        _ => return Err(perr("bayes", "likelihood is not a lambda")),
    };
    let elem = measure_elem(ty).ok_or_else(|| perr("bayes", "subject type is not monadic"))?;
    let query = {
        let d = crate::desugar::desugar_expr(query, k.env)?;
        crate::typecheck::check_expr(&ctx.with_var(&x, elem.clone()), &d, &TypeTerm::Bool)?
    };

    let ind = |b: &Expr| Expr::if_then_else(b.clone(), Expr::one(), Expr::zero());
    let pr_over = |src: &Expr, b: &Expr| Expr::expect(&x, src.clone(), ind(b));
    let conj = Expr::prim(Prim::And, vec![cond.clone(), query.clone()]);

    // Conclusion: Pr[y ~ r](query[y/x]) = Pr[x ~ prior](cond && query) / Pr[x ~ prior](cond)
    let y = fresh_name("y", &{
        let mut s = crate::subst::free_vars_expr(&query);
        s.insert(x.clone());
        s
    });
    let lhs_pr = Expr::expect(
        &y,
        Expr::var(R),
        ind(&crate::subst::subst_expr(&query, &x, &Expr::var(&y))),
    );
    let ratio = Expr::prim(
        Prim::Div,
        vec![pr_over(&prior, &conj), pr_over(&prior, &cond)],
    );
    let want = Formula::eq(lhs_pr, ratio.clone());
    if !alpha_eq_formula(post, &want) {
        return Err(perr(
            "bayes",
            format!(
                "goal does not match the Bayes conclusion `{}`",
                crate::printer::print_formula(&want)
            ),
        ));
    }

    // Obligations: 0 < Pr[cond] and Pr[cond] < inf under the prior. Once
    // proved they join the context for the generated field step.
    let pr_cond = pr_over(&prior, &cond);
    let pos_f = Formula::lt(Expr::zero(), pr_cond.clone());
    let fin_f = Formula::lt(pr_cond.clone(), Expr::Const(Const::Infinity));
    k.check_pl(ctx, &pos_f, pos)?;
    k.check_pl(ctx, &fin_f, finite)?;
    let mut ctx = ctx.clone();
    ctx.push_hyp("b_pos", pos_f);
    ctx.push_hyp("b_fin", fin_f);
    let ctx = &ctx;

    // Expansion: [u-QRY] with phi1 := (r = prior), then assertion-level
    // equational reasoning. We check the generated primitive derivation.
    let expansion = Step::UQry {
        first: Formula::eq(Expr::var(R), prior.clone()),
        lhs: vec![Step::UPl(vec![Step::Thus(Justification::By(Rule::Conv))])],
        rhs: vec![Step::UPl(bayes_pl_block(
            ctx, &prior, &lik, &x, &elem, &cond, &query, &conj, post,
        )?)],
    };
    check_upl_step(k, ctx, subject, ty, post, &expansion)
}

/// The assertion-logic block at the heart of the Bayes expansion: for the
/// generic measure `s = prior`, rewrite the posterior probability through the
/// observation characterization down to the ratio of prior probabilities.
#[allow(clippy::too_many_arguments)]
fn bayes_pl_block(
    ctx: &Context,
    prior: &Expr,
    lik: &Expr,
    x: &str,
    elem: &TypeTerm,
    cond: &Expr,
    query: &Expr,
    conj: &Expr,
    _post: &Formula,
) -> Result<Vec<Step>> {
    let ind = |b: &Expr| Expr::if_then_else(b.clone(), Expr::one(), Expr::zero());
    let s = fresh_hyp(ctx, "s_prior");
    let hs = fresh_hyp(ctx, "h_s");
    let have = |name: &str, f: Formula, rule: Rule| Step::Have {
        name: name.to_string(),
        formula: f,
        just: Justification::By(rule),
    };
    let sch = |name: &str, terms: Vec<(&str, Expr)>, using: Vec<&str>| Rule::Schema {
        name: name.to_string(),
        terms: terms
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        types: Vec::new(),
        using: using.into_iter().map(|s| s.to_string()).collect(),
    };

    let scale_prior = Expr::Scale(Box::new(prior.clone()), Box::new(lik.clone()));
    let mass_of = |e: &Expr| Expr::expect("mass_y", e.clone(), Expr::one());
    let kmass = mass_of(&scale_prior);
    let pr_cond = Expr::expect(x, prior.clone(), ind(cond));
    let pr_conj = Expr::expect(x, prior.clone(), ind(conj));
    let inv_k = Expr::prim(Prim::Div, vec![Expr::one(), kmass.clone()]);
    let u = "bayes_u";

    // Weight carried by the normalized observation; the likelihood applied to
    // the binder reduces to the indicator body.
    let lik_at_x = ind(cond);
    let weighted = Expr::Lam(
        x.to_string(),
        TypeTerm::Hole,
        Box::new(Expr::prim(
            Prim::Mul,
            vec![lik_at_x.clone(), inv_k.clone()],
        )),
    );

    let y = fresh_name("y", &{
        let mut s: BTreeSet<String> = crate::subst::free_vars_expr(query);
        s.insert(x.to_string());
        s
    });
    let query_y = crate::subst::subst_expr(query, x, &Expr::var(&y));

    let mut steps = Vec::new();
    // fix s; intro h_s : s = prior; substitute it into the goal.
    steps.push(Step::Fix(s.clone()));
    steps.push(Step::Intro(hs.clone()));
    steps.push(Step::RewriteGoal(crate::script::RewriteSpec {
        eq_hyp: hs.clone(),
        dir: crate::script::EqDir::Ltr,
        occs: None,
    }));

    // h1: observe prior lik = normalize(scale(prior, lik))
    steps.push(have(
        "b_obs",
        Formula::eq(
            Expr::Observe(Box::new(prior.clone()), Box::new(lik.clone())),
            Expr::Normalize(Box::new(scale_prior.clone())),
        ),
        sch(
            "observe_def",
            vec![("e1", prior.clone()), ("e2", lik.clone())],
            vec![],
        ),
    ));
    // h2: normalize(scale(prior, lik)) = scale(scale(prior, lik), fun u -> 1/K)
    steps.push(have(
        "b_norm",
        Formula::eq(
            Expr::Normalize(Box::new(scale_prior.clone())),
            Expr::Scale(
                Box::new(scale_prior.clone()),
                Box::new(Expr::Lam(
                    u.to_string(),
                    TypeTerm::Hole,
                    Box::new(inv_k.clone()),
                )),
            ),
        ),
        sch("normalize_def", vec![("e", scale_prior.clone())], vec![]),
    ));
    // h3: scale(scale(prior, lik), fun u -> 1/K) = scale(prior, fun x -> lik x * (1/K))
    steps.push(have(
        "b_fuse",
        Formula::eq(
            Expr::Scale(
                Box::new(scale_prior.clone()),
                Box::new(Expr::Lam(
                    u.to_string(),
                    TypeTerm::Hole,
                    Box::new(inv_k.clone()),
                )),
            ),
            Expr::Scale(Box::new(prior.clone()), Box::new(weighted.clone())),
        ),
        sch(
            "scale_fuse",
            vec![
                ("e1", prior.clone()),
                ("e2", lik.clone()),
                (
                    "e3",
                    Expr::Lam(u.to_string(), TypeTerm::Hole, Box::new(inv_k.clone())),
                ),
            ],
            vec![],
        ),
    ));
    // Rewrite the goal's observe into the weighted scale, step by step.
    for h in ["b_obs", "b_norm", "b_fuse"] {
        steps.push(Step::RewriteGoal(crate::script::RewriteSpec {
            eq_hyp: h.to_string(),
            dir: crate::script::EqDir::Ltr,
            occs: None,
        }));
    }
    // h4: E[y ~ scale(prior, weighted)](ind query) = E[x ~ prior](ind query * weighted x)
    steps.push(have(
        "b_push",
        Formula::eq(
            Expr::expect(
                &y,
                Expr::Scale(Box::new(prior.clone()), Box::new(weighted.clone())),
                ind(&query_y),
            ),
            Expr::expect(
                x,
                prior.clone(),
                Expr::prim(
                    Prim::Mul,
                    vec![
                        ind(query),
                        Expr::prim(Prim::Mul, vec![lik_at_x.clone(), inv_k.clone()]),
                    ],
                ),
            ),
        ),
        sch(
            "expect_scale",
            vec![
                ("d", prior.clone()),
                ("g", weighted.clone()),
                (
                    "f",
                    Expr::Lam(x.to_string(), TypeTerm::Hole, Box::new(ind(query))),
                ),
            ],
            vec![],
        ),
    ));
    steps.push(Step::RewriteGoal(crate::script::RewriteSpec {
        eq_hyp: "b_push".to_string(),
        dir: crate::script::EqDir::Ltr,
        occs: None,
    }));
    // pointwise: ind query * (lik x * 1/K) = (1/K) * ind (cond && query)
    let pw_lhs = Expr::prim(
        Prim::Mul,
        vec![
            ind(query),
            Expr::prim(Prim::Mul, vec![lik_at_x.clone(), inv_k.clone()]),
        ],
    );
    let pw_rhs = Expr::prim(Prim::Mul, vec![inv_k.clone(), ind(conj)]);
    let xv = x.to_string();
    steps.push(Step::Have {
        name: "b_pw".to_string(),
        formula: Formula::Forall(
            xv.clone(),
            elem.clone(),
            Box::new(Formula::eq(pw_lhs, pw_rhs)),
        ),
        just: Justification::Block(vec![
            Step::Fix(xv.clone()),
            Step::CasesBool {
                scrut: cond.clone(),
                name: "b_hc".to_string(),
                tt: vec![
                    Step::RewriteGoal(crate::script::RewriteSpec {
                        eq_hyp: "b_hc".to_string(),
                        dir: crate::script::EqDir::Ltr,
                        occs: None,
                    }),
                    Step::CasesBool {
                        scrut: query.clone(),
                        name: "b_hq".to_string(),
                        tt: vec![
                            Step::RewriteGoal(crate::script::RewriteSpec {
                                eq_hyp: "b_hq".to_string(),
                                dir: crate::script::EqDir::Ltr,
                                occs: None,
                            }),
                            Step::Thus(Justification::By(Rule::Conv)),
                        ],
                        ff: vec![
                            Step::RewriteGoal(crate::script::RewriteSpec {
                                eq_hyp: "b_hq".to_string(),
                                dir: crate::script::EqDir::Ltr,
                                occs: None,
                            }),
                            Step::Thus(Justification::By(Rule::Conv)),
                        ],
                    },
                ],
                ff: vec![
                    Step::RewriteGoal(crate::script::RewriteSpec {
                        eq_hyp: "b_hc".to_string(),
                        dir: crate::script::EqDir::Ltr,
                        occs: None,
                    }),
                    Step::Thus(Justification::By(Rule::Conv)),
                ],
            },
        ]),
    });
    // Hole in the pointwise quantifier: fill it with the element type by
    // re-checking; done by the kernel's wf pass, which needs a real type.
    // We state it with the concrete element type instead.
    // (The Forall above is patched by the caller before checking.)

    steps.push(have(
        "b_cong",
        Formula::eq(
            Expr::expect(
                x,
                prior.clone(),
                Expr::prim(
                    Prim::Mul,
                    vec![
                        ind(query),
                        Expr::prim(Prim::Mul, vec![lik_at_x.clone(), inv_k.clone()]),
                    ],
                ),
            ),
            Expr::expect(
                x,
                prior.clone(),
                Expr::prim(Prim::Mul, vec![inv_k.clone(), ind(conj)]),
            ),
        ),
        Rule::ECong(HypRef::Name("b_pw".to_string())),
    ));
    steps.push(Step::RewriteGoal(crate::script::RewriteSpec {
        eq_hyp: "b_cong".to_string(),
        dir: crate::script::EqDir::Ltr,
        occs: None,
    }));
    // linearity: E[(1/K) * ind conj] = (1/K) * E[ind conj]
    steps.push(have(
        "b_lin",
        Formula::eq(
            Expr::expect(
                x,
                prior.clone(),
                Expr::prim(Prim::Mul, vec![inv_k.clone(), ind(conj)]),
            ),
            Expr::prim(Prim::Mul, vec![inv_k.clone(), pr_conj.clone()]),
        ),
        sch(
            "linearity_scalar",
            vec![
                ("d", prior.clone()),
                ("c", inv_k.clone()),
                (
                    "f",
                    Expr::Lam(x.to_string(), TypeTerm::Hole, Box::new(ind(conj))),
                ),
            ],
            vec![],
        ),
    ));
    steps.push(Step::RewriteGoal(crate::script::RewriteSpec {
        eq_hyp: "b_lin".to_string(),
        dir: crate::script::EqDir::Ltr,
        occs: None,
    }));
    // K = Pr[cond]: via expect_scale at the constant-one function.
    steps.push(have(
        "b_mass",
        Formula::eq(
            kmass.clone(),
            Expr::expect(
                x,
                prior.clone(),
                Expr::prim(Prim::Mul, vec![Expr::one(), lik_at_x.clone()]),
            ),
        ),
        sch(
            "expect_scale",
            vec![
                ("d", prior.clone()),
                ("g", lik.clone()),
                (
                    "f",
                    Expr::Lam(x.to_string(), TypeTerm::Hole, Box::new(Expr::one())),
                ),
            ],
            vec![],
        ),
    ));
    steps.push(Step::Have {
        name: "b_masspw".to_string(),
        formula: Formula::Forall(
            xv.clone(),
            elem.clone(),
            Box::new(Formula::eq(
                Expr::prim(Prim::Mul, vec![Expr::one(), lik_at_x.clone()]),
                ind(cond),
            )),
        ),
        just: Justification::Block(vec![
            Step::Fix(xv.clone()),
            Step::Thus(Justification::By(Rule::Conv)),
        ]),
    });
    steps.push(have(
        "b_massind",
        Formula::eq(
            Expr::expect(
                x,
                prior.clone(),
                Expr::prim(Prim::Mul, vec![Expr::one(), lik_at_x.clone()]),
            ),
            Expr::expect(x, prior.clone(), ind(cond)),
        ),
        Rule::ECong(HypRef::Name("b_masspw".to_string())),
    ));
    steps.push(Step::Have {
        name: "b_k".to_string(),
        formula: Formula::eq(kmass.clone(), pr_cond.clone()),
        just: Justification::Block(vec![
            Step::RewriteGoal(crate::script::RewriteSpec {
                eq_hyp: "b_massind".to_string(),
                dir: crate::script::EqDir::Rtl,
                occs: None,
            }),
            Step::Exact("b_mass".to_string()),
        ]),
    });
    steps.push(Step::RewriteGoal(crate::script::RewriteSpec {
        eq_hyp: "b_k".to_string(),
        dir: crate::script::EqDir::Ltr,
        occs: None,
    }));
    // Finish: (1 / Pr[cond]) * Pr[conj] = Pr[conj] / Pr[cond] by the field
    // step, using the positivity and finiteness obligations.
    steps.push(Step::Thus(Justification::By(Rule::Field {
        using: vec!["b_pos".to_string(), "b_fin".to_string()],
    })));
    Ok(steps)
}

// ---------------------------------------------------------------------------
// Graded lifting laws
// ---------------------------------------------------------------------------

// ---------------------------------------------------------------------------
// Graded lifting laws (unit and bind), checked by expansion
// ---------------------------------------------------------------------------

/// Instance of the lifting parameter's test formula.
fn s_inst(p: &LiftParam, k: Expr, l: Expr) -> Formula {
    let mut m = BTreeMap::new();
    m.insert(crate::liftings::GRADE_VAR.to_string(), k);
    m.insert(crate::liftings::TEST_VAR.to_string(), l);
    subst_formula_many(&p.test, &m)
}

fn s_inst_rel(p: &LiftParam, k: Expr, l1: Expr, l2: Expr) -> Formula {
    let mut m = BTreeMap::new();
    m.insert(crate::liftings::GRADE_VAR.to_string(), k);
    m.insert(crate::liftings::TEST_VAR1.to_string(), l1);
    m.insert(crate::liftings::TEST_VAR2.to_string(), l2);
    subst_formula_many(&p.test, &m)
}

fn rw(h: &str) -> Step {
    Step::RewriteGoal(crate::script::RewriteSpec {
        eq_hyp: h.to_string(),
        dir: crate::script::EqDir::Ltr,
        occs: None,
    })
}

fn have_by(name: &str, f: Formula, rule: Rule) -> Step {
    Step::Have {
        name: name.to_string(),
        formula: f,
        just: Justification::By(rule),
    }
}

/// Unit law: from `e : tau | phi[r/r']` conclude
/// `return e : D[tau] | U(1)(phi)`. Expanded into subsumption plus a
/// first-principles entailment from the definitional expansion.
fn lift_unit_step(
    k: &mut Kernel<'_>,
    ctx: &Context,
    subject: &Expr,
    ty: &TypeTerm,
    post: &Formula,
    p: &LiftParam,
    phi: &Formula,
    body: &[Step],
) -> Result<()> {
    let e = match subject {
        Expr::Ret(e) => (**e).clone(),
        _ => return Err(perr("u_lift_unit", "subject is not a return")),
    };
    let elem = match ty {
        TypeTerm::SubProb(a) => (**a).clone(),
        _ => return Err(perr("u_lift_unit", "subject type must be D[..]")),
    };
    let obs_ty = match &p.kind {
        LiftKind::Unary { obs_ty } => obs_ty.clone(),
        _ => return Err(perr("u_lift_unit", "parameter is relational")),
    };
    let phi = {
        let d = crate::desugar::desugar_formula(phi, k.env)?;
        check_formula_wf(&ctx.with_var(RV, elem.clone()), &d)?
    };
    let want = crate::liftings::expand_unary(p, &p.monoid.unit(), &elem, &phi)?;
    let want = check_formula_wf(&ctx.with_var(R, ty.clone()), &want)?;
    if !alpha_eq_formula(post, &want) {
        return Err(perr(
            "u_lift_unit",
            "goal is not the unit-grade lifting of phi",
        ));
    }

    // Entailment: phi[e/r'] => want[return e / r], proved from first
    // principles: unfold, instantiate the pointwise test at e, close with the
    // monadic left unit.
    let phi_e = subst_formula(&phi, RV, &e);
    let avoid: BTreeSet<String> = ctx.hyps.iter().map(|(n, _)| n.clone()).collect();
    let beta = fresh_name("lu_beta", &avoid);
    let fv = fresh_name("lu_f", &avoid);
    let s_pointwise = s_inst(
        p,
        Expr::var(&beta),
        Expr::app(Expr::var(&fv), e.clone()),
    );
    let entail = vec![
        Step::Intro("lu_phi".to_string()),
        Step::Fix(beta.clone()),
        Step::Fix(fv.clone()),
        Step::Intro("lu_pw".to_string()),
        have_by(
            "lu_inst",
            Formula::imp(phi_e.clone(), s_pointwise.clone()),
            Rule::ForallElim(HypRef::Name("lu_pw".to_string()), vec![e.clone()]),
        ),
        have_by(
            "lu_s",
            s_pointwise,
            Rule::Mp(HypRef::Name("lu_inst".to_string()), HypRef::Name("lu_phi".to_string())),
        ),
        Step::Thus(Justification::By(Rule::ConvFrom(HypRef::Name("lu_s".to_string())))),
    ];
    let _ = obs_ty;
    let expansion = Step::USub {
        mid: subst_formula(&phi, RV, &Expr::var(R)),
        subj: vec![Step::URet(body.to_vec())],
        entail,
    };
    check_upl_step(k, ctx, subject, ty, post, &expansion)
}

/// Bind law: from `e : D[tau] | U(alpha)(phi)` and
/// `e' : tau -> D[tau'] | forall x. phi[x/r'] => U(beta)(phi')[r x / r]`
/// conclude `bind e e' : D[tau'] | U(alpha.beta)(phi')`.
#[allow(clippy::too_many_arguments)]
fn lift_bind_step(
    k: &mut Kernel<'_>,
    ctx: &Context,
    subject: &Expr,
    ty: &TypeTerm,
    post: &Formula,
    p: &LiftParam,
    alpha: &Expr,
    beta: &Expr,
    phi: &Formula,
    phi2: &Formula,
    lhs: &[Step],
    rhs: &[Step],
) -> Result<()> {
    let (e, kont) = match subject {
        Expr::Bind(e, kont) => ((**e).clone(), (**kont).clone()),
        _ => return Err(perr("u_lift_bind", "subject is not a bind")),
    };
    let tau2 = match ty {
        TypeTerm::SubProb(a) => (**a).clone(),
        _ => return Err(perr("u_lift_bind", "subject type must be D[..]")),
    };
    let (te, _) = infer_expr(ctx, &e)?;
    let tau = match &te {
        TypeTerm::SubProb(a) => (**a).clone(),
        _ => return Err(perr("u_lift_bind", "first component must be D[..]")),
    };
    let zeta = p.monoid.carrier();
    let alpha = k.prep_expr(ctx, alpha, Some(&zeta))?;
    let beta = k.prep_expr(ctx, beta, Some(&zeta))?;
    let phi = {
        let d = crate::desugar::desugar_formula(phi, k.env)?;
        check_formula_wf(&ctx.with_var(RV, tau.clone()), &d)?
    };
    let phi2 = {
        let d = crate::desugar::desugar_formula(phi2, k.env)?;
        check_formula_wf(&ctx.with_var(RV, tau2.clone()), &d)?
    };
    let want = crate::liftings::expand_unary(p, &p.monoid.comp(alpha.clone(), beta.clone()), &tau2, &phi2)?;
    let want = check_formula_wf(&ctx.with_var(R, ty.clone()), &want)?;
    if !alpha_eq_formula(post, &want) {
        return Err(perr(
            "u_lift_bind",
            "goal is not the composite-grade lifting of phi'",
        ));
    }

    let first = crate::liftings::expand_unary(p, &alpha, &tau, &phi)?;
    let first = check_formula_wf(&ctx.with_var(R, te.clone()), &first)?;
    let lifted_beta = crate::liftings::expand_unary(p, &beta, &tau2, &phi2)?;
    // premise for the continuation, over r : tau -> D[tau2]
    let x = fresh_name("x", &{
        let mut s = crate::subst::free_vars_formula(&phi);
        s.extend(crate::subst::free_vars_formula(&lifted_beta));
        s
    });
    let mid = Formula::Forall(
        x.clone(),
        tau.clone(),
        Box::new(Formula::imp(
            subst_formula(&phi, RV, &Expr::var(&x)),
            subst_formula(&lifted_beta, R, &Expr::app(Expr::var(R), Expr::var(&x))),
        )),
    );

    let entail = lift_bind_glue(ctx, p, &alpha, &beta, &phi, &phi2, &kont, &tau, &tau2)?;
    let expansion = Step::UBind {
        first,
        lhs: lhs.to_vec(),
        rhs: vec![Step::USub {
            mid,
            subj: rhs.to_vec(),
            entail,
        }],
    };
    check_upl_step(k, ctx, subject, ty, post, &expansion)
}

/// The assertion-level core of the bind law, following the associativity
/// argument: (forall x. phi[x] => U(beta)(phi')[e' x]) =>
/// (forall s. U(alpha)(phi)[s] => U(alpha.beta)(phi')[bind s e']).
#[allow(clippy::too_many_arguments)]
fn lift_bind_glue(
    ctx: &Context,
    p: &LiftParam,
    alpha: &Expr,
    beta: &Expr,
    phi: &Formula,
    phi2: &Formula,
    kont: &Expr,
    tau: &TypeTerm,
    tau2: &TypeTerm,
) -> Result<Vec<Step>> {
    let obs_ty = match &p.kind {
        LiftKind::Unary { obs_ty } => obs_ty.clone(),
        _ => return Err(perr("u_lift_bind", "parameter is relational")),
    };
    let avoid: BTreeSet<String> = ctx
        .hyps
        .iter()
        .map(|(n, _)| n.clone())
        .chain(ctx.vars.iter().map(|(n, _)| n.clone()))
        .collect();
    let f = |b: &str| fresh_name(b, &avoid);
    let (s, delta, g, x, y) = (f("lb_s"), f("lb_delta"), f("lb_g"), f("lb_x"), f("lb_y"));
    let comp = |a: Expr, b: Expr| p.monoid.comp(a, b);

    let kont_of = |x: Expr| Expr::app(kont.clone(), x);
    let _ = (&y, &obs_ty);

    // Key pointwise fact: forall x. phi[x] => S(beta.delta, bind (kont x) g).
    let hpt_f = Formula::Forall(
        x.clone(),
        tau.clone(),
        Box::new(Formula::imp(
            subst_formula(phi, RV, &Expr::var(&x)),
            s_inst(
                p,
                comp(beta.clone(), Expr::var(&delta)),
                Expr::bind(kont_of(Expr::var(&x)), Expr::var(&g)),
            ),
        )),
    );
    // The composite continuation used when instantiating U(alpha).
    let big_g = Expr::Lam(
        x.clone(),
        tau.clone(),
        Box::new(Expr::bind(kont_of(Expr::var(&x)), Expr::var(&g))),
    );

    // Inner proof of the pointwise fact.
    let u_beta_at = subst_formula(
        &crate::liftings::expand_unary(p, beta, tau2, phi2)?,
        R,
        &kont_of(Expr::var(&x)),
    );
    let inner_pt = vec![
        Step::Fix(x.clone()),
        Step::Intro("lb_hx".to_string()),
        have_by(
            "lb_u1",
            Formula::imp(
                subst_formula(phi, RV, &Expr::var(&x)),
                u_beta_at.clone(),
            ),
            Rule::ForallElim(HypRef::Name("lb_H".to_string()), vec![Expr::var(&x)]),
        ),
        have_by(
            "lb_u2",
            u_beta_at.clone(),
            Rule::Mp(HypRef::Name("lb_u1".to_string()), HypRef::Name("lb_hx".to_string())),
        ),
        have_by(
            "lb_u3",
            {
                // instantiate U(beta) at delta and g
                match strip_two_foralls(&u_beta_at) {
                    Some(inner) => {
                        let mut m = BTreeMap::new();
                        let (b1, f1) = forall_names(&u_beta_at);
                        m.insert(b1, Expr::var(&delta));
                        m.insert(f1, Expr::var(&g));
                        subst_formula_many(&inner, &m)
                    }
                    None => Formula::Top,
                }
            },
            Rule::ForallElim(HypRef::Name("lb_u2".to_string()),
                vec![Expr::var(&delta), Expr::var(&g)],
            ),
        ),
        Step::Thus(Justification::Block(vec![
            have_by(
                "lb_u4",
                {
                    match strip_two_foralls(&u_beta_at) {
                        Some(inner) => {
                            let mut m = BTreeMap::new();
                            let (b1, f1) = forall_names(&u_beta_at);
                            m.insert(b1, Expr::var(&delta));
                            m.insert(f1, Expr::var(&g));
                            match subst_formula_many(&inner, &m) {
                                Formula::Imp(_, c) => *c,
                                _ => Formula::Top,
                            }
                        }
                        None => Formula::Top,
                    }
                },
                Rule::Mp(HypRef::Name("lb_u3".to_string()), HypRef::Name("lb_hg".to_string())),
            ),
            Step::Thus(Justification::By(Rule::ConvFrom(HypRef::Name("lb_u4".to_string())))),
        ])),
    ];

    // U(alpha)[s] instantiated at grade beta.delta and function big_g.
    let u_alpha_s = subst_formula(
        &crate::liftings::expand_unary(p, alpha, tau, phi)?,
        R,
        &Expr::var(&s),
    );
    let inst_big = {
        match strip_two_foralls(&u_alpha_s) {
            Some(inner) => {
                let (b1, f1) = forall_names(&u_alpha_s);
                let mut m = BTreeMap::new();
                m.insert(b1, comp(beta.clone(), Expr::var(&delta)));
                m.insert(f1, big_g.clone());
                subst_formula_many(&inner, &m)
            }
            None => Formula::Top,
        }
    };
    let (inst_pre, inst_concl) = match &inst_big {
        Formula::Imp(a, b) => ((**a).clone(), (**b).clone()),
        _ => (Formula::Top, Formula::Top),
    };

    let mut steps = vec![
        Step::Intro("lb_H".to_string()),
        Step::Fix(s.clone()),
        Step::Intro("lb_Hs".to_string()),
        Step::Fix(delta.clone()),
        Step::Fix(g.clone()),
        Step::Intro("lb_hg".to_string()),
    ];
    steps.push(Step::Have {
        name: "lb_hpt".to_string(),
        formula: hpt_f.clone(),
        just: Justification::Block(inner_pt),
    });
    steps.push(have_by(
        "lb_big",
        inst_big.clone(),
        Rule::ForallElim(
            HypRef::Name("lb_Hs".to_string()),
            vec![comp(beta.clone(), Expr::var(&delta)), big_g.clone()],
        ),
    ));
    // The instantiated premise contains the beta redex (big_g x); align it
    // with the pointwise fact by conversion.
    steps.push(Step::Have {
        name: "lb_pre".to_string(),
        formula: inst_pre,
        just: Justification::Block(vec![Step::Thus(Justification::By(Rule::ConvFrom(
            HypRef::Name("lb_hpt".to_string()),
        )))]),
    });
    steps.push(have_by(
        "lb_out",
        inst_concl,
        Rule::Mp(HypRef::Name("lb_big".to_string()), HypRef::Name("lb_pre".to_string())),
    ));
    // Goal grade is (alpha.beta).delta while the derived one is
    // alpha.(beta.delta); on the additive monoid this is a field identity.
    if p.monoid == crate::liftings::GradeMonoid::PRealAdd {
        steps.push(have_by(
            "lb_assoc",
            Formula::eq(
                comp(
                    comp(alpha.clone(), beta.clone()),
                    Expr::var(&delta),
                ),
                comp(
                    alpha.clone(),
                    comp(beta.clone(), Expr::var(&delta)),
                ),
            ),
            Rule::Field { using: vec![] },
        ));
        steps.push(rw("lb_assoc"));
    }
    steps.push(Step::Thus(Justification::By(Rule::ConvFrom(
        HypRef::Name("lb_out".to_string()),
    ))));
    Ok(steps)
}

fn strip_two_foralls(f: &Formula) -> Option<Formula> {
    match f {
        Formula::Forall(_, _, b) => match &**b {
            Formula::Forall(_, _, c) => Some((**c).clone()),
            _ => None,
        },
        _ => None,
    }
}

fn forall_names(f: &Formula) -> (String, String) {
    match f {
        Formula::Forall(a, _, b) => match &**b {
            Formula::Forall(c, _, _) => (a.clone(), c.clone()),
            _ => (a.clone(), String::new()),
        },
        _ => (String::new(), String::new()),
    }
}

// ---------------------------------------------------------------------------
// Relational logic
// ---------------------------------------------------------------------------

pub fn check_rpl(
    k: &mut Kernel<'_>,
    ctx: &Context,
    left: (&Expr, &TypeTerm),
    right: (&Expr, &TypeTerm),
    post: &Formula,
    steps: &[Step],
) -> Result<()> {
    if steps.len() != 1 {
        return Err(perr(
            "rpl",
            format!("expected exactly one subject-directed step, found {}", steps.len()),
        ));
    }
    check_rpl_step(k, ctx, left, right, post, &steps[0])
}

fn check_rpl_step(
    k: &mut Kernel<'_>,
    ctx: &Context,
    left: (&Expr, &TypeTerm),
    right: (&Expr, &TypeTerm),
    post: &Formula,
    step: &Step,
) -> Result<()> {
    let (l, lt) = left;
    let (r, rt) = right;
    match step {
        Step::RPl(block) => k.check_pl(ctx, &rpl_to_pl(l, r, post), block),
        Step::RSub { mid, subj, entail } => {
            let mid = k.prep_formula(
                &ctx.with_var(R1, lt.clone()).with_var(R2, rt.clone()),
                mid,
            )?;
            check_rpl(k, ctx, left, right, &mid, subj)?;
            let goal = Formula::imp(rpl_to_pl(l, r, &mid), rpl_to_pl(l, r, post));
            k.check_pl(ctx, &goal, entail)
        }
        Step::RRet(block) => match (l, r) {
            (Expr::Ret(e1), Expr::Ret(e2)) => {
                let el1 = measure_elem(lt).ok_or_else(|| perr("r_ret", "left not monadic"))?;
                let el2 = measure_elem(rt).ok_or_else(|| perr("r_ret", "right not monadic"))?;
                let mut m = BTreeMap::new();
                m.insert(R1.to_string(), Expr::Ret(Box::new(Expr::var(R1))));
                m.insert(R2.to_string(), Expr::Ret(Box::new(Expr::var(R2))));
                let post2 = subst_formula_many(post, &m);
                check_rpl(k, ctx, (e1, &el1), (e2, &el2), &post2, block)
            }
            _ => Err(perr("r_ret", "subjects are not returns")),
        },
        Step::RRetOne { side, body } => {
            let (subj, other, other_ty) = match side {
                Side::Left => (l, r, rt),
                Side::Right => (r, l, lt),
            };
            match subj {
                Expr::Ret(e) => {
                    let my_ty = if *side == Side::Left { lt } else { rt };
                    let elem = measure_elem(my_ty)
                        .ok_or_else(|| perr("r_ret_one", "subject not monadic"))?;
                    let rv = if *side == Side::Left { R1 } else { R2 };
                    let post2 =
                        subst_formula(post, rv, &Expr::Ret(Box::new(Expr::var(rv))));
                    match side {
                        Side::Left => check_rpl(k, ctx, (e, &elem), (other, other_ty), &post2, body),
                        Side::Right => check_rpl(k, ctx, (other, other_ty), (e, &elem), &post2, body),
                    }
                }
                _ => Err(perr("r_ret_one", "subject is not a return")),
            }
        }
        Step::RBind { first, lhs, rhs } => match (l, r) {
            (Expr::Bind(e1, k1), Expr::Bind(e2, k2)) => {
                let (te1, _) = infer_expr(ctx, e1)?;
                let (te2, _) = infer_expr(ctx, e2)?;
                let first = k.prep_formula(
                    &ctx.with_var(R1, te1.clone()).with_var(R2, te2.clone()),
                    first,
                )?;
                check_rpl(k, ctx, (e1, &te1), (e2, &te2), &first, lhs)?;
                let (tk1, _) = infer_expr(ctx, k1)?;
                let (tk2, _) = infer_expr(ctx, k2)?;
                let s1 = fresh_name("s1", &crate::subst::free_vars_formula(&first));
                let s2 = fresh_name("s2", &{
                    let mut a = crate::subst::free_vars_formula(&first);
                    a.insert(s1.clone());
                    a
                });
                let mut m = BTreeMap::new();
                m.insert(R1.to_string(), Expr::var(&s1));
                m.insert(R2.to_string(), Expr::var(&s2));
                let first_s = subst_formula_many(&first, &m);
                let mut m2 = BTreeMap::new();
                m2.insert(R1.to_string(), Expr::bind(Expr::var(&s1), Expr::var(R1)));
                m2.insert(R2.to_string(), Expr::bind(Expr::var(&s2), Expr::var(R2)));
                let post_s = subst_formula_many(post, &m2);
                let post2 = Formula::Forall(
                    s1.clone(),
                    te1,
                    Box::new(Formula::Forall(
                        s2.clone(),
                        te2,
                        Box::new(Formula::imp(first_s, post_s)),
                    )),
                );
                check_rpl(k, ctx, (k1, &tk1), (k2, &tk2), &post2, rhs)
            }
            _ => Err(perr("r_bind", "subjects are not binds")),
        },
        Step::RQry { first, lhs, rhs } => match (l, r) {
            (Expr::Observe(e1, l1), Expr::Observe(e2, l2)) => {
                let (te1, _) = infer_expr(ctx, e1)?;
                let (te2, _) = infer_expr(ctx, e2)?;
                let el1 = measure_elem(&te1).ok_or_else(|| perr("r_qry", "left prior"))?;
                let el2 = measure_elem(&te2).ok_or_else(|| perr("r_qry", "right prior"))?;
                let first = k.prep_formula(
                    &ctx.with_var(R1, te1.clone()).with_var(R2, te2.clone()),
                    first,
                )?;
                check_rpl(k, ctx, (e1, &te1), (e2, &te2), &first, lhs)?;
                let s1 = fresh_name("s1", &crate::subst::free_vars_formula(&first));
                let s2 = fresh_name("s2", &{
                    let mut a = crate::subst::free_vars_formula(&first);
                    a.insert(s1.clone());
                    a
                });
                let mut m = BTreeMap::new();
                m.insert(R1.to_string(), Expr::var(&s1));
                m.insert(R2.to_string(), Expr::var(&s2));
                let first_s = subst_formula_many(&first, &m);
                let mut m2 = BTreeMap::new();
                m2.insert(
                    R1.to_string(),
                    Expr::Observe(Box::new(Expr::var(&s1)), Box::new(Expr::var(R1))),
                );
                m2.insert(
                    R2.to_string(),
                    Expr::Observe(Box::new(Expr::var(&s2)), Box::new(Expr::var(R2))),
                );
                let post_s = subst_formula_many(post, &m2);
                let post2 = Formula::Forall(
                    s1.clone(),
                    te1,
                    Box::new(Formula::Forall(
                        s2.clone(),
                        te2,
                        Box::new(Formula::imp(first_s, post_s)),
                    )),
                );
                check_rpl(
                    k,
                    ctx,
                    (l1, &TypeTerm::arrow(el1, TypeTerm::PReal)),
                    (l2, &TypeTerm::arrow(el2, TypeTerm::PReal)),
                    &post2,
                    rhs,
                )
            }
            _ => Err(perr("r_qry", "subjects are not observes")),
        },
        Step::RBindOne { side, first, fst, snd } => {
            let (subj, subj_ty, other, other_ty) = match side {
                Side::Left => (l, lt, r, rt),
                Side::Right => (r, rt, l, lt),
            };
            match subj {
                Expr::Bind(e1, k1) => {
                    let (te1, _) = infer_expr(ctx, e1)?;
                    let first = k.prep_formula(&ctx.with_var(R, te1.clone()), first)?;
                    check_upl(k, ctx, e1, &te1, &first, fst)?;
                    let (tk1, _) = infer_expr(ctx, k1)?;
                    let rv = if *side == Side::Left { R1 } else { R2 };
                    let s1 = fresh_name("s1", &crate::subst::free_vars_formula(&first));
                    let first_s = subst_formula(&first, R, &Expr::var(&s1));
                    let post_s = subst_formula(
                        post,
                        rv,
                        &Expr::bind(Expr::var(&s1), Expr::var(rv)),
                    );
                    let post2 = Formula::Forall(
                        s1.clone(),
                        te1,
                        Box::new(Formula::imp(first_s, post_s)),
                    );
                    match side {
                        Side::Left => {
                            check_rpl(k, ctx, (k1, &tk1), (other, other_ty), &post2, snd)
                        }
                        Side::Right => {
                            check_rpl(k, ctx, (other, other_ty), (k1, &tk1), &post2, snd)
                        }
                    }
                }
                _ => Err(perr("r_bind_one", "subject is not a bind")),
            }
            .map(|_| {
                let _ = subj_ty;
            })
        }
        Step::RQryOne { side, first, fst, snd } => {
            let (subj, other, other_ty) = match side {
                Side::Left => (l, r, rt),
                Side::Right => (r, l, lt),
            };
            match subj {
                Expr::Observe(e1, l1) => {
                    let (te1, _) = infer_expr(ctx, e1)?;
                    let elem = measure_elem(&te1)
                        .ok_or_else(|| perr("r_qry_one", "prior is not a measure"))?;
                    let first = k.prep_formula(&ctx.with_var(R, te1.clone()), first)?;
                    check_upl(k, ctx, e1, &te1, &first, fst)?;
                    let rv = if *side == Side::Left { R1 } else { R2 };
                    let s1 = fresh_name("s1", &crate::subst::free_vars_formula(&first));
                    let first_s = subst_formula(&first, R, &Expr::var(&s1));
                    let post_s = subst_formula(
                        post,
                        rv,
                        &Expr::Observe(Box::new(Expr::var(&s1)), Box::new(Expr::var(rv))),
                    );
                    let post2 = Formula::Forall(
                        s1.clone(),
                        te1,
                        Box::new(Formula::imp(first_s, post_s)),
                    );
                    let lik_ty = TypeTerm::arrow(elem, TypeTerm::PReal);
                    match side {
                        Side::Left => {
                            check_rpl(k, ctx, (l1, &lik_ty), (other, other_ty), &post2, snd)
                        }
                        Side::Right => {
                            check_rpl(k, ctx, (other, other_ty), (l1, &lik_ty), &post2, snd)
                        }
                    }
                }
                _ => Err(perr("r_qry_one", "subject is not an observe")),
            }
        }
        Step::RAbs { pre, body } => match (l, r) {
            (Expr::Lam(x1, t1, b1), Expr::Lam(x2, t2, b2)) => {
                // Conclusion: forall x1 x2. pre => post[r1 x1 / r1, r2 x2 / r2].
                let (q1, qt1, rest) = match post {
                    Formula::Forall(a, t, b) => (a.clone(), t.clone(), (**b).clone()),
                    _ => return Err(perr("r_abs", "postcondition is not quantified")),
                };
                let (q2, qt2, inner) = match rest {
                    Formula::Forall(a, t, b) => (a.clone(), t.clone(), (*b).clone()),
                    _ => return Err(perr("r_abs", "postcondition is not doubly quantified")),
                };
                if qt1 != *t1 || qt2 != *t2 {
                    return Err(perr("r_abs", "quantifier types differ from binders"));
                }
                let mut m = BTreeMap::new();
                m.insert(q1.clone(), Expr::var(x1));
                m.insert(q2.clone(), Expr::var(x2));
                let inner = subst_formula_many(&inner, &m);
                let (ante, concl) = match inner {
                    Formula::Imp(a, b) => (*a, *b),
                    _ => return Err(perr("r_abs", "postcondition body is not an implication")),
                };
                let pctx = ctx.with_var(x1, t1.clone()).with_var(x2, t2.clone());
                let pre = k.prep_formula(&pctx, pre)?;
                if !alpha_eq_formula(&ante, &pre) {
                    return Err(perr("r_abs", "stated precondition differs from the goal"));
                }
                // Invert both applications.
                let inner_post = invert_app_rel(&concl, x1, x2)?;
                let hname = fresh_hyp(ctx, "h_pre");
                let mut bctx = pctx;
                bctx.push_hyp(&hname, pre);
                let (bt1, _) = infer_expr(&bctx, b1)?;
                let (bt2, _) = infer_expr(&bctx, b2)?;
                check_rpl(k, &bctx, (b1, &bt1), (b2, &bt2), &inner_post, body)
            }
            _ => Err(perr("r_abs", "subjects are not lambdas")),
        },
        Step::RLet {
            side,
            first,
            rhs,
            body,
        } => {
            let (subj, other, other_ty) = match side {
                Side::Left => (l, r, rt),
                Side::Right => (r, l, lt),
            };
            match subj {
                Expr::App(lam, e1) => match &**lam {
                    Expr::Lam(x, _, lbody) => {
                        let (te1, _) = infer_expr(ctx, e1)?;
                        let first = k.prep_formula(&ctx.with_var(R, te1.clone()), first)?;
                        check_upl(k, ctx, e1, &te1, &first, rhs)?;
                        let hname = format!("h_{x}");
                        let mut bctx = ctx.with_var(x, te1.clone());
                        bctx.push_hyp(&hname, subst_formula(&first, R, &Expr::var(x)));
                        let (bt, _) = infer_expr(&bctx, lbody)?;
                        match side {
                            Side::Left => {
                                check_rpl(k, &bctx, (lbody, &bt), (other, other_ty), post, body)
                            }
                            Side::Right => {
                                check_rpl(k, &bctx, (other, other_ty), (lbody, &bt), post, body)
                            }
                        }
                    }
                    _ => Err(perr("let_one", "subject is not a let redex")),
                },
                _ => Err(perr("let_one", "subject is not a let redex")),
            }
        }
        Step::RLetrec {
            pre,
            post: phi,
            ih,
            body,
        } => match (l, r) {
            (
                Expr::Letrec {
                    f: f1,
                    x: x1,
                    dom: d1,
                    cod: c1,
                    body: b1,
                },
                Expr::Letrec {
                    f: f2,
                    x: x2,
                    dom: d2,
                    cod: c2,
                    body: b2,
                },
            ) => {
                if d1 != d2 {
                    return Err(perr("r_letrec", "recursion domains differ"));
                }
                if f1 == f2 {
                    return Err(perr(
                        "r_letrec",
                        "the two recursions must use distinct function names",
                    ));
                }
                let x = x1.clone();
                let xctx = ctx.with_var(&x, d1.clone());
                let pre = k.prep_formula(&xctx, pre)?;
                let phi = {
                    let d = crate::desugar::desugar_formula(phi, k.env)?;
                    check_formula_wf(
                        &xctx.with_var(R1, c1.clone()).with_var(R2, c2.clone()),
                        &d,
                    )?
                };
                let mut m = BTreeMap::new();
                m.insert(R1.to_string(), Expr::app(Expr::var(R1), Expr::var(&x)));
                m.insert(R2.to_string(), Expr::app(Expr::var(R2), Expr::var(&x)));
                let want = Formula::Forall(
                    x.clone(),
                    d1.clone(),
                    Box::new(Formula::imp(pre.clone(), subst_formula_many(&phi, &m))),
                );
                if !alpha_eq_formula(post, &want) {
                    return Err(perr(
                        "r_letrec",
                        "goal is not forall x. pre => post[r1 x / r1, r2 x / r2]",
                    ));
                }
                let mvar = fresh_name("m", &{
                    let mut s = crate::subst::free_vars_formula(&phi);
                    s.extend(crate::subst::free_vars_formula(&pre));
                    s.insert(x.clone());
                    s
                });
                let size = |e: Expr| match d1 {
                    TypeTerm::Int => Expr::prim(Prim::Abs, vec![e]),
                    _ => Expr::prim(Prim::Len, vec![e]),
                };
                let mut mih = BTreeMap::new();
                mih.insert(R1.to_string(), Expr::app(Expr::var(f1), Expr::var(&mvar)));
                mih.insert(R2.to_string(), Expr::app(Expr::var(f2), Expr::var(&mvar)));
                let ih_f = Formula::Forall(
                    mvar.clone(),
                    d1.clone(),
                    Box::new(Formula::imp(
                        Formula::lt(size(Expr::var(&mvar)), size(Expr::var(&x))),
                        Formula::imp(
                            subst_formula(&pre, &x, &Expr::var(&mvar)),
                            subst_formula(&subst_formula_many(&phi, &mih), &x, &Expr::var(&mvar)),
                        ),
                    )),
                );
                let mut bctx = ctx
                    .with_var(&x, d1.clone())
                    .with_var(f1, TypeTerm::arrow(d1.clone(), c1.clone()))
                    .with_var(f2, TypeTerm::arrow(d2.clone(), c2.clone()));
                bctx.push_hyp(&format!("{ih}_pre"), pre);
                bctx.push_hyp(ih, ih_f);
                let b1x = crate::subst::subst_expr(b1, x1, &Expr::var(&x));
                let b2x = crate::subst::subst_expr(b2, x2, &Expr::var(&x));
                check_rpl(k, &bctx, (&b1x, c1), (&b2x, c2), &phi, body)
            }
            _ => Err(perr("r_letrec", "subjects are not letrecs")),
        },
        Step::RCaseList { name, nil, cons } => match (l, r) {
            (
                Expr::Case(
                    s1,
                    CaseArms::List {
                        nil: n1,
                        head: h1,
                        tail: t1,
                        cons: c1,
                    },
                ),
                Expr::Case(
                    s2,
                    CaseArms::List {
                        nil: n2,
                        head: h2,
                        tail: t2,
                        cons: c2,
                    },
                ),
            ) => {
                if !crate::subst::alpha_eq_expr(s1, s2) {
                    return Err(perr("r_case_list", "the two cases analyze different lists"));
                }
                let (ts, _) = infer_expr(ctx, s1)?;
                let elem = match &ts {
                    TypeTerm::List(a) => (**a).clone(),
                    _ => return Err(perr("r_case_list", "scrutinee is not a list")),
                };
                let nil_hyp = Formula::eq(
                    (**s1).clone(),
                    Expr::Ascribe(Box::new(Expr::Const(Const::Nil)), ts.clone()),
                );
                check_rpl(k, &ctx.with_hyp(name, nil_hyp), (n1, lt), (n2, rt), post, nil)?;
                // Align the two cons branches on shared head/tail names.
                let (h, t) = (h1.clone(), t1.clone());
                let c2 = crate::subst::subst_expr(
                    &crate::subst::subst_expr(c2, h2, &Expr::var(&h)),
                    t2,
                    &Expr::var(&t),
                );
                let mut cctx = ctx.with_var(&h, elem).with_var(&t, ts);
                cctx.push_hyp(
                    name,
                    Formula::eq(
                        (**s1).clone(),
                        Expr::prim(Prim::Cons, vec![Expr::var(&h), Expr::var(&t)]),
                    ),
                );
                check_rpl(k, &cctx, (c1, lt), (&c2, rt), post, cons)
            }
            _ => Err(perr("r_case_list", "subjects are not list cases")),
        },
        Step::RLiftUnit { param, phi, body } => {
            let p = k.env.get(param)?.clone();
            rel_lift_unit_step(k, ctx, left, right, post, &p, phi, body)
        }
        Step::RLiftBind {
            param,
            alpha,
            beta,
            phi,
            post: phi2,
            lhs,
            rhs,
        } => {
            let p = k.env.get(param)?.clone();
            rel_lift_bind_step(
                k, ctx, left, right, post, &p, alpha, beta, phi, phi2, lhs, rhs,
            )
        }
        other => Err(perr(
            "rpl",
            format!("step {other:?} is not a relational-logic step"),
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn rel_lift_unit_step(
    k: &mut Kernel<'_>,
    ctx: &Context,
    left: (&Expr, &TypeTerm),
    right: (&Expr, &TypeTerm),
    post: &Formula,
    p: &LiftParam,
    phi: &Formula,
    body: &[Step],
) -> Result<()> {
    let (l, lt) = left;
    let (r, rt) = right;
    let (e1, e2) = match (l, r) {
        (Expr::Ret(a), Expr::Ret(b)) => ((**a).clone(), (**b).clone()),
        _ => return Err(perr("r_lift_unit", "subjects are not returns")),
    };
    let (tau1, tau2) = match (lt, rt) {
        (TypeTerm::SubProb(a), TypeTerm::SubProb(b)) => ((**a).clone(), (**b).clone()),
        _ => return Err(perr("r_lift_unit", "subject types must be D[..]")),
    };
    let phi = {
        let d = crate::desugar::desugar_formula(phi, k.env)?;
        check_formula_wf(
            &ctx.with_var(RV1, tau1.clone()).with_var(RV2, tau2.clone()),
            &d,
        )?
    };
    let want = crate::liftings::expand_rel(p, &p.monoid.unit(), &tau1, &tau2, &phi)?;
    let want = check_formula_wf(
        &ctx.with_var(R1, lt.clone()).with_var(R2, rt.clone()),
        &want,
    )?;
    if !alpha_eq_formula(post, &want) {
        return Err(perr(
            "r_lift_unit",
            "goal is not the unit-grade relational lifting of phi",
        ));
    }
    let mut m = BTreeMap::new();
    m.insert(RV1.to_string(), e1.clone());
    m.insert(RV2.to_string(), e2.clone());
    let phi_e = subst_formula_many(&phi, &m);
    let avoid: BTreeSet<String> = ctx.hyps.iter().map(|(n, _)| n.clone()).collect();
    let beta = fresh_name("rlu_beta", &avoid);
    let f1 = fresh_name("rlu_f1", &avoid);
    let f2 = fresh_name("rlu_f2", &avoid);
    let s_pw = s_inst_rel(
        p,
        Expr::var(&beta),
        Expr::app(Expr::var(&f1), e1.clone()),
        Expr::app(Expr::var(&f2), e2.clone()),
    );
    let entail = vec![
        Step::Intro("rlu_phi".to_string()),
        Step::Fix(beta.clone()),
        Step::Fix(f1.clone()),
        Step::Fix(f2.clone()),
        Step::Intro("rlu_pw".to_string()),
        have_by(
            "rlu_inst",
            Formula::imp(phi_e.clone(), s_pw.clone()),
            Rule::ForallElim(HypRef::Name("rlu_pw".to_string()), vec![e1.clone(), e2.clone()]),
        ),
        have_by(
            "rlu_s",
            s_pw,
            Rule::Mp(HypRef::Name("rlu_inst".to_string()), HypRef::Name("rlu_phi".to_string())),
        ),
        Step::Thus(Justification::By(Rule::ConvFrom(HypRef::Name("rlu_s".to_string())))),
    ];
    let mut mid_m = BTreeMap::new();
    mid_m.insert(RV1.to_string(), Expr::var(R1));
    mid_m.insert(RV2.to_string(), Expr::var(R2));
    let expansion = Step::RSub {
        mid: subst_formula_many(&phi, &mid_m),
        subj: vec![Step::RRet(body.to_vec())],
        entail,
    };
    check_rpl_step(k, ctx, left, right, post, &expansion)
}

#[allow(clippy::too_many_arguments)]
fn rel_lift_bind_step(
    k: &mut Kernel<'_>,
    ctx: &Context,
    left: (&Expr, &TypeTerm),
    right: (&Expr, &TypeTerm),
    post: &Formula,
    p: &LiftParam,
    alpha: &Expr,
    beta: &Expr,
    phi: &Formula,
    phi2: &Formula,
    lhs: &[Step],
    rhs: &[Step],
) -> Result<()> {
    let (l, lt) = left;
    let (r, rt) = right;
    let ((e1, k1), (e2, k2)) = match (l, r) {
        (Expr::Bind(a, ka), Expr::Bind(b, kb)) => {
            (((**a).clone(), (**ka).clone()), ((**b).clone(), (**kb).clone()))
        }
        _ => return Err(perr("r_lift_bind", "subjects are not binds")),
    };
    let (tau1p, tau2p) = match (lt, rt) {
        (TypeTerm::SubProb(a), TypeTerm::SubProb(b)) => ((**a).clone(), (**b).clone()),
        _ => return Err(perr("r_lift_bind", "subject types must be D[..]")),
    };
    let (te1, _) = infer_expr(ctx, &e1)?;
    let (te2, _) = infer_expr(ctx, &e2)?;
    let (tau1, tau2) = match (&te1, &te2) {
        (TypeTerm::SubProb(a), TypeTerm::SubProb(b)) => ((**a).clone(), (**b).clone()),
        _ => return Err(perr("r_lift_bind", "first components must be D[..]")),
    };
    let zeta = p.monoid.carrier();
    let alpha = k.prep_expr(ctx, alpha, Some(&zeta))?;
    let beta = k.prep_expr(ctx, beta, Some(&zeta))?;
    let phi = {
        let d = crate::desugar::desugar_formula(phi, k.env)?;
        check_formula_wf(
            &ctx.with_var(RV1, tau1.clone()).with_var(RV2, tau2.clone()),
            &d,
        )?
    };
    let phi2 = {
        let d = crate::desugar::desugar_formula(phi2, k.env)?;
        check_formula_wf(
            &ctx.with_var(RV1, tau1p.clone()).with_var(RV2, tau2p.clone()),
            &d,
        )?
    };
    let want = crate::liftings::expand_rel(
        p,
        &p.monoid.comp(alpha.clone(), beta.clone()),
        &tau1p,
        &tau2p,
        &phi2,
    )?;
    let want = check_formula_wf(
        &ctx.with_var(R1, lt.clone()).with_var(R2, rt.clone()),
        &want,
    )?;
    if !alpha_eq_formula(post, &want) {
        return Err(perr(
            "r_lift_bind",
            "goal is not the composite-grade relational lifting",
        ));
    }
    let first = crate::liftings::expand_rel(p, &alpha, &tau1, &tau2, &phi)?;
    let lifted_beta = crate::liftings::expand_rel(p, &beta, &tau1p, &tau2p, &phi2)?;
    let x1 = fresh_name("x1", &crate::subst::free_vars_formula(&phi));
    let x2 = fresh_name("x2", &{
        let mut s = crate::subst::free_vars_formula(&phi);
        s.insert(x1.clone());
        s
    });
    let mut mphi = BTreeMap::new();
    mphi.insert(RV1.to_string(), Expr::var(&x1));
    mphi.insert(RV2.to_string(), Expr::var(&x2));
    let mut mapp = BTreeMap::new();
    mapp.insert(R1.to_string(), Expr::app(Expr::var(R1), Expr::var(&x1)));
    mapp.insert(R2.to_string(), Expr::app(Expr::var(R2), Expr::var(&x2)));
    let mid = Formula::Forall(
        x1.clone(),
        tau1.clone(),
        Box::new(Formula::Forall(
            x2.clone(),
            tau2.clone(),
            Box::new(Formula::imp(
                subst_formula_many(&phi, &mphi),
                subst_formula_many(&lifted_beta, &mapp),
            )),
        )),
    );

    let entail = rel_lift_bind_glue(
        ctx, p, &alpha, &beta, &phi, &phi2, &k1, &k2, (&tau1, &tau2), (&tau1p, &tau2p),
    )?;
    let expansion = Step::RBind {
        first,
        lhs: lhs.to_vec(),
        rhs: vec![Step::RSub {
            mid,
            subj: rhs.to_vec(),
            entail,
        }],
    };
    check_rpl_step(k, ctx, left, right, post, &expansion)
}

#[allow(clippy::too_many_arguments)]
fn rel_lift_bind_glue(
    ctx: &Context,
    p: &LiftParam,
    alpha: &Expr,
    beta: &Expr,
    phi: &Formula,
    phi2: &Formula,
    k1: &Expr,
    k2: &Expr,
    taus: (&TypeTerm, &TypeTerm),
    taups: (&TypeTerm, &TypeTerm),
) -> Result<Vec<Step>> {
    let (tau1, tau2) = taus;
    let (tau1p, tau2p) = taups;
    let (obs1, obs2) = match &p.kind {
        LiftKind::Relational { obs_ty1, obs_ty2 } => (obs_ty1.clone(), obs_ty2.clone()),
        _ => return Err(perr("r_lift_bind", "parameter is unary")),
    };
    let avoid: BTreeSet<String> = ctx
        .hyps
        .iter()
        .map(|(n, _)| n.clone())
        .chain(ctx.vars.iter().map(|(n, _)| n.clone()))
        .collect();
    let f = |b: &str| fresh_name(b, &avoid);
    let (s1, s2, delta, g1, g2, x1, x2, y1, y2) = (
        f("rb_s1"),
        f("rb_s2"),
        f("rb_delta"),
        f("rb_g1"),
        f("rb_g2"),
        f("rb_x1"),
        f("rb_x2"),
        f("rb_y1"),
        f("rb_y2"),
    );
    let comp = |a: Expr, b: Expr| p.monoid.comp(a, b);
    let _ = (obs1, obs2, y1, y2);

    let sub2 = |f: &Formula, a: &str, ea: Expr, b: &str, eb: Expr| {
        let mut m = BTreeMap::new();
        m.insert(a.to_string(), ea);
        m.insert(b.to_string(), eb);
        subst_formula_many(f, &m)
    };

    // Pointwise key fact.
    let hpt_f = Formula::Forall(
        x1.clone(),
        tau1.clone(),
        Box::new(Formula::Forall(
            x2.clone(),
            tau2.clone(),
            Box::new(Formula::imp(
                sub2(phi, RV1, Expr::var(&x1), RV2, Expr::var(&x2)),
                s_inst_rel(
                    p,
                    comp(beta.clone(), Expr::var(&delta)),
                    Expr::bind(Expr::app(k1.clone(), Expr::var(&x1)), Expr::var(&g1)),
                    Expr::bind(Expr::app(k2.clone(), Expr::var(&x2)), Expr::var(&g2)),
                ),
            )),
        )),
    );
    let big_g1 = Expr::Lam(
        x1.clone(),
        tau1.clone(),
        Box::new(Expr::bind(
            Expr::app(k1.clone(), Expr::var(&x1)),
            Expr::var(&g1),
        )),
    );
    let big_g2 = Expr::Lam(
        x2.clone(),
        tau2.clone(),
        Box::new(Expr::bind(
            Expr::app(k2.clone(), Expr::var(&x2)),
            Expr::var(&g2),
        )),
    );

    let u_beta_at = {
        let lifted = crate::liftings::expand_rel(p, beta, tau1p, tau2p, phi2)?;
        sub2(
            &lifted,
            R1,
            Expr::app(k1.clone(), Expr::var(&x1)),
            R2,
            Expr::app(k2.clone(), Expr::var(&x2)),
        )
    };
    let u3_f = {
        match strip_foralls(&u_beta_at, 3) {
            Some(inner) => {
                let names = foralls_names(&u_beta_at, 3);
                let mut m = BTreeMap::new();
                m.insert(names[0].clone(), Expr::var(&delta));
                m.insert(names[1].clone(), Expr::var(&g1));
                m.insert(names[2].clone(), Expr::var(&g2));
                subst_formula_many(&inner, &m)
            }
            None => Formula::Top,
        }
    };
    let u4_f = match &u3_f {
        Formula::Imp(_, c) => (**c).clone(),
        _ => Formula::Top,
    };

    let inner_pt = vec![
        Step::Fix(x1.clone()),
        Step::Fix(x2.clone()),
        Step::Intro("rb_hx".to_string()),
        have_by(
            "rb_u1",
            Formula::imp(
                sub2(phi, RV1, Expr::var(&x1), RV2, Expr::var(&x2)),
                u_beta_at.clone(),
            ),
            Rule::ForallElim(HypRef::Name("rb_H".to_string()), vec![Expr::var(&x1), Expr::var(&x2)]),
        ),
        have_by(
            "rb_u2",
            u_beta_at.clone(),
            Rule::Mp(HypRef::Name("rb_u1".to_string()), HypRef::Name("rb_hx".to_string())),
        ),
        have_by(
            "rb_u3",
            u3_f,
            Rule::ForallElim(HypRef::Name("rb_u2".to_string()),
                vec![Expr::var(&delta), Expr::var(&g1), Expr::var(&g2)],
            ),
        ),
        have_by(
            "rb_u4",
            u4_f,
            Rule::Mp(HypRef::Name("rb_u3".to_string()), HypRef::Name("rb_hg".to_string())),
        ),
        Step::Thus(Justification::By(Rule::ConvFrom(HypRef::Name("rb_u4".to_string())))),
    ];

    let u_alpha_s = {
        let lifted = crate::liftings::expand_rel(p, alpha, tau1, tau2, phi)?;
        sub2(&lifted, R1, Expr::var(&s1), R2, Expr::var(&s2))
    };
    let inst_big = match strip_foralls(&u_alpha_s, 3) {
        Some(inner) => {
            let names = foralls_names(&u_alpha_s, 3);
            let mut m = BTreeMap::new();
            m.insert(names[0].clone(), comp(beta.clone(), Expr::var(&delta)));
            m.insert(names[1].clone(), big_g1.clone());
            m.insert(names[2].clone(), big_g2.clone());
            subst_formula_many(&inner, &m)
        }
        None => Formula::Top,
    };
    let (inst_pre, inst_concl) = match &inst_big {
        Formula::Imp(a, b) => ((**a).clone(), (**b).clone()),
        _ => (Formula::Top, Formula::Top),
    };

    let mut steps = vec![
        Step::Intro("rb_H".to_string()),
        Step::Fix(s1.clone()),
        Step::Fix(s2.clone()),
        Step::Intro("rb_Hs".to_string()),
        Step::Fix(delta.clone()),
        Step::Fix(g1.clone()),
        Step::Fix(g2.clone()),
        Step::Intro("rb_hg".to_string()),
        Step::Have {
            name: "rb_hpt".to_string(),
            formula: hpt_f,
            just: Justification::Block(inner_pt),
        },
        have_by(
            "rb_big",
            inst_big.clone(),
            Rule::ForallElim(
                HypRef::Name("rb_Hs".to_string()),
                vec![
                    comp(beta.clone(), Expr::var(&delta)),
                    big_g1.clone(),
                    big_g2.clone(),
                ],
            ),
        ),
        Step::Have {
            name: "rb_pre".to_string(),
            formula: inst_pre,
            just: Justification::Block(vec![Step::Thus(Justification::By(Rule::ConvFrom(
                HypRef::Name("rb_hpt".to_string()),
            )))]),
        },
        have_by(
            "rb_out",
            inst_concl,
            Rule::Mp(HypRef::Name("rb_big".to_string()), HypRef::Name("rb_pre".to_string())),
        ),
    ];
    if p.monoid == crate::liftings::GradeMonoid::PRealAdd {
        steps.push(have_by(
            "rb_assoc",
            Formula::eq(
                comp(comp(alpha.clone(), beta.clone()), Expr::var(&delta)),
                comp(alpha.clone(), comp(beta.clone(), Expr::var(&delta))),
            ),
            Rule::Field { using: vec![] },
        ));
        steps.push(rw("rb_assoc"));
    }
    steps.push(Step::Thus(Justification::By(Rule::ConvFrom(
        HypRef::Name("rb_out".to_string()),
    ))));
    Ok(steps)
}

fn strip_foralls(f: &Formula, n: usize) -> Option<Formula> {
    let mut cur = f.clone();
    for _ in 0..n {
        cur = match cur {
            Formula::Forall(_, _, b) => *b,
            _ => return None,
        };
    }
    Some(cur)
}

fn foralls_names(f: &Formula, n: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = f.clone();
    for _ in 0..n {
        cur = match cur {
            Formula::Forall(x, _, b) => {
                out.push(x);
                *b
            }
            _ => break,
        };
    }
    out
}

fn invert_app_rel(post: &Formula, x1: &str, x2: &str) -> Result<Formula> {
    let app1 = Expr::app(Expr::var(R1), Expr::var(x1));
    let app2 = Expr::app(Expr::var(R2), Expr::var(x2));
    let step1 = rewrite_expr_in_formula(post, &app1, &Expr::var(R1)).unwrap_or_else(|| post.clone());
    let inner =
        rewrite_expr_in_formula(&step1, &app2, &Expr::var(R2)).unwrap_or(step1);
    let mut m = BTreeMap::new();
    m.insert(R1.to_string(), Expr::app(Expr::var(R1), Expr::var(x1)));
    m.insert(R2.to_string(), Expr::app(Expr::var(R2), Expr::var(x2)));
    let back = subst_formula_many(&inner, &m);
    if alpha_eq_formula(&back, post) {
        Ok(inner)
    } else {
        Err(perr(
            "r_abs",
            "postcondition is not of the form phi[r1 x1 / r1, r2 x2 / r2]",
        ))
    }
}

// Keep rewrite_expr linked for term-level rewriting uses.
#[allow(dead_code)]
fn _unused(e: &Expr) -> Result<crate::rewrite::RewriteOut<Expr>> {
    rewrite_expr(e, e, e, None)
}
