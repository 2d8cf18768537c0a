//! Free variables, capture-avoiding (simultaneous) substitution and
//! alpha-equivalence for terms and formulas.

use crate::ast::{CaseArms, Expr, Formula, Name};
use std::collections::{BTreeMap, BTreeSet};

pub fn free_vars_expr(e: &Expr) -> BTreeSet<Name> {
    let mut s = BTreeSet::new();
    fv_expr(e, &mut Vec::new(), &mut s);
    s
}

pub fn free_vars_formula(f: &Formula) -> BTreeSet<Name> {
    let mut s = BTreeSet::new();
    fv_formula(f, &mut Vec::new(), &mut s);
    s
}

fn seen(bound: &[Name], x: &str) -> bool {
    bound.iter().any(|b| b == x)
}

fn fv_expr(e: &Expr, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match e {
        Expr::Var(x) => {
            if !seen(bound, x) {
                out.insert(x.clone());
            }
        }
        Expr::Const(_) | Expr::Lebesgue => {}
        Expr::Prim(_, args) => args.iter().for_each(|a| fv_expr(a, bound, out)),
        Expr::App(a, b)
        | Expr::Pair(a, b)
        | Expr::Bind(a, b)
        | Expr::Observe(a, b)
        | Expr::Uniform(a, b)
        | Expr::Gauss(a, b)
        | Expr::Gpdf(a, b)
        | Expr::Scale(a, b)
        | Expr::MacTensor(a, b) => {
            fv_expr(a, bound, out);
            fv_expr(b, bound, out);
        }
        Expr::Lam(x, _, b) => {
            bound.push(x.clone());
            fv_expr(b, bound, out);
            bound.pop();
        }
        Expr::Proj(_, a) | Expr::Ret(a) | Expr::Bern(a) | Expr::Normalize(a) => {
            fv_expr(a, bound, out)
        }
        Expr::Ascribe(a, _) => fv_expr(a, bound, out),
        Expr::Case(scrut, arms) => {
            fv_expr(scrut, bound, out);
            match arms {
                CaseArms::Bool { tt, ff } => {
                    fv_expr(tt, bound, out);
                    fv_expr(ff, bound, out);
                }
                CaseArms::List {
                    nil,
                    head,
                    tail,
                    cons,
                } => {
                    fv_expr(nil, bound, out);
                    bound.push(head.clone());
                    bound.push(tail.clone());
                    fv_expr(cons, bound, out);
                    bound.pop();
                    bound.pop();
                }
                CaseArms::Pair { fst, snd, body } => {
                    bound.push(fst.clone());
                    bound.push(snd.clone());
                    fv_expr(body, bound, out);
                    bound.pop();
                    bound.pop();
                }
            }
        }
        Expr::Letrec { f, x, body, .. } => {
            bound.push(f.clone());
            bound.push(x.clone());
            fv_expr(body, bound, out);
            bound.pop();
            bound.pop();
        }
        Expr::Expect { binder, src, body }
        | Expr::MacPr {
            binder,
            src,
            event: body,
        }
        | Expr::MacEr { binder, src, body }
        | Expr::MacVar { binder, src, body } => {
            fv_expr(src, bound, out);
            bound.push(binder.clone());
            fv_expr(body, bound, out);
            bound.pop();
        }
        Expr::MacLet { x, rhs, body, .. } | Expr::MacMlet { x, rhs, body, .. } => {
            fv_expr(rhs, bound, out);
            bound.push(x.clone());
            fv_expr(body, bound, out);
            bound.pop();
        }
    }
}

fn fv_formula(f: &Formula, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match f {
        Formula::Eq(a, b) | Formula::Lt(a, b) | Formula::MacLe(a, b) => {
            fv_expr(a, bound, out);
            fv_expr(b, bound, out);
        }
        Formula::Top | Formula::Bot => {}
        Formula::And(a, b) | Formula::Imp(a, b) | Formula::MacIff(a, b) => {
            fv_formula(a, bound, out);
            fv_formula(b, bound, out);
        }
        Formula::Not(a) => fv_formula(a, bound, out),
        Formula::Forall(x, _, b) | Formula::Exists(x, _, b) => {
            bound.push(x.clone());
            fv_formula(b, bound, out);
            bound.pop();
        }
        Formula::MacSup {
            target,
            binder,
            cond,
            body,
            ..
        } => {
            fv_expr(target, bound, out);
            bound.push(binder.clone());
            fv_formula(cond, bound, out);
            fv_expr(body, bound, out);
            bound.pop();
        }
        Formula::MacLip {
            target,
            dom_metric,
            cod_metric,
            func,
            ..
        } => {
            for e in [target, dom_metric, cod_metric, func] {
                fv_expr(e, bound, out);
            }
        }
        Formula::MacWass {
            target,
            metric,
            mu1,
            mu2,
            ..
        } => {
            for e in [target, metric, mu1, mu2] {
                fv_expr(e, bound, out);
            }
        }
        Formula::MacKlDef { d1, d2, density } => {
            for e in [d1, d2, density] {
                fv_expr(e, bound, out);
            }
        }
        Formula::MacULift { grade, body, .. } => {
            fv_expr(grade, bound, out);
            fv_formula(body, bound, out);
        }
        Formula::MacRLift { grade, body, .. } => {
            fv_expr(grade, bound, out);
            fv_formula(body, bound, out);
        }
    }
}

/// A fresh name based on `base` avoiding everything in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<Name>) -> Name {
    let stem = base.trim_end_matches('\'');
    let stem = if stem.is_empty() { "v" } else { stem };
    if !avoid.contains(base) && base == stem {
        return base.to_string();
    }
    let mut cand = format!("{stem}'");
    while avoid.contains(&cand) {
        cand.push('\'');
    }
    cand
}

type SubstMap = BTreeMap<Name, Expr>;

/// Capture-avoiding substitution of a single variable.
pub fn subst_expr(e: &Expr, x: &str, u: &Expr) -> Expr {
    let mut m = SubstMap::new();
    m.insert(x.to_string(), u.clone());
    subst_expr_many(e, &m)
}

pub fn subst_formula(f: &Formula, x: &str, u: &Expr) -> Formula {
    let mut m = SubstMap::new();
    m.insert(x.to_string(), u.clone());
    subst_formula_many(f, &m)
}

/// Simultaneous capture-avoiding substitution.
pub fn subst_expr_many(e: &Expr, m: &SubstMap) -> Expr {
    if m.is_empty() {
        return e.clone();
    }
    se(e, m)
}

pub fn subst_formula_many(f: &Formula, m: &SubstMap) -> Formula {
    if m.is_empty() {
        return f.clone();
    }
    sf(f, m)
}

fn range_fvs(m: &SubstMap) -> BTreeSet<Name> {
    let mut s = BTreeSet::new();
    for u in m.values() {
        s.extend(free_vars_expr(u));
    }
    s
}

/// Prepare a binder for traversal: drop the binder's entry from the map and
/// rename the binder when it would capture a free variable of the range.
fn enter_binder(b: &Name, body_fv_hint: &Expr, m: &SubstMap) -> (Name, SubstMap, bool) {
    let mut m2: SubstMap = m.clone();
    m2.remove(b);
    if m2.is_empty() {
        return (b.clone(), m2, false);
    }
    let range = range_fvs(&m2);
    if !range.contains(b) {
        return (b.clone(), m2, false);
    }
    let mut avoid = range;
    avoid.extend(free_vars_expr(body_fv_hint));
    avoid.extend(m2.keys().cloned());
    let nb = fresh_name(b, &avoid);
    m2.insert(b.clone(), Expr::Var(nb.clone()));
    (nb, m2, true)
}

fn enter_binder2(
    b1: &Name,
    b2: &Name,
    body_fv_hint: &Expr,
    m: &SubstMap,
) -> (Name, Name, SubstMap) {
    let (nb1, m1, _) = enter_binder(b1, body_fv_hint, m);
    // Keep the two binders distinct.
    let (nb2, mut m2, renamed2) = enter_binder(b2, body_fv_hint, &m1);
    if nb1 == nb2 {
        let mut avoid: BTreeSet<Name> = range_fvs(&m2);
        avoid.extend(free_vars_expr(body_fv_hint));
        avoid.insert(nb1.clone());
        let nb2b = fresh_name(&nb2, &avoid);
        if renamed2 {
            m2.insert(b2.clone(), Expr::Var(nb2b.clone()));
        } else {
            m2.insert(b2.clone(), Expr::Var(nb2b.clone()));
        }
        return (nb1, nb2b, m2);
    }
    (nb1, nb2, m2)
}

fn se(e: &Expr, m: &SubstMap) -> Expr {
    match e {
        Expr::Var(x) => m.get(x).cloned().unwrap_or_else(|| e.clone()),
        Expr::Const(_) | Expr::Lebesgue => e.clone(),
        Expr::Prim(p, args) => Expr::Prim(*p, args.iter().map(|a| se(a, m)).collect()),
        Expr::App(a, b) => Expr::App(Box::new(se(a, m)), Box::new(se(b, m))),
        Expr::Pair(a, b) => Expr::Pair(Box::new(se(a, m)), Box::new(se(b, m))),
        Expr::Bind(a, b) => Expr::Bind(Box::new(se(a, m)), Box::new(se(b, m))),
        Expr::Observe(a, b) => Expr::Observe(Box::new(se(a, m)), Box::new(se(b, m))),
        Expr::Uniform(a, b) => Expr::Uniform(Box::new(se(a, m)), Box::new(se(b, m))),
        Expr::Gauss(a, b) => Expr::Gauss(Box::new(se(a, m)), Box::new(se(b, m))),
        Expr::Gpdf(a, b) => Expr::Gpdf(Box::new(se(a, m)), Box::new(se(b, m))),
        Expr::Scale(a, b) => Expr::Scale(Box::new(se(a, m)), Box::new(se(b, m))),
        Expr::MacTensor(a, b) => Expr::MacTensor(Box::new(se(a, m)), Box::new(se(b, m))),
        Expr::Proj(i, a) => Expr::Proj(*i, Box::new(se(a, m))),
        Expr::Ret(a) => Expr::Ret(Box::new(se(a, m))),
        Expr::Bern(a) => Expr::Bern(Box::new(se(a, m))),
        Expr::Normalize(a) => Expr::Normalize(Box::new(se(a, m))),
        Expr::Ascribe(a, t) => Expr::Ascribe(Box::new(se(a, m)), t.clone()),
        Expr::Lam(x, t, b) => {
            let (nx, m2, _) = enter_binder(x, b, m);
            Expr::Lam(nx, t.clone(), Box::new(se(b, &m2)))
        }
        Expr::Case(scrut, arms) => {
            let scrut2 = se(scrut, m);
            let arms2 = match arms {
                CaseArms::Bool { tt, ff } => CaseArms::Bool {
                    tt: Box::new(se(tt, m)),
                    ff: Box::new(se(ff, m)),
                },
                CaseArms::List {
                    nil,
                    head,
                    tail,
                    cons,
                } => {
                    let nil2 = se(nil, m);
                    let (nh, nt, m2) = enter_binder2(head, tail, cons, m);
                    CaseArms::List {
                        nil: Box::new(nil2),
                        head: nh,
                        tail: nt,
                        cons: Box::new(se(cons, &m2)),
                    }
                }
                CaseArms::Pair { fst, snd, body } => {
                    let (nf, ns, m2) = enter_binder2(fst, snd, body, m);
                    CaseArms::Pair {
                        fst: nf,
                        snd: ns,
                        body: Box::new(se(body, &m2)),
                    }
                }
            };
            Expr::Case(Box::new(scrut2), arms2)
        }
        Expr::Letrec {
            f,
            x,
            dom,
            cod,
            body,
        } => {
            let (nf, nx, m2) = enter_binder2(f, x, body, m);
            Expr::Letrec {
                f: nf,
                x: nx,
                dom: dom.clone(),
                cod: cod.clone(),
                body: Box::new(se(body, &m2)),
            }
        }
        Expr::Expect { binder, src, body } => {
            let src2 = se(src, m);
            let (nb, m2, _) = enter_binder(binder, body, m);
            Expr::Expect {
                binder: nb,
                src: Box::new(src2),
                body: Box::new(se(body, &m2)),
            }
        }
        Expr::MacPr { binder, src, event } => {
            let src2 = se(src, m);
            let (nb, m2, _) = enter_binder(binder, event, m);
            Expr::MacPr {
                binder: nb,
                src: Box::new(src2),
                event: Box::new(se(event, &m2)),
            }
        }
        Expr::MacEr { binder, src, body } => {
            let src2 = se(src, m);
            let (nb, m2, _) = enter_binder(binder, body, m);
            Expr::MacEr {
                binder: nb,
                src: Box::new(src2),
                body: Box::new(se(body, &m2)),
            }
        }
        Expr::MacVar { binder, src, body } => {
            let src2 = se(src, m);
            let (nb, m2, _) = enter_binder(binder, body, m);
            Expr::MacVar {
                binder: nb,
                src: Box::new(src2),
                body: Box::new(se(body, &m2)),
            }
        }
        Expr::MacLet { x, ann, rhs, body } => {
            let rhs2 = se(rhs, m);
            let (nx, m2, _) = enter_binder(x, body, m);
            Expr::MacLet {
                x: nx,
                ann: ann.clone(),
                rhs: Box::new(rhs2),
                body: Box::new(se(body, &m2)),
            }
        }
        Expr::MacMlet { x, ann, rhs, body } => {
            let rhs2 = se(rhs, m);
            let (nx, m2, _) = enter_binder(x, body, m);
            Expr::MacMlet {
                x: nx,
                ann: ann.clone(),
                rhs: Box::new(rhs2),
                body: Box::new(se(body, &m2)),
            }
        }
    }
}

fn sf(f: &Formula, m: &SubstMap) -> Formula {
    match f {
        Formula::Eq(a, b) => Formula::Eq(se(a, m), se(b, m)),
        Formula::Lt(a, b) => Formula::Lt(se(a, m), se(b, m)),
        Formula::MacLe(a, b) => Formula::MacLe(se(a, m), se(b, m)),
        Formula::Top => Formula::Top,
        Formula::Bot => Formula::Bot,
        Formula::And(a, b) => Formula::And(Box::new(sf(a, m)), Box::new(sf(b, m))),
        Formula::Imp(a, b) => Formula::Imp(Box::new(sf(a, m)), Box::new(sf(b, m))),
        Formula::MacIff(a, b) => Formula::MacIff(Box::new(sf(a, m)), Box::new(sf(b, m))),
        Formula::Not(a) => Formula::Not(Box::new(sf(a, m))),
        Formula::Forall(x, t, b) => {
            let (nx, m2) = enter_binder_formula(x, b, m);
            Formula::Forall(nx, t.clone(), Box::new(sf(b, &m2)))
        }
        Formula::Exists(x, t, b) => {
            let (nx, m2) = enter_binder_formula(x, b, m);
            Formula::Exists(nx, t.clone(), Box::new(sf(b, &m2)))
        }
        Formula::MacSup {
            target,
            binder,
            ty,
            cond,
            body,
        } => {
            let target2 = se(target, m);
            let mut m2: SubstMap = m.clone();
            m2.remove(binder);
            let range = range_fvs(&m2);
            let (nb, m3) = if range.contains(binder) {
                let mut avoid = range;
                avoid.extend(free_vars_formula(cond));
                avoid.extend(free_vars_expr(body));
                let nb = fresh_name(binder, &avoid);
                let mut m3 = m2;
                m3.insert(binder.clone(), Expr::Var(nb.clone()));
                (nb, m3)
            } else {
                (binder.clone(), m2)
            };
            Formula::MacSup {
                target: target2,
                binder: nb,
                ty: ty.clone(),
                cond: Box::new(sf(cond, &m3)),
                body: se(body, &m3),
            }
        }
        Formula::MacLip {
            target,
            arg_ty,
            dom_metric,
            cod_metric,
            func,
        } => Formula::MacLip {
            target: se(target, m),
            arg_ty: arg_ty.clone(),
            dom_metric: se(dom_metric, m),
            cod_metric: se(cod_metric, m),
            func: se(func, m),
        },
        Formula::MacWass {
            target,
            arg_ty,
            metric,
            mu1,
            mu2,
        } => Formula::MacWass {
            target: se(target, m),
            arg_ty: arg_ty.clone(),
            metric: se(metric, m),
            mu1: se(mu1, m),
            mu2: se(mu2, m),
        },
        Formula::MacKlDef { d1, d2, density } => Formula::MacKlDef {
            d1: se(d1, m),
            d2: se(d2, m),
            density: se(density, m),
        },
        Formula::MacULift {
            param,
            grade,
            val_ty,
            body,
        } => Formula::MacULift {
            param: param.clone(),
            grade: se(grade, m),
            val_ty: val_ty.clone(),
            body: Box::new(sf(body, m)),
        },
        Formula::MacRLift {
            param,
            grade,
            val_ty1,
            val_ty2,
            body,
        } => Formula::MacRLift {
            param: param.clone(),
            grade: se(grade, m),
            val_ty1: val_ty1.clone(),
            val_ty2: val_ty2.clone(),
            body: Box::new(sf(body, m)),
        },
    }
}

fn enter_binder_formula(b: &Name, body: &Formula, m: &SubstMap) -> (Name, SubstMap) {
    let mut m2: SubstMap = m.clone();
    m2.remove(b);
    if m2.is_empty() {
        return (b.clone(), m2);
    }
    let range = range_fvs(&m2);
    if !range.contains(b) {
        return (b.clone(), m2);
    }
    let mut avoid = range;
    avoid.extend(free_vars_formula(body));
    avoid.extend(m2.keys().cloned());
    let nb = fresh_name(b, &avoid);
    m2.insert(b.clone(), Expr::Var(nb.clone()));
    (nb, m2)
}

// ---------------------------------------------------------------------------
// Alpha-equivalence
// ---------------------------------------------------------------------------

struct AlphaEnv {
    pairs: Vec<(Name, Name)>,
}

impl AlphaEnv {
    fn new() -> AlphaEnv {
        AlphaEnv { pairs: Vec::new() }
    }
    fn matched(&self, a: &str, b: &str) -> bool {
        for (l, r) in self.pairs.iter().rev() {
            if l == a || r == b {
                return l == a && r == b;
            }
        }
        a == b
    }
    fn with<T>(&mut self, a: &Name, b: &Name, k: impl FnOnce(&mut Self) -> T) -> T {
        self.pairs.push((a.clone(), b.clone()));
        let out = k(self);
        self.pairs.pop();
        out
    }
}

pub fn alpha_eq_expr(a: &Expr, b: &Expr) -> bool {
    ae(a, b, &mut AlphaEnv::new())
}

pub fn alpha_eq_formula(a: &Formula, b: &Formula) -> bool {
    af(a, b, &mut AlphaEnv::new())
}

fn ae(a: &Expr, b: &Expr, env: &mut AlphaEnv) -> bool {
    use Expr::*;
    // Ascriptions record elaboration facts and are transparent for equality;
    // binder annotations are likewise ignored (values do not depend on them),
    // and the int-to-real embedding is value-preserving.
    if let Ascribe(inner, _) = a {
        return ae(inner, b, env);
    }
    if let Ascribe(inner, _) = b {
        return ae(a, inner, env);
    }
    if let Prim(crate::ast::Prim::IntToReal, args) = a {
        return ae(&args[0], b, env);
    }
    if let Prim(crate::ast::Prim::IntToReal, args) = b {
        return ae(a, &args[0], env);
    }
    match (a, b) {
        (Var(x), Var(y)) => env.matched(x, y),
        (Const(c), Const(d)) => c == d,
        (Lebesgue, Lebesgue) => true,
        (Prim(p, xs), Prim(q, ys)) => {
            p == q && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| ae(x, y, env))
        }
        (App(a1, a2), App(b1, b2))
        | (Pair(a1, a2), Pair(b1, b2))
        | (Bind(a1, a2), Bind(b1, b2))
        | (Observe(a1, a2), Observe(b1, b2))
        | (Uniform(a1, a2), Uniform(b1, b2))
        | (Gauss(a1, a2), Gauss(b1, b2))
        | (Gpdf(a1, a2), Gpdf(b1, b2))
        | (Scale(a1, a2), Scale(b1, b2))
        | (MacTensor(a1, a2), MacTensor(b1, b2)) => ae(a1, b1, env) && ae(a2, b2, env),
        (Proj(i, a1), Proj(j, b1)) => i == j && ae(a1, b1, env),
        (Ret(a1), Ret(b1)) | (Bern(a1), Bern(b1)) | (Normalize(a1), Normalize(b1)) => {
            ae(a1, b1, env)
        }
        (Lam(x, _, a1), Lam(y, _, b1)) => env.with(x, y, |env| ae(a1, b1, env)),
        (Case(s1, arms1), Case(s2, arms2)) => {
            ae(s1, s2, env)
                && match (arms1, arms2) {
                    (CaseArms::Bool { tt: t1, ff: f1 }, CaseArms::Bool { tt: t2, ff: f2 }) => {
                        ae(t1, t2, env) && ae(f1, f2, env)
                    }
                    (
                        CaseArms::List {
                            nil: n1,
                            head: h1,
                            tail: l1,
                            cons: c1,
                        },
                        CaseArms::List {
                            nil: n2,
                            head: h2,
                            tail: l2,
                            cons: c2,
                        },
                    ) => {
                        ae(n1, n2, env)
                            && env.with(h1, h2, |env| env.with(l1, l2, |env| ae(c1, c2, env)))
                    }
                    (
                        CaseArms::Pair {
                            fst: f1,
                            snd: s1,
                            body: b1,
                        },
                        CaseArms::Pair {
                            fst: f2,
                            snd: s2,
                            body: b2,
                        },
                    ) => env.with(f1, f2, |env| env.with(s1, s2, |env| ae(b1, b2, env))),
                    _ => false,
                }
        }
        (
            Letrec {
                f: f1,
                x: x1,
                body: b1,
                ..
            },
            Letrec {
                f: f2,
                x: x2,
                body: b2,
                ..
            },
        ) => env.with(f1, f2, |env| env.with(x1, x2, |env| ae(b1, b2, env))),
        (
            Expect {
                binder: x1,
                src: s1,
                body: b1,
            },
            Expect {
                binder: x2,
                src: s2,
                body: b2,
            },
        ) => ae(s1, s2, env) && env.with(x1, x2, |env| ae(b1, b2, env)),
        (
            MacPr {
                binder: x1,
                src: s1,
                event: b1,
            },
            MacPr {
                binder: x2,
                src: s2,
                event: b2,
            },
        ) => ae(s1, s2, env) && env.with(x1, x2, |env| ae(b1, b2, env)),
        (
            MacEr {
                binder: x1,
                src: s1,
                body: b1,
            },
            MacEr {
                binder: x2,
                src: s2,
                body: b2,
            },
        )
        | (
            MacVar {
                binder: x1,
                src: s1,
                body: b1,
            },
            MacVar {
                binder: x2,
                src: s2,
                body: b2,
            },
        ) => ae(s1, s2, env) && env.with(x1, x2, |env| ae(b1, b2, env)),
        (
            MacLet {
                x: x1,
                rhs: r1,
                body: b1,
                ..
            },
            MacLet {
                x: x2,
                rhs: r2,
                body: b2,
                ..
            },
        )
        | (
            MacMlet {
                x: x1,
                rhs: r1,
                body: b1,
                ..
            },
            MacMlet {
                x: x2,
                rhs: r2,
                body: b2,
                ..
            },
        ) => ae(r1, r2, env) && env.with(x1, x2, |env| ae(b1, b2, env)),
        _ => false,
    }
}

fn af(a: &Formula, b: &Formula, env: &mut AlphaEnv) -> bool {
    use Formula::*;
    match (a, b) {
        (Eq(a1, a2), Eq(b1, b2)) | (Lt(a1, a2), Lt(b1, b2)) | (MacLe(a1, a2), MacLe(b1, b2)) => {
            ae(a1, b1, env) && ae(a2, b2, env)
        }
        (Top, Top) | (Bot, Bot) => true,
        (And(a1, a2), And(b1, b2))
        | (Imp(a1, a2), Imp(b1, b2))
        | (MacIff(a1, a2), MacIff(b1, b2)) => af(a1, b1, env) && af(a2, b2, env),
        (Not(a1), Not(b1)) => af(a1, b1, env),
        (Forall(x, t1, a1), Forall(y, t2, b1)) | (Exists(x, t1, a1), Exists(y, t2, b1)) => {
            t1 == t2 && env.with(x, y, |env| af(a1, b1, env))
        }
        (
            MacSup {
                target: t1,
                binder: x1,
                ty: ty1,
                cond: c1,
                body: b1,
            },
            MacSup {
                target: t2,
                binder: x2,
                ty: ty2,
                cond: c2,
                body: b2,
            },
        ) => {
            ty1 == ty2
                && ae(t1, t2, env)
                && env.with(x1, x2, |env| af(c1, c2, env) && ae(b1, b2, env))
        }
        (
            MacULift {
                param: p1,
                grade: g1,
                val_ty: v1,
                body: b1,
            },
            MacULift {
                param: p2,
                grade: g2,
                val_ty: v2,
                body: b2,
            },
        ) => p1 == p2 && v1 == v2 && ae(g1, g2, env) && af(b1, b2, env),
        (
            MacRLift {
                param: p1,
                grade: g1,
                val_ty1: v1,
                val_ty2: w1,
                body: b1,
            },
            MacRLift {
                param: p2,
                grade: g2,
                val_ty1: v2,
                val_ty2: w2,
                body: b2,
            },
        ) => p1 == p2 && v1 == v2 && w1 == w2 && ae(g1, g2, env) && af(b1, b2, env),
        (
            MacKlDef {
                d1: a1,
                d2: a2,
                density: a3,
            },
            MacKlDef {
                d1: b1,
                d2: b2,
                density: b3,
            },
        ) => ae(a1, b1, env) && ae(a2, b2, env) && ae(a3, b3, env),
        (
            MacLip {
                target: t1,
                arg_ty: ty1,
                dom_metric: d1,
                cod_metric: c1,
                func: f1,
            },
            MacLip {
                target: t2,
                arg_ty: ty2,
                dom_metric: d2,
                cod_metric: c2,
                func: f2,
            },
        ) => {
            ty1 == ty2
                && ae(t1, t2, env)
                && ae(d1, d2, env)
                && ae(c1, c2, env)
                && ae(f1, f2, env)
        }
        (
            MacWass {
                target: t1,
                arg_ty: ty1,
                metric: m1,
                mu1: a1,
                mu2: a2,
            },
            MacWass {
                target: t2,
                arg_ty: ty2,
                metric: m2,
                mu1: b1,
                mu2: b2,
            },
        ) => {
            ty1 == ty2
                && ae(t1, t2, env)
                && ae(m1, m2, env)
                && ae(a1, b1, env)
                && ae(a2, b2, env)
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Expr;
    use crate::types::TypeTerm;

    fn lam(x: &str, b: Expr) -> Expr {
        Expr::lam(x, TypeTerm::Real, b)
    }

    #[test]
    fn alpha_eq_examples() {
        // fun x -> x  ~  fun y -> y
        assert!(alpha_eq_expr(
            &lam("x", Expr::var("x")),
            &lam("y", Expr::var("y"))
        ));
        // fun x -> fun y -> x  !~  fun y -> fun x -> x
        assert!(!alpha_eq_expr(
            &lam("x", lam("y", Expr::var("x"))),
            &lam("y", lam("x", Expr::var("x")))
        ));
    }

    #[test]
    fn forced_renaming_on_capture() {
        // (fun x -> x + y)[y := x]  gives  fun x' -> x' + x
        let t = lam(
            "x",
            Expr::prim(crate::ast::Prim::Add, vec![Expr::var("x"), Expr::var("y")]),
        );
        let out = subst_expr(&t, "y", &Expr::var("x"));
        let expect = lam(
            "z",
            Expr::prim(crate::ast::Prim::Add, vec![Expr::var("z"), Expr::var("x")]),
        );
        assert!(alpha_eq_expr(&out, &expect));
    }

    #[test]
    fn no_capture_through_expect() {
        // (E[z ~ d](z))[d := Bern(p)]
        let t = Expr::expect("z", Expr::var("d"), Expr::var("z"));
        let out = subst_expr(&t, "d", &Expr::Bern(Box::new(Expr::var("p"))));
        let expect = Expr::expect("z", Expr::Bern(Box::new(Expr::var("p"))), Expr::var("z"));
        assert!(alpha_eq_expr(&out, &expect));
    }

    #[test]
    fn free_vars_of_bind() {
        let t = Expr::bind(
            Expr::var("d"),
            lam(
                "x",
                Expr::ret(Expr::prim(
                    crate::ast::Prim::Add,
                    vec![Expr::var("x"), Expr::var("c")],
                )),
            ),
        );
        let fv = free_vars_expr(&t);
        assert!(fv.contains("d") && fv.contains("c") && !fv.contains("x"));
    }
}
